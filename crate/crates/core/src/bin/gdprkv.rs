fn main() {
    env_logger::init();
    std::process::exit(gdprkv::cli::main(std::env::args().collect()));
}
