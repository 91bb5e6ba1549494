use gdprkv_py::gdprkv_py;
use pyo3::ffi::c_str;
use pyo3::prelude::*;

fn with_module<F: FnOnce(Python<'_>)>(f: F) {
    pyo3::append_to_inittab!(gdprkv_py);
    Python::attach(f);
}

#[test]
fn record_codec_engine_and_sampler_from_python() {
    with_module(|py| {
        py.run(
            c_str!(
                r#"
import gdprkv
line = "ph-1x4b;123-456-7890;PUR=ads,2fa;TTL=7776000;USR=neo;OBJ=;DEC=;SHR=;SRC=first-party;"
r = gdprkv.Record.parse(line)
assert r.pur == ["ads", "2fa"] and r.to_line() == line

e = gdprkv.Engine()
e.put(r)
assert e.execute("customer:neo", "READ-METADATA-BY-KEY", "ph-1x4b")[0].startswith("ph-1x4b;")
try:
    e.execute("processor:ana", "DELETE-RECORD-BY-KEY", "ph-1x4b")
    raise AssertionError("processor deleted a record")
except gdprkv.DeniedError as err:
    assert "DENIED" in str(err)
try:
    e.execute("controller", "READ-DATA-BY-KEY", "nope")
    raise AssertionError("missing key read")
except gdprkv.NotFoundError:
    pass

z = gdprkv.ZipfSampler(3, theta=1.0, seed=1)
assert sorted(set(z.sample_many(1000))) == [1, 2, 3]
assert abs(z.pmf(2) - 3 / 11) < 1e-12 and z.pmf(4) == 0.0
"#
            ),
            None,
            None,
        )
        .inspect_err(|e| e.print(py))
        .expect("python script");
    });
}
