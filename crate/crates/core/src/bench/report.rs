//! Run report.
//!
//! A line-oriented document of `[section]` headers followed by `key=value`
//! lines. Sections, in order:
//!
//! * `[config]`: echo of every setting that shaped the run, seed included.
//! * `[results]`: `correctness_pct`, op totals, and per workload
//!   `<workload>.{attempted,succeeded,denied,errored,matched,fillers}`.
//! * `[space]`: `records`, `personal_bytes`, `total_bytes`, `space_factor`,
//!   measured after the controller workload.
//! * `[timing]`: `load_ms` and `<workload>.completion_ms`.
//!
//! Everything but `[timing]` is deterministic for a STRICT run with a fixed
//! seed, so [`Report::body`] can be diffed across runs.

use std::fmt::Write as _;

use super::metrics::{MetricsReport, OpSample};

pub const TIMING: &str = "timing";

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Report {
    sections: Vec<(String, Vec<(String, String)>)>,
}

impl Report {
    pub fn new() -> Self {
        Report::default()
    }

    pub fn build(
        config: &[(String, String)],
        metrics: &MetricsReport,
        counters: &[(&str, u64)],
        load_ms: f64,
    ) -> Report {
        let mut r = Report::new();
        for (k, v) in config {
            r.push("config", k, v);
        }
        r.push("results", "correctness_pct", format!("{:.4}", metrics.correctness_pct));
        r.push("results", "ops_attempted", metrics.attempted());
        r.push("results", "ops_matched", metrics.matched());
        for (k, v) in counters {
            r.push("results", *k, v);
        }
        for w in &metrics.workloads {
            let n = w.name.name();
            r.push("results", format!("{n}.attempted"), w.attempted);
            r.push("results", format!("{n}.succeeded"), w.succeeded);
            r.push("results", format!("{n}.denied"), w.denied);
            r.push("results", format!("{n}.errored"), w.errored);
            r.push("results", format!("{n}.matched"), w.matched);
            r.push("results", format!("{n}.fillers"), w.fillers);
        }
        if let Some(s) = metrics.space {
            r.push("space", "records", s.records);
            r.push("space", "personal_bytes", s.personal_data_bytes);
            r.push("space", "total_bytes", s.total_db_bytes);
            r.push("space", "space_factor", format!("{:.4}", s.space_factor));
        }
        r.push(TIMING, "load_ms", format!("{load_ms:.3}"));
        for w in &metrics.workloads {
            r.push(TIMING, format!("{}.completion_ms", w.name), format!("{:.3}", w.completion_ms));
        }
        r
    }

    pub fn push(&mut self, section: &str, key: impl Into<String>, value: impl ToString) {
        let entry = (key.into(), value.to_string());
        match self.sections.iter_mut().find(|(s, _)| s == section) {
            Some((_, lines)) => lines.push(entry),
            None => self.sections.push((section.to_string(), vec![entry])),
        }
    }

    pub fn get(&self, section: &str, key: &str) -> Option<&str> {
        self.sections
            .iter()
            .find(|(s, _)| s == section)
            .and_then(|(_, lines)| lines.iter().find(|(k, _)| k == key))
            .map(|(_, v)| v.as_str())
    }

    pub fn sections(&self) -> impl Iterator<Item = (&str, &[(String, String)])> {
        self.sections.iter().map(|(s, l)| (s.as_str(), l.as_slice()))
    }

    fn write(&self, include_timing: bool) -> String {
        let mut out = String::from("# gdprkv benchmark report\n");
        for (section, lines) in &self.sections {
            if !include_timing && section == TIMING {
                continue;
            }
            let _ = writeln!(out, "[{section}]");
            for (k, v) in lines {
                let _ = writeln!(out, "{k}={v}");
            }
        }
        out
    }

    /// The full document.
    pub fn render(&self) -> String {
        self.write(true)
    }

    /// The document without `[timing]`.
    pub fn body(&self) -> String {
        self.write(false)
    }

    pub fn parse(text: &str) -> Result<Report, String> {
        let mut r = Report::new();
        let mut section: Option<String> = None;
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                section = Some(name.to_string());
                continue;
            }
            let s = section.as_deref().ok_or_else(|| format!("line {}: entry outside a section", n + 1))?;
            let (k, v) = line.split_once('=').ok_or_else(|| format!("line {}: expected key=value", n + 1))?;
            r.push(s, k, v);
        }
        Ok(r)
    }
}

pub const LATENCY_HEADER: &str = "worker,workload,template,op,start_us,latency_us,class,matched";

/// Per-operation latency table.
pub fn latency_csv(samples: &[OpSample]) -> String {
    let mut out = String::with_capacity(samples.len() * 64 + LATENCY_HEADER.len() + 1);
    out.push_str(LATENCY_HEADER);
    out.push('\n');
    for s in samples {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            s.worker,
            s.workload,
            s.template.map_or("filler", |t| t.name()),
            s.op,
            s.start_us,
            s.latency_us,
            s.class,
            s.matched
        );
    }
    out
}
