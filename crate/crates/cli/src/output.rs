use std::io::{self, Write};

use meixner::report::{MethodEntry, Record};
use serde::Serialize;

/// Flat CSV row for cdf and value records: one row per method.
#[derive(Serialize)]
struct MethodRow<'a> {
    kind: &'static str,
    q: &'a str,
    m: usize,
    n: usize,
    eta: i64,
    method: &'static str,
    value: Option<&'a str>,
    exact: Option<&'a str>,
    error_estimate: Option<&'a str>,
    tolerance: Option<&'a str>,
    wall_ms: Option<&'a str>,
    error: Option<&'a str>,
    agreement: Option<bool>,
}

#[derive(Serialize)]
struct TransitionRow<'a> {
    q: &'a str,
    steps: usize,
    x: String,
    y: String,
    exact: &'a str,
    value: &'a str,
}

fn join(v: &[i64]) -> String {
    v.iter().map(i64::to_string).collect::<Vec<_>>().join(",")
}

fn method_row<'a>(
    kind: &'static str,
    p: &'a meixner::report::CdfParams,
    e: &'a MethodEntry,
    agreement: Option<bool>,
) -> MethodRow<'a> {
    MethodRow {
        kind,
        q: &p.q,
        m: p.m,
        n: p.n,
        eta: p.eta,
        method: e.method.name(),
        value: e.value.as_deref(),
        exact: e.exact.as_deref(),
        error_estimate: e.error_estimate.as_deref(),
        tolerance: e.tolerance.as_deref(),
        wall_ms: e.wall_ms.as_deref(),
        error: e.error.as_deref(),
        agreement,
    }
}

enum Format {
    Json(io::StdoutLock<'static>),
    Csv(Box<csv::Writer<io::StdoutLock<'static>>>),
}

pub struct Sink {
    format: Format,
    timing: bool,
}

impl Sink {
    pub fn stdout(csv: bool, timing: bool) -> Self {
        let out = io::stdout().lock();
        let format = if csv {
            Format::Csv(Box::new(csv::Writer::from_writer(out)))
        } else {
            Format::Json(out)
        };
        Self { format, timing }
    }

    pub fn emit(&mut self, record: &Record) -> Result<(), crate::Failure> {
        let mut owned;
        let mut record = record;
        if !self.timing {
            owned = record.clone();
            owned.strip_timing();
            record = &owned;
        }
        match &mut self.format {
            Format::Json(out) => {
                let line = serde_json::to_string(record).map_err(|e| crate::Failure::Runtime(e.to_string()))?;
                writeln!(out, "{line}")?;
            }
            Format::Csv(w) => match record {
                Record::Cdf(r) => {
                    for e in &r.methods {
                        w.serialize(method_row("cdf", &r.params, e, Some(r.agreement)))?;
                    }
                }
                Record::Value(r) => w.serialize(method_row("value", &r.params, &r.entry, None))?,
                Record::Transition(r) => w.serialize(TransitionRow {
                    q: &r.q,
                    steps: r.steps,
                    x: join(&r.x),
                    y: join(&r.y),
                    exact: &r.exact,
                    value: &r.value,
                })?,
                Record::Joint(r) => w.serialize(r)?,
            },
        }
        Ok(())
    }

    pub fn finish(&mut self) -> Result<(), crate::Failure> {
        match &mut self.format {
            Format::Json(out) => out.flush()?,
            Format::Csv(w) => w.flush()?,
        }
        Ok(())
    }
}
