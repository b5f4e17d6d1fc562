use std::io::Write;

use swarmlang::Datum;
use swarmlang_sim::{RunResult, SimError};

pub enum Literal {
    Int(i64),
    Float(f64),
    Str(String),
}

/// Script-like rendering: `{x = 1, y = "a"}`.
pub fn datum(d: &Datum) -> String {
    match d {
        Datum::Nil => "nil".into(),
        Datum::Int(v) => v.to_string(),
        Datum::Float(v) => format!("{v:?}"),
        Datum::Str(s) => format!("{s:?}"),
        Datum::Table(pairs) => {
            let inner: Vec<String> = pairs
                .iter()
                .map(|(k, v)| match k {
                    Datum::Str(s) => format!("{s} = {}", datum(v)),
                    other => format!("[{}] = {}", datum(other), datum(v)),
                })
                .collect();
            format!("{{{}}}", inner.join(", "))
        }
    }
}

/// Per-step CSV of a single run: the range of the predicate's readout over
/// robots that have a numeric value, and whether the predicate held.
pub fn series<W: Write>(out: W, result: &RunResult) -> Result<(), SimError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["step", "numeric", "min", "max", "converged"])?;
    for m in &result.metrics {
        let nums: Vec<f64> = m.readout.iter().flatten().copied().collect();
        let (lo, hi) = nums
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(*v), hi.max(*v)));
        let show = |v: f64| if nums.is_empty() { String::new() } else { v.to_string() };
        w.write_record([
            m.step.to_string(),
            nums.len().to_string(),
            show(lo),
            show(hi),
            u8::from(m.converged).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
