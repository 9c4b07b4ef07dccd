use std::io::{self, Write};

use crate::scalar::Scalar;

/// One row of a bounding run: bounds after `queries` evaluations.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TracePoint<T> {
    pub step: usize,
    pub queries: u64,
    pub p_lower: T,
    pub p_upper: T,
    pub unknown_mass: T,
}

pub const TRACE_HEADER: &str = "step,queries,p_lower,p_upper,unknown_mass";

/// Write `step,queries,p_lower,p_upper,unknown_mass` rows with a header.
pub fn write_trace_csv<T: Scalar, W: Write>(rows: &[TracePoint<T>], mut out: W) -> io::Result<()> {
    writeln!(out, "{TRACE_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{}",
            r.step, r.queries, r.p_lower, r.p_upper, r.unknown_mass
        )?;
    }
    Ok(())
}
