//! CSV report rows and their grouped summary.
//!
//! Floats are written with Rust's shortest round-trip formatting, so a row
//! parsed back yields the exact `f64` that was summarized. Absent values are
//! empty fields.

use std::collections::BTreeMap;
use std::io::{self, Write};

pub const ROWS_HEADER: &str =
    "method,benchmark,d,p_exact,replication,queries,p_lower,p_upper,p_hat,rel_precision,miss_flag,wall_time_s";

pub const SUMMARY_HEADER: &str = "method,benchmark,d,p_exact,metric,count,mean,min,q05,q50,q95,max";

/// Per-replication outcome.
#[derive(Clone, Debug, PartialEq)]
pub struct ReportRow {
    pub method: String,
    pub benchmark: String,
    pub d: usize,
    pub p_exact: f64,
    pub replication: u64,
    pub queries: u64,
    pub p_lower: Option<f64>,
    pub p_upper: Option<f64>,
    /// Point estimate; the upper bound for bounding methods.
    pub p_hat: Option<f64>,
    pub rel_precision: Option<f64>,
    pub miss_flag: bool,
    pub wall_time_s: Option<f64>,
}

impl ReportRow {
    /// Fill the derived columns from the bounds and estimate.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        method: &str,
        benchmark: &str,
        d: usize,
        p_exact: f64,
        replication: u64,
        queries: u64,
        bounds: Option<(f64, f64)>,
        p_hat: Option<f64>,
    ) -> Self {
        let (p_lower, p_upper) = match bounds {
            Some((l, u)) => (Some(l), Some(u)),
            None => (None, None),
        };
        let p_hat = p_hat.or(p_upper);
        let rel_precision = bounds.map(|(l, u)| (u - l) / p_exact);
        let outside = bounds.is_some_and(|(l, u)| p_exact < l || p_exact > u);
        let miss_flag = outside || p_hat.is_some_and(|p| p < p_exact);
        Self {
            method: method.into(),
            benchmark: benchmark.into(),
            d,
            p_exact,
            replication,
            queries,
            p_lower,
            p_upper,
            p_hat,
            rel_precision,
            miss_flag,
            wall_time_s: None,
        }
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_rows<W: Write>(rows: &[ReportRow], mut out: W) -> io::Result<()> {
    writeln!(out, "{ROWS_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            r.method,
            r.benchmark,
            r.d,
            r.p_exact,
            r.replication,
            r.queries,
            opt(r.p_lower),
            opt(r.p_upper),
            opt(r.p_hat),
            opt(r.rel_precision),
            u8::from(r.miss_flag),
            opt(r.wall_time_s),
        )?;
    }
    Ok(())
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let (i, frac) = (pos.floor() as usize, pos.fract());
    match sorted.get(i + 1) {
        Some(&next) if frac > 0.0 => sorted[i] + frac * (next - sorted[i]),
        _ => sorted[i],
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub method: String,
    pub benchmark: String,
    pub d: usize,
    pub p_exact: f64,
    pub metric: &'static str,
    pub count: usize,
    pub mean: f64,
    pub min: f64,
    pub q05: f64,
    pub q50: f64,
    pub q95: f64,
    pub max: f64,
}

type Metric = (&'static str, fn(&ReportRow) -> Option<f64>);

const METRICS: &[Metric] = &[
    ("queries", |r| Some(r.queries as f64)),
    ("p_lower", |r| r.p_lower),
    ("p_upper", |r| r.p_upper),
    ("p_hat", |r| r.p_hat),
    ("rel_precision", |r| r.rel_precision),
    ("miss_flag", |r| Some(f64::from(u8::from(r.miss_flag)))),
    ("wall_time_s", |r| r.wall_time_s),
];

/// Plain means and quantiles per `(method, benchmark, d)` and metric, over
/// the rows where the metric is present.
pub fn summarize(rows: &[ReportRow]) -> Vec<SummaryRow> {
    let mut groups: BTreeMap<(&str, &str, usize), Vec<&ReportRow>> = BTreeMap::new();
    for r in rows {
        groups.entry((&r.method, &r.benchmark, r.d)).or_default().push(r);
    }
    let mut out = Vec::new();
    for ((method, benchmark, d), members) in groups {
        for &(metric, get) in METRICS {
            let mut v: Vec<f64> = members.iter().filter_map(|r| get(r)).collect();
            if v.is_empty() {
                continue;
            }
            let mean = v.iter().sum::<f64>() / v.len() as f64;
            v.sort_by(f64::total_cmp);
            out.push(SummaryRow {
                method: method.into(),
                benchmark: benchmark.into(),
                d,
                p_exact: members[0].p_exact,
                metric,
                count: v.len(),
                mean,
                min: v[0],
                q05: quantile(&v, 0.05),
                q50: quantile(&v, 0.5),
                q95: quantile(&v, 0.95),
                max: v[v.len() - 1],
            });
        }
    }
    out
}

pub fn write_summary<W: Write>(rows: &[SummaryRow], mut out: W) -> io::Result<()> {
    writeln!(out, "{SUMMARY_HEADER}")?;
    for s in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            s.method, s.benchmark, s.d, s.p_exact, s.metric, s.count, s.mean, s.min, s.q05, s.q50, s.q95, s.max
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derived_columns() {
        let r = ReportRow::new("dyadic", "b", 1, 0.1, 0, 5, Some((0.05, 0.2)), None);
        assert_eq!(r.p_hat, Some(0.2));
        assert!((r.rel_precision.unwrap() - 1.5).abs() < 1e-15);
        assert!(!r.miss_flag);
        assert!(ReportRow::new("dyadic", "b", 1, 0.1, 0, 5, Some((0.11, 0.2)), None).miss_flag);
        let s = ReportRow::new("shift", "b", 2, 0.1, 0, 5, None, Some(0.09));
        assert!(s.miss_flag && s.rel_precision.is_none());
    }

    #[test]
    fn quantiles_interpolate() {
        let v = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(quantile(&v, 0.5), 3.0);
        assert_eq!(quantile(&v, 0.0), 1.0);
        assert_eq!(quantile(&v, 1.0), 5.0);
        assert!((quantile(&v, 0.05) - 1.2).abs() < 1e-15);
        assert_eq!(quantile(&[7.0], 0.95), 7.0);
    }

    #[test]
    fn summary_skips_absent_metrics() {
        let rows = vec![
            ReportRow::new("shift", "b", 2, 0.1, 0, 10, None, Some(0.12)),
            ReportRow::new("shift", "b", 2, 0.1, 1, 10, None, Some(0.08)),
        ];
        let s = summarize(&rows);
        assert!(s.iter().all(|r| r.metric != "p_lower" && r.metric != "rel_precision"));
        let miss = s.iter().find(|r| r.metric == "miss_flag").unwrap();
        assert_eq!(miss.mean, 0.5);
        let p = s.iter().find(|r| r.metric == "p_hat").unwrap();
        assert_eq!(p.mean, (0.12 + 0.08) / 2.0);
    }
}
