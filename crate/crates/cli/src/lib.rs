//! Experiment runner: configuration files, replication studies, CSV
//! reports and optional SVG plots.

pub mod config;
pub mod experiments;
pub mod report;
pub mod svg;

use std::fmt;
use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use config::ExperimentConfig;
use report::{summarize, write_rows, write_summary, ReportRow};

/// Environment variable that overrides the configured output directory.
pub const OUTPUT_DIR_ENV: &str = "RAREBOUND_OUTPUT_DIR";

#[derive(Debug)]
pub enum CliError {
    /// Bad configuration or arguments; exit code 2.
    Config(String),
    /// A method failed while running; exit code 3.
    Method(String),
    /// Report files could not be written; exit code 1.
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Config(_) => 2,
            Self::Method(_) => 3,
            Self::Io(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Config(m) => write!(f, "configuration error: {m}"),
            Self::Method(m) => write!(f, "method error: {m}"),
            Self::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<config::ConfigError> for CliError {
    fn from(e: config::ConfigError) -> Self {
        Self::Config(e.to_string())
    }
}

impl From<rarebound::Error> for CliError {
    fn from(e: rarebound::Error) -> Self {
        Self::Method(e.to_string())
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        Self::Io(e.to_string())
    }
}

/// Output directory: explicit argument, then the environment, then the config.
pub fn resolve_output_dir(explicit: Option<&Path>, configured: &Path) -> PathBuf {
    explicit
        .map(Path::to_path_buf)
        .or_else(|| std::env::var_os(OUTPUT_DIR_ENV).filter(|v| !v.is_empty()).map(PathBuf::from))
        .unwrap_or_else(|| configured.to_path_buf())
}

pub fn write_file(path: &Path, body: impl FnOnce(&mut BufWriter<fs::File>) -> io::Result<()>) -> Result<(), CliError> {
    let file = fs::File::create(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let mut w = BufWriter::new(file);
    body(&mut w)
        .and_then(|_| w.flush())
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

/// Run every replication and write `rows.csv`, `summary.csv` and, when
/// enabled, `plot.svg` into `out_dir`.
pub fn run_experiment(config: &ExperimentConfig, out_dir: &Path) -> Result<Vec<ReportRow>, CliError> {
    let rows = experiments::run_replications(config)?;
    fs::create_dir_all(out_dir)?;
    write_file(&out_dir.join("rows.csv"), |w| write_rows(&rows, w))?;
    write_file(&out_dir.join("summary.csv"), |w| write_summary(&summarize(&rows), w))?;
    if config.svg && !rows.is_empty() {
        let svg = bounds_chart(&rows).render();
        fs::write(out_dir.join("plot.svg"), svg)?;
    }
    Ok(rows)
}

fn bounds_chart(rows: &[ReportRow]) -> svg::Chart {
    let pick = |label: &str, get: fn(&ReportRow) -> Option<f64>| svg::Series {
        label: label.into(),
        points: rows
            .iter()
            .filter_map(|r| Some((r.replication as f64, get(r)?)))
            .collect(),
        scatter: true,
    };
    let mut series = Vec::new();
    if rows.iter().any(|r| r.p_lower.is_some()) {
        series.push(pick("p_lower", |r| r.p_lower));
        series.push(pick("p_upper", |r| r.p_upper));
    } else {
        series.push(pick("p_hat", |r| r.p_hat));
    }
    svg::Chart {
        title: format!("{} on {}", rows[0].method, rows[0].benchmark),
        x_label: "replication".into(),
        y_label: "probability".into(),
        log_x: false,
        log_y: true,
        series,
        reference: vec![(rows[0].p_exact, "exact p".into())],
    }
}
