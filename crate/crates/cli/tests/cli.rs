use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn rarebound(args: &[&str], env_out: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_rarebound"));
    cmd.args(args).env_remove("RAREBOUND_OUTPUT_DIR");
    if let Some(dir) = env_out {
        cmd.env("RAREBOUND_OUTPUT_DIR", dir);
    }
    cmd.output().expect("binary runs")
}

fn run_config(dir: &TempDir, name: &str, body: &str) -> (Output, std::path::PathBuf) {
    let cfg = dir.path().join(format!("{name}.cfg"));
    fs::write(&cfg, body).unwrap();
    let out = dir.path().join(name);
    let o = rarebound(&["run", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()], None);
    (o, out)
}

/// Header names and records of a CSV without quoting.
fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines.map(|l| l.split(',').map(String::from).collect()).collect();
    (header, rows)
}

fn column(header: &[String], name: &str) -> usize {
    header.iter().position(|h| h == name).unwrap()
}

const SMALL_MCMC: &str = "method = monotone-mcmc
benchmark = example1:d=2:p=5e-2
budget = 25
replications = 4
seed = 9
[monotone]
chain_length = 2000
";

#[test]
fn same_seed_gives_byte_identical_rows_for_any_pool_size() {
    let dir = TempDir::new().unwrap();
    let (a, out_a) = run_config(&dir, "a", &format!("threads = 1\n{SMALL_MCMC}"));
    let (b, out_b) = run_config(&dir, "b", &format!("threads = 3\n{SMALL_MCMC}"));
    assert!(a.status.success() && b.status.success());
    let rows_a = fs::read(out_a.join("rows.csv")).unwrap();
    assert_eq!(rows_a, fs::read(out_b.join("rows.csv")).unwrap());
    let (header, rows) = read_csv(&out_a.join("rows.csv"));
    let rep = column(&header, "replication");
    let order: Vec<&str> = rows.iter().map(|r| r[rep].as_str()).collect();
    assert_eq!(order, ["0", "1", "2", "3"]);
}

#[test]
fn summary_means_are_plain_row_means() {
    let dir = TempDir::new().unwrap();
    let (o, out) = run_config(&dir, "m", SMALL_MCMC);
    assert!(o.status.success());
    let (rh, rows) = read_csv(&out.join("rows.csv"));
    let (sh, summary) = read_csv(&out.join("summary.csv"));
    let (metric, mean) = (column(&sh, "metric"), column(&sh, "mean"));
    let mut checked = 0;
    for s in &summary {
        let c = column(&rh, &s[metric]);
        let values: Vec<f64> = rows
            .iter()
            .filter(|r| !r[c].is_empty())
            .map(|r| r[c].parse().unwrap())
            .collect();
        let expect = values.iter().sum::<f64>() / values.len() as f64;
        let got: f64 = s[mean].parse().unwrap();
        assert!((got - expect).abs() <= 1e-12, "{}: {got} vs {expect}", s[metric]);
        checked += 1;
    }
    assert!(checked >= 6);
}

#[test]
fn bounding_rows_satisfy_schema_invariants() {
    let dir = TempDir::new().unwrap();
    let (o, out) = run_config(&dir, "s", SMALL_MCMC);
    assert!(o.status.success());
    let (h, rows) = read_csv(&out.join("rows.csv"));
    assert_eq!(
        h.join(","),
        "method,benchmark,d,p_exact,replication,queries,p_lower,p_upper,p_hat,rel_precision,miss_flag,wall_time_s"
    );
    for r in &rows {
        let get = |k: &str| r[column(&h, k)].parse::<f64>().unwrap();
        let (p, lo, up) = (get("p_exact"), get("p_lower"), get("p_upper"));
        assert_eq!(get("p_hat"), up);
        assert!((get("rel_precision") - (up - lo) / p).abs() <= 1e-15);
        assert_eq!(get("miss_flag") == 1.0, p < lo || p > up);
        assert_eq!(get("queries"), 25.0);
        assert!(r[column(&h, "wall_time_s")].is_empty());
    }
}

#[test]
fn dyadic_one_dimensional_budget_32() {
    let dir = TempDir::new().unwrap();
    let (o, out) = run_config(
        &dir,
        "dy",
        "method = dyadic\nbenchmark = lipschitz1d:p=2.1e-3\nbudget = 32\nreplications = 1\n",
    );
    assert!(o.status.success());
    let (h, rows) = read_csv(&out.join("rows.csv"));
    let up: f64 = rows[0][column(&h, "p_upper")].parse().unwrap();
    let lo: f64 = rows[0][column(&h, "p_lower")].parse().unwrap();
    assert!(lo <= 2.1e-3 && (2.1e-3..=2.0 * 2.1e-3).contains(&up), "[{lo}, {up}]");
    assert_eq!(rows[0][column(&h, "queries")], "32");
}

#[test]
fn zero_replications_write_headers_only() {
    let dir = TempDir::new().unwrap();
    let (o, out) = run_config(&dir, "z", "replications = 0\n");
    assert!(o.status.success());
    assert_eq!(fs::read_to_string(out.join("rows.csv")).unwrap().lines().count(), 1);
    assert_eq!(fs::read_to_string(out.join("summary.csv")).unwrap().lines().count(), 1);
}

#[test]
fn exit_codes_separate_config_and_method_errors() {
    let dir = TempDir::new().unwrap();
    let (o, _) = run_config(&dir, "k", "budget = 10\n[monotone]\nwindw = 3\n");
    assert_eq!(o.status.code(), Some(2));
    let msg = String::from_utf8_lossy(&o.stderr);
    assert!(msg.contains("line 3") && msg.contains("windw"), "{msg}");
    let (o, _) = run_config(&dir, "b", "benchmark = nosuch:d=2\n");
    assert_eq!(o.status.code(), Some(2));
    let (o, _) = run_config(&dir, "l", "method = dyadic\nbenchmark = example1:d=2:p=0.1\n");
    assert_eq!(o.status.code(), Some(2), "no Lipschitz constant is a config error");
    let (o, _) = run_config(
        &dir,
        "m",
        "method = dyadic\nbenchmark = lipschitz1d:p=0.1\nreplications = 1\n[dyadic]\nlipschitz = -1\n",
    );
    assert_eq!(o.status.code(), Some(3));
    let o = rarebound(&["run", dir.path().join("missing.cfg").to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn environment_overrides_configured_output_dir() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("e.cfg");
    let target = dir.path().join("from-env");
    fs::write(
        &cfg,
        format!(
            "method = dyadic\nbenchmark = lipschitz1d:p=0.1\nbudget = 4\nreplications = 1\noutput_dir = {}\n",
            dir.path().join("from-config").display()
        ),
    )
    .unwrap();
    let o = rarebound(&["run", cfg.to_str().unwrap(), "--svg"], Some(&target));
    assert!(o.status.success());
    assert!(target.join("rows.csv").exists() && target.join("plot.svg").exists());
    assert!(!dir.path().join("from-config").exists());
}

#[test]
fn surrogate_methods_report_estimates_without_bounds() {
    let dir = TempDir::new().unwrap();
    let (o, out) = run_config(
        &dir,
        "sh",
        "method = shift\nbenchmark = example1:d=2:p=0.1\nreplications = 2\n[surrogate]\nfamily = polynomial\ndegree = 3\nmc_samples = 2000\n",
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let (h, rows) = read_csv(&out.join("rows.csv"));
    for r in &rows {
        assert!(r[column(&h, "p_lower")].is_empty() && r[column(&h, "rel_precision")].is_empty());
        let p_hat: f64 = r[column(&h, "p_hat")].parse().unwrap();
        assert_eq!(r[column(&h, "miss_flag")] == "1", p_hat < 0.1);
        assert_eq!(r[column(&h, "queries")], "305");
    }
    let (o, out) = run_config(
        &dir,
        "fsd",
        "method = fsd\nbenchmark = linear:d=2:y=0.5\nreplications = 1\n[fsd]\ntrain = 40\ndegree = 2\nmc_samples = 2000\n",
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let (h, rows) = read_csv(&out.join("rows.csv"));
    assert_eq!(rows[0][column(&h, "queries")], "40");
}

#[test]
fn lambda_table_crossings() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("lt");
    let o = rarebound(&["lambda-table", "--p", "0.1,0.01", "--out", out.to_str().unwrap(), "--svg"], None);
    assert!(o.status.success());
    let (h, rows) = read_csv(&out.join("lambda_crossings.csv"));
    let n: Vec<f64> = rows.iter().map(|r| r[column(&h, "n_crossing")].parse().unwrap()).collect();
    assert!((n[0] / 512.0 - 1.0).abs() <= 0.05, "{}", n[0]);
    assert!((7800.0..=8700.0).contains(&n[1]), "{}", n[1]);
    let (h, rows) = read_csv(&out.join("lambda.csv"));
    let first: Vec<&Vec<String>> = rows.iter().filter(|r| r[column(&h, "n")] == "1").collect();
    assert_eq!(first.len(), 2);
    for r in first {
        let (p, l): (f64, f64) = (r[0].parse().unwrap(), r[2].parse().unwrap());
        assert_eq!(l, (-p / 6.0).exp());
    }
    assert!(out.join("lambda.svg").exists());
}

#[test]
fn timing_rows_cover_methods_times_dims() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("t");
    let o = rarebound(
        &["timing", "--dims", "2,3", "--methods", "mcmc,rejection", "--budget", "5", "--out", out.to_str().unwrap()],
        None,
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let (h, rows) = read_csv(&out.join("timing.csv"));
    assert_eq!(rows.len(), 4);
    for r in &rows {
        assert!(r[column(&h, "mean_wall_time_s")].parse::<f64>().unwrap() > 0.0);
    }
}

#[test]
fn list_commands_succeed() {
    let o = rarebound(&["list-benchmarks"], None);
    assert!(o.status.success() && String::from_utf8_lossy(&o.stdout).contains("example1"));
    let o = rarebound(&["list-keys"], None);
    assert!(o.status.success() && String::from_utf8_lossy(&o.stdout).contains("chain_length"));
    assert_eq!(rarebound(&["frobnicate"], None).status.code(), Some(2));
}
