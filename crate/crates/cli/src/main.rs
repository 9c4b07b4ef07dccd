use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rarebound::mcmc::BatchSource;
use rarebound::surrogate::{log_grid, DEFAULT_C};
use rarebound_cli::config::{ExperimentConfig, KEYS};
use rarebound_cli::experiments::{lambda_table, timing_study};
use rarebound_cli::svg::{Chart, Series};
use rarebound_cli::{resolve_output_dir, run_experiment, write_file, CliError};

#[derive(Parser)]
#[command(name = "rarebound", version, about = "Conservative bounds on rare-event failure probabilities")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Source {
    Mcmc,
    Rejection,
}

#[derive(Subcommand)]
enum Command {
    /// Run the replications described by a configuration file.
    Run {
        config: PathBuf,
        /// Output directory, overriding the environment and the config.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write plot.svg.
        #[arg(long)]
        svg: bool,
    },
    /// Tabulate λ(n, p) and the sample sizes where it crosses p.
    LambdaTable {
        #[arg(long, value_delimiter = ',', default_value = "0.1,0.01,0.001")]
        p: Vec<f64>,
        #[arg(long, default_value_t = 1)]
        n_min: u64,
        #[arg(long, default_value_t = 1_000_000)]
        n_max: u64,
        /// Grid points on the log scale.
        #[arg(long, default_value_t = 200)]
        points: usize,
        #[arg(long, default_value_t = DEFAULT_C)]
        c: f64,
        #[arg(long, default_value = "rarebound-out")]
        out: PathBuf,
        #[arg(long)]
        svg: bool,
    },
    /// Wall-clock comparison of chain and rejection batches per dimension.
    Timing {
        #[arg(long, value_delimiter = ',', default_value = "2,3,4,5")]
        dims: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_value = "mcmc,rejection")]
        methods: Vec<Source>,
        #[arg(long, default_value_t = 100)]
        budget: u64,
        /// Failure level of the Gamma-ratio benchmark.
        #[arg(long, default_value_t = 5e-3)]
        p: f64,
        #[arg(long, default_value_t = 1)]
        replications: u64,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value = "rarebound-out")]
        out: PathBuf,
    },
    /// List benchmark families and their name syntax.
    ListBenchmarks,
    /// List configuration keys with their defaults.
    ListKeys,
}

fn lambda_chart(points: &[rarebound::surrogate::LambdaPoint], p_list: &[f64], c: f64) -> Chart {
    Chart {
        title: format!("lambda(n, p), C = {c}"),
        x_label: "n".into(),
        y_label: "lambda".into(),
        log_x: true,
        log_y: true,
        series: p_list
            .iter()
            .map(|&p| Series {
                label: format!("p = {p}"),
                points: points
                    .iter()
                    .filter(|q| q.p == p)
                    .map(|q| (q.n as f64, q.lambda))
                    .collect(),
                scatter: false,
            })
            .collect(),
        reference: p_list.iter().map(|&p| (p, format!("p = {p}"))).collect(),
    }
}

fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run { config, out, svg } => {
            let text = fs::read_to_string(&config)
                .map_err(|e| CliError::Config(format!("{}: {e}", config.display())))?;
            let mut cfg = ExperimentConfig::parse(&text)?;
            cfg.svg |= svg;
            let dir = resolve_output_dir(out.as_deref(), &cfg.output_dir);
            let rows = run_experiment(&cfg, &dir)?;
            log::info!("{} rows written to {}", rows.len(), dir.display());
        }
        Command::LambdaTable { p, n_min, n_max, points, c, out, svg } => {
            if p.iter().any(|&v| !(v > 0.0 && v < 1.0)) || c.is_nan() || c <= 0.0 || n_min == 0 || n_max < n_min {
                return Err(CliError::Config(
                    "need p in (0, 1), C > 0 and 1 <= n_min <= n_max".into(),
                ));
            }
            let grid = log_grid(n_min, n_max, points);
            let (curve, crossings) = lambda_table(&p, &grid, c)?;
            fs::create_dir_all(&out)?;
            write_file(&out.join("lambda.csv"), |w| {
                use std::io::Write;
                writeln!(w, "p,n,lambda")?;
                for q in &curve {
                    writeln!(w, "{},{},{}", q.p, q.n, q.lambda)?;
                }
                Ok(())
            })?;
            write_file(&out.join("lambda_crossings.csv"), |w| {
                use std::io::Write;
                writeln!(w, "p,c,n_crossing")?;
                for x in &crossings {
                    writeln!(w, "{},{},{}", x.p, x.c, x.n)?;
                }
                Ok(())
            })?;
            for x in &crossings {
                println!("p = {}: lambda(n, p) = p at n = {:.1}", x.p, x.n);
            }
            if svg {
                fs::write(out.join("lambda.svg"), lambda_chart(&curve, &p, c).render())?;
            }
        }
        Command::Timing { dims, methods, budget, p, replications, seed, out } => {
            if budget == 0 || replications == 0 {
                return Err(CliError::Config("budget and replications must be positive".into()));
            }
            let sources: Vec<BatchSource> = methods
                .iter()
                .map(|m| match m {
                    Source::Mcmc => BatchSource::Mcmc,
                    Source::Rejection => BatchSource::Rejection,
                })
                .collect();
            let rows = timing_study(&sources, &dims, p, budget, replications, seed)?;
            fs::create_dir_all(&out)?;
            write_file(&out.join("timing.csv"), |w| {
                use std::io::Write;
                writeln!(w, "method,d,budget,replications,mean_wall_time_s,mean_rel_precision")?;
                for r in &rows {
                    writeln!(
                        w,
                        "{},{},{},{},{},{}",
                        r.method, r.d, r.budget, r.replications, r.mean_wall_time_s, r.mean_rel_precision
                    )?;
                }
                Ok(())
            })?;
            for r in &rows {
                println!("{:>9} d={} {:.3} s", r.method, r.d, r.mean_wall_time_s);
            }
        }
        Command::ListBenchmarks => {
            for (name, about) in rarebound::bench::registry() {
                println!("{name}\n    {about}");
            }
        }
        Command::ListKeys => {
            let mut section = "";
            for (s, key, doc) in KEYS {
                if *s != section {
                    println!("[{s}]");
                    section = s;
                }
                println!("  {key:<18} {doc}");
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("rarebound: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
