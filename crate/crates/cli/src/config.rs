//! Experiment configuration files.
//!
//! Flat `key = value` lines grouped under `[section]` headers; `#` starts a
//! comment. Keys before the first header belong to `[experiment]`. Unknown
//! sections and keys are errors, and every key has a default.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use rarebound::mcmc::{BatchSource, SemiAdaptiveConfig};
use rarebound::monotone::{Selection, DEFAULT_CANDIDATES};
use rarebound::surrogate::{RelaxationConfig, ShiftConfig, SurrogateFamily};

#[derive(Clone, Debug, PartialEq)]
pub struct ConfigError {
    pub line: usize,
    pub key: Option<String>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.key {
            Some(k) => write!(f, "line {}: `{k}`: {}", self.line, self.message),
            None if self.line == 0 => write!(f, "{}", self.message),
            None => write!(f, "line {}: {}", self.line, self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    Dyadic,
    MonotoneExact,
    MonotoneMcmc,
    Shift,
    Fsd,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Self::Dyadic => "dyadic",
            Self::MonotoneExact => "monotone-exact",
            Self::MonotoneMcmc => "monotone-mcmc",
            Self::Shift => "shift",
            Self::Fsd => "fsd",
        }
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "dyadic" => Self::Dyadic,
            "monotone-exact" => Self::MonotoneExact,
            "monotone-mcmc" => Self::MonotoneMcmc,
            "shift" => Self::Shift,
            "fsd" => Self::Fsd,
            _ => return Err("expected dyadic, monotone-exact, monotone-mcmc, shift or fsd".into()),
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DyadicKnobs {
    /// Sup-norm Lipschitz constant; the benchmark's own when absent.
    pub lipschitz: Option<f64>,
    pub max_depth: u32,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MonotoneKnobs {
    pub selection: Selection,
    pub chain: SemiAdaptiveConfig,
    /// Report ledger-estimated bounds instead of exact orthant volumes.
    pub ledger: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FsdKnobs {
    pub train: usize,
    pub family: SurrogateFamily,
    pub relaxation: RelaxationConfig,
    pub mc_samples: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub method: Method,
    pub benchmark: String,
    pub budget: u64,
    pub replications: u64,
    pub seed: u64,
    pub output_dir: PathBuf,
    /// Worker threads; 0 uses every available core.
    pub threads: usize,
    pub svg: bool,
    /// Record wall-clock seconds; when off the column is left empty so that
    /// reruns are byte-identical.
    pub wall_time: bool,
    pub dyadic: DyadicKnobs,
    pub monotone: MonotoneKnobs,
    pub shift: ShiftConfig,
    pub fsd: FsdKnobs,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            method: Method::MonotoneMcmc,
            benchmark: "example1:d=2:p=5e-2".into(),
            budget: 200,
            replications: 20,
            seed: 42,
            output_dir: PathBuf::from("rarebound-out"),
            threads: 0,
            svg: false,
            wall_time: false,
            dyadic: DyadicKnobs {
                lipschitz: None,
                max_depth: 30,
            },
            monotone: MonotoneKnobs {
                selection: Selection::MaxSafeGain {
                    candidates: DEFAULT_CANDIDATES,
                },
                chain: SemiAdaptiveConfig::default(),
                ledger: false,
            },
            shift: ShiftConfig::default(),
            fsd: FsdKnobs {
                train: 150,
                family: SurrogateFamily::PolynomialTotalDegree { degree: 3 },
                relaxation: RelaxationConfig::default(),
                mc_samples: 100_000,
            },
        }
    }
}

/// Every accepted `(section, key)` pair with its documentation.
pub const KEYS: &[(&str, &str, &str)] = &[
    ("experiment", "method", "dyadic | monotone-exact | monotone-mcmc | shift | fsd (monotone-mcmc)"),
    ("experiment", "benchmark", "registry name, see list-benchmarks (example1:d=2:p=5e-2)"),
    ("experiment", "budget", "true-function queries per replication for bounding methods (200)"),
    ("experiment", "replications", "independent replications (20)"),
    ("experiment", "seed", "master seed; replication r uses stream r (42)"),
    ("experiment", "output_dir", "report directory, overridden by RAREBOUND_OUTPUT_DIR (rarebound-out)"),
    ("experiment", "threads", "worker threads, 0 = all cores (0)"),
    ("experiment", "svg", "also write plot.svg (false)"),
    ("experiment", "wall_time", "record wall-clock seconds per replication (false)"),
    ("dyadic", "lipschitz", "sup-norm Lipschitz constant L (the benchmark's own)"),
    ("dyadic", "max_depth", "deepest dyadic level k (30)"),
    ("monotone", "selection", "uniform | maximin | max-safe-gain (max-safe-gain)"),
    ("monotone", "candidates", "candidates per query for maximin and max-safe-gain (8)"),
    ("monotone", "chain_length", "MCMC chain length N per window (10000)"),
    ("monotone", "window", "design points per window l (10)"),
    ("monotone", "scale", "proposal scale alpha (5.6644)"),
    ("monotone", "burn_in_fraction", "discarded chain prefix (0.2)"),
    ("monotone", "max_gap", "largest thinning gap (100)"),
    ("monotone", "batch_source", "mcmc | rejection (mcmc)"),
    ("monotone", "ledger", "report ledger-estimated bounds (false)"),
    ("surrogate", "family", "network | polynomial (network)"),
    ("surrogate", "hidden", "hidden layer sizes, comma separated (4,4)"),
    ("surrogate", "degree", "polynomial total degree (3)"),
    ("surrogate", "train_per_dim", "training points per input dimension (50)"),
    ("surrogate", "n_test", "certifying test points (5)"),
    ("surrogate", "n_validation", "validation points for Q2 (200)"),
    ("surrogate", "q2_min", "refit networks below this validation Q2 (0.9)"),
    ("surrogate", "max_refits", "refits allowed per replication (4)"),
    ("surrogate", "alpha", "certificate level (0.05)"),
    ("surrogate", "c", "Bernstein constant C (6)"),
    ("surrogate", "mc_samples", "surrogate Monte Carlo sample size (20000)"),
    ("surrogate", "epochs", "network training epochs (4000)"),
    ("surrogate", "learning_rate", "network Adam step (0.02)"),
    ("fsd", "train", "training points m (150)"),
    ("fsd", "family", "polynomial | network (polynomial)"),
    ("fsd", "degree", "polynomial total degree (3)"),
    ("fsd", "hidden", "hidden layer sizes (4,4)"),
    ("fsd", "taus", "relative smoothing temperatures (0.1,0.03,0.01)"),
    ("fsd", "initial_penalty", "first penalty weight (1)"),
    ("fsd", "max_doublings", "penalty doublings per temperature (12)"),
    ("fsd", "inner_iterations", "Adam steps per penalty (300)"),
    ("fsd", "learning_rate", "relaxation Adam step (0.01)"),
    ("fsd", "polish_sweeps", "pattern-search sweeps on the exact profile (30)"),
    ("fsd", "mc_samples", "surrogate Monte Carlo sample size (100000)"),
];

fn value<T: FromStr>(line: usize, key: &str, raw: &str) -> Result<T, ConfigError>
where
    T::Err: fmt::Display,
{
    raw.parse::<T>().map_err(|e| ConfigError {
        line,
        key: Some(key.into()),
        message: format!("bad value `{raw}`: {e}"),
    })
}

fn list<T: FromStr>(line: usize, key: &str, raw: &str) -> Result<Vec<T>, ConfigError>
where
    T::Err: fmt::Display,
{
    raw.split(',').map(|s| value(line, key, s.trim())).collect()
}

fn flag(line: usize, key: &str, raw: &str) -> Result<bool, ConfigError> {
    match raw {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(ConfigError {
            line,
            key: Some(key.into()),
            message: format!("expected true or false, got `{raw}`"),
        }),
    }
}

struct Families {
    kind: Option<String>,
    degree: Option<usize>,
    hidden: Option<Vec<usize>>,
}

impl Families {
    fn resolve(self, current: &SurrogateFamily, line: usize) -> Result<SurrogateFamily, ConfigError> {
        let (mut degree, mut hidden) = match current {
            SurrogateFamily::PolynomialTotalDegree { degree } => (*degree, vec![4, 4]),
            SurrogateFamily::SmallFeedforward { hidden } => (3, hidden.clone()),
        };
        degree = self.degree.unwrap_or(degree);
        hidden = self.hidden.unwrap_or(hidden);
        let kind = self.kind.unwrap_or_else(|| match current {
            SurrogateFamily::PolynomialTotalDegree { .. } => "polynomial".into(),
            SurrogateFamily::SmallFeedforward { .. } => "network".into(),
        });
        match kind.as_str() {
            "polynomial" => Ok(SurrogateFamily::PolynomialTotalDegree { degree }),
            "network" => Ok(SurrogateFamily::SmallFeedforward { hidden }),
            other => Err(ConfigError {
                line,
                key: Some("family".into()),
                message: format!("expected network or polynomial, got `{other}`"),
            }),
        }
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut c = Self::default();
        let mut section = "experiment".to_string();
        let mut seen: Vec<(String, String)> = Vec::new();
        let mut surrogate = Families { kind: None, degree: None, hidden: None };
        let mut fsd = Families { kind: None, degree: None, hidden: None };
        let (mut surrogate_line, mut fsd_line) = (0, 0);
        let mut selection_kind: Option<(usize, String)> = None;
        let mut candidates = DEFAULT_CANDIDATES;

        for (i, raw) in text.lines().enumerate() {
            let n = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest.strip_suffix(']').ok_or_else(|| ConfigError {
                    line: n,
                    key: None,
                    message: format!("unterminated section header `{line}`"),
                })?;
                let name = name.trim();
                if !KEYS.iter().any(|(s, _, _)| *s == name) {
                    return Err(ConfigError {
                        line: n,
                        key: None,
                        message: format!("unknown section `[{name}]`"),
                    });
                }
                section = name.to_string();
                continue;
            }
            let (key, val) = line.split_once('=').ok_or_else(|| ConfigError {
                line: n,
                key: None,
                message: format!("expected `key = value`, got `{line}`"),
            })?;
            let (key, val) = (key.trim(), val.trim());
            if !KEYS.iter().any(|(s, k, _)| *s == section && *k == key) {
                return Err(ConfigError {
                    line: n,
                    key: Some(key.into()),
                    message: format!("unknown key in [{section}]"),
                });
            }
            let id = (section.clone(), key.to_string());
            if seen.contains(&id) {
                return Err(ConfigError {
                    line: n,
                    key: Some(key.into()),
                    message: format!("duplicate key in [{section}]"),
                });
            }
            seen.push(id);
            let chain = &mut c.monotone.chain;
            match (section.as_str(), key) {
                ("experiment", "method") => c.method = value(n, key, val)?,
                ("experiment", "benchmark") => c.benchmark = val.to_string(),
                ("experiment", "budget") => c.budget = value(n, key, val)?,
                ("experiment", "replications") => c.replications = value(n, key, val)?,
                ("experiment", "seed") => c.seed = value(n, key, val)?,
                ("experiment", "output_dir") => c.output_dir = PathBuf::from(val),
                ("experiment", "threads") => c.threads = value(n, key, val)?,
                ("experiment", "svg") => c.svg = flag(n, key, val)?,
                ("experiment", "wall_time") => c.wall_time = flag(n, key, val)?,
                ("dyadic", "lipschitz") => c.dyadic.lipschitz = Some(value(n, key, val)?),
                ("dyadic", "max_depth") => c.dyadic.max_depth = value(n, key, val)?,
                ("monotone", "selection") => selection_kind = Some((n, val.to_string())),
                ("monotone", "candidates") => candidates = value(n, key, val)?,
                ("monotone", "chain_length") => chain.chain_length = value(n, key, val)?,
                ("monotone", "window") => chain.window = value(n, key, val)?,
                ("monotone", "scale") => chain.scale = value(n, key, val)?,
                ("monotone", "burn_in_fraction") => chain.burn_in_fraction = value(n, key, val)?,
                ("monotone", "max_gap") => chain.max_gap = value(n, key, val)?,
                ("monotone", "batch_source") => {
                    chain.batch_source = match val {
                        "mcmc" => BatchSource::Mcmc,
                        "rejection" => BatchSource::Rejection,
                        _ => {
                            return Err(ConfigError {
                                line: n,
                                key: Some(key.into()),
                                message: format!("expected mcmc or rejection, got `{val}`"),
                            })
                        }
                    }
                }
                ("monotone", "ledger") => c.monotone.ledger = flag(n, key, val)?,
                ("surrogate", "family") => {
                    surrogate.kind = Some(val.to_string());
                    surrogate_line = n;
                }
                ("surrogate", "hidden") => surrogate.hidden = Some(list(n, key, val)?),
                ("surrogate", "degree") => surrogate.degree = Some(value(n, key, val)?),
                ("surrogate", "train_per_dim") => c.shift.train_per_dim = value(n, key, val)?,
                ("surrogate", "n_test") => c.shift.n_test = value(n, key, val)?,
                ("surrogate", "n_validation") => c.shift.n_validation = value(n, key, val)?,
                ("surrogate", "q2_min") => c.shift.q2_min = value(n, key, val)?,
                ("surrogate", "max_refits") => c.shift.max_refits = value(n, key, val)?,
                ("surrogate", "alpha") => c.shift.alpha = value(n, key, val)?,
                ("surrogate", "c") => c.shift.c = value(n, key, val)?,
                ("surrogate", "mc_samples") => c.shift.mc_samples = value(n, key, val)?,
                ("surrogate", "epochs") => c.shift.train.epochs = value(n, key, val)?,
                ("surrogate", "learning_rate") => c.shift.train.learning_rate = value(n, key, val)?,
                ("fsd", "train") => c.fsd.train = value(n, key, val)?,
                ("fsd", "family") => {
                    fsd.kind = Some(val.to_string());
                    fsd_line = n;
                }
                ("fsd", "degree") => fsd.degree = Some(value(n, key, val)?),
                ("fsd", "hidden") => fsd.hidden = Some(list(n, key, val)?),
                ("fsd", "taus") => c.fsd.relaxation.taus = list(n, key, val)?,
                ("fsd", "initial_penalty") => c.fsd.relaxation.initial_penalty = value(n, key, val)?,
                ("fsd", "max_doublings") => c.fsd.relaxation.max_doublings = value(n, key, val)?,
                ("fsd", "inner_iterations") => c.fsd.relaxation.inner_iterations = value(n, key, val)?,
                ("fsd", "learning_rate") => c.fsd.relaxation.learning_rate = value(n, key, val)?,
                ("fsd", "polish_sweeps") => c.fsd.relaxation.polish_sweeps = value(n, key, val)?,
                ("fsd", "mc_samples") => c.fsd.mc_samples = value(n, key, val)?,
                _ => unreachable!("key table and match arms agree"),
            }
        }

        c.shift.family = surrogate.resolve(&c.shift.family, surrogate_line)?;
        c.fsd.family = fsd.resolve(&c.fsd.family, fsd_line)?;
        c.monotone.chain.candidates = candidates;
        c.monotone.selection = match selection_kind {
            None => Selection::MaxSafeGain { candidates },
            Some((_, k)) if k == "max-safe-gain" => Selection::MaxSafeGain { candidates },
            Some((_, k)) if k == "maximin" => Selection::Maximin { candidates },
            Some((_, k)) if k == "uniform" => Selection::Uniform,
            Some((n, k)) => {
                return Err(ConfigError {
                    line: n,
                    key: Some("selection".into()),
                    message: format!("expected uniform, maximin or max-safe-gain, got `{k}`"),
                })
            }
        };
        if c.budget == 0 && c.replications > 0 && !matches!(c.method, Method::Shift | Method::Fsd) {
            return Err(ConfigError {
                line: 0,
                key: Some("budget".into()),
                message: "budget must be at least 1".into(),
            });
        }
        Ok(c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_sections() {
        let c = ExperimentConfig::parse(
            "method = dyadic\nbenchmark = lipschitz1d:p=2.1e-3\n\n[dyadic]\nlipschitz = 1\n",
        )
        .unwrap();
        assert_eq!(c.method, Method::Dyadic);
        assert_eq!(c.benchmark, "lipschitz1d:p=2.1e-3");
        assert_eq!(c.dyadic.lipschitz, Some(1.0));
        assert_eq!(c.budget, 200);
        assert_eq!(c.shift.n_test, 5);
    }

    #[test]
    fn families_and_lists() {
        let c = ExperimentConfig::parse(
            "[surrogate]\nfamily = polynomial\ndegree = 4\n[fsd]\nfamily = network\nhidden = 3, 2\ntaus = 0.2,0.05\n",
        )
        .unwrap();
        assert_eq!(c.shift.family, SurrogateFamily::PolynomialTotalDegree { degree: 4 });
        assert_eq!(c.fsd.family, SurrogateFamily::SmallFeedforward { hidden: vec![3, 2] });
        assert_eq!(c.fsd.relaxation.taus, vec![0.2, 0.05]);
    }

    #[test]
    fn errors_name_line_and_key() {
        let e = ExperimentConfig::parse("budget = 10\nbogus = 1\n").unwrap_err();
        assert_eq!((e.line, e.key.as_deref()), (2, Some("bogus")));
        let e = ExperimentConfig::parse("[monotone]\nwindow = ten\n").unwrap_err();
        assert_eq!((e.line, e.key.as_deref()), (2, Some("window")));
        let e = ExperimentConfig::parse("[nowhere]\n").unwrap_err();
        assert_eq!(e.line, 1);
        let e = ExperimentConfig::parse("seed = 1\nseed = 2\n").unwrap_err();
        assert_eq!(e.line, 2);
        assert!(ExperimentConfig::parse("[monotone]\nselection = greedy\n").is_err());
        assert!(ExperimentConfig::parse("method\n").is_err());
    }
}
