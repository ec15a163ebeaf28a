//! Run configuration: a JSON file with the same keys as the flags, flags
//! taking precedence.

use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany {
    One(usize),
    Many(Vec<usize>),
}

impl From<OneOrMany> for Vec<usize> {
    fn from(v: OneOrMany) -> Self {
        match v {
            OneOrMany::One(x) => vec![x],
            OneOrMany::Many(xs) => xs,
        }
    }
}

/// Contents of a `--config` file.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub n: Option<OneOrMany>,
    pub k: Option<OneOrMany>,
    pub points: Option<usize>,
    pub points_constant: Option<f64>,
    pub delta: Option<f64>,
    pub trials: Option<usize>,
    pub restarts: Option<usize>,
    pub steps: Option<usize>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
    pub input: Option<PathBuf>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("invalid config {}: {e}", path.display())))
    }
}

/// Flags shared by every subcommand.
#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// Ambient dimension(s); comma-separated for grids
    #[arg(long, value_delimiter = ',')]
    pub n: Option<Vec<usize>>,
    /// Codimension(s); comma-separated for grids
    #[arg(long, value_delimiter = ',')]
    pub k: Option<Vec<usize>>,
    /// Number of sphere points N
    #[arg(long)]
    pub points: Option<usize>,
    /// Constant c of the default point count N = c·n^(k/2+4)
    #[arg(long)]
    pub points_constant: Option<f64>,
    /// Net radius
    #[arg(long)]
    pub delta: Option<f64>,
    /// Monte Carlo trials
    #[arg(long)]
    pub trials: Option<usize>,
    /// Search restarts
    #[arg(long)]
    pub restarts: Option<usize>,
    /// Hill-climbing steps per restart
    #[arg(long)]
    pub steps: Option<usize>,
    /// Master seed
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output file (stdout when absent)
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// JSON file with the same keys as these flags
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Progress messages on stderr
    #[arg(short, long)]
    pub verbose: bool,
}

/// Flags merged over the config file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Merged {
    pub n: Option<Vec<usize>>,
    pub k: Option<Vec<usize>>,
    pub points: Option<usize>,
    pub points_constant: Option<f64>,
    pub delta: Option<f64>,
    pub trials: Option<usize>,
    pub restarts: Option<usize>,
    pub steps: Option<usize>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
    pub input: Option<PathBuf>,
    pub verbose: bool,
}

impl Merged {
    pub fn from_args(args: &CommonArgs, input: Option<PathBuf>) -> Result<Self, CliError> {
        let file = match &args.config {
            Some(p) => FileConfig::load(p)?,
            None => FileConfig::default(),
        };
        let points_constant = args.points_constant.or(file.points_constant);
        if points_constant.is_some_and(|c| !(c > 0.0 && c.is_finite())) {
            return Err(CliError::Usage("points_constant must be positive".into()));
        }
        Ok(Self {
            n: args.n.clone().or(file.n.map(Into::into)),
            k: args.k.clone().or(file.k.map(Into::into)),
            points: args.points.or(file.points),
            points_constant,
            delta: args.delta.or(file.delta),
            trials: args.trials.or(file.trials),
            restarts: args.restarts.or(file.restarts),
            steps: args.steps.or(file.steps),
            seed: args.seed.or(file.seed),
            out: args.out.clone().or(file.out),
            format: args.format.or(file.format),
            input: input.or(file.input),
            verbose: args.verbose,
        })
    }

    /// The single value of a list-valued key, for commands that take one.
    pub fn single(values: &Option<Vec<usize>>, key: &str) -> Result<Option<usize>, CliError> {
        match values.as_deref() {
            None => Ok(None),
            Some([v]) => Ok(Some(*v)),
            Some(vs) => Err(CliError::Usage(format!("--{key} takes one value here, got {}", vs.len()))),
        }
    }
}
