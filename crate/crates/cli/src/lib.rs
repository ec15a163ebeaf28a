//! Front end for the kslice pipeline: lemma verification, single builds,
//! parameter sweeps and max-section searches on saved builds.
//!
//! Every output embeds the schema version, the build identifier, the fully
//! resolved configuration and the master seed. Output paths are not part of
//! the embedded configuration, so reruns into different files compare equal.

pub mod config;
pub mod lemmas;

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use kslice::construction::{
    max_section_search, run_construction, scaled_points, ConstructionParams, ConstructionReport,
    DEFAULT_POINTS_CONSTANT, SCHEMA_VERSION,
};
use kslice::geometry::Subspace;
use kslice::rng::stream;
use kslice::Error;

use config::{Format, Merged};
use lemmas::{LemmaConfig, LemmaReport, Tolerances};

/// `git describe` of the source tree at build time.
pub const BUILD_ID: &str = env!("KSLICE_BUILD_ID");

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Contract(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Contract(_) | CliError::Io(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Contract(m) => write!(f, "contract violation: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Domain(_) | Error::DimensionMismatch { .. } => CliError::Usage(e.to_string()),
            other => CliError::Contract(other.to_string()),
        }
    }
}

/// Wrapper written around every result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope<C, R> {
    pub schema_version: u32,
    pub build_id: String,
    pub command: String,
    pub seed: u64,
    pub config: C,
    pub result: R,
}

impl<C, R> Envelope<C, R> {
    fn new(command: &str, seed: u64, config: C, result: R) -> Self {
        Self { schema_version: SCHEMA_VERSION, build_id: BUILD_ID.to_string(), command: command.to_string(), seed, config, result }
    }

    fn header_lines(&self) -> Result<String, CliError>
    where
        C: Serialize,
    {
        let cfg = serde_json::to_string(&self.config).map_err(|e| CliError::Io(e.to_string()))?;
        Ok(format!(
            "# schema_version: {}\n# build_id: {}\n# command: {}\n# seed: {}\n# config: {cfg}\n",
            self.schema_version, self.build_id, self.command, self.seed
        ))
    }
}

/// Rendered output of a command and whether its contracts held.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub body: String,
    pub passed: bool,
    pub summary: String,
}

fn to_json<T: Serialize>(value: &T) -> Result<String, CliError> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

/// 17 significant digits.
pub fn fmt_float(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}

fn csv_text(header: &str, rows: Vec<Vec<String>>, columns: &[&str]) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(columns).map_err(|e| CliError::Io(e.to_string()))?;
    for row in rows {
        w.write_record(&row).map_err(|e| CliError::Io(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Io(e.to_string()))?;
    Ok(format!("{header}{}", String::from_utf8(bytes).map_err(|e| CliError::Io(e.to_string()))?))
}

pub fn write_output(out: Option<&Path>, body: &str) -> Result<(), CliError> {
    match out {
        Some(path) => std::fs::write(path, body).map_err(|e| CliError::Io(format!("{}: {e}", path.display()))),
        None => std::io::stdout().write_all(body.as_bytes()).map_err(|e| CliError::Io(e.to_string())),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaRunConfig {
    #[serde(flatten)]
    pub suite: LemmaConfig,
    pub format: Format,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub corrupted_tolerance: bool,
}

pub fn cmd_verify_lemmas(m: &Merged, corrupt_tolerance: bool) -> Result<Outcome, CliError> {
    let mut suite = LemmaConfig::default();
    if let Some(n) = &m.n {
        suite.n = n.clone();
    }
    if let Some(k) = &m.k {
        suite.k = k.clone();
    }
    if let Some(t) = m.trials {
        suite.trials = t;
    }
    suite.seed = m.seed.unwrap_or(0);
    if suite.n.iter().any(|&n| !(2..=64).contains(&n)) || suite.k.iter().any(|&k| k == 0) {
        return Err(CliError::Usage("grid needs 2 <= n <= 64 and k >= 1".into()));
    }
    if suite.cells().is_empty() {
        return Err(CliError::Usage("the (n, k) grid has no cell with 1 <= k <= n-1".into()));
    }
    if suite.trials < 1_000 {
        return Err(CliError::Usage(format!("trials must be at least 1000, got {}", suite.trials)));
    }
    let tol = if corrupt_tolerance { Tolerances::corrupted() } else { Tolerances::STANDARD };
    let report = lemmas::run_suite(&suite, tol)?;
    let cfg = LemmaRunConfig { suite, format: m.format.unwrap_or(Format::Json), corrupted_tolerance: corrupt_tolerance };
    let failed: Vec<&str> = report.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
    let summary = if failed.is_empty() {
        format!("all {} lemma checks passed", report.checks.len())
    } else {
        format!("failing checks: {}", failed.join(", "))
    };
    let passed = report.all_passed;
    let env = Envelope::new("verify-lemmas", cfg.suite.seed, cfg, report);
    let body = match env.config.format {
        Format::Json => to_json(&env)?,
        Format::Csv => lemma_csv(&env)?,
    };
    Ok(Outcome { body, passed, summary })
}

fn lemma_csv(env: &Envelope<LemmaRunConfig, LemmaReport>) -> Result<String, CliError> {
    let rows = env
        .result
        .checks
        .iter()
        .map(|c| {
            vec![
                c.name.clone(),
                c.passed.to_string(),
                c.cases.to_string(),
                c.failures.to_string(),
                fmt_float(c.worst_slack),
                c.first_failure.clone().unwrap_or_default(),
            ]
        })
        .collect();
    csv_text(&env.header_lines()?, rows, &["check", "passed", "cases", "failures", "worst_slack", "first_failure"])
}

fn construction_params(m: &Merged, n: usize, k: usize, sweep: bool) -> ConstructionParams {
    let d = ConstructionParams::default();
    ConstructionParams {
        n,
        k,
        points: m.points.unwrap_or_else(|| scaled_points(n, k, m.points_constant.unwrap_or(DEFAULT_POINTS_CONSTANT))),
        delta: m.delta.or(if sweep { Some(SWEEP_DELTA) } else { None }),
        mc_trials: m.trials.unwrap_or(d.mc_trials),
        search_restarts: m.restarts.unwrap_or(d.search_restarts),
        search_steps: m.steps.unwrap_or(d.search_steps),
        master_seed: m.seed.unwrap_or(0),
        ..d
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildConfig {
    pub params: ConstructionParams,
    pub format: Format,
}

pub fn cmd_build(m: &Merged) -> Result<Outcome, CliError> {
    let d = ConstructionParams::default();
    let n = Merged::single(&m.n, "n")?.unwrap_or(d.n);
    let k = Merged::single(&m.k, "k")?.unwrap_or(d.k);
    let params = construction_params(m, n, k, false);
    params.validate()?;
    let report = run_construction(&params)?;
    let cfg = BuildConfig { params: params.resolved(), format: m.format.unwrap_or(Format::Json) };
    let summary = format!(
        "n={n} k={k}: max section {:.6e}, d_ovr >= {:.6} (modulo c), mass3 {:.4}",
        report.max_section.value, report.dovr_lower_modulo_c, report.mass_3k0.estimate
    );
    let env = Envelope::new("build", params.master_seed, cfg, report);
    let body = match env.config.format {
        Format::Json => to_json(&env)?,
        Format::Csv => {
            let row = SweepRow::from_report(&env.result);
            csv_text(&env.header_lines()?, vec![row.cells()], SWEEP_COLUMNS)?
        }
    };
    Ok(Outcome { body, passed: true, summary })
}

pub const SWEEP_N: [usize; 4] = [6, 8, 10, 12];
pub const SWEEP_K: [usize; 2] = [1, 2];
/// The default radius n^{-k/2-1} gives nets far beyond the size ceiling at
/// sweep dimensions; radius 1 keeps every cell's net in the thousands.
pub const SWEEP_DELTA: f64 = 1.0;

pub const SWEEP_COLUMNS: &[&str] = &[
    "n",
    "k",
    "N",
    "delta",
    "sup_over_net",
    "vol_est",
    "mass3",
    "max_section",
    "certificate",
    "seed",
    "failed",
    "error",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub n: usize,
    pub k: usize,
    #[serde(rename = "N")]
    pub points: usize,
    pub delta: f64,
    pub sup_over_net: Option<f64>,
    pub vol_est: Option<f64>,
    pub mass3: Option<f64>,
    pub max_section: Option<f64>,
    pub certificate: Option<f64>,
    pub seed: u64,
    pub failed: bool,
    pub error: Option<String>,
}

impl SweepRow {
    pub fn from_report(r: &ConstructionReport) -> Self {
        Self {
            n: r.params.n,
            k: r.params.k,
            points: r.params.points,
            delta: r.params.resolved_delta(),
            sup_over_net: Some(r.points_stage.sup_over_net),
            vol_est: Some(r.volume.estimate),
            mass3: Some(r.mass_3k0.estimate),
            max_section: Some(r.max_section.value),
            certificate: Some(r.dovr_lower_modulo_c),
            seed: r.params.master_seed,
            failed: false,
            error: None,
        }
    }

    fn failure(p: &ConstructionParams, e: &Error) -> Self {
        Self {
            n: p.n,
            k: p.k,
            points: p.points,
            delta: p.resolved_delta(),
            sup_over_net: None,
            vol_est: None,
            mass3: None,
            max_section: None,
            certificate: None,
            seed: p.master_seed,
            failed: true,
            error: Some(e.to_string()),
        }
    }

    pub fn cells(&self) -> Vec<String> {
        let opt = |v: Option<f64>| v.map(fmt_float).unwrap_or_default();
        vec![
            self.n.to_string(),
            self.k.to_string(),
            self.points.to_string(),
            fmt_float(self.delta),
            opt(self.sup_over_net),
            opt(self.vol_est),
            opt(self.mass3),
            opt(self.max_section),
            opt(self.certificate),
            self.seed.to_string(),
            u8::from(self.failed).to_string(),
            self.error.clone().unwrap_or_default(),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PointsRule {
    Fixed(usize),
    /// N = round(c·n^{k/2+4}), clamped to [64, 2^18].
    Scaled(f64),
}

impl PointsRule {
    pub fn points(self, n: usize, k: usize) -> usize {
        match self {
            PointsRule::Fixed(p) => p,
            PointsRule::Scaled(c) => scaled_points(n, k, c),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub n: Vec<usize>,
    pub k: Vec<usize>,
    pub points: PointsRule,
    /// Per-cell parameters; `n`, `k` and `points` are replaced cell by cell.
    pub params: ConstructionParams,
    pub format: Format,
}

/// One construction per (n, k) cell, all under the same master seed. A
/// failing cell becomes a flagged row and the sweep continues.
pub fn run_sweep(cfg: &SweepConfig, mut progress: impl FnMut(&SweepRow)) -> Vec<SweepRow> {
    let mut rows = Vec::new();
    for &k in &cfg.k {
        for &n in &cfg.n {
            let p = ConstructionParams { n, k, points: cfg.points.points(n, k), ..cfg.params.clone() };
            let row = match run_construction(&p) {
                Ok(r) => SweepRow::from_report(&r),
                Err(e) => SweepRow::failure(&p, &e),
            };
            progress(&row);
            rows.push(row);
        }
    }
    rows
}

pub fn cmd_sweep(m: &Merged) -> Result<Outcome, CliError> {
    let n = m.n.clone().unwrap_or(SWEEP_N.to_vec());
    let k = m.k.clone().unwrap_or(SWEEP_K.to_vec());
    let points = match m.points {
        Some(p) => PointsRule::Fixed(p),
        None => PointsRule::Scaled(m.points_constant.unwrap_or(DEFAULT_POINTS_CONSTANT)),
    };
    let template = construction_params(m, n.first().copied().unwrap_or(2), 1, true);
    if n.is_empty() || k.is_empty() {
        return Err(CliError::Usage("the sweep grid is empty".into()));
    }
    for &ni in &n {
        for &ki in &k {
            ConstructionParams { n: ni, k: ki, points: points.points(ni, ki), ..template.clone() }.validate()?;
        }
    }
    let cfg = SweepConfig { n, k, points, params: template, format: m.format.unwrap_or(Format::Csv) };
    let verbose = m.verbose;
    let rows = run_sweep(&cfg, |r| {
        if verbose {
            eprintln!("n={} k={}: {}", r.n, r.k, r.error.as_deref().unwrap_or("ok"));
        }
    });
    let failures = rows.iter().filter(|r| r.failed).count();
    let summary = format!("{} cells, {failures} failed", rows.len());
    let seed = cfg.params.master_seed;
    let env = Envelope::new("sweep", seed, cfg, rows);
    let body = match env.config.format {
        Format::Json => to_json(&env)?,
        Format::Csv => csv_text(&env.header_lines()?, env.result.iter().map(SweepRow::cells).collect(), SWEEP_COLUMNS)?,
    };
    Ok(Outcome { body, passed: failures == 0, summary })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub input: String,
    pub restarts: usize,
    pub steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub n: usize,
    pub k: usize,
    /// Max section recorded in the saved build.
    pub saved_value: f64,
    pub value: f64,
    pub argmax: Subspace,
    pub dovr_lower_modulo_c: f64,
    pub trace_len: usize,
    pub evaluations: usize,
}

pub type BuildEnvelope = Envelope<BuildConfig, ConstructionReport>;

pub fn load_build(path: &Path) -> Result<BuildEnvelope, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{} is not a saved build report: {e}", path.display())))
}

pub fn cmd_search(m: &Merged) -> Result<Outcome, CliError> {
    let input = m.input.as_deref().ok_or_else(|| CliError::Usage("search needs --input <build report>".into()))?;
    if m.format == Some(Format::Csv) {
        return Err(CliError::Usage("search writes JSON only".into()));
    }
    let saved = load_build(input)?;
    let report = &saved.result;
    let seed = m.seed.unwrap_or(report.params.master_seed);
    let cfg = SearchConfig {
        input: input.display().to_string(),
        restarts: m.restarts.unwrap_or(report.params.search_restarts),
        steps: m.steps.unwrap_or(report.params.search_steps),
    };
    if cfg.restarts == 0 || cfg.steps < 2 {
        return Err(CliError::Usage("search needs at least one restart and two steps".into()));
    }
    let density = report.density()?;
    let k = report.params.k;
    let s = max_section_search(&density, k, cfg.restarts, cfg.steps, &mut stream(seed, 0), None)?;
    let result = SearchResult {
        n: report.params.n,
        k,
        saved_value: report.max_section.value,
        value: s.value,
        dovr_lower_modulo_c: kslice::construction::dovr_certificate(s.value, k)?,
        argmax: s.best,
        trace_len: s.trace.len(),
        evaluations: s.evaluations,
    };
    let summary = format!("max section {:.6e} (saved {:.6e})", result.value, result.saved_value);
    let env = Envelope::new("search", seed, cfg, result);
    Ok(Outcome { body: to_json(&env)?, passed: true, summary })
}
