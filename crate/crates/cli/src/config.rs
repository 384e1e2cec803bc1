use std::fmt;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use pnrbench::benchmarks::MatchConfig;
use pnrbench::certify::BenchmarkSelection;
use pnrbench::nongauss::BoundConfig;
use pnrbench::preparation::{
    default_lambda_grid, log_spaced, DEFAULT_LAMBDA_MAX, DEFAULT_LAMBDA_POINTS,
};
use pnrbench::DetectorSpec;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    Povm,
    Prepare,
    Tradeoff,
    Joint,
    EtaEff,
    Witness,
    Evaluate,
    Thresholds,
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let v = self.to_possible_value().expect("no skipped variants");
        f.write_str(v.get_name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

/// A single target or a list of targets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Targets {
    One(usize),
    Many(Vec<usize>),
}

impl Targets {
    pub fn to_vec(&self) -> Vec<usize> {
        match self {
            Targets::One(n) => vec![*n],
            Targets::Many(v) => v.clone(),
        }
    }
}

impl Default for Targets {
    fn default() -> Self {
        Targets::One(1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SourceSection {
    pub eta_s: f64,
    pub eta_m: f64,
}

impl Default for SourceSection {
    fn default() -> Self {
        SourceSection {
            eta_s: 1.0,
            eta_m: 1.0,
        }
    }
}

/// Explicit `values`, or `points` log-spaced values up to `max`. Without
/// `min` the lower end is chosen per target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LambdaGrid {
    pub values: Option<Vec<f64>>,
    pub min: Option<f64>,
    pub max: f64,
    pub points: usize,
}

impl Default for LambdaGrid {
    fn default() -> Self {
        LambdaGrid {
            values: None,
            min: None,
            max: DEFAULT_LAMBDA_MAX,
            points: DEFAULT_LAMBDA_POINTS,
        }
    }
}

impl LambdaGrid {
    pub fn for_target(&self, n: usize) -> Vec<f64> {
        if let Some(v) = &self.values {
            return v.clone();
        }
        let lo = self
            .min
            .unwrap_or_else(|| default_lambda_grid(n, 2)[0].min(self.max / 2.0));
        log_spaced(lo, self.max, self.points)
    }

    fn validate(&self) -> Result<(), String> {
        if let Some(v) = &self.values {
            if v.is_empty() {
                return Err("lambda.values must not be empty".into());
            }
            if v.iter().any(|l| !(*l > 0.0 && *l < 1.0)) {
                return Err("lambda.values entries must lie in (0, 1)".into());
            }
            if v.windows(2).any(|w| w[1] <= w[0]) {
                return Err("lambda.values must be strictly increasing".into());
            }
            return Ok(());
        }
        if !(self.max > 0.0 && self.max < 1.0) {
            return Err(format!("lambda.max must lie in (0, 1), got {}", self.max));
        }
        if let Some(lo) = self.min {
            if !(lo > 0.0 && lo < self.max) {
                return Err(format!("lambda.min must lie in (0, lambda.max), got {lo}"));
            }
        }
        if self.points < 2 {
            return Err(format!(
                "lambda.points must be at least 2, got {}",
                self.points
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PovmSection {
    /// Defaults to every outcome up to the largest target.
    pub outcomes: Option<Vec<usize>>,
    /// Largest incident photon number tabulated.
    pub k_max: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TradeoffSection {
    pub idealized: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct JointSection {
    pub lambda_max: f64,
    pub scan_points: usize,
}

impl Default for JointSection {
    fn default() -> Self {
        let d = pnrbench::benchmarks::JointOptions::default();
        JointSection {
            lambda_max: d.lambda_max,
            scan_points: d.scan_points,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EtaEffSection {
    /// `[bins, n]` pairs.
    pub cases: Vec<(u64, usize)>,
    #[serde(rename = "match")]
    pub matching: MatchConfig,
}

impl Default for EtaEffSection {
    fn default() -> Self {
        EtaEffSection {
            cases: vec![(3, 3), (5, 5)],
            matching: MatchConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WitnessSection {
    /// Frontier cache directory; defaults to `frontier-cache` under the output directory.
    pub cache_dir: Option<PathBuf>,
    /// Measured distribution file; without it the witness is evaluated along
    /// the lambda grid for every detector.
    pub input: Option<PathBuf>,
    pub distribution: Option<Vec<f64>>,
    pub bound: BoundConfig,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluateSection {
    pub input: Option<PathBuf>,
    pub distribution: Option<Vec<f64>>,
    pub success_probability: Option<f64>,
    pub benchmarks: BenchmarkSelection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThresholdsSection {
    pub levels: Vec<f64>,
    pub photons: Vec<usize>,
}

impl Default for ThresholdsSection {
    fn default() -> Self {
        ThresholdsSection {
            levels: vec![0.5, 0.8, 0.9, 0.95],
            photons: (2..=10).collect(),
        }
    }
}

/// Measured distribution file for `witness` and `evaluate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasuredFile {
    pub distribution: Vec<f64>,
    pub success_probability: Option<f64>,
    pub target: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub task: Option<Task>,
    #[serde(default)]
    pub n: Targets,
    #[serde(default)]
    pub detectors: Vec<DetectorSpec>,
    #[serde(default)]
    pub format: Format,
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
    pub n_max: Option<usize>,
    #[serde(default)]
    pub source: SourceSection,
    #[serde(default)]
    pub lambda: LambdaGrid,
    #[serde(default)]
    pub povm: PovmSection,
    #[serde(default)]
    pub tradeoff: TradeoffSection,
    #[serde(default)]
    pub joint: JointSection,
    #[serde(default, rename = "eta-eff")]
    pub eta_eff: EtaEffSection,
    #[serde(default)]
    pub witness: WitnessSection,
    #[serde(default)]
    pub evaluate: EvaluateSection,
    #[serde(default)]
    pub thresholds: ThresholdsSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        toml::from_str("").expect("empty config parses")
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg: RunConfig = toml::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        // relative input paths are resolved against the config file
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [
            &mut cfg.witness.input,
            &mut cfg.evaluate.input,
            &mut cfg.witness.cache_dir,
            &mut cfg.out,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn task(&self) -> Result<Task, CliError> {
        self.task.ok_or_else(|| {
            CliError::Config("no task given: set `task` in the config or pass --task".into())
        })
    }

    /// Checks every field the selected task reads.
    pub fn validate(&self) -> Result<(), CliError> {
        let fail = |msg: String| Err(CliError::Config(msg));
        let task = self.task()?;
        let targets = self.n.to_vec();
        if targets.is_empty() {
            return fail("n must name at least one photon number".into());
        }
        if let Some(n_max) = self.n_max {
            if n_max == 0 || n_max > 1000 {
                return fail(format!("n_max must lie in 1..=1000, got {n_max}"));
            }
        }
        for (field, eta) in [
            ("source.eta_s", self.source.eta_s),
            ("source.eta_m", self.source.eta_m),
        ] {
            if !(eta > 0.0 && eta <= 1.0) {
                return fail(format!("{field} must lie in (0, 1], got {eta}"));
            }
        }
        self.lambda.validate().or_else(fail)?;
        let needs_detectors = matches!(
            task,
            Task::Povm | Task::Prepare | Task::Tradeoff | Task::Joint
        ) || (task == Task::Witness && !self.has_witness_input());
        if needs_detectors && self.detectors.is_empty() {
            return fail(format!(
                "task {task} needs at least one entry in `detectors`"
            ));
        }
        match task {
            Task::Povm => {
                if let Some(k) = self.povm.k_max {
                    if k > 1000 {
                        return fail(format!("povm.k_max must be at most 1000, got {k}"));
                    }
                }
            }
            Task::Joint => {
                let j = &self.joint;
                if !(j.lambda_max > 0.0 && j.lambda_max < 1.0) {
                    return fail(format!(
                        "joint.lambda_max must lie in (0, 1), got {}",
                        j.lambda_max
                    ));
                }
                if j.scan_points < 3 {
                    return fail(format!(
                        "joint.scan_points must be at least 3, got {}",
                        j.scan_points
                    ));
                }
            }
            Task::EtaEff => {
                if self.eta_eff.cases.is_empty() {
                    return fail("eta-eff.cases must not be empty".into());
                }
                for &(bins, n) in &self.eta_eff.cases {
                    if n == 0 || n as u64 > bins {
                        return fail(format!(
                            "eta-eff.cases entry [{bins}, {n}] needs 1 <= n <= bins"
                        ));
                    }
                }
                self.eta_eff
                    .matching
                    .validate()
                    .map_err(|e| CliError::Config(format!("eta-eff.match: {e}")))?;
            }
            Task::Witness => {
                if targets.iter().any(|&n| n == 0 || n > 20) {
                    return fail("witness targets n must lie in 1..=20".into());
                }
                if self.witness.input.is_some() && self.witness.distribution.is_some() {
                    return fail("witness: give either `input` or `distribution`, not both".into());
                }
                self.witness
                    .bound
                    .validate()
                    .map_err(|e| CliError::Config(format!("witness.bound: {e}")))?;
            }
            Task::Evaluate => {
                let e = &self.evaluate;
                match (&e.input, &e.distribution) {
                    (Some(_), Some(_)) => {
                        return fail(
                            "evaluate: give either `input` or `distribution`, not both".into(),
                        )
                    }
                    (None, None) => return fail("evaluate needs `input` or `distribution`".into()),
                    _ => {}
                }
                if e.distribution.is_some() && e.success_probability.is_none() {
                    return fail(
                        "evaluate.success_probability is required with an inline distribution"
                            .into(),
                    );
                }
                let b = &e.benchmarks;
                if b.bins.is_empty() || b.bins.contains(&0) {
                    return fail("evaluate.benchmarks.bins must list positive bin counts".into());
                }
                for (field, eta) in [("eta_m", b.eta_m), ("eta_s", b.eta_s)] {
                    if !(eta > 0.0 && eta <= 1.0) {
                        return fail(format!(
                            "evaluate.benchmarks.{field} must lie in (0, 1], got {eta}"
                        ));
                    }
                }
                if b.lambda_points < 2 || b.idealized_lambda_points < 2 {
                    return fail(
                        "evaluate.benchmarks lambda point counts must be at least 2".into(),
                    );
                }
                if !(b.tie_tolerance >= 0.0 && b.tie_tolerance.is_finite()) {
                    return fail(
                        "evaluate.benchmarks.tie_tolerance must be finite and nonnegative".into(),
                    );
                }
            }
            Task::Thresholds => {
                let t = &self.thresholds;
                if t.levels.is_empty() || t.levels.iter().any(|l| !(*l > 0.0 && *l < 1.0)) {
                    return fail(
                        "thresholds.levels must be nonempty with entries in (0, 1)".into(),
                    );
                }
                if t.photons.is_empty() || t.photons.contains(&0) {
                    return fail("thresholds.photons must list positive photon numbers".into());
                }
            }
            Task::Prepare | Task::Tradeoff => {}
        }
        Ok(())
    }

    pub fn has_witness_input(&self) -> bool {
        self.witness.input.is_some() || self.witness.distribution.is_some()
    }

    /// SHA-256 of everything that determines the numbers; output location
    /// and format are excluded.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.out = None;
        canonical.format = Format::Csv;
        let json = serde_json::to_vec(&canonical).expect("config serializes");
        hex::encode(Sha256::digest(json))
    }
}
