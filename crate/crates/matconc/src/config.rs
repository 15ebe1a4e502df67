//! Run configuration: a TOML document with `[distribution]`, `[schedule]`,
//! `[boundary]`, `[experiment]`, and optional `[output]`, `[verify]`,
//! `[tail]`, `[oja]` sections.
//!
//! Unknown keys are rejected and every error names the offending key path.
//! Command-line flags override file values, which override defaults.

use std::f64::consts::E;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use matconc_core::boundary::{BoundaryParams, StepSchedule};
use matconc_core::linalg::SymMatrix;
use matconc_core::montecarlo::{BoundaryVariant, ExperimentConfig};
use matconc_core::oja::OjaInit;
use matconc_core::streams::{Atom, MatrixDistribution};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

/// Largest accepted `|a_ij − a_ji|`, relative to the largest entry.
const SYMMETRY_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub distribution: DistributionSection,
    pub schedule: ScheduleSection,
    pub boundary: BoundarySection,
    pub experiment: ExperimentSection,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default)]
    pub verify: VerifySection,
    #[serde(default)]
    pub tail: TailSection,
    #[serde(default)]
    pub oja: OjaSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistributionKind {
    FiniteSupport,
    RankOneSphere,
    DiagonalPerturbation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistributionSection {
    pub kind: DistributionKind,
    /// `finite_support` only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub atoms: Option<Vec<AtomSpec>>,
    /// Full mean matrix; alternative to `spectrum`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<Vec<Vec<f64>>>,
    /// Diagonal mean `diag(spectrum)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spectrum: Option<Vec<f64>>,
    /// `diagonal_perturbation` only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomSpec {
    pub matrix: Vec<Vec<f64>>,
    pub probability: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleKind {
    Constant,
    FixedHorizon,
    Polynomial,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSection {
    pub kind: ScheduleKind,
    pub c: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VariantName {
    Epoch,
    SmoothPaper,
    SmoothDominating,
}

impl From<VariantName> for BoundaryVariant {
    fn from(v: VariantName) -> Self {
        match v {
            VariantName::Epoch => BoundaryVariant::Epoch,
            VariantName::SmoothPaper => BoundaryVariant::SmoothPaper,
            VariantName::SmoothDominating => BoundaryVariant::SmoothDominating,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundarySection {
    pub delta: f64,
    /// Must equal the distribution's dimension when given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<usize>,
    /// Declared bound on `‖X − Σ‖`, replacing the distribution's own.
    #[serde(default, rename = "L_override", skip_serializing_if = "Option::is_none")]
    pub l_override: Option<f64>,
    #[serde(default = "default_eta_epoch")]
    pub eta_epoch: f64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_variant")]
    pub variant: VariantName,
    /// Multiplier on the boundary (negative controls).
    #[serde(default = "default_scale")]
    pub scale: f64,
}

fn default_eta_epoch() -> f64 {
    2.0
}

fn default_alpha() -> f64 {
    2.0
}

fn default_variant() -> VariantName {
    VariantName::Epoch
}

fn default_scale() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub n_max: usize,
    #[serde(default = "default_trajectories")]
    pub trajectories: u64,
    #[serde(default)]
    pub master_seed: u64,
}

fn default_trajectories() -> u64 {
    1000
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_directory")]
    pub directory: PathBuf,
    #[serde(default = "default_formats")]
    pub formats: Vec<OutputFormat>,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            directory: default_directory(),
            formats: default_formats(),
        }
    }
}

fn default_directory() -> PathBuf {
    PathBuf::from("out")
}

fn default_formats() -> Vec<OutputFormat> {
    vec![OutputFormat::Csv]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifySection {
    /// Oracle horizon; defaults to `experiment.n_max`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    /// Also report the exact fixed-time crossing probability at this threshold.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixed_threshold: Option<f64>,
    /// Trajectories for the Monte Carlo vs oracle check; 0 skips it.
    #[serde(default = "default_mc_trajectories")]
    pub mc_trajectories: u64,
}

impl Default for VerifySection {
    fn default() -> Self {
        Self {
            n: None,
            fixed_threshold: None,
            mc_trajectories: default_mc_trajectories(),
        }
    }
}

fn default_mc_trajectories() -> u64 {
    10_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TailSection {
    #[serde(default = "default_u_grid")]
    pub u_grid: Vec<f64>,
}

impl Default for TailSection {
    fn default() -> Self {
        Self { u_grid: default_u_grid() }
    }
}

fn default_u_grid() -> Vec<f64> {
    vec![0.25, 0.5, 1.0, 2.0, E]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OjaInitName {
    Basis,
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OjaSection {
    #[serde(default = "default_oja_init")]
    pub init: OjaInitName,
    /// Seed for `init = "random"`; defaults to `experiment.master_seed`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl Default for OjaSection {
    fn default() -> Self {
        Self {
            init: default_oja_init(),
            seed: None,
        }
    }
}

fn default_oja_init() -> OjaInitName {
    OjaInitName::Basis
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub trajectories: Option<u64>,
    pub out: Option<PathBuf>,
}

/// A validated configuration, ready to run.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub raw: RunConfig,
    pub experiment: ExperimentConfig,
    pub hash: String,
}

impl Resolved {
    pub fn output_dir(&self) -> &Path {
        &self.raw.output.directory
    }

    pub fn oja_init(&self) -> OjaInit {
        match self.raw.oja.init {
            OjaInitName::Basis => OjaInit::Basis,
            OjaInitName::Random => {
                OjaInit::Random(self.raw.oja.seed.unwrap_or(self.experiment.master_seed))
            }
        }
    }
}

fn invalid(path: impl Into<String>, message: impl Into<String>) -> CliError {
    CliError::Config {
        path: path.into(),
        message: message.into(),
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, CliError> {
        let de = toml::Deserializer::parse(text).map_err(|e| invalid("<document>", e.to_string()))?;
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            // toml errors carry a source excerpt; the message follows it.
            let inner = e.into_inner().to_string();
            let message = inner
                .lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with("TOML parse error"))
                .filter(|l| !l.starts_with('|') && !l.contains(" | "))
                .next_back()
                .unwrap_or("invalid value")
                .to_string();
            invalid(if path == "." { "<document>".into() } else { path }, message)
        })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::ReadConfig {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    pub fn apply(&mut self, overrides: &Overrides) {
        if let Some(seed) = overrides.seed {
            self.experiment.master_seed = seed;
        }
        if let Some(t) = overrides.trajectories {
            self.experiment.trajectories = t;
        }
        if let Some(out) = &overrides.out {
            self.output.directory = out.clone();
        }
    }

    /// SHA-256 of everything that determines results; the output section is
    /// excluded so that writing elsewhere does not change the files.
    pub fn hash(&self) -> String {
        let mut view = self.clone();
        view.output = OutputSection::default();
        let digest = Sha256::digest(format!("{view:?}").as_bytes());
        digest.iter().fold(String::with_capacity(64), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
    }

    pub fn resolve(self) -> Result<Resolved, CliError> {
        let distribution = build_distribution(&self.distribution)?;
        let schedule = build_schedule(&self.schedule)?;
        let b = &self.boundary;
        let dim = distribution.dim();
        if let Some(d) = b.d {
            if d != dim {
                return Err(invalid(
                    "boundary.d",
                    format!("d = {d} but the distribution has dimension {dim}"),
                ));
            }
        }
        let own_bound = distribution.deviation_bound().0;
        let deviation_bound = match b.l_override {
            Some(l) if !(l >= 0.0 && l.is_finite()) => {
                return Err(invalid("boundary.L_override", format!("must be a finite value >= 0, got {l}")));
            }
            Some(l) => l,
            None => own_bound,
        };
        let params = BoundaryParams::new(
            b.delta,
            dim,
            deviation_bound,
            b.eta_epoch,
            b.alpha,
            distribution.lambda_max(),
        )
        .map_err(|e| match e {
            matconc_core::Error::Domain { name, .. } => {
                let key = match name {
                    "L" => "boundary.L_override",
                    "delta" => "boundary.delta",
                    "eta_epoch" => "boundary.eta_epoch",
                    "alpha" => "boundary.alpha",
                    "d" => "boundary.d",
                    _ => "distribution",
                };
                invalid(key, e.to_string())
            }
            other => CliError::Core(other),
        })?;
        if !(b.scale >= 0.0 && b.scale.is_finite()) {
            return Err(invalid("boundary.scale", format!("must be a finite value >= 0, got {}", b.scale)));
        }
        let e = &self.experiment;
        if e.n_max == 0 {
            return Err(invalid("experiment.n_max", "must be >= 1"));
        }
        if e.trajectories == 0 {
            return Err(invalid("experiment.trajectories", "must be >= 1"));
        }
        if self.output.formats.is_empty() {
            return Err(invalid("output.formats", "at least one format is required"));
        }
        if let Some(n) = self.verify.n {
            if n == 0 {
                return Err(invalid("verify.n", "must be >= 1"));
            }
        }
        for (i, &u) in self.tail.u_grid.iter().enumerate() {
            if !(0.0..=E).contains(&u) {
                return Err(invalid(
                    format!("tail.u_grid[{i}]"),
                    format!("{u} is outside [0, e]; the tail bound is valid only there"),
                ));
            }
        }
        let experiment = ExperimentConfig {
            distribution,
            schedule,
            params,
            n_max: e.n_max,
            trajectories: e.trajectories,
            master_seed: e.master_seed,
            variant: b.variant.into(),
            boundary_scale: b.scale,
        };
        let hash = self.hash();
        Ok(Resolved {
            raw: self,
            experiment,
            hash,
        })
    }
}

fn check_symmetric(rows: &[Vec<f64>], path: &str) -> Result<SymMatrix, CliError> {
    let dim = rows.len();
    if dim == 0 {
        return Err(invalid(path, "matrix must have at least one row"));
    }
    for (i, row) in rows.iter().enumerate() {
        if row.len() != dim {
            return Err(invalid(
                format!("{path}[{i}]"),
                format!("row has {} entries, expected {dim}", row.len()),
            ));
        }
        if let Some(v) = row.iter().find(|v| !v.is_finite()) {
            return Err(invalid(format!("{path}[{i}]"), format!("non-finite entry {v}")));
        }
    }
    let scale = rows.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    for i in 0..dim {
        for j in 0..i {
            if (rows[i][j] - rows[j][i]).abs() > SYMMETRY_TOLERANCE * scale {
                return Err(invalid(
                    path,
                    format!("matrix is not symmetric: entry ({i},{j}) = {} but ({j},{i}) = {}", rows[i][j], rows[j][i]),
                ));
            }
        }
    }
    Ok(SymMatrix::from_rows(rows).expect("shape checked above"))
}

fn mean_matrix(s: &DistributionSection) -> Result<SymMatrix, CliError> {
    match (&s.sigma, &s.spectrum) {
        (Some(_), Some(_)) => Err(invalid("distribution.spectrum", "give either sigma or spectrum, not both")),
        (Some(rows), None) => check_symmetric(rows, "distribution.sigma"),
        (None, Some(diag)) if diag.is_empty() => Err(invalid("distribution.spectrum", "must not be empty")),
        (None, Some(diag)) => Ok(SymMatrix::from_diagonal(diag)),
        (None, None) => Err(invalid("distribution.sigma", "required (or give distribution.spectrum)")),
    }
}

fn unused<T>(value: &Option<T>, key: &str, kind: &str) -> Result<(), CliError> {
    match value {
        Some(_) => Err(invalid(key, format!("not used by kind = \"{kind}\""))),
        None => Ok(()),
    }
}

fn build_distribution(s: &DistributionSection) -> Result<MatrixDistribution, CliError> {
    let core = |e: matconc_core::Error| invalid("distribution", e.to_string());
    match s.kind {
        DistributionKind::FiniteSupport => {
            unused(&s.sigma, "distribution.sigma", "finite_support")?;
            unused(&s.spectrum, "distribution.spectrum", "finite_support")?;
            unused(&s.epsilon, "distribution.epsilon", "finite_support")?;
            let specs = s
                .atoms
                .as_ref()
                .ok_or_else(|| invalid("distribution.atoms", "required for kind = \"finite_support\""))?;
            let mut atoms = Vec::with_capacity(specs.len());
            for (j, a) in specs.iter().enumerate() {
                atoms.push(Atom {
                    matrix: check_symmetric(&a.matrix, &format!("distribution.atoms[{j}].matrix"))?,
                    probability: a.probability,
                });
            }
            MatrixDistribution::finite_support(atoms).map_err(|e| invalid("distribution.atoms", e.to_string()))
        }
        DistributionKind::RankOneSphere => {
            unused(&s.atoms, "distribution.atoms", "rank_one_sphere")?;
            unused(&s.epsilon, "distribution.epsilon", "rank_one_sphere")?;
            MatrixDistribution::rank_one_sphere(mean_matrix(s)?).map_err(core)
        }
        DistributionKind::DiagonalPerturbation => {
            unused(&s.atoms, "distribution.atoms", "diagonal_perturbation")?;
            let eps = s
                .epsilon
                .ok_or_else(|| invalid("distribution.epsilon", "required for kind = \"diagonal_perturbation\""))?;
            MatrixDistribution::diagonal_perturbation(mean_matrix(s)?, eps).map_err(core)
        }
    }
}

fn build_schedule(s: &ScheduleSection) -> Result<StepSchedule, CliError> {
    let schedule = match s.kind {
        ScheduleKind::Constant => {
            unused(&s.horizon, "schedule.horizon", "constant")?;
            unused(&s.gamma, "schedule.gamma", "constant")?;
            StepSchedule::Constant { c: s.c }
        }
        ScheduleKind::FixedHorizon => {
            unused(&s.gamma, "schedule.gamma", "fixed_horizon")?;
            let horizon = s
                .horizon
                .ok_or_else(|| invalid("schedule.horizon", "required for kind = \"fixed_horizon\""))?;
            StepSchedule::FixedHorizon { c: s.c, horizon }
        }
        ScheduleKind::Polynomial => {
            unused(&s.horizon, "schedule.horizon", "polynomial")?;
            let gamma = s
                .gamma
                .ok_or_else(|| invalid("schedule.gamma", "required for kind = \"polynomial\""))?;
            StepSchedule::Polynomial { c: s.c, gamma }
        }
    };
    schedule.validate().map_err(|e| match e {
        matconc_core::Error::Domain { name, .. } => invalid(name, e.to_string()),
        other => invalid("schedule", other.to_string()),
    })?;
    Ok(schedule)
}
