//! The experiment document. One JSON file per run; every field except the
//! command section has a default, so a config can be as small as `{}`.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use cauchylab::ensemble::{random_simple_measure, stream, MeasureSpec};
use cauchylab::transforms::{bounds, ConeSampling, MaximalOperator, SweepGrid};
use cauchylab::{SchattenIndex, SimpleOpMeasure};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Optional; when present it must name the subcommand being run.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<String>,
    #[serde(default)]
    pub seed: u64,
    /// Worker threads; `None` uses every core. Never affects results, so it
    /// is left out of the hashed and echoed configuration.
    #[serde(default, skip_serializing)]
    pub threads: Option<usize>,
    #[serde(default = "default_p")]
    pub p: SchattenIndex,
    /// Order of the regularized determinant; defaults to `ceil(p)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<u32>,
    #[serde(default)]
    pub measure: MeasureSource,
    #[serde(default)]
    pub cz: CzConfig,
    #[serde(default)]
    pub weaknorm: WeakNormConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default)]
    pub scatter: ScatterConfig,
}

fn default_p() -> SchattenIndex {
    SchattenIndex::OPERATOR
}

/// Where measures come from: a fixture file, or `count` seeded draws.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureSource {
    /// Relative paths resolve against the config file's directory.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixture: Option<PathBuf>,
    #[serde(default)]
    pub generator: MeasureSpec,
    #[serde(default = "one")]
    pub count: usize,
}

fn one() -> usize {
    1
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CzConfig {
    /// Absolute thresholds.
    #[serde(default)]
    pub levels: Vec<f64>,
    /// Thresholds as multiples of `‖μ‖(ℝ)`.
    #[serde(default)]
    pub relative_levels: Vec<f64>,
    #[serde(default = "default_off_support")]
    pub off_support_samples: usize,
}

fn default_off_support() -> usize {
    100
}

impl Default for CzConfig {
    fn default() -> Self {
        Self { levels: Vec::new(), relative_levels: vec![1.0], off_support_samples: default_off_support() }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default)]
    pub center: f64,
    pub span: f64,
    pub count: usize,
}

impl GridConfig {
    pub fn grid(&self) -> Result<SweepGrid> {
        Ok(SweepGrid::centered(self.center, self.span, self.count)?)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeakNormConfig {
    #[serde(default = "all_operators")]
    pub operators: Vec<String>,
    #[serde(default = "default_grid")]
    pub grid: GridConfig,
    #[serde(default = "default_cx")]
    pub cx: f64,
    #[serde(default)]
    pub cone: ConeSampling,
}

fn all_operators() -> Vec<String> {
    MaximalOperator::ALL.iter().map(|o| o.name().to_string()).collect()
}

fn default_grid() -> GridConfig {
    GridConfig { center: 0.0, span: 4.0, count: 400 }
}

fn default_cx() -> f64 {
    bounds::DEFAULT_CX
}

impl Default for WeakNormConfig {
    fn default() -> Self {
        Self { operators: all_operators(), grid: default_grid(), cx: default_cx(), cone: ConeSampling::default() }
    }
}

impl WeakNormConfig {
    pub fn operators(&self) -> Result<Vec<MaximalOperator>> {
        self.operators.iter().map(|s| parse_operator(s)).collect()
    }
}

pub fn parse_operator(name: &str) -> Result<MaximalOperator> {
    match name {
        "M" | "hl" | "hardy-littlewood" => Ok(MaximalOperator::HardyLittlewood),
        "H" | "hilbert" => Ok(MaximalOperator::Hilbert),
        "Hsharp" | "hilbert-maximal" => Ok(MaximalOperator::HilbertMaximal),
        "T" | "nontangential" => Ok(MaximalOperator::Nontangential),
        other => bail!("unknown operator {other:?} (expected M, H, Hsharp or T)"),
    }
}

/// Ensemble audit: every measure gets every operator; norms cycle
/// `S₁`, `S₂`, operator unless `mixed_norms` is off.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default = "default_true")]
    pub mixed_norms: bool,
    #[serde(default = "default_grid")]
    pub grid: GridConfig,
    #[serde(default = "default_cx")]
    pub cx: f64,
    #[serde(default = "ConeSampling::coarse")]
    pub cone: ConeSampling,
}

fn default_true() -> bool {
    true
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self { mixed_norms: true, grid: default_grid(), cx: default_cx(), cone: ConeSampling::coarse() }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScatterConfig {
    /// JSON model `{"H0", "G", "J"}`; exclusive with `example`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub example: Option<ExampleConfig>,
    /// Resolvent-identity points `[re, im]`.
    #[serde(default = "default_points")]
    pub points: Vec<[f64; 2]>,
    #[serde(default = "default_residual_tol")]
    pub residual_tol: f64,
    #[serde(default)]
    pub ladder: Option<LadderConfig>,
    #[serde(default)]
    pub wave: Option<WaveConfig>,
    #[serde(default)]
    pub det: Option<DetConfig>,
    #[serde(default)]
    pub hypothesis: Option<HypothesisConfig>,
}

fn default_points() -> Vec<[f64; 2]> {
    vec![[0.0, 1.0], [0.5, 0.1], [-0.5, -0.1], [0.25, 0.01]]
}

fn default_residual_tol() -> f64 {
    1e-10
}

impl Default for ScatterConfig {
    fn default() -> Self {
        Self {
            model: None,
            example: None,
            points: default_points(),
            residual_tol: default_residual_tol(),
            ladder: None,
            wave: None,
            det: None,
            hypothesis: None,
        }
    }
}

/// Multiplication operator by `x` on `L²((0,1); ℂᶜ)` with `rank` output
/// channels, `G(x)_{ic} = 2^{-|i-c|}(1 + sin(π(i+1)x)/2)` and `J = diag(j)`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExampleConfig {
    pub grid: usize,
    #[serde(default = "one")]
    pub channels: usize,
    /// Diagonal of `J`; its length is the rank of `G`.
    #[serde(default = "default_j")]
    pub j: Vec<f64>,
}

fn default_j() -> Vec<f64> {
    vec![1.0]
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LadderConfig {
    pub lambdas: Vec<f64>,
    /// Strictly decreasing.
    pub epsilons: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaveConfig {
    /// Times `t0 · 2^m`, `m = 0..=doublings`.
    #[serde(default = "default_t0")]
    pub t0: f64,
    #[serde(default = "default_doublings")]
    pub doublings: u32,
    /// Real initial state; normalized on load. Defaults to a smooth bump
    /// on the first channel for the example model and to `(1, …, 1)/√n`
    /// otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub psi: Option<Vec<f64>>,
    /// Restrict to `E_{H₀}((lo, hi])ψ`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interval: Option<[f64; 2]>,
}

fn default_t0() -> f64 {
    10.0
}

fn default_doublings() -> u32 {
    12
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetConfig {
    pub lambdas: Vec<f64>,
    pub epsilons: Vec<f64>,
}

/// `‖G E_{H₀}(δ) G*‖_p <= ν₀(δ)` with `ν₀` the `p`-variation of the sandwiched
/// spectral measure of `H₀` (the smallest admissible choice).
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HypothesisConfig {
    pub interval: [f64; 2],
    #[serde(default = "default_depth")]
    pub depth: u32,
}

fn default_depth() -> u32 {
    6
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg: Self = serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(f) = cfg.measure.fixture.as_mut() {
            resolve(f);
        }
        if let Some(f) = cfg.scatter.model.as_mut() {
            resolve(f);
        }
        Ok(cfg)
    }

    /// SHA-256 of the effective configuration (after flag overrides).
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    /// `ceil(p)` for finite `p`; with the operator norm every matrix is
    /// trace class and the plain determinant (`q = 1`) is used.
    pub fn q(&self) -> u32 {
        self.q.or(self.p.default_det_order()).unwrap_or(1)
    }

    /// The measures under study, in ensemble order.
    pub fn measures(&self) -> Result<Vec<SimpleOpMeasure>> {
        match &self.measure.fixture {
            Some(path) => Ok(vec![SimpleOpMeasure::load_json(path).with_context(|| format!("loading fixture {}", path.display()))?]),
            None => (0..self.measure.count as u64)
                .map(|i| Ok(random_simple_measure(&mut stream(self.seed, i), &self.measure.generator)?))
                .collect(),
        }
    }
}
