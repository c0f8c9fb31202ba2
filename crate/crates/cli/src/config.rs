//! Experiment configuration: one TOML file per experiment.

use std::path::PathBuf;

use serde::Deserialize;
use sha2::{Digest, Sha256};

use poisson_walks::group::DEFAULT_ELEMENT_CAP;
use poisson_walks::matrix::{sl2z_uniform, MatrixMeasure};
use poisson_walks::{GroupSpec, Measure};

use crate::CliError;

/// Weight totals this close to one are normalized silently.
pub const SILENT_MASS_TOLERANCE: f64 = 1e-9;
/// Weight totals beyond this are rejected; in between they are normalized
/// with a warning.
pub const REJECT_MASS_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: Option<u64>,
    pub group: Option<GroupConfig>,
    pub measure: Option<MeasureConfig>,
    pub matrix: Option<MatrixConfig>,
    #[serde(default)]
    pub horizons: Horizons,
    #[serde(default)]
    pub paths: Paths,
    #[serde(default)]
    pub harmonic: HarmonicConfig,
    #[serde(default)]
    pub depths: Depths,
    #[serde(default)]
    pub margins: Margins,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub targets: Targets,
    #[serde(default)]
    pub limits: Limits,
    #[serde(default)]
    pub output: Output,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
pub enum GroupKindConfig {
    Free,
    FreeProduct,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupConfig {
    pub kind: GroupKindConfig,
    pub rank: Option<usize>,
    pub orders: Option<Vec<u32>>,
    pub labels: Option<Vec<String>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
pub enum MeasureKind {
    Srw,
    Literal,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Atom {
    pub word: String,
    pub weight: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureConfig {
    pub kind: MeasureKind,
    #[serde(default)]
    pub atoms: Vec<Atom>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixAtom {
    pub rows: Vec<Vec<i64>>,
    pub weight: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixConfig {
    /// `"sl2z"` selects the uniform measure on the standard generators.
    pub preset: Option<String>,
    #[serde(default)]
    pub atoms: Vec<MatrixAtom>,
    /// Element used for the flag equivariance check.
    pub equivariance: Option<Vec<Vec<i64>>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Horizons {
    pub drift: usize,
    /// Exact convolution horizon for entropy, conditioning and maximality.
    pub entropy: usize,
    /// Grid for the conditional-entropy trend; must end at or below `entropy`.
    pub trend: Vec<usize>,
    pub ray: Vec<usize>,
    pub strip: usize,
    pub regularity: usize,
    pub lyapunov: usize,
    /// Grid for matrix regularity and flag convergence.
    pub matrix: Vec<usize>,
    /// Horizon for the QR-versus-exact comparison.
    pub exact_matrix: usize,
}

impl Default for Horizons {
    fn default() -> Self {
        Horizons {
            drift: 10_000,
            entropy: 12,
            trend: (4..=12).collect(),
            ray: vec![1_000, 3_000, 10_000],
            strip: 10_000,
            regularity: 10_000,
            lyapunov: 10_000,
            matrix: vec![100, 1_000, 10_000],
            exact_matrix: 40,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Paths {
    pub drift: usize,
    pub smb: usize,
    pub harmonic: usize,
    pub fit: usize,
    pub rays: usize,
    pub conditional: usize,
    pub gap: usize,
    pub maximality: usize,
    pub ray: usize,
    pub strip: usize,
    pub lyapunov: usize,
    pub matrix: usize,
    pub exact_matrix: usize,
}

impl Default for Paths {
    fn default() -> Self {
        Paths {
            drift: 200,
            smb: 20_000,
            harmonic: 100_000,
            fit: 100_000,
            rays: 50,
            conditional: 2_000,
            gap: 20_000,
            maximality: 20,
            ray: 200,
            strip: 200,
            lyapunov: 200,
            matrix: 100,
            exact_matrix: 20,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
pub enum ModelChoice {
    /// Exact model when one is known, otherwise a Monte Carlo fit.
    #[default]
    Auto,
    /// Always fit by Monte Carlo.
    Fit,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HarmonicConfig {
    pub model: ModelChoice,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Depths {
    /// Cylinder depth for the frequency check and the CSV table.
    pub cylinder: usize,
    pub stationarity: usize,
    /// Depth of the fitted Markov model.
    pub fit: usize,
    /// Radius of the ball of translations in the `rn` check.
    pub rn_ball: usize,
}

impl Default for Depths {
    fn default() -> Self {
        Depths { cylinder: 3, stationarity: 4, fit: 6, rn_ball: 3 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Margins {
    /// Extra letters confirming a boundary prefix.
    pub boundary: usize,
    /// Step budget when tracking a path to a given depth.
    pub max_steps: usize,
    /// Horizon extension limit for the ray check, as a multiple of `n`.
    pub ray_cap_factor: usize,
}

impl Default for Margins {
    fn default() -> Self {
        Margins { boundary: 12, max_steps: 100_000, ray_cap_factor: 8 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub drift: f64,
    pub entropy: f64,
    pub cylinder_sigma: f64,
    pub stationarity: f64,
    pub rn: f64,
    pub conditional: f64,
    pub control: f64,
    pub gap_sigma: f64,
    pub maximality: f64,
    pub maximality_epsilon: f64,
    pub negative_control: f64,
    pub strip: f64,
    pub strip_growth: f64,
    pub ray: f64,
    pub censoring: f64,
    pub jump: f64,
    pub drift_change: f64,
    pub conclusion: f64,
    pub zero_rate: f64,
    pub matrix_regularity: f64,
    pub qr_exact: f64,
    pub radial_sum: f64,
    pub lyapunov_min: f64,
    pub lyapunov_spread: f64,
    pub flag_gap: f64,
    pub flag_equivariance: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            drift: 0.01,
            entropy: 0.02,
            cylinder_sigma: 3.0,
            stationarity: 1e-10,
            rn: 1e-10,
            conditional: 0.05,
            control: 0.03,
            gap_sigma: 2.0,
            maximality: 0.05,
            maximality_epsilon: 0.5,
            negative_control: 0.3,
            strip: 0.0011,
            strip_growth: 0.1,
            ray: 0.05,
            censoring: 0.01,
            jump: 0.05,
            drift_change: 0.05,
            conclusion: 0.05,
            zero_rate: 0.05,
            matrix_regularity: 0.05,
            qr_exact: 1e-6,
            radial_sum: 1e-6,
            lyapunov_min: 0.05,
            lyapunov_spread: 0.01,
            flag_gap: 1e-3,
            flag_equivariance: 1e-6,
        }
    }
}

impl Tolerances {
    fn named(&self) -> [(&'static str, f64); 26] {
        [
            ("drift", self.drift),
            ("entropy", self.entropy),
            ("cylinder_sigma", self.cylinder_sigma),
            ("stationarity", self.stationarity),
            ("rn", self.rn),
            ("conditional", self.conditional),
            ("control", self.control),
            ("gap_sigma", self.gap_sigma),
            ("maximality", self.maximality),
            ("maximality_epsilon", self.maximality_epsilon),
            ("negative_control", self.negative_control),
            ("strip", self.strip),
            ("strip_growth", self.strip_growth),
            ("ray", self.ray),
            ("censoring", self.censoring),
            ("jump", self.jump),
            ("drift_change", self.drift_change),
            ("conclusion", self.conclusion),
            ("zero_rate", self.zero_rate),
            ("matrix_regularity", self.matrix_regularity),
            ("qr_exact", self.qr_exact),
            ("radial_sum", self.radial_sum),
            ("lyapunov_min", self.lyapunov_min),
            ("lyapunov_spread", self.lyapunov_spread),
            ("flag_gap", self.flag_gap),
            ("flag_equivariance", self.flag_equivariance),
        ]
    }
}

/// Reference values the `--assert` checks compare against, when known.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Targets {
    pub drift: Option<f64>,
    pub entropy: Option<f64>,
    /// Expected entropy of the unconditioned walk, for the control run.
    pub control: Option<f64>,
}

/// Memory budget for enumerations and convolution supports.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Limits {
    pub elements: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Limits { elements: DEFAULT_ELEMENT_CAP }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Output {
    pub dir: PathBuf,
}

impl Default for Output {
    fn default() -> Self {
        Output { dir: PathBuf::from("out") }
    }
}

/// A parsed, validated configuration together with its text hash.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: ExperimentConfig,
    pub seed: u64,
    pub hash: String,
    pub warnings: Vec<String>,
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Validation(msg.into())
}

/// Weight totals off by more than the silent tolerance produce a warning;
/// beyond the reject tolerance they are a validation error.
fn check_total(what: &str, total: f64) -> Result<Option<String>, CliError> {
    let off = (total - 1.0).abs();
    if off > REJECT_MASS_TOLERANCE {
        return Err(invalid(format!(
            "{what}: weights must sum to 1 (got {total}, off by {off:.3e} > {REJECT_MASS_TOLERANCE:e})"
        )));
    }
    Ok((off > SILENT_MASS_TOLERANCE).then(|| format!("{what}: weights sum to {total}; normalized")))
}

/// Hex SHA-256 of the config text.
pub fn config_hash(text: &str) -> String {
    Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

impl LoadedConfig {
    /// Parses and validates `text`; `seed_override` replaces the file seed.
    pub fn parse(text: &str, seed_override: Option<u64>) -> Result<Self, CliError> {
        let config: ExperimentConfig = toml::from_str(text).map_err(|e| invalid(format!("config: {e}")))?;
        let seed = seed_override
            .or(config.seed)
            .ok_or_else(|| invalid("seed must be present (in the config or via --seed)"))?;
        let mut loaded = LoadedConfig { config, seed, hash: config_hash(text), warnings: Vec::new() };
        loaded.validate()?;
        Ok(loaded)
    }

    fn validate(&mut self) -> Result<(), CliError> {
        let c = &self.config;
        let h = &c.horizons;
        for (name, grid) in [("trend", &h.trend), ("ray", &h.ray), ("matrix", &h.matrix)] {
            if grid.is_empty() || grid[0] == 0 {
                return Err(invalid(format!("horizons.{name} must be nonempty and positive")));
            }
            if grid.windows(2).any(|w| w[1] <= w[0]) {
                return Err(invalid(format!("horizons.{name} must be strictly increasing")));
            }
        }
        if h.trend.last().is_some_and(|&n| n > h.entropy) {
            return Err(invalid("horizons.trend must not exceed horizons.entropy"));
        }
        let scalars = [
            ("drift", h.drift),
            ("entropy", h.entropy),
            ("strip", h.strip),
            ("regularity", h.regularity),
            ("lyapunov", h.lyapunov),
            ("exact_matrix", h.exact_matrix),
        ];
        if c.limits.elements == 0 {
            return Err(invalid("limits.elements must be positive"));
        }
        if let Some((name, _)) = scalars.iter().find(|(_, n)| *n == 0) {
            return Err(invalid(format!("horizons.{name} must be positive")));
        }
        for (name, t) in c.tolerances.named() {
            if !(t > 0.0 && t.is_finite()) {
                return Err(invalid(format!("tolerances.{name} must be positive (got {t})")));
            }
        }
        if c.group.is_some() {
            self.group()?;
            let (_, w) = self.build_measure()?;
            self.warnings.extend(w);
        }
        if c.matrix.is_some() {
            let (_, w) = self.build_matrix_measure()?;
            self.warnings.extend(w);
            self.equivariance_element()?;
        }
        Ok(())
    }

    pub fn group(&self) -> Result<GroupSpec, CliError> {
        let g = self.config.group.as_ref().ok_or_else(|| invalid("this command needs a [group] section"))?;
        let spec = match g.kind {
            GroupKindConfig::Free => {
                let rank = g.rank.ok_or_else(|| invalid("group.rank is required for a free group"))?;
                match &g.labels {
                    Some(labels) if labels.len() == rank => GroupSpec::free_with_labels(labels.clone()),
                    Some(_) => return Err(invalid("group.labels must have one label per generator")),
                    None => GroupSpec::free(rank),
                }
            }
            GroupKindConfig::FreeProduct => {
                let orders = g.orders.clone().ok_or_else(|| invalid("group.orders is required for a free product"))?;
                match &g.labels {
                    Some(labels) if labels.len() == orders.len() => {
                        GroupSpec::free_product_with_labels(labels.iter().cloned().zip(orders).collect())
                    }
                    Some(_) => return Err(invalid("group.labels must have one label per factor")),
                    None => GroupSpec::free_product(orders),
                }
            }
        };
        spec.map_err(|e| invalid(e.to_string()))
    }

    /// Group measure; literal weights are normalized on load.
    pub fn measure(&self) -> Result<Measure, CliError> {
        self.build_measure().map(|m| m.0)
    }

    fn build_measure(&self) -> Result<(Measure, Option<String>), CliError> {
        let group = self.group()?;
        let m = self.config.measure.as_ref().ok_or_else(|| invalid("this command needs a [measure] section"))?;
        match m.kind {
            MeasureKind::Srw => Ok((Measure::simple_random_walk(&group), None)),
            MeasureKind::Literal => {
                let pairs = m
                    .atoms
                    .iter()
                    .map(|a| Ok((group.parse(&a.word).map_err(|e| invalid(e.to_string()))?, a.weight)))
                    .collect::<Result<Vec<_>, CliError>>()?;
                let (mu, total) = Measure::normalized(pairs).map_err(|e| invalid(e.to_string()))?;
                Ok((mu, check_total("measure", total)?))
            }
        }
    }

    pub fn matrix_measure(&self) -> Result<MatrixMeasure<f64>, CliError> {
        self.build_matrix_measure().map(|m| m.0)
    }

    fn build_matrix_measure(&self) -> Result<(MatrixMeasure<f64>, Option<String>), CliError> {
        let m = self.config.matrix.clone().ok_or_else(|| invalid("this command needs a [matrix] section"))?;
        match (m.preset.as_deref(), m.atoms.is_empty()) {
            (Some("sl2z"), true) => Ok((sl2z_uniform(), None)),
            (Some(p), true) => Err(invalid(format!("unknown matrix preset `{p}`"))),
            (Some(_), false) => Err(invalid("matrix: give either a preset or atoms, not both")),
            (None, true) => Err(invalid("matrix: empty support")),
            (None, false) => {
                if let Some(a) = m.atoms.iter().find(|a| a.weight.is_nan() || a.weight <= 0.0) {
                    return Err(invalid(format!("matrix: weights must be positive (got {})", a.weight)));
                }
                let total: f64 = m.atoms.iter().map(|a| a.weight).sum();
                let warning = check_total("matrix", total)?;
                let atoms = m.atoms.iter().map(|a| (a.rows.clone(), a.weight / total)).collect();
                let mu = MatrixMeasure::from_integer(atoms).map_err(|e| invalid(e.to_string()))?;
                Ok((mu, warning))
            }
        }
    }

    /// Element used for the flag equivariance check.
    pub fn equivariance_element(&self) -> Result<Vec<Vec<i64>>, CliError> {
        let m = self.config.matrix.as_ref().ok_or_else(|| invalid("this command needs a [matrix] section"))?;
        let g = match &m.equivariance {
            Some(g) => g.clone(),
            None => {
                let d = match (m.preset.as_deref(), m.atoms.first()) {
                    (Some(_), _) => 2,
                    (None, Some(a)) => a.rows.len(),
                    (None, None) => 2,
                };
                let mut g: Vec<Vec<i64>> = (0..d).map(|i| (0..d).map(|j| i64::from(i == j)).collect()).collect();
                g[0][1] = 1;
                g[1][0] = 1;
                g[1][1] = 2;
                g
            }
        };
        if g.iter().any(|r| r.len() != g.len()) {
            return Err(invalid("matrix.equivariance must be square"));
        }
        Ok(g)
    }
}
