use std::path::{Path, PathBuf};

use ridgemargin::spectrum::{make_corollary_example, CorollaryKind, CorollaryParams};
use ridgemargin::{CovariateLaw, ProblemSpec, Spectrum};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Top-level run configuration. Every block and key is optional.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub problem: ProblemConfig,
    pub experiment: ExperimentConfig,
    pub output: OutputConfig,
    /// Filled in by the run manifest; ignored on input.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub run: Option<RunInfo>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunInfo {
    pub command: String,
    pub version: String,
    pub seed: u64,
    pub timestamp: String,
    pub files: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProblemConfig {
    pub spectrum: SpectrumConfig,
    pub mu: MuConfig,
    pub n: usize,
    pub eta: f64,
    /// `None` means 0, or the construction's own value.
    pub lambda: Option<f64>,
    pub law: CovariateLaw,
}

impl Default for ProblemConfig {
    fn default() -> Self {
        Self {
            spectrum: SpectrumConfig::Isotropic { p: 1000 },
            mu: MuConfig::Basis { index: 0, scale: 2.0 },
            n: 50,
            eta: 0.0,
            lambda: None,
            law: CovariateLaw::Gaussian,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SpectrumConfig {
    Isotropic { p: usize },
    Spiked { p: usize, k: usize, spike: f64 },
    /// Bi-level family at the problem's `n`.
    Bilevel { s: f64, q: f64, r: f64 },
    Values { values: Vec<f64> },
    File { path: PathBuf },
    TailBalance {
        k: usize,
        #[serde(default)]
        params: CorollaryParams,
    },
    GeometryDestroy {
        k: usize,
        #[serde(default)]
        params: CorollaryParams,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum MuConfig {
    /// `scale · e_index`
    Basis { index: usize, scale: f64 },
    /// Constant entries with `‖μ‖ = scale`.
    Constant { scale: f64 },
    Values { values: Vec<f64> },
    /// One value per line.
    File { path: PathBuf },
    /// The mean built by a construction spectrum, times `scale`.
    Construction {
        #[serde(default = "one")]
        scale: f64,
    },
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub trials: usize,
    pub eps: Vec<f64>,
    pub t: f64,
    /// Split index; `None` picks `k*`.
    pub k: Option<usize>,
    pub mu_scales: Vec<f64>,
    pub lambdas: Vec<f64>,
    pub phase: PhaseConfig,
    pub demo: DemoConfig,
    pub events: EventsConfig,
    pub verify: VerifyConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            trials: 200,
            eps: vec![0.05, 0.1, 0.25],
            t: 1.0,
            k: None,
            mu_scales: vec![0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0],
            lambdas: vec![0.0, 1.0, 10.0, 100.0],
            phase: PhaseConfig::default(),
            demo: DemoConfig::default(),
            events: EventsConfig::default(),
            verify: VerifyConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhaseConfig {
    pub q_grid: Vec<f64>,
    pub n_grid: Vec<usize>,
    pub r: f64,
    pub s: f64,
    /// Zero skips the empirical column.
    pub trials: usize,
    pub eps: f64,
    pub max_entries: usize,
}

impl Default for PhaseConfig {
    fn default() -> Self {
        Self {
            q_grid: vec![0.3, 0.5, 0.75, 0.95],
            n_grid: vec![100, 1000, 10_000],
            r: 0.5,
            s: 1.5,
            trials: 0,
            eps: 0.1,
            max_entries: 5_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DemoConfig {
    pub k: usize,
    pub c_c: f64,
    pub trials: usize,
    pub eps: f64,
    /// Absolute mean scales along the problem's mean direction. `None` runs
    /// the smallest admissible scale and one hundredth of it.
    pub mu_scales: Option<Vec<f64>>,
}

impl Default for DemoConfig {
    fn default() -> Self {
        Self {
            k: 1,
            c_c: 8.0,
            trials: 50,
            eps: 0.25,
            mu_scales: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EventsConfig {
    pub trials: usize,
}

impl Default for EventsConfig {
    fn default() -> Self {
        Self { trials: 100 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyConfig {
    pub instances: usize,
    /// Test hook: relative corruption of `S`.
    pub s_perturbation: f64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            instances: 1000,
            s_perturbation: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub csv: bool,
    /// Dump the first trial's dataset next to the CSV.
    pub dump: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            csv: true,
            dump: false,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut cfg: RunConfig =
            serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.run = None;
        Ok(cfg)
    }

    /// Checks that need no sampling.
    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        let e = &self.experiment;
        if self.problem.n == 0 {
            return bad("problem.n must be positive".into());
        }
        if !(0.0..0.5).contains(&self.problem.eta) {
            return bad(format!("problem.eta = {} is outside [0, 1/2)", self.problem.eta));
        }
        if e.trials == 0 {
            return bad("experiment.trials must be positive".into());
        }
        if e.eps.is_empty() || e.eps.iter().any(|&x| !(x > 0.0 && x < 1.0)) {
            return bad(format!("experiment.eps must be nonempty levels in (0, 1), got {:?}", e.eps));
        }
        if !(e.t >= 0.0) {
            return bad(format!("experiment.t = {} must be nonnegative", e.t));
        }
        if e.mu_scales.iter().any(|s| !s.is_finite()) || e.lambdas.iter().any(|l| !l.is_finite()) {
            return bad("grids must be finite".into());
        }
        let ph = &e.phase;
        if ph.q_grid.is_empty() || ph.n_grid.is_empty() {
            return bad("phase grids must be nonempty".into());
        }
        if !(e.verify.s_perturbation.is_finite()) {
            return bad("verify.s_perturbation must be finite".into());
        }
        if let Some(l) = self.problem.lambda {
            if !l.is_finite() {
                return bad("problem.lambda must be finite".into());
            }
        }
        Ok(())
    }

    /// Build the problem described by the `problem` block.
    pub fn problem(&self) -> Result<ProblemSpec, CliError> {
        let pc = &self.problem;
        let n = pc.n;
        let mut built_mu = None;
        let mut built_lambda = None;
        let spectrum = match &pc.spectrum {
            SpectrumConfig::Isotropic { p } => Spectrum::isotropic(*p)?,
            SpectrumConfig::Spiked { p, k, spike } => Spectrum::spiked(*p, *k, *spike)?,
            SpectrumConfig::Bilevel { s, q, r } => Spectrum::bilevel(n, *s, *q, *r)?,
            SpectrumConfig::Values { values } => Spectrum::new(values.clone())?,
            SpectrumConfig::File { path } => Spectrum::read_file(path)?,
            SpectrumConfig::TailBalance { k, params } => {
                let ex = make_corollary_example(CorollaryKind::TailBalance, n, *k, params)?;
                built_mu = Some(ex.mu);
                built_lambda = Some(ex.lambda_reg);
                ex.spectrum
            }
            SpectrumConfig::GeometryDestroy { k, params } => {
                let ex = make_corollary_example(CorollaryKind::GeometryDestroy, n, *k, params)?;
                built_mu = Some(ex.mu);
                built_lambda = Some(ex.lambda_reg);
                ex.spectrum
            }
        };
        let p = spectrum.len();
        let mu = match &pc.mu {
            MuConfig::Basis { index, scale } => {
                if *index >= p {
                    return Err(CliError::Config(format!("mu index {index} out of range for p = {p}")));
                }
                let mut v = vec![0.0; p];
                v[*index] = *scale;
                v
            }
            MuConfig::Constant { scale } => vec![scale / (p as f64).sqrt(); p],
            MuConfig::Values { values } => values.clone(),
            MuConfig::File { path } => read_vector(path)?,
            MuConfig::Construction { scale } => match built_mu {
                Some(m) => m.into_iter().map(|x| x * scale).collect(),
                None => {
                    return Err(CliError::Config(
                        "mu kind \"construction\" needs a construction spectrum".into(),
                    ))
                }
            },
        };
        if mu.len() != p {
            return Err(CliError::Config(format!("mu has length {} but p = {p}", mu.len())));
        }
        let lambda = pc.lambda.or(built_lambda).unwrap_or(0.0);
        Ok(ProblemSpec::new(spectrum, mu, n, pc.eta, lambda, pc.law)?)
    }
}

fn read_vector(path: &Path) -> Result<Vec<f64>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| {
            l.parse::<f64>()
                .map_err(|e| CliError::Config(format!("{}: bad value {l:?}: {e}", path.display())))
        })
        .collect()
}
