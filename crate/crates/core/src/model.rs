//! The mixture model `X = y μᵀ + Z Σ^{1/2}` with label-flipping noise.

use std::path::Path;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{stream, StreamRole};
use crate::spectrum::Spectrum;

/// Distribution of the entries of `Z`. Both are isotropic with unit variance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CovariateLaw {
    #[default]
    Gaussian,
    Rademacher,
}

impl CovariateLaw {
    fn draw<R: Rng + ?Sized>(self, rng: &mut R) -> f64 {
        match self {
            CovariateLaw::Gaussian => rng.sample(StandardNormal),
            CovariateLaw::Rademacher => rademacher(rng),
        }
    }
}

fn rademacher<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    if rng.random::<bool>() {
        1.0
    } else {
        -1.0
    }
}

/// Full description of one experiment setting.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    spectrum: Arc<Spectrum>,
    mu: Vec<f64>,
    n: usize,
    eta: f64,
    lambda_reg: f64,
    law: CovariateLaw,
}

impl ProblemSpec {
    pub fn new(
        spectrum: impl Into<Arc<Spectrum>>,
        mu: Vec<f64>,
        n: usize,
        eta: f64,
        lambda_reg: f64,
        law: CovariateLaw,
    ) -> Result<Self> {
        let spectrum = spectrum.into();
        if mu.len() != spectrum.len() {
            return Err(Error::InvalidParams(format!(
                "mean vector has length {} but the spectrum has dimension {}",
                mu.len(),
                spectrum.len()
            )));
        }
        if mu.iter().any(|m| !m.is_finite()) {
            return Err(Error::InvalidParams("mean vector has non-finite entries".into()));
        }
        check_eta(eta)?;
        if n == 0 || spectrum.len() <= n {
            return Err(Error::InvalidParams(format!(
                "need 1 ≤ n < p, got n={n}, p={}",
                spectrum.len()
            )));
        }
        if !lambda_reg.is_finite() {
            return Err(Error::InvalidParams(format!("regularization {lambda_reg} is not finite")));
        }
        Ok(Self {
            spectrum,
            mu,
            n,
            eta,
            lambda_reg,
            law,
        })
    }

    pub fn spectrum(&self) -> &Spectrum {
        &self.spectrum
    }

    pub fn spectrum_arc(&self) -> &Arc<Spectrum> {
        &self.spectrum
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.spectrum.len()
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn lambda_reg(&self) -> f64 {
        self.lambda_reg
    }

    pub fn law(&self) -> CovariateLaw {
        self.law
    }

    pub fn with_lambda(&self, lambda_reg: f64) -> Self {
        Self {
            lambda_reg,
            ..self.clone()
        }
    }

    pub fn with_eta(&self, eta: f64) -> Result<Self> {
        check_eta(eta)?;
        Ok(Self {
            eta,
            ..self.clone()
        })
    }

    /// Same problem with `μ` multiplied by `scale`.
    pub fn with_mu_scale(&self, scale: f64) -> Self {
        Self {
            mu: self.mu.iter().map(|m| m * scale).collect(),
            ..self.clone()
        }
    }

    pub fn with_mu(&self, mu: Vec<f64>) -> Result<Self> {
        Self::new(
            self.spectrum.clone(),
            mu,
            self.n,
            self.eta,
            self.lambda_reg,
            self.law,
        )
    }
}

fn check_eta(eta: f64) -> Result<()> {
    if !(0.0..0.5).contains(&eta) {
        return Err(Error::InvalidParams(format!("noise rate must lie in [0, 1/2), got {eta}")));
    }
    Ok(())
}

/// One sampled training set.
#[derive(Debug, Clone)]
pub struct Dataset {
    /// `n × p`, i.i.d. isotropic entries.
    pub z: DMatrix<f64>,
    /// `n × p`, `Q = Z Σ^{1/2}`.
    pub q: DMatrix<f64>,
    pub y: DVector<f64>,
    pub y_hat: DVector<f64>,
    pub seed: u64,
    pub trial: u64,
}

impl Dataset {
    pub fn n(&self) -> usize {
        self.q.nrows()
    }

    pub fn p(&self) -> usize {
        self.q.ncols()
    }

    /// `Δy = ŷ - y`.
    pub fn delta_y(&self) -> DVector<f64> {
        &self.y_hat - &self.y
    }

    /// The design matrix `X = y μᵀ + Q`.
    pub fn design(&self, mu: &[f64]) -> DMatrix<f64> {
        let mut x = self.q.clone();
        for (j, m) in mu.iter().enumerate() {
            let mut col = x.column_mut(j);
            col.axpy(*m, &self.y, 1.0);
        }
        x
    }

    /// Same `Z` and `y` with every label flipped independently at rate `eta`,
    /// from the same flip stream.
    pub fn reflipped(&self, eta: f64) -> Result<Self> {
        let mut rng = stream(self.seed, self.trial, StreamRole::Flips);
        let y_hat = flip_labels(self.y.as_slice(), eta, &mut rng)?;
        Ok(Self {
            y_hat: DVector::from_vec(y_hat),
            ..self.clone()
        })
    }

    /// Write `Z.f64` (row-major), `y.i8`, `yhat.i8` and `dataset.json` into
    /// `dir`, creating it if needed.
    pub fn dump(&self, dir: impl AsRef<Path>, law: CovariateLaw, spectrum_ref: &str) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        let (n, p) = self.z.shape();
        let mut z = Vec::with_capacity(n * p * 8);
        for i in 0..n {
            for j in 0..p {
                z.extend_from_slice(&self.z[(i, j)].to_le_bytes());
            }
        }
        std::fs::write(dir.join("Z.f64"), z)?;
        let labels = |v: &DVector<f64>| -> Vec<u8> { v.iter().map(|&s| (s as i8) as u8).collect() };
        std::fs::write(dir.join("y.i8"), labels(&self.y))?;
        std::fs::write(dir.join("yhat.i8"), labels(&self.y_hat))?;
        let sidecar = DumpSidecar {
            n,
            p,
            law,
            seed: self.seed,
            trial: self.trial,
            spectrum: spectrum_ref.to_string(),
            z_layout: "row-major f64 little-endian".into(),
        };
        std::fs::write(dir.join("dataset.json"), serde_json::to_string_pretty(&sidecar)?)?;
        Ok(())
    }
}

/// JSON sidecar of a dataset dump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DumpSidecar {
    pub n: usize,
    pub p: usize,
    pub law: CovariateLaw,
    pub seed: u64,
    pub trial: u64,
    pub spectrum: String,
    pub z_layout: String,
}

/// Draw trial `trial` of the problem under master seed `seed`.
pub fn sample_dataset(problem: &ProblemSpec, seed: u64, trial: u64) -> Dataset {
    let n = problem.n();
    let p = problem.p();
    let law = problem.law();
    let mut zr = stream(seed, trial, StreamRole::Covariates);
    // column-major fill: all n entries of column 0 first, and so on
    let z = DMatrix::from_iterator(n, p, (0..n * p).map(|_| law.draw(&mut zr)));
    let mut q = z.clone();
    for (j, lam) in problem.spectrum().values().iter().enumerate() {
        q.column_mut(j).scale_mut(lam.sqrt());
    }
    let mut yr = stream(seed, trial, StreamRole::Labels);
    let y: Vec<f64> = (0..n).map(|_| rademacher(&mut yr)).collect();
    let mut fr = stream(seed, trial, StreamRole::Flips);
    // eta was validated when the problem was built
    let y_hat = flip_labels(&y, problem.eta(), &mut fr).expect("validated noise rate");
    Dataset {
        z,
        q,
        y: DVector::from_vec(y),
        y_hat: DVector::from_vec(y_hat),
        seed,
        trial,
    }
}

/// Negate each label independently with probability `eta`.
pub fn flip_labels<R: Rng + ?Sized>(y: &[f64], eta: f64, rng: &mut R) -> Result<Vec<f64>> {
    check_eta(eta)?;
    Ok(y
        .iter()
        .map(|&yi| {
            let u: f64 = rng.random();
            if u < eta {
                -yi
            } else {
                yi
            }
        })
        .collect())
}

/// A fresh test example.
#[derive(Debug, Clone, PartialEq)]
pub struct TestPoint {
    pub x: Vec<f64>,
    pub y: f64,
    pub y_hat: f64,
}

/// Draw `x = y μ + Σ^{1/2} z` with a noisy label flipped at rate `η`.
pub fn test_point<R: Rng + ?Sized>(problem: &ProblemSpec, rng: &mut R) -> TestPoint {
    draw_test_point(problem, rng, true)
}

/// Diagnostic variant with `z = 0`, so that `x = y μ`.
pub fn test_point_noiseless<R: Rng + ?Sized>(problem: &ProblemSpec, rng: &mut R) -> TestPoint {
    draw_test_point(problem, rng, false)
}

fn draw_test_point<R: Rng + ?Sized>(problem: &ProblemSpec, rng: &mut R, with_noise: bool) -> TestPoint {
    let y = rademacher(rng);
    let law = problem.law();
    let x = problem
        .mu()
        .iter()
        .zip(problem.spectrum().values())
        .map(|(m, lam)| {
            let z = if with_noise { law.draw(rng) } else { 0.0 };
            y * m + lam.sqrt() * z
        })
        .collect();
    let flip = rng.random::<f64>() < problem.eta();
    TestPoint {
        x,
        y,
        y_hat: if flip { -y } else { y },
    }
}

/// Monte-Carlo misclassification rate of `sign(wᵀx)` against the clean test
/// label over `draws` fresh test points.
pub fn empirical_error<R: Rng + ?Sized>(
    problem: &ProblemSpec,
    w: &[f64],
    draws: usize,
    rng: &mut R,
) -> f64 {
    let inner: f64 = problem.mu().iter().zip(w).map(|(m, wi)| m * wi).sum();
    let scaled: Vec<f64> = w
        .iter()
        .zip(problem.spectrum().values())
        .map(|(wi, lam)| wi * lam.sqrt())
        .collect();
    let law = problem.law();
    let mut errors = 0usize;
    for _ in 0..draws {
        let y = rademacher(rng);
        let noise: f64 = scaled.iter().map(|s| s * law.draw(rng)).sum();
        if y * (y * inner + noise) <= 0.0 {
            errors += 1;
        }
    }
    errors as f64 / draws as f64
}
