//! Empirical constants of the two concentration events.
//!
//! `𝒜_k(L)`: every eigenvalue of `A_k = λI + Q_{k:∞} Q_{k:∞}ᵀ` lies within a
//! factor `L` of `Λ = λ + Σ_{i>k} λ_i`.
//!
//! `ℬ_k(c_B)`: five law-of-large-numbers conditions on the head block
//! `Z_{0:k}` and the tail block `Q_{k:∞}`, each measured here as the smallest
//! constant for which it holds.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{sample_dataset, Dataset, ProblemSpec};
use crate::spectrum::Spectrum;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EventReport {
    pub k: usize,
    pub lambda_reg: f64,
    /// Absent when `A_k` is not positive definite.
    pub l_measured: Option<f64>,
    /// `μ_1(Z_{0:k}ᵀ Z_{0:k}) / n`
    pub b1: Option<f64>,
    /// `n / μ_k(Z_{0:k}ᵀ Z_{0:k})`
    pub b1inv: Option<f64>,
    /// `‖Q_{k:∞} μ_{k:∞}‖² / (n ‖μ_{k:∞}‖_Σ²)`
    pub b2: Option<f64>,
    /// `tr(Q_{k:∞} Σ_{k:∞} Q_{k:∞}ᵀ) / (n Σ_{i>k} λ_i²)`
    pub b3: Option<f64>,
    /// `tr(Z_{0:k}ᵀ Z_{0:k}) / (n k)`
    pub b4: Option<f64>,
    /// `‖Q_{k:∞} Σ_{k:∞} Q_{k:∞}ᵀ‖ / (Σ_{i>k} λ_i² + n λ_{k+1}²)`
    pub b5: Option<f64>,
    /// Maximum over the present condition ratios.
    pub cb_measured: f64,
}

impl EventReport {
    /// The present condition ratios, by name.
    pub fn conditions(&self) -> Vec<(&'static str, f64)> {
        [
            ("b1", self.b1),
            ("b1inv", self.b1inv),
            ("b2", self.b2),
            ("b3", self.b3),
            ("b4", self.b4),
            ("b5", self.b5),
        ]
        .into_iter()
        .filter_map(|(name, v)| v.map(|v| (name, v)))
        .collect()
    }
}

fn check_split(dataset: &Dataset, spectrum: &Spectrum, k: usize) -> Result<()> {
    if spectrum.len() != dataset.p() {
        return Err(Error::InvalidParams(format!(
            "spectrum dimension {} does not match dataset dimension {}",
            spectrum.len(),
            dataset.p()
        )));
    }
    if k >= dataset.p() {
        return Err(Error::InvalidParams(format!("split index {k} must be below p = {}", dataset.p())));
    }
    Ok(())
}

fn sym_eigenvalues(m: DMatrix<f64>) -> (f64, f64) {
    let e = m.symmetric_eigenvalues();
    (e.min(), e.max())
}

/// Smallest `L` with `Λ/L ≤ μ_n(A_k)` and `μ_1(A_k) ≤ LΛ`.
pub fn check_a_k(dataset: &Dataset, spectrum: &Spectrum, k: usize, lambda_reg: f64) -> Result<f64> {
    check_split(dataset, spectrum, k)?;
    let tail = dataset.q.columns(k, dataset.p() - k);
    let gram = tail * tail.transpose();
    let (lo, hi) = sym_eigenvalues(gram);
    let (min_eig, max_eig) = (lo + lambda_reg, hi + lambda_reg);
    let floor = 1e-12 * hi.abs().max(lambda_reg.abs());
    if !(min_eig > floor) {
        return Err(Error::SingularRegularization {
            lambda_reg,
            min_eig: lo,
            floor: floor - lo,
        });
    }
    let lam = spectrum.lambda_tail(k, lambda_reg);
    Ok((max_eig / lam).max(lam / min_eig))
}

/// Measure the five `ℬ_k` conditions. Conditions on the head block are
/// absent when `k = 0`, and the mean condition is absent when `μ_{k:∞} = 0`.
pub fn check_b_k(dataset: &Dataset, spectrum: &Spectrum, mu: &[f64], k: usize) -> Result<EventReport> {
    check_split(dataset, spectrum, k)?;
    if mu.len() != dataset.p() {
        return Err(Error::InvalidParams(format!(
            "mean vector has length {} but the dataset has dimension {}",
            mu.len(),
            dataset.p()
        )));
    }
    let n = dataset.n() as f64;
    let p = dataset.p();
    let vals = spectrum.values();

    let (b1, b1inv, b4) = if k == 0 {
        (None, None, None)
    } else {
        let head = dataset.z.columns(0, k);
        let hh = head.tr_mul(&head);
        let trace = hh.trace();
        let (lo, hi) = sym_eigenvalues(hh);
        let inv = if lo > 0.0 { n / lo } else { f64::INFINITY };
        (Some(hi / n), Some(inv), Some(trace / (n * k as f64)))
    };

    let tail = dataset.q.columns(k, p - k);
    let mu_tail = nalgebra::DVector::from_column_slice(&mu[k..]);
    let mu_sigma_sq: f64 = (k..p).map(|i| vals[i] * mu[i] * mu[i]).sum();
    let b2 = if mu_sigma_sq > 0.0 {
        Some((tail * &mu_tail).norm_squared() / (n * mu_sigma_sq))
    } else {
        None
    };

    // Q_t Σ_t^{1/2}, so that Q_t Σ_t Q_tᵀ = W Wᵀ
    let mut wt = tail.clone_owned();
    for (j, l) in vals[k..].iter().enumerate() {
        wt.column_mut(j).scale_mut(l.sqrt());
    }
    let tail_sq = spectrum.tail_sq_sum(k);
    let b3 = Some(wt.norm_squared() / (n * tail_sq));
    let next = spectrum.next_after(k);
    let (_, top) = sym_eigenvalues(&wt * wt.transpose());
    let b5 = Some(top / (tail_sq + n * next * next));

    let mut report = EventReport {
        k,
        lambda_reg: f64::NAN,
        l_measured: None,
        b1,
        b1inv,
        b2,
        b3,
        b4,
        b5,
        cb_measured: 0.0,
    };
    report.cb_measured = report
        .conditions()
        .iter()
        .map(|(_, v)| *v)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(report)
}

/// Both events on one dataset. A singular `A_k` leaves `l_measured` absent.
pub fn measure_events(
    dataset: &Dataset,
    spectrum: &Spectrum,
    mu: &[f64],
    k: usize,
    lambda_reg: f64,
) -> Result<EventReport> {
    let mut report = check_b_k(dataset, spectrum, mu, k)?;
    report.lambda_reg = lambda_reg;
    report.l_measured = match check_a_k(dataset, spectrum, k, lambda_reg) {
        Ok(l) => Some(l),
        Err(Error::SingularRegularization { .. }) => None,
        Err(e) => return Err(e),
    };
    Ok(report)
}

/// Event reports for trials `0..trials` of a problem, in trial order.
pub fn event_trials(problem: &ProblemSpec, k: usize, trials: usize, seed: u64) -> Result<Vec<EventReport>> {
    (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let ds = sample_dataset(problem, seed, t);
            measure_events(&ds, problem.spectrum(), problem.mu(), k, problem.lambda_reg())
        })
        .collect()
}

pub const EVENT_COLUMNS: [&str; 11] = [
    "trial",
    "k",
    "lambda",
    "L_measured",
    "b1",
    "b1inv",
    "b2",
    "b3",
    "b4",
    "b5",
    "cB_measured",
];

/// CSV cells matching [`EVENT_COLUMNS`]; absent values are empty.
pub fn event_fields(trial: u64, r: &EventReport) -> Vec<String> {
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    vec![
        trial.to_string(),
        r.k.to_string(),
        r.lambda_reg.to_string(),
        opt(r.l_measured),
        opt(r.b1),
        opt(r.b1inv),
        opt(r.b2),
        opt(r.b3),
        opt(r.b4),
        opt(r.b5),
        r.cb_measured.to_string(),
    ]
}
