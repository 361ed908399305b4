//! Closed-form quantities and bounds on the margin ratio.
//!
//! For a split index `k` and regularization `λ`, with `Λ = λ + Σ_{i>k} λ_i`:
//!
//! ```text
//! V  = n⁻¹ Σ_{i≤k} (Λ/(nλ_i) + 1)⁻² + n Λ⁻² Σ_{i>k} λ_i²
//! ΔV = (1/n ∧ nλ_1²/Λ²) + (nλ_{k+1}² + Σ_{i>k} λ_i²) / Λ²
//! B  = (Λ/n)² Σ_{i≤k} (Λ/(nλ_i) + 1)⁻² μ_i²/λ_i + Σ_{i>k} λ_i μ_i²
//! ◇² = n Λ⁻² B
//! M  = (Λ/n) Σ_{i≤k} (Λ/(nλ_i) + 1)⁻¹ μ_i²/λ_i + Σ_{i>k} μ_i²
//! N  = n Λ⁻¹ M
//! ```
//!
//! Every absolute constant of the underlying inequalities is set to 1.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::spectrum::{BilevelShape, KStarRule, Spectrum};

/// `σ_η = 1 / sqrt(ln((3 + 1/η) / 2))`, and 0 at `η = 0`.
pub fn sigma_eta(eta: f64) -> f64 {
    if eta <= 0.0 {
        0.0
    } else {
        1.0 / ((3.0 + 1.0 / eta) / 2.0).ln().sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuantitySet {
    pub k: usize,
    pub n: usize,
    pub lambda_reg: f64,
    pub lambda_tail: f64,
    pub v: f64,
    pub delta_v: f64,
    pub b: f64,
    pub diamond2: f64,
    pub m: f64,
    pub big_n: f64,
    pub sigma_eta: f64,
    /// `k ≤ n` and `Λ > nλ_{k+1} ∨ sqrt(n Σ_{i>k} λ_i²)`.
    pub precondition_ok: bool,
}

impl QuantitySet {
    pub fn diamond(&self) -> f64 {
        self.diamond2.sqrt()
    }

    /// `N / (√V + √n ◇)`, the quantity the ε-quantile tracks without noise.
    pub fn bound_ratio(&self) -> f64 {
        self.big_n / (self.v.sqrt() + (self.n as f64).sqrt() * self.diamond())
    }

    /// `N / sqrt(V + n◇²)`.
    pub fn upper_ratio(&self) -> f64 {
        self.big_n / (self.v + self.n as f64 * self.diamond2).sqrt()
    }
}

fn check_mu(spec: &Spectrum, mu: &[f64]) -> Result<()> {
    if mu.len() != spec.len() {
        return Err(Error::InvalidParams(format!(
            "mean vector has length {} but the spectrum has dimension {}",
            mu.len(),
            spec.len()
        )));
    }
    Ok(())
}

/// All quantities at split `k`.
pub fn quantities(
    spec: &Spectrum,
    mu: &[f64],
    n: usize,
    k: usize,
    lambda_reg: f64,
    eta: f64,
) -> Result<QuantitySet> {
    check_mu(spec, mu)?;
    if k > spec.len() || n == 0 {
        return Err(Error::InvalidParams(format!(
            "need 0 ≤ k ≤ p and n ≥ 1, got k={k}, p={}, n={n}",
            spec.len()
        )));
    }
    let lam = spec.lambda_tail(k, lambda_reg);
    if !(lam > 0.0) {
        return Err(Error::InvalidParams(format!(
            "Λ = λ + Σ_{{i>k}} λ_i = {lam} is not positive (k={k}, λ={lambda_reg})"
        )));
    }
    let nf = n as f64;
    let vals = spec.values();
    let mut v_head = 0.0;
    let mut b_head = 0.0;
    let mut m_head = 0.0;
    for i in 0..k {
        let r = lam / (nf * vals[i]) + 1.0;
        let w = mu[i] * mu[i] / vals[i];
        v_head += 1.0 / (r * r);
        b_head += w / (r * r);
        m_head += w / r;
    }
    let mut b_tail = 0.0;
    let mut m_tail = 0.0;
    for i in k..vals.len() {
        b_tail += vals[i] * mu[i] * mu[i];
        m_tail += mu[i] * mu[i];
    }
    let tail_sq = spec.tail_sq_sum(k);
    let next = spec.next_after(k);
    let v = v_head / nf + nf * tail_sq / (lam * lam);
    let top = spec.top();
    let delta_v = (1.0 / nf).min(nf * top * top / (lam * lam)) + (nf * next * next + tail_sq) / (lam * lam);
    let b = (lam / nf).powi(2) * b_head + b_tail;
    let diamond2 = nf * b / (lam * lam);
    let m = lam / nf * m_head + m_tail;
    let big_n = nf * m / lam;
    let precondition_ok = k <= n && lam > (nf * next).max((nf * tail_sq).sqrt());
    Ok(QuantitySet {
        k,
        n,
        lambda_reg,
        lambda_tail: lam,
        v,
        delta_v,
        b,
        diamond2,
        m,
        big_n,
        sigma_eta: sigma_eta(eta),
        precondition_ok,
    })
}

/// Quantities in `k*` form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KStarSet {
    pub k_star: usize,
    pub lambda_star: f64,
    pub v_star: f64,
    pub diamond2_star: f64,
    pub n_star: f64,
}

pub fn quantities_kstar(spec: &Spectrum, mu: &[f64], n: usize, lambda_reg: f64) -> Result<KStarSet> {
    check_mu(spec, mu)?;
    let ks = spec.k_star(lambda_reg, n, KStarRule::Inclusive)?;
    let (k, lam) = (ks.k, ks.lambda_star);
    let nf = n as f64;
    let vals = spec.values();
    let head_inv: f64 = (0..k).map(|i| mu[i] * mu[i] / vals[i]).sum();
    let tail_sigma: f64 = (k..vals.len()).map(|i| vals[i] * mu[i] * mu[i]).sum();
    let tail_sq: f64 = (k..vals.len()).map(|i| mu[i] * mu[i]).sum();
    Ok(KStarSet {
        k_star: k,
        lambda_star: lam,
        v_star: k as f64 / nf + nf * spec.tail_sq_sum(k) / (lam * lam),
        diamond2_star: head_inv / nf + nf * tail_sigma / (lam * lam),
        n_star: head_inv + nf * tail_sq / lam,
    })
}

/// Full-spectrum form of `N`, `V`, `◇²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AltFormSet {
    pub lambda_tail: f64,
    pub n_a: f64,
    pub v_a: f64,
    pub diamond2_a: f64,
}

impl AltFormSet {
    /// `N_a / (√n ◇_a)`.
    pub fn signal_ratio(&self, n: usize) -> f64 {
        self.n_a / ((n as f64).sqrt() * self.diamond2_a.sqrt())
    }
}

/// `N_a = Σ μ_i²/(λ_i + Λ/n)`, `V_a = Σ (λ_i²/n)/(λ_i + Λ/n)²`,
/// `◇_a² = Σ (λ_i μ_i²/n)/(λ_i + Λ/n)²` at a given `Λ`.
pub fn alt_form(spec: &Spectrum, mu: &[f64], n: usize, lambda_tail: f64) -> Result<AltFormSet> {
    check_mu(spec, mu)?;
    if !(lambda_tail > 0.0) {
        return Err(Error::InvalidParams(format!("Λ = {lambda_tail} is not positive")));
    }
    let nf = n as f64;
    let shift = lambda_tail / nf;
    let (mut n_a, mut v_a, mut d_a) = (0.0, 0.0, 0.0);
    for (l, m) in spec.values().iter().zip(mu) {
        let den = l + shift;
        n_a += m * m / den;
        v_a += l * l / nf / (den * den);
        d_a += l * m * m / nf / (den * den);
    }
    Ok(AltFormSet {
        lambda_tail,
        n_a,
        v_a,
        diamond2_a: d_a,
    })
}

/// Alternative form with `Λ` taken at split `k`.
pub fn quantities_alt(spec: &Spectrum, mu: &[f64], n: usize, k: usize, lambda_reg: f64) -> Result<AltFormSet> {
    if k > spec.len() {
        return Err(Error::InvalidParams(format!("split index {k} exceeds dimension {}", spec.len())));
    }
    alt_form(spec, mu, n, spec.lambda_tail(k, lambda_reg))
}

/// The lower-bound expression evaluated at deviation `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundEval {
    pub t: f64,
    /// `N - t◇`
    pub numerator: f64,
    /// `(1 + Nσ_η) sqrt(V + t²ΔV) + ◇√n`
    pub denominator: f64,
    /// Present only when the numerator is positive.
    pub ratio: Option<f64>,
    pub sqrt_v: f64,
    pub diamond_term: f64,
    pub noise_term: f64,
    /// `t < √n`.
    pub t_in_domain: bool,
}

pub fn lower_bound(qs: &QuantitySet, t: f64) -> BoundEval {
    let nf = qs.n as f64;
    let d = qs.diamond();
    let sqrt_v = (qs.v + t * t * qs.delta_v).sqrt();
    let diamond_term = d * nf.sqrt();
    let noise_term = qs.big_n * qs.sigma_eta * sqrt_v;
    let numerator = qs.big_n - t * d;
    let denominator = sqrt_v + noise_term + diamond_term;
    BoundEval {
        t,
        numerator,
        denominator,
        ratio: (numerator > 0.0).then(|| numerator / denominator),
        sqrt_v,
        diamond_term,
        noise_term,
        t_in_domain: t < nf.sqrt(),
    }
}

/// Column names of one quantity/bound CSV row.
pub const BOUND_COLUMNS: [&str; 18] = [
    "k",
    "lambda",
    "Lambda",
    "V",
    "DeltaV",
    "B",
    "Diamond2",
    "M",
    "N",
    "sigma_eta",
    "t",
    "numerator",
    "denominator",
    "ratio",
    "sqrtV",
    "diamond_term",
    "noise_term",
    "precondition_ok",
];

/// CSV cells matching [`BOUND_COLUMNS`].
pub fn bound_fields(qs: &QuantitySet, be: &BoundEval) -> Vec<String> {
    vec![
        qs.k.to_string(),
        qs.lambda_reg.to_string(),
        qs.lambda_tail.to_string(),
        qs.v.to_string(),
        qs.delta_v.to_string(),
        qs.b.to_string(),
        qs.diamond2.to_string(),
        qs.m.to_string(),
        qs.big_n.to_string(),
        qs.sigma_eta.to_string(),
        be.t.to_string(),
        be.numerator.to_string(),
        be.denominator.to_string(),
        be.ratio.map(|r| r.to_string()).unwrap_or_default(),
        be.sqrt_v.to_string(),
        be.diamond_term.to_string(),
        be.noise_term.to_string(),
        qs.precondition_ok.to_string(),
    ]
}

fn norms(spec: &Spectrum, mu: &[f64]) -> (f64, f64) {
    let sq: f64 = mu.iter().map(|m| m * m).sum();
    let sigma: f64 = mu.iter().zip(spec.values()).map(|(m, l)| l * m * m).sum();
    (sq, sigma.sqrt())
}

/// `sqrt(n‖μ‖⁴ / (n‖μ‖_Σ² + ‖Σ‖_F² + n‖Σ‖²))`.
pub fn cgb_bound(spec: &Spectrum, mu: &[f64], n: usize) -> f64 {
    let (sq, sig) = norms(spec, mu);
    let nf = n as f64;
    let top = spec.top();
    (nf * sq * sq / (nf * sig * sig + spec.frobenius_sq() + nf * top * top)).sqrt()
}

/// `(1/4) n‖μ‖² / (n‖μ‖_Σ + √n‖Σ‖_F + n‖Σ‖)`, which the lower bound dominates
/// under [`cgb_admissible`].
pub fn cgb_target(spec: &Spectrum, mu: &[f64], n: usize) -> f64 {
    let (sq, sig) = norms(spec, mu);
    let nf = n as f64;
    0.25 * nf * sq / (nf * sig + nf.sqrt() * spec.frobenius_sq().sqrt() + nf * spec.top())
}

/// `nλ_1 < Λ` at `k = 0`, `‖μ‖² ≥ 2‖μ‖_Σ` and `t < √n`.
pub fn cgb_admissible(spec: &Spectrum, mu: &[f64], n: usize, lambda_reg: f64, t: f64) -> bool {
    let (sq, sig) = norms(spec, mu);
    let nf = n as f64;
    nf * spec.top() < spec.lambda_tail(0, lambda_reg) && sq >= 2.0 * sig && t < nf.sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum WangVariant {
    Balanced,
    /// Mean supported on coordinate `j` (1-based, `j > 1`).
    Bilevel { j: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WangEval {
    pub value: f64,
    pub numerator: f64,
    pub denominator: f64,
    /// Numerator not positive: the bound says nothing.
    pub vacuous: bool,
    /// `A` and `B` of the bi-level form.
    pub a_term: Option<f64>,
    pub b_term: Option<f64>,
    /// For bi-level: `(1/6)‖μ‖²/(A + B + λ_j + ‖μ‖_Σ)`.
    pub target: Option<f64>,
}

/// Right-hand sides of the balanced and bi-level prior-work bounds.
pub fn wang_bounds(
    spec: &Spectrum,
    mu: &[f64],
    n: usize,
    lambda_reg: f64,
    variant: WangVariant,
) -> Result<WangEval> {
    check_mu(spec, mu)?;
    let (sq, sig) = norms(spec, mu);
    let nf = n as f64;
    match variant {
        WangVariant::Balanced => {
            let lam = spec.lambda_tail(0, lambda_reg);
            if !(lam > 0.0) {
                return Err(Error::InvalidParams(format!("Λ = {lam} is not positive")));
            }
            let numerator = sq - (nf / lam * sig * sig + sig);
            let denominator = (1f64).max(nf / lam * sig) * spec.frobenius_sq().sqrt() + sig;
            Ok(WangEval {
                value: numerator / denominator,
                numerator,
                denominator,
                vacuous: numerator <= 0.0,
                a_term: None,
                b_term: None,
                target: None,
            })
        }
        WangVariant::Bilevel { j } => {
            if j < 2 || j > spec.len() || spec.len() < 2 {
                return Err(Error::InvalidParams(format!(
                    "bi-level comparison needs 1 < j ≤ p, got j={j}"
                )));
            }
            if mu.iter().enumerate().any(|(i, m)| i != j - 1 && *m != 0.0) {
                return Err(Error::InvalidParams(format!(
                    "bi-level comparison needs μ supported on coordinate {j}"
                )));
            }
            let lam = spec.lambda_tail(1, lambda_reg);
            if !(lam > 0.0) {
                return Err(Error::InvalidParams(format!("Λ = {lam} is not positive")));
            }
            let l1 = spec.top();
            let lj = spec.values()[j - 1];
            let a = l1 * (lam + nf * sig) / (nf * l1 + lam);
            let rest = (spec.frobenius_sq() - l1 * l1 - lj * lj).max(0.0);
            let b = (1.0 + nf / lam * sig) * rest.sqrt();
            let numerator = sq * (1.0 - nf / lam * lj) - sig;
            let denominator = a + b + lj + sig;
            Ok(WangEval {
                value: numerator / denominator,
                numerator,
                denominator,
                vacuous: numerator <= 0.0,
                a_term: Some(a),
                b_term: Some(b),
                target: Some(sq / (6.0 * denominator)),
            })
        }
    }
}

/// Conditions under which the lower bound dominates the bi-level target:
/// `λ > 0`, `nλ_2 ≤ Σ_{i>1} λ_i`, `μ_1 = 0`, `‖μ‖² ≥ 2‖μ‖_Σ`, `t ≤ √n`.
pub fn wang_bilevel_admissible(spec: &Spectrum, mu: &[f64], n: usize, lambda_reg: f64, t: f64) -> bool {
    let (sq, sig) = norms(spec, mu);
    let nf = n as f64;
    lambda_reg > 0.0
        && nf * spec.next_after(1) <= spec.tail_sum(1)
        && mu[0] == 0.0
        && sq >= 2.0 * sig
        && t <= nf.sqrt()
}

/// `(‖μ‖²/√p, ‖μ‖²√(nκ)/√p)`: the prior-work exponent argument and the
/// corresponding scale of the lower bound.
pub fn chatterji_scaled(mu_norm_sq: f64, p: usize, n: usize, kappa: f64) -> (f64, f64) {
    let sp = (p as f64).sqrt();
    (mu_norm_sq / sp, mu_norm_sq * (n as f64 * kappa).sqrt() / sp)
}

/// `λ_i ≤ 1`, `Σλ_i ≥ κp`, `κp/n ≥ ‖μ‖² ≥ (2t)²/(κ²n)` and `t² < nκ`.
pub fn chatterji_admissible(spec: &Spectrum, mu: &[f64], n: usize, kappa: f64, t: f64) -> bool {
    let (sq, _) = norms(spec, mu);
    let nf = n as f64;
    let p = spec.len() as f64;
    kappa > 0.0
        && kappa <= 1.0
        && spec.top() <= 1.0
        && spec.trace() >= kappa * p
        && kappa * p / nf >= sq
        && sq >= (2.0 * t).powi(2) / (kappa * kappa * nf)
        && t * t < nf * kappa
}

/// `N / (√V + √n◇)` on the bi-level spectrum with `μ = sqrt(2λ_1/π) e_1`,
/// `λ = 0` and `k = ⌊n^r⌋`, evaluated in closed form.
pub fn muthukumar_ratio(n: usize, q: f64, r: f64, s: f64) -> Result<f64> {
    let shape = BilevelShape::new(n, s, q, r)?;
    let nf = n as f64;
    let k = shape.head_count as f64;
    let h = shape.head_value;
    let tail_count = (shape.p - shape.head_count) as f64;
    let lam = tail_count * shape.tail_value;
    let mu1_sq = 2.0 * h / std::f64::consts::PI;
    let rr = lam / (nf * h) + 1.0;
    let v = k / nf / (rr * rr) + nf * tail_count * shape.tail_value.powi(2) / (lam * lam);
    let b = (lam / nf).powi(2) * mu1_sq / h / (rr * rr);
    let diamond = (nf * b).sqrt() / lam;
    let big_n = nf / lam * (lam / nf * mu1_sq / h / rr);
    Ok(big_n / (v.sqrt() + nf.sqrt() * diamond))
}

/// Smallest `m` such that `μ = m·μ̂` satisfies `N ≥ 1 + c(√V + ◇√n)`.
///
/// `N` is quadratic and `◇` linear in `m`, so this solves
/// `N₁m² - c√n◇₁m - (1 + c√V) = 0` for the positive root.
pub fn min_mu_scale(
    spec: &Spectrum,
    mu_dir: &[f64],
    n: usize,
    k: usize,
    lambda_reg: f64,
    c: f64,
) -> Result<f64> {
    let qs = quantities(spec, mu_dir, n, k, lambda_reg, 0.0)?;
    if qs.big_n <= 0.0 {
        return Err(Error::InvalidParams("mean direction is zero".into()));
    }
    let a = qs.big_n;
    let b = c * (n as f64).sqrt() * qs.diamond();
    let cc = 1.0 + c * qs.v.sqrt();
    Ok((b + (b * b + 4.0 * a * cc).sqrt()) / (2.0 * a))
}
