//! Covariance spectra in the fixed eigenbasis.
//!
//! A [`Spectrum`] is a nonincreasing sequence of positive eigenvalues
//! `λ_1 ≥ … ≥ λ_p`. Index conventions follow the usual split notation: for a
//! split index `k`, the head block is `λ_1..λ_k` (slice `values[..k]`) and the
//! tail is `λ_{k+1}..λ_p` (slice `values[k..]`). `k = 0` means an empty head.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Neumaier-compensated accumulator.
#[derive(Debug, Clone, Copy, Default)]
struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Nonincreasing, strictly positive eigenvalue sequence.
///
/// Tail sums `Σ_{i>k} λ_i` and `Σ_{i>k} λ_i²` are computed once at
/// construction with one backward compensated pass and cached for every `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    values: Vec<f64>,
    // tail[k] = Σ_{j ≥ k} values[j]; length p + 1 with tail[p] = 0.
    tail: Vec<f64>,
    tail_sq: Vec<f64>,
}

impl Spectrum {
    /// Wrap an explicit eigenvalue sequence, validating positivity and order.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidSpectrum("empty eigenvalue sequence".into()));
        }
        for (i, &v) in values.iter().enumerate() {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::InvalidSpectrum(format!(
                    "eigenvalue {} is {v}, expected a finite positive number",
                    i + 1
                )));
            }
        }
        if let Some(i) = values.windows(2).position(|w| w[0] < w[1]) {
            return Err(Error::InvalidSpectrum(format!(
                "eigenvalues must be nonincreasing, but λ_{} = {} < λ_{} = {}",
                i + 1,
                values[i],
                i + 2,
                values[i + 1]
            )));
        }
        let p = values.len();
        let mut tail = vec![0.0; p + 1];
        let mut tail_sq = vec![0.0; p + 1];
        let mut acc = CompensatedSum::default();
        let mut acc_sq = CompensatedSum::default();
        for j in (0..p).rev() {
            acc.add(values[j]);
            acc_sq.add(values[j] * values[j]);
            tail[j] = acc.value();
            tail_sq[j] = acc_sq.value();
        }
        Ok(Self {
            values,
            tail,
            tail_sq,
        })
    }

    /// Isotropic spectrum `[1; p]`.
    pub fn isotropic(p: usize) -> Result<Self> {
        Self::new(vec![1.0; p])
    }

    /// `k` spike eigenvalues of size `spike` followed by `p - k` ones.
    pub fn spiked(p: usize, k: usize, spike: f64) -> Result<Self> {
        if k > p {
            return Err(Error::InvalidParams(format!("spike count {k} exceeds dimension {p}")));
        }
        let mut v = vec![1.0; p];
        v[..k].fill(spike);
        Self::new(v)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `λ_1`, the operator norm of Σ.
    pub fn top(&self) -> f64 {
        self.values[0]
    }

    /// `λ_{k+1}`, or 0 when the tail is empty (`k = p`).
    pub fn next_after(&self, k: usize) -> f64 {
        self.values.get(k).copied().unwrap_or(0.0)
    }

    /// `Σ_{i>k} λ_i`.
    pub fn tail_sum(&self, k: usize) -> f64 {
        self.tail[k]
    }

    /// `Σ_{i>k} λ_i²`.
    pub fn tail_sq_sum(&self, k: usize) -> f64 {
        self.tail_sq[k]
    }

    pub fn trace(&self) -> f64 {
        self.tail[0]
    }

    /// Squared Frobenius norm `Σ λ_i²`.
    pub fn frobenius_sq(&self) -> f64 {
        self.tail_sq[0]
    }

    pub fn head(&self, k: usize) -> &[f64] {
        &self.values[..k]
    }

    pub fn tail_values(&self, k: usize) -> &[f64] {
        &self.values[k..]
    }

    /// `Λ = λ + Σ_{i>k} λ_i`. May be nonpositive for strongly negative `λ`.
    pub fn lambda_tail(&self, k: usize, lambda_reg: f64) -> f64 {
        lambda_reg + self.tail_sum(k)
    }

    /// Effective-rank summary of the tail after `k`.
    pub fn tail_summary(&self, k: usize, lambda_reg: f64, n: usize) -> TailSummary {
        let lambda_tail = self.lambda_tail(k, lambda_reg);
        let tail_sq_sum = self.tail_sq_sum(k);
        let nf = n as f64;
        let scale = (nf * self.next_after(k)).max((nf * tail_sq_sum).sqrt());
        let margin = if scale > 0.0 {
            lambda_tail / scale
        } else if lambda_tail > 0.0 {
            f64::INFINITY
        } else {
            0.0
        };
        TailSummary {
            k,
            lambda_reg,
            lambda_tail,
            tail_sq_sum,
            margin,
        }
    }

    /// Smallest split index `κ` at which the regularized tail dominates
    /// `n λ_{κ+1}`.
    ///
    /// `KStarRule::Inclusive` uses `λ + Σ_{i>κ} λ_i ≥ n λ_{κ+1}`;
    /// `KStarRule::Strict` uses `n λ_{κ+1} < λ + Σ_{i>κ} λ_i`.
    pub fn k_star(&self, lambda_reg: f64, n: usize, rule: KStarRule) -> Result<KStar> {
        let nf = n as f64;
        for kappa in 0..self.len() {
            let lam = self.lambda_tail(kappa, lambda_reg);
            let rhs = nf * self.values[kappa];
            let ok = match rule {
                KStarRule::Inclusive => lam >= rhs,
                KStarRule::Strict => lam > rhs,
            };
            if ok {
                return Ok(KStar {
                    k: kappa,
                    lambda_star: lam,
                });
            }
        }
        Err(Error::NoKStar { lambda_reg, n })
    }

    /// Bi-level spectrum with `p = round(n^s)`: the first `⌊n^r⌋` entries
    /// equal `n^{s-q-r}`, the rest `(1 - n^{-q}) / (1 - n^{r-s})`.
    pub fn bilevel(n: usize, s: f64, q: f64, r: f64) -> Result<Self> {
        let shape = BilevelShape::new(n, s, q, r)?;
        let mut v = vec![shape.tail_value; shape.p];
        v[..shape.head_count].fill(shape.head_value);
        Self::new(v)
    }

    /// Parse one eigenvalue per line. Blank lines and `#` comments are skipped.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut values = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let v: f64 = line.parse().map_err(|_| {
                Error::InvalidSpectrum(format!("line {}: cannot parse {line:?}", lineno + 1))
            })?;
            values.push(v);
        }
        Self::new(values)
    }

    /// One eigenvalue per line, shortest round-trip decimal form.
    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(self.len() * 12);
        for v in &self.values {
            writeln!(out, "{v:?}").unwrap();
        }
        out
    }

    pub fn read_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }

    pub fn write_file(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }
}

/// Which inequality defines `k*`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KStarRule {
    /// `λ + Σ_{i>κ} λ_i ≥ n λ_{κ+1}`.
    #[default]
    Inclusive,
    /// `n λ_{κ+1} < λ + Σ_{i>κ} λ_i`.
    Strict,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KStar {
    pub k: usize,
    /// `Λ_* = λ + Σ_{i>k*} λ_i`.
    pub lambda_star: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailSummary {
    pub k: usize,
    pub lambda_reg: f64,
    /// `Λ = λ + Σ_{i>k} λ_i`.
    pub lambda_tail: f64,
    pub tail_sq_sum: f64,
    /// `Λ / max(n λ_{k+1}, sqrt(n Σ_{i>k} λ_i²))`.
    pub margin: f64,
}

/// Closed-form description of the bi-level spectrum, without materializing it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BilevelShape {
    pub p: usize,
    pub head_count: usize,
    pub head_value: f64,
    pub tail_value: f64,
}

/// Largest dimension the constructions will materialize.
pub const MAX_DIMENSION: usize = 50_000_000;

impl BilevelShape {
    pub fn new(n: usize, s: f64, q: f64, r: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidParams(format!("bi-level spectrum needs n ≥ 2, got {n}")));
        }
        if !(0.0..1.0).contains(&r) || s <= 1.0 || q < 0.0 || q >= s - r {
            return Err(Error::InvalidParams(format!(
                "bi-level exponents need 0 ≤ r < 1 < s and 0 ≤ q < s - r, got s={s}, q={q}, r={r}"
            )));
        }
        let nf = n as f64;
        let p_real = nf.powf(s).round();
        if p_real > MAX_DIMENSION as f64 {
            return Err(Error::InvalidParams(format!(
                "dimension n^s = {p_real} exceeds the limit {MAX_DIMENSION}"
            )));
        }
        let p = p_real as usize;
        // n^r can land just below an integer in floating point.
        let head_count = (nf.powf(r) + 1e-9).floor() as usize;
        if head_count >= p {
            return Err(Error::InvalidParams(format!(
                "head block {head_count} leaves no tail in dimension {p}"
            )));
        }
        let head_value = nf.powf(s - q - r);
        let tail_value = (1.0 - nf.powf(-q)) / (1.0 - nf.powf(r - s));
        if tail_value <= 0.0 {
            return Err(Error::InvalidSpectrum(format!(
                "bi-level tail value {tail_value} is not positive (q = {q})"
            )));
        }
        Ok(Self {
            p,
            head_count,
            head_value,
            tail_value,
        })
    }
}

/// The two negative-regularization constructions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CorollaryKind {
    /// Flat spike block over a slowly decaying exponential tail; `μ` balances
    /// head and tail energy.
    TailBalance,
    /// Exponentially decaying head over a flat tail; `μ` uniform on the head.
    GeometryDestroy,
}

/// Tunable constants of the constructions. The corresponding results only fix
/// them up to absolute constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CorollaryParams {
    /// Shape constant: spike level `2b` and tail decay `1/(bn)` for
    /// tail-balance; the admissibility constant `b ≤ k < n/b`, `p > bn` for
    /// geometry-destroy.
    pub b: f64,
    /// Ratio `Λ(0) / Λ(λ)`; the returned `λ` is `-((c1 - 1)/c1) Σ_{i>k} λ_i`.
    pub c1: f64,
    /// Dimension for geometry-destroy (tail-balance truncates automatically).
    pub p: usize,
    /// Multiplier on `μ_i²` for geometry-destroy.
    pub mu_scale: f64,
}

impl Default for CorollaryParams {
    fn default() -> Self {
        Self {
            b: 8.0,
            c1: 2.0,
            p: 20_000,
            mu_scale: 1000.0,
        }
    }
}

/// One numerically checked precondition of a construction.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PreconditionCheck {
    pub name: &'static str,
    pub lhs: f64,
    pub rhs: f64,
}

impl PreconditionCheck {
    pub fn holds(&self) -> bool {
        self.lhs >= self.rhs
    }

    /// `lhs / rhs`; the smallest slack is the binding precondition.
    pub fn slack(&self) -> f64 {
        self.lhs / self.rhs
    }
}

#[derive(Debug, Clone)]
pub struct CorollaryExample {
    pub kind: CorollaryKind,
    pub spectrum: Spectrum,
    pub mu: Vec<f64>,
    pub lambda_reg: f64,
    pub n: usize,
    pub k: usize,
    pub preconditions: Vec<PreconditionCheck>,
}

impl CorollaryExample {
    pub fn all_hold(&self) -> bool {
        self.preconditions.iter().all(PreconditionCheck::holds)
    }

    pub fn binding(&self) -> Option<&PreconditionCheck> {
        self.preconditions
            .iter()
            .min_by(|a, b| a.slack().total_cmp(&b.slack()))
    }
}

/// Tail truncation: omitted mass below this fraction of `Λ`.
const TRUNCATION_REL: f64 = 1e-10;

/// Build one of the negative-regularization example problems.
pub fn make_corollary_example(
    kind: CorollaryKind,
    n: usize,
    k: usize,
    params: &CorollaryParams,
) -> Result<CorollaryExample> {
    if k == 0 || k >= n {
        return Err(Error::InvalidParams(format!(
            "construction needs 1 ≤ k < n, got k={k}, n={n}"
        )));
    }
    if params.c1 <= 1.0 || params.b <= 0.0 {
        return Err(Error::InvalidParams(format!(
            "construction needs c1 > 1 and b > 0, got c1={}, b={}",
            params.c1, params.b
        )));
    }
    match kind {
        CorollaryKind::TailBalance => tail_balance(n, k, params),
        CorollaryKind::GeometryDestroy => geometry_destroy(n, k, params),
    }
}

fn tail_balance(n: usize, k: usize, params: &CorollaryParams) -> Result<CorollaryExample> {
    let b = params.b;
    let c1 = params.c1;
    let nf = n as f64;
    let rate = 1.0 / (b * nf);
    // Σ_{j>J} e^{-jα} = e^{-(J+1)α}/(1 - e^{-α}) and Λ(λ) ≈ e^{-α}/((1 - e^{-α}) c1),
    // so the omitted mass is below TRUNCATION_REL·Λ once Jα ≥ ln(c1 / TRUNCATION_REL).
    let tail_len = ((c1 / TRUNCATION_REL).ln() / rate).ceil() as usize;
    if k + tail_len > MAX_DIMENSION {
        return Err(Error::InvalidParams(format!(
            "truncated dimension {} exceeds the limit {MAX_DIMENSION}",
            k + tail_len
        )));
    }
    let mut values = Vec::with_capacity(k + tail_len);
    let mut mu = Vec::with_capacity(k + tail_len);
    let spike = 2.0 * b;
    let head_mu = 4.0 * (b / k as f64).sqrt();
    for _ in 0..k {
        values.push(spike);
        mu.push(head_mu);
    }
    for j in 1..=tail_len {
        let jf = j as f64;
        values.push((-jf * rate).exp());
        mu.push(4.0 * b.sqrt() * 2f64.powf(-jf / 2.0));
    }
    let spectrum = Spectrum::new(values)?;
    let lambda_reg = -((c1 - 1.0) / c1) * spectrum.tail_sum(k);
    let lam = spectrum.lambda_tail(k, lambda_reg);

    let mu_tail_sq: f64 = mu[k..].iter().map(|m| m * m).sum();
    let mu_tail_sigma: f64 = mu[k..]
        .iter()
        .zip(spectrum.tail_values(k))
        .map(|(m, l)| l * m * m)
        .sum();
    let mu_head_inv: f64 = mu[..k]
        .iter()
        .zip(spectrum.head(k))
        .map(|(m, l)| m * m / l)
        .sum();
    let big_c = c1;
    let preconditions = vec![
        PreconditionCheck {
            name: "tail effective rank",
            lhs: lam,
            rhs: c1 * (nf * spectrum.next_after(k)).max((nf * spectrum.tail_sq_sum(k)).sqrt()),
        },
        PreconditionCheck {
            name: "spike dominates tail",
            lhs: nf * spectrum.values()[k - 1],
            rhs: big_c * lam,
        },
        PreconditionCheck {
            name: "tail mean in small eigendirections",
            lhs: mu_tail_sq * lam / (big_c * nf),
            rhs: mu_tail_sigma,
        },
        PreconditionCheck {
            name: "head mean below tail energy",
            lhs: nf * mu_tail_sq / (big_c * lam),
            rhs: mu_head_inv,
        },
        PreconditionCheck {
            name: "head mean above tail bias",
            lhs: mu_head_inv,
            rhs: nf * nf * mu_tail_sigma / (lam * lam),
        },
    ];
    Ok(CorollaryExample {
        kind: CorollaryKind::TailBalance,
        spectrum,
        mu,
        lambda_reg,
        n,
        k,
        preconditions,
    })
}

fn geometry_destroy(n: usize, k: usize, params: &CorollaryParams) -> Result<CorollaryExample> {
    let b = params.b;
    let c1 = params.c1;
    let p = params.p;
    let nf = n as f64;
    let kf = k as f64;
    if kf < b || kf >= nf / b {
        return Err(Error::InvalidParams(format!(
            "geometry-destroy needs b ≤ k < n/b, got b={b}, k={k}, n={n}"
        )));
    }
    if (p as f64) <= b * nf || p <= k {
        return Err(Error::InvalidParams(format!(
            "geometry-destroy needs p > b·n, got p={p}, b={b}, n={n}"
        )));
    }
    if p > MAX_DIMENSION {
        return Err(Error::InvalidParams(format!("dimension {p} exceeds the limit {MAX_DIMENSION}")));
    }
    let pf = p as f64;
    let tail_const = c1 / std::f64::consts::E;
    let tail_value = tail_const * nf / (pf * kf.powi(4));
    let mut values = Vec::with_capacity(p);
    for i in 1..=k {
        values.push(kf.powf(-4.0 * i as f64 / kf));
    }
    values.resize(p, tail_value);
    let spectrum = Spectrum::new(values)?;

    let mu_head = (params.mu_scale * kf.ln() / kf.powi(5) * (kf / nf + nf / pf)).sqrt();
    let mut mu = vec![0.0; p];
    mu[..k].fill(mu_head);

    let lambda_reg = -((c1 - 1.0) / c1) * spectrum.tail_sum(k);
    let lam = spectrum.lambda_tail(k, lambda_reg);
    let head = spectrum.head(k);
    let sigma_norm = head.iter().map(|l| l * mu_head * mu_head).sum::<f64>().sqrt();
    let inv_norm = head.iter().map(|l| mu_head * mu_head / l).sum::<f64>().sqrt();
    let euclid_sq = kf * mu_head * mu_head;
    let preconditions = vec![
        PreconditionCheck {
            name: "tail effective rank",
            lhs: lam,
            rhs: c1 * (nf * spectrum.next_after(k)).max((nf * spectrum.tail_sq_sum(k)).sqrt()),
        },
        PreconditionCheck {
            name: "head above regularized tail",
            lhs: nf * head[k - 1],
            rhs: lam,
        },
        PreconditionCheck {
            name: "mean misaligned with head geometry",
            lhs: sigma_norm * inv_norm,
            rhs: c1 * euclid_sq,
        },
    ];
    Ok(CorollaryExample {
        kind: CorollaryKind::GeometryDestroy,
        spectrum,
        mu,
        lambda_reg,
        n,
        k,
        preconditions,
    })
}
