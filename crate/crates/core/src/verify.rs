//! Randomized identity and inequality suites.
//!
//! The identity suite samples datasets and checks the ridge decomposition
//! against a direct solve, together with the scalar and vector identities it
//! implies. The inequality suite draws admissible `(Σ, μ, n, k, λ)` and checks
//! the relations between the closed-form quantities. Both are deterministic
//! functions of the seed.

use nalgebra::DVector;
use rand::seq::IndexedRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::bounds::{alt_form, quantities, quantities_kstar};
use crate::error::{Error, Result};
use crate::model::{sample_dataset, CovariateLaw, ProblemSpec};
use crate::rng::{stream, StreamRole};
use crate::solver::{
    decompose_perturbed, ridge_direct, smw_check, train_residual, GramFactor,
};
use crate::spectrum::Spectrum;

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyOptions {
    pub instances: usize,
    pub seed: u64,
    /// Relative corruption of `S` inside the decomposition. Zero in normal
    /// runs; nonzero values must make the identity suite fail.
    pub s_perturbation: f64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            instances: 1000,
            seed: 0,
            s_perturbation: 0.0,
        }
    }
}

/// Outcome of one named check over all instances.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckSummary {
    pub suite: &'static str,
    pub check: &'static str,
    pub cases: usize,
    pub failures: usize,
    /// Largest error (identities) or largest relative violation (inequalities).
    pub worst: f64,
    pub tolerance: f64,
}

impl CheckSummary {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

struct Tally {
    suite: &'static str,
    checks: Vec<(&'static str, f64)>,
}

impl Tally {
    fn summarize(&self, observations: Vec<Vec<(usize, f64)>>) -> Vec<CheckSummary> {
        let mut out: Vec<CheckSummary> = self
            .checks
            .iter()
            .map(|&(check, tolerance)| CheckSummary {
                suite: self.suite,
                check,
                cases: 0,
                failures: 0,
                worst: 0.0,
                tolerance,
            })
            .collect();
        for (idx, err) in observations.into_iter().flatten() {
            let s = &mut out[idx];
            s.cases += 1;
            // NaN counts as a failure
            if !(err <= s.tolerance) {
                s.failures += 1;
            }
            s.worst = if err.is_nan() { f64::NAN } else { s.worst.max(err) };
        }
        out
    }
}

fn rel(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
}

const DIRECT: usize = 0;
const DUAL: usize = 1;
const INTERPOLATION: usize = 2;
const INNER: usize = 3;
const RESCALING: usize = 4;
const SMW: usize = 5;

fn identity_tally() -> Tally {
    Tally {
        suite: "identity",
        checks: vec![
            ("decompose_vs_direct", 1e-8),
            ("dual_inner_product", 1e-10),
            ("interpolation_residual", 1e-8),
            ("inner_product_identity", 1e-9),
            ("rescaling_identity", 1e-9),
            ("smw_residuals", 1e-9),
        ],
    }
}

fn random_spectrum<R: Rng>(rng: &mut R, p: usize) -> Result<Spectrum> {
    let spread: f64 = rng.random_range(0.0..1.5);
    let mut vals: Vec<f64> = (0..p)
        .map(|_| {
            let g: f64 = StandardNormal.sample(rng);
            (spread * g).exp()
        })
        .collect();
    vals.sort_by(|a, b| b.total_cmp(a));
    Spectrum::new(vals)
}

fn random_mu<R: Rng>(rng: &mut R, p: usize) -> Vec<f64> {
    let scale = rng.random_range(-2.0f64..2.0).exp() / (p as f64).sqrt();
    (0..p)
        .map(|_| {
            let g: f64 = StandardNormal.sample(rng);
            scale * g
        })
        .collect()
}

fn identity_instance(opts: &VerifyOptions, i: u64) -> Result<Vec<(usize, f64)>> {
    let mut rng = stream(opts.seed, i, StreamRole::Aux);
    let n = rng.random_range(5..=60usize);
    let p = rng.random_range(n + 1..=600usize);
    let spec = random_spectrum(&mut rng, p)?;
    let mu = random_mu(&mut rng, p);
    let eta = *[0.0, 0.1, 0.3].choose(&mut rng).expect("nonempty");
    let lambda_kind = rng.random_range(0..3u8);
    let frac: f64 = rng.random_range(0.1..0.9);
    let k_frac: f64 = rng.random();

    let problem = ProblemSpec::new(spec, mu, n, eta, 0.0, CovariateLaw::Gaussian)?;
    let ds = sample_dataset(&problem, opts.seed, i);
    let mu = problem.mu();
    let fq = GramFactor::from_rows(&ds.q);
    let fx = GramFactor::from_rows(&ds.design(mu));
    let lambda_reg = match lambda_kind {
        0 => 0.0,
        1 => frac * ds.q.norm_squared() / n as f64 * 1e-2,
        // the floor is -μ_n plus a small margin, so half of it stays admissible
        _ => frac * fq.floor().max(fx.floor()),
    };
    let g = fq.at_lambda(lambda_reg)?;

    let mut obs = Vec::new();
    let sol = decompose_perturbed(&g, &ds, mu, &ds.y_hat, opts.s_perturbation)?;
    let direct = ridge_direct(&ds, mu, lambda_reg)?;
    obs.push((DIRECT, rel(&sol.w, &direct)));

    let c = &sol.scalars;
    let lhs = sol.s * mu.iter().zip(sol.w.iter()).map(|(a, b)| a * b).sum::<f64>();
    let scale = (c.y_a_yhat * c.mu_mu_perp).abs() + ((1.0 + c.nu_a_y) * c.nu_a_yhat).abs();
    obs.push((INNER, (lhs - sol.s_inner_identity()).abs() / scale.max(f64::MIN_POSITIVE)));

    let clean = decompose_perturbed(&g, &ds, mu, &ds.y, opts.s_perturbation)?;
    let a_yt = g.solve(&sol.y_tilde);
    let coef = sol.xi - sol.nu.dot(&a_yt);
    let mut resc = ds.q.tr_mul(&a_yt);
    resc.axpy(coef, &clean.w, 1.0);
    obs.push((RESCALING, rel(&resc, &sol.w)));

    if lambda_reg == 0.0 {
        obs.push((INTERPOLATION, train_residual(&ds, mu, &sol.w)));
        let cs = &clean.scalars;
        let qay = ds.q.tr_mul(&g.solve(&ds.y));
        let w_tilde = &qay / cs.y_a_y + &clean.mu_perp_tilde + &qay * (cs.nu_a_y / cs.y_a_y);
        obs.push((DUAL, (clean.w.dot(&w_tilde) - 1.0).abs()));
    }

    let k = ((p.saturating_sub(n) as f64 * k_frac) as usize).min(n);
    match smw_check(&ds, k, lambda_reg) {
        Ok(r) => obs.push((SMW, r.max())),
        Err(Error::SingularRegularization { .. }) => {}
        Err(e) => return Err(e),
    }
    Ok(obs)
}

/// Decomposition identities on `opts.instances` sampled datasets.
pub fn identity_suite(opts: &VerifyOptions) -> Result<Vec<CheckSummary>> {
    let obs: Vec<Vec<(usize, f64)>> = (0..opts.instances as u64)
        .into_par_iter()
        .map(|i| match identity_instance(opts, i) {
            Err(e) if e.is_degenerate_trial() => Ok(Vec::new()),
            r => r,
        })
        .collect::<Result<_>>()?;
    Ok(identity_tally().summarize(obs))
}

const RELATIONS: usize = 0;
const VB_UPPER: usize = 1;
const KSTAR: usize = 2;
const ALT: usize = 3;
const MONOTONE: usize = 4;

fn inequality_tally() -> Tally {
    Tally {
        suite: "inequality",
        checks: vec![
            ("relations", 1e-12),
            ("v_b_upper", 1e-12),
            ("kstar_sandwich", 1e-12),
            ("alt_form_sandwich", 1e-12),
            ("alt_ratio_monotone", 1e-12),
        ],
    }
}

/// Relative violation of `lhs ≤ rhs`; zero when it holds.
fn viol(lhs: f64, rhs: f64) -> f64 {
    if lhs <= rhs {
        0.0
    } else {
        (lhs - rhs) / rhs.abs().max(lhs.abs()).max(f64::MIN_POSITIVE)
    }
}

/// Spectrum, mean, `n`, `k` and `λ` of one admissible instance.
type Instance = (Spectrum, Vec<f64>, usize, usize, f64);

fn random_admissible<R: Rng>(rng: &mut R) -> Result<Option<Instance>> {
    let n = rng.random_range(4..=200usize);
    let p = rng.random_range(2 * n..=3000usize.max(2 * n + 1));
    let heads = rng.random_range(0..=n / 2);
    let decay: f64 = rng.random_range(0.0..1.2);
    let spike: f64 = rng.random_range(0.0f64..4.0).exp();
    let mut vals: Vec<f64> = (0..p)
        .map(|i| {
            let base = (1.0 + i as f64).powf(-decay);
            if i < heads {
                base * spike * n as f64
            } else {
                base
            }
        })
        .collect();
    vals.sort_by(|a, b| b.total_cmp(a));
    let spec = Spectrum::new(vals)?;
    let mut mu = random_mu(rng, p);
    if rng.random_bool(0.3) {
        // mass on a few coordinates only
        for (i, m) in mu.iter_mut().enumerate() {
            if i % 7 != 0 {
                *m = 0.0;
            }
        }
    }
    let nf = n as f64;
    let admissible: Vec<usize> = (0..=n / 2)
        .filter(|&k| {
            let t = spec.tail_summary(k, 0.0, n);
            t.lambda_tail > (nf * spec.next_after(k)).max((nf * spec.tail_sq_sum(k)).sqrt())
        })
        .collect();
    let Some(&k) = admissible.choose(rng) else {
        return Ok(None);
    };
    let tail = spec.tail_sum(k);
    let need = (nf * spec.next_after(k)).max((nf * spec.tail_sq_sum(k)).sqrt());
    let lambda_reg = match rng.random_range(0..3u8) {
        0 => 0.0,
        1 => rng.random_range(0.0..2.0) * tail,
        _ => -rng.random_range(0.0..0.95) * (tail - need),
    };
    Ok(Some((spec, mu, n, k, lambda_reg)))
}

fn inequality_instance(opts: &VerifyOptions, i: u64) -> Result<Vec<(usize, f64)>> {
    let mut rng = stream(opts.seed, i, StreamRole::Aux);
    let mut drawn = None;
    for _ in 0..20 {
        if let Some(x) = random_admissible(&mut rng)? {
            drawn = Some(x);
            break;
        }
    }
    let Some((spec, mu, n, k, lambda_reg)) = drawn else {
        return Ok(Vec::new());
    };
    let nf = n as f64;
    let qs = quantities(&spec, &mu, n, k, lambda_reg, 0.0)?;
    let mut obs = Vec::new();
    let n_d2 = nf * qs.diamond2;
    for v in [
        viol(n_d2, qs.big_n),
        viol(n_d2, qs.big_n * (nf * qs.delta_v).sqrt()),
        viol(qs.v, 2.0),
        viol(qs.delta_v, 3.0 / nf),
        viol(qs.delta_v, 4.0 * qs.v),
    ] {
        obs.push((RELATIONS, v));
    }

    let vals = spec.values();
    let head_inv: f64 = (0..k).map(|j| mu[j] * mu[j] / vals[j]).sum();
    let tail_sig: f64 = (k..vals.len()).map(|j| vals[j] * mu[j] * mu[j]).sum();
    let lt = qs.lambda_tail;
    obs.push((VB_UPPER, viol(qs.v, k as f64 / nf + nf * spec.tail_sq_sum(k) / (lt * lt))));
    obs.push((VB_UPPER, viol(qs.b, lt * lt / (nf * nf) * head_inv + tail_sig)));

    let ks = quantities_kstar(&spec, &mu, n, lambda_reg)?;
    let d = qs.diamond();
    let ds = ks.diamond2_star.sqrt();
    for (lo, hi) in [
        (qs.big_n, 2.0 * ks.n_star),
        (ks.n_star / 2.0, qs.big_n),
        (d, 2.0 * ds),
        (ds / 2.0, d),
        (qs.v, 4.0 * ks.v_star),
        (ks.v_star / 4.0, qs.v),
        (lt, ks.lambda_star),
        (ks.lambda_star / 2.0, lt),
    ] {
        obs.push((KSTAR, viol(lo, hi)));
    }

    let a = alt_form(&spec, &mu, n, lt)?;
    for (lo, hi) in [
        (a.n_a, qs.big_n),
        (qs.big_n / 2.0, a.n_a),
        (a.v_a, qs.v),
        (qs.v / 4.0, a.v_a),
        (a.diamond2_a, qs.diamond2),
        (qs.diamond2 / 4.0, a.diamond2_a),
    ] {
        obs.push((ALT, viol(lo, hi)));
    }

    if a.n_a > 0.0 {
        let mut prev = f64::INFINITY;
        for j in 0..20 {
            let big = lt * 10f64.powf(j as f64 * 0.25);
            let r = alt_form(&spec, &mu, n, big)?;
            let ratio = r.n_a / r.diamond2_a.sqrt();
            obs.push((MONOTONE, viol(ratio, prev)));
            prev = ratio;
        }
    }
    Ok(obs)
}

/// Closed-form inequalities on `opts.instances` admissible instances.
pub fn inequality_suite(opts: &VerifyOptions) -> Result<Vec<CheckSummary>> {
    let obs: Vec<Vec<(usize, f64)>> = (0..opts.instances as u64)
        .into_par_iter()
        .map(|i| inequality_instance(opts, i))
        .collect::<Result<_>>()?;
    Ok(inequality_tally().summarize(obs))
}

/// Both suites, identities first.
pub fn run_all(opts: &VerifyOptions) -> Result<Vec<CheckSummary>> {
    let mut out = identity_suite(opts)?;
    out.extend(inequality_suite(opts)?);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_runs_pass() {
        let opts = VerifyOptions {
            instances: 40,
            seed: 7,
            s_perturbation: 0.0,
        };
        for s in run_all(&opts).unwrap() {
            assert!(s.passed(), "{s:?}");
            assert!(s.cases > 0, "{s:?}");
        }
    }

    #[test]
    fn perturbed_s_is_detected() {
        let opts = VerifyOptions {
            instances: 20,
            seed: 7,
            s_perturbation: 1e-3,
        };
        let r = identity_suite(&opts).unwrap();
        assert!(r.iter().any(|s| !s.passed()));
    }

    #[test]
    fn violation_measure() {
        assert_eq!(viol(1.0, 2.0), 0.0);
        assert!((viol(2.0, 1.0) - 0.5).abs() < 1e-15);
    }
}
