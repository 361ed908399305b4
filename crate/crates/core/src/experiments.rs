//! Monte-Carlo drivers: quantile estimation of the margin ratio, sweeps over
//! the mean scale and the regularization, phase scans on bi-level spectra and
//! the benign-overfitting demonstration.
//!
//! Every driver maps over trial indices with per-trial random streams and
//! collects results in trial order, so output depends only on the master
//! seed.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{Binomial, DiscreteCDF};

use crate::bounds::{
    self, lower_bound, min_mu_scale, muthukumar_ratio, quantities, BoundEval, QuantitySet,
    BOUND_COLUMNS,
};
use crate::error::{Error, Result};
use crate::model::{empirical_error, sample_dataset, CovariateLaw, Dataset, ProblemSpec};
use crate::rng::{stream, StreamRole};
use crate::solver::{decompose, margin_stats, noisy_test_error, train_residual, GramFactor, GramState};
use crate::spectrum::{BilevelShape, KStarRule, Spectrum};

/// Test draws per trial when the covariate law is not Gaussian.
pub const EMPIRICAL_TEST_DRAWS: usize = 20_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuantileEstimate {
    pub eps: f64,
    pub alpha_hat: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// Trials entering the quantile.
    pub trials: usize,
    /// Degenerate trials left out.
    pub dropped: usize,
}

/// Order statistic at index `max(1, ⌈ε m⌉)` with a 95% distribution-free
/// interval from the binomial law of the number of samples below the true
/// quantile. `None` when there are no samples.
pub fn quantile_estimate(samples: &[f64], eps: f64, dropped: usize) -> Option<QuantileEstimate> {
    let m = samples.len();
    if m == 0 {
        return None;
    }
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let idx = ((eps * m as f64).ceil() as usize).clamp(1, m);
    let bin = Binomial::new(eps, m as u64).expect("eps in (0, 1)");
    // P(X_(j) ≤ q) = 1 - F(j - 1), P(X_(j) ≥ q) = F(j - 1)
    let mut lo = 1;
    for j in 1..=m {
        if bin.cdf(j as u64 - 1) <= 0.025 {
            lo = j;
        } else {
            break;
        }
    }
    let mut hi = m;
    for j in idx..=m {
        if bin.cdf(j as u64 - 1) >= 0.975 {
            hi = j;
            break;
        }
    }
    let lo = lo.min(idx);
    Some(QuantileEstimate {
        eps,
        alpha_hat: xs[idx - 1],
        ci_low: xs[lo - 1],
        ci_high: xs[hi - 1],
        trials: m,
        dropped,
    })
}

fn check_eps(eps: f64, trials: usize) -> Result<()> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidParams(format!("quantile level must lie in (0, 1), got {eps}")));
    }
    let required = (10.0 / eps).ceil() as usize;
    if trials < required {
        return Err(Error::TooFewTrials {
            required,
            got: trials,
            eps,
        });
    }
    Ok(())
}

/// Per-trial observables at one setting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrialOutcome {
    pub ratio: f64,
    pub train_residual: f64,
    /// Misclassification probability against noisy test labels.
    pub test_error: f64,
}

fn trial_outcome(problem: &ProblemSpec, ds: &Dataset, gram: &GramState) -> Result<TrialOutcome> {
    let sol = decompose(gram, ds, problem.mu())?;
    let ms = margin_stats(sol.w.as_slice(), problem.mu(), problem.spectrum())?;
    let test_error = match problem.law() {
        CovariateLaw::Gaussian => noisy_test_error(ms.ratio, problem.eta()),
        _ => {
            let mut rng = stream(ds.seed, ds.trial, StreamRole::Test);
            let clean = empirical_error(problem, sol.w.as_slice(), EMPIRICAL_TEST_DRAWS, &mut rng);
            problem.eta() + (1.0 - 2.0 * problem.eta()) * clean
        }
    };
    Ok(TrialOutcome {
        ratio: ms.ratio,
        train_residual: train_residual(ds, problem.mu(), &sol.w),
        test_error,
    })
}

fn keep(r: Result<TrialOutcome>) -> Result<Option<TrialOutcome>> {
    match r {
        Ok(o) => Ok(Some(o)),
        Err(e) if e.is_degenerate_trial() => Ok(None),
        Err(e) => Err(e),
    }
}

/// Outcomes of trials `0..trials` at the problem's own settings; degenerate
/// trials are `None`.
pub fn run_trials(problem: &ProblemSpec, trials: usize, seed: u64) -> Result<Vec<Option<TrialOutcome>>> {
    (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let ds = sample_dataset(problem, seed, t);
            keep(GramState::from_rows(&ds.q, problem.lambda_reg()).and_then(|g| trial_outcome(problem, &ds, &g)))
        })
        .collect()
}

/// Empirical `ε`-quantile of `μᵀw / ‖w‖_Σ` over `trials` independent draws.
pub fn estimate_quantile(problem: &ProblemSpec, eps: f64, trials: usize, seed: u64) -> Result<QuantileEstimate> {
    check_eps(eps, trials)?;
    let outcomes = run_trials(problem, trials, seed)?;
    let ratios: Vec<f64> = outcomes.iter().flatten().map(|o| o.ratio).collect();
    let dropped = trials - ratios.len();
    quantile_estimate(&ratios, eps, dropped)
        .ok_or_else(|| Error::InvalidParams(format!("all {trials} trials were degenerate")))
}

/// Shared settings of the sweep drivers.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSettings {
    pub eps: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    /// Split index for the closed-form quantities; `None` picks `k*` at each
    /// setting and falls back to 0.
    pub k: Option<usize>,
    /// Deviation parameter of the lower bound.
    pub t: f64,
}

impl Default for SweepSettings {
    fn default() -> Self {
        Self {
            eps: vec![0.05, 0.1, 0.25],
            trials: 200,
            seed: 0,
            k: None,
            t: 1.0,
        }
    }
}

impl SweepSettings {
    fn validate(&self) -> Result<()> {
        if self.eps.is_empty() {
            return Err(Error::InvalidParams("no quantile levels given".into()));
        }
        for &e in &self.eps {
            check_eps(e, self.trials)?;
        }
        Ok(())
    }

    fn split(&self, spec: &Spectrum, n: usize, lambda_reg: f64) -> usize {
        self.k.unwrap_or_else(|| {
            spec.k_star(lambda_reg, n, KStarRule::Inclusive)
                .map(|k| k.k)
                .unwrap_or(0)
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum SweepKey {
    MuScale(f64),
    Lambda(f64),
    Phase { q: f64, n: usize },
    Demo { mu_scale: f64 },
}

impl SweepKey {
    fn columns(&self) -> &'static [&'static str] {
        match self {
            SweepKey::MuScale(_) => &["mu_scale"],
            SweepKey::Lambda(_) => &["lambda_key"],
            SweepKey::Phase { .. } => &["q", "n"],
            SweepKey::Demo { .. } => &["mu_scale"],
        }
    }

    fn fields(&self) -> Vec<String> {
        match *self {
            SweepKey::MuScale(m) | SweepKey::Demo { mu_scale: m } => vec![m.to_string()],
            SweepKey::Lambda(l) => vec![l.to_string()],
            SweepKey::Phase { q, n } => vec![q.to_string(), n.to_string()],
        }
    }
}

/// One row of sweep output.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRecord {
    pub key: SweepKey,
    pub seed: u64,
    pub trials: usize,
    pub dropped: usize,
    pub quantile: Option<QuantileEstimate>,
    /// Requested quantile level, kept even when every trial was dropped.
    pub eps: Option<f64>,
    pub mean_ratio: Option<f64>,
    pub train_residual_med: Option<f64>,
    pub test_error_med: Option<f64>,
    pub quantities: Option<QuantitySet>,
    pub bound: Option<BoundEval>,
    /// Named derived values: regime terms, bound ratios, comparison bounds.
    pub extra: Vec<(String, f64)>,
}

impl SweepRecord {
    pub fn extra(&self, name: &str) -> Option<f64> {
        self.extra.iter().find(|(k, _)| k == name).map(|(_, v)| *v)
    }

    pub fn alpha_hat(&self) -> Option<f64> {
        self.quantile.map(|q| q.alpha_hat)
    }
}

fn median(xs: &mut [f64]) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    xs.sort_by(f64::total_cmp);
    let m = xs.len();
    Some(if m % 2 == 1 {
        xs[m / 2]
    } else {
        0.5 * (xs[m / 2 - 1] + xs[m / 2])
    })
}

struct Summary {
    quantiles: Vec<Option<QuantileEstimate>>,
    dropped: usize,
    mean_ratio: Option<f64>,
    train_residual_med: Option<f64>,
    test_error_med: Option<f64>,
}

fn summarize(outcomes: &[Option<TrialOutcome>], eps: &[f64]) -> Summary {
    let valid: Vec<TrialOutcome> = outcomes.iter().flatten().copied().collect();
    let dropped = outcomes.len() - valid.len();
    let ratios: Vec<f64> = valid.iter().map(|o| o.ratio).collect();
    let mut res: Vec<f64> = valid.iter().map(|o| o.train_residual).collect();
    let mut te: Vec<f64> = valid.iter().map(|o| o.test_error).collect();
    Summary {
        quantiles: eps.iter().map(|&e| quantile_estimate(&ratios, e, dropped)).collect(),
        dropped,
        mean_ratio: (!ratios.is_empty()).then(|| ratios.iter().sum::<f64>() / ratios.len() as f64),
        train_residual_med: median(&mut res),
        test_error_med: median(&mut te),
    }
}

/// Regime terms and bound ratios derived from a quantity set.
fn theory_extras(qs: &QuantitySet) -> Vec<(String, f64)> {
    let sqrt_v = qs.v.sqrt();
    let sn_d = (qs.n as f64).sqrt() * qs.diamond();
    vec![
        ("sqrt_V".into(), sqrt_v),
        ("sqrt_n_diamond".into(), sn_d),
        ("N_sqrt_V".into(), qs.big_n * sqrt_v),
        ("diamond".into(), qs.diamond()),
        ("bound_ratio".into(), qs.bound_ratio()),
        ("upper_ratio".into(), qs.upper_ratio()),
    ]
}

fn theory(
    problem: &ProblemSpec,
    settings: &SweepSettings,
    lambda_reg: f64,
) -> (Option<QuantitySet>, Option<BoundEval>, Vec<(String, f64)>) {
    let spec = problem.spectrum();
    let k = settings.split(spec, problem.n(), lambda_reg);
    match quantities(spec, problem.mu(), problem.n(), k, lambda_reg, problem.eta()) {
        Ok(qs) => {
            let be = lower_bound(&qs, settings.t);
            let mut extra = theory_extras(&qs);
            extra.push(("cgb".into(), bounds::cgb_bound(spec, problem.mu(), problem.n())));
            (Some(qs), Some(be), extra)
        }
        Err(_) => (None, None, Vec::new()),
    }
}

fn records_for(
    key: SweepKey,
    problem: &ProblemSpec,
    settings: &SweepSettings,
    lambda_reg: f64,
    outcomes: &[Option<TrialOutcome>],
) -> Vec<SweepRecord> {
    let s = summarize(outcomes, &settings.eps);
    let (qs, be, extra) = theory(problem, settings, lambda_reg);
    settings
        .eps
        .iter()
        .zip(s.quantiles)
        .map(|(&eps, q)| SweepRecord {
            key,
            seed: settings.seed,
            trials: outcomes.len(),
            dropped: s.dropped,
            quantile: q,
            eps: Some(eps),
            mean_ratio: s.mean_ratio,
            train_residual_med: s.train_residual_med,
            test_error_med: s.test_error_med,
            quantities: qs,
            bound: be,
            extra: extra.clone(),
        })
        .collect()
}

fn unit_direction(mu: &[f64]) -> Result<Vec<f64>> {
    let norm = mu.iter().map(|m| m * m).sum::<f64>().sqrt();
    if !(norm > 0.0) {
        return Err(Error::InvalidParams("mean direction is zero".into()));
    }
    Ok(mu.iter().map(|m| m / norm).collect())
}

/// For each scale `m`, set `μ = m μ̂` with `μ̂` the unit direction of the
/// base mean. One factorization per trial is shared across scales.
pub fn sweep_mu_scale(base: &ProblemSpec, scales: &[f64], settings: &SweepSettings) -> Result<Vec<SweepRecord>> {
    settings.validate()?;
    if scales.iter().any(|s| !(*s > 0.0)) || scales.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParams("scales must be positive and increasing".into()));
    }
    let dir = unit_direction(base.mu())?;
    let problems: Vec<ProblemSpec> = scales
        .iter()
        .map(|&m| base.with_mu(dir.iter().map(|d| d * m).collect()))
        .collect::<Result<_>>()?;
    let per_trial: Vec<Vec<Option<TrialOutcome>>> = (0..settings.trials as u64)
        .into_par_iter()
        .map(|t| {
            let ds = sample_dataset(base, settings.seed, t);
            match GramState::from_rows(&ds.q, base.lambda_reg()) {
                Ok(g) => problems.iter().map(|pr| keep(trial_outcome(pr, &ds, &g))).collect(),
                Err(e) if e.is_degenerate_trial() => Ok(vec![None; problems.len()]),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<_>>()?;
    let mut out = Vec::new();
    for (i, (pr, &m)) in problems.iter().zip(scales).enumerate() {
        let col: Vec<_> = per_trial.iter().map(|row| row[i]).collect();
        out.extend(records_for(SweepKey::MuScale(m), pr, settings, base.lambda_reg(), &col));
    }
    Ok(out)
}

/// For each `λ` in the grid, solve on the same trials. Trials whose Gram
/// matrix puts `λ` below the safety floor are dropped at that `λ`.
pub fn sweep_lambda(base: &ProblemSpec, lambdas: &[f64], settings: &SweepSettings) -> Result<Vec<SweepRecord>> {
    settings.validate()?;
    if lambdas.iter().any(|l| !l.is_finite()) {
        return Err(Error::InvalidParams("regularization grid has non-finite entries".into()));
    }
    let problems: Vec<ProblemSpec> = lambdas.iter().map(|&l| base.with_lambda(l)).collect();
    let per_trial: Vec<Vec<Option<TrialOutcome>>> = (0..settings.trials as u64)
        .into_par_iter()
        .map(|t| {
            let ds = sample_dataset(base, settings.seed, t);
            let factor = GramFactor::from_rows(&ds.q);
            problems
                .iter()
                .map(|pr| keep(factor.at_lambda(pr.lambda_reg()).and_then(|g| trial_outcome(pr, &ds, &g))))
                .collect()
        })
        .collect::<Result<_>>()?;
    let mut out = Vec::new();
    for (i, (pr, &l)) in problems.iter().zip(lambdas).enumerate() {
        let col: Vec<_> = per_trial.iter().map(|row| row[i]).collect();
        out.extend(records_for(SweepKey::Lambda(l), pr, settings, l, &col));
    }
    Ok(out)
}

/// Empirical part of a phase scan.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseEmpirical {
    pub trials: usize,
    pub eps: f64,
    pub seed: u64,
    /// Largest `n·p` for which datasets are sampled.
    pub max_entries: usize,
}

/// The bi-level instance of the phase scan: spectrum and
/// `μ = sqrt(2λ_1/π) e_1`.
pub fn phase_problem(n: usize, q: f64, r: f64, s: f64) -> Result<ProblemSpec> {
    let spec = Spectrum::bilevel(n, s, q, r)?;
    let mut mu = vec![0.0; spec.len()];
    mu[0] = (2.0 * spec.top() / std::f64::consts::PI).sqrt();
    ProblemSpec::new(spec, mu, n, 0.0, 0.0, CovariateLaw::Gaussian)
}

/// Closed-form bound ratio on the bi-level family for every `(q, n)`, plus
/// the empirical quantile at the largest `n` whose datasets fit in
/// `max_entries`.
pub fn phase_scan(
    q_grid: &[f64],
    r: f64,
    s: f64,
    n_grid: &[usize],
    empirical: Option<&PhaseEmpirical>,
) -> Result<Vec<SweepRecord>> {
    if let Some(emp) = empirical {
        check_eps(emp.eps, emp.trials)?;
    }
    let mut affordable = None;
    if let Some(emp) = empirical {
        for &n in n_grid {
            let shape = BilevelShape::new(n, s, q_grid.first().copied().unwrap_or(0.0), r);
            if let Ok(sh) = shape {
                if n.saturating_mul(sh.p) <= emp.max_entries && affordable.is_none_or(|a| n > a) {
                    affordable = Some(n);
                }
            }
        }
    }
    let mut out = Vec::new();
    for &q in q_grid {
        for &n in n_grid {
            let ratio = muthukumar_ratio(n, q, r, s)?;
            let shape = BilevelShape::new(n, s, q, r)?;
            let mut rec = SweepRecord {
                key: SweepKey::Phase { q, n },
                seed: empirical.map(|e| e.seed).unwrap_or(0),
                trials: 0,
                dropped: 0,
                quantile: None,
                eps: empirical.map(|e| e.eps),
                mean_ratio: None,
                train_residual_med: None,
                test_error_med: None,
                quantities: None,
                bound: None,
                extra: vec![
                    ("muthukumar_ratio".into(), ratio),
                    ("p".into(), shape.p as f64),
                    ("head_count".into(), shape.head_count as f64),
                ],
            };
            if let (Some(emp), Some(a)) = (empirical, affordable) {
                if a == n {
                    let pr = phase_problem(n, q, r, s)?;
                    let outcomes = run_trials(&pr, emp.trials, emp.seed)?;
                    let sm = summarize(&outcomes, &[emp.eps]);
                    rec.trials = emp.trials;
                    rec.dropped = sm.dropped;
                    rec.quantile = sm.quantiles[0];
                    rec.mean_ratio = sm.mean_ratio;
                    rec.train_residual_med = sm.train_residual_med;
                    rec.test_error_med = sm.test_error_med;
                }
            }
            out.push(rec);
        }
    }
    Ok(out)
}

/// Settings of the benign-overfitting demonstration.
#[derive(Debug, Clone, PartialEq)]
pub struct DemoSettings {
    pub k: usize,
    /// Product `cC` of the scale condition `N ≥ 1 + cC(√V + ◇√n)`; also the
    /// margin target `C` with `c = 1`.
    pub c_c: f64,
    pub trials: usize,
    pub seed: u64,
    pub eps: f64,
}

impl Default for DemoSettings {
    fn default() -> Self {
        Self {
            k: 1,
            c_c: 8.0,
            trials: 50,
            seed: 0,
            eps: 0.25,
        }
    }
}

/// Smallest mean scale along `mu_dir` meeting the demo's scale condition.
pub fn benign_scale(spec: &Spectrum, mu_dir: &[f64], n: usize, settings: &DemoSettings) -> Result<f64> {
    let dir = unit_direction(mu_dir)?;
    min_mu_scale(spec, &dir, n, settings.k, 0.0, settings.c_c)
}

/// Minimum-norm interpolation at `μ = mu_scale · μ̂`: per-trial training
/// residual, test error and margin ratio against the target `C`.
pub fn benign_demo(
    spec: &Spectrum,
    mu_dir: &[f64],
    mu_scale: f64,
    n: usize,
    eta: f64,
    settings: &DemoSettings,
) -> Result<SweepRecord> {
    let k = settings.k;
    let c = settings.c_c;
    let dir = unit_direction(mu_dir)?;
    let mu: Vec<f64> = dir.iter().map(|d| d * mu_scale).collect();
    if k as f64 * c * c >= n as f64 {
        return Err(Error::InvalidParams(format!(
            "split index {k} too large for n = {n}: need k < n/C² with C = {c}"
        )));
    }
    let tail = spec.tail_sum(k);
    let need = (n as f64 * spec.next_after(k)).max(c * (n as f64 * spec.tail_sq_sum(k)).sqrt());
    if !(tail > need) {
        return Err(Error::InvalidParams(format!(
            "tail effective rank too small: Σ_{{i>k}} λ_i = {tail} ≤ {need}"
        )));
    }
    let problem = ProblemSpec::new(spec.clone(), mu, n, eta, 0.0, CovariateLaw::Gaussian)?;
    let outcomes = run_trials(&problem, settings.trials, settings.seed)?;
    let sm = summarize(&outcomes, &[settings.eps]);
    let qs = quantities(spec, problem.mu(), n, k, 0.0, eta)?;
    let be = lower_bound(&qs, 1.0);
    let hits = outcomes.iter().flatten().filter(|o| o.ratio >= c).count();
    let valid = outcomes.iter().flatten().count();
    let rhs = 1.0 + c * (qs.v.sqrt() + qs.diamond() * (n as f64).sqrt());
    let mut extra = theory_extras(&qs);
    extra.extend([
        ("eta".to_string(), eta),
        ("target_C".to_string(), c),
        ("scale_condition_met".to_string(), if qs.big_n >= rhs { 1.0 } else { 0.0 }),
        ("frac_ratio_ge_C".to_string(), hits as f64 / valid.max(1) as f64),
    ]);
    Ok(SweepRecord {
        key: SweepKey::Demo { mu_scale },
        seed: settings.seed,
        trials: settings.trials,
        dropped: sm.dropped,
        quantile: sm.quantiles[0],
        eps: Some(settings.eps),
        mean_ratio: sm.mean_ratio,
        train_residual_med: sm.train_residual_med,
        test_error_med: sm.test_error_med,
        quantities: Some(qs),
        bound: Some(be),
        extra,
    })
}

/// Smallest `c ≥ 1` with `x/c ≤ y ≤ c x` for every pair.
pub fn measured_constant(pairs: &[(f64, f64)]) -> f64 {
    pairs
        .iter()
        .map(|&(x, y)| (x / y).max(y / x))
        .fold(1.0, f64::max)
}

pub const EMPIRICAL_COLUMNS: [&str; 10] = [
    "eps",
    "alpha_hat",
    "ci_low",
    "ci_high",
    "trials",
    "dropped",
    "mean_ratio",
    "train_residual_med",
    "test_error_med",
    "seed",
];

fn extra_names(records: &[SweepRecord]) -> Vec<String> {
    let mut names: Vec<String> = Vec::new();
    for (k, _) in records.iter().flat_map(|r| &r.extra) {
        if !names.contains(k) {
            names.push(k.clone());
        }
    }
    names
}

/// Header of a CSV holding records of one key kind. Extra columns are the
/// union of the records' extra names in first-seen order.
pub fn sweep_header(records: &[SweepRecord]) -> Vec<String> {
    let Some(first) = records.first() else {
        return Vec::new();
    };
    let mut h: Vec<String> = first.key.columns().iter().map(|s| s.to_string()).collect();
    h.extend(BOUND_COLUMNS.iter().map(|s| s.to_string()));
    h.extend(EMPIRICAL_COLUMNS.iter().map(|s| s.to_string()));
    h.extend(extra_names(records));
    h
}

/// Cells of one record; `extras` names the extra columns, missing ones are empty.
pub fn sweep_fields(r: &SweepRecord, extras: &[String]) -> Vec<String> {
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    let mut f = r.key.fields();
    match (&r.quantities, &r.bound) {
        (Some(qs), Some(be)) => f.extend(bounds::bound_fields(qs, be)),
        _ => f.extend(std::iter::repeat_n(String::new(), BOUND_COLUMNS.len())),
    }
    f.extend([
        opt(r.eps),
        opt(r.quantile.map(|q| q.alpha_hat)),
        opt(r.quantile.map(|q| q.ci_low)),
        opt(r.quantile.map(|q| q.ci_high)),
        r.trials.to_string(),
        r.dropped.to_string(),
        opt(r.mean_ratio),
        opt(r.train_residual_med),
        opt(r.test_error_med),
        r.seed.to_string(),
    ]);
    f.extend(extras.iter().map(|name| opt(r.extra(name))));
    f
}

/// Header and aligned rows for a set of records.
pub fn sweep_table(records: &[SweepRecord]) -> (Vec<String>, Vec<Vec<String>>) {
    let extras = extra_names(records);
    let rows = records.iter().map(|r| sweep_fields(r, &extras)).collect();
    (sweep_header(records), rows)
}

/// Write a header and rows as CSV.
pub fn write_csv(path: impl AsRef<Path>, header: &[String], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(header).map_err(csv_err)?;
    for row in rows {
        w.write_record(row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Io(std::io::Error::other(format!("{other:?}"))),
    }
}

/// Write sweep records to one CSV.
pub fn write_sweep_csv(path: impl AsRef<Path>, records: &[SweepRecord]) -> Result<()> {
    let (header, rows) = sweep_table(records);
    write_csv(path, &header, &rows)
}

/// Plain-text progress counter on stderr.
pub fn progress(label: &str, done: usize, total: usize) {
    let mut e = std::io::stderr();
    let _ = writeln!(e, "{label}: {done}/{total}");
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn iso_problem(p: usize, n: usize, mu0: f64, eta: f64) -> ProblemSpec {
        let mut mu = vec![0.0; p];
        mu[0] = mu0;
        ProblemSpec::new(Spectrum::isotropic(p).unwrap(), mu, n, eta, 0.0, CovariateLaw::Gaussian).unwrap()
    }

    #[test]
    fn quantile_index_and_interval() {
        let xs: Vec<f64> = (1..=100).map(|i| i as f64).collect();
        let q = quantile_estimate(&xs, 0.1, 0).unwrap();
        assert_eq!(q.alpha_hat, 10.0);
        assert!(q.ci_low <= q.alpha_hat && q.alpha_hat <= q.ci_high);
        assert!(q.ci_low >= 3.0 && q.ci_high <= 18.0);
        let q = quantile_estimate(&[5.0], 0.1, 2).unwrap();
        assert_eq!((q.alpha_hat, q.ci_low, q.ci_high, q.dropped), (5.0, 5.0, 5.0, 2));
        assert!(quantile_estimate(&[], 0.5, 0).is_none());
    }

    #[test]
    fn interval_covers_normal_quantile() {
        // true 0.1-quantile of N(0,1)
        let truth = -1.2815515655446004;
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let covered = (0..100)
            .filter(|_| {
                let xs: Vec<f64> = (0..400).map(|_| StandardNormal.sample(&mut rng)).collect();
                let q = quantile_estimate(&xs, 0.1, 0).unwrap();
                q.ci_low <= truth && truth <= q.ci_high
            })
            .count();
        assert!(covered >= 90, "covered {covered}");
    }

    #[test]
    fn too_few_trials() {
        let pr = iso_problem(50, 10, 1.0, 0.0);
        assert!(matches!(
            estimate_quantile(&pr, 0.1, 99, 0),
            Err(Error::TooFewTrials { required: 100, got: 99, .. })
        ));
    }

    #[test]
    fn zero_mean_quantile_straddles_zero() {
        let pr = iso_problem(200, 20, 0.0, 0.0);
        let q = estimate_quantile(&pr, 0.5, 200, 1).unwrap();
        assert!(q.ci_low <= 0.0 && 0.0 <= q.ci_high);
    }

    #[test]
    fn huge_mean_gives_large_quantile() {
        let pr = iso_problem(200, 20, 1e3, 0.0);
        let q = estimate_quantile(&pr, 0.9, 20, 1).unwrap();
        assert!(q.alpha_hat > 10.0);
    }

    #[test]
    fn sweep_mu_matches_direct_runs() {
        let pr = iso_problem(120, 15, 1.0, 0.1);
        let settings = SweepSettings {
            eps: vec![0.1],
            trials: 100,
            seed: 3,
            k: Some(0),
            t: 1.0,
        };
        let recs = sweep_mu_scale(&pr, &[0.5, 4.0], &settings).unwrap();
        assert_eq!(recs.len(), 2);
        let direct = estimate_quantile(&pr.with_mu_scale(4.0), 0.1, 100, 3).unwrap();
        assert_eq!(recs[1].quantile.unwrap(), direct);
        let again = sweep_mu_scale(&pr, &[0.5, 4.0], &settings).unwrap();
        assert_eq!(recs, again);
        assert!(sweep_mu_scale(&pr, &[4.0, 0.5], &settings).is_err());
    }

    #[test]
    fn lambda_below_floor_drops_every_trial() {
        let pr = iso_problem(60, 10, 1.0, 0.0);
        let settings = SweepSettings {
            eps: vec![0.25],
            trials: 40,
            seed: 0,
            k: Some(0),
            t: 1.0,
        };
        let recs = sweep_lambda(&pr, &[-1e6, 0.0], &settings).unwrap();
        assert_eq!(recs[0].dropped, 40);
        assert!(recs[0].quantile.is_none());
        assert_eq!(recs[1].dropped, 0);
        let direct = estimate_quantile(&pr, 0.25, 40, 0).unwrap();
        assert_eq!(recs[1].quantile.unwrap(), direct);
    }

    #[test]
    fn phase_rows_and_empirical_column() {
        let emp = PhaseEmpirical {
            trials: 40,
            eps: 0.25,
            seed: 0,
            max_entries: 200_000,
        };
        let recs = phase_scan(&[0.5, 0.75], 0.5, 1.5, &[16, 64, 10_000], Some(&emp)).unwrap();
        assert_eq!(recs.len(), 6);
        let with_emp: Vec<_> = recs.iter().filter(|r| r.quantile.is_some()).collect();
        assert_eq!(with_emp.len(), 2);
        for r in with_emp {
            assert!(matches!(r.key, SweepKey::Phase { n: 64, .. }));
        }
        assert!(phase_scan(&[2.0], 0.5, 1.5, &[100], None).is_err());
    }

    #[test]
    fn demo_rejects_low_effective_rank() {
        let spec = Spectrum::spiked(300, 1, 50.0).unwrap();
        let mut dir = vec![0.0; 300];
        dir[0] = 1.0;
        let r = benign_demo(&spec, &dir, 10.0, 100, 0.05, &DemoSettings::default());
        assert!(matches!(r, Err(Error::InvalidParams(_))));
    }

    #[test]
    fn measured_constant_examples() {
        assert_eq!(measured_constant(&[]), 1.0);
        assert_eq!(measured_constant(&[(1.0, 2.0), (3.0, 1.0)]), 3.0);
    }

    #[test]
    fn csv_shape() {
        let pr = iso_problem(60, 10, 1.0, 0.0);
        let settings = SweepSettings {
            eps: vec![0.1, 0.25],
            trials: 100,
            seed: 0,
            k: None,
            t: 1.0,
        };
        let recs = sweep_mu_scale(&pr, &[1.0, 2.0], &settings).unwrap();
        let (h, rows) = sweep_table(&recs);
        assert!(rows.iter().all(|r| r.len() == h.len()));
        let dir = tempdir();
        let path = dir.join("s.csv");
        write_sweep_csv(&path, &recs).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 5);
        std::fs::remove_dir_all(dir).unwrap();
    }

    #[test]
    fn rows_without_extras_stay_aligned() {
        let pr = iso_problem(60, 10, 1.0, 0.0);
        let settings = SweepSettings {
            eps: vec![0.25],
            trials: 40,
            k: Some(0),
            ..Default::default()
        };
        let recs = sweep_lambda(&pr, &[-1e4, 0.0], &settings).unwrap();
        assert!(recs[0].extra.is_empty() && !recs[1].extra.is_empty());
        let (h, rows) = sweep_table(&recs);
        assert!(rows.iter().all(|r| r.len() == h.len()));
        assert_eq!(rows[0].last().unwrap(), "");
    }

    fn tempdir() -> std::path::PathBuf {
        let d = std::env::temp_dir().join(format!("ridgemargin-exp-{}", std::process::id()));
        std::fs::create_dir_all(&d).unwrap();
        d
    }
}
