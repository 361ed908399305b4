use ridgemargin::bounds::{
    bound_fields, cgb_admissible, cgb_bound, cgb_target, lower_bound, quantities, quantities_alt,
    quantities_kstar, wang_bounds, WangVariant, BOUND_COLUMNS,
};
use ridgemargin::events::{event_fields, event_trials, EVENT_COLUMNS};
use ridgemargin::experiments::{
    benign_demo, benign_scale, phase_scan, sweep_lambda, sweep_mu_scale, sweep_table,
    DemoSettings, PhaseEmpirical, SweepRecord, SweepSettings,
};
use ridgemargin::spectrum::KStarRule;
use ridgemargin::verify::{run_all, VerifyOptions};
use ridgemargin::ProblemSpec;

use crate::config::RunConfig;
use crate::output::RunOutput;
use crate::{CliError, Command};

pub fn dispatch(cmd: Command, cfg: &RunConfig) -> Result<(), CliError> {
    let mut out = RunOutput::new(cmd.name(), cfg)?;
    let result = match cmd {
        Command::Verify => verify(cfg, &mut out),
        Command::Bounds => bounds(cfg, &mut out),
        Command::SweepMu => sweep(cfg, &mut out, false),
        Command::SweepLambda => sweep(cfg, &mut out, true),
        Command::Phase => phase(cfg, &mut out),
        Command::Demo => demo(cfg, &mut out),
        Command::Events => events(cfg, &mut out),
    };
    out.manifest(cfg)?;
    result
}

fn split(cfg: &RunConfig, problem: &ProblemSpec) -> Result<usize, CliError> {
    match cfg.experiment.k {
        Some(k) => Ok(k),
        None => Ok(problem
            .spectrum()
            .k_star(problem.lambda_reg(), problem.n(), KStarRule::Inclusive)?
            .k),
    }
}

fn settings(cfg: &RunConfig) -> SweepSettings {
    let e = &cfg.experiment;
    SweepSettings {
        eps: e.eps.clone(),
        trials: e.trials,
        seed: e.seed,
        k: e.k,
        t: e.t,
    }
}

fn verify(cfg: &RunConfig, out: &mut RunOutput) -> Result<(), CliError> {
    let v = &cfg.experiment.verify;
    let summaries = run_all(&VerifyOptions {
        instances: v.instances,
        seed: cfg.experiment.seed,
        s_perturbation: v.s_perturbation,
    })?;
    println!(
        "{:<11} {:<24} {:>6} {:>8} {:>11} {:>9}  result",
        "suite", "check", "cases", "failures", "worst", "tol"
    );
    let mut rows = Vec::new();
    for s in &summaries {
        let verdict = if s.passed() { "PASS" } else { "FAIL" };
        println!(
            "{:<11} {:<24} {:>6} {:>8} {:>11.3e} {:>9.1e}  {verdict}",
            s.suite, s.check, s.cases, s.failures, s.worst, s.tolerance
        );
        rows.push(vec![
            s.suite.to_string(),
            s.check.to_string(),
            s.cases.to_string(),
            s.failures.to_string(),
            s.worst.to_string(),
            s.tolerance.to_string(),
            verdict.to_string(),
        ]);
    }
    let header: Vec<String> = ["suite", "check", "cases", "failures", "worst", "tolerance", "result"]
        .map(String::from)
        .to_vec();
    out.csv(cfg, &header, &rows)?;
    match summaries.iter().filter(|s| !s.passed()).count() {
        0 => Ok(()),
        f => Err(CliError::Failed(f)),
    }
}

fn bounds(cfg: &RunConfig, out: &mut RunOutput) -> Result<(), CliError> {
    let problem = cfg.problem()?;
    let (spec, mu, n, lam) = (problem.spectrum(), problem.mu(), problem.n(), problem.lambda_reg());
    let k = split(cfg, &problem)?;
    let t = cfg.experiment.t;
    let qs = quantities(spec, mu, n, k, lam, problem.eta())?;
    let be = lower_bound(&qs, t);
    let mut header: Vec<String> = BOUND_COLUMNS.iter().map(|s| s.to_string()).collect();
    let mut row = bound_fields(&qs, &be);
    let mut push = |name: &str, v: String| {
        header.push(name.to_string());
        row.push(v);
    };
    push("bound_ratio", qs.bound_ratio().to_string());
    push("upper_ratio", qs.upper_ratio().to_string());
    push("precondition_ok", u8::from(qs.precondition_ok).to_string());
    let opt = |r: Option<f64>| r.map(|x| x.to_string()).unwrap_or_default();
    let ks = quantities_kstar(spec, mu, n, lam).ok();
    push("k_star", ks.map(|s| s.k_star.to_string()).unwrap_or_default());
    push("Lambda_star", opt(ks.map(|s| s.lambda_star)));
    push("V_star", opt(ks.map(|s| s.v_star)));
    push("Diamond2_star", opt(ks.map(|s| s.diamond2_star)));
    push("N_star", opt(ks.map(|s| s.n_star)));
    let alt = quantities_alt(spec, mu, n, k, lam)?;
    push("N_a", alt.n_a.to_string());
    push("V_a", alt.v_a.to_string());
    push("Diamond2_a", alt.diamond2_a.to_string());
    push("cgb", cgb_bound(spec, mu, n).to_string());
    push("cgb_target", cgb_target(spec, mu, n).to_string());
    push("cgb_admissible", u8::from(cgb_admissible(spec, mu, n, lam, t)).to_string());
    let wang = wang_bounds(spec, mu, n, lam, WangVariant::Balanced).ok();
    push("wang_balanced", opt(wang.filter(|w| !w.vacuous).map(|w| w.value)));
    out.csv(cfg, &header, &[row])?;
    println!(
        "k={k} N={:.6e} V={:.6e} Diamond2={:.6e} lower={} bound_ratio={:.6e}",
        qs.big_n,
        qs.v,
        qs.diamond2,
        be.ratio.map(|r| format!("{r:.6e}")).unwrap_or_else(|| "-".into()),
        qs.bound_ratio()
    );
    Ok(())
}

fn write_records(cfg: &RunConfig, out: &mut RunOutput, recs: &[SweepRecord]) -> Result<(), CliError> {
    let (header, rows) = sweep_table(recs);
    out.csv(cfg, &header, &rows)?;
    println!("{} rows", rows.len());
    Ok(())
}

fn sweep(cfg: &RunConfig, out: &mut RunOutput, over_lambda: bool) -> Result<(), CliError> {
    let problem = cfg.problem()?;
    out.dump(cfg, &problem)?;
    let s = settings(cfg);
    let recs = if over_lambda {
        sweep_lambda(&problem, &cfg.experiment.lambdas, &s)?
    } else {
        sweep_mu_scale(&problem, &cfg.experiment.mu_scales, &s)?
    };
    write_records(cfg, out, &recs)
}

fn phase(cfg: &RunConfig, out: &mut RunOutput) -> Result<(), CliError> {
    let ph = &cfg.experiment.phase;
    let emp = PhaseEmpirical {
        trials: ph.trials,
        eps: ph.eps,
        seed: cfg.experiment.seed,
        max_entries: ph.max_entries,
    };
    let recs = phase_scan(&ph.q_grid, ph.r, ph.s, &ph.n_grid, (ph.trials > 0).then_some(&emp))?;
    write_records(cfg, out, &recs)
}

fn demo(cfg: &RunConfig, out: &mut RunOutput) -> Result<(), CliError> {
    let problem = cfg.problem()?;
    out.dump(cfg, &problem)?;
    let d = &cfg.experiment.demo;
    let settings = DemoSettings {
        k: d.k,
        c_c: d.c_c,
        trials: d.trials,
        seed: cfg.experiment.seed,
        eps: d.eps,
    };
    let (spec, n) = (problem.spectrum(), problem.n());
    let scales = match &d.mu_scales {
        Some(s) => s.clone(),
        None => {
            let m = benign_scale(spec, problem.mu(), n, &settings)?;
            vec![m, m / 100.0]
        }
    };
    let recs = scales
        .iter()
        .map(|&m| benign_demo(spec, problem.mu(), m, n, problem.eta(), &settings))
        .collect::<Result<Vec<_>, _>>()?;
    write_records(cfg, out, &recs)
}

fn events(cfg: &RunConfig, out: &mut RunOutput) -> Result<(), CliError> {
    let problem = cfg.problem()?;
    out.dump(cfg, &problem)?;
    let k = split(cfg, &problem)?;
    let reports = event_trials(&problem, k, cfg.experiment.events.trials, cfg.experiment.seed)?;
    let header: Vec<String> = EVENT_COLUMNS.iter().map(|s| s.to_string()).collect();
    let rows: Vec<Vec<String>> = reports
        .iter()
        .enumerate()
        .map(|(i, r)| event_fields(i as u64, r))
        .collect();
    out.csv(cfg, &header, &rows)?;
    let worst = reports.iter().map(|r| r.cb_measured).fold(0.0, f64::max);
    println!("{} trials, k={k}, max cB {worst:.4}", reports.len());
    Ok(())
}
