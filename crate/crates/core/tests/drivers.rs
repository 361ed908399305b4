use ridgemargin::bounds::{lower_bound, quantities};
use ridgemargin::events::event_trials;
use ridgemargin::experiments::{
    benign_demo, benign_scale, estimate_quantile, phase_scan, sweep_header, sweep_lambda,
    sweep_mu_scale, write_sweep_csv, DemoSettings, SweepSettings,
};
use ridgemargin::{CovariateLaw, ProblemSpec, Spectrum};

fn basis(p: usize, m: f64) -> Vec<f64> {
    let mut v = vec![0.0; p];
    v[0] = m;
    v
}

#[test]
fn quantile_lies_between_lower_and_upper_ratios() {
    let (n, p) = (50, 500);
    let spec = Spectrum::isotropic(p).unwrap();
    let mu = basis(p, 3.0);
    let problem = ProblemSpec::new(spec.clone(), mu.clone(), n, 0.0, 0.0, CovariateLaw::Gaussian).unwrap();
    let q = estimate_quantile(&problem, 0.1, 2000, 21).unwrap();
    let qs = quantities(&spec, &mu, n, 0, 0.0, 0.0).unwrap();
    let lower = lower_bound(&qs, 1.0).ratio.unwrap();
    let upper = qs.upper_ratio();
    let c = (lower / q.alpha_hat).max(q.alpha_hat / upper).max(1.0);
    println!("alpha_hat {} in [{lower}, {upper}], c_measured {c}", q.alpha_hat);
    assert!(c <= 10.0);
    assert!(q.ci_low <= q.alpha_hat && q.alpha_hat <= q.ci_high);
}

#[test]
fn huge_clean_mean_gives_vanishing_error() {
    let (n, p) = (70, 6000);
    let mut v = vec![50.0];
    v.extend(std::iter::repeat_n(1.0, p - 1));
    let spec = Spectrum::new(v).unwrap();
    let dir = basis(p, 1.0);
    let settings = DemoSettings {
        trials: 20,
        seed: 2,
        ..Default::default()
    };
    let m = benign_scale(&spec, &dir, n, &settings).unwrap();
    let rec = benign_demo(&spec, &dir, 1e3 * m, n, 0.0, &settings).unwrap();
    assert!(rec.test_error_med.unwrap() < 1e-6);
    assert!(rec.train_residual_med.unwrap() < 1e-8);
    assert_eq!(rec.extra("scale_condition_met"), Some(1.0));
    assert_eq!(rec.extra("frac_ratio_ge_C"), Some(1.0));
}

#[test]
fn replay_is_identical_for_any_thread_count() {
    let p = 300;
    let base = ProblemSpec::new(Spectrum::spiked(p, 2, 20.0).unwrap(), basis(p, 1.0), 30, 0.1, 0.0, CovariateLaw::Gaussian).unwrap();
    let settings = SweepSettings {
        eps: vec![0.1, 0.25],
        trials: 120,
        seed: 77,
        k: Some(2),
        t: 1.0,
    };
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| {
                (
                    sweep_mu_scale(&base, &[0.5, 2.0, 8.0], &settings).unwrap(),
                    sweep_lambda(&base, &[-1.0, 0.0, 5.0], &settings).unwrap(),
                )
            })
    };
    assert_eq!(run(1), run(3));
}

#[test]
fn tiny_mean_quantile_straddles_zero() {
    let p = 400;
    let base = ProblemSpec::new(Spectrum::isotropic(p).unwrap(), basis(p, 1.0), 40, 0.0, 0.0, CovariateLaw::Gaussian).unwrap();
    let settings = SweepSettings {
        eps: vec![0.5],
        trials: 300,
        seed: 5,
        k: Some(0),
        t: 1.0,
    };
    let recs = sweep_mu_scale(&base, &[1e-6, 1.0], &settings).unwrap();
    let q = recs[0].quantile.unwrap();
    assert!(q.ci_low <= 0.0 && 0.0 <= q.ci_high);
    let qs = recs[0].quantities.unwrap();
    assert!(qs.big_n < 1e-12 && qs.diamond() < 1e-6);
}

#[test]
fn sweep_csv_contract() {
    let p = 200;
    let base = ProblemSpec::new(Spectrum::isotropic(p).unwrap(), basis(p, 1.0), 20, 0.0, 0.0, CovariateLaw::Gaussian).unwrap();
    let recs = sweep_mu_scale(&base, &[1.0, 2.0], &SweepSettings { trials: 200, ..Default::default() }).unwrap();
    assert_eq!(recs.len(), 6);
    let header = sweep_header(&recs);
    for col in [
        "mu_scale", "k", "lambda", "Lambda", "V", "DeltaV", "B", "Diamond2", "M", "N", "sigma_eta", "t", "numerator",
        "denominator", "ratio", "sqrtV", "diamond_term", "noise_term", "alpha_hat", "ci_low", "ci_high", "trials",
        "dropped", "train_residual_med", "test_error_med", "sqrt_V", "sqrt_n_diamond", "N_sqrt_V", "bound_ratio",
    ] {
        assert!(header.iter().any(|h| h == col), "missing {col}");
    }
    let dir = tempfile_dir();
    let path = dir.join("sweep.csv");
    write_sweep_csv(&path, &recs).unwrap();
    let mut rd = csv::Reader::from_path(&path).unwrap();
    assert_eq!(rd.headers().unwrap().len(), header.len());
    assert_eq!(rd.records().count(), 6);
    std::fs::remove_dir_all(dir).unwrap();
}

fn tempfile_dir() -> std::path::PathBuf {
    let d = std::env::temp_dir().join(format!("ridgemargin-drivers-{}", std::process::id()));
    std::fs::create_dir_all(&d).unwrap();
    d
}

#[test]
fn phase_scan_row_count() {
    let recs = phase_scan(&[0.3, 0.5, 0.75, 0.95], 0.5, 1.5, &[100, 1000], None).unwrap();
    assert_eq!(recs.len(), 8);
    assert!(recs.iter().all(|r| r.extra("muthukumar_ratio").unwrap() > 0.0));
}

#[test]
fn head_block_events_concentrate() {
    let p = 2000;
    let problem = ProblemSpec::new(Spectrum::isotropic(p).unwrap(), basis(p, 1.0), 100, 0.0, 0.0, CovariateLaw::Gaussian).unwrap();
    let reports = event_trials(&problem, 5, 100, 13).unwrap();
    let good = reports.iter().filter(|r| r.cb_measured <= 4.0).count();
    assert!(good >= 95, "{good}");
    assert!(reports.iter().all(|r| r.b1.is_some() && r.b4.is_some()));
}

#[test]
fn rademacher_covariates_run_end_to_end() {
    let p = 300;
    let problem = ProblemSpec::new(Spectrum::isotropic(p).unwrap(), basis(p, 4.0), 30, 0.1, 0.0, CovariateLaw::Rademacher).unwrap();
    let q = estimate_quantile(&problem, 0.25, 40, 1).unwrap();
    assert!(q.alpha_hat.is_finite());
}
