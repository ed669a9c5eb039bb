use dl2u::dgp::{simulate_path, simulate_volatility_with, Coefficients, GaussianStream, RngSeed, Series};
use dl2u::estimator::{explosive_pair, normalized_sum_squares};
use dl2u::ks::TargetLaw;
use dl2u::montecarlo::{
    emit_histogram, histogram, pivot_samples, run_experiment, with_threads, ExperimentSpec, HistogramWindow,
};
use dl2u::sequences::{ModelParams, Regime, SequenceSpec};
use rayon::prelude::*;

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let m = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / m;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1.0);
    (mean, (var / m).sqrt())
}

#[test]
fn random_walk_variance_grows_linearly() {
    let p = ModelParams { c: 0.0, alpha: 0.0, n: 50, ..ModelParams::default() };
    assert_eq!(p.rho_n().unwrap(), 1.0);
    let ratios: Vec<f64> = (0..100_000u64)
        .into_par_iter()
        .map(|rep| {
            let path = simulate_path(&p, RngSeed::new(17, rep)).unwrap();
            path.y[p.n].powi(2) / p.n as f64
        })
        .collect();
    let (mean, se) = mean_se(&ratios);
    assert!((mean - 1.0).abs() <= 3.0 * se, "Var(y_n)/n = {mean} +- {se}");
}

#[test]
fn innovation_and_volatility_streams_are_uncorrelated() {
    let seed = RngSeed::new(99, 3);
    let eps: Vec<f64> = GaussianStream::new(seed, Series::Innovation).take(100_000).collect();
    let eta: Vec<f64> = GaussianStream::new(seed, Series::Volatility).take(100_000).collect();
    let (me, _) = mean_se(&eps);
    let (mh, _) = mean_se(&eta);
    let cov: f64 = eps.iter().zip(&eta).map(|(a, b)| (a - me) * (b - mh)).sum();
    let ve: f64 = eps.iter().map(|a| (a - me).powi(2)).sum();
    let vh: f64 = eta.iter().map(|b| (b - mh).powi(2)).sum();
    let corr = cov / (ve * vh).sqrt();
    assert!(corr.abs() <= 3.0 / (eps.len() as f64).sqrt(), "corr = {corr}");
}

#[test]
fn homoskedastic_path_matches_reference_ar1() {
    let p = ModelParams { alpha: 0.0, c: 1.0, n: 1000, kn: SequenceSpec::PowerOfN(0.25), ..ModelParams::default() };
    let seed = RngSeed::new(4, 8);
    let path = simulate_path(&p, seed).unwrap();
    let rho = p.rho_n().unwrap();
    let mut y = vec![0.0];
    for e in GaussianStream::new(seed, Series::Innovation).take(p.n) {
        let prev = *y.last().unwrap();
        y.push(rho * prev + e);
    }
    assert_eq!(path.y, y);
}

#[test]
fn third_period_variance_mean_matches_closed_form() {
    let coef = Coefficients { rho: 0.0, phi: 0.9, alpha: 0.5, y0: 0.0, z0: 0.0 };
    let draws: Vec<f64> =
        (0..1_000_000u64).into_par_iter().map(|s| simulate_volatility_with(&coef, 3, RngSeed::new(5, s))[3]).collect();
    let (mean, se) = mean_se(&draws);
    let closed = 1.361_058_219_831_25;
    assert!((mean - closed).abs() <= 3.0 * se, "{mean} +- {se}");
}

#[test]
fn normalized_sum_squares_near_its_limit() {
    let p = ModelParams { alpha: 0.0, c: 1.0, n: 100_000, kn: SequenceSpec::PowerOfN(0.25), ..ModelParams::default() };
    let scales = p.scales().unwrap();
    let values: Vec<f64> = (0..200u64)
        .into_par_iter()
        .map(|j| normalized_sum_squares(&simulate_path(&p, RngSeed::new(6, j)).unwrap(), &p, &scales).unwrap())
        .collect();
    let (mean, _) = mean_se(&values);
    assert!((mean - 0.5).abs() <= 0.05, "mean = {mean}");
}

#[test]
fn explosive_pair_second_coordinate_mean() {
    let p = ModelParams {
        c: 0.5,
        alpha: 0.5,
        n: 300,
        kn: SequenceSpec::PowerOfN(0.5),
        regime: Regime::MildlyExplosive,
        ..ModelParams::default()
    };
    let scales = p.scales().unwrap();
    let second: Vec<f64> = (0..500u64)
        .into_par_iter()
        .map(|j| explosive_pair(&simulate_path(&p, RngSeed::new(7, j)).unwrap(), &p, &scales).unwrap().1)
        .collect();
    let (mean, se) = mean_se(&second);
    assert!((mean - 1.0 / (2.0 * p.c)).abs() <= 3.0 * se, "{mean} +- {se}");
}

#[test]
fn histogram_counts_match_multinomial_expectation() {
    let law = TargetLaw::normal_two_c(1.0).unwrap();
    let sd = 2f64.sqrt();
    let sample: Vec<f64> =
        GaussianStream::new(RngSeed::new(8, 0), Series::Oracle).take(100_000).map(|z| z * sd).collect();
    let hist = histogram(&sample, law, 30, HistogramWindow::Fixed { lo: -6.0, hi: 6.0 }).unwrap();
    let m = sample.len() as f64;
    for (i, w) in hist.edges.windows(2).enumerate() {
        let p = law.cdf(w[1]) - law.cdf(w[0]);
        let expected = m * p;
        let se = (m * p * (1.0 - p)).sqrt();
        let count = hist.counts[i] as f64;
        assert!((count - expected).abs() <= 3.0 * se, "bin {i}: {count} vs {expected} +- {se}");
    }
}

#[test]
fn near_stationary_pivots_have_no_far_tails() {
    let params = ModelParams { alpha: 0.5, ..ModelParams::default() };
    let c = params.c;
    let spec = ExperimentSpec { replications: 1, ..ExperimentSpec::new(params, 9) };
    let hist = emit_histogram(&spec, 40, Some(HistogramWindow::Fixed { lo: -20.0, hi: 20.0 })).unwrap();
    let limit = 6.0 * (2.0 * c).sqrt();
    for (i, w) in hist.edges.windows(2).enumerate() {
        if w[0] >= limit || w[1] <= -limit {
            assert_eq!(hist.counts[i], 0, "bin [{}, {}]", w[0], w[1]);
        }
    }
    assert_eq!(hist.clipped, 0);
}

#[test]
fn summaries_do_not_depend_on_thread_count() {
    for regime in [Regime::NearStationary, Regime::MildlyExplosive] {
        let params = ModelParams { alpha: 0.5, n: 300, c: 0.5, regime, ..ModelParams::default() };
        let spec = ExperimentSpec { paths_per_test: 100, replications: 8, ..ExperimentSpec::new(params, 10) };
        let one = with_threads(1, || run_experiment(&spec)).unwrap().unwrap();
        let four = with_threads(4, || run_experiment(&spec)).unwrap().unwrap();
        let many = run_experiment(&spec).unwrap();
        assert_eq!(one, four);
        assert_eq!(one, many);
    }
}

#[test]
fn pivots_match_serial_replay() {
    let params = ModelParams { alpha: 0.5, n: 300, ..ModelParams::default() };
    let spec = ExperimentSpec { paths_per_test: 50, replications: 3, ..ExperimentSpec::new(params, 11) };
    let parallel = pivot_samples(&spec, 2).unwrap();
    let serial: Vec<f64> = (0..50)
        .map(|j| {
            let path = simulate_path(&params, spec.path_seed(2, j)).unwrap();
            let ols = dl2u::estimator::ols_path(&path).unwrap();
            dl2u::estimator::pivot(&ols, &params).unwrap().value
        })
        .collect();
    assert_eq!(parallel, serial);
}
