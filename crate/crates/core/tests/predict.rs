use nalgebra::{DMatrix, DVector};
use qmgp::covariance::CovParams;
use qmgp::data::Dataset;
use qmgp::gibbs::{run_chain, McmcConfig, PriorSpec, WStorage};
use qmgp::mgp::{GeometryConfig, MeshedModel};
use qmgp::predict::{effective_sample_size, fill_missing, kriging_mean, metrics, predict_at, PredRow, Target};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn row(mean: f64, lower: f64, upper: f64) -> PredRow {
    PredRow {
        loc: 0,
        var: 0,
        mean,
        sd: 0.0,
        lower,
        upper,
        n_draws: 1,
    }
}

#[test]
fn metrics_trivial_cases() {
    let truth = [1.0, -2.0, 0.5];
    let perfect: Vec<PredRow> = truth.iter().map(|&t| row(t, t, t)).collect();
    let m = metrics(&perfect, &truth, &[true; 3]).unwrap();
    assert_eq!((m.mae, m.rmse, m.coverage), (0.0, 0.0, 1.0));
    let shifted: Vec<PredRow> = truth.iter().map(|&t| row(t + 0.7, t + 0.1, t + 1.0)).collect();
    let m = metrics(&shifted, &truth, &[true; 3]).unwrap();
    assert!((m.mae - 0.7).abs() < 1e-15 && (m.rmse - 0.7).abs() < 1e-15);
    assert_eq!(m.coverage, 0.0);
    assert!(metrics(&shifted, &truth, &[false; 3]).is_err());
}

#[test]
fn metrics_match_two_pass_reference() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let n = 1000;
    let truth: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
    let pred: Vec<PredRow> = truth
        .iter()
        .map(|t| {
            let m = t + rng.random_range(-1.0..1.0);
            row(m, m - 0.5, m + 0.5)
        })
        .collect();
    let mask: Vec<bool> = (0..n).map(|i| i % 3 != 0).collect();
    let m = metrics(&pred, &truth, &mask).unwrap();
    let sel: Vec<usize> = (0..n).filter(|&i| mask[i]).collect();
    let errs: Vec<f64> = sel.iter().map(|&i| pred[i].mean - truth[i]).collect();
    let mae = errs.iter().map(|e| e.abs()).sum::<f64>() / errs.len() as f64;
    let rmse = (errs.iter().map(|e| e * e).sum::<f64>() / errs.len() as f64).sqrt();
    assert!((m.mae - mae).abs() < 1e-12 && (m.rmse - rmse).abs() < 1e-12);
    assert_eq!(m.n, sel.len());
}

#[test]
fn ess_of_iid_ar1_and_constant() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let iid: Vec<f64> = (0..5000).map(|_| rng.sample(StandardNormal)).collect();
    let r = effective_sample_size(&iid).unwrap() / 5000.0;
    assert!((0.8..=1.2).contains(&r), "iid ratio {r}");

    let rho: f64 = 0.9;
    let n = 20_000;
    let mut x = 0.0;
    let ar: Vec<f64> = (0..n)
        .map(|_| {
            x = rho * x + (1.0 - rho * rho).sqrt() * rng.sample::<f64, _>(StandardNormal);
            x
        })
        .collect();
    let want = (1.0 - rho) / (1.0 + rho);
    let r = effective_sample_size(&ar).unwrap() / n as f64;
    assert!((r - want).abs() <= 0.3 * want, "AR(1) ratio {r} vs {want}");

    assert_eq!(effective_sample_size(&[3.0; 200]).unwrap(), 1.0);
    assert!(effective_sample_size(&[0.0; 50]).is_err());
}

/// Small fully-observed problem with θ, β and τ² fixed.
fn fitted(intervals: Vec<usize>, n_iter: usize) -> (MeshedModel, qmgp::gibbs::ChainOutput, CovParams, Dataset) {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let n = 40;
    let coords: Vec<f64> = (0..2 * n).map(|_| rng.random_range(0.0..1.0)).collect();
    let y: Vec<Option<f64>> = (0..n)
        .map(|i| Some((coords[2 * i] * 4.0).sin() + rng.random_range(-0.2..0.2)))
        .collect();
    let data = Dataset::univariate(2, coords, y).unwrap();
    let theta = CovParams::exponential(1.0, 3.0);
    let mut pri = PriorSpec::default_for(0, 1, &theta);
    pri.theta_fixed = vec![true; 2];
    pri.tau2_fixed = true;
    pri.a_tau = vec![3.0];
    pri.b_tau = vec![0.2];
    let mm = MeshedModel::build(&data, &GeometryConfig::new(intervals)).unwrap();
    let cfg = McmcConfig {
        n_iter,
        n_burn: 100,
        seed: 9,
        storage: WStorage::Full,
        ..McmcConfig::default()
    };
    let out = run_chain(&mm, &pri, &cfg, theta.clone()).unwrap();
    (mm, out, theta, data)
}

#[test]
fn predictions_at_modeled_locations_reuse_the_chain() {
    let (mm, out, theta, data) = fitted(vec![2, 2], 600);
    let res = predict_at(&mm, &out, &theta, &data, Target::Mean, 0.95, 1).unwrap();
    for (i, r) in res.rows.iter().enumerate() {
        assert!((r.mean - out.w_summary.mean[i]).abs() < 1e-10);
        assert_eq!(r.n_draws, 500);
        assert!(r.lower <= r.mean && r.mean <= r.upper && r.sd >= 0.0);
    }
    let wide = predict_at(&mm, &out, &theta, &data, Target::Response, 0.99, 1).unwrap();
    let narrow = predict_at(&mm, &out, &theta, &data, Target::Response, 0.95, 1).unwrap();
    for (a, b) in wide.rows.iter().zip(&narrow.rows) {
        assert!(a.lower <= b.lower && b.upper <= a.upper);
    }
    let filled = fill_missing(&mm, &out, 0.95);
    assert_eq!(filled.rows.len(), data.n());
}

#[test]
fn new_location_mean_matches_kriging_oracle() {
    let (mm, out, theta, data) = fitted(vec![1, 1], 4100);
    let new_locs = [0.33, 0.61, 0.8, 0.15, 0.05, 0.97];
    let query = Dataset::univariate(2, new_locs.to_vec(), vec![None; 3]).unwrap();
    let res = predict_at(&mm, &out, &theta, &query, Target::Mean, 0.95, 2).unwrap();

    // exact posterior of w at the data under the base GP (single region)
    let n = data.n();
    let obs: Vec<usize> = (0..n).collect();
    let c = qmgp::covariance::block_cov_sym(&data.coords, 2, &obs, &theta)
        + DMatrix::identity(n, n) * qmgp::mgp::moments::base_jitter(&theta);
    let tau2 = out.final_state.tau2[0];
    let y = DVector::from_iterator(n, data.y.iter().copied());
    let post_prec = c.clone().try_inverse().unwrap() + DMatrix::identity(n, n) / tau2;
    let post_mean = post_prec.clone().try_inverse().unwrap() * (&y / tau2);
    let mut all = data.coords.clone();
    all.extend_from_slice(&new_locs);
    let want = kriging_mean(&all, 2, &obs, &[n, n + 1, n + 2], &post_mean, &theta).unwrap();

    let draws = out.w_draws.as_ref().unwrap();
    for k in 0..3 {
        // Monte Carlo error of the mean of the predictive draws
        let xs: Vec<f64> = draws
            .iter()
            .map(|w| kriging_mean(&all, 2, &obs, &[n + k], &DVector::from_column_slice(w), &theta).unwrap()[0])
            .collect();
        let ess = effective_sample_size(&xs).unwrap();
        let m = xs.iter().sum::<f64>() / xs.len() as f64;
        let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
        let pred_sd = res.rows[k].sd;
        let se = (v / ess + pred_sd * pred_sd / xs.len() as f64).sqrt();
        assert!(
            (res.rows[k].mean - want[k]).abs() < 4.0 * se,
            "loc {k}: {} vs {} (se {se})",
            res.rows[k].mean,
            want[k]
        );
    }
}

#[test]
fn prediction_without_draws_is_an_error() {
    let (mm, mut out, theta, data) = fitted(vec![2, 2], 150);
    out.w_draws = None;
    out.w_summary = qmgp::gibbs::Summaries::new(data.n(), 4);
    assert!(predict_at(&mm, &out, &theta, &data, Target::Mean, 0.95, 1).is_err());
}
