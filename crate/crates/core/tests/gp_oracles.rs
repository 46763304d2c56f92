mod common;

use common::*;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::Rng;
use rand_distr::StandardNormal;
use thermacal::gp::*;

#[test]
fn gram_matches_double_loop_and_is_exactly_symmetric() {
    let mut r = rng(1);
    for _ in 0..20 {
        let h = random_hyper(&mut r);
        let n = 5 + r.gen_range(0..20);
        let x = random_points(&mut r, n);
        let g = gram_naive(&x, &h).unwrap();
        let oracle = dense_gram(&x, &h);
        for i in 0..x.len() {
            for j in 0..x.len() {
                assert_eq!(g.get(i, j), g.get(j, i));
                assert!(rel_err(g.get(i, j), oracle[(i, j)]) < 1e-14);
            }
        }
    }
}

#[test]
fn gram_of_duplicates() {
    let h = Hyperparams::new([1.0, 2.0, 3.0, 0.1], 0.3, 0.2).unwrap();
    let p = [0.1, 0.2, 0.7, 20.0];
    let g = gram_naive(&[p, p], &h).unwrap();
    let (s, n) = (h.signal_var(), h.noise_var());
    assert_eq!(g.data, vec![s + n, s, s, s + n]);
}

#[test]
fn gram_eigenvalues_bounded_below_by_noise() {
    let mut r = rng(2);
    for n in [2, 10, 30, 50] {
        for _ in 0..5 {
            let h = random_hyper(&mut r);
            let x = random_points(&mut r, n);
            let g = gram_naive(&x, &h).unwrap();
            let m = DMatrix::from_row_slice(n, n, &g.data);
            let min = m.symmetric_eigenvalues().min();
            assert!(
                min >= h.noise_var() * (1.0 - 1e-8),
                "n={n}: {min} < {}",
                h.noise_var()
            );
        }
    }
}

#[test]
fn factor_reconstructs_gram() {
    let mut r = rng(3);
    let h = random_hyper(&mut r);
    let set = random_set(&mut r, 20);
    let gp = fit(&set, &h, 0.0).unwrap();
    let l = gp.cholesky().to_dense();
    let g = dense_gram(&set.x, &h);
    let scale = g.amax();
    for i in 0..20 {
        assert!(l.get(i, i) > 0.0);
        for j in 0..20 {
            let v: f64 = (0..20).map(|k| l.get(i, k) * l.get(j, k)).sum();
            assert!((v - g[(i, j)]).abs() <= 1e-8 * scale);
            if j > i {
                assert_eq!(l.get(i, j), 0.0);
            }
        }
    }
}

#[test]
fn scalar_fit_closed_form() {
    let h = Hyperparams::new([1.0; 4], 0.4, 0.3).unwrap();
    let set = TrainingSet::new(vec![[0.1, 0.0, 0.8, 15.0]], vec![0.7]).unwrap();
    let gp = fit(&set, &h, 0.0).unwrap();
    assert!((gp.alpha()[0] - 0.7 / 0.25).abs() < 1e-14);
    assert!((gp.cholesky().get(0, 0) - 0.5).abs() < 1e-15);

    let mut r = rng(4);
    let x = random_points(&mut r, 12);
    let flat = TrainingSet::new(x, vec![0.02; 12]).unwrap();
    let gp = fit(&flat, &random_hyper(&mut r), 0.02).unwrap();
    assert!(gp.alpha().iter().all(|a| *a == 0.0));
}

#[test]
fn predictions_match_explicit_inverse() {
    let mut r = rng(5);
    for n in [1, 2, 3, 15, 40] {
        let h = random_hyper(&mut r);
        let set = random_set(&mut r, n);
        let mean_const = r.gen_range(-0.01..0.01);
        let gp = fit(&set, &h, mean_const).unwrap();
        let q = random_points(&mut r, 25);
        let p = gp.predict(&q).unwrap();
        let (mean, var) = dense_predict(&set, &h, mean_const, &q);
        let tol = if n <= 3 { 1e-10 } else { 1e-8 * h.prior_var() };
        for j in 0..q.len() {
            assert!(
                (p.mean[j] - mean[j]).abs() < tol,
                "n={n} mean {} vs {}",
                p.mean[j],
                mean[j]
            );
            assert!((p.variance[j] - var[j].max(0.0)).abs() < tol.max(1e-12 * h.prior_var()));
        }
    }
}

#[test]
fn noiseless_limit_interpolates() {
    let mut r = rng(6);
    let set = random_set(&mut r, 30);
    let h = Hyperparams::new([8.0, 8.0, 8.0, 0.01], 0.02, 1e-6).unwrap();
    let gp = fit_with_jitter(&set, &h, 0.0).unwrap();
    let p = gp.predict_mean(&set.x).unwrap();
    for (a, b) in p.iter().zip(&set.y) {
        assert!((a - b).abs() < 1e-4);
    }
}

#[test]
fn far_queries_recover_the_prior() {
    let mut r = rng(7);
    let set = random_set(&mut r, 20);
    let h = Hyperparams::new([50.0, 50.0, 50.0, 1.0], 0.02, 0.004).unwrap();
    let gp = fit(&set, &h, 0.003).unwrap();
    let p = gp.predict(&[[40.0, -40.0, 30.0, 300.0]]).unwrap();
    assert!((p.mean[0] - 0.003).abs() < 1e-12);
    assert!((p.variance[0] - h.prior_var()).abs() < 1e-12);
}

#[test]
fn nlml_matches_dense_formula() {
    let mut r = rng(8);
    for _ in 0..10 {
        let h = random_hyper(&mut r);
        let set = random_set(&mut r, 10);
        let mean_const = r.gen_range(-0.01..0.01);
        let v = nlml(&set, &h, mean_const).unwrap();
        assert!(rel_err(v, dense_nlml(&set, &h, mean_const)) < 1e-9);
    }
}

#[test]
fn gradient_matches_central_differences() {
    let mut r = rng(9);
    for _ in 0..20 {
        let n = r.gen_range(2..=20);
        let h = random_hyper(&mut r);
        let set = random_set(&mut r, n);
        let theta = h.to_log();
        let g = nlml_grad(&set, &theta, 0.0).unwrap();
        let step = 1e-5;
        for k in 0..6 {
            let (mut up, mut down) = (theta, theta);
            up[k] += step;
            down[k] -= step;
            let fd = (nlml(&set, &Hyperparams::from_log(&up), 0.0).unwrap()
                - nlml(&set, &Hyperparams::from_log(&down), 0.0).unwrap())
                / (2.0 * step);
            let err = (g[k] - fd).abs() / g[k].abs().max(fd.abs()).max(1e-6);
            assert!(err < 1e-4, "component {k}: {} vs {fd}", g[k]);
        }
    }
}

#[test]
fn uninformative_dimension_has_zero_gradient() {
    let mut r = rng(10);
    let mut set = random_set(&mut r, 12);
    set.x.iter_mut().for_each(|f| f[3] = 22.0);
    let theta = random_hyper(&mut r).to_log();
    assert_eq!(nlml_grad(&set, &theta, 0.0).unwrap()[3], 0.0);
}

/// Draws `(y_1, y_2, y_*)` from the joint prior and checks that the residual
/// `y_* - mean(y)` is uncorrelated with the observations and has the
/// predicted variance.
#[test]
fn joint_gaussian_conditioning() {
    let h = Hyperparams::new([4.0, 4.0, 4.0, 0.01], 0.5, 0.2).unwrap();
    let x = vec![[0.0, 0.1, 0.6, 15.0], [0.3, -0.1, 0.7, 20.0]];
    let q = [0.15, 0.0, 0.65, 18.0];
    let all = [x[0], x[1], q];
    let joint = dense_gram(&all, &h);
    let chol = joint.cholesky().unwrap();
    let mut r = rng(11);
    let samples = 100_000;
    let (mut s_res, mut s_res2, mut s_cross) = (0.0, 0.0, [0.0; 2]);
    // The predictive mean is linear in y: fit once with unit targets.
    let weights: Vec<f64> = (0..2)
        .map(|k| {
            let mut y = vec![0.0; 2];
            y[k] = 1.0;
            let gp = fit(&TrainingSet::new(x.clone(), y).unwrap(), &h, 0.0).unwrap();
            gp.predict_mean(&[q]).unwrap()[0]
        })
        .collect();
    let var = fit(&TrainingSet::new(x.clone(), vec![0.0; 2]).unwrap(), &h, 0.0)
        .unwrap()
        .predict(&[q])
        .unwrap()
        .variance[0];
    for _ in 0..samples {
        let z = DVector::from_iterator(3, (0..3).map(|_| r.sample::<f64, _>(StandardNormal)));
        let s = chol.l() * z;
        let res = s[2] - weights[0] * s[0] - weights[1] * s[1];
        s_res += res;
        s_res2 += res * res;
        s_cross[0] += res * s[0];
        s_cross[1] += res * s[1];
    }
    let n = samples as f64;
    let sd = var.sqrt();
    assert!((s_res / n).abs() < 3.0 * sd / n.sqrt());
    // var(res * y_k) <= var * prior for independent Gaussians
    let cross_sd = (var * h.prior_var()).sqrt() / n.sqrt();
    assert!((s_cross[0] / n).abs() < 3.0 * cross_sd);
    assert!((s_cross[1] / n).abs() < 3.0 * cross_sd);
    // sample variance of a Gaussian has relative sd sqrt(2/n)
    assert!(((s_res2 / n) / var - 1.0).abs() < 3.0 * (2.0 / n).sqrt());
}

#[test]
fn optimizer_recovers_noise_level_of_a_known_process() {
    let truth = Hyperparams::new([4.0, 0.0, 0.0, 0.0], 1.0, 0.1).unwrap();
    let mut r = rng(12);
    let x: Vec<FeatureVector> = (0..50)
        .map(|_| [r.gen_range(0.0..5.0), 0.0, 0.5, 20.0])
        .collect();
    let chol = dense_gram(&x, &truth).cholesky().unwrap();
    let z = DVector::from_iterator(50, (0..50).map(|_| r.sample::<f64, _>(StandardNormal)));
    let y = (chol.l() * z).iter().copied().collect();
    let set = TrainingSet::new(x, y).unwrap();
    let init = Hyperparams::new([1.0, 0.0, 0.0, 0.0], 0.5, 0.5).unwrap();
    let out = optimize_hyper(&set, &init, &OptimizeOptions::default()).unwrap();
    assert!(out.nlml <= out.initial_nlml);
    assert!(out.warning.is_none());
    let ratio = out.hyper.sigma_y / truth.sigma_y;
    assert!(
        (0.5..=2.0).contains(&ratio),
        "sigma_y {} (ratio {ratio})",
        out.hyper.sigma_y
    );
}

#[test]
fn model_file_round_trip_preserves_predictions() {
    let mut r = rng(13);
    let set = random_set(&mut r, 25);
    let gp = fit(&set, &random_hyper(&mut r), 0.001).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.tgp");
    write_model(&gp, &path).unwrap();
    let back = read_model(&path).unwrap();
    let q = random_points(&mut r, 10);
    assert_eq!(gp.predict(&q).unwrap(), back.predict(&q).unwrap());
    assert_eq!(encode_model(&gp), encode_model(&back));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn fast_cross_kernel_matches_loop(seed in any::<u64>(), n in 1usize..12, m in 1usize..12) {
        let mut r = rng(seed);
        let h = random_hyper(&mut r);
        let a = random_points(&mut r, n);
        let b = random_points(&mut r, m);
        let fast = cross_kernel_fast(&a, &b, &h).unwrap();
        for i in 0..n {
            for j in 0..m {
                prop_assert!(rel_err(fast.get(i, j), k(&a[i], &b[j], &h)) <= 1e-8);
            }
        }
    }

    #[test]
    fn variance_within_prior_bounds(seed in any::<u64>(), n in 1usize..25) {
        let mut r = rng(seed);
        let h = random_hyper(&mut r);
        let set = random_set(&mut r, n);
        let gp = fit_with_jitter(&set, &h, 0.0).unwrap();
        let mut q = random_points(&mut r, 10);
        q.extend_from_slice(&set.x[..n.min(3)]);
        for v in gp.predict(&q).unwrap().variance {
            prop_assert!((0.0..=h.prior_var()).contains(&v));
        }
    }
}
