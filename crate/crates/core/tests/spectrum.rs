use prland_core::dynamics::init_random;
use prland_core::linalg::{dot, norm, symmetric_eigenvalues, weighted_gram, Extreme};
use prland_core::model::{curvature_weights, gradient, Instance, LossSpec};
use prland_core::spectrum::{
    empirical_density, extreme_eigenpair, full_spectrum, hessian_dense, hessian_times_vector,
    mu_shift, HessianOperator, DENSE_LIMIT,
};
use prland_core::stats::ks_distance;
use prland_core::Error;
use proptest::prelude::*;

/// Marchenko-Pastur CDF for `sum x x^T` with `alpha = M/N >= 1`, entries of
/// variance `1/N`, by a fine midpoint sum.
fn mp_cdf(alpha: f64) -> impl Fn(f64) -> f64 {
    let (lo, hi) = ((alpha.sqrt() - 1.0).powi(2), (alpha.sqrt() + 1.0).powi(2));
    let n = 20_000;
    let h = (hi - lo) / n as f64;
    let mut xs = vec![lo];
    let mut cs = vec![0.0];
    let mut acc = 0.0;
    for k in 0..n {
        let x = lo + (k as f64 + 0.5) * h;
        acc += h * ((hi - x) * (x - lo)).sqrt() / (2.0 * std::f64::consts::PI * x);
        xs.push(lo + (k + 1) as f64 * h);
        cs.push(acc);
    }
    move |x| prland_core::stats::interpolate(&xs, &cs, x) / acc
}

fn setup(n: usize, alpha: f64, a: f64, seed: u64) -> (LossSpec, Instance, Vec<f64>) {
    let spec = LossSpec::new(a).unwrap();
    let inst = Instance::generate(n, alpha, seed).unwrap();
    let w = init_random(n, seed + 1).unwrap();
    (spec, inst, w)
}

#[test]
fn wishart_edges_and_histogram() {
    let n = 2048;
    let inst = Instance::generate(n, 4.0, 3).unwrap();
    let ones = vec![1.0; inst.m()];
    let eig = symmetric_eigenvalues(weighted_gram(inst.sensing(), inst.m(), n, &ones).unwrap()).unwrap();
    assert!((eig[0] - 1.0).abs() < 0.05, "{}", eig[0]);
    assert!((eig[n - 1] - 9.0).abs() < 0.05 * 9.0, "{}", eig[n - 1]);
    let d = ks_distance(&eig, mp_cdf(4.0)).unwrap();
    assert!(d <= 0.05, "K-S {d}");
    let hist = empirical_density(&eig, 60).unwrap();
    assert!((hist.integral() - 1.0).abs() < 1e-12);
}

#[test]
fn dense_hessian_structure() {
    let (spec, inst, w) = setup(48, 3.1, 0.01, 1);
    let h = hessian_dense(&spec, &inst, &w, true).unwrap();
    assert!(h.is_symmetric());
    let mu = mu_shift(&spec, &inst, &w).unwrap();
    let f = curvature_weights(&spec, &inst, &w).unwrap();
    let expect: f64 = (0..inst.m())
        .map(|i| 0.5 * f[i] * dot(inst.sensing_row(i), inst.sensing_row(i)))
        .sum::<f64>()
        - 48.0 * mu;
    let eig = symmetric_eigenvalues(h.clone()).unwrap();
    let sum: f64 = eig.iter().sum();
    assert!((sum - expect).abs() <= 1e-10 * expect.abs().max(1.0));
    assert!((h.trace() - expect).abs() <= 1e-10 * expect.abs().max(1.0));
    let unshifted = symmetric_eigenvalues(hessian_dense(&spec, &inst, &w, false).unwrap()).unwrap();
    let scale = eig.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for (a, b) in unshifted.iter().zip(&eig) {
        assert!((a - mu - b).abs() <= 1e-10 * scale);
    }
}

#[test]
fn dense_guard() {
    let inst = Instance::generate(DENSE_LIMIT + 1, 0.001, 0).unwrap();
    let w = vec![1.0; DENSE_LIMIT + 1];
    let spec = LossSpec::new(1.0).unwrap();
    assert!(matches!(
        hessian_dense(&spec, &inst, &w, true),
        Err(Error::ResourceLimit { .. })
    ));
}

#[test]
fn hessian_vector_matches_gradient_difference() {
    for &(a, seed) in &[(0.01, 1u64), (0.1, 2), (1.0, 3)] {
        let (spec, inst, w) = setup(40, 3.0, a, seed);
        let u = init_random(40, seed + 50).unwrap();
        let hu = hessian_times_vector(&spec, &inst, &w, &u).unwrap();
        let mu = mu_shift(&spec, &inst, &w).unwrap();
        let eps = 1e-6;
        let shift = |s: f64| -> Vec<f64> { w.iter().zip(&u).map(|(wi, ui)| wi + s * ui).collect() };
        let gp = gradient(&spec, &inst, &shift(eps)).unwrap();
        let gm = gradient(&spec, &inst, &shift(-eps)).unwrap();
        let fd: Vec<f64> = gp
            .iter()
            .zip(&gm)
            .zip(&u)
            .map(|((p, m), ui)| (p - m) / (2.0 * eps) - mu * ui)
            .collect();
        let err: f64 = fd.iter().zip(&hu).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
        assert!(err <= 1e-5 * norm(&hu), "a={a}: {err} vs {}", norm(&hu));
    }
}

#[test]
fn extreme_pairs_match_dense() {
    let (spec, inst, w) = setup(300, 3.1, 0.01, 4);
    let rep = full_spectrum(&spec, &inst, &w).unwrap();
    let op = HessianOperator::new(&spec, &inst, &w, true).unwrap();
    let check = |which: Extreme, expect: f64| {
        let p = extreme_eigenpair(&spec, &inst, &w, which, 1e-10).unwrap();
        assert!((p.value - expect).abs() <= 1e-8, "{which:?}: {} vs {expect}", p.value);
        let mut hv = vec![0.0; 300];
        op.apply(&p.vector, &mut hv);
        let r: f64 = hv.iter().zip(&p.vector).map(|(h, v)| (h - p.value * v).powi(2)).sum::<f64>().sqrt();
        assert!(r <= 1e-10 * p.value.abs().max(1.0));
        assert!((norm(&p.vector) - 1.0).abs() < 1e-12);
    };
    check(Extreme::Smallest, rep.eigenvalues[0]);
    check(Extreme::Largest, rep.eigenvalues[299]);
    // Dense eigenvector quality.
    let mut hv = vec![0.0; 300];
    op.apply(&rep.v_min, &mut hv);
    let r: f64 = hv.iter().zip(&rep.v_min).map(|(h, v)| (h - rep.lambda_min * v).powi(2)).sum::<f64>().sqrt();
    assert!(r <= 1e-8 * rep.lambda_min.abs().max(1.0));
}

#[test]
fn report_invariants_and_global_minimum() {
    let (spec, inst, _) = setup(256, 3.1, 0.01, 6);
    let rep = full_spectrum(&spec, &inst, inst.signal()).unwrap();
    let scale = rep.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    assert!(rep.lambda_min >= -1e-6 * scale, "{}", rep.lambda_min);
    assert_eq!(rep.lambda_min, rep.eigenvalues[0]);
    assert!(rep.eigenvalues.windows(2).all(|p| p[0] <= p[1]));
    assert_eq!(rep.eigenvalues.len(), 256);
    assert!((0.0..=1.0 + 1e-9).contains(&rep.signal_overlap_sq));
    let ens = rep.ensemble_eigenvalues();
    assert!((ens[0] - 2.0 * (rep.lambda_min + rep.mu_shift)).abs() < 1e-12);
}

#[test]
fn rank_one_smallest_pair() {
    let x = vec![0.6, -0.2, 0.1];
    let inst = Instance::from_parts(3, vec![1.0, 1.0, 1.0], x.clone(), 0).unwrap();
    let spec = LossSpec::new(1.0).unwrap();
    // yhat = 0.6 > 0 with y = 0.5: f > 0, so the smallest eigenvalue is -mu.
    let w = vec![1.0, 1.0, 1.0];
    let f = curvature_weights(&spec, &inst, &w).unwrap()[0];
    let rep = full_spectrum(&spec, &inst, &w).unwrap();
    let mu = rep.mu_shift;
    let top = 0.5 * f * dot(&x, &x) - mu;
    if f > 0.0 {
        assert!((rep.eigenvalues[2] - top).abs() < 1e-12);
        assert!((rep.lambda_min + mu).abs() < 1e-12);
    } else {
        assert!((rep.lambda_min - top).abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]
    #[test]
    fn operator_linear_and_zero(seed in 0u64..500, c in -3.0f64..3.0) {
        let (spec, inst, w) = setup(24, 2.5, 0.1, seed);
        let u = init_random(24, seed + 3).unwrap();
        let v = init_random(24, seed + 4).unwrap();
        let z = hessian_times_vector(&spec, &inst, &w, &[0.0; 24]).unwrap();
        prop_assert!(z.iter().all(|x| *x == 0.0));
        let comb: Vec<f64> = u.iter().zip(&v).map(|(a, b)| a + c * b).collect();
        let hu = hessian_times_vector(&spec, &inst, &w, &u).unwrap();
        let hv = hessian_times_vector(&spec, &inst, &w, &v).unwrap();
        let hc = hessian_times_vector(&spec, &inst, &w, &comb).unwrap();
        let scale = norm(&hu) + c.abs() * norm(&hv);
        for k in 0..24 {
            prop_assert!((hc[k] - hu[k] - c * hv[k]).abs() <= 1e-12 * scale);
        }
    }
}
