use prland_core::model::{
    curvature_weights, gradient, total_loss, Instance, LossSpec, SensingNorm,
};
use prland_core::Error;
use proptest::prelude::*;

fn random_state(n: usize, seed: u64) -> Vec<f64> {
    prland_core::dynamics::init_random(n, seed).unwrap()
}

#[test]
fn loss_pair_examples() {
    let s = LossSpec::new(1.0).unwrap();
    assert_eq!(s.loss(1.0, 1.0).unwrap(), 0.0);
    assert_eq!(s.loss(1.0, -1.0).unwrap(), 0.0);
    assert_eq!(s.loss(1.0, 0.0).unwrap(), 0.5);
    assert_eq!(s.curvature(0.0, 0.0).unwrap(), 0.0);
    assert!((s.curvature(0.0, 1.0).unwrap() - 12.0).abs() < 1e-12);
    assert!((s.curvature(1.0, 0.0).unwrap() + 2.0).abs() < 1e-12);
    let z = LossSpec::new(0.0).unwrap();
    assert!(matches!(z.loss(0.0, 1.0), Err(Error::DivisionByZero { .. })));
    assert!(z.loss(0.5, 1.0).is_ok());
}

#[test]
fn curvature_matches_second_difference_on_grid() {
    let h = 1e-4;
    for a in [0.01, 0.1, 1.0] {
        let s = LossSpec::new(a).unwrap();
        for i in 0..=24 {
            for j in 0..=24 {
                let y = -3.0 + 0.25 * i as f64;
                let yh = -3.0 + 0.25 * j as f64;
                let fd = (s.loss(y, yh + h).unwrap() - 2.0 * s.loss(y, yh).unwrap() + s.loss(y, yh - h).unwrap()) / (h * h);
                let f = s.curvature(y, yh).unwrap();
                // The loss is a quartic in yhat, so the second difference is
                // exact up to rounding and an O(h^2) term 2 h^2 / (a + y^2).
                let scale = f.abs().max(4.0 / (a + y * y));
                assert!((fd - f).abs() <= 1e-5 * scale, "a={a} y={y} yhat={yh}: {fd} vs {f}");
            }
        }
    }
}

#[test]
fn instance_examples() {
    let inst = Instance::generate(2, 0.5, 7).unwrap();
    assert_eq!(inst.m(), 1);
    let n2: f64 = inst.signal().iter().map(|v| v * v).sum();
    assert!((n2.sqrt() - 2f64.sqrt()).abs() < 1e-12 * 2f64.sqrt());

    let inst = Instance::generate(1024, 3.1, 1).unwrap();
    assert_eq!(inst.m(), 3174);
    // Mean row norm over 1e4 rows.
    let big = Instance::generate(1024, 10_000.0 / 1024.0, 2).unwrap();
    let norms: Vec<f64> = (0..big.m())
        .map(|i| big.sensing_row(i).iter().map(|v| v * v).sum())
        .collect();
    let (mean, std) = prland_core::stats::mean_std(&norms);
    assert!((mean - 1.0).abs() < 3.0 * std / (norms.len() as f64).sqrt());

    let a = Instance::generate(64, 2.0, 9).unwrap();
    let b = Instance::generate(64, 2.0, 9).unwrap();
    assert_eq!(a, b);
    for (i, &l) in a.labels().iter().enumerate() {
        let p = prland_core::linalg::dot(a.sensing_row(i), a.signal());
        assert_eq!(l, p.abs());
    }
    assert!(matches!(Instance::generate(0, 1.0, 0), Err(Error::InvalidArgument(_))));
    assert!(matches!(Instance::generate(8, -1.0, 0), Err(Error::InvalidArgument(_))));
}

#[test]
fn exact_unit_rows_flag() {
    let inst = Instance::generate_with(32, 2.0, 3, SensingNorm::ExactUnit).unwrap();
    for i in 0..inst.m() {
        let n: f64 = inst.sensing_row(i).iter().map(|v| v * v).sum();
        assert!((n - 1.0).abs() < 1e-12);
    }
}

#[test]
fn total_loss_examples() {
    let s = LossSpec::new(0.1).unwrap();
    let inst = Instance::generate(4, 0.75, 5).unwrap();
    let star = inst.signal().to_vec();
    assert!(total_loss(&s, &inst, &star).unwrap() < 1e-28);
    let neg: Vec<f64> = star.iter().map(|v| -v).collect();
    assert!(total_loss(&s, &inst, &neg).unwrap() < 1e-28);
    let w = random_state(4, 1);
    let mut brute = 0.0;
    for i in 0..inst.m() {
        let yh: f64 = inst.sensing_row(i).iter().zip(&w).map(|(x, v)| x * v).sum();
        brute += 0.5 * s.loss(inst.labels()[i], yh).unwrap();
    }
    assert!((total_loss(&s, &inst, &w).unwrap() - brute).abs() <= 1e-14 * brute);
    assert!(gradient(&s, &inst, &star).unwrap().iter().all(|g| g.abs() < 1e-14));
    assert!(matches!(total_loss(&s, &inst, &[0.0; 3]), Err(Error::DimensionMismatch { .. })));
}

proptest! {
    #[test]
    fn loss_even_and_nonnegative(a in 0.001f64..2.0, y in -4.0f64..4.0, yh in -4.0f64..4.0) {
        let s = LossSpec::new(a).unwrap();
        let l = s.loss(y, yh).unwrap();
        prop_assert!(l >= 0.0);
        prop_assert_eq!(l, s.loss(y, -yh).unwrap());
        prop_assert_eq!(l, s.loss(-y, yh).unwrap());
        prop_assert_eq!(s.loss(y, y).unwrap(), 0.0);
        prop_assert_eq!(s.loss(y, -y).unwrap(), 0.0);
    }

    #[test]
    fn gradient_matches_finite_differences(n in 2usize..=16, alpha in 0.5f64..4.0, seed in 0u64..1000, a in prop::sample::select(vec![0.01, 0.1, 1.0])) {
        let s = LossSpec::new(a).unwrap();
        let inst = Instance::generate(n, alpha, seed).unwrap();
        let w = random_state(n, seed + 1);
        let g = gradient(&s, &inst, &w).unwrap();
        let gnorm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        let h = 1e-5;
        for k in 0..n {
            let mut p = w.clone();
            let mut m = w.clone();
            p[k] += h;
            m[k] -= h;
            let fd = (total_loss(&s, &inst, &p).unwrap() - total_loss(&s, &inst, &m).unwrap()) / (2.0 * h);
            prop_assert!((fd - g[k]).abs() <= 1e-6 * gnorm.max(1e-3), "coord {}: {} vs {}", k, fd, g[k]);
        }
    }

    #[test]
    fn loss_even_in_state_and_gradient_odd(n in 2usize..=32, seed in 0u64..1000) {
        let s = LossSpec::new(0.01).unwrap();
        let inst = Instance::generate(n, 2.0, seed).unwrap();
        let w = random_state(n, seed + 7);
        let neg: Vec<f64> = w.iter().map(|v| -v).collect();
        prop_assert_eq!(total_loss(&s, &inst, &w).unwrap(), total_loss(&s, &inst, &neg).unwrap());
        let g = gradient(&s, &inst, &w).unwrap();
        let gn = gradient(&s, &inst, &neg).unwrap();
        prop_assert!(g.iter().zip(&gn).all(|(a, b)| *a == -*b));
        prop_assert_eq!(curvature_weights(&s, &inst, &w).unwrap(), curvature_weights(&s, &inst, &neg).unwrap());
    }
}
