use num_complex::Complex64;
use prland_core::model::LossSpec;
use prland_core::rmt::{
    bbp_alpha, bulk_density, crossing_time, dynamical_bbp, left_edge, left_edge_measure, outlier,
    outlier_measure, overlap_curve, right_edge_measure, stieltjes_at, support_grid,
    JointLabelDensity, Kernel, SpectralMeasure,
};
use prland_core::Error;
use rand_chacha::rand_core::SeedableRng;
use rand_distr::{Distribution, StandardNormal};

fn curv(a: f64) -> Kernel {
    Kernel::Curvature(LossSpec::new(a).unwrap())
}

fn init(a: f64) -> JointLabelDensity {
    JointLabelDensity::analytic_init(a)
}

fn mp_density(alpha: f64, x: f64) -> f64 {
    let (lo, hi) = ((alpha.sqrt() - 1.0).powi(2), (alpha.sqrt() + 1.0).powi(2));
    if x <= lo || x >= hi {
        return 0.0;
    }
    ((hi - x) * (x - lo)).sqrt() / (2.0 * std::f64::consts::PI * x)
}

#[test]
fn thresholds_at_initialization() {
    for (a, want) in [(0.01, 2.85), (0.1, 2.16), (1.0, 1.13)] {
        let d = init(a);
        let r = bbp_alpha(&d, curv(a)).unwrap();
        assert!((r.alpha - want).abs() <= 0.02, "a={a}: {}", r.alpha);
        // Edge consistency at the returned ratio.
        let m = SpectralMeasure::new(&d, curv(a)).unwrap();
        assert!((r.lambda_star - r.lambda_minus).abs() <= 1e-6 * m.scale(r.alpha));
        // Overlap vanishes continuously at the transition.
        let o = outlier(&d, curv(a), r.alpha * (1.0 + 1e-6)).unwrap();
        assert!(o.exists && o.overlap_sq < 0.02, "overlap at threshold {}", o.overlap_sq);
        let below = outlier(&d, curv(a), r.alpha * 0.99).unwrap();
        assert!(!below.exists);
    }
}

#[test]
fn wishart_oracles() {
    let d = init(1.0);
    let k = Kernel::Constant(1.0);
    let grid: Vec<f64> = (1..400).map(|i| 1.0 + 8.0 * i as f64 / 400.0).collect();
    let bulk = bulk_density(&d, k, 4.0, &grid, 1e-9).unwrap();
    for &(x, rho) in &bulk.density {
        if x > 1.1 && x < 8.9 {
            assert!((rho - mp_density(4.0, x)).abs() <= 1e-3, "x={x}: {rho}");
        }
    }
    assert!((bulk.left_edge_lambda - 1.0).abs() < 1e-6);
    let m = SpectralMeasure::new(&d, k).unwrap();
    let full = support_grid(&m, 4.0, 2000).unwrap();
    let b = bulk_density(&d, k, 4.0, &full, 1e-9).unwrap();
    assert!((b.mass() - 1.0).abs() < 1e-3, "mass {}", b.mass());
    // Nothing below the edge.
    let below: Vec<f64> = (0..20).map(|i| 0.05 * i as f64).collect();
    let bb = bulk_density(&d, k, 4.0, &below, 1e-9).unwrap();
    assert!(bb.density.iter().all(|p| p.1 <= 1e-4));
    // Stieltjes-density consistency off the axis.
    for z in [Complex64::new(3.0, 0.5), Complex64::new(0.5, 0.2), Complex64::new(12.0, 1.0)] {
        let s = stieltjes_at(&d, k, 4.0, z).unwrap();
        let mut acc = Complex64::new(0.0, 0.0);
        for w in b.density.windows(2) {
            let (x0, r0) = w[0];
            let (x1, r1) = w[1];
            let xm = 0.5 * (x0 + x1);
            acc += (z - xm).inv() * (0.5 * (r0 + r1) * (x1 - x0));
        }
        assert!((acc - s).norm() <= 1e-2 * s.norm(), "{z}: {acc} vs {s}");
    }
}

#[test]
fn stieltjes_limits() {
    let d = init(0.1);
    let z = Complex64::new(2.0, 0.7);
    let s = stieltjes_at(&d, curv(0.1), 1e-9, z).unwrap();
    assert!((s - z.inv()).norm() < 1e-6);
    let big = Complex64::new(1e6, 1.0);
    let s = stieltjes_at(&d, curv(0.1), 3.0, big).unwrap();
    assert!((s * big - 1.0).norm() < 1e-3);
    assert!(s.im <= 0.0);
}

#[test]
fn constant_weight_scales_wishart() {
    let d = init(0.3);
    for (c, alpha) in [(2.5f64, 4.0f64), (0.3, 9.0), (1.7, 1.5)] {
        let m = SpectralMeasure::new(&d, Kernel::Constant(c)).unwrap();
        let lo = c * (1.0 - alpha.sqrt()).powi(2);
        let hi = c * (1.0 + alpha.sqrt()).powi(2);
        let e = left_edge_measure(&m, alpha).unwrap();
        assert!((e.lambda_minus - lo).abs() <= 1e-6 * lo, "{} vs {lo}", e.lambda_minus);
        let r = right_edge_measure(&m, alpha).unwrap();
        assert!((r - hi).abs() <= 1e-6 * hi);
        assert!(!outlier_measure(&m, alpha).unwrap().exists);
    }
    let e = left_edge(&d, Kernel::Constant(1.0), 1.0).unwrap();
    assert!(e.lambda_minus.abs() < 1e-6);
}

#[test]
fn random_state_bulk_and_outliers() {
    let d = init(0.01);
    let m = SpectralMeasure::new(&d, curv(0.01)).unwrap();
    let grid = support_grid(&m, 3.1, 2000).unwrap();
    let b = bulk_density(&d, curv(0.01), 3.1, &grid, 1e-6 * m.scale(3.1)).unwrap();
    assert!((b.mass() - 1.0).abs() < 1e-3, "mass {}", b.mass());
    assert!(b.density.iter().all(|p| p.1 >= 0.0));

    assert!(!outlier(&init(1.0), curv(1.0), 1.0).unwrap().exists);
    let o = outlier(&init(1.0), curv(1.0), 10.0).unwrap();
    assert!(o.exists && o.lambda_star < o.left_edge.lambda_minus);
    assert!((0.0..=1.0).contains(&o.overlap_sq));
    assert!((o.overlap_sq - o.overlap_sq_analytic).abs() < 1e-4, "{} vs {}", o.overlap_sq, o.overlap_sq_analytic);
}

#[test]
fn overlap_curve_shape() {
    let d = init(0.01);
    let alphas: Vec<f64> = (0..30).map(|i| 1.0 + 0.25 * i as f64).collect();
    let curve = overlap_curve(&d, curv(0.01), &alphas).unwrap();
    for &(a, o) in &curve {
        if a < 2.84 {
            assert_eq!(o, 0.0, "alpha {a}");
        }
    }
    let above: Vec<f64> = curve.iter().filter(|p| p.0 > 2.86).map(|p| p.1).collect();
    assert!(above.windows(2).all(|p| p[1] > p[0]), "{above:?}");
    let far = overlap_curve(&d, curv(0.01), &[1000.0]).unwrap();
    assert!(far[0].1 > 0.95, "{}", far[0].1);
    assert!(overlap_curve(&d, curv(0.01), &[3.0, 2.0]).is_err());
}

#[test]
fn empirical_route_matches_analytic_at_initialization() {
    let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(5);
    let mut sampler = |_t: f64| -> prland_core::Result<Vec<(f64, f64)>> {
        Ok((0..200_000)
            .map(|_| {
                let y: f64 = StandardNormal.sample(&mut rng);
                let yh: f64 = StandardNormal.sample(&mut rng);
                (y, yh)
            })
            .collect())
    };
    let curve = dynamical_bbp(curv(0.01), &[0.0], &mut sampler).unwrap();
    assert!((curve[0].1 - 2.85).abs() < 0.05, "{}", curve[0].1);
    let few = JointLabelDensity::Empirical { pairs: vec![(1.0, 0.5); 100] };
    assert!(matches!(bbp_alpha(&few, curv(0.01)), Err(Error::Precision(_))));
    let synthetic = [(0.0, 2.85), (1.0, 3.5), (2.0, 3.9)];
    let t = crossing_time(&synthetic, 3.57).unwrap();
    assert!((t - 1.175).abs() < 1e-12);
}
