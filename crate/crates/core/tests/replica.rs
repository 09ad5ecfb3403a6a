use prland_core::model::LossSpec;
use prland_core::replica::{
    free_energy_1rsb, saddle_residuals, shifted_left_edge, solve_threshold_state, ReplicaQuadrature, SaddleParams,
};
use prland_core::rmt::{bulk_density, support_grid, Kernel, SpectralMeasure};

#[test]
fn threshold_state_at_alpha_four() {
    let spec = LossSpec::new(0.01).unwrap();
    let quad = ReplicaQuadrature::default();
    let st = solve_threshold_state(&spec, 4.0, quad).unwrap();
    assert!(st.converged);
    assert!((st.params.chi - 0.0954).abs() < 1e-3, "chi {}", st.params.chi);
    assert!((st.params.z - 0.263).abs() < 1e-3, "z {}", st.params.z);
    assert!(st.params.q0.abs() < 1e-6);
    let (rc, rq) = saddle_residuals(&spec, 4.0, st.params, quad).unwrap();
    assert!(rc.abs() <= 1e-4 && rq.abs() <= 1e-4);
    let edge = shifted_left_edge(&spec, 4.0, &st.evaluation.atoms).unwrap();
    assert!(edge.abs() <= 1e-4, "marginality {edge}");
    assert!(free_energy_1rsb(&spec, 4.0, st.params, quad).unwrap().is_finite());

    // The induced label density gives a normalized bulk.
    let d = st.evaluation.density();
    let m = SpectralMeasure::new(&d, Kernel::Curvature(spec)).unwrap();
    let grid = support_grid(&m, 4.0, 1500).unwrap();
    let b = bulk_density(&d, Kernel::Curvature(spec), 4.0, &grid, 1e-6 * m.scale(4.0)).unwrap();
    assert!((b.mass() - 1.0).abs() < 1e-3, "mass {}", b.mass());
}

#[test]
fn saddle_params_reject_bad_input() {
    assert!(SaddleParams::new(-1.0, 1.0, 0.0).is_err());
    assert!(SaddleParams::new(1.0, 0.0, 0.0).is_err());
    assert!(SaddleParams::new(1.0, 1.0, 1.0).is_err());
    assert!(SaddleParams::new(1.0, 1.0, f64::NAN).is_err());
}
