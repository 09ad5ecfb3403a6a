use std::path::PathBuf;

use prland::config::{Config, InitKind, StepsRule};
use prland::harness::{
    cell_seed, finite_size_extrapolate, log_scaling_study, run_sweep, run_sweep_limited, sample_threshold_pool,
    CellRecord, RecoveryTable, SweepSpec,
};
use prland::io::{decode_instance, encode_instance};
use prland_core::model::Instance;
use prland_core::stats;

fn tiny_spec(dir: PathBuf) -> SweepSpec {
    SweepSpec {
        loss_a: 0.01,
        n_list: vec![16, 24],
        alpha_grid: vec![2.0, 6.0],
        seeds_per_cell: 3,
        init: InitKind::Random,
        eta: 2e-3,
        steps_rule: "fixed:400".into(),
        t_c: 100,
        base_seed: 9,
        output_dir: dir,
    }
}

#[test]
fn extrapolation_examples() {
    let e = finite_size_extrapolate(&[(512, 4.0), (1024, 4.0), (2048, 4.0)]).unwrap();
    assert!((e.alpha_inf - 4.0).abs() < 1e-12 && e.c.abs() < 1e-9);
    let data: Vec<(usize, f64)> = [512usize, 1024, 2048, 4096].iter().map(|&n| (n, 4.03 + 7.0 / n as f64)).collect();
    let e = finite_size_extrapolate(&data).unwrap();
    assert!((e.alpha_inf - 4.03).abs() < 1e-6);
    assert!((e.c - 7.0).abs() < 1e-6);
    assert!(finite_size_extrapolate(&[(512, 4.0), (512, 4.1), (1024, 4.0)]).is_err());
}

#[test]
fn cell_seeds_are_isolated_and_stable() {
    let s = cell_seed(1, 512, 3.5, 4);
    assert_eq!(s, cell_seed(1, 512, 3.5, 4));
    assert_ne!(s, cell_seed(1, 512, 3.5, 5));
    assert_ne!(s, cell_seed(2, 512, 3.5, 4));
    assert_ne!(s, cell_seed(1, 512, 3.6, 4));
}

#[test]
fn interrupted_sweep_resumes_to_identical_table() {
    let full_dir = tempfile::tempdir().unwrap();
    let part_dir = tempfile::tempdir().unwrap();
    let full = run_sweep(&tiny_spec(full_dir.path().into())).unwrap();
    assert_eq!(full.ran, 12);
    assert!(full.incomplete.is_empty() && full.failures.is_empty());

    let spec = tiny_spec(part_dir.path().into());
    let first = run_sweep_limited(&spec, 5).unwrap();
    assert_eq!(first.ran, 5);
    assert!(!first.incomplete.is_empty());
    // Tear the last line as a crash would.
    let cells = part_dir.path().join("cells.csv");
    let text = std::fs::read_to_string(&cells).unwrap();
    let last_start = text.trim_end().rfind('\n').unwrap() + 1;
    let cut = last_start + (text.len() - last_start) / 3;
    std::fs::write(&cells, &text[..cut]).unwrap();
    let second = run_sweep(&spec).unwrap();
    assert_eq!(second.ran, 8);
    assert_eq!(second.table, full.table);
    let strip = |c: &CellRecord| (c.n, c.alpha, c.seed, c.final_m.to_bits(), c.recovered);
    let a: Vec<_> = second.cells.iter().map(strip).collect();
    let b: Vec<_> = full.cells.iter().map(strip).collect();
    assert_eq!(a, b);
    // Nothing left to do.
    assert_eq!(run_sweep(&spec).unwrap().ran, 0);
    for r in &full.table.rows {
        assert!(r.successes <= r.trials && (0.0..=1.0).contains(&r.rate));
        assert!(r.ci_low <= r.rate && r.rate <= r.ci_high);
    }
}

#[test]
fn recovery_table_crossings_and_scaling() {
    let mk = |n: usize, alpha: f64, k: usize| -> Vec<CellRecord> {
        (0..10)
            .map(|i| CellRecord {
                n,
                alpha,
                seed_index: i,
                seed: i as u64,
                final_m: 0.0,
                final_loss: 0.0,
                recovered: i < k,
                status: "completed".into(),
                steps_run: 1,
                seconds: 0.0,
            })
            .collect()
    };
    let mut cells = Vec::new();
    for (n, shift) in [(256usize, 0.0), (512, 0.2), (1024, 0.4)] {
        cells.extend(mk(n, 2.0 + shift, 0));
        cells.extend(mk(n, 3.0 + shift, 5));
        cells.extend(mk(n, 4.0 + shift, 10));
    }
    let t = RecoveryTable::from_cells(&cells).unwrap();
    assert!((t.crossing(256, 0.5).unwrap() - 3.0).abs() < 1e-12);
    assert!(t.monotone_within_ci());
    let fits = log_scaling_study(&t, &[0.25, 0.5, 0.75, 1.5]);
    for f in &fits[..3] {
        assert!(f.slope.unwrap() > 0.0 && f.r_squared.unwrap() > 0.99);
    }
    assert!(fits[3].slope.is_none() && fits[3].note.is_some());
}

#[test]
fn initial_pool_is_uncorrelated_with_gaussian_labels() {
    let pools = sample_threshold_pool(0.01, 4.0, 256, &[0, 5], &[1, 2, 3, 4, 5, 6, 7, 8, 9, 10], 2e-4).unwrap();
    let p0 = &pools[0];
    assert_eq!(p0.step, 0);
    assert!(p0.pairs.len() >= 10_000);
    assert_eq!(p0.provenance.len(), 10);
    let y: Vec<f64> = p0.pairs.iter().map(|p| p.0).collect();
    let yh: Vec<f64> = p0.pairs.iter().map(|p| p.1).collect();
    let r = stats::correlation(&y, &yh.iter().map(|v| v.abs()).collect::<Vec<_>>());
    assert!(r.abs() < 3.0 / (p0.pairs.len() as f64).sqrt(), "corr {r}");
    // |y| is half-normal.
    let half_normal = |x: f64| if x <= 0.0 { 0.0 } else { erf(x / 2f64.sqrt()) };
    let d = stats::ks_distance(&y, half_normal).unwrap();
    assert!(stats::ks_pvalue(d, y.len()) > 0.05, "ks {d}");
}

fn erf(x: f64) -> f64 {
    // Abramowitz-Stegun 7.1.26 is too coarse for a K-S test at this size;
    // integrate the density instead.
    let n = 4000;
    let h = x / n as f64;
    let f = |t: f64| (-t * t).exp();
    let mut s = f(0.0) + f(x);
    for k in 1..n {
        s += f(k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0 * 2.0 / std::f64::consts::PI.sqrt()
}

#[test]
fn instance_round_trip_is_exact() {
    let inst = Instance::generate(12, 2.5, 77).unwrap();
    let bytes = encode_instance(&inst);
    let back = decode_instance(&bytes).unwrap();
    assert_eq!(back.signal(), inst.signal());
    assert_eq!(back.sensing(), inst.sensing());
    assert_eq!(back.labels(), inst.labels());
    assert_eq!(back.seed(), 77);
    assert!(decode_instance(&bytes[..bytes.len() - 1]).is_err());
    let mut bad = bytes.clone();
    bad[0] = b'X';
    assert!(decode_instance(&bad).is_err());
}

#[test]
fn config_parsing_and_validation() {
    let cfg: Config = toml::from_str("[loss]\na = 1.0\n[grid]\nn = [64]\nalpha = [1.0, 2.0]\n").unwrap();
    assert_eq!(cfg.loss.a, 1.0);
    assert_eq!(cfg.grid.seeds_per_cell, 20);
    assert!(cfg.validate().is_ok());
    assert!(toml::from_str::<Config>("[loss]\nb = 1.0\n").is_err());
    let unsorted: Config = toml::from_str("[grid]\nalpha = [2.0, 1.0]\n").unwrap();
    assert!(unsorted.validate().is_err());
    assert_eq!(StepsRule::parse("12000*log2(N)").unwrap().steps(512), 108_000);
    assert_eq!(StepsRule::parse("fixed:10").unwrap().steps(512), 10);
    assert!(StepsRule::parse("forever").is_err());
}
