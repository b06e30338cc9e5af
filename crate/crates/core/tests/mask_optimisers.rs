use maskopt::stochastic::{
    ceil_count, nlpe_with, sparsify_with, target_count, Progress, SparsifyStatus,
};
use maskopt::{
    analytic_mask, inpaint, metric_mse, nlpe, save_pbm, sparsify, Image, NlpeConfig, PsConfig,
    SolverConfig,
};
use proptest::prelude::*;

fn texture(w: usize, h: usize, phase: f64) -> Image {
    Image::from_fn(w, h, |x, y| {
        let (x, y) = (x as f64, y as f64);
        0.5 + 0.25 * (0.7 * x + phase).sin() * (0.4 * y).cos() + 0.2 * ((x - 9.0) / 4.0).tanh()
    })
    .unwrap()
}

fn run_ps(f: &Image, cfg: &PsConfig) -> (maskopt::stochastic::SparsifyOutcome, Vec<Progress>) {
    let mut log = Vec::new();
    let out = sparsify_with(f, None, cfg, &SolverConfig::default(), &mut |p| {
        log.push(*p)
    })
    .unwrap();
    (out, log)
}

#[test]
fn ps_removes_the_planned_amount_per_iteration() {
    let f = texture(24, 20, 0.3);
    let cfg = PsConfig {
        removal_fraction: 0.1,
        ..PsConfig::new(0.1, 4)
    };
    let (out, log) = run_ps(&f, &cfg);
    let target = target_count(0.1, 480);
    assert_eq!(out.status, SparsifyStatus::Completed);
    assert_eq!(out.mask.count(), target);
    assert_eq!(out.iterations, log.len());

    let mut known = 480;
    for p in &log {
        let planned = ceil_count(0.1, ceil_count(0.3, known).clamp(1, known - 1));
        assert_eq!(known - p.known, planned.max(1).min(known - target));
        assert!(p.known < known);
        known = p.known;
    }
    assert_eq!(known, target);
}

#[test]
fn ps_beats_the_analytic_mask_on_a_textured_image() {
    let f = texture(32, 32, 1.1);
    let s = SolverConfig::default();
    let ps = sparsify(&f, &PsConfig::new(0.08, 2), &s).unwrap();
    let aa = analytic_mask(&f, 0.08).unwrap();
    let mse = |m| metric_mse(&inpaint(&f, m, &s).unwrap().0, &f).unwrap();
    assert!(mse(&ps) < mse(&aa));
}

#[test]
fn ps_handles_colour_images() {
    let f = Image::from_fn(16, 16, |x, y| ((x * 3 + y) % 16) as f64 / 15.0).unwrap();
    let rgb: Vec<f64> = [1.0, 0.5, 0.2]
        .iter()
        .flat_map(|k| f.data().iter().map(move |v| v * k))
        .collect();
    let rgb = Image::new(16, 16, 3, rgb).unwrap();
    let mask = sparsify(&rgb, &PsConfig::new(0.2, 0), &SolverConfig::default()).unwrap();
    assert_eq!(mask.count(), target_count(0.2, 256));
}

#[test]
fn nlpe_trajectory_is_strictly_decreasing() {
    let f = texture(24, 24, 0.0);
    let s = SolverConfig::default();
    let start = analytic_mask(&f, 0.08).unwrap();
    let mut observed = Vec::new();
    let cfg = NlpeConfig {
        cycles: 2,
        ..NlpeConfig::new(9)
    };
    let out = nlpe_with(&f, &start, &cfg, &s, &mut |p| observed.push(p.mse)).unwrap();
    assert_eq!(out.mask.count(), start.count());
    assert_eq!(out.iterations, 2 * start.count());
    assert_eq!(observed, out.accepted_mse);
    assert!(!out.accepted_mse.is_empty());
    assert!(out.accepted_mse.windows(2).all(|w| w[1] < w[0]));
    assert!(out.final_mse <= out.initial_mse);
    assert!(out.accepted_mse[0] < out.initial_mse);
    let achieved = metric_mse(&inpaint(&f, &out.mask, &s).unwrap().0, &f).unwrap();
    assert!((achieved - out.final_mse).abs() <= 1e-6 * out.final_mse.max(1.0));
}

#[test]
fn equal_seeds_give_identical_files() {
    let f = texture(20, 18, 0.5);
    let s = SolverConfig::default();
    let a = sparsify(&f, &PsConfig::new(0.1, 77), &s).unwrap();
    let b = sparsify(&f, &PsConfig::new(0.1, 77), &s).unwrap();
    assert_eq!(save_pbm(&a), save_pbm(&b));
    let c = sparsify(&f, &PsConfig::new(0.1, 78), &s).unwrap();
    assert_ne!(save_pbm(&a), save_pbm(&c));

    let cfg = NlpeConfig {
        cycles: 1,
        ..NlpeConfig::new(3)
    };
    let x = nlpe(&f, &a, &cfg, &s).unwrap();
    let y = nlpe(&f, &a, &cfg, &s).unwrap();
    assert_eq!(save_pbm(&x.mask), save_pbm(&y.mask));
    assert_eq!(x.accepted_mse, y.accepted_mse);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn ps_hits_the_exact_count(w in 4usize..14, h in 4usize..14, d in 0.05f64..0.6, seed in any::<u64>(), phase in 0.0f64..3.0) {
        let f = texture(w, h, phase);
        let (out, log) = run_ps(&f, &PsConfig::new(d, seed));
        prop_assert_eq!(out.mask.count(), target_count(d, w * h).max(1));
        prop_assert!(log.windows(2).all(|p| p[1].known < p[0].known));
    }

    #[test]
    fn nlpe_keeps_the_count(w in 4usize..12, h in 4usize..12, d in 0.1f64..0.5, seed in any::<u64>()) {
        let f = texture(w, h, 0.2);
        let mask = analytic_mask(&f, d).unwrap();
        prop_assume!(mask.count() > 0 && mask.count() < w * h);
        let cfg = NlpeConfig { cycles: 1, ..NlpeConfig::new(seed) };
        let out = nlpe(&f, &mask, &cfg, &SolverConfig::default()).unwrap();
        prop_assert_eq!(out.mask.count(), mask.count());
        prop_assert!(out.accepted_mse.windows(2).all(|w| w[1] < w[0]));
        prop_assert!(out.final_mse <= out.initial_mse);
    }
}
