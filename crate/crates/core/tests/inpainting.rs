use maskopt::oracle::{assemble_reduced, dense_solve_oracle};
use maskopt::{
    inpaint, inpaint_from, residual_norm, Image, Inpainter, Mask, Preconditioner, SolverConfig,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_image(w: usize, h: usize, channels: usize, rng: &mut ChaCha8Rng) -> Image {
    let data = (0..w * h * channels).map(|_| rng.gen::<f64>()).collect();
    Image::new(w, h, channels, data).unwrap()
}

fn random_mask(w: usize, h: usize, density: f64, rng: &mut ChaCha8Rng) -> Mask {
    let mut bits: Vec<bool> = (0..w * h).map(|_| rng.gen_bool(density)).collect();
    if !bits.contains(&true) {
        bits[rng.gen_range(0..w * h)] = true;
    }
    Mask::new(w, h, bits).unwrap()
}

fn max_abs_diff(a: &Image, b: &Image) -> f64 {
    a.data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// True residual of the reduced system relative to its right-hand side.
fn reduced_residual(u: &Image, f: &Image, mask: &Mask, c: usize) -> f64 {
    let sys = assemble_reduced(mask).unwrap();
    let b = sys.rhs(f.channel(c));
    let x: Vec<f64> = sys.unknown.iter().map(|&i| u.channel(c)[i]).collect();
    let m = x.len();
    let mut r2 = 0.0;
    for (row, &bv) in b.iter().enumerate() {
        let ax: f64 = (0..m).map(|col| sys.matrix.get(row, col) * x[col]).sum();
        r2 += (bv - ax) * (bv - ax);
    }
    let bn = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    if bn == 0.0 {
        r2.sqrt()
    } else {
        r2.sqrt() / bn
    }
}

#[test]
fn agrees_with_dense_elimination() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for (w, h, d) in [(8, 8, 0.1), (13, 9, 0.3), (20, 17, 0.05), (32, 32, 0.5)] {
        let f = random_image(w, h, 1, &mut rng);
        let mask = random_mask(w, h, d, &mut rng);
        let (u, stats) = inpaint(&f, &mask, &SolverConfig::default()).unwrap();
        assert!(stats.converged());
        let oracle = dense_solve_oracle(&f, &mask).unwrap();
        assert!(max_abs_diff(&u, &oracle) <= 1e-4, "{w}x{h}");
    }
}

#[test]
fn plain_and_multigrid_cg_agree() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let f = random_image(40, 31, 3, &mut rng);
    let mask = random_mask(40, 31, 0.07, &mut rng);
    let plain = SolverConfig {
        preconditioner: Preconditioner::None,
        ..Default::default()
    };
    let (a, sa) = inpaint(&f, &mask, &plain).unwrap();
    let (b, sb) = inpaint(&f, &mask, &SolverConfig::default()).unwrap();
    assert!(sa.converged() && sb.converged());
    assert!(sb.total_iterations() < sa.total_iterations());
    assert!(max_abs_diff(&a, &b) <= 1e-4);
}

#[test]
fn rgb_channels_are_solved_independently() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let f = random_image(12, 10, 3, &mut rng);
    let mask = random_mask(12, 10, 0.2, &mut rng);
    let (u, _) = inpaint(&f, &mask, &SolverConfig::default()).unwrap();
    for c in 0..3 {
        let plane = Image::new(12, 10, 1, f.channel(c).to_vec()).unwrap();
        let (uc, _) = inpaint(&plane, &mask, &SolverConfig::default()).unwrap();
        assert_eq!(uc.channel(0), u.channel(c));
    }
}

#[test]
fn patched_inpainter_matches_a_fresh_solve() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let f = random_image(48, 40, 1, &mut rng);
    let mask = random_mask(48, 40, 0.1, &mut rng);
    let cfg = SolverConfig::default();
    let mut solver = Inpainter::new(&f, mask.clone(), &cfg).unwrap();
    let (mut previous, _) = solver.solve(None).unwrap();
    for step in 0..20 {
        let i = rng.gen_range(0..48 * 40);
        let known = !solver.mask().is_known(i);
        if !known && solver.mask().count() == 1 {
            continue;
        }
        solver.set_known(i, known);
        let guess = if step % 2 == 0 { Some(&previous) } else { None };
        let (u, stats) = solver.solve(guess).unwrap();
        assert!(stats.converged());
        let (fresh, _) = inpaint(&f, solver.mask(), &cfg).unwrap();
        assert!(max_abs_diff(&u, &fresh) <= 1e-5, "step {step}");
        previous = u;
    }
}

#[test]
fn warm_start_shape_is_checked() {
    let f = Image::filled(6, 6, 1, 0.5).unwrap();
    let mask = Mask::from_indices(6, 6, &[0]).unwrap();
    let guess = Image::filled(6, 5, 1, 0.5).unwrap();
    assert!(inpaint_from(&f, &mask, &SolverConfig::default(), &guess).is_err());
}

fn instance() -> impl Strategy<Value = (Image, Image, Mask)> {
    (
        2usize..20,
        2usize..20,
        prop::sample::select(vec![1usize, 3]),
        0.05f64..0.6,
        any::<u64>(),
    )
        .prop_map(|(w, h, ch, d, seed)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let f1 = random_image(w, h, ch, &mut rng);
            let f2 = random_image(w, h, ch, &mut rng);
            let mask = random_mask(w, h, d, &mut rng);
            (f1, f2, mask)
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn known_pixels_are_reproduced_and_range_is_kept((f, _, mask) in instance()) {
        let (u, _) = inpaint(&f, &mask, &SolverConfig::default()).unwrap();
        for c in 0..f.channels() {
            let known: Vec<f64> = mask.known_indices().iter().map(|&i| f.channel(c)[i]).collect();
            let lo = known.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = known.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            for (i, &v) in u.channel(c).iter().enumerate() {
                if mask.is_known(i) {
                    prop_assert_eq!(v, f.channel(c)[i]);
                }
                prop_assert!(v >= lo - 1e-6 && v <= hi + 1e-6);
            }
        }
    }

    #[test]
    fn inpainting_is_linear((f1, f2, mask) in instance(), alpha in 0.0f64..0.5) {
        // keep the combination inside [0, 1] so it is a valid image
        let beta = 0.5 - alpha;
        let mix: Vec<f64> = f1.data().iter().zip(f2.data()).map(|(a, b)| alpha * a + beta * b).collect();
        let mix = Image::new(f1.width(), f1.height(), f1.channels(), mix).unwrap();
        let cfg = SolverConfig::with_tolerance(1e-10);
        let (u1, _) = inpaint(&f1, &mask, &cfg).unwrap();
        let (u2, _) = inpaint(&f2, &mask, &cfg).unwrap();
        let (um, _) = inpaint(&mix, &mask, &cfg).unwrap();
        for ((m, a), b) in um.data().iter().zip(u1.data()).zip(u2.data()) {
            prop_assert!((m - (alpha * a + beta * b)).abs() <= 1e-5);
        }
    }

    #[test]
    fn reported_residual_is_the_true_residual((f, _, mask) in instance()) {
        let (u, stats) = inpaint(&f, &mask, &SolverConfig::default()).unwrap();
        prop_assert!(stats.converged());
        for c in 0..f.channels() {
            let reported = stats.channels[c].final_rel_residual;
            prop_assert!((reported - reduced_residual(&u, &f, &mask, c)).abs() <= 1e-8);
        }
    }

    #[test]
    fn full_residual_vanishes_at_the_solution((f, _, mask) in instance()) {
        let (u, _) = inpaint(&f, &mask, &SolverConfig::with_tolerance(1e-12)).unwrap();
        for r in residual_norm(&u, &f, &mask).unwrap() {
            prop_assert!(r <= 1e-8);
        }
    }

    #[test]
    fn matches_the_oracle((f, _, mask) in instance()) {
        let (u, _) = inpaint(&f, &mask, &SolverConfig::default()).unwrap();
        prop_assert!(max_abs_diff(&u, &dense_solve_oracle(&f, &mask).unwrap()) <= 1e-4);
    }
}
