mod common;

use chaosbench::metrics::{
    context_overlap, correlation_dimension, kl_attractor, kl_monte_carlo, natural_measure_density, smape_curve,
    spearman, vpt, DimensionConfig, GaussianMixture, OverlapMode,
};
use chaosbench::systems::{
    estimate_lyapunov, generate_trajectory, sample_initial_conditions, IntegratorConfig, Registry, SystemSpec,
};
use common::*;
use rand::Rng;

#[test]
fn smape_matches_brute_force() {
    let mut r = rng(1);
    for _ in 0..1000 {
        let dim = r.gen_range(1..4);
        let h = r.gen_range(1..12);
        let truth = awkward_values(&mut r, h * dim);
        let pred = awkward_values(&mut r, h * dim);
        let fast = smape_curve(&truth, &pred, dim).unwrap();
        for (a, b) in fast.iter().zip(smape_brute(&truth, &pred, dim)) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }
}

#[test]
fn vpt_matches_brute_force() {
    let mut r = rng(2);
    for _ in 0..1000 {
        let dim = r.gen_range(1..4);
        let h = r.gen_range(1..20);
        let truth = awkward_values(&mut r, h * dim);
        let pred: Vec<f64> = truth
            .iter()
            .map(|x| x + r.gen_range(-1.0..1.0) * r.gen::<f64>().powi(3) * 5.0)
            .collect();
        let eps = r.gen_range(1.0..150.0);
        assert_eq!(
            vpt(&truth, &pred, dim, eps, 1.0 / 30.0).unwrap(),
            vpt_brute(&truth, &pred, dim, eps, 1.0 / 30.0)
        );
    }
    let truth = [1.0; 4];
    // sMAPE of (1, y) is 200|1-y|/(1+y); pick y for 10, 20, 35, 10.
    let y = |s: f64| (200.0 - s) / (200.0 + s);
    let pred = [y(10.0), y(20.0), y(35.0), y(10.0)];
    let curve = smape_curve(&truth, &pred, 1).unwrap();
    assert!((curve[2] - 35.0).abs() < 1e-9);
    assert_eq!(vpt(&truth, &pred, 1, 30.0, 1.0 / 30.0).unwrap(), 2.0 / 30.0);
}

#[test]
fn overlap_matches_brute_force() {
    let mut r = rng(3);
    let mut ties = 0;
    for _ in 0..1000 {
        let m = r.gen_range(2..12);
        let c = r.gen_range(2 * m..6 * m + 10);
        let ctx: Vec<f64> = (0..c).map(|_| r.gen_range(-1.0..1.0)).collect();
        let fast = context_overlap(&ctx, m, OverlapMode::Fixed).unwrap();
        let (j, v) = overlap_brute(&ctx, m).unwrap();
        assert!((fast.value - v).abs() < 1e-12);
        if fast.offset != j {
            // Only a tie up to rounding may reorder the winner.
            let at = pearson_brute(&ctx[ctx.len() - m..], &ctx[fast.offset..fast.offset + m]).unwrap();
            assert!((at - v).abs() < 1e-12, "{fast:?} vs offset {j} value {v}");
            ties += 1;
        }
    }
    assert!(ties < 100, "{ties}");
}

#[test]
fn overlap_of_noise_at_benchmark_size() {
    let mut r = rng(4);
    for _ in 0..20 {
        let ctx: Vec<f64> = (0..512).map(|_| r.gen_range(-1.0..1.0)).collect();
        let fast = context_overlap(&ctx, 30, OverlapMode::Fixed).unwrap();
        let (j, v) = overlap_brute(&ctx, 30).unwrap();
        assert_eq!(fast.offset, j);
        assert!((fast.value - v).abs() < 1e-12);
    }
}

#[test]
fn overlap_against_an_orthogonalized_final_window() {
    let mut r = rng(5);
    let m = 6;
    let mut ctx: Vec<f64> = (0..m).map(|_| r.gen_range(-1.0..1.0)).collect();
    // A single earlier window; the final window is its centered orthogonal complement.
    let early = ctx.clone();
    let mean = early.iter().sum::<f64>() / m as f64;
    let e: Vec<f64> = early.iter().map(|v| v - mean).collect();
    let mut f: Vec<f64> = (0..m).map(|_| r.gen_range(-1.0..1.0)).collect();
    let fm = f.iter().sum::<f64>() / m as f64;
    f.iter_mut().for_each(|v| *v -= fm);
    let proj = f.iter().zip(&e).map(|(a, b)| a * b).sum::<f64>() / e.iter().map(|b| b * b).sum::<f64>();
    let f: Vec<f64> = f.iter().zip(&e).map(|(a, b)| a - proj * b).collect();
    ctx.extend(f);
    let got = context_overlap(&ctx, m, OverlapMode::Fixed).unwrap();
    assert!(got.value <= 1e-9, "{got:?}");
    assert_eq!(overlap_brute(&ctx, m).unwrap().0, got.offset);
}

#[test]
fn spearman_matches_brute_force() {
    let mut r = rng(6);
    let mut checked = 0;
    while checked < 1000 {
        let n = r.gen_range(3..25);
        let a = awkward_values(&mut r, n);
        let b = awkward_values(&mut r, n);
        let Some(slow) = spearman_brute(&a, &b) else {
            assert!(spearman(&a, &b).is_err());
            continue;
        };
        assert!((spearman(&a, &b).unwrap() - slow).abs() < 1e-12);
        checked += 1;
    }
}

#[test]
fn spearman_hand_example_by_permutation_count() {
    // a = (1,2,3), b = (3,1,2): rho = 1 - 6 sum d^2 / (n (n^2 - 1)) with d = (-2, 1, 1).
    let rho = spearman(&[1.0, 2.0, 3.0], &[3.0, 1.0, 2.0]).unwrap();
    assert!((rho - (1.0 - 6.0 * 6.0 / 24.0)).abs() < 1e-12);
    assert!((rho + 0.5).abs() < 1e-12);
    assert!((spearman_brute(&[1.0, 2.0, 3.0], &[3.0, 1.0, 2.0]).unwrap() + 0.5).abs() < 1e-12);
    // Over all orderings of b the coefficient takes the textbook values for n = 3.
    let perms = [
        [1.0, 2.0, 3.0],
        [1.0, 3.0, 2.0],
        [2.0, 1.0, 3.0],
        [2.0, 3.0, 1.0],
        [3.0, 1.0, 2.0],
        [3.0, 2.0, 1.0],
    ];
    let mut seen: Vec<f64> = perms.iter().map(|b| spearman(&[1.0, 2.0, 3.0], b).unwrap()).collect();
    seen.sort_by(f64::total_cmp);
    let expect = [-1.0, -0.5, -0.5, 0.5, 0.5, 1.0];
    assert!(seen.iter().zip(expect).all(|(a, b)| (a - b).abs() < 1e-12), "{seen:?}");
}

fn gp(points: &[f64], dim: usize) -> f64 {
    correlation_dimension(points, dim, &DimensionConfig::default()).unwrap()
}

#[test]
fn correlation_dimension_of_sets_with_known_dimension() {
    let line = gp(&line_3d(2000, 1), 3);
    assert!((line - 1.0).abs() <= 0.1, "line {line}");
    let square = gp(&square_3d(2000, 2), 3);
    assert!((square - 2.0).abs() <= 0.15, "square {square}");
    let c = gp(&cantor(2000, 24, 3), 1);
    let target = 2f64.ln() / 3f64.ln();
    assert!((c - target).abs() <= 0.1, "cantor {c}");
}

#[test]
fn correlation_dimension_is_rotation_and_scale_invariant() {
    let pts = square_3d(2000, 9);
    let (s, c) = (0.6f64.sin(), 0.6f64.cos());
    let moved: Vec<f64> = pts
        .chunks(3)
        .flat_map(|p| [3.0 * (c * p[0] - s * p[1]), 3.0 * (s * p[0] + c * p[1]), 3.0 * p[2]])
        .collect();
    assert!((gp(&pts, 3) - gp(&moved, 3)).abs() < 0.02);
}

#[test]
fn lorenz_orbit_dimension_near_registry_reference() {
    let reg = Registry::builtin();
    let lorenz = reg.get("Lorenz").unwrap();
    let cfg = IntegratorConfig::default();
    let x0 = sample_initial_conditions(lorenz, 1, &cfg, 17).unwrap();
    let orbit = generate_trajectory(lorenz, &x0[0], 20_000, 30, &cfg).unwrap();
    let d = gp(orbit.values(), 3);
    assert!(
        (d - lorenz.reference_fractal_dim).abs() <= 0.2,
        "{d} vs {}",
        lorenz.reference_fractal_dim
    );
}

#[test]
fn kl_of_a_trajectory_with_itself_is_zero() {
    let mut r = rng(7);
    for i in 0..20 {
        let n = r.gen_range(50..300);
        let mut x = [0.0f64; 3];
        let traj: Vec<f64> = (0..n)
            .flat_map(|_| {
                x.iter_mut().for_each(|v| *v += r.gen_range(-1.0..1.0));
                x
            })
            .collect();
        let est = kl_attractor(&traj, &traj, 3, 2000, 1e-12, i).unwrap();
        assert!(est.value.abs() <= 3.0 * est.std_error, "{est:?}");
    }
}

#[test]
fn kl_matches_quadrature_on_one_dimensional_mixtures() {
    let cases: [([f64; 3], [f64; 3], [f64; 3], [f64; 3]); 3] = [
        ([-1.0, 0.5, 2.0], [0.5, 0.3, 0.8], [0.0, 1.0, 1.5], [1.0, 0.6, 0.4]),
        ([0.0, 0.1, 0.2], [0.2, 0.2, 0.2], [0.0, 0.1, 0.2], [0.3, 0.3, 0.3]),
        ([-3.0, 0.0, 3.0], [1.0, 0.5, 1.0], [-2.0, 0.5, 2.5], [0.7, 0.7, 1.5]),
    ];
    for (pm, ps, qm, qs) in cases {
        let p = GaussianMixture::new(pm.to_vec(), ps.to_vec(), 1).unwrap();
        let q = GaussianMixture::new(qm.to_vec(), qs.to_vec(), 1).unwrap();
        let est = kl_monte_carlo(&p, &q, 20_000, 11).unwrap();
        let exact = kl_quadrature((&pm, &ps), (&qm, &qs));
        assert!((est.value - exact).abs() <= 3.0 * est.std_error, "{est:?} vs {exact}");
        assert_eq!(est, kl_monte_carlo(&p, &q, 20_000, 11).unwrap());
    }
}

#[test]
fn kl_of_a_far_translated_copy_exceeds_ten_nats() {
    let traj: Vec<f64> = (0..100)
        .flat_map(|i| {
            let t = i as f64 * 0.2;
            [t.cos(), t.sin()]
        })
        .collect();
    let far: Vec<f64> = traj.iter().map(|v| v + 20.0).collect();
    let est = kl_attractor(&traj, &far, 2, 2000, 1e-12, 0).unwrap();
    // Exact mixtures, evaluated at the truth's own centers.
    let p = GaussianMixture::from_points(&traj, 2, 1e-12).unwrap();
    let q = GaussianMixture::from_points(&far, 2, 1e-12).unwrap();
    let direct = traj.chunks(2).map(|x| p.log_density(x) - q.log_density(x)).sum::<f64>() / 100.0;
    assert!(est.value > 10.0 && direct > 10.0, "{est:?} {direct}");
}

#[test]
fn density_on_a_uniform_grid_is_flat_inside() {
    // Row-by-row raster so consecutive steps (the bandwidths) are all equal.
    let n = 40;
    let mut pts = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let jj = if i % 2 == 0 { j } else { n - 1 - j };
            pts.extend([jj as f64 * 0.5, i as f64 * 0.5]);
        }
    }
    let dens: Vec<f64> = (10..30)
        .flat_map(|i| (10..30).map(move |j| [j as f64 * 0.5 + 0.25, i as f64 * 0.5 + 0.1]))
        .map(|q| natural_measure_density(&pts, 2, &q, 1e-12).unwrap())
        .collect();
    let mean = dens.iter().sum::<f64>() / dens.len() as f64;
    let sd = (dens.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / dens.len() as f64).sqrt();
    assert!(sd / mean < 0.1, "cv {}", sd / mean);
    let far = natural_measure_density(&pts, 2, &[2000.0, 2000.0], 1e-12).unwrap();
    assert!(far / mean < 1e-30);
}

#[test]
fn lyapunov_exponents_of_reference_flows() {
    let cfg = IntegratorConfig::default();
    let reg = Registry::builtin();
    let lorenz = reg.get("Lorenz").unwrap();
    let est = estimate_lyapunov(lorenz, &cfg, 1000.0 * lorenz.lyapunov_time(), 5).unwrap();
    assert!((est.exponent - 0.9).abs() <= 0.05, "{est:?}");
    let osc = SystemSpec::harmonic_oscillator();
    let est = estimate_lyapunov(&osc, &cfg, 1000.0, 5).unwrap();
    assert!(est.exponent.abs() < 0.01, "{est:?}");
}

#[test]
fn registry_annotations_agree_with_the_estimator() {
    let cfg = IntegratorConfig::default();
    let reg = Registry::builtin();
    for spec in reg.systems() {
        let est = estimate_lyapunov(spec, &cfg, 500.0 * spec.lyapunov_time(), 1).unwrap();
        let rel = (est.exponent - spec.lyapunov_exponent).abs() / spec.lyapunov_exponent;
        assert!(
            rel <= 0.15,
            "{}: estimated {} vs annotated {}",
            spec.name,
            est.exponent,
            spec.lyapunov_exponent
        );
        assert!(spec.lyapunov_time() * spec.lyapunov_exponent - 1.0 <= f64::EPSILON);
    }
}
