//! Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.

mod common;

use std::collections::BTreeMap;
use std::time::Instant;

use chaosbench::experiments::{
    apply_nonstationarity, kgram_blocks, kgram_shuffle, median_curve, nonstationarity_factors, paired_vpt_test,
    permute_blocks, run_benchmark, summarize, ExperimentConfig, ExperimentKind, KindParams, ModelSpec, ResultRecord,
};
use chaosbench::forecasters::ChannelMode;
use chaosbench::io::{load_records, RecordWriter};
use chaosbench::metrics::{
    context_overlap, correlation_dimension, kl_attractor, kl_monte_carlo, smape_curve, spearman, vpt, DimensionConfig,
    GaussianMixture, MetricConfig, OverlapMode,
};
use chaosbench::systems::{
    estimate_lyapunov, generate_trajectory, sample_initial_conditions, IntegratorConfig, Registry, SystemSpec,
};
use chaosbench::Error;
use common::*;
use rand::Rng;

const SEED: u64 = 0;
const PERMUTATIONS: usize = 9999;

type Outcome = Result<String, String>;

fn ensure(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn desk(models: Vec<ModelSpec>, kind: ExperimentKind) -> ExperimentConfig {
    ExperimentConfig {
        systems: DESK_SYSTEMS.iter().map(|s| s.to_string()).collect(),
        n_ics: 20,
        context_len: 512,
        horizon: 300,
        models,
        seed: SEED,
        experiment_kind: kind,
        kind_params: KindParams {
            permutations: PERMUTATIONS,
            ..Default::default()
        },
        ..Default::default()
    }
}

fn run(cfg: &ExperimentConfig) -> Vec<ResultRecord> {
    run_benchmark(cfg, &Registry::builtin()).expect("benchmark runs").0
}

fn median_vpt(records: &[ResultRecord], model: &str) -> f64 {
    let v: Vec<f64> = records
        .iter()
        .filter(|r| r.model_id == model)
        .filter_map(|r| r.vpt())
        .collect();
    chaosbench::metrics::median(&v).unwrap_or(f64::NAN)
}

fn metric_oracles() -> Outcome {
    let mut r = rng(101);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let dim = r.gen_range(1..4);
        let h = r.gen_range(1..12);
        let (t, p) = (awkward_values(&mut r, h * dim), awkward_values(&mut r, h * dim));
        let fast = smape_curve(&t, &p, dim).map_err(|e| e.to_string())?;
        worst = fast
            .iter()
            .zip(smape_brute(&t, &p, dim))
            .fold(worst, |w, (a, b)| w.max((a - b).abs()));
    }
    let mut vpt_miss = 0;
    for _ in 0..1000 {
        let dim = r.gen_range(1..4);
        let h = r.gen_range(1..20);
        let t = awkward_values(&mut r, h * dim);
        let p: Vec<f64> = t
            .iter()
            .map(|x| x + r.gen_range(-5.0..5.0) * r.gen::<f64>().powi(3))
            .collect();
        let eps = r.gen_range(1.0..150.0);
        if vpt(&t, &p, dim, eps, 1.0 / 30.0).ok() != Some(vpt_brute(&t, &p, dim, eps, 1.0 / 30.0)) {
            vpt_miss += 1;
        }
    }
    let (mut overlap_miss, mut ties) = (0, 0);
    for _ in 0..1000 {
        let m = r.gen_range(2..12);
        let c = r.gen_range(2 * m..6 * m + 10);
        let ctx: Vec<f64> = (0..c).map(|_| r.gen_range(-1.0..1.0)).collect();
        let fast = context_overlap(&ctx, m, OverlapMode::Fixed).map_err(|e| e.to_string())?;
        let (j, v) = overlap_brute(&ctx, m).ok_or("brute overlap undefined")?;
        worst = worst.max((fast.value - v).abs());
        if fast.offset != j {
            let at = pearson_brute(&ctx[c - m..], &ctx[fast.offset..fast.offset + m]).unwrap_or(f64::NAN);
            if (at - v).abs() < 1e-12 {
                ties += 1;
            } else {
                overlap_miss += 1;
            }
        }
    }
    let mut checked = 0;
    while checked < 1000 {
        let n = r.gen_range(3..25);
        let (a, b) = (awkward_values(&mut r, n), awkward_values(&mut r, n));
        if let Some(slow) = spearman_brute(&a, &b) {
            worst = worst.max((spearman(&a, &b).map_err(|e| e.to_string())? - slow).abs());
            checked += 1;
        }
    }
    ensure(
        worst < 1e-12 && vpt_miss == 0 && overlap_miss == 0,
        format!("max |diff| {worst:.1e}, vpt mismatches {vpt_miss}, overlap argmax mismatches {overlap_miss} ({ties} rounding ties)"),
    )
}

fn dimension_oracles() -> Outcome {
    let cfg = DimensionConfig::default();
    let gp = |p: &[f64], d| correlation_dimension(p, d, &cfg).unwrap_or(f64::NAN);
    let line = gp(&line_3d(2000, 1), 3);
    let square = gp(&square_3d(2000, 2), 3);
    let c = gp(&cantor(2000, 24, 3), 1);
    let reg = Registry::builtin();
    let lorenz = reg.get("Lorenz").map_err(|e| e.to_string())?;
    let icfg = IntegratorConfig::default();
    let x0 = sample_initial_conditions(lorenz, 1, &icfg, 17).map_err(|e| e.to_string())?;
    let orbit = generate_trajectory(lorenz, &x0[0], 20_000, 30, &icfg).map_err(|e| e.to_string())?;
    let l = gp(orbit.values(), 3);
    ensure(
        (line - 1.0).abs() <= 0.1
            && (square - 2.0).abs() <= 0.15
            && (c - 0.63).abs() <= 0.1
            && (l - lorenz.reference_fractal_dim).abs() <= 0.2,
        format!(
            "line {line:.3}, patch {square:.3}, cantor {c:.3}, lorenz {l:.3} (reference {})",
            lorenz.reference_fractal_dim
        ),
    )
}

fn kl_oracles() -> Outcome {
    let mut r = rng(303);
    let mut self_ok = 0;
    for i in 0..20 {
        let n = r.gen_range(50..300);
        let mut x = [0.0f64; 3];
        let traj: Vec<f64> = (0..n)
            .flat_map(|_| {
                x.iter_mut().for_each(|v| *v += r.gen_range(-1.0..1.0));
                x
            })
            .collect();
        let est = kl_attractor(&traj, &traj, 3, 2000, 1e-12, i).map_err(|e| e.to_string())?;
        self_ok += usize::from(est.value.abs() <= 3.0 * est.std_error);
    }
    let (pm, ps, qm, qs) = ([-1.0, 0.5, 2.0], [0.5, 0.3, 0.8], [0.0, 1.0, 1.5], [1.0, 0.6, 0.4]);
    let p = GaussianMixture::new(pm.to_vec(), ps.to_vec(), 1).map_err(|e| e.to_string())?;
    let q = GaussianMixture::new(qm.to_vec(), qs.to_vec(), 1).map_err(|e| e.to_string())?;
    let est = kl_monte_carlo(&p, &q, 20_000, 11).map_err(|e| e.to_string())?;
    let exact = kl_quadrature((&pm, &ps), (&qm, &qs));
    let z = (est.value - exact).abs() / est.std_error;
    let repro = est == kl_monte_carlo(&p, &q, 20_000, 11).map_err(|e| e.to_string())?;
    ensure(
        self_ok == 20 && z <= 3.0 && repro,
        format!(
            "self-divergence within 3 SE {self_ok}/20, mixture |z| {z:.2} (exact {exact:.4}), reproducible {repro}"
        ),
    )
}

fn lyapunov_oracles() -> Outcome {
    let cfg = IntegratorConfig::default();
    let reg = Registry::builtin();
    let lorenz = reg.get("Lorenz").map_err(|e| e.to_string())?;
    let est = estimate_lyapunov(lorenz, &cfg, 1000.0 * lorenz.lyapunov_time(), 5).map_err(|e| e.to_string())?;
    let osc = estimate_lyapunov(&SystemSpec::harmonic_oscillator(), &cfg, 1000.0, 5).map_err(|e| e.to_string())?;
    ensure(
        (est.exponent - 0.9).abs() <= 0.05
            && (est.exponent - lorenz.lyapunov_exponent).abs() <= 0.05
            && osc.exponent.abs() < 0.01,
        format!(
            "lorenz {:.4} +/- {:.4} (registry {}), oscillator {:.2e}",
            est.exponent, est.std_error, lorenz.lyapunov_exponent, osc.exponent
        ),
    )
}

fn desk_benchmark(records: &[ResultRecord]) -> Outcome {
    let med: BTreeMap<&str, f64> = ["naive", "nvar", "parrot"]
        .iter()
        .map(|m| (*m, median_vpt(records, m)))
        .collect();
    let a = med["naive"] < med["nvar"] && med["naive"] < med["parrot"];
    let test = paired_vpt_test(records, "nvar", "naive", PERMUTATIONS, SEED).map_err(|e| e.to_string())?;
    let b = test.median_a > test.median_b && test.p_value < 0.05;
    // Two Lyapunov times at the default granularity.
    let steps = 2 * ExperimentConfig::default().granularity;
    let mut c = true;
    let mut drops = Vec::new();
    for m in ["naive", "nvar", "parrot"] {
        let curves: Vec<&[f64]> = records
            .iter()
            .filter(|r| r.model_id == m)
            .filter_map(|r| r.metrics.as_ref().map(|x| x.smape_curve.as_slice()))
            .collect();
        let curve = median_curve(&curves);
        let worst = curve[..steps.min(curve.len())]
            .windows(2)
            .map(|w| w[0] - w[1])
            .fold(0.0f64, f64::max);
        c &= worst <= 0.0;
        drops.push(format!("{m} {worst:.2}"));
    }
    ensure(
        a && b && c,
        format!(
            "(a) {} medians naive {:.3} nvar {:.3} parrot {:.3}; (b) {} paired nvar>naive p {:.4} over {} tasks; (c) {} largest median sMAPE drop in 2 tau: {}",
            pf(a),
            med["naive"],
            med["nvar"],
            med["parrot"],
            pf(b),
            test.p_value,
            test.n_pairs,
            pf(c),
            drops.join(", ")
        ),
    )
}

fn pf(ok: bool) -> &'static str {
    if ok {
        "pass"
    } else {
        "fail"
    }
}

fn trend_detail(points: &[(f64, f64)]) -> String {
    points
        .iter()
        .map(|(x, v)| format!("{}:{v:.3}", (x * 1e6).round() / 1e6))
        .collect::<Vec<_>>()
        .join(" ")
}

fn context_sweep() -> Outcome {
    let mut cfg = desk(vec![ModelSpec::parrot()], ExperimentKind::ContextSweep);
    cfg.attractor_metrics = false;
    let recs = run(&cfg);
    let s = summarize(cfg.experiment_kind, &recs, PERMUTATIONS, SEED);
    let t = s
        .trends
        .get("parrot")
        .ok_or_else(|| format!("no trend: {:?}", s.notes))?;
    let rho = t.rho.unwrap_or(f64::NAN);
    ensure(
        rho >= 0.8,
        format!("rho {rho:.3}; median VPT by C {}", trend_detail(&t.points)),
    )
}

fn shuffle_properties() -> Outcome {
    let mut r = rng(707);
    let (mut bad, mut impossible) = (0, 0);
    for i in 0..10_000u64 {
        let c = r.gen_range(2..200);
        let k = r.gen_range(1..=c / 2);
        let ctx: Vec<f64> = (0..c).map(|_| r.gen_range(-1e3..1e3)).collect();
        let blocks = kgram_blocks(c, k);
        match kgram_shuffle(&ctx, k, i) {
            Ok(out) => bad += usize::from(!shuffle_ok(&ctx, &out, k, &blocks)),
            Err(Error::ShuffleImpossible(_)) if blocks.len() == 2 => impossible += 1,
            Err(_) => bad += 1,
        }
    }
    let x = [1.0, 2.0, 3.0, 4.0];
    let one = permute_blocks(&x, 1, &[0, 3, 1, 2]).map_err(|e| e.to_string())?;
    let two = permute_blocks(&x, 2, &[1, 0]).map_err(|e| e.to_string())?;
    let examples = one == [1.0, 4.0, 2.0, 3.0] && two == [3.0, 4.0, 1.0, 2.0];
    ensure(
        bad == 0 && examples,
        format!(
            "{bad} violations in 10000 draws ({impossible} single-movable-block cases refused); worked examples {}",
            pf(examples)
        ),
    )
}

/// The output is the input's blocks, each used once, with the final block last and a
/// different penultimate stretch.
fn shuffle_ok(ctx: &[f64], out: &[f64], k: usize, blocks: &[(usize, usize)]) -> bool {
    let c = ctx.len();
    if out.len() != c {
        return false;
    }
    let bits = |s: &[f64]| s.iter().map(|v| v.to_bits()).collect::<Vec<u64>>();
    let mut unused: Vec<Vec<u64>> = blocks.iter().map(|&(a, b)| bits(&ctx[a..b])).collect();
    let mut p = 0;
    while p < c {
        let Some(i) = unused
            .iter()
            .position(|b| p + b.len() <= c && *b == bits(&out[p..p + b.len()]))
        else {
            return false;
        };
        p += unused.swap_remove(i).len();
    }
    bits(&out[c - k..]) == bits(&ctx[c - k..]) && bits(&out[c - 2 * k..c - k]) != bits(&ctx[c - 2 * k..c - k])
}

fn nonstationarity() -> Outcome {
    let reg = Registry::builtin();
    let lorenz = reg.get("Lorenz").map_err(|e| e.to_string())?;
    let icfg = IntegratorConfig::default();
    let x0 = sample_initial_conditions(lorenz, 1, &icfg, 3).map_err(|e| e.to_string())?;
    let traj = generate_trajectory(lorenz, &x0[0], 512, 30, &icfg).map_err(|e| e.to_string())?;
    let same = apply_nonstationarity(&traj, 1.0).map_err(|e| e.to_string())?;
    let identity = same
        .values()
        .iter()
        .zip(traj.values())
        .all(|(a, b)| a.to_bits() == b.to_bits())
        && nonstationarity_factors(512, 1.0)
            .map_err(|e| e.to_string())?
            .iter()
            .all(|&f| f == 1.0);
    let mut cfg = desk(vec![ModelSpec::parrot()], ExperimentKind::Nonstationary);
    cfg.attractor_metrics = false;
    let recs = run(&cfg);
    let s = summarize(cfg.experiment_kind, &recs, PERMUTATIONS, SEED);
    let t = s
        .trends
        .get("parrot")
        .ok_or_else(|| format!("no trend: {:?}", s.notes))?;
    let rho = t.rho.unwrap_or(f64::NAN);
    ensure(
        identity && rho < 0.0,
        format!(
            "identity {}; rho(1 - f_min, VPT) {rho:.3}; medians {}",
            pf(identity),
            trend_detail(&t.points)
        ),
    )
}

fn ic_dependence_check() -> Outcome {
    let mut cfg = desk(vec![ModelSpec::parrot()], ExperimentKind::IcDependence);
    cfg.attractor_metrics = false;
    let recs = run(&cfg);
    let s = summarize(cfg.experiment_kind, &recs, PERMUTATIONS, SEED);
    let d = s
        .ic_dependence
        .get("parrot")
        .ok_or_else(|| format!("no pairs: {:?}", s.notes))?;
    let (rho, p) = (d.rho.unwrap_or(f64::NAN), d.p_value.unwrap_or(f64::NAN));
    ensure(
        d.pairs.len() >= 200 && rho > 0.0 && p < 0.05,
        format!("{} pairs, rho {rho:.3}, p {p:.4}", d.pairs.len()),
    )
}

fn multivariate(channel_independent: &[ResultRecord]) -> Outcome {
    let mut cfg = desk(vec![ModelSpec::nvar()], ExperimentKind::Baseline);
    cfg.mode = ChannelMode::Multivariate;
    cfg.attractor_metrics = false;
    let recs = run(&cfg);
    let (mv, ci) = (median_vpt(&recs, "nvar"), median_vpt(channel_independent, "nvar"));
    ensure(
        mv >= ci,
        format!("median VPT multivariate {mv:.3} vs channel-independent {ci:.3}"),
    )
}

fn determinism() -> Outcome {
    let kinds = [
        ExperimentKind::Baseline,
        ExperimentKind::ContextSweep,
        ExperimentKind::KgramShuffle,
        ExperimentKind::Nonstationary,
        ExperimentKind::IcDependence,
    ];
    let payload = |recs: &[ResultRecord]| {
        serde_json::to_string(&recs.iter().map(|r| r.without_timing()).collect::<Vec<_>>()).unwrap()
    };
    let mut last = Vec::new();
    for kind in kinds {
        let cfg = ExperimentConfig {
            systems: vec!["Lorenz".into(), "Rossler".into()],
            n_ics: 2,
            context_len: 120,
            horizon: 60,
            train_val_split: (100, 20),
            seed: 41,
            experiment_kind: kind,
            kind_params: KindParams {
                k_values: vec![1, 8],
                f_min_grid: vec![1.0, 0.6, 0.2],
                context_grid: vec![10, 40, 120],
                reference_orbit_len: 1000,
                permutations: 99,
            },
            metrics: MetricConfig {
                kl_mc_samples: 200,
                ..Default::default()
            },
            ..Default::default()
        };
        let (a, b) = (run(&cfg), run(&cfg));
        if payload(&a) != payload(&b) {
            return Err(format!("{} payloads differ between runs", kind.as_str()));
        }
        last = a;
    }
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = dir.path().join("records.jsonl");
    let mut w = RecordWriter::append(&path).map_err(|e| e.to_string())?;
    for r in &last {
        w.write(r).map_err(|e| e.to_string())?;
    }
    drop(w);
    let back = load_records(&path).map_err(|e| e.to_string())?;
    let round_trip = back.corrupt.is_empty() && payload(&back.records) == payload(&last);
    let text = std::fs::read_to_string(&path).map_err(|e| e.to_string())?;
    std::fs::write(&path, &text[..text.len() - 40]).map_err(|e| e.to_string())?;
    let cut = load_records(&path).map_err(|e| e.to_string())?;
    let recovered = cut.records.len() == last.len() - 1
        && cut.corrupt.len() == 1
        && payload(&cut.records) == payload(&last[..last.len() - 1]);
    ensure(
        round_trip && recovered,
        format!(
            "5 kinds identical across reruns; round trip {}; truncation recovery {}",
            pf(round_trip),
            pf(recovered)
        ),
    )
}

fn main() {
    let mut failed = 0;
    let mut report = |n: usize, name: &str, f: &mut dyn FnMut() -> Outcome| {
        let start = Instant::now();
        let outcome = f();
        let secs = start.elapsed().as_secs_f64();
        let (tag, detail) = match outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("{tag} {n:>2} {name}: {detail} [{secs:.1} s]");
    };
    report(1, "metric oracles", &mut metric_oracles);
    report(2, "correlation dimension", &mut dimension_oracles);
    report(3, "KL estimator", &mut kl_oracles);
    report(4, "Lyapunov exponents", &mut lyapunov_oracles);
    let mut baseline = Vec::new();
    report(5, "desk-scale benchmark", &mut || {
        baseline = run(&desk(
            vec![ModelSpec::Naive, ModelSpec::nvar(), ModelSpec::parrot()],
            ExperimentKind::Baseline,
        ));
        desk_benchmark(&baseline)
    });
    report(6, "context-length sweep", &mut context_sweep);
    report(7, "k-gram shuffle", &mut shuffle_properties);
    report(8, "nonstationarity", &mut nonstationarity);
    report(9, "initial-condition dependence", &mut ic_dependence_check);
    report(10, "multivariate NVAR", &mut || multivariate(&baseline));
    report(11, "determinism and records", &mut determinism);
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
