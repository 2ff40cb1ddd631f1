mod common;

use chaosbench::experiments::{
    median_curve, paired_vpt_test, run_benchmark, vpt_trend, ExperimentConfig, ExperimentKind, ModelSpec, ResultRecord,
};
use chaosbench::forecasters::ChannelMode;
use chaosbench::metrics::median;
use chaosbench::systems::Registry;

fn lorenz(models: Vec<ModelSpec>, n_ics: usize) -> ExperimentConfig {
    ExperimentConfig {
        n_ics,
        models,
        attractor_metrics: false,
        ..Default::default()
    }
}

fn run(cfg: &ExperimentConfig) -> Vec<ResultRecord> {
    let (recs, summary) = run_benchmark(cfg, &Registry::builtin()).unwrap();
    assert_eq!(summary.failures, 0);
    recs
}

fn x_channel(recs: &[ResultRecord]) -> Vec<ResultRecord> {
    recs.iter().filter(|r| r.channel == 0).cloned().collect()
}

fn median_vpt(recs: &[ResultRecord], model: &str) -> f64 {
    median(
        &recs
            .iter()
            .filter(|r| r.model_id == model)
            .filter_map(|r| r.vpt())
            .collect::<Vec<_>>(),
    )
    .unwrap()
}

#[test]
fn lorenz_x_channel_nvar_beats_naive_and_naive_error_rises_then_plateaus() {
    let recs = x_channel(&run(&lorenz(vec![ModelSpec::Naive, ModelSpec::nvar()], 60)));
    let test = paired_vpt_test(&recs, "nvar", "naive", 9999, 0).unwrap();
    assert_eq!(test.n_pairs, 60);
    assert!(test.median_a > test.median_b, "{test:?}");

    let curves: Vec<&[f64]> = recs
        .iter()
        .filter(|r| r.model_id == "naive")
        .map(|r| r.metrics.as_ref().unwrap().smape_curve.as_slice())
        .collect();
    let curve = median_curve(&curves);
    let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
    let (early, middle, late) = (mean(&curve[..5]), mean(&curve[100..200]), mean(&curve[200..]));
    assert!(middle > 3.0 * early, "{early} {middle}");
    assert!((late - middle).abs() < 0.2 * middle, "{middle} {late}");
}

#[test]
fn lorenz_x_channel_parrot_improves_with_context() {
    let mut cfg = lorenz(vec![ModelSpec::parrot()], 60);
    cfg.experiment_kind = ExperimentKind::ContextSweep;
    let recs = x_channel(&run(&cfg));
    let trend = vpt_trend(&recs, "parrot", "context_len").unwrap();
    let v: Vec<f64> = trend.points.iter().map(|p| p.1).collect();
    assert!(v.windows(2).all(|w| w[1] >= w[0]), "{:?}", trend.points);
    assert!(v[4] > v[0], "{:?}", trend.points);
}

#[test]
fn lorenz_multivariate_nvar_at_least_channel_independent() {
    let mut cfg = lorenz(vec![ModelSpec::nvar()], 20);
    let ci = run(&cfg);
    cfg.mode = ChannelMode::Multivariate;
    let mv = run(&cfg);
    assert_eq!(mv.len(), 60);
    assert!(
        median_vpt(&mv, "nvar") >= median_vpt(&ci, "nvar"),
        "{} vs {}",
        median_vpt(&mv, "nvar"),
        median_vpt(&ci, "nvar")
    );
}

#[test]
fn parrot_median_on_the_desk_suite_lies_in_the_expected_band() {
    let cfg = ExperimentConfig {
        systems: common::DESK_SYSTEMS.iter().map(|s| s.to_string()).collect(),
        ..lorenz(vec![ModelSpec::parrot()], 20)
    };
    let v = median_vpt(&run(&cfg), "parrot");
    assert!((0.3..=1.5).contains(&v), "parrot median VPT {v}");
}

#[test]
fn shuffled_context_degrades_parrot_on_lorenz() {
    let mut cfg = lorenz(vec![ModelSpec::parrot()], 20);
    cfg.experiment_kind = ExperimentKind::KgramShuffle;
    cfg.kind_params.k_values = vec![1, 8, 64];
    let baseline = median_vpt(&run(&lorenz(vec![ModelSpec::parrot()], 20)), "parrot");
    let recs = run_benchmark(&cfg, &Registry::builtin()).unwrap().0;
    for k in [1, 8, 64] {
        let shuffled: Vec<ResultRecord> = recs
            .iter()
            .filter(|r| r.kind_params["k"] == k && r.kind_params["condition"] == "shuffled")
            .cloned()
            .collect();
        let v = median_vpt(&shuffled, "parrot");
        assert!(v < baseline, "k = {k}: shuffled {v} vs full context {baseline}");
    }
}
