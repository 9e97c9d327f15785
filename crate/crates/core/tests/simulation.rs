use bayesgeo::geometry::layer_pca;
use bayesgeo::report::{pc1_by_k, KTrajectory};
use bayesgeo::rng;
use bayesgeo::stats::{calibration, spearman};
use bayesgeo::sula::{generate_corpus, standard_counts, Condition, LabelPolicy, Vocabulary};
use bayesgeo::synthlab::{simulate_sula_model, FixtureConfig};

fn base() -> FixtureConfig {
    FixtureConfig {
        n_layers: 2,
        n_heads: 2,
        d_v: 4,
        manifold_alignment: 0.9,
        key_orthog_target: vec![],
        attention_entropy_schedule: vec![],
        ..FixtureConfig::default()
    }
}

fn corpus() -> Vec<bayesgeo::sula::SulaPrompt> {
    generate_corpus(&standard_counts(60), &LabelPolicy::default(), Condition::Main, 3, &Vocabulary::builtin()).unwrap()
}

fn bayes(c: &[bayesgeo::sula::SulaPrompt]) -> Vec<(String, f64)> {
    c.iter().map(|p| (p.id.clone(), p.posterior.predictive_entropy_bits)).collect()
}

#[test]
fn perfect_fidelity_is_perfectly_calibrated() {
    let c = corpus();
    let sim = simulate_sula_model(&c, 1.0, 0.0, 1, &base()).unwrap();
    let cal = calibration(&sim.predicted, &bayes(&c)).unwrap();
    // predictions are rounded to f32 before storage
    assert!(cal.mae_bits < 1e-7);
    assert!((cal.spearman_rho.unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn zero_fidelity_has_no_k_trend() {
    let c = corpus();
    let sim = simulate_sula_model(&c, 0.0, 0.3, 2, &base()).unwrap();
    let (_, s) = layer_pca(&sim.fixture.bundle, 1, true).unwrap();
    let ks: Vec<f64> = c.iter().map(|p| p.k as f64).collect();
    let pc1: Vec<f64> = s.coords.iter().map(|x| x[0]).collect();
    assert!(spearman(&ks, &pc1).unwrap().abs() < 0.15);
}

#[test]
fn noisy_mae_matches_monte_carlo() {
    let c = corpus();
    let (f, sigma) = (0.8, 0.3);
    let sim = simulate_sula_model(&c, f, sigma, 4, &base()).unwrap();
    let mae = calibration(&sim.predicted, &bayes(&c)).unwrap().mae_bits;
    // Monte-Carlo oracle of E|max(0, fH + 1 − f + ε) − H|
    let mut g = rng::stream(99, 0);
    let reps = 400;
    let mut acc = 0.0;
    for _ in 0..reps {
        for p in &c {
            let h = p.posterior.predictive_entropy_bits;
            let pred = (f * h + (1.0 - f) + sigma * rng::normal(&mut g)).max(0.0);
            acc += (pred - h).abs();
        }
    }
    let oracle = acc / (reps * c.len()) as f64;
    assert!((mae - oracle).abs() < 0.1 * oracle, "{mae} vs {oracle}");
}

#[test]
fn pc1_decreases_with_k() {
    let c = corpus();
    let sim = simulate_sula_model(&c, 1.0, 0.02, 5, &base()).unwrap();
    let r = bayesgeo::geometry::analyze_bundle(
        &sim.fixture.bundle,
        &bayesgeo::geometry::AnalysisOptions { n_resamples: 100, ..Default::default() },
    )
    .unwrap();
    let t: KTrajectory = pc1_by_k(&r).unwrap();
    assert_eq!(t.points.iter().map(|p| p.k).collect::<Vec<_>>(), vec![0, 1, 2, 4, 8]);
    assert!(t.is_monotone_decreasing(), "{:?}", t.points);
    // balanced sequences keep entropy high at every k, so the rank trend is moderate
    assert!(t.spearman_k_pc1.unwrap() < -0.2, "{:?}", t.spearman_k_pc1);
}
