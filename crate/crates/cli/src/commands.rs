use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use bayesgeo::bundle::{read_bundle, validate_bundle, write_bundle, ActivationBundle};
use bayesgeo::geometry::{
    analyze_bundle, attention_entropy_profile, orthogonality_profile, AnalysisOptions, Thresholds,
};
use bayesgeo::interventions::{
    apply_spec_offline, build_spec, complement_ids, estimate_axes, evaluate_intervention, read_spec, split_ids,
    write_spec, AxisSet, EvalOptions, SpecOptions, SPEC_FILE,
};
use bayesgeo::report::{self, diff_runs, write_geometry_artifacts, write_outcome_artifacts, write_report, ReportInputs};
use bayesgeo::sula::{
    entropy_curve, exact_p_positive, exact_posterior, generate_corpus, parse_k_counts, parse_labels, read_corpus,
    standard_counts, write_corpus, Condition, Label, LabelPolicy, Vocabulary,
};
use bayesgeo::synthlab::{generate_fixture, simulate_sula_model, FixtureConfig};

use crate::output::Run;
use crate::*;

pub const AXIS_SET_FILE: &str = "entropy_axes.json";
pub const CORPUS_FILE: &str = "corpus.jsonl";
pub const FIXTURE_SUMMARY: &str = "fixture_summary.json";

pub fn dispatch(cmd: Cmd) -> Result<()> {
    match cmd {
        Cmd::Sula(SulaCmd::Gen(a)) => sula_gen(&a),
        Cmd::Sula(SulaCmd::Oracle(a)) => sula_oracle(&a),
        Cmd::Sula(SulaCmd::Curve(a)) => sula_curve(&a),
        Cmd::Bundle(BundleCmd::Validate(a)) => bundle_validate(&a),
        Cmd::Analyze(a) => analyze(&a),
        Cmd::Axis(AxisCmd::Estimate(a)) => axis_estimate(&a),
        Cmd::Spec(SpecCmd::Build(a)) => spec_build(&a),
        Cmd::Spec(SpecCmd::Apply(a)) => spec_apply(&a),
        Cmd::Evaluate(a) => evaluate(&a),
        Cmd::Report(a) => report_cmd(&a),
        Cmd::Synth(SynthCmd::Fixture(a)) => synth_fixture(&a),
        Cmd::Synth(SynthCmd::Simulate(a)) => synth_simulate(&a),
    }
}

fn parse_usize_list(s: &str, what: &str) -> Result<Vec<usize>> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| t.parse().map_err(|_| BadConfig(format!("{what}: not an integer: {t}")).into()))
        .collect()
}

fn parse_layers(s: &str, n_layers: usize) -> Result<Vec<usize>> {
    if s.trim() == "all" {
        return Ok((0..n_layers).collect());
    }
    let layers = parse_usize_list(s, "layers")?;
    if let Some(l) = layers.iter().find(|&&l| l >= n_layers) {
        return Err(BadConfig(format!("layer {l} out of range for {n_layers} layers")).into());
    }
    Ok(layers)
}

fn load_bundle(path: &Path) -> Result<ActivationBundle> {
    let reader = read_bundle(path, true).with_context(|| format!("opening bundle {}", path.display()))?;
    reader.load().with_context(|| format!("loading bundle {}", path.display()))
}

fn load_axes(path: &Path) -> Result<(AxisSet, PathBuf)> {
    let file = if path.is_dir() { path.join(AXIS_SET_FILE) } else { path.to_path_buf() };
    let text = fs::read_to_string(&file).with_context(|| format!("reading {}", file.display()))?;
    Ok((serde_json::from_str(&text).with_context(|| format!("parsing {}", file.display()))?, file))
}

fn load_fixture_config(path: Option<&Path>) -> Result<FixtureConfig> {
    match path {
        None => Ok(FixtureConfig::default()),
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            serde_json::from_str(&text).map_err(|e| BadConfig(format!("fixture config {}: {e}", p.display())).into())
        }
    }
}

fn sula_gen(a: &SulaGenArgs) -> Result<()> {
    let counts = match &a.counts {
        Some(c) => parse_k_counts(c)?,
        None => standard_counts(a.per_k),
    };
    let condition: Condition = a.condition.parse()?;
    let vocab = match &a.vocab {
        Some(d) => Vocabulary::load(d)?,
        None => Vocabulary::builtin(),
    };
    let policy = LabelPolicy::with_consistency(a.consistency);
    let corpus = generate_corpus(&counts, &policy, condition, a.seed, &vocab)?;
    let mut run = Run::new("sula gen", a, &a.out)?;
    if let Some(d) = &a.vocab {
        run.input("vocab", d);
    }
    write_corpus(&run.dir().join(CORPUS_FILE), &corpus)?;
    let ks: Vec<usize> = counts.keys().copied().collect();
    run.write_json("entropy_curve.json", &entropy_curve(&policy, &ks)?)?;
    run.finish()?;
    println!("{} prompts -> {}", corpus.len(), a.out.join(CORPUS_FILE).display());
    Ok(())
}

fn sula_oracle(a: &SulaOracleArgs) -> Result<()> {
    let labels = parse_labels(&a.labels)?;
    let post = exact_posterior(&labels)?;
    let exact = exact_p_positive(post.n_pos, post.n_neg);
    if a.json {
        let mut v = serde_json::to_value(&post)?;
        v["p_positive_exact"] = exact.to_string().into();
        println!("{}", serde_json::to_string_pretty(&v)?);
        return Ok(());
    }
    let seq: String = labels
        .iter()
        .map(|l| if *l == Label::Positive { '+' } else { '-' })
        .collect();
    println!("labels                  {seq}");
    println!("n_pos n_neg             {} {}", post.n_pos, post.n_neg);
    println!("p_positive              {exact} = {}", post.p_positive);
    println!("predictive_entropy_bits {}", post.predictive_entropy_bits);
    println!("theta_entropy_nats      {}", post.theta_posterior_entropy_nats);
    println!("mixture_weights         {}", post.mixture_weights_exact.join(" "));
    Ok(())
}

fn sula_curve(a: &SulaCurveArgs) -> Result<()> {
    let ks = parse_usize_list(&a.k, "k")?;
    let curve = entropy_curve(&LabelPolicy::with_consistency(a.consistency), &ks)?;
    if a.json {
        println!("{}", serde_json::to_string_pretty(&curve)?);
        return Ok(());
    }
    println!("k\texpected_bits\tmarginal_bits\ttheta_nats");
    for p in &curve.points {
        println!(
            "{}\t{:.6}\t{:.6}\t{:.6}",
            p.k, p.expected_entropy_bits, p.marginal_entropy_bits, p.expected_theta_entropy_nats
        );
    }
    Ok(())
}

fn bundle_validate(a: &ValidateArgs) -> Result<()> {
    let violations = validate_bundle(&a.bundle)?;
    for v in &violations {
        println!("{v}");
    }
    if let Some(out) = &a.out {
        let mut run = Run::new("bundle validate", a, out)?;
        run.input("bundle", &a.bundle);
        run.write_json("violations.json", &violations)?;
        run.finish()?;
    }
    if violations.is_empty() {
        println!("ok: {}", a.bundle.display());
        Ok(())
    } else {
        Err(ValidationFailed(format!("{} violation(s) in {}", violations.len(), a.bundle.display())).into())
    }
}

fn analyze(a: &AnalyzeArgs) -> Result<()> {
    let bundle = load_bundle(&a.bundle)?;
    let mut run = Run::new(&format!("analyze {}", serde_json::to_value(a.analysis)?.as_str().unwrap_or("")), a, &a.out)?;
    run.input("bundle", &a.bundle);
    match a.analysis {
        Analysis::Keys => {
            let o = orthogonality_profile(&bundle)?;
            run.write_json("orthogonality.json", &o)?;
            run.write("orthogonality.csv", report::orthogonality_csv(&o).as_bytes())?;
            let means = o.layer_means();
            println!(
                "mean key orthogonality {:.4} (gaussian baseline {:.4})",
                bayesgeo::stats::mean(&means),
                o.gaussian_baseline
            );
        }
        Analysis::Attention => {
            let p = attention_entropy_profile(&bundle, a.resamples, a.seed)?;
            run.write_json("attention.json", &p)?;
            run.write("attention.csv", report::attention_csv(&p).as_bytes())?;
            println!("attention entropy reduction {:.4}", p.reduction_fraction);
        }
        Analysis::Manifold | Analysis::All => {
            let all = a.analysis == Analysis::All;
            let opts = AnalysisOptions {
                thresholds: Thresholds {
                    manifold_pc: a.manifold_threshold,
                    orthogonality_max: a.orthogonality_threshold,
                    orthogonality_layer_fraction: a.orthogonality_layer_fraction,
                    focusing_reduction: a.focusing_threshold,
                },
                n_resamples: a.resamples,
                seed: a.seed,
                keys: all,
                attention: all,
            };
            let r = analyze_bundle(&bundle, &opts)?;
            write_geometry_artifacts(&r, run.dir())?;
            println!(
                "{}: final-layer PC1 {:.4}, PC1+PC2 {:.4}",
                r.model_name, r.final_layer.pc1_ratio, r.final_layer.pc12_ratio
            );
            if let Some(c) = &r.classification {
                println!("verdict {}", serde_json::to_value(c.verdict)?.as_str().unwrap_or(""));
            }
        }
    }
    run.finish()
}

fn axis_estimate(a: &AxisEstimateArgs) -> Result<()> {
    let bundle = load_bundle(&a.bundle)?;
    let layers = parse_layers(&a.layers, bundle.dims.n_layers)?;
    let (est, eval) = split_ids(&bundle.prompt_ids(), a.n_estimation, a.seed)?;
    let axes = estimate_axes(&bundle, &layers, &bundle.entropies(), &est)?;
    let mut run = Run::new("axis estimate", a, &a.out)?;
    run.input("bundle", &a.bundle);
    run.write_json(AXIS_SET_FILE, &axes)?;
    run.write("estimation_ids.txt", (est.join("\n") + "\n").as_bytes())?;
    run.write("evaluation_ids.txt", (eval.join("\n") + "\n").as_bytes())?;
    run.finish()?;
    for ax in &axes.axes {
        println!("layer {:>3}  |corr| {:.4}  sigma {:.4}", ax.layer, ax.estimation_corr, ax.sigma);
    }
    Ok(())
}

fn spec_build(a: &SpecBuildArgs) -> Result<()> {
    let bundle = load_bundle(&a.bundle)?;
    let (axes, axes_file) = load_axes(&a.axes)?;
    let layers = parse_layers(&a.layers, bundle.dims.n_layers)?;
    let opts = SpecOptions {
        mode: a.mode.parse()?,
        lambda: a.lambda,
        shift_sigmas: a.shift_sigmas,
        axis_source: a.axis_source.parse()?,
        seed: a.seed,
    };
    let spec = build_spec(&bundle, &axes, &layers, &opts)?;
    let mut run = Run::new("spec build", a, &a.out)?;
    run.input("bundle", &a.bundle).input("axes", &axes_file);
    write_spec(&spec, run.dir())?;
    run.finish()?;
    println!("{}", spec.describe());
    Ok(())
}

fn spec_apply(a: &SpecApplyArgs) -> Result<()> {
    let bundle = load_bundle(&a.bundle)?;
    let spec = read_spec(&a.spec)?;
    let out = apply_spec_offline(&bundle, &spec)?;
    let mut run = Run::new("spec apply", a, &a.out)?;
    run.input("bundle", &a.bundle).input("spec", &a.spec);
    write_bundle(&out, run.dir())?;
    run.finish()?;
    println!("applied {} -> {}", spec.describe(), a.out.display());
    Ok(())
}

fn evaluate(a: &EvaluateArgs) -> Result<()> {
    let baseline = load_bundle(&a.baseline)?;
    let intervened = load_bundle(&a.intervened)?;
    let spec = read_spec(&a.spec)?;
    let (axes, axes_file) = load_axes(&a.axes)?;
    let corpus = a.corpus.as_deref().map(read_corpus).transpose()?;
    let eval_ids = complement_ids(&baseline, &axes.estimation_ids);
    let outcome = evaluate_intervention(
        &baseline,
        &intervened,
        &spec,
        &axes,
        &eval_ids,
        corpus.as_deref(),
        &EvalOptions {
            n_resamples: a.resamples,
            seed: a.seed,
        },
    )?;
    let mut run = Run::new("evaluate", a, &a.out)?;
    run.input("baseline", &a.baseline)
        .input("intervened", &a.intervened)
        .input("axes", &axes_file);
    let spec_path = if a.spec.is_dir() { a.spec.join(SPEC_FILE) } else { a.spec.clone() };
    run.input("spec", &spec_path);
    if let Some(c) = &a.corpus {
        run.input("corpus", c);
    }
    write_outcome_artifacts(&outcome, run.dir())?;
    run.finish()?;
    for e in &outcome.layers {
        println!(
            "layer {:>3}{} corr {:+.4} -> {:+.4}",
            e.layer,
            if e.intervened { "*" } else { " " },
            e.baseline_corr,
            e.intervened_corr
        );
    }
    if let Some(b) = &outcome.behavior {
        println!("MAE {:.4} -> {:.4} ({:+.2}%)", b.baseline.mae_bits, b.intervened.mae_bits, 100.0 * b.mae_rel_change);
    }
    Ok(())
}

fn report_cmd(a: &ReportArgs) -> Result<()> {
    if let Some(pair) = &a.diff {
        let d = diff_runs(&pair[0], &pair[1])?;
        for f in d.files.iter().filter(|f| f.status != report::FileStatus::Same) {
            let extra = f.max_abs_diff.map(|m| format!(" max_abs_diff {m}")).unwrap_or_default();
            println!("{:?} {}{extra}", f.status, f.name);
        }
        if let Some(out) = &a.out {
            let run = Run::new("report diff", a, out)?;
            run.write_json("diff.json", &d)?;
            run.finish()?;
        }
        return if d.identical {
            println!("identical");
            Ok(())
        } else {
            Err(ValidationFailed("runs differ".into()).into())
        };
    }
    let dir = a.run.as_ref().expect("clap requires --run without --diff");
    let inputs = ReportInputs::scan(dir)?;
    let out = a.out.clone().unwrap_or_else(|| dir.clone());
    let mut run = Run::new("report", a, &out)?;
    run.input("run", dir);
    write_report(&inputs, run.dir())?;
    run.finish()?;
    println!("{}", out.join(report::SUMMARY).display());
    Ok(())
}

fn synth_fixture(a: &SynthFixtureArgs) -> Result<()> {
    let mut cfg = load_fixture_config(a.fixture_config.as_deref())?;
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(n) = a.n_prompts {
        cfg.n_prompts = n;
    }
    if let Some(r) = a.alignment {
        cfg.manifold_alignment = r;
    }
    let fx = generate_fixture(&cfg)?;
    let mut run = Run::new("synth fixture", &cfg, &a.out)?;
    if let Some(p) = &a.fixture_config {
        run.input("fixture_config", p);
    }
    write_bundle(&fx.bundle, run.dir())?;
    run.write_json(FIXTURE_SUMMARY, &fx.summary)?;
    run.finish()?;
    println!(
        "{}: {} prompts, expected PC1 share {:.4}",
        cfg.model_name, cfg.n_prompts, fx.summary.expected_pc1_ratio
    );
    Ok(())
}

fn synth_simulate(a: &SynthSimulateArgs) -> Result<()> {
    let mut cfg = load_fixture_config(a.fixture_config.as_deref())?;
    if let Some(r) = a.alignment {
        cfg.manifold_alignment = r;
    }
    let corpus = read_corpus(&a.corpus)?;
    let sim = simulate_sula_model(&corpus, a.fidelity, a.noise, a.seed, &cfg)?;
    let mut run = Run::new("synth simulate", a, &a.out)?;
    run.input("corpus", &a.corpus);
    if let Some(p) = &a.fixture_config {
        run.input("fixture_config", p);
    }
    write_bundle(&sim.fixture.bundle, run.dir())?;
    run.write_json(FIXTURE_SUMMARY, &sim.fixture.summary)?;
    let mut csv = String::from("prompt_id,predicted_entropy_bits\n");
    for (id, h) in &sim.predicted {
        csv.push_str(&format!("{id},{h}\n"));
    }
    run.write("predictions.csv", csv.as_bytes())?;
    run.finish()?;
    println!("simulated {} prompts -> {}", corpus.len(), a.out.display());
    Ok(())
}
