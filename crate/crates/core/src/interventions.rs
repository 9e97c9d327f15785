//! Entropy-axis estimation and the cut / only / shift operators.
//!
//! Axes live in the concatenated `H·d_v` value space of one layer. They are
//! estimated as PC1 of standardized values on a held-out estimation set, then
//! applied to raw (unstandardized) value vectors.
//!
//! Offline application edits dumped values only. Downstream layers and logits
//! are not recomputed, so behavioral deltas are zero unless the intervened
//! bundle comes from a runner that applied the spec in the forward pass.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bundle::{decode_record, encode_record, ActivationBundle};
use crate::digest::hash_id_set;
use crate::error::{Error, Result};
use crate::geometry::{pca, standardize_values};
use crate::rng;
use crate::stats::{self, BootstrapCi, Calibration};
use crate::sula::SulaPrompt;

/// Tolerance on ‖u‖ = 1 for the operators.
pub const UNIT_TOL: f64 = 1e-9;
/// Projection spread below this fraction of the RMS value norm counts as
/// collapsed, and its correlation with entropy is reported as 0.
pub const COLLAPSE_REL: f64 = 1e-5;
pub const SPEC_FILE: &str = "intervention_spec.json";
pub const AXES_FILE: &str = "axes.bin";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyAxis {
    pub layer: usize,
    pub u: Vec<f64>,
    pub sign_oriented: bool,
    pub estimation_corr: f64,
    pub estimation_set_hash: String,
    /// Sample std of `v·u` over the estimation set.
    pub sigma: f64,
}

/// A set of axes estimated on one estimation set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisSet {
    pub model_name: String,
    pub estimation_ids: Vec<String>,
    pub estimation_set_hash: String,
    pub axes: Vec<EntropyAxis>,
}

impl AxisSet {
    pub fn axis(&self, layer: usize) -> Option<&EntropyAxis> {
        self.axes.iter().find(|a| a.layer == layer)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Correlation of `v·u` with entropy, 0 when the projection has collapsed.
pub fn axis_entropy_corr(rows: &[Vec<f64>], u: &[f64], entropies: &[f64]) -> f64 {
    let proj: Vec<f64> = rows.iter().map(|r| dot(r, u)).collect();
    projection_corr(rows, &proj, entropies)
}

fn projection_corr(rows: &[Vec<f64>], proj: &[f64], entropies: &[f64]) -> f64 {
    let rms = (rows.iter().map(|r| dot(r, r)).sum::<f64>() / rows.len().max(1) as f64).sqrt();
    if rows.len() < 3 || stats::sample_std(proj) <= COLLAPSE_REL * rms {
        return 0.0;
    }
    stats::pearson(proj, entropies).unwrap_or(0.0)
}

fn id_positions(bundle: &ActivationBundle, ids: &[String]) -> Result<Vec<usize>> {
    let index: HashMap<&str, usize> = bundle
        .prompts
        .iter()
        .enumerate()
        .map(|(i, p)| (p.id.as_str(), i))
        .collect();
    ids.iter()
        .map(|id| {
            index
                .get(id.as_str())
                .copied()
                .ok_or_else(|| Error::Misaligned(format!("prompt {id} is not in bundle {}", bundle.model_name)))
        })
        .collect()
}

fn layer_rows(bundle: &ActivationBundle, layer: usize, idx: &[usize]) -> Vec<Vec<f64>> {
    idx.iter()
        .map(|&p| bundle.values[layer][p].iter().map(|&x| f64::from(x)).collect())
        .collect()
}

fn check_layer(bundle: &ActivationBundle, layer: usize) -> Result<()> {
    if layer >= bundle.dims.n_layers {
        return Err(Error::InvalidInput(format!(
            "layer {layer} out of range (bundle has {})",
            bundle.dims.n_layers
        )));
    }
    Ok(())
}

/// PC1 of standardized values over `estimation_ids`, oriented so that the
/// raw projection correlates positively with `entropies`.
///
/// `entropies` is indexed like the bundle's prompts. With no usable
/// correlation the PCA's first-loading sign is kept and `sign_oriented` is
/// false.
pub fn estimate_axis(
    bundle: &ActivationBundle,
    layer: usize,
    entropies: &[f64],
    estimation_ids: &[String],
) -> Result<EntropyAxis> {
    check_layer(bundle, layer)?;
    if entropies.len() != bundle.n_prompts() {
        return Err(Error::Shape(format!(
            "{} entropies for {} prompts",
            entropies.len(),
            bundle.n_prompts()
        )));
    }
    let idx = id_positions(bundle, estimation_ids)?;
    let rows = layer_rows(bundle, layer, &idx);
    let vm = standardize_values(&rows)?;
    let mut u = pca(&vm, None)?.axis1;
    let n = norm(&u);
    u.iter_mut().for_each(|x| *x /= n);
    let h: Vec<f64> = idx.iter().map(|&i| entropies[i]).collect();
    let mut proj: Vec<f64> = rows.iter().map(|r| dot(r, &u)).collect();
    let corr = projection_corr(&rows, &proj, &h);
    if corr < 0.0 {
        u.iter_mut().for_each(|x| *x = -*x);
        proj.iter_mut().for_each(|x| *x = -*x);
    }
    Ok(EntropyAxis {
        layer,
        sigma: stats::sample_std(&proj),
        u,
        sign_oriented: corr != 0.0,
        estimation_corr: corr.abs(),
        estimation_set_hash: hash_id_set(estimation_ids),
    })
}

pub fn estimate_axes(
    bundle: &ActivationBundle,
    layers: &[usize],
    entropies: &[f64],
    estimation_ids: &[String],
) -> Result<AxisSet> {
    let axes = layers
        .par_iter()
        .map(|&l| estimate_axis(bundle, l, entropies, estimation_ids))
        .collect::<Result<Vec<_>>>()?;
    Ok(AxisSet {
        model_name: bundle.model_name.clone(),
        estimation_ids: estimation_ids.to_vec(),
        estimation_set_hash: hash_id_set(estimation_ids),
        axes,
    })
}

/// Unit Gaussian direction orthogonal to `u_true`, drawn from a stream keyed
/// by `(seed, layer)`.
pub fn random_control_axis(layer: usize, u_true: &[f64], seed: u64) -> Result<Vec<f64>> {
    check_unit(u_true)?;
    let d = u_true.len();
    if d < 2 {
        return Err(Error::InvalidInput("no direction is orthogonal to a 1-d axis".into()));
    }
    let mut g = rng::stream(rng::derive_seed(seed, "random-axis"), layer as u64);
    loop {
        let mut r = rng::normal_vec(&mut g, d);
        // two passes of Gram-Schmidt for orthogonality at round-off level
        for _ in 0..2 {
            let c = dot(&r, u_true);
            r.iter_mut().zip(u_true).for_each(|(x, u)| *x -= c * u);
        }
        let n = norm(&r);
        if n > 1e-6 {
            r.iter_mut().for_each(|x| *x /= n);
            return Ok(r);
        }
    }
}

/// A random control with the same bookkeeping as the true axis it replaces.
/// `sigma` is re-measured on the estimation rows.
pub fn random_control_for(
    bundle: &ActivationBundle,
    truth: &EntropyAxis,
    estimation_ids: &[String],
    seed: u64,
) -> Result<EntropyAxis> {
    let u = random_control_axis(truth.layer, &truth.u, seed)?;
    let idx = id_positions(bundle, estimation_ids)?;
    let rows = layer_rows(bundle, truth.layer, &idx);
    let proj: Vec<f64> = rows.iter().map(|r| dot(r, &u)).collect();
    let h: Vec<f64> = idx.iter().map(|&i| bundle.prompts[i].predictive_entropy_bits).collect();
    Ok(EntropyAxis {
        layer: truth.layer,
        sigma: stats::sample_std(&proj),
        estimation_corr: projection_corr(&rows, &proj, &h),
        u,
        sign_oriented: false,
        estimation_set_hash: truth.estimation_set_hash.clone(),
    })
}

fn check_unit(u: &[f64]) -> Result<()> {
    let n = norm(u);
    if (n - 1.0).abs() > UNIT_TOL {
        return Err(Error::InvalidInput(format!("axis is not unit length (norm {n})")));
    }
    Ok(())
}

fn check_dims(v: &[f64], u: &[f64]) -> Result<()> {
    if v.len() != u.len() {
        return Err(Error::Shape(format!("vector of width {} vs axis of width {}", v.len(), u.len())));
    }
    check_unit(u)
}

/// `v − λ(v·u)u`
pub fn apply_cut(v: &[f64], u: &[f64], lambda: f64) -> Result<Vec<f64>> {
    check_dims(v, u)?;
    let c = lambda * dot(v, u);
    Ok(v.iter().zip(u).map(|(x, y)| x - c * y).collect())
}

/// `(v·u)u`
pub fn apply_only(v: &[f64], u: &[f64]) -> Result<Vec<f64>> {
    check_dims(v, u)?;
    let c = dot(v, u);
    Ok(u.iter().map(|y| c * y).collect())
}

/// `v + δu`, with `δ = s·σ`.
pub fn apply_shift(v: &[f64], u: &[f64], delta: f64) -> Result<Vec<f64>> {
    check_dims(v, u)?;
    Ok(v.iter().zip(u).map(|(x, y)| x + delta * y).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Cut,
    Only,
    Shift,
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cut" => Ok(Self::Cut),
            "only" => Ok(Self::Only),
            "shift" => Ok(Self::Shift),
            _ => Err(Error::Unknown {
                kind: "intervention mode",
                value: s.to_string(),
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AxisSource {
    True,
    Random,
}

impl std::str::FromStr for AxisSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "true" => Ok(Self::True),
            "random" => Ok(Self::Random),
            _ => Err(Error::Unknown {
                kind: "axis source",
                value: s.to_string(),
            }),
        }
    }
}

/// One single-direction intervention per listed layer.
#[derive(Debug, Clone, PartialEq)]
pub struct InterventionSpec {
    pub mode: Mode,
    pub lambda: f64,
    pub shift_sigmas: f64,
    pub axis_source: AxisSource,
    pub layers: Vec<usize>,
    pub axes: Vec<Vec<f64>>,
    pub sigma: Vec<f64>,
    pub seed: u64,
    pub estimation_ids: Vec<String>,
    pub estimation_set_hash: String,
}

impl InterventionSpec {
    /// λ = 0 cut on no layers.
    pub fn identity() -> Self {
        Self {
            mode: Mode::Cut,
            lambda: 0.0,
            shift_sigmas: 1.0,
            axis_source: AxisSource::True,
            layers: Vec::new(),
            axes: Vec::new(),
            sigma: Vec::new(),
            seed: 0,
            estimation_ids: Vec::new(),
            estimation_set_hash: hash_id_set::<String>(&[]),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.axes.len() != self.layers.len() {
            return Err(Error::InvalidInput(format!(
                "{} axes for {} layers",
                self.axes.len(),
                self.layers.len()
            )));
        }
        if self.sigma.len() != self.layers.len() {
            return Err(Error::InvalidInput(format!(
                "{} sigma values for {} layers",
                self.sigma.len(),
                self.layers.len()
            )));
        }
        if self.mode == Mode::Shift && self.sigma.iter().any(|s| !s.is_finite() || *s < 0.0) {
            return Err(Error::InvalidInput("shift mode needs a finite sigma per layer".into()));
        }
        let distinct: BTreeSet<usize> = self.layers.iter().copied().collect();
        if distinct.len() != self.layers.len() {
            return Err(Error::InvalidInput("a layer is listed twice".into()));
        }
        for u in &self.axes {
            check_unit(u)?;
        }
        if hash_id_set(&self.estimation_ids) != self.estimation_set_hash {
            return Err(Error::InvalidInput("estimation ids do not match estimation_set_hash".into()));
        }
        Ok(())
    }

    /// Transform one value vector of `layers[i]`.
    pub fn transform(&self, i: usize, v: &[f64]) -> Result<Vec<f64>> {
        let u = &self.axes[i];
        match self.mode {
            Mode::Cut => apply_cut(v, u, self.lambda),
            Mode::Only => apply_only(v, u),
            Mode::Shift => apply_shift(v, u, self.shift_sigmas * self.sigma[i]),
        }
    }

    pub fn describe(&self) -> String {
        format!(
            "intervention mode={} axis_source={} layers={:?} lambda={} shift_sigmas={} seed={}",
            serde_json::to_value(self.mode).expect("enum").as_str().unwrap_or("?"),
            serde_json::to_value(self.axis_source).expect("enum").as_str().unwrap_or("?"),
            self.layers,
            self.lambda,
            self.shift_sigmas,
            self.seed
        )
    }
}

/// Options for [`build_spec`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpecOptions {
    pub mode: Mode,
    pub lambda: f64,
    pub shift_sigmas: f64,
    pub axis_source: AxisSource,
    pub seed: u64,
}

impl Default for SpecOptions {
    fn default() -> Self {
        Self {
            mode: Mode::Cut,
            lambda: 1.0,
            shift_sigmas: 1.0,
            axis_source: AxisSource::True,
            seed: 0,
        }
    }
}

/// Spec over `layers` from estimated axes. Random sources replace each true
/// axis by an orthogonal control whose σ is measured on the estimation rows.
pub fn build_spec(bundle: &ActivationBundle, axes: &AxisSet, layers: &[usize], opts: &SpecOptions) -> Result<InterventionSpec> {
    let mut us = Vec::with_capacity(layers.len());
    let mut sigma = Vec::with_capacity(layers.len());
    for &l in layers {
        check_layer(bundle, l)?;
        let truth = axes
            .axis(l)
            .ok_or_else(|| Error::InvalidInput(format!("no estimated axis for layer {l}")))?;
        let a = match opts.axis_source {
            AxisSource::True => truth.clone(),
            AxisSource::Random => random_control_for(bundle, truth, &axes.estimation_ids, opts.seed)?,
        };
        us.push(a.u);
        sigma.push(a.sigma);
    }
    let spec = InterventionSpec {
        mode: opts.mode,
        lambda: opts.lambda,
        shift_sigmas: opts.shift_sigmas,
        axis_source: opts.axis_source,
        layers: layers.to_vec(),
        axes: us,
        sigma,
        seed: opts.seed,
        estimation_ids: axes.estimation_ids.clone(),
        estimation_set_hash: axes.estimation_set_hash.clone(),
    };
    spec.validate()?;
    Ok(spec)
}

/// Copy of `bundle` with the spec applied to every prompt's values at each
/// listed layer, plus one provenance line.
pub fn apply_spec_offline(bundle: &ActivationBundle, spec: &InterventionSpec) -> Result<ActivationBundle> {
    spec.validate()?;
    let width = bundle.dims.value_width();
    let mut out = bundle.clone();
    for (i, &l) in spec.layers.iter().enumerate() {
        check_layer(bundle, l)?;
        if spec.axes[i].len() != width {
            return Err(Error::Shape(format!(
                "axis for layer {l} has width {}, bundle values have {width}",
                spec.axes[i].len()
            )));
        }
        out.values[l] = bundle.values[l]
            .par_iter()
            .map(|row| {
                let v: Vec<f64> = row.iter().map(|&x| f64::from(x)).collect();
                Ok(spec.transform(i, &v)?.into_iter().map(|x| x as f32).collect())
            })
            .collect::<Result<Vec<Vec<f32>>>>()?;
    }
    out.provenance.push(spec.describe());
    Ok(out)
}

/// On-disk form of [`InterventionSpec`]; axes are in `axes_file`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpecFile {
    pub mode: Mode,
    pub lambda: f64,
    pub shift_sigmas: f64,
    pub axis_source: AxisSource,
    pub layers: Vec<usize>,
    pub sigma: Vec<f64>,
    pub seed: u64,
    pub axes_file: String,
    pub estimation_set_hash: String,
    pub estimation_ids: Vec<String>,
}

/// Write `intervention_spec.json` and the axes binary into `dir`. Each axis is
/// one rank-1 record in the bundle record layout, in `layers` order.
pub fn write_spec(spec: &InterventionSpec, dir: &Path) -> Result<PathBuf> {
    spec.validate()?;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut bin = Vec::new();
    for u in &spec.axes {
        let data: Vec<f32> = u.iter().map(|&x| x as f32).collect();
        bin.extend(encode_record(&[u.len()], &data));
    }
    let axes_path = dir.join(AXES_FILE);
    fs::write(&axes_path, bin).map_err(|e| Error::io(&axes_path, e))?;
    let file = SpecFile {
        mode: spec.mode,
        lambda: spec.lambda,
        shift_sigmas: spec.shift_sigmas,
        axis_source: spec.axis_source,
        layers: spec.layers.clone(),
        sigma: spec.sigma.clone(),
        seed: spec.seed,
        axes_file: AXES_FILE.to_string(),
        estimation_set_hash: spec.estimation_set_hash.clone(),
        estimation_ids: spec.estimation_ids.clone(),
    };
    let path = dir.join(SPEC_FILE);
    let mut json = serde_json::to_string_pretty(&file)?;
    json.push('\n');
    fs::write(&path, json).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

/// Read a spec written by [`write_spec`] (or by another tool honoring the
/// same layout). Axes are renormalized after widening from f32.
pub fn read_spec(path: &Path) -> Result<InterventionSpec> {
    let path = if path.is_dir() { path.join(SPEC_FILE) } else { path.to_path_buf() };
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let file: SpecFile = serde_json::from_str(&text)?;
    let dir = path.parent().unwrap_or(Path::new("."));
    let axes_path = dir.join(&file.axes_file);
    let bin = fs::read(&axes_path).map_err(|e| Error::io(&axes_path, e))?;
    let name = axes_path.display().to_string();
    let mut axes = Vec::with_capacity(file.layers.len());
    let mut offset = 0usize;
    while offset < bin.len() {
        // rank-1 header: magic, version, rank, one u64 dim
        let bad = || Error::Format(format!("{name} at offset {offset}"));
        let head = bin.get(offset..offset + 24).ok_or_else(bad)?;
        let rank = u32::from_le_bytes(head[12..16].try_into().expect("4 bytes"));
        if rank != 1 {
            return Err(Error::Format(format!("{name}: axis record of rank {rank}")));
        }
        let d = u64::from_le_bytes(head[16..24].try_into().expect("8 bytes")) as usize;
        let len = 24 + 4 * d + 4;
        let rec = bin.get(offset..offset + len).ok_or_else(bad)?;
        let (_, data) = decode_record(rec, &name, offset as u64)?;
        offset += len;
        let mut u: Vec<f64> = data.iter().map(|&x| f64::from(x)).collect();
        let n = norm(&u);
        if n == 0.0 {
            return Err(Error::Degenerate(format!("{name}: zero axis")));
        }
        u.iter_mut().for_each(|x| *x /= n);
        axes.push(u);
    }
    let spec = InterventionSpec {
        mode: file.mode,
        lambda: file.lambda,
        shift_sigmas: file.shift_sigmas,
        axis_source: file.axis_source,
        layers: file.layers,
        axes,
        sigma: file.sigma,
        seed: file.seed,
        estimation_ids: file.estimation_ids,
        estimation_set_hash: file.estimation_set_hash,
    };
    spec.validate()?;
    Ok(spec)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerEffect {
    pub layer: usize,
    pub intervened: bool,
    pub baseline_corr: f64,
    pub baseline_ci: BootstrapCi,
    pub intervened_corr: f64,
    pub delta: f64,
    pub within_baseline_ci: bool,
    /// Mean and max of ‖v′ − v‖ over evaluation prompts.
    pub applied_norm_mean: f64,
    pub applied_norm_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BehaviorDelta {
    pub baseline: Calibration,
    pub intervened: Calibration,
    pub mae_delta: f64,
    /// Relative MAE change, `|Δ| / baseline` (0 when both are 0).
    pub mae_rel_change: f64,
    pub spearman_delta: Option<f64>,
    pub pearson_delta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterventionOutcome {
    pub mode: Mode,
    pub axis_source: AxisSource,
    pub spec_layers: Vec<usize>,
    pub n_eval: usize,
    pub layers: Vec<LayerEffect>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub behavior: Option<BehaviorDelta>,
}

impl InterventionOutcome {
    pub fn effect(&self, layer: usize) -> Option<&LayerEffect> {
        self.layers.iter().find(|e| e.layer == layer)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalOptions {
    pub n_resamples: usize,
    pub seed: u64,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            n_resamples: stats::DEFAULT_RESAMPLES,
            seed: 0,
        }
    }
}

fn bayes_entropies(bundle: &ActivationBundle, idx: &[usize], corpus: &[SulaPrompt]) -> Result<Vec<(String, f64)>> {
    let by_id: HashMap<&str, &SulaPrompt> = corpus.iter().map(|p| (p.id.as_str(), p)).collect();
    idx.iter()
        .map(|&i| {
            let meta = &bundle.prompts[i];
            let key = meta.sula_ref.as_deref().unwrap_or(&meta.id);
            by_id
                .get(key)
                .map(|p| (meta.id.clone(), p.posterior.predictive_entropy_bits))
                .ok_or_else(|| Error::Misaligned(format!("prompt {} has no SULA entry {key}", meta.id)))
        })
        .collect()
}

/// Compare a baseline bundle with its intervened counterpart on the
/// evaluation prompts.
///
/// Correlations are measured along the reference (true) axes for every layer
/// that has one, so that untouched layers serve as controls. Behavioral
/// metrics need a SULA corpus keyed by prompt id or `sula_ref`.
pub fn evaluate_intervention(
    baseline: &ActivationBundle,
    intervened: &ActivationBundle,
    spec: &InterventionSpec,
    reference: &AxisSet,
    eval_ids: &[String],
    corpus: Option<&[SulaPrompt]>,
    opts: &EvalOptions,
) -> Result<InterventionOutcome> {
    spec.validate()?;
    if spec.estimation_set_hash != reference.estimation_set_hash {
        return Err(Error::InvalidInput(
            "spec and reference axes were estimated on different prompt sets".into(),
        ));
    }
    if hash_id_set(&reference.estimation_ids) != reference.estimation_set_hash {
        return Err(Error::InvalidInput("reference estimation ids do not match their hash".into()));
    }
    let est: BTreeSet<&str> = reference.estimation_ids.iter().map(String::as_str).collect();
    if let Some(id) = eval_ids.iter().find(|id| est.contains(id.as_str())) {
        return Err(Error::Leak(format!("evaluation prompt {id} was used to estimate the axes")));
    }
    if baseline.prompt_ids() != intervened.prompt_ids() {
        return Err(Error::Misaligned("baseline and intervened bundles list different prompts".into()));
    }
    if baseline.dims != intervened.dims {
        return Err(Error::Shape("baseline and intervened bundles differ in shape".into()));
    }
    let idx = id_positions(baseline, eval_ids)?;
    let h_base: Vec<f64> = idx.iter().map(|&i| baseline.prompts[i].predictive_entropy_bits).collect();
    let h_int: Vec<f64> = idx.iter().map(|&i| intervened.prompts[i].predictive_entropy_bits).collect();
    let listed: BTreeSet<usize> = spec.layers.iter().copied().collect();
    let mut layers = Vec::new();
    for a in &reference.axes {
        check_layer(baseline, a.layer)?;
        let rb = layer_rows(baseline, a.layer, &idx);
        let ri = layer_rows(intervened, a.layer, &idx);
        let pb: Vec<f64> = rb.iter().map(|r| dot(r, &a.u)).collect();
        let pi: Vec<f64> = ri.iter().map(|r| dot(r, &a.u)).collect();
        let cb = projection_corr(&rb, &pb, &h_base);
        let ci_ = projection_corr(&ri, &pi, &h_int);
        let pairs: Vec<(f64, f64)> = pb.iter().copied().zip(h_base.iter().copied()).collect();
        let ci = stats::bootstrap_ci(
            &pairs,
            |s: &[(f64, f64)]| {
                let x: Vec<f64> = s.iter().map(|p| p.0).collect();
                let y: Vec<f64> = s.iter().map(|p| p.1).collect();
                stats::pearson(&x, &y).unwrap_or(0.0)
            },
            opts.n_resamples,
            opts.seed.wrapping_add(a.layer as u64),
        )?;
        let applied: Vec<f64> = rb
            .iter()
            .zip(&ri)
            .map(|(x, y)| x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt())
            .collect();
        layers.push(LayerEffect {
            layer: a.layer,
            intervened: listed.contains(&a.layer),
            baseline_corr: cb,
            intervened_corr: ci_,
            delta: ci_ - cb,
            within_baseline_ci: ci.lo <= ci_ && ci_ <= ci.hi,
            baseline_ci: ci,
            applied_norm_mean: stats::mean(&applied),
            applied_norm_max: applied.iter().copied().fold(0.0, f64::max),
        });
    }
    let behavior = match corpus {
        None => None,
        Some(c) => {
            let bayes = bayes_entropies(baseline, &idx, c)?;
            let ids: Vec<String> = idx.iter().map(|&i| baseline.prompts[i].id.clone()).collect();
            let mb: Vec<(String, f64)> = ids.iter().cloned().zip(h_base.iter().copied()).collect();
            let mi: Vec<(String, f64)> = ids.iter().cloned().zip(h_int.iter().copied()).collect();
            let b = stats::calibration(&mb, &bayes)?;
            let i = stats::calibration(&mi, &bayes)?;
            let mae_delta = i.mae_bits - b.mae_bits;
            Some(BehaviorDelta {
                mae_delta,
                mae_rel_change: if b.mae_bits > 0.0 {
                    mae_delta.abs() / b.mae_bits
                } else if mae_delta == 0.0 {
                    0.0
                } else {
                    f64::INFINITY
                },
                spearman_delta: i.spearman_rho.zip(b.spearman_rho).map(|(x, y)| x - y),
                pearson_delta: i.pearson_r.zip(b.pearson_r).map(|(x, y)| x - y),
                baseline: b,
                intervened: i,
            })
        }
    };
    Ok(InterventionOutcome {
        mode: spec.mode,
        axis_source: spec.axis_source,
        spec_layers: spec.layers.clone(),
        n_eval: idx.len(),
        layers,
        behavior,
    })
}

/// Prompt ids of `bundle` not in `estimation_ids`, in bundle order.
pub fn complement_ids(bundle: &ActivationBundle, estimation_ids: &[String]) -> Vec<String> {
    let est: BTreeSet<&str> = estimation_ids.iter().map(String::as_str).collect();
    bundle
        .prompts
        .iter()
        .filter(|p| !est.contains(p.id.as_str()))
        .map(|p| p.id.clone())
        .collect()
}

/// Deterministic split of prompt ids into estimation and evaluation sets by
/// a seeded shuffle.
pub fn split_ids(ids: &[String], n_estimation: usize, seed: u64) -> Result<(Vec<String>, Vec<String>)> {
    use rand::seq::SliceRandom;
    if n_estimation > ids.len() {
        return Err(Error::InvalidInput(format!(
            "cannot take {n_estimation} estimation prompts from {}",
            ids.len()
        )));
    }
    let mut order: Vec<usize> = (0..ids.len()).collect();
    order.shuffle(&mut rng::stream(rng::derive_seed(seed, "estimation-split"), 0));
    let mut chosen: BTreeMap<usize, bool> = BTreeMap::new();
    for (rank, &i) in order.iter().enumerate() {
        chosen.insert(i, rank < n_estimation);
    }
    let mut est = Vec::new();
    let mut eval = Vec::new();
    for (i, id) in ids.iter().enumerate() {
        if chosen[&i] {
            est.push(id.clone());
        } else {
            eval.push(id.clone());
        }
    }
    Ok((est, eval))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn unit(v: &[f64]) -> Vec<f64> {
        let n = norm(v);
        v.iter().map(|x| x / n).collect()
    }

    #[test]
    fn cut_removes_component() {
        let u = unit(&[1.0, 2.0, -2.0]);
        let v = [3.0, -1.0, 0.5];
        let c = apply_cut(&v, &u, 1.0).unwrap();
        assert_abs_diff_eq!(dot(&c, &u), 0.0, epsilon = 1e-15);
        assert_eq!(apply_cut(&v, &u, 0.0).unwrap(), v.to_vec());
        let perp = [2.0, -1.0, 0.0];
        let c2 = apply_cut(&perp, &u, 0.7).unwrap();
        for (a, b) in c2.iter().zip(&perp) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-15);
        }
    }

    #[test]
    fn pythagoras() {
        let u = unit(&[0.3, -0.4, 1.2, 0.0]);
        let v = [1.0, 2.0, 3.0, -4.0];
        let o = apply_only(&v, &u).unwrap();
        let c = apply_cut(&v, &u, 1.0).unwrap();
        assert_abs_diff_eq!(dot(&v, &v), dot(&o, &o) + dot(&c, &c), epsilon = 1e-10);
    }

    #[test]
    fn cut_then_shift() {
        let u = unit(&[1.0, 1.0]);
        let v = [5.0, -2.0];
        let s = apply_shift(&apply_cut(&v, &u, 1.0).unwrap(), &u, -0.75).unwrap();
        assert_abs_diff_eq!(dot(&s, &u), -0.75, epsilon = 1e-14);
    }

    #[test]
    fn non_unit_axis_rejected() {
        assert!(apply_cut(&[1.0, 0.0], &[2.0, 0.0], 1.0).is_err());
        assert!(apply_only(&[1.0], &[1.0, 0.0]).is_err());
    }

    #[test]
    fn random_axis_is_orthogonal() {
        let u = unit(&[1.0, -2.0, 0.5, 3.0, 0.0]);
        let r = random_control_axis(3, &u, 9).unwrap();
        assert_abs_diff_eq!(dot(&r, &u), 0.0, epsilon = 1e-10);
        assert_abs_diff_eq!(norm(&r), 1.0, epsilon = 1e-12);
        assert_ne!(r, random_control_axis(3, &u, 10).unwrap());
        let e2 = random_control_axis(0, &[1.0, 0.0], 4).unwrap();
        assert_abs_diff_eq!(e2[0], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(e2[1].abs(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn split_is_disjoint_and_stable() {
        let ids: Vec<String> = (0..20).map(|i| format!("p{i}")).collect();
        let (a, b) = split_ids(&ids, 8, 1).unwrap();
        assert_eq!(a.len(), 8);
        assert_eq!(b.len(), 12);
        assert!(a.iter().all(|x| !b.contains(x)));
        assert_eq!(split_ids(&ids, 8, 1).unwrap().0, a);
    }

    #[test]
    fn mode_parsing() {
        assert_eq!("shift".parse::<Mode>().unwrap(), Mode::Shift);
        assert!("erase".parse::<Mode>().is_err());
        assert_eq!("random".parse::<AxisSource>().unwrap(), AxisSource::Random);
    }
}
