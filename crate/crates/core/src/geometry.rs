//! Geometric signatures of a model's activations.
//!
//! * value manifolds: PCA of standardized, head-concatenated final-token
//!   values, with PC1/PC1+PC2 ratios and the participation ratio
//!   `(Σλ)² / Σλ²`;
//! * key orthogonality: mean off-diagonal |cos| between ℓ2-normalized columns
//!   of each key projection, against the Gaussian baseline `√(2/(πd))`;
//! * attention focusing: per-head final-token attention entropy averaged over
//!   heads (never over distributions), tracked across layers.
//!
//! Entropies are in bits throughout.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::bundle::ActivationBundle;
use crate::error::{Error, Result};
use crate::numeric::{entropy_bits, kahan_sum};
use crate::stats::{self, BootstrapCi, TestResult};

/// Column-standardized value matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueMatrix {
    /// `N` rows over the retained columns only.
    pub rows: Vec<Vec<f64>>,
    /// Width of the raw matrix (`H·d_v`).
    pub width: usize,
    /// Raw column indices kept, ascending.
    pub retained: Vec<usize>,
    /// Raw column indices dropped for zero variance.
    pub dropped_cols: Vec<usize>,
    /// Per raw column mean.
    pub means: Vec<f64>,
    /// Per raw column sample standard deviation (divisor `N − 1`).
    pub stds: Vec<f64>,
}

impl ValueMatrix {
    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    /// Standardize a new raw row with this matrix's column statistics.
    pub fn transform(&self, raw: &[f64]) -> Vec<f64> {
        self.retained
            .iter()
            .map(|&c| (raw[c] - self.means[c]) / self.stds[c])
            .collect()
    }

    /// Map a retained-space vector back to the full width with zeros at
    /// dropped columns.
    pub fn embed(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.width];
        for (&c, x) in self.retained.iter().zip(v) {
            out[c] = *x;
        }
        out
    }
}

/// Zero-mean, unit-variance columns; constant columns are dropped.
pub fn standardize_values(raw: &[Vec<f64>]) -> Result<ValueMatrix> {
    let n = raw.len();
    if n < 3 {
        return Err(Error::InvalidInput(format!(
            "standardization needs at least 3 rows, got {n}"
        )));
    }
    let width = raw[0].len();
    if let Some(r) = raw.iter().position(|r| r.len() != width) {
        return Err(Error::Shape(format!("row {r} has width {}, expected {width}", raw[r].len())));
    }
    let mut means = Vec::with_capacity(width);
    let mut stds = Vec::with_capacity(width);
    let mut retained = Vec::new();
    let mut dropped = Vec::new();
    for c in 0..width {
        let col: Vec<f64> = raw.iter().map(|r| r[c]).collect();
        let m = stats::mean(&col);
        let s = stats::sample_std(&col);
        means.push(m);
        stds.push(s);
        if s.is_finite() && s > 1e-12 * m.abs().max(1.0) {
            retained.push(c);
        } else {
            dropped.push(c);
        }
    }
    let rows = raw
        .iter()
        .map(|r| retained.iter().map(|&c| (r[c] - means[c]) / stds[c]).collect())
        .collect();
    Ok(ValueMatrix {
        rows,
        width,
        retained,
        dropped_cols: dropped,
        means,
        stds,
    })
}

/// Principal-component summary of one value matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaSummary {
    /// Covariance eigenvalues, descending (`min(N, d)` of them).
    pub eigenvalues: Vec<f64>,
    pub total_variance: f64,
    pub pc1_ratio: f64,
    pub pc12_ratio: f64,
    pub participation_ratio: f64,
    /// Leading axes over the full raw width (zero at dropped columns).
    pub axis1: Vec<f64>,
    pub axis2: Vec<f64>,
    /// Per-row projections on `(axis1, axis2)`.
    pub coords: Vec<[f64; 2]>,
    pub n_rows: usize,
    pub n_retained: usize,
    pub dropped_cols: Vec<usize>,
    /// Pearson correlation of PC1 coordinates with entropy, after
    /// orientation (absent without entropies).
    pub pc1_entropy_corr: Option<f64>,
    pub pc1_flipped: bool,
}

/// Participation ratio of a spectrum.
pub fn participation_ratio(eigenvalues: &[f64]) -> f64 {
    let s = kahan_sum(eigenvalues.iter().copied());
    let s2 = kahan_sum(eigenvalues.iter().map(|l| l * l));
    s * s / s2
}

/// Eigen-decomposition of the covariance (divisor `N − 1`) of centered rows.
/// Returns descending eigenvalues and the two leading unit eigenvectors.
fn covariance_eigen(rows: &[Vec<f64>]) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let n = rows.len();
    let d = rows.first().map_or(0, Vec::len);
    if n < 2 || d == 0 {
        return Err(Error::Degenerate("covariance needs at least 2 rows and 1 column".into()));
    }
    let x = DMatrix::from_fn(n, d, |i, j| rows[i][j]);
    let scale = 1.0 / (n as f64 - 1.0);
    let gram_route = n < d;
    let m = if gram_route {
        (&x * x.transpose()) * scale
    } else {
        (x.transpose() * &x) * scale
    };
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i].max(0.0)).collect();
    if eigenvalues[0] <= 0.0 {
        return Err(Error::Degenerate("covariance is identically zero".into()));
    }
    let mut axes = Vec::new();
    for &i in order.iter().take(2) {
        let col = eig.eigenvectors.column(i);
        let v: Vec<f64> = if gram_route {
            // u = Xᵀa / ‖Xᵀa‖
            let u = x.transpose() * col;
            let norm = u.norm();
            if norm == 0.0 {
                vec![0.0; d]
            } else {
                u.iter().map(|z| z / norm).collect()
            }
        } else {
            col.iter().copied().collect()
        };
        axes.push(v);
    }
    while axes.len() < 2 {
        axes.push(vec![0.0; d]);
    }
    Ok((eigenvalues, axes))
}

/// Sign fix for a principal axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Orientation {
    pub flipped: bool,
    /// Correlation between coordinates and entropies after orientation.
    pub corr: Option<f64>,
}

/// Orient `axis` (and its `coords`) so that the coordinates correlate
/// non-negatively with `entropies`.
///
/// Without entropies, or when the correlation is exactly zero or undefined,
/// the first nonzero loading is made positive instead.
pub fn orient_axis(axis: &mut [f64], coords: &mut [f64], entropies: Option<&[f64]>) -> Result<Orientation> {
    let corr = match entropies {
        Some(h) if h.len() >= 3 => {
            if h.len() != coords.len() {
                return Err(Error::Shape(format!(
                    "{} entropies for {} coordinates",
                    h.len(),
                    coords.len()
                )));
            }
            stats::pearson(coords, h).ok()
        }
        _ => None,
    };
    let flip = match corr {
        Some(r) if r != 0.0 => r < 0.0,
        _ => axis.iter().find(|x| **x != 0.0).is_some_and(|x| *x < 0.0),
    };
    if flip {
        axis.iter_mut().for_each(|x| *x = -*x);
        coords.iter_mut().for_each(|x| *x = -*x);
    }
    Ok(Orientation {
        flipped: flip,
        corr: corr.map(|r| if flip { -r } else { r }),
    })
}

fn first_loading_positive(axis: &mut [f64]) {
    if axis.iter().find(|x| **x != 0.0).is_some_and(|x| *x < 0.0) {
        axis.iter_mut().for_each(|x| *x = -*x);
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// PCA of rows that are already centered (no further scaling), on all
/// `width` columns. Axis 1 is oriented against `entropies` when given; axis 2
/// always uses the first-loading rule.
pub fn pca_centered(rows: &[Vec<f64>], entropies: Option<&[f64]>) -> Result<PcaSummary> {
    let width = rows.first().map_or(0, Vec::len);
    let retained: Vec<usize> = (0..width).collect();
    pca_on(rows, &retained, width, Vec::new(), entropies)
}

fn pca_on(
    rows: &[Vec<f64>],
    retained: &[usize],
    width: usize,
    dropped_cols: Vec<usize>,
    entropies: Option<&[f64]>,
) -> Result<PcaSummary> {
    if retained.len() < 2 {
        return Err(Error::Degenerate(format!(
            "PCA needs at least 2 non-constant columns, have {}",
            retained.len()
        )));
    }
    let (eigenvalues, mut axes) = covariance_eigen(rows)?;
    let total = kahan_sum(eigenvalues.iter().copied());
    let mut a2 = axes.pop().expect("two axes");
    let mut a1 = axes.pop().expect("two axes");
    // canonical sign before the entropy rule, so output never depends on the
    // eigensolver's arbitrary sign
    first_loading_positive(&mut a1);
    first_loading_positive(&mut a2);
    let mut c1: Vec<f64> = rows.iter().map(|r| dot(r, &a1)).collect();
    let c2: Vec<f64> = rows.iter().map(|r| dot(r, &a2)).collect();
    let o = orient_axis(&mut a1, &mut c1, entropies)?;
    let embed = |v: &[f64]| {
        let mut out = vec![0.0; width];
        for (&c, x) in retained.iter().zip(v) {
            out[c] = *x;
        }
        out
    };
    let l1 = eigenvalues[0];
    let l2 = eigenvalues.get(1).copied().unwrap_or(0.0);
    Ok(PcaSummary {
        pc1_ratio: (l1 / total).min(1.0),
        pc12_ratio: ((l1 + l2) / total).min(1.0),
        participation_ratio: participation_ratio(&eigenvalues),
        total_variance: total,
        axis1: embed(&a1),
        axis2: embed(&a2),
        coords: c1.into_iter().zip(c2).map(|(a, b)| [a, b]).collect(),
        n_rows: rows.len(),
        n_retained: retained.len(),
        dropped_cols,
        pc1_entropy_corr: o.corr,
        pc1_flipped: o.flipped,
        eigenvalues,
    })
}

/// PCA of a standardized value matrix.
pub fn pca(values: &ValueMatrix, entropies: Option<&[f64]>) -> Result<PcaSummary> {
    pca_on(
        &values.rows,
        &values.retained,
        values.width,
        values.dropped_cols.clone(),
        entropies,
    )
}

/// Standardize then PCA, the per-model, per-layer protocol.
pub fn layer_pca(bundle: &ActivationBundle, layer: usize, with_entropy: bool) -> Result<(ValueMatrix, PcaSummary)> {
    if layer >= bundle.dims.n_layers {
        return Err(Error::InvalidInput(format!(
            "layer {layer} out of range (bundle has {})",
            bundle.dims.n_layers
        )));
    }
    let vm = standardize_values(&bundle.layer_values_f64(layer))?;
    let h = bundle.entropies();
    let s = pca(&vm, with_entropy.then_some(h.as_slice()))?;
    Ok((vm, s))
}

/// One basis shared across models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalPca {
    pub summary: PcaSummary,
    /// Row ranges of each model inside `summary.coords`.
    pub model_rows: Vec<(usize, usize)>,
    /// Per-model `(PC1, PC2)` projections.
    pub per_model_coords: Vec<Vec<[f64; 2]>>,
}

/// Standardize each model's value matrix on its own, concatenate the rows, and
/// run one PCA.
///
/// All models must share a width unless `common_width` is given, in which case
/// each matrix is truncated to its first `common_width` columns.
pub fn global_pca_basis(
    models: &[Vec<Vec<f64>>],
    entropies: Option<&[Vec<f64>]>,
    common_width: Option<usize>,
) -> Result<GlobalPca> {
    if models.is_empty() {
        return Err(Error::InvalidInput("global PCA needs at least one model".into()));
    }
    let widths: Vec<usize> = models.iter().map(|m| m.first().map_or(0, Vec::len)).collect();
    let width = match common_width {
        Some(w) => {
            if let Some(i) = widths.iter().position(|&x| x < w) {
                return Err(Error::Shape(format!(
                    "model {i} has width {}, below the common projection width {w}",
                    widths[i]
                )));
            }
            w
        }
        None => {
            if widths.iter().any(|&w| w != widths[0]) {
                return Err(Error::Shape(format!(
                    "models have different value widths {widths:?} and no common projection width"
                )));
            }
            widths[0]
        }
    };
    let mut rows = Vec::new();
    let mut model_rows = Vec::new();
    for m in models {
        let trimmed: Vec<Vec<f64>> = m.iter().map(|r| r[..width].to_vec()).collect();
        let vm = standardize_values(&trimmed)?;
        let start = rows.len();
        rows.extend(vm.rows.iter().map(|r| vm.embed(r)));
        model_rows.push((start, rows.len()));
    }
    let live: Vec<usize> = (0..width)
        .filter(|&c| rows.iter().any(|r| r[c] != 0.0))
        .collect();
    let dropped: Vec<usize> = (0..width).filter(|c| !live.contains(c)).collect();
    let packed: Vec<Vec<f64>> = rows.iter().map(|r| live.iter().map(|&c| r[c]).collect()).collect();
    let h: Option<Vec<f64>> = entropies.map(|e| e.iter().flatten().copied().collect());
    let summary = pca_on(&packed, &live, width, dropped, h.as_deref())?;
    let per_model_coords = model_rows
        .iter()
        .map(|&(a, b)| summary.coords[a..b].to_vec())
        .collect();
    Ok(GlobalPca {
        summary,
        model_rows,
        per_model_coords,
    })
}

/// Mean off-diagonal absolute cosine between the ℓ2-normalized columns of a
/// row-major `d_model × d_k` matrix.
pub fn key_orthogonality(key: &[f64], d_model: usize, d_k: usize) -> Result<f64> {
    if d_k < 2 {
        return Err(Error::InvalidInput(format!("need at least 2 key columns, got {d_k}")));
    }
    if key.len() != d_model * d_k {
        return Err(Error::Shape(format!(
            "key matrix has {} entries, expected {d_model}×{d_k}",
            key.len()
        )));
    }
    let cols: Vec<Vec<f64>> = (0..d_k)
        .map(|j| (0..d_model).map(|i| key[i * d_k + j]).collect())
        .collect();
    let mut unit = Vec::with_capacity(d_k);
    for (j, c) in cols.iter().enumerate() {
        let norm = dot(c, c).sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::Degenerate(format!("key column {j} has zero norm")));
        }
        unit.push(c.iter().map(|x| x / norm).collect::<Vec<f64>>());
    }
    let mut acc = Vec::with_capacity(d_k * (d_k - 1) / 2);
    for i in 0..d_k {
        for j in (i + 1)..d_k {
            acc.push(dot(&unit[i], &unit[j]).abs().min(1.0));
        }
    }
    Ok(kahan_sum(acc.iter().copied()) / acc.len() as f64)
}

/// `√(2 / (π d))`, the large-`d` expected |cos| between independent Gaussian
/// directions.
pub fn gaussian_baseline(d: usize) -> f64 {
    assert!(d >= 1, "dimension must be positive");
    (2.0 / (std::f64::consts::PI * d as f64)).sqrt()
}

/// Percentile bands over heads. Both the 5/95 and the quartile bands are
/// reported.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bands {
    pub p05: f64,
    pub p25: f64,
    pub p50: f64,
    pub p75: f64,
    pub p95: f64,
}

impl Bands {
    pub fn of(xs: &[f64]) -> Self {
        let q = |p| stats::quantile(xs, p);
        Self {
            p05: q(0.05),
            p25: q(0.25),
            p50: q(0.50),
            p75: q(0.75),
            p95: q(0.95),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerOrthogonality {
    pub layer: usize,
    pub per_head: Vec<f64>,
    pub mean: f64,
    pub bands: Bands,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrthogonalityProfile {
    pub layers: Vec<LayerOrthogonality>,
    pub d_model: usize,
    pub d_k: usize,
    pub gaussian_baseline: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initialization_baseline: Option<f64>,
}

impl OrthogonalityProfile {
    pub fn layer_means(&self) -> Vec<f64> {
        self.layers.iter().map(|l| l.mean).collect()
    }
}

pub fn orthogonality_profile(bundle: &ActivationBundle) -> Result<OrthogonalityProfile> {
    if !bundle.has_keys() {
        return Err(Error::InvalidInput("bundle carries no key matrices".into()));
    }
    let d = bundle.dims;
    let mut layers = Vec::with_capacity(d.n_layers);
    for (l, heads) in bundle.keys.iter().enumerate() {
        let per_head = heads
            .iter()
            .map(|k| {
                let k: Vec<f64> = k.iter().map(|&x| f64::from(x)).collect();
                key_orthogonality(&k, d.d_model, d.d_k)
            })
            .collect::<Result<Vec<f64>>>()?;
        layers.push(LayerOrthogonality {
            layer: l,
            mean: stats::mean(&per_head),
            bands: Bands::of(&per_head),
            per_head,
        });
    }
    Ok(OrthogonalityProfile {
        layers,
        d_model: d.d_model,
        d_k: d.d_k,
        gaussian_baseline: gaussian_baseline(d.d_model),
        initialization_baseline: None,
    })
}

/// Entropy (bits) of each head's row in a row-major `[H, T]` block.
pub fn head_entropies(rows: &[f64], n_heads: usize) -> Result<Vec<f64>> {
    if n_heads == 0 || rows.is_empty() || !rows.len().is_multiple_of(n_heads) {
        return Err(Error::InvalidInput(format!(
            "attention block of {} weights cannot hold {n_heads} nonempty rows",
            rows.len()
        )));
    }
    Ok(rows.chunks(rows.len() / n_heads).map(entropy_bits).collect())
}

/// Head-mean of per-head entropies: the quantity reported per layer.
pub fn head_mean_entropy(rows: &[f64], n_heads: usize) -> Result<f64> {
    Ok(stats::mean(&head_entropies(rows, n_heads)?))
}

/// Entropy of the head-averaged distribution, the Jensen-biased estimate.
pub fn entropy_of_head_mean(rows: &[f64], n_heads: usize) -> Result<f64> {
    if n_heads == 0 || rows.is_empty() || !rows.len().is_multiple_of(n_heads) {
        return Err(Error::InvalidInput("bad attention block".into()));
    }
    let t = rows.len() / n_heads;
    let avg: Vec<f64> = (0..t)
        .map(|j| (0..n_heads).map(|h| rows[h * t + j]).sum::<f64>() / n_heads as f64)
        .collect();
    Ok(entropy_bits(&avg))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerAttentionEntropy {
    pub layer: usize,
    /// Mean over prompts of the head-mean entropy.
    pub mean_bits: f64,
    pub ci: BootstrapCi,
    /// Same, with each prompt's value divided by `log2 T`.
    pub mean_normalized: f64,
    pub ci_normalized: BootstrapCi,
    /// Mean over prompts of the entropy of the head-averaged distribution.
    pub jensen_biased_bits: f64,
    pub per_prompt_bits: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionEntropyProfile {
    pub layers: Vec<LayerAttentionEntropy>,
    /// `(H⁰ − H^{L−1}) / H⁰` on raw bits.
    pub reduction_fraction: f64,
    pub reduction_fraction_normalized: f64,
    pub n_resamples: usize,
    pub seed: u64,
}

impl AttentionEntropyProfile {
    pub fn means(&self) -> Vec<f64> {
        self.layers.iter().map(|l| l.mean_bits).collect()
    }
}

pub fn attention_entropy_profile(bundle: &ActivationBundle, n_resamples: usize, seed: u64) -> Result<AttentionEntropyProfile> {
    if !bundle.has_attention() {
        return Err(Error::InvalidInput("bundle carries no attention rows".into()));
    }
    let n = bundle.n_prompts();
    if n < 2 {
        return Err(Error::InvalidInput(format!("attention profile needs at least 2 prompts, got {n}")));
    }
    let h = bundle.dims.n_heads;
    let mut layers = Vec::with_capacity(bundle.dims.n_layers);
    for (l, layer) in bundle.attention.iter().enumerate() {
        let mut raw = Vec::with_capacity(n);
        let mut norm = Vec::with_capacity(n);
        let mut biased = Vec::with_capacity(n);
        for (p, rows) in layer.iter().enumerate() {
            let t = bundle.prompts[p].token_count;
            if t == 0 {
                return Err(Error::InvalidInput(format!(
                    "prompt {} has a zero-length attention row",
                    bundle.prompts[p].id
                )));
            }
            let r: Vec<f64> = rows.iter().map(|&x| f64::from(x)).collect();
            let hm = head_mean_entropy(&r, h)?;
            raw.push(hm);
            norm.push(if t > 1 { hm / (t as f64).log2() } else { 0.0 });
            biased.push(entropy_of_head_mean(&r, h)?);
        }
        let layer_seed = seed.wrapping_add(l as u64);
        layers.push(LayerAttentionEntropy {
            layer: l,
            mean_bits: stats::mean(&raw),
            ci: stats::bootstrap_ci(&raw, stats::mean, n_resamples, layer_seed)?,
            mean_normalized: stats::mean(&norm),
            ci_normalized: stats::bootstrap_ci(&norm, stats::mean, n_resamples, layer_seed)?,
            jensen_biased_bits: stats::mean(&biased),
            per_prompt_bits: raw,
        });
    }
    let first = &layers[0];
    let last = layers.last().expect("at least one layer");
    let reduction = |a: f64, b: f64| if a > 0.0 { (a - b) / a } else { 0.0 };
    Ok(AttentionEntropyProfile {
        reduction_fraction: reduction(first.mean_bits, last.mean_bits),
        reduction_fraction_normalized: reduction(first.mean_normalized, last.mean_normalized),
        layers,
        n_resamples,
        seed,
    })
}

/// Validation thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    /// Manifold criterion: PC1 or PC1+PC2 strictly above this fraction.
    pub manifold_pc: f64,
    /// Orthogonality criterion: layer mean strictly below this value ...
    pub orthogonality_max: f64,
    /// ... for at least this fraction of layers.
    pub orthogonality_layer_fraction: f64,
    /// Focusing criterion: entropy reduction strictly above this fraction.
    pub focusing_reduction: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            manifold_pc: 0.30,
            orthogonality_max: 0.20,
            orthogonality_layer_fraction: 0.50,
            focusing_reduction: 0.30,
        }
    }
}

/// PC ratios for one prompt set (e.g. mixed-domain or domain-restricted).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifoldMetric {
    pub prompt_set: String,
    pub pc1_ratio: f64,
    pub pc12_ratio: f64,
}

/// The three metrics the classifier needs.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ClassifierInput {
    pub manifold: Vec<ManifoldMetric>,
    pub orthogonality_layer_means: Vec<f64>,
    pub attention_reduction: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Full,
    Partial,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub verdict: Verdict,
    pub manifold: bool,
    pub orthogonality: bool,
    pub focusing: bool,
    pub orthogonality_pass_fraction: f64,
    pub thresholds: Thresholds,
}

/// Full when all three criteria hold, partial for two, none otherwise. The
/// manifold criterion holds when any supplied prompt set passes it.
pub fn classify_model(input: &ClassifierInput, t: &Thresholds) -> Result<Classification> {
    if input.manifold.is_empty() {
        return Err(Error::InvalidInput("missing value-manifold metric".into()));
    }
    if input.orthogonality_layer_means.is_empty() {
        return Err(Error::InvalidInput("missing key-orthogonality metric".into()));
    }
    let reduction = input
        .attention_reduction
        .ok_or_else(|| Error::InvalidInput("missing attention-focusing metric".into()))?;
    let manifold = input
        .manifold
        .iter()
        .any(|m| m.pc1_ratio > t.manifold_pc || m.pc12_ratio > t.manifold_pc);
    let below = input
        .orthogonality_layer_means
        .iter()
        .filter(|&&x| x < t.orthogonality_max)
        .count();
    let frac = below as f64 / input.orthogonality_layer_means.len() as f64;
    let orthogonality = frac >= t.orthogonality_layer_fraction;
    let focusing = reduction > t.focusing_reduction;
    let verdict = match [manifold, orthogonality, focusing].iter().filter(|b| **b).count() {
        3 => Verdict::Full,
        2 => Verdict::Partial,
        _ => Verdict::None,
    };
    Ok(Classification {
        verdict,
        manifold,
        orthogonality,
        focusing,
        orthogonality_pass_fraction: frac,
        thresholds: *t,
    })
}

/// Per-layer value-manifold numbers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerManifold {
    pub layer: usize,
    pub pc1_ratio: f64,
    pub pc12_ratio: f64,
    pub participation_ratio: f64,
    pub n_dropped: usize,
    pub pc1_entropy_corr: Option<f64>,
    pub pc1_entropy_spearman: Option<f64>,
}

/// Everything measured for one model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeometryReport {
    pub model_name: String,
    pub n_prompts: usize,
    pub value_width: usize,
    pub layers: Vec<LayerManifold>,
    /// Full detail for the final layer (axes and coordinates).
    pub final_layer: PcaSummary,
    pub final_layer_entropies: Vec<f64>,
    pub prompt_ids: Vec<String>,
    /// Final-layer PC ratios on all prompts, then on each domain.
    pub manifold_sets: Vec<ManifoldMetric>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub orthogonality: Option<OrthogonalityProfile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attention: Option<AttentionEntropyProfile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub classification: Option<Classification>,
    pub tests: Vec<NamedTest>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedTest {
    pub name: String,
    pub inputs_hash: String,
    #[serde(flatten)]
    pub result: TestResult,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalysisOptions {
    pub thresholds: Thresholds,
    pub n_resamples: usize,
    pub seed: u64,
    /// Run the key-orthogonality analysis when the bundle has keys.
    pub keys: bool,
    /// Run the attention-entropy analysis when the bundle has attention.
    pub attention: bool,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        Self {
            thresholds: Thresholds::default(),
            n_resamples: stats::DEFAULT_RESAMPLES,
            seed: 0,
            keys: true,
            attention: true,
        }
    }
}

/// Run every available analysis on a bundle.
///
/// Focusing significance is tested with paired t-tests of layer-0 against
/// every later layer's head-mean entropy, paired by prompt, with a Bonferroni
/// factor of `L − 1`.
pub fn analyze_bundle(bundle: &ActivationBundle, opts: &AnalysisOptions) -> Result<GeometryReport> {
    bundle.check_shapes()?;
    let d = bundle.dims;
    let h = bundle.entropies();
    let mut layers = Vec::with_capacity(d.n_layers);
    let mut final_layer = None;
    for l in 0..d.n_layers {
        let (_, s) = layer_pca(bundle, l, true)?;
        let spear = stats::spearman(&s.coords.iter().map(|c| c[0]).collect::<Vec<_>>(), &h).ok();
        layers.push(LayerManifold {
            layer: l,
            pc1_ratio: s.pc1_ratio,
            pc12_ratio: s.pc12_ratio,
            participation_ratio: s.participation_ratio,
            n_dropped: s.dropped_cols.len(),
            pc1_entropy_corr: s.pc1_entropy_corr,
            pc1_entropy_spearman: spear,
        });
        if l + 1 == d.n_layers {
            final_layer = Some(s);
        }
    }
    let final_layer = final_layer.ok_or_else(|| Error::InvalidInput("bundle has no layers".into()))?;
    let mut manifold_sets = vec![ManifoldMetric {
        prompt_set: "all".into(),
        pc1_ratio: final_layer.pc1_ratio,
        pc12_ratio: final_layer.pc12_ratio,
    }];
    let domains: std::collections::BTreeSet<&str> =
        bundle.prompts.iter().filter_map(|p| p.domain.as_deref()).collect();
    if domains.len() > 1 {
        let last = bundle.layer_values_f64(d.n_layers - 1);
        for dom in domains {
            let rows: Vec<Vec<f64>> = bundle
                .prompts
                .iter()
                .zip(&last)
                .filter(|(p, _)| p.domain.as_deref() == Some(dom))
                .map(|(_, r)| r.clone())
                .collect();
            // small or constant subsets simply contribute no metric
            if let Ok(s) = standardize_values(&rows).and_then(|vm| pca(&vm, None)) {
                manifold_sets.push(ManifoldMetric {
                    prompt_set: dom.to_string(),
                    pc1_ratio: s.pc1_ratio,
                    pc12_ratio: s.pc12_ratio,
                });
            }
        }
    }
    let orthogonality = if opts.keys && bundle.has_keys() {
        Some(orthogonality_profile(bundle)?)
    } else {
        None
    };
    let attention = if opts.attention && bundle.has_attention() {
        Some(attention_entropy_profile(bundle, opts.n_resamples, opts.seed)?)
    } else {
        None
    };
    let mut tests = Vec::new();
    if let Some(a) = &attention {
        let m = a.layers.len().saturating_sub(1);
        for later in a.layers.iter().skip(1) {
            let base = &a.layers[0].per_prompt_bits;
            if let Ok(r) = stats::paired_t_test(base, &later.per_prompt_bits) {
                tests.push(NamedTest {
                    name: format!("attention_entropy_layer0_vs_layer{}", later.layer),
                    inputs_hash: crate::digest::hash_f64s(base.iter().chain(&later.per_prompt_bits)),
                    result: r.corrected(m),
                });
            }
        }
    }
    let classification = match (&orthogonality, &attention) {
        (Some(o), Some(a)) => Some(classify_model(
            &ClassifierInput {
                manifold: manifold_sets.clone(),
                orthogonality_layer_means: o.layer_means(),
                attention_reduction: Some(a.reduction_fraction),
            },
            &opts.thresholds,
        )?),
        _ => None,
    };
    Ok(GeometryReport {
        model_name: bundle.model_name.clone(),
        n_prompts: bundle.n_prompts(),
        value_width: d.value_width(),
        layers,
        final_layer,
        final_layer_entropies: h,
        prompt_ids: bundle.prompt_ids(),
        manifold_sets,
        orthogonality,
        attention,
        classification,
        tests,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn constant_column_is_dropped() {
        let raw = vec![vec![1.0, 5.0, 2.0], vec![2.0, 5.0, 0.0], vec![4.0, 5.0, 1.0], vec![0.0, 5.0, 3.0]];
        let vm = standardize_values(&raw).unwrap();
        assert_eq!(vm.dropped_cols, vec![1]);
        assert_eq!(vm.retained, vec![0, 2]);
        for c in 0..2 {
            let col: Vec<f64> = vm.rows.iter().map(|r| r[c]).collect();
            assert!(stats::mean(&col).abs() < 1e-9);
            assert_relative_eq!(stats::sample_std(&col), 1.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn standardization_is_idempotent() {
        let raw = vec![vec![1.0, -3.0], vec![2.0, 0.5], vec![7.0, 2.0], vec![-1.0, 4.0]];
        let once = standardize_values(&raw).unwrap();
        let twice = standardize_values(&once.rows).unwrap();
        for (a, b) in once.rows.iter().flatten().zip(twice.rows.iter().flatten()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn too_few_rows() {
        assert!(standardize_values(&[vec![1.0], vec![2.0]]).is_err());
    }

    #[test]
    fn rank_one_data() {
        let dir = [0.6, -0.8, 0.0];
        let rows: Vec<Vec<f64>> = (0..10)
            .map(|i| dir.iter().map(|d| d * (i as f64 - 4.5)).collect())
            .collect();
        let s = pca_centered(&rows, None).unwrap();
        assert_relative_eq!(s.pc1_ratio, 1.0, epsilon = 1e-12);
        assert_relative_eq!(s.participation_ratio, 1.0, epsilon = 1e-12);
        assert_relative_eq!(dot(&s.axis1, &dir).abs(), 1.0, epsilon = 1e-12);
        assert!(s.axis1[0] > 0.0);
    }

    #[test]
    fn participation_ratio_of_2_1_1() {
        assert_eq!(participation_ratio(&[2.0, 1.0, 1.0]), 16.0 / 6.0);
    }

    #[test]
    fn all_zero_covariance_is_an_error() {
        let rows = vec![vec![0.0, 0.0]; 5];
        assert!(matches!(pca_centered(&rows, None), Err(Error::Degenerate(_))));
        let raw = vec![vec![1.0, 2.0]; 5];
        let vm = standardize_values(&raw).unwrap();
        assert!(matches!(pca(&vm, None), Err(Error::Degenerate(_))));
    }

    #[test]
    fn orientation_flips_negative_correlation() {
        let mut axis = vec![1.0, 0.0];
        let mut coords = vec![1.0, 0.0, -1.0, 0.5];
        let h = vec![-1.0, 0.5, 1.0, 0.0];
        let before = stats::pearson(&coords, &h).unwrap();
        assert!(before < 0.0);
        let o = orient_axis(&mut axis, &mut coords, Some(&h)).unwrap();
        assert!(o.flipped);
        assert_relative_eq!(o.corr.unwrap(), -before, epsilon = 1e-15);
        assert_eq!(axis, vec![-1.0, 0.0]);
    }

    #[test]
    fn orientation_tie_uses_first_loading() {
        let mut axis = vec![0.0, -0.6, 0.8];
        let mut coords = vec![1.0, -1.0, 1.0, -1.0];
        let h = vec![1.0, 1.0, 0.0, 0.0]; // corr exactly 0
        let o = orient_axis(&mut axis, &mut coords, Some(&h)).unwrap();
        assert!(o.flipped);
        assert_eq!(axis, vec![0.0, 0.6, -0.8]);
        let mut axis2 = vec![0.0, 0.6, -0.8];
        let o2 = orient_axis(&mut axis2, &mut [1.0, 2.0], None).unwrap();
        assert!(!o2.flipped);
        assert!(o2.corr.is_none());
    }

    #[test]
    fn orthogonality_extremes() {
        // identity columns
        let mut eye = vec![0.0; 16];
        for i in 0..4 {
            eye[i * 4 + i] = 1.0;
        }
        assert_eq!(key_orthogonality(&eye, 4, 4).unwrap(), 0.0);
        let same = vec![0.3; 12];
        assert_relative_eq!(key_orthogonality(&same, 4, 3).unwrap(), 1.0, epsilon = 1e-15);
        let mut zero_col = vec![1.0; 12];
        for i in 0..4 {
            zero_col[i * 3 + 1] = 0.0;
        }
        let err = key_orthogonality(&zero_col, 4, 3).unwrap_err();
        assert!(err.to_string().contains("column 1"));
        assert!(key_orthogonality(&[1.0, 2.0], 2, 1).is_err());
    }

    #[test]
    fn gaussian_baseline_values() {
        assert_relative_eq!(gaussian_baseline(1), (2.0 / std::f64::consts::PI).sqrt());
        assert_relative_eq!(gaussian_baseline(1024), 0.024_933_892_525_089_544, epsilon = 1e-15);
    }

    #[test]
    fn attention_entropy_cases() {
        let uniform = vec![0.125; 8];
        assert_relative_eq!(head_mean_entropy(&uniform, 1).unwrap(), 3.0, epsilon = 1e-15);
        let one_hot = [0.0, 1.0, 0.0, 0.0];
        assert_eq!(head_mean_entropy(&one_hot, 1).unwrap(), 0.0);
        // two heads, rows (1,0) and (0.5,0.5)
        let rows = [1.0, 0.0, 0.5, 0.5];
        assert_relative_eq!(head_mean_entropy(&rows, 2).unwrap(), 0.5);
        // averaged distribution (0.75, 0.25)
        let biased = entropy_of_head_mean(&rows, 2).unwrap();
        assert!(biased > 0.5);
        assert!(head_entropies(&[], 1).is_err());
    }

    #[test]
    fn classifier_needs_all_metrics() {
        let t = Thresholds::default();
        let mut input = ClassifierInput {
            manifold: vec![ManifoldMetric {
                prompt_set: "mixed".into(),
                pc1_ratio: 0.5,
                pc12_ratio: 0.8,
            }],
            orthogonality_layer_means: vec![0.1],
            attention_reduction: None,
        };
        assert!(classify_model(&input, &t).is_err());
        input.attention_reduction = Some(0.25);
        assert_eq!(classify_model(&input, &t).unwrap().verdict, Verdict::Partial);
        input.attention_reduction = Some(0.31);
        assert_eq!(classify_model(&input, &t).unwrap().verdict, Verdict::Full);
        input.manifold[0].pc12_ratio = 0.04;
        input.manifold[0].pc1_ratio = 0.02;
        input.orthogonality_layer_means = vec![0.3, 0.4];
        input.attention_reduction = Some(0.0);
        assert_eq!(classify_model(&input, &t).unwrap().verdict, Verdict::None);
    }

    #[test]
    fn global_basis_rejects_width_mismatch() {
        let a = vec![vec![1.0, 2.0], vec![2.0, 1.0], vec![3.0, 5.0]];
        let b = vec![vec![1.0, 2.0, 3.0], vec![2.0, 1.0, 0.0], vec![3.0, 5.0, 1.0]];
        assert!(global_pca_basis(&[a.clone(), b.clone()], None, None).is_err());
        assert!(global_pca_basis(&[a, b], None, Some(2)).is_ok());
    }
}
