//! Run artifacts: CSV tables, SVG plots, a markdown summary, and run diffs.
//!
//! Every writer formats numbers with Rust's shortest round-trip `Display`, so
//! identical inputs give byte-identical files.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::geometry::{AttentionEntropyProfile, GeometryReport, OrthogonalityProfile};
use crate::interventions::InterventionOutcome;
use crate::stats;

pub const GEOMETRY_REPORT: &str = "geometry_report.json";
pub const STATS_REPORT: &str = "stats_report.json";
pub const OUTCOME_REPORT: &str = "intervention_outcome.json";
pub const SUMMARY: &str = "summary.md";

fn opt(x: Option<f64>) -> String {
    x.map_or_else(String::new, |v| v.to_string())
}

pub fn manifold_csv(r: &GeometryReport) -> String {
    let mut s = String::from("layer,pc1_ratio,pc12_ratio,participation_ratio,n_dropped,pc1_entropy_corr,pc1_entropy_spearman\n");
    for l in &r.layers {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            l.layer,
            l.pc1_ratio,
            l.pc12_ratio,
            l.participation_ratio,
            l.n_dropped,
            opt(l.pc1_entropy_corr),
            opt(l.pc1_entropy_spearman)
        );
    }
    s
}

pub fn coords_csv(r: &GeometryReport) -> String {
    let mut s = String::from("prompt_id,pc1,pc2,entropy_bits\n");
    for ((id, c), h) in r.prompt_ids.iter().zip(&r.final_layer.coords).zip(&r.final_layer_entropies) {
        let _ = writeln!(s, "{id},{},{},{h}", c[0], c[1]);
    }
    s
}

pub fn orthogonality_csv(o: &OrthogonalityProfile) -> String {
    let mut s = String::from("layer,mean,p05,p25,p50,p75,p95,gaussian_baseline\n");
    for l in &o.layers {
        let b = &l.bands;
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            l.layer, l.mean, b.p05, b.p25, b.p50, b.p75, b.p95, o.gaussian_baseline
        );
    }
    s
}

pub fn attention_csv(a: &AttentionEntropyProfile) -> String {
    let mut s = String::from("layer,mean_bits,ci_lo,ci_hi,mean_normalized,ci_normalized_lo,ci_normalized_hi,jensen_biased_bits\n");
    for l in &a.layers {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            l.layer,
            l.mean_bits,
            l.ci.lo,
            l.ci.hi,
            l.mean_normalized,
            l.ci_normalized.lo,
            l.ci_normalized.hi,
            l.jensen_biased_bits
        );
    }
    s
}

pub fn outcome_csv(o: &InterventionOutcome) -> String {
    let mut s = String::from(
        "layer,intervened,baseline_corr,baseline_ci_lo,baseline_ci_hi,intervened_corr,delta,within_baseline_ci,applied_norm_mean,applied_norm_max\n",
    );
    for e in &o.layers {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{}",
            e.layer,
            e.intervened,
            e.baseline_corr,
            e.baseline_ci.lo,
            e.baseline_ci.hi,
            e.intervened_corr,
            e.delta,
            e.within_baseline_ci,
            e.applied_norm_mean,
            e.applied_norm_max
        );
    }
    s
}

/// SULA prompt ids look like `main-k4-0012`; returns the `k`.
pub fn k_from_id(id: &str) -> Option<usize> {
    id.split('-')
        .find_map(|seg| seg.strip_prefix('k').and_then(|d| d.parse().ok()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KPoint {
    pub k: usize,
    pub mean_pc1: f64,
    pub mean_entropy_bits: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KTrajectory {
    pub points: Vec<KPoint>,
    /// Spearman ρ between k and the PC1 coordinate over prompts.
    pub spearman_k_pc1: Option<f64>,
}

impl KTrajectory {
    pub fn is_monotone_decreasing(&self) -> bool {
        self.points.windows(2).all(|w| w[1].mean_pc1 < w[0].mean_pc1)
    }
}

/// Mean final-layer PC1 coordinate per k, for prompts whose id carries k.
pub fn pc1_by_k(r: &GeometryReport) -> Option<KTrajectory> {
    let mut by_k: BTreeMap<usize, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    let mut ks = Vec::new();
    let mut pcs = Vec::new();
    for ((id, c), h) in r.prompt_ids.iter().zip(&r.final_layer.coords).zip(&r.final_layer_entropies) {
        if let Some(k) = k_from_id(id) {
            let e = by_k.entry(k).or_default();
            e.0.push(c[0]);
            e.1.push(*h);
            ks.push(k as f64);
            pcs.push(c[0]);
        }
    }
    if by_k.is_empty() {
        return None;
    }
    Some(KTrajectory {
        points: by_k
            .into_iter()
            .map(|(k, (p, h))| KPoint {
                k,
                mean_pc1: stats::mean(&p),
                mean_entropy_bits: stats::mean(&h),
                n: p.len(),
            })
            .collect(),
        spearman_k_pc1: stats::spearman(&ks, &pcs).ok(),
    })
}

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

const W: f64 = 480.0;
const H: f64 = 360.0;
const PAD: f64 = 48.0;

impl Frame {
    fn fit(xs: impl Iterator<Item = f64> + Clone, ys: impl Iterator<Item = f64> + Clone) -> Self {
        let span = |it: &mut dyn Iterator<Item = f64>| {
            let (lo, hi) = it.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
            if !lo.is_finite() {
                (0.0, 1.0)
            } else if hi - lo < 1e-12 {
                (lo - 0.5, hi + 0.5)
            } else {
                (lo, hi)
            }
        };
        let (x0, x1) = span(&mut xs.clone());
        let (y0, y1) = span(&mut ys.clone());
        Self { x0, x1, y0, y1 }
    }

    fn px(&self, x: f64) -> f64 {
        PAD + (x - self.x0) / (self.x1 - self.x0) * (W - 2.0 * PAD)
    }

    fn py(&self, y: f64) -> f64 {
        H - PAD - (y - self.y0) / (self.y1 - self.y0) * (H - 2.0 * PAD)
    }
}

fn svg_open(title: &str, xlabel: &str, ylabel: &str, f: &Frame) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="20" text-anchor="middle" font-size="13">{}</text>"#, W / 2.0, esc(title));
    let _ = writeln!(
        s,
        r#"<path d="M{PAD} {PAD} V{} H{}" fill="none" stroke="black"/>"#,
        H - PAD,
        W - PAD
    );
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, W / 2.0, H - 12.0, esc(xlabel));
    let _ = writeln!(
        s,
        r#"<text x="14" y="{}" text-anchor="middle" transform="rotate(-90 14 {})">{}</text>"#,
        H / 2.0,
        H / 2.0,
        esc(ylabel)
    );
    let _ = writeln!(s, r#"<text x="{PAD}" y="{}" text-anchor="middle">{:.3}</text>"#, H - PAD + 14.0, f.x0);
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{:.3}</text>"#, W - PAD, H - PAD + 14.0, f.x1);
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{:.3}</text>"#, PAD - 4.0, H - PAD, f.y0);
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{:.3}</text>"#, PAD - 4.0, PAD + 4.0, f.y1);
    s
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Blue (low) to red (high).
fn color(t: f64) -> String {
    let t = t.clamp(0.0, 1.0);
    let r = (40.0 + 200.0 * t).round() as u8;
    let b = (220.0 - 180.0 * t).round() as u8;
    format!("#{r:02x}50{b:02x}")
}

/// Final-layer PC1/PC2 scatter colored by entropy.
pub fn pc_scatter_svg(r: &GeometryReport) -> String {
    let c = &r.final_layer.coords;
    let f = Frame::fit(c.iter().map(|p| p[0]), c.iter().map(|p| p[1]));
    let h = &r.final_layer_entropies;
    let (lo, hi) = h.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)));
    let mut s = svg_open(&format!("{}: final-layer values", r.model_name), "PC1", "PC2", &f);
    for (p, e) in c.iter().zip(h) {
        let t = if hi > lo { (e - lo) / (hi - lo) } else { 0.5 };
        let _ = writeln!(
            s,
            r#"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="{}" fill-opacity="0.8"/>"#,
            f.px(p[0]),
            f.py(p[1]),
            color(t)
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Polyline plot of one or more series.
pub fn line_svg(title: &str, xlabel: &str, ylabel: &str, series: &[(&str, Vec<(f64, f64)>)]) -> String {
    let pts = series.iter().flat_map(|(_, v)| v.iter());
    let f = Frame::fit(pts.clone().map(|p| p.0), pts.map(|p| p.1));
    let mut s = svg_open(title, xlabel, ylabel, &f);
    for (i, (name, v)) in series.iter().enumerate() {
        let col = color(if series.len() > 1 { i as f64 / (series.len() - 1) as f64 } else { 0.0 });
        let d: Vec<String> = v.iter().map(|p| format!("{:.2},{:.2}", f.px(p.0), f.py(p.1))).collect();
        let _ = writeln!(s, r#"<polyline points="{}" fill="none" stroke="{col}" stroke-width="1.5"/>"#, d.join(" "));
        for p in v {
            let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="2" fill="{col}"/>"#, f.px(p.0), f.py(p.1));
        }
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" fill="{col}">{}</text>"#,
            W - PAD - 100.0,
            PAD + 14.0 * i as f64,
            esc(name)
        );
    }
    s.push_str("</svg>\n");
    s
}

pub fn attention_svg(r: &GeometryReport) -> Option<String> {
    let a = r.attention.as_ref()?;
    let raw = a.layers.iter().map(|l| (l.layer as f64, l.mean_bits)).collect();
    let jb = a.layers.iter().map(|l| (l.layer as f64, l.jensen_biased_bits)).collect();
    Some(line_svg(
        &format!("{}: attention entropy by layer", r.model_name),
        "layer",
        "bits",
        &[("head-mean", raw), ("entropy of mean", jb)],
    ))
}

pub fn pc1_vs_k_svg(name: &str, t: &KTrajectory) -> String {
    let pts = t.points.iter().map(|p| (p.k as f64, p.mean_pc1)).collect();
    line_svg(&format!("{name}: PC1 vs in-context examples"), "k", "mean PC1", &[("PC1", pts)])
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

/// `geometry_report.json`, `stats_report.json` and the per-metric CSVs.
pub fn write_geometry_artifacts(r: &GeometryReport, out: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let mut files = vec![
        (GEOMETRY_REPORT.to_string(), to_json(r)?),
        (STATS_REPORT.to_string(), to_json(&r.tests)?),
        ("manifold.csv".to_string(), manifold_csv(r)),
        ("pc_coords.csv".to_string(), coords_csv(r)),
    ];
    if let Some(o) = &r.orthogonality {
        files.push(("orthogonality.csv".into(), orthogonality_csv(o)));
    }
    if let Some(a) = &r.attention {
        files.push(("attention.csv".into(), attention_csv(a)));
    }
    let mut written = Vec::new();
    for (name, body) in files {
        let p = out.join(name);
        write_atomic(&p, body.as_bytes())?;
        written.push(p);
    }
    Ok(written)
}

pub fn write_outcome_artifacts(o: &InterventionOutcome, out: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let a = out.join(OUTCOME_REPORT);
    write_atomic(&a, to_json(o)?.as_bytes())?;
    let b = out.join("intervention_outcome.csv");
    write_atomic(&b, outcome_csv(o).as_bytes())?;
    Ok(vec![a, b])
}

/// Inputs to [`write_report`]. Missing parts are skipped.
#[derive(Debug, Default, Clone)]
pub struct ReportInputs {
    pub geometry: Vec<GeometryReport>,
    pub outcomes: Vec<InterventionOutcome>,
}

impl ReportInputs {
    /// Collect every known artifact under `dir`, one level deep, in sorted
    /// path order.
    pub fn scan(dir: &Path) -> Result<Self> {
        let mut out = Self::default();
        for path in sorted_files(dir)? {
            let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default();
            let read = || fs::read_to_string(&path).map_err(|e| Error::io(&path, e));
            if name == GEOMETRY_REPORT {
                out.geometry.push(serde_json::from_str(&read()?)?);
            } else if name == OUTCOME_REPORT {
                out.outcomes.push(serde_json::from_str(&read()?)?);
            }
        }
        Ok(out)
    }
}

fn sorted_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    if !dir.is_dir() {
        return Err(Error::io(dir, std::io::Error::new(std::io::ErrorKind::NotFound, "not a directory")));
    }
    let mut entries: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .collect();
    entries.sort();
    for p in entries {
        if p.is_dir() {
            let mut sub: Vec<PathBuf> = fs::read_dir(&p)
                .map_err(|e| Error::io(&p, e))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.is_file())
                .collect();
            sub.sort();
            out.extend(sub);
        } else {
            out.push(p);
        }
    }
    Ok(out)
}

/// Markdown summary text.
pub fn summary_markdown(inputs: &ReportInputs) -> String {
    let mut s = String::from("# Run summary\n\n");
    if inputs.geometry.is_empty() && inputs.outcomes.is_empty() {
        s.push_str("No artifacts found.\n");
        return s;
    }
    for g in &inputs.geometry {
        let fl = &g.final_layer;
        let _ = writeln!(s, "## {}\n", g.model_name);
        let _ = writeln!(s, "- prompts: {}, value width: {}", g.n_prompts, g.value_width);
        let _ = writeln!(
            s,
            "- final layer: PC1 {:.1}%, PC1+PC2 {:.1}%, PR {:.2}",
            100.0 * fl.pc1_ratio,
            100.0 * fl.pc12_ratio,
            fl.participation_ratio
        );
        if let Some(c) = fl.pc1_entropy_corr {
            let _ = writeln!(s, "- corr(PC1, entropy): {c:.3}");
        }
        if let Some(o) = &g.orthogonality {
            let _ = writeln!(
                s,
                "- key orthogonality: mean over layers {:.4} (Gaussian baseline {:.4})",
                stats::mean(&o.layer_means()),
                o.gaussian_baseline
            );
        }
        if let Some(a) = &g.attention {
            let _ = writeln!(s, "- attention entropy reduction: {:.1}%", 100.0 * a.reduction_fraction);
        }
        if let Some(c) = &g.classification {
            let _ = writeln!(
                s,
                "- verdict: {:?} (manifold {}, orthogonality {}, focusing {})",
                c.verdict, c.manifold, c.orthogonality, c.focusing
            );
        }
        if let Some(t) = pc1_by_k(g) {
            let _ = writeln!(
                s,
                "- PC1 vs k: {} points, monotone decreasing: {}, spearman {}",
                t.points.len(),
                t.is_monotone_decreasing(),
                t.spearman_k_pc1.map_or_else(|| "n/a".into(), |r| format!("{r:.3}"))
            );
        }
        s.push('\n');
    }
    for o in &inputs.outcomes {
        let _ = writeln!(s, "## Intervention {:?} / {:?} on layers {:?}\n", o.mode, o.axis_source, o.spec_layers);
        s.push_str("| layer | listed | baseline corr | intervened corr | within CI |\n|---|---|---|---|---|\n");
        for e in &o.layers {
            let _ = writeln!(
                s,
                "| {} | {} | {:.4} | {:.4} | {} |",
                e.layer, e.intervened, e.baseline_corr, e.intervened_corr, e.within_baseline_ci
            );
        }
        if let Some(b) = &o.behavior {
            let _ = writeln!(
                s,
                "\nSULA MAE {:.4} → {:.4} bits (relative change {:.4})",
                b.baseline.mae_bits, b.intervened.mae_bits, b.mae_rel_change
            );
        }
        s.push('\n');
    }
    s
}

/// Write the summary and plots into `out`. Returns the written paths.
pub fn write_report(inputs: &ReportInputs, out: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let mut files: Vec<(String, String)> = vec![(SUMMARY.into(), summary_markdown(inputs))];
    let multi = inputs.geometry.len() > 1;
    for (i, g) in inputs.geometry.iter().enumerate() {
        let tag = if multi { format!("{i}_") } else { String::new() };
        files.push((format!("{tag}pc_scatter.svg"), pc_scatter_svg(g)));
        if let Some(a) = attention_svg(g) {
            files.push((format!("{tag}attention_entropy.svg"), a));
        }
        if let Some(t) = pc1_by_k(g) {
            files.push((format!("{tag}pc1_vs_k.svg"), pc1_vs_k_svg(&g.model_name, &t)));
        }
    }
    let mut written = Vec::new();
    for (name, body) in files {
        let p = out.join(name);
        write_atomic(&p, body.as_bytes())?;
        written.push(p);
    }
    Ok(written)
}

/// Write through a temporary sibling and rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension(format!(
        "{}.tmp",
        path.extension().and_then(|e| e.to_str()).unwrap_or("")
    ));
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FileStatus {
    Same,
    Differs,
    OnlyLeft,
    OnlyRight,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileDiff {
    pub name: String,
    pub status: FileStatus,
    /// Largest absolute numeric difference, for JSON files of equal shape.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_abs_diff: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunDiff {
    pub identical: bool,
    pub files: Vec<FileDiff>,
}

fn json_max_diff(a: &Value, b: &Value) -> Option<f64> {
    match (a, b) {
        (Value::Number(x), Value::Number(y)) => Some((x.as_f64()? - y.as_f64()?).abs()),
        (Value::Array(x), Value::Array(y)) if x.len() == y.len() => {
            x.iter().zip(y).try_fold(0.0_f64, |m, (p, q)| Some(m.max(json_max_diff(p, q)?)))
        }
        (Value::Object(x), Value::Object(y)) if x.len() == y.len() => x
            .iter()
            .try_fold(0.0_f64, |m, (k, p)| Some(m.max(json_max_diff(p, y.get(k)?)?))),
        _ => (a == b).then_some(0.0),
    }
}

/// Compare two run directories file by file (one level of subdirectories).
/// Run manifests are compared like any other file.
pub fn diff_runs(left: &Path, right: &Path) -> Result<RunDiff> {
    let rel = |root: &Path| -> Result<BTreeMap<String, PathBuf>> {
        Ok(sorted_files(root)?
            .into_iter()
            .map(|p| {
                let name = p.strip_prefix(root).unwrap_or(&p).to_string_lossy().replace('\\', "/");
                (name, p)
            })
            .collect())
    };
    let l = rel(left)?;
    let r = rel(right)?;
    let mut names: Vec<&String> = l.keys().chain(r.keys()).collect();
    names.sort();
    names.dedup();
    let mut files = Vec::new();
    for name in names {
        let d = match (l.get(name), r.get(name)) {
            (Some(a), Some(b)) => {
                let x = fs::read(a).map_err(|e| Error::io(a, e))?;
                let y = fs::read(b).map_err(|e| Error::io(b, e))?;
                if x == y {
                    FileDiff {
                        name: name.clone(),
                        status: FileStatus::Same,
                        max_abs_diff: None,
                    }
                } else {
                    let num = match (serde_json::from_slice::<Value>(&x), serde_json::from_slice::<Value>(&y)) {
                        (Ok(p), Ok(q)) => json_max_diff(&p, &q),
                        _ => None,
                    };
                    FileDiff {
                        name: name.clone(),
                        status: FileStatus::Differs,
                        max_abs_diff: num,
                    }
                }
            }
            (Some(_), None) => FileDiff {
                name: name.clone(),
                status: FileStatus::OnlyLeft,
                max_abs_diff: None,
            },
            _ => FileDiff {
                name: name.clone(),
                status: FileStatus::OnlyRight,
                max_abs_diff: None,
            },
        };
        files.push(d);
    }
    Ok(RunDiff {
        identical: files.iter().all(|f| f.status == FileStatus::Same),
        files,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn k_parsing() {
        assert_eq!(k_from_id("main-k4-0012"), Some(4));
        assert_eq!(k_from_id("lexical_remap-k16-0000"), Some(16));
        assert_eq!(k_from_id("fx-0001"), None);
    }

    #[test]
    fn empty_report_is_valid() {
        let dir = tempfile::tempdir().unwrap();
        let inputs = ReportInputs::scan(dir.path()).unwrap();
        let out = dir.path().join("out");
        let files = write_report(&inputs, &out).unwrap();
        assert_eq!(files.len(), 1);
        assert!(fs::read_to_string(&files[0]).unwrap().contains("No artifacts"));
    }

    #[test]
    fn identical_dirs_have_zero_diff() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        for d in [a.path(), b.path()] {
            fs::write(d.join("x.json"), "{\"v\": 1.5}").unwrap();
        }
        assert!(diff_runs(a.path(), b.path()).unwrap().identical);
        fs::write(b.path().join("x.json"), "{\"v\": 1.75}").unwrap();
        let d = diff_runs(a.path(), b.path()).unwrap();
        assert!(!d.identical);
        assert_eq!(d.files[0].max_abs_diff, Some(0.25));
    }

    #[test]
    fn line_plot_is_well_formed() {
        let s = line_svg("t", "x", "y", &[("a", vec![(0.0, 1.0), (1.0, 0.5)])]);
        assert!(s.starts_with("<svg") && s.ends_with("</svg>\n"));
        assert!(s.contains("polyline"));
    }
}
