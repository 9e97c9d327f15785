//! SULA: a synthetic in-context updating task with an exact Bayesian answer.
//!
//! A prompt lists `k` words, each tagged "positive" or "negative", followed by
//! a query word. A latent θ ∈ [0, 1] has a uniform prior and each label has
//! likelihood `0.9θ + 0.1(1−θ)` (positive) or `0.1θ + 0.9(1−θ)` (negative).
//!
//! Expanding the product of `a` positive and `b` negative factors with the
//! binomial theorem gives a polynomial in Bernstein form,
//! `Σ_j c_j θ^j (1−θ)^(n−j)`, so the posterior is exactly a mixture of
//! `Beta(1+j, 1+n−j)` components. With likelihood values 9/10 and 1/10 the
//! coefficients (scaled by 10^n) are integers, and the mixture weights are
//! ratios of big integers.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rand::seq::{index, SliceRandom};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{binary_entropy_bits, integrate_adaptive, kahan_sum, GaussLegendre};
use crate::rng;

/// Longest label sequence the posterior routines accept.
pub const MAX_LABELS: usize = 64;
/// Longest sequence `entropy_curve` will enumerate.
pub const MAX_ENUMERATED_K: usize = 20;
/// Nodes used by the quadrature oracle.
pub const QUADRATURE_NODES: usize = 256;

/// Standard `k` values for SULA corpora.
pub const STANDARD_K: [usize; 5] = [0, 1, 2, 4, 8];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Positive,
    Negative,
}

impl Label {
    pub fn flipped(self) -> Self {
        match self {
            Label::Positive => Label::Negative,
            Label::Negative => Label::Positive,
        }
    }
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "+" | "pos" | "positive" => Ok(Label::Positive),
            "-" | "neg" | "negative" => Ok(Label::Negative),
            other => Err(Error::Unknown {
                kind: "label",
                value: other.to_string(),
            }),
        }
    }
}

/// Parse a compact label string such as `"++-+"` or `"pos,neg"`.
pub fn parse_labels(s: &str) -> Result<Vec<Label>> {
    let s = s.trim();
    if s.is_empty() {
        return Ok(Vec::new());
    }
    if s.contains(',') {
        return s.split(',').map(|t| t.trim().parse()).collect();
    }
    s.chars().map(|c| c.to_string().parse()).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    Main,
    LexicalRemap,
    ShuffledLabels,
    EvidenceAblation,
}

impl Condition {
    pub const ALL: [Condition; 4] = [
        Condition::Main,
        Condition::LexicalRemap,
        Condition::ShuffledLabels,
        Condition::EvidenceAblation,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Condition::Main => "main",
            Condition::LexicalRemap => "lexical_remap",
            Condition::ShuffledLabels => "shuffled_labels",
            Condition::EvidenceAblation => "evidence_ablation",
        }
    }

    /// Whether the condition leaves the labeled evidence usable.
    pub fn carries_evidence(self) -> bool {
        matches!(self, Condition::Main | Condition::LexicalRemap)
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Condition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Condition::ALL
            .into_iter()
            .find(|c| c.as_str() == s || c.as_str().replace('_', "-") == s)
            .ok_or_else(|| Error::Unknown {
                kind: "condition",
                value: s.to_string(),
            })
    }
}

/// How labels are sampled relative to word sentiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabelPolicy {
    /// Probability that a label matches its word's sentiment.
    pub consistency: f64,
    pub likelihood_hi: f64,
    pub likelihood_lo: f64,
}

impl Default for LabelPolicy {
    fn default() -> Self {
        Self {
            consistency: 0.7,
            likelihood_hi: 0.9,
            likelihood_lo: 0.1,
        }
    }
}

impl LabelPolicy {
    pub fn with_consistency(consistency: f64) -> Self {
        Self {
            consistency,
            ..Self::default()
        }
    }

    /// The likelihood is fixed at 0.9 / 0.1 so the posterior stays exactly
    /// representable; only the consistency is free.
    pub fn validate(&self) -> Result<()> {
        if !(self.consistency > 0.0 && self.consistency < 1.0) {
            return Err(Error::InvalidInput(format!(
                "consistency must lie in (0, 1), got {}",
                self.consistency
            )));
        }
        if self.likelihood_hi != 0.9 || self.likelihood_lo != 0.1 {
            return Err(Error::InvalidInput(format!(
                "likelihood must be 0.9/0.1, got {}/{}",
                self.likelihood_hi, self.likelihood_lo
            )));
        }
        Ok(())
    }
}

/// Exact Bayesian answer for one label sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SulaPosterior {
    pub n_pos: usize,
    pub n_neg: usize,
    /// Weight of `Beta(1+j, 1+n−j)` at index `j`.
    pub mixture_weights: Vec<f64>,
    /// The same weights as reduced fractions `"num/den"` (empty when computed
    /// by quadrature).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub mixture_weights_exact: Vec<String>,
    pub p_positive: f64,
    pub predictive_entropy_bits: f64,
    /// Differential entropy of the θ posterior (nats).
    pub theta_posterior_entropy_nats: f64,
}

impl SulaPosterior {
    pub fn n(&self) -> usize {
        self.n_pos + self.n_neg
    }

    /// Posterior density of θ reconstructed from the mixture.
    pub fn density(&self, theta: f64) -> f64 {
        beta_mixture_density(&self.mixture_weights, theta)
    }
}

fn count_labels(labels: &[Label]) -> (usize, usize) {
    let pos = labels.iter().filter(|l| **l == Label::Positive).count();
    (pos, labels.len() - pos)
}

fn check_len(labels: &[Label]) -> Result<()> {
    if labels.len() > MAX_LABELS {
        return Err(Error::InvalidInput(format!(
            "at most {MAX_LABELS} labels supported, got {}",
            labels.len()
        )));
    }
    Ok(())
}

fn binomials(n: usize) -> Vec<BigInt> {
    let mut row = vec![BigInt::one()];
    for _ in 0..n {
        let mut next = vec![BigInt::one(); row.len() + 1];
        for i in 1..row.len() {
            next[i] = &row[i - 1] + &row[i];
        }
        row = next;
    }
    row
}

fn factorials(n: usize) -> Vec<BigInt> {
    let mut f = vec![BigInt::one()];
    for i in 1..=n {
        let next = &f[i - 1] * BigInt::from(i);
        f.push(next);
    }
    f
}

/// Exact mixture weights for `a` positive and `b` negative labels.
pub fn exact_mixture_weights(n_pos: usize, n_neg: usize) -> Vec<BigRational> {
    let n = n_pos + n_neg;
    let ca = binomials(n_pos);
    let cb = binomials(n_neg);
    let nine = BigInt::from(9u32);
    let pow9: Vec<BigInt> = (0..=n)
        .scan(BigInt::one(), |acc, i| {
            let cur = acc.clone();
            if i < n {
                *acc = &*acc * &nine;
            }
            Some(cur)
        })
        .collect();
    // (9θ + (1−θ))^a · (θ + 9(1−θ))^b, coefficients of θ^j (1−θ)^(n−j)
    let mut coef = vec![BigInt::zero(); n + 1];
    for (i, cai) in ca.iter().enumerate() {
        let left = cai * &pow9[i];
        for (m, cbm) in cb.iter().enumerate() {
            coef[i + m] += &left * cbm * &pow9[n_neg - m];
        }
    }
    let fact = factorials(n);
    let raw: Vec<BigInt> = coef
        .iter()
        .enumerate()
        .map(|(j, c)| c * &fact[j] * &fact[n - j])
        .collect();
    let total: BigInt = raw.iter().sum();
    raw.into_iter()
        .map(|w| BigRational::new(w, total.clone()))
        .collect()
}

/// Density of `Σ_j w_j Beta(1+j, 1+n−j)` at `theta`, `n = len(w) − 1`.
pub fn beta_mixture_density(weights: &[f64], theta: f64) -> f64 {
    let n = weights.len() - 1;
    // de Casteljau over coefficients (n+1)·w_j of the Bernstein basis
    let mut b: Vec<f64> = weights.iter().map(|w| w * (n + 1) as f64).collect();
    for r in 1..=n {
        for j in 0..=(n - r) {
            b[j] = (1.0 - theta) * b[j] + theta * b[j + 1];
        }
    }
    b[0]
}

fn ratio_string(r: &BigRational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

/// Posterior of θ and the predictive label distribution, computed exactly.
pub fn exact_posterior(labels: &[Label]) -> Result<SulaPosterior> {
    check_len(labels)?;
    let (a, b) = count_labels(labels);
    Ok(exact_posterior_counts(a, b))
}

/// Exact posterior predictive probability of a positive label, as a fraction.
pub fn exact_p_positive(n_pos: usize, n_neg: usize) -> BigRational {
    let weights = exact_mixture_weights(n_pos, n_neg);
    p_positive_from_weights(&weights)
}

fn p_positive_from_weights(weights: &[BigRational]) -> BigRational {
    let n = weights.len() - 1;
    let denom = BigInt::from(n + 2);
    let mean_theta: BigRational = weights
        .iter()
        .enumerate()
        .map(|(j, w)| w * BigRational::new(BigInt::from(j + 1), denom.clone()))
        .fold(BigRational::zero(), |acc, x| acc + x);
    BigRational::new(1.into(), 10.into()) + BigRational::new(4.into(), 5.into()) * mean_theta
}

pub fn exact_posterior_counts(n_pos: usize, n_neg: usize) -> SulaPosterior {
    let weights = exact_mixture_weights(n_pos, n_neg);
    let p = p_positive_from_weights(&weights);
    let p_positive = p.to_f64().expect("probability fits in f64");
    let w: Vec<f64> = weights
        .iter()
        .map(|r| r.to_f64().expect("weight fits in f64"))
        .collect();
    let theta_entropy = if n_pos + n_neg == 0 {
        0.0
    } else {
        -integrate_adaptive(0.0, 1.0, 1e-15, |t| {
            let f = beta_mixture_density(&w, t);
            if f > 0.0 {
                f * f.ln()
            } else {
                0.0
            }
        })
    };
    SulaPosterior {
        n_pos,
        n_neg,
        mixture_weights_exact: weights.iter().map(ratio_string).collect(),
        mixture_weights: w,
        p_positive,
        predictive_entropy_bits: binary_entropy_bits(p_positive),
        theta_posterior_entropy_nats: theta_entropy,
    }
}

/// The same quantities by 256-node Gauss–Legendre quadrature of the raw
/// likelihood product, without the Beta-mixture expansion.
pub fn quadrature_posterior(labels: &[Label]) -> Result<SulaPosterior> {
    check_len(labels)?;
    let (a, b) = count_labels(labels);
    let (a_f, b_f) = (a as f64, b as f64);
    let gl = GaussLegendre::new(QUADRATURE_NODES);
    let log_lik = |t: f64| a_f * (0.1 + 0.8 * t).ln() + b_f * (0.9 - 0.8 * t).ln();
    let mut z = Vec::with_capacity(QUADRATURE_NODES);
    let mut zp = Vec::with_capacity(QUADRATURE_NODES);
    let mut zl = Vec::with_capacity(QUADRATURE_NODES);
    for (t, w) in gl.mapped(0.0, 1.0) {
        let ll = log_lik(t);
        let l = ll.exp();
        z.push(w * l);
        zp.push(w * l * (0.1 + 0.8 * t));
        zl.push(w * l * ll);
    }
    let z = kahan_sum(z);
    let p_positive = kahan_sum(zp) / z;
    // −∫ (L/Z) ln(L/Z) = ln Z − (1/Z) ∫ L ln L
    let theta_entropy = z.ln() - kahan_sum(zl) / z;
    Ok(SulaPosterior {
        n_pos: a,
        n_neg: b,
        mixture_weights: float_mixture_weights(a, b),
        mixture_weights_exact: Vec::new(),
        p_positive,
        predictive_entropy_bits: binary_entropy_bits(p_positive),
        theta_posterior_entropy_nats: theta_entropy,
    })
}

/// Floating-point counterpart of [`exact_mixture_weights`], via polynomial
/// convolution and log-space Beta normalizers.
fn float_mixture_weights(a: usize, b: usize) -> Vec<f64> {
    let n = a + b;
    let mut coef = vec![1.0f64];
    let mut mul = |hi: f64, lo: f64| {
        let mut next = vec![0.0; coef.len() + 1];
        for (j, c) in coef.iter().enumerate() {
            next[j + 1] += c * hi;
            next[j] += c * lo;
        }
        coef = next;
    };
    for _ in 0..a {
        mul(0.9, 0.1);
    }
    for _ in 0..b {
        mul(0.1, 0.9);
    }
    let ln_beta = |j: usize| {
        crate::numeric::ln_gamma((j + 1) as f64) + crate::numeric::ln_gamma((n - j + 1) as f64)
            - crate::numeric::ln_gamma((n + 2) as f64)
    };
    let raw: Vec<f64> = coef
        .iter()
        .enumerate()
        .map(|(j, c)| c * ln_beta(j).exp())
        .collect();
    let total = kahan_sum(raw.iter().copied());
    raw.into_iter().map(|w| w / total).collect()
}

/// One point of the expected-entropy curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntropyCurvePoint {
    pub k: usize,
    /// `E[H(p(labels))]` over label sequences drawn from the policy.
    pub expected_entropy_bits: f64,
    /// `H(E[p(labels)])`: entropy of the policy-averaged predictive.
    pub marginal_entropy_bits: f64,
    /// `E[h(θ | labels)]` in nats.
    pub expected_theta_entropy_nats: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyCurve {
    pub consistency: f64,
    pub points: Vec<EntropyCurvePoint>,
}

impl EntropyCurve {
    pub fn expected(&self) -> BTreeMap<usize, f64> {
        self.points
            .iter()
            .map(|p| (p.k, p.expected_entropy_bits))
            .collect()
    }

    pub fn is_strictly_decreasing(&self) -> bool {
        self.points.windows(2).all(|w| {
            w[1].expected_entropy_bits < w[0].expected_entropy_bits
                && w[1].marginal_entropy_bits < w[0].marginal_entropy_bits
        })
    }
}

/// Expected predictive entropy per `k` when every label is independently
/// positive with probability `policy.consistency`.
///
/// The posterior depends on a sequence only through its label counts, so the
/// `2^k` sequences are enumerated by count with binomial multiplicity.
pub fn entropy_curve(policy: &LabelPolicy, k_values: &[usize]) -> Result<EntropyCurve> {
    policy.validate()?;
    if k_values.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidInput("k values must be sorted ascending".into()));
    }
    if let Some(&k) = k_values.iter().find(|&&k| k > MAX_ENUMERATED_K) {
        return Err(Error::InvalidInput(format!(
            "k = {k} exceeds the enumeration limit {MAX_ENUMERATED_K}"
        )));
    }
    let c = policy.consistency;
    let mut points = Vec::with_capacity(k_values.len());
    for &k in k_values {
        let mut h = Vec::with_capacity(k + 1);
        let mut p = Vec::with_capacity(k + 1);
        let mut ht = Vec::with_capacity(k + 1);
        for a in 0..=k {
            let prob = binomial_f64(k, a) * c.powi(a as i32) * (1.0 - c).powi((k - a) as i32);
            let post = exact_posterior_counts(a, k - a);
            h.push(prob * post.predictive_entropy_bits);
            p.push(prob * post.p_positive);
            ht.push(prob * post.theta_posterior_entropy_nats);
        }
        points.push(EntropyCurvePoint {
            k,
            expected_entropy_bits: kahan_sum(h),
            marginal_entropy_bits: binary_entropy_bits(kahan_sum(p)),
            expected_theta_entropy_nats: kahan_sum(ht),
        });
    }
    Ok(EntropyCurve {
        consistency: c,
        points,
    })
}

fn binomial_f64(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Disjoint word lists for prompt generation.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    pub positive: Vec<String>,
    pub negative: Vec<String>,
    /// Replacement tokens for the lexical-remap control.
    pub nonsense: Vec<String>,
}

impl Vocabulary {
    pub fn builtin() -> Self {
        let parse = |s: &str| s.lines().map(str::trim).filter(|l| !l.is_empty()).map(String::from).collect();
        Self {
            positive: parse(include_str!("../vocab/positive.txt")),
            negative: parse(include_str!("../vocab/negative.txt")),
            nonsense: parse(include_str!("../vocab/nonsense.txt")),
        }
    }

    /// Read `positive.txt`, `negative.txt`, and `nonsense.txt` from `dir`.
    pub fn load(dir: &Path) -> Result<Self> {
        let read = |name: &str| -> Result<Vec<String>> {
            let path = dir.join(name);
            let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
            let words: Vec<String> = text
                .lines()
                .map(str::trim)
                .filter(|l| !l.is_empty())
                .map(String::from)
                .collect();
            if words.is_empty() {
                return Err(Error::Vocabulary(format!("{} is empty", path.display())));
            }
            Ok(words)
        };
        let v = Self {
            positive: read("positive.txt")?,
            negative: read("negative.txt")?,
            nonsense: read("nonsense.txt")?,
        };
        v.validate()?;
        Ok(v)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, list) in [
            ("positive", &self.positive),
            ("negative", &self.negative),
            ("nonsense", &self.nonsense),
        ] {
            if list.is_empty() {
                return Err(Error::Vocabulary(format!("{name} list is empty")));
            }
        }
        let pos: std::collections::HashSet<&String> = self.positive.iter().collect();
        let neg: std::collections::HashSet<&String> = self.negative.iter().collect();
        if let Some(w) = self.negative.iter().find(|w| pos.contains(w)) {
            return Err(Error::Vocabulary(format!("{w} is both positive and negative")));
        }
        if let Some(w) = self
            .nonsense
            .iter()
            .find(|w| pos.contains(w) || neg.contains(w))
        {
            return Err(Error::Vocabulary(format!("nonsense token {w} is a sentiment word")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Example {
    pub word: String,
    pub label: Label,
}

/// One generated prompt with its exact Bayesian answer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SulaPrompt {
    pub id: String,
    pub k: usize,
    pub examples: Vec<Example>,
    pub query: String,
    pub condition: Condition,
    pub seed: u64,
    pub posterior: SulaPosterior,
}

impl SulaPrompt {
    pub fn labels(&self) -> Vec<Label> {
        self.examples.iter().map(|e| e.label).collect()
    }

    /// Plain-text rendering handed to a model runner.
    pub fn render(&self) -> String {
        let mut s = String::new();
        for e in &self.examples {
            let label = match e.label {
                Label::Positive => "positive",
                Label::Negative => "negative",
            };
            s.push_str(&format!("{} is {label}\n", e.word));
        }
        s.push_str(&format!("{} is", self.query));
        s
    }

    /// Whitespace token count of [`render`](Self::render).
    pub fn token_count(&self) -> usize {
        3 * self.examples.len() + 2
    }
}

/// Generate a SULA corpus.
///
/// Prompt `i` at a given `k` (counting across all `k` in ascending order gives
/// the global index `g`) draws its words from stream `g` and its control
/// transform from an independent stream, so corpora generated with the same
/// seed under different conditions are twins: same words, same query.
///
/// The number of positive-sentiment words cycles through `0..=k` across the
/// prompts of one `k`, which spreads label imbalance evenly.
pub fn generate_corpus(
    counts_per_k: &BTreeMap<usize, usize>,
    policy: &LabelPolicy,
    condition: Condition,
    seed: u64,
    vocab: &Vocabulary,
) -> Result<Vec<SulaPrompt>> {
    policy.validate()?;
    vocab.validate()?;
    if let Some((k, _)) = counts_per_k.iter().find(|(_, &c)| c == 0) {
        return Err(Error::InvalidInput(format!("count for k = {k} must be positive")));
    }
    if let Some(&k) = counts_per_k.keys().find(|&&k| k > MAX_LABELS) {
        return Err(Error::InvalidInput(format!("k = {k} exceeds {MAX_LABELS}")));
    }
    let word_seed = rng::derive_seed(seed, "sula-words");
    let control_seed = rng::derive_seed(seed, "sula-control");
    let prior = exact_posterior_counts(0, 0);
    let mut out = Vec::new();
    let mut g: u64 = 0;
    for (&k, &count) in counts_per_k {
        for i in 0..count {
            let mut wr = rng::stream(word_seed, g);
            let n_pos_words = i % (k + 1);
            let mut sentiments: Vec<Label> = (0..k)
                .map(|j| if j < n_pos_words { Label::Positive } else { Label::Negative })
                .collect();
            sentiments.shuffle(&mut wr);
            let pos_words = draw_words(&mut wr, &vocab.positive, n_pos_words);
            let neg_words = draw_words(&mut wr, &vocab.negative, k - n_pos_words);
            let (mut pi, mut ni) = (pos_words.into_iter(), neg_words.into_iter());
            let mut examples: Vec<Example> = sentiments
                .iter()
                .map(|s| {
                    let word = match s {
                        Label::Positive => pi.next(),
                        Label::Negative => ni.next(),
                    }
                    .expect("enough words drawn");
                    let label = if wr.random::<f64>() < policy.consistency {
                        *s
                    } else {
                        s.flipped()
                    };
                    Example { word, label }
                })
                .collect();
            let query_list = if wr.random::<bool>() {
                &vocab.positive
            } else {
                &vocab.negative
            };
            let mut query = query_list[wr.random_range(0..query_list.len())].clone();
            let labels: Vec<Label> = examples.iter().map(|e| e.label).collect();
            let (a, b) = count_labels(&labels);

            let mut cr = rng::stream(control_seed, g);
            let posterior = match condition {
                Condition::Main => exact_posterior_counts(a, b),
                Condition::LexicalRemap => {
                    let tokens = draw_words(&mut cr, &vocab.nonsense, k + 1);
                    for (e, t) in examples.iter_mut().zip(&tokens) {
                        e.word = t.clone();
                    }
                    query = tokens[k].clone();
                    exact_posterior_counts(a, b)
                }
                Condition::ShuffledLabels => {
                    let mut labels = labels.clone();
                    labels.shuffle(&mut cr);
                    for (e, l) in examples.iter_mut().zip(labels) {
                        e.label = l;
                    }
                    prior.clone()
                }
                Condition::EvidenceAblation => {
                    examples.clear();
                    prior.clone()
                }
            };
            out.push(SulaPrompt {
                id: format!("{}-k{k}-{i:04}", condition.as_str()),
                k,
                examples,
                query,
                condition,
                seed: rng::derive_seed(word_seed, &g.to_string()),
                posterior,
            });
            g += 1;
        }
    }
    Ok(out)
}

/// `count` words, without replacement when the list is long enough.
fn draw_words(r: &mut rng::Rng, list: &[String], count: usize) -> Vec<String> {
    if count <= list.len() {
        index::sample(r, list.len(), count)
            .into_iter()
            .map(|i| list[i].clone())
            .collect()
    } else {
        (0..count)
            .map(|_| list[r.random_range(0..list.len())].clone())
            .collect()
    }
}

/// Default counts: `per_k` prompts at each of k ∈ {0, 1, 2, 4, 8}.
pub fn standard_counts(per_k: usize) -> BTreeMap<usize, usize> {
    STANDARD_K.iter().map(|&k| (k, per_k)).collect()
}

/// Parse `"0:50,1:50,2:50"` into a count map.
pub fn parse_k_counts(s: &str) -> Result<BTreeMap<usize, usize>> {
    let mut out = BTreeMap::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (k, c) = part
            .split_once(':')
            .ok_or_else(|| Error::InvalidInput(format!("expected k:count, got {part}")))?;
        let k: usize = k
            .trim()
            .parse()
            .map_err(|_| Error::InvalidInput(format!("bad k in {part}")))?;
        let c: usize = c
            .trim()
            .parse()
            .map_err(|_| Error::InvalidInput(format!("bad count in {part}")))?;
        if c == 0 {
            return Err(Error::InvalidInput(format!("count for k = {k} must be positive")));
        }
        out.insert(k, c);
    }
    if out.is_empty() {
        return Err(Error::InvalidInput("empty k-count list".into()));
    }
    Ok(out)
}

/// Write a corpus as JSON Lines.
pub fn write_corpus(path: &Path, prompts: &[SulaPrompt]) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for p in prompts {
        serde_json::to_writer(&mut w, p)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_corpus(path: &Path) -> Result<Vec<SulaPrompt>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line)?);
    }
    Ok(out)
}
