//! LID- and POS-based code-mixing metrics for a single tagged sentence.
//!
//! `OTHER` tokens are transparent for spans and switch points: they are
//! dropped before run-length analysis, so `[L1, OTHER, L1]` is one span.
//! Metrics that are undefined for a sentence (no language tokens, no tagged
//! tokens of a POS class) evaluate to `0.0` and clear their valid flag.

use serde::{Deserialize, Serialize};

use crate::data::{LidLabel, PosLabel, TaggedSentence};

/// Number of metric features fed to the regressor.
pub const METRIC_FEATURES: usize = 21;

/// Maximal run of same-language tokens.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LanguageSpan {
    pub lid: LidLabel,
    pub length: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricValidity {
    pub cmi: bool,
    pub burstiness: bool,
    pub symcom_su: [bool; 17],
    pub symcom_sent: bool,
}

/// All metrics of one sentence. `symcom_su` follows [`PosLabel::ALL`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricVector {
    pub id: String,
    pub cmi: f64,
    pub switch_points: u32,
    pub burstiness: f64,
    pub symcom_su: [f64; 17],
    pub symcom_sent: f64,
    pub valid: MetricValidity,
}

/// Feature names in the order produced by [`MetricVector::features`].
pub fn feature_names() -> Vec<String> {
    let mut names: Vec<String> = ["cmi", "switch_points", "burstiness", "symcom_sent"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    names.extend(PosLabel::ALL.iter().map(|p| format!("symcom_{p}")));
    names
}

impl MetricVector {
    /// Canonical feature order: cmi, switch_points, burstiness, symcom_sent,
    /// then one SyMCoM score per POS tag.
    pub fn features(&self) -> [f64; METRIC_FEATURES] {
        let mut out = [0.0; METRIC_FEATURES];
        out[0] = self.cmi;
        out[1] = f64::from(self.switch_points);
        out[2] = self.burstiness;
        out[3] = self.symcom_sent;
        out[4..].copy_from_slice(&self.symcom_su);
        out
    }
}

fn language_lids(sentence: &TaggedSentence) -> impl Iterator<Item = LidLabel> + '_ {
    sentence.tokens.iter().map(|t| t.lid).filter(|l| l.is_language())
}

pub fn language_spans(sentence: &TaggedSentence) -> Vec<LanguageSpan> {
    let mut spans: Vec<LanguageSpan> = Vec::new();
    for lid in language_lids(sentence) {
        match spans.last_mut() {
            Some(last) if last.lid == lid => last.length += 1,
            _ => spans.push(LanguageSpan { lid, length: 1 }),
        }
    }
    spans
}

/// Code-Mixing Index: `(Σ w_i − max w_i) / (n − u)`, where `w_i` counts the
/// tokens of each language, `n` all tokens and `u` the `OTHER` tokens.
/// `None` when the sentence has no language tokens.
pub fn cmi(sentence: &TaggedSentence) -> Option<f64> {
    let n = sentence.tokens.len();
    let u = sentence.tokens.iter().filter(|t| !t.lid.is_language()).count();
    let (l1, l2) = language_lids(sentence).fold((0usize, 0usize), |(a, b), l| match l {
        LidLabel::L1 => (a + 1, b),
        _ => (a, b + 1),
    });
    if n == u {
        return None;
    }
    Some((l1 + l2 - l1.max(l2)) as f64 / (n - u) as f64)
}

pub fn switch_points(sentence: &TaggedSentence) -> u32 {
    let mut count = 0;
    let mut prev = None;
    for lid in language_lids(sentence) {
        if prev.is_some_and(|p| p != lid) {
            count += 1;
        }
        prev = Some(lid);
    }
    count
}

/// `(σ − m) / (σ + m)` over span lengths with the population standard
/// deviation. `None` for an empty span list.
pub fn burstiness_of_lengths(lengths: &[usize]) -> Option<f64> {
    if lengths.is_empty() {
        return None;
    }
    let k = lengths.len() as f64;
    let mean = lengths.iter().sum::<usize>() as f64 / k;
    let var = lengths
        .iter()
        .map(|&l| {
            let d = l as f64 - mean;
            d * d
        })
        .sum::<f64>()
        / k;
    let sd = var.sqrt();
    Some((sd - mean) / (sd + mean))
}

pub fn burstiness(sentence: &TaggedSentence) -> Option<f64> {
    let lengths: Vec<usize> = language_spans(sentence).iter().map(|s| s.length).collect();
    burstiness_of_lengths(&lengths)
}

/// Per-POS `(count_L1, count_L2)` over language-labelled, POS-tagged tokens.
fn pos_counts(sentence: &TaggedSentence) -> [(usize, usize); 17] {
    let mut counts = [(0, 0); 17];
    for t in &sentence.tokens {
        if let Some(pos) = t.pos {
            let c = &mut counts[pos.index()];
            match t.lid {
                LidLabel::L1 => c.0 += 1,
                LidLabel::L2 => c.1 += 1,
                LidLabel::Other => {}
            }
        }
    }
    counts
}

fn symcom_from_counts((l1, l2): (usize, usize)) -> Option<f64> {
    let total = l1 + l2;
    (total > 0).then(|| (l1 as f64 - l2 as f64) / total as f64)
}

/// SyMCoM for one syntactic unit: `(count_L1 − count_L2) / (count_L1 + count_L2)`.
pub fn symcom_su(sentence: &TaggedSentence, su: PosLabel) -> Option<f64> {
    symcom_from_counts(pos_counts(sentence)[su.index()])
}

fn symcom_sent_from_counts(counts: &[(usize, usize); 17]) -> Option<f64> {
    let len: usize = counts.iter().map(|(a, b)| a + b).sum();
    if len == 0 {
        return None;
    }
    // (count_SU / len) · |SyMCoM_SU| reduces to |count_L1 − count_L2| / len,
    // which keeps the sum in integers and the result exactly in [0, 1].
    let skew: usize = counts.iter().map(|&(a, b)| a.abs_diff(b)).sum();
    Some(skew as f64 / len as f64)
}

/// Sentence-level SyMCoM: `Σ_SU (count_SU / len) · |SyMCoM_SU|`, with `len`
/// the number of tokens that carry both a language label and a POS tag.
pub fn symcom_sent(sentence: &TaggedSentence) -> Option<f64> {
    symcom_sent_from_counts(&pos_counts(sentence))
}

pub fn metric_vector(sentence: &TaggedSentence) -> MetricVector {
    let counts = pos_counts(sentence);
    let mut symcom = [0.0; 17];
    let mut symcom_valid = [false; 17];
    for (i, &c) in counts.iter().enumerate() {
        if let Some(v) = symcom_from_counts(c) {
            symcom[i] = v;
            symcom_valid[i] = true;
        }
    }
    let cmi = cmi(sentence);
    let burst = burstiness(sentence);
    let sent = symcom_sent_from_counts(&counts);
    MetricVector {
        id: sentence.id.clone(),
        cmi: cmi.unwrap_or(0.0),
        switch_points: switch_points(sentence),
        burstiness: burst.unwrap_or(0.0),
        symcom_su: symcom,
        symcom_sent: sent.unwrap_or(0.0),
        valid: MetricValidity {
            cmi: cmi.is_some(),
            burstiness: burst.is_some(),
            symcom_su: symcom_valid,
            symcom_sent: sent.is_some(),
        },
    }
}
