//! Prediction post-processing and the three evaluation measures: F1,
//! Cohen's kappa and mean squared error.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::Task;

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("gold and predicted lists differ in length ({gold} vs {pred})")]
    LengthMismatch { gold: usize, pred: usize },
    #[error("nothing to evaluate")]
    Empty,
    #[error("prediction for `{id}` is not finite ({value})")]
    NonFinitePrediction { id: String, value: f64 },
    #[error("no prediction for id `{0}`")]
    MissingPrediction(String),
    #[error("prediction for unknown id `{0}`")]
    UnknownId(String),
    #[error("duplicate prediction for id `{0}`")]
    DuplicatePrediction(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum F1Average {
    Macro,
    Micro,
    #[default]
    Weighted,
}

impl FromStr for F1Average {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "macro" => Ok(F1Average::Macro),
            "micro" => Ok(F1Average::Micro),
            "weighted" => Ok(F1Average::Weighted),
            _ => Err(format!("unknown F1 averaging `{s}` (expected macro, micro or weighted)")),
        }
    }
}

impl fmt::Display for F1Average {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            F1Average::Macro => "macro",
            F1Average::Micro => "micro",
            F1Average::Weighted => "weighted",
        })
    }
}

/// Half-up rounding followed by clipping to the task's range.
pub fn round_clip(prediction: f64, task: Task) -> Result<i64, EvalError> {
    if !prediction.is_finite() {
        return Err(EvalError::NonFinitePrediction {
            id: String::new(),
            value: prediction,
        });
    }
    let (lo, hi) = task.range();
    let rounded = (prediction + 0.5).floor().clamp(lo as f64, hi as f64);
    Ok(rounded as i64)
}

fn check_lengths(gold: usize, pred: usize) -> Result<(), EvalError> {
    if gold != pred {
        return Err(EvalError::LengthMismatch { gold, pred });
    }
    if gold == 0 {
        return Err(EvalError::Empty);
    }
    Ok(())
}

#[derive(Debug, Default, Clone, Copy)]
struct ClassCounts {
    tp: usize,
    fp: usize,
    fn_: usize,
}

fn class_counts(gold: &[i64], pred: &[i64]) -> BTreeMap<i64, ClassCounts> {
    let mut counts: BTreeMap<i64, ClassCounts> = BTreeMap::new();
    for (&g, &p) in gold.iter().zip(pred) {
        if g == p {
            counts.entry(g).or_default().tp += 1;
        } else {
            counts.entry(g).or_default().fn_ += 1;
            counts.entry(p).or_default().fp += 1;
        }
    }
    counts
}

fn f1_from(tp: usize, fp: usize, fn_: usize) -> f64 {
    let denom = 2 * tp + fp + fn_;
    if denom == 0 {
        0.0
    } else {
        2.0 * tp as f64 / denom as f64
    }
}

/// F1 of every class that occurs in `gold` or `pred`.
pub fn per_class_f1(gold: &[i64], pred: &[i64]) -> Result<BTreeMap<i64, f64>, EvalError> {
    check_lengths(gold.len(), pred.len())?;
    Ok(class_counts(gold, pred)
        .into_iter()
        .map(|(c, k)| (c, f1_from(k.tp, k.fp, k.fn_)))
        .collect())
}

/// Multi-class F1. Classes absent from both lists do not take part.
/// `Weighted` weights each class by its gold support.
pub fn f1_score(gold: &[i64], pred: &[i64], averaging: F1Average) -> Result<f64, EvalError> {
    check_lengths(gold.len(), pred.len())?;
    let counts = class_counts(gold, pred);
    Ok(match averaging {
        F1Average::Micro => {
            let (tp, fp, fn_) = counts
                .values()
                .fold((0, 0, 0), |(a, b, c), k| (a + k.tp, b + k.fp, c + k.fn_));
            f1_from(tp, fp, fn_)
        }
        F1Average::Macro => {
            counts.values().map(|k| f1_from(k.tp, k.fp, k.fn_)).sum::<f64>() / counts.len() as f64
        }
        F1Average::Weighted => {
            let n = gold.len() as f64;
            counts
                .values()
                .map(|k| f1_from(k.tp, k.fp, k.fn_) * (k.tp + k.fn_) as f64 / n)
                .sum()
        }
    })
}

/// Unweighted Cohen's kappa. When expected agreement is 1 (both raters use a
/// single, identical class) kappa is undefined; `valid` is then false and
/// `value` is 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Kappa {
    pub value: f64,
    pub valid: bool,
}

pub fn cohen_kappa(gold: &[i64], pred: &[i64]) -> Result<Kappa, EvalError> {
    check_lengths(gold.len(), pred.len())?;
    let n = gold.len();
    let mut gold_marg: BTreeMap<i64, usize> = BTreeMap::new();
    let mut pred_marg: BTreeMap<i64, usize> = BTreeMap::new();
    let mut agree = 0usize;
    for (&g, &p) in gold.iter().zip(pred) {
        *gold_marg.entry(g).or_default() += 1;
        *pred_marg.entry(p).or_default() += 1;
        agree += usize::from(g == p);
    }
    // Integer numerators keep p_e == 1 detection exact.
    let expected: usize = gold_marg
        .iter()
        .map(|(c, &g)| g * pred_marg.get(c).copied().unwrap_or(0))
        .sum();
    let nn = n * n;
    if expected == nn {
        return Ok(Kappa {
            value: 0.0,
            valid: false,
        });
    }
    let p_o = agree as f64 / n as f64;
    let p_e = expected as f64 / nn as f64;
    Ok(Kappa {
        value: (p_o - p_e) / (1.0 - p_e),
        valid: true,
    })
}

pub fn mse(gold: &[f64], pred: &[f64]) -> Result<f64, EvalError> {
    check_lengths(gold.len(), pred.len())?;
    Ok(gold
        .iter()
        .zip(pred)
        .map(|(g, p)| (g - p) * (g - p))
        .sum::<f64>()
        / gold.len() as f64)
}

/// Scores of one prediction set. Field names are part of the report format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub task: Task,
    pub f1_average: F1Average,
    pub f1: f64,
    /// Only reported for the quality task.
    pub cohen_kappa: Option<f64>,
    pub cohen_kappa_valid: Option<bool>,
    pub mse_rounded: f64,
    pub mse_raw: f64,
    pub n: usize,
    /// Count of rounded predictions per class.
    pub pred_class_counts: BTreeMap<i64, usize>,
    pub gold_class_counts: BTreeMap<i64, usize>,
}

/// Joins `predictions` to `gold` by id and scores the rounded and raw
/// predictions. Input order does not affect the result.
pub fn evaluate(
    gold: &[(String, i64)],
    predictions: &[(String, f64)],
    task: Task,
    averaging: F1Average,
) -> Result<EvalReport, EvalError> {
    if gold.is_empty() {
        return Err(EvalError::Empty);
    }
    let mut by_id: HashMap<&str, f64> = HashMap::with_capacity(predictions.len());
    for (id, v) in predictions {
        if by_id.insert(id.as_str(), *v).is_some() {
            return Err(EvalError::DuplicatePrediction(id.clone()));
        }
    }
    let gold_ids: BTreeSet<&str> = gold.iter().map(|(id, _)| id.as_str()).collect();
    if let Some((id, _)) = predictions.iter().find(|(id, _)| !gold_ids.contains(id.as_str())) {
        return Err(EvalError::UnknownId(id.clone()));
    }

    let mut pairs: Vec<(&str, i64, f64)> = Vec::with_capacity(gold.len());
    for (id, g) in gold {
        let raw = *by_id
            .get(id.as_str())
            .ok_or_else(|| EvalError::MissingPrediction(id.clone()))?;
        if !raw.is_finite() {
            return Err(EvalError::NonFinitePrediction {
                id: id.clone(),
                value: raw,
            });
        }
        pairs.push((id.as_str(), *g, raw));
    }
    pairs.sort_by(|a, b| a.0.cmp(b.0));

    let gold_i: Vec<i64> = pairs.iter().map(|p| p.1).collect();
    let raw: Vec<f64> = pairs.iter().map(|p| p.2).collect();
    let rounded = raw
        .iter()
        .map(|&r| round_clip(r, task))
        .collect::<Result<Vec<_>, _>>()?;
    let gold_f: Vec<f64> = gold_i.iter().map(|&g| g as f64).collect();
    let rounded_f: Vec<f64> = rounded.iter().map(|&r| r as f64).collect();

    let kappa = match task {
        Task::Quality => Some(cohen_kappa(&gold_i, &rounded)?),
        Task::Disagreement => None,
    };
    let histogram = |xs: &[i64]| {
        let mut m = BTreeMap::new();
        for &x in xs {
            *m.entry(x).or_insert(0) += 1;
        }
        m
    };
    Ok(EvalReport {
        task,
        f1_average: averaging,
        f1: f1_score(&gold_i, &rounded, averaging)?,
        cohen_kappa: kappa.map(|k| k.value),
        cohen_kappa_valid: kappa.map(|k| k.valid),
        mse_rounded: mse(&gold_f, &rounded_f)?,
        mse_raw: mse(&gold_f, &raw)?,
        n: pairs.len(),
        pred_class_counts: histogram(&rounded),
        gold_class_counts: histogram(&gold_i),
    })
}
