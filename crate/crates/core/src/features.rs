//! Joins code-mixing metrics with precomputed language-model features into
//! the fixed-layout regression input.
//!
//! Layout of an assembled vector, for embedding dimension `E`:
//!
//! | segment               | offset     | length |
//! |-----------------------|------------|--------|
//! | `metrics` (scaled)    | 0          | 21     |
//! | `pll_delta`           | 21         | 1      |
//! | `embedding_english`   | 22         | E      |
//! | `embedding_hindi`     | 22 + E     | E      |
//! | `embedding_synthetic` | 22 + 2E    | E      |
//!
//! Only the metric segment is standardized; the PLL delta and embeddings pass
//! through unchanged.

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::{DataError, Result};
use crate::jsonl;
use crate::metrics::{MetricVector, METRIC_FEATURES};

/// Features-file format version understood by this crate.
pub const FEATURES_VERSION: u32 = 1;
pub const DEFAULT_EMBEDDING_DIM: usize = 768;

#[derive(Debug, Error, PartialEq)]
pub enum FeatureError {
    #[error("cannot fit a scaler on zero metric vectors")]
    EmptyInput,
    #[error("record `{0}` has no human PLL scores")]
    EmptyHumanPll(String),
    #[error("id mismatch: metrics for `{metrics}` joined with features for `{features}`")]
    IdMismatch { metrics: String, features: String },
    #[error("record `{id}`: {segment} has dimension {found}, expected {expected}")]
    DimensionMismatch {
        id: String,
        segment: String,
        expected: usize,
        found: usize,
    },
    #[error("scaler has {found} features, expected {expected}", expected = METRIC_FEATURES)]
    ScalerShape { found: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeaturesHeader {
    pub version: u32,
    pub embedding_dim: usize,
}

/// Precomputed sentence embeddings and pseudo-log-likelihoods for one instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRecord {
    pub id: String,
    pub embedding_english: Vec<f64>,
    pub embedding_hindi: Vec<f64>,
    pub embedding_synthetic: Vec<f64>,
    pub pll_synthetic: f64,
    pub pll_human: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureFile {
    pub header: FeaturesHeader,
    pub records: Vec<FeatureRecord>,
}

impl FeatureRecord {
    fn check(&self, dim: usize) -> Result<(), (&'static str, String)> {
        for (name, v) in [
            ("embedding_english", &self.embedding_english),
            ("embedding_hindi", &self.embedding_hindi),
            ("embedding_synthetic", &self.embedding_synthetic),
        ] {
            if v.len() != dim {
                return Err((name, format!("length {} != embedding_dim {dim}", v.len())));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err((name, "non-finite value".into()));
            }
        }
        if !self.pll_synthetic.is_finite() {
            return Err(("pll_synthetic", "non-finite value".into()));
        }
        if self.pll_human.is_empty() {
            return Err(("pll_human", "needs at least one score".into()));
        }
        if self.pll_human.iter().any(|x| !x.is_finite()) {
            return Err(("pll_human", "non-finite value".into()));
        }
        Ok(())
    }
}

/// Reads a features file: a `{version, embedding_dim}` header line followed
/// by one record per line. Unknown extra fields are ignored.
pub fn parse_features(path: impl AsRef<Path>) -> Result<FeatureFile> {
    let path = path.as_ref();
    let mut lines = jsonl::read_lines(path)?.into_iter();
    let Some((hline, htext)) = lines.next() else {
        return Err(DataError::Malformed {
            path: path.to_path_buf(),
            line: 1,
            message: "missing header line".into(),
        }
        .into());
    };
    let header: FeaturesHeader = jsonl::parse_line(path, hline, &htext)?;
    let field_err = |line: usize, field: &str, message: String| DataError::InvalidField {
        path: path.to_path_buf(),
        line,
        field: field.to_string(),
        message,
    };
    if header.version != FEATURES_VERSION {
        return Err(field_err(hline, "version", format!("unsupported version {}", header.version)).into());
    }
    if header.embedding_dim == 0 {
        return Err(field_err(hline, "embedding_dim", "must be positive".into()).into());
    }
    let mut seen = HashSet::new();
    let mut records = Vec::new();
    for (line, text) in lines {
        let rec: FeatureRecord = jsonl::parse_line(path, line, &text)?;
        rec.check(header.embedding_dim)
            .map_err(|(f, m)| field_err(line, f, m))?;
        if !seen.insert(rec.id.clone()) {
            return Err(DataError::DuplicateId {
                path: path.to_path_buf(),
                line,
                id: rec.id,
            }
            .into());
        }
        records.push(rec);
    }
    Ok(FeatureFile { header, records })
}

pub fn write_features<W: std::io::Write>(file: &FeatureFile, mut w: W) -> std::io::Result<()> {
    serde_json::to_writer(&mut w, &file.header)?;
    w.write_all(b"\n")?;
    jsonl::write_records(&file.records, w)
}

/// Synthetic PLL minus the mean of the human PLLs.
pub fn pll_delta(record: &FeatureRecord) -> Result<f64, FeatureError> {
    if record.pll_human.is_empty() {
        return Err(FeatureError::EmptyHumanPll(record.id.clone()));
    }
    let mean = record.pll_human.iter().sum::<f64>() / record.pll_human.len() as f64;
    Ok(record.pll_synthetic - mean)
}

/// Standard-score parameters for the metric features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalerParams {
    pub mean: Vec<f64>,
    pub stddev: Vec<f64>,
}

/// Fits per-feature mean and population standard deviation. Constant
/// features get stddev 1 so they scale to exactly 0.
pub fn fit_scaler(vectors: &[MetricVector]) -> Result<ScalerParams, FeatureError> {
    let first = vectors.first().ok_or(FeatureError::EmptyInput)?.features();
    let rows: Vec<_> = vectors.iter().map(MetricVector::features).collect();
    let n = rows.len() as f64;
    let mut mean = vec![0.0; METRIC_FEATURES];
    let mut stddev = vec![1.0; METRIC_FEATURES];
    for j in 0..METRIC_FEATURES {
        if rows.iter().all(|r| r[j] == first[j]) {
            mean[j] = first[j];
            continue;
        }
        let m = rows.iter().map(|r| r[j]).sum::<f64>() / n;
        let var = rows.iter().map(|r| (r[j] - m) * (r[j] - m)).sum::<f64>() / n;
        mean[j] = m;
        let sd = var.sqrt();
        if sd > 0.0 {
            stddev[j] = sd;
        }
    }
    Ok(ScalerParams { mean, stddev })
}

pub fn apply_scaler(params: &ScalerParams, mv: &MetricVector) -> [f64; METRIC_FEATURES] {
    let mut x = mv.features();
    for ((v, m), s) in x.iter_mut().zip(&params.mean).zip(&params.stddev) {
        *v = (*v - m) / s;
    }
    x
}

impl ScalerParams {
    pub fn validate(&self) -> Result<(), FeatureError> {
        for len in [self.mean.len(), self.stddev.len()] {
            if len != METRIC_FEATURES {
                return Err(FeatureError::ScalerShape { found: len });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub name: String,
    pub offset: usize,
    pub len: usize,
}

/// Named segment table of an assembled feature vector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureLayout {
    pub embedding_dim: usize,
    pub segments: Vec<Segment>,
}

impl FeatureLayout {
    pub fn new(embedding_dim: usize) -> Self {
        let sizes = [
            ("metrics", METRIC_FEATURES),
            ("pll_delta", 1),
            ("embedding_english", embedding_dim),
            ("embedding_hindi", embedding_dim),
            ("embedding_synthetic", embedding_dim),
        ];
        let mut offset = 0;
        let segments = sizes
            .iter()
            .map(|&(name, len)| {
                let s = Segment {
                    name: name.to_string(),
                    offset,
                    len,
                };
                offset += len;
                s
            })
            .collect();
        Self {
            embedding_dim,
            segments,
        }
    }

    /// Total vector dimension, `22 + 3E`.
    pub fn dim(&self) -> usize {
        self.segments.last().map_or(0, |s| s.offset + s.len)
    }

    pub fn segment(&self, name: &str) -> Option<&Segment> {
        self.segments.iter().find(|s| s.name == name)
    }

    /// Slice of `values` covered by the named segment.
    pub fn slice<'a>(&self, values: &'a [f64], name: &str) -> Option<&'a [f64]> {
        let s = self.segment(name)?;
        values.get(s.offset..s.offset + s.len)
    }

    pub fn check(&self, fv: &FeatureVector) -> Result<(), FeatureError> {
        if fv.values.len() != self.dim() {
            return Err(FeatureError::DimensionMismatch {
                id: fv.id.clone(),
                segment: "feature vector".into(),
                expected: self.dim(),
                found: fv.values.len(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub id: String,
    pub values: Vec<f64>,
}

/// Concatenates scaled metrics, PLL delta and the three embeddings, in the
/// order of [`FeatureLayout`].
pub fn assemble_features(
    mv: &MetricVector,
    fr: &FeatureRecord,
    params: &ScalerParams,
) -> Result<FeatureVector, FeatureError> {
    if mv.id != fr.id {
        return Err(FeatureError::IdMismatch {
            metrics: mv.id.clone(),
            features: fr.id.clone(),
        });
    }
    params.validate()?;
    let e = fr.embedding_english.len();
    for (segment, v) in [
        ("embedding_hindi", &fr.embedding_hindi),
        ("embedding_synthetic", &fr.embedding_synthetic),
    ] {
        if v.len() != e {
            return Err(FeatureError::DimensionMismatch {
                id: fr.id.clone(),
                segment: segment.into(),
                expected: e,
                found: v.len(),
            });
        }
    }
    let mut values = Vec::with_capacity(METRIC_FEATURES + 1 + 3 * e);
    values.extend_from_slice(&apply_scaler(params, mv));
    values.push(pll_delta(fr)?);
    values.extend_from_slice(&fr.embedding_english);
    values.extend_from_slice(&fr.embedding_hindi);
    values.extend_from_slice(&fr.embedding_synthetic);
    Ok(FeatureVector {
        id: fr.id.clone(),
        values,
    })
}
