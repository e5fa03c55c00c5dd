//! Data model, dataset ingestion and regression-target derivation.

use std::collections::HashSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{DataError, Result};
use crate::jsonl;

/// Token-level language label. `L1` is Hindi and `L2` English in the HinGE
/// data, but nothing in the library depends on which is which.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "&'static str")]
pub enum LidLabel {
    L1,
    L2,
    Other,
}

impl LidLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            LidLabel::L1 => "L1",
            LidLabel::L2 => "L2",
            LidLabel::Other => "OTHER",
        }
    }

    /// `true` for `L1` and `L2`.
    pub fn is_language(self) -> bool {
        !matches!(self, LidLabel::Other)
    }

    /// Swaps `L1` and `L2`; `OTHER` is unchanged.
    pub fn swapped(self) -> Self {
        match self {
            LidLabel::L1 => LidLabel::L2,
            LidLabel::L2 => LidLabel::L1,
            LidLabel::Other => LidLabel::Other,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnknownLabel {
    pub kind: &'static str,
    pub value: String,
}

impl fmt::Display for UnknownLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "unknown {} label `{}`", self.kind, self.value)
    }
}

impl std::error::Error for UnknownLabel {}

impl FromStr for LidLabel {
    type Err = UnknownLabel;

    /// Accepts the canonical `L1`/`L2`/`OTHER` plus the tag names emitted by
    /// common Hindi-English LID taggers (`hi`, `en`, and named-entity,
    /// universal and acronym tags, which fold into `OTHER`).
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "L1" | "hi" => Ok(LidLabel::L1),
            "L2" | "en" => Ok(LidLabel::L2),
            "OTHER" | "ne" | "NE" | "univ" | "UNIV" | "acro" | "ACRO" | "rest" => Ok(LidLabel::Other),
            _ => Err(UnknownLabel {
                kind: "LID",
                value: s.to_string(),
            }),
        }
    }
}

impl TryFrom<String> for LidLabel {
    type Error = UnknownLabel;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<LidLabel> for &'static str {
    fn from(l: LidLabel) -> Self {
        l.as_str()
    }
}

impl fmt::Display for LidLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

macro_rules! pos_labels {
    ($($variant:ident),* $(,)?) => {
        /// Universal POS tag set (17 tags).
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        #[serde(try_from = "String", into = "&'static str")]
        pub enum PosLabel {
            $($variant,)*
        }

        impl PosLabel {
            /// Canonical order; the metric feature layout follows it.
            pub const ALL: [PosLabel; 17] = [$(PosLabel::$variant,)*];

            pub fn as_str(self) -> &'static str {
                match self {
                    $(PosLabel::$variant => stringify!($variant),)*
                }
            }
        }

        impl FromStr for PosLabel {
            type Err = UnknownLabel;
            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s {
                    $(stringify!($variant) => Ok(PosLabel::$variant),)*
                    _ => Err(UnknownLabel { kind: "POS", value: s.to_string() }),
                }
            }
        }
    };
}

pos_labels!(
    ADJ, ADP, ADV, AUX, CCONJ, DET, INTJ, NOUN, NUM, PART, PRON, PROPN, PUNCT, SCONJ, SYM, VERB, X,
);

impl PosLabel {
    /// Position in [`PosLabel::ALL`].
    pub fn index(self) -> usize {
        self as usize
    }
}

impl TryFrom<String> for PosLabel {
    type Error = UnknownLabel;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<PosLabel> for &'static str {
    fn from(p: PosLabel) -> Self {
        p.as_str()
    }
}

impl fmt::Display for PosLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaggedToken {
    pub text: String,
    pub lid: LidLabel,
    #[serde(default)]
    pub pos: Option<PosLabel>,
}

impl TaggedToken {
    pub fn new(text: impl Into<String>, lid: LidLabel, pos: Option<PosLabel>) -> Self {
        Self {
            text: text.into(),
            lid,
            pos,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaggedSentence {
    pub id: String,
    pub tokens: Vec<TaggedToken>,
}

impl TaggedSentence {
    /// Builds a sentence from bare labels, with placeholder token text.
    /// Handy for tests and for callers that only have tag sequences.
    pub fn from_labels(id: impl Into<String>, labels: &[(LidLabel, Option<PosLabel>)]) -> Self {
        let tokens = labels
            .iter()
            .enumerate()
            .map(|(i, &(lid, pos))| TaggedToken::new(format!("t{i}"), lid, pos))
            .collect();
        Self {
            id: id.into(),
            tokens,
        }
    }

    fn validate(&self) -> Result<(), (&'static str, String)> {
        if self.tokens.is_empty() {
            return Err(("tokens", "empty token list".into()));
        }
        for (i, t) in self.tokens.iter().enumerate() {
            if t.text.is_empty() {
                return Err(("tokens", format!("token {i} has empty text")));
            }
            if t.text.chars().any(char::is_whitespace) {
                return Err(("tokens", format!("token {i} text contains whitespace")));
            }
        }
        Ok(())
    }
}

/// One annotated synthetic sentence with its monolingual sources and two
/// human quality ratings on a 1-10 scale.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DatasetRecord {
    pub id: String,
    pub english: String,
    pub hindi: String,
    pub human_hinglish: Vec<String>,
    pub synthetic_hinglish: String,
    pub generation_method: String,
    pub rating_a: u8,
    pub rating_b: u8,
}

#[derive(Deserialize)]
struct RawDatasetRecord {
    id: String,
    english: String,
    hindi: String,
    human_hinglish: Vec<String>,
    synthetic_hinglish: String,
    generation_method: String,
    rating_a: i64,
    rating_b: i64,
}

impl RawDatasetRecord {
    fn validate(self) -> Result<DatasetRecord, (&'static str, String)> {
        let rating = |field: &'static str, v: i64| {
            if (1..=10).contains(&v) {
                Ok(v as u8)
            } else {
                Err((field, format!("rating {v} outside [1, 10]")))
            }
        };
        if self.human_hinglish.is_empty() {
            return Err(("human_hinglish", "needs at least one sentence".into()));
        }
        Ok(DatasetRecord {
            rating_a: rating("rating_a", self.rating_a)?,
            rating_b: rating("rating_b", self.rating_b)?,
            id: self.id,
            english: self.english,
            hindi: self.hindi,
            human_hinglish: self.human_hinglish,
            synthetic_hinglish: self.synthetic_hinglish,
            generation_method: self.generation_method,
        })
    }
}

/// Which sub-task a model predicts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    /// Rounded average of the two ratings, in [1, 10].
    Quality,
    /// Absolute difference of the two ratings, in [0, 9].
    Disagreement,
}

impl Task {
    /// Closed integer range of the task's target.
    pub fn range(self) -> (i64, i64) {
        match self {
            Task::Quality => (1, 10),
            Task::Disagreement => (0, 9),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Task::Quality => "quality",
            Task::Disagreement => "disagreement",
        }
    }
}

impl FromStr for Task {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "quality" => Ok(Task::Quality),
            "disagreement" => Ok(Task::Disagreement),
            _ => Err(format!("unknown task `{s}` (expected quality or disagreement)")),
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskTarget {
    pub id: String,
    pub quality: u8,
    pub disagreement: u8,
}

impl TaskTarget {
    pub fn get(&self, task: Task) -> u8 {
        match task {
            Task::Quality => self.quality,
            Task::Disagreement => self.disagreement,
        }
    }
}

/// Quality is the half-up rounded mean of the two ratings (7.5 becomes 8);
/// disagreement is their absolute difference.
pub fn derive_targets(record: &DatasetRecord) -> TaskTarget {
    let (a, b) = (record.rating_a, record.rating_b);
    TaskTarget {
        id: record.id.clone(),
        quality: (a + b).div_ceil(2),
        disagreement: a.abs_diff(b),
    }
}

fn check_unique(
    seen: &mut HashSet<String>,
    path: &Path,
    line: usize,
    id: &str,
) -> Result<(), DataError> {
    if !seen.insert(id.to_string()) {
        return Err(DataError::DuplicateId {
            path: path.to_path_buf(),
            line,
            id: id.to_string(),
        });
    }
    Ok(())
}

fn invalid(path: &Path, line: usize, (field, message): (&'static str, String)) -> DataError {
    DataError::InvalidField {
        path: path.to_path_buf(),
        line,
        field: field.to_string(),
        message,
    }
}

/// Reads a dataset file, one JSON record per line. Blank lines are skipped.
pub fn parse_dataset(path: impl AsRef<Path>) -> Result<Vec<DatasetRecord>> {
    let path = path.as_ref();
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (line, text) in jsonl::read_lines(path)? {
        let raw: RawDatasetRecord = jsonl::parse_line(path, line, &text)?;
        let rec = raw.validate().map_err(|e| invalid(path, line, e))?;
        check_unique(&mut seen, path, line, &rec.id)?;
        out.push(rec);
    }
    Ok(out)
}

/// Reads a tagged-sentence file, one JSON sentence per line.
pub fn parse_tagged(path: impl AsRef<Path>) -> Result<Vec<TaggedSentence>> {
    let path = path.as_ref();
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (line, text) in jsonl::read_lines(path)? {
        let sent: TaggedSentence = jsonl::parse_line(path, line, &text)?;
        sent.validate().map_err(|e| invalid(path, line, e))?;
        check_unique(&mut seen, path, line, &sent.id)?;
        out.push(sent);
    }
    Ok(out)
}

pub fn write_dataset<W: std::io::Write>(records: &[DatasetRecord], w: W) -> std::io::Result<()> {
    jsonl::write_records(records, w)
}

pub fn write_tagged<W: std::io::Write>(sentences: &[TaggedSentence], w: W) -> std::io::Result<()> {
    jsonl::write_records(sentences, w)
}
