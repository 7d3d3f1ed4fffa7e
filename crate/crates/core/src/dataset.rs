//! Labeled triaxial accelerometer records and the canonical CSV format.
//!
//! A canonical file has the header `id,activity_label,binary_label,fs,ax,ay,az`
//! with one record per row. The three axis columns hold `;`-separated decimal
//! samples. An optional sidecar manifest `<file>.json` carries the dataset
//! `name`, `expected_length` and `units`.

use std::collections::BTreeSet;
use std::fmt;
use std::fs::File;
use std::io::{BufReader, Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("record `{id}` (line {line}): axis lengths differ (ax={ax}, ay={ay}, az={az})")]
    AxisLengthMismatch {
        id: String,
        line: u64,
        ax: usize,
        ay: usize,
        az: usize,
    },
    #[error("record `{id}` has {found} samples, dataset expects {expected}")]
    LengthMismatch {
        id: String,
        expected: usize,
        found: usize,
    },
    #[error("record `{id}` has fs={found} Hz, dataset expects {expected} Hz")]
    RateMismatch {
        id: String,
        expected: f64,
        found: f64,
    },
    #[error("unknown binary label `{label}` at line {line} (expected ADL or FALL)")]
    UnknownLabel { line: u64, label: String },
    #[error(
        "record `{id}`: activity `{activity}` is {implied} under AF-2 but the file says {declared}"
    )]
    LabelConflict {
        id: String,
        activity: String,
        implied: Label,
        declared: Label,
    },
    #[error("invalid record `{id}`: {reason}")]
    InvalidRecord { id: String, reason: String },
    #[error("dataset is empty")]
    Empty,
    #[error("dataset lacks {0} records; both classes are required")]
    MissingClass(Label),
    #[error("invalid split: {0}")]
    InvalidSplit(String),
    #[error("fold index {index} out of range for {folds} folds")]
    FoldOutOfRange { index: usize, folds: usize },
}

/// Binary event class. FALL is the positive class throughout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    #[serde(rename = "ADL")]
    Adl,
    #[serde(rename = "FALL")]
    Fall,
}

impl Label {
    pub const ALL: [Label; 2] = [Label::Adl, Label::Fall];

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Adl => "ADL",
            Label::Fall => "FALL",
        }
    }

    pub fn index(self) -> usize {
        match self {
            Label::Adl => 0,
            Label::Fall => 1,
        }
    }

    pub fn from_index(i: usize) -> Label {
        if i == 0 {
            Label::Adl
        } else {
            Label::Fall
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "ADL" => Ok(Label::Adl),
            "FALL" => Ok(Label::Fall),
            other => Err(other.to_string()),
        }
    }
}

/// Fine-grained fall activities that do not contain the word "fall".
const FALL_ACTIVITIES_WITHOUT_KEYWORD: &[&str] =
    &["syncope", "hitting obstacle", "hittingobstacle"];

/// AF-2 mapping: every fine-grained fall activity is FALL, everything else ADL.
///
/// Fall activities are recognised by the keyword "fall" (covering both the
/// "Soft front fall" and "Falling left"/"FallingForw" naming styles) plus the
/// fall classes named without it (syncope, hitting an obstacle).
pub fn af2_label(activity: &str) -> Label {
    let lower = activity.trim().to_ascii_lowercase();
    if lower.contains("fall") || FALL_ACTIVITIES_WITHOUT_KEYWORD.contains(&lower.as_str()) {
        Label::Fall
    } else {
        Label::Adl
    }
}

/// One labeled event.
#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub id: String,
    pub ax: Vec<f64>,
    pub ay: Vec<f64>,
    pub az: Vec<f64>,
    /// Sampling rate in Hz.
    pub fs: f64,
    pub activity_label: String,
    pub binary_label: Label,
}

impl Record {
    /// Builds a record, checking the per-record invariants.
    pub fn new(
        id: impl Into<String>,
        ax: Vec<f64>,
        ay: Vec<f64>,
        az: Vec<f64>,
        fs: f64,
        activity_label: impl Into<String>,
        binary_label: Label,
    ) -> Result<Self, DatasetError> {
        let record = Record {
            id: id.into(),
            ax,
            ay,
            az,
            fs,
            activity_label: activity_label.into(),
            binary_label,
        };
        record.validate(0)?;
        Ok(record)
    }

    pub fn len(&self) -> usize {
        self.ax.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ax.is_empty()
    }

    pub fn axes(&self) -> [&[f64]; 3] {
        [&self.ax, &self.ay, &self.az]
    }

    fn validate(&self, line: u64) -> Result<(), DatasetError> {
        let (x, y, z) = (self.ax.len(), self.ay.len(), self.az.len());
        if x != y || y != z {
            return Err(DatasetError::AxisLengthMismatch {
                id: self.id.clone(),
                line,
                ax: x,
                ay: y,
                az: z,
            });
        }
        if x < 2 {
            return Err(self.invalid(format!("needs at least 2 samples, has {x}")));
        }
        if !(self.fs.is_finite() && self.fs > 0.0) {
            return Err(self.invalid(format!("sampling rate must be positive, got {}", self.fs)));
        }
        if self.axes().iter().any(|a| a.iter().any(|v| !v.is_finite())) {
            return Err(self.invalid("non-finite sample".to_string()));
        }
        Ok(())
    }

    fn invalid(&self, reason: String) -> DatasetError {
        DatasetError::InvalidRecord {
            id: self.id.clone(),
            reason,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Manifest {
    pub name: Option<String>,
    pub expected_length: Option<usize>,
    pub units: Option<String>,
}

/// A collection of equal-length, equal-rate records.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    records: Vec<Record>,
    expected_length: usize,
}

impl Dataset {
    /// Builds a dataset; every record must share the first record's length and rate.
    pub fn new(name: impl Into<String>, records: Vec<Record>) -> Result<Self, DatasetError> {
        let first = records.first().ok_or(DatasetError::Empty)?;
        let (length, fs) = (first.len(), first.fs);
        for r in &records {
            r.validate(0)?;
            if r.len() != length {
                return Err(DatasetError::LengthMismatch {
                    id: r.id.clone(),
                    expected: length,
                    found: r.len(),
                });
            }
            if r.fs != fs {
                return Err(DatasetError::RateMismatch {
                    id: r.id.clone(),
                    expected: fs,
                    found: r.fs,
                });
            }
        }
        Ok(Dataset {
            name: name.into(),
            records,
            expected_length: length,
        })
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Samples per record (L).
    pub fn expected_length(&self) -> usize {
        self.expected_length
    }

    pub fn fs(&self) -> f64 {
        self.records[0].fs
    }

    pub fn labels(&self) -> Vec<Label> {
        self.records.iter().map(|r| r.binary_label).collect()
    }

    /// `[n_ADL, n_FALL]`.
    pub fn class_counts(&self) -> [usize; 2] {
        let mut counts = [0; 2];
        for r in &self.records {
            counts[r.binary_label.index()] += 1;
        }
        counts
    }

    pub fn require_both_classes(&self) -> Result<(), DatasetError> {
        let counts = self.class_counts();
        for label in Label::ALL {
            if counts[label.index()] == 0 {
                return Err(DatasetError::MissingClass(label));
            }
        }
        Ok(())
    }

    /// A new dataset holding the records at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            name: self.name.clone(),
            records: indices.iter().map(|&i| self.records[i].clone()).collect(),
            expected_length: self.expected_length,
        }
    }

    /// Draws `n` records keeping the class proportions (largest remainder
    /// rounding). Record order follows the original dataset.
    pub fn stratified_subset(&self, n: usize, seed: u64) -> Result<Dataset, DatasetError> {
        if n == 0 || n > self.len() {
            return Err(DatasetError::InvalidSplit(format!(
                "subset size {n} must be in 1..={}",
                self.len()
            )));
        }
        let counts = self.class_counts();
        let total = self.len();
        let exact: Vec<f64> = counts
            .iter()
            .map(|&c| c as f64 * n as f64 / total as f64)
            .collect();
        let mut take: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
        let mut short = n - take.iter().sum::<usize>();
        let mut order: Vec<usize> = (0..2).collect();
        order.sort_by(|&a, &b| {
            let fa = exact[a] - exact[a].floor();
            let fb = exact[b] - exact[b].floor();
            fb.total_cmp(&fa).then(a.cmp(&b))
        });
        for &c in order.iter().cycle() {
            if short == 0 {
                break;
            }
            if take[c] < counts[c] {
                take[c] += 1;
                short -= 1;
            }
        }
        let mut chosen = Vec::with_capacity(n);
        for label in Label::ALL {
            let mut members: Vec<usize> = (0..total)
                .filter(|&i| self.records[i].binary_label == label)
                .collect();
            let mut rng = rng::stream(seed, "stratified-subset", label.index() as u64);
            members.shuffle(&mut rng);
            chosen.extend_from_slice(&members[..take[label.index()]]);
        }
        chosen.sort_unstable();
        Ok(self.subset(&chosen))
    }

    /// Reads a canonical CSV file and its optional sidecar manifest.
    pub fn load_canonical(path: impl AsRef<Path>) -> Result<Dataset, DatasetError> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|source| DatasetError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let default_name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "dataset".to_string());
        let mut ds = Dataset::from_reader(BufReader::new(file), default_name)?;
        let manifest_path = sidecar_path(path);
        if manifest_path.exists() {
            let text =
                std::fs::read_to_string(&manifest_path).map_err(|source| DatasetError::Io {
                    path: manifest_path.clone(),
                    source,
                })?;
            let manifest: Manifest =
                serde_json::from_str(&text).map_err(|e| DatasetError::Parse {
                    line: e.line() as u64,
                    message: format!("manifest {}: {e}", manifest_path.display()),
                })?;
            if let Some(name) = manifest.name {
                ds.name = name;
            }
            if let Some(expected) = manifest.expected_length {
                if expected != ds.expected_length {
                    return Err(DatasetError::LengthMismatch {
                        id: ds.records[0].id.clone(),
                        expected,
                        found: ds.expected_length,
                    });
                }
            }
        }
        Ok(ds)
    }

    /// Parses canonical CSV from any reader.
    pub fn from_reader<R: Read>(
        reader: R,
        name: impl Into<String>,
    ) -> Result<Dataset, DatasetError> {
        let mut csv = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_reader(reader);
        let header = csv.headers().map_err(|e| csv_error(&e))?.clone();
        let expected_header = [
            "id",
            "activity_label",
            "binary_label",
            "fs",
            "ax",
            "ay",
            "az",
        ];
        if header
            .iter()
            .map(str::trim)
            .ne(expected_header.iter().copied())
        {
            return Err(DatasetError::Parse {
                line: 1,
                message: format!(
                    "expected header `{}`, found `{}`",
                    expected_header.join(","),
                    header.iter().collect::<Vec<_>>().join(",")
                ),
            });
        }

        let mut records = Vec::new();
        let mut expected_length: Option<(usize, f64)> = None;
        for row in csv.records() {
            let row = row.map_err(|e| csv_error(&e))?;
            let line = row.position().map(|p| p.line()).unwrap_or(0);
            if row.len() != 7 {
                return Err(DatasetError::Parse {
                    line,
                    message: format!("expected 7 fields, found {}", row.len()),
                });
            }
            let id = row[0].trim().to_string();
            let activity = row[1].trim().to_string();
            let declared: Label = row[2]
                .parse()
                .map_err(|label| DatasetError::UnknownLabel { line, label })?;
            let fs: f64 = row[3].trim().parse().map_err(|_| DatasetError::Parse {
                line,
                message: format!("bad sampling rate `{}`", &row[3]),
            })?;
            let ax = parse_samples(&row[4], line, "ax")?;
            let ay = parse_samples(&row[5], line, "ay")?;
            let az = parse_samples(&row[6], line, "az")?;

            let implied = af2_label(&activity);
            if implied != declared {
                return Err(DatasetError::LabelConflict {
                    id,
                    activity,
                    implied,
                    declared,
                });
            }
            let record = Record {
                id,
                ax,
                ay,
                az,
                fs,
                activity_label: activity,
                binary_label: implied,
            };
            record.validate(line)?;
            match expected_length {
                None => expected_length = Some((record.len(), record.fs)),
                Some((length, rate)) => {
                    if record.len() != length {
                        return Err(DatasetError::LengthMismatch {
                            found: record.len(),
                            id: record.id,
                            expected: length,
                        });
                    }
                    if record.fs != rate {
                        return Err(DatasetError::RateMismatch {
                            id: record.id,
                            expected: rate,
                            found: record.fs,
                        });
                    }
                }
            }
            records.push(record);
        }
        Dataset::new(name, records)
    }

    /// Writes canonical CSV. Samples use the shortest round-trip decimal form,
    /// so reloading yields bit-identical values.
    pub fn write_canonical<W: Write>(&self, writer: W) -> Result<(), DatasetError> {
        let mut csv = csv::Writer::from_writer(writer);
        let io_err = |e: csv::Error| DatasetError::Parse {
            line: 0,
            message: e.to_string(),
        };
        csv.write_record([
            "id",
            "activity_label",
            "binary_label",
            "fs",
            "ax",
            "ay",
            "az",
        ])
        .map_err(io_err)?;
        for r in &self.records {
            csv.write_record([
                r.id.clone(),
                r.activity_label.clone(),
                r.binary_label.to_string(),
                crate::fmt_f64(r.fs),
                join_samples(&r.ax),
                join_samples(&r.ay),
                join_samples(&r.az),
            ])
            .map_err(io_err)?;
        }
        csv.flush().map_err(|source| DatasetError::Io {
            path: PathBuf::from("<writer>"),
            source,
        })
    }

    pub fn save_canonical(&self, path: impl AsRef<Path>) -> Result<(), DatasetError> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|source| DatasetError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        self.write_canonical(std::io::BufWriter::new(file))
    }
}

/// `data.csv` -> `data.csv.json`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".json");
    PathBuf::from(name)
}

fn csv_error(e: &csv::Error) -> DatasetError {
    DatasetError::Parse {
        line: e.position().map(|p| p.line()).unwrap_or(0),
        message: e.to_string(),
    }
}

fn parse_samples(field: &str, line: u64, axis: &str) -> Result<Vec<f64>, DatasetError> {
    field
        .split(';')
        .map(|s| {
            s.trim().parse::<f64>().map_err(|_| DatasetError::Parse {
                line,
                message: format!("bad {axis} sample `{s}`"),
            })
        })
        .collect()
}

fn join_samples(values: &[f64]) -> String {
    let mut out = String::with_capacity(values.len() * 8);
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            out.push(';');
        }
        out.push_str(&crate::fmt_f64(*v));
    }
    out
}

/// Train/test split parameters for Monte-Carlo cross-validation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub folds: usize,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            train_fraction: 0.70,
            folds: 5,
            seed: 0,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<(), DatasetError> {
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(DatasetError::InvalidSplit(format!(
                "train fraction must be in (0, 1), got {}",
                self.train_fraction
            )));
        }
        if self.folds == 0 {
            return Err(DatasetError::InvalidSplit(
                "folds must be at least 1".into(),
            ));
        }
        Ok(())
    }

    /// Training-set size for `n` records, rounding halves up.
    pub fn train_size(&self, n: usize) -> usize {
        ((self.train_fraction * n as f64) + 0.5).floor() as usize
    }
}

/// Index-level split: a fresh seeded permutation per fold, the first
/// `train_size(n)` indices train, the rest test. Both halves are sorted.
pub fn split_indices(
    n: usize,
    spec: &SplitSpec,
    fold_index: usize,
) -> Result<(Vec<usize>, Vec<usize>), DatasetError> {
    spec.validate()?;
    if fold_index >= spec.folds {
        return Err(DatasetError::FoldOutOfRange {
            index: fold_index,
            folds: spec.folds,
        });
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = rng::stream(spec.seed, "split", fold_index as u64);
    order.shuffle(&mut rng);
    let cut = spec.train_size(n).min(n);
    let mut train = order[..cut].to_vec();
    let mut test = order[cut..].to_vec();
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

/// Splits a dataset for one Monte-Carlo fold.
pub fn shuffle_split(
    ds: &Dataset,
    spec: &SplitSpec,
    fold_index: usize,
) -> Result<(Dataset, Dataset), DatasetError> {
    let (train, test) = split_indices(ds.len(), spec, fold_index)?;
    Ok((ds.subset(&train), ds.subset(&test)))
}

/// Ids of every record in the dataset, for partition checks.
pub fn id_set(ds: &Dataset) -> BTreeSet<String> {
    ds.records().iter().map(|r| r.id.clone()).collect()
}
