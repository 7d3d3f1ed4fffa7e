//! Versioned binary model files.
//!
//! Every file starts with 4 magic bytes and a little-endian `u16` version.
//! Standalone models (`FKMD`) then carry a kind byte and the payload; a
//! bundle (`FKMB`) carries the feature configuration, record length and
//! sampling rate ahead of a voting-model payload. Floats are stored as raw
//! IEEE-754 bits, so decoding reproduces a model exactly.

use std::path::Path;
use std::sync::Arc;

use sha2::{Digest, Sha256};

use super::{BdtModel, ClassifierError, EnnModel, KnnModel, Node, TrainingSet, VotingModel};
use crate::dataset::Label;
use crate::features::{FeatureConfig, WaveletFamily, WaveletSpec};
use crate::matrix::Matrix;

const MODEL_MAGIC: &[u8; 4] = b"FKMD";
const BUNDLE_MAGIC: &[u8; 4] = b"FKMB";
const VERSION: u16 = 1;

#[derive(Debug, Clone, PartialEq)]
pub enum TrainedModel {
    Knn(KnnModel),
    Enn(EnnModel),
    Bdt(BdtModel),
    Voting(VotingModel),
}

impl TrainedModel {
    fn kind(&self) -> u8 {
        match self {
            TrainedModel::Knn(_) => 1,
            TrainedModel::Enn(_) => 2,
            TrainedModel::Bdt(_) => 3,
            TrainedModel::Voting(_) => 4,
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::default();
        w.bytes(MODEL_MAGIC);
        w.u16(VERSION);
        w.u8(self.kind());
        match self {
            TrainedModel::Knn(m) => {
                w.training_set(&m.train);
                w.u64(m.k as u64);
            }
            TrainedModel::Enn(m) => {
                w.training_set(&m.train);
                w.enn_tables(m);
            }
            TrainedModel::Bdt(m) => w.bdt(m),
            TrainedModel::Voting(m) => w.voting(m),
        }
        w.buf
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<TrainedModel, ClassifierError> {
        let mut r = Reader::new(bytes);
        r.header(MODEL_MAGIC)?;
        let model = match r.u8()? {
            1 => {
                let train = Arc::new(r.training_set()?);
                let k = r.usize()?;
                TrainedModel::Knn(KnnModel::fit(train, k)?)
            }
            2 => {
                let train = Arc::new(r.training_set()?);
                TrainedModel::Enn(r.enn_tables(train)?)
            }
            3 => TrainedModel::Bdt(r.bdt()?),
            4 => TrainedModel::Voting(r.voting()?),
            other => return Err(format_err(format!("unknown model kind {other}"))),
        };
        r.finish()?;
        Ok(model)
    }
}

/// Everything the gateway needs: features, window length and the voting model.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelBundle {
    pub features: FeatureConfig,
    pub record_len: usize,
    pub fs: f64,
    pub model: VotingModel,
}

impl ModelBundle {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::default();
        w.bytes(BUNDLE_MAGIC);
        w.u16(VERSION);
        let mut cfg = Vec::new();
        self.features.encode(&mut cfg);
        w.bytes(&cfg);
        w.u64(self.record_len as u64);
        w.f64(self.fs);
        w.voting(&self.model);
        w.buf
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<ModelBundle, ClassifierError> {
        let mut r = Reader::new(bytes);
        r.header(BUNDLE_MAGIC)?;
        let mask = r.u8()?;
        let family = WaveletFamily::from_code(r.u8()?)
            .ok_or_else(|| format_err("unknown wavelet family".into()))?;
        let scale = r.f64()?;
        let tabulation_resolution = r.u32()?;
        let features = FeatureConfig::decode(
            mask,
            WaveletSpec {
                family,
                scale,
                tabulation_resolution,
            },
        )
        .map_err(|e| format_err(e.to_string()))?;
        let record_len = r.usize()?;
        let fs = r.f64()?;
        let model = r.voting()?;
        r.finish()?;
        if features.vector_len(record_len) != model.dim() {
            return Err(format_err(format!(
                "feature length {} does not match model dimension {}",
                features.vector_len(record_len),
                model.dim()
            )));
        }
        Ok(ModelBundle {
            features,
            record_len,
            fs,
            model,
        })
    }

    /// First 16 hex digits of the SHA-256 of the encoded bundle.
    pub fn model_id(&self) -> String {
        hex::encode(&Sha256::digest(self.to_bytes())[..8])
    }

    pub fn save(&self, path: impl AsRef<Path>) -> std::io::Result<()> {
        std::fs::write(path, self.to_bytes())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<ModelBundle, ClassifierError> {
        let bytes = std::fs::read(path.as_ref())
            .map_err(|e| format_err(format!("{}: {e}", path.as_ref().display())))?;
        ModelBundle::from_bytes(&bytes)
    }
}

fn format_err(msg: String) -> ClassifierError {
    ClassifierError::Format(msg)
}

#[derive(Default)]
struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    fn bytes(&mut self, b: &[u8]) {
        self.buf.extend_from_slice(b);
    }
    fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }
    fn u16(&mut self, v: u16) {
        self.bytes(&v.to_le_bytes());
    }
    fn u32(&mut self, v: u32) {
        self.bytes(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.bytes(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.bytes(&v.to_le_bytes());
    }

    fn training_set(&mut self, t: &TrainingSet) {
        self.u64(t.len() as u64);
        self.u64(t.dim() as u64);
        for l in t.labels() {
            self.u8(l.index() as u8);
        }
        for v in t.matrix().as_slice() {
            self.f64(*v);
        }
    }

    fn enn_tables(&mut self, m: &EnnModel) {
        self.u64(m.e as u64);
        for list in &m.neighbor_lists {
            for &j in list {
                self.u32(j);
            }
        }
        for &r in &m.radius {
            self.f64(r);
        }
        for &c in &m.same_class {
            self.u32(c);
        }
    }

    fn bdt(&mut self, m: &BdtModel) {
        self.u64(m.dim as u64);
        self.u64(m.nodes.len() as u64);
        for node in &m.nodes {
            match node {
                Node::Leaf { label, counts } => {
                    self.u8(0);
                    self.u8(label.index() as u8);
                    self.u32(counts[0]);
                    self.u32(counts[1]);
                }
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    self.u8(1);
                    self.u32(*feature);
                    self.f64(*threshold);
                    self.u32(*left);
                    self.u32(*right);
                }
            }
        }
    }

    fn voting(&mut self, m: &VotingModel) {
        self.training_set(&m.knn.train);
        self.u64(m.knn.k as u64);
        self.enn_tables(&m.enn);
        self.bdt(&m.bdt);
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(buf: &'a [u8]) -> Self {
        Reader { buf, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], ClassifierError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| format_err("truncated".into()))?;
        let out = &self.buf[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn header(&mut self, magic: &[u8; 4]) -> Result<(), ClassifierError> {
        if self.take(4)? != magic {
            return Err(format_err(format!(
                "bad magic, expected {}",
                String::from_utf8_lossy(magic)
            )));
        }
        let version = self.u16()?;
        if version != VERSION {
            return Err(format_err(format!("unsupported version {version}")));
        }
        Ok(())
    }

    fn finish(&self) -> Result<(), ClassifierError> {
        if self.pos != self.buf.len() {
            return Err(format_err(format!(
                "{} trailing bytes",
                self.buf.len() - self.pos
            )));
        }
        Ok(())
    }

    fn u8(&mut self) -> Result<u8, ClassifierError> {
        Ok(self.take(1)?[0])
    }
    fn u16(&mut self) -> Result<u16, ClassifierError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }
    fn u32(&mut self) -> Result<u32, ClassifierError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64, ClassifierError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn usize(&mut self) -> Result<usize, ClassifierError> {
        usize::try_from(self.u64()?).map_err(|_| format_err("size overflow".into()))
    }
    fn f64(&mut self) -> Result<f64, ClassifierError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn label(&mut self) -> Result<Label, ClassifierError> {
        match self.u8()? {
            0 => Ok(Label::Adl),
            1 => Ok(Label::Fall),
            other => Err(format_err(format!("bad label byte {other}"))),
        }
    }

    fn training_set(&mut self) -> Result<TrainingSet, ClassifierError> {
        let rows = self.usize()?;
        let cols = self.usize()?;
        let cells = rows
            .checked_mul(cols)
            .filter(|&c| c.saturating_mul(8) <= self.buf.len())
            .ok_or_else(|| format_err("training matrix larger than file".into()))?;
        let labels = (0..rows)
            .map(|_| self.label())
            .collect::<Result<Vec<_>, _>>()?;
        let data = (0..cells)
            .map(|_| self.f64())
            .collect::<Result<Vec<_>, _>>()?;
        TrainingSet::new(Matrix::new(rows, cols, data), labels)
    }

    fn enn_tables(&mut self, train: Arc<TrainingSet>) -> Result<EnnModel, ClassifierError> {
        let n = train.len();
        let e = self.usize()?;
        if e == 0 || e >= n {
            return Err(format_err(format!("bad e={e} for {n} records")));
        }
        let mut neighbor_lists = Vec::with_capacity(n);
        for _ in 0..n {
            let list = (0..e)
                .map(|_| {
                    let j = self.u32()?;
                    if (j as usize) < n {
                        Ok(j)
                    } else {
                        Err(format_err(format!("neighbor index {j} out of range")))
                    }
                })
                .collect::<Result<Vec<_>, _>>()?;
            neighbor_lists.push(list);
        }
        let radius = (0..n).map(|_| self.f64()).collect::<Result<Vec<_>, _>>()?;
        let same_class = (0..n).map(|_| self.u32()).collect::<Result<Vec<_>, _>>()?;
        let class_counts = train.class_counts();
        Ok(EnnModel {
            train,
            e,
            neighbor_lists,
            radius,
            same_class,
            class_counts,
        })
    }

    fn bdt(&mut self) -> Result<BdtModel, ClassifierError> {
        let dim = self.usize()?;
        let count = self.usize()?;
        if count == 0 || count > self.buf.len() {
            return Err(format_err(format!("bad node count {count}")));
        }
        let mut nodes = Vec::with_capacity(count);
        for _ in 0..count {
            let node = match self.u8()? {
                0 => Node::Leaf {
                    label: self.label()?,
                    counts: [self.u32()?, self.u32()?],
                },
                1 => {
                    let feature = self.u32()?;
                    let threshold = self.f64()?;
                    let (left, right) = (self.u32()?, self.u32()?);
                    if feature as usize >= dim || left as usize >= count || right as usize >= count
                    {
                        return Err(format_err("split node out of range".into()));
                    }
                    Node::Split {
                        feature,
                        threshold,
                        left,
                        right,
                    }
                }
                other => return Err(format_err(format!("bad node tag {other}"))),
            };
            nodes.push(node);
        }
        Ok(BdtModel { nodes, dim })
    }

    fn voting(&mut self) -> Result<VotingModel, ClassifierError> {
        let train = Arc::new(self.training_set()?);
        let k = self.usize()?;
        let knn = KnnModel::fit(train.clone(), k)?;
        let enn = self.enn_tables(train)?;
        let bdt = self.bdt()?;
        if bdt.dim != knn.train.dim() {
            return Err(format_err("tree and training set dimensions differ".into()));
        }
        Ok(VotingModel { knn, enn, bdt })
    }
}
