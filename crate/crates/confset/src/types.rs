//! Domain types shared by every module: label spaces, datasets, score
//! containers, confidence sets, and evaluation reports.
//!
//! All types are immutable value types once constructed and safe to share
//! read-only across parallel workers. Labels are 1-based (`1..=K`) at every
//! API boundary; bit positions inside [`ConfidenceSet`] are the only 0-based
//! representation and never escape.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// The label alphabet `{1, ..., K}` with `K >= 2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelSpace {
    k_classes: u32,
}

impl LabelSpace {
    pub fn new(k_classes: u32) -> Result<Self> {
        if k_classes < 2 {
            return Err(Error::param("k_classes", format!("need K >= 2, got {k_classes}")));
        }
        Ok(LabelSpace { k_classes })
    }

    pub fn k(&self) -> u32 {
        self.k_classes
    }

    pub fn contains(&self, label: u32) -> bool {
        (1..=self.k_classes).contains(&label)
    }
}

/// Dense row-major matrix of `f64`, the backing store for features and scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    data: Vec<f64>,
    rows: usize,
    cols: usize,
}

impl Matrix {
    pub fn from_rows(data: Vec<f64>, rows: usize, cols: usize) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::param(
                "matrix",
                format!("{} values cannot fill {rows}x{cols}", data.len()),
            ));
        }
        Ok(Matrix { data, rows, cols })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            data: vec![0.0; rows * cols],
            rows,
            cols,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn values(&self) -> &[f64] {
        &self.data
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.cols.max(1))
    }

    /// Reject NaN and infinity anywhere in the matrix.
    pub fn check_finite(&self) -> Result<()> {
        for (idx, v) in self.data.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFiniteFeature {
                    row: idx / self.cols.max(1),
                    col: idx % self.cols.max(1),
                });
            }
        }
        Ok(())
    }
}

/// Labeled sample `{(X_i, Y_i)}`: an `n x d` feature matrix plus labels in `1..=K`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledDataset {
    pub features: Matrix,
    pub labels: Vec<u32>,
    label_space: LabelSpace,
}

impl LabeledDataset {
    pub fn new(features: Matrix, labels: Vec<u32>, label_space: LabelSpace) -> Result<Self> {
        if features.rows() == 0 || features.cols() == 0 {
            return Err(Error::EmptyDataset);
        }
        if features.rows() != labels.len() {
            return Err(Error::param(
                "labels",
                format!("{} labels for {} rows", labels.len(), features.rows()),
            ));
        }
        features.check_finite()?;
        for &y in &labels {
            if !label_space.contains(y) {
                return Err(Error::LabelOutOfRange(y, label_space.k()));
            }
        }
        Ok(LabeledDataset {
            features,
            labels,
            label_space,
        })
    }

    pub fn n(&self) -> usize {
        self.features.rows()
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    pub fn label_space(&self) -> LabelSpace {
        self.label_space
    }

    /// Split by row order into `(first floor(n/2) rows, remaining ceil(n/2) rows)`.
    pub fn split_half(&self) -> (LabeledDataset, UnlabeledDataset) {
        let n = self.n();
        let head = n / 2;
        let d = self.dim();
        let head_features =
            Matrix::from_rows(self.features.values()[..head * d].to_vec(), head, d)
                .expect("sizes agree");
        let tail_features =
            Matrix::from_rows(self.features.values()[head * d..].to_vec(), n - head, d)
                .expect("sizes agree");
        let head_set = LabeledDataset {
            features: head_features,
            labels: self.labels[..head].to_vec(),
            label_space: self.label_space,
        };
        (head_set, UnlabeledDataset::new(tail_features))
    }
}

/// Unlabeled sample `{X_i}`; the empty sample is legal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnlabeledDataset {
    pub features: Matrix,
}

impl UnlabeledDataset {
    pub fn new(features: Matrix) -> Self {
        UnlabeledDataset { features }
    }

    pub fn empty(dim: usize) -> Self {
        UnlabeledDataset {
            features: Matrix::zeros(0, dim),
        }
    }

    pub fn n(&self) -> usize {
        self.features.rows()
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }
}

/// Per-point class scores: an `M x K` matrix, entry `(i, k)` the score of
/// class `k + 1` at point `i`. Entries are expected in `[0, 1]` after
/// clipping; raw estimator output may transiently violate the range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreMatrix {
    matrix: Matrix,
}

impl ScoreMatrix {
    pub fn new(matrix: Matrix) -> Result<Self> {
        matrix.check_finite()?;
        Ok(ScoreMatrix { matrix })
    }

    pub fn m_points(&self) -> usize {
        self.matrix.rows()
    }

    pub fn k_classes(&self) -> usize {
        self.matrix.cols()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        self.matrix.row(i)
    }

    pub fn values(&self) -> &[f64] {
        self.matrix.values()
    }

    /// Clamp every entry into `[0, 1]`.
    pub fn clip(mut self) -> Self {
        for v in &mut self.matrix.data {
            *v = v.clamp(0.0, 1.0);
        }
        self
    }

    pub(crate) fn data_mut(&mut self) -> &mut [f64] {
        &mut self.matrix.data
    }

    /// Stack the rows of `self` on top of the rows of `other`.
    pub fn vstack(&self, other: &ScoreMatrix) -> Result<ScoreMatrix> {
        if self.k_classes() != other.k_classes() {
            return Err(Error::LabelSpaceMismatch(
                self.k_classes() as u32,
                other.k_classes() as u32,
            ));
        }
        let mut data = Vec::with_capacity(self.values().len() + other.values().len());
        data.extend_from_slice(self.values());
        data.extend_from_slice(other.values());
        let rows = self.m_points() + other.m_points();
        Ok(ScoreMatrix {
            matrix: Matrix::from_rows(data, rows, self.k_classes())?,
        })
    }
}

/// A subset of `{1, ..., K}`, bitmask-backed. `K <= 128` uses a fixed-width
/// word; larger alphabets fall back to a growable block vector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "ConfidenceSetRepr", try_from = "ConfidenceSetRepr")]
pub struct ConfidenceSet {
    k: u32,
    mask: Mask,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Mask {
    Fixed(u128),
    Wide(Vec<u64>),
}

impl ConfidenceSet {
    pub fn empty(space: LabelSpace) -> Self {
        let k = space.k();
        let mask = if k <= 128 {
            Mask::Fixed(0)
        } else {
            Mask::Wide(vec![0; (k as usize + 63) / 64])
        };
        ConfidenceSet { k, mask }
    }

    pub fn full(space: LabelSpace) -> Self {
        let mut set = ConfidenceSet::empty(space);
        for label in 1..=space.k() {
            set.insert(label).expect("label in range");
        }
        set
    }

    pub fn from_members(space: LabelSpace, members: &[u32]) -> Result<Self> {
        let mut set = ConfidenceSet::empty(space);
        for &label in members {
            set.insert(label)?;
        }
        Ok(set)
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn insert(&mut self, label: u32) -> Result<()> {
        if label < 1 || label > self.k {
            return Err(Error::LabelOutOfRange(label, self.k));
        }
        let bit = (label - 1) as usize;
        match &mut self.mask {
            Mask::Fixed(word) => *word |= 1u128 << bit,
            Mask::Wide(blocks) => blocks[bit / 64] |= 1u64 << (bit % 64),
        }
        Ok(())
    }

    pub fn contains(&self, label: u32) -> bool {
        if label < 1 || label > self.k {
            return false;
        }
        let bit = (label - 1) as usize;
        match &self.mask {
            Mask::Fixed(word) => word >> bit & 1 == 1,
            Mask::Wide(blocks) => blocks[bit / 64] >> (bit % 64) & 1 == 1,
        }
    }

    /// `|members|` via population count.
    pub fn cardinality(&self) -> u32 {
        match &self.mask {
            Mask::Fixed(word) => word.count_ones(),
            Mask::Wide(blocks) => blocks.iter().map(|b| b.count_ones()).sum(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.cardinality() == 0
    }

    /// `|self xor other|`; errors when the label spaces differ.
    pub fn symmetric_difference_size(&self, other: &ConfidenceSet) -> Result<u32> {
        match (&self.mask, &other.mask) {
            _ if self.k != other.k => Err(Error::LabelSpaceMismatch(self.k, other.k)),
            (Mask::Fixed(a), Mask::Fixed(b)) => Ok((a ^ b).count_ones()),
            (Mask::Wide(a), Mask::Wide(b)) => {
                Ok(a.iter().zip(b).map(|(x, y)| (x ^ y).count_ones()).sum())
            }
            _ => unreachable!("same K implies same representation"),
        }
    }

    pub fn intersection_size(&self, other: &ConfidenceSet) -> Result<u32> {
        match (&self.mask, &other.mask) {
            _ if self.k != other.k => Err(Error::LabelSpaceMismatch(self.k, other.k)),
            (Mask::Fixed(a), Mask::Fixed(b)) => Ok((a & b).count_ones()),
            (Mask::Wide(a), Mask::Wide(b)) => {
                Ok(a.iter().zip(b).map(|(x, y)| (x & y).count_ones()).sum())
            }
            _ => unreachable!("same K implies same representation"),
        }
    }

    /// Members in ascending order, 1-based.
    pub fn members(&self) -> Vec<u32> {
        (1..=self.k).filter(|&l| self.contains(l)).collect()
    }
}

/// Serialized form: `{ "k": K, "members": [..] }`, stable across mask widths.
#[derive(Serialize, Deserialize)]
struct ConfidenceSetRepr {
    k: u32,
    members: Vec<u32>,
}

impl From<ConfidenceSet> for ConfidenceSetRepr {
    fn from(set: ConfidenceSet) -> Self {
        ConfidenceSetRepr {
            k: set.k(),
            members: set.members(),
        }
    }
}

impl TryFrom<ConfidenceSetRepr> for ConfidenceSet {
    type Error = Error;

    fn try_from(repr: ConfidenceSetRepr) -> Result<Self> {
        ConfidenceSet::from_members(LabelSpace::new(repr.k)?, &repr.members)
    }
}

/// One repetition's worth of Monte-Carlo metric estimates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskSample {
    pub error: f64,
    pub info: f64,
    pub hamming: f64,
    pub excess: f64,
    pub discrepancy: f64,
    pub test_size: usize,
}

/// Cross-repetition aggregate: per-metric sample mean and standard deviation
/// (denominator `B - 1`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub error_mean: f64,
    pub error_std: f64,
    pub info_mean: f64,
    pub info_std: f64,
    pub hamming_mean: f64,
    pub hamming_std: f64,
    pub excess_mean: f64,
    pub excess_std: f64,
    pub discrepancy_mean: f64,
    pub discrepancy_std: f64,
    pub repetitions: usize,
    pub config_digest: String,
    /// Set when `repetitions == 1`, where a standard deviation is undefined
    /// and reported as zero.
    pub single_repetition_warning: bool,
}
