//! Colorized-digit corpus and its biased background split.

use alloc::format;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;

use super::color::{colorize, Palettes, GREEN, PINK};
use super::dataset::{Dataset, Sample};
use super::glyph::{render_glyph, GLYPH_SIZE};
use super::schema::AttributeSchema;
use super::split::{carve_validation, GcdrSplit, Role, SplitEntry};
use crate::error::{Error, Result};
use crate::numerics::Tensor;
use crate::rng::{self, purpose};

/// Which original partition a digit came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pool {
    Train,
    Test,
}

/// Grayscale digits with labels in `0..10`.
pub trait DigitSource {
    fn len(&self) -> usize;
    fn label(&self, i: usize) -> usize;
    fn pool(&self, i: usize) -> Pool;
    /// `h × w` intensities in [0, 1].
    fn gray(&self, i: usize) -> Result<Tensor>;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Procedurally rendered digits; glyph `i` has label `i % 10` and is rendered on demand.
#[derive(Debug, Clone, Copy)]
pub struct GlyphDigits {
    pub seed: u64,
    pub n_train: usize,
    pub n_test: usize,
}

impl GlyphDigits {
    /// MNIST-sized pools: 60k train, 10k test.
    pub fn mnist_sized(seed: u64) -> Self {
        Self { seed, n_train: 60_000, n_test: 10_000 }
    }
}

impl DigitSource for GlyphDigits {
    fn len(&self) -> usize {
        self.n_train + self.n_test
    }

    fn label(&self, i: usize) -> usize {
        i % 10
    }

    fn pool(&self, i: usize) -> Pool {
        if i < self.n_train {
            Pool::Train
        } else {
            Pool::Test
        }
    }

    fn gray(&self, i: usize) -> Result<Tensor> {
        Ok(render_glyph(self.label(i), &mut rng::substream(self.seed, purpose::GLYPH, i as u64)))
    }
}

/// Digits loaded from IDX files (train pool first, then test pool).
#[derive(Debug, Clone)]
pub struct IdxDigits {
    images: Tensor,
    labels: Vec<u8>,
    n_train: usize,
}

impl IdxDigits {
    pub fn new(train_images: Tensor, train_labels: Vec<u8>, test_images: Tensor, test_labels: Vec<u8>) -> Result<Self> {
        if train_images.rank() != 3 || test_images.rank() != 3 || train_images.shape()[1..] != test_images.shape()[1..] {
            return Err(Error::Dimension(format!(
                "image tensors {:?} and {:?} disagree",
                train_images.shape(),
                test_images.shape()
            )));
        }
        if train_images.rows() != train_labels.len() || test_images.rows() != test_labels.len() {
            return Err(Error::Length("image and label counts differ".into()));
        }
        if let Some(bad) = train_labels.iter().chain(&test_labels).find(|&&l| l > 9) {
            return Err(Error::Range(format!("digit label {bad}")));
        }
        let n_train = train_labels.len();
        let shape = [n_train + test_labels.len(), train_images.shape()[1], train_images.shape()[2]];
        let mut data = train_images.into_data();
        data.extend(test_images.into_data());
        let mut labels = train_labels;
        labels.extend(test_labels);
        Ok(Self { images: Tensor::new(&shape, data)?, labels, n_train })
    }
}

impl DigitSource for IdxDigits {
    fn len(&self) -> usize {
        self.labels.len()
    }

    fn label(&self, i: usize) -> usize {
        self.labels[i] as usize
    }

    fn pool(&self, i: usize) -> Pool {
        if i < self.n_train {
            Pool::Train
        } else {
            Pool::Test
        }
    }

    fn gray(&self, i: usize) -> Result<Tensor> {
        let (h, w) = (self.images.shape()[1], self.images.shape()[2]);
        Tensor::new(&[h, w], self.images.row(i).to_vec())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CmnistOptions {
    /// Background paired with digits 0–4 in training.
    pub bg_a: usize,
    /// Background paired with digits 5–9 in training.
    pub bg_b: usize,
    pub validation_fraction: f64,
    pub seed: u64,
}

impl CmnistOptions {
    pub fn new(seed: u64) -> Self {
        Self { bg_a: GREEN, bg_b: PINK, validation_fraction: 0.1, seed }
    }
}

/// Attribute tuple and origin of one corpus digit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CmnistRecord {
    pub attrs: Vec<usize>,
    pub pool: Pool,
}

/// Assigns background and foreground colors to every digit. Within each
/// (pool, digit) group colors are dealt round-robin over a seeded shuffle,
/// so every ⟨digit, color⟩ cell is equally populated.
pub fn assign_colors<S: DigitSource + ?Sized>(source: &S, seed: u64) -> Vec<CmnistRecord> {
    let mut rng = rng::stream(seed, purpose::COLORS);
    let mut records: Vec<CmnistRecord> = (0..source.len())
        .map(|i| CmnistRecord { attrs: alloc::vec![source.label(i) + 1, 0, 0], pool: source.pool(i) })
        .collect();
    for pool in [Pool::Train, Pool::Test] {
        for digit in 0..10 {
            let mut members: Vec<usize> =
                (0..records.len()).filter(|&i| records[i].pool == pool && source.label(i) == digit).collect();
            for slot in 1..=2 {
                members.shuffle(&mut rng);
                let offset = rng.random_range(0..10);
                for (rank, &i) in members.iter().enumerate() {
                    records[i].attrs[slot] = (rank + offset) % 10 + 1;
                }
            }
        }
    }
    records
}

fn digit_group(attrs: &[usize]) -> usize {
    // attrs[0] is the 1-based digit.
    if attrs[0] <= 5 {
        0
    } else {
        1
    }
}

/// Training keeps ⟨digits 0–4, bg A⟩ and ⟨digits 5–9, bg B⟩ from the train
/// pool; testing keeps the swapped combinations from the test pool; every
/// other digit is dropped. A seeded fraction of test moves to validation.
pub fn build_cmnist_split(records: &[CmnistRecord], schema: &AttributeSchema, opts: &CmnistOptions) -> Result<GcdrSplit> {
    if schema.width() != 3 {
        return Err(Error::Schema(format!("C-MNIST needs m = 2, schema has m = {}", schema.m())));
    }
    if opts.bg_a == opts.bg_b {
        return Err(Error::Construction("training backgrounds must differ".into()));
    }
    for bg in [opts.bg_a, opts.bg_b] {
        if !records.iter().any(|r| r.attrs[1] == bg) {
            return Err(Error::Construction(format!("background {bg} does not occur; need 2 distinct backgrounds")));
        }
    }
    let train_bg = [opts.bg_a, opts.bg_b];
    let mut entries = Vec::new();
    for (index, r) in records.iter().enumerate() {
        schema.check(&r.attrs)?;
        let group = digit_group(&r.attrs);
        let role = match r.pool {
            Pool::Train if r.attrs[1] == train_bg[group] => Role::Train,
            Pool::Test if r.attrs[1] == train_bg[1 - group] => Role::Test,
            _ => continue,
        };
        entries.push(SplitEntry { index, role, attrs: r.attrs.clone() });
    }
    let mut split = GcdrSplit::new(entries);
    carve_validation(&mut split, schema, opts.validation_fraction, &mut rng::stream(opts.seed, purpose::SPLIT));
    Ok(split)
}

/// Renders and colorizes only the samples referenced by `split`, returning a
/// compact dataset and the split re-indexed into it.
pub fn materialize<S: DigitSource + ?Sized>(
    source: &S,
    split: &GcdrSplit,
    schema: &AttributeSchema,
    palettes: &Palettes,
) -> Result<(Dataset, GcdrSplit)> {
    let mut samples = Vec::with_capacity(split.entries.len());
    let mut entries = Vec::with_capacity(split.entries.len());
    let mut item_shape = None;
    for (new_index, e) in split.entries.iter().enumerate() {
        let gray = source.gray(e.index)?;
        let x = colorize(&gray, e.attrs[1], e.attrs[2], palettes)?;
        item_shape.get_or_insert_with(|| x.shape().to_vec());
        samples.push(Sample { x, attrs: e.attrs.clone() });
        entries.push(SplitEntry { index: new_index, role: e.role, attrs: e.attrs.clone() });
    }
    let item_shape = item_shape.unwrap_or_else(|| alloc::vec![3, GLYPH_SIZE, GLYPH_SIZE]);
    Ok((Dataset::new(schema.clone(), item_shape, samples)?, GcdrSplit::new(entries)))
}

/// Colors, splits and materializes a digit source in one go.
pub fn cmnist_corpus<S: DigitSource + ?Sized>(source: &S, opts: &CmnistOptions) -> Result<(Dataset, GcdrSplit)> {
    let schema = AttributeSchema::cmnist();
    let records = assign_colors(source, opts.seed);
    let split = build_cmnist_split(&records, &schema, opts)?;
    materialize(source, &split, &schema, &Palettes::default())
}
