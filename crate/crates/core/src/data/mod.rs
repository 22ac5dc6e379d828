//! Dataset generators, IDX image-file ingestion and seeded subset selection.

mod idx;
mod images;
mod swiss_roll;

use std::fmt::Write as _;

use crate::error::{invalid, Result};
use crate::numkit::Vector;
use crate::rng::{seeded, shuffle};
use crate::train::TrainData;

pub use idx::{load_idx, parse_idx, write_idx, IdxFile, IMAGE_MAGIC, LABEL_MAGIC};
pub use images::{downsample, load_image_dataset, synthetic_images};
pub use swiss_roll::{circle_seeds, embed_swiss_roll, swiss_roll, swiss_roll_point, T_MAX, T_MIN};

/// Inputs with integer class labels in `0..n_classes`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub inputs: Vec<Vector>,
    pub labels: Vec<usize>,
    pub n_classes: usize,
}

impl LabeledDataset {
    pub fn new(inputs: Vec<Vector>, labels: Vec<usize>, n_classes: usize) -> Result<Self> {
        if inputs.len() != labels.len() {
            return invalid("inputs and labels differ in length");
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= n_classes) {
            return invalid(format!("label {bad} outside 0..{n_classes}"));
        }
        Ok(LabeledDataset { inputs, labels, n_classes })
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn dimension(&self) -> usize {
        self.inputs.first().map_or(0, |x| x.len())
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_classes];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    pub fn select(&self, indices: &[usize]) -> LabeledDataset {
        LabeledDataset {
            inputs: indices.iter().map(|&i| self.inputs[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            n_classes: self.n_classes,
        }
    }

    pub fn to_train_data(&self) -> TrainData {
        TrainData::classification(self.inputs.clone(), self.labels.clone())
            .expect("lengths checked at construction")
    }

    /// `x1,...,xd,label`
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for i in 1..=self.dimension() {
            let _ = write!(out, "x{i},");
        }
        out.push_str("label\n");
        for (x, l) in self.inputs.iter().zip(&self.labels) {
            for v in x.iter() {
                let _ = write!(out, "{v:?},");
            }
            let _ = writeln!(out, "{l}");
        }
        out
    }
}

/// Disjoint seeded selection of `n_train` and `n_test` samples.
pub fn subset_split(
    ds: &LabeledDataset,
    n_train: usize,
    n_test: usize,
    seed: u64,
) -> Result<(LabeledDataset, LabeledDataset)> {
    if n_train + n_test > ds.len() {
        return invalid(format!(
            "cannot draw {n_train} + {n_test} samples from {}",
            ds.len()
        ));
    }
    let mut order: Vec<usize> = (0..ds.len()).collect();
    shuffle(&mut seeded(seed), &mut order);
    Ok((ds.select(&order[..n_train]), ds.select(&order[n_train..n_train + n_test])))
}
