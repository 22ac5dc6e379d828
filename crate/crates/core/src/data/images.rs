use std::path::Path;

use crate::error::{invalid, Error, Result};
use crate::numkit::Vector;
use crate::rng::{normal, seeded, uniform};

use super::idx::load_idx;
use super::LabeledDataset;

/// Average pooling of a `side × side` row-major image by `factor`.
pub fn downsample(image: &Vector, side: usize, factor: usize) -> Result<Vector> {
    if factor == 0 || side % factor != 0 || image.len() != side * side {
        return invalid(format!(
            "cannot pool a {}-pixel image of side {side} by {factor}",
            image.len()
        ));
    }
    let out_side = side / factor;
    let norm = 1.0 / (factor * factor) as f64;
    let mut out = Vector::zeros(out_side * out_side);
    for r in 0..out_side {
        for c in 0..out_side {
            let mut acc = 0.0;
            for dr in 0..factor {
                for dc in 0..factor {
                    acc += image[(r * factor + dr) * side + c * factor + dc];
                }
            }
            out[r * out_side + c] = acc * norm;
        }
    }
    Ok(out)
}

/// Reads an IDX image/label pair, scales pixels to `[0, 1]` and flattens
/// each image, optionally pooling by `factor`.
pub fn load_image_dataset(images: &Path, labels: &Path, factor: usize) -> Result<LabeledDataset> {
    let img = load_idx(images)?;
    let lab = load_idx(labels)?;
    if img.dims.len() != 3 || img.dims[1] != img.dims[2] {
        return Err(Error::Format {
            offset: 3,
            message: format!("expected square images of rank 3, got dims {:?}", img.dims),
        });
    }
    if lab.dims.len() != 1 || lab.dims[0] != img.dims[0] {
        return Err(Error::Format {
            offset: 3,
            message: format!("label file dims {:?} do not match {} images", lab.dims, img.dims[0]),
        });
    }
    let side = img.dims[1];
    let inputs = img
        .payload
        .chunks(side * side)
        .map(|px| {
            let v = Vector::from(px.iter().map(|&b| b as f64 / 255.0).collect::<Vec<_>>());
            if factor > 1 {
                downsample(&v, side, factor)
            } else {
                Ok(v)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let labels: Vec<usize> = lab.payload.iter().map(|&b| b as usize).collect();
    let n_classes = labels.iter().max().map_or(0, |m| m + 1);
    LabeledDataset::new(inputs, labels, n_classes)
}

/// Synthetic image classes: each class is a smooth random prototype on a
/// `side × side` grid; samples are prototype plus pixel noise, clipped to
/// `[0, 1]`. Labels cycle through the classes.
pub fn synthetic_images(
    n: usize,
    side: usize,
    n_classes: usize,
    noise: f64,
    seed: u64,
) -> LabeledDataset {
    let mut rng = seeded(seed);
    let prototypes: Vec<Vec<f64>> = (0..n_classes)
        .map(|_| {
            let bumps: Vec<[f64; 4]> = (0..4)
                .map(|_| {
                    [
                        uniform(&mut rng, 0.0, side as f64),
                        uniform(&mut rng, 0.0, side as f64),
                        uniform(&mut rng, 0.15, 0.35) * side as f64,
                        uniform(&mut rng, 0.4, 1.0),
                    ]
                })
                .collect();
            (0..side * side)
                .map(|k| {
                    let (r, c) = ((k / side) as f64 + 0.5, (k % side) as f64 + 0.5);
                    let v: f64 = bumps
                        .iter()
                        .map(|[br, bc, w, a]| {
                            a * (-((r - br).powi(2) + (c - bc).powi(2)) / (2.0 * w * w)).exp()
                        })
                        .sum();
                    v.min(1.0)
                })
                .collect()
        })
        .collect();
    let mut inputs = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let class = i % n_classes;
        let x: Vec<f64> = prototypes[class]
            .iter()
            .map(|&p| (p + noise * normal(&mut rng)).clamp(0.0, 1.0))
            .collect();
        inputs.push(Vector::from(x));
        labels.push(class);
    }
    LabeledDataset { inputs, labels, n_classes }
}
