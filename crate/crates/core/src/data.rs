//! Dataset ingestion (CSV, IDX), synthetic generators, and feature
//! export.

use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Result, SennsError};
use crate::network::Network;

const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

/// Input vectors with dense integer class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    inputs: Vec<Vec<f64>>,
    labels: Vec<usize>,
    class_names: Option<Vec<String>>,
    num_classes: usize,
    dim: usize,
}

impl LabeledDataset {
    pub fn new(inputs: Vec<Vec<f64>>, labels: Vec<usize>) -> Result<Self> {
        Self::with_class_names(inputs, labels, None)
    }

    pub fn with_class_names(
        inputs: Vec<Vec<f64>>,
        labels: Vec<usize>,
        class_names: Option<Vec<String>>,
    ) -> Result<Self> {
        if inputs.is_empty() {
            return Err(SennsError::EmptyDataset);
        }
        if inputs.len() != labels.len() {
            return Err(SennsError::DimensionMismatch {
                expected: inputs.len(),
                actual: labels.len(),
                context: "dataset labels",
            });
        }
        let dim = inputs[0].len();
        for (t, x) in inputs.iter().enumerate() {
            if x.len() != dim {
                return Err(SennsError::DimensionMismatch {
                    expected: dim,
                    actual: x.len(),
                    context: "dataset input vector",
                });
            }
            if x.iter().any(|v| !v.is_finite()) {
                return Err(SennsError::CsvValue {
                    line: t + 1,
                    column: 0,
                    token: "non-finite".to_string(),
                });
            }
        }
        let num_classes = labels.iter().max().copied().unwrap_or(0) + 1;
        if let Some(names) = &class_names {
            if names.len() != num_classes {
                return Err(SennsError::DimensionMismatch {
                    expected: num_classes,
                    actual: names.len(),
                    context: "class names",
                });
            }
        }
        Ok(Self {
            inputs,
            labels,
            class_names,
            num_classes,
            dim,
        })
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        false // construction rejects empty datasets
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn inputs(&self) -> &[Vec<f64>] {
        &self.inputs
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn input(&self, t: usize) -> &[f64] {
        &self.inputs[t]
    }

    pub fn label(&self, t: usize) -> usize {
        self.labels[t]
    }

    pub fn class_names(&self) -> Option<&[String]> {
        self.class_names.as_deref()
    }

    /// Display name of an example's class: the stored name if any, the
    /// numeric id otherwise.
    pub fn class_display(&self, class: usize) -> String {
        match &self.class_names {
            Some(names) => names[class].clone(),
            None => class.to_string(),
        }
    }

    /// Number of members per class id.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.num_classes];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// Per-feature standardization to mean 0 and (population) std 1.
    /// Constant features are only centered.
    pub fn standardized(&self) -> LabeledDataset {
        let m = self.len() as f64;
        let mut mean = vec![0.0; self.dim];
        for x in &self.inputs {
            for (mu, v) in mean.iter_mut().zip(x) {
                *mu += v;
            }
        }
        for mu in &mut mean {
            *mu /= m;
        }
        let mut var = vec![0.0; self.dim];
        for x in &self.inputs {
            for ((s, v), mu) in var.iter_mut().zip(x).zip(&mean) {
                *s += (v - mu) * (v - mu);
            }
        }
        let std: Vec<f64> = var
            .iter()
            .map(|s| {
                let sd = (s / m).sqrt();
                if sd > 0.0 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        let inputs = self
            .inputs
            .iter()
            .map(|x| {
                x.iter()
                    .zip(&mean)
                    .zip(&std)
                    .map(|((v, mu), sd)| (v - mu) / sd)
                    .collect()
            })
            .collect();
        LabeledDataset {
            inputs,
            labels: self.labels.clone(),
            class_names: self.class_names.clone(),
            num_classes: self.num_classes,
            dim: self.dim,
        }
    }
}

/// Loads a comma-separated file with numeric feature columns and one
/// label column (categorical or integer).
///
/// Labels are densely re-indexed 0..N-1 in first-appearance order; the
/// original tokens are kept as class names. A header row is detected by
/// a non-numeric token in any feature column of the first line.
pub fn load_csv(path: &Path, label_column: usize) -> Result<LabeledDataset> {
    load_csv_reader(BufReader::new(File::open(path)?), label_column)
}

pub fn load_csv_reader<R: BufRead>(input: R, label_column: usize) -> Result<LabeledDataset> {
    let mut inputs = Vec::new();
    let mut labels = Vec::new();
    let mut class_names: Vec<String> = Vec::new();
    let mut expected_width: Option<usize> = None;

    for (idx, line) in input.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let tokens: Vec<&str> = trimmed.split(',').map(str::trim).collect();
        if tokens.len() <= label_column {
            return Err(SennsError::CsvLabelColumn {
                line: line_no,
                column: label_column,
                width: tokens.len(),
            });
        }

        if expected_width.is_none() {
            // Header if any feature cell is non-numeric.
            let is_header = tokens
                .iter()
                .enumerate()
                .any(|(c, tok)| c != label_column && tok.parse::<f64>().is_err());
            if is_header {
                continue;
            }
            expected_width = Some(tokens.len());
        }
        let width = expected_width.unwrap();
        if tokens.len() != width {
            return Err(SennsError::CsvRagged {
                line: line_no,
                expected: width,
                actual: tokens.len(),
            });
        }

        let mut row = Vec::with_capacity(width - 1);
        for (c, tok) in tokens.iter().enumerate() {
            if c == label_column {
                continue;
            }
            let v: f64 = tok.parse().map_err(|_| SennsError::CsvValue {
                line: line_no,
                column: c,
                token: tok.to_string(),
            })?;
            if !v.is_finite() {
                return Err(SennsError::CsvValue {
                    line: line_no,
                    column: c,
                    token: tok.to_string(),
                });
            }
            row.push(v);
        }
        let token = tokens[label_column].to_string();
        let id = match class_names.iter().position(|n| *n == token) {
            Some(id) => id,
            None => {
                class_names.push(token);
                class_names.len() - 1
            }
        };
        inputs.push(row);
        labels.push(id);
    }

    LabeledDataset::with_class_names(inputs, labels, Some(class_names))
}

fn read_be_u32<R: Read>(input: &mut R, what: &str) -> Result<u32> {
    let mut buf = [0u8; 4];
    input
        .read_exact(&mut buf)
        .map_err(|_| SennsError::IdxTruncated(what.to_string()))?;
    Ok(u32::from_be_bytes(buf))
}

/// Loads an IDX3 image file and IDX1 label file (big-endian, magic
/// numbers 0x803 / 0x801). Pixels are scaled to `[0, 1]` by division by
/// 255; at most `limit` examples are taken.
pub fn load_idx(images_path: &Path, labels_path: &Path, limit: usize) -> Result<LabeledDataset> {
    let mut images = BufReader::new(File::open(images_path)?);
    let magic = read_be_u32(&mut images, "image magic")?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(SennsError::IdxMagic {
            expected: IDX_IMAGES_MAGIC,
            found: magic,
        });
    }
    let image_count = read_be_u32(&mut images, "image count")? as usize;
    let rows = read_be_u32(&mut images, "image rows")? as usize;
    let cols = read_be_u32(&mut images, "image cols")? as usize;

    let mut labels = BufReader::new(File::open(labels_path)?);
    let magic = read_be_u32(&mut labels, "label magic")?;
    if magic != IDX_LABELS_MAGIC {
        return Err(SennsError::IdxMagic {
            expected: IDX_LABELS_MAGIC,
            found: magic,
        });
    }
    let label_count = read_be_u32(&mut labels, "label count")? as usize;
    if image_count != label_count {
        return Err(SennsError::IdxCountMismatch {
            images: image_count,
            labels: label_count,
        });
    }

    let take = limit.min(image_count);
    let pixels_per_image = rows * cols;
    let mut inputs = Vec::with_capacity(take);
    let mut pixel_buf = vec![0u8; pixels_per_image];
    for _ in 0..take {
        images
            .read_exact(&mut pixel_buf)
            .map_err(|_| SennsError::IdxTruncated("image pixels".to_string()))?;
        inputs.push(pixel_buf.iter().map(|&p| f64::from(p) / 255.0).collect());
    }
    let mut label_buf = vec![0u8; take];
    labels
        .read_exact(&mut label_buf)
        .map_err(|_| SennsError::IdxTruncated("labels".to_string()))?;
    let labels: Vec<usize> = label_buf.iter().map(|&l| l as usize).collect();

    LabeledDataset::new(inputs, labels)
}

/// Isotropic Gaussian blobs, one class per center. Deterministic given
/// `seed`.
pub fn make_gaussians(
    n_per_class: usize,
    centers: &[Vec<f64>],
    sigma: f64,
    seed: u64,
) -> Result<LabeledDataset> {
    if n_per_class == 0 || centers.is_empty() {
        return Err(SennsError::EmptyDataset);
    }
    let dim = centers[0].len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut inputs = Vec::with_capacity(n_per_class * centers.len());
    let mut labels = Vec::with_capacity(n_per_class * centers.len());
    for (class, center) in centers.iter().enumerate() {
        if center.len() != dim {
            return Err(SennsError::DimensionMismatch {
                expected: dim,
                actual: center.len(),
                context: "gaussian center",
            });
        }
        for _ in 0..n_per_class {
            let point = center
                .iter()
                .map(|&c| {
                    let noise: f64 = StandardNormal.sample(&mut rng);
                    c + sigma * noise
                })
                .collect();
            inputs.push(point);
            labels.push(class);
        }
    }
    LabeledDataset::new(inputs, labels)
}

/// Two interleaved half-circles in the plane with Gaussian jitter.
/// Class 0 is the upper moon. Deterministic given `seed`.
pub fn make_two_moons(n: usize, noise: f64, seed: u64) -> Result<LabeledDataset> {
    if n == 0 {
        return Err(SennsError::EmptyDataset);
    }
    let n_inner = n / 2;
    let n_outer = n - n_inner;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut jitter = |v: f64| {
        let e: f64 = StandardNormal.sample(&mut rng);
        v + noise * e
    };

    let mut inputs = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n_outer {
        let t = if n_outer > 1 {
            std::f64::consts::PI * i as f64 / (n_outer - 1) as f64
        } else {
            0.0
        };
        inputs.push(vec![jitter(t.cos()), jitter(t.sin())]);
        labels.push(0);
    }
    for i in 0..n_inner {
        let t = if n_inner > 1 {
            std::f64::consts::PI * i as f64 / (n_inner - 1) as f64
        } else {
            0.0
        };
        inputs.push(vec![jitter(1.0 - t.cos()), jitter(0.5 - t.sin())]);
        labels.push(1);
    }
    LabeledDataset::new(inputs, labels)
}

/// Writes one CSV row per example: the output-layer feature values, then
/// the class label (name if available).
pub fn export_features<W: Write>(
    net: &Network,
    dataset: &LabeledDataset,
    out: &mut W,
) -> Result<()> {
    if dataset.dim() != net.input_dim() {
        return Err(SennsError::DimensionMismatch {
            expected: net.input_dim(),
            actual: dataset.dim(),
            context: "feature export input",
        });
    }
    for t in 0..dataset.len() {
        let trace = net.forward(dataset.input(t))?;
        let mut row = trace
            .output_activations()
            .iter()
            .map(|v| v.to_string())
            .collect::<Vec<_>>();
        row.push(dataset.class_display(dataset.label(t)));
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

/// Runs every example through the network, returning output activations
/// in dataset order.
pub fn extract_features(net: &Network, dataset: &LabeledDataset) -> Result<Vec<Vec<f64>>> {
    dataset
        .inputs()
        .iter()
        .map(|x| Ok(net.forward(x)?.output_activations().to_vec()))
        .collect()
}
