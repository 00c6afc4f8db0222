//! Downstream checks on extracted features: kNN classification,
//! intra/inter-class scatter, and sparsity measurements.

use std::collections::HashMap;
use std::io::Write;

use crate::error::{Result, SennsError};
use crate::vecmath::{l1_norm, squared_distance};

/// Summary metrics for one feature set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalReport {
    /// Fraction of correctly classified test points.
    pub knn_accuracy: f64,
    /// Mean intra-class squared distance over mean inter-class squared
    /// distance; smaller is better separated.
    pub scatter_ratio: f64,
    /// Average L1 norm of the feature vectors.
    pub mean_l1: f64,
    /// Fraction of feature entries with magnitude below epsilon.
    pub near_zero_fraction: f64,
}

impl EvalReport {
    /// Flat `key value` lines.
    pub fn write_text<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "knn_accuracy {}", self.knn_accuracy)?;
        writeln!(out, "scatter_ratio {}", self.scatter_ratio)?;
        writeln!(out, "mean_l1 {}", self.mean_l1)?;
        writeln!(out, "near_zero_fraction {}", self.near_zero_fraction)?;
        Ok(())
    }

    /// Single-record CSV with a header.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "knn_accuracy,scatter_ratio,mean_l1,near_zero_fraction")?;
        writeln!(
            out,
            "{},{},{},{}",
            self.knn_accuracy, self.scatter_ratio, self.mean_l1, self.near_zero_fraction
        )?;
        Ok(())
    }
}

/// Label multiset of the k nearest training points (squared Euclidean).
///
/// Neighbors sort by (distance, class id), so equidistant neighbors of
/// the same class are interchangeable and the vote does not depend on
/// training order.
fn neighbor_labels(
    train_features: &[Vec<f64>],
    train_labels: &[usize],
    query: &[f64],
    k: usize,
) -> Vec<usize> {
    let mut scored: Vec<(f64, usize)> = train_features
        .iter()
        .zip(train_labels)
        .map(|(x, &y)| (squared_distance(x, query), y))
        .collect();
    scored.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    scored.into_iter().take(k).map(|(_, y)| y).collect()
}

fn majority_vote(labels: &[usize]) -> usize {
    let mut votes: HashMap<usize, usize> = HashMap::new();
    for &l in labels {
        *votes.entry(l).or_insert(0) += 1;
    }
    // Vote ties break to the smallest class id.
    let mut best = (0usize, 0usize);
    let mut found = false;
    for (&label, &count) in &votes {
        if !found || count > best.1 || (count == best.1 && label < best.0) {
            best = (label, count);
            found = true;
        }
    }
    best.0
}

/// Euclidean k-nearest-neighbor classification with majority vote.
pub fn knn_classify(
    train_features: &[Vec<f64>],
    train_labels: &[usize],
    test_features: &[Vec<f64>],
    k: usize,
) -> Result<Vec<usize>> {
    if train_features.is_empty() || k == 0 {
        return Err(SennsError::EmptyDataset);
    }
    if train_features.len() != train_labels.len() {
        return Err(SennsError::DimensionMismatch {
            expected: train_features.len(),
            actual: train_labels.len(),
            context: "knn training labels",
        });
    }
    let dim = train_features[0].len();
    let mut out = Vec::with_capacity(test_features.len());
    for q in test_features {
        if q.len() != dim {
            return Err(SennsError::DimensionMismatch {
                expected: dim,
                actual: q.len(),
                context: "knn query vector",
            });
        }
        out.push(majority_vote(&neighbor_labels(
            train_features,
            train_labels,
            q,
            k,
        )));
    }
    Ok(out)
}

/// Fraction of test points classified correctly.
pub fn knn_accuracy(
    train_features: &[Vec<f64>],
    train_labels: &[usize],
    test_features: &[Vec<f64>],
    test_labels: &[usize],
    k: usize,
) -> Result<f64> {
    let predicted = knn_classify(train_features, train_labels, test_features, k)?;
    let correct = predicted
        .iter()
        .zip(test_labels)
        .filter(|(p, t)| p == t)
        .count();
    Ok(correct as f64 / test_labels.len().max(1) as f64)
}

/// Leave-one-out kNN accuracy over a single feature set.
pub fn knn_loo_accuracy(features: &[Vec<f64>], labels: &[usize], k: usize) -> Result<f64> {
    if features.len() < 2 {
        return Err(SennsError::EmptyDataset);
    }
    let mut correct = 0usize;
    for held_out in 0..features.len() {
        let train_x: Vec<Vec<f64>> = features
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != held_out)
            .map(|(_, x)| x.clone())
            .collect();
        let train_y: Vec<usize> = labels
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != held_out)
            .map(|(_, &y)| y)
            .collect();
        let vote = majority_vote(&neighbor_labels(&train_x, &train_y, &features[held_out], k));
        if vote == labels[held_out] {
            correct += 1;
        }
    }
    Ok(correct as f64 / features.len() as f64)
}

/// Mean same-class squared distance (ordered pairs, self excluded)
/// divided by mean different-class squared distance.
///
/// Returns `f64::INFINITY` when every point coincides (zero
/// denominator); a dataset whose classes are all singletons has no
/// intra-class pairs and reports ratio 0.
pub fn scatter_ratio(features: &[Vec<f64>], labels: &[usize]) -> Result<f64> {
    let m = features.len();
    let classes: std::collections::HashSet<usize> = labels.iter().copied().collect();
    if classes.len() < 2 {
        return Err(SennsError::SingleClass);
    }
    let mut intra_sum = 0.0;
    let mut intra_count = 0usize;
    let mut inter_sum = 0.0;
    let mut inter_count = 0usize;
    for t in 0..m {
        for u in 0..m {
            if t == u {
                continue;
            }
            let d2 = squared_distance(&features[t], &features[u]);
            if labels[t] == labels[u] {
                intra_sum += d2;
                intra_count += 1;
            } else {
                inter_sum += d2;
                inter_count += 1;
            }
        }
    }
    let intra_mean = if intra_count > 0 {
        intra_sum / intra_count as f64
    } else {
        0.0
    };
    let inter_mean = inter_sum / inter_count.max(1) as f64;
    if inter_mean == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(intra_mean / inter_mean)
}

/// `(mean L1 norm, fraction of entries with |v| < epsilon)`.
pub fn sparsity_metrics(features: &[Vec<f64>], epsilon: f64) -> (f64, f64) {
    assert!(epsilon > 0.0, "epsilon must be positive");
    if features.is_empty() {
        return (0.0, 0.0);
    }
    let mean_l1 = features.iter().map(|f| l1_norm(f)).sum::<f64>() / features.len() as f64;
    let total: usize = features.iter().map(|f| f.len()).sum();
    let near_zero = features
        .iter()
        .flat_map(|f| f.iter())
        .filter(|v| v.abs() < epsilon)
        .count();
    (mean_l1, near_zero as f64 / total.max(1) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_d(points: &[f64]) -> Vec<Vec<f64>> {
        points.iter().map(|&p| vec![p]).collect()
    }

    #[test]
    fn nearest_training_point_wins_at_k1() {
        let train = one_d(&[0.0, 10.0]);
        let labels = vec![0, 1];
        let pred = knn_classify(&train, &labels, &one_d(&[1.0]), 1).unwrap();
        assert_eq!(pred, vec![0]);
        let pred = knn_classify(&train, &labels, &one_d(&[0.0]), 1).unwrap();
        assert_eq!(pred, vec![0]);
    }

    #[test]
    fn uniform_training_labels_always_win() {
        let train = one_d(&[0.0, 5.0, 9.0]);
        let labels = vec![3, 3, 3];
        let pred = knn_classify(&train, &labels, &one_d(&[2.0, 7.0]), 3).unwrap();
        assert_eq!(pred, vec![3, 3]);
    }

    #[test]
    fn vote_ties_break_to_the_smallest_class() {
        let train = one_d(&[0.0, 2.0]);
        let labels = vec![1, 0];
        // Query equidistant, k = 2: one vote each; class 0 wins.
        let pred = knn_classify(&train, &labels, &one_d(&[1.0]), 2).unwrap();
        assert_eq!(pred, vec![0]);
    }

    #[test]
    fn training_order_does_not_change_predictions() {
        let train = one_d(&[0.0, 1.0, 4.0, 5.0]);
        let labels = vec![0, 0, 1, 1];
        let shuffled = one_d(&[5.0, 1.0, 0.0, 4.0]);
        let shuffled_labels = vec![1, 0, 0, 1];
        let queries = one_d(&[0.5, 2.4, 2.6, 4.5]);
        let a = knn_classify(&train, &labels, &queries, 3).unwrap();
        let b = knn_classify(&shuffled, &shuffled_labels, &queries, 3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn knn_rejects_dimension_mismatch() {
        let train = vec![vec![0.0, 1.0]];
        let labels = vec![0];
        assert!(matches!(
            knn_classify(&train, &labels, &[vec![1.0]], 1),
            Err(SennsError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn scatter_ratio_hand_enumeration() {
        // A = {0, 2}, B = {10, 12}. Intra pairs all have squared
        // distance 4. Inter pairs: (0,10)=100, (0,12)=144, (2,10)=64,
        // (2,12)=100, each counted in both orders, mean 102.
        let feats = one_d(&[0.0, 2.0, 10.0, 12.0]);
        let labels = vec![0, 0, 1, 1];
        let r = scatter_ratio(&feats, &labels).unwrap();
        assert!((r - 4.0 / 102.0).abs() < 1e-15);
    }

    #[test]
    fn collapsed_classes_give_zero_ratio() {
        let feats = one_d(&[1.0, 1.0, 5.0, 5.0]);
        let labels = vec![0, 0, 1, 1];
        assert_eq!(scatter_ratio(&feats, &labels).unwrap(), 0.0);
    }

    #[test]
    fn identical_points_signal_a_degenerate_denominator() {
        let feats = one_d(&[2.0, 2.0, 2.0]);
        let labels = vec![0, 1, 1];
        assert_eq!(scatter_ratio(&feats, &labels).unwrap(), f64::INFINITY);
    }

    #[test]
    fn single_class_input_is_rejected() {
        let feats = one_d(&[0.0, 1.0]);
        assert!(matches!(
            scatter_ratio(&feats, &[0, 0]),
            Err(SennsError::SingleClass)
        ));
    }

    #[test]
    fn scatter_ratio_is_translation_invariant() {
        let feats = vec![
            vec![0.0, 1.0],
            vec![0.5, 0.2],
            vec![4.0, 4.0],
            vec![4.4, 3.8],
        ];
        let labels = vec![0, 0, 1, 1];
        let base = scatter_ratio(&feats, &labels).unwrap();
        let shifted: Vec<Vec<f64>> = feats
            .iter()
            .map(|f| f.iter().map(|v| v + 17.5).collect())
            .collect();
        let moved = scatter_ratio(&shifted, &labels).unwrap();
        assert!((base - moved).abs() < 1e-12);
    }

    #[test]
    fn scatter_ratio_is_invariant_under_rotation() {
        let feats = vec![
            vec![0.0, 1.0],
            vec![0.5, 0.2],
            vec![4.0, 4.0],
            vec![4.4, 3.8],
        ];
        let labels = vec![0, 0, 1, 1];
        let base = scatter_ratio(&feats, &labels).unwrap();
        let (sin, cos) = 0.83f64.sin_cos();
        let rotated: Vec<Vec<f64>> = feats
            .iter()
            .map(|f| vec![cos * f[0] - sin * f[1], sin * f[0] + cos * f[1]])
            .collect();
        let turned = scatter_ratio(&rotated, &labels).unwrap();
        assert!((base - turned).abs() < 1e-12);
    }

    #[test]
    fn sparsity_metrics_cases() {
        let (l1, zero) = sparsity_metrics(&[vec![0.0, 0.0], vec![0.0, 0.0]], 1e-3);
        assert_eq!((l1, zero), (0.0, 1.0));

        let (l1, _) = sparsity_metrics(&[vec![1.0, -1.0]], 1e-3);
        assert_eq!(l1, 2.0);

        let (_, zero) = sparsity_metrics(&[vec![0.0005, 2.0]], 1e-3);
        assert_eq!(zero, 0.5);
    }

    #[test]
    fn mean_l1_is_absolutely_homogeneous() {
        let feats = vec![vec![1.0, -2.0], vec![0.5, 3.0]];
        let (base, _) = sparsity_metrics(&feats, 1e-3);
        let scaled: Vec<Vec<f64>> = feats
            .iter()
            .map(|f| f.iter().map(|v| v * -2.5).collect())
            .collect();
        let (big, _) = sparsity_metrics(&scaled, 1e-3);
        assert!((big - 2.5 * base).abs() < 1e-12);
    }

    #[test]
    fn report_writers_emit_all_fields() {
        let report = EvalReport {
            knn_accuracy: 0.9,
            scatter_ratio: 0.04,
            mean_l1: 1.5,
            near_zero_fraction: 0.25,
        };
        let mut text = Vec::new();
        report.write_text(&mut text).unwrap();
        let text = String::from_utf8(text).unwrap();
        assert!(text.contains("knn_accuracy 0.9"));
        assert!(text.contains("scatter_ratio 0.04"));

        let mut csv = Vec::new();
        report.write_csv(&mut csv).unwrap();
        let csv = String::from_utf8(csv).unwrap();
        assert_eq!(
            csv,
            "knn_accuracy,scatter_ratio,mean_l1,near_zero_fraction\n0.9,0.04,1.5,0.25\n"
        );
    }
}
