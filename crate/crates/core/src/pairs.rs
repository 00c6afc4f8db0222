//! Pair-list construction: the full ordered O(m^2) set and the two
//! neighbor heuristics that shrink it to O((N-1+k) m).
//!
//! Heuristic selection measures distances in input space with the given
//! metric, once, before training: the pair set (and hence the objective)
//! then stays fixed across descent iterations. Ties are broken by lowest
//! index, so construction is fully deterministic.

use std::io::Write;

use crate::data::LabeledDataset;
use crate::error::{Result, SennsError};
use crate::vecmath::euclidean_distance;

/// How a [`PairList`] was built.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairMode {
    /// Every ordered pair (t, u).
    Full,
    /// Nearest-per-other-class plus k-farthest-same-class neighbors.
    HeuristicDC,
}

/// One ordered example pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Pair {
    pub t: usize,
    pub u: usize,
    pub same_class: bool,
}

/// Ordered pairs with the counts used for pair-weight normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct PairList {
    pairs: Vec<Pair>,
    pub m_c: usize,
    pub m_d: usize,
    pub mode: PairMode,
}

/// Euclidean distance, the default neighbor metric.
pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    euclidean_distance(a, b)
}

impl PairList {
    /// All ordered pairs (t, u) including self-pairs, ascending in
    /// (t, u); `m_c + m_d = m^2`.
    pub fn full(dataset: &LabeledDataset) -> Self {
        Self::full_with_options(dataset, false)
    }

    /// Full ordered pair set, optionally dropping self-pairs.
    ///
    /// Self-pairs contribute zero distance but do enlarge `m_c`;
    /// including them matches the ordered-pair count definition and is
    /// the default.
    pub fn full_with_options(dataset: &LabeledDataset, exclude_self_pairs: bool) -> Self {
        let m = dataset.len();
        let mut pairs = Vec::with_capacity(m * m);
        let mut m_c = 0;
        let mut m_d = 0;
        for t in 0..m {
            for u in 0..m {
                if exclude_self_pairs && t == u {
                    continue;
                }
                let same = dataset.label(t) == dataset.label(u);
                if same {
                    m_c += 1;
                } else {
                    m_d += 1;
                }
                pairs.push(Pair {
                    t,
                    u,
                    same_class: same,
                });
            }
        }
        Self {
            pairs,
            m_c,
            m_d,
            mode: PairMode::Full,
        }
    }

    /// Heuristic pair set: for each example, its k farthest same-class
    /// members and the nearest member of every other class. The counts
    /// `m_c` / `m_d` are the heuristic pair counts, keeping the pair
    /// weights averages.
    pub fn heuristic<F>(dataset: &LabeledDataset, k: usize, metric: F) -> Result<Self>
    where
        F: Fn(&[f64], &[f64]) -> f64,
    {
        check_classes(dataset)?;
        let mut pairs = Vec::new();
        let mut m_c = 0;
        let mut m_d = 0;
        for t in 0..dataset.len() {
            for u in farthest_same_class_for(dataset, t, k, &metric) {
                pairs.push(Pair {
                    t,
                    u,
                    same_class: true,
                });
                m_c += 1;
            }
            for u in nearest_other_class_for(dataset, t, &metric)? {
                pairs.push(Pair {
                    t,
                    u,
                    same_class: false,
                });
                m_d += 1;
            }
        }
        Ok(Self {
            pairs,
            m_c,
            m_d,
            mode: PairMode::HeuristicDC,
        })
    }

    /// Assembles a list from raw parts (used by tests and tooling).
    pub fn from_parts(pairs: Vec<Pair>, m_c: usize, m_d: usize, mode: PairMode) -> Self {
        Self {
            pairs,
            m_c,
            m_d,
            mode,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = &Pair> {
        self.pairs.iter()
    }

    pub fn pairs(&self) -> &[Pair] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// CSV dump: a comment line carrying the counts, then
    /// `t,u,same_class` rows.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "# m_c={} m_d={}", self.m_c, self.m_d)?;
        writeln!(out, "t,u,same_class")?;
        for p in &self.pairs {
            writeln!(out, "{},{},{}", p.t, p.u, u8::from(p.same_class))?;
        }
        Ok(())
    }
}

fn check_classes(dataset: &LabeledDataset) -> Result<()> {
    if dataset.num_classes() < 2 {
        return Err(SennsError::DegenerateClasses(
            "nearest-other-class pairs need at least two classes".to_string(),
        ));
    }
    for (class, &count) in dataset.class_counts().iter().enumerate() {
        if count == 0 {
            return Err(SennsError::DegenerateClasses(format!(
                "class {class} has no members"
            )));
        }
    }
    Ok(())
}

/// Indices of the nearest member of every class other than `t`'s own,
/// ascending by class id. Distance ties go to the lowest index.
fn nearest_other_class_for<F>(dataset: &LabeledDataset, t: usize, metric: &F) -> Result<Vec<usize>>
where
    F: Fn(&[f64], &[f64]) -> f64,
{
    let own = dataset.label(t);
    let mut nearest: Vec<Option<(f64, usize)>> = vec![None; dataset.num_classes()];
    for u in 0..dataset.len() {
        let class = dataset.label(u);
        if class == own {
            continue;
        }
        let d = metric(dataset.input(t), dataset.input(u));
        match nearest[class] {
            Some((best, _)) if best <= d => {}
            _ => nearest[class] = Some((d, u)),
        }
    }
    let mut out = Vec::with_capacity(dataset.num_classes() - 1);
    for (class, entry) in nearest.iter().enumerate() {
        if class == own {
            continue;
        }
        match entry {
            Some((_, u)) => out.push(*u),
            None => {
                return Err(SennsError::DegenerateClasses(format!(
                    "class {class} has no members"
                )))
            }
        }
    }
    Ok(out)
}

/// Indices of the (at most) k farthest same-class members of `t`, self
/// excluded, by descending distance; ties go to the lowest index.
fn farthest_same_class_for<F>(dataset: &LabeledDataset, t: usize, k: usize, metric: &F) -> Vec<usize>
where
    F: Fn(&[f64], &[f64]) -> f64,
{
    let own = dataset.label(t);
    let mut candidates: Vec<(f64, usize)> = (0..dataset.len())
        .filter(|&u| u != t && dataset.label(u) == own)
        .map(|u| (metric(dataset.input(t), dataset.input(u)), u))
        .collect();
    candidates.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    candidates.truncate(k);
    candidates.into_iter().map(|(_, u)| u).collect()
}

/// The nearest-member-of-each-other-class pairs for every example:
/// exactly `(N - 1) * m` pairs when every class is nonempty.
pub fn nearest_other_class_pairs<F>(dataset: &LabeledDataset, metric: F) -> Result<Vec<Pair>>
where
    F: Fn(&[f64], &[f64]) -> f64,
{
    check_classes(dataset)?;
    let mut pairs = Vec::new();
    for t in 0..dataset.len() {
        for u in nearest_other_class_for(dataset, t, &metric)? {
            pairs.push(Pair {
                t,
                u,
                same_class: false,
            });
        }
    }
    Ok(pairs)
}

/// The k-farthest-same-class pairs for every example: at most `k * m`
/// pairs; classes smaller than k + 1 simply yield fewer.
pub fn farthest_same_class_pairs<F>(dataset: &LabeledDataset, k: usize, metric: F) -> Vec<Pair>
where
    F: Fn(&[f64], &[f64]) -> f64,
{
    let mut pairs = Vec::new();
    for t in 0..dataset.len() {
        for u in farthest_same_class_for(dataset, t, k, &metric) {
            pairs.push(Pair {
                t,
                u,
                same_class: true,
            });
        }
    }
    pairs
}
