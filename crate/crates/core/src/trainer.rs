//! Full-batch gradient assembly, the descent loop, and the
//! finite-difference gradient oracle.
//!
//! One descent iteration computes
//!
//! - the weighted pairwise part: `sum_{(t,u)} s(t,u) * pair_gradient(t, u)`,
//! - the sparsity part: `(lambda3 / m) * sum_t l1_gradient(t)` (the
//!   factor applied exactly once),
//! - the decay part: `lambda4 * W` added to weight entries only; biases
//!   are not decayed,
//!
//! then steps every parameter by `-alpha * gradient`.
//!
//! Forward traces depend only on the current parameters, so they are
//! computed once per iteration and shared across the pair loop; the
//! no-cache form [`crate::backprop::grad_j1_pair`] gives identical
//! results and is cross-checked in tests.

use std::io::Write;

use rayon::prelude::*;

use crate::backprop::{grad_j1_pair_from_traces, GradientBuffer};
use crate::data::LabeledDataset;
use crate::error::{Result, SennsError};
use crate::grad_l1::grad_j2_from_trace;
use crate::network::{ForwardTrace, Network};
use crate::objective::{objective_value, s_weight_for, Hyperparams, ObjectiveValue};
use crate::pairs::PairList;

/// Pairs per parallel work unit. Chunk boundaries are fixed, so the
/// parallel reduction is deterministic for any worker count (though its
/// summation order differs from the sequential reference).
const PAIR_CHUNK: usize = 256;

/// Execution knobs for gradient assembly and training.
#[derive(Debug, Clone)]
pub struct TrainOptions {
    /// Accumulate pair gradients strictly in list order (the reference
    /// reduction order) instead of in parallel chunks.
    pub reproducible: bool,
    /// Halve the learning rate and retry whenever a step increases the
    /// objective. Off by default: plain fixed-rate descent.
    pub halve_on_increase: bool,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            reproducible: true,
            halve_on_increase: false,
        }
    }
}

/// Objective history and the final network from one training run.
#[derive(Debug, Clone)]
pub struct TrainReport {
    /// `history[0]` is the initial objective; one entry per iteration
    /// after that.
    pub history: Vec<ObjectiveValue>,
    pub network: Network,
    pub iterations_run: usize,
    pub converged: bool,
    pub seed: u64,
}

fn forward_all(net: &Network, dataset: &LabeledDataset) -> Result<Vec<ForwardTrace>> {
    dataset.inputs().iter().map(|x| net.forward(x)).collect()
}

/// Full objective gradient over the given pair list.
pub fn grad_total(
    net: &Network,
    dataset: &LabeledDataset,
    pairs: &PairList,
    hp: &Hyperparams,
) -> Result<GradientBuffer> {
    grad_total_with(net, dataset, pairs, hp, &TrainOptions::default())
}

/// [`grad_total`] with explicit execution options.
pub fn grad_total_with(
    net: &Network,
    dataset: &LabeledDataset,
    pairs: &PairList,
    hp: &Hyperparams,
    opts: &TrainOptions,
) -> Result<GradientBuffer> {
    hp.validate()?;
    let traces = forward_all(net, dataset)?;

    let mut grad = if opts.reproducible {
        let mut acc = GradientBuffer::zeros_like(net);
        for pair in pairs.iter() {
            if pair.t == pair.u {
                continue; // exact zero contribution
            }
            let s = s_weight_for(pair.same_class, hp, pairs.m_c, pairs.m_d)?;
            let g = grad_j1_pair_from_traces(net, &traces[pair.t], &traces[pair.u])?;
            acc.add_scaled(&g, s);
        }
        acc
    } else {
        let partials: Vec<Result<GradientBuffer>> = pairs
            .pairs()
            .par_chunks(PAIR_CHUNK)
            .map(|chunk| {
                let mut acc = GradientBuffer::zeros_like(net);
                for pair in chunk {
                    if pair.t == pair.u {
                        continue;
                    }
                    let s = s_weight_for(pair.same_class, hp, pairs.m_c, pairs.m_d)?;
                    let g = grad_j1_pair_from_traces(net, &traces[pair.t], &traces[pair.u])?;
                    acc.add_scaled(&g, s);
                }
                Ok(acc)
            })
            .collect();
        let mut acc = GradientBuffer::zeros_like(net);
        for partial in partials {
            acc.add_scaled(&partial?, 1.0);
        }
        acc
    };

    // Sparsity part: accumulate per-example gradients, then apply
    // lambda3 / m once.
    let mut sparsity = GradientBuffer::zeros_like(net);
    for trace in &traces {
        sparsity.add_scaled(&grad_j2_from_trace(net, trace), 1.0);
    }
    grad.add_scaled(&sparsity, hp.lambda3 / dataset.len() as f64);

    // Decay part: weights only.
    for l in 0..net.num_layers() - 1 {
        for (g, &w) in grad.dw[l].iter_mut().zip(net.layer_weights(l)) {
            *g += hp.lambda4 * w;
        }
    }
    Ok(grad)
}

/// One descent step: `W -= alpha * dW`, `b -= alpha * db`.
pub fn sgd_step(net: &Network, grad: &GradientBuffer, alpha: f64) -> Network {
    let mut next = net.clone();
    for l in 0..next.num_layers() - 1 {
        for (w, &g) in next.layer_weights_mut(l).iter_mut().zip(&grad.dw[l]) {
            *w -= alpha * g;
        }
        for (b, &g) in next.layer_biases_mut(l).iter_mut().zip(&grad.db[l]) {
            *b -= alpha * g;
        }
    }
    next
}

/// Runs full-batch gradient descent until the relative objective change
/// drops to `hp.tol` or `hp.max_iters` is reached.
pub fn train(
    net: Network,
    dataset: &LabeledDataset,
    pairs: &PairList,
    hp: &Hyperparams,
    seed: u64,
) -> Result<TrainReport> {
    train_with(net, dataset, pairs, hp, seed, &TrainOptions::default())
}

/// [`train`] with explicit execution options.
pub fn train_with(
    mut net: Network,
    dataset: &LabeledDataset,
    pairs: &PairList,
    hp: &Hyperparams,
    seed: u64,
    opts: &TrainOptions,
) -> Result<TrainReport> {
    hp.validate()?;
    let mut alpha = hp.alpha;
    let initial = objective_value(&net, dataset, pairs, hp)?;
    if !initial.j_total.is_finite() {
        return Err(SennsError::NonFinite {
            iteration: 0,
            what: "objective",
        });
    }
    let mut history = vec![initial];
    let mut iterations_run = 0;
    // The convergence test compares consecutive objective values; before
    // the first step there is nothing to compare, so the sentinel only
    // stops immediately when tol itself is infinite.
    let mut delta = f64::INFINITY;

    while iterations_run < hp.max_iters {
        if delta <= hp.tol {
            break;
        }
        let iteration = iterations_run + 1;
        let grad = grad_total_with(&net, dataset, pairs, hp, opts)?;
        if !grad.all_finite() {
            return Err(SennsError::NonFinite {
                iteration,
                what: "gradient",
            });
        }
        let prev = history.last().unwrap().j_total;
        let stepped = sgd_step(&net, &grad, alpha);
        let value = objective_value(&stepped, dataset, pairs, hp)?;
        if !value.j_total.is_finite() {
            return Err(SennsError::NonFinite {
                iteration,
                what: "objective",
            });
        }
        if opts.halve_on_increase && value.j_total > prev {
            // Reject the step, shrink the rate, and record the unchanged
            // objective for this iteration.
            alpha *= 0.5;
            history.push(*history.last().unwrap());
            delta = f64::INFINITY;
        } else {
            net = stepped;
            delta = (prev - value.j_total).abs() / prev.abs().max(1.0);
            history.push(value);
        }
        iterations_run += 1;
    }
    let converged = delta <= hp.tol;

    Ok(TrainReport {
        history,
        network: net,
        iterations_run,
        converged,
        seed,
    })
}

/// Central finite differences of the full objective over every
/// parameter: `(J(p + h) - J(p - h)) / 2h`.
///
/// Evaluates the objective through forward passes only, so it is
/// independent of every backpropagation path it is used to check.
pub fn finite_diff_grad(
    net: &Network,
    dataset: &LabeledDataset,
    pairs: &PairList,
    hp: &Hyperparams,
    h: f64,
) -> Result<GradientBuffer> {
    let mut work = net.clone();
    let mut buf = GradientBuffer::zeros_like(net);
    for coord in net.param_coords() {
        let orig = work.param(coord);
        work.set_param(coord, orig + h);
        let plus = objective_value(&work, dataset, pairs, hp)?.j_total;
        work.set_param(coord, orig - h);
        let minus = objective_value(&work, dataset, pairs, hp)?.j_total;
        work.set_param(coord, orig);
        buf.set_entry(coord, net, (plus - minus) / (2.0 * h));
    }
    Ok(buf)
}

/// Writes the per-iteration objective history as `iter,J,J1,J2,J3`.
pub fn write_telemetry_csv<W: Write>(report: &TrainReport, out: &mut W) -> std::io::Result<()> {
    writeln!(out, "iter,J,J1,J2,J3")?;
    for (i, v) in report.history.iter().enumerate() {
        writeln!(out, "{i},{},{},{},{}", v.j_total, v.j1, v.j2, v.j3)?;
    }
    Ok(())
}
