//! Standard backpropagation for squared-distance-to-constant losses
//! `B(a; c) = 1/2 ||a - c||^2`, and the pairwise gradient assembled from
//! two such passes.
//!
//! The pairwise term `1/2 ||a_t - a_u||^2` depends on the parameters
//! through both outputs. Its exact gradient is the sum of two ordinary
//! backprop results: one that treats the pass for `x_t` as live and the
//! output for `x_u` as a constant target, and one with the roles swapped.

use crate::error::{Result, SennsError};
use crate::network::{ForwardTrace, Network, ParamCoord};

/// Per-layer parameter gradients, shaped exactly like a [`Network`].
#[derive(Debug, Clone, PartialEq)]
pub struct GradientBuffer {
    /// `dw[l]` is row-major with the shape of `net.layer_weights(l)`.
    pub dw: Vec<Vec<f64>>,
    /// `db[l]` has the length of `net.layer_biases(l)`.
    pub db: Vec<Vec<f64>>,
}

impl GradientBuffer {
    pub fn zeros_like(net: &Network) -> Self {
        Self {
            dw: (0..net.num_layers() - 1)
                .map(|l| vec![0.0; net.layer_weights(l).len()])
                .collect(),
            db: (0..net.num_layers() - 1)
                .map(|l| vec![0.0; net.layer_biases(l).len()])
                .collect(),
        }
    }

    /// `self += factor * other`.
    pub fn add_scaled(&mut self, other: &Self, factor: f64) {
        for (mine, theirs) in self.dw.iter_mut().zip(&other.dw) {
            for (m, t) in mine.iter_mut().zip(theirs) {
                *m += factor * t;
            }
        }
        for (mine, theirs) in self.db.iter_mut().zip(&other.db) {
            for (m, t) in mine.iter_mut().zip(theirs) {
                *m += factor * t;
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for v in self.dw.iter_mut().chain(self.db.iter_mut()) {
            for x in v.iter_mut() {
                *x *= factor;
            }
        }
    }

    pub fn negate(&mut self) {
        self.scale(-1.0);
    }

    pub fn all_finite(&self) -> bool {
        self.dw
            .iter()
            .chain(self.db.iter())
            .all(|v| v.iter().all(|x| x.is_finite()))
    }

    pub fn entry(&self, coord: ParamCoord, net: &Network) -> f64 {
        match coord {
            ParamCoord::Weight { layer, row, col } => {
                self.dw[layer][row * net.layer_sizes()[layer] + col]
            }
            ParamCoord::Bias { layer, index } => self.db[layer][index],
        }
    }

    pub fn set_entry(&mut self, coord: ParamCoord, net: &Network, value: f64) {
        match coord {
            ParamCoord::Weight { layer, row, col } => {
                self.dw[layer][row * net.layer_sizes()[layer] + col] = value;
            }
            ParamCoord::Bias { layer, index } => self.db[layer][index] = value,
        }
    }

    /// Largest per-coordinate relative error against `other`, with the
    /// offending coordinate.
    ///
    /// Relative error is `|a - b| / max(|a|, |b|, 1)`; the unit floor
    /// keeps near-zero coordinates from inflating the metric while still
    /// catching sign and scale mistakes.
    pub fn max_relative_error(&self, other: &Self, net: &Network) -> (f64, ParamCoord) {
        let mut worst = 0.0;
        let mut worst_coord = ParamCoord::Bias { layer: 0, index: 0 };
        for coord in net.param_coords() {
            let a = self.entry(coord, net);
            let b = other.entry(coord, net);
            let rel = (a - b).abs() / a.abs().max(b.abs()).max(1.0);
            if rel > worst {
                worst = rel;
                worst_coord = coord;
            }
        }
        (worst, worst_coord)
    }
}

fn check_trace(net: &Network, trace: &ForwardTrace) -> Result<()> {
    if trace.num_layers() != net.num_layers()
        || trace.output_activations().len() != net.output_dim()
    {
        return Err(SennsError::DimensionMismatch {
            expected: net.num_layers(),
            actual: trace.num_layers(),
            context: "forward trace layers",
        });
    }
    Ok(())
}

/// Backward recursion of per-layer error signals.
///
/// `output_factor[i]` is d(loss)/d(a_i) at the output layer; the returned
/// `deltas[l]` holds the signals for layer `l + 1`, after multiplying by
/// the transfer derivative at each layer:
///
/// - output: `delta_i = output_factor_i * f'(z_i)`
/// - inner:  `delta^(l)_i = (sum_p delta^(l+1)_p W^(l+1)_pi) * f'(z^(l)_i)`
pub(crate) fn delta_stack(
    net: &Network,
    trace: &ForwardTrace,
    output_factor: &[f64],
) -> Vec<Vec<f64>> {
    let sizes = net.layer_sizes();
    let last = sizes.len() - 2;
    let mut deltas: Vec<Vec<f64>> = vec![Vec::new(); last + 1];
    deltas[last] = output_factor
        .iter()
        .zip(trace.pre_activations(last))
        .map(|(&g, &z)| g * net.transfer()[last].derivative(z))
        .collect();
    for l in (0..last).rev() {
        let n_in = sizes[l + 1];
        let w = net.layer_weights(l + 1);
        let mut d = vec![0.0; n_in];
        for (p, &dp) in deltas[l + 1].iter().enumerate() {
            for (di, wpi) in d.iter_mut().zip(&w[p * n_in..(p + 1) * n_in]) {
                *di += dp * wpi;
            }
        }
        for (di, &zi) in d.iter_mut().zip(trace.pre_activations(l)) {
            *di *= net.transfer()[l].derivative(zi);
        }
        deltas[l] = d;
    }
    deltas
}

/// Parameter gradients from a delta stack:
/// `dW^(l)_ij = delta^(l+1)_i a^(l)_j`, `db^(l)_i = delta^(l+1)_i`.
pub(crate) fn gradients_from_deltas(
    net: &Network,
    trace: &ForwardTrace,
    deltas: &[Vec<f64>],
) -> GradientBuffer {
    let mut grad = GradientBuffer::zeros_like(net);
    for l in 0..net.num_layers() - 1 {
        let n_in = net.layer_sizes()[l];
        let below = trace.activations(l);
        for (i, &di) in deltas[l].iter().enumerate() {
            for (g, &aj) in grad.dw[l][i * n_in..(i + 1) * n_in].iter_mut().zip(below) {
                *g = di * aj;
            }
        }
        grad.db[l].copy_from_slice(&deltas[l]);
    }
    grad
}

/// Gradient of `1/2 ||a - target||^2` with respect to all weights and
/// biases, with `target` held constant.
pub fn backprop_sq(net: &Network, trace: &ForwardTrace, target: &[f64]) -> Result<GradientBuffer> {
    check_trace(net, trace)?;
    if target.len() != net.output_dim() {
        return Err(SennsError::DimensionMismatch {
            expected: net.output_dim(),
            actual: target.len(),
            context: "backprop target",
        });
    }
    let factor: Vec<f64> = trace
        .output_activations()
        .iter()
        .zip(target)
        .map(|(&a, &c)| a - c)
        .collect();
    let deltas = delta_stack(net, trace, &factor);
    Ok(gradients_from_deltas(net, trace, &deltas))
}

/// Gradient of the pairwise squared distance `1/2 ||a_t - a_u||^2`,
/// running both forward passes itself.
pub fn grad_j1_pair(net: &Network, x_t: &[f64], x_u: &[f64]) -> Result<GradientBuffer> {
    let trace_t = net.forward(x_t)?;
    let trace_u = net.forward(x_u)?;
    grad_j1_pair_from_traces(net, &trace_t, &trace_u)
}

/// Same as [`grad_j1_pair`] with the forward passes already done.
///
/// Activations depend only on the current parameters, so traces computed
/// once per descent iteration can be reused across the whole pair loop;
/// the result is identical to the recomputing form.
pub fn grad_j1_pair_from_traces(
    net: &Network,
    trace_t: &ForwardTrace,
    trace_u: &ForwardTrace,
) -> Result<GradientBuffer> {
    let mut grad = backprop_sq(net, trace_t, trace_u.output_activations())?;
    let second = backprop_sq(net, trace_u, trace_t.output_activations())?;
    grad.add_scaled(&second, 1.0);
    Ok(grad)
}
