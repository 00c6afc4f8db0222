//! Gradient of the output-layer L1 norm `||a||_1` via signed deltas.
//!
//! This is ordinary backpropagation with one change at the output layer:
//! the error factor `(a_i - y_i)` of the squared loss is replaced by
//! `sign(a_i)`, giving the signed derivative
//! `beta_i = sign(a_i) * f'(z_i)`. The backward recursion and the
//! parameter formulas are untouched, so the machinery in
//! [`crate::backprop`] is shared.

use crate::backprop::{delta_stack, gradients_from_deltas, GradientBuffer};
use crate::error::Result;
use crate::network::{ForwardTrace, Network};

/// Subgradient sign: +1 for positive, -1 for negative, 0 at zero.
///
/// The zero case is a valid subgradient choice for `|.|` and is what the
/// backward pass uses at the kink.
pub fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Per-layer signed deltas `beta`, analogous to the usual scaled errors.
#[derive(Debug, Clone, PartialEq)]
pub struct SignedDeltaStack {
    /// `beta[l]` holds the signals for layer `l + 1`;
    /// `beta.last()` is `sign(a_i) * f'(z_i)` at the output.
    pub beta: Vec<Vec<f64>>,
}

impl SignedDeltaStack {
    pub fn compute(net: &Network, trace: &ForwardTrace) -> Self {
        let factor: Vec<f64> = trace.output_activations().iter().map(|&a| sign(a)).collect();
        Self {
            beta: delta_stack(net, trace, &factor),
        }
    }
}

/// Gradient of `||a_out||_1` with respect to all weights and biases for
/// one input vector.
pub fn grad_j2_single(net: &Network, x: &[f64]) -> Result<GradientBuffer> {
    let trace = net.forward(x)?;
    Ok(grad_j2_from_trace(net, &trace))
}

/// Same as [`grad_j2_single`] with the forward pass already done.
pub fn grad_j2_from_trace(net: &Network, trace: &ForwardTrace) -> GradientBuffer {
    let stack = SignedDeltaStack::compute(net, trace);
    gradients_from_deltas(net, trace, &stack.beta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backprop::backprop_sq;
    use crate::network::{default_transfers, TransferKind};

    #[test]
    fn sign_cases() {
        assert_eq!(sign(2.5), 1.0);
        assert_eq!(sign(-0.3), -1.0);
        assert_eq!(sign(0.0), 0.0);
    }

    #[test]
    fn single_linear_layer_by_hand() {
        // a = 3, beta = sign(3) * 1 = 1, dW = beta * x = 3, db = 1.
        let mut net = Network::zeros(&[1, 1], &[TransferKind::Linear]).unwrap();
        net.layer_weights_mut(0)[0] = 1.0;
        let grad = grad_j2_single(&net, &[3.0]).unwrap();
        assert_eq!(grad.dw[0][0], 3.0);
        assert_eq!(grad.db[0][0], 1.0);
    }

    #[test]
    fn sigmoid_output_at_zero_weights_by_hand() {
        // a = 0.5, f' = 0.25, beta = 0.25, dW = 0.25 * 2 = 0.5, db = 0.25.
        let net = Network::zeros(&[1, 1], &[TransferKind::Sigmoid]).unwrap();
        let grad = grad_j2_single(&net, &[2.0]).unwrap();
        assert_eq!(grad.dw[0][0], 0.5);
        assert_eq!(grad.db[0][0], 0.25);
    }

    #[test]
    fn zero_outputs_give_zero_gradient() {
        // Linear output of an all-zero net is exactly 0; sign(0) = 0
        // kills the whole backward pass.
        let net = Network::zeros(&[2, 3, 2], &default_transfers(2)).unwrap();
        let grad = grad_j2_single(&net, &[1.0, -2.0]).unwrap();
        assert!(grad.dw.iter().all(|v| v.iter().all(|&x| x == 0.0)));
        assert!(grad.db.iter().all(|v| v.iter().all(|&x| x == 0.0)));
        // Asserted directly: this is the subgradient choice at the kink,
        // not something finite differences can confirm.
    }

    #[test]
    fn output_beta_matches_its_definition() {
        let net = Network::init_random(&[2, 3, 2], &default_transfers(2), 17).unwrap();
        let trace = net.forward(&[0.9, -0.4]).unwrap();
        let stack = SignedDeltaStack::compute(&net, &trace);
        let last = net.num_layers() - 2;
        for (i, &b) in stack.beta[last].iter().enumerate() {
            let a = trace.output_activations()[i];
            let z = trace.pre_activations(last)[i];
            assert_eq!(b, sign(a) * net.transfer()[last].derivative(z));
        }
    }

    #[test]
    fn replacing_sign_with_error_factor_reproduces_squared_loss_backprop() {
        // The signed pass differs from the squared-loss pass only in the
        // output factor; injecting (a - y) must reproduce backprop_sq
        // bit for bit.
        let net = Network::init_random(&[3, 4, 2], &default_transfers(2), 29).unwrap();
        let trace = net.forward(&[0.2, -0.8, 0.5]).unwrap();
        let target = [0.1, 0.6];
        let factor: Vec<f64> = trace
            .output_activations()
            .iter()
            .zip(&target)
            .map(|(&a, &y)| a - y)
            .collect();
        let deltas = delta_stack(&net, &trace, &factor);
        let injected = gradients_from_deltas(&net, &trace, &deltas);
        let reference = backprop_sq(&net, &trace, &target).unwrap();
        assert_eq!(injected, reference);
    }

    #[test]
    fn matches_finite_differences_away_from_the_kink() {
        let net = Network::init_random(&[2, 3, 2], &default_transfers(2), 71).unwrap();
        let x = [1.2, -0.7];
        let trace = net.forward(&x).unwrap();
        let min_abs = trace
            .output_activations()
            .iter()
            .map(|a| a.abs())
            .fold(f64::INFINITY, f64::min);
        assert!(min_abs > 1e-3, "test point too close to the kink");

        let grad = grad_j2_single(&net, &x).unwrap();
        let value = |net: &Network| {
            net.forward(&x)
                .unwrap()
                .output_activations()
                .iter()
                .map(|a| a.abs())
                .sum::<f64>()
        };
        let h = 1e-5;
        let mut work = net.clone();
        let mut numeric = GradientBuffer::zeros_like(&net);
        for coord in net.param_coords() {
            let orig = work.param(coord);
            work.set_param(coord, orig + h);
            let plus = value(&work);
            work.set_param(coord, orig - h);
            let minus = value(&work);
            work.set_param(coord, orig);
            numeric.set_entry(coord, &net, (plus - minus) / (2.0 * h));
        }
        let (err, coord) = grad.max_relative_error(&numeric, &net);
        assert!(err <= 1e-6, "relative error {err} at {coord}");
    }

    #[test]
    fn final_layer_gradient_invariant_under_positive_scaling() {
        // With a linear output layer, scaling the last W and b by g > 0
        // scales outputs by g: signs are unchanged (nothing crosses
        // zero), f' stays 1, and a_(pre-final) is untouched, so the
        // final-layer dW must not move.
        let net = Network::init_random(&[2, 3, 2], &default_transfers(2), 83).unwrap();
        let x = [0.4, 0.9];
        let base = grad_j2_single(&net, &x).unwrap();

        let mut scaled = net.clone();
        for w in scaled.layer_weights_mut(1) {
            *w *= 3.0;
        }
        for b in scaled.layer_biases_mut(1) {
            *b *= 3.0;
        }
        let out_before = net.forward(&x).unwrap();
        let out_after = scaled.forward(&x).unwrap();
        for (&a, &b) in out_before
            .output_activations()
            .iter()
            .zip(out_after.output_activations())
        {
            assert_eq!(sign(a), sign(b), "scaling must not flip any output sign");
        }

        let grad = grad_j2_single(&scaled, &x).unwrap();
        assert_eq!(base.dw[1], grad.dw[1]);
        assert_eq!(base.db[1], grad.db[1]);
    }
}
