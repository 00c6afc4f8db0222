//! Dense feedforward network: parameter storage, forward passes, seeded
//! initialization, and the line-oriented model file format.
//!
//! Layers are numbered 0..n_layers internally, with layer 0 the input.
//! `weights[l]` maps activations of layer `l` to pre-activations of layer
//! `l + 1` and is stored row-major with shape
//! `(layer_sizes[l + 1], layer_sizes[l])`. `transfer[l]` is the transfer
//! function of layer `l + 1`; the input layer has none.
//!
//! All arithmetic is `f64`: the gradient checks elsewhere in this crate
//! need the headroom.

use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Result, SennsError};

/// First line of every model file.
pub const MODEL_MAGIC: &str = "SENNS-MODEL v1";

/// Element-wise transfer function of a non-input layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransferKind {
    Sigmoid,
    Tanh,
    Linear,
}

impl TransferKind {
    /// f(z).
    pub fn eval(self, z: f64) -> f64 {
        match self {
            TransferKind::Sigmoid => 1.0 / (1.0 + (-z).exp()),
            TransferKind::Tanh => z.tanh(),
            TransferKind::Linear => z,
        }
    }

    /// f'(z). Total: defined for every finite `z`.
    pub fn derivative(self, z: f64) -> f64 {
        match self {
            TransferKind::Sigmoid => {
                let s = self.eval(z);
                s * (1.0 - s)
            }
            TransferKind::Tanh => {
                let t = z.tanh();
                1.0 - t * t
            }
            TransferKind::Linear => 1.0,
        }
    }

    /// Name used in model files and CLI flags.
    pub fn name(self) -> &'static str {
        match self {
            TransferKind::Sigmoid => "sigmoid",
            TransferKind::Tanh => "tanh",
            TransferKind::Linear => "linear",
        }
    }
}

impl fmt::Display for TransferKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TransferKind {
    type Err = SennsError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sigmoid" => Ok(TransferKind::Sigmoid),
            "tanh" => Ok(TransferKind::Tanh),
            "linear" => Ok(TransferKind::Linear),
            other => Err(SennsError::InvalidArchitecture(format!(
                "unknown transfer kind {other:?} (expected sigmoid|tanh|linear)"
            ))),
        }
    }
}

/// Default transfer stack: tanh hidden layers, linear output.
///
/// A linear output keeps features unbounded in both signs, so the output
/// sparsity penalty can actually drive values to zero rather than merely
/// shrinking a strictly positive activation.
pub fn default_transfers(non_input_layers: usize) -> Vec<TransferKind> {
    (0..non_input_layers)
        .map(|i| {
            if i + 1 == non_input_layers {
                TransferKind::Linear
            } else {
                TransferKind::Tanh
            }
        })
        .collect()
}

/// Addresses one scalar parameter of a [`Network`].
///
/// `layer` is the 0-based index of the weight matrix / bias vector, i.e.
/// the connection from layer `layer` into layer `layer + 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamCoord {
    Weight { layer: usize, row: usize, col: usize },
    Bias { layer: usize, index: usize },
}

impl fmt::Display for ParamCoord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamCoord::Weight { layer, row, col } => {
                write!(f, "W[layer {}][{row}][{col}]", layer + 1)
            }
            ParamCoord::Bias { layer, index } => write!(f, "b[layer {}][{index}]", layer + 1),
        }
    }
}

/// A dense feedforward network.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    layer_sizes: Vec<usize>,
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
    transfer: Vec<TransferKind>,
}

impl Network {
    /// All-zero parameters.
    pub fn zeros(layer_sizes: &[usize], transfer: &[TransferKind]) -> Result<Self> {
        check_architecture(layer_sizes, transfer)?;
        let weights = (0..layer_sizes.len() - 1)
            .map(|l| vec![0.0; layer_sizes[l + 1] * layer_sizes[l]])
            .collect();
        let biases = (0..layer_sizes.len() - 1)
            .map(|l| vec![0.0; layer_sizes[l + 1]])
            .collect();
        Ok(Self {
            layer_sizes: layer_sizes.to_vec(),
            weights,
            biases,
            transfer: transfer.to_vec(),
        })
    }

    /// Weights drawn uniformly from `[-r, r]` with `r = 1/sqrt(fan_in)`
    /// per layer; biases zero. Deterministic given `seed`.
    pub fn init_random(layer_sizes: &[usize], transfer: &[TransferKind], seed: u64) -> Result<Self> {
        let mut net = Self::zeros(layer_sizes, transfer)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for l in 0..net.weights.len() {
            let r = 1.0 / (layer_sizes[l] as f64).sqrt();
            for w in &mut net.weights[l] {
                *w = rng.random_range(-r..=r);
            }
        }
        Ok(net)
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn num_layers(&self) -> usize {
        self.layer_sizes.len()
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    pub fn transfer(&self) -> &[TransferKind] {
        &self.transfer
    }

    /// Row-major weights of the connection `l -> l + 1`.
    pub fn layer_weights(&self, l: usize) -> &[f64] {
        &self.weights[l]
    }

    pub fn layer_biases(&self, l: usize) -> &[f64] {
        &self.biases[l]
    }

    pub fn layer_weights_mut(&mut self, l: usize) -> &mut [f64] {
        &mut self.weights[l]
    }

    pub fn layer_biases_mut(&mut self, l: usize) -> &mut [f64] {
        &mut self.biases[l]
    }

    /// Enumerates every parameter coordinate: per layer, weights
    /// row-major, then biases.
    pub fn param_coords(&self) -> impl Iterator<Item = ParamCoord> + '_ {
        (0..self.weights.len()).flat_map(move |l| {
            let (rows, cols) = (self.layer_sizes[l + 1], self.layer_sizes[l]);
            let ws = (0..rows).flat_map(move |row| {
                (0..cols).map(move |col| ParamCoord::Weight { layer: l, row, col })
            });
            let bs = (0..rows).map(move |index| ParamCoord::Bias { layer: l, index });
            ws.chain(bs)
        })
    }

    pub fn param(&self, coord: ParamCoord) -> f64 {
        match coord {
            ParamCoord::Weight { layer, row, col } => {
                self.weights[layer][row * self.layer_sizes[layer] + col]
            }
            ParamCoord::Bias { layer, index } => self.biases[layer][index],
        }
    }

    pub fn set_param(&mut self, coord: ParamCoord, value: f64) {
        match coord {
            ParamCoord::Weight { layer, row, col } => {
                self.weights[layer][row * self.layer_sizes[layer] + col] = value;
            }
            ParamCoord::Bias { layer, index } => self.biases[layer][index] = value,
        }
    }

    /// Sum of squared weights (biases excluded).
    pub fn sum_squared_weights(&self) -> f64 {
        self.weights
            .iter()
            .flat_map(|w| w.iter())
            .map(|&w| w * w)
            .sum()
    }

    /// Checks that every parameter is finite.
    pub fn all_finite(&self) -> bool {
        self.weights
            .iter()
            .chain(self.biases.iter())
            .all(|v| v.iter().all(|x| x.is_finite()))
    }

    /// Forward pass: `z^(l+1) = W^(l) a^(l) + b^(l)`, `a^(l+1) = f(z^(l+1))`.
    pub fn forward(&self, x: &[f64]) -> Result<ForwardTrace> {
        if x.len() != self.input_dim() {
            return Err(SennsError::DimensionMismatch {
                expected: self.input_dim(),
                actual: x.len(),
                context: "network input",
            });
        }
        let n = self.num_layers();
        let mut a: Vec<Vec<f64>> = Vec::with_capacity(n);
        let mut z: Vec<Vec<f64>> = Vec::with_capacity(n - 1);
        a.push(x.to_vec());
        for l in 0..n - 1 {
            let (n_in, n_out) = (self.layer_sizes[l], self.layer_sizes[l + 1]);
            let prev = &a[l];
            let w = &self.weights[l];
            let mut pre = vec![0.0; n_out];
            for (i, zi) in pre.iter_mut().enumerate() {
                let mut acc = self.biases[l][i];
                for (wij, aj) in w[i * n_in..(i + 1) * n_in].iter().zip(prev) {
                    acc += wij * aj;
                }
                *zi = acc;
            }
            let act = pre.iter().map(|&v| self.transfer[l].eval(v)).collect();
            z.push(pre);
            a.push(act);
        }
        Ok(ForwardTrace { a, z })
    }

    /// Writes the model in the versioned text format.
    ///
    /// Numbers use Rust's shortest round-trippable `f64` formatting, so
    /// serialize/deserialize is bit-exact.
    pub fn write_model<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "{MODEL_MAGIC}")?;
        writeln!(out, "{}", join_display(&self.layer_sizes))?;
        writeln!(
            out,
            "{}",
            self.transfer
                .iter()
                .map(|t| t.name())
                .collect::<Vec<_>>()
                .join(" ")
        )?;
        for l in 0..self.weights.len() {
            let (rows, cols) = (self.layer_sizes[l + 1], self.layer_sizes[l]);
            writeln!(out, "W {}", l + 1)?;
            for i in 0..rows {
                writeln!(out, "{}", join_display(&self.weights[l][i * cols..(i + 1) * cols]))?;
            }
            writeln!(out, "b {}", l + 1)?;
            writeln!(out, "{}", join_display(&self.biases[l]))?;
        }
        Ok(())
    }

    /// Parses a model stream written by [`Network::write_model`].
    pub fn read_model<R: BufRead>(input: R) -> Result<Self> {
        let mut reader = LineReader::new(input);

        let magic = reader.next_line("version header")?;
        if magic != MODEL_MAGIC {
            return Err(SennsError::ModelVersion {
                expected: MODEL_MAGIC.to_string(),
                found: magic,
            });
        }

        let sizes_line = reader.next_line("layer sizes")?;
        let layer_sizes: Vec<usize> = sizes_line
            .split_whitespace()
            .map(|tok| {
                tok.parse::<usize>().map_err(|_| SennsError::ModelParse {
                    line: reader.line_no,
                    token: tok.to_string(),
                })
            })
            .collect::<Result<_>>()?;

        let transfer_line = reader.next_line("transfer kinds")?;
        let transfer: Vec<TransferKind> = transfer_line
            .split_whitespace()
            .map(TransferKind::from_str)
            .collect::<Result<_>>()?;

        check_architecture(&layer_sizes, &transfer)
            .map_err(|e| SennsError::ModelShape(e.to_string()))?;

        let mut net = Self::zeros(&layer_sizes, &transfer)?;
        for l in 0..layer_sizes.len() - 1 {
            let (rows, cols) = (layer_sizes[l + 1], layer_sizes[l]);
            let header = reader.next_line("weight block header")?;
            if header != format!("W {}", l + 1) {
                return Err(SennsError::ModelShape(format!(
                    "expected weight header \"W {}\", found {header:?}",
                    l + 1
                )));
            }
            for i in 0..rows {
                let row = reader.parse_row(cols, "weight row")?;
                net.weights[l][i * cols..(i + 1) * cols].copy_from_slice(&row);
            }
            let header = reader.next_line("bias block header")?;
            if header != format!("b {}", l + 1) {
                return Err(SennsError::ModelShape(format!(
                    "expected bias header \"b {}\", found {header:?}",
                    l + 1
                )));
            }
            let row = reader.parse_row(rows, "bias row")?;
            net.biases[l].copy_from_slice(&row);
        }
        if let Some(extra) = reader.next_nonempty() {
            return Err(SennsError::ModelShape(format!(
                "unexpected trailing content: {extra:?}"
            )));
        }
        if !net.all_finite() {
            return Err(SennsError::ModelShape(
                "model contains non-finite parameters".to_string(),
            ));
        }
        Ok(net)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = BufWriter::new(File::create(path)?);
        self.write_model(&mut out)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_model(BufReader::new(File::open(path)?))
    }
}

fn check_architecture(layer_sizes: &[usize], transfer: &[TransferKind]) -> Result<()> {
    if layer_sizes.len() < 2 {
        return Err(SennsError::InvalidArchitecture(format!(
            "need at least 2 layers, got {}",
            layer_sizes.len()
        )));
    }
    if let Some(pos) = layer_sizes.iter().position(|&s| s == 0) {
        return Err(SennsError::InvalidArchitecture(format!(
            "layer {pos} has size 0"
        )));
    }
    if transfer.len() != layer_sizes.len() - 1 {
        return Err(SennsError::InvalidArchitecture(format!(
            "{} layers need {} transfer kinds, got {}",
            layer_sizes.len(),
            layer_sizes.len() - 1,
            transfer.len()
        )));
    }
    Ok(())
}

fn join_display<T: fmt::Display>(items: &[T]) -> String {
    items
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(" ")
}

struct LineReader<R: BufRead> {
    input: R,
    line_no: usize,
}

impl<R: BufRead> LineReader<R> {
    fn new(input: R) -> Self {
        Self { input, line_no: 0 }
    }

    fn next_line(&mut self, what: &str) -> Result<String> {
        let mut buf = String::new();
        loop {
            buf.clear();
            let n = self.input.read_line(&mut buf)?;
            if n == 0 {
                return Err(SennsError::ModelTruncated(what.to_string()));
            }
            self.line_no += 1;
            let trimmed = buf.trim_end_matches(['\n', '\r']);
            if !trimmed.trim().is_empty() {
                return Ok(trimmed.to_string());
            }
        }
    }

    fn next_nonempty(&mut self) -> Option<String> {
        let mut buf = String::new();
        loop {
            buf.clear();
            match self.input.read_line(&mut buf) {
                Ok(0) | Err(_) => return None,
                Ok(_) => {
                    self.line_no += 1;
                    let t = buf.trim();
                    if !t.is_empty() {
                        return Some(t.to_string());
                    }
                }
            }
        }
    }

    fn parse_row(&mut self, expected: usize, what: &str) -> Result<Vec<f64>> {
        let line = self.next_line(what)?;
        let row: Vec<f64> = line
            .split_whitespace()
            .map(|tok| {
                tok.parse::<f64>().map_err(|_| SennsError::ModelParse {
                    line: self.line_no,
                    token: tok.to_string(),
                })
            })
            .collect::<Result<_>>()?;
        if row.len() != expected {
            return Err(SennsError::ModelShape(format!(
                "line {}: expected {expected} values in {what}, got {}",
                self.line_no,
                row.len()
            )));
        }
        Ok(row)
    }
}

/// Per-layer pre-activations and activations from one forward pass.
///
/// `activations(0)` is the input itself; `pre_activations(l)` pairs with
/// `activations(l + 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace {
    a: Vec<Vec<f64>>,
    z: Vec<Vec<f64>>,
}

impl ForwardTrace {
    pub fn num_layers(&self) -> usize {
        self.a.len()
    }

    pub fn input(&self) -> &[f64] {
        &self.a[0]
    }

    /// Activations of layer `l` (0 = input).
    pub fn activations(&self, l: usize) -> &[f64] {
        &self.a[l]
    }

    /// Pre-activations feeding layer `l + 1`.
    pub fn pre_activations(&self, l: usize) -> &[f64] {
        &self.z[l]
    }

    /// Output-layer activations.
    pub fn output_activations(&self) -> &[f64] {
        self.a.last().unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_sigmoid_net_outputs_half_everywhere() {
        let net = Network::zeros(&[3, 4, 2], &[TransferKind::Sigmoid, TransferKind::Sigmoid])
            .unwrap();
        let trace = net.forward(&[0.7, -1.3, 2.0]).unwrap();
        for l in 1..net.num_layers() {
            for &a in trace.activations(l) {
                assert_eq!(a, 0.5);
            }
        }
        assert_eq!(trace.output_activations(), &[0.5, 0.5]);
    }

    #[test]
    fn single_linear_layer_is_identity_with_unit_weight() {
        let mut net = Network::zeros(&[1, 1], &[TransferKind::Linear]).unwrap();
        net.layer_weights_mut(0)[0] = 1.0;
        let trace = net.forward(&[3.0]).unwrap();
        assert_eq!(trace.output_activations(), &[3.0]);
    }

    /// Independent straight-line forward evaluation used as an oracle.
    fn straight_line_forward_2_2_1(net: &Network, x: &[f64]) -> f64 {
        let w0 = net.layer_weights(0);
        let b0 = net.layer_biases(0);
        let w1 = net.layer_weights(1);
        let b1 = net.layer_biases(1);
        let z1_0 = w0[0] * x[0] + w0[1] * x[1] + b0[0];
        let z1_1 = w0[2] * x[0] + w0[3] * x[1] + b0[1];
        let a1_0 = z1_0.tanh();
        let a1_1 = z1_1.tanh();
        let z2_0 = w1[0] * a1_0 + w1[1] * a1_1 + b1[0];
        z2_0.tanh()
    }

    #[test]
    fn forward_matches_straight_line_reimplementation() {
        let net = Network::init_random(&[2, 2, 1], &[TransferKind::Tanh, TransferKind::Tanh], 99)
            .unwrap();
        for x in [[0.1, -0.4], [1.5, 2.5], [-3.0, 0.0]] {
            let trace = net.forward(&x).unwrap();
            let expected = straight_line_forward_2_2_1(&net, &x);
            assert!((trace.output_activations()[0] - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn forward_rejects_wrong_input_length() {
        let net = Network::zeros(&[3, 2], &[TransferKind::Tanh]).unwrap();
        match net.forward(&[1.0, 2.0]) {
            Err(SennsError::DimensionMismatch {
                expected: 3,
                actual: 2,
                ..
            }) => {}
            other => panic!("expected dimension mismatch, got {other:?}"),
        }
    }

    #[test]
    fn forward_is_deterministic() {
        let net = Network::init_random(&[2, 3, 2], &default_transfers(2), 5).unwrap();
        let a = net.forward(&[0.3, -0.8]).unwrap();
        let b = net.forward(&[0.3, -0.8]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn init_same_seed_is_bit_identical() {
        let t = default_transfers(2);
        let a = Network::init_random(&[4, 3, 2], &t, 42).unwrap();
        let b = Network::init_random(&[4, 3, 2], &t, 42).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn init_different_seeds_differ() {
        let t = default_transfers(2);
        let a = Network::init_random(&[4, 3, 2], &t, 1).unwrap();
        let b = Network::init_random(&[4, 3, 2], &t, 2).unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn init_respects_fan_in_bound() {
        let net = Network::init_random(&[4, 6], &[TransferKind::Tanh], 7).unwrap();
        for &w in net.layer_weights(0) {
            assert!(w.abs() <= 0.5, "fan_in=4 gives r=0.5, got {w}");
        }
        assert!(net.layer_biases(0).iter().all(|&b| b == 0.0));
    }

    #[test]
    fn init_rejects_zero_layer_size() {
        assert!(Network::init_random(&[2, 0, 1], &default_transfers(2), 0).is_err());
    }

    #[test]
    fn model_round_trip_is_bit_exact() {
        let net =
            Network::init_random(&[3, 4, 2], &default_transfers(2), 123).unwrap();
        let mut buf = Vec::new();
        net.write_model(&mut buf).unwrap();
        let back = Network::read_model(buf.as_slice()).unwrap();
        assert_eq!(net, back);
    }

    #[test]
    fn corrupted_magic_is_a_version_error() {
        let text = "SENNS-MODEL v9\n1 1\nlinear\nW 1\n2\nb 1\n1\n";
        match Network::read_model(text.as_bytes()) {
            Err(SennsError::ModelVersion { .. }) => {}
            other => panic!("expected version error, got {other:?}"),
        }
    }

    #[test]
    fn truncated_stream_is_a_truncation_error() {
        let text = "SENNS-MODEL v1\n2 2\ntanh\nW 1\n0.5 0.5\n";
        match Network::read_model(text.as_bytes()) {
            Err(SennsError::ModelTruncated(_)) => {}
            other => panic!("expected truncation error, got {other:?}"),
        }
    }

    #[test]
    fn inconsistent_shape_is_a_shape_error() {
        let text = "SENNS-MODEL v1\n2 2\ntanh\nW 1\n0.5 0.5 0.5\n0.5 0.5\nb 1\n0 0\n";
        match Network::read_model(text.as_bytes()) {
            Err(SennsError::ModelShape(_)) => {}
            other => panic!("expected shape error, got {other:?}"),
        }
    }

    #[test]
    fn hand_written_minimal_model_computes_affine_map() {
        let text = "SENNS-MODEL v1\n1 1\nlinear\nW 1\n2\nb 1\n1\n";
        let net = Network::read_model(text.as_bytes()).unwrap();
        let trace = net.forward(&[3.0]).unwrap();
        assert_eq!(trace.output_activations(), &[7.0]);
    }

    #[test]
    fn transfer_derivatives_match_central_differences() {
        let h = 1e-5;
        for kind in [TransferKind::Sigmoid, TransferKind::Tanh, TransferKind::Linear] {
            let mut z = -4.0;
            while z <= 4.0 {
                let numeric = (kind.eval(z + h) - kind.eval(z - h)) / (2.0 * h);
                assert!(
                    (kind.derivative(z) - numeric).abs() <= 1e-6,
                    "{kind} at z={z}"
                );
                z += 0.125;
            }
        }
    }

    #[test]
    fn param_coords_cover_every_parameter_once() {
        let net = Network::init_random(&[2, 3, 2], &default_transfers(2), 3).unwrap();
        let coords: Vec<_> = net.param_coords().collect();
        let expected = 2 * 3 + 3 + 3 * 2 + 2;
        assert_eq!(coords.len(), expected);
        let mut net2 = net.clone();
        for c in &coords {
            net2.set_param(*c, net2.param(*c) + 1.0);
        }
        for c in &coords {
            assert_eq!(net2.param(*c), net.param(*c) + 1.0);
        }
    }

    mod proptests {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn transfer_derivative_close_to_difference_quotient(
                z in -4.0f64..4.0,
                kind in prop_oneof![
                    Just(TransferKind::Sigmoid),
                    Just(TransferKind::Tanh),
                    Just(TransferKind::Linear)
                ],
            ) {
                let h = 1e-5;
                let numeric = (kind.eval(z + h) - kind.eval(z - h)) / (2.0 * h);
                prop_assert!((kind.derivative(z) - numeric).abs() <= 1e-6);
            }
        }
    }
}
