//! Dense feedforward networks: evaluation, gradients and the JSON weight format.

use std::fmt;
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interval::Interval;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Activation {
    Identity,
    Relu,
    LeakyRelu { slope: f64 },
    Sigmoid,
    Tanh,
}

pub fn sigmoid(y: f64) -> f64 {
    if y >= 0.0 {
        1.0 / (1.0 + (-y).exp())
    } else {
        let e = y.exp();
        e / (1.0 + e)
    }
}

impl Activation {
    pub fn apply(&self, y: f64) -> f64 {
        match *self {
            Activation::Identity => y,
            Activation::Relu => y.max(0.0),
            Activation::LeakyRelu { slope } => {
                if y >= 0.0 {
                    y
                } else {
                    slope * y
                }
            }
            Activation::Sigmoid => sigmoid(y),
            Activation::Tanh => y.tanh(),
        }
    }

    /// Derivative; the right derivative at the kink of the piecewise-linear kinds.
    pub fn derivative(&self, y: f64) -> f64 {
        match *self {
            Activation::Identity => 1.0,
            Activation::Relu => {
                if y >= 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::LeakyRelu { slope } => {
                if y >= 0.0 {
                    1.0
                } else {
                    slope
                }
            }
            Activation::Sigmoid => {
                let s = sigmoid(y);
                s * (1.0 - s)
            }
            Activation::Tanh => {
                let t = y.tanh();
                1.0 - t * t
            }
        }
    }

    /// Exact range of the derivative over `[l, u]`.
    pub fn derivative_range(&self, l: f64, u: f64) -> Interval {
        match *self {
            Activation::Identity => Interval::point(1.0),
            Activation::Relu | Activation::LeakyRelu { .. } => {
                let low = self.derivative(l);
                let high = self.derivative(u);
                Interval::new(low.min(high), low.max(high))
            }
            Activation::Sigmoid | Activation::Tanh => {
                // bell shaped with its peak at 0
                let dl = self.derivative(l);
                let du = self.derivative(u);
                let hi = if l <= 0.0 && u >= 0.0 {
                    self.derivative(0.0)
                } else {
                    dl.max(du)
                };
                Interval::new(dl.min(du), hi)
            }
        }
    }

    /// Parse a weight-file activation name; `slope` applies to `leaky_relu` only.
    pub fn from_name(name: &str, slope: Option<f64>) -> Option<Self> {
        Some(match name {
            "identity" | "linear" => Activation::Identity,
            "relu" => Activation::Relu,
            "leaky_relu" => Activation::LeakyRelu {
                slope: slope.unwrap_or(DEFAULT_LEAKY_SLOPE),
            },
            "sigmoid" => Activation::Sigmoid,
            "tanh" => Activation::Tanh,
            _ => return None,
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Activation::Identity => "identity",
            Activation::Relu => "relu",
            Activation::LeakyRelu { .. } => "leaky_relu",
            Activation::Sigmoid => "sigmoid",
            Activation::Tanh => "tanh",
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Activation::LeakyRelu { slope } => write!(f, "leaky_relu({slope})"),
            other => f.write_str(other.name()),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    /// `out × in`.
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
    pub activation: Activation,
}

impl Layer {
    pub fn new(weight: Array2<f64>, bias: Array1<f64>, activation: Activation) -> Self {
        Layer {
            weight,
            bias,
            activation,
        }
    }

    pub fn in_dim(&self) -> usize {
        self.weight.ncols()
    }

    pub fn out_dim(&self) -> usize {
        self.weight.nrows()
    }
}

/// Pre-activations `y_t` and post-activations `z_t` of every layer for one input.
#[derive(Clone, Debug)]
pub struct ForwardTrace {
    pub preact: Vec<Array1<f64>>,
    pub output: Array1<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Network {
    input_dim: usize,
    layers: Vec<Layer>,
}

impl Network {
    /// Validates the dimension chain, the final identity layer and leaky slopes.
    pub fn new(input_dim: usize, layers: Vec<Layer>) -> Result<Self> {
        if input_dim == 0 {
            return Err(Error::InvalidNetworkShape("input_dim must be positive".into()));
        }
        if layers.is_empty() {
            return Err(Error::InvalidNetworkShape("network has no layers".into()));
        }
        let mut prev = input_dim;
        for (i, layer) in layers.iter().enumerate() {
            if layer.in_dim() != prev {
                return Err(Error::InvalidNetwork {
                    layer: i,
                    reason: format!("weight has {} columns, expected {prev}", layer.in_dim()),
                });
            }
            if layer.bias.len() != layer.out_dim() {
                return Err(Error::InvalidNetwork {
                    layer: i,
                    reason: format!(
                        "bias length {} does not match {} weight rows",
                        layer.bias.len(),
                        layer.out_dim()
                    ),
                });
            }
            if layer.out_dim() == 0 {
                return Err(Error::InvalidNetwork {
                    layer: i,
                    reason: "layer has no neurons".into(),
                });
            }
            if let Activation::LeakyRelu { slope } = layer.activation {
                if !(slope > 0.0 && slope < 1.0) {
                    return Err(Error::InvalidNetwork {
                        layer: i,
                        reason: format!("leaky slope {slope} outside (0, 1)"),
                    });
                }
            }
            if layer.weight.iter().chain(layer.bias.iter()).any(|v| !v.is_finite()) {
                return Err(Error::InvalidNetwork {
                    layer: i,
                    reason: "non-finite parameter".into(),
                });
            }
            prev = layer.out_dim();
        }
        let last = layers.len() - 1;
        if layers[last].activation != Activation::Identity {
            return Err(Error::InvalidNetwork {
                layer: last,
                reason: "final layer must use the identity activation".into(),
            });
        }
        Ok(Network { input_dim, layers })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, Layer::out_dim)
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim {
            return Err(Error::dims("network input", self.input_dim, x.len()));
        }
        Ok(())
    }

    pub fn forward(&self, x: &[f64]) -> Result<Array1<f64>> {
        Ok(self.forward_trace(x)?.output)
    }

    pub fn forward_trace(&self, x: &[f64]) -> Result<ForwardTrace> {
        self.check_input(x)?;
        let mut z = Array1::from(x.to_vec());
        let mut preact = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let y = layer.weight.dot(&z) + &layer.bias;
            z = y.mapv(|v| layer.activation.apply(v));
            preact.push(y);
        }
        Ok(ForwardTrace { preact, output: z })
    }

    /// Scalar output for a single-output network.
    pub fn value(&self, x: &[f64]) -> Result<f64> {
        let out = self.forward(x)?;
        Ok(out[0])
    }

    /// Chain-rule Jacobian `∂out/∂x` of shape `out × input_dim`.
    pub fn jacobian(&self, x: &[f64]) -> Result<Array2<f64>> {
        let trace = self.forward_trace(x)?;
        // accumulate from the output layer backwards
        let mut acc: Option<Array2<f64>> = None;
        for (layer, y) in self.layers.iter().zip(&trace.preact).rev() {
            let d = y.mapv(|v| layer.activation.derivative(v));
            let mut jl = layer.weight.clone();
            for (mut row, s) in jl.rows_mut().into_iter().zip(d.iter()) {
                row *= *s;
            }
            acc = Some(match acc {
                None => jl,
                Some(a) => a.dot(&jl),
            });
        }
        Ok(acc.expect("network has at least one layer"))
    }

    /// Gradient of the first output.
    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.jacobian(x)?.row(0).to_vec())
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        Self::parse(text, "<string>")
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_file())?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = self.to_json_string()?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    fn parse(text: &str, origin: &str) -> Result<Self> {
        let file: NetworkFile = serde_json::from_str(text).map_err(|e| Error::Parse {
            path: origin.to_string(),
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        file.into_network()
    }

    fn to_file(&self) -> NetworkFile {
        NetworkFile {
            input_dim: self.input_dim,
            layers: self
                .layers
                .iter()
                .map(|l| LayerFile {
                    rows: l.out_dim(),
                    cols: l.in_dim(),
                    weight: l.weight.rows().into_iter().map(|r| r.to_vec()).collect(),
                    bias: l.bias.to_vec(),
                    activation: l.activation.name().to_string(),
                    leaky_slope: match l.activation {
                        Activation::LeakyRelu { slope } => Some(slope),
                        _ => None,
                    },
                })
                .collect(),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NetworkFile {
    input_dim: usize,
    layers: Vec<LayerFile>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LayerFile {
    rows: usize,
    cols: usize,
    weight: Vec<Vec<f64>>,
    bias: Vec<f64>,
    activation: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    leaky_slope: Option<f64>,
}

/// Default slope when a `leaky_relu` layer omits `leaky_slope`.
pub const DEFAULT_LEAKY_SLOPE: f64 = 0.01;

impl NetworkFile {
    fn into_network(self) -> Result<Network> {
        let mut layers = Vec::with_capacity(self.layers.len());
        for (i, l) in self.layers.into_iter().enumerate() {
            let activation = Activation::from_name(&l.activation, l.leaky_slope).ok_or(Error::UnknownActivation {
                layer: i,
                name: l.activation.clone(),
            })?;
            if l.weight.len() != l.rows {
                return Err(Error::InvalidNetwork {
                    layer: i,
                    reason: format!("declared {} rows but weight has {}", l.rows, l.weight.len()),
                });
            }
            if let Some((r, row)) = l.weight.iter().enumerate().find(|(_, row)| row.len() != l.cols) {
                return Err(Error::InvalidNetwork {
                    layer: i,
                    reason: format!("weight row {r} has {} entries, declared cols {}", row.len(), l.cols),
                });
            }
            if l.bias.len() != l.rows {
                return Err(Error::InvalidNetwork {
                    layer: i,
                    reason: format!("bias length {} does not match rows {}", l.bias.len(), l.rows),
                });
            }
            let flat: Vec<f64> = l.weight.into_iter().flatten().collect();
            let weight = Array2::from_shape_vec((l.rows, l.cols), flat)
                .expect("row lengths checked above");
            layers.push(Layer::new(weight, Array1::from(l.bias), activation));
        }
        Network::new(self.input_dim, layers)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn odd_pair() -> Network {
        Network::new(
            1,
            vec![
                Layer::new(array![[1.0], [-1.0]], array![0.0, 0.0], Activation::Tanh),
                Layer::new(array![[1.0, 1.0]], array![0.0], Activation::Identity),
            ],
        )
        .unwrap()
    }

    #[test]
    fn identity_layer_passes_input_through() {
        let net = Network::new(1, vec![Layer::new(array![[1.0]], array![0.0], Activation::Identity)]).unwrap();
        assert_eq!(net.value(&[0.5]).unwrap(), 0.5);
    }

    #[test]
    fn single_tanh_unit_at_zero() {
        let net = Network::new(
            1,
            vec![
                Layer::new(array![[1.0]], array![0.0], Activation::Tanh),
                Layer::new(array![[1.0]], array![0.0], Activation::Identity),
            ],
        )
        .unwrap();
        assert_eq!(net.value(&[0.0]).unwrap(), 0.0);
        assert_eq!(net.gradient(&[0.0]).unwrap(), vec![1.0]);
    }

    #[test]
    fn symmetric_tanh_pair_cancels() {
        let net = odd_pair();
        let expected = 0.7f64.tanh() + (-0.7f64).tanh();
        assert_eq!(net.value(&[0.7]).unwrap(), expected);
        let sech2 = |v: f64| 1.0 - v.tanh().powi(2);
        let g = sech2(0.7) - sech2(-0.7);
        assert_eq!(net.gradient(&[0.7]).unwrap(), vec![g]);
        assert_eq!(g, 0.0);
    }

    #[test]
    fn linear_chain_gradient_is_weight_product() {
        let w1 = array![[1.0, 2.0], [-0.5, 3.0], [0.25, 0.0]];
        let w2 = array![[2.0, -1.0, 4.0]];
        let net = Network::new(
            2,
            vec![
                Layer::new(w1.clone(), array![0.1, 0.2, 0.3], Activation::Identity),
                Layer::new(w2.clone(), array![1.0], Activation::Identity),
            ],
        )
        .unwrap();
        let expected = w2.dot(&w1);
        for x in [[0.0, 0.0], [1.0, -2.0], [3.5, 0.25]] {
            assert_eq!(net.jacobian(&x).unwrap(), expected);
        }
    }

    #[test]
    fn relu_uses_right_derivative_at_kink() {
        assert_eq!(Activation::Relu.derivative(0.0), 1.0);
        assert_eq!(Activation::LeakyRelu { slope: 0.1 }.derivative(0.0), 1.0);
        assert_eq!(Activation::LeakyRelu { slope: 0.1 }.derivative(-1.0), 0.1);
    }

    #[test]
    fn derivative_range_of_bell_shapes() {
        let r = Activation::Tanh.derivative_range(-1.0, 2.0);
        assert_eq!(r.hi, 1.0);
        assert_eq!(r.lo, Activation::Tanh.derivative(2.0));
        let r = Activation::Sigmoid.derivative_range(1.0, 2.0);
        assert_eq!(r.hi, Activation::Sigmoid.derivative(1.0));
        assert_eq!(Activation::Relu.derivative_range(-1.0, 1.0), Interval::new(0.0, 1.0));
    }

    #[test]
    fn minimal_file_parses() {
        let text = r#"{"input_dim": 1, "layers": [
            {"rows": 1, "cols": 1, "weight": [[2.0]], "bias": [0.5], "activation": "identity"}]}"#;
        let net = Network::from_json_str(text).unwrap();
        assert_eq!(net.value(&[1.0]).unwrap(), 2.5);
    }

    #[test]
    fn bias_mismatch_names_the_layer() {
        let text = r#"{"input_dim": 1, "layers": [
            {"rows": 2, "cols": 1, "weight": [[1.0],[1.0]], "bias": [0.0, 0.0], "activation": "tanh"},
            {"rows": 1, "cols": 2, "weight": [[1.0, 1.0]], "bias": [0.0, 1.0], "activation": "identity"}]}"#;
        match Network::from_json_str(text) {
            Err(Error::InvalidNetwork { layer, .. }) => assert_eq!(layer, 1),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_activation_is_reported() {
        let text = r#"{"input_dim": 1, "layers": [
            {"rows": 1, "cols": 1, "weight": [[1.0]], "bias": [0.0], "activation": "swish"}]}"#;
        assert!(matches!(
            Network::from_json_str(text),
            Err(Error::UnknownActivation { layer: 0, .. })
        ));
    }

    #[test]
    fn syntax_errors_carry_positions() {
        let text = "{\"input_dim\": 1,\n \"layers\": [ oops ]}";
        match Network::from_json_str(text) {
            Err(Error::Parse { line, column, .. }) => {
                assert_eq!(line, 2);
                assert!(column > 0);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn final_layer_must_be_identity() {
        let r = Network::new(1, vec![Layer::new(array![[1.0]], array![0.0], Activation::Tanh)]);
        assert!(matches!(r, Err(Error::InvalidNetwork { layer: 0, .. })));
    }

    #[test]
    fn leaky_slope_outside_unit_interval_is_rejected() {
        let r = Network::new(
            1,
            vec![
                Layer::new(array![[1.0]], array![0.0], Activation::LeakyRelu { slope: 1.5 }),
                Layer::new(array![[1.0]], array![0.0], Activation::Identity),
            ],
        );
        assert!(r.is_err());
    }

    #[test]
    fn dimension_mismatch_on_forward() {
        assert!(matches!(
            odd_pair().forward(&[1.0, 2.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}
