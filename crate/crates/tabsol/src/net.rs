//! The feed-forward encoder/decoder: a random projection with systematic
//! offsets, a tanh hidden layer and a linear readout.
//!
//! The hidden layer computes `h_i = tanh(g * (w_i . x + b_i + o_i))` where the
//! input weights `w_i` and biases `b_i` are frozen random draws and the offsets
//! `o_i` are evenly spaced over a symmetric span so that every neuron has a
//! distinct tuning curve. Only the readout matrix is ever trained.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Hyperparameters of the frozen encoder. A network is a pure function of
/// this struct: reconstructing from the same config is bit-identical.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    /// Input dimensionality `m`.
    pub input_dim: usize,
    /// Hidden layer size `L`.
    pub hidden_count: usize,
    /// Output dimensionality `K`.
    pub output_dim: usize,
    /// Half-width of the uniform input-weight distribution.
    pub weight_range: f64,
    /// Lower bound on the input-weight magnitude. 0.0 gives plain uniform
    /// weights on `[-weight_range, weight_range]`; a positive value draws the
    /// magnitude uniformly on `[weight_min, weight_range]` with a random sign,
    /// which pins the tuning-curve crossing points to the offsets.
    pub weight_min: f64,
    /// Half-width of the uniform bias distribution.
    pub bias_range: f64,
    /// Offsets are evenly spaced on `[-offset_span, offset_span]`.
    pub offset_span: f64,
    /// Multiplier inside the tanh; sets the tuning-curve steepness.
    pub activation_gain: f64,
    /// RNG seed for the weight and bias draws.
    pub seed: u64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        NetworkConfig {
            input_dim: 1,
            hidden_count: 100,
            output_dim: 1,
            weight_range: 1.0,
            weight_min: 0.0,
            bias_range: 1.0,
            offset_span: 1.0,
            activation_gain: 1.0,
            seed: 0,
        }
    }
}

impl NetworkConfig {
    pub fn validate(&self) -> Result<()> {
        if self.input_dim < 1 || self.hidden_count < 1 || self.output_dim < 1 {
            return Err(Error::Config(format!(
                "dimensions must be at least 1 (m={}, L={}, K={})",
                self.input_dim, self.hidden_count, self.output_dim
            )));
        }
        for (name, v) in [
            ("weight_range", self.weight_range),
            ("weight_min", self.weight_min),
            ("bias_range", self.bias_range),
            ("offset_span", self.offset_span),
            ("activation_gain", self.activation_gain),
        ] {
            if !v.is_finite() {
                return Err(Error::Config(format!("{name} must be finite, got {v}")));
            }
        }
        if self.activation_gain <= 0.0 {
            return Err(Error::Config(format!(
                "activation_gain must be positive, got {}",
                self.activation_gain
            )));
        }
        if self.weight_min < 0.0 || self.weight_min > self.weight_range {
            return Err(Error::Config(format!(
                "weight_min must lie in [0, weight_range], got {} with weight_range {}",
                self.weight_min, self.weight_range
            )));
        }
        if self.hidden_count >= 2 && self.offset_span <= 0.0 {
            return Err(Error::Config(
                "offset_span must be positive for 2 or more hidden neurons \
                 (offsets must be pairwise distinct)"
                    .into(),
            ));
        }
        Ok(())
    }
}

/// The frozen encoder: random input weights, random biases and evenly spaced
/// systematic offsets. Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct TabNetwork {
    pub config: NetworkConfig,
    /// `L x m` input weight matrix.
    pub input_weights: DMatrix<f64>,
    /// Length-`L` bias vector.
    pub biases: DVector<f64>,
    /// Length-`L` offset vector, evenly spaced.
    pub offsets: DVector<f64>,
}

/// Draw the network deterministically from its config.
pub fn init_network(config: &NetworkConfig) -> Result<TabNetwork> {
    config.validate()?;
    let l = config.hidden_count;
    let m = config.input_dim;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let mut weights = DMatrix::zeros(l, m);
    for i in 0..l {
        for j in 0..m {
            weights[(i, j)] = if config.weight_min > 0.0 {
                let mag = rng.gen_range(config.weight_min..=config.weight_range);
                if rng.gen::<bool>() {
                    -mag
                } else {
                    mag
                }
            } else if config.weight_range > 0.0 {
                rng.gen_range(-config.weight_range..=config.weight_range)
            } else {
                0.0
            };
        }
    }

    let mut biases = DVector::zeros(l);
    for i in 0..l {
        biases[i] = if config.bias_range > 0.0 {
            rng.gen_range(-config.bias_range..=config.bias_range)
        } else {
            0.0
        };
    }

    let mut offsets = DVector::zeros(l);
    if l == 1 {
        offsets[0] = 0.0;
    } else {
        let step = 2.0 * config.offset_span / (l - 1) as f64;
        for i in 0..l {
            offsets[i] = -config.offset_span + step * i as f64;
        }
    }

    Ok(TabNetwork {
        config: config.clone(),
        input_weights: weights,
        biases,
        offsets,
    })
}

impl TabNetwork {
    /// `h_i = tanh(g * (w_i . x + b_i + o_i))`.
    pub fn hidden_activations(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        if x.len() != self.config.input_dim {
            return Err(Error::Input(format!(
                "input has length {}, expected {}",
                x.len(),
                self.config.input_dim
            )));
        }
        let mut pre = &self.input_weights * x;
        pre += &self.biases;
        pre += &self.offsets;
        Ok(pre.map(|v| (self.config.activation_gain * v).tanh()))
    }

    /// Convenience for single-input networks.
    pub fn hidden_activations_scalar(&self, x: f64) -> Result<DVector<f64>> {
        self.hidden_activations(&DVector::from_element(1, x))
    }
}

/// Trainable readout matrix, `K x L`.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputWeights {
    pub matrix: DMatrix<f64>,
}

impl OutputWeights {
    pub fn zeros(output_dim: usize, hidden_count: usize) -> Self {
        OutputWeights {
            matrix: DMatrix::zeros(output_dim, hidden_count),
        }
    }
}

/// Full forward pass: `y = W * h(x)`.
pub fn predict(net: &TabNetwork, weights: &OutputWeights, x: &DVector<f64>) -> Result<DVector<f64>> {
    if weights.matrix.ncols() != net.config.hidden_count {
        return Err(Error::Input(format!(
            "readout has {} columns, expected {}",
            weights.matrix.ncols(),
            net.config.hidden_count
        )));
    }
    let h = net.hidden_activations(x)?;
    Ok(&weights.matrix * h)
}

/// Hardware sign convention: `1` (true) is negative, `0` (false) is positive.
/// Zero maps to positive; there is no third state.
#[inline]
pub fn sign_bit(v: f64) -> bool {
    v < 0.0
}

/// Map a sign bit back to `+1.0` / `-1.0`.
#[inline]
pub fn sign_value(bit: bool) -> f64 {
    if bit {
        -1.0
    } else {
        1.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn siso(l: usize) -> NetworkConfig {
        NetworkConfig {
            hidden_count: l,
            ..NetworkConfig::default()
        }
    }

    #[test]
    fn single_neuron_offset_is_zero() {
        let net = init_network(&siso(1)).unwrap();
        assert_eq!(net.offsets[0], 0.0);
    }

    #[test]
    fn three_neurons_evenly_spaced() {
        let net = init_network(&siso(3)).unwrap();
        assert_eq!(net.offsets.as_slice(), &[-1.0, 0.0, 1.0]);
    }

    #[test]
    fn same_config_same_network() {
        let cfg = siso(17);
        let a = init_network(&cfg).unwrap();
        let b = init_network(&cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn invalid_dims_rejected() {
        let cfg = NetworkConfig {
            hidden_count: 0,
            ..NetworkConfig::default()
        };
        assert!(matches!(init_network(&cfg), Err(Error::Config(_))));
    }

    #[test]
    fn zero_span_rejected_for_multiple_neurons() {
        let cfg = NetworkConfig {
            hidden_count: 2,
            offset_span: 0.0,
            ..NetworkConfig::default()
        };
        assert!(matches!(init_network(&cfg), Err(Error::Config(_))));
    }

    #[test]
    fn weights_respect_magnitude_bounds() {
        let cfg = NetworkConfig {
            hidden_count: 200,
            weight_min: 0.9,
            weight_range: 1.1,
            ..NetworkConfig::default()
        };
        let net = init_network(&cfg).unwrap();
        for &w in net.input_weights.iter() {
            assert!((0.9..=1.1).contains(&w.abs()), "weight {w} out of band");
        }
    }

    /// Hand-built two-neuron network against a high-precision tanh oracle.
    #[test]
    fn activations_match_direct_evaluation() {
        let cfg = NetworkConfig {
            hidden_count: 2,
            ..NetworkConfig::default()
        };
        let mut net = init_network(&cfg).unwrap();
        net.input_weights = DMatrix::from_row_slice(2, 1, &[1.0, -1.0]);
        net.biases = DVector::from_element(2, 0.0);
        net.offsets = DVector::from_row_slice(&[0.5, -0.5]);
        let h = net.hidden_activations_scalar(0.5).unwrap();
        assert_relative_eq!(h[0], 1.0_f64.tanh(), max_relative = 1e-15);
        assert_relative_eq!(h[1], -(1.0_f64.tanh()), max_relative = 1e-15);
        assert_relative_eq!(h[0], 0.761594, epsilon = 1e-6);
    }

    #[test]
    fn tanh_zero_at_zero() {
        let mut net = init_network(&siso(1)).unwrap();
        net.input_weights[(0, 0)] = 1.0;
        net.biases[0] = 0.0;
        let h = net.hidden_activations_scalar(0.0).unwrap();
        assert_eq!(h[0], 0.0);
    }

    #[test]
    fn odd_symmetry_without_bias_and_offset() {
        let cfg = NetworkConfig {
            hidden_count: 1,
            bias_range: 0.0,
            ..NetworkConfig::default()
        };
        let net = init_network(&cfg).unwrap();
        let a = net.hidden_activations_scalar(0.37).unwrap();
        let b = net.hidden_activations_scalar(-0.37).unwrap();
        assert_eq!(a[0], -b[0]);
    }

    #[test]
    fn predict_zero_weights() {
        let net = init_network(&siso(5)).unwrap();
        let w = OutputWeights::zeros(1, 5);
        let y = predict(&net, &w, &DVector::from_element(1, 0.3)).unwrap();
        assert_eq!(y[0], 0.0);
    }

    #[test]
    fn predict_single_term() {
        let net = init_network(&siso(3)).unwrap();
        let mut w = OutputWeights::zeros(1, 3);
        w.matrix[(0, 0)] = 2.0;
        let h = net.hidden_activations_scalar(0.1).unwrap();
        let y = predict(&net, &w, &DVector::from_element(1, 0.1)).unwrap();
        assert_relative_eq!(y[0], 2.0 * h[0], max_relative = 1e-15);
    }

    #[test]
    fn predict_dimension_mismatch() {
        let net = init_network(&siso(4)).unwrap();
        let w = OutputWeights::zeros(1, 3);
        assert!(matches!(
            predict(&net, &w, &DVector::from_element(1, 0.0)),
            Err(Error::Input(_))
        ));
    }

    #[test]
    fn sign_bit_convention() {
        assert!(sign_bit(-0.3));
        assert!(!sign_bit(0.7));
        assert!(!sign_bit(0.0));
        assert_eq!(sign_value(true), -1.0);
        assert_eq!(sign_value(false), 1.0);
    }

    /// Any two neurons must differ somewhere on the grid (distinct tuning).
    #[test]
    fn distinct_tuning_curves() {
        let net = init_network(&siso(10)).unwrap();
        for i in 0..10 {
            for j in (i + 1)..10 {
                let mut differ = false;
                for k in 0..50 {
                    let x = -1.0 + 2.0 * k as f64 / 49.0;
                    let h = net.hidden_activations_scalar(x).unwrap();
                    if h[i] != h[j] {
                        differ = true;
                        break;
                    }
                }
                assert!(differ, "neurons {i} and {j} identical on the grid");
            }
        }
    }
}
