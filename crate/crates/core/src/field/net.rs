//! The compact field network: sinusoidal input encoding, a tanh MLP, and a
//! linear head that emits one time series per quadrature direction.
//!
//! Everything is plain f64 with hand-written forward and backward passes;
//! gradients are checked against finite differences in the test suite, so
//! the chain here must stay exactly in sync with the math.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::rng::seed_rng;
use crate::types::{Error, Result};
use crate::vec3::Vec3;

/// Hidden-layer nonlinearity. Identity exists so a purely linear network
/// can be gradient-checked against closed-form expectations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Activation {
    Tanh,
    Identity,
}

/// Shape and training-relevant constants of an acoustic field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldConfig {
    /// Room extents; positions are normalized by these before encoding.
    pub room_dimensions: Vec3,
    /// Number of hidden layers.
    pub hidden_layers: usize,
    pub hidden_width: usize,
    /// Sinusoidal octaves per position coordinate.
    pub octaves: usize,
    /// Quadrature directions (and output slices).
    pub n_dirs: usize,
    /// Output rate of the predicted response, Hz.
    pub sample_rate: f64,
    /// Length of the predicted response, seconds.
    pub ir_duration: f64,
    pub activation: Activation,
    /// Seed for parameter initialization.
    pub seed: u64,
}

impl Default for FieldConfig {
    fn default() -> Self {
        FieldConfig {
            room_dimensions: Vec3::new(6.0, 4.5, 3.0),
            hidden_layers: 4,
            hidden_width: 128,
            octaves: 6,
            n_dirs: 64,
            sample_rate: 8000.0,
            ir_duration: 0.25,
            activation: Activation::Tanh,
            seed: 0,
        }
    }
}

impl FieldConfig {
    pub fn time_len(&self) -> usize {
        (self.sample_rate * self.ir_duration).round() as usize
    }

    /// Raw coordinate, sin/cos ladder per octave for six position
    /// coordinates, plus the raw emitter facing.
    pub fn input_dim(&self) -> usize {
        6 * (1 + 2 * self.octaves) + 3
    }

    pub fn output_dim(&self) -> usize {
        self.n_dirs * self.time_len()
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.room_dimensions;
        if !(d.x > 0.0 && d.y > 0.0 && d.z > 0.0) {
            return Err(Error::Config("field room dimensions must be positive".into()));
        }
        if self.hidden_layers == 0 || self.hidden_width == 0 {
            return Err(Error::Config("field needs at least one hidden layer".into()));
        }
        if self.n_dirs < 4 {
            return Err(Error::Config("field needs at least 4 directions".into()));
        }
        if self.time_len() == 0 {
            return Err(Error::Config("field response would be empty".into()));
        }
        Ok(())
    }

    /// Encodes an emitter/listener/facing query for the network.
    pub fn encode(&self, p_e: Vec3, p_l: Vec3, f_e: Vec3) -> Vec<f64> {
        let mut x = Vec::with_capacity(self.input_dim());
        let dims = self.room_dimensions.to_array();
        for p in [p_e, p_l] {
            for (a, &coord) in p.to_array().iter().enumerate() {
                let u = 2.0 * coord / dims[a] - 1.0;
                x.push(u);
                for k in 0..self.octaves {
                    let arg = std::f64::consts::PI * (1 << k) as f64 * u;
                    x.push(arg.sin());
                    x.push(arg.cos());
                }
            }
        }
        x.extend(f_e.to_array());
        x
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
struct LayerShape {
    inputs: usize,
    outputs: usize,
    /// Offset of the weight block in the flat parameter vector; biases
    /// follow the weights.
    offset: usize,
}

/// Multilayer perceptron over a flat parameter vector (weights row-major,
/// then biases, per layer). The flat layout keeps the optimizer and the
/// checkpoint format trivial.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Mlp {
    shapes: Vec<LayerShape>,
    pub params: Vec<f64>,
    activation: Activation,
}

/// Intermediate activations of one forward pass, consumed by `backward`.
pub struct Tape {
    /// Input to each layer (layer 0 gets the encoded query).
    inputs: Vec<Vec<f64>>,
    /// Post-activation output of each layer.
    outputs: Vec<Vec<f64>>,
}

impl Mlp {
    /// Builds the network for a field configuration with seeded uniform
    /// initialization scaled by fan-in and fan-out.
    pub fn new(config: &FieldConfig) -> Result<Mlp> {
        config.validate()?;
        let mut dims = vec![config.input_dim()];
        dims.extend(std::iter::repeat(config.hidden_width).take(config.hidden_layers));
        dims.push(config.output_dim());

        let mut shapes = Vec::with_capacity(dims.len() - 1);
        let mut offset = 0;
        for w in dims.windows(2) {
            shapes.push(LayerShape { inputs: w[0], outputs: w[1], offset });
            offset += w[0] * w[1] + w[1];
        }
        let mut params = vec![0.0; offset];
        let mut rng = seed_rng(config.seed);
        for shape in &shapes {
            let scale = (6.0 / (shape.inputs + shape.outputs) as f64).sqrt();
            let weights = shape.inputs * shape.outputs;
            for p in params[shape.offset..shape.offset + weights].iter_mut() {
                *p = rng.gen_range(-scale..scale);
            }
            // Biases start at zero.
        }
        Ok(Mlp { shapes, params, activation: config.activation })
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    fn layer_forward(&self, shape: &LayerShape, x: &[f64], is_last: bool) -> Vec<f64> {
        let w = &self.params[shape.offset..shape.offset + shape.inputs * shape.outputs];
        let b = &self.params
            [shape.offset + shape.inputs * shape.outputs..shape.offset + shape.inputs * shape.outputs + shape.outputs];
        let mut out = Vec::with_capacity(shape.outputs);
        for o in 0..shape.outputs {
            let row = &w[o * shape.inputs..(o + 1) * shape.inputs];
            let mut acc = b[o];
            for (wi, xi) in row.iter().zip(x.iter()) {
                acc += wi * xi;
            }
            out.push(if is_last {
                acc
            } else {
                match self.activation {
                    Activation::Tanh => acc.tanh(),
                    Activation::Identity => acc,
                }
            });
        }
        out
    }

    /// Plain forward pass.
    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        let mut a = x.to_vec();
        for (i, shape) in self.shapes.iter().enumerate() {
            a = self.layer_forward(shape, &a, i + 1 == self.shapes.len());
        }
        a
    }

    /// Forward pass that keeps what backward needs.
    pub fn forward_cached(&self, x: &[f64]) -> (Vec<f64>, Tape) {
        let mut tape = Tape { inputs: Vec::new(), outputs: Vec::new() };
        let mut a = x.to_vec();
        for (i, shape) in self.shapes.iter().enumerate() {
            tape.inputs.push(a.clone());
            a = self.layer_forward(shape, &a, i + 1 == self.shapes.len());
            tape.outputs.push(a.clone());
        }
        (a.clone(), tape)
    }

    /// Accumulates dL/dparams into `grads` given dL/doutput. The head is
    /// linear; hidden activations differentiate through their cached
    /// outputs (tanh' = 1 - a^2).
    pub fn backward(&self, tape: &Tape, grad_output: &[f64], grads: &mut [f64]) {
        assert_eq!(grads.len(), self.params.len());
        let mut g = grad_output.to_vec();
        for (i, shape) in self.shapes.iter().enumerate().rev() {
            let is_last = i + 1 == self.shapes.len();
            if !is_last {
                match self.activation {
                    Activation::Tanh => {
                        for (gz, a) in g.iter_mut().zip(tape.outputs[i].iter()) {
                            *gz *= 1.0 - a * a;
                        }
                    }
                    Activation::Identity => {}
                }
            }
            let x = &tape.inputs[i];
            let weights = shape.inputs * shape.outputs;
            let (w_grad, b_grad) =
                grads[shape.offset..shape.offset + weights + shape.outputs].split_at_mut(weights);
            for o in 0..shape.outputs {
                let go = g[o];
                if go != 0.0 {
                    let row = &mut w_grad[o * shape.inputs..(o + 1) * shape.inputs];
                    for (slot, xi) in row.iter_mut().zip(x.iter()) {
                        *slot += go * xi;
                    }
                }
                b_grad[o] += go;
            }
            if i > 0 {
                // Propagate to the previous layer's output.
                let w = &self.params[shape.offset..shape.offset + weights];
                let mut gx = vec![0.0; shape.inputs];
                for o in 0..shape.outputs {
                    let go = g[o];
                    if go != 0.0 {
                        let row = &w[o * shape.inputs..(o + 1) * shape.inputs];
                        for (slot, wi) in gx.iter_mut().zip(row.iter()) {
                            *slot += go * wi;
                        }
                    }
                }
                g = gx;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_config() -> FieldConfig {
        FieldConfig {
            room_dimensions: Vec3::new(4.0, 3.0, 2.5),
            hidden_layers: 2,
            hidden_width: 8,
            octaves: 2,
            n_dirs: 4,
            sample_rate: 100.0,
            ir_duration: 0.1,
            activation: Activation::Tanh,
            seed: 3,
        }
    }

    #[test]
    fn dimensions_are_consistent() {
        let cfg = tiny_config();
        assert_eq!(cfg.time_len(), 10);
        assert_eq!(cfg.input_dim(), 6 * 5 + 3);
        assert_eq!(cfg.output_dim(), 40);
        let net = Mlp::new(&cfg).unwrap();
        let x = cfg.encode(
            Vec3::new(1.0, 1.0, 1.0),
            Vec3::new(2.0, 2.0, 1.5),
            Vec3::new(0.0, 0.0, 1.0),
        );
        assert_eq!(x.len(), cfg.input_dim());
        assert_eq!(net.forward(&x).len(), 40);
    }

    #[test]
    fn initialization_is_seeded() {
        let cfg = tiny_config();
        let a = Mlp::new(&cfg).unwrap();
        let b = Mlp::new(&cfg).unwrap();
        assert_eq!(a.params, b.params);
        let c = Mlp::new(&FieldConfig { seed: 4, ..cfg }).unwrap();
        assert_ne!(a.params, c.params);
    }

    #[test]
    fn encoding_centers_the_room() {
        let cfg = tiny_config();
        let mid = Vec3::new(2.0, 1.5, 1.25);
        let x = cfg.encode(mid, mid, Vec3::new(1.0, 0.0, 0.0));
        // Room center maps to 0, and sin(0) = 0, cos(0) = 1.
        assert_eq!(x[0], 0.0);
        assert_eq!(x[1], 0.0);
        assert_eq!(x[2], 1.0);
    }

    /// Central-difference check of the full network backward pass on a
    /// scalar loss. This is the low-level half of the gradient guarantee;
    /// the loss module checks the other half.
    #[test]
    fn backward_matches_finite_differences() {
        let cfg = tiny_config();
        let mut net = Mlp::new(&cfg).unwrap();
        let x = cfg.encode(
            Vec3::new(1.2, 0.8, 0.7),
            Vec3::new(3.1, 2.2, 1.9),
            Vec3::new(0.6, -0.8, 0.0),
        );
        // Scalar loss: weighted sum of outputs squared, weights fixed.
        let weights: Vec<f64> =
            (0..cfg.output_dim()).map(|i| ((i as f64) * 0.37).sin()).collect();
        let loss = |net: &Mlp| -> f64 {
            let y = net.forward(&x);
            0.5 * y.iter().zip(weights.iter()).map(|(v, w)| w * v * v).sum::<f64>()
        };
        let (y, tape) = net.forward_cached(&x);
        let grad_out: Vec<f64> = y.iter().zip(weights.iter()).map(|(v, w)| w * v).collect();
        let mut grads = vec![0.0; net.param_count()];
        net.backward(&tape, &grad_out, &mut grads);

        let mut rng = seed_rng(7);
        let h = 1e-5;
        let mut max_rel: f64 = 0.0;
        for _ in 0..300 {
            let idx = rng.gen_range(0..net.param_count());
            let orig = net.params[idx];
            net.params[idx] = orig + h;
            let up = loss(&net);
            net.params[idx] = orig - h;
            let down = loss(&net);
            net.params[idx] = orig;
            let fd = (up - down) / (2.0 * h);
            let rel = (grads[idx] - fd).abs() / grads[idx].abs().max(fd.abs()).max(1e-10);
            max_rel = max_rel.max(rel);
        }
        assert!(max_rel < 1e-6, "max relative gradient error {max_rel}");
    }
}
