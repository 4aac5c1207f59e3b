//! A compact neural acoustic field: query (emitter position, listener
//! position, emitter facing), answer a matrix of directional time slices at
//! the listener. Listener orientation and pattern are applied outside the
//! network at render time.
//!
//! The network, loss, optimizer, and gradients are all hand-written f64 so
//! the arithmetic is fully visible to the finite-difference checks and the
//! bit-reproducibility guarantees.

pub mod baseline;
pub mod checkpoint;
pub mod extract;
pub mod grad_check;
pub mod loss;
mod net;
pub mod probe;
mod render;
mod train;

pub use net::{Activation, FieldConfig, Mlp, Tape};
pub use render::{render_response, render_weights, weighted_sum, DirectionalField};
pub use train::{train, train_with_workers, Regime, TrainConfig, TrainReport, TrainedField,
    THREADS_ENV};

use crate::patterns::{make_quadrature, SphereQuadrature};
use crate::types::Result;
use crate::vec3::Vec3;

/// A field network bundled with its configuration and quadrature.
#[derive(Debug, Clone)]
pub struct AcousticField {
    pub config: FieldConfig,
    pub net: Mlp,
    quadrature: SphereQuadrature,
}

impl AcousticField {
    /// Fresh field with seeded initialization.
    pub fn new(config: FieldConfig) -> Result<AcousticField> {
        let net = Mlp::new(&config)?;
        let quadrature = make_quadrature(config.n_dirs)?;
        Ok(AcousticField { config, net, quadrature })
    }

    /// Rebuilds the deterministic parts (quadrature) around existing
    /// parameters; used when loading a checkpoint.
    pub fn from_parts(config: FieldConfig, params: Vec<f64>) -> Result<AcousticField> {
        let mut field = AcousticField::new(config)?;
        if params.len() != field.net.param_count() {
            return Err(crate::types::Error::DimensionMismatch {
                expected: field.net.param_count(),
                got: params.len(),
            });
        }
        field.net.params = params;
        Ok(field)
    }

    fn reshape(&self, flat: Vec<f64>) -> Vec<Vec<f64>> {
        let t = self.config.time_len();
        let mut slices = Vec::with_capacity(self.config.n_dirs);
        for i in 0..self.config.n_dirs {
            slices.push(flat[i * t..(i + 1) * t].to_vec());
        }
        slices
    }
}

impl DirectionalField for AcousticField {
    fn quadrature(&self) -> &SphereQuadrature {
        &self.quadrature
    }

    fn time_len(&self) -> usize {
        self.config.time_len()
    }

    fn sample_rate(&self) -> f64 {
        self.config.sample_rate
    }

    fn directional_slices(&self, p_e: Vec3, p_l: Vec3, f_e: Vec3) -> Result<Vec<Vec<f64>>> {
        let x = self.config.encode(p_e, p_l, f_e);
        Ok(self.reshape(self.net.forward(&x)))
    }
}
