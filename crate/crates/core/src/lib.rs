//! Room acoustics under geometric propagation: an exact image-source simulator
//! and a stochastic ray tracer for shoebox rooms, acoustic error metrics,
//! reciprocity verification, dataset tooling, and a small differentiable
//! acoustic field trained with exchange augmentation or self-supervised
//! swap consistency.

pub mod dataset;
mod dsp;
pub mod field;
pub mod metrics;
pub mod patterns;
pub mod rng;
pub mod simulator;
pub mod types;
pub mod vec3;

pub use types::{
    Error, ImpulseResponse, Material, Pose, PropagationPath, Result, Sample, SimulationConfig,
    ShoeboxRoom, Split,
};
pub use vec3::Vec3;
