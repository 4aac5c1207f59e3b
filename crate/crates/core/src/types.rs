//! Shared geometry and signal types plus the crate error enum.
//!
//! Wall indexing convention for [`ShoeboxRoom`]: 0 is the x=0 plane, 1 is
//! x=Lx, 2 is y=0, 3 is y=Ly, 4 is z=0 (floor), 5 is z=Lz (ceiling). Every
//! module that names a wall uses this order.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::vec3::Vec3;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("geometry: {0}")]
    Geometry(String),
    #[error("config: {0}")]
    Config(String),
    #[error("pattern: {0}")]
    Pattern(String),
    #[error("signal is silent: {0}")]
    SilentSignal(String),
    #[error("insufficient decay for fit: curve reaches only {reached_db:.1} dB")]
    InsufficientDecay { reached_db: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("corrupt data: {0}")]
    Corrupt(String),
    #[error("training: {0}")]
    Train(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Position plus facing direction. The facing vector is kept unit length;
/// axially symmetric gain patterns need nothing more than this axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub position: Vec3,
    pub facing: Vec3,
}

impl Pose {
    pub fn new(position: Vec3, facing: Vec3) -> Result<Pose> {
        let facing = facing
            .normalized()
            .ok_or_else(|| Error::Geometry("pose facing vector is near zero".into()))?;
        if !position.is_finite() {
            return Err(Error::Geometry("pose position is not finite".into()));
        }
        Ok(Pose { position, facing })
    }

    /// Pose with a default +x facing, for omnidirectional devices where the
    /// axis is irrelevant.
    pub fn at(position: Vec3) -> Pose {
        Pose { position, facing: Vec3::new(1.0, 0.0, 0.0) }
    }
}

/// Reflection behaviour of one wall: amplitude coefficients per frequency
/// band. `band_edges` are the interior band boundaries in Hz, strictly
/// increasing, so `coefficients.len() == band_edges.len() + 1`. An empty
/// edge list is the flat single-band case.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Material {
    pub band_edges: Vec<f64>,
    pub coefficients: Vec<f64>,
}

impl Material {
    pub fn flat(coefficient: f64) -> Material {
        Material { band_edges: Vec::new(), coefficients: vec![coefficient] }
    }

    pub fn banded(band_edges: Vec<f64>, coefficients: Vec<f64>) -> Result<Material> {
        let m = Material { band_edges, coefficients };
        m.validate()?;
        Ok(m)
    }

    pub fn band_count(&self) -> usize {
        self.coefficients.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.coefficients.len() != self.band_edges.len() + 1 {
            return Err(Error::Config(format!(
                "material needs {} coefficients for {} band edges, got {}",
                self.band_edges.len() + 1,
                self.band_edges.len(),
                self.coefficients.len()
            )));
        }
        if self.band_edges.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("material band edges must be strictly increasing".into()));
        }
        if self.band_edges.iter().any(|&e| !(e > 0.0) || !e.is_finite()) {
            return Err(Error::Config("material band edges must be positive and finite".into()));
        }
        if self.coefficients.iter().any(|&c| !(0.0..=1.0).contains(&c)) {
            return Err(Error::Config("material coefficients must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

/// Axis-aligned box room with one corner at the origin and six wall
/// materials in the module-level wall order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShoeboxRoom {
    pub dimensions: Vec3,
    pub walls: [Material; 6],
}

impl ShoeboxRoom {
    pub fn new(dimensions: Vec3, walls: [Material; 6]) -> Result<ShoeboxRoom> {
        let room = ShoeboxRoom { dimensions, walls };
        room.validate()?;
        Ok(room)
    }

    /// Same material on all six walls.
    pub fn uniform(dimensions: Vec3, material: Material) -> Result<ShoeboxRoom> {
        let walls = [
            material.clone(),
            material.clone(),
            material.clone(),
            material.clone(),
            material.clone(),
            material,
        ];
        ShoeboxRoom::new(dimensions, walls)
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dimensions;
        if !(d.x > 0.0 && d.y > 0.0 && d.z > 0.0) || !d.is_finite() {
            return Err(Error::Geometry(format!(
                "room dimensions must be positive, got ({}, {}, {})",
                d.x, d.y, d.z
            )));
        }
        let bands = self.walls[0].band_count();
        for (i, w) in self.walls.iter().enumerate() {
            w.validate()?;
            if w.band_count() != bands {
                return Err(Error::Config(format!(
                    "wall {i} has {} bands, wall 0 has {bands}; all walls must share one grid",
                    w.band_count()
                )));
            }
            if w.band_edges != self.walls[0].band_edges {
                return Err(Error::Config(format!("wall {i} band edges differ from wall 0")));
            }
        }
        Ok(())
    }

    /// Shared band edge grid of the walls.
    pub fn band_edges(&self) -> &[f64] {
        &self.walls[0].band_edges
    }

    pub fn band_count(&self) -> usize {
        self.walls[0].band_count()
    }

    /// True when `p` lies inside the room, at least `margin` away from every
    /// wall.
    pub fn contains(&self, p: Vec3, margin: f64) -> bool {
        p.x >= margin
            && p.y >= margin
            && p.z >= margin
            && p.x <= self.dimensions.x - margin
            && p.y <= self.dimensions.y - margin
            && p.z <= self.dimensions.z - margin
    }
}

/// One specular/diffuse propagation path. `points` runs emitter, bounce
/// points in travel order, listener; `interactions` holds the wall index of
/// each bounce, so `interactions.len() == points.len() - 2`.
///
/// `total_length` is stored rather than recomputed: the image-source
/// enumerator sets it to the unfolded straight-line distance, which is both
/// the exact geometric length and bit-stable under endpoint exchange.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropagationPath {
    pub points: Vec<Vec3>,
    pub interactions: Vec<usize>,
    pub total_length: f64,
}

impl PropagationPath {
    /// Builds a path and measures its length as the sum of segment lengths.
    pub fn new(points: Vec<Vec3>, interactions: Vec<usize>) -> Result<PropagationPath> {
        let total_length = points.windows(2).map(|w| w[0].distance(w[1])).sum();
        let path = PropagationPath { points, interactions, total_length };
        path.validate()?;
        Ok(path)
    }

    pub fn bounce_count(&self) -> usize {
        self.interactions.len()
    }

    pub fn emitter(&self) -> Vec3 {
        self.points[0]
    }

    pub fn listener(&self) -> Vec3 {
        *self.points.last().expect("validated path has points")
    }

    /// Unit direction of segment `i` (from point i to point i+1).
    pub fn segment_direction(&self, i: usize) -> Vec3 {
        (self.points[i + 1] - self.points[i])
            .normalized()
            .expect("validated path has non-degenerate segments")
    }

    /// Launch direction at the emitter.
    pub fn launch_direction(&self) -> Vec3 {
        self.segment_direction(0)
    }

    /// Direction from the listener back toward the last path point, the
    /// direction the arrival is heard from.
    pub fn arrival_look_direction(&self) -> Vec3 {
        -self.segment_direction(self.points.len() - 2)
    }

    pub fn validate(&self) -> Result<()> {
        if self.points.len() < 2 {
            return Err(Error::Geometry("path needs at least emitter and listener".into()));
        }
        if self.interactions.len() != self.points.len() - 2 {
            return Err(Error::Geometry(format!(
                "path with {} points must have {} interactions, got {}",
                self.points.len(),
                self.points.len() - 2,
                self.interactions.len()
            )));
        }
        if self.interactions.iter().any(|&w| w >= 6) {
            return Err(Error::Geometry("interaction wall index out of range".into()));
        }
        if self.points.iter().any(|p| !p.is_finite()) {
            return Err(Error::Geometry("path point is not finite".into()));
        }
        let mut seg_sum = 0.0;
        for w in self.points.windows(2) {
            let d = w[0].distance(w[1]);
            if d < 1e-12 {
                return Err(Error::Geometry("path has a degenerate zero-length segment".into()));
            }
            seg_sum += d;
        }
        let rel = (self.total_length - seg_sum).abs() / seg_sum.max(1e-300);
        if rel > 1e-9 {
            return Err(Error::Geometry(format!(
                "total_length {} disagrees with segment sum {} (rel {rel:.2e})",
                self.total_length, seg_sum
            )));
        }
        Ok(())
    }

    /// Same geometry traversed the other way: endpoint roles swap, points
    /// and interactions reverse, `total_length` is copied bit-exactly.
    /// Reversing twice restores the original exactly.
    pub fn reversed(&self) -> PropagationPath {
        let mut points = self.points.clone();
        points.reverse();
        let mut interactions = self.interactions.clone();
        interactions.reverse();
        PropagationPath { points, interactions, total_length: self.total_length }
    }
}

/// Sampled impulse response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImpulseResponse {
    pub samples: Vec<f64>,
    pub sample_rate: f64,
}

impl ImpulseResponse {
    pub fn new(samples: Vec<f64>, sample_rate: f64) -> ImpulseResponse {
        ImpulseResponse { samples, sample_rate }
    }

    pub fn zeros(len: usize, sample_rate: f64) -> ImpulseResponse {
        ImpulseResponse { samples: vec![0.0; len], sample_rate }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate
    }

    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|s| s * s).sum()
    }

    pub fn peak_abs(&self) -> f64 {
        self.samples.iter().fold(0.0, |m: f64, &s| m.max(s.abs()))
    }

    /// Rounds every sample to f32 and back. Datasets store f32 blocks, so
    /// generation quantizes once up front to keep container round-trips
    /// bit-exact.
    pub fn quantized_f32(&self) -> ImpulseResponse {
        ImpulseResponse {
            samples: self.samples.iter().map(|&s| s as f32 as f64).collect(),
            sample_rate: self.sample_rate,
        }
    }
}

/// One dataset entry. `is_virtual` marks exchange-augmented copies that were
/// never simulated directly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub id: u64,
    pub emitter: Pose,
    pub listener: Pose,
    pub ir: ImpulseResponse,
    pub is_virtual: bool,
    pub split: Split,
}

/// Which partition a sample belongs to. Splits are assigned per emitter so
/// test emitters are never seen in training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Split {
    Train,
    Test,
}

/// Knobs shared by both simulators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimulationConfig {
    /// Speed of sound in m/s.
    pub c: f64,
    pub sample_rate: f64,
    /// Length of synthesized impulse responses in seconds.
    pub ir_duration: f64,
    /// Image-source reflection order bound.
    pub max_image_order: u32,
    /// Rays launched by the stochastic tracer.
    pub ray_count: u64,
    /// Listener capture sphere radius in meters (stochastic tracer).
    pub capture_radius: f64,
    /// Probability that a bounce scatters into a Lambertian lobe instead of
    /// reflecting specularly (stochastic tracer).
    pub scattering: f64,
    pub rng_seed: u64,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig {
            c: 343.0,
            sample_rate: 16_000.0,
            ir_duration: 0.3,
            max_image_order: 4,
            ray_count: 10_000,
            capture_radius: 0.2,
            scattering: 0.2,
            rng_seed: 0,
        }
    }
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<()> {
        let positives = [
            ("c", self.c),
            ("sample_rate", self.sample_rate),
            ("ir_duration", self.ir_duration),
            ("capture_radius", self.capture_radius),
        ];
        for (name, v) in positives {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if !(0.0..=1.0).contains(&self.scattering) {
            return Err(Error::Config(format!(
                "scattering must lie in [0, 1], got {}",
                self.scattering
            )));
        }
        Ok(())
    }

    /// Samples in one impulse response under this config.
    pub fn ir_len(&self) -> usize {
        (self.ir_duration * self.sample_rate).round() as usize
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn zigzag_path() -> PropagationPath {
        PropagationPath::new(
            vec![
                Vec3::new(1.0, 1.0, 1.0),
                Vec3::new(0.0, 2.0, 1.5),
                Vec3::new(3.0, 2.5, 1.2),
            ],
            vec![0],
        )
        .unwrap()
    }

    #[test]
    fn reverse_is_involution_and_keeps_length_bits() {
        let p = zigzag_path();
        let r = p.reversed();
        assert_eq!(r.points[0], p.listener());
        assert_eq!(r.listener(), p.points[0]);
        assert_eq!(r.total_length.to_bits(), p.total_length.to_bits());
        assert_eq!(r.reversed(), p);
    }

    #[test]
    fn path_rejects_mismatched_interactions() {
        let err = PropagationPath::new(
            vec![Vec3::new(0.0, 0.0, 0.0), Vec3::new(1.0, 0.0, 0.0)],
            vec![2],
        );
        assert!(err.is_err());
    }

    #[test]
    fn material_validation() {
        assert!(Material::flat(0.7).validate().is_ok());
        assert!(Material::banded(vec![500.0, 250.0], vec![0.5, 0.5, 0.5]).is_err());
        assert!(Material::banded(vec![500.0], vec![0.5, 1.5]).is_err());
        assert!(Material::banded(vec![500.0], vec![0.5]).is_err());
    }

    #[test]
    fn pose_normalizes_facing() {
        let p = Pose::new(Vec3::ZERO, Vec3::new(0.0, 3.0, 0.0)).unwrap();
        assert!((p.facing.norm() - 1.0).abs() < 1e-15);
        assert!(Pose::new(Vec3::ZERO, Vec3::ZERO).is_err());
    }

    #[test]
    fn room_needs_shared_band_grid() {
        let mut walls: Vec<Material> = (0..6).map(|_| Material::flat(0.8)).collect();
        walls[3] = Material::banded(vec![1000.0], vec![0.8, 0.6]).unwrap();
        let walls: [Material; 6] = walls.try_into().unwrap();
        assert!(ShoeboxRoom::new(Vec3::new(4.0, 3.0, 2.5), walls).is_err());
    }

    #[test]
    fn default_config_is_valid() {
        SimulationConfig::default().validate().unwrap();
        assert_eq!(SimulationConfig::default().ir_len(), 4800);
    }
}
