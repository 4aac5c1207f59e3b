//! Rendering a directional field into a listener's impulse response.
//!
//! A field predicts one time series per quadrature direction; those are
//! world-frame look directions from the listener. The audible response is
//! the quadrature-weighted sum of the slices, each scaled by the listener
//! pattern's gain toward its direction. The listener's orientation and
//! pattern therefore enter only here, never inside the network, which is
//! what makes gain-pattern exchange possible at render time.

use crate::patterns::{GainPattern, SphereQuadrature};
use crate::types::{ImpulseResponse, Result};
use crate::vec3::Vec3;

/// Anything that can answer directional-slice queries. The trained network
/// implements this; tests substitute analytic mocks.
pub trait DirectionalField {
    fn quadrature(&self) -> &SphereQuadrature;
    fn time_len(&self) -> usize;
    fn sample_rate(&self) -> f64;
    /// Slice matrix for one emitter/listener query, `n_dirs` rows of
    /// `time_len` samples. Row i belongs to quadrature direction i.
    fn directional_slices(&self, p_e: Vec3, p_l: Vec3, f_e: Vec3) -> Result<Vec<Vec<f64>>>;
}

/// Per-direction render weights: quadrature weight times listener gain.
pub fn render_weights(
    quadrature: &SphereQuadrature,
    listener_pattern: &GainPattern,
    f_l: Vec3,
) -> Vec<f64> {
    quadrature
        .directions
        .iter()
        .zip(quadrature.weights.iter())
        .map(|(&dir, &w)| w * listener_pattern.eval(dir, f_l))
        .collect()
}

/// Collapses slices into a response given precomputed render weights.
pub fn weighted_sum(slices: &[Vec<f64>], weights: &[f64], time_len: usize) -> Vec<f64> {
    let mut h = vec![0.0; time_len];
    for (slice, &w) in slices.iter().zip(weights.iter()) {
        for (acc, &v) in h.iter_mut().zip(slice.iter()) {
            *acc += w * v;
        }
    }
    h
}

/// Renders the response heard by a listener with the given pattern and
/// facing.
pub fn render_response(
    field: &dyn DirectionalField,
    p_e: Vec3,
    p_l: Vec3,
    f_e: Vec3,
    listener_pattern: &GainPattern,
    f_l: Vec3,
) -> Result<ImpulseResponse> {
    let slices = field.directional_slices(p_e, p_l, f_e)?;
    let weights = render_weights(field.quadrature(), listener_pattern, f_l);
    let h = weighted_sum(&slices, &weights, field.time_len());
    Ok(ImpulseResponse::new(h, field.sample_rate()))
}
