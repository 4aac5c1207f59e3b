//! Emitter gain-pattern extraction from a directional field.
//!
//! The field is probed like a turntable measurement: place a virtual
//! listener a fixed radius from the emitter along each quadrature
//! direction, aim a directional listener pattern back at the emitter, and
//! take the square root of the rendered energy as the amplitude in that
//! emission direction. A zonal harmonic fit against the emitter facing
//! turns the samples into a pattern, peak-normalized like every other
//! pattern in the crate.

use crate::field::render::{render_weights, weighted_sum, DirectionalField};
use crate::patterns::{fit_zonal, GainPattern, DEFAULT_FLOOR, ZONAL_COEFFS};
use crate::types::{Error, Pose, Result};

/// Probes `field` around the emitter and fits the launch-direction gain.
pub fn extract_emitter_pattern(
    field: &dyn DirectionalField,
    emitter: &Pose,
    probe_radius: f64,
) -> Result<GainPattern> {
    let q = field.quadrature();
    if q.len() < ZONAL_COEFFS {
        return Err(Error::Pattern(format!(
            "extraction needs at least {ZONAL_COEFFS} probe directions, got {}",
            q.len()
        )));
    }
    if !(probe_radius > 0.0) {
        return Err(Error::Pattern("probe radius must be positive".into()));
    }
    // Aimed listener: forward-biased, smooth, nonzero away from the aim.
    let aim_pattern = GainPattern::cardioid();
    let t = field.time_len();
    let mut values = Vec::with_capacity(q.len());
    for &dir in &q.directions {
        let p_l = emitter.position + dir * probe_radius;
        let slices = field.directional_slices(emitter.position, p_l, emitter.facing)?;
        // Look back toward the emitter.
        let weights = render_weights(q, &aim_pattern, -dir);
        let h = weighted_sum(&slices, &weights, t);
        let energy = h.iter().map(|v| v * v).sum::<f64>() / t as f64;
        values.push(energy.sqrt());
    }
    if values.iter().all(|v| *v <= 0.0) {
        return Err(Error::Pattern(
            "field renders no energy around the emitter".into(),
        ));
    }
    fit_zonal(&q.directions, emitter.facing, &values, DEFAULT_FLOOR)
}
