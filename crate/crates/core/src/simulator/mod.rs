//! Geometric-acoustics simulation: exact image-source enumeration, a
//! stochastic ray tracer, impulse-response synthesis, and reciprocity
//! verification.
//!
//! A path's impact on the impulse response is a delayed, scaled pulse: the
//! delay is the travel time, the scale is 1/length times the product of the
//! wall coefficients met along the way (per band when the walls are banded).
//! Traversal direction never changes the impact, and the arithmetic here is
//! arranged so that holds bit-for-bit: coefficient products are accumulated
//! in value-sorted order and path contributions are summed in (delay,
//! amplitude)-sorted order, which makes endpoint-exchanged syntheses of the
//! same geometry identical to the last bit.

mod filters;
mod ism;
mod rays;
mod verify;

pub use filters::{band_partition_filters, octave_band_edges, DEFAULT_FILTER_TAPS};
pub use ism::enumerate_image_paths;
pub use rays::trace_stochastic;
pub use verify::{
    reciprocity_ray_sweep, verify_reciprocity, RaySweepReport, ReciprocityReport,
    ReciprocityScenario, SimMode, VERIFY_METRIC_NAMES,
};

use serde::{Deserialize, Serialize};

use crate::patterns::GainPattern;
use crate::types::{Error, ImpulseResponse, Pose, PropagationPath, Result, ShoeboxRoom,
    SimulationConfig};

/// What one path adds to the impulse response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathImpact {
    /// Arrival time in seconds.
    pub delay: f64,
    /// Flat (band 0) pressure amplitude: product of wall coefficients over
    /// the path length.
    pub amplitude: f64,
    /// Per-band amplitudes on the room's band grid; equals `[amplitude]`
    /// for flat rooms.
    pub band_gains: Vec<f64>,
}

/// A batch of paths plus per-path amplitude calibration. Exact paths (image
/// sources, snapped specular captures) carry weight 1; diffuse stochastic
/// captures carry their Monte-Carlo weight.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSet {
    pub paths: Vec<PropagationPath>,
    pub weights: Vec<f64>,
}

impl PathSet {
    pub fn exact(paths: Vec<PropagationPath>) -> PathSet {
        let weights = vec![1.0; paths.len()];
        PathSet { paths, weights }
    }

    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }
}

/// Product of `factors` accumulated in ascending value order. The order of
/// the inputs therefore cannot change the rounding, which keeps reversed
/// paths bit-identical.
fn canonical_product(factors: &mut [f64]) -> f64 {
    factors.sort_by(|a, b| a.partial_cmp(b).expect("coefficients are finite"));
    factors.iter().product()
}

/// Delay and per-band amplitude of one path through a room.
pub fn path_impact(
    path: &PropagationPath,
    room: &ShoeboxRoom,
    config: &SimulationConfig,
) -> Result<PathImpact> {
    path.validate()?;
    if path.total_length < 1e-9 {
        return Err(Error::Geometry("path endpoints coincide".into()));
    }
    let delay = path.total_length / config.c;
    let bands = room.band_count();
    let mut band_gains = Vec::with_capacity(bands);
    let mut factors = vec![0.0; path.interactions.len()];
    for band in 0..bands {
        for (slot, &wall) in factors.iter_mut().zip(path.interactions.iter()) {
            *slot = room.walls[wall].coefficients[band];
        }
        band_gains.push(canonical_product(&mut factors) / path.total_length);
    }
    Ok(PathImpact { delay, amplitude: band_gains[0], band_gains })
}

/// Pulse placement mode for synthesis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PulseMode {
    /// 32-tap Hann-windowed sinc interpolation of the fractional delay.
    WindowedSinc,
    /// Round to the nearest sample; exact placement for bit-level checks.
    NearestSample,
}

impl Default for PulseMode {
    fn default() -> Self {
        PulseMode::WindowedSinc
    }
}

/// Half-width of the windowed-sinc pulse in samples (32 taps total).
const SINC_HALF_WIDTH: i64 = 16;

/// One contribution prepared for placement.
struct Arrival {
    delay: f64,
    gain: f64,
    band_gains: Vec<f64>,
}

/// Renders a path set into an impulse response. Directional gains use the
/// launch direction against the emitter facing and the arrival look
/// direction (listener toward the last bounce) against the listener facing;
/// with that convention a pattern shared by both devices gives
/// exchange-symmetric responses. Arrivals later than the configured
/// duration are dropped.
pub fn synthesize_ir(
    room: &ShoeboxRoom,
    path_set: &PathSet,
    emitter: &Pose,
    listener: &Pose,
    emitter_pattern: &GainPattern,
    listener_pattern: &GainPattern,
    config: &SimulationConfig,
    mode: PulseMode,
) -> Result<ImpulseResponse> {
    config.validate()?;
    room.validate()?;
    if path_set.paths.len() != path_set.weights.len() {
        return Err(Error::DimensionMismatch {
            expected: path_set.paths.len(),
            got: path_set.weights.len(),
        });
    }
    let len = config.ir_len();
    let bands = room.band_count();

    let mut arrivals = Vec::with_capacity(path_set.len());
    for (path, &weight) in path_set.paths.iter().zip(path_set.weights.iter()) {
        let impact = path_impact(path, room, config)?;
        if impact.delay * config.sample_rate > (len as f64 + SINC_HALF_WIDTH as f64) {
            continue;
        }
        let ge = emitter_pattern.eval(path.launch_direction(), emitter.facing);
        let gl = listener_pattern.eval(path.arrival_look_direction(), listener.facing);
        let gain = ge * gl * weight;
        arrivals.push(Arrival { delay: impact.delay, gain, band_gains: impact.band_gains });
    }
    // Deterministic accumulation order, independent of how the path set was
    // enumerated: sort by delay, then amplitude, then the band profile.
    arrivals.sort_by(|a, b| {
        a.delay
            .partial_cmp(&b.delay)
            .unwrap()
            .then(a.gain.partial_cmp(&b.gain).unwrap())
            .then_with(|| {
                for (x, y) in a.band_gains.iter().zip(b.band_gains.iter()) {
                    match x.partial_cmp(y).unwrap() {
                        std::cmp::Ordering::Equal => continue,
                        other => return other,
                    }
                }
                std::cmp::Ordering::Equal
            })
    });

    if bands == 1 {
        let mut samples = vec![0.0; len];
        for a in &arrivals {
            place_pulse(&mut samples, a.delay * config.sample_rate, a.gain * a.band_gains[0], mode);
        }
        return Ok(ImpulseResponse::new(samples, config.sample_rate));
    }

    // Banded rooms: accumulate one buffer per band, shape each with its
    // partition filter, and sum. The filters tile the spectrum exactly, so
    // equal band coefficients collapse to the flat result.
    let firs = band_partition_filters(room.band_edges(), config.sample_rate, DEFAULT_FILTER_TAPS)?;
    let center = (DEFAULT_FILTER_TAPS - 1) / 2;
    let mut band_buffers = vec![vec![0.0; len + DEFAULT_FILTER_TAPS]; bands];
    for a in &arrivals {
        for (band, buf) in band_buffers.iter_mut().enumerate() {
            place_pulse(buf, a.delay * config.sample_rate, a.gain * a.band_gains[band], mode);
        }
    }
    let mut samples = vec![0.0; len];
    for (buf, fir) in band_buffers.iter().zip(firs.iter()) {
        // Convolve and drop the filter group delay so band synthesis stays
        // time-aligned with flat synthesis.
        for (i, out) in samples.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (k, &h) in fir.iter().enumerate() {
                let j = i as i64 + center as i64 - k as i64;
                if j >= 0 && (j as usize) < buf.len() {
                    acc += h * buf[j as usize];
                }
            }
            *out += acc;
        }
    }
    Ok(ImpulseResponse::new(samples, config.sample_rate))
}

fn place_pulse(buf: &mut [f64], center: f64, amplitude: f64, mode: PulseMode) {
    match mode {
        PulseMode::NearestSample => {
            let idx = center.round() as i64;
            if idx >= 0 && (idx as usize) < buf.len() {
                buf[idx as usize] += amplitude;
            }
        }
        PulseMode::WindowedSinc => {
            let first = center.floor() as i64 - (SINC_HALF_WIDTH - 1);
            for j in first..first + 2 * SINC_HALF_WIDTH {
                if j < 0 || j as usize >= buf.len() {
                    continue;
                }
                let t = j as f64 - center;
                let w = 0.5 * (1.0 + (std::f64::consts::PI * t / SINC_HALF_WIDTH as f64).cos());
                buf[j as usize] += amplitude * sinc(t) * w;
            }
        }
    }
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        let px = std::f64::consts::PI * x;
        px.sin() / px
    }
}
