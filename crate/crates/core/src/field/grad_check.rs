//! Finite-difference verification of every gradient path the trainer
//! uses: the full supervised chain, a purely linear network against a
//! quadratic objective (where central differences are exact per
//! coordinate), and the stop gradient on the consistency branch.
//!
//! These run the trainer's own forward helpers, not copies, so a pass
//! here vouches for the arithmetic the optimizer actually sees.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal, UnitSphere};

use crate::dsp::FftBank;
use crate::field::loss::{audio_loss, LossConfig};
use crate::field::render::{render_weights, weighted_sum};
use crate::field::train::{
    render_adjoint, ssl_forward, supervised_forward, Example, SslQuery,
};
use crate::field::{AcousticField, Activation, DirectionalField, FieldConfig};
use crate::patterns::GainPattern;
use crate::rng::stream_rng;
use crate::types::{Pose, Result};
use crate::vec3::Vec3;

/// Central-difference step for the nonlinear chains.
const FD_STEP: f64 = 1e-5;

/// Step for the linear/quadratic check. Per coordinate the objective is an
/// exact quadratic, so the central difference carries no truncation error
/// at any step; a large step only shrinks the cancellation noise.
const QUAD_STEP: f64 = 1e-2;

/// Parameters sampled per check.
const FD_SAMPLES: usize = 200;

#[derive(Debug, Clone, Copy)]
pub struct ChainCheck {
    pub checked: usize,
    pub max_rel_err: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct StopGradientCheck {
    pub checked: usize,
    pub active_max_rel_err: f64,
    /// Largest gradient magnitude leaked through the stopped branch;
    /// anything other than exactly zero is a bug.
    pub stopped_max_abs: f64,
}

fn small_config(seed: u64, activation: Activation, hidden_layers: usize) -> FieldConfig {
    FieldConfig {
        room_dimensions: Vec3::new(4.0, 3.0, 2.5),
        hidden_layers,
        hidden_width: 16,
        octaves: 2,
        n_dirs: 8,
        sample_rate: 400.0,
        ir_duration: 0.06,
        activation,
        seed,
    }
}

fn small_loss() -> LossConfig {
    LossConfig {
        stft_windows: vec![8, 16],
        ..LossConfig::default()
    }
}

fn random_pose(rng: &mut impl Rng, dims: Vec3) -> Pose {
    let margin = 0.5;
    let p = Vec3::new(
        rng.gen_range(margin..dims.x - margin),
        rng.gen_range(margin..dims.y - margin),
        rng.gen_range(margin..dims.z - margin),
    );
    let f: [f64; 3] = UnitSphere.sample(rng);
    Pose::new(p, Vec3::new(f[0], f[1], f[2])).unwrap()
}

fn sample_indices(rng: &mut impl Rng, n_params: usize) -> Vec<usize> {
    (0..FD_SAMPLES.min(n_params))
        .map(|_| rng.gen_range(0..n_params))
        .collect()
}

fn worst_relative_error(
    field: &mut AcousticField,
    grads: &[f64],
    indices: &[usize],
    step: f64,
    mut eval: impl FnMut(&AcousticField) -> Result<f64>,
) -> Result<f64> {
    let mut max_rel: f64 = 0.0;
    for &i in indices {
        let orig = field.net.params[i];
        field.net.params[i] = orig + step;
        let fp = eval(field)?;
        field.net.params[i] = orig - step;
        let fm = eval(field)?;
        field.net.params[i] = orig;
        let fd = (fp - fm) / (2.0 * step);
        let denom = grads[i].abs().max(fd.abs()).max(1e-8);
        max_rel = max_rel.max((grads[i] - fd).abs() / denom);
    }
    Ok(max_rel)
}

/// Supervised path: encode, network, directional render, audio loss.
pub fn check_supervised_chain(seed: u64) -> Result<ChainCheck> {
    let config = small_config(seed, Activation::Tanh, 2);
    let mut field = AcousticField::new(config)?;
    let mut rng = stream_rng(seed, 0x67726164);
    let dims = field.config.room_dimensions;
    let t = field.config.time_len();
    let target: Vec<f64> = (0..t)
        .map(|i| {
            let n: f64 = StandardNormal.sample(&mut rng);
            0.3 * n * (-3.0 * i as f64 / t as f64).exp()
        })
        .collect();
    let ex = Example {
        emitter: random_pose(&mut rng, dims),
        listener: random_pose(&mut rng, dims),
        target,
    };
    let pattern = GainPattern::cardioid();
    let loss_cfg = small_loss();
    let mut bank = FftBank::new();

    let result = supervised_forward(&field, &mut bank, &loss_cfg, &pattern, &ex)?;
    let mut grads = vec![0.0; field.net.param_count()];
    field.net.backward(&result.tape, &result.grad_out, &mut grads);

    let indices = sample_indices(&mut rng, grads.len());
    let checked = indices.len();
    let max_rel_err = worst_relative_error(&mut field, &grads, &indices, FD_STEP, |f| {
        Ok(supervised_forward(f, &mut bank, &loss_cfg, &pattern, &ex)?.loss)
    })?;
    Ok(ChainCheck { checked, max_rel_err })
}

/// Identity activations and a plain quadratic objective. Every parameter
/// enters the output linearly, so the objective is quadratic per
/// coordinate and the central difference carries no truncation error.
pub fn check_linear_quadratic(seed: u64) -> Result<ChainCheck> {
    let config = small_config(seed, Activation::Identity, 1);
    let mut field = AcousticField::new(config)?;
    let mut rng = stream_rng(seed, 0x71756164);
    let dims = field.config.room_dimensions;
    let t = field.config.time_len();
    let emitter = random_pose(&mut rng, dims);
    let listener = random_pose(&mut rng, dims);
    let y: Vec<f64> = (0..t)
        .map(|_| {
            let n: f64 = StandardNormal.sample(&mut rng);
            0.5 * n
        })
        .collect();
    let weights = render_weights(field.quadrature(), &GainPattern::cardioid(), listener.facing);
    let x = field.config.encode(emitter.position, listener.position, emitter.facing);

    let quadratic = |f: &AcousticField| -> (f64, Vec<f64>) {
        let h = weighted_sum(&f.reshape(f.net.forward(&x)), &weights, t);
        let loss = h.iter().zip(y.iter()).map(|(a, b)| 0.5 * (a - b) * (a - b)).sum();
        let grad_h: Vec<f64> = h.iter().zip(y.iter()).map(|(a, b)| a - b).collect();
        (loss, grad_h)
    };

    let (flat, tape) = field.net.forward_cached(&x);
    let h = weighted_sum(&field.reshape(flat), &weights, t);
    let grad_h: Vec<f64> = h.iter().zip(y.iter()).map(|(a, b)| a - b).collect();
    let grad_out = render_adjoint(&grad_h, &weights, t);
    let mut grads = vec![0.0; field.net.param_count()];
    field.net.backward(&tape, &grad_out, &mut grads);

    let indices = sample_indices(&mut rng, grads.len());
    let checked = indices.len();
    let max_rel_err =
        worst_relative_error(&mut field, &grads, &indices, QUAD_STEP, |f| Ok(quadratic(f).0))?;
    Ok(ChainCheck { checked, max_rel_err })
}

/// Consistency path: the active branch's gradient must match finite
/// differences of the objective with the other branch frozen, and the
/// stopped branch must contribute nothing at all.
pub fn check_stop_gradient(seed: u64) -> Result<StopGradientCheck> {
    let config = small_config(seed, Activation::Tanh, 2);
    let mut field = AcousticField::new(config)?;
    let mut rng = stream_rng(seed, 0x73746f70);
    let dims = field.config.room_dimensions;
    let t = field.config.time_len();
    let a = random_pose(&mut rng, dims);
    let b = random_pose(&mut rng, dims);
    let query = SslQuery { p_a: a.position, p_b: b.position, f_a: a.facing, f_b: b.facing };
    let frozen = GainPattern::cardioid();
    let loss_cfg = small_loss();
    let mut bank = FftBank::new();

    let result = ssl_forward(&field, &mut bank, &loss_cfg, &frozen, &query, true)?;
    let mut grads = vec![0.0; field.net.param_count()];
    field.net.backward(&result.tape, &result.grad_out, &mut grads);

    // The frozen target: the stopped branch rendered at the base
    // parameters, exactly as ssl_forward saw it.
    let weights_a = render_weights(field.quadrature(), &frozen, query.f_a);
    let weights_b = render_weights(field.quadrature(), &frozen, query.f_b);
    let x2 = field.config.encode(query.p_b, query.p_a, query.f_b);
    let h2 = weighted_sum(&field.reshape(field.net.forward(&x2)), &weights_a, t);
    let x1 = field.config.encode(query.p_a, query.p_b, query.f_a);

    let indices = sample_indices(&mut rng, grads.len());
    let checked = indices.len();
    let active_max_rel_err = worst_relative_error(&mut field, &grads, &indices, FD_STEP, |f| {
        let h1 = weighted_sum(&f.reshape(f.net.forward(&x1)), &weights_b, t);
        audio_loss(&mut bank, &loss_cfg, &h1, &h2, None)
    })?;

    // Zero upstream through the stopped branch's tape must stay zero.
    let (_, tape2) = field.net.forward_cached(&x2);
    let mut stopped = vec![0.0; field.net.param_count()];
    field.net.backward(&tape2, &vec![0.0; field.config.output_dim()], &mut stopped);
    let stopped_max_abs = stopped.iter().fold(0.0f64, |m, g| m.max(g.abs()));

    Ok(StopGradientCheck { checked, active_max_rel_err, stopped_max_abs })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn supervised_chain_matches_finite_differences() {
        let c = check_supervised_chain(7).unwrap();
        assert!(c.checked >= 100, "too few samples: {}", c.checked);
        assert!(c.max_rel_err < 1e-4, "max rel err {}", c.max_rel_err);
    }

    #[test]
    fn linear_quadratic_gradient_is_exact_to_rounding() {
        let c = check_linear_quadratic(11).unwrap();
        assert!(c.max_rel_err < 1e-7, "max rel err {}", c.max_rel_err);
    }

    #[test]
    fn stop_gradient_freezes_the_marked_branch() {
        let c = check_stop_gradient(13).unwrap();
        assert!(
            c.active_max_rel_err < 1e-4,
            "active branch err {}",
            c.active_max_rel_err
        );
        assert_eq!(c.stopped_max_abs, 0.0);
    }
}
