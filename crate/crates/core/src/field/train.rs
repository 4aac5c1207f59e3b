//! Field training: Adam over the hand-written network with a cosine
//! learning-rate schedule, in three regimes.
//!
//! - vanilla: supervised on the real training samples.
//! - ele: supervised on the training samples plus their exchange-augmented
//!   twins (added here when the dataset does not already carry them).
//! - ssl: supervised on the real samples for the first half of the epochs;
//!   from the halfway point an extracted emitter pattern is frozen and a
//!   swap-consistency term is added, with a stop-gradient on alternating
//!   branches and position noise that ramps up over the second stage.
//!
//! Bit reproducibility: every batch's gradient is accumulated in a fixed
//! number of chunks, each summed serially in index order, and the chunks
//! are reduced in chunk order. Worker threads only decide which chunk runs
//! where, never the arithmetic order, so results are identical for any
//! thread count, including the `REVERB_VERSA_THREADS` override.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dataset::{ele_augment, Dataset};
use crate::dsp::FftBank;
use crate::field::extract::extract_emitter_pattern;
use crate::field::loss::{audio_loss, LossConfig};
use crate::field::net::Tape;
use crate::field::render::{render_weights, weighted_sum};
use crate::field::{AcousticField, DirectionalField, FieldConfig};
use crate::patterns::GainPattern;
use crate::rng::stream_rng;
use crate::types::{Error, Pose, Result, Sample, Split};
use crate::vec3::Vec3;

/// Environment variable capping the training worker count.
pub const THREADS_ENV: &str = "REVERB_VERSA_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    Vanilla,
    Ele,
    Ssl,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub regime: Regime,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr_max: f64,
    pub lr_min: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub seed: u64,
    pub loss: LossConfig,
    /// Weight of the swap-consistency term in stage 2.
    pub ssl_weight: f64,
    /// Final standard deviation of the stage-2 position noise, meters.
    pub ssl_noise_std: f64,
    /// Probe radius for pattern extraction, meters.
    pub ssl_probe_radius: f64,
    /// Fixed gradient accumulation chunk count (reproducibility unit).
    pub grad_chunks: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            regime: Regime::Vanilla,
            epochs: 40,
            batch_size: 32,
            lr_max: 1e-3,
            lr_min: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            seed: 0,
            loss: LossConfig::default(),
            ssl_weight: 0.8,
            ssl_noise_std: 0.3,
            ssl_probe_radius: 0.3,
            grad_chunks: 8,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 || self.grad_chunks == 0 {
            return Err(Error::Config("epochs, batch size, chunks must be positive".into()));
        }
        if !(self.lr_max > 0.0 && self.lr_min > 0.0 && self.lr_min <= self.lr_max) {
            return Err(Error::Config("need 0 < lr_min <= lr_max".into()));
        }
        self.loss.validate()
    }
}

/// One training-log row. The total objective for the epoch is exactly
/// `supervised_loss + ssl_weight * consistency_loss`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct EpochLog {
    pub epoch: usize,
    /// Mean supervised loss over the epoch's supervised terms.
    pub supervised_loss: f64,
    /// Mean raw consistency loss; 0 outside ssl stage 2.
    pub consistency_loss: f64,
    /// Learning rate at the epoch's first step.
    pub lr: f64,
    /// Consistency-query position noise for this epoch, meters.
    pub noise_std: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct TrainReport {
    /// Per-epoch total objective, `l_a + ssl_weight * l_ssl` exactly.
    pub epoch_losses: Vec<f64>,
    pub epoch_log: Vec<EpochLog>,
    pub final_loss: f64,
    pub steps: usize,
    /// Mean rendered energy at the stage boundary and after training
    /// (ssl regime only), used by the collapse guard.
    pub stage1_energy: Option<f64>,
    pub final_energy: Option<f64>,
    /// The frozen pattern stage 2 trained against (ssl regime only).
    pub extracted_pattern: Option<GainPattern>,
}

#[derive(Debug, Clone)]
pub struct TrainedField {
    pub field: AcousticField,
    pub report: TrainReport,
}

/// One prepared training example: encoded inputs are recomputed on the fly,
/// but targets are fixed per run.
pub(super) struct Example {
    pub(super) emitter: Pose,
    pub(super) listener: Pose,
    pub(super) target: Vec<f64>,
}

/// Stage-2 consistency query: both orderings of a noised pair.
pub(super) struct SslQuery {
    pub(super) p_a: Vec3,
    pub(super) p_b: Vec3,
    pub(super) f_a: Vec3,
    pub(super) f_b: Vec3,
}

fn prepare_examples(
    samples: &[&Sample],
    field_config: &FieldConfig,
    expect_rate: f64,
) -> Result<Vec<Example>> {
    let t = field_config.time_len();
    let mut out = Vec::with_capacity(samples.len());
    for s in samples {
        if (s.ir.sample_rate - expect_rate).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "dataset rate {} Hz differs from field rate {} Hz; simulate at the field rate",
                s.ir.sample_rate, expect_rate
            )));
        }
        let mut target = s.ir.samples.clone();
        target.resize(t, 0.0);
        out.push(Example { emitter: s.emitter.clone(), listener: s.listener.clone(), target });
    }
    Ok(out)
}

/// dL/dh pulled back through the weighted slice sum into the flat network
/// output layout.
pub(super) fn render_adjoint(grad_h: &[f64], weights: &[f64], t: usize) -> Vec<f64> {
    let mut grad_out = vec![0.0; weights.len() * t];
    for (i, &w) in weights.iter().enumerate() {
        if w != 0.0 {
            for (j, &g) in grad_h.iter().enumerate() {
                grad_out[i * t + j] = w * g;
            }
        }
    }
    grad_out
}

pub(super) struct ForwardResult {
    pub(super) loss: f64,
    pub(super) tape: Tape,
    pub(super) grad_out: Vec<f64>,
}

/// Supervised forward and loss gradient for one example at the current
/// parameters. Returns what backward needs; the caller owns accumulation.
pub(super) fn supervised_forward(
    field: &AcousticField,
    bank: &mut FftBank,
    loss_cfg: &LossConfig,
    listener_pattern: &GainPattern,
    ex: &Example,
) -> Result<ForwardResult> {
    let t = field.config.time_len();
    let x = field.config.encode(ex.emitter.position, ex.listener.position, ex.emitter.facing);
    let (flat, tape) = field.net.forward_cached(&x);
    let slices = field.reshape(flat);
    let weights = render_weights(field.quadrature(), listener_pattern, ex.listener.facing);
    let h = weighted_sum(&slices, &weights, t);
    let mut grad_h = vec![0.0; t];
    let loss = audio_loss(bank, loss_cfg, &h, &ex.target, Some(&mut grad_h))?;
    Ok(ForwardResult { loss, tape, grad_out: render_adjoint(&grad_h, &weights, t) })
}

/// Swap-consistency forward: render both orderings against the frozen
/// extracted pattern, treat one branch as the constant target, and return
/// the gradient path of the active branch only. The stopped branch's tape
/// is dropped without ever being backpropagated, which is the stop
/// gradient, exactly.
pub(super) fn ssl_forward(
    field: &AcousticField,
    bank: &mut FftBank,
    loss_cfg: &LossConfig,
    frozen: &GainPattern,
    q: &SslQuery,
    first_active: bool,
) -> Result<ForwardResult> {
    let t = field.config.time_len();
    let weights_b = render_weights(field.quadrature(), frozen, q.f_b);
    let weights_a = render_weights(field.quadrature(), frozen, q.f_a);

    let x1 = field.config.encode(q.p_a, q.p_b, q.f_a);
    let (flat1, tape1) = field.net.forward_cached(&x1);
    let h1 = weighted_sum(&field.reshape(flat1), &weights_b, t);

    let x2 = field.config.encode(q.p_b, q.p_a, q.f_b);
    let (flat2, tape2) = field.net.forward_cached(&x2);
    let h2 = weighted_sum(&field.reshape(flat2), &weights_a, t);

    // The tape not selected here falls out of scope unread; that is the
    // stop gradient.
    let (pred, target, tape, weights) = if first_active {
        (h1, h2, tape1, weights_b)
    } else {
        (h2, h1, tape2, weights_a)
    };

    let mut grad_h = vec![0.0; t];
    let loss = audio_loss(bank, loss_cfg, &pred, &target, Some(&mut grad_h))?;
    Ok(ForwardResult { loss, tape, grad_out: render_adjoint(&grad_h, &weights, t) })
}

/// Work description for one gradient chunk of a batch.
enum Task<'a> {
    Supervised(&'a Example),
    Consistency(&'a SslQuery, bool),
}

/// Mean rendered energy over a fixed probe set; the ssl collapse guard
/// compares this before and after stage 2.
fn mean_rendered_energy(
    field: &AcousticField,
    listener_pattern: &GainPattern,
    examples: &[Example],
) -> Result<f64> {
    let n = examples.len().min(16);
    if n == 0 {
        return Ok(0.0);
    }
    let t = field.config.time_len();
    let mut acc = 0.0;
    for ex in &examples[..n] {
        let slices =
            field.directional_slices(ex.emitter.position, ex.listener.position, ex.emitter.facing)?;
        let weights = render_weights(field.quadrature(), listener_pattern, ex.listener.facing);
        let h = weighted_sum(&slices, &weights, t);
        acc += h.iter().map(|v| v * v).sum::<f64>();
    }
    Ok(acc / n as f64)
}

fn clamp_into_room(p: Vec3, dims: Vec3, margin: f64) -> Vec3 {
    Vec3::new(
        p.x.clamp(margin, dims.x - margin),
        p.y.clamp(margin, dims.y - margin),
        p.z.clamp(margin, dims.z - margin),
    )
}

/// Trains a field on the dataset's training split. Reads
/// [`THREADS_ENV`] to cap the worker pool; results do not depend on it.
pub fn train(
    dataset: &Dataset,
    field_config: &FieldConfig,
    config: &TrainConfig,
) -> Result<TrainedField> {
    let workers = std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n > 0);
    train_with_workers(dataset, field_config, config, workers)
}

/// [`train`] with an explicit worker count (None: the global default pool).
pub fn train_with_workers(
    dataset: &Dataset,
    field_config: &FieldConfig,
    config: &TrainConfig,
    workers: Option<usize>,
) -> Result<TrainedField> {
    config.validate()?;
    field_config.validate()?;

    // Assemble the training view per regime.
    let augmented;
    let working: &Dataset = match config.regime {
        Regime::Ele => {
            if dataset.samples.iter().any(|s| s.is_virtual) {
                dataset
            } else {
                augmented = ele_augment(dataset);
                &augmented
            }
        }
        _ => dataset,
    };
    let train_samples: Vec<&Sample> = working
        .samples
        .iter()
        .filter(|s| {
            s.split == Split::Train && (config.regime == Regime::Ele || !s.is_virtual)
        })
        .collect();
    if train_samples.is_empty() {
        return Err(Error::Train("no training samples".into()));
    }
    let listener_pattern = working.header.scene.listener_pattern.clone();
    let examples =
        prepare_examples(&train_samples, field_config, field_config.sample_rate)?;
    // Real (non-virtual) examples drive the ssl consistency queries.
    let real_examples: Vec<usize> = train_samples
        .iter()
        .enumerate()
        .filter(|(_, s)| !s.is_virtual)
        .map(|(i, _)| i)
        .collect();

    let mut field = AcousticField::new(field_config.clone())?;
    let n_params = field.net.param_count();
    let mut adam_m = vec![0.0; n_params];
    let mut adam_v = vec![0.0; n_params];
    let mut adam_t = 0u64;

    let batches_per_epoch = examples.len().div_ceil(config.batch_size);
    let total_steps = (config.epochs * batches_per_epoch).max(1);
    let stage2_start = match config.regime {
        Regime::Ssl => config.epochs / 2,
        _ => config.epochs,
    };

    let pool = match workers {
        Some(n) => Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::Train(format!("worker pool: {e}")))?,
        ),
        None => None,
    };

    let mut report = TrainReport {
        epoch_losses: Vec::with_capacity(config.epochs),
        epoch_log: Vec::with_capacity(config.epochs),
        final_loss: f64::NAN,
        steps: 0,
        stage1_energy: None,
        final_energy: None,
        extracted_pattern: None,
    };
    let mut frozen_pattern: Option<GainPattern> = None;
    let mut step = 0usize;
    let mut batch_counter = 0u64;

    for epoch in 0..config.epochs {
        // Stage boundary: freeze the extracted emitter pattern and record
        // the reference energy for the collapse guard.
        if config.regime == Regime::Ssl && epoch == stage2_start && frozen_pattern.is_none() {
            let mut mean_coeffs = [0.0; crate::patterns::ZONAL_COEFFS];
            let mut distinct: Vec<&Pose> = Vec::new();
            for &i in &real_examples {
                let e = &examples[i].emitter;
                if !distinct
                    .iter()
                    .any(|p| p.position.distance(e.position) < 1e-9)
                {
                    distinct.push(e);
                }
            }
            for e in &distinct {
                let pat = extract_emitter_pattern(&field, e, config.ssl_probe_radius)?;
                let coeffs = pat.zonal_sh_coefficients().ok_or_else(|| {
                    Error::Pattern("extraction should produce a zonal pattern".into())
                })?;
                for (acc, c) in mean_coeffs.iter_mut().zip(coeffs.iter()) {
                    *acc += c / distinct.len() as f64;
                }
            }
            // zonal_sh_coefficients is the SH view; from_zonal wants the
            // Legendre view, one scale factor per degree apart.
            let legendre: Vec<f64> = mean_coeffs
                .iter()
                .zip(crate::patterns::ZONAL_SH_NORM.iter())
                .map(|(a, n)| a * n)
                .collect();
            let pattern =
                GainPattern::from_zonal(legendre, crate::patterns::DEFAULT_FLOOR)?;
            report.stage1_energy =
                Some(mean_rendered_energy(&field, &listener_pattern, &examples)?);
            report.extracted_pattern = Some(pattern.clone());
            frozen_pattern = Some(pattern);
        }

        // Epoch order and stage-2 noise are drawn sequentially up front so
        // chunked execution cannot change them.
        let mut epoch_rng = stream_rng(config.seed, 0x6570 + epoch as u64);
        let mut order: Vec<usize> = (0..examples.len()).collect();
        for i in (1..order.len()).rev() {
            order.swap(i, epoch_rng.gen_range(0..=i));
        }
        let sigma = if frozen_pattern.is_some() {
            let stage_len = (config.epochs - stage2_start).max(1);
            let ramp = (epoch - stage2_start + 1) as f64 / stage_len as f64;
            config.ssl_noise_std * ramp
        } else {
            0.0
        };
        let ssl_queries: Vec<SslQuery> = if frozen_pattern.is_some() {
            let dims = field_config.room_dimensions;
            real_examples
                .iter()
                .map(|&i| {
                    let ex = &examples[i];
                    let mut jitter = || {
                        Vec3::new(
                            sigma * epoch_rng.sample::<f64, _>(StandardNormal),
                            sigma * epoch_rng.sample::<f64, _>(StandardNormal),
                            sigma * epoch_rng.sample::<f64, _>(StandardNormal),
                        )
                    };
                    SslQuery {
                        p_a: clamp_into_room(ex.emitter.position + jitter(), dims, 0.1),
                        p_b: clamp_into_room(ex.listener.position + jitter(), dims, 0.1),
                        f_a: ex.emitter.facing,
                        f_b: ex.listener.facing,
                    }
                })
                .collect()
        } else {
            Vec::new()
        };

        let epoch_lr = config.lr_min
            + 0.5 * (config.lr_max - config.lr_min)
                * (1.0 + (std::f64::consts::PI * step as f64 / total_steps as f64).cos());
        let mut epoch_sup = 0.0;
        let mut epoch_sup_terms = 0usize;
        let mut epoch_ssl = 0.0;
        let mut epoch_ssl_terms = 0usize;

        for batch_start in (0..order.len()).step_by(config.batch_size) {
            let batch: &[usize] = &order[batch_start..(batch_start + config.batch_size).min(order.len())];

            // Build the task list: supervised terms, plus consistency terms
            // in stage 2 with the stopped branch alternating per batch.
            let first_active = batch_counter % 2 == 0;
            let mut consistency: Vec<&SslQuery> = Vec::new();
            if frozen_pattern.is_some() {
                for &i in batch {
                    // Consistency queries follow the batch's real examples;
                    // virtual twins never appear in the ssl regime.
                    if let Some(pos) = real_examples.iter().position(|&r| r == i) {
                        consistency.push(&ssl_queries[pos]);
                    }
                }
            }
            // Per-task gradient scales such that the batch gradient is
            // exactly d/dtheta of mean(l_a) + ssl_weight * mean(l_ssl).
            let sup_scale = 1.0 / batch.len() as f64;
            let ssl_scale = if consistency.is_empty() {
                0.0
            } else {
                config.ssl_weight / consistency.len() as f64
            };
            let mut tasks: Vec<(Task, f64)> =
                Vec::with_capacity(batch.len() + consistency.len());
            for &i in batch {
                tasks.push((Task::Supervised(&examples[i]), sup_scale));
            }
            for q in &consistency {
                tasks.push((Task::Consistency(q, first_active), ssl_scale));
            }

            // Fixed chunking: task j goes to chunk j % grad_chunks; each
            // chunk accumulates serially in task order, and chunks merge in
            // chunk order below. Threading cannot reorder any of it.
            let chunk_count = config.grad_chunks;
            type ChunkOut = (f64, usize, f64, usize, Vec<f64>);
            let run = |chunk_id: usize| -> Result<ChunkOut> {
                let mut bank = FftBank::new();
                let mut grads = vec![0.0; n_params];
                let mut sup_sum = 0.0;
                let mut sup_terms = 0usize;
                let mut ssl_sum = 0.0;
                let mut ssl_terms = 0usize;
                for (j, (task, scale)) in tasks.iter().enumerate() {
                    if j % chunk_count != chunk_id {
                        continue;
                    }
                    let result = match task {
                        Task::Supervised(ex) => {
                            let r = supervised_forward(
                                &field,
                                &mut bank,
                                &config.loss,
                                &listener_pattern,
                                ex,
                            )?;
                            sup_sum += r.loss;
                            sup_terms += 1;
                            r
                        }
                        Task::Consistency(q, active) => {
                            let r = ssl_forward(
                                &field,
                                &mut bank,
                                &config.loss,
                                frozen_pattern.as_ref().expect("stage 2"),
                                q,
                                *active,
                            )?;
                            ssl_sum += r.loss;
                            ssl_terms += 1;
                            r
                        }
                    };
                    let scaled: Vec<f64> =
                        result.grad_out.iter().map(|g| g * scale).collect();
                    field.net.backward(&result.tape, &scaled, &mut grads);
                }
                Ok((sup_sum, sup_terms, ssl_sum, ssl_terms, grads))
            };
            let chunk_results: Vec<Result<ChunkOut>> = match &pool {
                Some(p) => p.install(|| {
                    use rayon::prelude::*;
                    (0..chunk_count).into_par_iter().map(run).collect()
                }),
                None => {
                    use rayon::prelude::*;
                    (0..chunk_count).into_par_iter().map(run).collect()
                }
            };

            let mut grads = vec![0.0; n_params];
            let mut sup_sum = 0.0;
            let mut sup_terms = 0usize;
            let mut ssl_sum = 0.0;
            let mut ssl_terms = 0usize;
            for r in chunk_results {
                let (s, st, c, ct, g) = r?;
                sup_sum += s;
                sup_terms += st;
                ssl_sum += c;
                ssl_terms += ct;
                for (acc, v) in grads.iter_mut().zip(g.iter()) {
                    *acc += v;
                }
            }
            if sup_terms + ssl_terms == 0 {
                continue;
            }
            let batch_loss = sup_sum / sup_terms.max(1) as f64
                + if ssl_terms > 0 {
                    config.ssl_weight * ssl_sum / ssl_terms as f64
                } else {
                    0.0
                };
            if !batch_loss.is_finite() {
                return Err(Error::Train(format!(
                    "non-finite loss at step {step} (epoch {epoch})"
                )));
            }

            // Adam with cosine-annealed learning rate.
            let progress = step as f64 / total_steps as f64;
            let lr = config.lr_min
                + 0.5 * (config.lr_max - config.lr_min)
                    * (1.0 + (std::f64::consts::PI * progress).cos());
            adam_t += 1;
            let bc1 = 1.0 - config.beta1.powi(adam_t as i32);
            let bc2 = 1.0 - config.beta2.powi(adam_t as i32);
            for i in 0..n_params {
                let g = grads[i];
                if !g.is_finite() {
                    return Err(Error::Train(format!("non-finite gradient at step {step}")));
                }
                adam_m[i] = config.beta1 * adam_m[i] + (1.0 - config.beta1) * g;
                adam_v[i] = config.beta2 * adam_v[i] + (1.0 - config.beta2) * g * g;
                let m_hat = adam_m[i] / bc1;
                let v_hat = adam_v[i] / bc2;
                field.net.params[i] -= lr * m_hat / (v_hat.sqrt() + config.adam_eps);
            }

            epoch_sup += sup_sum;
            epoch_sup_terms += sup_terms;
            epoch_ssl += ssl_sum;
            epoch_ssl_terms += ssl_terms;
            step += 1;
            batch_counter += 1;
        }

        let l_a = if epoch_sup_terms > 0 {
            epoch_sup / epoch_sup_terms as f64
        } else {
            f64::NAN
        };
        let l_ssl = if epoch_ssl_terms > 0 { epoch_ssl / epoch_ssl_terms as f64 } else { 0.0 };
        report.epoch_losses.push(l_a + config.ssl_weight * l_ssl);
        report.epoch_log.push(EpochLog {
            epoch,
            supervised_loss: l_a,
            consistency_loss: l_ssl,
            lr: epoch_lr,
            noise_std: sigma,
        });
    }

    report.steps = step;
    report.final_loss = report.epoch_losses.last().copied().unwrap_or(f64::NAN);

    if config.regime == Regime::Ssl {
        let final_energy = mean_rendered_energy(&field, &listener_pattern, &examples)?;
        report.final_energy = Some(final_energy);
        if let Some(stage1) = report.stage1_energy {
            if stage1 > 0.0 && final_energy < 0.5 * stage1 {
                return Err(Error::Train(format!(
                    "consistency stage collapsed the field: energy {final_energy:.3e} fell \
                     below half of {stage1:.3e}"
                )));
            }
        }
    }

    Ok(TrainedField { field, report })
}
