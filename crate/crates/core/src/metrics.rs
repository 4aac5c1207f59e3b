//! Acoustic error metrics between impulse responses.
//!
//! Six quantities, reported in a fixed CSV column order: `amp` (mean
//! absolute difference of magnitude spectra), `env` (mean absolute
//! difference of Hilbert envelopes), `t60` (relative reverberation-time
//! error in percent), `c50` (clarity difference in dB), `edt` (early decay
//! time difference in milliseconds), `stft` (multi-resolution spectral
//! loss). The pairwise spectral metrics are symmetric in their arguments;
//! the spectral-convergence term is normalized by the mean of the two
//! spectrum norms to keep that symmetry.

use crate::dsp::{frame_layout, hann, FftBank};
use crate::types::{Error, ImpulseResponse, Result};

/// Decay-curve floor in dB.
pub const SCHROEDER_FLOOR_DB: f64 = -120.0;
/// Window sizes of the multi-resolution STFT loss.
pub const STFT_WINDOWS: [usize; 3] = [64, 256, 1024];
/// Hop is this fraction of the window (75% overlap).
pub const STFT_HOP_DIV: usize = 4;
/// Additive guard inside log magnitudes.
pub const LOG_EPS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricReport {
    pub amp: f64,
    pub env: f64,
    /// Percent relative T60 difference.
    pub t60: f64,
    /// Absolute C50 difference in dB.
    pub c50: f64,
    /// Absolute EDT difference in milliseconds.
    pub edt: f64,
    pub stft: f64,
}

impl MetricReport {
    pub fn csv_header() -> &'static str {
        "amp,env,t60,c50,edt,stft"
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{:.8e},{:.8e},{:.8e},{:.8e},{:.8e},{:.8e}",
            self.amp, self.env, self.t60, self.c50, self.edt, self.stft
        )
    }

    pub fn as_array(&self) -> [f64; 6] {
        [self.amp, self.env, self.t60, self.c50, self.edt, self.stft]
    }

    pub const METRIC_NAMES: [&'static str; 6] = ["amp", "env", "t60", "c50", "edt", "stft"];
}

fn check_pair(a: &ImpulseResponse, b: &ImpulseResponse) -> Result<()> {
    if a.sample_rate != b.sample_rate {
        return Err(Error::Config(format!(
            "sample rates differ: {} vs {}",
            a.sample_rate, b.sample_rate
        )));
    }
    if a.is_empty() || b.is_empty() {
        return Err(Error::SilentSignal("empty impulse response".into()));
    }
    Ok(())
}

/// Backward-integrated energy decay in dB: 0 at the first sample,
/// monotonically non-increasing, clamped at -120 dB.
pub fn schroeder_curve(ir: &ImpulseResponse) -> Result<Vec<f64>> {
    if ir.is_empty() {
        return Err(Error::SilentSignal("empty impulse response".into()));
    }
    let mut tails = vec![0.0; ir.len()];
    let mut acc = 0.0;
    for (i, &s) in ir.samples.iter().enumerate().rev() {
        acc += s * s;
        tails[i] = acc;
    }
    let total = tails[0];
    if total <= 0.0 {
        return Err(Error::SilentSignal("impulse response has zero energy".into()));
    }
    Ok(tails
        .iter()
        .map(|&t| {
            if t <= 0.0 {
                SCHROEDER_FLOOR_DB
            } else {
                (10.0 * (t / total).log10()).max(SCHROEDER_FLOOR_DB)
            }
        })
        .collect())
}

/// Least-squares slope of curve[i0..=i1] in dB per second.
fn fit_slope(curve: &[f64], sample_rate: f64, i0: usize, i1: usize) -> Option<f64> {
    if i1 <= i0 {
        return None;
    }
    let n = (i1 - i0 + 1) as f64;
    let (mut st, mut sy, mut stt, mut sty) = (0.0, 0.0, 0.0, 0.0);
    for i in i0..=i1 {
        let t = i as f64 / sample_rate;
        let y = curve[i];
        st += t;
        sy += y;
        stt += t * t;
        sty += t * y;
    }
    let denom = n * stt - st * st;
    if denom.abs() < 1e-30 {
        return None;
    }
    Some((n * sty - st * sy) / denom)
}

fn first_at_or_below(curve: &[f64], level: f64) -> Option<usize> {
    curve.iter().position(|&v| v <= level)
}

/// Reverberation time: the decay curve is fit between -5 and -35 dB and the
/// slope extrapolated to a 60 dB fall. Errors when the curve never reaches
/// -35 dB.
pub fn t60(ir: &ImpulseResponse) -> Result<f64> {
    let curve = schroeder_curve(ir)?;
    decay_time_from_fit(&curve, ir.sample_rate, -5.0, -35.0)
}

/// Early decay time: slope of the 0 to -10 dB stretch extrapolated to a
/// 60 dB fall.
pub fn edt(ir: &ImpulseResponse) -> Result<f64> {
    let curve = schroeder_curve(ir)?;
    decay_time_from_fit(&curve, ir.sample_rate, 0.0, -10.0)
}

fn decay_time_from_fit(curve: &[f64], sample_rate: f64, top: f64, bottom: f64) -> Result<f64> {
    let i0 = first_at_or_below(curve, top)
        .ok_or(Error::InsufficientDecay { reached_db: *curve.last().unwrap() })?;
    let i1 = first_at_or_below(curve, bottom)
        .ok_or(Error::InsufficientDecay { reached_db: *curve.last().unwrap() })?;
    let slope = fit_slope(curve, sample_rate, i0, i1)
        .ok_or(Error::InsufficientDecay { reached_db: curve[i1] })?;
    if slope >= 0.0 {
        return Err(Error::InsufficientDecay { reached_db: curve[i1] });
    }
    Ok(-60.0 / slope)
}

/// Clarity index: energy up to 50 ms after the direct arrival over energy
/// past it, in dB, clamped to [-100, 100]. The direct arrival is the first
/// sample whose magnitude exceeds 20% of the global peak; the early window
/// is half-open, so a reflection landing exactly on the 50 ms boundary
/// counts as late.
pub fn c50(ir: &ImpulseResponse) -> Result<f64> {
    let peak = ir.peak_abs();
    if peak <= 0.0 {
        return Err(Error::SilentSignal("impulse response has zero energy".into()));
    }
    let threshold = 0.2 * peak;
    let direct = ir
        .samples
        .iter()
        .position(|s| s.abs() > threshold)
        .expect("peak exceeds its own threshold");
    let n50 = (0.05 * ir.sample_rate).round() as usize;
    let split = (direct + n50).min(ir.len());
    let early: f64 = ir.samples[direct..split].iter().map(|s| s * s).sum();
    let late: f64 = ir.samples[split..].iter().map(|s| s * s).sum();
    if late <= 0.0 {
        return Ok(100.0);
    }
    if early <= 0.0 {
        return Ok(-100.0);
    }
    Ok((10.0 * (early / late).log10()).clamp(-100.0, 100.0))
}

/// Mean absolute difference of the two magnitude spectra, over the
/// non-negative-frequency bins of a common-length DFT (the shorter signal
/// is zero-padded).
pub fn amp_err(a: &ImpulseResponse, b: &ImpulseResponse) -> Result<f64> {
    check_pair(a, b)?;
    let n = a.len().max(b.len());
    let mut bank = FftBank::new();
    let ma = bank.magnitude_spectrum(&a.samples, n);
    let mb = bank.magnitude_spectrum(&b.samples, n);
    let sum: f64 = ma.iter().zip(mb.iter()).map(|(x, y)| (x - y).abs()).sum();
    Ok(sum / ma.len() as f64)
}

/// Mean absolute difference of the Hilbert envelopes.
pub fn env_err(a: &ImpulseResponse, b: &ImpulseResponse) -> Result<f64> {
    check_pair(a, b)?;
    let n = a.len().max(b.len());
    let mut bank = FftBank::new();
    let ea = bank.analytic_envelope(&a.samples, n);
    let eb = bank.analytic_envelope(&b.samples, n);
    let sum: f64 = ea.iter().zip(eb.iter()).map(|(x, y)| (x - y).abs()).sum();
    Ok(sum / n as f64)
}

/// One STFT resolution: stacked per-frame magnitude spectra.
fn stft_magnitudes(bank: &mut FftBank, x: &[f64], win: usize, hop: usize, len: usize) -> Vec<f64> {
    let (frames, padded) = frame_layout(len, win, hop);
    let mut signal = x.to_vec();
    signal.resize(padded, 0.0);
    let window = hann(win);
    let mut out = Vec::with_capacity(frames * (win / 2 + 1));
    let mut frame = vec![0.0; win];
    for f in 0..frames {
        let start = f * hop;
        for i in 0..win {
            frame[i] = signal[start + i] * window[i];
        }
        out.extend(bank.magnitude_spectrum(&frame, win));
    }
    out
}

/// Multi-resolution STFT error: for each window in [`STFT_WINDOWS`] compute
/// a symmetrized spectral-convergence term plus a log-magnitude L1 term,
/// then average over resolutions. Zero exactly when the inputs match.
pub fn stft_err(a: &ImpulseResponse, b: &ImpulseResponse) -> Result<f64> {
    check_pair(a, b)?;
    let len = a.len().max(b.len());
    let mut bank = FftBank::new();
    let mut total = 0.0;
    for &win in &STFT_WINDOWS {
        let hop = win / STFT_HOP_DIV;
        let ma = stft_magnitudes(&mut bank, &a.samples, win, hop, len);
        let mb = stft_magnitudes(&mut bank, &b.samples, win, hop, len);
        let mut diff_sq = 0.0;
        let mut norm_a = 0.0;
        let mut norm_b = 0.0;
        let mut log_l1 = 0.0;
        for (x, y) in ma.iter().zip(mb.iter()) {
            diff_sq += (x - y) * (x - y);
            norm_a += x * x;
            norm_b += y * y;
            log_l1 += ((x + LOG_EPS).ln() - (y + LOG_EPS).ln()).abs();
        }
        let convergence = if diff_sq == 0.0 {
            0.0
        } else {
            diff_sq.sqrt() / (0.5 * (norm_a.sqrt() + norm_b.sqrt()))
        };
        total += convergence + log_l1 / ma.len() as f64;
    }
    Ok(total / STFT_WINDOWS.len() as f64)
}

/// All six metrics of `pred` against `truth`. T60 is relative (percent of
/// the truth value), C50 absolute in dB, EDT absolute in milliseconds.
pub fn metric_report(pred: &ImpulseResponse, truth: &ImpulseResponse) -> Result<MetricReport> {
    check_pair(pred, truth)?;
    let t60_truth = t60(truth)?;
    let report = MetricReport {
        amp: amp_err(pred, truth)?,
        env: env_err(pred, truth)?,
        t60: 100.0 * (t60(pred)? - t60_truth).abs() / t60_truth,
        c50: (c50(pred)? - c50(truth)?).abs(),
        edt: 1000.0 * (edt(pred)? - edt(truth)?).abs(),
        stft: stft_err(pred, truth)?,
    };
    Ok(report)
}

/// Names for the entries of [`symmetric_distances`], in order.
pub const SYMMETRIC_DISTANCE_NAMES: [&str; 5] = ["amp", "env", "t60", "c50", "edt"];

/// Order-independent per-metric distances between two responses; None
/// where a metric is undefined on either input. Unlike [`metric_report`]
/// neither argument plays the role of ground truth, so swapping the
/// arguments leaves every entry unchanged.
pub fn symmetric_distances(a: &ImpulseResponse, b: &ImpulseResponse) -> [Option<f64>; 5] {
    let pairwise = |f: fn(&ImpulseResponse) -> Result<f64>| -> Option<f64> {
        match (f(a), f(b)) {
            (Ok(x), Ok(y)) => Some((x - y).abs()),
            _ => None,
        }
    };
    [
        amp_err(a, b).ok(),
        env_err(a, b).ok(),
        pairwise(t60),
        pairwise(c50),
        pairwise(edt),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exp_decay(tau: f64, sample_rate: f64, duration: f64) -> ImpulseResponse {
        let n = (sample_rate * duration) as usize;
        let samples = (0..n).map(|i| (-(i as f64) / (sample_rate * tau)).exp()).collect();
        ImpulseResponse::new(samples, sample_rate)
    }

    #[test]
    fn schroeder_starts_at_zero_and_never_rises() {
        let ir = exp_decay(0.05, 8000.0, 0.5);
        let curve = schroeder_curve(&ir).unwrap();
        assert_eq!(curve[0], 0.0);
        for w in curve.windows(2) {
            assert!(w[1] <= w[0]);
        }
        assert!(curve.iter().all(|&v| v >= SCHROEDER_FLOOR_DB));
    }

    #[test]
    fn schroeder_rejects_silence() {
        let ir = ImpulseResponse::zeros(100, 8000.0);
        assert!(matches!(schroeder_curve(&ir), Err(Error::SilentSignal(_))));
    }

    // Closed-form oracle: an exponential amplitude envelope exp(-t/tau) has
    // an energy decay of 20/ln(10)/tau dB per second, so T60 = 3 tau ln 10.
    #[test]
    fn t60_and_edt_match_exponential_closed_form() {
        for tau in [0.02, 0.05, 0.1] {
            let expected = 3.0 * tau * 10.0_f64.ln();
            let ir = exp_decay(tau, 8000.0, 1.0);
            let got_t60 = t60(&ir).unwrap();
            let got_edt = edt(&ir).unwrap();
            assert!(
                (got_t60 - expected).abs() / expected < 0.02,
                "tau {tau}: t60 {got_t60} vs {expected}"
            );
            assert!(
                (got_edt - expected).abs() / expected < 0.02,
                "tau {tau}: edt {got_edt} vs {expected}"
            );
        }
    }

    #[test]
    fn t60_errors_when_decay_is_too_shallow() {
        let ir = ImpulseResponse::new(vec![1.0; 1000], 8000.0);
        assert!(matches!(t60(&ir), Err(Error::InsufficientDecay { .. })));
    }

    #[test]
    fn c50_of_balanced_impulse_pair_is_zero() {
        // Two equal impulses 50 ms apart: the first is the direct arrival,
        // the second lands on the boundary and counts as late.
        let sample_rate = 8000.0;
        let mut samples = vec![0.0; 1600];
        samples[(0.010 * sample_rate) as usize] = 0.7;
        samples[(0.060 * sample_rate) as usize] = 0.7;
        let got = c50(&ImpulseResponse::new(samples, sample_rate)).unwrap();
        assert!(got.abs() <= 0.01, "c50 {got}");
    }

    #[test]
    fn c50_clamps_when_one_side_is_empty() {
        let sample_rate = 8000.0;
        let mut early_only = vec![0.0; 1600];
        early_only[10] = 1.0;
        assert_eq!(c50(&ImpulseResponse::new(early_only, sample_rate)).unwrap(), 100.0);
    }

    #[test]
    fn identical_inputs_give_exact_zeros() {
        let ir = exp_decay(0.04, 8000.0, 0.4);
        let r = metric_report(&ir, &ir).unwrap();
        assert_eq!(r.as_array(), [0.0; 6]);
    }

    #[test]
    fn amp_err_of_doubled_signal_is_mean_magnitude() {
        let ir = exp_decay(0.03, 8000.0, 0.1);
        let doubled = ImpulseResponse::new(ir.samples.iter().map(|s| 2.0 * s).collect(), 8000.0);
        let got = amp_err(&ir, &doubled).unwrap();
        // Independent naive-DFT oracle for the mean magnitude.
        let n = ir.len();
        let mean_mag: f64 = (0..n / 2 + 1)
            .map(|k| {
                let (mut re, mut im) = (0.0, 0.0);
                for (j, &v) in ir.samples.iter().enumerate() {
                    let ph = -2.0 * std::f64::consts::PI * (k * j) as f64 / n as f64;
                    re += v * ph.cos();
                    im += v * ph.sin();
                }
                (re * re + im * im).sqrt()
            })
            .sum::<f64>()
            / (n / 2 + 1) as f64;
        assert!((got - mean_mag).abs() / mean_mag < 1e-9, "{got} vs {mean_mag}");
    }

    #[test]
    fn pairwise_metrics_are_symmetric() {
        let a = exp_decay(0.03, 8000.0, 0.2);
        let mut b = exp_decay(0.05, 8000.0, 0.2);
        for (i, s) in b.samples.iter_mut().enumerate() {
            *s *= 1.0 + 0.3 * ((i as f64) * 0.05).sin();
        }
        assert_eq!(stft_err(&a, &b).unwrap(), stft_err(&b, &a).unwrap());
        assert_eq!(env_err(&a, &b).unwrap(), env_err(&b, &a).unwrap());
        assert_eq!(amp_err(&a, &b).unwrap(), amp_err(&b, &a).unwrap());
    }

    #[test]
    fn pairwise_metrics_reject_rate_mismatch() {
        let a = exp_decay(0.03, 8000.0, 0.2);
        let b = exp_decay(0.03, 16000.0, 0.2);
        assert!(amp_err(&a, &b).is_err());
        assert!(stft_err(&a, &b).is_err());
    }

    #[test]
    fn report_units_are_sane() {
        let truth = exp_decay(0.05, 8000.0, 0.6);
        let pred = exp_decay(0.055, 8000.0, 0.6);
        let r = metric_report(&pred, &truth).unwrap();
        // T60 scales linearly with tau, so the relative error is ~10%.
        assert!((r.t60 - 10.0).abs() < 1.0, "t60 {}", r.t60);
        assert!(r.stft > 0.0 && r.amp > 0.0 && r.env > 0.0);
    }
}
