//! FFT plumbing shared by the metrics and the field loss: cached complex
//! plans, magnitude spectra, analytic envelopes, and framed STFTs. All f64;
//! rustfft does the transforms, everything around them is explicit so the
//! loss backward pass can mirror each step.

use std::collections::HashMap;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftDirection, FftPlanner};

/// Plan cache. Forward and inverse plans per size; rustfft transforms are
/// unnormalized in both directions, which is exactly what the adjoint in
/// the loss backward pass needs.
pub struct FftBank {
    planner: FftPlanner<f64>,
    forward: HashMap<usize, Arc<dyn Fft<f64>>>,
    inverse: HashMap<usize, Arc<dyn Fft<f64>>>,
}

impl FftBank {
    pub fn new() -> FftBank {
        FftBank { planner: FftPlanner::new(), forward: HashMap::new(), inverse: HashMap::new() }
    }

    pub fn forward(&mut self, n: usize) -> Arc<dyn Fft<f64>> {
        let planner = &mut self.planner;
        self.forward
            .entry(n)
            .or_insert_with(|| planner.plan_fft(n, FftDirection::Forward))
            .clone()
    }

    pub fn inverse(&mut self, n: usize) -> Arc<dyn Fft<f64>> {
        let planner = &mut self.planner;
        self.inverse
            .entry(n)
            .or_insert_with(|| planner.plan_fft(n, FftDirection::Inverse))
            .clone()
    }

    /// Unnormalized DFT of a real signal zero-padded to length n.
    pub fn dft_padded(&mut self, x: &[f64], n: usize) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = Vec::with_capacity(n);
        buf.extend(x.iter().take(n).map(|&v| Complex64::new(v, 0.0)));
        buf.resize(n, Complex64::new(0.0, 0.0));
        self.forward(n).process(&mut buf);
        buf
    }

    /// Magnitudes of the non-negative-frequency bins (0 ..= n/2) of the
    /// padded DFT.
    pub fn magnitude_spectrum(&mut self, x: &[f64], n: usize) -> Vec<f64> {
        let spec = self.dft_padded(x, n);
        spec[..n / 2 + 1].iter().map(|c| c.norm()).collect()
    }

    /// Magnitude of the analytic signal (Hilbert envelope) of x padded to
    /// length n. Negative frequencies are zeroed, positive ones doubled, DC
    /// and Nyquist kept as-is.
    pub fn analytic_envelope(&mut self, x: &[f64], n: usize) -> Vec<f64> {
        let mut spec = self.dft_padded(x, n);
        let half = n / 2;
        for (k, c) in spec.iter_mut().enumerate() {
            if k == 0 || (n % 2 == 0 && k == half) {
                // keep
            } else if k < half || (n % 2 == 1 && k == half) {
                *c *= 2.0;
            } else {
                *c = Complex64::new(0.0, 0.0);
            }
        }
        self.inverse(n).process(&mut spec);
        let scale = 1.0 / n as f64;
        spec.iter().map(|c| (c * scale).norm()).collect()
    }
}

impl Default for FftBank {
    fn default() -> Self {
        FftBank::new()
    }
}

/// Periodic Hann window.
pub fn hann(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos())
        .collect()
}

/// Frame layout for an STFT over a signal of `len` samples: number of
/// frames and the padded length they cover. Frame k starts at k*hop; the
/// signal is zero-padded so the last frame is full.
pub fn frame_layout(len: usize, win: usize, hop: usize) -> (usize, usize) {
    let frames = if len <= win { 1 } else { (len - win + hop - 1) / hop + 1 };
    (frames, (frames - 1) * hop + win)
}
