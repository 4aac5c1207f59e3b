//! Linear-phase FIR bank that splits the spectrum at the room's band edges.
//!
//! The bank is built by telescoping windowed-sinc lowpasses: band 0 is
//! LP(edge 0), band i is LP(edge i) - LP(edge i-1), and the top band is a
//! centered unit pulse minus LP(last edge). Summed over bands the lowpasses
//! cancel pairwise and a single delayed delta remains, so a pulse split
//! across bands with equal gains reassembles exactly (up to rounding).

use crate::types::{Error, Result};

/// Default FIR length. Long enough that the lowest octave edge of a 16 kHz
/// design keeps a usable transition; always odd so the group delay is an
/// integer number of samples.
pub const DEFAULT_FILTER_TAPS: usize = 511;

/// Interior band edges for octave bands: geometric midpoints between octave
/// centers starting at `low_center` Hz. `bands` octave bands need
/// `bands - 1` edges.
pub fn octave_band_edges(low_center: f64, bands: usize) -> Vec<f64> {
    (0..bands.saturating_sub(1))
        .map(|i| low_center * 2f64.powi(i as i32) * std::f64::consts::SQRT_2)
        .collect()
}

/// Symmetric Hann-windowed sinc lowpass with cutoff `fc` Hz, unit DC-ish
/// passband, linear phase with delay (taps-1)/2.
fn lowpass(fc: f64, sample_rate: f64, taps: usize) -> Vec<f64> {
    let center = (taps - 1) as f64 / 2.0;
    let norm = 2.0 * fc / sample_rate;
    (0..taps)
        .map(|j| {
            let t = j as f64 - center;
            let s = sinc(norm * t) * norm;
            let w = if taps == 1 {
                1.0
            } else {
                0.5 * (1.0 - (2.0 * std::f64::consts::PI * j as f64 / (taps - 1) as f64).cos())
            };
            s * w
        })
        .collect()
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        let px = std::f64::consts::PI * x;
        px.sin() / px
    }
}

/// One FIR per band for the given interior edges. Edges must be strictly
/// increasing and below Nyquist. Returns `edges.len() + 1` filters of `taps`
/// coefficients each that sum to a delta at (taps-1)/2.
pub fn band_partition_filters(
    edges: &[f64],
    sample_rate: f64,
    taps: usize,
) -> Result<Vec<Vec<f64>>> {
    if taps < 3 || taps % 2 == 0 {
        return Err(Error::Config(format!("filter taps must be odd and >= 3, got {taps}")));
    }
    for (i, &e) in edges.iter().enumerate() {
        if !(e > 0.0 && e < sample_rate / 2.0) {
            return Err(Error::Config(format!(
                "band edge {e} Hz outside (0, {}) Hz",
                sample_rate / 2.0
            )));
        }
        if i > 0 && e <= edges[i - 1] {
            return Err(Error::Config("band edges must be strictly increasing".into()));
        }
    }
    if edges.is_empty() {
        let mut delta = vec![0.0; taps];
        delta[(taps - 1) / 2] = 1.0;
        return Ok(vec![delta]);
    }
    let lowpasses: Vec<Vec<f64>> = edges.iter().map(|&e| lowpass(e, sample_rate, taps)).collect();
    let mut firs = Vec::with_capacity(edges.len() + 1);
    firs.push(lowpasses[0].clone());
    for pair in lowpasses.windows(2) {
        firs.push(pair[1].iter().zip(pair[0].iter()).map(|(hi, lo)| hi - lo).collect());
    }
    let last = lowpasses.last().unwrap();
    let mut top: Vec<f64> = last.iter().map(|h| -h).collect();
    top[(taps - 1) / 2] += 1.0;
    firs.push(top);
    Ok(firs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn filters_sum_to_a_delta() {
        let edges = octave_band_edges(125.0, 6);
        assert_eq!(edges.len(), 5);
        let firs = band_partition_filters(&edges, 16000.0, DEFAULT_FILTER_TAPS).unwrap();
        assert_eq!(firs.len(), 6);
        let center = (DEFAULT_FILTER_TAPS - 1) / 2;
        for j in 0..DEFAULT_FILTER_TAPS {
            let sum: f64 = firs.iter().map(|f| f[j]).sum();
            let want = if j == center { 1.0 } else { 0.0 };
            assert!((sum - want).abs() < 1e-12, "tap {j}: {sum}");
        }
    }

    #[test]
    fn band_filter_passes_its_center_and_rejects_neighbors() {
        let edges = octave_band_edges(125.0, 6);
        let firs = band_partition_filters(&edges, 16000.0, DEFAULT_FILTER_TAPS).unwrap();
        // Probe band 3 (center 1 kHz) with tones at 1 kHz and 4 kHz.
        let gain = |fir: &[f64], f: f64| -> f64 {
            let mut re = 0.0;
            let mut im = 0.0;
            for (j, &h) in fir.iter().enumerate() {
                let ph = 2.0 * std::f64::consts::PI * f * j as f64 / 16000.0;
                re += h * ph.cos();
                im -= h * ph.sin();
            }
            (re * re + im * im).sqrt()
        };
        assert!((gain(&firs[3], 1000.0) - 1.0).abs() < 0.05);
        assert!(gain(&firs[3], 4000.0) < 0.05);
        assert!(gain(&firs[3], 250.0) < 0.05);
    }

    #[test]
    fn invalid_edges_are_rejected() {
        assert!(band_partition_filters(&[9000.0], 16000.0, 511).is_err());
        assert!(band_partition_filters(&[500.0, 400.0], 16000.0, 511).is_err());
        assert!(band_partition_filters(&[500.0], 16000.0, 510).is_err());
    }

    #[test]
    fn no_edges_gives_a_pure_delta() {
        let firs = band_partition_filters(&[], 16000.0, 11).unwrap();
        assert_eq!(firs.len(), 1);
        assert_eq!(firs[0][5], 1.0);
        assert_eq!(firs[0].iter().sum::<f64>(), 1.0);
    }
}
