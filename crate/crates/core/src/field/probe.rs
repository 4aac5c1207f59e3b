//! Reciprocity probe for a learned field: render each pose pair in both
//! directions with one shared device pattern and measure how far apart the
//! two renders are. A field that honors exchange symmetry scores near zero.

use crate::field::render::{render_response, DirectionalField};
use crate::metrics::symmetric_distances;
use crate::patterns::GainPattern;
use crate::types::{Error, Pose, Result};

/// Per-metric spread between forward and reversed renders, aggregated
/// over all probed pairs. Entries follow
/// [`crate::metrics::SYMMETRIC_DISTANCE_NAMES`].
#[derive(Debug, Clone)]
pub struct ProbeReport {
    pub pair_count: usize,
    /// Mean distance over pairs where the metric was defined; NaN if it
    /// never was.
    pub mean: [f64; 5],
    pub max: [f64; 5],
    /// Pairs on which the metric was undefined for either direction.
    pub skipped: [usize; 5],
}

/// Renders both orderings of every pair through `field` and reports the
/// symmetric metric distances between the two directions.
pub fn learned_reciprocity_probe(
    field: &dyn DirectionalField,
    pairs: &[(Pose, Pose)],
    shared_pattern: &GainPattern,
) -> Result<ProbeReport> {
    if pairs.is_empty() {
        return Err(Error::Config("reciprocity probe needs at least one pair".into()));
    }
    shared_pattern.validate()?;
    let mut sums = [0.0; 5];
    let mut counts = [0usize; 5];
    let mut max = [0.0; 5];
    let mut skipped = [0usize; 5];
    for (a, b) in pairs {
        let forward = render_response(
            field,
            a.position,
            b.position,
            a.facing,
            shared_pattern,
            b.facing,
        )?;
        let reverse = render_response(
            field,
            b.position,
            a.position,
            b.facing,
            shared_pattern,
            a.facing,
        )?;
        for (i, d) in symmetric_distances(&forward, &reverse).iter().enumerate() {
            match d {
                Some(v) => {
                    sums[i] += v;
                    counts[i] += 1;
                    if *v > max[i] {
                        max[i] = *v;
                    }
                }
                None => skipped[i] += 1,
            }
        }
    }
    let mut mean = [f64::NAN; 5];
    for i in 0..5 {
        if counts[i] > 0 {
            mean[i] = sums[i] / counts[i] as f64;
        }
    }
    Ok(ProbeReport {
        pair_count: pairs.len(),
        mean,
        max,
        skipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::patterns::{make_quadrature, SphereQuadrature};
    use crate::vec3::Vec3;

    /// Decaying response whose amplitude depends only on the separation,
    /// so exchanging emitter and listener reproduces it bit for bit.
    struct SeparationMock {
        quadrature: SphereQuadrature,
        bias: f64,
    }

    impl DirectionalField for SeparationMock {
        fn quadrature(&self) -> &SphereQuadrature {
            &self.quadrature
        }

        fn time_len(&self) -> usize {
            400
        }

        fn sample_rate(&self) -> f64 {
            2000.0
        }

        fn directional_slices(
            &self,
            p_e: Vec3,
            p_l: Vec3,
            f_e: Vec3,
        ) -> Result<Vec<Vec<f64>>> {
            let sep = p_e.distance(p_l);
            let amp = 1.0 / (1.0 + sep) + self.bias * f_e.x;
            let tau = 0.015;
            let slice: Vec<f64> = (0..self.time_len())
                .map(|t| amp * (-(t as f64) / (tau * self.sample_rate())).exp())
                .collect();
            Ok(vec![slice; self.quadrature.len()])
        }
    }

    fn pair() -> (Pose, Pose) {
        (
            Pose::new(Vec3::new(1.0, 1.0, 1.2), Vec3::new(1.0, 0.0, 0.0)).unwrap(),
            Pose::new(Vec3::new(3.5, 2.0, 1.6), Vec3::new(0.0, -1.0, 0.0)).unwrap(),
        )
    }

    #[test]
    fn symmetric_field_probes_to_exact_zero() {
        let field = SeparationMock {
            quadrature: make_quadrature(21).unwrap(),
            bias: 0.0,
        };
        let report =
            learned_reciprocity_probe(&field, &[pair()], &GainPattern::omni()).unwrap();
        assert_eq!(report.pair_count, 1);
        for i in 0..5 {
            assert_eq!(report.skipped[i], 0, "metric {i} skipped");
            assert_eq!(report.mean[i], 0.0, "metric {i} mean");
            assert_eq!(report.max[i], 0.0, "metric {i} max");
        }
    }

    #[test]
    fn facing_dependent_field_probes_nonzero() {
        let field = SeparationMock {
            quadrature: make_quadrature(21).unwrap(),
            bias: 0.3,
        };
        let report =
            learned_reciprocity_probe(&field, &[pair()], &GainPattern::omni()).unwrap();
        // The two poses face different ways, so the exchanged render has a
        // different amplitude and at least the amplitude distance shows it.
        assert!(report.mean[0] > 1e-3, "amp mean {}", report.mean[0]);
    }

    #[test]
    fn probe_rejects_an_empty_pair_list() {
        let field = SeparationMock {
            quadrature: make_quadrature(21).unwrap(),
            bias: 0.0,
        };
        assert!(learned_reciprocity_probe(&field, &[], &GainPattern::omni()).is_err());
    }
}
