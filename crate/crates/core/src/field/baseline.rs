//! Interpolation baselines over stored responses. Both treat a sample as a
//! point in the joint six-dimensional space of emitter and listener
//! positions and ignore device facings, which keeps them honest references
//! for the learned field rather than competitors on directivity.

use crate::types::{Error, ImpulseResponse, Pose, Result, Sample};
use crate::vec3::Vec3;

/// A pose pair is an exact hit on a stored sample below this distance.
pub const EXACT_HIT_DISTANCE: f64 = 1e-9;

/// Neighbors blended by inverse-distance weighting.
pub const IDW_NEIGHBORS: usize = 4;

struct Entry {
    id: u64,
    emitter: Vec3,
    listener: Vec3,
    ir: ImpulseResponse,
}

fn collect_entries<'a, I>(samples: I) -> Result<Vec<Entry>>
where
    I: IntoIterator<Item = &'a Sample>,
{
    let mut entries: Vec<Entry> = Vec::new();
    for s in samples {
        if let Some(first) = entries.first() {
            if s.ir.samples.len() != first.ir.samples.len()
                || s.ir.sample_rate != first.ir.sample_rate
            {
                return Err(Error::Config(format!(
                    "sample {} disagrees on response length or rate",
                    s.id
                )));
            }
        }
        entries.push(Entry {
            id: s.id,
            emitter: s.emitter.position,
            listener: s.listener.position,
            ir: s.ir.clone(),
        });
    }
    if entries.is_empty() {
        return Err(Error::Config("baseline needs at least one sample".into()));
    }
    Ok(entries)
}

fn squared_distance(e: &Entry, p_e: Vec3, p_l: Vec3) -> f64 {
    let de = e.emitter - p_e;
    let dl = e.listener - p_l;
    de.dot(de) + dl.dot(dl)
}

/// Returns the stored response of the closest sample. Distance ties break
/// toward the lowest sample id, so lookups are deterministic.
pub struct NearestBaseline {
    entries: Vec<Entry>,
}

impl NearestBaseline {
    pub fn fit<'a, I>(samples: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a Sample>,
    {
        Ok(NearestBaseline {
            entries: collect_entries(samples)?,
        })
    }

    pub fn predict(&self, emitter: &Pose, listener: &Pose) -> ImpulseResponse {
        let mut best = &self.entries[0];
        let mut best_d2 = squared_distance(best, emitter.position, listener.position);
        for e in &self.entries[1..] {
            let d2 = squared_distance(e, emitter.position, listener.position);
            if d2 < best_d2 || (d2 == best_d2 && e.id < best.id) {
                best = e;
                best_d2 = d2;
            }
        }
        best.ir.clone()
    }
}

/// Blends the nearest few stored responses with weights proportional to
/// the inverse squared distance. An exact pose hit short-circuits to the
/// stored response.
pub struct IdwBaseline {
    entries: Vec<Entry>,
    neighbors: usize,
}

impl IdwBaseline {
    pub fn fit<'a, I>(samples: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a Sample>,
    {
        Ok(IdwBaseline {
            entries: collect_entries(samples)?,
            neighbors: IDW_NEIGHBORS,
        })
    }

    pub fn predict(&self, emitter: &Pose, listener: &Pose) -> ImpulseResponse {
        let mut ranked: Vec<(f64, usize)> = self
            .entries
            .iter()
            .enumerate()
            .map(|(i, e)| (squared_distance(e, emitter.position, listener.position), i))
            .collect();
        ranked.sort_by(|a, b| {
            a.0.partial_cmp(&b.0)
                .unwrap()
                .then(self.entries[a.1].id.cmp(&self.entries[b.1].id))
        });
        let (d2_best, i_best) = ranked[0];
        if d2_best < EXACT_HIT_DISTANCE * EXACT_HIT_DISTANCE {
            return self.entries[i_best].ir.clone();
        }
        let k = self.neighbors.min(ranked.len());
        let mut total = 0.0;
        let mut samples = vec![0.0; self.entries[i_best].ir.samples.len()];
        for &(d2, i) in &ranked[..k] {
            let w = 1.0 / d2;
            total += w;
            for (acc, &v) in samples.iter_mut().zip(self.entries[i].ir.samples.iter()) {
                *acc += w * v;
            }
        }
        for v in &mut samples {
            *v /= total;
        }
        ImpulseResponse::new(samples, self.entries[i_best].ir.sample_rate)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::Split;

    fn sample(id: u64, ex: f64, lx: f64, level: f64) -> Sample {
        Sample {
            id,
            emitter: Pose::new(Vec3::new(ex, 1.0, 1.0), Vec3::new(1.0, 0.0, 0.0)).unwrap(),
            listener: Pose::new(Vec3::new(lx, 2.0, 1.0), Vec3::new(0.0, 1.0, 0.0)).unwrap(),
            ir: ImpulseResponse::new(vec![level, level * 0.5, 0.0, 0.0], 1000.0),
            is_virtual: false,
            split: Split::Train,
        }
    }

    #[test]
    fn nearest_returns_the_stored_response_at_a_training_pose() {
        let samples = vec![sample(0, 1.0, 4.0, 0.9), sample(1, 3.0, 2.0, 0.4)];
        let model = NearestBaseline::fit(samples.iter()).unwrap();
        let got = model.predict(&samples[1].emitter, &samples[1].listener);
        let want = &samples[1].ir;
        assert_eq!(got.samples.len(), want.samples.len());
        for (a, b) in got.samples.iter().zip(want.samples.iter()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn nearest_picks_the_closer_sample() {
        let samples = vec![sample(0, 1.0, 4.0, 0.9), sample(1, 3.0, 2.0, 0.4)];
        let model = NearestBaseline::fit(samples.iter()).unwrap();
        let q_e = Pose::new(Vec3::new(1.2, 1.0, 1.0), Vec3::new(1.0, 0.0, 0.0)).unwrap();
        let q_l = Pose::new(Vec3::new(3.9, 2.0, 1.0), Vec3::new(0.0, 1.0, 0.0)).unwrap();
        let got = model.predict(&q_e, &q_l);
        assert_eq!(got.samples[0].to_bits(), (0.9f64).to_bits());
    }

    #[test]
    fn nearest_breaks_exact_ties_toward_the_lower_id() {
        // Entries symmetric about x = 2, so the query distance is the same
        // number for both; the lower id must win regardless of order.
        let samples = vec![sample(7, 3.0, 3.0, 0.4), sample(2, 1.0, 1.0, 0.9)];
        let model = NearestBaseline::fit(samples.iter()).unwrap();
        let q_e = Pose::new(Vec3::new(2.0, 1.0, 1.0), Vec3::new(1.0, 0.0, 0.0)).unwrap();
        let q_l = Pose::new(Vec3::new(2.0, 2.0, 1.0), Vec3::new(0.0, 1.0, 0.0)).unwrap();
        let got = model.predict(&q_e, &q_l);
        assert_eq!(got.samples[0].to_bits(), (0.9f64).to_bits());
    }

    #[test]
    fn idw_short_circuits_on_an_exact_hit() {
        let samples = vec![sample(0, 1.0, 4.0, 0.9), sample(1, 3.0, 2.0, 0.4)];
        let model = IdwBaseline::fit(samples.iter()).unwrap();
        let got = model.predict(&samples[0].emitter, &samples[0].listener);
        for (a, b) in got.samples.iter().zip(samples[0].ir.samples.iter()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn idw_blends_equidistant_samples_into_their_average() {
        let samples = vec![sample(0, 1.0, 1.0, 0.9), sample(1, 3.0, 3.0, 0.4)];
        let model = IdwBaseline::fit(samples.iter()).unwrap();
        let q_e = Pose::new(Vec3::new(2.0, 1.0, 1.0), Vec3::new(1.0, 0.0, 0.0)).unwrap();
        let q_l = Pose::new(Vec3::new(2.0, 2.0, 1.0), Vec3::new(0.0, 1.0, 0.0)).unwrap();
        let got = model.predict(&q_e, &q_l);
        assert!((got.samples[0] - 0.65).abs() < 1e-12);
        assert!((got.samples[1] - 0.325).abs() < 1e-12);
    }

    #[test]
    fn fit_rejects_mismatched_response_lengths() {
        let mut bad = sample(1, 3.0, 2.0, 0.4);
        bad.ir = ImpulseResponse::new(vec![0.4, 0.2], 1000.0);
        let samples = vec![sample(0, 1.0, 4.0, 0.9), bad];
        assert!(NearestBaseline::fit(samples.iter()).is_err());
        assert!(IdwBaseline::fit(samples.iter()).is_err());
    }

    #[test]
    fn fit_rejects_an_empty_sample_set() {
        assert!(NearestBaseline::fit(std::iter::empty()).is_err());
    }
}
