//! Empirical reciprocity checks: simulate both directions of random
//! emitter/listener pairs and measure how far apart the two responses are,
//! against a baseline of distances between unrelated responses.

use rand::Rng;
use rand_distr::{Distribution, UnitSphere};
use serde::{Deserialize, Serialize};

use crate::metrics;
use crate::metrics::symmetric_distances as metric_distances;
use crate::patterns::GainPattern;
use crate::rng::stream_rng;
use crate::simulator::{enumerate_image_paths, synthesize_ir, trace_stochastic, PathSet,
    PulseMode};
use crate::types::{Error, ImpulseResponse, Pose, Result, ShoeboxRoom, SimulationConfig};
use crate::vec3::Vec3;

/// Which engine produces the propagation paths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SimMode {
    Ism,
    Rays,
}

/// Names of the five verification distances, in report order.
pub const VERIFY_METRIC_NAMES: [&str; 5] = metrics::SYMMETRIC_DISTANCE_NAMES;

/// A reciprocity experiment: rooms, a pair budget per room, the device
/// patterns, and the simulation settings.
#[derive(Debug, Clone)]
pub struct ReciprocityScenario {
    pub rooms: Vec<ShoeboxRoom>,
    pub pairs_per_room: usize,
    pub emitter_pattern: GainPattern,
    pub listener_pattern: GainPattern,
    pub config: SimulationConfig,
    pub mode: SimMode,
    pub pulse_mode: PulseMode,
}

impl ReciprocityScenario {
    /// Omnidirectional devices, exact image-source engine, nearest-sample
    /// placement: the configuration under which reciprocity holds to the bit.
    pub fn omni_exact(
        rooms: Vec<ShoeboxRoom>,
        pairs_per_room: usize,
        config: SimulationConfig,
    ) -> ReciprocityScenario {
        ReciprocityScenario {
            rooms,
            pairs_per_room,
            emitter_pattern: GainPattern::omni(),
            listener_pattern: GainPattern::omni(),
            config,
            mode: SimMode::Ism,
            pulse_mode: PulseMode::NearestSample,
        }
    }
}

/// Outcome of a reciprocity experiment. Distances are symmetric per metric:
/// spectral and envelope L1 means for `amp`/`env`, absolute differences in
/// seconds for `t60`/`edt` and in dB for `c50`. `paired` compares the two
/// directions of one pair; `unpaired` compares responses of unrelated
/// pairs, which calibrates the scale of "different".
#[derive(Debug, Clone, Serialize)]
pub struct ReciprocityReport {
    pub pair_count: usize,
    pub paired: [f64; 5],
    pub unpaired: [f64; 5],
    pub max_paired: [f64; 5],
    /// True when every exchanged response matched bit for bit.
    pub bit_identical: bool,
    /// Per metric, how many evaluations were skipped because the metric was
    /// undefined on a response (e.g. decay too short to fit).
    pub skipped: [usize; 5],
}

impl ReciprocityReport {
    /// Per-metric paired/unpaired ratio; NaN where the baseline is zero.
    pub fn ratios(&self) -> [f64; 5] {
        let mut r = [f64::NAN; 5];
        for i in 0..5 {
            if self.unpaired[i] > 0.0 {
                r[i] = self.paired[i] / self.unpaired[i];
            }
        }
        r
    }

    /// Mean of the finite per-metric ratios.
    pub fn mean_ratio(&self) -> f64 {
        let ratios = self.ratios();
        let finite: Vec<f64> = ratios.iter().copied().filter(|r| r.is_finite()).collect();
        if finite.is_empty() {
            f64::NAN
        } else {
            finite.iter().sum::<f64>() / finite.len() as f64
        }
    }
}

struct DistanceAccumulator {
    sums: [f64; 5],
    counts: [usize; 5],
    maxima: [f64; 5],
    skipped: [usize; 5],
}

impl DistanceAccumulator {
    fn new() -> Self {
        DistanceAccumulator {
            sums: [0.0; 5],
            counts: [0; 5],
            maxima: [0.0; 5],
            skipped: [0; 5],
        }
    }

    fn add(&mut self, d: [Option<f64>; 5]) {
        for i in 0..5 {
            match d[i] {
                Some(v) => {
                    self.sums[i] += v;
                    self.counts[i] += 1;
                    if v > self.maxima[i] {
                        self.maxima[i] = v;
                    }
                }
                None => self.skipped[i] += 1,
            }
        }
    }

    fn means(&self) -> [f64; 5] {
        let mut m = [f64::NAN; 5];
        for i in 0..5 {
            if self.counts[i] > 0 {
                m[i] = self.sums[i] / self.counts[i] as f64;
            }
        }
        m
    }
}

fn random_point<R: Rng>(room: &ShoeboxRoom, margin: f64, rng: &mut R) -> Result<Vec3> {
    let d = room.dimensions;
    if d.x <= 2.0 * margin || d.y <= 2.0 * margin || d.z <= 2.0 * margin {
        return Err(Error::Geometry(format!(
            "room {d:?} too small for a {margin} m placement margin"
        )));
    }
    Ok(Vec3::new(
        rng.gen_range(margin..d.x - margin),
        rng.gen_range(margin..d.y - margin),
        rng.gen_range(margin..d.z - margin),
    ))
}

fn random_pose<R: Rng>(room: &ShoeboxRoom, margin: f64, rng: &mut R) -> Result<Pose> {
    let position = random_point(room, margin, rng)?;
    let f: [f64; 3] = UnitSphere.sample(rng);
    Pose::new(position, Vec3::from_array(f))
}

const PAIR_MARGIN: f64 = 0.6;
const PAIR_MIN_SEPARATION: f64 = 1.0;
const POSE_STREAM: u64 = 0x7665_7269;
const MAX_UNPAIRED_COMPARISONS: usize = 200;

fn simulate_pair_direction(
    room: &ShoeboxRoom,
    emitter: &Pose,
    listener: &Pose,
    scenario: &ReciprocityScenario,
    config: &SimulationConfig,
) -> Result<ImpulseResponse> {
    let paths = match scenario.mode {
        SimMode::Ism => PathSet::exact(enumerate_image_paths(
            room,
            emitter.position,
            listener.position,
            config.max_image_order,
        )?),
        SimMode::Rays => trace_stochastic(room, emitter.position, listener.position, config)?,
    };
    synthesize_ir(
        room,
        &paths,
        emitter,
        listener,
        &scenario.emitter_pattern,
        &scenario.listener_pattern,
        config,
        scenario.pulse_mode,
    )
}

/// Runs the experiment: for each random pair, simulate both directions,
/// accumulate paired distances, then compare unrelated responses for the
/// unpaired baseline.
pub fn verify_reciprocity(scenario: &ReciprocityScenario) -> Result<ReciprocityReport> {
    if scenario.rooms.is_empty() || scenario.pairs_per_room == 0 {
        return Err(Error::Config("reciprocity scenario needs rooms and pairs".into()));
    }
    let mut rng = stream_rng(scenario.config.rng_seed, POSE_STREAM);
    let mut paired = DistanceAccumulator::new();
    let mut unpaired = DistanceAccumulator::new();
    let mut forward_irs = Vec::new();
    let mut bit_identical = true;
    let mut pair_count = 0usize;

    for room in &scenario.rooms {
        for _ in 0..scenario.pairs_per_room {
            let pose_a = random_pose(room, PAIR_MARGIN, &mut rng)?;
            let mut pose_b = random_pose(room, PAIR_MARGIN, &mut rng)?;
            for _ in 0..1000 {
                if pose_a.position.distance(pose_b.position) >= PAIR_MIN_SEPARATION {
                    break;
                }
                pose_b = random_pose(room, PAIR_MARGIN, &mut rng)?;
            }

            // Stochastic runs draw fresh rays per direction; the exact
            // engine ignores the seed entirely.
            let mut cfg_ab = scenario.config.clone();
            let mut cfg_ba = scenario.config.clone();
            cfg_ab.rng_seed =
                scenario.config.rng_seed.wrapping_add(2 * pair_count as u64 + 1);
            cfg_ba.rng_seed =
                scenario.config.rng_seed.wrapping_add(2 * pair_count as u64 + 2);

            let ir_ab = simulate_pair_direction(room, &pose_a, &pose_b, scenario, &cfg_ab)?;
            let ir_ba = simulate_pair_direction(room, &pose_b, &pose_a, scenario, &cfg_ba)?;
            bit_identical &= ir_ab.samples.len() == ir_ba.samples.len()
                && ir_ab
                    .samples
                    .iter()
                    .zip(ir_ba.samples.iter())
                    .all(|(x, y)| x.to_bits() == y.to_bits());
            paired.add(metric_distances(&ir_ab, &ir_ba));
            forward_irs.push(ir_ab);
            pair_count += 1;
        }
    }

    let mut comparisons = 0usize;
    'outer: for i in 0..forward_irs.len() {
        for j in i + 1..forward_irs.len() {
            if comparisons >= MAX_UNPAIRED_COMPARISONS {
                break 'outer;
            }
            unpaired.add(metric_distances(&forward_irs[i], &forward_irs[j]));
            comparisons += 1;
        }
    }

    Ok(ReciprocityReport {
        pair_count,
        paired: paired.means(),
        unpaired: unpaired.means(),
        max_paired: paired.maxima,
        bit_identical,
        skipped: paired.skipped,
    })
}

/// Paired/unpaired distances as a function of the ray budget, averaged over
/// seeds. The exact image solution is the ray tracer's limit, so the mean
/// ratio should fall toward zero as the budget grows.
#[derive(Debug, Clone, Serialize)]
pub struct RaySweepReport {
    pub counts: Vec<u64>,
    pub paired: Vec<[f64; 5]>,
    pub unpaired: Vec<[f64; 5]>,
    pub mean_ratio: Vec<f64>,
}

pub fn reciprocity_ray_sweep(
    rooms: Vec<ShoeboxRoom>,
    pairs_per_room: usize,
    counts: &[u64],
    seeds: &[u64],
    base_config: &SimulationConfig,
) -> Result<RaySweepReport> {
    if counts.is_empty() || seeds.is_empty() {
        return Err(Error::Config("ray sweep needs counts and seeds".into()));
    }
    let mut report = RaySweepReport {
        counts: counts.to_vec(),
        paired: Vec::new(),
        unpaired: Vec::new(),
        mean_ratio: Vec::new(),
    };
    for &count in counts {
        let mut paired_acc = [0.0; 5];
        let mut unpaired_acc = [0.0; 5];
        let mut ratio_acc = 0.0;
        for &seed in seeds {
            let mut config = base_config.clone();
            config.ray_count = count;
            config.rng_seed = seed;
            let scenario = ReciprocityScenario {
                rooms: rooms.clone(),
                pairs_per_room,
                emitter_pattern: GainPattern::omni(),
                listener_pattern: GainPattern::omni(),
                config,
                mode: SimMode::Rays,
                pulse_mode: PulseMode::WindowedSinc,
            };
            let r = verify_reciprocity(&scenario)?;
            for i in 0..5 {
                paired_acc[i] += r.paired[i];
                unpaired_acc[i] += r.unpaired[i];
            }
            ratio_acc += r.mean_ratio();
        }
        let n = seeds.len() as f64;
        report.paired.push(paired_acc.map(|v| v / n));
        report.unpaired.push(unpaired_acc.map(|v| v / n));
        report.mean_ratio.push(ratio_acc / n);
    }
    Ok(report)
}
