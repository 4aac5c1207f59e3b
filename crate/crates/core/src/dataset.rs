//! Scene sampling, dataset generation, exchange augmentation, and a small
//! binary container with per-record checksums.
//!
//! Responses are quantized to f32 at generation time. Everything downstream
//! (training, baselines, containers) sees the same quantized values, so a
//! write/read cycle reproduces the dataset bit for bit.

use std::collections::HashSet;
use std::io::{Read as _, Write as _};
use std::path::Path;
use std::sync::LazyLock;

use rand::Rng;
use rand_distr::{Distribution, UnitSphere};
use serde::{Deserialize, Serialize};

use crate::patterns::GainPattern;
use crate::rng::stream_rng;
use crate::simulator::{
    enumerate_image_paths, synthesize_ir, trace_stochastic, PathSet, PulseMode, SimMode,
};
use crate::types::{
    Error, ImpulseResponse, Pose, Result, Sample, ShoeboxRoom, SimulationConfig, Split,
};
use crate::vec3::Vec3;

/// How far device centers stay from walls.
const PLACEMENT_MARGIN: f64 = 0.5;
/// Emitters keep this much distance from each other; held-out emitters are
/// therefore never closer than this to a training emitter.
pub const EMITTER_SEPARATION: f64 = 1.0;
/// Listeners keep this much distance from their emitter.
const LISTENER_CLEARANCE: f64 = 0.5;
/// Poses closer than this are considered duplicates and resampled.
const DUPLICATE_TOLERANCE: f64 = 1e-9;

const POSE_STREAM: u64 = 0x7363_656e;

/// Everything needed to synthesize a dataset.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SceneSpec {
    pub room: ShoeboxRoom,
    pub emitter_pattern: GainPattern,
    pub listener_pattern: GainPattern,
    pub train_emitters: usize,
    pub test_emitters: usize,
    pub listeners_per_emitter: usize,
    pub config: SimulationConfig,
    pub mode: SimMode,
    pub pulse_mode: PulseMode,
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        self.room.validate()?;
        self.config.validate()?;
        self.emitter_pattern.validate()?;
        self.listener_pattern.validate()?;
        if self.train_emitters == 0 || self.listeners_per_emitter == 0 {
            return Err(Error::Config("scene needs train emitters and listeners".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetHeader {
    pub scene: SceneSpec,
    pub ir_len: usize,
    pub sample_rate: f64,
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub header: DatasetHeader,
    pub samples: Vec<Sample>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn split(&self, split: Split) -> impl Iterator<Item = &Sample> {
        self.samples.iter().filter(move |s| s.split == split)
    }
}

fn sample_pose<R: Rng>(room: &ShoeboxRoom, rng: &mut R) -> Pose {
    let d = room.dimensions;
    let position = Vec3::new(
        rng.gen_range(PLACEMENT_MARGIN..d.x - PLACEMENT_MARGIN),
        rng.gen_range(PLACEMENT_MARGIN..d.y - PLACEMENT_MARGIN),
        rng.gen_range(PLACEMENT_MARGIN..d.z - PLACEMENT_MARGIN),
    );
    let f: [f64; 3] = UnitSphere.sample(rng);
    Pose::new(position, Vec3::from_array(f)).expect("unit sample is normalizable")
}

fn sample_separated_pose<R: Rng>(
    room: &ShoeboxRoom,
    taken: &[Vec3],
    min_separation: f64,
    rng: &mut R,
) -> Result<Pose> {
    for _ in 0..10_000 {
        let pose = sample_pose(room, rng);
        let clear = taken.iter().all(|p| {
            let d = p.distance(pose.position);
            d >= min_separation && d >= DUPLICATE_TOLERANCE
        });
        if clear {
            return Ok(pose);
        }
    }
    Err(Error::Geometry(format!(
        "could not place a pose {min_separation} m away from {} existing ones",
        taken.len()
    )))
}

fn simulate_sample(
    scene: &SceneSpec,
    emitter: &Pose,
    listener: &Pose,
    sample_id: u64,
) -> Result<ImpulseResponse> {
    // Stochastic runs get a per-sample seed; the exact engine ignores it.
    let mut config = scene.config.clone();
    config.rng_seed = scene
        .config
        .rng_seed
        .wrapping_add((sample_id + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    let paths = match scene.mode {
        SimMode::Ism => PathSet::exact(enumerate_image_paths(
            &scene.room,
            emitter.position,
            listener.position,
            config.max_image_order,
        )?),
        SimMode::Rays => {
            trace_stochastic(&scene.room, emitter.position, listener.position, &config)?
        }
    };
    let ir = synthesize_ir(
        &scene.room,
        &paths,
        emitter,
        listener,
        &scene.emitter_pattern,
        &scene.listener_pattern,
        &config,
        scene.pulse_mode,
    )?;
    Ok(ir.quantized_f32())
}

/// Samples poses and simulates one response per (emitter, listener) pair.
/// Emitters are mutually separated by [`EMITTER_SEPARATION`]; the first
/// `train_emitters` of them form the train split, the rest the test split.
/// Deterministic in the scene's seed.
pub fn generate_dataset(scene: &SceneSpec) -> Result<Dataset> {
    scene.validate()?;
    let mut rng = stream_rng(scene.config.rng_seed, POSE_STREAM);
    let total_emitters = scene.train_emitters + scene.test_emitters;

    let mut emitters: Vec<Pose> = Vec::with_capacity(total_emitters);
    for _ in 0..total_emitters {
        let taken: Vec<Vec3> = emitters.iter().map(|p| p.position).collect();
        emitters.push(sample_separated_pose(&scene.room, &taken, EMITTER_SEPARATION, &mut rng)?);
    }

    let mut samples = Vec::with_capacity(total_emitters * scene.listeners_per_emitter);
    let mut id = 0u64;
    for (e_idx, emitter) in emitters.iter().enumerate() {
        let split = if e_idx < scene.train_emitters { Split::Train } else { Split::Test };
        for _ in 0..scene.listeners_per_emitter {
            let listener = sample_separated_pose(
                &scene.room,
                &[emitter.position],
                LISTENER_CLEARANCE,
                &mut rng,
            )?;
            let ir = simulate_sample(scene, emitter, &listener, id)?;
            samples.push(Sample {
                id,
                emitter: emitter.clone(),
                listener,
                ir,
                is_virtual: false,
                split,
            });
            id += 1;
        }
    }

    let header = DatasetHeader {
        ir_len: scene.config.ir_len(),
        sample_rate: scene.config.sample_rate,
        scene: scene.clone(),
    };
    Ok(Dataset { header, samples })
}

/// Emitter-listener exchange augmentation: every real training sample gains
/// a virtual twin with the two device poses swapped and the response kept.
/// The virtual label is exactly right when both devices share one gain
/// pattern; with distinct patterns the swapped response would differ, so
/// the virtual labels are knowingly wrong and training on them measures
/// that mismatch. Test samples are never touched.
pub fn ele_augment(dataset: &Dataset) -> Dataset {
    let mut out = dataset.clone();
    let mut next_id = dataset.samples.iter().map(|s| s.id).max().map_or(0, |m| m + 1);
    let mut virtuals = Vec::new();
    for s in &dataset.samples {
        if s.split == Split::Train && !s.is_virtual {
            virtuals.push(Sample {
                id: next_id,
                emitter: s.listener.clone(),
                listener: s.emitter.clone(),
                ir: s.ir.clone(),
                is_virtual: true,
                split: Split::Train,
            });
            next_id += 1;
        }
    }
    out.samples.extend(virtuals);
    out
}

// --- binary container ---------------------------------------------------

const MAGIC: &[u8; 4] = b"RVDS";
const FORMAT_VERSION: u32 = 1;

static CRC_TABLE: LazyLock<[u32; 256]> = LazyLock::new(|| {
    let mut table = [0u32; 256];
    for (i, slot) in table.iter_mut().enumerate() {
        let mut c = i as u32;
        for _ in 0..8 {
            c = if c & 1 != 0 { 0xEDB8_8320 ^ (c >> 1) } else { c >> 1 };
        }
        *slot = c;
    }
    table
});

/// CRC-32 (IEEE) over a byte slice.
pub fn crc32(bytes: &[u8]) -> u32 {
    let mut c = 0xFFFF_FFFFu32;
    for &b in bytes {
        c = CRC_TABLE[((c ^ b as u32) & 0xFF) as usize] ^ (c >> 8);
    }
    c ^ 0xFFFF_FFFF
}

fn push_pose(buf: &mut Vec<u8>, pose: &Pose) {
    for v in pose.position.to_array().into_iter().chain(pose.facing.to_array()) {
        buf.extend_from_slice(&v.to_le_bytes());
    }
}

fn sample_record(sample: &Sample) -> Vec<u8> {
    let mut buf = Vec::with_capacity(8 + 2 + 96 + 4 + sample.ir.len() * 4);
    buf.extend_from_slice(&sample.id.to_le_bytes());
    buf.push(sample.is_virtual as u8);
    buf.push(match sample.split {
        Split::Train => 0,
        Split::Test => 1,
    });
    push_pose(&mut buf, &sample.emitter);
    push_pose(&mut buf, &sample.listener);
    buf.extend_from_slice(&(sample.ir.len() as u32).to_le_bytes());
    for &s in &sample.ir.samples {
        buf.extend_from_slice(&(s as f32).to_le_bytes());
    }
    buf
}

/// Writes the dataset: magic, version, JSON header, then one checksummed
/// record per sample with poses as f64 and the response as f32, all
/// little-endian.
pub fn write_dataset(path: &Path, dataset: &Dataset) -> Result<()> {
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    file.write_all(MAGIC)?;
    file.write_all(&FORMAT_VERSION.to_le_bytes())?;
    let header =
        serde_json::to_vec(&dataset.header).map_err(|e| Error::Corrupt(e.to_string()))?;
    file.write_all(&(header.len() as u64).to_le_bytes())?;
    file.write_all(&header)?;
    file.write_all(&(dataset.samples.len() as u64).to_le_bytes())?;
    for sample in &dataset.samples {
        let record = sample_record(sample);
        file.write_all(&record)?;
        file.write_all(&crc32(&record).to_le_bytes())?;
    }
    file.flush()?;
    Ok(())
}

struct Reader<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.at + n > self.bytes.len() {
            return Err(Error::Corrupt("container truncated".into()));
        }
        let s = &self.bytes[self.at..self.at + n];
        self.at += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn pose(&mut self) -> Result<Pose> {
        let mut v = [0.0; 6];
        for slot in &mut v {
            *slot = self.f64()?;
        }
        Pose::new(Vec3::new(v[0], v[1], v[2]), Vec3::new(v[3], v[4], v[5]))
    }
}

/// Reads a dataset container, verifying the per-record checksums.
pub fn read_dataset(path: &Path) -> Result<Dataset> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    let mut r = Reader { bytes: &bytes, at: 0 };
    if r.take(4)? != MAGIC {
        return Err(Error::Corrupt("bad magic".into()));
    }
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(Error::Corrupt(format!("unsupported container version {version}")));
    }
    let header_len = r.u64()? as usize;
    let header: DatasetHeader = serde_json::from_slice(r.take(header_len)?)
        .map_err(|e| Error::Corrupt(format!("header: {e}")))?;
    let n_samples = r.u64()? as usize;
    let mut samples = Vec::with_capacity(n_samples);
    for _ in 0..n_samples {
        let record_start = r.at;
        let id = r.u64()?;
        let is_virtual = r.take(1)?[0] != 0;
        let split = match r.take(1)?[0] {
            0 => Split::Train,
            1 => Split::Test,
            other => return Err(Error::Corrupt(format!("unknown split tag {other}"))),
        };
        let emitter = r.pose()?;
        let listener = r.pose()?;
        let ir_len = r.u32()? as usize;
        let mut ir_samples = Vec::with_capacity(ir_len);
        for _ in 0..ir_len {
            let b: [u8; 4] = r.take(4)?.try_into().unwrap();
            ir_samples.push(f32::from_le_bytes(b) as f64);
        }
        let record_end = r.at;
        let stored_crc = r.u32()?;
        let actual_crc = crc32(&bytes[record_start..record_end]);
        if stored_crc != actual_crc {
            return Err(Error::Corrupt(format!("checksum mismatch in record for sample {id}")));
        }
        samples.push(Sample {
            id,
            emitter,
            listener,
            ir: ImpulseResponse::new(ir_samples, header.sample_rate),
            is_virtual,
            split,
        });
    }
    Ok(Dataset { header, samples })
}

// --- WAV export -----------------------------------------------------------

/// Writes a mono 32-bit float WAV file.
pub fn write_wav(path: &Path, ir: &ImpulseResponse) -> Result<()> {
    let n = ir.len() as u32;
    let data_len = n * 4;
    let rate = ir.sample_rate as u32;
    let mut buf = Vec::with_capacity(58 + data_len as usize);
    buf.extend_from_slice(b"RIFF");
    buf.extend_from_slice(&(4 + 26 + 8 + data_len).to_le_bytes());
    buf.extend_from_slice(b"WAVE");
    buf.extend_from_slice(b"fmt ");
    buf.extend_from_slice(&18u32.to_le_bytes());
    buf.extend_from_slice(&3u16.to_le_bytes()); // IEEE float
    buf.extend_from_slice(&1u16.to_le_bytes()); // mono
    buf.extend_from_slice(&rate.to_le_bytes());
    buf.extend_from_slice(&(rate * 4).to_le_bytes());
    buf.extend_from_slice(&4u16.to_le_bytes());
    buf.extend_from_slice(&32u16.to_le_bytes());
    buf.extend_from_slice(&0u16.to_le_bytes()); // no extension
    buf.extend_from_slice(b"data");
    buf.extend_from_slice(&data_len.to_le_bytes());
    for &s in &ir.samples {
        buf.extend_from_slice(&(s as f32).to_le_bytes());
    }
    std::fs::write(path, buf)?;
    Ok(())
}

/// Reads back a WAV written by [`write_wav`].
pub fn read_wav(path: &Path) -> Result<ImpulseResponse> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    let mut r = Reader { bytes: &bytes, at: 0 };
    if r.take(4)? != b"RIFF" {
        return Err(Error::Corrupt("not a RIFF file".into()));
    }
    r.take(4)?;
    if r.take(4)? != b"WAVE" {
        return Err(Error::Corrupt("not a WAVE file".into()));
    }
    let mut rate = 0u32;
    let mut format = 0u16;
    loop {
        let tag: [u8; 4] = r.take(4)?.try_into().unwrap();
        let len = r.u32()? as usize;
        match &tag {
            b"fmt " => {
                let chunk = r.take(len)?;
                format = u16::from_le_bytes(chunk[0..2].try_into().unwrap());
                rate = u32::from_le_bytes(chunk[4..8].try_into().unwrap());
            }
            b"data" => {
                if format != 3 {
                    return Err(Error::Corrupt(format!("expected float format, got {format}")));
                }
                let chunk = r.take(len)?;
                let samples = chunk
                    .chunks_exact(4)
                    .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
                    .collect();
                return Ok(ImpulseResponse::new(samples, rate as f64));
            }
            _ => {
                r.take(len)?;
            }
        }
    }
}

/// Sanity guard used by tests and the command-line tools: all sample ids
/// unique, virtual flags consistent, responses of uniform length.
pub fn check_dataset(dataset: &Dataset) -> Result<()> {
    let mut ids = HashSet::new();
    for s in &dataset.samples {
        if !ids.insert(s.id) {
            return Err(Error::Corrupt(format!("duplicate sample id {}", s.id)));
        }
        if s.ir.len() != dataset.header.ir_len {
            return Err(Error::DimensionMismatch {
                expected: dataset.header.ir_len,
                got: s.ir.len(),
            });
        }
        if s.is_virtual && s.split == Split::Test {
            return Err(Error::Corrupt(format!("virtual sample {} in test split", s.id)));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::Material;

    fn small_scene() -> SceneSpec {
        SceneSpec {
            room: ShoeboxRoom::uniform(Vec3::new(5.0, 4.0, 3.0), Material::flat(0.7)).unwrap(),
            emitter_pattern: GainPattern::omni(),
            listener_pattern: GainPattern::omni(),
            train_emitters: 2,
            test_emitters: 1,
            listeners_per_emitter: 3,
            config: SimulationConfig {
                max_image_order: 2,
                ir_duration: 0.1,
                rng_seed: 9,
                ..Default::default()
            },
            mode: SimMode::Ism,
            pulse_mode: PulseMode::WindowedSinc,
        }
    }

    #[test]
    fn generation_respects_counts_splits_and_separation() {
        let scene = small_scene();
        let ds = generate_dataset(&scene).unwrap();
        assert_eq!(ds.len(), 9);
        assert_eq!(ds.split(Split::Train).count(), 6);
        assert_eq!(ds.split(Split::Test).count(), 3);
        check_dataset(&ds).unwrap();

        let mut emitter_positions: Vec<Vec3> = Vec::new();
        for s in &ds.samples {
            if !emitter_positions.iter().any(|p| p.distance(s.emitter.position) < 1e-12) {
                emitter_positions.push(s.emitter.position);
            }
            assert!(s.emitter.position.distance(s.listener.position) >= LISTENER_CLEARANCE);
            assert!(!s.is_virtual);
        }
        assert_eq!(emitter_positions.len(), 3);
        for i in 0..emitter_positions.len() {
            for j in i + 1..emitter_positions.len() {
                assert!(
                    emitter_positions[i].distance(emitter_positions[j]) >= EMITTER_SEPARATION
                );
            }
        }
    }

    #[test]
    fn responses_are_quantized_at_generation() {
        let ds = generate_dataset(&small_scene()).unwrap();
        for s in &ds.samples {
            for &v in &s.ir.samples {
                assert_eq!(v, v as f32 as f64);
            }
        }
    }

    #[test]
    fn generation_is_deterministic_in_the_seed() {
        let a = generate_dataset(&small_scene()).unwrap();
        let b = generate_dataset(&small_scene()).unwrap();
        let mut other = small_scene();
        other.config.rng_seed = 10;
        let c = generate_dataset(&other).unwrap();
        for (x, y) in a.samples.iter().zip(b.samples.iter()) {
            assert_eq!(x.emitter.position, y.emitter.position);
            assert_eq!(x.ir.samples, y.ir.samples);
        }
        assert_ne!(a.samples[0].emitter.position, c.samples[0].emitter.position);
    }

    #[test]
    fn exchange_augmentation_swaps_poses_and_keeps_responses() {
        let ds = generate_dataset(&small_scene()).unwrap();
        let aug = ele_augment(&ds);
        assert_eq!(aug.split(Split::Train).count(), 12);
        assert_eq!(aug.split(Split::Test).count(), 3);
        check_dataset(&aug).unwrap();
        let originals: Vec<&Sample> =
            ds.samples.iter().filter(|s| s.split == Split::Train).collect();
        let virtuals: Vec<&Sample> = aug.samples.iter().filter(|s| s.is_virtual).collect();
        assert_eq!(virtuals.len(), originals.len());
        for (o, v) in originals.iter().zip(virtuals.iter()) {
            assert_eq!(o.emitter.position, v.listener.position);
            assert_eq!(o.emitter.facing, v.listener.facing);
            assert_eq!(o.listener.position, v.emitter.position);
            assert_eq!(o.ir.samples, v.ir.samples);
            assert_eq!(v.split, Split::Train);
        }
    }

    #[test]
    fn container_round_trip_is_bit_exact() {
        let ds = ele_augment(&generate_dataset(&small_scene()).unwrap());
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("scene.rvds");
        write_dataset(&path, &ds).unwrap();
        let back = read_dataset(&path).unwrap();
        assert_eq!(back.len(), ds.len());
        assert_eq!(back.header.ir_len, ds.header.ir_len);
        for (a, b) in ds.samples.iter().zip(back.samples.iter()) {
            assert_eq!(a.id, b.id);
            assert_eq!(a.is_virtual, b.is_virtual);
            assert_eq!(a.split, b.split);
            assert_eq!(a.emitter.position, b.emitter.position);
            assert_eq!(a.emitter.facing, b.emitter.facing);
            assert_eq!(a.listener.position, b.listener.position);
            for (x, y) in a.ir.samples.iter().zip(b.ir.samples.iter()) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }

    #[test]
    fn single_byte_corruption_is_detected() {
        let ds = generate_dataset(&small_scene()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("scene.rvds");
        write_dataset(&path, &ds).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        // Flip one bit deep in the sample records, well past the header.
        let target = bytes.len() - 100;
        bytes[target] ^= 0x01;
        std::fs::write(&path, &bytes).unwrap();
        match read_dataset(&path) {
            Err(Error::Corrupt(_)) => {}
            other => panic!("corruption not flagged: {other:?}"),
        }
    }

    #[test]
    fn wav_round_trip_preserves_samples() {
        let ds = generate_dataset(&small_scene()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ir.wav");
        write_wav(&path, &ds.samples[0].ir).unwrap();
        let back = read_wav(&path).unwrap();
        assert_eq!(back.sample_rate, ds.samples[0].ir.sample_rate);
        assert_eq!(back.samples.len(), ds.samples[0].ir.samples.len());
        for (a, b) in ds.samples[0].ir.samples.iter().zip(back.samples.iter()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn crc_matches_known_vector() {
        // Standard check value for the IEEE polynomial.
        assert_eq!(crc32(b"123456789"), 0xCBF4_3926);
    }
}
