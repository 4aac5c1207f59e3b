//! Image-source enumeration for shoebox rooms.
//!
//! Images of the emitter live on the reflection lattice: per axis the image
//! coordinate is 2mD + e (parity q=0) or 2mD - e (parity q=1), where D is
//! the room extent on that axis. The lattice index (m, q) per axis fixes the
//! reflection order |2m - q| and the wall hit counts (|m - q| on the low
//! wall, |m| on the high wall). In a shoebox every image is visible, so
//! enumeration is a pure lattice walk with no occlusion testing.
//!
//! Endpoint exchange maps an image path to its reverse with lattice index
//! m -> -m for q=0 and m -> m for q=1. The per-axis separations below are
//! written so that the exchanged evaluation is the exact negation (q=0) or
//! the exact same sum (q=1) in floating point, which makes both directions
//! produce bit-identical path lengths and therefore bit-identical delays
//! and amplitudes.

use crate::types::{Error, PropagationPath, Result, ShoeboxRoom};
use crate::vec3::Vec3;

/// Margin inside which endpoints are considered to touch a wall.
const WALL_MARGIN: f64 = 1e-6;

/// Per-axis lattice candidate.
#[derive(Debug, Clone, Copy)]
struct AxisImage {
    m: i64,
    q: u8,
    order: u32,
    /// Listener-to-image separation on this axis, computed symmetrically.
    delta: f64,
    /// Image coordinate (unfolded).
    image: f64,
}

fn axis_image(e: f64, l: f64, extent: f64, m: i64, q: u8) -> AxisImage {
    let order = (2 * m - q as i64).unsigned_abs() as u32;
    let two_m_d = 2.0 * m as f64 * extent;
    // q=0: (l - e) - 2mD  -> exchanging endpoints and negating m negates
    //      the value exactly.
    // q=1: (l + e) - 2mD  -> exchanging endpoints keeps the value exactly
    //      (addition is commutative).
    let delta = if q == 0 { (l - e) - two_m_d } else { (l + e) - two_m_d };
    let image = if q == 0 { two_m_d + e } else { two_m_d - e };
    AxisImage { m, q, order, delta, image }
}

fn axis_candidates(e: f64, l: f64, extent: f64, max_order: u32) -> Vec<AxisImage> {
    let mut out = Vec::new();
    let reach = (max_order as i64 + 1) / 2 + 1;
    for m in -reach..=reach {
        for q in 0..2u8 {
            let c = axis_image(e, l, extent, m, q);
            if c.order <= max_order {
                out.push(c);
            }
        }
    }
    // (m, q) ascending: a deterministic traversal order for callers.
    out.sort_by_key(|c| (c.m, c.q));
    out
}

/// Exact specular path for one lattice index, shared with the ray tracer so
/// that a snapped capture reproduces the image-source path bit for bit.
pub(super) fn lattice_path(
    room: &ShoeboxRoom,
    emitter: Vec3,
    listener: Vec3,
    index: [(i64, u8); 3],
) -> Result<PropagationPath> {
    let e = emitter.to_array();
    let l = listener.to_array();
    let dims = room.dimensions.to_array();
    let axes =
        [0, 1, 2].map(|a| axis_image(e[a], l[a], dims[a], index[a].0, index[a].1));
    build_path(room, emitter, listener, axes)
}

/// All specular paths from `emitter` to `listener` with at most `max_order`
/// reflections, in lexicographic lattice order over the axis indices
/// (m_x, q_x, m_y, q_y, m_z, q_z). Both endpoints must lie strictly inside
/// the room.
pub fn enumerate_image_paths(
    room: &ShoeboxRoom,
    emitter: Vec3,
    listener: Vec3,
    max_order: u32,
) -> Result<Vec<PropagationPath>> {
    room.validate()?;
    for (name, p) in [("emitter", emitter), ("listener", listener)] {
        if !room.contains(p, WALL_MARGIN) {
            return Err(Error::Geometry(format!("{name} at {p:?} is not inside the room")));
        }
    }
    let dims = room.dimensions.to_array();
    let e = emitter.to_array();
    let l = listener.to_array();
    let axes: Vec<Vec<AxisImage>> =
        (0..3).map(|a| axis_candidates(e[a], l[a], dims[a], max_order)).collect();

    let mut paths = Vec::new();
    for cx in &axes[0] {
        if cx.order > max_order {
            continue;
        }
        for cy in &axes[1] {
            let partial = cx.order + cy.order;
            if partial > max_order {
                continue;
            }
            for cz in &axes[2] {
                if partial + cz.order > max_order {
                    continue;
                }
                paths.push(build_path(room, emitter, listener, [*cx, *cy, *cz])?);
            }
        }
    }
    Ok(paths)
}

/// Reconstructs the physical polyline for one lattice image by folding the
/// straight listener-to-image segment back into the room.
fn build_path(
    room: &ShoeboxRoom,
    emitter: Vec3,
    listener: Vec3,
    axes: [AxisImage; 3],
) -> Result<PropagationPath> {
    // Squared length in fixed axis order; exchange symmetry of each delta
    // makes this sum, and hence the root, bit-identical in both directions.
    let total_length = (axes[0].delta * axes[0].delta
        + axes[1].delta * axes[1].delta
        + axes[2].delta * axes[2].delta)
        .sqrt();

    let dims = room.dimensions.to_array();
    let l = listener.to_array();
    let image = [axes[0].image, axes[1].image, axes[2].image];

    // Wall-plane crossings of the straight segment from the listener (t=0)
    // to the image (t=1). Plane index k on axis a sits at k * dims[a]; even
    // k folds onto the low wall, odd k onto the high wall.
    let mut crossings: Vec<(f64, usize, i64)> = Vec::new();
    for a in 0..3 {
        let (lo, hi) = if l[a] < image[a] { (l[a], image[a]) } else { (image[a], l[a]) };
        let mut k = (lo / dims[a]).floor() as i64;
        loop {
            let plane = k as f64 * dims[a];
            if plane > hi {
                break;
            }
            if plane > lo {
                let t = (plane - l[a]) / (image[a] - l[a]);
                crossings.push((t, a, k));
            }
            k += 1;
        }
    }
    crossings.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());

    let mut points = Vec::with_capacity(crossings.len() + 2);
    let mut interactions = Vec::with_capacity(crossings.len());
    points.push(emitter);
    // Crossings run listener -> emitter; the path runs the other way.
    for &(t, axis, k) in crossings.iter().rev() {
        let mut p = [0.0; 3];
        for a in 0..3 {
            let u = l[a] + t * (image[a] - l[a]);
            p[a] = fold(u, dims[a]);
        }
        // Snap the bouncing coordinate onto its wall.
        p[axis] = if k % 2 == 0 { 0.0 } else { dims[axis] };
        points.push(Vec3::from_array(p));
        interactions.push(if k % 2 == 0 { 2 * axis } else { 2 * axis + 1 });
    }
    points.push(listener);

    let path = PropagationPath { points, interactions, total_length };
    path.validate()?;
    debug_assert_eq!(wall_counts(&path), formula_counts(&axes));
    Ok(path)
}

/// Triangle-wave fold of an unfolded coordinate into [0, extent].
fn fold(u: f64, extent: f64) -> f64 {
    let period = 2.0 * extent;
    let v = u.rem_euclid(period);
    if v > extent {
        period - v
    } else {
        v
    }
}

fn wall_counts(path: &PropagationPath) -> [u32; 6] {
    let mut c = [0u32; 6];
    for &w in &path.interactions {
        c[w] += 1;
    }
    c
}

fn formula_counts(axes: &[AxisImage; 3]) -> [u32; 6] {
    let mut c = [0u32; 6];
    for (a, ax) in axes.iter().enumerate() {
        c[2 * a] = (ax.m - ax.q as i64).unsigned_abs() as u32;
        c[2 * a + 1] = ax.m.unsigned_abs() as u32;
    }
    c
}
