//! Directional gain patterns and sphere quadrature.
//!
//! Patterns are peak-normalized to 1 and evaluated against a device facing
//! axis. The default representation is zonal (axially symmetric): a Legendre
//! series in t = cos(angle between direction and facing), stored with the
//! per-degree normalization folded in so the constant pattern is exactly
//! `[1, 0, 0, 0, 0]`. A full real spherical-harmonic basis of order 4 (25
//! coefficients) is available for patterns that are not bodies of
//! revolution; its roll convention is fixed by [`orthonormal_frame`].

use serde::{Deserialize, Serialize};

use crate::types::{Error, Result};
use crate::vec3::Vec3;

pub const SH_ORDER: usize = 4;
pub const ZONAL_COEFFS: usize = SH_ORDER + 1;
pub const FULL_COEFFS: usize = (SH_ORDER + 1) * (SH_ORDER + 1);
pub const DEFAULT_FLOOR: f64 = 1e-4;

/// sqrt((2l+1)/4pi): converts Legendre-basis zonal coefficients to the
/// orthonormal m=0 spherical-harmonic basis.
pub const ZONAL_SH_NORM: [f64; ZONAL_COEFFS] = [
    0.28209479177387814,
    0.4886025119029199,
    0.6307831305050401,
    0.7463526651802308,
    0.8462843753216345,
];

/// Legendre polynomials P_0..P_4 at t.
pub fn legendre(t: f64) -> [f64; ZONAL_COEFFS] {
    let t2 = t * t;
    [
        1.0,
        t,
        1.5 * t2 - 0.5,
        t * (2.5 * t2 - 1.5),
        4.375 * t2 * t2 - 3.75 * t2 + 0.375,
    ]
}

/// Real orthonormal spherical harmonics up to order 4 evaluated on a unit
/// vector, indexed l*(l+1)+m. Constants are the standard Cartesian forms;
/// the test suite checks orthonormality against dense quadrature.
pub fn real_sh(d: Vec3) -> [f64; FULL_COEFFS] {
    let (x, y, z) = (d.x, d.y, d.z);
    let (x2, y2, z2) = (x * x, y * y, z * z);
    let mut b = [0.0; FULL_COEFFS];
    b[0] = 0.28209479177387814;

    b[1] = 0.4886025119029199 * y;
    b[2] = 0.4886025119029199 * z;
    b[3] = 0.4886025119029199 * x;

    b[4] = 1.0925484305920792 * x * y;
    b[5] = 1.0925484305920792 * y * z;
    b[6] = 0.31539156525252005 * (3.0 * z2 - 1.0);
    b[7] = 1.0925484305920792 * x * z;
    b[8] = 0.5462742152960396 * (x2 - y2);

    b[9] = 0.5900435899266435 * y * (3.0 * x2 - y2);
    b[10] = 2.890611442640554 * x * y * z;
    b[11] = 0.4570457994644658 * y * (5.0 * z2 - 1.0);
    b[12] = 0.3731763325901154 * z * (5.0 * z2 - 3.0);
    b[13] = 0.4570457994644658 * x * (5.0 * z2 - 1.0);
    b[14] = 1.445305721320277 * z * (x2 - y2);
    b[15] = 0.5900435899266435 * x * (x2 - 3.0 * y2);

    b[16] = 2.5033429417967046 * x * y * (x2 - y2);
    b[17] = 1.7701307697799304 * y * z * (3.0 * x2 - y2);
    b[18] = 0.9461746957575601 * x * y * (7.0 * z2 - 1.0);
    b[19] = 0.6690465435572892 * y * z * (7.0 * z2 - 3.0);
    b[20] = 0.10578554691520431 * (35.0 * z2 * z2 - 30.0 * z2 + 3.0);
    b[21] = 0.6690465435572892 * x * z * (7.0 * z2 - 3.0);
    b[22] = 0.47308734787878004 * (x2 - y2) * (7.0 * z2 - 1.0);
    b[23] = 1.7701307697799304 * x * z * (x2 - 3.0 * y2);
    b[24] = 0.6258357354491761 * (x2 * x2 - 6.0 * x2 * y2 + y2 * y2);
    b
}

/// Deterministic right-handed frame with `facing` as local z. Reference up
/// is world z, switching to world x when facing is nearly vertical.
pub fn orthonormal_frame(facing: Vec3) -> (Vec3, Vec3, Vec3) {
    let z = facing.normalized().expect("facing must be a unit vector");
    let reference = if z.z.abs() < 0.999 {
        Vec3::new(0.0, 0.0, 1.0)
    } else {
        Vec3::new(1.0, 0.0, 0.0)
    };
    let x = reference.cross(z).normalized().expect("reference not parallel to facing");
    let y = z.cross(x);
    (x, y, z)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum PatternShape {
    /// Legendre series in cos(angle to facing); coefficient l multiplies
    /// P_l directly (no extra normalization factor).
    Zonal { legendre: Vec<f64> },
    /// Real SH series evaluated in the device frame from
    /// [`orthonormal_frame`].
    Full { sh: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainPattern {
    pub shape: PatternShape,
    /// Lower clamp on evaluations; keeps log-domain losses finite.
    pub floor: f64,
}

impl GainPattern {
    /// Unit gain in every direction. Evaluates to exactly 1.0.
    pub fn omni() -> GainPattern {
        GainPattern {
            shape: PatternShape::Zonal { legendre: vec![1.0, 0.0, 0.0, 0.0, 0.0] },
            floor: DEFAULT_FLOOR,
        }
    }

    /// Classic cardioid (1 + cos angle) / 2.
    pub fn cardioid() -> GainPattern {
        GainPattern {
            shape: PatternShape::Zonal { legendre: vec![0.5, 0.5, 0.0, 0.0, 0.0] },
            floor: DEFAULT_FLOOR,
        }
    }

    /// Sharpened cardioid ((1 + cos angle) / 2)^power, exact in the zonal
    /// basis for power <= 4.
    pub fn cardioid_power(power: u32) -> Result<GainPattern> {
        if !(1..=SH_ORDER as u32).contains(&power) {
            return Err(Error::Pattern(format!(
                "cardioid power must lie in 1..={SH_ORDER}, got {power}"
            )));
        }
        // Monomial coefficients of ((1+t)/2)^p via the binomial theorem.
        let mut mono = vec![0.0; power as usize + 1];
        let scale = 0.5_f64.powi(power as i32);
        for (k, m) in mono.iter_mut().enumerate() {
            *m = scale * binomial(power as usize, k);
        }
        let legendre = monomial_to_legendre(&mono);
        GainPattern::from_zonal(legendre, DEFAULT_FLOOR)
    }

    /// Builds a zonal pattern from Legendre coefficients, rescaling so the
    /// peak over the axis angle is 1.
    pub fn from_zonal(mut coeffs: Vec<f64>, floor: f64) -> Result<GainPattern> {
        if coeffs.is_empty() || coeffs.len() > ZONAL_COEFFS {
            return Err(Error::Pattern(format!(
                "zonal pattern takes 1..={ZONAL_COEFFS} coefficients, got {}",
                coeffs.len()
            )));
        }
        coeffs.resize(ZONAL_COEFFS, 0.0);
        let peak = (0..=2000)
            .map(|i| {
                let t = -1.0 + i as f64 * 1e-3;
                raw_zonal(&coeffs, &legendre(t))
            })
            .fold(f64::MIN, f64::max);
        if !(peak > 0.0) {
            return Err(Error::Pattern("pattern has no positive peak to normalize".into()));
        }
        for c in &mut coeffs {
            *c /= peak;
        }
        Ok(GainPattern { shape: PatternShape::Zonal { legendre: coeffs }, floor })
    }

    /// Builds a full-basis pattern from 25 real-SH coefficients, peak
    /// normalized over a dense direction grid.
    pub fn from_full(mut sh: Vec<f64>, floor: f64) -> Result<GainPattern> {
        if sh.is_empty() || sh.len() > FULL_COEFFS {
            return Err(Error::Pattern(format!(
                "full pattern takes 1..={FULL_COEFFS} coefficients, got {}",
                sh.len()
            )));
        }
        sh.resize(FULL_COEFFS, 0.0);
        let grid = SphereQuadrature::fibonacci(512)?;
        let peak = grid
            .directions
            .iter()
            .map(|&d| {
                let b = real_sh(d);
                sh.iter().zip(b.iter()).map(|(c, y)| c * y).sum::<f64>()
            })
            .fold(f64::MIN, f64::max);
        if !(peak > 0.0) {
            return Err(Error::Pattern("pattern has no positive peak to normalize".into()));
        }
        for c in &mut sh {
            *c /= peak;
        }
        Ok(GainPattern { shape: PatternShape::Full { sh }, floor })
    }

    /// Gain for a world-space unit `direction` given the device `facing`.
    /// Launch directions for emitters, look directions (listener toward the
    /// arrival) for listeners; with that convention a shared pattern is
    /// symmetric under endpoint exchange.
    pub fn eval(&self, direction: Vec3, facing: Vec3) -> f64 {
        let raw = match &self.shape {
            PatternShape::Zonal { legendre: c } => {
                let t = direction.dot(facing).clamp(-1.0, 1.0);
                let b = legendre(t);
                raw_zonal(c, &b)
            }
            PatternShape::Full { sh } => {
                let (fx, fy, fz) = orthonormal_frame(facing);
                let local = Vec3::new(direction.dot(fx), direction.dot(fy), direction.dot(fz));
                let b = real_sh(local);
                sh.iter().zip(b.iter()).map(|(c, y)| c * y).sum()
            }
        };
        raw.clamp(self.floor, 1.0)
    }

    /// True when the pattern is the constant unit gain.
    pub fn is_omni(&self) -> bool {
        match &self.shape {
            PatternShape::Zonal { legendre } => {
                legendre[0] == 1.0 && legendre[1..].iter().all(|&c| c == 0.0)
            }
            PatternShape::Full { .. } => false,
        }
    }

    /// Zonal coefficients converted to the orthonormal m=0 SH basis.
    pub fn zonal_sh_coefficients(&self) -> Option<[f64; ZONAL_COEFFS]> {
        match &self.shape {
            PatternShape::Zonal { legendre } => {
                let mut out = [0.0; ZONAL_COEFFS];
                for l in 0..ZONAL_COEFFS {
                    out[l] = legendre[l] / ZONAL_SH_NORM[l];
                }
                Some(out)
            }
            PatternShape::Full { .. } => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.floor > 0.0 && self.floor < 1.0) {
            return Err(Error::Pattern(format!("floor must lie in (0, 1), got {}", self.floor)));
        }
        let len = match &self.shape {
            PatternShape::Zonal { legendre } => legendre.len(),
            PatternShape::Full { sh } => sh.len(),
        };
        let expected = match &self.shape {
            PatternShape::Zonal { .. } => ZONAL_COEFFS,
            PatternShape::Full { .. } => FULL_COEFFS,
        };
        if len != expected {
            return Err(Error::DimensionMismatch { expected, got: len });
        }
        Ok(())
    }
}

fn raw_zonal(coeffs: &[f64], basis: &[f64; ZONAL_COEFFS]) -> f64 {
    coeffs.iter().zip(basis.iter()).map(|(c, b)| c * b).sum()
}

fn binomial(n: usize, k: usize) -> f64 {
    let mut acc = 1.0;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc
}

/// Rewrites a polynomial in t (monomial coefficients, degree <= 4) as a
/// Legendre series. Exact back-substitution from the highest degree down.
pub fn monomial_to_legendre(mono: &[f64]) -> Vec<f64> {
    assert!(mono.len() <= ZONAL_COEFFS, "only degrees up to 4 are supported");
    // Monomial expansions of P_0..P_4, row l column k.
    let p: [[f64; 5]; 5] = [
        [1.0, 0.0, 0.0, 0.0, 0.0],
        [0.0, 1.0, 0.0, 0.0, 0.0],
        [-0.5, 0.0, 1.5, 0.0, 0.0],
        [0.0, -1.5, 0.0, 2.5, 0.0],
        [0.375, 0.0, -3.75, 0.0, 4.375],
    ];
    let mut rem = [0.0; 5];
    rem[..mono.len()].copy_from_slice(mono);
    let mut out = vec![0.0; ZONAL_COEFFS];
    for l in (0..ZONAL_COEFFS).rev() {
        let a = rem[l] / p[l][l];
        out[l] = a;
        for k in 0..=l {
            rem[k] -= a * p[l][k];
        }
    }
    out
}

/// Fits zonal Legendre coefficients to directional values by least squares
/// (normal equations) and peak-normalizes the result.
pub fn fit_zonal(
    directions: &[Vec3],
    facing: Vec3,
    values: &[f64],
    floor: f64,
) -> Result<GainPattern> {
    if directions.len() != values.len() {
        return Err(Error::DimensionMismatch { expected: directions.len(), got: values.len() });
    }
    if directions.len() < ZONAL_COEFFS {
        return Err(Error::Pattern(format!(
            "zonal fit needs at least {ZONAL_COEFFS} samples, got {}",
            directions.len()
        )));
    }
    if values.iter().all(|&v| v.abs() < 1e-15) {
        return Err(Error::Pattern("directional values are all zero".into()));
    }
    let mut ata = [[0.0; ZONAL_COEFFS]; ZONAL_COEFFS];
    let mut atb = [0.0; ZONAL_COEFFS];
    for (d, &v) in directions.iter().zip(values.iter()) {
        let t = d.dot(facing).clamp(-1.0, 1.0);
        let b = legendre(t);
        for i in 0..ZONAL_COEFFS {
            atb[i] += b[i] * v;
            for j in 0..ZONAL_COEFFS {
                ata[i][j] += b[i] * b[j];
            }
        }
    }
    let coeffs = solve_dense(&mut ata.map(|r| r.to_vec()), &mut atb.to_vec())?;
    GainPattern::from_zonal(coeffs, floor)
}

/// Gaussian elimination with partial pivoting for the small SH systems.
pub fn solve_dense(a: &mut [Vec<f64>], b: &mut Vec<f64>) -> Result<Vec<f64>> {
    let n = b.len();
    for row in a.iter() {
        if row.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: row.len() });
        }
    }
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())
            .unwrap();
        if a[pivot][col].abs() < 1e-12 {
            return Err(Error::Pattern("singular system in least-squares fit".into()));
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = b[row];
        for k in row + 1..n {
            acc -= a[row][k] * x[k];
        }
        x[row] = acc / a[row][row];
    }
    Ok(x)
}

/// Equal-weight directions for integrating over the sphere; weights sum to
/// 1, so quadrature sums estimate the spherical mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SphereQuadrature {
    pub directions: Vec<Vec3>,
    pub weights: Vec<f64>,
}

impl SphereQuadrature {
    /// Golden-angle Fibonacci lattice with n points.
    pub fn fibonacci(n: usize) -> Result<SphereQuadrature> {
        if n < 4 {
            return Err(Error::Config(format!("quadrature needs at least 4 directions, got {n}")));
        }
        let golden_angle = std::f64::consts::PI * (3.0 - 5.0_f64.sqrt());
        let mut directions = Vec::with_capacity(n);
        for i in 0..n {
            let z = 1.0 - (2.0 * i as f64 + 1.0) / n as f64;
            let r = (1.0 - z * z).max(0.0).sqrt();
            let phi = golden_angle * i as f64;
            directions.push(Vec3::new(r * phi.cos(), r * phi.sin(), z));
        }
        let w = 1.0 / n as f64;
        Ok(SphereQuadrature { directions, weights: vec![w; n] })
    }

    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }

    /// Spherical mean of `f` under this quadrature.
    pub fn mean<F: FnMut(Vec3) -> f64>(&self, mut f: F) -> f64 {
        self.directions.iter().zip(self.weights.iter()).map(|(&d, &w)| w * f(d)).sum()
    }
}

/// Free-function forms of the module's two entry points.
pub fn eval_pattern(pattern: &GainPattern, direction: Vec3, facing: Vec3) -> f64 {
    pattern.eval(direction, facing)
}

pub fn make_quadrature(n: usize) -> Result<SphereQuadrature> {
    SphereQuadrature::fibonacci(n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seed_rng;
    use rand::Rng;
    use rand_distr::{Distribution, UnitSphere};

    fn random_dirs(n: usize, seed: u64) -> Vec<Vec3> {
        let mut rng = seed_rng(seed);
        (0..n).map(|_| Vec3::from_array(UnitSphere.sample(&mut rng))).collect()
    }

    #[test]
    fn omni_is_exactly_one() {
        let p = GainPattern::omni();
        for d in random_dirs(64, 3) {
            assert_eq!(p.eval(d, Vec3::new(0.0, 1.0, 0.0)), 1.0);
        }
        assert!(p.is_omni());
    }

    #[test]
    fn cardioid_matches_closed_form() {
        let p = GainPattern::cardioid();
        let facing = Vec3::new(0.0, 0.0, 1.0);
        for i in 0..=100 {
            // Stay above the floor region near the null.
            let t = -0.99 + i as f64 * 0.0199;
            let d = Vec3::new((1.0 - t * t).max(0.0).sqrt(), 0.0, t);
            let expected = 0.5 * (1.0 + t);
            if expected > DEFAULT_FLOOR {
                assert!((p.eval(d, facing) - expected).abs() < 1e-12);
            }
        }
        // The null clamps at the floor.
        assert_eq!(p.eval(Vec3::new(0.0, 0.0, -1.0), facing), DEFAULT_FLOOR);
    }

    #[test]
    fn cardioid_power_matches_closed_form() {
        for power in 1..=4u32 {
            let p = GainPattern::cardioid_power(power).unwrap();
            let facing = Vec3::new(1.0, 0.0, 0.0);
            for d in random_dirs(100, 11 + power as u64) {
                let t = d.dot(facing);
                let expected = (0.5 * (1.0 + t)).powi(power as i32);
                if expected > DEFAULT_FLOOR {
                    assert!(
                        (p.eval(d, facing) - expected).abs() < 1e-10,
                        "power {power}: got {} want {expected}",
                        p.eval(d, facing)
                    );
                }
            }
        }
    }

    #[test]
    fn real_sh_is_orthonormal_under_dense_quadrature() {
        // Dense Fibonacci grid as the integration oracle; 4 pi times the
        // mean approximates the sphere integral.
        let q = SphereQuadrature::fibonacci(20_000).unwrap();
        let mut gram = [[0.0; FULL_COEFFS]; FULL_COEFFS];
        for (&d, &w) in q.directions.iter().zip(q.weights.iter()) {
            let b = real_sh(d);
            for i in 0..FULL_COEFFS {
                for j in i..FULL_COEFFS {
                    gram[i][j] += w * b[i] * b[j] * 4.0 * std::f64::consts::PI;
                }
            }
        }
        for i in 0..FULL_COEFFS {
            for j in i..FULL_COEFFS {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!(
                    (gram[i][j] - want).abs() < 2e-3,
                    "gram[{i}][{j}] = {}, want {want}",
                    gram[i][j]
                );
            }
        }
    }

    #[test]
    fn full_basis_agrees_with_zonal_for_m0() {
        let legendre_coeffs = vec![0.4, 0.3, 0.2, 0.05, 0.05];
        let zonal = GainPattern::from_zonal(legendre_coeffs.clone(), 1e-6).unwrap();
        // Same shape through the full basis: coefficient at (l, 0) is the
        // Legendre coefficient divided by sqrt((2l+1)/4pi).
        let mut sh = vec![0.0; FULL_COEFFS];
        for l in 0..ZONAL_COEFFS {
            sh[l * (l + 1)] = legendre_coeffs[l] / ZONAL_SH_NORM[l];
        }
        let full = GainPattern::from_full(sh, 1e-6).unwrap();
        let facing = Vec3::new(0.3, -0.5, 0.81).normalized().unwrap();
        // Peak normalization scans different grids for the two shapes, so
        // compare up to one global scale and require that scale be small.
        let mut ratio = None;
        for d in random_dirs(200, 5) {
            let a = zonal.eval(d, facing);
            let b = full.eval(d, facing);
            if a > 1e-3 && b > 1e-3 && a < 0.99 && b < 0.99 {
                let r = a / b;
                if let Some(r0) = ratio {
                    assert!((r - r0 as f64).abs() < 1e-9, "ratio drifts: {r} vs {r0}");
                } else {
                    assert!((r - 1.0).abs() < 0.01, "scales too far apart: {r}");
                    ratio = Some(r);
                }
            }
        }
        assert!(ratio.is_some(), "no usable comparison directions");
    }

    #[test]
    fn quadrature_mean_converges_to_analytic_sphere_mean() {
        // Mean of exp(a . d) over the sphere is sinh(|a|)/|a|. The lattice
        // error is smoothest at Fibonacci point counts, so sample those.
        let a = Vec3::new(0.3, -0.8, 0.52);
        let norm = a.norm();
        let analytic = norm.sinh() / norm;
        let mut last_err = f64::MAX;
        for n in [21, 89, 377, 1597] {
            let q = SphereQuadrature::fibonacci(n).unwrap();
            let est = q.mean(|d| (a.dot(d)).exp());
            let err = (est - analytic).abs();
            assert!(err < last_err, "error should shrink: {err} after {last_err}");
            last_err = err;
        }
        assert!(last_err < 1e-5, "n=1597 error {last_err}");
    }

    #[test]
    fn quadrature_weights_sum_to_one() {
        for n in [4, 7, 64, 333] {
            let q = make_quadrature(n).unwrap();
            let sum: f64 = q.weights.iter().sum();
            assert!((sum - 1.0).abs() < 1e-12);
            for d in &q.directions {
                assert!((d.norm() - 1.0).abs() < 1e-12);
            }
        }
        assert!(make_quadrature(3).is_err());
    }

    #[test]
    fn fit_recovers_sharpened_cardioid() {
        let facing = Vec3::new(0.0, 1.0, 0.0);
        let truth = GainPattern::cardioid_power(2).unwrap();
        let dirs = SphereQuadrature::fibonacci(128).unwrap().directions;
        let values: Vec<f64> =
            dirs.iter().map(|&d| (0.5 * (1.0 + d.dot(facing))).powi(2)).collect();
        // Same floor as the truth pattern so the null region clamps alike.
        let fitted = fit_zonal(&dirs, facing, &values, DEFAULT_FLOOR).unwrap();
        for d in random_dirs(64, 9) {
            assert!((fitted.eval(d, facing) - truth.eval(d, facing)).abs() < 1e-6);
        }
    }

    #[test]
    fn fit_rejects_degenerate_inputs() {
        let dirs = random_dirs(32, 2);
        let zeros = vec![0.0; 32];
        assert!(fit_zonal(&dirs, Vec3::new(1.0, 0.0, 0.0), &zeros, 1e-4).is_err());
        let few = random_dirs(3, 2);
        assert!(fit_zonal(&few, Vec3::new(1.0, 0.0, 0.0), &[1.0, 1.0, 1.0], 1e-4).is_err());
    }

    #[test]
    fn solve_dense_matches_known_solution() {
        let mut a = vec![vec![4.0, 1.0, 0.0], vec![1.0, 3.0, 1.0], vec![0.0, 1.0, 2.0]];
        let x_true = [1.0, -2.0, 0.5];
        let mut b = vec![
            4.0 * x_true[0] + x_true[1],
            x_true[0] + 3.0 * x_true[1] + x_true[2],
            x_true[1] + 2.0 * x_true[2],
        ];
        let x = solve_dense(&mut a, &mut b).unwrap();
        for (got, want) in x.iter().zip(x_true.iter()) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn stored_representation_survives_serde() {
        let p = GainPattern::cardioid_power(3).unwrap();
        let json = serde_json::to_string(&p).unwrap();
        let back: GainPattern = serde_json::from_str(&json).unwrap();
        let mut rng = seed_rng(17);
        let d = Vec3::from_array(UnitSphere.sample(&mut rng));
        let f: Vec3 = Vec3::from_array(UnitSphere.sample(&mut rng));
        assert_eq!(p.eval(d, f).to_bits(), back.eval(d, f).to_bits());
        let _: f64 = rng.gen();
    }
}
