//! Elementary analytic functions of a Cayley-Dickson variable: polar form,
//! exp, principal logarithm, real powers, square-root sets, and branch-tracked
//! logarithm continuation along paths.
//!
//! Every nonzero z lives in a complex plane C_M = R + M R for a unit purely
//! imaginary axis M, and the functions here restrict to the classical complex
//! ones on each plane. Purely real inputs leave the axis free; we then default
//! to i_1 and raise an ambiguity flag instead of failing.

use thiserror::Error;

use crate::algebra::CdNum;
use crate::calculus::Path;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FunctionError {
    #[error("zero input where a nonzero Cayley-Dickson number is required")]
    ZeroInput,
    #[error("zero base with non-integer exponent {0}")]
    ZeroBase(f64),
    #[error("path passes through zero near parameter {0}")]
    PathThroughZero(f64),
    #[error("branch step too coarse near parameter {0} (jump {1:.3e} exceeds pi/2)")]
    StepTooCoarse(f64, f64),
}

/// Polar decomposition `z = modulus * exp(axis * angle)`.
///
/// `axis` is the unit imaginary direction of z and `angle` sits in `[0, pi]`,
/// so the reconstruction identity holds as stated. When the imaginary part
/// vanishes the axis is genuinely arbitrary; we pick i_1 and set
/// `axis_ambiguous`.
#[derive(Debug, Clone)]
pub struct PolarForm {
    pub modulus: f64,
    pub axis: CdNum,
    pub angle: f64,
    pub axis_ambiguous: bool,
}

impl PolarForm {
    /// The representative with the axis flipped into the canonical half-sphere
    /// S_r^+ (first nonzero imaginary component positive); the angle picks up
    /// a sign so the pair still reconstructs z. Angle range becomes (-pi, pi].
    pub fn canonical(&self) -> (CdNum, f64) {
        if axis_in_s_plus(&self.axis) {
            (self.axis.clone(), self.angle)
        } else {
            (-&self.axis, -self.angle)
        }
    }
}

fn axis_in_s_plus(axis: &CdNum) -> bool {
    for &c in &axis.coeffs()[1..] {
        if c > 0.0 {
            return true;
        }
        if c < 0.0 {
            return false;
        }
    }
    false
}

pub fn polar_decompose(z: &CdNum, tol: f64) -> Result<PolarForm, FunctionError> {
    let modulus = z.norm();
    if modulus <= tol {
        return Err(FunctionError::ZeroInput);
    }
    let angle = (z.re() / modulus).clamp(-1.0, 1.0).acos();
    let im = z.im();
    let im_norm = im.norm();
    if im_norm <= tol * modulus.max(1.0) {
        // real z: the axis is arbitrary; angle is 0 or pi
        return Ok(PolarForm {
            modulus,
            axis: CdNum::basis(z.level().max(1), 1),
            angle: if z.re() >= 0.0 { 0.0 } else { std::f64::consts::PI },
            axis_ambiguous: true,
        });
    }
    Ok(PolarForm {
        modulus,
        axis: im.scale(1.0 / im_norm),
        angle,
        axis_ambiguous: false,
    })
}

/// `exp(z) = e^{Re z} (cos|z'| + (z'/|z'|) sin|z'|)` with `z' = Im z`.
///
/// Closed form rather than the power series; the series remains as a test
/// oracle.
pub fn cd_exp(z: &CdNum) -> CdNum {
    let re = z.re();
    let im = z.im();
    let t = im.norm();
    let scale = re.exp();
    // sin(t)/t, series near zero
    let sinc = if t < 1e-8 { 1.0 - t * t / 6.0 } else { t.sin() / t };
    let mut out = im.scale(scale * sinc);
    out.set_coeff(0, scale * t.cos());
    out
}

/// `sin(z) = sin(z0) cosh|z'| + (z'/|z'|) cos(z0) sinh|z'|` on the plane of z.
pub fn cd_sin(z: &CdNum) -> CdNum {
    let re = z.re();
    let im = z.im();
    let t = im.norm();
    let dir_scale = if t < 1e-8 {
        1.0 - t * t / 6.0
    } else {
        t.sinh() / t
    };
    let mut out = im.scale(re.cos() * dir_scale);
    out.set_coeff(0, re.sin() * t.cosh());
    out
}

/// `cos(z) = cos(z0) cosh|z'| - (z'/|z'|) sin(z0) sinh|z'|`.
pub fn cd_cos(z: &CdNum) -> CdNum {
    let re = z.re();
    let im = z.im();
    let t = im.norm();
    let dir_scale = if t < 1e-8 {
        1.0 - t * t / 6.0
    } else {
        t.sinh() / t
    };
    let mut out = im.scale(-re.sin() * dir_scale);
    out.set_coeff(0, re.cos() * t.cosh());
    out
}

/// Principal logarithm `ln|z| + axis * angle`, plus the real-axis ambiguity
/// flag from the polar decomposition. Inverse of `cd_exp` on the principal
/// region.
pub fn cd_ln_principal(z: &CdNum, tol: f64) -> Result<(CdNum, bool), FunctionError> {
    let polar = polar_decompose(z, tol)?;
    let mut out = polar.axis.scale(polar.angle);
    out.set_coeff(0, polar.modulus.ln());
    Ok((out, polar.axis_ambiguous))
}

/// `z^a` for real `a`: repeated multiplication for nonnegative integer a
/// (power-associativity makes bracketing irrelevant), otherwise
/// `exp(a * Ln z)` on the principal branch.
pub fn cd_pow_real(z: &CdNum, a: f64, tol: f64) -> Result<CdNum, FunctionError> {
    let is_nonneg_int = a >= 0.0 && a.fract() == 0.0 && a <= u32::MAX as f64;
    if is_nonneg_int {
        return Ok(cd_pow_int(z, a as u32));
    }
    if z.norm() <= tol {
        return Err(FunctionError::ZeroBase(a));
    }
    let (ln, _) = cd_ln_principal(z, tol)?;
    Ok(cd_exp(&ln.scale(a)))
}

/// Integer power by repeated multiplication.
pub fn cd_pow_int(z: &CdNum, n: u32) -> CdNum {
    let mut acc = CdNum::one(z.level());
    for _ in 0..n {
        acc = &acc * z;
    }
    acc
}

/// The full square-root set of z.
///
/// Generic z gives the point pair `± sqrt(|z|) exp(M phi/2)`; zero gives the
/// single point 0; a negative real gives the whole sphere
/// `{ sqrt(|z|) K : Re K = 0, |K| = 1 }`.
#[derive(Debug, Clone)]
pub enum RootSet {
    PointPair(Vec<CdNum>),
    Sphere { center: CdNum, radius: f64 },
}

impl RootSet {
    /// Concrete points for verification: the pair itself, or sphere samples
    /// `center + radius * K` with deterministic unit imaginary K.
    pub fn sample_points(&self, count: usize, level: u8) -> Vec<CdNum> {
        match self {
            RootSet::PointPair(pts) => pts.clone(),
            RootSet::Sphere { center, radius } => (0..count)
                .map(|i| {
                    let k = unit_imaginary_sample(level, i as u64);
                    center + &k.scale(*radius)
                })
                .collect(),
        }
    }
}

/// Deterministic point on the unit purely-imaginary sphere (splitmix-style
/// hash stream, normalized).
pub fn unit_imaginary_sample(level: u8, seed: u64) -> CdNum {
    let dim = 1usize << level;
    let mut state = seed.wrapping_mul(0x9e3779b97f4a7c15).wrapping_add(0x243f6a8885a308d3);
    let mut next = || {
        state = state.wrapping_add(0x9e3779b97f4a7c15);
        let mut x = state;
        x = (x ^ (x >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        x = (x ^ (x >> 27)).wrapping_mul(0x94d049bb133111eb);
        x ^= x >> 31;
        (x as f64) / (u64::MAX as f64) * 2.0 - 1.0
    };
    loop {
        let mut coeffs = vec![0.0; dim];
        for c in coeffs.iter_mut().skip(1) {
            *c = next();
        }
        let z = CdNum::from_coeffs(level, coeffs).unwrap();
        let n = z.norm();
        if n > 1e-3 {
            return z.scale(1.0 / n);
        }
    }
}

pub fn sqrt_set(z: &CdNum, tol: f64) -> RootSet {
    let n = z.norm();
    if n <= tol {
        return RootSet::PointPair(vec![CdNum::zero(z.level())]);
    }
    let im_norm = z.im().norm();
    if im_norm <= tol * n.max(1.0) && z.re() < 0.0 {
        return RootSet::Sphere {
            center: CdNum::zero(z.level()),
            radius: n.sqrt(),
        };
    }
    let polar = polar_decompose(z, tol).expect("nonzero by the guard above");
    let half = polar.axis.scale(polar.angle / 2.0);
    let w = cd_exp(&half).scale(polar.modulus.sqrt());
    RootSet::PointPair(vec![w.clone(), -w])
}

/// Analytic continuation of the logarithm along a path, nearest-branch
/// selection with a pi/2 jump guard and adaptive segment refinement.
///
/// `start_branch` must satisfy `exp(start_branch) = path start`; this is
/// checked, as is `|gamma(t)| > tol` along the way.
pub fn continue_ln_along_path(
    path: &Path,
    start_branch: &CdNum,
    tol: f64,
) -> Result<CdNum, FunctionError> {
    let start = path.node(0);
    if (&cd_exp(start_branch) - &start).norm() > 1e-6 * (1.0 + start.norm()) {
        return Err(FunctionError::ZeroInput);
    }
    let mut w = start_branch.clone();
    let n_seg = path.segment_count();
    for seg in 0..n_seg {
        let a = path.node(seg);
        let b = path.node(seg + 1);
        w = continue_segment(&a, &b, &w, tol, 0, seg as f64 / n_seg as f64)?;
    }
    Ok(w)
}

const MAX_REFINE_DEPTH: u32 = 20;

fn continue_segment(
    a: &CdNum,
    b: &CdNum,
    w_prev: &CdNum,
    tol: f64,
    depth: u32,
    t_hint: f64,
) -> Result<CdNum, FunctionError> {
    if b.norm() <= tol {
        return Err(FunctionError::PathThroughZero(t_hint));
    }
    let cand = nearest_log(b, w_prev, tol)?;
    let jump = (&cand - w_prev).norm();
    if jump <= std::f64::consts::FRAC_PI_2 {
        return Ok(cand);
    }
    if depth >= MAX_REFINE_DEPTH {
        return Err(FunctionError::StepTooCoarse(t_hint, jump));
    }
    let mid = (a + b).scale(0.5);
    if mid.norm() <= tol {
        return Err(FunctionError::PathThroughZero(t_hint));
    }
    let w_mid = continue_segment(a, &mid, w_prev, tol, depth + 1, t_hint)?;
    continue_segment(&mid, b, &w_mid, tol, depth + 1, t_hint)
}

/// The logarithm value of z nearest to `w_prev` among all branches.
fn nearest_log(z: &CdNum, w_prev: &CdNum, tol: f64) -> Result<CdNum, FunctionError> {
    use std::f64::consts::PI;
    let n = z.norm();
    if n <= tol {
        return Err(FunctionError::PathThroughZero(f64::NAN));
    }
    let ln_mod = n.ln();
    let im = z.im();
    let im_norm = im.norm();
    let prev_im = w_prev.im();
    if im_norm > tol * n.max(1.0) {
        // branches ln|z| + M (phi + 2 pi k)
        let axis = im.scale(1.0 / im_norm);
        let phi = (z.re() / n).clamp(-1.0, 1.0).acos();
        let target = prev_im
            .coeffs()
            .iter()
            .zip(axis.coeffs())
            .map(|(p, m)| p * m)
            .sum::<f64>();
        let k0 = ((target - phi) / (2.0 * PI)).round() as i64;
        let mut best: Option<(f64, CdNum)> = None;
        for k in [k0 - 1, k0, k0 + 1] {
            let mut cand = axis.scale(phi + 2.0 * PI * (k as f64));
            cand.set_coeff(0, ln_mod);
            let d = (&cand - w_prev).norm();
            if best.as_ref().map_or(true, |(bd, _)| d < *bd) {
                best = Some((d, cand));
            }
        }
        Ok(best.unwrap().1)
    } else {
        // real z: angle set is 2 pi k (positive) or pi + 2 pi k (negative),
        // continued along the previous imaginary direction
        let prev_norm = prev_im.norm();
        let axis = if prev_norm > tol {
            prev_im.scale(1.0 / prev_norm)
        } else {
            CdNum::basis(z.level().max(1), 1)
        };
        let offset = if z.re() >= 0.0 { 0.0 } else { PI };
        let k0 = ((prev_norm - offset) / (2.0 * PI)).round() as i64;
        let mut best: Option<(f64, CdNum)> = None;
        for k in [k0 - 1, k0, k0 + 1] {
            let mut cand = axis.scale(offset + 2.0 * PI * (k as f64));
            cand.set_coeff(0, ln_mod);
            let d = (&cand - w_prev).norm();
            if best.as_ref().map_or(true, |(bd, _)| d < *bd) {
                best = Some((d, cand));
            }
        }
        Ok(best.unwrap().1)
    }
}
