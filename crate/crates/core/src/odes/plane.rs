//! Complex-plane slices C_M = R + M R. The commuting-ansatz solvers work
//! inside one such plane, where the algebra is honestly commutative and the
//! classical scalar methods apply; results are mapped back and re-verified by
//! the residual gates on Cayley-Dickson values.

use crate::algebra::CdNum;

use super::OdeError;

/// A complex plane through the real axis with unit imaginary direction
/// `axis`.
#[derive(Debug, Clone)]
pub struct Plane {
    pub level: u8,
    pub axis: CdNum,
}

impl Plane {
    /// Common plane of the given values: the first non-real value fixes the
    /// axis, the rest must be parallel to it. All-real inputs default to i1.
    pub fn spanning(values: &[&CdNum], level: u8, tol: f64) -> Result<Plane, OdeError> {
        let mut axis: Option<CdNum> = None;
        for v in values {
            let im = v.im();
            let n = im.norm();
            if n <= tol * (1.0 + v.norm()) {
                continue;
            }
            let dir = im.scale(1.0 / n);
            match &axis {
                None => axis = Some(dir),
                Some(a) => {
                    let aligned = (&dir - a).norm().min((&dir + a).norm());
                    if aligned > 1e-8 {
                        return Err(OdeError::AnsatzViolated(format!(
                            "values span more than one complex plane (misalignment {aligned:.3e})"
                        )));
                    }
                }
            }
        }
        Ok(Plane {
            level,
            axis: axis.unwrap_or_else(|| CdNum::basis(level.max(1), 1)),
        })
    }

    pub fn to_c(&self, z: &CdNum, tol: f64) -> Result<(f64, f64), OdeError> {
        let im = z.im();
        let proj = im
            .coeffs()
            .iter()
            .zip(self.axis.coeffs())
            .map(|(a, b)| a * b)
            .sum::<f64>();
        let off = (&im - &self.axis.scale(proj)).norm();
        if off > tol * (1.0 + z.norm()) {
            return Err(OdeError::AnsatzViolated(format!(
                "value leaves the working plane by {off:.3e}"
            )));
        }
        Ok((z.re(), proj))
    }

    pub fn from_c(&self, c: (f64, f64)) -> CdNum {
        let mut z = self.axis.scale(c.1);
        z.set_coeff(0, c.0);
        z.promote(self.level)
    }
}

pub fn cadd(a: (f64, f64), b: (f64, f64)) -> (f64, f64) {
    (a.0 + b.0, a.1 + b.1)
}

pub fn csub(a: (f64, f64), b: (f64, f64)) -> (f64, f64) {
    (a.0 - b.0, a.1 - b.1)
}

pub fn cmul(a: (f64, f64), b: (f64, f64)) -> (f64, f64) {
    (a.0 * b.0 - a.1 * b.1, a.0 * b.1 + a.1 * b.0)
}

pub fn cscale(a: (f64, f64), s: f64) -> (f64, f64) {
    (a.0 * s, a.1 * s)
}

pub fn cabs(a: (f64, f64)) -> f64 {
    a.0.hypot(a.1)
}

pub fn cdiv(a: (f64, f64), b: (f64, f64)) -> Result<(f64, f64), OdeError> {
    let d = b.0 * b.0 + b.1 * b.1;
    if d < 1e-300 {
        return Err(OdeError::DegenerateDenominator);
    }
    Ok(((a.0 * b.0 + a.1 * b.1) / d, (a.1 * b.0 - a.0 * b.1) / d))
}

pub fn cexp(a: (f64, f64)) -> (f64, f64) {
    let e = a.0.exp();
    (e * a.1.cos(), e * a.1.sin())
}

/// Principal logarithm.
pub fn cln(a: (f64, f64)) -> Result<(f64, f64), OdeError> {
    let r = cabs(a);
    if r < 1e-300 {
        return Err(OdeError::DegenerateDenominator);
    }
    Ok((r.ln(), a.1.atan2(a.0)))
}
