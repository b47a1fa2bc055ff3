//! Exact Cayley-Dickson arithmetic for levels `r = 0..=4`.
//!
//! Level r is the 2^r-dimensional real algebra produced by iterated doubling:
//! reals, complexes, quaternions (r = 2), octonions (r = 3), sedenions (r = 4).
//! Basis signs come from an integer product table built once per level, so
//! multiplication is sign-exact even though coefficients are `f64`.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::OnceLock;

use thiserror::Error;

/// Highest supported doubling level. Sedenions (r = 4) exist only to witness
/// zero divisors and the loss of norm multiplicativity.
pub const MAX_LEVEL: u8 = 4;

/// Default relative tolerance used by near-zero guards.
pub const DEFAULT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AlgebraError {
    #[error("level {0} outside supported range 0..={MAX_LEVEL}")]
    LevelOutOfRange(u8),
    #[error("coefficient vector has length {got}, level {level} needs {want}")]
    BadCoefficientCount { level: u8, want: usize, got: usize },
    #[error("non-finite coefficient at index {0}")]
    NonFinite(usize),
    #[error("zero or near-zero operand (|x| = {0:.3e})")]
    ZeroOrNearZero(f64),
}

/// A signed basis element: `sign * i_index`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SignedBasis {
    pub sign: i8,
    pub index: usize,
}

/// `i_j * i_k` at doubling level `r`, by recursive application of the
/// doubling product `(xi + eta l)(gamma + delta l) = (xi gamma - conj(delta) eta) + (delta xi + eta conj(gamma)) l`
/// with the convention `i_{2^r + m} = i_m l`.
pub fn basis_product(r: u8, j: usize, k: usize) -> SignedBasis {
    let table = basis_table(r);
    let dim = 1usize << r;
    debug_assert!(j < dim && k < dim);
    table[j * dim + k]
}

fn basis_product_recursive(r: u8, j: usize, k: usize) -> SignedBasis {
    if r == 0 {
        return SignedBasis { sign: 1, index: 0 };
    }
    let half = 1usize << (r - 1);
    let combine = |s: i8, b: SignedBasis, offset: usize| SignedBasis {
        sign: s * b.sign,
        index: b.index + offset,
    };
    // conj(i_m) = i_m for m = 0, -i_m otherwise
    let conj_sign = |m: usize| if m == 0 { 1i8 } else { -1i8 };
    match (j < half, k < half) {
        // (e_j, 0)(e_k, 0) = (e_j e_k, 0)
        (true, true) => basis_product_recursive(r - 1, j, k),
        // (e_j, 0)(0, e_m) = (0, e_m e_j)
        (true, false) => {
            let m = k - half;
            combine(1, basis_product_recursive(r - 1, m, j), half)
        }
        // (0, e_m)(e_k, 0) = (0, e_m conj(e_k))
        (false, true) => {
            let m = j - half;
            combine(conj_sign(k), basis_product_recursive(r - 1, m, k), half)
        }
        // (0, e_m1)(0, e_m2) = (-conj(e_m2) e_m1, 0)
        (false, false) => {
            let m1 = j - half;
            let m2 = k - half;
            combine(-conj_sign(m2), basis_product_recursive(r - 1, m2, m1), 0)
        }
    }
}

static BASIS_TABLES: [OnceLock<Vec<SignedBasis>>; (MAX_LEVEL + 1) as usize] =
    [const { OnceLock::new() }; (MAX_LEVEL + 1) as usize];

fn basis_table(r: u8) -> &'static [SignedBasis] {
    assert!(r <= MAX_LEVEL, "level {r} outside supported range");
    BASIS_TABLES[r as usize].get_or_init(|| {
        let dim = 1usize << r;
        let mut t = Vec::with_capacity(dim * dim);
        for j in 0..dim {
            for k in 0..dim {
                t.push(basis_product_recursive(r, j, k));
            }
        }
        t
    })
}

/// A Cayley-Dickson number: level `r` plus `2^r` real coefficients,
/// `coeffs[k]` multiplying the basis element `i_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct CdNum {
    level: u8,
    coeffs: Vec<f64>,
}

impl CdNum {
    pub fn from_coeffs(level: u8, coeffs: Vec<f64>) -> Result<Self, AlgebraError> {
        if level > MAX_LEVEL {
            return Err(AlgebraError::LevelOutOfRange(level));
        }
        let want = 1usize << level;
        if coeffs.len() != want {
            return Err(AlgebraError::BadCoefficientCount {
                level,
                want,
                got: coeffs.len(),
            });
        }
        if let Some(i) = coeffs.iter().position(|c| !c.is_finite()) {
            return Err(AlgebraError::NonFinite(i));
        }
        Ok(CdNum { level, coeffs })
    }

    pub fn zero(level: u8) -> Self {
        CdNum {
            level,
            coeffs: vec![0.0; 1 << level],
        }
    }

    pub fn one(level: u8) -> Self {
        Self::real(level, 1.0)
    }

    pub fn real(level: u8, v: f64) -> Self {
        let mut z = Self::zero(level);
        z.coeffs[0] = v;
        z
    }

    /// The basis element `i_k` at the given level.
    pub fn basis(level: u8, k: usize) -> Self {
        let mut z = Self::zero(level);
        assert!(k < (1 << level));
        z.coeffs[k] = 1.0;
        z
    }

    pub fn level(&self) -> u8 {
        self.level
    }

    pub fn dim(&self) -> usize {
        self.coeffs.len()
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeff(&self, k: usize) -> f64 {
        self.coeffs.get(k).copied().unwrap_or(0.0)
    }

    pub fn set_coeff(&mut self, k: usize, v: f64) {
        self.coeffs[k] = v;
    }

    pub fn re(&self) -> f64 {
        self.coeffs[0]
    }

    /// Imaginary part `x - Re(x)`, written `x°` in boundary-data contexts.
    pub fn im(&self) -> CdNum {
        let mut z = self.clone();
        z.coeffs[0] = 0.0;
        z
    }

    pub fn norm_sq(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_finite())
    }

    /// Zero-pad up to `level`; A_r embeds canonically into A_{r+1}.
    pub fn promote(&self, level: u8) -> CdNum {
        assert!(level >= self.level && level <= MAX_LEVEL);
        if level == self.level {
            return self.clone();
        }
        let mut coeffs = self.coeffs.clone();
        coeffs.resize(1 << level, 0.0);
        CdNum { level, coeffs }
    }

    /// Conjugate: real part kept, imaginary coefficients negated.
    pub fn conj(&self) -> CdNum {
        let mut z = self.clone();
        for c in z.coeffs.iter_mut().skip(1) {
            *c = -*c;
        }
        z
    }

    pub fn scale(&self, s: f64) -> CdNum {
        CdNum {
            level: self.level,
            coeffs: self.coeffs.iter().map(|c| c * s).collect(),
        }
    }

    /// `conj(a)/|a|^2` with a near-zero guard. At r <= 3 this is a true
    /// two-sided inverse; at r = 4 zero divisors can break `a * inv(a) = 1`,
    /// which the returned flag reports.
    pub fn inverse(&self, tol: f64) -> Result<Inverse, AlgebraError> {
        let n2 = self.norm_sq();
        if n2.sqrt() <= tol {
            return Err(AlgebraError::ZeroOrNearZero(n2.sqrt()));
        }
        let value = self.conj().scale(1.0 / n2);
        let check = self * &value - CdNum::one(self.level.max(value.level()));
        let defect = check.norm();
        Ok(Inverse {
            verified: defect <= 1e-9 * (1.0 + self.norm()),
            product_defect: defect,
            value,
        })
    }

    /// Convenience inverse that discards the verification flag.
    pub fn recip(&self, tol: f64) -> Result<CdNum, AlgebraError> {
        Ok(self.inverse(tol)?.value)
    }

    /// Coordinate `z_j` recovered through the algebraic identities that
    /// rewrite real coordinates in terms of `z` alone (multiplication and
    /// conjugation only). Requires r >= 2.
    pub fn coord_extract(&self, j: usize) -> f64 {
        let r = self.level;
        assert!(r >= 2, "coordinate identities need r >= 2");
        let dim = self.dim();
        assert!(j < dim);
        // s = -z + sum_k i_k (z * conj(i_k)); equals (2^r - 2) * conj(z).
        let mut s = -self.clone();
        for k in 1..dim {
            let ik = CdNum::basis(r, k);
            s = &s + &(&ik * &(self * &ik.conj()));
        }
        let s = s.scale(1.0 / ((dim as f64) - 2.0));
        let res = if j == 0 {
            (self + &s).scale(0.5)
        } else {
            let ij = CdNum::basis(r, j);
            (&(-(self * &ij)) + &(&ij * &s)).scale(0.5)
        };
        res.re()
    }

    /// Squared-distance based approximate equality, absolute.
    pub fn approx_eq(&self, other: &CdNum, tol: f64) -> bool {
        (self - other).norm() <= tol
    }
}

/// Result of `CdNum::inverse`: the candidate inverse plus the `a * inv(a) = 1`
/// verification required at r = 4.
#[derive(Debug, Clone)]
pub struct Inverse {
    pub value: CdNum,
    pub verified: bool,
    pub product_defect: f64,
}

fn binary_op(a: &CdNum, b: &CdNum, f: impl Fn(f64, f64) -> f64) -> CdNum {
    let level = a.level.max(b.level);
    let (a, b) = (a.promote(level), b.promote(level));
    CdNum {
        level,
        coeffs: a
            .coeffs
            .iter()
            .zip(b.coeffs.iter())
            .map(|(x, y)| f(*x, *y))
            .collect(),
    }
}

impl Add for &CdNum {
    type Output = CdNum;
    fn add(self, rhs: &CdNum) -> CdNum {
        binary_op(self, rhs, |x, y| x + y)
    }
}

impl Sub for &CdNum {
    type Output = CdNum;
    fn sub(self, rhs: &CdNum) -> CdNum {
        binary_op(self, rhs, |x, y| x - y)
    }
}

impl Neg for &CdNum {
    type Output = CdNum;
    fn neg(self) -> CdNum {
        self.scale(-1.0)
    }
}

impl Neg for CdNum {
    type Output = CdNum;
    fn neg(self) -> CdNum {
        self.scale(-1.0)
    }
}

impl Mul for &CdNum {
    type Output = CdNum;
    /// Bilinear expansion over the memoized basis table. Mixed levels promote
    /// by zero-padding.
    fn mul(self, rhs: &CdNum) -> CdNum {
        let level = self.level.max(rhs.level);
        let (a, b) = (self.promote(level), rhs.promote(level));
        let dim = 1usize << level;
        let table = basis_table(level);
        let mut out = vec![0.0; dim];
        for j in 0..dim {
            let aj = a.coeffs[j];
            if aj == 0.0 {
                continue;
            }
            let row = &table[j * dim..(j + 1) * dim];
            for k in 0..dim {
                let bk = b.coeffs[k];
                if bk == 0.0 {
                    continue;
                }
                let sb = row[k];
                out[sb.index] += (sb.sign as f64) * aj * bk;
            }
        }
        CdNum { level, coeffs: out }
    }
}

macro_rules! forward_val_ops {
    ($($trait:ident :: $method:ident),*) => {$(
        impl $trait for CdNum {
            type Output = CdNum;
            fn $method(self, rhs: CdNum) -> CdNum { $trait::$method(&self, &rhs) }
        }
        impl $trait<&CdNum> for CdNum {
            type Output = CdNum;
            fn $method(self, rhs: &CdNum) -> CdNum { $trait::$method(&self, rhs) }
        }
        impl $trait<CdNum> for &CdNum {
            type Output = CdNum;
            fn $method(self, rhs: CdNum) -> CdNum { $trait::$method(self, &rhs) }
        }
    )*};
}
forward_val_ops!(Add::add, Sub::sub, Mul::mul);

impl Mul<f64> for &CdNum {
    type Output = CdNum;
    fn mul(self, rhs: f64) -> CdNum {
        self.scale(rhs)
    }
}

impl fmt::Display for CdNum {
    /// e-notation: `a0 + a1*e1 - a2*e2 ...`, skipping zero components.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut wrote = false;
        for (k, &c) in self.coeffs.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            if wrote {
                write!(f, " {} ", if c < 0.0 { "-" } else { "+" })?;
            } else if c < 0.0 {
                write!(f, "-")?;
            }
            let mag = c.abs();
            if k == 0 {
                write!(f, "{mag}")?;
            } else if mag == 1.0 {
                write!(f, "e{k}")?;
            } else {
                write!(f, "{mag}*e{k}")?;
            }
            wrote = true;
        }
        if !wrote {
            write!(f, "0")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub fn random_cd(rng: &mut ChaCha8Rng, level: u8) -> CdNum {
        let coeffs = (0..1usize << level).map(|_| rng.gen_range(-1.0..1.0)).collect();
        CdNum::from_coeffs(level, coeffs).unwrap()
    }

    #[test]
    fn basis_convention_i1_times_l() {
        // i_3 = i_1 * l with l = i_2 at the quaternion level
        assert_eq!(basis_product(2, 1, 2), SignedBasis { sign: 1, index: 3 });
        assert_eq!(basis_product(2, 2, 1), SignedBasis { sign: -1, index: 3 });
        assert_eq!(basis_product(3, 0, 5), SignedBasis { sign: 1, index: 5 });
    }

    #[test]
    fn basis_square_and_anticommute() {
        for r in 1..=MAX_LEVEL {
            let dim = 1usize << r;
            for k in 1..dim {
                assert_eq!(basis_product(r, k, k), SignedBasis { sign: -1, index: 0 });
            }
            for j in 1..dim {
                for k in 1..dim {
                    if j == k {
                        continue;
                    }
                    let jk = basis_product(r, j, k);
                    let kj = basis_product(r, k, j);
                    assert_eq!(jk.index, kj.index);
                    assert_eq!(jk.sign, -kj.sign, "i{j} i{k} must anticommute at r={r}");
                }
            }
        }
    }

    #[test]
    fn mul_identity_and_units() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let one = CdNum::one(3);
        for _ in 0..50 {
            let z = random_cd(&mut rng, 3);
            assert!((&one * &z).approx_eq(&z, 1e-14));
            assert!((&z * &one).approx_eq(&z, 1e-14));
        }
        let i1 = CdNum::basis(2, 1);
        let i2 = CdNum::basis(2, 2);
        assert!((&i1 * &i2).approx_eq(&CdNum::basis(2, 3), 0.0));
    }

    #[test]
    fn octonions_not_associative() {
        // (i1 i2) i4 and i1 (i2 i4) differ by sign at r = 3
        let i1 = CdNum::basis(3, 1);
        let i2 = CdNum::basis(3, 2);
        let i4 = CdNum::basis(3, 4);
        let lhs = &(&i1 * &i2) * &i4;
        let rhs = &i1 * &(&i2 * &i4);
        assert!(lhs.approx_eq(&-&rhs, 1e-15));
        assert!((&lhs - &rhs).norm() > 1.0);
    }

    #[test]
    fn quaternions_associative() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..10_000 {
            let a = random_cd(&mut rng, 2);
            let b = random_cd(&mut rng, 2);
            let c = random_cd(&mut rng, 2);
            let lhs = &(&a * &b) * &c;
            let rhs = &a * &(&b * &c);
            let bound = 1e-10 * a.norm() * b.norm() * c.norm();
            assert!((&lhs - &rhs).norm() <= bound.max(1e-14));
        }
    }

    #[test]
    fn octonions_alternative() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10_000 {
            let a = random_cd(&mut rng, 3);
            let b = random_cd(&mut rng, 3);
            let left = &(&(&a * &a) * &b) - &(&a * &(&a * &b));
            let right = &(&(&b * &a) * &a) - &(&b * &(&a * &a));
            let bound = (1e-10 * a.norm_sq() * b.norm()).max(1e-14);
            assert!(left.norm() <= bound);
            assert!(right.norm() <= bound);
        }
    }

    #[test]
    fn norm_multiplicative_up_to_octonions() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for r in 0..=3u8 {
            for _ in 0..2000 {
                let a = random_cd(&mut rng, r);
                let b = random_cd(&mut rng, r);
                let d = ((&a * &b).norm() - a.norm() * b.norm()).abs();
                assert!(d <= 1e-9 * a.norm() * b.norm() + 1e-14);
            }
        }
    }

    #[test]
    fn sedenion_zero_divisors_exist() {
        // exhaustive search over (±i_j ± i_k)(±i_m ± i_p)
        let mut found = None;
        'outer: for j in 1..16 {
            for k in (j + 1)..16 {
                for m in 1..16 {
                    for p in (m + 1)..16 {
                        for (sa, sb) in [(1.0, 1.0), (1.0, -1.0)] {
                            let a = &CdNum::basis(4, j) + &CdNum::basis(4, k).scale(sa);
                            let b = &CdNum::basis(4, m) + &CdNum::basis(4, p).scale(sb);
                            if (&a * &b).norm() < 1e-12 {
                                found = Some((a, b));
                                break 'outer;
                            }
                        }
                    }
                }
            }
        }
        let (a, b) = found.expect("sedenions must have zero divisors");
        // norm multiplicativity fails on this pair
        let defect = (a.norm() * b.norm() - (&a * &b).norm()).abs();
        assert!(defect >= 0.5);
        // and the inverse verification flag reports the failure mode
        let inv = a.inverse(1e-12).unwrap();
        assert!((&a * &inv.value).approx_eq(&CdNum::one(4), 1e-12) == inv.verified);
    }

    #[test]
    fn conj_and_norm_identities() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for r in 2..=4u8 {
            for _ in 0..200 {
                let z = random_cd(&mut rng, r);
                assert!(z.conj().conj().approx_eq(&z, 0.0));
                // |z|^2 = z conj(z), Re = (z + conj z)/2
                let zz = &z * &z.conj();
                assert!((zz.re() - z.norm_sq()).abs() <= 1e-12 * (1.0 + z.norm_sq()));
                assert!(zz.im().norm() <= 1e-12 * (1.0 + z.norm_sq()));
                let re = (&z + &z.conj()).scale(0.5);
                assert!((re.re() - z.re()).abs() <= 1e-12);
            }
        }
        assert!(CdNum::basis(3, 5).conj().approx_eq(&-CdNum::basis(3, 5), 0.0));
    }

    #[test]
    fn inverse_round_trip() {
        assert!(CdNum::real(2, 2.0)
            .recip(1e-12)
            .unwrap()
            .approx_eq(&CdNum::real(2, 0.5), 1e-15));
        assert!(CdNum::basis(2, 1)
            .recip(1e-12)
            .unwrap()
            .approx_eq(&-CdNum::basis(2, 1), 1e-15));
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..500 {
            let z = random_cd(&mut rng, 3);
            if z.norm() < 0.2 {
                continue;
            }
            let inv = z.inverse(1e-12).unwrap();
            assert!(inv.verified);
            assert!((&z * &inv.value).approx_eq(&CdNum::one(3), 1e-12));
        }
        assert!(matches!(
            CdNum::zero(2).inverse(1e-9),
            Err(AlgebraError::ZeroOrNearZero(_))
        ));
    }

    #[test]
    fn coord_extract_matches_coefficients() {
        assert_eq!(CdNum::one(2).coord_extract(0), 1.0);
        assert!((CdNum::basis(2, 1).scale(3.0).coord_extract(1) - 3.0).abs() < 1e-15);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for r in 2..=4u8 {
            for _ in 0..100 {
                let z = random_cd(&mut rng, r);
                for j in 0..z.dim() {
                    assert!(
                        (z.coord_extract(j) - z.coeff(j)).abs() <= 1e-12,
                        "r={r} j={j}"
                    );
                }
            }
        }
    }

    #[test]
    fn mixed_level_promotion() {
        let q = CdNum::basis(2, 1);
        let o = CdNum::basis(3, 4);
        let prod = &q * &o;
        assert_eq!(prod.level(), 3);
        assert!(prod.approx_eq(&CdNum::basis(3, 5), 0.0));
    }

    #[test]
    fn display_round_trip_shape() {
        let z = CdNum::from_coeffs(2, vec![1.5, 0.0, -1.0, 2.0]).unwrap();
        assert_eq!(z.to_string(), "1.5 - e2 + 2*e3");
        assert_eq!(CdNum::zero(2).to_string(), "0");
    }

    #[test]
    fn rejects_bad_construction() {
        assert!(CdNum::from_coeffs(2, vec![0.0; 3]).is_err());
        assert!(CdNum::from_coeffs(5, vec![0.0; 32]).is_err());
        assert!(CdNum::from_coeffs(1, vec![f64::NAN, 0.0]).is_err());
    }
}
