//! Deterministic low-discrepancy sampling used for residual grids and
//! exactness checks. Halton sequences with a seed-controlled index offset:
//! identical (seed, count) inputs always produce identical point sets.

use crate::algebra::CdNum;

const PRIMES: [u32; 17] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59];

/// Radical-inverse of `index` in the given base, in (0, 1).
pub fn halton(mut index: u64, base: u32) -> f64 {
    let b = base as f64;
    let mut f = 1.0;
    let mut r = 0.0;
    index += 1; // skip the zero point
    while index > 0 {
        f /= b;
        r += f * (index % base as u64) as f64;
        index /= base as u64;
    }
    r
}

/// The i-th point of a seeded Halton stream in `dim` dimensions, each
/// coordinate in (0, 1).
pub fn halton_point(seed: u64, i: u64, dim: usize) -> Vec<f64> {
    assert!(dim <= PRIMES.len());
    let idx = i + seed.wrapping_mul(7919) % 100_003;
    (0..dim).map(|d| halton(idx, PRIMES[d])).collect()
}

/// Cayley-Dickson sample in a cube of half-width `radius` around `center`.
pub fn cd_point(seed: u64, i: u64, level: u8, center: &CdNum, radius: f64) -> CdNum {
    let dim = 1usize << level;
    let u = halton_point(seed, i, dim);
    let coeffs = (0..dim)
        .map(|k| center.coeff(k) + radius * (2.0 * u[k] - 1.0))
        .collect();
    CdNum::from_coeffs(level, coeffs).expect("finite by construction")
}

/// Sample in the half-space `Re x >= alpha0`: real part in
/// `[alpha0, alpha0 + radius]`, imaginary coefficients in `[-radius, radius]`.
pub fn half_space_point(seed: u64, i: u64, level: u8, alpha0: f64, radius: f64) -> CdNum {
    let dim = 1usize << level;
    let u = halton_point(seed, i, dim);
    let mut coeffs: Vec<f64> = (0..dim).map(|k| radius * (2.0 * u[k] - 1.0)).collect();
    coeffs[0] = alpha0 + radius * u[0];
    CdNum::from_coeffs(level, coeffs).expect("finite by construction")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_in_range() {
        for i in 0..100 {
            let a = cd_point(7, i, 3, &CdNum::zero(3), 2.0);
            let b = cd_point(7, i, 3, &CdNum::zero(3), 2.0);
            assert_eq!(a, b);
            assert!(a.coeffs().iter().all(|c| c.abs() <= 2.0));
            let h = half_space_point(3, i, 2, 1.5, 0.5);
            assert!(h.re() >= 1.5 && h.re() <= 2.0);
        }
        // different seeds decorrelate
        let a = cd_point(1, 0, 2, &CdNum::zero(2), 1.0);
        let b = cd_point(2, 0, 2, &CdNum::zero(2), 1.0);
        assert_ne!(a, b);
    }
}
