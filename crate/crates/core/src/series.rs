//! Constructive power-series solver for first-order analytic systems: Taylor
//! coefficients computed degree by degree from the system itself, plus the
//! order reduction that turns n-th order problems into first-order ones.
//!
//! The expansion variable is the real offset along the Re-axis from the
//! hyperplane carrying the boundary data, so a solution series centered at
//! `t0 = alpha0 + Im(t)` is evaluated at `t` with a purely real argument.

use thiserror::Error;

use crate::algebra::CdNum;
use crate::calculus::SeriesFn;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SeriesError {
    #[error("coefficient norms blow up super-geometrically at degree {0} (|c| = {1:.3e})")]
    RecursionBlowup(usize, f64),
    #[error("right-hand side is not in the analytic catalog: {0}")]
    NonAnalyticInput(String),
    #[error("system shape mismatch: {0}")]
    Shape(String),
}

/// Truncated power series in one real variable with Cayley-Dickson
/// coefficients. Multiplication is plain convolution: the variable is real,
/// hence central, so only coefficient products need bracketing care, and the
/// expression tree below supplies it.
#[derive(Debug, Clone, PartialEq)]
pub struct TSeries {
    level: u8,
    c: Vec<CdNum>,
}

impl TSeries {
    pub fn zero(level: u8, len: usize) -> TSeries {
        TSeries {
            level,
            c: vec![CdNum::zero(level); len],
        }
    }

    pub fn constant(v: &CdNum, len: usize) -> TSeries {
        let mut s = TSeries::zero(v.level(), len);
        s.c[0] = v.clone();
        s
    }

    /// The series of `t0 + s`.
    pub fn variable(t0: &CdNum, len: usize) -> TSeries {
        let mut s = TSeries::constant(t0, len);
        if len > 1 {
            s.c[1] = CdNum::one(t0.level());
        }
        s
    }

    pub fn len(&self) -> usize {
        self.c.len()
    }

    pub fn is_empty(&self) -> bool {
        self.c.is_empty()
    }

    pub fn coeff(&self, k: usize) -> CdNum {
        self.c
            .get(k)
            .cloned()
            .unwrap_or_else(|| CdNum::zero(self.level))
    }

    pub fn coeffs(&self) -> &[CdNum] {
        &self.c
    }

    pub fn set_coeff(&mut self, k: usize, v: CdNum) {
        self.c[k] = v;
    }

    pub fn add(&self, other: &TSeries) -> TSeries {
        let len = self.len().max(other.len());
        let level = self.level.max(other.level);
        let mut out = TSeries::zero(level, len);
        for k in 0..len {
            out.c[k] = &self.coeff(k) + &other.coeff(k);
        }
        out
    }

    pub fn sub(&self, other: &TSeries) -> TSeries {
        self.add(&other.scale(-1.0))
    }

    pub fn scale(&self, s: f64) -> TSeries {
        TSeries {
            level: self.level,
            c: self.c.iter().map(|c| c.scale(s)).collect(),
        }
    }

    /// Convolution truncated to the shorter input length; coefficient
    /// products are taken left-to-right as written.
    pub fn mul(&self, other: &TSeries) -> TSeries {
        let len = self.len().min(other.len());
        let level = self.level.max(other.level);
        let mut out = TSeries::zero(level, len);
        for i in 0..len {
            if self.c[i].norm_sq() == 0.0 {
                continue;
            }
            for j in 0..(len - i) {
                out.c[i + j] = &out.c[i + j] + &(&self.c[i] * &other.c[j]);
            }
        }
        out
    }

    pub fn pow(&self, n: u32) -> TSeries {
        let mut acc = TSeries::constant(&CdNum::one(self.level), self.len());
        for _ in 0..n {
            acc = acc.mul(self);
        }
        acc
    }

    /// d/ds.
    pub fn derivative(&self) -> TSeries {
        let mut out = TSeries::zero(self.level, self.len());
        for k in 1..self.len() {
            out.c[k - 1] = self.c[k].scale(k as f64);
        }
        out
    }

    pub fn eval_real(&self, s: f64) -> CdNum {
        let mut acc = CdNum::zero(self.level);
        let mut p = 1.0;
        for c in &self.c {
            acc = &acc + &c.scale(p);
            p *= s;
        }
        acc
    }
}

/// Right-hand-side expression in the flattened argument tuple: the scalar
/// time leaf `T`, unknowns `U(j)`, pre-reduction derivative leaves
/// `Deriv(j, p)`, constants, and arithmetic.
#[derive(Debug, Clone, PartialEq)]
pub enum RhsExpr {
    T,
    U(usize),
    Deriv(usize, u32),
    Const(CdNum),
    Add(Box<RhsExpr>, Box<RhsExpr>),
    Sub(Box<RhsExpr>, Box<RhsExpr>),
    Mul(Box<RhsExpr>, Box<RhsExpr>),
    Pow(Box<RhsExpr>, u32),
}

impl RhsExpr {
    pub fn add(a: RhsExpr, b: RhsExpr) -> RhsExpr {
        RhsExpr::Add(Box::new(a), Box::new(b))
    }
    pub fn sub(a: RhsExpr, b: RhsExpr) -> RhsExpr {
        RhsExpr::Sub(Box::new(a), Box::new(b))
    }
    pub fn mul(a: RhsExpr, b: RhsExpr) -> RhsExpr {
        RhsExpr::Mul(Box::new(a), Box::new(b))
    }
    pub fn pow(a: RhsExpr, n: u32) -> RhsExpr {
        RhsExpr::Pow(Box::new(a), n)
    }
    pub fn constant(c: CdNum) -> RhsExpr {
        RhsExpr::Const(c)
    }

    fn contains_deriv(&self) -> bool {
        match self {
            RhsExpr::Deriv(_, _) => true,
            RhsExpr::Add(a, b) | RhsExpr::Sub(a, b) | RhsExpr::Mul(a, b) => {
                a.contains_deriv() || b.contains_deriv()
            }
            RhsExpr::Pow(a, _) => a.contains_deriv(),
            _ => false,
        }
    }

    fn map_leaves(&self, f: &impl Fn(&RhsExpr) -> RhsExpr) -> RhsExpr {
        match self {
            RhsExpr::Add(a, b) => RhsExpr::add(a.map_leaves(f), b.map_leaves(f)),
            RhsExpr::Sub(a, b) => RhsExpr::sub(a.map_leaves(f), b.map_leaves(f)),
            RhsExpr::Mul(a, b) => RhsExpr::mul(a.map_leaves(f), b.map_leaves(f)),
            RhsExpr::Pow(a, n) => RhsExpr::pow(a.map_leaves(f), *n),
            leaf => f(leaf),
        }
    }

    fn eval_series(&self, t: &TSeries, u: &[TSeries]) -> Result<TSeries, SeriesError> {
        Ok(match self {
            RhsExpr::T => t.clone(),
            RhsExpr::U(j) => u
                .get(*j)
                .cloned()
                .ok_or_else(|| SeriesError::Shape(format!("unknown u{j}")))?,
            RhsExpr::Deriv(j, p) => {
                return Err(SeriesError::NonAnalyticInput(format!(
                    "unreduced derivative leaf d^{p} u{j}; run the first-order reduction"
                )))
            }
            RhsExpr::Const(c) => TSeries::constant(c, t.len()),
            RhsExpr::Add(a, b) => a.eval_series(t, u)?.add(&b.eval_series(t, u)?),
            RhsExpr::Sub(a, b) => a.eval_series(t, u)?.sub(&b.eval_series(t, u)?),
            RhsExpr::Mul(a, b) => a.eval_series(t, u)?.mul(&b.eval_series(t, u)?),
            RhsExpr::Pow(a, n) => a.eval_series(t, u)?.pow(*n),
        })
    }

    /// Pointwise evaluation, for residual checks.
    pub fn eval_point(&self, t: &CdNum, u: &[CdNum]) -> Result<CdNum, SeriesError> {
        Ok(match self {
            RhsExpr::T => t.clone(),
            RhsExpr::U(j) => u
                .get(*j)
                .cloned()
                .ok_or_else(|| SeriesError::Shape(format!("unknown u{j}")))?,
            RhsExpr::Deriv(j, p) => {
                return Err(SeriesError::NonAnalyticInput(format!(
                    "unreduced derivative leaf d^{p} u{j}"
                )))
            }
            RhsExpr::Const(c) => c.clone(),
            RhsExpr::Add(a, b) => &a.eval_point(t, u)? + &b.eval_point(t, u)?,
            RhsExpr::Sub(a, b) => &a.eval_point(t, u)? - &b.eval_point(t, u)?,
            RhsExpr::Mul(a, b) => &a.eval_point(t, u)? * &b.eval_point(t, u)?,
            RhsExpr::Pow(a, n) => {
                let base = a.eval_point(t, u)?;
                crate::functions::cd_pow_int(&base, *n)
            }
        })
    }
}

/// First-order analytic Cauchy problem `du_j/dt = F_j(t, u)` with constant
/// boundary values on the hyperplane through `t0`.
#[derive(Debug, Clone)]
pub struct CauchyProblem {
    pub level: u8,
    pub rhs: Vec<RhsExpr>,
    pub initial: Vec<CdNum>,
    pub t0: CdNum,
}

/// System with declared orders `n_j >= 1` whose right-hand sides may mention
/// `Deriv(j, p)` leaves for `p < n_j`.
#[derive(Debug, Clone)]
pub struct HighOrderProblem {
    pub level: u8,
    pub orders: Vec<u32>,
    pub rhs: Vec<RhsExpr>,
    /// `initial[j][s]` is the s-th derivative boundary value of unknown j.
    pub initial: Vec<Vec<CdNum>>,
    pub t0: CdNum,
}

/// Introduce `v_{j,p} = d^p u_j/dt^p` and the closure equations
/// `dv_{j,p}/dt = v_{j,p+1}` so every unknown is first order. Unknown count
/// becomes the sum of the orders; order-1 systems pass through unchanged.
pub fn reduce_to_first_order(high: &HighOrderProblem) -> Result<CauchyProblem, SeriesError> {
    let n = high.orders.len();
    if high.rhs.len() != n || high.initial.len() != n {
        return Err(SeriesError::Shape(format!(
            "{} orders vs {} equations vs {} initial rows",
            n,
            high.rhs.len(),
            high.initial.len()
        )));
    }
    let mut offset = vec![0usize; n];
    let mut total = 0usize;
    for (j, &ord) in high.orders.iter().enumerate() {
        if ord == 0 {
            return Err(SeriesError::Shape(format!("order of u{j} must be >= 1")));
        }
        if high.initial[j].len() != ord as usize {
            return Err(SeriesError::Shape(format!(
                "unknown u{j} of order {ord} needs {ord} initial values, got {}",
                high.initial[j].len()
            )));
        }
        offset[j] = total;
        total += ord as usize;
    }
    let remap = |leaf: &RhsExpr| -> RhsExpr {
        match leaf {
            RhsExpr::U(j) => RhsExpr::U(offset[*j]),
            RhsExpr::Deriv(j, p) => RhsExpr::U(offset[*j] + *p as usize),
            other => other.clone(),
        }
    };
    let mut rhs = vec![RhsExpr::T; total];
    let mut initial = vec![CdNum::zero(high.level); total];
    for j in 0..n {
        let ord = high.orders[j] as usize;
        for p in 0..ord {
            initial[offset[j] + p] = high.initial[j][p].clone();
            rhs[offset[j] + p] = if p + 1 < ord {
                RhsExpr::U(offset[j] + p + 1)
            } else {
                high.rhs[j].map_leaves(&remap)
            };
        }
    }
    Ok(CauchyProblem {
        level: high.level,
        rhs,
        initial,
        t0: high.t0.clone(),
    })
}

/// Diagnostics returned alongside the truncated series.
#[derive(Debug, Clone)]
pub struct SeriesDiagnostics {
    pub radius_estimate: f64,
    /// Geometric tail bound at half the estimated radius; a reporting aid,
    /// not a guarantee.
    pub majorant_tail: Option<f64>,
    pub max_residual: f64,
}

pub struct SeriesSolution {
    pub series: Vec<SeriesFn>,
    pub diagnostics: SeriesDiagnostics,
}

pub fn cauchy_series_solve(prob: &CauchyProblem, order: usize) -> Result<SeriesSolution, SeriesError> {
    cauchy_series_solve_ordered(prob, order, false)
}

/// Expansion coefficients computed by induction in the order of increasing
/// powers. `reverse_resolution` flips the per-degree unknown ordering; the
/// coefficients must not depend on it (uniqueness), which tests exercise.
pub fn cauchy_series_solve_ordered(
    prob: &CauchyProblem,
    order: usize,
    reverse_resolution: bool,
) -> Result<SeriesSolution, SeriesError> {
    let n = prob.rhs.len();
    if prob.initial.len() != n {
        return Err(SeriesError::Shape(format!(
            "{n} equations vs {} initial values",
            prob.initial.len()
        )));
    }
    for f in &prob.rhs {
        if f.contains_deriv() {
            return Err(SeriesError::NonAnalyticInput(
                "derivative leaves present; reduce to first order".into(),
            ));
        }
    }
    let len = order + 1;
    let t = TSeries::variable(&prob.t0, len);
    let mut u: Vec<TSeries> = prob
        .initial
        .iter()
        .map(|c| TSeries::constant(&c.promote(prob.level), len))
        .collect();
    let scale0 = prob
        .initial
        .iter()
        .map(|c| c.norm())
        .fold(1.0f64, f64::max);
    for deg in 0..order {
        let idx: Vec<usize> = if reverse_resolution {
            (0..n).rev().collect()
        } else {
            (0..n).collect()
        };
        // degree-(deg+1) coefficients from degree-deg data of both sides
        let mut next = Vec::with_capacity(n);
        for &j in &idx {
            let f = prob.rhs[j].eval_series(&t, &u)?;
            next.push((j, f.coeff(deg).scale(1.0 / (deg as f64 + 1.0))));
        }
        for (j, c) in next {
            let nrm = c.norm();
            if !nrm.is_finite() || nrm > 1e12 * scale0 {
                return Err(SeriesError::RecursionBlowup(deg + 1, nrm));
            }
            u[j].set_coeff(deg + 1, c);
        }
    }

    let radius = radius_estimate(&u);
    let majorant_tail = majorant_tail(&u, radius);
    let series: Vec<SeriesFn> = u
        .iter()
        .map(|s| SeriesFn::new(prob.t0.clone(), s.coeffs().to_vec(), radius))
        .collect();

    // residual of the system at interior sample offsets; the probe range is
    // capped where the last kept term is still negligible, since the radius
    // estimate alone says nothing about truncation error
    let mut max_residual: f64 = 0.0;
    let tail_norm = u
        .iter()
        .map(|s| s.coeff(order).norm())
        .fold(0.0f64, f64::max);
    let reliable = if tail_norm > 1e-300 {
        (1e-10 * scale0 / tail_norm).powf(1.0 / order as f64)
    } else {
        f64::INFINITY
    };
    let probe = (radius * 0.5).min(reliable).min(1e6);
    for i in 1..=8 {
        let s = probe * (i as f64) / 8.0;
        max_residual = max_residual.max(residual_of_tseries(prob, &u, s)?);
    }

    Ok(SeriesSolution {
        series,
        diagnostics: SeriesDiagnostics {
            radius_estimate: radius,
            majorant_tail,
            max_residual,
        },
    })
}

fn residual_of_tseries(prob: &CauchyProblem, u: &[TSeries], s: f64) -> Result<f64, SeriesError> {
    let t_pt = &prob.t0 + &CdNum::real(prob.level, s);
    let u_pt: Vec<CdNum> = u.iter().map(|us| us.eval_real(s)).collect();
    let mut worst: f64 = 0.0;
    for (j, f) in prob.rhs.iter().enumerate() {
        let lhs = u[j].derivative().eval_real(s);
        let rhs = f.eval_point(&t_pt, &u_pt)?;
        worst = worst.max((&lhs - &rhs).norm());
    }
    Ok(worst)
}

/// Residual of the system at the real offset `s` for a produced solution.
pub fn residual_at(prob: &CauchyProblem, sol: &[SeriesFn], s: f64) -> Result<f64, SeriesError> {
    let u: Vec<TSeries> = sol
        .iter()
        .map(|sf| TSeries {
            level: prob.level,
            c: sf.coeffs().to_vec(),
        })
        .collect();
    residual_of_tseries(prob, &u, s)
}

/// Ratio-test estimate over the tail of the coefficient norms.
fn radius_estimate(u: &[TSeries]) -> f64 {
    let mut best = f64::INFINITY;
    for s in u {
        let norms: Vec<f64> = s.coeffs().iter().map(|c| c.norm()).collect();
        let n = norms.len();
        let mut ratios: Vec<f64> = Vec::new();
        for k in (n / 2).max(1)..n {
            if norms[k] > 1e-14 && norms[k - 1] > 1e-14 {
                ratios.push(norms[k - 1] / norms[k]);
            }
        }
        if ratios.is_empty() {
            continue; // polynomial tail: no constraint from this unknown
        }
        ratios.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let median = ratios[ratios.len() / 2];
        best = best.min(median);
    }
    best
}

fn majorant_tail(u: &[TSeries], radius: f64) -> Option<f64> {
    if !radius.is_finite() {
        return None;
    }
    let mut worst: f64 = 0.0;
    for s in u {
        let k = s.len() - 1;
        let a = s.coeff(k).norm();
        let q: f64 = 0.5; // evaluating at radius/2 gives ratio ~1/2 per degree
        let tail = a * (radius * 0.5).powi(k as i32) * q / (1.0 - q);
        worst = worst.max(tail);
    }
    Some(worst)
}
