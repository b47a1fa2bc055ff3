//! Flow maps `omega_h` solving `(d omega/dx).1 = h(omega)` with
//! `omega(0x) = 0x` on the boundary hyperplane: the substitution that turns
//! directional-derivative equations into Re-direction ones.

use crate::algebra::CdNum;
use crate::calculus::SeriesFn;
use crate::phrase::{Phrase, Tree};
use crate::series::{cauchy_series_solve, CauchyProblem, RhsExpr};

use super::{BoundaryData, Evaluatable, OdeError};

/// The invertible flow catalog used by the solvers. `Identity` covers
/// `h = 1`; `Affine` any constant field; `RealFlow` real-valued fields
/// (scalar Runge-Kutta along the Re-direction per imaginary part); `ExpFlow`
/// is `h(x) = x` and `PowerFlow` is `h(x) = x^n`.
#[derive(Clone, Debug)]
pub enum OmegaMap {
    Identity,
    Affine { c: CdNum },
    RealFlow { h: Evaluatable },
    ExpFlow,
    PowerFlow { n: f64 },
}

impl OmegaMap {
    /// Classify an evaluatable vector field into the catalog.
    pub fn detect(h: &Evaluatable, level: u8, tol: f64) -> Result<OmegaMap, OdeError> {
        if let Some(c) = h.as_const() {
            if c.norm() <= tol {
                return Err(OdeError::ZeroVectorField);
            }
            if (c - &CdNum::one(c.level())).norm() <= tol {
                return Ok(OmegaMap::Identity);
            }
            return Ok(OmegaMap::Affine { c: c.clone() });
        }
        if let Some(p) = h.as_phrase() {
            if let Some(n) = phrase_as_pure_power(p) {
                if n == 1 {
                    return Ok(OmegaMap::ExpFlow);
                }
                return Ok(OmegaMap::PowerFlow { n: n as f64 });
            }
        }
        if h.check_real_valued(level, 1e-9).is_ok() {
            return Ok(OmegaMap::RealFlow { h: h.clone() });
        }
        Err(OdeError::UnsupportedVectorField(format!("{h:?}")))
    }

    /// `omega(x)`, with `0x = alpha0 + Im(x)` as the per-point base.
    pub fn eval(&self, x: &CdNum, bd: &BoundaryData) -> Result<CdNum, OdeError> {
        let base = bd.base_point(x);
        let s = x.re() - bd.alpha0;
        match self {
            OmegaMap::Identity => Ok(x.clone()),
            OmegaMap::Affine { c } => Ok(&base + &c.scale(s)),
            OmegaMap::RealFlow { h } => {
                let w = real_flow_forward(h, &base, s)?;
                Ok(w)
            }
            OmegaMap::ExpFlow => {
                if base.norm() <= 1e-12 {
                    return Err(OdeError::ZeroVectorField);
                }
                Ok(base.scale(s.exp()))
            }
            OmegaMap::PowerFlow { n } => {
                if base.norm() <= 1e-12 {
                    return Err(OdeError::ZeroVectorField);
                }
                // in the plane of the base point: w = (base^{1-n} + (1-n)s)^{1/(1-n)}
                let one_minus = 1.0 - n;
                let b = crate::functions::cd_pow_real(&base, one_minus, 1e-12)?;
                let inner = &b + &CdNum::real(base.level(), one_minus * s);
                Ok(crate::functions::cd_pow_real(&inner, 1.0 / one_minus, 1e-12)?)
            }
        }
    }

    /// Solve `omega(x) = xi` for x.
    pub fn invert(&self, xi: &CdNum, bd: &BoundaryData) -> Result<CdNum, OdeError> {
        match self {
            OmegaMap::Identity => Ok(xi.clone()),
            OmegaMap::Affine { c } => {
                // xi = alpha0 + Im(x) + c s; the real part fixes s
                let re_c = c.re();
                if re_c.abs() <= 1e-12 {
                    return Err(OdeError::UnsupportedVectorField(
                        "constant field parallel to the boundary hyperplane".into(),
                    ));
                }
                let s = (xi.re() - bd.alpha0) / re_c;
                let im_x = &xi.im() - &c.im().scale(s);
                let mut x = im_x;
                x.set_coeff(0, bd.alpha0 + s);
                Ok(x)
            }
            OmegaMap::RealFlow { h } => {
                // Im(omega) = Im(x); find s with flow(s) = Re(xi)
                let base = bd.base_point(xi);
                let target = xi.re();
                let s = real_flow_invert(h, &base, bd.alpha0, target)?;
                let mut x = xi.im();
                x.set_coeff(0, bd.alpha0 + s);
                Ok(x)
            }
            OmegaMap::ExpFlow => {
                // xi = e^s (alpha0 + Im x)
                if bd.alpha0.abs() <= 1e-12 {
                    return Err(OdeError::UnsupportedVectorField(
                        "exp flow inversion needs alpha0 != 0".into(),
                    ));
                }
                let es = xi.re() / bd.alpha0;
                if es <= 0.0 {
                    return Err(OdeError::BranchUndefined(
                        "exp flow cannot reach a point with opposite real sign".into(),
                    ));
                }
                let s = es.ln();
                let mut x = xi.im().scale(1.0 / es);
                x.set_coeff(0, bd.alpha0 + s);
                Ok(x)
            }
            OmegaMap::PowerFlow { n } => self.invert_power(xi, bd, *n),
        }
    }

    fn invert_power(&self, xi: &CdNum, bd: &BoundaryData, n: f64) -> Result<CdNum, OdeError> {
        // everything lives in the complex plane of xi: with w = xi^{1-n},
        // the base point is (w - (1-n)s)^{1/(1-n)} and its real part must be
        // alpha0; a scalar root find in s
        use super::plane::{cabs, cexp, cln, cscale, csub};
        let level = xi.level();
        let im = xi.im();
        let im_norm = im.norm();
        let axis = if im_norm > 1e-12 {
            im.scale(1.0 / im_norm)
        } else {
            CdNum::basis(level.max(1), 1)
        };
        let one_minus = 1.0 - n;
        let cpow = |z: (f64, f64), a: f64| -> Result<(f64, f64), OdeError> {
            Ok(cexp(cscale(cln(z)?, a)))
        };
        let w = cpow((xi.re(), im_norm), one_minus)?;
        let base_of = |s: f64| -> Result<(f64, f64), OdeError> {
            cpow(csub(w, (one_minus * s, 0.0)), 1.0 / one_minus)
        };
        let phi = |s: f64| -> Option<f64> {
            let b = base_of(s).ok()?;
            if cabs(b) < 1e-12 {
                return None;
            }
            Some(b.0 - bd.alpha0)
        };
        // bracket a sign change by scanning outward, then bisect
        let mut bracket: Option<(f64, f64)> = None;
        'scan: for span in [1.0f64, 4.0, 16.0, 64.0] {
            let steps = 256;
            let mut prev: Option<(f64, f64)> = None;
            for i in 0..=steps {
                let s = -span + 2.0 * span * (i as f64) / (steps as f64);
                if let Some(v) = phi(s) {
                    if v == 0.0 {
                        bracket = Some((s, s));
                        break 'scan;
                    }
                    if let Some((sp, vp)) = prev {
                        if vp * v < 0.0 {
                            bracket = Some((sp, s));
                            break 'scan;
                        }
                    }
                    prev = Some((s, v));
                } else {
                    prev = None;
                }
            }
        }
        let (mut lo, mut hi) = bracket.ok_or(OdeError::BranchUndefined(
            "power-flow inversion found no hyperplane crossing".into(),
        ))?;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            let vm = phi(mid).ok_or(OdeError::SingularJacobian)?;
            if vm == 0.0 || (hi - lo).abs() < 1e-15 * (1.0 + mid.abs()) {
                lo = mid;
                hi = mid;
                break;
            }
            let vl = phi(lo).ok_or(OdeError::SingularJacobian)?;
            if vl * vm < 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let s = 0.5 * (lo + hi);
        let base = base_of(s).map_err(|_| OdeError::SingularJacobian)?;
        let mut x = axis.scale(base.1);
        x.set_coeff(0, bd.alpha0 + s);
        // confirm that the recovered base really sits on the hyperplane
        let check = self.eval(&x, bd)?;
        if (&check - xi).norm() > 1e-7 * (1.0 + xi.norm()) {
            return Err(OdeError::BranchUndefined(
                "power-flow inversion landed on a different branch".into(),
            ));
        }
        Ok(x)
    }
}

fn phrase_as_pure_power(p: &Phrase) -> Option<u32> {
    if p.terms().len() != 1 {
        return None;
    }
    fn run_len(t: &Tree) -> Option<u32> {
        match t {
            Tree::Var => Some(1),
            Tree::Mul(l, r) => Some(run_len(l)? + run_len(r)?),
            _ => None,
        }
    }
    run_len(&p.terms()[0])
}

/// Fourth-order Runge-Kutta for `dw/ds = h(w)` from `base` over `[0, s]`.
fn real_flow_forward(h: &Evaluatable, base: &CdNum, s: f64) -> Result<CdNum, OdeError> {
    let steps = ((s.abs() * 64.0).ceil() as usize).clamp(16, 4096);
    let dt = s / steps as f64;
    let mut w = base.clone();
    for _ in 0..steps {
        let k1 = h.eval(&w)?;
        let k2 = h.eval(&(&w + &k1.scale(dt / 2.0)))?;
        let k3 = h.eval(&(&w + &k2.scale(dt / 2.0)))?;
        let k4 = h.eval(&(&w + &k3.scale(dt)))?;
        let incr = &(&k1 + &k4) + &(&k2 + &k3).scale(2.0);
        w = &w + &incr.scale(dt / 6.0);
        // a real-valued field moves the real coordinate only
        if w.im().norm_sq() > 0.0 {
            let im_drift = (&w.im() - &base.im()).norm();
            if im_drift > 1e-9 * (1.0 + w.norm()) {
                return Err(OdeError::NonRealCoefficient(im_drift));
            }
        }
    }
    Ok(w)
}

/// Find s with `Re(flow(s)) = target`; the field is nonvanishing, so the
/// real coordinate is strictly monotone.
fn real_flow_invert(h: &Evaluatable, base: &CdNum, _alpha0: f64, target: f64) -> Result<f64, OdeError> {
    let h0 = h.eval(base)?.re();
    if h0.abs() <= 1e-12 {
        return Err(OdeError::ZeroVectorField);
    }
    let mut s = (target - base.re()) / h0;
    for _ in 0..60 {
        let w = real_flow_forward(h, base, s)?;
        let err = w.re() - target;
        if err.abs() <= 1e-12 * (1.0 + target.abs()) {
            return Ok(s);
        }
        let slope = h.eval(&w)?.re();
        if slope.abs() <= 1e-14 {
            return Err(OdeError::ZeroVectorField);
        }
        s -= err / slope;
    }
    Err(OdeError::NewtonNonConvergent {
        iterations: 60,
        residual: f64::NAN,
    })
}

/// Taylor series of the flow around the expansion point `base`: coefficients
/// computed recursively from `(d omega/dx).1 = h(omega)`, `omega(base) =
/// base`. Closed forms are recognized first (constant fields, `h = x`,
/// `h = x^n`) and reported through the series anyway, so callers get one
/// uniform representation.
pub fn solve_omega(
    h: &Evaluatable,
    base: &CdNum,
    order: usize,
) -> Result<SeriesFn, OdeError> {
    let level = base.level();
    if h.eval(base)?.norm() <= 1e-12 {
        return Err(OdeError::ZeroVectorField);
    }
    // constant field short-circuit
    if let Some(c) = h.as_const() {
        let mut coeffs = vec![CdNum::zero(level); order.max(1) + 1];
        coeffs[0] = base.clone();
        coeffs[1] = c.promote(level);
        return Ok(SeriesFn::new(base.clone(), coeffs, f64::INFINITY));
    }
    let rhs = match h {
        Evaluatable::Phrase(p) => phrase_to_rhs(p)?,
        _ => {
            return Err(OdeError::UnsupportedVectorField(
                "series flow needs a phrase or constant field".into(),
            ))
        }
    };
    let prob = CauchyProblem {
        level,
        rhs: vec![rhs],
        initial: vec![base.clone()],
        t0: base.clone(),
    };
    let sol = cauchy_series_solve(&prob, order)?;
    Ok(sol.series.into_iter().next().expect("one unknown"))
}

fn phrase_to_rhs(p: &Phrase) -> Result<RhsExpr, OdeError> {
    fn tree_to_rhs(t: &Tree) -> Result<RhsExpr, OdeError> {
        Ok(match t {
            Tree::Var => RhsExpr::U(0),
            Tree::Const(c) => RhsExpr::Const(c.clone()),
            Tree::ConjVar | Tree::Slot { .. } => {
                return Err(OdeError::UnsupportedVectorField(
                    "flow fields must be plain phrases in z".into(),
                ))
            }
            Tree::Mul(l, r) => RhsExpr::mul(tree_to_rhs(l)?, tree_to_rhs(r)?),
        })
    }
    let mut acc: Option<RhsExpr> = None;
    for t in p.terms() {
        let r = tree_to_rhs(t)?;
        acc = Some(match acc {
            None => r,
            Some(a) => RhsExpr::add(a, r),
        });
    }
    Ok(acc.unwrap_or(RhsExpr::Const(CdNum::zero(0))))
}
