//! Residual verification: every solver output is re-substituted into the
//! original equation on a deterministic sample grid. Derivatives come from
//! central finite differences of the solution evaluatable, so the check is
//! independent of the derivation that produced the formula.

use crate::algebra::CdNum;
use crate::functions::cd_pow_real;

use super::{
    EvalFn, GridSpec, HomogeneousSide, OdeError, OdeProblem, ResidualReport, Solution,
    SolutionEval,
};

/// Directional derivative `(dy/dx).h` by central differences with step
/// `1e-5 * max(1, |x|) / max(1, |h|)`.
pub fn dir_derivative(f: &EvalFn, x: &CdNum, h: &CdNum) -> Result<CdNum, OdeError> {
    let step = 1e-5 * x.norm().max(1.0) / h.norm().max(1.0);
    let xp = x + &h.scale(step);
    let xm = x - &h.scale(step);
    Ok((&f(&xp)? - &f(&xm)?).scale(0.5 / step))
}

/// Second derivative along the real direction, five-point stencil.
pub fn second_derivative_re(f: &EvalFn, x: &CdNum) -> Result<CdNum, OdeError> {
    let e = 4e-3 * x.norm().max(1.0);
    let at = |k: f64| -> Result<CdNum, OdeError> { f(&(x + &CdNum::real(x.level(), k * e))) };
    let v = &(&(&at(-2.0)?.scale(-1.0) + &at(-1.0)?.scale(16.0)) + &at(0.0)?.scale(-30.0))
        + &(&at(1.0)?.scale(16.0) + &at(2.0)?.scale(-1.0));
    Ok(v.scale(1.0 / (12.0 * e * e)))
}

/// Residual of the original equation at one point for a point-evaluatable
/// solution.
fn point_residual(problem: &OdeProblem, y: &EvalFn, x: &CdNum) -> Result<f64, OdeError> {
    let r = match problem {
        OdeProblem::Simplest { f, h } => {
            let hv = h.eval(x)?;
            let lhs = dir_derivative(y, x, &hv)?;
            (&lhs - &f.eval(x)?).norm()
        }
        OdeProblem::Linear { b, q, h } => {
            let hv = h.eval(x)?;
            let lhs = dir_derivative(y, x, &hv)?;
            let yv = y(x)?;
            (&(&lhs + &(&b.eval(x)? * &yv)) - &q.eval(x)?).norm()
        }
        OdeProblem::Separated { f, s, h } => {
            let hv = h.eval(x)?;
            let dy = dir_derivative(y, x, &hv)?;
            let yv = y(x)?;
            (&(&f.eval(&yv)? * &dy) + &s.eval(x)?).norm()
        }
        OdeProblem::HomogeneousRatio { f, h, side } => {
            let dy = dir_derivative(y, x, h)?;
            let yv = y(x)?;
            let xinv = x.recip(1e-12)?;
            let u = match side {
                HomogeneousSide::Right => &yv * &xinv,
                HomogeneousSide::Left => &xinv * &yv,
            };
            (&dy - &f.eval(&u)?).norm()
        }
        OdeProblem::Bernoulli { p, s, m, h } => {
            let hv = h.eval(x)?;
            let dy = dir_derivative(y, x, &hv)?;
            let yv = y(x)?;
            let ym = cd_pow_real(&yv, *m, 1e-12)?;
            (&(&dy + &(&yv * &p.eval(x)?)) - &(&ym * &s.eval(x)?)).norm()
        }
        OdeProblem::GeneralizedBernoulli { f, p, s, k, m, h } => {
            let hv = h.eval(x)?;
            let dy = dir_derivative(y, x, &hv)?;
            let yv = y(x)?;
            let yk = cd_pow_real(&yv, *k, 1e-12)?;
            let ym = cd_pow_real(&yv, *m, 1e-12)?;
            (&(&(&f.eval(&yv)? * &dy) + &(&yk * &p.eval(x)?)) - &(&ym * &s.eval(x)?)).norm()
        }
        OdeProblem::Clairaut { eta } => {
            let one = CdNum::one(x.level());
            let p = dir_derivative(y, x, &one)?;
            let yv = y(x)?;
            (&yv - &(&(x * &p) + &eta.eval(&p)?)).norm()
        }
        OdeProblem::Lagrange { f, s, eta, h } => {
            let p = dir_derivative(y, x, h)?;
            let yv = y(x)?;
            let mut rhs = eta.eval(&p)?;
            if !f.is_identically_zero() {
                rhs = &rhs + &(x * &f.eval(&p)?);
            }
            if !s.is_identically_zero() {
                rhs = &rhs + &(&s.eval(&p)? * x);
            }
            (&yv - &rhs).norm()
        }
        OdeProblem::NthOrder { .. } => {
            return Err(OdeError::EvaluationFailure(
                "n-th order residuals go through the derivative chain".into(),
            ))
        }
    };
    Ok(r)
}

/// Evaluate the residual of `problem` for `solution` on the grid. The grid
/// sits in the half-space `Re x >= alpha0`, shifted slightly inside so the
/// finite-difference stencils stay in the domain.
pub fn verify_residual(
    problem: &OdeProblem,
    solution: &Solution,
    grid: &GridSpec,
    level: u8,
    alpha0: f64,
) -> ResidualReport {
    match &solution.eval {
        SolutionEval::Point(y) => {
            let pts = grid.half_space(level, alpha0 + 0.05);
            residual_on_points(problem, y, &pts)
        }
        SolutionEval::Parametric {
            x_of_p,
            y_of_p,
            samples,
        } => parametric_residual(problem, x_of_p, y_of_p, samples),
    }
}

pub(super) fn residual_on_points(
    problem: &OdeProblem,
    y: &EvalFn,
    pts: &[CdNum],
) -> ResidualReport {
    let mut residuals = Vec::with_capacity(pts.len());
    let mut kept = Vec::with_capacity(pts.len());
    let mut failures = Vec::new();
    for (i, x) in pts.iter().enumerate() {
        match point_residual(problem, y, x) {
            Ok(r) => {
                kept.push(x.clone());
                residuals.push(r);
            }
            Err(e) => failures.push((i, e.to_string())),
        }
    }
    ResidualReport::from_values(kept, residuals, failures)
}

/// Residual along a parameter curve: the defining relation is checked with
/// `p` recovered from the curve derivatives (real parameter direction).
fn parametric_residual(
    problem: &OdeProblem,
    x_of_p: &EvalFn,
    y_of_p: &EvalFn,
    samples: &[CdNum],
) -> ResidualReport {
    let mut residuals = Vec::with_capacity(samples.len());
    let mut kept = Vec::with_capacity(samples.len());
    let mut failures = Vec::new();
    // fourth-order stencil with a wider step: curve evaluations carry RK
    // integration noise that both a tiny step and a second-order rule would
    // amplify
    let d5 = |f: &EvalFn, p: &CdNum, step: f64| -> Result<CdNum, OdeError> {
        let at = |k: f64| -> Result<CdNum, OdeError> { f(&(p + &CdNum::real(p.level(), k * step))) };
        let v = &(&at(-2.0)? - &at(2.0)?) + &(&at(1.0)? - &at(-1.0)?).scale(8.0);
        Ok(v.scale(1.0 / (12.0 * step)))
    };
    for (i, p) in samples.iter().enumerate() {
        let one = CdNum::one(p.level());
        let step = 1e-4 * p.norm().max(1.0);
        let go = || -> Result<f64, OdeError> {
            let dx = d5(x_of_p, p, step)?;
            let dy = d5(y_of_p, p, step)?;
            // dy/dx along the curve; valid when the curve advances in a real
            // direction (commuting-parameter setting)
            if dx.im().norm() > 1e-6 * (1.0 + dx.norm()) {
                return Err(OdeError::AnsatzViolated(
                    "parametric residual needs a real curve speed".into(),
                ));
            }
            if dx.re().abs() < 1e-10 {
                return Err(OdeError::EvaluationFailure("stationary curve point".into()));
            }
            let p_check = dy.scale(1.0 / dx.re());
            let xv = x_of_p(p)?;
            let yv = y_of_p(p)?;
            let rel = match problem {
                OdeProblem::Clairaut { eta } => {
                    &yv - &(&(&xv * &p_check) + &eta.eval(&p_check)?)
                }
                OdeProblem::Lagrange { f, s, eta, h } => {
                    // p = (dy/dx).h; along a real-speed curve this is
                    // h * dy/dx, needing a real constant direction
                    if h.im().norm() > 1e-9 * (1.0 + h.norm()) {
                        return Err(OdeError::AnsatzViolated(
                            "parametric residual needs a real constant h".into(),
                        ));
                    }
                    let p_check = p_check.scale(h.re());
                    let mut rhs = eta.eval(&p_check)?;
                    if !f.is_identically_zero() {
                        rhs = &rhs + &(&xv * &f.eval(&p_check)?);
                    }
                    if !s.is_identically_zero() {
                        rhs = &rhs + &(&s.eval(&p_check)? * &xv);
                    }
                    &yv - &rhs
                }
                _ => {
                    let dyh = dir_derivative(y_of_p, p, &one)?;
                    let _ = dyh;
                    return Err(OdeError::EvaluationFailure(
                        "parametric residual only defined for Clairaut/Lagrange".into(),
                    ));
                }
            };
            Ok(rel.norm())
        };
        match go() {
            Ok(r) => {
                kept.push(p.clone());
                residuals.push(r);
            }
            Err(e) => failures.push((i, e.to_string())),
        }
    }
    ResidualReport::from_values(kept, residuals, failures)
}
