//! First-order solvers: the simplest equation, R-linear, separated
//! variables, homogeneous ratios, and the two Bernoulli families.

use std::sync::Arc;

use crate::algebra::CdNum;
use crate::calculus::{adaptive_gl, frechet_of_phrase, CalculusError};
use crate::functions::cd_pow_real;
use crate::phrase::Phrase;

use super::omega::OmegaMap;
use super::plane::{self, Plane};
use super::residual::{residual_on_points, verify_residual};
use super::{
    BoundaryData, EvalFn, Evaluatable, OdeError, OdeProblem, Representation, ResidualReport,
    Solution, SolutionEval, SolveOpts, ToleranceClass,
};

/// `int_0^s f(base + tau) dtau` along the real direction.
pub(super) fn integrate_real_segment(
    f: &dyn Fn(&CdNum) -> Result<CdNum, OdeError>,
    base: &CdNum,
    s: f64,
) -> Result<CdNum, OdeError> {
    if s == 0.0 {
        return Ok(CdNum::zero(base.level()));
    }
    let level = base.level();
    let res = adaptive_gl(
        |t| {
            let pt = &*base + &CdNum::real(level, t * s);
            f(&pt).map_err(|e| CalculusError::EvaluationFailure(e.to_string()))
        },
        1e-11,
    )
    .map_err(OdeError::from)?;
    Ok(res.scale(s))
}

/// Fallback verification on the commuting plane slice: the Bernoulli-family
/// substitution `v^l = y` expands the power only where v and its derivative
/// commute. A solution that fails on the full half-space is re-checked on the
/// plane spanned by the data and flagged with a note when it passes there.
fn plane_fallback_verify(
    problem: &OdeProblem,
    eval: &EvalFn,
    plane_values: &[&CdNum],
    opts: &SolveOpts,
    alpha0: f64,
    tolerance: f64,
) -> Option<(ResidualReport, String)> {
    let plane = Plane::spanning(plane_values, opts.level, opts.tol).ok()?;
    let pts: Vec<CdNum> = (0..opts.grid.points)
        .map(|i| {
            let u = crate::sample::halton_point(opts.grid.seed, i as u64, 2);
            let re = alpha0 + 0.05 + opts.grid.radius * u[0];
            let mu = (u[1] - 0.5) * 2.0 * opts.grid.radius;
            let mut x = plane.axis.scale(mu);
            x.set_coeff(0, re);
            x.promote(opts.level)
        })
        .collect();
    let report = residual_on_points(problem, eval, &pts);
    if report.max <= tolerance && report.failures.is_empty() {
        Some((
            report,
            format!(
                "residual verified on the commuting plane slice with axis {}",
                plane.axis
            ),
        ))
    } else {
        None
    }
}

fn finish_solution(
    problem: &OdeProblem,
    eval: SolutionEval,
    representation: Representation,
    branch_notes: Vec<String>,
    class: ToleranceClass,
    opts: &SolveOpts,
    alpha0: f64,
) -> Solution {
    let tolerance = class.value();
    let mut solution = Solution {
        representation,
        branch_notes,
        residual: ResidualReport::default(),
        tolerance,
        verified: false,
        eval,
    };
    solution.residual = verify_residual(problem, &solution, &opts.grid, opts.level, alpha0);
    solution.verified =
        solution.residual.max <= tolerance && solution.residual.failures.is_empty();
    solution
}

/// `(dy/dx).h = f(x)`: the non-commutative line integral of f plus the
/// boundary branch function, through the flow substitution when h is not 1.
pub fn solve_simplest(
    f: &Evaluatable,
    h: &Evaluatable,
    bd: &BoundaryData,
    opts: &SolveOpts,
) -> Result<Solution, OdeError> {
    let omega = OmegaMap::detect(h, opts.level, opts.tol)?;
    let bd_c = bd.clone();
    let f_c = f.clone();
    let omega_c = omega.clone();

    // symbolic antiderivative shortcut: h = 1 and a left-reducible phrase
    let symbolic = match (&omega, f) {
        (OmegaMap::Identity, Evaluatable::Phrase(p)) => p.antiderivative_left().ok(),
        _ => None,
    };
    let class = if symbolic.is_some() {
        ToleranceClass::ClosedForm
    } else {
        ToleranceClass::Quadrature
    };
    let representation = match &symbolic {
        Some(g) => Representation::ClosedForm(format!("eta(x°) + [{g}](x) - [{g}](0x)")),
        None => Representation::GridBacked("eta(x°) + int f(omega(t)) dt".into()),
    };

    let transformed: EvalFn = Arc::new(move |x: &CdNum| {
        let base = bd_c.base_point(x);
        let s = x.re() - bd_c.alpha0;
        let eta = bd_c.eta_at(x)?;
        let integral = match &symbolic {
            Some(g) => &g.eval(x) - &g.eval(&base),
            None => {
                let omega = omega_c.clone();
                let f = f_c.clone();
                let bdl = bd_c.clone();
                integrate_real_segment(
                    &move |t: &CdNum| f.eval(&omega.eval(t, &bdl)?),
                    &base,
                    s,
                )?
            }
        };
        Ok(&eta + &integral)
    });
    let eval = point_through_inverse(transformed, omega, bd.clone());
    let problem = OdeProblem::Simplest {
        f: f.clone(),
        h: h.clone(),
    };
    Ok(finish_solution(
        &problem,
        SolutionEval::Point(eval),
        representation,
        vec![],
        class,
        opts,
        bd.alpha0,
    ))
}

/// Wrap a flow-coordinate evaluatable into one over the original variable.
fn point_through_inverse(transformed: EvalFn, omega: OmegaMap, bd: BoundaryData) -> EvalFn {
    match omega {
        OmegaMap::Identity => transformed,
        _ => Arc::new(move |xi: &CdNum| {
            let x = omega.invert(xi, &bd)?;
            transformed(&x)
        }),
    }
}

/// `(dy/dx).h + b(x) y = q(x)` with real-valued b: integrating-exponential
/// formula, all quadrature along the real direction in flow coordinates.
pub fn solve_linear(
    b: &Evaluatable,
    q: &Evaluatable,
    h: &Evaluatable,
    bd: &BoundaryData,
    opts: &SolveOpts,
) -> Result<Solution, OdeError> {
    b.check_real_valued(opts.level, 1e-9)?;
    let omega = OmegaMap::detect(h, opts.level, opts.tol)?;
    let bd_c = bd.clone();
    let (b_c, q_c, omega_c) = (b.clone(), q.clone(), omega.clone());

    let transformed: EvalFn = Arc::new(move |x: &CdNum| {
        let base = bd_c.base_point(x);
        let s = x.re() - bd_c.alpha0;
        let eta = bd_c.eta_at(x)?;
        let omega = omega_c.clone();
        let bdl = bd_c.clone();
        let b = b_c.clone();
        // B(t) = int of b(omega(.)) from the base to t, real-valued
        let big_b = {
            let omega = omega.clone();
            let bdl = bdl.clone();
            let b = b.clone();
            let base = base.clone();
            move |t: f64| -> Result<f64, OdeError> {
                let v = integrate_real_segment(
                    &|u: &CdNum| b.eval(&omega.eval(u, &bdl)?),
                    &base,
                    t,
                )?;
                if v.im().norm() > 1e-8 * (1.0 + v.norm()) {
                    return Err(OdeError::NonRealCoefficient(v.im().norm()));
                }
                Ok(v.re())
            }
        };
        let q = q_c.clone();
        let omega2 = omega.clone();
        let bdl2 = bdl.clone();
        let big_b2 = big_b.clone();
        let base2 = base.clone();
        let particular = integrate_real_segment(
            &move |u: &CdNum| {
                let w = big_b2(u.re() - base2.re())?;
                let qv = q.eval(&omega2.eval(u, &bdl2)?)?;
                Ok(qv.scale(w.exp()))
            },
            &base,
            s,
        )?;
        let decay = (-big_b(s)?).exp();
        Ok((&eta + &particular).scale(decay))
    });
    let eval = point_through_inverse(transformed, omega, bd.clone());
    let problem = OdeProblem::Linear {
        b: b.clone(),
        q: q.clone(),
        h: h.clone(),
    };
    Ok(finish_solution(
        &problem,
        SolutionEval::Point(eval),
        Representation::GridBacked("exp(-B) [eta(x°) + int exp(B) q]".into()),
        vec![],
        ToleranceClass::Quadrature,
        opts,
        bd.alpha0,
    ))
}

/// Damped Newton for `g(y) = target` with the exact symbolic Fréchet matrix.
pub(super) fn newton_phrase(
    g: &Phrase,
    target: &CdNum,
    guess: &CdNum,
    level: u8,
) -> Result<CdNum, OdeError> {
    let mut y = guess.promote(level);
    let scale = 1.0 + target.norm();
    for iteration in 0..50 {
        let r = &g.eval(&y) - target;
        if r.norm() <= 1e-12 * scale {
            return Ok(y);
        }
        let jac = frechet_of_phrase(g, &y);
        let delta = jac.solve(&r).ok_or(OdeError::SingularJacobian)?;
        if delta.norm() <= 1e-10 * (1.0 + y.norm()) && iteration > 0 {
            return Ok(&y - &delta);
        }
        // halve on residual increase
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let candidate = &y - &delta.scale(step);
            if (&g.eval(&candidate) - target).norm() < r.norm() {
                y = candidate;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            return Err(OdeError::NewtonNonConvergent {
                iterations: iteration + 1,
                residual: r.norm(),
            });
        }
    }
    Err(OdeError::NewtonNonConvergent {
        iterations: 50,
        residual: f64::NAN,
    })
}

/// `f(y) (dy/dx).h + s(x) = 0` with real-valued h and a left-reducible
/// phrase f: solve `g(y) = g(eta) - int s/h` pointwise by Newton with the
/// exact Fréchet matrix of g, continued along the real direction.
pub fn solve_separated(
    f: &Evaluatable,
    s: &Evaluatable,
    h: &Evaluatable,
    bd: &BoundaryData,
    guess: &CdNum,
    opts: &SolveOpts,
) -> Result<Solution, OdeError> {
    let fp = f
        .as_phrase()
        .ok_or_else(|| OdeError::ShapeMismatch("separated solver needs a phrase f(y)".into()))?
        .clone();
    h.check_real_valued(opts.level, 1e-9)?;
    let g = fp.antiderivative_left()?;
    let bd_c = bd.clone();
    let (s_c, h_c) = (s.clone(), h.clone());
    let g_c = g.clone();
    let level = opts.level;
    let guess = guess.clone();

    let eval: EvalFn = Arc::new(move |x: &CdNum| {
        let base = bd_c.base_point(x);
        let s_len = x.re() - bd_c.alpha0;
        let eta = bd_c.eta_at(x)?;
        let sfn = s_c.clone();
        let hfn = h_c.clone();
        // target(t) = g(eta) - int_0^t s/h
        let g_eta = g_c.eval(&eta.promote(level));
        // continuation: walk the segment in a few Newton-solved stages
        let stages = 8usize;
        let mut y = if guess.norm_sq() > 0.0 {
            guess.clone()
        } else {
            eta.promote(level)
        };
        for k in 1..=stages {
            let t = s_len * (k as f64) / (stages as f64);
            let integral = integrate_real_segment(
                &|u: &CdNum| {
                    let hv = hfn.eval(u)?;
                    if hv.re().abs() <= 1e-12 {
                        return Err(OdeError::ZeroVectorField);
                    }
                    Ok(sfn.eval(u)?.scale(1.0 / hv.re()))
                },
                &base,
                t,
            )?;
            let target = &g_eta - &integral;
            y = newton_phrase(&g_c, &target, &y, level)?;
        }
        Ok(y)
    });
    let problem = OdeProblem::Separated {
        f: f.clone(),
        s: s.clone(),
        h: h.clone(),
    };
    Ok(finish_solution(
        &problem,
        SolutionEval::Point(eval),
        Representation::GridBacked(format!("g(y) = g(eta) - int s/h with g = {g}")),
        vec![],
        ToleranceClass::Newton,
        opts,
        bd.alpha0,
    ))
}

/// Which side the ratio substitution uses: `y = u x` (right) or `y = x u`
/// (left).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HomogeneousSide {
    Right,
    Left,
}

/// Initial data for the homogeneous-ratio solver: one point off the origin.
#[derive(Debug, Clone)]
pub struct HomogeneousInit {
    pub x0: CdNum,
    pub y0: CdNum,
}

/// `(dy/dx).h = f(y x^{-1})`: commuting-ansatz solve inside the complex
/// plane spanned by the data. The accumulated integral
/// `int du/(f(u) - u h) = Ln x + C` is continued stepwise along the path,
/// each step Newton-inverted.
pub fn solve_homogeneous_ratio(
    f: &Evaluatable,
    h: &CdNum,
    side: HomogeneousSide,
    init: &HomogeneousInit,
    opts: &SolveOpts,
) -> Result<Solution, OdeError> {
    let level = opts.level;
    let plane = Plane::spanning(&[&init.x0, &init.y0, h], level, opts.tol)?;
    let x0c = plane.to_c(&init.x0, 1e-9)?;
    if plane::cabs(x0c) < 1e-9 {
        return Err(OdeError::EvaluationFailure("x0 must be nonzero".into()));
    }
    let y0c = plane.to_c(&init.y0, 1e-9)?;
    let hc = plane.to_c(h, 1e-9)?;
    let u0 = plane::cdiv(y0c, x0c)?;

    // f as a complex map on the plane
    let f_c = f.clone();
    let plane_f = plane.clone();
    let fc = move |u: (f64, f64)| -> Result<(f64, f64), OdeError> {
        let v = f_c.eval(&plane_f.from_c(u))?;
        plane_f.to_c(&v, 1e-7)
    };

    // denominator f(u) - u h; identically-zero denominator means straight
    // lines y = u0 x
    let denom = {
        let fc = fc.clone();
        move |u: (f64, f64)| -> Result<(f64, f64), OdeError> {
            Ok(plane::csub(fc(u)?, plane::cmul(u, hc)))
        }
    };
    let lines_only = plane::cabs(denom(u0)?) <= 1e-12 * (1.0 + plane::cabs(u0));

    let plane_c = plane.clone();
    let denom_c = denom.clone();
    let eval: EvalFn = Arc::new(move |xi: &CdNum| {
        let target = plane_c.to_c(xi, 1e-9)?;
        if plane::cabs(target) < 1e-9 {
            return Err(OdeError::EvaluationFailure("x must stay off zero".into()));
        }
        let u = if lines_only {
            u0
        } else {
            // continue u along the straight path x0 -> xi
            let steps = 200usize;
            let mut u = u0;
            let mut x_prev = x0c;
            for k in 1..=steps {
                let t = k as f64 / steps as f64;
                let x_next = plane::cadd(x0c, plane::cscale(plane::csub(target, x0c), t));
                if plane::cabs(x_next) < 1e-6 {
                    return Err(OdeError::EvaluationFailure(
                        "integration path passes through zero".into(),
                    ));
                }
                let dlnx = plane::cln(plane::cdiv(x_next, x_prev)?)?;
                // Newton-invert the incremental integral
                // int_{u}^{u_next} dw/(f(w) - w h) = dlnx
                let mut u_next = {
                    let d = denom_c(u)?;
                    plane::cadd(u, plane::cmul(dlnx, d))
                };
                for _ in 0..30 {
                    // midpoint quadrature of the step integral
                    let mid = plane::cscale(plane::cadd(u, u_next), 0.5);
                    let dm = denom_c(mid)?;
                    if plane::cabs(dm) < 1e-10 * (1.0 + plane::cabs(mid)) {
                        return Err(OdeError::DegenerateDenominator);
                    }
                    let integral = plane::cdiv(plane::csub(u_next, u), dm)?;
                    let err = plane::csub(integral, dlnx);
                    if plane::cabs(err) <= 1e-13 * (1.0 + plane::cabs(dlnx)) {
                        break;
                    }
                    // d(integral)/d(u_next) ~ 1/denom(u_next)
                    let dn = denom_c(u_next)?;
                    if plane::cabs(dn) < 1e-12 {
                        return Err(OdeError::DegenerateDenominator);
                    }
                    u_next = plane::csub(u_next, plane::cmul(err, dn));
                }
                u = u_next;
                x_prev = x_next;
            }
            u
        };
        let ucd = plane_c.from_c(u);
        let xv = plane_c.from_c(target);
        Ok(match side {
            HomogeneousSide::Right => &ucd * &xv,
            HomogeneousSide::Left => &xv * &ucd,
        })
    });

    // residual on an in-plane disc around x0, kept away from zero
    let radius = opts.grid.radius.min(0.4 * plane::cabs(x0c));
    let mut pts = Vec::with_capacity(opts.grid.points);
    for i in 0..opts.grid.points {
        let u = crate::sample::halton_point(opts.grid.seed, i as u64, 2);
        let off = (radius * (2.0 * u[0] - 1.0), radius * (2.0 * u[1] - 1.0));
        pts.push(plane.from_c(plane::cadd(x0c, off)));
    }
    let problem = OdeProblem::HomogeneousRatio {
        f: f.clone(),
        h: h.clone(),
        side,
    };
    let tolerance = ToleranceClass::Newton.value();
    let residual = residual_on_points(&problem, &eval, &pts);
    let verified = residual.max <= tolerance && residual.failures.is_empty();
    Ok(Solution {
        representation: Representation::GridBacked(
            "u continued along Ln x; y = u x (commuting ansatz)".into(),
        ),
        branch_notes: vec![format!(
            "solution restricted to the complex plane with axis {}",
            plane.axis
        )],
        residual,
        tolerance,
        verified,
        eval: SolutionEval::Point(eval),
    })
}

/// Bernoulli: `(dy/dx).h + y p(x) = y^m s(x)` with real p. The substitution
/// `v = y^{1-m}` gives a linear problem; the boundary function becomes
/// `eta^{1-m}`.
pub fn solve_bernoulli(
    p: &Evaluatable,
    s: &Evaluatable,
    m: f64,
    h: &Evaluatable,
    bd: &BoundaryData,
    opts: &SolveOpts,
) -> Result<Solution, OdeError> {
    if (m - 1.0).abs() < 1e-12 {
        return Err(OdeError::ShapeMismatch("m = 1 degenerates the substitution".into()));
    }
    p.check_real_valued(opts.level, 1e-9)?;
    let omega = OmegaMap::detect(h, opts.level, opts.tol)?;
    let bd_c = bd.clone();
    let (p_c, s_c, omega_c) = (p.clone(), s.clone(), omega.clone());
    let one_minus_m = 1.0 - m;

    let transformed: EvalFn = Arc::new(move |x: &CdNum| {
        let base = bd_c.base_point(x);
        let s_len = x.re() - bd_c.alpha0;
        let eta = bd_c.eta_at(x)?;
        let phi1 = cd_pow_real(&eta, one_minus_m, 1e-12)?;
        let omega = omega_c.clone();
        let bdl = bd_c.clone();
        let p = p_c.clone();
        let big_p = {
            let omega = omega.clone();
            let bdl = bdl.clone();
            let base = base.clone();
            move |t: f64| -> Result<f64, OdeError> {
                let v = integrate_real_segment(
                    &|u: &CdNum| p.eval(&omega.eval(u, &bdl)?),
                    &base,
                    t,
                )?;
                Ok(v.re())
            }
        };
        let sfn = s_c.clone();
        let omega2 = omega.clone();
        let bdl2 = bdl.clone();
        let big_p2 = big_p.clone();
        let base2 = base.clone();
        let particular = integrate_real_segment(
            &move |u: &CdNum| {
                let w = big_p2(u.re() - base2.re())?;
                let sv = sfn.eval(&omega2.eval(u, &bdl2)?)?;
                Ok(sv.scale(one_minus_m * (one_minus_m * w).exp()))
            },
            &base,
            s_len,
        )?;
        let v = (&phi1 + &particular).scale(((m - 1.0) * big_p(s_len)?).exp());
        if v.norm() <= 1e-9 {
            return Err(OdeError::BranchUndefined(
                "v crosses zero; y = v^{1/(1-m)} loses its branch".into(),
            ));
        }
        Ok(cd_pow_real(&v, 1.0 / one_minus_m, 1e-12)?)
    });
    let eval = point_through_inverse(transformed, omega, bd.clone());
    let problem = OdeProblem::Bernoulli {
        p: p.clone(),
        s: s.clone(),
        m,
        h: h.clone(),
    };
    let mut solution = finish_solution(
        &problem,
        SolutionEval::Point(eval.clone()),
        Representation::GridBacked("y = v^{1/(1-m)}, v linear in flow coordinates".into()),
        vec![format!("principal branch used for v^{{1/(1-m)}}, m = {m}")],
        ToleranceClass::Quadrature,
        opts,
        bd.alpha0,
    );
    if !solution.verified {
        // the power expansion needs v and v' to commute; re-check on the
        // plane the data spans
        let eta0 = bd.eta_at(&CdNum::zero(opts.level)).unwrap_or(CdNum::zero(opts.level));
        let s0 = s.eval(&CdNum::real(opts.level, bd.alpha0 + 0.3));
        let s1 = s.eval(&CdNum::real(opts.level, bd.alpha0 + 0.7));
        if let (Ok(s0), Ok(s1)) = (s0, s1) {
            let values = [&eta0, &s0, &s1];
            if let Some((report, note)) = plane_fallback_verify(
                &problem,
                &eval,
                &values,
                opts,
                bd.alpha0,
                solution.tolerance,
            ) {
                solution.residual = report;
                solution.verified = true;
                solution.branch_notes.push(note);
            }
        }
    }
    Ok(solution)
}

/// Generalized Bernoulli `f(y)(dy/dx).h + y^k p = y^m s`.
///
/// Two routes: for `f = 1, k = 1` the v-substitution gives the plain linear
/// problem over the full algebra; otherwise the beta/psi machinery runs
/// real-restricted (quadrature-built beta, Newton inversion, and the C(x)
/// flow integrated along the real axis).
pub fn solve_generalized_bernoulli(
    f: &Evaluatable,
    p: &Evaluatable,
    s: &Evaluatable,
    k: f64,
    m: f64,
    h: &Evaluatable,
    bd: &BoundaryData,
    opts: &SolveOpts,
) -> Result<Solution, OdeError> {
    if (k - m).abs() < 1e-12 {
        return Err(OdeError::ShapeMismatch("k = m degenerates the exponent".into()));
    }
    let is_one = matches!(f.as_const(), Some(c) if (c - &CdNum::one(c.level())).norm() <= 1e-12);
    let problem = OdeProblem::GeneralizedBernoulli {
        f: f.clone(),
        p: p.clone(),
        s: s.clone(),
        k,
        m,
        h: h.clone(),
    };
    if is_one && (k - 1.0).abs() < 1e-12 {
        // beta^{-1} = exp: same construction as the Bernoulli solver
        let mut solution = solve_bernoulli(p, s, m, h, bd, opts)?;
        solution.branch_notes.push("f = 1, k = 1: beta is the logarithm, solved linearly".into());
        solution.residual =
            verify_residual(&problem, &solution, &opts.grid, opts.level, bd.alpha0);
        solution.verified = solution.residual.max <= solution.tolerance
            && solution.residual.failures.is_empty();
        if !solution.verified {
            if let SolutionEval::Point(eval) = &solution.eval {
                let eta0 = bd.eta_at(&CdNum::zero(opts.level)).unwrap_or(CdNum::zero(opts.level));
                let s0 = s.eval(&CdNum::real(opts.level, bd.alpha0 + 0.3));
                let s1 = s.eval(&CdNum::real(opts.level, bd.alpha0 + 0.7));
                if let (Ok(s0), Ok(s1)) = (s0, s1) {
                    let values = [&eta0, &s0, &s1];
                    if let Some((report, note)) = plane_fallback_verify(
                        &problem,
                        eval,
                        &values,
                        opts,
                        bd.alpha0,
                        solution.tolerance,
                    ) {
                        solution.residual = report;
                        solution.verified = true;
                        solution.branch_notes.push(note);
                    }
                }
            }
        }
        return Ok(solution);
    }

    // real-restricted route
    p.check_real_on_axis(opts.level, 1e-9)?;
    h.check_real_on_axis(opts.level, 1e-9)?;
    let exponent = -2.0 + (1.0 - m) / (k - m);
    let l = 1.0 / (k - m);
    let (f_c, p_c, s_c, h_c, bd_c) = (f.clone(), p.clone(), s.clone(), h.clone(), bd.clone());
    let level = opts.level;

    // beta(v) = int_{eta0}^{v} z^{exponent} f(z^{l}) dz on the positive real
    // axis
    let beta = move |eta0: f64, v: f64, f: &Evaluatable| -> Result<f64, OdeError> {
        if eta0 <= 0.0 || v <= 0.0 {
            return Err(OdeError::BranchUndefined(
                "real-restricted beta needs positive v".into(),
            ));
        }
        let fcl = f.clone();
        let res = adaptive_gl(
            |t| {
                let z = eta0 + t * (v - eta0);
                let fz = fcl
                    .eval(&CdNum::real(level, z.powf(l)))
                    .map_err(|e| CalculusError::EvaluationFailure(e.to_string()))?;
                Ok(CdNum::real(level, z.powf(exponent) * fz.re()))
            },
            1e-11,
        )?;
        Ok(res.re() * (v - eta0))
    };
    let beta_inv = {
        let f = f_c.clone();
        move |eta0: f64, target: f64| -> Result<f64, OdeError> {
            let mut v = eta0;
            for _ in 0..80 {
                let err = beta(eta0, v, &f)? - target;
                if err.abs() <= 1e-12 * (1.0 + target.abs()) {
                    return Ok(v);
                }
                let fz = f.eval(&CdNum::real(level, v.powf(l)))?.re();
                let slope = v.powf(exponent) * fz;
                if slope.abs() < 1e-14 {
                    return Err(OdeError::SingularJacobian);
                }
                let mut step = err / slope;
                // keep v positive
                while v - step <= 0.0 {
                    step *= 0.5;
                }
                v -= step;
            }
            Err(OdeError::NewtonNonConvergent {
                iterations: 80,
                residual: f64::NAN,
            })
        }
    };

    let eval: EvalFn = Arc::new(move |x: &CdNum| {
        if x.im().norm() > 1e-9 * (1.0 + x.norm()) {
            return Err(OdeError::AnsatzViolated(
                "general-f route is real-restricted".into(),
            ));
        }
        let eta = bd_c.eta_at(x)?.re();
        let v0 = eta.powf(k - m);
        let a0 = bd_c.alpha0;
        let s_len = x.re() - a0;
        // march C(x) along the real axis: C' = (k-m) s(x) / beta^{-1}(C - (k-m)P)
        let steps = ((s_len.abs() * 128.0).ceil() as usize).clamp(32, 4096);
        let dt = s_len / steps as f64;
        let mut c_val = 0.0f64; // beta measured relative to eta0 = v0
        let mut pint = 0.0f64;
        let km = k - m;
        let deriv = |t: f64, c_val: f64, pint: f64| -> Result<(f64, f64), OdeError> {
            let xt = CdNum::real(level, a0 + t);
            let sv = s_c.eval(&xt)?.re();
            let pv = p_c.eval(&xt)?.re();
            let hv = h_c.eval(&xt)?.re();
            if hv.abs() < 1e-12 {
                return Err(OdeError::ZeroVectorField);
            }
            let v = beta_inv(v0, c_val - km * pint)?;
            Ok((km * sv / (v * hv), pv / hv))
        };
        let mut t = 0.0;
        for _ in 0..steps {
            // classical RK4 on the pair (C, P)
            let (k1c, k1p) = deriv(t, c_val, pint)?;
            let (k2c, k2p) = deriv(t + dt / 2.0, c_val + k1c * dt / 2.0, pint + k1p * dt / 2.0)?;
            let (k3c, k3p) = deriv(t + dt / 2.0, c_val + k2c * dt / 2.0, pint + k2p * dt / 2.0)?;
            let (k4c, k4p) = deriv(t + dt, c_val + k3c * dt, pint + k3p * dt)?;
            c_val += dt * (k1c + 2.0 * k2c + 2.0 * k3c + k4c) / 6.0;
            pint += dt * (k1p + 2.0 * k2p + 2.0 * k3p + k4p) / 6.0;
            t += dt;
        }
        let v = beta_inv(v0, c_val - km * pint)?;
        Ok(CdNum::real(level, v.powf(l)))
    });

    let pts = opts.grid.real_axis(level, bd.alpha0 + 0.02);
    let tolerance = ToleranceClass::Newton.value();
    let residual = residual_on_points(&problem, &eval, &pts);
    let verified = residual.max <= tolerance && residual.failures.is_empty();
    Ok(Solution {
        representation: Representation::GridBacked(
            "v = beta^{-1}(psi^{-1}(...)), y = v^{1/(k-m)}".into(),
        ),
        branch_notes: vec!["general f route runs real-restricted".into()],
        residual,
        tolerance,
        verified,
        eval: SolutionEval::Point(eval),
    })
}
