//! Quadratic-in-derivative roots and the Lagrange/Clairaut family.

use std::sync::Arc;

use crate::algebra::CdNum;
use crate::functions::{sqrt_set, RootSet};
use crate::phrase::Wrt;

use super::plane::{self, Plane};
use super::residual::{dir_derivative, residual_on_points, verify_residual};
use super::{
    EvalFn, Evaluatable, GridSpec, OdeError, OdeProblem, Representation,
    ResidualReport, Solution, SolutionEval, SolveOpts, ToleranceClass,
};

/// Roots of `z^2 + b z + z b + c = 0`: `lambda = -b ± (b^2 - c)^{1/2}`,
/// with the whole sphere `-b + rho K` when `b^2 - c` is a negative real.
pub fn quadratic_derivative_roots(b: &CdNum, c: &CdNum, tol: f64) -> RootSet {
    let disc = &(b * b) - c;
    match sqrt_set(&disc, tol) {
        RootSet::PointPair(pts) => {
            RootSet::PointPair(pts.iter().map(|w| &(-b) + w).collect())
        }
        RootSet::Sphere { center, radius } => RootSet::Sphere {
            center: &(-b) + &center,
            radius,
        },
    }
}

/// Substitution residual `|lambda^2 + b lambda + lambda b + c|` for a root
/// candidate.
pub fn quadratic_root_residual(b: &CdNum, c: &CdNum, lambda: &CdNum) -> f64 {
    (&(&(lambda * lambda) + &(b * lambda)) + &(&(lambda * b) + c)).norm()
}

/// Output of the Clairaut solver: the general line family plus the singular
/// envelope in parameter form.
#[derive(Debug, Clone)]
pub struct ClairautSolution {
    pub general: Solution,
    pub singular: Solution,
}

/// Clairaut `y = x p + eta(p)` with `p = (dy/dx).1`.
///
/// The general family substitutes an arbitrary boundary function `phi(x°)`
/// for p; the singular solution is the parametric envelope
/// `x(p) = -(d eta/dp).1`, `y(p) = -(d eta/dp).p + eta(p)`.
pub fn solve_clairaut(
    eta: &Evaluatable,
    phi: &Evaluatable,
    opts: &SolveOpts,
) -> Result<ClairautSolution, OdeError> {
    let problem = OdeProblem::Clairaut { eta: eta.clone() };
    let (eta_c, phi_c) = (eta.clone(), phi.clone());
    let general_eval: EvalFn = Arc::new(move |x: &CdNum| {
        let p = phi_c.eval(&x.im())?;
        Ok(&(x * &p) + &eta_c.eval(&p)?)
    });
    let general = {
        let tolerance = ToleranceClass::ClosedForm.value();
        let mut sol = Solution {
            representation: Representation::ClosedForm("y = x phi(x°) + eta(phi(x°))".into()),
            branch_notes: vec![],
            residual: ResidualReport::default(),
            tolerance,
            verified: false,
            eval: SolutionEval::Point(general_eval),
        };
        sol.residual = verify_residual(&problem, &sol, &opts.grid, opts.level, 0.0);
        sol.verified = sol.residual.max <= tolerance && sol.residual.failures.is_empty();
        sol
    };

    // singular envelope, exact derivative when eta is a phrase
    let eta_s = eta.clone();
    let deta_dot = move |p: &CdNum, slot: &CdNum| -> Result<CdNum, OdeError> {
        if let Some(ph) = eta_s.as_phrase() {
            Ok(ph.diff(Wrt::Z).eval(p, std::slice::from_ref(slot))?)
        } else {
            let f: EvalFn = {
                let eta_s = eta_s.clone();
                Arc::new(move |q: &CdNum| eta_s.eval(q))
            };
            dir_derivative(&f, p, slot)
        }
    };
    let d1 = deta_dot.clone();
    let x_of_p: EvalFn = Arc::new(move |p: &CdNum| Ok(-(d1(p, &CdNum::one(p.level()))?)));
    let d2 = deta_dot;
    let eta_c2 = eta.clone();
    let y_of_p: EvalFn = Arc::new(move |p: &CdNum| {
        Ok(&(-(d2(p, p)?)) + &eta_c2.eval(p)?)
    });
    // real parameter samples for the envelope residual
    let samples: Vec<CdNum> = (0..opts.grid.points)
        .map(|i| {
            let u = crate::sample::halton_point(opts.grid.seed, i as u64, 1)[0];
            CdNum::real(opts.level, 0.2 + u)
        })
        .collect();
    let singular = {
        let tolerance = ToleranceClass::ClosedForm.value();
        let mut sol = Solution {
            representation: Representation::Parametric {
                description: "x = -(d eta/dp).1, y = -(d eta/dp).p + eta(p)".into(),
            },
            branch_notes: vec!["envelope sampled over a real parameter interval".into()],
            residual: ResidualReport::default(),
            tolerance,
            verified: false,
            eval: SolutionEval::Parametric {
                x_of_p,
                y_of_p,
                samples,
            },
        };
        sol.residual = verify_residual(&problem, &sol, &opts.grid, opts.level, 0.0);
        sol.verified = sol.residual.max <= tolerance && sol.residual.failures.is_empty();
        sol
    };
    Ok(ClairautSolution { general, singular })
}

/// Initial point for the Lagrange parameter curve.
#[derive(Debug, Clone)]
pub struct LagrangeInit {
    pub p0: CdNum,
    pub x0: CdNum,
}

#[derive(Debug, Clone)]
pub struct LagrangeSolution {
    /// Parameter-curve solution through the initial point.
    pub general: Solution,
    /// Line solutions from stationary roots of `p - h (f + s)(p)`; includes
    /// particular and singular solutions (the latter when the root makes y
    /// constant).
    pub stationary: Vec<Solution>,
}

/// Lagrange `y = x f(p) + s(p) x + eta(p)`, `p = (dy/dx).h`, with exactly one
/// of f, s nonzero and the commuting ansatz (p, x and dp/dx confined to one
/// complex plane; h a real constant).
///
/// Differentiating gives the first-order linear problem
/// `dx/dp = h (x F' + eta') / (p - h F)` with `F = f + s`, integrated as a
/// scalar equation in the plane. Stationary roots of `p = h F(p)` give the
/// line solutions.
pub fn solve_lagrange(
    f: &Evaluatable,
    s: &Evaluatable,
    eta: &Evaluatable,
    h: &CdNum,
    commuting_ansatz: bool,
    init: &LagrangeInit,
    opts: &SolveOpts,
) -> Result<LagrangeSolution, OdeError> {
    if !commuting_ansatz {
        return Err(OdeError::AnsatzViolated(
            "only the commuting-ansatz Lagrange solver is implemented; pass commuting_ansatz = true".into(),
        ));
    }
    let f_zero = f.is_identically_zero();
    let s_zero = s.is_identically_zero();
    if f_zero == s_zero {
        return Err(OdeError::ShapeMismatch(
            "exactly one of f and s must be identically zero".into(),
        ));
    }
    if h.im().norm() > 1e-9 * (1.0 + h.norm()) {
        return Err(OdeError::AnsatzViolated("h must be a real constant".into()));
    }
    let h_re = h.re();
    let level = opts.level;
    let plane = Plane::spanning(&[&init.p0, &init.x0], level, opts.tol)?;

    // F = f + s as a plane scalar; one of them is zero, so order is moot
    let (f_c, s_c, eta_c) = (f.clone(), s.clone(), eta.clone());
    let plane_c = plane.clone();
    let big_f = move |p: (f64, f64)| -> Result<(f64, f64), OdeError> {
        let pv = plane_c.from_c(p);
        let v = &f_c.eval(&pv)? + &s_c.eval(&pv)?;
        plane_c.to_c(&v, 1e-7)
    };
    let plane_c2 = plane.clone();
    let eta_c2 = eta_c.clone();
    let eta_f = move |p: (f64, f64)| -> Result<(f64, f64), OdeError> {
        let v = eta_c2.eval(&plane_c2.from_c(p))?;
        plane_c2.to_c(&v, 1e-7)
    };
    // plane derivatives by central differences in the parameter plane
    let dc = |g: &dyn Fn((f64, f64)) -> Result<(f64, f64), OdeError>,
              p: (f64, f64)|
     -> Result<(f64, f64), OdeError> {
        let e = 1e-6 * (1.0 + plane::cabs(p));
        let a = g((p.0 + e, p.1))?;
        let b = g((p.0 - e, p.1))?;
        Ok(plane::cscale(plane::csub(a, b), 0.5 / e))
    };

    let p0 = plane.to_c(&init.p0, 1e-9)?;
    let x0 = plane.to_c(&init.x0, 1e-9)?;

    // x(p) by RK4 along the straight parameter path p0 -> p
    let big_f2 = big_f.clone();
    let x_at = {
        let big_f = big_f.clone();
        let eta_f = eta_f.clone();
        move |p_target: (f64, f64)| -> Result<(f64, f64), OdeError> {
            let dxdp = |p: (f64, f64), x: (f64, f64)| -> Result<(f64, f64), OdeError> {
                let fp = big_f(p)?;
                let den = plane::csub(p, plane::cscale(fp, h_re));
                if plane::cabs(den) < 1e-10 * (1.0 + plane::cabs(p)) {
                    return Err(OdeError::NonInvertibleOperator(format!(
                        "p = ({:.4}, {:.4})",
                        p.0, p.1
                    )));
                }
                let fprime = dc(&big_f, p)?;
                let etaprime = dc(&eta_f, p)?;
                let num = plane::cadd(plane::cmul(x, fprime), etaprime);
                plane::cdiv(plane::cscale(num, h_re), den)
            };
            let steps = 400usize;
            let mut x = x0;
            let mut p = p0;
            let dp = plane::cscale(plane::csub(p_target, p0), 1.0 / steps as f64);
            for _ in 0..steps {
                let k1 = dxdp(p, x)?;
                let half = plane::cadd(p, plane::cscale(dp, 0.5));
                let k2 = dxdp(half, plane::cadd(x, plane::cmul(k1, plane::cscale(dp, 0.5))))?;
                let k3 = dxdp(half, plane::cadd(x, plane::cmul(k2, plane::cscale(dp, 0.5))))?;
                let k4 = dxdp(plane::cadd(p, dp), plane::cadd(x, plane::cmul(k3, dp)))?;
                let sum = plane::cadd(plane::cadd(k1, k4), plane::cscale(plane::cadd(k2, k3), 2.0));
                x = plane::cadd(x, plane::cmul(plane::cscale(sum, 1.0 / 6.0), dp));
                p = plane::cadd(p, dp);
            }
            Ok(x)
        }
    };

    let plane_x = plane.clone();
    let x_at2 = x_at.clone();
    let x_of_p: EvalFn = Arc::new(move |p: &CdNum| {
        let pc = plane_x.to_c(p, 1e-9)?;
        Ok(plane_x.from_c(x_at2(pc)?))
    });
    let plane_y = plane.clone();
    let (f_y, s_y, eta_y) = (f.clone(), s.clone(), eta.clone());
    let y_of_p: EvalFn = Arc::new(move |p: &CdNum| {
        let pc = plane_y.to_c(p, 1e-9)?;
        let xv = plane_y.from_c(x_at(pc)?);
        let mut y = eta_y.eval(p)?;
        if !f_y.is_identically_zero() {
            y = &y + &(&xv * &f_y.eval(p)?);
        }
        if !s_y.is_identically_zero() {
            y = &y + &(&s_y.eval(p)? * &xv);
        }
        Ok(y)
    });

    let problem = OdeProblem::Lagrange {
        f: f.clone(),
        s: s.clone(),
        eta: eta.clone(),
        h: h.clone(),
    };
    // parameter samples around p0 along the real direction
    let samples: Vec<CdNum> = (0..opts.grid.points)
        .map(|i| {
            let u = crate::sample::halton_point(opts.grid.seed, i as u64, 1)[0];
            &init.p0 + &CdNum::real(level, 0.4 * (u - 0.5))
        })
        .collect();
    let tolerance = ToleranceClass::Quadrature.value();
    let general = {
        let mut sol = Solution {
            representation: Representation::Parametric {
                description: "x(p) from dx/dp = h(xF' + eta')/(p - hF); y = xf(p) + s(p)x + eta(p)"
                    .into(),
            },
            branch_notes: vec![format!(
                "commuting ansatz in the plane with axis {}",
                plane.axis
            )],
            residual: ResidualReport::default(),
            tolerance,
            verified: false,
            eval: SolutionEval::Parametric {
                x_of_p,
                y_of_p,
                samples,
            },
        };
        sol.residual = verify_residual(&problem, &sol, &opts.grid, level, 0.0);
        sol.verified = sol.residual.max <= tolerance && sol.residual.failures.is_empty();
        sol
    };

    // stationary roots of rho(p) = p - h F(p) over a real scan
    let mut stationary = Vec::new();
    let mut roots: Vec<f64> = Vec::new();
    let rho = |t: f64| -> Result<f64, OdeError> {
        let fp = big_f2((t, 0.0))?;
        Ok(t - h_re * fp.0)
    };
    let scan = 200usize;
    let (lo, hi) = (-3.0f64, 3.0f64);
    let mut prev = rho(lo)?;
    for i in 1..=scan {
        let t = lo + (hi - lo) * (i as f64) / (scan as f64);
        let cur = rho(t)?;
        if prev == 0.0 || prev * cur < 0.0 {
            // bisect
            let (mut a, mut b) = (t - (hi - lo) / scan as f64, t);
            for _ in 0..80 {
                let mid = 0.5 * (a + b);
                let v = rho(mid)?;
                if v == 0.0 {
                    a = mid;
                    b = mid;
                    break;
                }
                if rho(a)? * v < 0.0 {
                    b = mid;
                } else {
                    a = mid;
                }
            }
            let root = 0.5 * (a + b);
            if roots.iter().all(|r| (r - root).abs() > 1e-6) {
                roots.push(root);
            }
        }
        prev = cur;
    }
    for root in roots {
        let p_star = CdNum::real(level, root);
        let (f_r, s_r, eta_r) = (f.clone(), s.clone(), eta.clone());
        let p_star_c = p_star.clone();
        let eval: EvalFn = Arc::new(move |x: &CdNum| {
            let mut y = eta_r.eval(&p_star_c)?;
            if !f_r.is_identically_zero() {
                y = &y + &(x * &f_r.eval(&p_star_c)?);
            }
            if !s_r.is_identically_zero() {
                y = &y + &(&s_r.eval(&p_star_c)? * x);
            }
            Ok(y)
        });
        let mut sol = Solution {
            representation: Representation::ClosedForm(format!(
                "y = x f({root}) + s({root}) x + eta({root}) (stationary p)"
            )),
            branch_notes: vec![format!("stationary root p = {root}")],
            residual: ResidualReport::default(),
            tolerance,
            verified: false,
            eval: SolutionEval::Point(eval),
        };
        sol.residual = verify_residual(&problem, &sol, &opts.grid, level, 0.0);
        sol.verified = sol.residual.max <= tolerance && sol.residual.failures.is_empty();
        stationary.push(sol);
    }

    Ok(LagrangeSolution {
        general,
        stationary,
    })
}

/// Verify a user-supplied point solution against a problem description on a
/// fresh grid; used by the CLI `check` command and the example tests.
pub fn check_solution(
    problem: &OdeProblem,
    y: &EvalFn,
    grid: &GridSpec,
    level: u8,
    alpha0: f64,
) -> ResidualReport {
    let pts = grid.half_space(level, alpha0 + 0.05);
    residual_on_points(problem, y, &pts)
}
