//! Problem-file loading and solver dispatch. The JSON schema:
//!
//! ```json
//! {
//!   "algebra_level": 2,
//!   "kind": "linear",
//!   "ingredients": { "b": "1", "q": "e1*z", "h": "1" },
//!   "scalars": { "m": 2.0 },
//!   "boundary": { "alpha0": 0.0, "eta": "1" },
//!   "grid": { "points": 50, "seed": 1, "radius": 1.0 }
//! }
//! ```
//!
//! Ingredient values are expressions in the shared grammar; which names a
//! kind consumes is documented per solver in the README.

use std::collections::BTreeMap;

use serde::Deserialize;
use thiserror::Error;

use octode_core::algebra::CdNum;
use octode_core::odes::{
    check_solution, quadratic_derivative_roots, quadratic_root_residual, solve_bernoulli,
    solve_clairaut, solve_generalized_bernoulli, solve_homogeneous_ratio, solve_lagrange,
    solve_linear, solve_nth_order_iterated, solve_separated, solve_simplest, BoundaryData,
    Evaluatable, GridSpec, HomogeneousInit, HomogeneousSide, LagrangeInit, OdeError, OdeProblem,
    Solution, SolveOpts, ToleranceClass,
};
use octode_core::series::{cauchy_series_solve, CauchyProblem, RhsExpr, SeriesError};

use crate::parser::{parse_expression, parse_point, SyntaxError};
use crate::report::{fmt_f64, Report};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Syntax(#[from] SyntaxError),
    #[error("{0}")]
    Ode(#[from] OdeError),
    #[error("{0}")]
    Series(#[from] SeriesError),
    #[error("problem file: {0}")]
    BadProblem(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

fn default_points() -> usize {
    50
}
fn default_seed() -> u64 {
    1
}
fn default_radius() -> f64 {
    1.0
}

#[derive(Debug, Deserialize, Clone)]
pub struct GridFile {
    #[serde(default = "default_points")]
    pub points: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_radius")]
    pub radius: f64,
}

impl Default for GridFile {
    fn default() -> Self {
        GridFile {
            points: default_points(),
            seed: default_seed(),
            radius: default_radius(),
        }
    }
}

#[derive(Debug, Deserialize, Clone)]
pub struct BoundaryFile {
    pub alpha0: f64,
    pub eta: String,
}

#[derive(Debug, Deserialize)]
pub struct ProblemFile {
    pub algebra_level: u8,
    pub kind: String,
    #[serde(default)]
    pub ingredients: BTreeMap<String, String>,
    #[serde(default)]
    pub scalars: BTreeMap<String, f64>,
    #[serde(default)]
    pub boundary: Option<BoundaryFile>,
    #[serde(default)]
    pub grid: GridFile,
    /// Homogeneous-ratio side: "right" (y = u x) or "left" (y = x u).
    #[serde(default)]
    pub side: Option<String>,
}

impl ProblemFile {
    pub fn load(path: &str) -> Result<ProblemFile, CliError> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    fn ingredient(&self, name: &str) -> Result<Evaluatable, CliError> {
        let src = self
            .ingredients
            .get(name)
            .ok_or_else(|| CliError::BadProblem(format!("missing ingredient `{name}`")))?;
        Ok(Evaluatable::Phrase(parse_expression(src, self.algebra_level)?))
    }

    fn ingredient_point(&self, name: &str) -> Result<CdNum, CliError> {
        let src = self
            .ingredients
            .get(name)
            .ok_or_else(|| CliError::BadProblem(format!("missing ingredient `{name}`")))?;
        Ok(parse_point(src, self.algebra_level)?)
    }

    fn scalar(&self, name: &str) -> Result<f64, CliError> {
        self.scalars
            .get(name)
            .copied()
            .ok_or_else(|| CliError::BadProblem(format!("missing scalar `{name}`")))
    }

    fn boundary(&self) -> Result<BoundaryData, CliError> {
        match &self.boundary {
            Some(b) => Ok(BoundaryData {
                alpha0: b.alpha0,
                eta: Evaluatable::Phrase(parse_expression(&b.eta, self.algebra_level)?),
            }),
            None => Ok(BoundaryData::zero(0.0, self.algebra_level)),
        }
    }

    fn opts(&self, tol: f64) -> SolveOpts {
        SolveOpts {
            level: self.algebra_level,
            grid: GridSpec {
                points: self.grid.points,
                seed: self.grid.seed,
                radius: self.grid.radius,
            },
            tol,
        }
    }

    /// Build the residual-checkable problem description (for `check`).
    pub fn ode_problem(&self) -> Result<(OdeProblem, f64), CliError> {
        let p = match self.kind.as_str() {
            "simplest" => (
                OdeProblem::Simplest {
                    f: self.ingredient("f")?,
                    h: self.ingredient("h")?,
                },
                ToleranceClass::Quadrature.value(),
            ),
            "linear" => (
                OdeProblem::Linear {
                    b: self.ingredient("b")?,
                    q: self.ingredient("q")?,
                    h: self.ingredient("h")?,
                },
                ToleranceClass::Quadrature.value(),
            ),
            "separated" => (
                OdeProblem::Separated {
                    f: self.ingredient("f")?,
                    s: self.ingredient("s")?,
                    h: self.ingredient("h")?,
                },
                ToleranceClass::Newton.value(),
            ),
            "bernoulli" => (
                OdeProblem::Bernoulli {
                    p: self.ingredient("p")?,
                    s: self.ingredient("s")?,
                    m: self.scalar("m")?,
                    h: self.ingredient("h")?,
                },
                ToleranceClass::Quadrature.value(),
            ),
            "homogeneous_ratio" => {
                let side = match self.side.as_deref() {
                    None | Some("right") => HomogeneousSide::Right,
                    Some("left") => HomogeneousSide::Left,
                    Some(other) => {
                        return Err(CliError::BadProblem(format!("bad side `{other}`")))
                    }
                };
                (
                    OdeProblem::HomogeneousRatio {
                        f: self.ingredient("f")?,
                        h: self.ingredient_point("h")?,
                        side,
                    },
                    ToleranceClass::Newton.value(),
                )
            }
            "generalized_bernoulli" => (
                OdeProblem::GeneralizedBernoulli {
                    f: self.ingredient("f")?,
                    p: self.ingredient("p")?,
                    s: self.ingredient("s")?,
                    k: self.scalar("k")?,
                    m: self.scalar("m")?,
                    h: self.ingredient("h")?,
                },
                ToleranceClass::Newton.value(),
            ),
            "clairaut" => (
                OdeProblem::Clairaut {
                    eta: self.ingredient("eta")?,
                },
                ToleranceClass::ClosedForm.value(),
            ),
            "lagrange" => (
                OdeProblem::Lagrange {
                    f: self.ingredient("f")?,
                    s: self.ingredient("s")?,
                    eta: self.ingredient("eta")?,
                    h: self.ingredient_point("h")?,
                },
                ToleranceClass::Quadrature.value(),
            ),
            other => {
                return Err(CliError::BadProblem(format!(
                    "kind `{other}` has no residual-check form"
                )))
            }
        };
        Ok(p)
    }

    /// Solve and report.
    pub fn solve(&self, tol: f64) -> Result<Report, CliError> {
        let opts = self.opts(tol);
        let sol = match self.kind.as_str() {
            "simplest" => solve_simplest(
                &self.ingredient("f")?,
                &self.ingredient("h")?,
                &self.boundary()?,
                &opts,
            )?,
            "linear" => solve_linear(
                &self.ingredient("b")?,
                &self.ingredient("q")?,
                &self.ingredient("h")?,
                &self.boundary()?,
                &opts,
            )?,
            "separated" => {
                let guess = match self.ingredients.get("guess") {
                    Some(src) => parse_point(src, self.algebra_level)?,
                    None => CdNum::zero(self.algebra_level),
                };
                solve_separated(
                    &self.ingredient("f")?,
                    &self.ingredient("s")?,
                    &self.ingredient("h")?,
                    &self.boundary()?,
                    &guess,
                    &opts,
                )?
            }
            "homogeneous_ratio" => {
                let side = match self.side.as_deref() {
                    None | Some("right") => HomogeneousSide::Right,
                    Some("left") => HomogeneousSide::Left,
                    Some(other) => {
                        return Err(CliError::BadProblem(format!("bad side `{other}`")))
                    }
                };
                let init = HomogeneousInit {
                    x0: self.ingredient_point("x0")?,
                    y0: self.ingredient_point("y0")?,
                };
                solve_homogeneous_ratio(
                    &self.ingredient("f")?,
                    &self.ingredient_point("h")?,
                    side,
                    &init,
                    &opts,
                )?
            }
            "bernoulli" => solve_bernoulli(
                &self.ingredient("p")?,
                &self.ingredient("s")?,
                self.scalar("m")?,
                &self.ingredient("h")?,
                &self.boundary()?,
                &opts,
            )?,
            "generalized_bernoulli" => solve_generalized_bernoulli(
                &self.ingredient("f")?,
                &self.ingredient("p")?,
                &self.ingredient("s")?,
                self.scalar("k")?,
                self.scalar("m")?,
                &self.ingredient("h")?,
                &self.boundary()?,
                &opts,
            )?,
            "clairaut" => {
                let out = solve_clairaut(&self.ingredient("eta")?, &self.ingredient("phi")?, &opts)?;
                return Ok(clairaut_report(&out));
            }
            "lagrange" => {
                let init = LagrangeInit {
                    p0: self.ingredient_point("p0")?,
                    x0: self.ingredient_point("x0")?,
                };
                let out = solve_lagrange(
                    &self.ingredient("f")?,
                    &self.ingredient("s")?,
                    &self.ingredient("eta")?,
                    &self.ingredient_point("h")?,
                    true,
                    &init,
                    &opts,
                )?;
                return Ok(lagrange_report(&out));
            }
            "nth_order" => {
                let n = self.scalar("n")? as u32;
                let mut hs = Vec::new();
                let mut etas = Vec::new();
                for k in 0..n {
                    hs.push(Evaluatable::Const(
                        self.ingredient_point(&format!("h{}", k + 1))?,
                    ));
                    etas.push(self.ingredient(&format!("eta{k}"))?);
                }
                let alpha0 = self.boundary.as_ref().map(|b| b.alpha0).unwrap_or(0.0);
                solve_nth_order_iterated(n, &self.ingredient("g")?, &hs, &etas, alpha0, &opts)?
            }
            "quadratic_roots" => {
                let b = self.ingredient_point("b")?;
                let c = self.ingredient_point("c")?;
                return Ok(quadratic_report(&b, &c, self.algebra_level, tol));
            }
            "series_first_order" => return self.solve_series(None, tol),
            other => return Err(CliError::BadProblem(format!("unknown kind `{other}`"))),
        };
        Ok(solution_report(&sol))
    }

    /// The series solver entry (`series` subcommand); `order` overrides the
    /// scalar from the file.
    pub fn solve_series(&self, order: Option<usize>, _tol: f64) -> Result<Report, CliError> {
        if self.kind != "series_first_order" {
            return Err(CliError::BadProblem(format!(
                "kind `{}` is not a series problem",
                self.kind
            )));
        }
        let order = order.or_else(|| self.scalars.get("order").map(|v| *v as usize)).unwrap_or(12);
        let level = self.algebra_level;
        // du/dt = f(u) + g(t); both parts optional
        let f_u = self
            .ingredients
            .get("f")
            .map(|s| parse_expression(s, level))
            .transpose()?;
        let g_t = self
            .ingredients
            .get("g")
            .map(|s| parse_expression(s, level))
            .transpose()?;
        if f_u.is_none() && g_t.is_none() {
            return Err(CliError::BadProblem(
                "series problem needs ingredient `f` (of the unknown) or `g` (of t)".into(),
            ));
        }
        let mut rhs: Option<RhsExpr> = None;
        let mut push = |e: RhsExpr| {
            rhs = Some(match rhs.take() {
                None => e,
                Some(acc) => RhsExpr::add(acc, e),
            });
        };
        if let Some(p) = &f_u {
            push(phrase_to_rhs(p, RhsExpr::U(0))?);
        }
        if let Some(p) = &g_t {
            push(phrase_to_rhs(p, RhsExpr::T)?);
        }
        let (t0, initial) = match &self.boundary {
            Some(b) => (
                CdNum::real(level, b.alpha0),
                parse_point(&b.eta, level)?,
            ),
            None => (CdNum::zero(level), CdNum::zero(level)),
        };
        let prob = CauchyProblem {
            level,
            rhs: vec![rhs.expect("at least one part present")],
            initial: vec![initial],
            t0,
        };
        let sol = cauchy_series_solve(&prob, order)?;
        let coeffs: Vec<String> = sol.series[0]
            .coeffs()
            .iter()
            .take(8)
            .map(|c| c.to_string())
            .collect();
        let mut notes = vec![format!(
            "radius estimate {}",
            fmt_f64(sol.diagnostics.radius_estimate)
        )];
        if let Some(t) = sol.diagnostics.majorant_tail {
            notes.push(format!("majorant tail bound {}", fmt_f64(t)));
        }
        Ok(Report {
            max_residual: sol.diagnostics.max_residual,
            mean_residual: sol.diagnostics.max_residual,
            tolerance: 1e-7,
            grid_points: 8,
            solution: format!("series [{}; ...] about {}", coeffs.join("; "), prob.t0),
            branch_notes: notes,
        })
    }

    /// Verify a user-supplied solution expression against this problem.
    pub fn check(&self, solution_src: &str, tol: f64) -> Result<Report, CliError> {
        let (problem, tolerance) = self.ode_problem()?;
        let phrase = parse_expression(solution_src, self.algebra_level)?;
        let eval: octode_core::odes::EvalFn =
            std::sync::Arc::new(move |x: &CdNum| Ok(phrase.eval(x)));
        let opts = self.opts(tol);
        let alpha0 = self.boundary.as_ref().map(|b| b.alpha0).unwrap_or(0.0);
        let report = check_solution(&problem, &eval, &opts.grid, self.algebra_level, alpha0);
        Ok(Report {
            max_residual: report.max,
            mean_residual: report.mean,
            tolerance,
            grid_points: report.points.len(),
            solution: solution_src.to_string(),
            branch_notes: report
                .failures
                .iter()
                .map(|(i, e)| format!("point {i}: {e}"))
                .collect(),
        })
    }
}

fn phrase_to_rhs(
    p: &octode_core::phrase::Phrase,
    leaf: RhsExpr,
) -> Result<RhsExpr, CliError> {
    use octode_core::phrase::Tree;
    fn tree(t: &Tree, leaf: &RhsExpr) -> Result<RhsExpr, CliError> {
        Ok(match t {
            Tree::Var => leaf.clone(),
            Tree::Const(c) => RhsExpr::Const(c.clone()),
            Tree::Mul(l, r) => RhsExpr::mul(tree(l, leaf)?, tree(r, leaf)?),
            _ => {
                return Err(CliError::BadProblem(
                    "series right-hand sides must be plain phrases in the unknown".into(),
                ))
            }
        })
    }
    let mut acc: Option<RhsExpr> = None;
    for t in p.terms() {
        let r = tree(t, &leaf)?;
        acc = Some(match acc {
            None => r,
            Some(a) => RhsExpr::add(a, r),
        });
    }
    Ok(acc.unwrap_or(RhsExpr::Const(CdNum::zero(0))))
}

pub fn solution_report(sol: &Solution) -> Report {
    Report {
        max_residual: sol.residual.max,
        mean_residual: sol.residual.mean,
        tolerance: sol.tolerance,
        grid_points: sol.residual.points.len(),
        solution: sol.representation.printable(),
        branch_notes: sol.branch_notes.clone(),
    }
}

fn clairaut_report(out: &octode_core::odes::ClairautSolution) -> Report {
    let max = out.general.residual.max.max(out.singular.residual.max);
    let mean = 0.5 * (out.general.residual.mean + out.singular.residual.mean);
    let mut notes = out.general.branch_notes.clone();
    notes.extend(out.singular.branch_notes.clone());
    notes.push(format!(
        "singular residual {}",
        fmt_f64(out.singular.residual.max)
    ));
    Report {
        max_residual: max,
        mean_residual: mean,
        tolerance: out.general.tolerance,
        grid_points: out.general.residual.points.len() + out.singular.residual.points.len(),
        solution: format!(
            "general: {}; singular: {}",
            out.general.representation.printable(),
            out.singular.representation.printable()
        ),
        branch_notes: notes,
    }
}

fn lagrange_report(out: &octode_core::odes::LagrangeSolution) -> Report {
    let mut max = out.general.residual.max;
    let mut notes = out.general.branch_notes.clone();
    for s in &out.stationary {
        max = max.max(s.residual.max);
        notes.push(format!(
            "stationary solution `{}` residual {}",
            s.representation.printable(),
            fmt_f64(s.residual.max)
        ));
    }
    Report {
        max_residual: max,
        mean_residual: out.general.residual.mean,
        tolerance: out.general.tolerance,
        grid_points: out.general.residual.points.len(),
        solution: out.general.representation.printable(),
        branch_notes: notes,
    }
}

fn quadratic_report(b: &CdNum, c: &CdNum, level: u8, tol: f64) -> Report {
    let roots = quadratic_derivative_roots(b, c, tol);
    let samples = roots.sample_points(100, level);
    let mut max = 0.0f64;
    let mut sum = 0.0f64;
    for lam in &samples {
        let r = quadratic_root_residual(b, c, lam);
        max = max.max(r);
        sum += r;
    }
    let solution = match &roots {
        octode_core::functions::RootSet::PointPair(pts) => {
            let strs: Vec<String> = pts.iter().map(|p| p.to_string()).collect();
            format!("roots: {}", strs.join(" and "))
        }
        octode_core::functions::RootSet::Sphere { center, radius } => format!(
            "root sphere: center {center}, radius {radius}"
        ),
    };
    Report {
        max_residual: max,
        mean_residual: if samples.is_empty() { 0.0 } else { sum / samples.len() as f64 },
        tolerance: 1e-8,
        grid_points: samples.len(),
        solution,
        branch_notes: vec![],
    }
}
