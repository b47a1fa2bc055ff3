//! Closed-form solvers for the differential-equation classes of the octonion
//! calculus: every produced solution carries a residual report from a seeded
//! sample grid, and nothing is trusted on derivation alone.
//!
//! Boundary data lives on the hyperplane `Re x = alpha0`; arbitrary solution
//! branches are functions of the imaginary part `x° = Im(x)` and enter
//! exclusively through [`BoundaryData`].

mod clairaut;
mod first_order;
mod higher;
mod omega;
pub mod plane;
mod residual;

pub use clairaut::{
    check_solution, quadratic_derivative_roots, quadratic_root_residual, solve_clairaut,
    solve_lagrange, ClairautSolution, LagrangeInit, LagrangeSolution,
};
pub use first_order::{
    solve_bernoulli, solve_generalized_bernoulli, solve_homogeneous_ratio, solve_linear,
    solve_separated, solve_simplest, HomogeneousInit, HomogeneousSide,
};
pub use higher::{
    collapse_real_combination, collapse_probe_points, reduce_order, solve_nth_order_iterated,
    solve_reduced, HigherOrderShape, ReduceStrategy, Reduction, SecondOrderBoundary, SubProblem,
};
pub use omega::{solve_omega, OmegaMap};
pub use residual::{dir_derivative, second_derivative_re, verify_residual};

use std::sync::Arc;

use thiserror::Error;

use crate::algebra::{AlgebraError, CdNum};
use crate::calculus::{CalculusError, SeriesFn};
use crate::functions::FunctionError;
use crate::phrase::{Phrase, PhraseError};
use crate::sample;
use crate::series::SeriesError;

#[derive(Debug, Error)]
pub enum OdeError {
    #[error("vector field vanishes at the expansion point")]
    ZeroVectorField,
    #[error("coefficient must be real-valued, found imaginary part of norm {0:.3e}")]
    NonRealCoefficient(f64),
    #[error("Newton iteration did not converge ({iterations} iterations, residual {residual:.3e})")]
    NewtonNonConvergent { iterations: usize, residual: f64 },
    #[error("singular Jacobian in Newton step")]
    SingularJacobian,
    #[error("degenerate denominator: f(u) - u h vanishes along the solution")]
    DegenerateDenominator,
    #[error("branch undefined: {0}")]
    BranchUndefined(String),
    #[error("bracket operator is not invertible near p = {0}")]
    NonInvertibleOperator(String),
    #[error("problem does not match the strategy shape: {0}")]
    ShapeMismatch(String),
    #[error("evaluation failure: {0}")]
    EvaluationFailure(String),
    #[error("vector field outside the supported catalog: {0}")]
    UnsupportedVectorField(String),
    #[error("commuting ansatz violated: {0}")]
    AnsatzViolated(String),
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
    #[error(transparent)]
    Phrase(#[from] PhraseError),
    #[error(transparent)]
    Function(#[from] FunctionError),
    #[error(transparent)]
    Calculus(#[from] CalculusError),
    #[error(transparent)]
    Series(#[from] SeriesError),
}

pub type EvalFn = Arc<dyn Fn(&CdNum) -> Result<CdNum, OdeError> + Send + Sync>;

/// An ingredient function: constant, symbolic phrase, truncated series, or an
/// opaque callable.
#[derive(Clone)]
pub enum Evaluatable {
    Const(CdNum),
    Phrase(Phrase),
    Series(SeriesFn),
    Closure(EvalFn),
}

impl std::fmt::Debug for Evaluatable {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Evaluatable::Const(c) => write!(f, "Const({c})"),
            Evaluatable::Phrase(p) => write!(f, "Phrase({p})"),
            Evaluatable::Series(s) => write!(f, "Series(order {})", s.truncation_order()),
            Evaluatable::Closure(_) => write!(f, "Closure"),
        }
    }
}

impl Evaluatable {
    pub fn real(v: f64) -> Evaluatable {
        Evaluatable::Const(CdNum::real(0, v))
    }

    pub fn closure(
        f: impl Fn(&CdNum) -> Result<CdNum, OdeError> + Send + Sync + 'static,
    ) -> Evaluatable {
        Evaluatable::Closure(Arc::new(f))
    }

    pub fn eval(&self, x: &CdNum) -> Result<CdNum, OdeError> {
        match self {
            Evaluatable::Const(c) => Ok(c.promote(c.level().max(x.level()))),
            Evaluatable::Phrase(p) => Ok(p.eval(x)),
            Evaluatable::Series(s) => Ok(s.eval(x)?),
            Evaluatable::Closure(f) => f(x),
        }
    }

    pub fn as_phrase(&self) -> Option<&Phrase> {
        match self {
            Evaluatable::Phrase(p) => Some(p),
            _ => None,
        }
    }

    pub fn as_const(&self) -> Option<&CdNum> {
        match self {
            Evaluatable::Const(c) => Some(c),
            _ => None,
        }
    }

    pub fn is_identically_zero(&self) -> bool {
        match self {
            Evaluatable::Const(c) => c.norm_sq() == 0.0,
            Evaluatable::Phrase(p) => p.is_zero(),
            _ => false,
        }
    }

    /// Sampled realness check over a ball at the given level.
    pub fn check_real_valued(&self, level: u8, tol: f64) -> Result<(), OdeError> {
        for i in 0..12u64 {
            let x = sample::cd_point(29, i, level, &CdNum::real(level, 0.5), 1.0);
            let v = self.eval(&x)?;
            let imn = v.im().norm();
            if imn > tol * (1.0 + v.norm()) {
                return Err(OdeError::NonRealCoefficient(imn));
            }
        }
        Ok(())
    }

    /// Realness sampled on the real axis only, for the real-restricted
    /// solver routes.
    pub fn check_real_on_axis(&self, level: u8, tol: f64) -> Result<(), OdeError> {
        for i in 0..12u64 {
            let t = sample::halton_point(31, i, 1)[0] * 2.0 - 0.5;
            let v = self.eval(&CdNum::real(level, t))?;
            let imn = v.im().norm();
            if imn > tol * (1.0 + v.norm()) {
                return Err(OdeError::NonRealCoefficient(imn));
            }
        }
        Ok(())
    }
}

/// Cauchy data on the hyperplane `Re x = alpha0`: `y(x)|_{Re x = alpha0} =
/// eta(x°)` with `x°` the imaginary part.
#[derive(Clone, Debug)]
pub struct BoundaryData {
    pub alpha0: f64,
    pub eta: Evaluatable,
}

impl BoundaryData {
    pub fn constant(alpha0: f64, eta: CdNum) -> BoundaryData {
        BoundaryData {
            alpha0,
            eta: Evaluatable::Const(eta),
        }
    }

    pub fn zero(alpha0: f64, level: u8) -> BoundaryData {
        Self::constant(alpha0, CdNum::zero(level))
    }

    /// The projection of x onto the hyperplane along the real axis,
    /// written `0x` in the n-th order solver.
    pub fn base_point(&self, x: &CdNum) -> CdNum {
        let mut b = x.im();
        b.set_coeff(0, self.alpha0);
        b
    }

    pub fn eta_at(&self, x: &CdNum) -> Result<CdNum, OdeError> {
        self.eta.eval(&x.im())
    }
}

/// Deterministic residual-grid description; identical specs give identical
/// grids.
#[derive(Clone, Debug, PartialEq)]
pub struct GridSpec {
    pub points: usize,
    pub seed: u64,
    pub radius: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            points: 50,
            seed: 1,
            radius: 1.0,
        }
    }
}

impl GridSpec {
    /// Points in the half-space `Re x >= alpha0`.
    pub fn half_space(&self, level: u8, alpha0: f64) -> Vec<CdNum> {
        (0..self.points)
            .map(|i| sample::half_space_point(self.seed, i as u64, level, alpha0, self.radius))
            .collect()
    }

    /// Points restricted to the real axis in `[alpha0, alpha0 + radius]`.
    pub fn real_axis(&self, level: u8, alpha0: f64) -> Vec<CdNum> {
        (0..self.points)
            .map(|i| {
                let u = sample::halton_point(self.seed, i as u64, 1)[0];
                CdNum::real(level, alpha0 + self.radius * u)
            })
            .collect()
    }
}

/// Tolerance classes declared per solver family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ToleranceClass {
    ClosedForm,
    Quadrature,
    Newton,
}

impl ToleranceClass {
    pub fn value(self) -> f64 {
        match self {
            ToleranceClass::ClosedForm => 1e-8,
            ToleranceClass::Quadrature => 1e-7,
            ToleranceClass::Newton => 1e-6,
        }
    }
}

/// Per-point residuals of the original equation on the sample grid.
#[derive(Debug, Clone, Default)]
pub struct ResidualReport {
    pub points: Vec<CdNum>,
    pub residuals: Vec<f64>,
    pub max: f64,
    pub mean: f64,
    /// Points where evaluation failed, with the reason; not fatal.
    pub failures: Vec<(usize, String)>,
}

impl ResidualReport {
    pub fn from_values(points: Vec<CdNum>, residuals: Vec<f64>, failures: Vec<(usize, String)>) -> Self {
        let max = residuals.iter().copied().fold(0.0, f64::max);
        let mean = if residuals.is_empty() {
            0.0
        } else {
            residuals.iter().sum::<f64>() / residuals.len() as f64
        };
        ResidualReport {
            points,
            residuals,
            max,
            mean,
            failures,
        }
    }
}

/// How a produced solution is represented.
#[derive(Clone)]
pub enum Representation {
    /// Printable expression together with its meaning.
    ClosedForm(String),
    /// Evaluation goes through quadrature/Newton machinery per point.
    GridBacked(String),
    Series(SeriesFn),
    /// Parameter curve `(x(p), y(p))`.
    Parametric { description: String },
}

impl std::fmt::Debug for Representation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Representation::ClosedForm(s) => write!(f, "ClosedForm({s})"),
            Representation::GridBacked(s) => write!(f, "GridBacked({s})"),
            Representation::Series(s) => write!(f, "Series(order {})", s.truncation_order()),
            Representation::Parametric { description } => write!(f, "Parametric({description})"),
        }
    }
}

impl Representation {
    pub fn printable(&self) -> String {
        match self {
            Representation::ClosedForm(s) => s.clone(),
            Representation::GridBacked(_) => "grid-backed".into(),
            Representation::Series(_) => "series".into(),
            Representation::Parametric { .. } => "parametric".into(),
        }
    }
}

/// How to evaluate a solution.
#[derive(Clone)]
pub enum SolutionEval {
    /// `y(x)` directly.
    Point(EvalFn),
    /// A parameter curve; `samples` are parameter values suitable for
    /// residual checks.
    Parametric {
        x_of_p: EvalFn,
        y_of_p: EvalFn,
        samples: Vec<CdNum>,
    },
}

/// A solver output: representation, branch bookkeeping, and the residual
/// verdict. `verified` is false whenever the residual exceeded the declared
/// tolerance; such solutions are returned, flagged, never trusted silently.
#[derive(Clone)]
pub struct Solution {
    pub representation: Representation,
    pub branch_notes: Vec<String>,
    pub residual: ResidualReport,
    pub tolerance: f64,
    pub verified: bool,
    pub eval: SolutionEval,
}

impl std::fmt::Debug for Solution {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Solution")
            .field("representation", &self.representation)
            .field("max_residual", &self.residual.max)
            .field("tolerance", &self.tolerance)
            .field("verified", &self.verified)
            .finish()
    }
}

impl Solution {
    pub fn eval(&self, x: &CdNum) -> Result<CdNum, OdeError> {
        match &self.eval {
            SolutionEval::Point(f) => f(x),
            SolutionEval::Parametric { .. } => Err(OdeError::EvaluationFailure(
                "parametric solution has no direct point evaluation".into(),
            )),
        }
    }
}

/// Problem descriptions used by `verify_residual` to re-evaluate the original
/// equation; each solver builds the matching variant.
#[derive(Clone, Debug)]
pub enum OdeProblem {
    /// `(dy/dx).h = f(x)`
    Simplest { f: Evaluatable, h: Evaluatable },
    /// `(dy/dx).h + b(x) y = q(x)`, b real-valued
    Linear {
        b: Evaluatable,
        q: Evaluatable,
        h: Evaluatable,
    },
    /// `f(y) (dy/dx).h + s(x) = 0`, h real-valued
    Separated {
        f: Evaluatable,
        s: Evaluatable,
        h: Evaluatable,
    },
    /// `(dy/dx).h = f(y x^{-1})` (right) or `f(x^{-1} y)` (left)
    HomogeneousRatio {
        f: Evaluatable,
        h: CdNum,
        side: HomogeneousSide,
    },
    /// `(dy/dx).h + y p(x) = y^m s(x)`
    Bernoulli {
        p: Evaluatable,
        s: Evaluatable,
        m: f64,
        h: Evaluatable,
    },
    /// `f(y) (dy/dx).h + y^k p(x) = y^m s(x)`
    GeneralizedBernoulli {
        f: Evaluatable,
        p: Evaluatable,
        s: Evaluatable,
        k: f64,
        m: f64,
        h: Evaluatable,
    },
    /// `y = x p + eta(p)`, `p = (dy/dx).1`
    Clairaut { eta: Evaluatable },
    /// `y = x f(p) + s(p) x + eta(p)`, `p = (dy/dx).h`
    Lagrange {
        f: Evaluatable,
        s: Evaluatable,
        eta: Evaluatable,
        h: CdNum,
    },
    /// `d^n y/ds^n = g(x)` after dividing out real constant directions
    NthOrder {
        n: u32,
        g: Evaluatable,
        scale: f64,
        etas: Vec<Evaluatable>,
    },
}

/// Options shared by all solvers.
#[derive(Clone, Debug)]
pub struct SolveOpts {
    pub level: u8,
    pub grid: GridSpec,
    pub tol: f64,
}

impl SolveOpts {
    pub fn level(level: u8) -> SolveOpts {
        SolveOpts {
            level,
            grid: GridSpec::default(),
            tol: crate::algebra::DEFAULT_TOLERANCE,
        }
    }
}
