//! Hypercomplex computer algebra over the Cayley-Dickson construction:
//! quaternion/octonion/sedenion arithmetic, elementary analytic functions
//! with branch tracking, symbolic phrase calculus, the non-commutative line
//! integral, and residual-verified closed-form ODE solvers.

pub mod algebra;
pub mod calculus;
pub mod functions;
pub mod phrase;
pub mod odes;
pub mod sample;
pub mod series;

pub use algebra::{basis_product, AlgebraError, CdNum, SignedBasis, DEFAULT_TOLERANCE, MAX_LEVEL};
pub use calculus::{line_integral, Form1, IntegralMode, Integrand, LinOpR, Path, SeriesFn};
pub use functions::{cd_exp, cd_ln_principal, cd_pow_real, polar_decompose, sqrt_set, RootSet};
pub use phrase::{OperatorPhrase, Phrase, Wrt};
