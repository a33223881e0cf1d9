//! Numerical constructions of rotationally symmetric translating solitons
//! to mean curvature flow.
//!
//! A graphical translator `u(x) = U(|x|)` on `ℝⁿ` is determined by the
//! radial slope profile `φ = U'`, which solves the singular ordinary
//! differential equation
//!
//! ```text
//! φ'(r) = (1 + φ²(r)) · (1 − (n−1)/r · φ(r)),    r > 0,
//! ```
//!
//! with `φ(0) = 0` and `φ(r)/r → 1/n` as `r → 0`. The `(n−1)φ/r` term makes
//! the origin singular, and this crate computes the profile in five
//! independent ways, each sidestepping the singularity differently:
//!
//! * [`series`] — exact rational power-series coefficients `a_l` with
//!   `φ(r) = Σ a_l (r/n)^(2l+1)`, including decay bounds and
//!   convergence-radius estimation;
//! * [`shooting`] — the substitution `ψ(r) = φ(e⁻ʳ)` maps `r = 0` to
//!   infinity; bisection on `ψ(0)` finds the unique globally bounded
//!   trajectory;
//! * [`approx`] — regularised problems (`r ↦ r + ε`) and truncated-domain
//!   problems (start at `r = 1/k`), with barrier and monotonicity checks;
//! * [`picard`] — a fixed-point iteration contracting in the weighted norm
//!   `sup r⁻ᵖ|u(r)|`, seeded by a polynomial approximate solution.
//!
//! The [`validate`] module cross-compares the resulting profiles, checks
//! ODE residuals, and verifies the origin-regularity limits that make the
//! full graph `u` a `C²` solution.

pub mod approx;
pub mod error;
pub mod ode;
pub mod picard;
pub mod profile;
pub mod report;
pub mod series;
pub mod shooting;
pub mod validate;

pub use error::{Error, Result};
pub use ode::{integrate, IntegratorConfig, Termination, Trajectory};
pub use profile::{Dimension, MethodParams, MethodTag, RadialProfile};
pub use series::{CoefficientTable, Rational};
