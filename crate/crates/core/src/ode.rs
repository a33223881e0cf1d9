//! Scalar right-hand sides of the profile equations and a generic adaptive
//! explicit integrator with blow-up detection.
//!
//! Three right-hand sides appear throughout the crate:
//!
//! * [`phi_rhs`] — the singular profile equation
//!   `φ' = (1+φ²)(1 − (n−1)φ/r)`, valid for `r > 0`;
//! * [`psi_rhs`] — its substitution `ψ(r) = φ(e⁻ʳ)`, which is regular on
//!   all of `ℝ`: `ψ' = (1+ψ²)((n−1)ψ − e⁻ʳ)`;
//! * [`phi_eps_rhs`] — the regularised equation with `r` replaced by
//!   `r + ε` in the singular term.
//!
//! [`integrate`] drives any scalar right-hand side with an embedded
//! Dormand–Prince 5(4) pair and PI step-size control. Trajectories that
//! leave `|y| ≤ blowup_threshold` terminate with a signed blow-up
//! classification instead of an error; the solver modules rely on this to
//! classify shots.

use crate::error::{Error, Result};
use crate::profile::Dimension;

/// Tolerances and guards for the adaptive integrator.
#[derive(Debug, Clone)]
pub struct IntegratorConfig {
    /// Absolute component of the per-step error tolerance.
    pub abs_tol: f64,
    /// Relative component of the per-step error tolerance.
    pub rel_tol: f64,
    /// Largest accepted step (also bounds interpolation error for
    /// consumers that sample the returned grid).
    pub max_step: f64,
    /// Smallest attemptable step; needing less terminates the trajectory
    /// with [`Termination::StepUnderflow`].
    pub min_step: f64,
    /// `|y|` beyond which the trajectory is classified as blown up.
    pub blowup_threshold: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            abs_tol: 1e-10,
            rel_tol: 1e-10,
            max_step: 0.1,
            // small enough to chase cubic blow-ups to |y| = 1e6 before the
            // controller gives up
            min_step: 1e-15,
            blowup_threshold: 1e6,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tol > 0.0) || !(self.rel_tol > 0.0) {
            return Err(Error::Config("tolerances must be positive".into()));
        }
        if !(self.min_step > 0.0) || self.min_step > self.max_step {
            return Err(Error::Config(
                "need 0 < min_step <= max_step".into(),
            ));
        }
        if !(self.blowup_threshold > 0.0) {
            return Err(Error::Config("blowup_threshold must be positive".into()));
        }
        Ok(())
    }

    /// Per-step error scale at state `y`.
    pub fn tol_at(&self, y: f64) -> f64 {
        self.abs_tol + self.rel_tol * y.abs()
    }
}

/// Why an integration stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    /// The requested endpoint was reached.
    ReachedEnd,
    /// `y` exceeded `+blowup_threshold`.
    BlewUpPositive,
    /// `y` fell below `−blowup_threshold`.
    BlewUpNegative,
    /// The controller demanded a step below `min_step`; the equation is
    /// effectively singular at the last recorded point.
    StepUnderflow,
}

/// Accepted integration points, in integration order (decreasing grid when
/// integrating backwards), with the derivative at each point.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub derivs: Vec<f64>,
    pub termination: Termination,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    /// Last accepted point `(r, y)`.
    pub fn end(&self) -> (f64, f64) {
        (
            *self.grid.last().expect("trajectory is never empty"),
            *self.values.last().expect("trajectory is never empty"),
        )
    }
}

/// Right-hand side of the radial profile equation,
/// `(1 + φ²)(1 − (n−1)φ/r)`.
///
/// Singular at `r = 0`: callers integrating this must seed at some
/// `r₀ > 0` (the series, regularised and ψ-coordinate routes exist
/// precisely to cover the origin).
pub fn phi_rhs(n: Dimension, r: f64, phi: f64) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::Domain(format!(
            "profile equation is singular at r = 0; got r = {r}"
        )));
    }
    Ok(phi_rhs_raw(n.as_f64(), r, phi))
}

#[inline]
pub(crate) fn phi_rhs_raw(n: f64, r: f64, phi: f64) -> f64 {
    (1.0 + phi * phi) * (1.0 - (n - 1.0) * phi / r)
}

/// Right-hand side in ψ-coordinates (`ψ(r) = φ(e⁻ʳ)`),
/// `(1 + ψ²)((n−1)ψ − e⁻ʳ)`. Regular for all `r`.
pub fn psi_rhs(n: Dimension, r: f64, psi: f64) -> f64 {
    let nf = n.as_f64();
    (1.0 + psi * psi) * ((nf - 1.0) * psi - (-r).exp())
}

/// Right-hand side of the regularised equation,
/// `(1 + φ²)(1 − (n−1)φ/(r+ε))`. Regular on `r ≥ 0` for `ε > 0`.
pub fn phi_eps_rhs(n: Dimension, eps: f64, r: f64, phi: f64) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(Error::Domain(format!("need eps > 0, got {eps}")));
    }
    Ok(phi_eps_rhs_raw(n.as_f64(), eps, r, phi))
}

#[inline]
pub(crate) fn phi_eps_rhs_raw(n: f64, eps: f64, r: f64, phi: f64) -> f64 {
    (1.0 + phi * phi) * (1.0 - (n - 1.0) * phi / (r + eps))
}

/// A-priori envelope for solutions of the profile equation extended to the
/// right of `r₀ > 0` from `φ(r₀) = a`:
///
/// ```text
/// min{0, a}  ≤  φ(r)  ≤  max{ r/(n−1), a }.
/// ```
///
/// The equation forces `φ' > 0` below zero and `φ' < 0` above `r/(n−1)`,
/// so trajectories can never leave this envelope; it doubles as a runtime
/// assertion band when extending solutions rightwards.
pub fn extension_bounds(n: Dimension, r0: f64, a: f64, r: f64) -> (f64, f64) {
    debug_assert!(r0 > 0.0 && r >= r0, "need r >= r0 > 0");
    let upper = (r / (n.as_f64() - 1.0)).max(a);
    (a.min(0.0), upper)
}

// Dormand-Prince 5(4) tableau.
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

// 5th-order weights; the solution advances with these.
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;

// Difference to the embedded 4th-order weights, for the error estimate.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const SAFETY: f64 = 0.9;
const MAX_GROW: f64 = 5.0;
const MAX_SHRINK: f64 = 0.2;
// PI controller exponents for a 5th-order advancing solution.
const PI_CURRENT: f64 = 0.7 / 5.0;
const PI_PREVIOUS: f64 = 0.4 / 5.0;
// Hard cap so a hostile right-hand side cannot spin forever.
const MAX_STEPS: usize = 20_000_000;

/// Integrate `y' = rhs(r, y)` from `(r0, y0)` towards `r1` with an embedded
/// Dormand–Prince 5(4) pair and PI step-size control.
///
/// `r1 < r0` integrates backwards; internally the independent variable is
/// negated rather than using a separate code path. The local error per
/// step is held at or below `abs_tol + rel_tol·|y|`. The trajectory stops
/// early with a signed blow-up termination once `|y| > blowup_threshold`,
/// and with [`Termination::StepUnderflow`] when the controller would have
/// to step below `min_step`; neither is silent, both are recorded in
/// [`Trajectory::termination`].
pub fn integrate<F>(rhs: F, r0: f64, y0: f64, r1: f64, config: &IntegratorConfig) -> Result<Trajectory>
where
    F: Fn(f64, f64) -> f64,
{
    config.validate()?;
    if !r0.is_finite() || !r1.is_finite() || !y0.is_finite() {
        return Err(Error::Config("integration endpoints and state must be finite".into()));
    }
    if r0 == r1 {
        let d = rhs(r0, y0);
        return Ok(Trajectory {
            grid: vec![r0],
            values: vec![y0],
            derivs: vec![d],
            termination: Termination::ReachedEnd,
        });
    }
    if r1 < r0 {
        // Solve in t = -r, where d/dt y = -rhs(-t, y), then flip the grid back.
        let flipped = integrate_forward(|t, y| -rhs(-t, y), -r0, y0, -r1, config)?;
        return Ok(Trajectory {
            grid: flipped.grid.iter().map(|t| -t).collect(),
            values: flipped.values,
            derivs: flipped.derivs.iter().map(|d| -d).collect(),
            termination: flipped.termination,
        });
    }
    integrate_forward(rhs, r0, y0, r1, config)
}

fn integrate_forward<F>(
    rhs: F,
    r0: f64,
    y0: f64,
    r1: f64,
    config: &IntegratorConfig,
) -> Result<Trajectory>
where
    F: Fn(f64, f64) -> f64,
{
    let mut r = r0;
    let mut y = y0;
    let mut dy = rhs(r, y);
    let mut grid = vec![r];
    let mut values = vec![y];
    let mut derivs = vec![dy];

    let span = r1 - r0;
    let mut h = (span * 1e-3).clamp(config.min_step, config.max_step);
    let mut prev_err = 1.0_f64;
    let mut steps = 0usize;

    let termination = loop {
        steps += 1;
        if steps > MAX_STEPS {
            return Err(Error::Integration(format!(
                "step budget exhausted after {MAX_STEPS} steps at r = {r:.6e}"
            )));
        }
        let last = r + h >= r1;
        if last {
            h = r1 - r;
        }
        if r + h == r {
            // no representable progress left at this radius
            break if last {
                Termination::ReachedEnd
            } else {
                Termination::StepUnderflow
            };
        }

        let k1 = dy;
        let k2 = rhs(r + C2 * h, y + h * (A21 * k1));
        let k3 = rhs(r + C3 * h, y + h * (A31 * k1 + A32 * k2));
        let k4 = rhs(r + C4 * h, y + h * (A41 * k1 + A42 * k2 + A43 * k3));
        let k5 = rhs(r + C5 * h, y + h * (A51 * k1 + A52 * k2 + A53 * k3 + A54 * k4));
        let k6 = rhs(r + h, y + h * (A61 * k1 + A62 * k2 + A63 * k3 + A64 * k4 + A65 * k5));
        let y_new = y + h * (B1 * k1 + B3 * k3 + B4 * k4 + B5 * k5 + B6 * k6);
        let k7 = rhs(r + h, y_new);

        let err_abs = h * (E1 * k1 + E3 * k3 + E4 * k4 + E5 * k5 + E6 * k6 + E7 * k7);
        let scale = config.abs_tol + config.rel_tol * y.abs().max(y_new.abs());
        let err = if y_new.is_finite() && err_abs.is_finite() {
            (err_abs / scale).abs()
        } else {
            f64::INFINITY
        };

        if err <= 1.0 {
            r += h;
            y = y_new;
            dy = k7; // first-same-as-last
            grid.push(r);
            values.push(y);
            derivs.push(dy);

            if y.abs() > config.blowup_threshold {
                break if y > 0.0 {
                    Termination::BlewUpPositive
                } else {
                    Termination::BlewUpNegative
                };
            }
            if last {
                break Termination::ReachedEnd;
            }
            let grow = if err == 0.0 {
                MAX_GROW
            } else {
                (SAFETY * err.powf(-PI_CURRENT) * prev_err.powf(PI_PREVIOUS))
                    .clamp(MAX_SHRINK, MAX_GROW)
            };
            prev_err = err.max(1e-30);
            h = (h * grow).min(config.max_step).min(r1 - r);
            if h < config.min_step {
                // only reachable within one min_step of the endpoint
                h = config.min_step.min(r1 - r);
                if !(h > 0.0) {
                    break Termination::ReachedEnd;
                }
            }
        } else {
            let shrink = (SAFETY * err.powf(-PI_CURRENT)).clamp(MAX_SHRINK, 1.0);
            h *= shrink;
            if h < config.min_step {
                break Termination::StepUnderflow;
            }
        }
    };

    Ok(Trajectory {
        grid,
        values,
        derivs,
        termination,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dim(n: u32) -> Dimension {
        Dimension::new(n).unwrap()
    }

    #[test]
    fn phi_rhs_values() {
        // zero state: both factors reduce to 1
        assert_eq!(phi_rhs(dim(2), 1.0, 0.0).unwrap(), 1.0);
        // second factor vanishes
        assert_eq!(phi_rhs(dim(2), 1.0, 1.0).unwrap(), 0.0);
        // (1+1)(1 - (2/2)*1) = 0
        assert_eq!(phi_rhs(dim(3), 2.0, 1.0).unwrap(), 0.0);
        assert!(phi_rhs(dim(2), 0.0, 0.0).is_err());
        assert!(phi_rhs(dim(2), -1.0, 0.0).is_err());
    }

    #[test]
    fn phi_rhs_n1_reduces_to_grim_reaper_form() {
        for &(r, y) in &[(0.5, 0.0), (1.0, 2.0), (0.1, -3.0)] {
            let got = phi_rhs(dim(1), r, y).unwrap();
            assert!((got - (1.0 + y * y)).abs() < 1e-15);
        }
    }

    #[test]
    fn psi_rhs_values() {
        assert_eq!(psi_rhs(dim(2), 0.0, 1.0), 0.0);
        assert_eq!(psi_rhs(dim(2), 0.0, 0.0), -1.0);
        // 2*(1/4) - exp(-ln 2) = 0
        let v = psi_rhs(dim(3), 2.0_f64.ln(), 0.25);
        assert!(v.abs() < 1e-16, "got {v}");
    }

    #[test]
    fn psi_rhs_zero_set() {
        // zero exactly when psi = e^{-r}/(n-1); the 1+psi^2 factor never vanishes
        for n in 2..=5u32 {
            for &r in &[0.0, 0.5, 1.0, 3.0, 10.0] {
                let psi0 = (-r as f64).exp() / (f64::from(n) - 1.0);
                assert!(psi_rhs(dim(n), r, psi0).abs() < 1e-15);
                assert!(psi_rhs(dim(n), r, psi0 + 1e-6) > 0.0);
                assert!(psi_rhs(dim(n), r, psi0 - 1e-6) < 0.0);
            }
        }
    }

    #[test]
    fn phi_eps_rhs_values() {
        assert_eq!(phi_eps_rhs(dim(2), 1.0, 0.0, 0.0).unwrap(), 1.0);
        assert_eq!(phi_eps_rhs(dim(2), 0.5, 0.5, 1.0).unwrap(), 0.0);
        assert_eq!(phi_eps_rhs(dim(4), 1.0, 1.0, 0.0).unwrap(), 1.0);
        assert!(phi_eps_rhs(dim(2), 0.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn phi_rhs_sign_structure() {
        // rhs > 0 below zero, rhs < 0 above r/(n-1)
        for n in 2..=6u32 {
            for &r in &[0.05, 0.7, 3.0, 40.0] {
                for &phi in &[-5.0, -0.3, 0.0] {
                    assert!(phi_rhs(dim(n), r, phi).unwrap() > 0.0);
                }
                let edge = r / (f64::from(n) - 1.0);
                for &phi in &[edge * 1.0001 + 1e-9, edge + 1.0, edge + 100.0] {
                    assert!(phi_rhs(dim(n), r, phi).unwrap() < 0.0);
                }
            }
        }
    }

    #[test]
    fn extension_bounds_examples() {
        assert_eq!(extension_bounds(dim(2), 1.0, 0.5, 4.0), (0.0, 4.0));
        assert_eq!(extension_bounds(dim(3), 1.0, -1.0, 1.0), (-1.0, 0.5));
        assert_eq!(extension_bounds(dim(2), 1.0, 0.0, 1.0), (0.0, 1.0));
    }

    #[test]
    fn integrates_constant_rhs() {
        let t = integrate(|_, _| 0.0, 0.0, 5.0, 10.0, &IntegratorConfig::default()).unwrap();
        assert_eq!(t.termination, Termination::ReachedEnd);
        assert!(t.values.iter().all(|&y| y == 5.0));
        assert!((t.end().0 - 10.0).abs() < 1e-12);
    }

    #[test]
    fn matches_tangent_oracle() {
        // y' = 1 + y^2 from y(0) = 0 is y = tan(r)
        let config = IntegratorConfig::default();
        let t = integrate(|_, y| 1.0 + y * y, 0.0, 0.0, 1.4, &config).unwrap();
        assert_eq!(t.termination, Termination::ReachedEnd);
        let mut worst = 0.0_f64;
        for (r, y) in t.grid.iter().zip(&t.values) {
            let exact = r.tan();
            let bound = 10.0 * (config.abs_tol + config.rel_tol * exact.abs());
            let err = (y - exact).abs();
            assert!(err <= bound, "|y - tan| = {err:.3e} > {bound:.3e} at r = {r}");
            worst = worst.max(err / bound);
        }
        assert!(worst > 0.0);
        let (r_end, y_end) = t.end();
        assert!((r_end - 1.4).abs() < 1e-12);
        assert!((y_end - 1.4_f64.tan()).abs() < 10.0 * config.tol_at(1.4_f64.tan()));
    }

    #[test]
    fn psi_from_zero_blows_up_negative() {
        let n = dim(2);
        let t = integrate(
            |r, y| psi_rhs(n, r, y),
            0.0,
            0.0,
            10.0,
            &IntegratorConfig::default(),
        )
        .unwrap();
        assert_eq!(t.termination, Termination::BlewUpNegative);
        assert!(t.end().1 < -1e6);
    }

    #[test]
    fn backward_integration_reverses_forward() {
        // forward over [r0, r1], then backward from the endpoint, returns to y0
        let config = IntegratorConfig::default();
        let rhs = |r: f64, y: f64| 1.0 + y * y - 0.5 * r;
        let fwd = integrate(rhs, 0.2, 0.3, 1.0, &config).unwrap();
        assert_eq!(fwd.termination, Termination::ReachedEnd);
        let (r_end, y_end) = fwd.end();
        let bwd = integrate(rhs, r_end, y_end, 0.2, &config).unwrap();
        assert_eq!(bwd.termination, Termination::ReachedEnd);
        let (r_back, y_back) = bwd.end();
        assert!((r_back - 0.2).abs() < 1e-12);
        assert!(
            (y_back - 0.3).abs() <= 10.0 * (config.abs_tol + config.rel_tol * 0.3),
            "round trip drift {:.3e}",
            (y_back - 0.3).abs()
        );
        // backward trajectories record a decreasing grid
        assert!(bwd.grid.windows(2).all(|w| w[0] > w[1]));
    }

    #[test]
    fn blowup_reports_positive_side() {
        // y' = y^2 from y(1)=1 blows up at r = 2
        let t = integrate(|_, y| y * y, 1.0, 1.0, 3.0, &IntegratorConfig::default()).unwrap();
        assert_eq!(t.termination, Termination::BlewUpPositive);
        assert!(t.end().0 < 2.01);
    }

    #[test]
    fn rejects_bad_config() {
        let mut c = IntegratorConfig::default();
        c.abs_tol = 0.0;
        assert!(integrate(|_, _| 0.0, 0.0, 0.0, 1.0, &c).is_err());
        let mut c = IntegratorConfig::default();
        c.min_step = 0.5;
        c.max_step = 0.1;
        assert!(integrate(|_, _| 0.0, 0.0, 0.0, 1.0, &c).is_err());
    }
}
