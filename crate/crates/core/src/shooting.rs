//! Shooting construction in ψ-coordinates.
//!
//! The substitution `ψ(r) = φ(e⁻ʳ)` turns the singular profile equation
//! into the regular equation `ψ' = (1+ψ²)((n−1)ψ − e⁻ʳ)` on `[0, ∞)`, with
//! the origin pushed to `r = ∞`. Two one-way traps classify trajectories:
//!
//! * once `(n−1)ψ − e⁻ʳ > 0` the quantity stays positive and `ψ` blows up
//!   in finite time (cubic comparison), so the shot has overshot;
//! * once `ψ < 0` the derivative stays negative and `ψ` blows down, so the
//!   shot has undershot.
//!
//! The globally bounded solution therefore lives inside the envelope
//! `0 ≤ ψ(r) ≤ e⁻ʳ/(n−1)`, forcing its initial value into `[0, 1/(n−1)]`,
//! and nested bisection on `ψ(0)` with a growing horizon isolates it.
//! Along the accepted trajectory `eʳψ(r) → 1/n` and `eʳψ'(r) → −1/n`,
//! which is exactly the regularity the profile needs at the origin.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::ode::{integrate, psi_rhs, IntegratorConfig, Termination, Trajectory};
use crate::profile::{Dimension, MethodParams, RadialProfile};

/// How a single shot ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ShotClass {
    /// `(n−1)ψ − e⁻ʳ` became positive: initial value too large.
    ExceededUpper,
    /// `ψ` became negative: initial value too small.
    DroppedBelowZero,
    /// Stayed inside the envelope up to the horizon.
    Alive,
}

/// Outcome of one forward integration from `ψ(0) = a`.
#[derive(Debug, Clone)]
pub struct ShotOutcome {
    pub class: ShotClass,
    /// Where the classification triggered, or the horizon if alive.
    pub exit_radius: f64,
    pub trajectory: Trajectory,
}

/// One bisection step: the bracket after the update and the horizon the
/// midpoint was tested against.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct BracketStep {
    pub a_lo: f64,
    pub a_hi: f64,
    pub horizon: f64,
}

/// Converged initial value with its bracket history and the accepted
/// ψ-trajectory.
#[derive(Debug, Clone)]
pub struct ShootingResult {
    pub dimension: Dimension,
    pub a_star: f64,
    pub bracket_history: Vec<BracketStep>,
    pub final_horizon: f64,
    pub psi: Trajectory,
}

/// Integrate from `ψ(0) = a` towards `horizon` and classify against the
/// envelope. Classification applies a tolerance band of ten times the
/// local integrator tolerance, so the true solution is not misclassified
/// from numerical noise at the barrier.
pub fn shoot_once(
    n: Dimension,
    a: f64,
    horizon: f64,
    config: &IntegratorConfig,
) -> Result<ShotOutcome> {
    shoot_from(n, 0.0, a, horizon, config)
}

/// [`shoot_once`] generalised to an anchor radius `r₀ ≥ 0`: integrate from
/// `ψ(r₀) = b` towards `horizon` and classify. The trap arguments hold
/// from any anchor, so the classification semantics are identical.
pub fn shoot_from(
    n: Dimension,
    r0: f64,
    b: f64,
    horizon: f64,
    config: &IntegratorConfig,
) -> Result<ShotOutcome> {
    n.require_at_least_two()?;
    if !(r0 >= 0.0) {
        return Err(Error::Config(format!("anchor radius must be >= 0, got {r0}")));
    }
    if !(horizon > r0) {
        return Err(Error::Config(format!(
            "horizon {horizon} must exceed the anchor radius {r0}"
        )));
    }
    let nf = n.as_f64();
    let trajectory = integrate(|r, y| psi_rhs(n, r, y), r0, b, horizon, config)?;

    for (&r, &psi) in trajectory.grid.iter().zip(&trajectory.values) {
        let band = 10.0 * config.tol_at(psi);
        if (nf - 1.0) * psi - (-r).exp() > band {
            return Ok(ShotOutcome {
                class: ShotClass::ExceededUpper,
                exit_radius: r,
                trajectory,
            });
        }
        if psi < -band {
            return Ok(ShotOutcome {
                class: ShotClass::DroppedBelowZero,
                exit_radius: r,
                trajectory,
            });
        }
    }

    match trajectory.termination {
        Termination::ReachedEnd => Ok(ShotOutcome {
            class: ShotClass::Alive,
            exit_radius: horizon,
            trajectory,
        }),
        Termination::StepUnderflow => Err(Error::Integration(format!(
            "step underflow at r = {:.6e} before any classification (psi({r0}) = {b:.17e})",
            trajectory.end().0
        ))),
        // blow-up without a prior barrier crossing cannot happen for this
        // right-hand side; classify by the escape side regardless
        Termination::BlewUpPositive => Ok(ShotOutcome {
            class: ShotClass::ExceededUpper,
            exit_radius: trajectory.end().0,
            trajectory,
        }),
        Termination::BlewUpNegative => Ok(ShotOutcome {
            class: ShotClass::DroppedBelowZero,
            exit_radius: trajectory.end().0,
            trajectory,
        }),
    }
}

/// Horizon growth per bisection refinement.
const HORIZON_STEP: f64 = 0.5;

/// Horizon span one anchor can certify in double precision. Initial-value
/// perturbations grow like `e^((n−1)Δr)` while the envelope shrinks like
/// `e^(−Δr)`, so beyond `Δr ≈ ln(1/ulp)/n ≈ 36/n` no representable value
/// stays alive. The budget `24/n` both leaves a wide alive window and
/// keeps the far-field values at the end of a segment accurate to
/// `~ulp·e^(n·Δr) ≈ 1e-5` or better.
fn anchor_budget(n: Dimension) -> f64 {
    24.0 / n.as_f64()
}

/// One nested bisection anchored at `r₀`: find `b` with `ψ(r₀) = b` alive
/// up to `horizon`, bracketing inside `[0, e^(−r₀)/(n−1)]`.
fn bisect_anchored(
    n: Dimension,
    r0: f64,
    target_horizon: f64,
    b_tol: f64,
    config: &IntegratorConfig,
) -> Result<(f64, Trajectory, Vec<BracketStep>)> {
    let nf = n.as_f64();
    let mut a_lo = 0.0;
    let mut a_hi = (-r0).exp() / (nf - 1.0);
    let mut horizon = (r0 + HORIZON_STEP).min(target_horizon);
    let mut history = Vec::new();

    let max_rounds = 384 + 2 * ((target_horizon - r0) / HORIZON_STEP).ceil() as usize;
    for _ in 0..max_rounds {
        let mid = 0.5 * (a_lo + a_hi);
        let shot = shoot_from(n, r0, mid, horizon, config)?;
        match shot.class {
            ShotClass::DroppedBelowZero => a_lo = mid,
            ShotClass::ExceededUpper => a_hi = mid,
            ShotClass::Alive => {
                if horizon < target_horizon {
                    horizon = (horizon + HORIZON_STEP).min(target_horizon);
                    history.push(BracketStep { a_lo, a_hi, horizon });
                    continue;
                }
                history.push(BracketStep { a_lo, a_hi, horizon });
                if a_hi - a_lo < b_tol {
                    return Ok((mid, shot.trajectory, history));
                }
                // Alive at full horizon but bracket still wide: decide the
                // side from the far-field value, which tends to 1/n exactly
                // on the bounded solution.
                let (r_end, psi_end) = shot.trajectory.end();
                if r_end.exp() * psi_end > 1.0 / nf {
                    a_hi = mid;
                } else {
                    a_lo = mid;
                }
                continue;
            }
        }
        history.push(BracketStep { a_lo, a_hi, horizon });
    }
    Err(Error::NoConvergence(format!(
        "bracket [{a_lo:.17e}, {a_hi:.17e}] at anchor r = {r0} collapsed without \
         an alive shot at horizon {target_horizon} (tolerances too loose?)"
    )))
}

/// Nested bisection for the unique initial value whose trajectory stays in
/// the envelope forever.
///
/// The bracket starts at `[0, 1/(n−1)]`, which provably contains the
/// answer. Undershoots raise `a_lo`, overshoots lower `a_hi`, and an alive
/// midpoint extends the horizon by [`HORIZON_STEP`] (up to
/// `target_horizon`), mirroring the nested-interval construction behind
/// the existence argument. Stops once the bracket is narrower than `a_tol`
/// and the midpoint survives to `target_horizon`.
///
/// Horizons past the double-precision certification span (about `30/n`)
/// are reached by re-anchoring: once the initial bracket is exhausted, the
/// bisection restarts on the value `ψ(r₀)` at the covered frontier, whose
/// envelope provably contains the bounded solution, and the accepted
/// segments are concatenated. The reported `a_star` and bracket history
/// always refer to the bisection at `r = 0`.
pub fn bisect_initial(
    n: Dimension,
    target_horizon: f64,
    a_tol: f64,
    config: &IntegratorConfig,
) -> Result<ShootingResult> {
    n.require_at_least_two()?;
    if !(target_horizon > 0.0) || !(a_tol > 0.0) {
        return Err(Error::Config("target_horizon and a_tol must be positive".into()));
    }
    let budget = anchor_budget(n);
    let first_horizon = target_horizon.min(budget);
    let (a_star, mut psi, history) = bisect_anchored(n, 0.0, first_horizon, a_tol, config)?;

    let mut covered = first_horizon;
    while covered < target_horizon {
        let anchor = covered;
        let next_horizon = (anchor + budget).min(target_horizon);
        // bisect the anchored value down to a few ulps of its envelope
        let b_scale = (-anchor).exp() / (n.as_f64() - 1.0);
        let b_tol = 8.0 * f64::EPSILON * b_scale;
        let (_, segment, _) = bisect_anchored(n, anchor, next_horizon, b_tol, config)?;
        // append, dropping the duplicated anchor point
        psi.grid.extend_from_slice(&segment.grid[1..]);
        psi.values.extend_from_slice(&segment.values[1..]);
        psi.derivs.extend_from_slice(&segment.derivs[1..]);
        psi.termination = segment.termination;
        covered = next_horizon;
    }

    Ok(ShootingResult {
        dimension: n,
        a_star,
        bracket_history: history,
        final_horizon: target_horizon,
        psi,
    })
}

/// Convert an accepted ψ-trajectory back to the radial profile: radius
/// `ρ = e⁻ʳ`, `φ(ρ) = ψ(r)`, `φ'(ρ) = −ψ'(r)/ρ` by the chain rule. The
/// result covers `(e^(−horizon), 1]` in increasing radius order.
pub fn psi_to_phi(result: &ShootingResult) -> Result<RadialProfile> {
    let m = result.psi.len();
    let mut grid = Vec::with_capacity(m);
    let mut values = Vec::with_capacity(m);
    let mut derivs = Vec::with_capacity(m);
    for i in (0..m).rev() {
        let rho = (-result.psi.grid[i]).exp();
        grid.push(rho);
        values.push(result.psi.values[i]);
        derivs.push(-result.psi.derivs[i] / rho);
    }
    RadialProfile::new(
        grid,
        values,
        derivs,
        result.dimension,
        MethodParams::Shooting {
            a_star: result.a_star,
            horizon: result.final_horizon,
        },
    )
}

/// Data for the backward-shot families: from each anchor
/// `r₀ = k·eps_step` with `r₀ > 1`, the two trajectories through `(r₀, 0)`
/// and `(r₀, e^(−r₀)/(n−1))` are integrated backwards to `r = 1`. Returns
/// `(r₀, lower shot, upper shot)` per anchor.
pub fn backward_families(
    n: Dimension,
    eps_step: f64,
    k_range: (u32, u32),
    config: &IntegratorConfig,
) -> Result<Vec<(f64, Trajectory, Trajectory)>> {
    n.require_at_least_two()?;
    if !(eps_step > 0.0) {
        return Err(Error::Config("eps_step must be positive".into()));
    }
    let nf = n.as_f64();
    let mut out = Vec::new();
    for k in k_range.0..=k_range.1 {
        let r0 = f64::from(k) * eps_step;
        if r0 <= 1.0 {
            continue;
        }
        let lower = integrate(|r, y| psi_rhs(n, r, y), r0, 0.0, 1.0, config)?;
        let upper = integrate(
            |r, y| psi_rhs(n, r, y),
            r0,
            (-r0).exp() / (nf - 1.0),
            1.0,
            config,
        )?;
        out.push((r0, lower, upper));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dim(n: u32) -> Dimension {
        Dimension::new(n).unwrap()
    }

    #[test]
    fn overshoot_classifies_immediately() {
        // a = 1 puts (n-1)a - 1 on the trap boundary; the trap engages at 0+
        let shot = shoot_once(dim(2), 1.0, 10.0, &IntegratorConfig::default()).unwrap();
        assert_eq!(shot.class, ShotClass::ExceededUpper);
        assert!(shot.exit_radius < 0.1, "exit at {}", shot.exit_radius);
    }

    #[test]
    fn undershoot_classifies_immediately() {
        // psi'(0) = -1 < 0 from a = 0
        let shot = shoot_once(dim(2), 0.0, 10.0, &IntegratorConfig::default()).unwrap();
        assert_eq!(shot.class, ShotClass::DroppedBelowZero);
        assert!(shot.exit_radius < 0.1);
    }

    #[test]
    fn upper_trap_is_one_way() {
        // continue past the exit: the trap quantity stays positive
        let n = dim(2);
        let shot = shoot_once(n, 0.9, 10.0, &IntegratorConfig::default()).unwrap();
        assert_eq!(shot.class, ShotClass::ExceededUpper);
        let after: Vec<(f64, f64)> = shot
            .trajectory
            .grid
            .iter()
            .zip(&shot.trajectory.values)
            .filter(|(r, _)| **r > shot.exit_radius)
            .map(|(r, y)| (*r, *y))
            .take(20)
            .collect();
        assert!(!after.is_empty());
        for (r, psi) in after {
            assert!(psi - (-r).exp() > 0.0, "trap released at r = {r}");
        }
    }

    #[test]
    fn classification_is_monotone_in_a() {
        let n = dim(2);
        let config = IntegratorConfig::default();
        let classes: Vec<ShotClass> = [0.0, 0.2, 0.4, 0.6, 0.8, 1.0]
            .iter()
            .map(|&a| shoot_once(n, a, 6.0, &config).unwrap().class)
            .collect();
        let first_upper = classes.iter().position(|c| *c == ShotClass::ExceededUpper);
        if let Some(i) = first_upper {
            assert!(classes[i..].iter().all(|c| *c == ShotClass::ExceededUpper));
        }
        let last_lower = classes.iter().rposition(|c| *c == ShotClass::DroppedBelowZero);
        if let Some(i) = last_lower {
            assert!(classes[..=i].iter().all(|c| *c == ShotClass::DroppedBelowZero));
        }
    }

    #[test]
    fn bisection_finds_bounded_solution() {
        let n = dim(2);
        let result = bisect_initial(n, 12.0, 1e-10, &IntegratorConfig::default()).unwrap();
        for w in result.bracket_history.windows(2) {
            assert!(w[1].a_lo >= w[0].a_lo - 1e-18);
            assert!(w[1].a_hi <= w[0].a_hi + 1e-18);
            assert!(w[0].a_lo < w[0].a_hi);
        }
        // the accepted trajectory stays inside the envelope
        let band = 1e-8;
        for (&r, &psi) in result.psi.grid.iter().zip(&result.psi.values) {
            assert!(psi >= -band, "psi({r}) = {psi}");
            assert!(psi <= (-r).exp() + band, "psi({r}) = {psi}");
        }
        // far-field limit e^r psi -> 1/n, read a few units before the
        // horizon (at the horizon itself the tube position is undetermined)
        let (r_end, _) = result.psi.end();
        assert!((r_end - 12.0).abs() < 1e-9);
        let i = result.psi.grid.partition_point(|&r| r < 8.0);
        let (r8, psi8) = (result.psi.grid[i], result.psi.values[i]);
        assert!(
            (r8.exp() * psi8 - 0.5).abs() < 1e-3,
            "w({r8}) = {}",
            r8.exp() * psi8
        );
    }

    #[test]
    fn deep_horizons_chain_anchors() {
        // budget for n = 3 is 10, so horizon 14 needs a second anchor
        let n = dim(3);
        let result = bisect_initial(n, 14.0, 1e-10, &IntegratorConfig::default()).unwrap();
        let (r_end, _) = result.psi.end();
        assert!((r_end - 14.0).abs() < 1e-9);
        assert!(result.psi.grid.windows(2).all(|w| w[0] < w[1]));
        // the envelope holds across the anchor seam
        for (&r, &psi) in result.psi.grid.iter().zip(&result.psi.values) {
            assert!(psi >= -1e-8 && psi <= (-r).exp() / 2.0 + 1e-8, "psi({r}) = {psi}");
        }
        // two units past the last anchor the tube position has re-converged
        let i = result.psi.grid.partition_point(|&r| r < 12.0);
        let (r12, psi12) = (result.psi.grid[i], result.psi.values[i]);
        let w = r12.exp() * psi12;
        assert!((w - 1.0 / 3.0).abs() < 1e-4, "w({r12}) = {w}");
    }

    #[test]
    fn refining_tolerance_stays_inside_old_bracket() {
        let n = dim(3);
        let config = IntegratorConfig::default();
        let coarse = bisect_initial(n, 10.0, 1e-6, &config).unwrap();
        let fine = bisect_initial(n, 10.0, 1e-8, &config).unwrap();
        let last = coarse.bracket_history.last().unwrap();
        assert!(fine.a_star >= last.a_lo - 1e-6 && fine.a_star <= last.a_hi + 1e-6);
    }

    #[test]
    fn phi_conversion_maps_endpoint_and_orders_grid() {
        let n = dim(2);
        let result = bisect_initial(n, 8.0, 1e-9, &IntegratorConfig::default()).unwrap();
        let profile = psi_to_phi(&result).unwrap();
        assert!(profile.grid().windows(2).all(|w| w[0] < w[1]));
        assert!((profile.grid().last().unwrap() - 1.0).abs() < 1e-12);
        // phi(1) = psi(0) = a*
        assert!((profile.values().last().unwrap() - result.a_star).abs() < 1e-9);
        // phi(rho)/rho approaches 1/n at the smallest covered radius
        let rho0 = profile.grid()[0];
        let slope = profile.values()[0] / rho0;
        assert!((slope - 0.5).abs() < 1e-2, "slope {slope}");
    }

    #[test]
    fn backward_family_anchors() {
        let n = dim(2);
        let fams = backward_families(n, 0.5, (3, 5), &IntegratorConfig::default()).unwrap();
        assert_eq!(fams.len(), 3);
        for (r0, lower, upper) in &fams {
            assert!(*r0 >= 1.5);
            assert_eq!(lower.grid[0], *r0);
            assert_eq!(upper.grid[0], *r0);
            assert_eq!(lower.termination, Termination::ReachedEnd);
            assert_eq!(upper.termination, Termination::ReachedEnd);
            assert!((lower.grid.last().unwrap() - 1.0).abs() < 1e-9);
            assert!((upper.grid.last().unwrap() - 1.0).abs() < 1e-9);
        }
    }
}
