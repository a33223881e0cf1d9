//! Approximating problem families.
//!
//! Two ways to dodge the singularity at `r = 0` and recover the profile in
//! a limit:
//!
//! * **truncated domain** ([`solve_one_over_k`]): solve the original
//!   equation on `[1/k, ∞)` with the initial value `φ(1/k) = 1/(nk)` that
//!   the origin expansion `φ(r) ≈ r/n` dictates;
//! * **regularised equation** ([`solve_regularized`]): replace `r` by
//!   `r + ε` in the singular term and start honestly at `φ(0) = 0`.
//!
//! Both families respect explicit barriers, and the regularised family is
//! strictly monotone in `ε`. The sweeps solve a ladder of parameters,
//! verify those facts at every accepted step, and report successive
//! differences so the limit behaviour is visible rather than asserted.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::ode::{integrate, phi_eps_rhs_raw, phi_rhs_raw, IntegratorConfig, Termination};
use crate::profile::{Dimension, MethodParams, RadialProfile};

/// A parameter ladder solved on a common evaluation grid.
#[derive(Debug, Clone)]
pub struct FamilySweep {
    pub dimension: Dimension,
    /// ε values (decreasing) or k values (increasing), as given.
    pub parameters: Vec<f64>,
    /// Common evaluation grid.
    pub grid: Vec<f64>,
    /// One profile per parameter, restricted to the grid points it covers.
    pub profiles: Vec<RadialProfile>,
    /// Verdicts for adjacent parameter pairs (strict ordering where both
    /// profiles cover the grid point).
    pub monotonicity: Vec<PairVerdict>,
    /// `max |φ_{i+1} − φ_i|` over the shared grid, per adjacent pair.
    pub successive_max_diffs: Vec<f64>,
    /// Limit candidate: for the regularised family, the Richardson
    /// extrapolation of the two finest members (the family is linear in ε
    /// to leading order); for the truncated-domain family, the richest
    /// member.
    limit: RadialProfile,
}

/// Pointwise comparison outcome for one adjacent pair of family members.
#[derive(Debug, Clone, Serialize)]
pub struct PairVerdict {
    pub param_coarse: f64,
    pub param_fine: f64,
    /// Strictly ordered at every shared grid point (up to tolerance).
    pub ordered: bool,
    pub max_violation: f64,
}

impl FamilySweep {
    pub fn limit(&self) -> &RadialProfile {
        &self.limit
    }
}

fn default_tolerance_band(config: &IntegratorConfig, scale: f64) -> f64 {
    10.0 * (config.abs_tol + config.rel_tol * scale.abs())
}

/// Solve the truncated-domain problem: integrate the profile equation from
/// `(1/k, 1/(nk))` out to `r_max`, checking the barrier
/// `0 < φ_k(r) < r/(n−1)` at every accepted step.
pub fn solve_one_over_k(
    n: Dimension,
    k: u32,
    r_max: f64,
    config: &IntegratorConfig,
) -> Result<RadialProfile> {
    solve_one_over_k_from(n, k, 1.0 / (n.as_f64() * f64::from(k)), r_max, config)
}

/// Same as [`solve_one_over_k`] with an explicit initial value override.
/// The barrier checks assume the standard initial value; overrides outside
/// `(0, r/(n−1))` are rejected.
pub fn solve_one_over_k_from(
    n: Dimension,
    k: u32,
    initial_value: f64,
    r_max: f64,
    config: &IntegratorConfig,
) -> Result<RadialProfile> {
    n.require_at_least_two()?;
    if k < 1 {
        return Err(Error::Config("k must be at least 1".into()));
    }
    let nf = n.as_f64();
    let r0 = 1.0 / f64::from(k);
    if !(r_max > r0) {
        return Err(Error::Config(format!("r_max = {r_max} must exceed 1/k = {r0}")));
    }
    if !(initial_value > 0.0) || initial_value >= r0 / (nf - 1.0) {
        return Err(Error::Config(format!(
            "initial value {initial_value} outside (0, {})",
            r0 / (nf - 1.0)
        )));
    }

    let traj = integrate(|r, y| phi_rhs_raw(nf, r, y), r0, initial_value, r_max, config)?;
    if traj.termination != Termination::ReachedEnd {
        return Err(Error::Integration(format!(
            "truncated-domain solve stopped early at r = {:.6e} ({:?})",
            traj.end().0,
            traj.termination
        )));
    }
    for (&r, &phi) in traj.grid.iter().zip(&traj.values) {
        let band = default_tolerance_band(config, phi);
        if phi < -band || phi > r / (nf - 1.0) + band {
            return Err(Error::Barrier(format!(
                "0 < phi < r/(n-1) failed at r = {r:.6e}: phi = {phi:.17e} (k = {k})"
            )));
        }
    }
    RadialProfile::new(
        traj.grid,
        traj.values,
        traj.derivs,
        n,
        MethodParams::OneOverK { k },
    )
}

/// Solve the regularised problem from `(0, 0)` out to `r_max`, checking
/// `0 ≤ φ_ε(r) ≤ (r+ε)/(n−1)` at every accepted step.
pub fn solve_regularized(
    n: Dimension,
    eps: f64,
    r_max: f64,
    config: &IntegratorConfig,
) -> Result<RadialProfile> {
    n.require_at_least_two()?;
    if !(eps > 0.0) {
        return Err(Error::Config(format!("eps must be positive, got {eps}")));
    }
    if !(r_max > 0.0) {
        return Err(Error::Config(format!("r_max must be positive, got {r_max}")));
    }
    let nf = n.as_f64();
    // the rhs is regular on r >= 0 for fixed eps > 0
    let traj = integrate(
        move |r, y| phi_eps_rhs_raw(nf, eps, r, y),
        0.0,
        0.0,
        r_max,
        config,
    )?;
    if traj.termination != Termination::ReachedEnd {
        return Err(Error::Integration(format!(
            "regularised solve stopped early at r = {:.6e} ({:?})",
            traj.end().0,
            traj.termination
        )));
    }
    for (&r, &phi) in traj.grid.iter().zip(&traj.values) {
        let band = default_tolerance_band(config, phi);
        if phi < -band || phi > (r + eps) / (nf - 1.0) + band {
            return Err(Error::Barrier(format!(
                "0 <= phi <= (r+eps)/(n-1) failed at r = {r:.6e}: phi = {phi:.17e} (eps = {eps})"
            )));
        }
    }
    RadialProfile::new(
        traj.grid,
        traj.values,
        traj.derivs,
        n,
        MethodParams::Regularized { eps },
    )
}

/// Resample a solved profile onto the subset of `grid` that it covers,
/// interpolating linearly, and repackage with the same provenance.
fn restrict_to_grid(profile: &RadialProfile, grid: &[f64]) -> Result<RadialProfile> {
    let mut sub_grid = Vec::new();
    let mut values = Vec::new();
    let mut derivs = Vec::new();
    for &r in grid {
        if profile.covers(r) {
            sub_grid.push(r);
            values.push(profile.value_at(r)?);
            derivs.push(profile.deriv_at(r)?);
        }
    }
    if sub_grid.is_empty() {
        return Err(Error::Coverage(format!(
            "{} profile does not cover any point of the evaluation grid",
            profile.tag()
        )));
    }
    RadialProfile::new(sub_grid, values, derivs, profile.dimension(), profile.params().clone())
}

/// Solve the regularised family along a strictly decreasing ε ladder,
/// verify strict pointwise monotonicity `φ_{ε₁} < φ_{ε₂}` for `ε₁ < ε₂`
/// at every grid point `r > 0`, and extract the limit candidate by a
/// Richardson step on the two finest members.
pub fn sweep_regularized(
    n: Dimension,
    eps_list: &[f64],
    r_grid: &[f64],
    config: &IntegratorConfig,
) -> Result<FamilySweep> {
    if eps_list.is_empty() {
        return Err(Error::Config("eps ladder is empty".into()));
    }
    if eps_list.windows(2).any(|w| w[0] <= w[1]) {
        return Err(Error::Config("eps ladder must be strictly decreasing".into()));
    }
    validate_grid(r_grid)?;
    let r_max = r_grid.last().copied().unwrap();

    let solved: Vec<RadialProfile> = eps_list
        .iter()
        .map(|&eps| solve_regularized(n, eps, r_max * 1.0001, config))
        .collect::<Result<_>>()?;
    let profiles: Vec<RadialProfile> = solved
        .iter()
        .map(|p| restrict_to_grid(p, r_grid))
        .collect::<Result<_>>()?;

    // interpolation puts noise of order step^2 on the comparison; allow a
    // band well below the physical separation of adjacent family members
    let band = 100.0 * (config.abs_tol + config.rel_tol);
    let mut monotonicity = Vec::new();
    for i in 1..profiles.len() {
        let coarse = &profiles[i - 1]; // larger eps
        let fine = &profiles[i];
        let mut max_violation = 0.0_f64;
        let mut ordered = true;
        for &r in r_grid {
            if !(r > 0.0) || !coarse.covers(r) || !fine.covers(r) {
                continue;
            }
            let gap = coarse.value_at(r)? - fine.value_at(r)?;
            if gap <= band {
                ordered = false;
                max_violation = max_violation.max(band - gap);
            }
        }
        let verdict = PairVerdict {
            param_coarse: eps_list[i - 1],
            param_fine: eps_list[i],
            ordered,
            max_violation,
        };
        if !verdict.ordered {
            return Err(Error::Barrier(format!(
                "monotonicity in eps failed between {} and {} (violation {:.3e})",
                verdict.param_coarse, verdict.param_fine, verdict.max_violation
            )));
        }
        monotonicity.push(verdict);
    }

    let successive_max_diffs = successive_diffs(&profiles, r_grid)?;

    // The family converges linearly in eps (the deviation from the limit
    // is eps/n + O(eps^2) away from the origin), so one Richardson step on
    // the two finest members removes the leading error.
    let limit = if profiles.len() >= 2 {
        let fine = &profiles[profiles.len() - 1];
        let coarse = &profiles[profiles.len() - 2];
        let rho = eps_list[eps_list.len() - 2] / eps_list[eps_list.len() - 1];
        let mut grid = Vec::new();
        let mut values = Vec::new();
        let mut derivs = Vec::new();
        for &r in r_grid {
            if fine.covers(r) && coarse.covers(r) {
                grid.push(r);
                values.push((rho * fine.value_at(r)? - coarse.value_at(r)?) / (rho - 1.0));
                derivs.push((rho * fine.deriv_at(r)? - coarse.deriv_at(r)?) / (rho - 1.0));
            }
        }
        RadialProfile::new(
            grid,
            values,
            derivs,
            n,
            MethodParams::Regularized {
                eps: eps_list[eps_list.len() - 1],
            },
        )?
    } else {
        profiles[0].clone()
    };

    Ok(FamilySweep {
        dimension: n,
        parameters: eps_list.to_vec(),
        grid: r_grid.to_vec(),
        profiles,
        monotonicity,
        successive_max_diffs,
        limit,
    })
}

/// Solve the truncated-domain family along an increasing k ladder on the
/// common grid (each member restricted to `r ≥ 1/k`), and report the decay
/// of successive differences. The largest k is the limit candidate.
pub fn sweep_one_over_k(
    n: Dimension,
    k_list: &[u32],
    r_grid: &[f64],
    config: &IntegratorConfig,
) -> Result<FamilySweep> {
    if k_list.is_empty() {
        return Err(Error::Config("k ladder is empty".into()));
    }
    if k_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config("k ladder must be strictly increasing".into()));
    }
    validate_grid(r_grid)?;
    let r_max = r_grid.last().copied().unwrap();

    let solved: Vec<RadialProfile> = k_list
        .iter()
        .map(|&k| solve_one_over_k(n, k, r_max * 1.0001, config))
        .collect::<Result<_>>()?;
    let profiles: Vec<RadialProfile> = solved
        .iter()
        .map(|p| restrict_to_grid(p, r_grid))
        .collect::<Result<_>>()?;

    let successive_max_diffs = successive_diffs(&profiles, r_grid)?;
    let limit = profiles.last().unwrap().clone();
    Ok(FamilySweep {
        dimension: n,
        parameters: k_list.iter().map(|&k| f64::from(k)).collect(),
        grid: r_grid.to_vec(),
        profiles,
        monotonicity: Vec::new(),
        successive_max_diffs,
        limit,
    })
}

fn validate_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::Config("evaluation grid is empty".into()));
    }
    if grid[0] < 0.0 || grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config(
            "evaluation grid must be nonnegative and strictly increasing".into(),
        ));
    }
    Ok(())
}

fn successive_diffs(profiles: &[RadialProfile], grid: &[f64]) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for i in 1..profiles.len() {
        let mut max_diff = 0.0_f64;
        for &r in grid {
            if profiles[i - 1].covers(r) && profiles[i].covers(r) {
                max_diff =
                    max_diff.max((profiles[i - 1].value_at(r)? - profiles[i].value_at(r)?).abs());
            }
        }
        out.push(max_diff);
    }
    Ok(out)
}

/// Geometric ε ladder `2⁻¹ … 2^(−levels)`.
pub fn default_eps_ladder(levels: u32) -> Vec<f64> {
    (1..=levels).map(|i| 2_f64.powi(-(i as i32))).collect()
}

/// Geometric k ladder `4, 16, 64, …` with `levels` entries.
pub fn default_k_ladder(levels: u32) -> Vec<u32> {
    (1..=levels).map(|i| 4_u32.pow(i)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dim(n: u32) -> Dimension {
        Dimension::new(n).unwrap()
    }

    fn grid(from: f64, to: f64, m: usize) -> Vec<f64> {
        (0..m)
            .map(|i| from + (to - from) * i as f64 / (m - 1) as f64)
            .collect()
    }

    #[test]
    fn one_over_k_initial_point() {
        let p = solve_one_over_k(dim(2), 10, 1.0, &IntegratorConfig::default()).unwrap();
        assert_eq!(p.grid()[0], 0.1);
        assert_eq!(p.values()[0], 0.05);
    }

    #[test]
    fn one_over_k_barrier_respected() {
        let config = IntegratorConfig::default();
        for &k in &[4u32, 100] {
            let p = solve_one_over_k(dim(2), k, 3.0, &config).unwrap();
            for (&r, &phi) in p.grid().iter().zip(p.values()) {
                assert!(phi > -1e-9 && phi < r + 1e-9, "k={k} r={r} phi={phi}");
            }
        }
    }

    #[test]
    fn one_over_k_rejects_bad_initial_value() {
        let config = IntegratorConfig::default();
        assert!(solve_one_over_k_from(dim(2), 10, 0.0, 1.0, &config).is_err());
        assert!(solve_one_over_k_from(dim(2), 10, 0.2, 1.0, &config).is_err());
        assert!(solve_one_over_k_from(dim(2), 10, 0.05, 0.05, &config).is_err());
    }

    #[test]
    fn regularized_slope_at_origin_is_one() {
        // phi_eps'(0) = 1 for every eps
        let config = IntegratorConfig::default();
        for &eps in &[1.0, 0.25, 0.01] {
            let p = solve_regularized(dim(2), eps, 1.0, &config).unwrap();
            assert_eq!(p.values()[0], 0.0);
            assert!((p.derivs()[0] - 1.0).abs() < 1e-14, "eps={eps}");
        }
    }

    #[test]
    fn regularized_barriers() {
        // r/n <= phi_eps <= (r+eps)/n + ((r+eps)/n)^2 on the stated range
        let config = IntegratorConfig::default();
        let n = dim(2);
        for &eps in &[0.5, 0.25, 0.125] {
            let p = solve_regularized(n, eps, 2.0 / 3.0, &config).unwrap();
            for (&r, &phi) in p.grid().iter().zip(p.values()) {
                assert!(phi >= r / 2.0 - 1e-9, "eps={eps} r={r}");
                let x: f64 = (r + eps) / 2.0;
                assert!(phi <= x + x * x + 1e-9, "eps={eps} r={r}");
            }
        }
    }

    #[test]
    fn sweep_regularized_is_monotone_and_converges() {
        let config = IntegratorConfig::default();
        let eps: Vec<f64> = default_eps_ladder(8);
        let g = grid(0.05, 1.0, 39);
        let sweep = sweep_regularized(dim(2), &eps, &g, &config).unwrap();
        assert!(sweep.monotonicity.iter().all(|v| v.ordered));
        // successive differences shrink
        let d = &sweep.successive_max_diffs;
        assert!(d.windows(2).all(|w| w[1] < w[0]), "diffs {d:?}");
        assert_eq!(sweep.limit().tag(), crate::profile::MethodTag::Regularized);
    }

    #[test]
    fn sweep_one_over_k_differences_shrink() {
        // tight tolerances: the k = 64 vs 256 gap is ~1e-11 and must stay
        // above the integration noise to remain monotone
        let config = IntegratorConfig {
            abs_tol: 1e-13,
            rel_tol: 1e-13,
            ..IntegratorConfig::default()
        };
        let ks = [4u32, 16, 64, 256];
        let g = grid(0.5, 2.0, 31);
        let sweep = sweep_one_over_k(dim(3), &ks, &g, &config).unwrap();
        let d = &sweep.successive_max_diffs;
        assert!(d.windows(2).all(|w| w[1] < w[0]), "diffs {d:?}");
    }

    #[test]
    fn bad_ladders_rejected() {
        let config = IntegratorConfig::default();
        let g = grid(0.1, 1.0, 10);
        assert!(sweep_regularized(dim(2), &[0.1, 0.2], &g, &config).is_err());
        assert!(sweep_one_over_k(dim(2), &[16, 4], &g, &config).is_err());
        assert!(sweep_regularized(dim(2), &[], &g, &config).is_err());
    }
}
