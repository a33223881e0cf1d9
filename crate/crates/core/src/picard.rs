//! Fixed-point construction in a weighted norm.
//!
//! Near the origin the profile equation can be written as
//! `u'(r) = f(r, u(r)/r)` with `f(s, a) = (1+s²a²)(1−(n−1)a)`, and the
//! operator
//!
//! ```text
//! (T(φ))(r) = ∫₀ʳ f(s, (h+φ)(s)/s) ds − h(r)
//! ```
//!
//! contracts on the ball `‖φ‖ ≤ R` of the weighted norm
//! `‖φ‖ = sup r⁻ᵖ|φ(r)|`, provided `p` exceeds the Lipschitz constant `L`
//! of `f` and the polynomial `h` solves the equation approximately enough:
//! `‖T(0)‖ ≤ (p−L)/p·R`. The contraction factor is `L/p`, so with the
//! standard choice `L = n`, `p = n+1` the iteration converges
//! geometrically at rate `n/(n+1)` or better, and the fixed point `φ`
//! yields the solution `u = h + φ` with `u(0) = 0`.
//!
//! This module realises the construction on a finite geometric grid: the
//! weight `r⁻ᵖ` stresses small radii, so grid points cluster near zero,
//! and the integral is a running composite trapezoid.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::profile::{Dimension, MethodParams, RadialProfile};
use crate::series::{approx_polynomial, ApproxPolynomial};

/// Parameters of the weighted fixed-point iteration.
#[derive(Debug, Clone)]
pub struct PicardConfig {
    /// Weight exponent `p`; must exceed `max{lipschitz, 1}`.
    pub weight: f64,
    /// Lipschitz constant `L` of `f` in its second argument on the ball.
    pub lipschitz: f64,
    /// Ball radius `R` around the approximate solution.
    pub ball_radius: f64,
    /// Right endpoint `S ∈ (0, 1]` of the working interval.
    pub interval_end: f64,
    /// Number of positive grid points (geometrically spaced).
    pub grid_size: usize,
    /// Ratio of smallest positive grid point to `interval_end`.
    pub grid_span: f64,
    pub max_iters: usize,
    /// Stop once the weighted norm of successive iterates drops below this.
    pub fixed_point_tol: f64,
}

impl PicardConfig {
    /// The standard parameter choice for dimension `n`: `L = n`,
    /// `p = n + 1`, `R` slightly above `1/n`.
    ///
    /// The grid floor grows with the weight: measured near `r_min`, the
    /// norm amplifies double-precision rounding like `r_min^(1−p)`, so
    /// `r_min` is chosen to keep that noise two orders below
    /// `fixed_point_tol`.
    pub fn default_for(n: Dimension) -> Self {
        let nf = n.as_f64();
        PicardConfig {
            weight: nf + 1.0,
            lipschitz: nf,
            ball_radius: 1.25 / nf,
            interval_end: 0.5,
            grid_size: 8000,
            grid_span: (2.0 * 1e-6_f64.powf(1.0 / nf)).min(0.2),
            max_iters: 200,
            fixed_point_tol: 1e-9,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.weight > self.lipschitz.max(1.0)) {
            return Err(Error::Config(format!(
                "need weight p = {} > max(lipschitz, 1) = {}",
                self.weight,
                self.lipschitz.max(1.0)
            )));
        }
        if !(self.interval_end > 0.0) || self.interval_end > 1.0 {
            return Err(Error::Config("interval_end must lie in (0, 1]".into()));
        }
        if !(self.ball_radius > 0.0) {
            return Err(Error::Config("ball_radius must be positive".into()));
        }
        if self.grid_size < 8 {
            return Err(Error::Config("grid_size too small".into()));
        }
        if !(self.grid_span > 0.0) || self.grid_span >= 1.0 {
            return Err(Error::Config("grid_span must lie in (0, 1)".into()));
        }
        Ok(())
    }

    /// Geometric grid `0 < r₁ < … < r_m = S`.
    fn grid(&self) -> Vec<f64> {
        let m = self.grid_size;
        let s = self.interval_end;
        let r_min = s * self.grid_span;
        let q = (s / r_min).ln() / (m - 1) as f64;
        let mut g: Vec<f64> = (0..m).map(|i| r_min * (q * i as f64).exp()).collect();
        g[m - 1] = s;
        g
    }
}

/// A grid function measured in the weighted norm `sup r⁻ᵖ|f(r)|`. The grid
/// consists of positive radii; the value at `r = 0` is implicitly `0` for
/// every member of the space.
#[derive(Debug, Clone)]
pub struct WeightedGridFunction {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub weight: f64,
}

impl WeightedGridFunction {
    pub fn zero(grid: Vec<f64>, weight: f64) -> Self {
        let values = vec![0.0; grid.len()];
        WeightedGridFunction { grid, values, weight }
    }
}

/// `max_i r_i⁻ᵖ |f(r_i)|` over the grid.
pub fn weighted_norm(f: &WeightedGridFunction) -> f64 {
    f.grid
        .iter()
        .zip(&f.values)
        .map(|(&r, &v)| r.powf(-f.weight) * v.abs())
        .fold(0.0, f64::max)
}

fn f_slope(n: f64, s: f64, a: f64) -> f64 {
    (1.0 + s * s * a * a) * (1.0 - (n - 1.0) * a)
}

/// Coefficients of `s ↦ ∫₀ˢ f(t, h(t)/t) dt`, which is a polynomial
/// because `h(0) = 0` makes `h(t)/t` one.
fn h_part_antiderivative(h: &ApproxPolynomial, n: f64) -> Vec<f64> {
    let hc: Vec<f64> = (0..=h.degree()).map(|j| h.coeff_f64(j)).collect();
    // q = h/s
    let q: Vec<f64> = hc.iter().skip(1).copied().collect();
    // 1 + h^2
    let mut h2 = vec![0.0; 2 * hc.len().max(1)];
    for (i, a) in hc.iter().enumerate() {
        for (j, b) in hc.iter().enumerate() {
            h2[i + j] += a * b;
        }
    }
    h2[0] += 1.0;
    // (1 + h^2) * (1 - (n-1) q)
    let mut integrand = vec![0.0; h2.len() + q.len().max(1)];
    for (i, a) in h2.iter().enumerate() {
        integrand[i] += a;
        for (j, b) in q.iter().enumerate() {
            integrand[i + j] -= a * (n - 1.0) * b;
        }
    }
    // antiderivative, constant term 0
    let mut anti = vec![0.0; integrand.len() + 1];
    for (j, c) in integrand.iter().enumerate() {
        anti[j + 1] = c / (j + 1) as f64;
    }
    anti
}

fn eval_poly(coeffs: &[f64], s: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * s + c)
}

/// One application of the operator `T`, split to keep the weighted norm
/// honest down to the smallest grid point:
///
/// * the `h`-only part of the integrand is a polynomial and is integrated
///   exactly, so the hypothesis value `‖T(0)‖` carries no quadrature bias;
/// * the φ-dependent remainder vanishes like `s^(p−1)` and is integrated
///   by a running trapezoid, with a Simpson startup on `[0, r₁]` that
///   models the midpoint by the `s^p` vanishing profile of the ball.
///
/// Fails if the input leaves the ball `‖φ‖ ≤ R` or the composite argument
/// leaves the Lipschitz domain `|(h+φ)(s)/s| ≤ 2R`.
pub fn picard_step(
    phi: &WeightedGridFunction,
    h: &ApproxPolynomial,
    n: Dimension,
    config: &PicardConfig,
) -> Result<WeightedGridFunction> {
    let norm = weighted_norm(phi);
    if norm > config.ball_radius * (1.0 + 1e-12) {
        return Err(Error::Domain(format!(
            "iterate left the ball: ||phi|| = {norm:.6e} > R = {}",
            config.ball_radius
        )));
    }
    let nf = n.as_f64();
    let two_r = 2.0 * config.ball_radius;
    let anti = h_part_antiderivative(h, nf);

    // remainder g(s) = f(s, (h+phi)/s) - f(s, h/s); g(0) = 0
    let g_at = |s: f64, phi_s: f64| -> f64 {
        let base = h.value(s) / s;
        f_slope(nf, s, (h.value(s) + phi_s) / s) - f_slope(nf, s, base)
    };

    let mut values = Vec::with_capacity(phi.grid.len());
    let mut g_integral = 0.0;
    let mut prev_s = 0.0;
    let mut prev_g = 0.0;
    for (i, (&s, &phi_s)) in phi.grid.iter().zip(&phi.values).enumerate() {
        let arg = (h.value(s) + phi_s) / s;
        if arg.abs() > two_r * (1.0 + 1e-12) {
            return Err(Error::Domain(format!(
                "composite argument (h+phi)(s)/s = {arg:.6e} left the Lipschitz \
                 domain |a| <= 2R = {two_r:.6e} at s = {s:.6e}"
            )));
        }
        let g_here = g_at(s, phi_s);
        if i == 0 {
            // Simpson startup; phi at the midpoint modeled by its s^p decay
            let mid = 0.5 * s;
            let g_mid = g_at(mid, phi_s * 0.5_f64.powf(phi.weight));
            g_integral += s / 6.0 * (4.0 * g_mid + g_here);
        } else {
            g_integral += 0.5 * (s - prev_s) * (prev_g + g_here);
        }
        values.push(eval_poly(&anti, s) + g_integral - h.value(s));
        prev_s = s;
        prev_g = g_here;
    }
    Ok(WeightedGridFunction {
        grid: phi.grid.clone(),
        values,
        weight: phi.weight,
    })
}

/// Convergence record of a [`picard_solve`] run.
#[derive(Debug, Clone, Serialize)]
pub struct PicardDiagnostics {
    pub iters: usize,
    /// Weighted norm of the last iterate difference.
    pub final_residual: f64,
    /// `‖φ_{k+1} − φ_k‖ / ‖φ_k − φ_{k−1}‖` per iteration (while the
    /// denominator is measurable).
    pub contraction_ratios: Vec<f64>,
    /// Largest observed contraction ratio.
    pub max_ratio: f64,
    /// Interval endpoint actually used after the hypothesis search.
    pub interval_end: f64,
    /// `‖T(0)‖`, measured on the final interval.
    pub hypothesis_norm: f64,
    /// The bound `(p−L)/p·R` the hypothesis must meet.
    pub hypothesis_bound: f64,
}

/// Iterate `T` from `φ = 0` to its fixed point and return `u = h + φ` as a
/// profile, with `h` the degree-`2M+1` approximate solution.
///
/// Before iterating, the approximate-solution hypothesis
/// `‖T(0)‖ ≤ (p−L)/p·R` is checked on the grid; if it fails, the interval
/// is halved and the check repeated (the hypothesis always holds for small
/// enough intervals). The returned profile includes `r = 0` with value 0.
pub fn picard_solve(
    n: Dimension,
    truncation: usize,
    config: &PicardConfig,
) -> Result<(RadialProfile, PicardDiagnostics)> {
    n.require_at_least_two()?;
    config.validate()?;
    let h = approx_polynomial(n, truncation)?;
    let bound = (config.weight - config.lipschitz) / config.weight * config.ball_radius;

    // shrink the interval until h is provably good enough on it
    let mut local = config.clone();
    let mut hypothesis_norm = f64::INFINITY;
    for _ in 0..40 {
        let zero = WeightedGridFunction::zero(local.grid(), local.weight);
        hypothesis_norm = weighted_norm(&picard_step(&zero, &h, n, &local)?);
        if hypothesis_norm <= bound {
            break;
        }
        local.interval_end *= 0.5;
    }
    if hypothesis_norm > bound {
        return Err(Error::NoConvergence(format!(
            "approximate-solution hypothesis ||T(0)|| <= (p-L)/p*R failed down to \
             S = {:.3e}: {hypothesis_norm:.6e} > {bound:.6e}",
            local.interval_end
        )));
    }

    let grid = local.grid();
    let mut phi = WeightedGridFunction::zero(grid.clone(), local.weight);
    let mut prev_diff: Option<f64> = None;
    let mut ratios = Vec::new();
    let mut final_residual = f64::INFINITY;
    let mut iters = 0;
    // below this, ratio estimates are rounding noise
    let ratio_floor = local.fixed_point_tol * 10.0;

    for k in 0..local.max_iters {
        iters = k + 1;
        let next = picard_step(&phi, &h, n, &local)?;
        let diff = WeightedGridFunction {
            grid: grid.clone(),
            values: next
                .values
                .iter()
                .zip(&phi.values)
                .map(|(a, b)| a - b)
                .collect(),
            weight: local.weight,
        };
        let d = weighted_norm(&diff);
        if let Some(prev) = prev_diff {
            if prev > ratio_floor {
                ratios.push(d / prev);
            }
        }
        prev_diff = Some(d);
        phi = next;
        final_residual = d;
        if d < local.fixed_point_tol {
            break;
        }
    }
    if final_residual >= local.fixed_point_tol {
        let last = ratios.last().copied().unwrap_or(f64::NAN);
        return Err(Error::NoConvergence(format!(
            "no fixed point within {} iterations (last ratio {last:.4})",
            local.max_iters
        )));
    }

    // u = h + phi, with u' from the equation's integrand form
    let nf = n.as_f64();
    let mut out_grid = Vec::with_capacity(grid.len() + 1);
    let mut out_values = Vec::with_capacity(grid.len() + 1);
    let mut out_derivs = Vec::with_capacity(grid.len() + 1);
    out_grid.push(0.0);
    out_values.push(0.0);
    out_derivs.push(f_slope(nf, 0.0, h.origin_slope()));
    for (&r, &phi_r) in grid.iter().zip(&phi.values) {
        let u = h.value(r) + phi_r;
        out_grid.push(r);
        out_values.push(u);
        out_derivs.push(f_slope(nf, r, u / r));
    }
    let profile = RadialProfile::new(
        out_grid,
        out_values,
        out_derivs,
        n,
        MethodParams::Picard {
            weight: local.weight,
            truncation,
            interval_end: local.interval_end,
        },
    )?;

    let max_ratio = ratios.iter().copied().fold(0.0, f64::max);
    Ok((
        profile,
        PicardDiagnostics {
            iters,
            final_residual,
            contraction_ratios: ratios,
            max_ratio,
            interval_end: local.interval_end,
            hypothesis_norm,
            hypothesis_bound: bound,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::{coefficients, eval_series};

    fn dim(n: u32) -> Dimension {
        Dimension::new(n).unwrap()
    }

    fn uniform_grid(to: f64, m: usize) -> Vec<f64> {
        (1..=m).map(|i| to * i as f64 / m as f64).collect()
    }

    #[test]
    fn weighted_norm_examples() {
        // r^2 with weight 2 has norm 1 regardless of the grid
        let grid = uniform_grid(1.0, 50);
        let f = WeightedGridFunction {
            values: grid.iter().map(|r| r * r).collect(),
            grid: grid.clone(),
            weight: 2.0,
        };
        assert!((weighted_norm(&f) - 1.0).abs() < 1e-14);

        // r^3 with weight 2: sup of r on the grid
        let g = WeightedGridFunction {
            values: grid.iter().map(|r| r * r * r).collect(),
            grid: grid.clone(),
            weight: 2.0,
        };
        assert!((weighted_norm(&g) - 1.0).abs() < 1e-14);

        assert_eq!(weighted_norm(&WeightedGridFunction::zero(grid, 2.0)), 0.0);
    }

    #[test]
    fn norm_axioms_on_grid() {
        let grid = uniform_grid(0.5, 40);
        let f = WeightedGridFunction {
            values: grid.iter().map(|r| r.sin() * 0.01).collect(),
            grid: grid.clone(),
            weight: 3.0,
        };
        let g = WeightedGridFunction {
            values: grid.iter().map(|r| r * r * 0.02).collect(),
            grid: grid.clone(),
            weight: 3.0,
        };
        // homogeneity
        let scaled = WeightedGridFunction {
            values: f.values.iter().map(|v| v * -2.5).collect(),
            grid: grid.clone(),
            weight: 3.0,
        };
        assert!((weighted_norm(&scaled) - 2.5 * weighted_norm(&f)).abs() < 1e-12);
        // triangle inequality
        let sum = WeightedGridFunction {
            values: f.values.iter().zip(&g.values).map(|(a, b)| a + b).collect(),
            grid,
            weight: 3.0,
        };
        assert!(weighted_norm(&sum) <= weighted_norm(&f) + weighted_norm(&g) + 1e-15);
    }

    #[test]
    fn hypothesis_holds_for_good_approximants() {
        // a long truncation is an excellent approximate solution
        let n = dim(2);
        let config = PicardConfig::default_for(n);
        let h = approx_polynomial(n, 6).unwrap();
        let zero = WeightedGridFunction::zero(config.grid(), config.weight);
        let t0 = weighted_norm(&picard_step(&zero, &h, n, &config).unwrap());
        let bound = (config.weight - config.lipschitz) / config.weight * config.ball_radius;
        assert!(t0 <= bound, "||T(0)|| = {t0:.3e} > {bound:.3e}");
    }

    #[test]
    fn step_rejects_norm_outside_ball() {
        let n = dim(2);
        let config = PicardConfig::default_for(n);
        let grid = config.grid();
        let h = approx_polynomial(n, 3).unwrap();
        let huge = WeightedGridFunction {
            values: grid.iter().map(|r| 10.0 * r).collect(),
            grid,
            weight: config.weight,
        };
        assert!(picard_step(&huge, &h, n, &config).is_err());
    }

    #[test]
    fn contraction_on_iterate_pairs() {
        // ||T(phi) - T(psi)|| <= (L/p)||phi - psi|| + quadrature slack
        let n = dim(2);
        let config = PicardConfig::default_for(n);
        let grid = config.grid();
        let h = approx_polynomial(n, 3).unwrap();
        let p = config.weight;
        let make = |scale: f64| WeightedGridFunction {
            values: grid.iter().map(|r| scale * r.powf(p)).collect(),
            grid: grid.clone(),
            weight: p,
        };
        let phi = make(0.3);
        let psi = make(-0.2);
        let t_phi = picard_step(&phi, &h, n, &config).unwrap();
        let t_psi = picard_step(&psi, &h, n, &config).unwrap();
        let num = weighted_norm(&WeightedGridFunction {
            values: t_phi.values.iter().zip(&t_psi.values).map(|(a, b)| a - b).collect(),
            grid: grid.clone(),
            weight: p,
        });
        let den = weighted_norm(&WeightedGridFunction {
            values: phi.values.iter().zip(&psi.values).map(|(a, b)| a - b).collect(),
            grid,
            weight: p,
        });
        assert!(
            num <= config.lipschitz / p * den * 1.05,
            "contraction factor {:.4} above L/p = {:.4}",
            num / den,
            config.lipschitz / p
        );
    }

    #[test]
    fn solves_to_series_accuracy() {
        let n = dim(2);
        let config = PicardConfig::default_for(n);
        let (profile, diag) = picard_solve(n, 3, &config).unwrap();
        // phi(0) = 0 in the returned profile
        assert_eq!(profile.grid()[0], 0.0);
        assert_eq!(profile.values()[0], 0.0);
        // every measured ratio respects the contraction bound with slack
        let bound = n.as_f64() / (n.as_f64() + 1.0) + 0.05;
        for (i, rho) in diag.contraction_ratios.iter().enumerate() {
            assert!(*rho <= bound, "ratio {rho:.4} at iteration {i}");
        }
        // the fixed point reproduces the series on (0, S]
        let table = coefficients(n, 60).unwrap();
        let mut worst = 0.0_f64;
        for (&r, &u) in profile.grid().iter().zip(profile.values()).skip(1) {
            let (series_u, _) = eval_series(&table, r, 60).unwrap();
            worst = worst.max((u - series_u).abs());
        }
        assert!(worst < 1e-8, "max deviation from series {worst:.3e}");
        assert!(diag.iters < config.max_iters);
        assert!(diag.hypothesis_norm <= diag.hypothesis_bound);
    }

    #[test]
    fn iterates_stay_in_ball() {
        let n = dim(3);
        let config = PicardConfig::default_for(n);
        let h = approx_polynomial(n, 3).unwrap();
        let mut phi = WeightedGridFunction::zero(config.grid(), config.weight);
        for _ in 0..12 {
            phi = picard_step(&phi, &h, n, &config).unwrap();
            assert!(weighted_norm(&phi) <= config.ball_radius + 1e-12);
        }
    }

    #[test]
    fn config_validation() {
        let n = dim(2);
        let mut c = PicardConfig::default_for(n);
        c.weight = 1.5; // not above L = 2
        assert!(c.validate().is_err());
        let mut c = PicardConfig::default_for(n);
        c.interval_end = 1.5;
        assert!(c.validate().is_err());
    }
}
