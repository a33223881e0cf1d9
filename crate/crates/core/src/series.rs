//! Exact rational power-series machinery.
//!
//! Writing `φ(r) = ψ(r/n)` with `ψ(x) = Σ a_l x^(2l+1)` turns the profile
//! equation into `ψ' = (1+ψ²)(n − (n−1)ψ(x)/x)`, and matching powers gives
//! the recursion implemented by [`coefficients`]:
//!
//! ```text
//! a_0 = 1,   a_1 = 1/(n+2),
//! (2l+n)·a_l = −(n−1)·Σ a_i a_j a_k  +  (3−2n)·Σ a_i a_j  +  (3−n)·a_{l−1}
//! ```
//!
//! with the sums running over positive indices summing to `l−1`. Everything
//! in this module is computed in exact arbitrary-precision rationals to
//! avoid rounding errors; floats appear only at the evaluation and
//! estimation boundaries ([`eval_series`], [`estimate_radius`],
//! [`check_decay_rate`]).
//!
//! The decay estimate `|a_l| ≤ 1/(4l)` (valid for `n ∈ {2,3,4}`) rests on
//! uniform bounds for the reciprocal convolution sums `Σ₂` and `Σ₃`, which
//! [`sigma2_table`] and [`sigma3_table`] compute exactly.

use num_bigint::BigInt;
use num_traits::{Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::profile::Dimension;

/// Exact fraction: arbitrary-precision, always reduced, denominator > 0.
pub type Rational = num_rational::BigRational;

/// `p/q` as an exact rational.
pub fn ratio(p: i64, q: i64) -> Rational {
    Rational::new(BigInt::from(p), BigInt::from(q))
}

fn int(p: i64) -> Rational {
    Rational::from_integer(BigInt::from(p))
}

/// Nearest double to an exact rational.
///
/// Works at any magnitude: numerator and denominator are rescaled by a
/// common power of two before conversion, so values far outside the range
/// of `f64`-representable integers still round correctly (underflowing to
/// zero only below the subnormal range).
pub fn rational_to_f64(x: &Rational) -> f64 {
    if x.is_zero() {
        return 0.0;
    }
    let nbits = x.numer().bits() as i64;
    let dbits = x.denom().bits() as i64;
    // shift the quotient to roughly 64 significant bits
    let s = 64 - (nbits - dbits);
    let q = if s >= 0 {
        (x.numer() << s as u64) / x.denom()
    } else {
        x.numer() / (x.denom() << (-s) as u64)
    };
    let q = q.to_f64().unwrap_or(0.0);
    if s >= 0 {
        q * 2_f64.powi(-(s.min(2200)) as i32)
    } else {
        q * 2_f64.powi((-s).min(2200) as i32)
    }
}

/// GMP-backed exact arithmetic for the hot loops. The results are stored
/// as [`Rational`] either way; only the arithmetic engine differs.
#[cfg(feature = "gmp")]
mod backend {
    use num_bigint::{BigInt, Sign};
    use rug::Rational as Q;

    use super::Rational;

    fn to_bigint(x: &rug::Integer) -> BigInt {
        let sign = match x.cmp0() {
            std::cmp::Ordering::Less => Sign::Minus,
            std::cmp::Ordering::Equal => Sign::NoSign,
            std::cmp::Ordering::Greater => Sign::Plus,
        };
        BigInt::from_bytes_le(sign, &x.to_digits::<u8>(rug::integer::Order::Lsf))
    }

    fn export(x: &Q) -> Rational {
        // canonical in GMP means reduced with positive denominator
        Rational::new_raw(to_bigint(x.numer()), to_bigint(x.denom()))
    }

    pub(super) fn sigma2_table(max_l: usize) -> Vec<Rational> {
        let mut out = Vec::with_capacity(max_l + 1);
        for l in 0..=max_l {
            let mut total = Q::new();
            for i in 1..l {
                total += Q::from((1, (i * (l - i)) as i64));
            }
            out.push(export(&total));
        }
        out
    }

    pub(super) fn sigma3_from_sigma2(sigma2: &[Rational]) -> Vec<Rational> {
        let s2: Vec<Q> = sigma2
            .iter()
            .map(|x| {
                Q::from((
                    rug::Integer::from_str_radix(&x.numer().to_str_radix(16), 16).unwrap(),
                    rug::Integer::from_str_radix(&x.denom().to_str_radix(16), 16).unwrap(),
                ))
            })
            .collect();
        let mut out = Vec::with_capacity(s2.len());
        for l in 0..s2.len() {
            let mut total = Q::new();
            if l >= 3 {
                for i in 1..=(l - 2) {
                    total += s2[l - i].clone() / i as i64;
                }
            }
            out.push(export(&total));
        }
        out
    }

    pub(super) fn coefficient_recursion(n: i64, l_max: usize) -> Vec<Rational> {
        let mut a: Vec<Q> = Vec::with_capacity(l_max + 1);
        a.push(Q::from(1));
        if l_max >= 1 {
            a.push(Q::from((1, n + 2)));
        }
        let mut pair: Vec<Q> = vec![Q::new(); l_max + 1];
        for l in 2..=l_max {
            let m = l - 1;
            let mut pm = Q::new();
            for i in 1..=(m - 1) / 2 {
                pm += a[i].clone() * &a[m - i];
            }
            pm *= 2;
            if m % 2 == 0 {
                pm += a[m / 2].clone() * &a[m / 2];
            }
            pair[m] = pm;

            let mut tm = Q::new();
            if m >= 3 {
                for k in 1..=(m - 2) {
                    tm += a[k].clone() * &pair[m - k];
                }
            }

            let numer =
                tm * -(n - 1) + pair[m].clone() * (-2 * n + 3) + a[m].clone() * (-n + 3);
            a.push(numer / (2 * l as i64 + n));
        }
        a.iter().map(export).collect()
    }
}

/// Pure-Rust exact arithmetic, used when the `gmp` feature is off.
#[cfg(not(feature = "gmp"))]
mod backend {
    use num_bigint::BigInt;
    use num_traits::Zero;

    use super::Rational;

    pub(super) fn sigma2_table(max_l: usize) -> Vec<Rational> {
        let mut out = Vec::with_capacity(max_l + 1);
        for l in 0..=max_l {
            let mut total = Rational::zero();
            for i in 1..l {
                total += Rational::new(BigInt::from(1), BigInt::from((i * (l - i)) as i64));
            }
            out.push(total);
        }
        out
    }

    pub(super) fn sigma3_from_sigma2(sigma2: &[Rational]) -> Vec<Rational> {
        let mut out = Vec::with_capacity(sigma2.len());
        for l in 0..sigma2.len() {
            let mut total = Rational::zero();
            if l >= 3 {
                for i in 1..=(l - 2) {
                    total += &sigma2[l - i] * Rational::new(BigInt::from(1), BigInt::from(i as i64));
                }
            }
            out.push(total);
        }
        out
    }

    pub(super) fn coefficient_recursion(n: i64, l_max: usize) -> Vec<Rational> {
        let one = Rational::from_integer(BigInt::from(1));
        let mut a: Vec<Rational> = Vec::with_capacity(l_max + 1);
        a.push(one);
        if l_max >= 1 {
            a.push(Rational::new(BigInt::from(1), BigInt::from(n + 2)));
        }
        let c3 = Rational::from_integer(BigInt::from(-(n - 1)));
        let c2 = Rational::from_integer(BigInt::from(-2 * n + 3));
        let c1 = Rational::from_integer(BigInt::from(-n + 3));
        let mut pair: Vec<Rational> = vec![Rational::zero(); l_max + 1];
        for l in 2..=l_max {
            let m = l - 1;
            let mut pm = Rational::zero();
            for i in 1..=(m - 1) / 2 {
                pm += &a[i] * &a[m - i];
            }
            pm = &pm + &pm;
            if m % 2 == 0 {
                pm += &a[m / 2] * &a[m / 2];
            }
            pair[m] = pm;

            let mut tm = Rational::zero();
            if m >= 3 {
                for k in 1..=(m - 2) {
                    tm += &a[k] * &pair[m - k];
                }
            }

            let numer = &c3 * &tm + &c2 * &pair[m] + &c1 * &a[m];
            a.push(numer / Rational::from_integer(BigInt::from(2 * l as i64 + n)));
        }
        a
    }
}

/// `Σ₂ˡ = Σ_{i,j≥1, i+j=l} 1/(ij)`, exactly. Zero for `l < 2`.
pub fn sigma2(l: usize) -> Rational {
    backend::sigma2_table(l).pop().unwrap()
}

/// All `Σ₂⁰ … Σ₂^max_l`.
pub fn sigma2_table(max_l: usize) -> Vec<Rational> {
    backend::sigma2_table(max_l)
}

/// All `Σ₃⁰ … Σ₃^max_l`, computed by convolving `1/i` with the cached
/// `Σ₂` values: `Σ₃ˡ = Σ_{i=1}^{l−2} (1/i)·Σ₂^{l−i}`.
pub fn sigma3_table(max_l: usize) -> Vec<Rational> {
    backend::sigma3_from_sigma2(&backend::sigma2_table(max_l))
}

/// `Σ₃ˡ = Σ_{i,j,k≥1, i+j+k=l} 1/(ijk)`, exactly. Zero for `l < 3`.
pub fn sigma3(l: usize) -> Rational {
    sigma3_table(l).pop().unwrap()
}

/// Exact tables of both reciprocal convolution sums.
#[derive(Debug, Clone)]
pub struct SumTable {
    pub sigma2: Vec<Rational>,
    pub sigma3: Vec<Rational>,
}

pub fn sum_tables(max_l: usize) -> SumTable {
    SumTable {
        sigma2: sigma2_table(max_l),
        sigma3: sigma3_table(max_l),
    }
}

/// The exact coefficients `a_0 … a_L` of `ψ` for one dimension, with
/// cached double-precision values for evaluation.
#[derive(Debug, Clone)]
pub struct CoefficientTable {
    dimension: Dimension,
    coeffs: Vec<Rational>,
    floats: Vec<f64>,
}

impl CoefficientTable {
    pub fn dimension(&self) -> Dimension {
        self.dimension
    }

    /// Number of stored coefficients (`L + 1`).
    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn get(&self, l: usize) -> &Rational {
        &self.coeffs[l]
    }

    pub fn coeffs(&self) -> &[Rational] {
        &self.coeffs
    }

    pub fn float(&self, l: usize) -> f64 {
        self.floats[l]
    }
}

/// Build `a_0 … a_{l_max}` by the coefficient recursion, exactly.
///
/// The triple sum is folded through a cached table of pair sums
/// `P_m = Σ_{i+j=m} a_i a_j` (so `Σ_{i+j+k=m} a_i a_j a_k = Σ_k a_k·P_{m−k}`),
/// which turns an `O(L³)` recursion into `O(L²)` exact multiplications.
pub fn coefficients(n: Dimension, l_max: usize) -> Result<CoefficientTable> {
    n.require_at_least_two()?;
    let a = backend::coefficient_recursion(i64::from(n.get()), l_max);
    let floats = a.iter().map(rational_to_f64).collect();
    Ok(CoefficientTable {
        dimension: n,
        coeffs: a,
        floats,
    })
}

/// The same coefficients from the recursion before cancellation,
/// `(2l+n)·a_l = n·Σ_{i+j=l−1, i,j≥0} a_i a_j − (n−1)·Σ_{i+j+k=l−1, ≥0} a_i a_j a_k`,
/// evaluated with plain nested sums. Used as the independent cross-check
/// route for [`coefficients`].
pub fn coefficients_precancel(n: Dimension, l_max: usize) -> Result<Vec<Rational>> {
    n.require_at_least_two()?;
    let nf = i64::from(n.get());
    let mut a: Vec<Rational> = vec![int(1)];
    for l in 1..=l_max {
        let m = l - 1;
        let mut dbl = Rational::zero();
        for i in 0..=m {
            dbl += &a[i] * &a[m - i];
        }
        let mut trp = Rational::zero();
        for i in 0..=m {
            for j in 0..=(m - i) {
                trp += &a[i] * &a[j] * &a[m - i - j];
            }
        }
        let numer = int(nf) * dbl - int(nf - 1) * trp;
        a.push(numer / int(2 * l as i64 + nf));
    }
    Ok(a)
}

/// Evaluate `φ(r) = Σ_{l≤M} a_l (r/n)^(2l+1)` and its termwise derivative
/// by Horner accumulation in `(r/n)²`.
///
/// Meaningful for `|r|` inside the convergence radius (which is below `n`;
/// see [`estimate_radius`]); outside it the partial sums diverge.
pub fn eval_series(table: &CoefficientTable, r: f64, truncation: usize) -> Result<(f64, f64)> {
    if truncation >= table.len() {
        return Err(Error::Config(format!(
            "truncation {} exceeds table length {}",
            truncation,
            table.len()
        )));
    }
    let n = table.dimension.as_f64();
    let x = r / n;
    let x2 = x * x;
    let mut s = 0.0; // Σ a_l z^l at z = x²
    let mut sd = 0.0; // Σ (2l+1) a_l z^l
    for l in (0..=truncation).rev() {
        let a = table.floats[l];
        s = s * x2 + a;
        sd = sd * x2 + (2 * l + 1) as f64 * a;
    }
    Ok((x * s, sd / n))
}

/// Outcome of the exact check `|a_l| ≤ 1/(4l)` over a table.
#[derive(Debug, Clone, serde::Serialize)]
pub struct DecayReport {
    pub n: u32,
    pub max_l: usize,
    pub violations: Vec<usize>,
    pub all_pass: bool,
}

/// Exact rational comparison `|a_l| ≤ 1/(4l)` for every stored `l ≥ 1`.
///
/// For `n ∈ {2,3,4}` every entry passes; for larger `n` the bound
/// eventually fails and the report lists where.
pub fn check_decay_bound(table: &CoefficientTable) -> DecayReport {
    let mut violations = Vec::new();
    for l in 1..table.len() {
        let bound = Rational::new(BigInt::from(1), BigInt::from(4 * l as i64));
        if table.coeffs[l].abs() > bound {
            violations.push(l);
        }
    }
    DecayReport {
        n: table.dimension.get(),
        max_l: table.len().saturating_sub(1),
        all_pass: violations.is_empty(),
        violations,
    }
}

/// First violation of the `1/(4l)` bound, if any.
pub fn first_decay_violation(table: &CoefficientTable) -> Option<usize> {
    check_decay_bound(table).violations.first().copied()
}

/// Estimate the convergence radius of `φ` from the tail decay of the
/// coefficients: a least-squares fit of `−log|a_l|` against `l` over the
/// window gives a rate `λ̂`, and the root test on `a_l (r/n)^(2l+1)` turns
/// it into the radius `n·exp(λ̂/2)`. Zero coefficients are skipped.
pub fn estimate_radius(table: &CoefficientTable, window: (usize, usize)) -> Result<f64> {
    let (lo, hi) = window;
    if hi >= table.len() || lo >= hi {
        return Err(Error::Config(format!(
            "window ({lo}, {hi}) does not fit table of length {}",
            table.len()
        )));
    }
    let pts: Vec<(f64, f64)> = (lo..=hi)
        .filter(|&l| !table.coeffs[l].is_zero())
        .map(|l| (l as f64, -table.float(l).abs().ln()))
        .collect();
    if pts.len() < 4 {
        return Err(Error::Config(format!(
            "only {} usable points in window ({lo}, {hi}); need at least 4",
            pts.len()
        )));
    }
    let m = pts.len() as f64;
    let mean_x = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let mean_y = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mean_x) * (p.1 - mean_y)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mean_x) * (p.0 - mean_x)).sum();
    let slope = sxy / sxx;
    Ok(table.dimension.as_f64() * (slope / 2.0).exp())
}

/// Largest `λ` with `|a_l| ≤ e^(−λl)` across the whole table, i.e. the
/// minimum of `−log|a_l|/l` over `l ≥ 1` (zero coefficients skipped).
/// Needs at least 100 coefficients to say anything about decay rates.
pub fn check_decay_rate(table: &CoefficientTable) -> Result<f64> {
    if table.len() < 100 {
        return Err(Error::Config(format!(
            "table of length {} too short for a rate estimate (need >= 100)",
            table.len()
        )));
    }
    let mut lambda = f64::INFINITY;
    for l in 1..table.len() {
        if table.coeffs[l].is_zero() {
            continue;
        }
        lambda = lambda.min(-table.float(l).abs().ln() / l as f64);
    }
    Ok(lambda)
}

// ---------------------------------------------------------------------------
// Polynomial approximate solutions and their exact residual order
// ---------------------------------------------------------------------------

/// Dense polynomial over exact rationals; only what the residual
/// expansion needs.
#[derive(Debug, Clone, PartialEq)]
struct RatPoly(Vec<Rational>);

impl RatPoly {
    fn zero() -> Self {
        RatPoly(vec![])
    }

    fn constant(c: Rational) -> Self {
        RatPoly(vec![c])
    }

    fn coeff(&self, j: usize) -> Rational {
        self.0.get(j).cloned().unwrap_or_else(Rational::zero)
    }

    fn add(&self, other: &RatPoly) -> RatPoly {
        let len = self.0.len().max(other.0.len());
        RatPoly((0..len).map(|j| self.coeff(j) + other.coeff(j)).collect())
    }

    fn sub(&self, other: &RatPoly) -> RatPoly {
        let len = self.0.len().max(other.0.len());
        RatPoly((0..len).map(|j| self.coeff(j) - other.coeff(j)).collect())
    }

    fn mul(&self, other: &RatPoly) -> RatPoly {
        if self.0.is_empty() || other.0.is_empty() {
            return RatPoly::zero();
        }
        let mut out = vec![Rational::zero(); self.0.len() + other.0.len() - 1];
        for (i, a) in self.0.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in other.0.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        RatPoly(out)
    }

    fn scale(&self, c: &Rational) -> RatPoly {
        RatPoly(self.0.iter().map(|a| a * c).collect())
    }

    fn derivative(&self) -> RatPoly {
        if self.0.len() <= 1 {
            return RatPoly::zero();
        }
        RatPoly(
            self.0[1..]
                .iter()
                .enumerate()
                .map(|(i, a)| a * int(i as i64 + 1))
                .collect(),
        )
    }

    /// Divide by `r`; valid only when the constant term vanishes.
    fn shift_down(&self) -> RatPoly {
        debug_assert!(self.0.is_empty() || self.0[0].is_zero());
        if self.0.len() <= 1 {
            return RatPoly::zero();
        }
        RatPoly(self.0[1..].to_vec())
    }

    fn lowest_nonzero(&self) -> Option<usize> {
        self.0.iter().position(|c| !c.is_zero())
    }
}

/// An odd polynomial `h(r) = Σ_{l≤M} a_l (r/n)^(2l+1)` used as approximate
/// solution, with its declared residual order `2M+2` at the origin.
#[derive(Debug, Clone)]
pub struct ApproxPolynomial {
    dimension: Dimension,
    coeffs: Vec<Rational>,
    floats: Vec<f64>,
    declared_order: usize,
}

impl ApproxPolynomial {
    /// Wrap raw coefficients (entry `j` multiplies `r^j`). `h(0) = 0` is
    /// not enforced here; [`residual_order`] reports the violation as a
    /// pole instead.
    pub fn from_coeffs(
        n: Dimension,
        coeffs: Vec<Rational>,
        declared_order: usize,
    ) -> Result<Self> {
        n.require_at_least_two()?;
        let floats = coeffs.iter().map(rational_to_f64).collect();
        Ok(ApproxPolynomial {
            dimension: n,
            coeffs,
            floats,
            declared_order,
        })
    }

    pub fn dimension(&self) -> Dimension {
        self.dimension
    }

    /// Coefficient of `r^j`.
    pub fn coeff(&self, j: usize) -> Rational {
        self.coeffs.get(j).cloned().unwrap_or_else(Rational::zero)
    }

    /// Coefficient of `r^j` as a double.
    pub fn coeff_f64(&self, j: usize) -> f64 {
        self.floats.get(j).copied().unwrap_or(0.0)
    }

    pub fn degree(&self) -> usize {
        self.coeffs
            .iter()
            .rposition(|c| !c.is_zero())
            .unwrap_or(0)
    }

    pub fn declared_order(&self) -> usize {
        self.declared_order
    }

    pub fn value(&self, r: f64) -> f64 {
        self.floats.iter().rev().fold(0.0, |acc, c| acc * r + c)
    }

    pub fn slope(&self, r: f64) -> f64 {
        let mut acc = 0.0;
        for j in (1..self.floats.len()).rev() {
            acc = acc * r + j as f64 * self.floats[j];
        }
        acc
    }

    /// `h'(0)`, the slope the approximate solution prescribes at the origin.
    pub fn origin_slope(&self) -> f64 {
        self.floats.get(1).copied().unwrap_or(0.0)
    }
}

/// The truncation `h(r) = Σ_{l≤M} a_l (r/n)^(2l+1)` as an explicit odd
/// polynomial of degree `2M+1`. Its residual vanishes to order `2M+2`.
pub fn approx_polynomial(n: Dimension, truncation: usize) -> Result<ApproxPolynomial> {
    let table = coefficients(n, truncation)?;
    let nf = int(i64::from(n.get()));
    let mut coeffs = vec![Rational::zero(); 2 * truncation + 2];
    let mut n_pow = nf.clone(); // n^(2l+1)
    for l in 0..=truncation {
        coeffs[2 * l + 1] = table.get(l) / &n_pow;
        n_pow = &n_pow * &nf * &nf;
    }
    ApproxPolynomial::from_coeffs(n, coeffs, 2 * truncation + 2)
}

/// Exact order of vanishing at `r = 0` of the residual
/// `G(h) = h' − (1+h²)(1 − (n−1)h/r)`, by symbolic polynomial expansion
/// over the rationals (no floating cancellation can misclassify orders).
///
/// A nonzero constant term of `h` makes `G(h)` have a genuine `1/r` pole,
/// which is reported as a domain error.
pub fn residual_order(h: &ApproxPolynomial) -> Result<usize> {
    if !h.coeff(0).is_zero() {
        return Err(Error::Domain(format!(
            "residual has a pole at r = 0: h(0) = {} is nonzero",
            h.coeff(0)
        )));
    }
    let p = RatPoly(h.coeffs.clone());
    let one_plus_h2 = RatPoly::constant(int(1)).add(&p.mul(&p));
    let n_minus_1 = int(i64::from(h.dimension.get()) - 1);
    // (1+h²)·(1 − (n−1)·h/r), with h/r polynomial because h(0) = 0
    let bracket = RatPoly::constant(int(1)).sub(&p.shift_down().scale(&n_minus_1));
    let residual = p.derivative().sub(&one_plus_h2.mul(&bracket));
    residual
        .lowest_nonzero()
        .ok_or_else(|| Error::Domain("residual vanished identically".into()))
}
