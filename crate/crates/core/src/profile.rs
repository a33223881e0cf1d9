//! Shared domain types: the ambient dimension and sampled radial profiles.

use serde::Serialize;

use crate::error::{Error, Result};

/// Ambient dimension `n` of the graph `u: ℝⁿ → ℝ`.
///
/// `n = 1` is allowed only as the explicitly solvable oracle case; every
/// numerical construction requires `n ≥ 2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct Dimension(u32);

impl Dimension {
    pub fn new(n: u32) -> Result<Self> {
        if n < 1 {
            return Err(Error::Dimension { min: 1, got: n });
        }
        Ok(Dimension(n))
    }

    /// Dimension for the solver modules, which all need `n ≥ 2`.
    pub fn at_least_two(n: u32) -> Result<Self> {
        if n < 2 {
            return Err(Error::Dimension { min: 2, got: n });
        }
        Ok(Dimension(n))
    }

    pub fn get(self) -> u32 {
        self.0
    }

    pub fn as_f64(self) -> f64 {
        f64::from(self.0)
    }

    pub(crate) fn require_at_least_two(self) -> Result<Self> {
        if self.0 < 2 {
            return Err(Error::Dimension { min: 2, got: self.0 });
        }
        Ok(self)
    }
}

impl std::fmt::Display for Dimension {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Which construction produced a profile.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodTag {
    Series,
    Shooting,
    Regularized,
    OneOverK,
    Picard,
}

impl MethodTag {
    pub fn as_str(self) -> &'static str {
        match self {
            MethodTag::Series => "series",
            MethodTag::Shooting => "shooting",
            MethodTag::Regularized => "regularized",
            MethodTag::OneOverK => "one_over_k",
            MethodTag::Picard => "picard",
        }
    }
}

impl std::fmt::Display for MethodTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Method-specific scalars recorded alongside a profile, so that any output
/// can be reproduced from its own metadata.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum MethodParams {
    Series { truncation: usize },
    Shooting { a_star: f64, horizon: f64 },
    Regularized { eps: f64 },
    OneOverK { k: u32 },
    Picard { weight: f64, truncation: usize, interval_end: f64 },
}

impl MethodParams {
    pub fn tag(&self) -> MethodTag {
        match self {
            MethodParams::Series { .. } => MethodTag::Series,
            MethodParams::Shooting { .. } => MethodTag::Shooting,
            MethodParams::Regularized { .. } => MethodTag::Regularized,
            MethodParams::OneOverK { .. } => MethodTag::OneOverK,
            MethodParams::Picard { .. } => MethodTag::Picard,
        }
    }

    /// Key/value view for reproducibility comments in exports.
    pub fn describe(&self) -> Vec<(&'static str, String)> {
        match self {
            MethodParams::Series { truncation } => {
                vec![("truncation", truncation.to_string())]
            }
            MethodParams::Shooting { a_star, horizon } => vec![
                ("a_star", format!("{a_star:.16e}")),
                ("horizon", format!("{horizon}")),
            ],
            MethodParams::Regularized { eps } => vec![("eps", format!("{eps:.16e}"))],
            MethodParams::OneOverK { k } => vec![("k", k.to_string())],
            MethodParams::Picard {
                weight,
                truncation,
                interval_end,
            } => vec![
                ("weight", format!("{weight}")),
                ("truncation", truncation.to_string()),
                ("interval_end", format!("{interval_end:.16e}")),
            ],
        }
    }
}

/// A sampled numerical solution `φ` of the profile equation: strictly
/// increasing radii with values and derivative values, plus provenance.
///
/// The grid may include `r = 0`, in which case the stored value there must
/// be `0` (all constructions satisfy `φ(0) = 0`).
#[derive(Debug, Clone, Serialize)]
pub struct RadialProfile {
    grid: Vec<f64>,
    values: Vec<f64>,
    derivs: Vec<f64>,
    dimension: Dimension,
    params: MethodParams,
}

impl RadialProfile {
    pub fn new(
        grid: Vec<f64>,
        values: Vec<f64>,
        derivs: Vec<f64>,
        dimension: Dimension,
        params: MethodParams,
    ) -> Result<Self> {
        if grid.is_empty() {
            return Err(Error::Config("profile grid must be nonempty".into()));
        }
        if grid.len() != values.len() || grid.len() != derivs.len() {
            return Err(Error::Config(format!(
                "profile lengths differ: {} radii, {} values, {} derivatives",
                grid.len(),
                values.len(),
                derivs.len()
            )));
        }
        if grid[0] < 0.0 {
            return Err(Error::Config("profile radii must be >= 0".into()));
        }
        if grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("profile grid must be strictly increasing".into()));
        }
        if grid[0] == 0.0 && values[0] != 0.0 {
            return Err(Error::Config(format!(
                "value at r = 0 must be 0, got {}",
                values[0]
            )));
        }
        Ok(RadialProfile {
            grid,
            values,
            derivs,
            dimension,
            params,
        })
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn derivs(&self) -> &[f64] {
        &self.derivs
    }

    pub fn dimension(&self) -> Dimension {
        self.dimension
    }

    pub fn params(&self) -> &MethodParams {
        &self.params
    }

    pub fn tag(&self) -> MethodTag {
        self.params.tag()
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn covers(&self, r: f64) -> bool {
        r >= self.grid[0] && r <= *self.grid.last().unwrap()
    }

    /// Linear interpolation of `φ(r)` within the covered range.
    pub fn value_at(&self, r: f64) -> Result<f64> {
        self.interpolate(r, &self.values)
    }

    /// Linear interpolation of `φ'(r)` within the covered range.
    pub fn deriv_at(&self, r: f64) -> Result<f64> {
        self.interpolate(r, &self.derivs)
    }

    fn interpolate(&self, r: f64, data: &[f64]) -> Result<f64> {
        if !self.covers(r) {
            return Err(Error::Coverage(format!(
                "{} profile covers [{:.6e}, {:.6e}], requested r = {:.6e}",
                self.tag(),
                self.grid[0],
                self.grid.last().unwrap(),
                r
            )));
        }
        // partition_point returns the first index with grid[i] > r
        let hi = self.grid.partition_point(|&g| g <= r);
        if hi == 0 {
            return Ok(data[0]);
        }
        if hi == self.grid.len() {
            return Ok(*data.last().unwrap());
        }
        let (r0, r1) = (self.grid[hi - 1], self.grid[hi]);
        let t = (r - r0) / (r1 - r0);
        Ok(data[hi - 1] * (1.0 - t) + data[hi] * t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> MethodParams {
        MethodParams::Regularized { eps: 0.5 }
    }

    #[test]
    fn rejects_decreasing_grid() {
        let p = RadialProfile::new(
            vec![0.1, 0.1],
            vec![1.0, 1.0],
            vec![0.0, 0.0],
            Dimension::new(2).unwrap(),
            params(),
        );
        assert!(p.is_err());
    }

    #[test]
    fn rejects_nonzero_value_at_origin() {
        let p = RadialProfile::new(
            vec![0.0, 1.0],
            vec![0.5, 1.0],
            vec![0.0, 0.0],
            Dimension::new(2).unwrap(),
            params(),
        );
        assert!(p.is_err());
    }

    #[test]
    fn interpolates_linearly() {
        let p = RadialProfile::new(
            vec![1.0, 2.0],
            vec![1.0, 3.0],
            vec![0.0, 0.0],
            Dimension::new(2).unwrap(),
            params(),
        )
        .unwrap();
        assert_eq!(p.value_at(1.5).unwrap(), 2.0);
        assert!(p.value_at(2.5).is_err());
    }

    #[test]
    fn dimension_bounds() {
        assert!(Dimension::new(0).is_err());
        assert!(Dimension::new(1).is_ok());
        assert!(Dimension::at_least_two(1).is_err());
        assert!(Dimension::at_least_two(2).is_ok());
    }
}
