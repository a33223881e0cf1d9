//! Deterministic CSV and JSON emission.
//!
//! Every CSV starts with `#`-prefixed comment lines recording the full
//! configuration, then a header row. Floats print with 17 significant
//! digits so doubles round-trip exactly; identical inputs produce
//! byte-identical output (no timestamps, no locale).

use serde::Serialize;
use std::fmt::Write as _;

use crate::picard::{PicardConfig, PicardDiagnostics};
use crate::profile::RadialProfile;
use crate::series::{CoefficientTable, SumTable};
use crate::shooting::{BracketStep, ShootingResult};
use crate::validate::ValidationReport;
use crate::Trajectory;

/// 17 significant digits; round-trips any finite double.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// `# key=value` comment lines for reproducibility.
pub fn config_comment(pairs: &[(&str, String)]) -> String {
    let mut out = String::new();
    for (k, v) in pairs {
        let _ = writeln!(out, "# {k}={v}");
    }
    out
}

/// Profile as `r,phi,dphi` rows.
pub fn profile_csv(profile: &RadialProfile) -> String {
    let mut pairs = vec![
        ("method", profile.tag().to_string()),
        ("n", profile.dimension().to_string()),
    ];
    for (k, v) in profile.params().describe() {
        pairs.push((k, v));
    }
    let mut out = config_comment(&pairs);
    out.push_str("r,phi,dphi\n");
    for i in 0..profile.len() {
        let _ = writeln!(
            out,
            "{},{},{}",
            format_float(profile.grid()[i]),
            format_float(profile.values()[i]),
            format_float(profile.derivs()[i])
        );
    }
    out
}

/// Coefficient table as `l,numerator,denominator,float_value` rows; the
/// fractions print exactly.
pub fn coefficients_csv(table: &CoefficientTable) -> String {
    let mut out = config_comment(&[
        ("n", table.dimension().to_string()),
        ("max_l", (table.len() - 1).to_string()),
    ]);
    out.push_str("l,numerator,denominator,float_value\n");
    for l in 0..table.len() {
        let c = table.get(l);
        let _ = writeln!(
            out,
            "{l},{},{},{}",
            c.numer(),
            c.denom(),
            format_float(table.float(l))
        );
    }
    out
}

/// Both reciprocal convolution sums as exact fractions.
pub fn sums_csv(sums: &SumTable) -> String {
    let max_l = sums.sigma2.len() - 1;
    let mut out = config_comment(&[("max_l", max_l.to_string())]);
    out.push_str("l,sigma2_numerator,sigma2_denominator,sigma3_numerator,sigma3_denominator\n");
    for l in 0..=max_l {
        let s2 = &sums.sigma2[l];
        let s3 = &sums.sigma3[l];
        let _ = writeln!(out, "{l},{},{},{},{}", s2.numer(), s2.denom(), s3.numer(), s3.denom());
    }
    out
}

/// Verdict summary of the exact sum bounds.
#[derive(Debug, Clone, Serialize)]
pub struct SumsReport {
    pub max_l: usize,
    /// `Σ₂ˡ ≤ 1` for every stored `l`.
    pub sigma2_bound_holds: bool,
    /// Indices where `Σ₂ˡ = 1` exactly.
    pub sigma2_equality_at: Vec<usize>,
    /// `Σ₃ˡ ≤ 2` for every stored `l ≥ 3`.
    pub sigma3_bound_holds: bool,
    pub first_sigma2_violation: Option<usize>,
    pub first_sigma3_violation: Option<usize>,
}

pub fn sums_report(sums: &SumTable) -> SumsReport {
    use num_traits::One;
    let one = crate::series::Rational::one();
    let two = &one + &one;
    let mut equality = Vec::new();
    let mut v2 = None;
    let mut v3 = None;
    for (l, s) in sums.sigma2.iter().enumerate() {
        if s == &one {
            equality.push(l);
        }
        if s > &one && v2.is_none() {
            v2 = Some(l);
        }
    }
    for (l, s) in sums.sigma3.iter().enumerate().skip(3) {
        if s > &two && v3.is_none() {
            v3 = Some(l);
        }
    }
    SumsReport {
        max_l: sums.sigma2.len() - 1,
        sigma2_bound_holds: v2.is_none(),
        sigma2_equality_at: equality,
        sigma3_bound_holds: v3.is_none(),
        first_sigma2_violation: v2,
        first_sigma3_violation: v3,
    }
}

/// Accepted shooting trajectory as `r,psi,w,upper_barrier` rows, where
/// `w = eʳψ(r)` and the barrier is `e⁻ʳ/(n−1)`.
pub fn shooting_csv(result: &ShootingResult) -> String {
    let nf = result.dimension.as_f64();
    let mut out = config_comment(&[
        ("n", result.dimension.to_string()),
        ("a_star", format_float(result.a_star)),
        ("horizon", format_float(result.final_horizon)),
    ]);
    out.push_str("r,psi,w,upper_barrier\n");
    for (&r, &psi) in result.psi.grid.iter().zip(&result.psi.values) {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            format_float(r),
            format_float(psi),
            format_float(r.exp() * psi),
            format_float((-r).exp() / (nf - 1.0))
        );
    }
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct ShootingReport {
    pub n: u32,
    pub a_star: f64,
    pub final_horizon: f64,
    pub bracket_history: Vec<BracketStep>,
}

pub fn shooting_json(result: &ShootingResult) -> String {
    let report = ShootingReport {
        n: result.dimension.get(),
        a_star: result.a_star,
        final_horizon: result.final_horizon,
        bracket_history: result.bracket_history.clone(),
    };
    serde_json::to_string_pretty(&report).expect("report serialization cannot fail")
}

/// Fixed-point diagnostics under their conventional parameter names.
#[derive(Debug, Clone, Serialize)]
pub struct PicardReport {
    pub n: u32,
    pub p: f64,
    #[serde(rename = "L")]
    pub lipschitz: f64,
    #[serde(rename = "R")]
    pub ball_radius: f64,
    #[serde(rename = "S")]
    pub interval_end: f64,
    pub iters: usize,
    pub final_residual: f64,
    pub max_ratio: f64,
    pub ratio_history: Vec<f64>,
}

pub fn picard_json(n: u32, config: &PicardConfig, diag: &PicardDiagnostics) -> String {
    let report = PicardReport {
        n,
        p: config.weight,
        lipschitz: config.lipschitz,
        ball_radius: config.ball_radius,
        interval_end: diag.interval_end,
        iters: diag.iters,
        final_residual: diag.final_residual,
        max_ratio: diag.max_ratio,
        ratio_history: diag.contraction_ratios.clone(),
    };
    serde_json::to_string_pretty(&report).expect("report serialization cannot fail")
}

/// One family of curves as `curve,r,y` rows (long format, one row per
/// sample). `extra` appends derived columns per row.
pub fn curves_csv(
    comment: &[(&str, String)],
    header: &str,
    curves: &[(String, &Trajectory)],
    extra: impl Fn(f64, f64) -> Vec<String>,
) -> String {
    let mut out = config_comment(comment);
    out.push_str(header);
    out.push('\n');
    for (label, t) in curves {
        for (&r, &y) in t.grid.iter().zip(&t.values) {
            let mut row = format!("{label},{},{}", format_float(r), format_float(y));
            for col in extra(r, y) {
                row.push(',');
                row.push_str(&col);
            }
            out.push_str(&row);
            out.push('\n');
        }
    }
    out
}

pub fn validation_json(report: &ValidationReport) -> String {
    serde_json::to_string_pretty(report).expect("report serialization cannot fail")
}

/// `n,radius_estimate` rows.
pub fn radius_csv(rows: &[(u32, f64)], window: (usize, usize), max_l: usize) -> String {
    let mut out = config_comment(&[
        ("window", format!("{}..{}", window.0, window.1)),
        ("max_l", max_l.to_string()),
    ]);
    out.push_str("n,radius_estimate\n");
    for (n, radius) in rows {
        let _ = writeln!(out, "{n},{}", format_float(*radius));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::{Dimension, MethodParams};
    use crate::series::{coefficients, sum_tables};

    #[test]
    fn float_formatting_roundtrips() {
        for &x in &[0.1, 1.0 / 3.0, 2.0_f64.sqrt(), 1e-300, -4.625] {
            let s = format_float(x);
            let back: f64 = s.parse().unwrap();
            assert_eq!(back, x, "{s}");
        }
    }

    #[test]
    fn csv_outputs_are_deterministic() {
        let table = coefficients(Dimension::new(2).unwrap(), 10).unwrap();
        let csv = coefficients_csv(&table);
        assert_eq!(csv, coefficients_csv(&table));
        assert!(csv.starts_with("# n=2\n# max_l=10\n"));
        assert!(csv.contains("l,numerator,denominator,float_value"));
        assert!(csv.contains("1,1,4,2.5000000000000000e-1"));
    }

    #[test]
    fn sums_report_flags_equalities() {
        let sums = sum_tables(10);
        let report = sums_report(&sums);
        assert!(report.sigma2_bound_holds);
        assert!(report.sigma3_bound_holds);
        assert_eq!(report.sigma2_equality_at, vec![2, 3]);
    }

    #[test]
    fn profile_csv_has_config_comment() {
        let p = RadialProfile::new(
            vec![0.5, 1.0],
            vec![0.2, 0.4],
            vec![0.4, 0.3],
            Dimension::new(2).unwrap(),
            MethodParams::OneOverK { k: 2 },
        )
        .unwrap();
        let csv = profile_csv(&p);
        assert!(csv.starts_with("# method=one_over_k\n# n=2\n# k=2\n"));
        assert!(csv.contains("r,phi,dphi\n"));
    }
}
