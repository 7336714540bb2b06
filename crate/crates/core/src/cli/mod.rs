//! Scenario-driven front end: build a named construction, run its checks
//! over a sample plan and report.

pub mod check;
pub mod registry;
pub mod scenario;

use thiserror::Error;

pub use check::{format_table, run_checks, Check, CheckRecord, Report, RunOptions};
pub use registry::{build, Built, BUILDERS};
pub use scenario::Scenario;

use crate::tensor::curvature::curvature_at;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum CliError {
    #[error("{origin}:{line}:{column}: {message}")]
    Parse { origin: String, line: usize, column: usize, message: String },
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("unknown builder {0}")]
    UnknownBuilder(String),
    #[error("unknown twist {0}")]
    UnknownTwist(String),
    #[error("invalid parameter: {0}")]
    Param(String),
    #[error("cannot build scenario: {0}")]
    Build(String),
}

pub fn run_scenario(s: &Scenario, opts: RunOptions) -> Result<Report, CliError> {
    let b = build(s)?;
    Ok(run_checks(s, &b.checks, opts))
}

/// Report as pretty JSON.
pub fn report_json(r: &Report) -> String {
    serde_json::to_string_pretty(r).expect("reports serialize")
}

/// Fixed-width dump of the metric, Ricci tensor, scalar curvature and the
/// independent Riemann components at a point.
pub fn curvature_summary(s: &Scenario, point: &[f64]) -> Result<String, CliError> {
    let b = build(s)?;
    b.chart.check(point).map_err(|e| CliError::Param(e.to_string()))?;
    let c = curvature_at(&b.metric, point).map_err(|e| CliError::Build(e.to_string()))?;
    let n = c.n;
    let mut out = format!("scenario {} at {:?}\n", s.name, point);
    let mut matrix = |title: &str, m: &crate::tensor::linalg::Mat<f64>| {
        out.push_str(title);
        out.push('\n');
        for i in 0..n {
            let row: Vec<String> = (0..n).map(|j| format!("{:>14.6e}", clean(m[(i, j)]))).collect();
            out.push_str(&row.join(" "));
            out.push('\n');
        }
    };
    matrix("metric g_ab", &c.g);
    matrix("Ricci R_ab", &c.ricci);
    out.push_str(&format!("scalar      {:>14.6}\n", clean(c.scalar)));
    out.push_str(&format!("|Ric|_g     {:>14.6e}\n", clean(c.ricci_norm())));
    out.push_str(&format!("max |R|     {:>14.6e}\n", clean(c.max_riemann())));
    out.push_str("Riemann R_abcd (a < b, c < d, ab <= cd)\n");
    for a in 0..n {
        for bb in a + 1..n {
            for cc in 0..n {
                for d in cc + 1..n {
                    if (a, bb) <= (cc, d) {
                        out.push_str(&format!("  R_{a}{bb}{cc}{d} {:>14.6e}\n", clean(c.r(a, bb, cc, d))));
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Prints -0 as 0 so identical tensors print identically.
fn clean(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x
    }
}

/// Registry listing with parameters and check names.
pub fn list_builders() -> String {
    let mut out = String::new();
    for info in BUILDERS {
        out.push_str(&format!("{}\n  {}\n  construction: {}\n", info.id, info.summary, info.anchor));
        for p in info.params {
            out.push_str(&format!("  param {} (default {}): {}\n", p.name, p.default, p.doc));
        }
        let s = Scenario {
            name: info.id.into(),
            builder: info.id.into(),
            params: Default::default(),
            plan: Default::default(),
            tolerances: Default::default(),
        };
        match build(&s) {
            Ok(b) => {
                for c in &b.checks {
                    out.push_str(&format!("  check {} [{}]\n", c.name, c.anchor));
                }
            }
            Err(e) => out.push_str(&format!("  checks unavailable: {e}\n")),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scen(text: &str) -> Scenario {
        Scenario::from_json(text, "inline").unwrap()
    }

    #[test]
    fn sphere_scalar_printed() {
        let s = scen(r#"{"name": "s", "builder": "round_sphere"}"#);
        let out = curvature_summary(&s, &[std::f64::consts::FRAC_PI_3, 0.0]).unwrap();
        assert!(out.contains("scalar            2.000000"), "{out}");
    }

    #[test]
    fn flat_prints_zeros() {
        let s = scen(r#"{"name": "f", "builder": "flat", "params": {"n": 2}}"#);
        let out = curvature_summary(&s, &[0.1, 0.2]).unwrap();
        assert!(out.contains("R_0101     0.000000e0"), "{out}");
    }

    #[test]
    fn out_of_chart_point_is_rejected() {
        let s = scen(r#"{"name": "f", "builder": "flat", "params": {"n": 2}}"#);
        assert!(curvature_summary(&s, &[3.0, 0.0]).is_err());
        assert!(curvature_summary(&s, &[0.0]).is_err());
    }

    #[test]
    fn listing_is_stable_and_names_checks() {
        let a = list_builders();
        assert_eq!(a, list_builders());
        assert!(a.contains("calabi_chain_ex1_m"));
        for b in BUILDERS {
            let block = a.split(&format!("{}\n", b.id)).nth(1).unwrap();
            assert!(block.lines().nth(2).is_some());
        }
        assert!(a.contains("check twisted-ricci-form-identity ["));
    }

    #[test]
    fn reports_are_deterministic() {
        let s = scen(r#"{"name": "d", "builder": "ak_disk_ex0", "plan": {"seed": 9, "samples": 5}}"#);
        let a = run_scenario(&s, RunOptions::default()).unwrap();
        let b = run_scenario(&s, RunOptions::default()).unwrap();
        assert_eq!(serde_json::to_string(&a.checks).unwrap(), serde_json::to_string(&b.checks).unwrap());
    }
}
