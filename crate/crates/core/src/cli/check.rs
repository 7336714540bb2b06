//! Named checks, their evaluation over a sample plan and the report records.

use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::scenario::Scenario;
use crate::error::Result;
use crate::sampling::SamplePlan;
use crate::tensor::fields::ChartManifold;

/// Residual at one point; `None` marks a point excluded by the check's own
/// precondition.
pub type PointFn = Arc<dyn Fn(&[f64]) -> Result<Option<f64>> + Send + Sync>;
/// A check that needs the whole plan at once (verdicts).
pub type PlanFn = Arc<dyn Fn(&SamplePlan) -> Result<Outcome> + Send + Sync>;

/// How the residual is compared with the threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bound {
    /// Pass iff the largest residual is at most the tolerance.
    AtMost,
    /// Pass iff the largest value reaches the threshold (negative controls).
    AtLeast,
    /// Residual is 0 for the expected discrete outcome and 1 otherwise; the
    /// tolerance is fixed at 0.
    Exact,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub used: usize,
    pub excluded: usize,
    pub max: f64,
    pub mean: f64,
    pub note: Option<String>,
}

#[derive(Clone)]
pub enum Source {
    Points { chart: ChartManifold, margin: Option<f64>, eval: PointFn },
    Plan(PlanFn),
}

#[derive(Clone)]
pub struct Check {
    pub name: String,
    /// The formula being checked.
    pub anchor: String,
    pub bound: Bound,
    pub threshold: f64,
    pub source: Source,
}

impl Check {
    pub fn at_most(name: &str, anchor: &str, tol: f64, chart: &ChartManifold, eval: impl Fn(&[f64]) -> Result<Option<f64>> + Send + Sync + 'static) -> Self {
        Check {
            name: name.into(),
            anchor: anchor.into(),
            bound: Bound::AtMost,
            threshold: tol,
            source: Source::Points { chart: chart.clone(), margin: None, eval: Arc::new(eval) },
        }
    }

    pub fn at_least(name: &str, anchor: &str, floor: f64, chart: &ChartManifold, eval: impl Fn(&[f64]) -> Result<Option<f64>> + Send + Sync + 'static) -> Self {
        Check { bound: Bound::AtLeast, ..Check::at_most(name, anchor, floor, chart, eval) }
    }

    pub fn exact(name: &str, anchor: &str, eval: impl Fn(&SamplePlan) -> Result<Outcome> + Send + Sync + 'static) -> Self {
        Check { name: name.into(), anchor: anchor.into(), bound: Bound::Exact, threshold: 0.0, source: Source::Plan(Arc::new(eval)) }
    }

    /// Samples with the given margin instead of the plan's.
    pub fn with_margin(mut self, m: f64) -> Self {
        if let Source::Points { margin, .. } = &mut self.source {
            *margin = Some(m);
        }
        self
    }

    pub fn run(&self, plan: &SamplePlan) -> CheckRecord {
        let mut rec = CheckRecord {
            name: self.name.clone(),
            anchor: self.anchor.clone(),
            bound: self.bound,
            tolerance: self.threshold,
            points_used: 0,
            points_excluded: 0,
            max_residual: None,
            mean_residual: None,
            pass: false,
            note: None,
            error: None,
        };
        match self.evaluate(plan) {
            Ok(o) => {
                rec.points_used = o.used;
                rec.points_excluded = o.excluded;
                rec.note = o.note;
                if o.used > 0 {
                    rec.max_residual = Some(o.max);
                    rec.mean_residual = Some(o.mean);
                    rec.pass = match self.bound {
                        Bound::AtMost | Bound::Exact => o.max <= self.threshold,
                        Bound::AtLeast => o.max >= self.threshold,
                    };
                } else {
                    rec.error = Some("no sample point satisfied the check's precondition".into());
                }
            }
            Err(e) => rec.error = Some(e.to_string()),
        }
        rec
    }

    fn evaluate(&self, plan: &SamplePlan) -> Result<Outcome> {
        match &self.source {
            Source::Plan(f) => f(plan),
            Source::Points { chart, margin, eval } => {
                let plan = match margin {
                    Some(m) => plan.with_margin(*m),
                    None => *plan,
                };
                let pts = chart.sample(&plan)?;
                let vals: Vec<Result<Option<f64>>> = pts.par_iter().map(|p| eval(p)).collect();
                let mut o = Outcome { used: 0, excluded: 0, max: 0.0, mean: 0.0, note: None };
                for (p, v) in pts.iter().zip(vals) {
                    match v? {
                        None => o.excluded += 1,
                        Some(x) if !x.is_finite() => {
                            return Err(crate::GeomError::Domain { point: p.clone(), what: format!("residual is {x}") })
                        }
                        Some(x) => {
                            o.used += 1;
                            o.max = o.max.max(x);
                            o.mean += x;
                        }
                    }
                }
                if o.used > 0 {
                    o.mean /= o.used as f64;
                }
                Ok(o)
            }
        }
    }
}

/// Outcome of a discrete check.
pub fn verdict_outcome(points: usize, matched: bool, note: String) -> Outcome {
    let r = if matched { 0.0 } else { 1.0 };
    Outcome { used: points, excluded: 0, max: r, mean: r, note: Some(note) }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckRecord {
    pub name: String,
    pub anchor: String,
    pub bound: Bound,
    pub tolerance: f64,
    pub points_used: usize,
    pub points_excluded: usize,
    pub max_residual: Option<f64>,
    pub mean_residual: Option<f64>,
    pub pass: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub check: String,
    pub wall_clock_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub scenario: Scenario,
    pub seed: u64,
    pub samples: usize,
    pub checks: Vec<CheckRecord>,
    pub pass: bool,
    /// Kept apart from the check records, which are reproducible byte for byte.
    pub timings: Vec<Timing>,
}

/// Overrides applied on top of the scenario file.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub samples: Option<usize>,
    /// Replaces every `AtMost` tolerance.
    pub tol: Option<f64>,
}

/// Runs the checks in order. Tolerances come from the check, then the
/// scenario's per-check overrides, then the global override.
pub fn run_checks(scenario: &Scenario, checks: &[Check], opts: RunOptions) -> Report {
    let seed = opts.seed.unwrap_or(scenario.plan.seed);
    let samples = opts.samples.unwrap_or(scenario.plan.samples);
    let plan = SamplePlan::new(seed, samples);
    let mut records = Vec::with_capacity(checks.len());
    let mut timings = Vec::with_capacity(checks.len());
    for c in checks {
        let mut c = c.clone();
        if c.bound != Bound::Exact {
            if let Some(t) = scenario.tolerances.get(&c.name) {
                c.threshold = *t;
            }
        }
        if c.bound == Bound::AtMost {
            if let Some(t) = opts.tol {
                c.threshold = t;
            }
        }
        let t0 = Instant::now();
        records.push(c.run(&plan));
        timings.push(Timing { check: c.name.clone(), wall_clock_ms: t0.elapsed().as_secs_f64() * 1e3 });
    }
    let pass = records.iter().all(|r| r.pass);
    Report { scenario: scenario.clone(), seed, samples, checks: records, pass, timings }
}

/// One line per check, fixed width.
pub fn format_table(r: &Report) -> String {
    let width = r.checks.iter().map(|c| c.name.len()).max().unwrap_or(0).max(5);
    let mut s = format!("scenario {} (builder {}, seed {}, samples {})\n", r.scenario.name, r.scenario.builder, r.seed, r.samples);
    for c in &r.checks {
        let status = if c.pass { "pass" } else { "FAIL" };
        let max = c.max_residual.map_or("         -".to_string(), |v| format!("{v:10.3e}"));
        let rel = match c.bound {
            Bound::AtMost | Bound::Exact => "<=",
            Bound::AtLeast => ">=",
        };
        s.push_str(&format!("{status} {:<width$} max {max} {rel} {:9.2e}  [{}]\n", c.name, c.tolerance, c.anchor));
        if let Some(n) = &c.note {
            s.push_str(&format!("     {:<width$} note: {n}\n", ""));
        }
        if let Some(e) = &c.error {
            s.push_str(&format!("     {:<width$} error: {e}\n", ""));
        }
    }
    let failed = r.checks.iter().filter(|c| !c.pass).count();
    s.push_str(&format!("{} of {} checks passed\n", r.checks.len() - failed, r.checks.len()));
    s
}
