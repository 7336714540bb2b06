//! Reproducible sample points inside a chart box.
//!
//! Points come from a ChaCha8 stream keyed by the plan seed, so a plan with
//! more points extends a plan with fewer points and the output is identical
//! across platforms and runs.

use rand::RngCore;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::GeomError;

pub const DEFAULT_MARGIN: f64 = 0.15;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplePlan {
    pub seed: u64,
    pub count: usize,
    #[serde(default = "default_margin")]
    pub margin: f64,
}

fn default_margin() -> f64 {
    DEFAULT_MARGIN
}

impl SamplePlan {
    pub fn new(seed: u64, count: usize) -> Self {
        SamplePlan { seed, count, margin: DEFAULT_MARGIN }
    }

    pub fn with_margin(mut self, margin: f64) -> Self {
        self.margin = margin;
        self
    }
}

/// Uniform draw strictly inside (0, 1) from 53 random bits.
fn open_unit(rng: &mut ChaCha8Rng) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// Draws `plan.count` points from the box `lo..hi` shrunk by `margin` times
/// the side length on each end.
pub fn sample_box(lo: &[f64], hi: &[f64], plan: &SamplePlan) -> Result<Vec<Vec<f64>>, GeomError> {
    if !(0.0..0.5).contains(&plan.margin) {
        return Err(GeomError::InvalidPlan(format!("margin {} must lie in [0, 0.5)", plan.margin)));
    }
    if lo.len() != hi.len() || lo.iter().zip(hi).any(|(a, b)| !(a < b)) {
        return Err(GeomError::InvalidPlan("empty or malformed coordinate box".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
    let mut out = Vec::with_capacity(plan.count);
    for _ in 0..plan.count {
        let p = lo
            .iter()
            .zip(hi)
            .map(|(&a, &b)| {
                let w = b - a;
                let (a2, b2) = (a + plan.margin * w, b - plan.margin * w);
                a2 + (b2 - a2) * open_unit(&mut rng)
            })
            .collect();
        out.push(p);
    }
    Ok(out)
}
