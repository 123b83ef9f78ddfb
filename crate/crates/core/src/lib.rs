//! Safe following distances for vehicles that may swerve into an adjacent
//! lane instead of braking.
//!
//! The crate covers the braking baseline, the rotated chassis bounds of a
//! swerving vehicle, a two-arc kinematic lane change, the four pairwise
//! scenario distances and their combination into a universal following
//! distance, a particle-model lower bound, a dynamic single-track model for
//! validation, and a worst-case simulator used as an oracle.

pub mod config;
pub mod dynamics;
pub mod error;
pub mod lower_bound;
pub mod rotation;
pub mod rss;
pub mod scenario;
pub mod sim;
pub mod sweep;
pub mod swerve;
pub mod universal;
pub mod verify;

use serde::Serialize;

pub use config::{Config, DynamicParams, Pacejka, SafetyParams, VehicleGeometry};
pub use error::{Error, Result};
pub use scenario::{ScenarioContext, ScenarioDistance, ScenarioRegistry, ScenarioResult};
pub use swerve::{ArcCase, ClearanceResult, SwerveManoeuvre};
pub use universal::{FollowingRule, RuleRegistry, TripleState};

/// Which reading of the formulas to evaluate.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub enum FormulaMode {
    /// Dimensionally consistent and sound variants.
    #[default]
    Corrected,
    /// The formulas exactly as originally published, for comparison.
    Literal,
}

/// How the braking lead vehicle's travel is bounded.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub enum LeadBraking {
    /// Travel stops growing once the vehicle has stopped.
    #[default]
    StopClamped,
    /// `v t - a t^2 / 2` for all `t`, which can shrink or go negative.
    Parabola,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct FormulaOptions {
    pub mode: FormulaMode,
    pub lead_braking: LeadBraking,
}

impl FormulaOptions {
    pub fn literal() -> Self {
        Self {
            mode: FormulaMode::Literal,
            ..Self::default()
        }
    }
}

/// Displacement after braking from `v` at `a` for `t` seconds.
pub fn braking_travel(v: f64, a: f64, t: f64, mode: LeadBraking) -> f64 {
    match mode {
        LeadBraking::Parabola => v * t - 0.5 * a * t * t,
        LeadBraking::StopClamped => {
            if v <= 0.0 {
                0.0
            } else if t * a >= v {
                v * v / (2.0 * a)
            } else {
                v * t - 0.5 * a * t * t
            }
        }
    }
}

/// Maps `f` over `items` on `jobs` worker threads (0 picks the rayon
/// default), returning results in input order.
pub fn par_map<T: Sync, R: Send>(items: &[T], jobs: usize, f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    use rayon::prelude::*;
    let run = || items.par_iter().map(&f).collect();
    if jobs == 0 {
        return run();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(jobs).build() {
        Ok(pool) => pool.install(run),
        Err(_) => items.iter().map(&f).collect(),
    }
}
