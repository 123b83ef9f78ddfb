//! Particle-model lower bound on the swerve clearance distance.
//!
//! A point mass that applies the full comfortable lateral acceleration
//! reaches the clearance offset as fast as any admissible manoeuvre, and
//! braking at the same time shortens its longitudinal travel the most.

use serde::Serialize;

use crate::config::{SafetyParams, VehicleGeometry};
use crate::error::{Error, Result};
use crate::rotation::inner_half_side;
use crate::{braking_travel, LeadBraking};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LowerBoundResult {
    pub x_bar_c: f64,
    pub t_c: f64,
    pub d_bar_long: f64,
    pub x_f: f64,
}

/// Lower bound for a rear vehicle at `v_r` that must clear `y_c` behind a
/// lead at `v_f` braking at `a_max_brake`.
pub fn lower_bound(
    v_r: f64,
    v_f: f64,
    y_c: f64,
    g: &VehicleGeometry,
    p: &SafetyParams,
) -> Result<LowerBoundResult> {
    for (field, value) in [("v_r", v_r), ("v_f", v_f), ("y_c", y_c)] {
        if !(value >= 0.0) || !value.is_finite() {
            return Err(Error::InvalidParameter {
                field,
                bound: "must be finite and non-negative",
                value,
            });
        }
    }
    let rho = p.rho;
    let v = p.speed_after_reaction(v_r, rho);
    let t_c = (2.0 * y_c / p.a_lat_min).sqrt();
    let x_bar_c = braking_travel(v, p.a_min_brake, t_c, LeadBraking::StopClamped) + inner_half_side(g);
    let x_f = braking_travel(v_f, p.a_max_brake, rho + t_c, LeadBraking::StopClamped);
    let d_bar_long = v_r * rho + 0.5 * p.a_max_accel * rho * rho + x_bar_c - x_f;
    Ok(LowerBoundResult {
        x_bar_c,
        t_c,
        d_bar_long,
        x_f,
    })
}
