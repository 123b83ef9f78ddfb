//! Two-arc lane change for the kinematic bicycle model.
//!
//! The manoeuvre runs at constant speed with bang-bang steering: `+delta_c`
//! until the chassis yaw reaches `theta_max`, then `-delta_c` until the yaw
//! returns to zero one lane width to the left. The centre of mass follows
//! two circular arcs of radius `R_c`; the rear axle follows arcs of radius
//! `R_r = R_c cos(beta_c)`.
//!
//! Coordinates: origin at the centre of mass at the start of the swerve,
//! `x` along the road, `y` to the left. `psi` is the heading of the centre
//! of mass velocity and `theta = psi - beta` is the chassis yaw.

use std::f64::consts::FRAC_PI_2;

use serde::Serialize;

use crate::config::{SafetyParams, VehicleGeometry};
use crate::error::{Error, Result};
use crate::FormulaMode;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SwerveManoeuvre {
    pub v: f64,
    pub r_c: f64,
    pub r_r: f64,
    pub delta_c: f64,
    pub beta_c: f64,
    pub theta_max: f64,
    pub psi_max: f64,
    pub duration: f64,
    pub alpha: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ArcCase {
    FirstArc,
    SecondArc,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClearanceResult {
    /// Longitudinal travel of the centre of mass when `y` first reaches `y_c`.
    pub x_c: f64,
    pub t_c: f64,
    pub arc_case: ArcCase,
    pub psi_c: f64,
}

/// Centre-of-mass pose along the manoeuvre.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Pose {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    pub psi: f64,
}

/// Smallest centre-of-mass turn radius the steering limit allows.
pub fn steering_limited_radius(g: &VehicleGeometry, delta_max: f64, mode: FormulaMode) -> f64 {
    let wb = g.wheelbase();
    let t = delta_max.tan();
    match mode {
        FormulaMode::Corrected => ((wb / t).powi(2) + g.l_r * g.l_r).sqrt(),
        FormulaMode::Literal => (wb * wb / (t * t + g.l_r * g.l_r)).sqrt(),
    }
}

impl SwerveManoeuvre {
    /// Builds the swerve at constant speed `v` for a left lane change of
    /// `p.alpha`.
    pub fn build(v: f64, g: &VehicleGeometry, p: &SafetyParams, mode: FormulaMode) -> Result<Self> {
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::DegenerateSpeed(v));
        }
        let wb = g.wheelbase();
        let r_delta = steering_limited_radius(g, p.delta_max, mode);
        let r_accel = v * v / p.a_lat_min;
        let r_c = r_delta.max(r_accel);
        if r_c <= g.l_r {
            return Err(Error::InvalidParameter {
                field: "delta_max",
                bound: "gives a turn radius inside the rear axle offset",
                value: p.delta_max,
            });
        }
        let delta_c = (wb / (r_c * r_c - g.l_r * g.l_r).sqrt()).atan();
        let beta_c = (g.l_r * delta_c.tan() / wb).atan();
        let r_r = wb / delta_c.tan();
        let ratio = p.alpha / (2.0 * r_r);
        if ratio > 2.0 {
            return Err(Error::InfeasibleLaneChange { ratio });
        }
        let theta_max = (1.0 - ratio).acos();
        let psi_max = theta_max + beta_c;
        if psi_max > FRAC_PI_2 {
            return Err(Error::HeadingLimit { psi: psi_max });
        }
        let duration = 2.0 * r_c * (psi_max - beta_c) / v;
        Ok(Self {
            v,
            r_c,
            r_r,
            delta_c,
            beta_c,
            theta_max,
            psi_max,
            duration,
            alpha: p.alpha,
        })
    }

    /// Lateral travel of the centre of mass over the first arc.
    pub fn first_arc_travel(&self) -> f64 {
        self.r_c * (self.beta_c.cos() - self.psi_max.cos())
    }

    fn second_arc_start(&self) -> (f64, f64, f64) {
        let psi_hat = self.psi_max - 2.0 * self.beta_c;
        let x_hat = self.r_c * (self.psi_max.sin() - self.beta_c.sin());
        (psi_hat, x_hat, self.first_arc_travel())
    }

    /// Lateral travel of the centre of mass over the whole swerve.
    pub fn total_travel(&self) -> f64 {
        let (psi_hat, _, y_hat) = self.second_arc_start();
        y_hat + self.r_c * ((-self.beta_c).cos() - psi_hat.cos())
    }

    pub fn clearance(&self, y_c: f64) -> Result<ClearanceResult> {
        let travel = self.total_travel();
        if !(y_c >= 0.0) || y_c > travel + 1e-12 {
            return Err(Error::ClearanceUnreachable { y_c, travel });
        }
        let r = self.r_c;
        let (psi_hat, x_hat, y_hat) = self.second_arc_start();
        if y_c <= y_hat {
            let psi_c = (self.beta_c.cos() - y_c / r).clamp(-1.0, 1.0).acos();
            Ok(ClearanceResult {
                x_c: r * (psi_c.sin() - self.beta_c.sin()),
                t_c: r * (psi_c - self.beta_c) / self.v,
                arc_case: ArcCase::FirstArc,
                psi_c,
            })
        } else {
            let psi_c = ((y_c - y_hat) / r + psi_hat.cos()).clamp(-1.0, 1.0).acos();
            Ok(ClearanceResult {
                x_c: r * (psi_hat.sin() - psi_c.sin()) + x_hat,
                t_c: r * (self.psi_max - self.beta_c + psi_hat - psi_c) / self.v,
                arc_case: ArcCase::SecondArc,
                psi_c,
            })
        }
    }

    /// Pose at time `t` after the swerve starts. Before 0 and after the end
    /// the vehicle drives straight at `v`.
    pub fn pose_at(&self, t: f64) -> Pose {
        let r = self.r_c;
        let half = 0.5 * self.duration;
        if t <= 0.0 {
            return Pose {
                t,
                x: self.v * t,
                y: 0.0,
                theta: 0.0,
                psi: 0.0,
            };
        }
        if t <= half {
            let psi = self.beta_c + self.v * t / r;
            return Pose {
                t,
                x: r * (psi.sin() - self.beta_c.sin()),
                y: r * (self.beta_c.cos() - psi.cos()),
                theta: psi - self.beta_c,
                psi,
            };
        }
        let (psi_hat, x_hat, y_hat) = self.second_arc_start();
        let tau = t.min(self.duration) - half;
        let psi = psi_hat - self.v * tau / r;
        let x = x_hat + r * (psi_hat.sin() - psi.sin());
        let y = y_hat + r * (psi.cos() - psi_hat.cos());
        if t <= self.duration {
            Pose {
                t,
                x,
                y,
                theta: psi + self.beta_c,
                psi,
            }
        } else {
            Pose {
                t,
                x: x + self.v * (t - self.duration),
                y,
                theta: 0.0,
                psi: 0.0,
            }
        }
    }

    /// Samples at `0, dt, 2 dt, ...` plus the end point.
    pub fn sample_trajectory(&self, dt: f64) -> Vec<Pose> {
        assert!(dt > 0.0, "sample spacing must be positive");
        let mut out = Vec::new();
        let mut k = 0u64;
        loop {
            let t = k as f64 * dt;
            if t >= self.duration - 1e-12 {
                break;
            }
            out.push(self.pose_at(t));
            k += 1;
        }
        out.push(self.pose_at(self.duration));
        out
    }

    /// Arc centre for the pose at `t`, used to check circle membership.
    pub fn arc_centre(&self, t: f64) -> (f64, f64) {
        let r = self.r_c;
        if t <= 0.5 * self.duration {
            (-r * self.beta_c.sin(), r * self.beta_c.cos())
        } else {
            let (psi_hat, x_hat, y_hat) = self.second_arc_start();
            (x_hat + r * psi_hat.sin(), y_hat - r * psi_hat.cos())
        }
    }
}
