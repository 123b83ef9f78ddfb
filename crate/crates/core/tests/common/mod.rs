//! Independent oracles shared by the integration tests. Nothing here calls
//! the closed forms under test.

#![allow(dead_code)]

use swerve_safety::{FormulaOptions, SafetyParams, ScenarioContext, SwerveManoeuvre, VehicleGeometry};

pub fn defaults() -> ScenarioContext {
    ScenarioContext::new(
        VehicleGeometry::default(),
        SafetyParams::default(),
        FormulaOptions::default(),
    )
}

/// Kinematic bicycle integrated with RK4: steering `+delta` for the first
/// half of `duration`, `-delta` for the second. Returns `(x, y)` at the
/// first sample with `y >= y_c`, linearly interpolated, with its time.
pub fn bicycle_crossing(
    v: f64,
    delta: f64,
    duration: f64,
    g: &VehicleGeometry,
    y_c: f64,
    half_steps: usize,
) -> Option<(f64, f64)> {
    let wb = g.l_f + g.l_r;
    let h = 0.5 * duration / half_steps as f64;
    let deriv = |s: [f64; 3], d: f64| {
        let beta = (g.l_r * d.tan() / wb).atan();
        let psi = s[2] + beta;
        [v * psi.cos(), v * psi.sin(), v * beta.sin() / g.l_r]
    };
    let mut s = [0.0f64; 3];
    if y_c <= 0.0 {
        return Some((0.0, 0.0));
    }
    for i in 0..2 * half_steps {
        let d = if i < half_steps { delta } else { -delta };
        let k1 = deriv(s, d);
        let k2 = deriv(add(s, k1, 0.5 * h), d);
        let k3 = deriv(add(s, k2, 0.5 * h), d);
        let k4 = deriv(add(s, k3, h), d);
        let next: [f64; 3] = std::array::from_fn(|j| s[j] + h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]));
        if next[1] >= y_c {
            let f = (y_c - s[1]) / (next[1] - s[1]);
            let t = (i as f64 + f) * h;
            return Some((s[0] + f * (next[0] - s[0]), t));
        }
        s = next;
    }
    None
}

fn add(s: [f64; 3], k: [f64; 3], h: f64) -> [f64; 3] {
    std::array::from_fn(|j| s[j] + h * k[j])
}

/// Clearance of a built manoeuvre by integrating the bicycle model.
pub fn integrated_clearance(m: &SwerveManoeuvre, g: &VehicleGeometry, y_c: f64) -> Option<(f64, f64)> {
    bicycle_crossing(m.v, m.delta_c, m.duration, g, y_c, 20_000)
}

/// Smallest bumper gap when the rear accelerates for `rho`, then brakes at
/// `a_min_brake`, while the front brakes at `a_max_brake` from the start.
/// Explicit 1 ms time stepping with exact per-step kinematics.
pub fn brake_pair_min_gap(v_r: f64, v_f: f64, gap0: f64, p: &SafetyParams) -> f64 {
    let step_dt: f64 = 1e-3;
    let (mut xr, mut vr, mut xf, mut vf) = (0.0, v_r, gap0, v_f);
    let mut t = 0.0;
    let mut min = gap0;
    while vr > 0.0 || vf > 0.0 || t < p.rho {
        // land exactly on the end of the reaction time
        let dt = if t < p.rho { step_dt.min(p.rho - t) } else { step_dt };
        let ar = if t < p.rho { p.a_max_accel } else { -p.a_min_brake };
        let step = |x: &mut f64, v: &mut f64, a: f64| {
            if a < 0.0 && *v + a * dt < 0.0 {
                *x += *v * *v / (-2.0 * a);
                *v = 0.0;
            } else {
                *x += *v * dt + 0.5 * a * dt * dt;
                *v += a * dt;
            }
        };
        step(&mut xr, &mut vr, ar);
        step(&mut xf, &mut vf, -p.a_max_brake);
        t += dt;
        min = f64::min(min, xf - xr);
        if t > 200.0 {
            break;
        }
    }
    min
}

/// Time for a particle at rest laterally to cover `y_c` with constant
/// lateral acceleration `a`, found by stepping at `dt`.
pub fn particle_reach_time(y_c: f64, a: f64, dt: f64) -> f64 {
    let (mut y, mut vy, mut t) = (0.0, 0.0, 0.0);
    while y < y_c {
        y += vy * dt + 0.5 * a * dt * dt;
        vy += a * dt;
        t += dt;
    }
    t
}
