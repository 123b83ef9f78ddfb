//! Baseline responsibility-sensitive safety distances and adjacency tests.
//!
//! Longitudinal distances here are bumper to bumper: frontmost point of the
//! rear vehicle to rearmost point of the front vehicle. Lateral distances
//! run from the rear vehicle's right side to the front vehicle's left side.

use crate::config::{SafetyParams, VehicleGeometry};
use crate::FormulaMode;

/// `[x]_+`
pub fn positive_part(x: f64) -> f64 {
    x.max(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LongitudinalScenario {
    pub v_r: f64,
    pub v_f: f64,
}

/// Signed lateral speeds on one axis pointing from the front (second)
/// vehicle toward the rear (first) vehicle: a negative `v_r_lat` or a
/// positive `v_f_lat` closes the gap.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LateralScenario {
    pub v_r_lat: f64,
    pub v_f_lat: f64,
}

/// Distance for a rear vehicle that accelerates for `rho`, then brakes
/// comfortably, behind a lead vehicle braking hard.
///
/// [`FormulaMode::Literal`] squares `v_r + v_{r,rho}` in the braking term
/// instead of `v_{r,rho}`.
pub fn d_long_brake_brake(
    s: LongitudinalScenario,
    rho: f64,
    p: &SafetyParams,
    mode: FormulaMode,
) -> f64 {
    let v_rho = p.speed_after_reaction(s.v_r, rho);
    let braking_speed = match mode {
        FormulaMode::Corrected => v_rho,
        FormulaMode::Literal => s.v_r + v_rho,
    };
    positive_part(
        s.v_r * rho + 0.5 * p.a_max_accel * rho * rho
            + braking_speed * braking_speed / (2.0 * p.a_min_brake)
            - s.v_f * s.v_f / (2.0 * p.a_max_brake),
    )
}

/// Lateral safe distance: `mu` plus the worst-case closing travel of both
/// vehicles (maximal lateral acceleration for `rho`, then comfortable
/// deceleration to zero lateral speed).
pub fn d_lat(s: LateralScenario, p: &SafetyParams) -> f64 {
    let rho = p.rho;
    let v_r_rho = s.v_r_lat - p.a_lat_max * rho;
    let v_f_rho = s.v_f_lat + p.a_lat_max * rho;
    let two_a = 2.0 * p.a_lat_min;
    p.mu + positive_part(
        -(s.v_r_lat + v_r_rho) / 2.0 * rho
            + v_r_rho * v_r_rho / two_a
            + (s.v_f_lat + v_f_rho) / 2.0 * rho
            + v_f_rho * v_f_rho / two_a,
    )
}

/// `d_lat` with both lateral speeds zero, the buffer used for clearance.
pub fn d_lat_at_rest(p: &SafetyParams) -> f64 {
    d_lat(
        LateralScenario {
            v_r_lat: 0.0,
            v_f_lat: 0.0,
        },
        p,
    )
}

/// Longitudinal overlap band: `x2 - d_r - d_f <= x1 <= x2 + d_r + d_f`.
pub fn laterally_adjacent(x1: f64, x2: f64, g: &VehicleGeometry) -> bool {
    let band = g.d_r + g.d_f;
    x2 - band <= x1 && x1 <= x2 + band
}

/// Lateral overlap band widened by `d_lat`.
pub fn longitudinally_adjacent(y1: f64, y2: f64, d_lat: f64, g: &VehicleGeometry) -> bool {
    let band = g.b_l + g.b_r + d_lat;
    y2 - band <= y1 && y1 <= y2 + band
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn table() -> SafetyParams {
        SafetyParams::default()
    }

    fn long(v_r: f64, v_f: f64) -> LongitudinalScenario {
        LongitudinalScenario { v_r, v_f }
    }

    /// Rear accelerates for rho then brakes at a_min_brake; front brakes at
    /// a_max_brake. Explicit Euler on positions at 1 ms, gap in metres.
    fn min_gap_brake_brake(v_r: f64, v_f: f64, spacing: f64, p: &SafetyParams) -> f64 {
        let dt = 1e-3;
        let (mut xr, mut vr, mut xf, mut vf) = (0.0, v_r, spacing, v_f);
        let mut t = 0.0;
        let mut min_gap = spacing;
        while vr > 0.0 || t < p.rho {
            let ar = if t < p.rho { p.a_max_accel } else { -p.a_min_brake };
            let nvr = (vr + ar * dt).max(0.0);
            xr += 0.5 * (vr + nvr) * dt;
            vr = nvr;
            let nvf = (vf - p.a_max_brake * dt).max(0.0);
            xf += 0.5 * (vf + nvf) * dt;
            vf = nvf;
            t += dt;
            min_gap = min_gap.min(xf - xr);
        }
        min_gap
    }

    #[test]
    fn positive_part_examples() {
        assert_eq!(positive_part(-3.2), 0.0);
        assert_eq!(positive_part(0.0), 0.0);
        assert_eq!(positive_part(79.02), 79.02);
    }

    #[test]
    fn brake_brake_examples() {
        let p = table();
        let mut still = p;
        still.rho = 0.0;
        assert_eq!(
            d_long_brake_brake(long(0.0, 0.0), 0.0, &still, FormulaMode::Corrected),
            0.0
        );
        assert_eq!(
            d_long_brake_brake(long(0.0, 30.0), 0.0, &still, FormulaMode::Corrected),
            0.0
        );
        let d = d_long_brake_brake(long(20.0, 20.0), p.rho, &p, FormulaMode::Corrected);
        assert_abs_diff_eq!(d, 79.02, epsilon = 1e-9);
    }

    #[test]
    fn brake_brake_matches_simulation() {
        let p = table();
        let d = d_long_brake_brake(long(20.0, 20.0), p.rho, &p, FormulaMode::Corrected);
        assert!(min_gap_brake_brake(20.0, 20.0, d, &p) >= -1e-6);
        assert!(min_gap_brake_brake(20.0, 20.0, d - 0.1, &p) < 0.0);
    }

    #[test]
    fn literal_mode_squares_the_sum() {
        let p = table();
        let lit = d_long_brake_brake(long(20.0, 20.0), p.rho, &p, FormulaMode::Literal);
        let expected = 2.0 + 0.01 + 40.2f64.powi(2) / 4.0 - 25.0;
        assert_abs_diff_eq!(lit, expected, epsilon = 1e-9);
    }

    #[test]
    fn brake_brake_monotone_on_grid() {
        let p = table();
        for i in 0..=30 {
            for j in 0..=30 {
                let (vr, vf) = (i as f64, j as f64);
                let d = d_long_brake_brake(long(vr, vf), p.rho, &p, FormulaMode::Corrected);
                let up = d_long_brake_brake(long(vr + 1.0, vf), p.rho, &p, FormulaMode::Corrected);
                let faster_lead =
                    d_long_brake_brake(long(vr, vf + 1.0), p.rho, &p, FormulaMode::Corrected);
                assert!(up >= d && faster_lead <= d);
            }
        }
    }

    /// Both vehicles accelerate toward each other for rho, then decelerate at
    /// a_lat_min until their lateral speed is zero. Returns the closing travel.
    fn lateral_closing(v_toward_r: f64, v_toward_f: f64, p: &SafetyParams) -> f64 {
        let dt = 1e-4;
        let mut total = 0.0;
        for v0 in [v_toward_r, v_toward_f] {
            let (mut v, mut t, mut travel) = (v0, 0.0, 0.0);
            loop {
                let a = if t < p.rho { p.a_lat_max } else { -p.a_lat_min };
                let nv = v + a * dt;
                if t >= p.rho && nv <= 0.0 {
                    travel += v * v / (2.0 * p.a_lat_min);
                    break;
                }
                travel += 0.5 * (v + nv) * dt;
                v = nv;
                t += dt;
            }
            total += travel;
        }
        total
    }

    #[test]
    fn lateral_examples() {
        let p = table();
        let mut instant = p;
        instant.rho = 0.0;
        let rest = LateralScenario {
            v_r_lat: 0.0,
            v_f_lat: 0.0,
        };
        assert_eq!(d_lat(rest, &instant), instant.mu);
        assert_abs_diff_eq!(d_lat(rest, &p), 0.22, epsilon = 1e-12);
        assert_abs_diff_eq!(
            d_lat(rest, &p),
            p.mu + lateral_closing(0.0, 0.0, &p),
            epsilon = 1e-3
        );
        // rear closing at 0.5 m/s
        let closing = LateralScenario {
            v_r_lat: -0.5,
            v_f_lat: 0.0,
        };
        let oracle = p.mu + lateral_closing(0.5, 0.0, &p);
        assert_abs_diff_eq!(d_lat(closing, &p), oracle, epsilon = 1e-3);
        assert_abs_diff_eq!(d_lat(closing, &p), 0.4325, epsilon = 1e-12);
    }

    #[test]
    fn adjacency_boundaries_are_closed() {
        let g = VehicleGeometry::default();
        assert!(laterally_adjacent(5.0, 5.0, &g));
        assert!(laterally_adjacent(g.d_r + g.d_f, 0.0, &g));
        assert!(!laterally_adjacent(g.d_r + g.d_f + 0.01, 0.0, &g));
        let d = 0.22;
        assert!(longitudinally_adjacent(g.b_l + g.b_r + d, 0.0, d, &g));
        assert!(!longitudinally_adjacent(g.b_l + g.b_r + d + 1e-9, 0.0, d, &g));
    }

    proptest::proptest! {
        #[test]
        fn lateral_distance_at_least_buffer(vr in -3.0f64..3.0, vf in -3.0f64..3.0, rho in 0.0f64..1.0) {
            let mut p = table();
            p.rho = rho;
            let d = d_lat(LateralScenario { v_r_lat: vr, v_f_lat: vf }, &p);
            proptest::prop_assert!(d >= p.mu);
        }
    }
}
