//! Axis-aligned bounds for a chassis that yaws through `[0, theta_max]`.
//!
//! Positive yaw turns the nose left (toward +y). The corner angles are
//! `phi = atan(b_r / d_f)` (front-right) and `gamma = atan(b_l / d_r)`
//! (rear-left); past them an extent stops growing and stays at the corner
//! radius.

use std::f64::consts::FRAC_PI_2;

use serde::Serialize;

use crate::config::{SafetyParams, VehicleGeometry};
use crate::error::{Error, Result};
use crate::rss;

/// Distances from the centre of mass to the sides of the outer box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RotatedExtents {
    /// Front.
    pub d_prime: f64,
    /// Rear.
    pub d_bar: f64,
    /// Right side.
    pub b_prime: f64,
    /// Left side, the mirror of `b_prime` built from `(d_f, b_l)`.
    pub b_prime_left: f64,
    pub theta_max: f64,
}

pub fn rotated_extents(g: &VehicleGeometry, theta_max: f64) -> Result<RotatedExtents> {
    if !(0.0..=FRAC_PI_2).contains(&theta_max) {
        return Err(Error::AngleDomain(theta_max));
    }
    let (s, c) = theta_max.sin_cos();
    let phi = (g.b_r / g.d_f).atan();
    let gamma = (g.b_l / g.d_r).atan();
    // the right extent peaks at the rear-right corner; equals gamma when b_l = b_r
    let gamma_right = (g.b_r / g.d_r).atan();
    let gamma_left = (g.b_l / g.d_f).atan();

    let d_prime = if theta_max <= phi {
        g.d_f * c + g.b_r * s
    } else {
        g.d_f.hypot(g.b_r)
    };
    let d_bar = if theta_max <= gamma {
        g.d_r * c + g.b_l * s
    } else {
        g.d_r.hypot(g.b_l)
    };
    let b_prime = if theta_max <= FRAC_PI_2 - gamma_right {
        g.d_r * s + g.b_r * c
    } else {
        g.d_r.hypot(g.b_r)
    };
    let b_prime_left = if theta_max <= FRAC_PI_2 - gamma_left {
        g.d_f * s + g.b_l * c
    } else {
        g.d_f.hypot(g.b_l)
    };
    Ok(RotatedExtents {
        d_prime,
        d_bar,
        b_prime,
        b_prime_left,
        theta_max,
    })
}

/// Half side of the square inscribed in the circle of radius `b_l`.
pub fn inner_half_side(g: &VehicleGeometry) -> f64 {
    g.b_l / std::f64::consts::SQRT_2
}

/// Lateral offset at which a swerving vehicle stops being longitudinally
/// adjacent to `other`: its rotated right extent, the other's left side and
/// the lateral buffer at zero lateral speed.
pub fn lateral_clearance(
    swerving: &VehicleGeometry,
    other: &VehicleGeometry,
    theta_max: f64,
    p: &SafetyParams,
) -> Result<f64> {
    let ext = rotated_extents(swerving, theta_max)?;
    Ok(ext.b_prime + other.b_l + rss::d_lat_at_rest(p))
}

/// Axis-aligned box of the chassis at a single yaw angle, as
/// `(front, rear, left, right)` distances from the centre of mass.
pub fn footprint_box(g: &VehicleGeometry, theta: f64) -> [f64; 4] {
    let (s, c) = theta.sin_cos();
    let corners = [
        (g.d_f, g.b_l),
        (g.d_f, -g.b_r),
        (-g.d_r, g.b_l),
        (-g.d_r, -g.b_r),
    ];
    let mut out = [f64::NEG_INFINITY; 4];
    for (x, y) in corners {
        let rx = x * c - y * s;
        let ry = x * s + y * c;
        out[0] = out[0].max(rx);
        out[1] = out[1].max(-rx);
        out[2] = out[2].max(ry);
        out[3] = out[3].max(-ry);
    }
    out
}

/// Chassis corners in world coordinates.
pub fn corners(g: &VehicleGeometry, x: f64, y: f64, theta: f64) -> [(f64, f64); 4] {
    let (s, c) = theta.sin_cos();
    [
        (g.d_f, g.b_l),
        (-g.d_r, g.b_l),
        (-g.d_r, -g.b_r),
        (g.d_f, -g.b_r),
    ]
    .map(|(px, py)| (x + px * c - py * s, y + px * s + py * c))
}

/// Exact overlap of two oriented rectangles by separating axes.
pub fn oriented_overlap(a: &[(f64, f64); 4], b: &[(f64, f64); 4]) -> bool {
    for poly in [a, b] {
        for i in 0..2 {
            let (x0, y0) = poly[i];
            let (x1, y1) = poly[i + 1];
            let axis = (y0 - y1, x1 - x0);
            let project = |pts: &[(f64, f64); 4]| {
                pts.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
                    let d = p.0 * axis.0 + p.1 * axis.1;
                    (lo.min(d), hi.max(d))
                })
            };
            let (alo, ahi) = project(a);
            let (blo, bhi) = project(b);
            if ahi < blo || bhi < alo {
                return false;
            }
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    /// Largest x-extent of the rotated chassis over a dense angle sweep.
    fn front_extent_oracle(g: &VehicleGeometry, theta_max: f64) -> f64 {
        (0..=20_000)
            .map(|i| footprint_box(g, theta_max * i as f64 / 20_000.0)[0])
            .fold(f64::NEG_INFINITY, f64::max)
    }

    #[test]
    fn no_rotation_gives_chassis() {
        let g = VehicleGeometry::default();
        let e = rotated_extents(&g, 0.0).unwrap();
        assert_eq!((e.d_prime, e.d_bar, e.b_prime), (2.4, 2.3, 0.9));
        assert_eq!(e.b_prime_left, 0.9);
    }

    #[test]
    fn corner_angle_reaches_radius() {
        let g = VehicleGeometry::default();
        let phi = (0.9f64 / 2.4).atan();
        let e = rotated_extents(&g, phi).unwrap();
        assert_abs_diff_eq!(e.d_prime, 2.4f64.hypot(0.9), epsilon = 1e-12);
        assert_abs_diff_eq!(e.d_prime, 2.563_201_123_595_259, epsilon = 1e-12);
        assert_abs_diff_eq!(e.d_prime, front_extent_oracle(&g, phi), epsilon = 1e-8);
    }

    #[test]
    fn small_rotation_front_extent() {
        let g = VehicleGeometry::default();
        let e = rotated_extents(&g, 0.1).unwrap();
        assert_abs_diff_eq!(e.d_prime, 2.477_860_072, epsilon = 1e-9);
        assert_abs_diff_eq!(e.d_prime, front_extent_oracle(&g, 0.1), epsilon = 1e-9);
    }

    #[test]
    fn domain_is_checked() {
        let g = VehicleGeometry::default();
        assert_eq!(rotated_extents(&g, -0.1), Err(Error::AngleDomain(-0.1)));
        assert!(rotated_extents(&g, 1.6).is_err());
        assert!(rotated_extents(&g, FRAC_PI_2).is_ok());
    }

    #[test]
    fn inner_square() {
        let g = VehicleGeometry::default();
        assert_abs_diff_eq!(inner_half_side(&g), 0.636_396_103, epsilon = 1e-9);
        let mut unit = g;
        unit.b_l = 2f64.sqrt();
        assert_abs_diff_eq!(inner_half_side(&unit), 1.0, epsilon = 1e-15);
        let phi = (g.b_r / g.d_f).atan();
        for theta in [0.0, phi, std::f64::consts::FRAC_PI_4, FRAC_PI_2] {
            assert!(inner_half_side(&g) <= rotated_extents(&g, theta).unwrap().d_prime);
        }
    }

    #[test]
    fn inner_square_stays_inside_chassis() {
        // the square rotates with the body, so it only has to fit the chassis
        let g = VehicleGeometry::default();
        let h = inner_half_side(&g);
        assert!(h <= g.d_f && h <= g.d_r && h <= g.b_l && h <= g.b_r);
    }

    #[test]
    fn clearance_examples() {
        let g = VehicleGeometry::default();
        let p = SafetyParams::default();
        assert_abs_diff_eq!(
            lateral_clearance(&g, &g, 0.0, &p).unwrap(),
            2.02,
            epsilon = 1e-12
        );
        let theta: f64 = 0.1361;
        let b = 2.3 * theta.sin() + 0.9 * theta.cos();
        assert_abs_diff_eq!(
            lateral_clearance(&g, &g, theta, &p).unwrap(),
            b + 0.9 + 0.22,
            epsilon = 1e-12
        );
        let mut bare = p;
        bare.mu = 0.0;
        bare.rho = 0.0;
        assert_eq!(lateral_clearance(&g, &g, 0.0, &bare).unwrap(), g.b_r + g.b_l);
    }

    #[test]
    fn branches_are_continuous() {
        let g = VehicleGeometry::default();
        let phi = (g.b_r / g.d_f).atan();
        let gamma = (g.b_l / g.d_r).atan();
        let eps = 1e-12;
        for (angle, pick) in [
            (phi, 0usize),
            (gamma, 1),
            (FRAC_PI_2 - gamma, 2),
        ] {
            let lo = rotated_extents(&g, angle).unwrap();
            let hi = rotated_extents(&g, angle + eps).unwrap();
            let (a, b) = match pick {
                0 => (lo.d_prime, hi.d_prime),
                1 => (lo.d_bar, hi.d_bar),
                _ => (lo.b_prime, hi.b_prime),
            };
            assert!((a - b).abs() / a < 1e-11, "branch {pick}: {a} vs {b}");
        }
    }

    #[test]
    fn right_extent_non_decreasing() {
        let g = VehicleGeometry::default();
        let end = FRAC_PI_2 - (g.b_l / g.d_r).atan();
        let mut prev = 0.0;
        for i in 0..=1000 {
            let b = rotated_extents(&g, end * i as f64 / 1000.0).unwrap().b_prime;
            assert!(b >= prev);
            prev = b;
        }
    }

    #[test]
    fn separating_axes() {
        let g = VehicleGeometry::default();
        let a = corners(&g, 0.0, 0.0, 0.0);
        assert!(oriented_overlap(&a, &corners(&g, 4.0, 0.0, 0.3)));
        assert!(!oriented_overlap(&a, &corners(&g, 4.8, 0.0, 0.0)));
        assert!(!oriented_overlap(&a, &corners(&g, 0.0, 1.81, 0.0)));
        // boxes overlap while the rotated bodies do not
        let b = corners(&g, 4.75, 1.9, 0.5);
        let ab = footprint_box(&g, 0.5);
        let boxes_touch = 4.75 - ab[1] < g.d_f && 1.9 - ab[3] < g.b_l;
        assert!(boxes_touch);
        assert!(!oriented_overlap(&a, &b));
    }

    proptest::proptest! {
        #[test]
        fn outer_box_contains_every_rotation(
            d_f in 0.5f64..4.0, d_r in 0.5f64..4.0, b_l in 0.3f64..1.5, b_r in 0.3f64..1.5,
            theta_max in 0.0f64..FRAC_PI_2, frac in 0.0f64..=1.0,
        ) {
            let g = VehicleGeometry { d_f, d_r, b_l, b_r, l_f: 0.2, l_r: 0.2 };
            let e = rotated_extents(&g, theta_max).unwrap();
            let theta = theta_max * frac;
            for (x, y) in corners(&g, 0.0, 0.0, theta) {
                proptest::prop_assert!(x <= e.d_prime + 1e-12);
                proptest::prop_assert!(-x <= e.d_bar + 1e-12);
                proptest::prop_assert!(-y <= e.b_prime + 1e-12);
                proptest::prop_assert!(y <= e.b_prime_left + 1e-12);
            }
        }
    }
}
