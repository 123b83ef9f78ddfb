//! Pairwise safe distances for the four brake/swerve combinations.
//!
//! All distances are centre of mass to centre of mass, with the rear vehicle
//! behind the front one in the same lane. Chassis extents enter once per
//! formula; [`ScenarioResult::bumper_to_bumper`] removes the unrotated ones.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::config::{Config, SafetyParams, VehicleGeometry};
use crate::error::{Error, Result};
use crate::rotation::{rotated_extents, RotatedExtents};
use crate::rss::{self, positive_part, LongitudinalScenario};
use crate::swerve::{ArcCase, SwerveManoeuvre};
use crate::{braking_travel, FormulaMode, FormulaOptions};

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioContext {
    pub rear: VehicleGeometry,
    pub front: VehicleGeometry,
    pub safety: SafetyParams,
    pub options: FormulaOptions,
}

impl ScenarioContext {
    pub fn new(geometry: VehicleGeometry, safety: SafetyParams, options: FormulaOptions) -> Self {
        Self {
            rear: geometry,
            front: geometry,
            safety,
            options,
        }
    }

    pub fn from_config(config: &Config, options: FormulaOptions) -> Self {
        Self::new(config.geometry, config.safety, options)
    }

    pub fn mode(&self) -> FormulaMode {
        self.options.mode
    }

    /// Gap between centres when the two unrotated bodies touch.
    pub fn contact_distance(&self) -> f64 {
        self.rear.d_f + self.front.d_r
    }

    /// Same context with the roles of the two vehicles swapped.
    pub fn swapped(&self) -> Self {
        Self {
            rear: self.front,
            front: self.rear,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioResult {
    pub scenario: &'static str,
    pub distance: f64,
    pub bumper_to_bumper: f64,
    pub v_f_prime: f64,
    pub x_f: f64,
    /// `x_c` of the swerving rear vehicle, or `x_r` of a braking rear vehicle.
    pub x_lead_or_rear: f64,
    pub t_c: f64,
    pub components: BTreeMap<&'static str, f64>,
    pub warnings: Vec<String>,
}

impl ScenarioResult {
    fn new(scenario: &'static str, ctx: &ScenarioContext, distance: f64) -> Self {
        Self {
            scenario,
            distance,
            bumper_to_bumper: distance - ctx.contact_distance(),
            v_f_prime: 0.0,
            x_f: 0.0,
            x_lead_or_rear: 0.0,
            t_c: 0.0,
            components: BTreeMap::new(),
            warnings: Vec::new(),
        }
    }

    fn with(mut self, key: &'static str, value: f64) -> Self {
        self.components.insert(key, value);
        self
    }
}

/// One way of computing a pairwise safe distance.
pub trait ScenarioDistance: Send + Sync {
    fn name(&self) -> &'static str;
    fn description(&self) -> &'static str;
    fn evaluate(&self, ctx: &ScenarioContext, v_r: f64, v_f: f64, rho: f64) -> Result<ScenarioResult>;
}

pub struct ScenarioRegistry {
    entries: Vec<Box<dyn ScenarioDistance>>,
}

impl ScenarioRegistry {
    pub fn empty() -> Self {
        Self {
            entries: Vec::new(),
        }
    }

    /// `bb`, `sb`, `bs` and `ss`.
    pub fn standard() -> Self {
        let mut r = Self::empty();
        r.register(Box::new(BrakeForBrake));
        r.register(Box::new(SwerveForBrake));
        r.register(Box::new(BrakeForSwerve));
        r.register(Box::new(SwerveForSwerve));
        r
    }

    /// Adds a scenario, replacing any existing one with the same name.
    pub fn register(&mut self, s: Box<dyn ScenarioDistance>) {
        self.entries.retain(|e| e.name() != s.name());
        self.entries.push(s);
    }

    pub fn get(&self, name: &str) -> Result<&dyn ScenarioDistance> {
        self.entries
            .iter()
            .find(|e| e.name() == name)
            .map(|e| e.as_ref())
            .ok_or_else(|| Error::UnknownName {
                kind: "scenario",
                name: name.to_string(),
                known: self.names().join(", "),
            })
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.entries.iter().map(|e| e.name()).collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = &dyn ScenarioDistance> {
        self.entries.iter().map(|e| e.as_ref())
    }
}

impl Default for ScenarioRegistry {
    fn default() -> Self {
        Self::standard()
    }
}

fn check_speed(field: &'static str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            field,
            bound: "must be a finite non-negative speed",
            value: v,
        })
    }
}

fn check_inputs(v_r: f64, v_f: f64, rho: f64) -> Result<()> {
    check_speed("v_r", v_r)?;
    check_speed("v_f", v_f)?;
    if !(rho >= 0.0) || !rho.is_finite() {
        return Err(Error::InvalidParameter {
            field: "rho",
            bound: "must be non-negative",
            value: rho,
        });
    }
    Ok(())
}

/// Swerve of `g` at speed `v` with its rotated extents and the lateral
/// clearance past a vehicle with left half-width `other_b_l`. A vehicle that
/// is not moving does not swerve.
struct SwervePlan {
    manoeuvre: Option<SwerveManoeuvre>,
    extents: RotatedExtents,
    y_c: f64,
}

impl SwervePlan {
    fn new(v: f64, g: &VehicleGeometry, other_b_l: f64, p: &SafetyParams, mode: FormulaMode) -> Result<Self> {
        let manoeuvre = if v > 0.0 {
            Some(SwerveManoeuvre::build(v, g, p, mode)?)
        } else {
            None
        };
        let theta = manoeuvre.map_or(0.0, |m| m.theta_max);
        let extents = rotated_extents(g, theta)?;
        let y_c = extents.b_prime + other_b_l + rss::d_lat_at_rest(p);
        Ok(Self {
            manoeuvre,
            extents,
            y_c,
        })
    }

    fn theta_max(&self) -> f64 {
        self.extents.theta_max
    }

    fn psi_max(&self) -> f64 {
        self.manoeuvre.map_or(0.0, |m| m.psi_max)
    }

    fn duration(&self) -> f64 {
        self.manoeuvre.map_or(0.0, |m| m.duration)
    }
}

/// Rear brakes comfortably after `rho`, front brakes hard.
pub fn d_brake_for_brake(ctx: &ScenarioContext, v_r: f64, v_f: f64, rho: f64) -> Result<ScenarioResult> {
    check_inputs(v_r, v_f, rho)?;
    let p = &ctx.safety;
    let rss = rss::d_long_brake_brake(LongitudinalScenario { v_r, v_f }, rho, p, ctx.mode());
    let v_rho = p.speed_after_reaction(v_r, rho);
    let x_r = v_r * rho + 0.5 * p.a_max_accel * rho * rho + v_rho * v_rho / (2.0 * p.a_min_brake);
    let x_f = v_f * v_f / (2.0 * p.a_max_brake);
    let mut r = ScenarioResult::new("bb", ctx, rss + ctx.contact_distance())
        .with("d_long", rss)
        .with("x_r", x_r)
        .with("x_f", x_f);
    r.v_f_prime = v_f;
    r.x_f = x_f;
    r.x_lead_or_rear = x_r;
    Ok(r)
}

/// Rear swerves left after `rho` while the front brakes hard.
pub fn d_swerve_for_brake(ctx: &ScenarioContext, v_r: f64, v_f: f64, rho: f64) -> Result<ScenarioResult> {
    check_inputs(v_r, v_f, rho)?;
    let p = &ctx.safety;
    let v_rho = p.speed_after_reaction(v_r, rho);
    let plan = SwervePlan::new(v_rho, &ctx.rear, ctx.front.b_l, p, ctx.mode())?;
    let (x_c, t_c, second_arc) = match plan.manoeuvre {
        Some(m) => {
            let c = m.clearance(plan.y_c)?;
            (c.x_c, c.t_c, c.arc_case == ArcCase::SecondArc)
        }
        None => (0.0, 0.0, false),
    };
    // the published second-arc clearance carries the front extent inside x_c
    let x_c_used = if ctx.mode() == FormulaMode::Literal && second_arc {
        x_c + plan.extents.d_prime
    } else {
        x_c
    };
    let v_f_prime = v_f.min(v_r * plan.psi_max().cos());
    let horizon = rho + t_c;
    let x_f = braking_travel(v_f_prime, p.a_max_brake, horizon, ctx.options.lead_braking);
    let reaction = v_r * rho + 0.5 * p.a_max_accel * rho * rho;
    let interior = reaction + x_c_used - x_f;
    let distance = positive_part(interior) + plan.extents.d_prime + ctx.front.d_r;
    let mut r = ScenarioResult::new("sb", ctx, distance)
        .with("v_r_rho", v_rho)
        .with("theta_max", plan.theta_max())
        .with("psi_max", plan.psi_max())
        .with("y_c", plan.y_c)
        .with("x_c", x_c)
        .with("t_c", t_c)
        .with("second_arc", if second_arc { 1.0 } else { 0.0 })
        .with("v_f_prime", v_f_prime)
        .with("x_f", x_f)
        .with("reaction_travel", reaction)
        .with("interior", interior)
        .with("d_prime", plan.extents.d_prime)
        .with("swerve_duration", plan.duration());
    r.v_f_prime = v_f_prime;
    r.x_f = x_f;
    r.x_lead_or_rear = x_c_used;
    r.t_c = t_c;
    if v_rho <= 0.0 {
        r.warnings
            .push("rear vehicle is stationary after the reaction time; no swerve".into());
    }
    Ok(r)
}

/// Front swerves left while the rear brakes comfortably after `rho`.
pub fn d_brake_for_swerve(ctx: &ScenarioContext, v_r: f64, v_f: f64, rho: f64) -> Result<ScenarioResult> {
    check_inputs(v_r, v_f, rho)?;
    let p = &ctx.safety;
    let v_rho = p.speed_after_reaction(v_r, rho);
    let a = p.a_min_brake;
    let plan = SwervePlan::new(v_f, &ctx.front, ctx.rear.b_l, p, ctx.mode())?;
    let mut warnings = Vec::new();

    let (t_c, v_r_min, v_f_prime, x_f, x_r_brake, rear_extent) = match plan.manoeuvre {
        Some(m) => {
            let t_c = m.clearance(plan.y_c)?.t_c;
            let mut brake_time = t_c - rho;
            if brake_time < 0.0 {
                warnings.push(format!(
                    "front clears in {t_c:.6} s, inside the reaction time; braking phase clamped to zero"
                ));
                brake_time = 0.0;
            }
            let v_r_min = v_r.min(v_rho - a * brake_time).max(0.0);
            let v_f_prime = (v_f * plan.psi_max().cos()).min(v_r_min);
            let x_r_brake = if brake_time <= v_rho / a {
                v_rho * brake_time - 0.5 * a * brake_time * brake_time
            } else {
                v_rho * v_rho / (2.0 * a)
            };
            (t_c, v_r_min, v_f_prime, v_f_prime * t_c, x_r_brake, plan.extents.d_bar)
        }
        None => {
            // a stopped lead cannot swerve away; the rear must stop behind it
            warnings.push("front vehicle is stationary; treated as a fixed obstacle".into());
            (0.0, 0.0, 0.0, 0.0, v_rho * v_rho / (2.0 * a), ctx.front.d_r)
        }
    };
    let x_r = (v_r + v_rho) * rho / 2.0 + x_r_brake;
    let interior = x_r - x_f;
    let distance = positive_part(interior) + ctx.rear.d_f + rear_extent;
    let mut r = ScenarioResult::new("bs", ctx, distance)
        .with("v_r_rho", v_rho)
        .with("theta_max", plan.theta_max())
        .with("psi_max", plan.psi_max())
        .with("y_c", plan.y_c)
        .with("t_c", t_c)
        .with("v_r_min", v_r_min)
        .with("v_f_prime", v_f_prime)
        .with("x_f", x_f)
        .with("x_r_brake", x_r_brake)
        .with("x_r", x_r)
        .with("interior", interior)
        .with("d_bar", rear_extent);
    r.v_f_prime = v_f_prime;
    r.x_f = x_f;
    r.x_lead_or_rear = x_r;
    r.t_c = t_c;
    r.warnings = warnings;
    Ok(r)
}

/// Both vehicles swerve left and then brake, the front first.
pub fn d_swerve_for_swerve(ctx: &ScenarioContext, v_r: f64, v_f: f64, rho: f64) -> Result<ScenarioResult> {
    check_inputs(v_r, v_f, rho)?;
    let p = &ctx.safety;
    let v_rho = p.speed_after_reaction(v_r, rho);
    let rear = SwervePlan::new(v_rho, &ctx.rear, ctx.front.b_l, p, ctx.mode())?;
    let front = SwervePlan::new(v_f, &ctx.front, ctx.rear.b_l, p, ctx.mode())?;
    let t_1 = rear.duration();
    let t_2 = front.duration();
    let v_f_prime = (v_f * front.psi_max().cos()).min(v_r);
    let t_b1 = v_rho / p.a_min_brake;
    let t_b2 = v_f_prime / p.a_max_brake;
    let mut warnings = Vec::new();

    let swerve_travel = match ctx.mode() {
        FormulaMode::Corrected => v_rho * t_1,
        FormulaMode::Literal => {
            if t_1 < rho {
                warnings.push(format!(
                    "rear swerve lasts {t_1:.6} s, shorter than the reaction time; (t_1 - rho) clamped to zero"
                ));
            }
            v_rho * (t_1 - rho).max(0.0)
        }
    };
    let x_r = (v_r + v_rho) * rho / 2.0 + swerve_travel + v_rho * v_rho / (2.0 * p.a_min_brake);
    let mut x_f = v_f_prime * t_2 + v_f_prime * v_f_prime / (2.0 * p.a_max_brake);
    if ctx.mode() == FormulaMode::Corrected && v_f > 0.0 && t_2 > rho + t_1 {
        // the lead enters the free lane after the rear already holds it, so
        // none of its forward travel can be counted on
        warnings.push(format!(
            "front swerve ({t_2:.6} s) outlasts the rear's ({:.6} s); lead travel bounded by zero",
            rho + t_1
        ));
        x_f = 0.0;
    }
    let interior = x_r - x_f;
    let distance = interior + rear.extents.d_prime + front.extents.d_bar;

    let ends = [rho, t_2, rho + t_1, t_2 + t_b2, rho + t_1 + t_b1];
    if ends.windows(2).any(|w| w[0] >= w[1]) {
        warnings.push(format!(
            "phase ordering rho < t_2 < rho+t_1 < t_2+t_b2 < rho+t_1+t_b1 does not hold: {ends:?}"
        ));
    }
    let mut r = ScenarioResult::new("ss", ctx, distance)
        .with("v_r_rho", v_rho)
        .with("theta_max", rear.theta_max())
        .with("theta_max_front", front.theta_max())
        .with("psi_max_front", front.psi_max())
        .with("t_1", t_1)
        .with("t_2", t_2)
        .with("t_b1", t_b1)
        .with("t_b2", t_b2)
        .with("v_f_prime", v_f_prime)
        .with("x_f", x_f)
        .with("x_r", x_r)
        .with("interior", interior)
        .with("d_prime", rear.extents.d_prime)
        .with("d_bar", front.extents.d_bar);
    r.v_f_prime = v_f_prime;
    r.x_f = x_f;
    r.x_lead_or_rear = x_r;
    r.warnings = warnings;
    Ok(r)
}

macro_rules! scenario {
    ($ty:ident, $name:literal, $desc:literal, $f:ident) => {
        pub struct $ty;

        impl ScenarioDistance for $ty {
            fn name(&self) -> &'static str {
                $name
            }
            fn description(&self) -> &'static str {
                $desc
            }
            fn evaluate(&self, ctx: &ScenarioContext, v_r: f64, v_f: f64, rho: f64) -> Result<ScenarioResult> {
                $f(ctx, v_r, v_f, rho)
            }
        }
    };
}

scenario!(BrakeForBrake, "bb", "rear brakes for a braking lead", d_brake_for_brake);
scenario!(SwerveForBrake, "sb", "rear swerves for a braking lead", d_swerve_for_brake);
scenario!(BrakeForSwerve, "bs", "rear brakes for a swerving lead", d_brake_for_swerve);
scenario!(SwerveForSwerve, "ss", "rear swerves for a swerving lead", d_swerve_for_swerve);

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn ctx() -> ScenarioContext {
        ScenarioContext::new(
            VehicleGeometry::default(),
            SafetyParams::default(),
            FormulaOptions::default(),
        )
    }

    #[test]
    fn brake_for_brake_examples() {
        let mut c = ctx();
        let rho = c.safety.rho;
        assert_abs_diff_eq!(d_brake_for_brake(&c, 20.0, 20.0, rho).unwrap().distance, 83.72, epsilon = 1e-9);
        c.safety.rho = 0.0;
        let r = d_brake_for_brake(&c, 0.0, 0.0, 0.0).unwrap();
        assert_abs_diff_eq!(r.distance, 4.7, epsilon = 1e-12);
        assert_abs_diff_eq!(r.bumper_to_bumper, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn fast_lead_leaves_only_extents() {
        let mut c = ctx();
        c.safety.rho = 0.0;
        let r = d_swerve_for_brake(&c, 0.0, 30.0, 0.0).unwrap();
        assert!(r.components["interior"] <= 0.0);
        assert_abs_diff_eq!(r.distance, r.components["d_prime"] + c.front.d_r, epsilon = 1e-12);
    }

    #[test]
    fn stationary_rear_brake_for_swerve() {
        let mut c = ctx();
        c.safety.rho = 0.0;
        let r = d_brake_for_swerve(&c, 0.0, 20.0, 0.0).unwrap();
        assert_eq!(r.components["x_r"], 0.0);
        assert_abs_diff_eq!(r.distance, c.rear.d_f + r.components["d_bar"], epsilon = 1e-12);
    }

    #[test]
    fn brake_for_swerve_branch_continuity() {
        // choose rho so that t_c - rho sits exactly on v_rho / a_min_brake
        let c = ctx();
        let base = d_brake_for_swerve(&c, 10.0, 20.0, 0.0).unwrap();
        let t_c = base.t_c;
        let p = c.safety;
        // v_rho / a = t_c - rho with v_rho = v_r + a_acc rho
        let v_r = 1.0;
        let rho = (p.a_min_brake * t_c - v_r) / (p.a_min_brake + p.a_max_accel);
        let v_rho = p.speed_after_reaction(v_r, rho);
        let bt = t_c - rho;
        let parabola = v_rho * bt - 0.5 * p.a_min_brake * bt * bt;
        let stop = v_rho * v_rho / (2.0 * p.a_min_brake);
        assert_abs_diff_eq!(parabola, stop, epsilon = 1e-9);
        let r = d_brake_for_swerve(&c, v_r, 20.0, rho).unwrap();
        assert_abs_diff_eq!(r.components["x_r_brake"], stop, epsilon = 1e-9);
    }

    #[test]
    fn swerve_for_swerve_collapses_for_equal_speeds() {
        let mut c = ctx();
        c.safety.rho = 0.0;
        let v = 20.0;
        let r = d_swerve_for_swerve(&c, v, v, 0.0).unwrap();
        let vf = r.v_f_prime;
        let t = r.components["t_1"];
        assert_eq!(t, r.components["t_2"]);
        let expected = v * t + v * v / (2.0 * c.safety.a_min_brake)
            - vf * t
            - vf * vf / (2.0 * c.safety.a_max_brake)
            + r.components["d_prime"]
            + r.components["d_bar"];
        assert_abs_diff_eq!(r.distance, expected, epsilon = 1e-9);
    }

    #[test]
    fn slow_lead_swerve_gets_no_travel_credit() {
        let c = ctx();
        let r = d_swerve_for_swerve(&c, 20.4, 0.035, c.safety.rho).unwrap();
        assert!(r.components["t_2"] > c.safety.rho + r.components["t_1"]);
        assert_eq!(r.x_f, 0.0);
        assert!(r.warnings.iter().any(|w| w.contains("bounded by zero")));
        // the published form keeps the lead travel
        let mut l = c.clone();
        l.options = FormulaOptions::literal();
        let r = d_swerve_for_swerve(&l, 20.4, 3.0, 0.0).unwrap();
        assert!(r.components["t_2"] > r.components["t_1"]);
        assert!(r.x_f > 0.0);
    }

    #[test]
    fn swerve_for_swerve_is_not_clamped() {
        let c = ctx();
        for (v_r, v_f) in [(20.0, 30.0), (5.0, 25.0), (0.0, 10.0)] {
            let r = d_swerve_for_swerve(&c, v_r, v_f, c.safety.rho).unwrap();
            let expected = r.components["interior"] + r.components["d_prime"] + r.components["d_bar"];
            assert_eq!(r.distance, expected);
        }
    }

    #[test]
    fn literal_swerve_for_swerve_counts_less_rear_travel() {
        let c = ctx();
        let mut lit = c.clone();
        lit.options = FormulaOptions::literal();
        let a = d_swerve_for_swerve(&c, 20.0, 20.0, 0.1).unwrap().distance;
        let b = d_swerve_for_swerve(&lit, 20.0, 20.0, 0.1).unwrap().distance;
        assert!(a > b);
    }

    #[test]
    fn stationary_lead_fallback() {
        let c = ctx();
        let r = d_brake_for_swerve(&c, 10.0, 0.0, c.safety.rho).unwrap();
        let bb = d_brake_for_brake(&c, 10.0, 0.0, c.safety.rho).unwrap();
        assert_abs_diff_eq!(r.distance, bb.distance, epsilon = 1e-9);
        assert!(!r.warnings.is_empty());
    }

    #[test]
    fn registry_lookup() {
        let reg = ScenarioRegistry::standard();
        assert_eq!(reg.names(), vec!["bb", "sb", "bs", "ss"]);
        assert_eq!(reg.get("sb").unwrap().name(), "sb");
        match reg.get("zz") {
            Err(Error::UnknownName { known, .. }) => assert_eq!(known, "bb, sb, bs, ss"),
            _ => panic!("expected unknown name"),
        }
    }

    #[test]
    fn negative_speed_rejected() {
        let c = ctx();
        assert!(d_swerve_for_brake(&c, -1.0, 0.0, 0.1).is_err());
    }

    proptest::proptest! {
        #[test]
        fn premises_hold(v_r in 0.0f64..35.0, v_f in 0.0f64..35.0, rho in 0.0f64..0.5) {
            let c = ctx();
            let reg = ScenarioRegistry::standard();
            for s in reg.iter() {
                let r = s.evaluate(&c, v_r, v_f, rho).unwrap();
                proptest::prop_assert!(r.v_f_prime <= v_f + 1e-12);
                if s.name() != "ss" {
                    proptest::prop_assert!(r.distance >= c.contact_distance() - 1e-12);
                }
            }
            // the lead never outruns the slowest longitudinal speed of the rear
            let sb = d_swerve_for_brake(&c, v_r, v_f, rho).unwrap();
            let rear_min = v_r * sb.components["psi_max"].cos();
            proptest::prop_assert!(sb.v_f_prime <= rear_min + 1e-12);
            let bs = d_brake_for_swerve(&c, v_r, v_f, rho).unwrap();
            proptest::prop_assert!(bs.v_f_prime <= bs.components["v_r_min"] + 1e-12);
        }
    }
}
