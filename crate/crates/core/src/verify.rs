//! Randomised oracle suites for the safety theorems.
//!
//! Every suite draws its cases from a single seeded ChaCha stream up front,
//! then evaluates them (optionally in parallel) so reports are identical for
//! a given seed regardless of the thread count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::{SafetyParams, VehicleGeometry};
use crate::error::{Error, Result};
use crate::lower_bound::lower_bound;
use crate::rotation::{corners, inner_half_side, lateral_clearance};
use crate::rss::d_lat_at_rest;
use crate::scenario::{d_swerve_for_brake, ScenarioContext};
use crate::sim::{self, block_agents, pair_agents, CollisionTest, PairScenario, Trigger};
use crate::swerve::SwerveManoeuvre;
use crate::{braking_travel, par_map, LeadBraking};

/// Simulation step of every oracle run.
pub const ORACLE_DT: f64 = 1e-3;
/// Fraction of the positive interior distance used by tightness probes.
pub const TIGHTNESS_FRACTION: f64 = 0.9;
/// Keep at most this many failure messages per property.
const MAX_MESSAGES: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Suite {
    Theorems,
    Tightness,
}

impl Suite {
    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "theorems" => Ok(Suite::Theorems),
            "tightness" => Ok(Suite::Tightness),
            _ => Err(Error::UnknownName {
                kind: "suite",
                name: name.into(),
                known: "theorems, tightness".into(),
            }),
        }
    }
}

#[derive(Debug, Clone)]
pub struct VerifyOptions {
    pub seed: u64,
    /// Random cases per pairwise theorem.
    pub cases: usize,
    /// Random blocks for the whole-road theorem.
    pub blocks: usize,
    /// Random speed pairs per tightness family.
    pub probes: usize,
    pub speed_range: (f64, f64),
    pub block_len: (usize, usize),
    /// Collision test of the tightness probes.
    pub tightness_test: CollisionTest,
    /// Worker threads; 0 uses the rayon default.
    pub jobs: usize,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            seed: 42,
            cases: 200,
            blocks: 100,
            probes: 40,
            speed_range: (0.0, 30.0),
            block_len: (3, 8),
            tightness_test: CollisionTest::BoundingBox,
            jobs: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PropertyReport {
    pub property: String,
    pub cases: usize,
    pub passed: usize,
    pub failed: usize,
    /// Cases outside the property's domain (for example a swerve that is
    /// infeasible at the drawn speed).
    pub skipped: usize,
    pub ok: bool,
    pub messages: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub suite: Suite,
    pub seed: u64,
    pub ok: bool,
    pub properties: Vec<PropertyReport>,
}

#[derive(Debug, Clone, PartialEq)]
enum Outcome {
    Pass,
    Fail(String),
    Skip,
}

fn tally(property: &str, outcomes: Vec<Outcome>, need_pass: bool) -> PropertyReport {
    let mut r = PropertyReport {
        property: property.into(),
        cases: outcomes.len(),
        passed: 0,
        failed: 0,
        skipped: 0,
        ok: true,
        messages: Vec::new(),
    };
    for o in outcomes {
        match o {
            Outcome::Pass => r.passed += 1,
            Outcome::Skip => r.skipped += 1,
            Outcome::Fail(m) => {
                r.failed += 1;
                if r.messages.len() < MAX_MESSAGES {
                    r.messages.push(m);
                }
            }
        }
    }
    r.ok = r.failed == 0 && (!need_pass || r.passed > 0);
    r
}

fn domain(e: &Error) -> bool {
    matches!(
        e,
        Error::InfeasibleLaneChange { .. }
            | Error::HeadingLimit { .. }
            | Error::ClearanceUnreachable { .. }
            | Error::DegenerateSpeed { .. }
    )
}

fn evaluate<T: Sync>(items: &[T], jobs: usize, f: impl Fn(&T) -> Outcome + Sync) -> Vec<Outcome> {
    par_map(items, jobs, f)
}

fn speed_pairs(rng: &mut ChaCha8Rng, n: usize, (lo, hi): (f64, f64)) -> Vec<(f64, f64)> {
    (0..n).map(|_| (rng.gen_range(lo..=hi), rng.gen_range(lo..=hi))).collect()
}

fn case_label(kind: &str, v_r: f64, v_f: f64) -> String {
    format!("{kind}: v_r = {v_r:.4}, v_f = {v_f:.4}")
}

/// A swerve that reaches the clearance offset keeps every corner at least
/// the lateral buffer away from the other vehicle's left side for the rest
/// of the manoeuvre. Exact rotated corners, sampled every millisecond.
fn theorem_1(ctx: &ScenarioContext, v: f64, other: &VehicleGeometry) -> Outcome {
    let p = &ctx.safety;
    let g = &ctx.rear;
    let m = match SwerveManoeuvre::build(v, g, p, ctx.mode()) {
        Ok(m) => m,
        Err(e) if domain(&e) => return Outcome::Skip,
        Err(e) => return Outcome::Fail(e.to_string()),
    };
    let y_c = match lateral_clearance(g, other, m.theta_max, p) {
        Ok(y) => y,
        Err(e) => return Outcome::Fail(e.to_string()),
    };
    let c = match m.clearance(y_c) {
        Ok(c) => c,
        Err(e) if domain(&e) => return Outcome::Skip,
        Err(e) => return Outcome::Fail(e.to_string()),
    };
    let need = other.b_l + d_lat_at_rest(p);
    let n = ((m.duration - c.t_c) / ORACLE_DT).ceil().max(0.0) as usize;
    for k in 0..=n {
        let t = (c.t_c + k as f64 * ORACLE_DT).min(m.duration);
        let pose = m.pose_at(t);
        let low = corners(g, pose.x, pose.y, pose.theta)
            .iter()
            .map(|c| c.1)
            .fold(f64::INFINITY, f64::min);
        if low < need - 1e-9 {
            return Outcome::Fail(format!(
                "v = {v:.4}: lowest corner {low:.6} below {need:.6} at t = {t:.4} (t_c = {:.4})",
                c.t_c
            ));
        }
    }
    Outcome::Pass
}

/// Runs `kind` at the closed-form spacing and reports any collision. For the
/// swerve-for-brake case the centre gap must also be non-increasing up to
/// the clearance time whenever the lead is no faster than the rear's
/// forward speed at peak heading.
fn pair_safe(ctx: &ScenarioContext, kind: PairScenario, v_r: f64, v_f: f64) -> Outcome {
    let label = case_label(kind.name(), v_r, v_f);
    let d = match sim::formula_distance(kind, v_r, v_f, ctx) {
        Ok(d) => d,
        Err(e) if domain(&e) => return Outcome::Skip,
        Err(e) => return Outcome::Fail(format!("{label}: {e}")),
    };
    let agents = pair_agents(kind, v_r, v_f, d, ctx);
    let out = match sim::run(&agents, ORACLE_DT, None, &ctx.safety, CollisionTest::BoundingBox) {
        Ok(o) => o,
        Err(e) if domain(&e) => return Outcome::Skip,
        Err(e) => return Outcome::Fail(format!("{label}: {e}")),
    };
    if out.collided {
        return Outcome::Fail(format!(
            "{label}: collision at t = {:.3} with spacing {d:.4}",
            out.first_violation_time.unwrap_or(f64::NAN)
        ));
    }
    if kind == PairScenario::SwerveForBrake {
        if let Err(m) = monotone_gap(ctx, v_r, v_f, d) {
            return Outcome::Fail(format!("{label}: {m}"));
        }
    }
    Outcome::Pass
}

fn monotone_gap(ctx: &ScenarioContext, v_r: f64, v_f: f64, d: f64) -> std::result::Result<(), String> {
    let r = d_swerve_for_brake(ctx, v_r, v_f, ctx.safety.rho).map_err(|e| e.to_string())?;
    let (Some(&t_c), Some(&psi_max), Some(&v_r_rho)) = (
        r.components.get("t_c"),
        r.components.get("psi_max"),
        r.components.get("v_r_rho"),
    ) else {
        return Ok(());
    };
    if v_f > v_r_rho * psi_max.cos() || v_f > v_r {
        return Ok(());
    }
    let agents = pair_agents(PairScenario::SwerveForBrake, v_r, v_f, d, ctx);
    let plans = [
        sim::Plan::new(&agents[0], &ctx.safety).map_err(|e| e.to_string())?,
        sim::Plan::new(&agents[1], &ctx.safety).map_err(|e| e.to_string())?,
    ];
    let end = ctx.safety.rho + t_c;
    let n = (end / ORACLE_DT).ceil() as usize;
    let mut prev = f64::INFINITY;
    for k in 0..=n {
        let t = (k as f64 * ORACLE_DT).min(end);
        let gap = plans[1].pose(t).x - plans[0].pose(t).x;
        if gap > prev + 1e-9 {
            return Err(format!("centre gap grows at t = {t:.3} ({prev:.6} -> {gap:.6})"));
        }
        prev = gap;
    }
    Ok(())
}

/// Particle-model oracle for the lower bound. After the worst-case reaction
/// the rear particle applies constant lateral acceleration `a_y` and
/// constant braking `a_x`; the lead brakes hard from the start. The profile
/// is safe when the particle's front never reaches the lead's position
/// before the particle is `y_c` to the side.
pub fn particle_profile_safe(
    v_r: f64,
    v_f: f64,
    y_c: f64,
    spacing: f64,
    a_y: f64,
    a_x: f64,
    g: &VehicleGeometry,
    p: &SafetyParams,
) -> bool {
    let rho = p.rho;
    let v = v_r + p.a_max_accel * rho;
    let reaction = v_r * rho + 0.5 * p.a_max_accel * rho * rho;
    let front = inner_half_side(g);
    let t_clear = if y_c > 0.0 { (2.0 * y_c / a_y).sqrt() } else { 0.0 };
    let n = ((rho + t_clear) / ORACLE_DT).ceil() as usize;
    for k in 0..=n {
        let t = (k as f64 * ORACLE_DT).min(rho + t_clear);
        let x_r = if t <= rho {
            v_r * t + 0.5 * p.a_max_accel * t * t
        } else {
            reaction + braking_travel(v, a_x, t - rho, LeadBraking::StopClamped)
        };
        let x_f = spacing + braking_travel(v_f, p.a_max_brake, t, LeadBraking::StopClamped);
        if x_r + front >= x_f {
            return false;
        }
    }
    true
}

/// No constant-acceleration particle profile within the comfort limits is
/// safe 1 cm below the lower bound, and the extreme profile is safe 1 cm
/// above it (or above its own front extent, whichever is larger).
fn theorem_6(ctx: &ScenarioContext, v_r: f64, v_f: f64) -> Outcome {
    let p = &ctx.safety;
    let g = &ctx.rear;
    let label = case_label("lower bound", v_r, v_f);
    let sb = match d_swerve_for_brake(ctx, v_r, v_f, p.rho) {
        Ok(r) => r,
        Err(e) if domain(&e) => return Outcome::Skip,
        Err(e) => return Outcome::Fail(format!("{label}: {e}")),
    };
    let y_c = sb.components.get("y_c").copied().unwrap_or(0.0);
    let lb = match lower_bound(v_r, v_f, y_c, g, p) {
        Ok(r) => r,
        Err(e) => return Outcome::Fail(format!("{label}: {e}")),
    };
    let d = lb.d_bar_long;
    if d <= 0.01 {
        return Outcome::Skip;
    }
    const GRID: usize = 5;
    for i in 1..=GRID {
        for j in 0..=GRID {
            let a_y = p.a_lat_min * i as f64 / GRID as f64;
            let a_x = p.a_min_brake * j as f64 / GRID as f64;
            if particle_profile_safe(v_r, v_f, y_c, d - 0.01, a_y, a_x, g, p) {
                return Outcome::Fail(format!(
                    "{label}: profile a_y = {a_y:.3}, a_x = {a_x:.3} is safe below the bound {d:.4}"
                ));
            }
        }
    }
    // below the particle's own front extent the pair touches at t = 0
    let above = d.max(inner_half_side(g)) + 0.01;
    if !particle_profile_safe(v_r, v_f, y_c, above, p.a_lat_min, p.a_min_brake, g, p) {
        return Outcome::Fail(format!("{label}: extreme profile collides at {above:.4}, above the bound {d:.4}"));
    }
    Outcome::Pass
}

fn block_safe(ctx: &ScenarioContext, speeds: &[f64], trigger: Trigger) -> Outcome {
    let label = format!("block {trigger:?} {speeds:.3?}");
    let block = match block_agents(speeds, trigger, ctx) {
        Ok(b) => b,
        Err(e) if domain(&e) => return Outcome::Skip,
        Err(e) => return Outcome::Fail(format!("{label}: {e}")),
    };
    match sim::run(&block.agents, ORACLE_DT, None, &ctx.safety, CollisionTest::BoundingBox) {
        Ok(o) if o.collided => Outcome::Fail(format!(
            "{label}: agents {:?} collide at t = {:.3}",
            o.first_violation_pair.unwrap_or((0, 0)),
            o.first_violation_time.unwrap_or(f64::NAN)
        )),
        Ok(_) => Outcome::Pass,
        Err(e) if domain(&e) => Outcome::Skip,
        Err(e) => Outcome::Fail(format!("{label}: {e}")),
    }
}

/// Runs `kind` at `extents + fraction * interior`. `Pass` means the reduced
/// spacing collides.
fn tightness_probe(ctx: &ScenarioContext, kind: PairScenario, v_r: f64, v_f: f64, test: CollisionTest) -> Outcome {
    let d = match sim::formula_distance(kind, v_r, v_f, ctx) {
        Ok(d) => d,
        Err(_) => return Outcome::Skip,
    };
    let extents = ctx.contact_distance();
    let interior = d - extents;
    if interior <= 0.0 {
        return Outcome::Skip;
    }
    let agents = pair_agents(kind, v_r, v_f, extents + TIGHTNESS_FRACTION * interior, ctx);
    match sim::run(&agents, ORACLE_DT, None, &ctx.safety, test) {
        Ok(o) if o.collided => Outcome::Pass,
        _ => Outcome::Skip,
    }
}

/// Theorem suite: clearance, the three pairwise distances, whole-road
/// blocks and the lower bound.
pub fn verify_theorems(ctx: &ScenarioContext, o: &VerifyOptions) -> VerifyReport {
    let mut rng = ChaCha8Rng::seed_from_u64(o.seed);
    let (lo, hi) = o.speed_range;
    let clearance: Vec<f64> = (0..o.cases).map(|_| rng.gen_range(lo..=hi)).collect();
    let sb = speed_pairs(&mut rng, o.cases, o.speed_range);
    let bs = speed_pairs(&mut rng, o.cases, o.speed_range);
    let ss = speed_pairs(&mut rng, o.cases, o.speed_range);
    let blocks: Vec<(Vec<f64>, Trigger)> = (0..o.blocks)
        .map(|_| {
            let n = rng.gen_range(o.block_len.0..=o.block_len.1);
            let speeds = (0..n).map(|_| rng.gen_range(lo..=hi)).collect();
            let trigger = if rng.gen_bool(0.5) { Trigger::Brake } else { Trigger::Swerve };
            (speeds, trigger)
        })
        .collect();
    let lb = speed_pairs(&mut rng, o.cases, o.speed_range);

    let mut properties = vec![
        tally(
            "lateral clearance",
            evaluate(&clearance, o.jobs, |&v| theorem_1(ctx, v, &ctx.front)),
            true,
        ),
        tally(
            "swerve for braking lead",
            evaluate(&sb, o.jobs, |&(r, f)| pair_safe(ctx, PairScenario::SwerveForBrake, r, f)),
            true,
        ),
        tally(
            "brake for swerving lead",
            evaluate(&bs, o.jobs, |&(r, f)| pair_safe(ctx, PairScenario::BrakeForSwerve, r, f)),
            true,
        ),
        tally(
            "swerve for swerving lead",
            evaluate(&ss, o.jobs, |&(r, f)| pair_safe(ctx, PairScenario::SwerveForSwerve, r, f)),
            true,
        ),
        tally(
            "universal distance in blocks",
            evaluate(&blocks, o.jobs, |(s, t)| block_safe(ctx, s, *t)),
            true,
        ),
        tally(
            "particle lower bound is necessary",
            evaluate(&lb, o.jobs, |&(r, f)| theorem_6(ctx, r, f)),
            true,
        ),
    ];
    properties.shrink_to_fit();
    VerifyReport {
        suite: Suite::Theorems,
        seed: o.seed,
        ok: properties.iter().all(|p| p.ok),
        properties,
    }
}

/// Tightness suite: at `extents + 0.9 * interior` each family must collide
/// for at least one drawn speed pair.
pub fn verify_tightness(ctx: &ScenarioContext, o: &VerifyOptions) -> VerifyReport {
    let mut rng = ChaCha8Rng::seed_from_u64(o.seed);
    let properties: Vec<PropertyReport> = PairScenario::ALL
        .into_iter()
        .map(|kind| {
            let pairs = speed_pairs(&mut rng, o.probes, o.speed_range);
            tally(
                &format!("tightness: {}", kind.name()),
                evaluate(&pairs, o.jobs, |&(r, f)| tightness_probe(ctx, kind, r, f, o.tightness_test)),
                true,
            )
        })
        .collect();
    VerifyReport {
        suite: Suite::Tightness,
        seed: o.seed,
        ok: properties.iter().all(|p| p.ok),
        properties,
    }
}

pub fn verify(suite: Suite, ctx: &ScenarioContext, o: &VerifyOptions) -> VerifyReport {
    match suite {
        Suite::Theorems => verify_theorems(ctx, o),
        Suite::Tightness => verify_tightness(ctx, o),
    }
}
