//! Worst-case multi-vehicle simulation used as an oracle for the distance
//! formulas.
//!
//! Every agent follows a fixed script of phases, evaluated in closed form at
//! each sample time. Collisions are checked on the axis-aligned box of each
//! chassis at its current yaw, or optionally on the exact rotated rectangles.

use serde::{Deserialize, Serialize};

use crate::config::{SafetyParams, VehicleGeometry};
use crate::error::{Error, Result};
use crate::rotation::{corners, footprint_box, oriented_overlap};
use crate::scenario::{ScenarioContext, ScenarioRegistry};
use crate::swerve::SwerveManoeuvre;
use crate::universal::{FollowingRule, TripleState, Universal};
use crate::{braking_travel, FormulaMode, LeadBraking};

/// Horizon added after the last scripted phase ends.
const SETTLE_TIME: f64 = 1.0;

/// Gap between blocks, as a multiple of the larger of `d_bb` and `d_ss`.
pub const BLOCK_BREAK_FACTOR: f64 = 1.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Role {
    BrakingLead,
    SwervingLead,
    ReactingFollower,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Phase {
    /// Constant speed.
    Cruise { duration: f64 },
    /// Constant longitudinal acceleration (may be negative, stops at zero).
    Accelerate { a: f64, duration: f64 },
    /// Brake at `a > 0` until stopped, then stay.
    Brake { a: f64 },
    /// Two-arc left lane change at the current speed.
    Swerve,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentScript {
    pub role: Role,
    pub geometry: VehicleGeometry,
    pub x: f64,
    pub y: f64,
    pub v: f64,
    pub phases: Vec<Phase>,
}

#[derive(Debug, Clone, Copy)]
enum Segment {
    Straight {
        t0: f64,
        x0: f64,
        y0: f64,
        v0: f64,
        a: f64,
    },
    Swerve {
        t0: f64,
        x0: f64,
        y0: f64,
        m: SwerveManoeuvre,
    },
}

/// Pose of an agent's centre of mass and chassis yaw.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AgentPose {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    pub v: f64,
}

/// An agent's script resolved into timed segments.
#[derive(Debug, Clone)]
pub struct Plan {
    segments: Vec<(f64, Segment)>,
    pub geometry: VehicleGeometry,
    /// Time at which the last phase ends.
    pub end: f64,
}

fn straight_state(t: f64, t0: f64, x0: f64, v0: f64, a: f64) -> (f64, f64) {
    let tau = t - t0;
    if a < 0.0 {
        let x = x0 + braking_travel(v0, -a, tau, LeadBraking::StopClamped);
        (x, (v0 + a * tau).max(0.0))
    } else {
        (x0 + v0 * tau + 0.5 * a * tau * tau, v0 + a * tau)
    }
}

impl Plan {
    pub fn new(script: &AgentScript, p: &SafetyParams) -> Result<Self> {
        let mut segments = Vec::new();
        let (mut t, mut x, mut y, mut v) = (0.0, script.x, script.y, script.v);
        for phase in &script.phases {
            match *phase {
                Phase::Cruise { duration } => {
                    segments.push((t, Segment::Straight { t0: t, x0: x, y0: y, v0: v, a: 0.0 }));
                    x += v * duration;
                    t += duration;
                }
                Phase::Accelerate { a, duration } => {
                    segments.push((t, Segment::Straight { t0: t, x0: x, y0: y, v0: v, a }));
                    let (nx, nv) = straight_state(t + duration, t, x, v, a);
                    x = nx;
                    v = nv;
                    t += duration;
                }
                Phase::Brake { a } => {
                    segments.push((t, Segment::Straight { t0: t, x0: x, y0: y, v0: v, a: -a }));
                    if v > 0.0 {
                        x += v * v / (2.0 * a);
                        t += v / a;
                    }
                    v = 0.0;
                }
                Phase::Swerve => {
                    if v > 0.0 {
                        let m = SwerveManoeuvre::build(v, &script.geometry, p, FormulaMode::Corrected)?;
                        segments.push((t, Segment::Swerve { t0: t, x0: x, y0: y, m }));
                        let end = m.pose_at(m.duration);
                        x += end.x;
                        y += end.y;
                        t += m.duration;
                    }
                }
            }
        }
        segments.push((t, Segment::Straight { t0: t, x0: x, y0: y, v0: v, a: 0.0 }));
        Ok(Self {
            segments,
            geometry: script.geometry,
            end: t,
        })
    }

    pub fn pose(&self, t: f64) -> AgentPose {
        let idx = self.segments.partition_point(|(start, _)| *start <= t).max(1) - 1;
        match self.segments[idx].1 {
            Segment::Straight { t0, x0, y0, v0, a } => {
                let (x, v) = straight_state(t.max(t0), t0, x0, v0, a);
                AgentPose { x, y: y0, theta: 0.0, v }
            }
            Segment::Swerve { t0, x0, y0, m } => {
                let s = m.pose_at(t - t0);
                AgentPose {
                    x: x0 + s.x,
                    y: y0 + s.y,
                    theta: s.theta,
                    v: m.v,
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum CollisionTest {
    /// Axis-aligned box of the chassis at its current yaw.
    #[default]
    BoundingBox,
    /// Exact rotated rectangles.
    Exact,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimOutcome {
    /// Smallest longitudinal box gap while the boxes overlap laterally.
    pub min_gap_long: f64,
    /// Smallest lateral box gap while the boxes overlap longitudinally.
    pub min_gap_lat: f64,
    pub collided: bool,
    pub first_violation_time: Option<f64>,
    /// Agents involved in the first violation.
    pub first_violation_pair: Option<(usize, usize)>,
    pub steps: usize,
}

/// World-frame box `[x_lo, x_hi, y_lo, y_hi]` of an agent.
pub fn world_box(g: &VehicleGeometry, pose: &AgentPose) -> [f64; 4] {
    let [front, rear, left, right] = footprint_box(g, pose.theta);
    [pose.x - rear, pose.x + front, pose.y - right, pose.y + left]
}

fn interval_gap(a_lo: f64, a_hi: f64, b_lo: f64, b_hi: f64) -> f64 {
    (b_lo - a_hi).max(a_lo - b_hi)
}

/// Simulates the scripts from `t = 0` to `horizon` (or until every script has
/// settled when `horizon` is `None`).
pub fn run(
    agents: &[AgentScript],
    dt: f64,
    horizon: Option<f64>,
    p: &SafetyParams,
    test: CollisionTest,
) -> Result<SimOutcome> {
    if !(dt > 0.0 && dt <= 0.01) {
        return Err(Error::InvalidParameter {
            field: "dt",
            bound: "must lie in (0, 0.01]",
            value: dt,
        });
    }
    let plans = agents
        .iter()
        .map(|a| Plan::new(a, p))
        .collect::<Result<Vec<_>>>()?;
    let horizon = horizon.unwrap_or_else(|| plans.iter().map(|p| p.end).fold(0.0, f64::max) + SETTLE_TIME);
    let steps = (horizon / dt).ceil() as usize;
    let mut out = SimOutcome {
        min_gap_long: f64::INFINITY,
        min_gap_lat: f64::INFINITY,
        collided: false,
        first_violation_time: None,
        first_violation_pair: None,
        steps: steps + 1,
    };
    let mut poses = vec![AgentPose { x: 0.0, y: 0.0, theta: 0.0, v: 0.0 }; plans.len()];
    let mut boxes = vec![[0.0; 4]; plans.len()];
    for k in 0..=steps {
        let t = k as f64 * dt;
        for (i, plan) in plans.iter().enumerate() {
            poses[i] = plan.pose(t);
            boxes[i] = world_box(&plan.geometry, &poses[i]);
        }
        for i in 0..plans.len() {
            for j in i + 1..plans.len() {
                let (a, b) = (&boxes[i], &boxes[j]);
                let gx = interval_gap(a[0], a[1], b[0], b[1]);
                let gy = interval_gap(a[2], a[3], b[2], b[3]);
                if gy < 0.0 {
                    out.min_gap_long = out.min_gap_long.min(gx);
                }
                if gx < 0.0 {
                    out.min_gap_lat = out.min_gap_lat.min(gy);
                }
                let hit = gx < 0.0
                    && gy < 0.0
                    && match test {
                        CollisionTest::BoundingBox => true,
                        CollisionTest::Exact => oriented_overlap(
                            &corners(&plans[i].geometry, poses[i].x, poses[i].y, poses[i].theta),
                            &corners(&plans[j].geometry, poses[j].x, poses[j].y, poses[j].theta),
                        ),
                    };
                if hit && !out.collided {
                    out.collided = true;
                    out.first_violation_time = Some(t);
                    out.first_violation_pair = Some((i, j));
                }
            }
        }
    }
    Ok(out)
}

/// The four pairwise situations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PairScenario {
    BrakeForBrake,
    SwerveForBrake,
    BrakeForSwerve,
    SwerveForSwerve,
}

impl PairScenario {
    pub const ALL: [PairScenario; 4] = [
        PairScenario::BrakeForBrake,
        PairScenario::SwerveForBrake,
        PairScenario::BrakeForSwerve,
        PairScenario::SwerveForSwerve,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PairScenario::BrakeForBrake => "bb",
            PairScenario::SwerveForBrake => "sb",
            PairScenario::BrakeForSwerve => "bs",
            PairScenario::SwerveForSwerve => "ss",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|s| s.name() == name)
            .ok_or_else(|| Error::UnknownName {
                kind: "scenario",
                name: name.to_string(),
                known: "bb, sb, bs, ss".into(),
            })
    }
}

fn reaction(p: &SafetyParams, rho: f64) -> Vec<Phase> {
    if rho > 0.0 {
        vec![Phase::Accelerate {
            a: p.a_max_accel,
            duration: rho,
        }]
    } else {
        Vec::new()
    }
}

/// Rear at `x = 0`, front at `x = spacing`, both in the same lane.
pub fn pair_agents(kind: PairScenario, v_r: f64, v_f: f64, spacing: f64, ctx: &ScenarioContext) -> Vec<AgentScript> {
    let p = &ctx.safety;
    let rho = p.rho;
    let mut rear = reaction(p, rho);
    let (front_role, front) = match kind {
        PairScenario::BrakeForBrake => {
            rear.push(Phase::Brake { a: p.a_min_brake });
            (Role::BrakingLead, vec![Phase::Brake { a: p.a_max_brake }])
        }
        PairScenario::SwerveForBrake => {
            rear.push(Phase::Swerve);
            (Role::BrakingLead, vec![Phase::Brake { a: p.a_max_brake }])
        }
        PairScenario::BrakeForSwerve => {
            rear.push(Phase::Brake { a: p.a_min_brake });
            (Role::SwervingLead, vec![Phase::Swerve])
        }
        PairScenario::SwerveForSwerve => {
            rear.extend([Phase::Swerve, Phase::Brake { a: p.a_min_brake }]);
            (
                Role::SwervingLead,
                vec![Phase::Swerve, Phase::Brake { a: p.a_max_brake }],
            )
        }
    };
    vec![
        AgentScript {
            role: Role::ReactingFollower,
            geometry: ctx.rear,
            x: 0.0,
            y: 0.0,
            v: v_r,
            phases: rear,
        },
        AgentScript {
            role: front_role,
            geometry: ctx.front,
            x: spacing,
            y: 0.0,
            v: v_f,
            phases: front,
        },
    ]
}

/// Closed-form distance for `kind`.
pub fn formula_distance(kind: PairScenario, v_r: f64, v_f: f64, ctx: &ScenarioContext) -> Result<f64> {
    let reg = ScenarioRegistry::standard();
    Ok(reg.get(kind.name())?.evaluate(ctx, v_r, v_f, ctx.safety.rho)?.distance)
}

/// Smallest initial centre spacing (to 1 cm) at which the pair runs
/// collision free. Never below the contact distance.
pub fn minimal_safe_spacing(
    kind: PairScenario,
    v_r: f64,
    v_f: f64,
    dt: f64,
    ctx: &ScenarioContext,
    test: CollisionTest,
) -> Result<f64> {
    let safe = |d: f64| -> Result<bool> {
        Ok(!run(&pair_agents(kind, v_r, v_f, d, ctx), dt, None, &ctx.safety, test)?.collided)
    };
    let mut lo = ctx.contact_distance();
    if safe(lo)? {
        return Ok(lo);
    }
    // start from the closed form so the result never exceeds it when it is sound
    let mut hi = formula_distance(kind, v_r, v_f, ctx)?.max(lo);
    let mut grow = 0;
    while !safe(hi)? {
        hi = lo + 2.0 * (hi - lo);
        grow += 1;
        if grow > 20 {
            return Err(Error::BracketFailure(format!(
                "{} at v_r = {v_r}, v_f = {v_f}: no collision-free spacing below {hi} m",
                kind.name()
            )));
        }
    }
    while hi - lo > 0.01 {
        let mid = 0.5 * (lo + hi);
        if safe(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// How the front of a block starts the chain of responses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Trigger {
    Brake,
    Swerve,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Block {
    pub agents: Vec<AgentScript>,
    /// `spacings[k]` is the universal distance vehicle `k + 1` holds to
    /// vehicle `k` at its binding instant.
    pub spacings: Vec<f64>,
}

/// A block with the front vehicle first. Each follower cruises until its
/// predecessor starts responding, accelerates for one reaction time and
/// then does the opposite of its predecessor: swerve for a braking vehicle,
/// brake for a swerving one. The first vehicle into the free lane brakes
/// hard after its swerve; everyone else brakes comfortably.
///
/// Followers hold the universal distance (at the current speeds) from
/// `t = 0` until their own reaction starts; the initial position is the
/// furthest forward one for which that holds at every millisecond.
pub fn block_agents(speeds: &[f64], trigger: Trigger, ctx: &ScenarioContext) -> Result<Block> {
    const HOLD_DT: f64 = 1e-3;
    let p = &ctx.safety;
    let rho = p.rho;
    let mut agents: Vec<AgentScript> = Vec::with_capacity(speeds.len());
    let mut plans: Vec<Plan> = Vec::with_capacity(speeds.len());
    let mut spacings = Vec::new();
    let mut lane_taken = false;
    let mut prev_swerved = false;
    for (k, &v) in speeds.iter().enumerate() {
        let (role, phases, swerves, x) = if k == 0 {
            let (role, phases, swerves) = match trigger {
                Trigger::Brake => (Role::BrakingLead, vec![Phase::Brake { a: p.a_max_brake }], false),
                Trigger::Swerve => (
                    Role::SwervingLead,
                    vec![Phase::Swerve, Phase::Brake { a: p.a_max_brake }],
                    true,
                ),
            };
            (role, phases, swerves, 0.0)
        } else {
            let t_react = (k - 1) as f64 * rho;
            let n = (t_react / HOLD_DT).round() as usize;
            let mut x = f64::INFINITY;
            let mut held = 0.0;
            for i in 0..=n {
                let t = if i == n { t_react } else { i as f64 * HOLD_DT };
                let ahead = plans[k - 1].pose(t);
                let state = TripleState {
                    v1: v,
                    v2: ahead.v,
                    v3: k.checked_sub(2).map(|j| plans[j].pose(t).v),
                    d_23: None,
                };
                let d = Universal.distance(ctx, &state)?.distance;
                let candidate = ahead.x - d - v * t;
                if candidate < x {
                    x = candidate;
                    held = d;
                }
            }
            spacings.push(held);
            let mut phases = Vec::new();
            if k > 1 {
                phases.push(Phase::Cruise { duration: t_react });
            }
            phases.extend(reaction(p, rho));
            let swerves = !prev_swerved;
            if swerves {
                let a = if lane_taken { p.a_min_brake } else { p.a_max_brake };
                phases.extend([Phase::Swerve, Phase::Brake { a }]);
            } else {
                phases.push(Phase::Brake { a: p.a_min_brake });
            }
            (Role::ReactingFollower, phases, swerves, x)
        };
        lane_taken |= swerves;
        prev_swerved = swerves;
        let script = AgentScript {
            role,
            geometry: ctx.rear,
            x,
            y: 0.0,
            v,
            phases,
        };
        plans.push(Plan::new(&script, p)?);
        agents.push(script);
    }
    Ok(Block { agents, spacings })
}

/// Minimum gap between blocks.
pub fn block_break_gap(ctx: &ScenarioContext, v_rear: f64, v_front: f64) -> Result<f64> {
    let rho = ctx.safety.rho;
    let bb = crate::scenario::d_brake_for_brake(ctx, v_rear, v_front, rho)?.distance;
    let ss = crate::scenario::d_swerve_for_swerve(ctx, v_rear, v_front, rho)?.distance;
    Ok(BLOCK_BREAK_FACTOR * bb.max(ss))
}

/// Longitudinal gap between the two agents' boxes sampled on `[0, t_end]`.
pub fn gap_series(agents: &[AgentScript; 2], dt: f64, t_end: f64, p: &SafetyParams) -> Result<Vec<(f64, f64)>> {
    let a = Plan::new(&agents[0], p)?;
    let b = Plan::new(&agents[1], p)?;
    let n = (t_end / dt).ceil() as usize;
    Ok((0..=n)
        .map(|k| {
            let t = (k as f64 * dt).min(t_end);
            let ba = world_box(&a.geometry, &a.pose(t));
            let bb = world_box(&b.geometry, &b.pose(t));
            (t, bb[0] - ba[1])
        })
        .collect())
}
