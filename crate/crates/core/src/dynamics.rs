//! Dynamic single-track model with Pacejka lateral tyre forces and drag.
//!
//! States follow the usual reprint of the model: `beta` is the side slip
//! with the velocity heading at `psi - beta`, so a left turn in steady state
//! has negative `beta`. Longitudinal demand acts on the rear wheel only and
//! there is no side wind.
//!
//! [`find_swerve`] searches open-loop steering-rate profiles over four equal
//! quarters, `(+w1, -w1, -w2, +w2)`, which steer in, unwind, counter-steer
//! and unwind back to a straight wheel.

use serde::Serialize;

use crate::config::{DynamicParams, SafetyParams, VehicleGeometry};
use crate::error::{Error, Result};
use crate::rotation::rotated_extents;
use crate::rss;

/// Below this speed slip angles are numerically meaningless.
pub const MIN_SPEED: f64 = 0.5;

pub const DEFAULT_DT: f64 = 1e-3;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct DynamicState {
    pub x: f64,
    pub y: f64,
    pub v: f64,
    pub beta: f64,
    pub psi: f64,
    pub omega_z: f64,
    pub delta: f64,
}

impl DynamicState {
    pub fn straight(v: f64) -> Self {
        Self {
            v,
            ..Self::default()
        }
    }

    fn to_array(self) -> [f64; 7] {
        [self.x, self.y, self.v, self.beta, self.psi, self.omega_z, self.delta]
    }

    fn from_array(a: [f64; 7]) -> Self {
        Self {
            x: a[0],
            y: a[1],
            v: a[2],
            beta: a[3],
            psi: a[4],
            omega_z: a[5],
            delta: a[6],
        }
    }
}

/// Inputs held constant over one step.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct Control {
    pub steering_rate: f64,
    /// Braking demand in m/s², positive slows the vehicle.
    pub brake: f64,
}

/// Slip angles `(front, rear)`.
pub fn slip_angles(s: &DynamicState, g: &VehicleGeometry) -> (f64, f64) {
    let (sb, cb) = s.beta.sin_cos();
    let vx = s.v * cb;
    let front = s.delta - ((g.l_f * s.omega_z - s.v * sb) / vx).atan();
    let rear = ((g.l_r * s.omega_z + s.v * sb) / vx).atan();
    (front, rear)
}

/// Time derivative of the state.
pub fn derivatives(s: &DynamicState, c: Control, dp: &DynamicParams, g: &VehicleGeometry) -> [f64; 7] {
    let (alpha_f, alpha_r) = slip_angles(s, g);
    let f_sf = dp.front.lateral_force(alpha_f);
    let f_sr = dp.rear.lateral_force(alpha_r);
    let f_lf = 0.0;
    let f_lr = -dp.m * c.brake;
    let f_ax = dp.drag(s.v);
    let f_ay = 0.0;
    let (sb, cb) = s.beta.sin_cos();
    let (sdb, cdb) = (s.delta + s.beta).sin_cos();
    let (sd, cd) = s.delta.sin_cos();
    let v_dot = ((f_lr - f_ax) * cb + f_lf * cdb - (f_sr - f_ay) * sb - f_sf * sdb) / dp.m;
    let beta_dot = s.omega_z
        - ((f_lr - f_ax) * sb + f_lf * sdb + (f_sr - f_ay) * cb + f_sf * cdb) / (dp.m * s.v);
    let omega_dot = (f_sf * g.l_f * cd - f_sr * g.l_r - f_ay * dp.e_sp + f_lf * g.l_f * sd) / dp.i_zz;
    [
        s.v * (s.psi - s.beta).cos(),
        s.v * (s.psi - s.beta).sin(),
        v_dot,
        beta_dot,
        s.omega_z,
        omega_dot,
        c.steering_rate,
    ]
}

/// Lateral acceleration of the centre of mass: speed times the turn rate of
/// the velocity heading.
pub fn lateral_acceleration(s: &DynamicState, c: Control, dp: &DynamicParams, g: &VehicleGeometry) -> f64 {
    let d = derivatives(s, c, dp, g);
    s.v * (d[4] - d[3])
}

/// One classical Runge-Kutta step.
pub fn step(
    s: &DynamicState,
    c: Control,
    dt: f64,
    dp: &DynamicParams,
    g: &VehicleGeometry,
) -> Result<DynamicState> {
    let y0 = s.to_array();
    let at = |y: [f64; 7], k: &[f64; 7], h: f64| {
        let mut out = y;
        for i in 0..7 {
            out[i] += h * k[i];
        }
        DynamicState::from_array(out)
    };
    let k1 = derivatives(s, c, dp, g);
    let s2 = at(y0, &k1, dt / 2.0);
    let k2 = derivatives(&s2, c, dp, g);
    let s3 = at(y0, &k2, dt / 2.0);
    let k3 = derivatives(&s3, c, dp, g);
    let s4 = at(y0, &k3, dt);
    let k4 = derivatives(&s4, c, dp, g);
    let mut y = y0;
    for i in 0..7 {
        y[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    let next = DynamicState::from_array(y);
    if !(next.v >= MIN_SPEED) {
        return Err(Error::LowSpeedSingularity { t: f64::NAN, v: next.v });
    }
    Ok(next)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ManoeuvreControl {
    /// Steering rate for each quarter of the manoeuvre, rad/s.
    pub steering_rates: [f64; 4],
    pub brake: f64,
    pub t_f: f64,
}

impl ManoeuvreControl {
    pub fn swerve(w1: f64, w2: f64, brake: f64, t_f: f64) -> Self {
        Self {
            steering_rates: [w1, -w1, -w2, w2],
            brake,
            t_f,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub t: Vec<f64>,
    pub states: Vec<DynamicState>,
    /// Largest |lateral acceleration| seen at the step starts.
    pub peak_lateral_acceleration: f64,
}

impl Trajectory {
    pub fn last(&self) -> &DynamicState {
        self.states.last().expect("trajectory is never empty")
    }

    /// Largest chassis yaw magnitude over the trajectory.
    pub fn max_yaw(&self) -> f64 {
        self.states.iter().map(|s| s.psi.abs()).fold(0.0, f64::max)
    }

    /// First sample at or past lateral offset `y_c`, as `(x, t)`.
    pub fn first_crossing(&self, y_c: f64) -> Option<(f64, f64)> {
        self.states
            .iter()
            .zip(&self.t)
            .find(|(s, _)| s.y >= y_c)
            .map(|(s, &t)| (s.x, t))
    }
}

/// Number of steps used for a manoeuvre of length `t_f`: a multiple of four
/// so every quarter has the same number of steps, with step size at most
/// `dt`.
pub fn step_count(t_f: f64, dt: f64) -> usize {
    4 * ((t_f / (4.0 * dt)) - 1e-9).ceil().max(1.0) as usize
}

/// Integrates `control` from a straight start at `v0`.
pub fn simulate(
    v0: f64,
    control: &ManoeuvreControl,
    dt: f64,
    dp: &DynamicParams,
    g: &VehicleGeometry,
) -> Result<Trajectory> {
    let n = step_count(control.t_f, dt);
    let h = control.t_f / n as f64;
    let quarter = n / 4;
    let mut s = DynamicState::straight(v0);
    let mut t = Vec::with_capacity(n + 1);
    let mut states = Vec::with_capacity(n + 1);
    let mut peak = 0.0f64;
    t.push(0.0);
    states.push(s);
    for i in 0..n {
        let c = Control {
            steering_rate: control.steering_rates[i / quarter],
            brake: control.brake,
        };
        peak = peak.max(lateral_acceleration(&s, c, dp, g).abs());
        s = step(&s, c, h, dp, g).map_err(|e| match e {
            Error::LowSpeedSingularity { v, .. } => Error::LowSpeedSingularity {
                t: (i + 1) as f64 * h,
                v,
            },
            other => other,
        })?;
        t.push((i + 1) as f64 * h);
        states.push(s);
    }
    Ok(Trajectory {
        t,
        states,
        peak_lateral_acceleration: peak,
    })
}

/// Search grid and tolerances for [`find_swerve`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchOptions {
    pub dt: f64,
    pub brake_step: f64,
    /// Upper end of the brake grid; `None` uses the mode's limit.
    pub brake_limit: Option<f64>,
    pub t_f_step: f64,
    pub t_f_min_factor: f64,
    pub t_f_max_factor: f64,
    pub y_tolerance: f64,
    pub yaw_tolerance: f64,
    /// Stop scanning `t_f` upward once `x_c` has grown this many times in a
    /// row after the first feasible manoeuvre.
    pub patience: usize,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self {
            dt: DEFAULT_DT,
            brake_step: 0.25,
            brake_limit: None,
            t_f_step: 0.05,
            t_f_min_factor: 0.5,
            t_f_max_factor: 2.0,
            y_tolerance: 0.01,
            yaw_tolerance: 0.005,
            patience: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DynamicSwerve {
    pub control: ManoeuvreControl,
    pub trajectory: Trajectory,
    pub x_c: f64,
    pub t_c: f64,
    pub y_c: f64,
    pub max_yaw: f64,
    /// Front extent of the chassis over the yaw range actually used.
    pub d_prime: f64,
    pub evaluations: usize,
}

struct Solver<'a> {
    v0: f64,
    dt: f64,
    dp: &'a DynamicParams,
    g: &'a VehicleGeometry,
    evaluations: usize,
}

/// Finds the root of an increasing function on `[lo, hi]` by the Illinois
/// variant of false position. `f_lo < 0 < f_hi` must hold.
fn illinois(
    mut f: impl FnMut(f64) -> Option<f64>,
    mut lo: f64,
    mut f_lo: f64,
    mut hi: f64,
    mut f_hi: f64,
    tol: f64,
    max_iter: usize,
) -> Option<f64> {
    let mut side = 0i8;
    for _ in 0..max_iter {
        let x = (lo * f_hi - hi * f_lo) / (f_hi - f_lo);
        let fx = f(x)?;
        if fx.abs() <= tol {
            return Some(x);
        }
        if fx < 0.0 {
            lo = x;
            f_lo = fx;
            if side == -1 {
                f_hi /= 2.0;
            }
            side = -1;
        } else {
            hi = x;
            f_hi = fx;
            if side == 1 {
                f_lo /= 2.0;
            }
            side = 1;
        }
        if (hi - lo).abs() < 1e-12 {
            return Some(x);
        }
    }
    None
}

impl Solver<'_> {
    fn run(&mut self, w1: f64, w2: f64, brake: f64, t_f: f64) -> Option<Trajectory> {
        self.evaluations += 1;
        simulate(self.v0, &ManoeuvreControl::swerve(w1, w2, brake, t_f), self.dt, self.dp, self.g).ok()
    }

    /// Counter-steer magnitude that brings the yaw back to zero, with the
    /// resulting trajectory.
    fn close_yaw(&mut self, w1: f64, w_cap: f64, brake: f64, t_f: f64, tol: f64) -> Option<(f64, Trajectory)> {
        let yaw = |tr: &Trajectory| tr.last().psi;
        let lo_tr = self.run(w1, 0.0, brake, t_f)?;
        let f_lo = -yaw(&lo_tr);
        if f_lo.abs() <= tol {
            return Some((0.0, lo_tr));
        }
        let hi_tr = self.run(w1, w_cap, brake, t_f)?;
        let f_hi = -yaw(&hi_tr);
        if f_hi.abs() <= tol {
            return Some((w_cap, hi_tr));
        }
        if !(f_lo < 0.0 && f_hi > 0.0) {
            return None;
        }
        let mut last = None;
        let w2 = illinois(
            |w2| {
                let tr = self.run(w1, w2, brake, t_f)?;
                let f = -yaw(&tr);
                last = Some(tr);
                Some(f)
            },
            0.0,
            f_lo,
            w_cap,
            f_hi,
            tol,
            60,
        )?;
        Some((w2, last?))
    }

    /// Solves both boundary conditions for one `(brake, t_f)` pair.
    fn solve(
        &mut self,
        brake: f64,
        t_f: f64,
        p: &SafetyParams,
        o: &SearchOptions,
    ) -> Option<(f64, f64, Trajectory)> {
        let quarter = t_f / 4.0;
        let w_cap = p.delta_max / quarter;
        let mut cache = None;
        let mut residual = |w1: f64, cache: &mut Option<(f64, f64, Trajectory)>| {
            let (w2, tr) = self.close_yaw(w1, w_cap, brake, t_f, o.yaw_tolerance)?;
            let r = tr.last().y - p.alpha;
            *cache = Some((w1, w2, tr));
            Some(r)
        };
        let f_lo = -p.alpha;
        let f_hi = residual(w_cap, &mut cache)?;
        if f_hi < -o.y_tolerance {
            return None;
        }
        if f_hi.abs() <= o.y_tolerance {
            return cache;
        }
        illinois(|w1| residual(w1, &mut cache), 0.0, f_lo, w_cap, f_hi, o.y_tolerance, 60)?;
        cache
    }
}

/// Searches brake demand and manoeuvre time for the swerve with the
/// shortest longitudinal clearance distance.
///
/// `constrained` limits peak lateral acceleration to `a_lat_min` and braking
/// to `a_min_brake`; otherwise the limits are the tyre peaks.
pub fn find_swerve(
    v0: f64,
    constrained: bool,
    dp: &DynamicParams,
    g: &VehicleGeometry,
    p: &SafetyParams,
    o: &SearchOptions,
) -> Result<DynamicSwerve> {
    if !(v0 >= 5.0) || !v0.is_finite() {
        return Err(Error::InvalidParameter {
            field: "v0",
            bound: "must be at least 5 m/s for the dynamic model",
            value: v0,
        });
    }
    let tyre_limit = (dp.front.d + dp.rear.d) / dp.m;
    let brake_limit = o.brake_limit.unwrap_or(if constrained {
        p.a_min_brake
    } else {
        tyre_limit
    });
    let lat_limit = if constrained {
        p.a_lat_min * 1.01
    } else {
        f64::INFINITY
    };
    let kinematic = crate::swerve::SwerveManoeuvre::build(v0, g, p, crate::FormulaMode::Corrected)?;
    let t_lo = o.t_f_min_factor * kinematic.duration;
    let t_hi = o.t_f_max_factor * kinematic.duration;
    let d_lat = rss::d_lat_at_rest(p);

    let mut solver = Solver {
        v0,
        dt: o.dt,
        dp,
        g,
        evaluations: 0,
    };
    let mut best: Option<DynamicSwerve> = None;
    let mut tried = 0usize;
    let mut infeasible_bc = 0usize;
    let mut over_limit = 0usize;
    let brake_steps = (brake_limit / o.brake_step + 1e-9).floor() as usize;
    let t_steps = ((t_hi - t_lo) / o.t_f_step + 1e-9).floor() as usize;
    let mut evaluate = |brake: f64, t_f: f64, solver: &mut Solver| -> Result<Option<DynamicSwerve>> {
        tried += 1;
        let Some((w1, w2, tr)) = solver.solve(brake, t_f, p, o) else {
            infeasible_bc += 1;
            return Ok(None);
        };
        if tr.peak_lateral_acceleration > lat_limit {
            over_limit += 1;
            return Ok(None);
        }
        let max_yaw = tr.max_yaw().min(std::f64::consts::FRAC_PI_2);
        let ext = rotated_extents(g, max_yaw)?;
        let y_c = ext.b_prime + g.b_l + d_lat;
        Ok(tr.first_crossing(y_c).map(|(x_c, t_c)| DynamicSwerve {
            control: ManoeuvreControl::swerve(w1, w2, brake, t_f),
            trajectory: tr,
            x_c,
            t_c,
            y_c,
            max_yaw,
            d_prime: ext.d_prime,
            evaluations: 0,
        }))
    };
    for bi in 0..=brake_steps {
        let brake = bi as f64 * o.brake_step;
        let t_at = |i: usize| t_lo + i as f64 * o.t_f_step;
        // Short manoeuvres fail first (tyre saturation, comfort limit), so
        // skip the infeasible prefix of the grid by bisection before the
        // linear scan.
        let mut first = None;
        let (mut lo, mut hi) = (0usize, t_steps + 1);
        while lo < hi {
            let mid = (lo + hi) / 2;
            match evaluate(brake, t_at(mid), &mut solver)? {
                Some(c) => {
                    first = Some((mid, c));
                    hi = mid;
                }
                None => lo = mid + 1,
            }
        }
        let Some((start, candidate)) = first.filter(|(i, _)| *i == lo) else {
            continue;
        };
        let mut prev_x = candidate.x_c;
        if best.as_ref().map_or(true, |b| candidate.x_c < b.x_c) {
            best = Some(candidate);
        }
        let mut rising = 0usize;
        for ti in start + 1..=t_steps {
            let Some(c) = evaluate(brake, t_at(ti), &mut solver)? else {
                continue;
            };
            rising = if c.x_c > prev_x { rising + 1 } else { 0 };
            prev_x = c.x_c;
            if best.as_ref().map_or(true, |b| c.x_c < b.x_c) {
                best = Some(c);
            }
            if rising >= o.patience {
                break;
            }
        }
    }
    match best {
        Some(mut b) => {
            b.evaluations = solver.evaluations;
            Ok(b)
        }
        None => Err(Error::NoFeasibleManoeuvre {
            v0,
            diagnostics: format!(
                "{tried} (brake, t_f) pairs: {infeasible_bc} missed the boundary conditions, \
                 {over_limit} exceeded the lateral acceleration limit"
            ),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn table() -> (DynamicParams, VehicleGeometry) {
        (DynamicParams::default(), VehicleGeometry::default())
    }

    #[test]
    fn straight_line_without_drag() {
        let (mut dp, g) = table();
        dp.c_w = 0.0;
        let mut s = DynamicState::straight(20.0);
        for _ in 0..1000 {
            s = step(&s, Control::default(), 1e-3, &dp, &g).unwrap();
        }
        assert_eq!((s.y, s.psi, s.beta), (0.0, 0.0, 0.0));
        assert_abs_diff_eq!(s.v, 20.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.x, 20.0, epsilon = 1e-9);
    }

    #[test]
    fn drag_slows() {
        let (dp, g) = table();
        let s = DynamicState::straight(20.0);
        let d = derivatives(&s, Control::default(), &dp, &g);
        assert_abs_diff_eq!(d[2], -dp.drag(20.0) / dp.m, epsilon = 1e-15);
        assert!(d[2] < 0.0);
    }

    fn steady_yaw_rate(v: f64, delta: f64) -> f64 {
        let (mut dp, g) = table();
        dp.c_w = 0.0;
        let mut s = DynamicState {
            delta,
            ..DynamicState::straight(v)
        };
        for _ in 0..5000 {
            s = step(&s, Control::default(), 1e-3, &dp, &g).unwrap();
        }
        s.omega_z
    }

    #[test]
    fn steady_yaw_rate_matches_linear_understeer() {
        // linear single-track oracle: omega = v delta / (L + K v^2) with the
        // understeer gradient from the cornering stiffnesses B C D
        let (dp, g) = table();
        let c_f = dp.front.b * dp.front.c * dp.front.d;
        let c_r = dp.rear.b * dp.rear.c * dp.rear.d;
        let wb = g.wheelbase();
        let k = dp.m * (g.l_r / c_f - g.l_f / c_r) / wb;
        for v in [10.0, 20.0] {
            let oracle = v * 0.005 / (wb + k * v * v);
            let omega = steady_yaw_rate(v, 0.005);
            assert!((omega - oracle).abs() / oracle < 0.02, "v={v}: {omega} vs {oracle}");
        }
    }

    #[test]
    fn steady_yaw_rate_near_kinematic_at_moderate_speed() {
        let g = VehicleGeometry::default();
        let kinematic = 10.0 * 0.005f64.tan() / g.wheelbase();
        let omega = steady_yaw_rate(10.0, 0.005);
        assert!((omega - kinematic).abs() / kinematic < 0.1, "{omega}");
    }

    #[test]
    fn low_speed_is_reported() {
        let (dp, g) = table();
        let c = ManoeuvreControl::swerve(0.0, 0.0, 8.0, 2.0);
        match simulate(5.0, &c, 1e-3, &dp, &g) {
            Err(Error::LowSpeedSingularity { t, v }) => assert!(t < 1.0 && v < MIN_SPEED),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn quarters_are_equal() {
        assert_eq!(step_count(2.0, 1e-3), 2000);
        assert_eq!(step_count(1.35, 1e-3), 1352);
        assert_eq!(step_count(1e-4, 1e-3), 4);
    }

    #[test]
    fn illinois_finds_root() {
        let r = illinois(|x| Some(x * x * x - 2.0), 0.0, -2.0, 2.0, 6.0, 1e-12, 100).unwrap();
        assert_abs_diff_eq!(r, 2f64.powf(1.0 / 3.0), epsilon = 1e-9);
    }
}
