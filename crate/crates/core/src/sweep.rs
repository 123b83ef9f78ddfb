//! Grid sweeps that tabulate distances over speed, written as CSV.
//!
//! Each cell is computed on its own; a failing cell is left empty and the
//! reason goes to the table's warnings, so one infeasible swerve does not
//! sink the whole sweep.

use std::io::Write;

use serde::Serialize;

use crate::config::Config;
use crate::dynamics::{find_swerve, SearchOptions, Trajectory};
use crate::error::{Error, Result};
use crate::lower_bound::lower_bound;
use crate::scenario::{d_swerve_for_brake, ScenarioContext, ScenarioRegistry};
use crate::swerve::SwerveManoeuvre;
use crate::universal::{FollowingRule, TripleState, Uniform, Universal};
use crate::{par_map, universal};

/// Which speed the grid runs over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SweepVariable {
    /// Rear speed, front fixed.
    Rear,
    /// Front speed, rear fixed.
    Front,
    /// Every vehicle at the grid speed.
    All,
}

impl SweepVariable {
    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "v_r" => Ok(Self::Rear),
            "v_f" => Ok(Self::Front),
            "v_all" => Ok(Self::All),
            _ => Err(Error::UnknownName {
                kind: "sweep variable",
                name: name.into(),
                known: "v_r, v_f, v_all".into(),
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSpec {
    pub variable: SweepVariable,
    pub start: f64,
    pub stop: f64,
    pub step: f64,
    /// Speed of the vehicle that is not swept.
    pub other: f64,
    /// Columns to keep besides `v`; empty keeps them all.
    pub outputs: Vec<String>,
}

impl SweepSpec {
    pub fn uniform(start: f64, stop: f64, step: f64) -> Self {
        Self {
            variable: SweepVariable::All,
            start,
            stop,
            step,
            other: 0.0,
            outputs: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step > 0.0) || !self.step.is_finite() {
            return Err(Error::InvalidParameter {
                field: "step",
                bound: "must be positive",
                value: self.step,
            });
        }
        if !(self.start >= 0.0) || !self.start.is_finite() {
            return Err(Error::InvalidParameter {
                field: "start",
                bound: "must be a finite non-negative speed",
                value: self.start,
            });
        }
        if !(self.stop >= self.start) || !self.stop.is_finite() {
            return Err(Error::InvalidParameter {
                field: "stop",
                bound: "must not be below start",
                value: self.stop,
            });
        }
        if !(self.other >= 0.0) || !self.other.is_finite() {
            return Err(Error::InvalidParameter {
                field: "other",
                bound: "must be a finite non-negative speed",
                value: self.other,
            });
        }
        Ok(())
    }

    /// Grid points `start + i step` up to `stop` inclusive.
    pub fn grid(&self) -> Result<Vec<f64>> {
        self.validate()?;
        Ok(grid(self.start, self.stop, self.step))
    }

    fn speeds(&self, v: f64) -> (f64, f64) {
        match self.variable {
            SweepVariable::Rear => (v, self.other),
            SweepVariable::Front => (self.other, v),
            SweepVariable::All => (v, v),
        }
    }
}

pub fn grid(start: f64, stop: f64, step: f64) -> Vec<f64> {
    let n = ((stop - start) / step + 1e-9).floor() as usize;
    (0..=n).map(|i| start + i as f64 * step).collect()
}

/// Rows of optional values under named columns.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Option<f64>>>,
    pub warnings: Vec<String>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
            warnings: Vec::new(),
        }
    }

    pub fn column(&self, name: &str) -> Option<Vec<Option<f64>>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }

    /// Every row has all cells past the first empty.
    pub fn all_rows_failed(&self) -> bool {
        !self.rows.is_empty() && self.rows.iter().all(|r| r[1..].iter().all(Option::is_none))
    }

    /// Keeps the first column plus `keep` (in table order).
    fn select(mut self, keep: &[String]) -> Result<Self> {
        if keep.is_empty() {
            return Ok(self);
        }
        for k in keep {
            if !self.columns[1..].contains(k) {
                return Err(Error::UnknownName {
                    kind: "output column",
                    name: k.clone(),
                    known: self.columns[1..].join(", "),
                });
            }
        }
        let idx: Vec<usize> = (0..self.columns.len())
            .filter(|&i| i == 0 || keep.contains(&self.columns[i]))
            .collect();
        self.columns = idx.iter().map(|&i| self.columns[i].clone()).collect();
        for row in &mut self.rows {
            *row = idx.iter().map(|&i| row[i]).collect();
        }
        Ok(self)
    }

    /// CSV with a `# config <fingerprint>` first line, numbers to nine
    /// significant digits and empty cells for failures.
    pub fn write_csv<W: Write>(&self, out: W, fingerprint: &str) -> Result<()> {
        let mut out = out;
        writeln!(out, "# config {fingerprint}").map_err(io)?;
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.columns).map_err(io)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|c| c.map(sig9).unwrap_or_default()))
                .map_err(io)?;
        }
        w.flush().map_err(io)
    }

    pub fn to_csv(&self, fingerprint: &str) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf, fingerprint)?;
        String::from_utf8(buf).map_err(io)
    }
}

/// Kinematic swerve sampled every `dt`: `t,x,y,theta,psi`.
pub fn kinematic_trajectory(m: &SwerveManoeuvre, dt: f64) -> Table {
    let mut t = Table::new(&["t", "x", "y", "theta", "psi"]);
    t.rows = m
        .sample_trajectory(dt)
        .into_iter()
        .map(|p| vec![Some(p.t), Some(p.x), Some(p.y), Some(p.theta), Some(p.psi)])
        .collect();
    t
}

/// Dynamic-model trajectory, every `stride`-th sample plus the last:
/// `t,x,y,v,beta,psi,omega_z,delta`.
pub fn dynamic_trajectory(tr: &Trajectory, stride: usize) -> Table {
    let mut t = Table::new(&["t", "x", "y", "v", "beta", "psi", "omega_z", "delta"]);
    let stride = stride.max(1);
    let last = tr.states.len().saturating_sub(1);
    t.rows = tr
        .states
        .iter()
        .zip(&tr.t)
        .enumerate()
        .filter(|(i, _)| i % stride == 0 || *i == last)
        .map(|(_, (s, &time))| {
            [time, s.x, s.y, s.v, s.beta, s.psi, s.omega_z, s.delta]
                .map(Some)
                .to_vec()
        })
        .collect();
    t
}

fn io(e: impl std::fmt::Display) -> Error {
    Error::Io(e.to_string())
}

/// `x` rounded to nine significant digits, in its shortest form.
pub fn sig9(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    let rounded: f64 = format!("{x:.8e}").parse().unwrap_or(x);
    format!("{rounded}")
}

fn cell(r: Result<f64>, column: &str, v: f64, warnings: &mut Vec<String>) -> Option<f64> {
    match r {
        Ok(x) => Some(x),
        Err(e) => {
            warnings.push(format!("v = {}: {column}: {e}", sig9(v)));
            None
        }
    }
}

pub const DISTANCE_COLUMNS: [&str; 9] = [
    "v",
    "d_bb",
    "d_sb",
    "d_bs",
    "d_ss",
    "d_hat",
    "d_universal",
    "d_brake_only",
    "reduction",
];

/// Scenario distances, the swerve-aware following distance and the braking
/// baseline along the grid.
///
/// `d_hat` is the uniform-platoon distance when every vehicle is at the grid
/// speed and the pairwise universal distance otherwise; `d_universal` also
/// accounts for a third vehicle at the grid speed in the uniform case.
/// `reduction` is `1 - d_hat / d_brake_only`.
pub fn distance_sweep(ctx: &ScenarioContext, spec: &SweepSpec, jobs: usize) -> Result<Table> {
    let speeds = spec.grid()?;
    let reg = ScenarioRegistry::standard();
    let rows = par_map(&speeds, jobs, |&v| {
        let (v_r, v_f) = spec.speeds(v);
        let rho = ctx.safety.rho;
        let mut warnings = Vec::new();
        let mut row = vec![Some(v)];
        for name in ["bb", "sb", "bs", "ss"] {
            let r = reg
                .get(name)
                .and_then(|s| s.evaluate(ctx, v_r, v_f, rho))
                .map(|r| r.distance);
            row.push(cell(r, &format!("d_{name}"), v, &mut warnings));
        }
        let (hat, full) = match spec.variable {
            SweepVariable::All => (
                Uniform.distance(ctx, &TripleState::uniform(v)).map(|r| r.distance),
                universal::universal(ctx, &TripleState::uniform(v)),
            ),
            _ => {
                let r = Universal.distance(ctx, &TripleState::pair(v_r, v_f)).map(|r| r.distance);
                (r.clone(), r)
            }
        };
        let hat = cell(hat, "d_hat", v, &mut warnings);
        row.push(hat);
        row.push(cell(full, "d_universal", v, &mut warnings));
        let brake = cell(universal::braking_only(ctx, v_r, v_f), "d_brake_only", v, &mut warnings);
        row.push(brake);
        row.push(match (hat, brake) {
            (Some(h), Some(b)) if b > 0.0 => Some(1.0 - h / b),
            _ => None,
        });
        (row, warnings)
    });
    let mut table = Table::new(&DISTANCE_COLUMNS);
    for (row, w) in rows {
        table.rows.push(row);
        table.warnings.extend(w);
    }
    table.select(&spec.outputs)
}

pub const CLEARANCE_COLUMNS: [&str; 9] = [
    "v0",
    "x_c_kinematic",
    "x_c_lower",
    "x_c_dyn_constrained",
    "x_c_dyn_unconstrained",
    "y_c",
    "x_c_kinematic_com",
    "x_c_dyn_constrained_com",
    "x_c_dyn_unconstrained_com",
];

/// Longitudinal clearance distances of the different swerve models for a
/// vehicle starting at `v0` behind a stationary obstacle, without reaction
/// time.
///
/// The leading columns include the chassis front extent (rotated front
/// extent for the kinematic and dynamic swerves, the inscribed-square half
/// side for the particle bound); the `_com` columns are centre-of-mass
/// travel only. The dynamic columns are present only when `dynamic` is set.
pub fn clearance_sweep(
    config: &Config,
    speeds: &[f64],
    dynamic: bool,
    search: &SearchOptions,
    jobs: usize,
) -> Table {
    let mut ctx = ScenarioContext::from_config(config, Default::default());
    ctx.safety.rho = 0.0;
    let rows = par_map(speeds, jobs, |&v0| {
        let mut warnings = Vec::new();
        let kin = d_swerve_for_brake(&ctx, v0, 0.0, 0.0);
        let (kin_ext, y_c, kin_com) = match &kin {
            Ok(r) => {
                let x_c = r.components.get("x_c").copied();
                let d = r.components.get("d_prime").copied();
                (x_c.zip(d).map(|(x, d)| x + d), r.components.get("y_c").copied(), x_c)
            }
            Err(e) => {
                warnings.push(format!("v0 = {}: x_c_kinematic: {e}", sig9(v0)));
                (None, None, None)
            }
        };
        let lower = y_c.and_then(|y| {
            cell(
                lower_bound(v0, 0.0, y, &config.geometry, &ctx.safety).map(|r| r.x_bar_c),
                "x_c_lower",
                v0,
                &mut warnings,
            )
        });
        let mut row = vec![Some(v0), kin_ext, lower];
        let mut com = Vec::new();
        if dynamic {
            for (constrained, column) in [(true, "x_c_dyn_constrained"), (false, "x_c_dyn_unconstrained")] {
                let r = find_swerve(v0, constrained, &config.dynamic, &config.geometry, &ctx.safety, search);
                match r {
                    Ok(s) => {
                        row.push(Some(s.x_c + s.d_prime));
                        com.push(Some(s.x_c));
                    }
                    Err(e) => {
                        warnings.push(format!("v0 = {}: {column}: {e}", sig9(v0)));
                        row.push(None);
                        com.push(None);
                    }
                }
            }
        }
        row.push(y_c);
        row.push(kin_com);
        row.extend(com);
        (row, warnings)
    });
    let columns: Vec<&str> = CLEARANCE_COLUMNS
        .iter()
        .copied()
        .filter(|c| dynamic || !c.contains("dyn"))
        .collect();
    let mut table = Table::new(&columns);
    for (row, w) in rows {
        table.rows.push(row);
        table.warnings.extend(w);
    }
    table
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::FormulaOptions;

    fn ctx() -> ScenarioContext {
        ScenarioContext::from_config(&Config::default(), FormulaOptions::default())
    }

    #[test]
    fn single_point_grid() {
        let s = SweepSpec::uniform(5.0, 5.0, 1.0);
        assert_eq!(s.grid().unwrap(), vec![5.0]);
        let t = distance_sweep(&ctx(), &s, 1).unwrap();
        assert_eq!(t.rows.len(), 1);
    }

    #[test]
    fn grid_includes_stop() {
        assert_eq!(grid(0.0, 30.0, 0.1).len(), 301);
        assert_eq!(*grid(0.0, 1.0, 0.25).last().unwrap(), 1.0);
    }

    #[test]
    fn bad_specs() {
        assert!(SweepSpec::uniform(0.0, 1.0, 0.0).validate().is_err());
        assert!(SweepSpec::uniform(2.0, 1.0, 0.5).validate().is_err());
    }

    #[test]
    fn nine_significant_digits() {
        assert_eq!(sig9(83.72), "83.72");
        assert_eq!(sig9(1.0 / 3.0), "0.333333333");
        assert_eq!(sig9(123456.789012), "123456.789");
        assert_eq!(sig9(0.0), "0");
    }

    #[test]
    fn csv_layout() {
        let mut s = SweepSpec::uniform(0.0, 1.0, 1.0);
        s.outputs = vec!["d_bb".into(), "reduction".into()];
        let t = distance_sweep(&ctx(), &s, 2).unwrap();
        let csv = t.to_csv("abc").unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "# config abc");
        assert_eq!(lines[1], "v,d_bb,reduction");
        assert_eq!(lines.len(), 4);
    }

    #[test]
    fn unknown_output_is_rejected() {
        let mut s = SweepSpec::uniform(0.0, 1.0, 1.0);
        s.outputs = vec!["d_xx".into()];
        assert!(distance_sweep(&ctx(), &s, 1).is_err());
    }

    #[test]
    fn failures_leave_empty_cells() {
        let t = Table {
            columns: vec!["v".into(), "a".into()],
            rows: vec![vec![Some(1.0), None]],
            warnings: vec!["v = 1: a: boom".into()],
        };
        assert!(t.all_rows_failed());
        assert!(t.to_csv("x").unwrap().ends_with("1,\n"));
    }

    #[test]
    fn trajectory_tables() {
        let g = crate::VehicleGeometry::default();
        let p = crate::SafetyParams::default();
        let m = SwerveManoeuvre::build(20.0, &g, &p, crate::FormulaMode::Corrected).unwrap();
        let t = kinematic_trajectory(&m, 0.01);
        assert_eq!(t.columns, ["t", "x", "y", "theta", "psi"]);
        assert!(t.rows.len() > 100);
    }

    #[test]
    fn kinematic_clearance_rows() {
        let t = clearance_sweep(&Config::default(), &[10.0, 20.0], false, &SearchOptions::default(), 1);
        assert_eq!(t.columns.len(), 5);
        for row in &t.rows {
            assert!(row[2].unwrap() <= row[1].unwrap());
        }
    }
}
