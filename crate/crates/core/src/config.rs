//! Framework parameters and the flat `key = value` configuration format.
//!
//! Every key matches a field name below. Omitted keys keep their default,
//! and the defaults are the reference parameter table (a mid-size car with
//! comfort limits of 2 m/s² and a 0.1 s reaction time).
//!
//! ```text
//! # comfort braking
//! a_min_brake = 3.0
//! rho = 0.1
//! ```
//!
//! Accelerations are stored as positive magnitudes; signs are applied where
//! they are used.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_6};
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Chassis extents and axle offsets, all measured from the centre of mass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleGeometry {
    /// To the chassis front.
    pub d_f: f64,
    /// To the chassis rear.
    pub d_r: f64,
    /// To the left side.
    pub b_l: f64,
    /// To the right side.
    pub b_r: f64,
    /// To the front axle.
    pub l_f: f64,
    /// To the rear axle.
    pub l_r: f64,
}

impl VehicleGeometry {
    pub fn wheelbase(&self) -> f64 {
        self.l_f + self.l_r
    }

    pub fn validate(&self) -> Result<()> {
        positive("d_f", self.d_f)?;
        positive("d_r", self.d_r)?;
        positive("b_l", self.b_l)?;
        positive("b_r", self.b_r)?;
        positive("l_f", self.l_f)?;
        positive("l_r", self.l_r)?;
        if self.l_f > self.d_f {
            return Err(Error::InvalidParameter {
                field: "l_f",
                bound: "must not exceed d_f",
                value: self.l_f,
            });
        }
        if self.l_r > self.d_r {
            return Err(Error::InvalidParameter {
                field: "l_r",
                bound: "must not exceed d_r",
                value: self.l_r,
            });
        }
        Ok(())
    }
}

impl Default for VehicleGeometry {
    fn default() -> Self {
        Self {
            d_f: 2.4,
            d_r: 2.3,
            b_l: 0.9,
            b_r: 0.9,
            l_f: 1.19,
            l_r: 1.37,
        }
    }
}

/// Reaction time, buffers, lane width and the acceleration magnitudes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SafetyParams {
    /// Reaction delay in seconds.
    pub rho: f64,
    /// Lateral buffer in metres.
    pub mu: f64,
    /// Lane width in metres.
    pub alpha: f64,
    pub a_max_accel: f64,
    /// Comfortable braking used as the mitigating response.
    pub a_min_brake: f64,
    /// Hard braking assumed for a lead vehicle.
    pub a_max_brake: f64,
    pub a_lat_max: f64,
    /// Comfortable lateral acceleration; also bounds swerve curvature.
    pub a_lat_min: f64,
    /// Steering limit in radians.
    pub delta_max: f64,
}

impl SafetyParams {
    pub fn validate(&self) -> Result<()> {
        magnitude("a_max_accel", self.a_max_accel)?;
        magnitude("a_min_brake", self.a_min_brake)?;
        magnitude("a_max_brake", self.a_max_brake)?;
        magnitude("a_lat_max", self.a_lat_max)?;
        magnitude("a_lat_min", self.a_lat_min)?;
        if self.a_min_brake > self.a_max_brake {
            return Err(Error::InvalidParameter {
                field: "a_min_brake",
                bound: "must not exceed a_max_brake",
                value: self.a_min_brake,
            });
        }
        if self.a_lat_min > self.a_lat_max {
            return Err(Error::InvalidParameter {
                field: "a_lat_min",
                bound: "must not exceed a_lat_max",
                value: self.a_lat_min,
            });
        }
        if !(self.delta_max > 0.0 && self.delta_max < FRAC_PI_2) {
            return Err(Error::InvalidParameter {
                field: "delta_max",
                bound: "must lie in (0, pi/2)",
                value: self.delta_max,
            });
        }
        non_negative("rho", self.rho)?;
        non_negative("mu", self.mu)?;
        positive("alpha", self.alpha)?;
        Ok(())
    }

    /// Rear speed after accelerating at `a_max_accel` for `rho` seconds.
    pub fn speed_after_reaction(&self, v: f64, rho: f64) -> f64 {
        v + self.a_max_accel * rho
    }
}

impl Default for SafetyParams {
    fn default() -> Self {
        Self {
            rho: 0.1,
            mu: 0.1,
            alpha: 3.7,
            a_max_accel: 2.0,
            a_min_brake: 2.0,
            a_max_brake: 8.0,
            a_lat_max: 4.0,
            a_lat_min: 2.0,
            delta_max: FRAC_PI_6,
        }
    }
}

/// Magic-formula coefficients for one axle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pacejka {
    pub b: f64,
    pub c: f64,
    /// Peak lateral force in newtons.
    pub d: f64,
    pub e: f64,
}

impl Pacejka {
    /// Lateral force for a slip angle in radians.
    pub fn lateral_force(&self, slip: f64) -> f64 {
        let bs = self.b * slip;
        self.d * (self.c * (bs - self.e * (bs - bs.atan())).atan()).sin()
    }
}

/// Single-track model parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DynamicParams {
    /// Mass in kg.
    pub m: f64,
    /// Yaw inertia in kg m².
    pub i_zz: f64,
    /// Longitudinal offset of the drag mount point.
    pub e_sp: f64,
    /// Wheel radius. Only the torque-level drive interface uses it.
    pub r_wheel: f64,
    pub c_w: f64,
    pub rho_drag: f64,
    /// Frontal area in m².
    pub area: f64,
    pub front: Pacejka,
    pub rear: Pacejka,
}

impl DynamicParams {
    pub fn validate(&self) -> Result<()> {
        positive("m", self.m)?;
        positive("I_zz", self.i_zz)?;
        positive("D_f", self.front.d)?;
        positive("D_r", self.rear.d)?;
        non_negative("R_wheel", self.r_wheel)?;
        non_negative("c_w", self.c_w)?;
        non_negative("rho_drag", self.rho_drag)?;
        non_negative("A", self.area)?;
        Ok(())
    }

    /// Aerodynamic drag force at speed `v`.
    pub fn drag(&self, v: f64) -> f64 {
        0.5 * self.c_w * self.rho_drag * self.area * v * v
    }
}

impl Default for DynamicParams {
    fn default() -> Self {
        Self {
            m: 1239.0,
            i_zz: 1752.0,
            e_sp: 0.5,
            r_wheel: 0.302,
            c_w: 0.3,
            rho_drag: 1.25,
            area: 1.438,
            front: Pacejka {
                b: 10.96,
                c: 1.3,
                d: 4560.4,
                e: -0.5,
            },
            rear: Pacejka {
                b: 12.67,
                c: 1.3,
                d: 3947.81,
                e: -0.5,
            },
        }
    }
}

/// The complete, validated parameter set.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Config {
    pub geometry: VehicleGeometry,
    pub safety: SafetyParams,
    pub dynamic: DynamicParams,
}

macro_rules! config_keys {
    ($($key:literal => $($path:ident).+),* $(,)?) => {
        /// Every accepted key, in serialization order.
        pub const KEYS: &[&str] = &[$($key),*];

        fn slot<'a>(cfg: &'a mut Config, key: &str) -> Option<&'a mut f64> {
            match key {
                $($key => Some(&mut cfg.$($path).+),)*
                _ => None,
            }
        }

        fn values(cfg: &Config) -> Vec<(&'static str, f64)> {
            vec![$(($key, cfg.$($path).+)),*]
        }
    };
}

config_keys! {
    "d_f" => geometry.d_f,
    "d_r" => geometry.d_r,
    "b_l" => geometry.b_l,
    "b_r" => geometry.b_r,
    "l_f" => geometry.l_f,
    "l_r" => geometry.l_r,
    "rho" => safety.rho,
    "mu" => safety.mu,
    "alpha" => safety.alpha,
    "a_max_accel" => safety.a_max_accel,
    "a_min_brake" => safety.a_min_brake,
    "a_max_brake" => safety.a_max_brake,
    "a_lat_max" => safety.a_lat_max,
    "a_lat_min" => safety.a_lat_min,
    "delta_max" => safety.delta_max,
    "m" => dynamic.m,
    "I_zz" => dynamic.i_zz,
    "e_SP" => dynamic.e_sp,
    "R_wheel" => dynamic.r_wheel,
    "c_w" => dynamic.c_w,
    "rho_drag" => dynamic.rho_drag,
    "A" => dynamic.area,
    "B_f" => dynamic.front.b,
    "C_f" => dynamic.front.c,
    "D_f" => dynamic.front.d,
    "E_f" => dynamic.front.e,
    "B_r" => dynamic.rear.b,
    "C_r" => dynamic.rear.c,
    "D_r" => dynamic.rear.d,
    "E_r" => dynamic.rear.e,
}

impl Config {
    /// Parses a `key = value` document; omitted keys keep their defaults.
    pub fn parse(source: &str) -> Result<Self> {
        let mut cfg = Config::default();
        let mut seen = Vec::new();
        for (idx, raw) in source.lines().enumerate() {
            let line = idx + 1;
            let text = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            }
            .trim();
            if text.is_empty() {
                continue;
            }
            let (key, value) = text.split_once('=').ok_or_else(|| Error::Parse {
                line,
                message: format!("expected `key = value`, found `{text}`"),
            })?;
            let key = key.trim();
            let value = value.trim();
            if seen.contains(&key) {
                return Err(Error::Parse {
                    line,
                    message: format!("duplicate key `{key}`"),
                });
            }
            let target = slot(&mut cfg, key).ok_or_else(|| Error::Parse {
                line,
                message: format!("unknown key `{key}`"),
            })?;
            *target = value.parse::<f64>().map_err(|_| Error::Parse {
                line,
                message: format!("value `{value}` for `{key}` is not a number"),
            })?;
            if !target.is_finite() {
                return Err(Error::Parse {
                    line,
                    message: format!("value for `{key}` must be finite"),
                });
            }
            seen.push(key);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Overrides one key and revalidates.
    pub fn set(&mut self, key: &str, value: f64) -> Result<()> {
        let target = slot(self, key).ok_or_else(|| Error::UnknownName {
            kind: "config key",
            name: key.to_string(),
            known: KEYS.join(", "),
        })?;
        *target = value;
        self.validate()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.geometry.validate()?;
        self.safety.validate()?;
        self.dynamic.validate()
    }

    /// Writes every key. Values use the shortest representation that parses
    /// back to the same bits.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (key, value) in values(self) {
            let _ = writeln!(out, "{key} = {value:?}");
        }
        out
    }

    /// Leading 16 hex digits of the SHA-256 of the serialized form; stamped
    /// into CSV headers.
    pub fn fingerprint(&self) -> String {
        let digest = Sha256::digest(self.to_text().as_bytes());
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}

fn positive(field: &'static str, value: f64) -> Result<()> {
    if value > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            field,
            bound: "must be positive",
            value,
        })
    }
}

fn magnitude(field: &'static str, value: f64) -> Result<()> {
    if value > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            field,
            bound: "must be a positive magnitude",
            value,
        })
    }
}

fn non_negative(field: &'static str, value: f64) -> Result<()> {
    if value >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            field,
            bound: "must be non-negative",
            value,
        })
    }
}
