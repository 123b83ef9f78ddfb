use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("config line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("{field} {bound} (got {value})")]
    InvalidParameter {
        field: &'static str,
        bound: &'static str,
        value: f64,
    },

    #[error("rotation angle {0} rad outside [0, pi/2]")]
    AngleDomain(f64),

    #[error("degenerate manoeuvre speed {0} m/s; a swerve needs a positive speed")]
    DegenerateSpeed(f64),

    #[error("lane change infeasible: alpha / (2 R_r) = {ratio} leaves the arccos domain")]
    InfeasibleLaneChange { ratio: f64 },

    #[error("velocity heading {psi} rad exceeds pi/2; the vehicle would stop moving forward")]
    HeadingLimit { psi: f64 },

    #[error("clearance {y_c} m unreachable; the swerve only travels {travel} m laterally")]
    ClearanceUnreachable { y_c: f64, travel: f64 },

    #[error("speed fell to {v} m/s at t = {t} s; slip angles are undefined at low speed")]
    LowSpeedSingularity { t: f64, v: f64 },

    #[error("no feasible swerve found at v0 = {v0} m/s: {diagnostics}")]
    NoFeasibleManoeuvre { v0: f64, diagnostics: String },

    #[error("spacing search failed: {0}")]
    BracketFailure(String),

    #[error("unknown {kind} '{name}'; expected one of: {known}")]
    UnknownName {
        kind: &'static str,
        name: String,
        known: String,
    },

    #[error("{0}")]
    Io(String),
}
