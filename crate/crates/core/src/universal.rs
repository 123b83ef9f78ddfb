//! Following distances for a vehicle that looks at the two vehicles ahead.
//!
//! Vehicle 1 follows vehicle 2, which follows vehicle 3. Keeping the
//! universal distance lets vehicle 1 respond to either a braking or a
//! swerving predecessor, and to whatever vehicle 3 forces vehicle 2 to do.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::rss::{self, LongitudinalScenario};
use crate::scenario::{
    d_brake_for_brake, d_brake_for_swerve, d_swerve_for_brake, d_swerve_for_swerve, ScenarioContext,
};
use crate::FormulaMode;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TripleState {
    pub v1: f64,
    pub v2: f64,
    /// Absent when vehicle 2 leads its block.
    pub v3: Option<f64>,
    /// Current gap between vehicles 2 and 3, centre to centre.
    pub d_23: Option<f64>,
}

impl TripleState {
    pub fn uniform(v: f64) -> Self {
        Self {
            v1: v,
            v2: v,
            v3: Some(v),
            d_23: None,
        }
    }

    pub fn pair(v1: f64, v2: f64) -> Self {
        Self {
            v1,
            v2,
            v3: None,
            d_23: None,
        }
    }

    fn validate(&self) -> Result<()> {
        let fields = [
            ("v1", Some(self.v1)),
            ("v2", Some(self.v2)),
            ("v3", self.v3),
            ("d_23", self.d_23),
        ];
        for (field, value) in fields {
            if let Some(x) = value {
                if !(x >= 0.0) || !x.is_finite() {
                    return Err(Error::InvalidParameter {
                        field,
                        bound: "must be finite and non-negative",
                        value: x,
                    });
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RuleResult {
    pub rule: &'static str,
    pub distance: f64,
    /// Candidate terms of the max, in order.
    pub terms: Vec<(&'static str, f64)>,
    pub binding: &'static str,
}

impl RuleResult {
    fn max_of(rule: &'static str, terms: Vec<(&'static str, f64)>) -> Self {
        let (binding, distance) = terms
            .iter()
            .copied()
            .fold(("", f64::NEG_INFINITY), |acc, t| if t.1 > acc.1 { t } else { acc });
        Self {
            rule,
            distance,
            terms,
            binding,
        }
    }
}

/// A rule that turns the state of the vehicles ahead into a following
/// distance.
pub trait FollowingRule: Send + Sync {
    fn name(&self) -> &'static str;
    fn description(&self) -> &'static str;
    fn distance(&self, ctx: &ScenarioContext, state: &TripleState) -> Result<RuleResult>;
}

/// Braking-only baseline: the bumper-to-bumper brake/brake distance.
pub struct BrakingOnly;

/// Worst case over the pairwise responses and vehicle 3's influence.
pub struct Universal;

/// [`Universal`] using the measured gap to vehicle 3.
pub struct WithPositions;

/// Same distance kept by every vehicle of a uniform-speed platoon.
pub struct Uniform;

impl FollowingRule for BrakingOnly {
    fn name(&self) -> &'static str {
        "rss-braking"
    }
    fn description(&self) -> &'static str {
        "bumper-to-bumper distance to brake for a braking lead"
    }
    fn distance(&self, ctx: &ScenarioContext, s: &TripleState) -> Result<RuleResult> {
        s.validate()?;
        let d = rss::d_long_brake_brake(
            LongitudinalScenario { v_r: s.v1, v_f: s.v2 },
            ctx.safety.rho,
            &ctx.safety,
            ctx.options.mode,
        );
        Ok(RuleResult::max_of(self.name(), vec![("d_long", d)]))
    }
}

fn pairwise_terms(ctx: &ScenarioContext, s: &TripleState) -> Result<Vec<(&'static str, f64)>> {
    let rho = ctx.safety.rho;
    let bs = d_brake_for_swerve(ctx, s.v1, s.v2, rho)?.distance;
    let first = match ctx.options.mode {
        FormulaMode::Corrected => ("sb_12", d_swerve_for_brake(ctx, s.v1, s.v2, rho)?.distance),
        FormulaMode::Literal => ("bs_12", bs),
    };
    Ok(vec![first, ("bs_12", bs)])
}

/// Far-vehicle terms with `offset` standing in for the 2-3 gap.
fn far_terms(ctx: &ScenarioContext, v1: f64, v3: f64, offset: f64) -> Result<Vec<(&'static str, f64)>> {
    let rho2 = 2.0 * ctx.safety.rho;
    let floor = ctx.contact_distance();
    let ss = d_swerve_for_swerve(ctx, v1, v3, rho2)?.distance - offset;
    let bb = d_brake_for_brake(ctx, v1, v3, rho2)?.distance - offset;
    Ok(vec![("ss_13", ss.max(floor)), ("bb_13", bb.max(floor))])
}

impl FollowingRule for Universal {
    fn name(&self) -> &'static str {
        "universal"
    }
    fn description(&self) -> &'static str {
        "swerve-aware distance assuming vehicle 2 keeps the same rule"
    }
    fn distance(&self, ctx: &ScenarioContext, s: &TripleState) -> Result<RuleResult> {
        s.validate()?;
        let mut terms = pairwise_terms(ctx, s)?;
        if let Some(v3) = s.v3 {
            let d_23 = d_swerve_for_brake(ctx, s.v2, v3, ctx.safety.rho)?.distance;
            terms.extend(far_terms(ctx, s.v1, v3, d_23)?);
        }
        Ok(RuleResult::max_of(self.name(), terms))
    }
}

impl FollowingRule for WithPositions {
    fn name(&self) -> &'static str {
        "positions"
    }
    fn description(&self) -> &'static str {
        "swerve-aware distance using the measured gap between vehicles 2 and 3"
    }
    fn distance(&self, ctx: &ScenarioContext, s: &TripleState) -> Result<RuleResult> {
        s.validate()?;
        let mut terms = pairwise_terms(ctx, s)?;
        if let Some(v3) = s.v3 {
            let d_23 = s.d_23.ok_or(Error::InvalidParameter {
                field: "d_23",
                bound: "is required when v3 is given",
                value: f64::NAN,
            })?;
            terms.extend(far_terms(ctx, s.v1, v3, d_23)?);
        }
        Ok(RuleResult::max_of(self.name(), terms))
    }
}

impl FollowingRule for Uniform {
    fn name(&self) -> &'static str {
        "uniform"
    }
    fn description(&self) -> &'static str {
        "distance shared by a platoon at one speed (uses v1 only)"
    }
    fn distance(&self, ctx: &ScenarioContext, s: &TripleState) -> Result<RuleResult> {
        s.validate()?;
        let v = s.v1;
        let rho = ctx.safety.rho;
        let sb = d_swerve_for_brake(ctx, v, v, rho)?.distance;
        let bs = d_brake_for_swerve(ctx, v, v, rho)?.distance;
        let ss = d_swerve_for_swerve(ctx, v, v, 2.0 * rho)?.distance / 2.0;
        let bb = d_brake_for_brake(ctx, v, v, 2.0 * rho)?.distance / 2.0;
        Ok(RuleResult::max_of(
            self.name(),
            vec![("sb", sb), ("bs", bs), ("ss_half", ss), ("bb_half", bb)],
        ))
    }
}

pub struct RuleRegistry {
    rules: Vec<Box<dyn FollowingRule>>,
}

impl RuleRegistry {
    pub fn standard() -> Self {
        Self {
            rules: vec![
                Box::new(BrakingOnly),
                Box::new(Universal),
                Box::new(WithPositions),
                Box::new(Uniform),
            ],
        }
    }

    pub fn register(&mut self, rule: Box<dyn FollowingRule>) {
        self.rules.retain(|r| r.name() != rule.name());
        self.rules.push(rule);
    }

    pub fn get(&self, name: &str) -> Result<&dyn FollowingRule> {
        self.rules
            .iter()
            .find(|r| r.name() == name)
            .map(|r| r.as_ref())
            .ok_or_else(|| Error::UnknownName {
                kind: "following rule",
                name: name.to_string(),
                known: self.names().join(", "),
            })
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.rules.iter().map(|r| r.name()).collect()
    }
}

impl Default for RuleRegistry {
    fn default() -> Self {
        Self::standard()
    }
}

pub fn universal(ctx: &ScenarioContext, s: &TripleState) -> Result<f64> {
    Ok(Universal.distance(ctx, s)?.distance)
}

pub fn universal_with_positions(ctx: &ScenarioContext, s: &TripleState) -> Result<f64> {
    Ok(WithPositions.distance(ctx, s)?.distance)
}

pub fn uniform_illustration(ctx: &ScenarioContext, v: f64) -> Result<f64> {
    Ok(Uniform.distance(ctx, &TripleState::pair(v, v))?.distance)
}

pub fn braking_only(ctx: &ScenarioContext, v_rear: f64, v_front: f64) -> Result<f64> {
    Ok(BrakingOnly.distance(ctx, &TripleState::pair(v_rear, v_front))?.distance)
}
