use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

/// Island Model parameters. `Default` is the baseline configuration.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields, default))]
pub struct ModelParams {
    /// Number of agents (N).
    pub n_agents: u32,
    /// Number of steps in a run (T).
    pub horizon: u32,
    /// Probability that a lattice cell holds an island (pi).
    pub island_density: f64,
    /// Exponent linking miner count to island output (alpha).
    pub returns_to_scale: f64,
    /// Per-step probability that a miner leaves to explore (epsilon).
    pub exploration_prob: f64,
    /// Poisson rate of technological breakthroughs (lambda).
    pub breakthrough_rate: f64,
    /// Weight of the discoverer's past skills in a new island (phi).
    pub skill_weight: f64,
    /// Exponential decay of signals per unit Manhattan distance (rho).
    pub signal_decay: f64,
    /// Scheduled parameter changes.
    pub interventions: Vec<Intervention>,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            n_agents: 20,
            horizon: 201,
            island_density: 0.1,
            returns_to_scale: 1.5,
            exploration_prob: 0.1,
            breakthrough_rate: 1.0,
            skill_weight: 0.5,
            signal_decay: 0.1,
            interventions: Vec::new(),
        }
    }
}

/// Replace `param` by `value` from the start of step `step` onwards.
///
/// Step `k` is the step that produces GDP(k); `k = 0` takes effect from the
/// very first step.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct Intervention {
    pub step: u32,
    pub param: ParamName,
    pub value: f64,
}

/// Real-valued model parameters that can be swept or changed mid-run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum ParamName {
    IslandDensity,
    ReturnsToScale,
    ExplorationProb,
    BreakthroughRate,
    SkillWeight,
    SignalDecay,
}

impl ParamName {
    pub const ALL: [ParamName; 6] = [
        ParamName::IslandDensity,
        ParamName::ReturnsToScale,
        ParamName::ExplorationProb,
        ParamName::BreakthroughRate,
        ParamName::SkillWeight,
        ParamName::SignalDecay,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ParamName::IslandDensity => "island_density",
            ParamName::ReturnsToScale => "returns_to_scale",
            ParamName::ExplorationProb => "exploration_prob",
            ParamName::BreakthroughRate => "breakthrough_rate",
            ParamName::SkillWeight => "skill_weight",
            ParamName::SignalDecay => "signal_decay",
        }
    }
}

impl fmt::Display for ParamName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ParamName {
    type Err = ParamError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ParamName::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or(ParamError::UnknownParam)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ParamError {
    /// A field is outside its admissible range.
    OutOfRange { field: &'static str, reason: &'static str, value: f64 },
    /// An intervention is scheduled after the horizon.
    InterventionStep { index: usize, step: u32, horizon: u32 },
    /// A name that is not one of [`ParamName::ALL`].
    UnknownParam,
}

impl fmt::Display for ParamError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamError::OutOfRange { field, reason, value } => {
                write!(f, "{field} {reason} (got {value})")
            }
            ParamError::InterventionStep { index, step, horizon } => write!(
                f,
                "interventions[{index}].step {step} lies outside [0, {horizon}]"
            ),
            ParamError::UnknownParam => f.write_str("unknown model parameter name"),
        }
    }
}

impl core::error::Error for ParamError {}

fn check(field: &'static str, value: f64, ok: bool, reason: &'static str) -> Result<(), ParamError> {
    if ok && !value.is_nan() {
        Ok(())
    } else {
        Err(ParamError::OutOfRange { field, reason, value })
    }
}

/// Range check for a single real-valued parameter.
pub fn validate_value(param: ParamName, v: f64) -> Result<(), ParamError> {
    let field = param.as_str();
    match param {
        ParamName::IslandDensity => check(field, v, (0.0..=1.0).contains(&v), "out of [0,1]"),
        ParamName::ExplorationProb => check(field, v, (0.0..=1.0).contains(&v), "out of [0,1]"),
        ParamName::ReturnsToScale => check(field, v, v > 0.0 && v.is_finite(), "must be > 0"),
        ParamName::BreakthroughRate => check(field, v, v >= 0.0 && v.is_finite(), "must be >= 0"),
        ParamName::SkillWeight => check(field, v, v >= 0.0 && v.is_finite(), "must be >= 0"),
        // rho = +inf is allowed: signals never cross islands.
        ParamName::SignalDecay => check(field, v, v >= 0.0, "must be >= 0"),
    }
}

impl ModelParams {
    pub fn get(&self, param: ParamName) -> f64 {
        match param {
            ParamName::IslandDensity => self.island_density,
            ParamName::ReturnsToScale => self.returns_to_scale,
            ParamName::ExplorationProb => self.exploration_prob,
            ParamName::BreakthroughRate => self.breakthrough_rate,
            ParamName::SkillWeight => self.skill_weight,
            ParamName::SignalDecay => self.signal_decay,
        }
    }

    pub fn set(&mut self, param: ParamName, value: f64) {
        let slot = match param {
            ParamName::IslandDensity => &mut self.island_density,
            ParamName::ReturnsToScale => &mut self.returns_to_scale,
            ParamName::ExplorationProb => &mut self.exploration_prob,
            ParamName::BreakthroughRate => &mut self.breakthrough_rate,
            ParamName::SkillWeight => &mut self.skill_weight,
            ParamName::SignalDecay => &mut self.signal_decay,
        };
        *slot = value;
    }

    /// Checks every field; the error names the first offending one.
    pub fn validate(&self) -> Result<(), ParamError> {
        if self.n_agents < 1 {
            return Err(ParamError::OutOfRange {
                field: "n_agents",
                reason: "must be >= 1",
                value: f64::from(self.n_agents),
            });
        }
        if self.horizon < 1 {
            return Err(ParamError::OutOfRange {
                field: "horizon",
                reason: "must be >= 1",
                value: f64::from(self.horizon),
            });
        }
        for p in ParamName::ALL {
            validate_value(p, self.get(p))?;
        }
        for (index, iv) in self.interventions.iter().enumerate() {
            if iv.step > self.horizon {
                return Err(ParamError::InterventionStep { index, step: iv.step, horizon: self.horizon });
            }
            validate_value(iv.param, iv.value)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;

    #[test]
    fn baseline_is_valid() {
        assert!(ModelParams::default().validate().is_ok());
    }

    #[test]
    fn exploration_out_of_range_names_field() {
        let p = ModelParams { exploration_prob: 1.5, ..Default::default() };
        let err = p.validate().unwrap_err();
        assert!(err.to_string().starts_with("exploration_prob out of [0,1]"), "{err}");
    }

    #[test]
    fn rejects_bad_fields() {
        let bad = [
            ModelParams { n_agents: 0, ..Default::default() },
            ModelParams { horizon: 0, ..Default::default() },
            ModelParams { island_density: -0.1, ..Default::default() },
            ModelParams { returns_to_scale: 0.0, ..Default::default() },
            ModelParams { breakthrough_rate: -1.0, ..Default::default() },
            ModelParams { skill_weight: f64::NAN, ..Default::default() },
            ModelParams { signal_decay: -0.5, ..Default::default() },
        ];
        for p in bad {
            assert!(p.validate().is_err(), "{p:?}");
        }
    }

    #[test]
    fn intervention_past_horizon_rejected() {
        let p = ModelParams {
            interventions: alloc::vec![Intervention { step: 202, param: ParamName::ExplorationProb, value: 0.0 }],
            ..Default::default()
        };
        assert!(matches!(p.validate(), Err(ParamError::InterventionStep { index: 0, .. })));
    }

    #[test]
    fn names_round_trip() {
        for p in ParamName::ALL {
            assert_eq!(p.as_str().parse::<ParamName>().unwrap(), p);
        }
        assert!("epsilon".parse::<ParamName>().is_err());
    }
}
