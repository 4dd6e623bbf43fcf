//! Black-box simulator contract (`reset` / `next` / `eval`) and per-run seed
//! derivation.
//!
//! The estimation engine only sees this trait, so anything that can be reset
//! with a seed, stepped and observed can be analyzed.

use alloc::boxed::Box;
use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

use crate::model::{eval_observable, ModelParams, Observable, ObservableError, ParamError, StepError, WorldState};
use crate::random::{self, SimRng};

/// Golden-ratio increment of the SplitMix64 stream.
pub const SPLITMIX_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 output function.
pub fn splitmix64_mix(x: u64) -> u64 {
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of run `run_index` under `master`: the SplitMix64 finalizer applied
/// to `master + run_index * gamma` (wrapping).
pub fn derive_seed(master: u64, run_index: u64) -> u64 {
    splitmix64_mix(master.wrapping_add(run_index.wrapping_mul(SPLITMIX_GAMMA)))
}

#[derive(Debug, Clone, PartialEq)]
pub enum SimError {
    InvalidParams(ParamError),
    NotReset,
    OutOfHorizon { step: u64, horizon: u64 },
    UnknownObservable(String),
    Observable(ObservableError),
}

impl fmt::Display for SimError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SimError::InvalidParams(e) => write!(f, "invalid parameters: {e}"),
            SimError::NotReset => f.write_str("simulator used before reset"),
            SimError::OutOfHorizon { step, horizon } => {
                write!(f, "cannot advance past the horizon (step {step}, horizon {horizon})")
            }
            SimError::UnknownObservable(name) => write!(f, "unknown observable \"{name}\""),
            SimError::Observable(e) => e.fmt(f),
        }
    }
}

impl core::error::Error for SimError {}

impl From<ParamError> for SimError {
    fn from(e: ParamError) -> Self {
        SimError::InvalidParams(e)
    }
}

impl From<ObservableError> for SimError {
    fn from(e: ObservableError) -> Self {
        SimError::Observable(e)
    }
}

impl From<StepError> for SimError {
    fn from(e: StepError) -> Self {
        match e {
            StepError::OutOfHorizon { step, horizon } => {
                SimError::OutOfHorizon { step: u64::from(step), horizon: u64::from(horizon) }
            }
        }
    }
}

/// One simulation instance, driven by the caller.
pub trait Simulator {
    /// Returns to the initial state and reseeds. Step becomes 0.
    fn reset(&mut self, seed: u64) -> Result<(), SimError>;
    /// Advances exactly one step.
    fn next(&mut self) -> Result<(), SimError>;
    /// Reads an observable on the current state.
    fn eval(&self, observable: &str) -> Result<f64, SimError>;
    /// Completed steps since the last reset.
    fn step(&self) -> u64;
    /// Every name `eval` accepts.
    fn observables(&self) -> Vec<String>;
}

/// Creates independent simulator instances; shareable across threads.
pub trait SimulatorFactory: Sync {
    type Sim: Simulator;

    fn create(&self) -> Self::Sim;
}

impl<F, S> SimulatorFactory for F
where
    F: Fn() -> S + Sync,
    S: Simulator,
{
    type Sim = S;

    fn create(&self) -> S {
        self()
    }
}

/// [`Simulator`] over the Island Model.
#[derive(Debug, Clone)]
pub struct IslandSimulator {
    params: ModelParams,
    world: Option<WorldState>,
}

impl IslandSimulator {
    /// Validates `params` up front so a bad configuration fails before any run.
    pub fn new(params: ModelParams) -> Result<Self, SimError> {
        params.validate()?;
        Ok(IslandSimulator { params, world: None })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn world(&self) -> Option<&WorldState> {
        self.world.as_ref()
    }
}

impl Simulator for IslandSimulator {
    fn reset(&mut self, seed: u64) -> Result<(), SimError> {
        self.world = Some(WorldState::reset(&self.params, seed)?);
        Ok(())
    }

    fn next(&mut self) -> Result<(), SimError> {
        let world = self.world.as_mut().ok_or(SimError::NotReset)?;
        world.step()?;
        Ok(())
    }

    fn eval(&self, observable: &str) -> Result<f64, SimError> {
        let world = self.world.as_ref().ok_or(SimError::NotReset)?;
        let obs: Observable =
            observable.parse().map_err(|_| SimError::UnknownObservable(observable.to_string()))?;
        Ok(eval_observable(world, obs)?)
    }

    fn step(&self) -> u64 {
        self.world.as_ref().map_or(0, |w| u64::from(w.step_count()))
    }

    fn observables(&self) -> Vec<String> {
        Observable::NAMES.iter().map(|s| s.to_string()).collect()
    }
}

/// Test simulator whose `value` observable is a fresh Normal(mean, sd) draw
/// at every state. Also exposes `steps`.
#[derive(Debug, Clone)]
pub struct SyntheticNormal {
    mean: f64,
    std_dev: f64,
    horizon: u64,
    step: u64,
    value: f64,
    rng: Option<SimRng>,
}

impl SyntheticNormal {
    pub fn new(mean: f64, std_dev: f64, horizon: u64) -> Self {
        SyntheticNormal { mean, std_dev, horizon, step: 0, value: f64::NAN, rng: None }
    }

    fn draw(&mut self) {
        let rng = self.rng.as_mut().expect("reset before draw");
        self.value = self.mean + self.std_dev * random::standard_normal(rng);
    }
}

impl Simulator for SyntheticNormal {
    fn reset(&mut self, seed: u64) -> Result<(), SimError> {
        self.rng = Some(random::sim_rng(seed));
        self.step = 0;
        self.draw();
        Ok(())
    }

    fn next(&mut self) -> Result<(), SimError> {
        if self.rng.is_none() {
            return Err(SimError::NotReset);
        }
        if self.step >= self.horizon {
            return Err(SimError::OutOfHorizon { step: self.step, horizon: self.horizon });
        }
        self.step += 1;
        self.draw();
        Ok(())
    }

    fn eval(&self, observable: &str) -> Result<f64, SimError> {
        if self.rng.is_none() {
            return Err(SimError::NotReset);
        }
        match observable {
            "value" => Ok(self.value),
            "steps" => Ok(self.step as f64),
            _ => Err(SimError::UnknownObservable(observable.to_string())),
        }
    }

    fn step(&self) -> u64 {
        self.step
    }

    fn observables(&self) -> Vec<String> {
        alloc::vec!["value".to_string(), "steps".to_string()]
    }
}

/// Observable defined as a pure function of `(seed, step)`.
pub type Script = Arc<dyn Fn(u64, u64) -> f64 + Send + Sync>;

/// Deterministic simulator: each observable is a scripted function of the
/// reset seed and the current step. `steps` is always available.
#[derive(Clone)]
pub struct ScriptedSimulator {
    horizon: u64,
    scripts: Vec<(String, Script)>,
    seed: Option<u64>,
    step: u64,
    advances: u64,
}

impl ScriptedSimulator {
    pub fn new(horizon: u64) -> Self {
        ScriptedSimulator { horizon, scripts: Vec::new(), seed: None, step: 0, advances: 0 }
    }

    pub fn with(mut self, name: &str, f: impl Fn(u64, u64) -> f64 + Send + Sync + 'static) -> Self {
        let script: Script = Arc::new(f);
        self.scripts.push((name.to_string(), script));
        self
    }

    /// Total `next` calls since construction, across resets.
    pub fn advances(&self) -> u64 {
        self.advances
    }
}

impl fmt::Debug for ScriptedSimulator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> = self.scripts.iter().map(|(n, _)| n.as_str()).collect();
        f.debug_struct("ScriptedSimulator")
            .field("horizon", &self.horizon)
            .field("observables", &names)
            .field("step", &self.step)
            .finish()
    }
}

impl Simulator for ScriptedSimulator {
    fn reset(&mut self, seed: u64) -> Result<(), SimError> {
        self.seed = Some(seed);
        self.step = 0;
        Ok(())
    }

    fn next(&mut self) -> Result<(), SimError> {
        if self.seed.is_none() {
            return Err(SimError::NotReset);
        }
        if self.step >= self.horizon {
            return Err(SimError::OutOfHorizon { step: self.step, horizon: self.horizon });
        }
        self.step += 1;
        self.advances += 1;
        Ok(())
    }

    fn eval(&self, observable: &str) -> Result<f64, SimError> {
        let seed = self.seed.ok_or(SimError::NotReset)?;
        if observable == "steps" {
            return Ok(self.step as f64);
        }
        self.scripts
            .iter()
            .find(|(n, _)| n == observable)
            .map(|(_, f)| f(seed, self.step))
            .ok_or_else(|| SimError::UnknownObservable(observable.to_string()))
    }

    fn step(&self) -> u64 {
        self.step
    }

    fn observables(&self) -> Vec<String> {
        let mut names = alloc::vec!["steps".to_string()];
        names.extend(self.scripts.iter().map(|(n, _)| n.clone()));
        names
    }
}

/// Boxed simulator, for callers that pick the model at run time.
impl Simulator for Box<dyn Simulator + Send> {
    fn reset(&mut self, seed: u64) -> Result<(), SimError> {
        (**self).reset(seed)
    }

    fn next(&mut self) -> Result<(), SimError> {
        (**self).next()
    }

    fn eval(&self, observable: &str) -> Result<f64, SimError> {
        (**self).eval(observable)
    }

    fn step(&self) -> u64 {
        (**self).step()
    }

    fn observables(&self) -> Vec<String> {
        (**self).observables()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Straight SplitMix64 stream, written independently of `derive_seed`.
    struct SplitMix64(u64);

    impl SplitMix64 {
        fn next(&mut self) -> u64 {
            self.0 = self.0.wrapping_add(0x9e3779b97f4a7c15);
            let mut z = self.0;
            z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
            z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
            z ^ (z >> 31)
        }
    }

    #[test]
    fn derive_seed_matches_reference_stream() {
        assert_eq!(derive_seed(0, 0), 0);
        assert_eq!(derive_seed(0, 1), 0xE220_A839_7B1D_CDAF);
        let mut stream = SplitMix64(12345);
        for i in 1..1000 {
            assert_eq!(derive_seed(12345, i), stream.next());
        }
    }

    #[test]
    fn derive_seed_has_no_collisions() {
        let mut seen = std::collections::HashSet::with_capacity(1_000_000);
        for i in 0..1_000_000u64 {
            assert!(seen.insert(derive_seed(0xDEAD_BEEF, i)), "collision at {i}");
        }
    }

    #[test]
    fn island_simulator_contract() {
        let mut sim = IslandSimulator::new(ModelParams::default()).unwrap();
        assert_eq!(sim.next(), Err(SimError::NotReset));
        sim.reset(3).unwrap();
        assert_eq!(sim.eval("steps"), Ok(0.0));
        sim.next().unwrap();
        assert_eq!(sim.step(), 1);
        assert!(matches!(sim.eval("bogus"), Err(SimError::UnknownObservable(_))));
        for name in sim.observables() {
            if name != "AGR" {
                assert!(sim.eval(&name).is_ok(), "{name}");
            }
        }
    }

    #[test]
    fn island_simulator_rejects_bad_params() {
        let p = ModelParams { exploration_prob: 1.5, ..Default::default() };
        assert!(matches!(IslandSimulator::new(p), Err(SimError::InvalidParams(_))));
    }

    #[test]
    fn scripted_and_normal_boundaries() {
        let mut s = ScriptedSimulator::new(2).with("x", |seed, step| (seed + step) as f64);
        s.reset(10).unwrap();
        s.next().unwrap();
        s.next().unwrap();
        assert_eq!(s.eval("x"), Ok(12.0));
        assert!(matches!(s.next(), Err(SimError::OutOfHorizon { .. })));

        let mut n = SyntheticNormal::new(0.0, 1.0, 1);
        n.reset(1).unwrap();
        let first = n.eval("value").unwrap();
        n.next().unwrap();
        assert_ne!(first, n.eval("value").unwrap());
        assert!(n.next().is_err());
    }
}
