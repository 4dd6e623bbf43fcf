//! The Island Model: agents searching an unbounded lattice of technologies.
//!
//! Each step runs in a fixed phase order: scheduled interventions, production
//! (GDP is appended), exploration draws, signal-driven imitation, movement
//! and finally landing. Random draws within a phase go in ascending agent id.

mod dynamics;
mod observe;
mod params;
mod world;

pub use dynamics::{island_productivity, miner_production, productivity_from_draws, signal_probability};
pub use observe::{eval_observable, series_observable, Observable, ObservableError};
pub use params::{validate_value, Intervention, ModelParams, ParamError, ParamName};
pub use world::{Agent, AgentKind, IslandRecord, Lattice, Pos, StepError, WorldState};
