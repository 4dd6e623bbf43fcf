use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use core::fmt;

use super::dynamics::{island_productivity, miner_production, signal_probability};
use super::{ModelParams, ParamError};
use crate::random::{self, SimRng};

/// Lattice coordinates, with the initial technology at the origin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Pos {
    pub x: i32,
    pub y: i32,
}

impl Pos {
    pub const ORIGIN: Pos = Pos { x: 0, y: 0 };

    pub const fn new(x: i32, y: i32) -> Self {
        Pos { x, y }
    }

    /// Manhattan distance to the origin.
    pub fn manhattan(self) -> u32 {
        self.x.unsigned_abs() + self.y.unsigned_abs()
    }

    pub fn distance(self, other: Pos) -> u32 {
        self.x.abs_diff(other.x) + self.y.abs_diff(other.y)
    }

    /// One unit step toward `target`, closing the x gap first.
    pub fn toward(self, target: Pos) -> Pos {
        if self.x != target.x {
            Pos::new(self.x + (target.x - self.x).signum(), self.y)
        } else {
            Pos::new(self.x, self.y + (target.y - self.y).signum())
        }
    }
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AgentKind {
    Miner,
    Imitator { destination: Pos },
    Explorer,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Agent {
    pub id: u32,
    pub kind: AgentKind,
    pub pos: Pos,
    /// Output produced in the latest step; zero unless mining.
    pub production: f64,
    /// Productivity of the last island this agent discovered (1 initially).
    pub past_skills: f64,
}

impl Agent {
    pub fn is_miner(&self) -> bool {
        matches!(self.kind, AgentKind::Miner)
    }

    pub fn destination(&self) -> Option<Pos> {
        match self.kind {
            AgentKind::Imitator { destination } => Some(destination),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IslandRecord {
    pub position: Pos,
    pub productivity: f64,
    /// Step during which the island was found; 0 for the initial island.
    pub discovered_at: u32,
    /// `None` for the initial island.
    pub discoverer: Option<u32>,
}

/// Lazily sampled island occupancy on the unbounded lattice.
///
/// A cell's occupancy is drawn once, on first query, and memoized.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Lattice {
    cells: BTreeMap<Pos, bool>,
}

impl Lattice {
    fn with_origin() -> Self {
        let mut cells = BTreeMap::new();
        cells.insert(Pos::ORIGIN, true);
        Lattice { cells }
    }

    /// Occupancy of `pos`, drawing Bernoulli(`density`) the first time.
    pub fn occupied(&mut self, pos: Pos, density: f64, rng: &mut SimRng) -> bool {
        *self.cells.entry(pos).or_insert_with(|| random::uniform(rng) < density)
    }

    /// Memoized value, if the cell was already sampled.
    pub fn peek(&self, pos: Pos) -> Option<bool> {
        self.cells.get(&pos).copied()
    }

    pub fn sampled_cells(&self) -> usize {
        self.cells.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum StepError {
    OutOfHorizon { step: u32, horizon: u32 },
}

impl fmt::Display for StepError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StepError::OutOfHorizon { step, horizon } => {
                write!(f, "cannot step past the horizon (step {step}, horizon {horizon})")
            }
        }
    }
}

impl core::error::Error for StepError {}

/// Complete state of one run.
///
/// Cloning a world clones its generator, so a clone replays identically.
#[derive(Debug, Clone, PartialEq)]
pub struct WorldState {
    step: u32,
    agents: Vec<Agent>,
    islands: BTreeMap<Pos, IslandRecord>,
    lattice: Lattice,
    gdp_series: Vec<f64>,
    rng: SimRng,
    /// Parameters currently in force (interventions applied).
    params: ModelParams,
    next_intervention: usize,
}

impl WorldState {
    /// Initial state: every agent mines the origin island, productivity 1.
    pub fn reset(params: &ModelParams, seed: u64) -> Result<Self, ParamError> {
        params.validate()?;
        let mut params = params.clone();
        // Stable sort keeps the configured order among same-step changes.
        params.interventions.sort_by_key(|iv| iv.step);
        let agents = (0..params.n_agents)
            .map(|id| Agent {
                id,
                kind: AgentKind::Miner,
                pos: Pos::ORIGIN,
                production: 0.0,
                past_skills: 1.0,
            })
            .collect();
        let mut islands = BTreeMap::new();
        islands.insert(
            Pos::ORIGIN,
            IslandRecord { position: Pos::ORIGIN, productivity: 1.0, discovered_at: 0, discoverer: None },
        );
        Ok(WorldState {
            step: 0,
            agents,
            islands,
            lattice: Lattice::with_origin(),
            gdp_series: Vec::with_capacity(params.horizon as usize),
            rng: random::sim_rng(seed),
            params,
            next_intervention: 0,
        })
    }

    pub fn step_count(&self) -> u32 {
        self.step
    }

    pub fn horizon(&self) -> u32 {
        self.params.horizon
    }

    pub fn agents(&self) -> &[Agent] {
        &self.agents
    }

    pub fn islands(&self) -> &BTreeMap<Pos, IslandRecord> {
        &self.islands
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn gdp_series(&self) -> &[f64] {
        &self.gdp_series
    }

    /// Parameters in force, including applied interventions.
    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn count_kind(&self, f: impl Fn(&AgentKind) -> bool) -> usize {
        self.agents.iter().filter(|a| f(&a.kind)).count()
    }

    pub fn n_miners(&self) -> usize {
        self.count_kind(|k| matches!(k, AgentKind::Miner))
    }

    pub fn n_imitators(&self) -> usize {
        self.count_kind(|k| matches!(k, AgentKind::Imitator { .. }))
    }

    pub fn n_explorers(&self) -> usize {
        self.count_kind(|k| matches!(k, AgentKind::Explorer))
    }

    /// Miner head-count per island.
    pub fn miner_counts(&self) -> BTreeMap<Pos, u32> {
        let mut counts = BTreeMap::new();
        for a in self.agents.iter().filter(|a| a.is_miner()) {
            *counts.entry(a.pos).or_insert(0) += 1;
        }
        counts
    }

    /// Lattice occupancy as seen by the run (draws on first query).
    pub fn query_cell(&mut self, pos: Pos) -> bool {
        self.lattice.occupied(pos, self.params.island_density, &mut self.rng)
    }

    /// Advances one step: interventions, production, exploration draws,
    /// signal-driven imitation, movement, landing.
    pub fn step(&mut self) -> Result<(), StepError> {
        if self.step >= self.params.horizon {
            return Err(StepError::OutOfHorizon { step: self.step, horizon: self.params.horizon });
        }
        let t = self.step + 1;
        self.apply_interventions(t);
        self.produce();
        self.explore();
        self.imitate();
        self.move_agents();
        self.land(t);
        self.step = t;
        Ok(())
    }

    fn apply_interventions(&mut self, t: u32) {
        while let Some(iv) = self.params.interventions.get(self.next_intervention) {
            if iv.step > t {
                break;
            }
            let (param, value) = (iv.param, iv.value);
            self.params.set(param, value);
            self.next_intervention += 1;
        }
    }

    fn produce(&mut self) {
        let counts = self.miner_counts();
        let alpha = self.params.returns_to_scale;
        let mut gdp = 0.0;
        for a in &mut self.agents {
            if a.is_miner() {
                let s = self.islands[&a.pos].productivity;
                a.production = miner_production(s, counts[&a.pos], alpha);
                gdp += a.production;
            } else {
                a.production = 0.0;
            }
        }
        self.gdp_series.push(gdp);
    }

    fn explore(&mut self) {
        let eps = self.params.exploration_prob;
        for a in self.agents.iter_mut().filter(|a| a.is_miner()) {
            if random::uniform(&mut self.rng) < eps {
                a.kind = AgentKind::Explorer;
                a.production = 0.0;
            }
        }
    }

    fn imitate(&mut self) {
        // Decisions are simultaneous: everyone reads the same snapshot.
        let miners: Vec<(usize, Pos, f64)> = self
            .agents
            .iter()
            .enumerate()
            .filter(|(_, a)| a.is_miner())
            .map(|(i, a)| (i, a.pos, a.production))
            .collect();
        if miners.len() < 2 {
            return;
        }
        let total = miners.len() as u32;
        let mut counts: BTreeMap<Pos, u32> = BTreeMap::new();
        for &(_, pos, _) in &miners {
            *counts.entry(pos).or_insert(0) += 1;
        }
        let rho = self.params.signal_decay;

        let mut moves = Vec::new();
        for &(receiver, own_pos, own_production) in &miners {
            // (production, distance, sender index, island)
            let mut best: Option<(f64, u32, usize, Pos)> = None;
            for &(sender, pos, production) in &miners {
                if pos == own_pos || production <= own_production {
                    continue;
                }
                let d = own_pos.distance(pos);
                // A signal that cannot win the selection is not worth a draw.
                if let Some((bp, bd, _, _)) = best {
                    if production < bp || (production == bp && d >= bd) {
                        continue;
                    }
                }
                let w = signal_probability(counts[&pos], total, d, rho);
                if random::uniform(&mut self.rng) < w {
                    best = Some((production, d, sender, pos));
                }
            }
            if let Some((_, _, _, destination)) = best {
                moves.push((receiver, destination));
            }
        }
        for (i, destination) in moves {
            let a = &mut self.agents[i];
            a.kind = AgentKind::Imitator { destination };
            a.production = 0.0;
        }
    }

    fn move_agents(&mut self) {
        for a in &mut self.agents {
            match a.kind {
                AgentKind::Explorer => {
                    let p = a.pos;
                    a.pos = match random::index(&mut self.rng, 4) {
                        0 => Pos::new(p.x + 1, p.y),
                        1 => Pos::new(p.x - 1, p.y),
                        2 => Pos::new(p.x, p.y + 1),
                        _ => Pos::new(p.x, p.y - 1),
                    };
                }
                AgentKind::Imitator { destination } => a.pos = a.pos.toward(destination),
                AgentKind::Miner => {}
            }
        }
    }

    fn land(&mut self, t: u32) {
        for i in 0..self.agents.len() {
            let pos = self.agents[i].pos;
            match self.agents[i].kind {
                AgentKind::Explorer => {
                    if !self.lattice.occupied(pos, self.params.island_density, &mut self.rng) {
                        continue;
                    }
                    if !self.islands.contains_key(&pos) {
                        let skills = self.agents[i].past_skills;
                        let s = island_productivity(pos, skills, &self.params, &mut self.rng);
                        self.islands.insert(
                            pos,
                            IslandRecord { position: pos, productivity: s, discovered_at: t, discoverer: Some(self.agents[i].id) },
                        );
                        self.agents[i].past_skills = s;
                    }
                    self.agents[i].kind = AgentKind::Miner;
                }
                AgentKind::Imitator { destination } if destination == pos => {
                    self.agents[i].kind = AgentKind::Miner;
                }
                _ => {}
            }
        }
    }
}
