//! Adaptive estimation: simulate in blocks until every queried instance has
//! a confidence interval no wider than the requested threshold.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::ops::Range;

use crate::quatex::{self, EvalError, Instance, QuerySpec};
use crate::sim::{derive_seed, SimError, Simulator, SimulatorFactory};
use crate::stats::{ci_halfwidth, Accumulator, StatsError};

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields, default))]
pub struct SmcSettings {
    /// Significance level; intervals have confidence `1 - confidence_alpha`.
    pub confidence_alpha: f64,
    /// Target full width of every interval (delta).
    pub ci_width_threshold: f64,
    pub block_size: u32,
    pub max_runs: u32,
    pub master_seed: u64,
}

impl Default for SmcSettings {
    fn default() -> Self {
        SmcSettings { confidence_alpha: 0.05, ci_width_threshold: 1.0, block_size: 30, max_runs: 10_000, master_seed: 0 }
    }
}

impl SmcSettings {
    pub fn validate(&self) -> Result<(), SmcError> {
        let bad = |field: &'static str, reason: &'static str| Err(SmcError::InvalidSettings { field, reason });
        if !(self.confidence_alpha > 0.0 && self.confidence_alpha < 1.0) {
            return bad("confidence_alpha", "must lie in (0, 1)");
        }
        if !(self.ci_width_threshold > 0.0) {
            return bad("ci_width_threshold", "must be > 0");
        }
        if self.block_size < 2 {
            return bad("block_size", "must be >= 2");
        }
        if self.max_runs < self.block_size {
            return bad("max_runs", "must be >= block_size");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SmcError {
    InvalidSettings { field: &'static str, reason: &'static str },
    /// `reset` failed (usually invalid model parameters).
    Reset { run_index: u64, source: SimError },
    /// Query evaluation failed inside a run.
    Run { run_index: u64, source: EvalError },
    /// A run produced a non-finite value for an instance.
    Poisoned { run_index: u64, instance: String, value: f64 },
}

impl fmt::Display for SmcError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SmcError::InvalidSettings { field, reason } => write!(f, "smc.{field} {reason}"),
            SmcError::Reset { run_index, source } => write!(f, "run {run_index}: reset failed: {source}"),
            SmcError::Run { run_index, source } => write!(f, "run {run_index}: {source}"),
            SmcError::Poisoned { run_index, instance, value } => {
                write!(f, "run {run_index}: instance {instance} produced non-finite value {value}")
            }
        }
    }
}

impl core::error::Error for SmcError {}

/// Executes the runs of one block, returning results in run-index order.
pub trait BlockExecutor {
    fn map_runs<T, F>(&self, runs: Range<u64>, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(u64) -> T + Sync + Send;
}

/// Runs every simulation on the calling thread.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl BlockExecutor for Sequential {
    fn map_runs<T, F>(&self, runs: Range<u64>, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(u64) -> T + Sync + Send,
    {
        runs.map(f).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InstanceEstimate {
    pub label: String,
    pub binding: Option<f64>,
    pub mean: f64,
    pub variance: f64,
    pub n: u64,
    pub ci_halfwidth: f64,
    /// `2 * ci_halfwidth <= delta`.
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Estimation {
    pub instances: Vec<InstanceEstimate>,
    /// Per-run values, `samples[run][instance]`, in run-index order.
    pub samples: Vec<Vec<f64>>,
    pub blocks: u32,
    pub settings: SmcSettings,
}

impl Estimation {
    pub fn runs(&self) -> u64 {
        self.samples.len() as u64
    }

    pub fn all_converged(&self) -> bool {
        self.instances.iter().all(|i| i.converged)
    }

    /// Instances that missed the width target (non-convergence warnings).
    pub fn warnings(&self) -> impl Iterator<Item = &InstanceEstimate> {
        self.instances.iter().filter(|i| !i.converged)
    }

    /// Samples of one instance across runs.
    pub fn column(&self, instance: usize) -> Vec<f64> {
        self.samples.iter().map(|row| row[instance]).collect()
    }
}

/// Evaluates `query` on one fresh run seeded with `derive_seed(master, run_index)`.
pub fn run_once<F: SimulatorFactory>(
    factory: &F,
    query: &QuerySpec,
    master_seed: u64,
    run_index: u64,
) -> Result<Vec<f64>, SmcError> {
    let mut sim = factory.create();
    sim.reset(derive_seed(master_seed, run_index)).map_err(|source| SmcError::Reset { run_index, source })?;
    quatex::evaluate(query, &mut sim).map_err(|source| SmcError::Run { run_index, source })
}

/// Block-sequential estimation of every instance of `query`.
///
/// Blocks of `block_size` runs are simulated (possibly in parallel through
/// `executor`) and folded into per-instance accumulators in run-index order,
/// so the result depends only on the settings, never on scheduling. The loop
/// stops when every instance satisfies `2 * halfwidth <= delta`, or when
/// `max_runs` is reached; in the latter case the offending instances are
/// reported with `converged = false`.
pub fn estimate<F, E>(factory: &F, query: &QuerySpec, settings: &SmcSettings, executor: &E) -> Result<Estimation, SmcError>
where
    F: SimulatorFactory,
    E: BlockExecutor,
{
    settings.validate()?;
    let list: Vec<Instance> = quatex::instances(query);
    let mut accs = alloc::vec![Accumulator::new(); list.len()];
    let mut samples: Vec<Vec<f64>> = Vec::new();
    let mut blocks = 0u32;
    let max_runs = u64::from(settings.max_runs);
    let master = settings.master_seed;

    loop {
        let start = samples.len() as u64;
        let end = (start + u64::from(settings.block_size)).min(max_runs);
        let results = executor.map_runs(start..end, |i| run_once(factory, query, master, i));
        for (offset, result) in results.into_iter().enumerate() {
            let run_index = start + offset as u64;
            let values = result?;
            for ((acc, inst), &v) in accs.iter_mut().zip(&list).zip(&values) {
                acc.update(v, run_index).map_err(|e| match e {
                    StatsError::Poisoned { value, .. } => {
                        SmcError::Poisoned { run_index, instance: inst.label.clone(), value }
                    }
                    _ => unreachable!(),
                })?;
            }
            samples.push(values);
        }
        blocks += 1;

        let summary = summarize(&list, &accs, settings);
        let done = summary.iter().all(|s| s.converged);
        if done || samples.len() as u64 >= max_runs {
            return Ok(Estimation { instances: summary, samples, blocks, settings: settings.clone() });
        }
    }
}

/// Rebuilds the per-instance summary of `query` from stored per-run samples
/// (`samples[run][instance]`, run-index order), as [`estimate`] reported it.
pub fn summarize_runs(query: &QuerySpec, samples: &[Vec<f64>], settings: &SmcSettings) -> Result<Vec<InstanceEstimate>, SmcError> {
    let list: Vec<Instance> = quatex::instances(query);
    let mut accs = alloc::vec![Accumulator::new(); list.len()];
    for (run_index, values) in samples.iter().enumerate() {
        let run_index = run_index as u64;
        for ((acc, inst), &v) in accs.iter_mut().zip(&list).zip(values) {
            acc.update(v, run_index)
                .map_err(|_| SmcError::Poisoned { run_index, instance: inst.label.clone(), value: v })?;
        }
    }
    Ok(summarize(&list, &accs, settings))
}

fn summarize(list: &[Instance], accs: &[Accumulator], settings: &SmcSettings) -> Vec<InstanceEstimate> {
    list.iter()
        .zip(accs)
        .map(|(inst, acc)| {
            // block_size >= 2 guarantees two samples here.
            let hw = ci_halfwidth(acc, settings.confidence_alpha).unwrap_or(f64::INFINITY);
            InstanceEstimate {
                label: inst.label.clone(),
                binding: inst.binding,
                mean: acc.mean(),
                variance: acc.variance().unwrap_or(0.0),
                n: acc.n(),
                ci_halfwidth: hw,
                converged: 2.0 * hw <= settings.ci_width_threshold,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quatex::parse;
    use crate::sim::{ScriptedSimulator, SyntheticNormal};

    fn value_query() -> QuerySpec {
        parse("eval E[ s.rval(\"value\") ];").unwrap()
    }

    #[test]
    fn settings_validation() {
        let ok = SmcSettings::default();
        assert!(ok.validate().is_ok());
        for bad in [
            SmcSettings { confidence_alpha: 0.0, ..ok.clone() },
            SmcSettings { ci_width_threshold: 0.0, ..ok.clone() },
            SmcSettings { block_size: 1, ..ok.clone() },
            SmcSettings { max_runs: 10, ..ok.clone() },
        ] {
            assert!(matches!(bad.validate(), Err(SmcError::InvalidSettings { .. })));
        }
    }

    #[test]
    fn unit_normal_stops_after_one_block() {
        let factory = || SyntheticNormal::new(0.0, 1.0, 10);
        let est = estimate(&factory, &value_query(), &SmcSettings { master_seed: 5, ..Default::default() }, &Sequential)
            .unwrap();
        let inst = &est.instances[0];
        assert!(inst.variance <= 1.79, "seed gives variance {}", inst.variance);
        assert_eq!((inst.n, est.blocks), (30, 1));
        assert!(inst.converged && 2.0 * inst.ci_halfwidth <= 1.0);
    }

    #[test]
    fn deterministic_model_has_zero_width() {
        let factory = || ScriptedSimulator::new(10).with("value", |_, _| 4.0);
        let est = estimate(&factory, &value_query(), &SmcSettings::default(), &Sequential).unwrap();
        assert_eq!(est.instances[0].ci_halfwidth, 0.0);
        assert_eq!(est.instances[0].n, 30);
        assert_eq!(est.instances[0].mean, 4.0);
    }

    #[test]
    fn max_runs_caps_and_flags() {
        let factory = || SyntheticNormal::new(0.0, 50.0, 10);
        let settings = SmcSettings { max_runs: 75, ..Default::default() };
        let est = estimate(&factory, &value_query(), &settings, &Sequential).unwrap();
        assert_eq!(est.runs(), 75);
        assert_eq!(est.blocks, 3);
        assert!(!est.all_converged());
        assert_eq!(est.warnings().count(), 1);
    }

    #[test]
    fn poisoned_value_aborts_with_run_index() {
        let factory = || ScriptedSimulator::new(10).with("value", |seed, _| if seed % 3 == 0 { f64::NAN } else { 1.0 });
        let err = estimate(&factory, &value_query(), &SmcSettings { master_seed: 9, ..Default::default() }, &Sequential)
            .unwrap_err();
        let SmcError::Poisoned { run_index, .. } = err else { panic!("{err:?}") };
        let first_bad = (0..).find(|&i| derive_seed(9, i).is_multiple_of(3)).unwrap();
        assert_eq!(run_index, first_bad);
    }

    #[test]
    fn evaluation_error_reports_run() {
        let factory = || ScriptedSimulator::new(0);
        let q = parse("eval E[ s.rval(\"missing\") ];").unwrap();
        assert!(matches!(estimate(&factory, &q, &SmcSettings::default(), &Sequential), Err(SmcError::Run { run_index: 0, .. })));
    }

    #[test]
    fn reported_halfwidths_match_samples() {
        let factory = || SyntheticNormal::new(3.0, 2.0, 10);
        let est = estimate(&factory, &value_query(), &SmcSettings { master_seed: 77, ..Default::default() }, &Sequential)
            .unwrap();
        let column = est.column(0);
        let acc: Accumulator = column.iter().copied().collect();
        assert_eq!(acc.n(), est.instances[0].n);
        assert!((acc.mean() - est.instances[0].mean).abs() < 1e-12);
        assert_eq!(ci_halfwidth(&acc, 0.05).unwrap(), est.instances[0].ci_halfwidth);
    }

    #[test]
    fn stored_samples_reproduce_the_summary() {
        let factory = || SyntheticNormal::new(0.0, 4.0, 10);
        let settings = SmcSettings { master_seed: 3, ..Default::default() };
        let est = estimate(&factory, &value_query(), &settings, &Sequential).unwrap();
        assert_eq!(summarize_runs(&value_query(), &est.samples, &settings).unwrap(), est.instances);
        let bad = [vec![1.0], vec![f64::NAN]];
        assert!(matches!(summarize_runs(&value_query(), &bad, &settings), Err(SmcError::Poisoned { run_index: 1, .. })));
    }
}
