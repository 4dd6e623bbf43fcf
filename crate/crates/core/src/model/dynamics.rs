//! Closed-form pieces of the model: island productivity, per-miner output
//! and signal reception probability.

use rand::RngCore;

use super::{ModelParams, Pos};
use crate::random;

/// Productivity of a new island given the breakthrough count and noise
/// draw, clamped at zero.
pub fn productivity_from_draws(distance: u32, skills: f64, skill_weight: f64, breakthroughs: u32, noise: f64) -> f64 {
    let raw = (1.0 + f64::from(breakthroughs)) * (f64::from(distance) + skill_weight * skills + noise);
    if raw > 0.0 {
        raw
    } else {
        0.0
    }
}

/// Draws the productivity of an undiscovered island at `pos`.
///
/// Consumes one Poisson draw followed by one standard-normal draw.
pub fn island_productivity<R: RngCore + ?Sized>(
    pos: Pos,
    discoverer_skills: f64,
    params: &ModelParams,
    rng: &mut R,
) -> f64 {
    let breakthroughs = random::poisson(rng, params.breakthrough_rate);
    let noise = random::standard_normal(rng);
    productivity_from_draws(pos.manhattan(), discoverer_skills, params.skill_weight, breakthroughs, noise)
}

/// Output of each miner on an island of productivity `s` holding `miners`
/// miners: `s * miners^(alpha - 1)`.
pub fn miner_production(s: f64, miners: u32, returns_to_scale: f64) -> f64 {
    debug_assert!(miners >= 1);
    if miners == 1 {
        return s;
    }
    s * libm::pow(f64::from(miners), returns_to_scale - 1.0)
}

/// Probability that a miner receives the signal of one miner on an island
/// holding `source_miners` miners, at Manhattan `distance`.
///
/// # Panics
/// If `total_miners` is zero; nobody broadcasts without miners.
pub fn signal_probability(source_miners: u32, total_miners: u32, distance: u32, signal_decay: f64) -> f64 {
    assert!(total_miners > 0, "signal_probability called with no miners");
    let share = f64::from(source_miners) / f64::from(total_miners);
    let decay = if distance == 0 {
        1.0
    } else {
        libm::exp(-signal_decay * f64::from(distance))
    };
    (share * decay).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::sim_rng;

    #[test]
    fn production_examples() {
        let per = miner_production(1.0, 20, 1.5);
        assert!((per - 4.472_135_955).abs() < 1e-6);
        assert!((per * 20.0 - 89.442_719_1).abs() < 1e-6);
        assert_eq!(miner_production(7.0, 1, 0.3), 7.0);
        assert!((miner_production(2.0, 4, 0.9) - 1.741_101_126_592_248).abs() < 1e-9);
    }

    #[test]
    fn signal_examples() {
        let p = signal_probability(5, 20, 10, 0.1);
        assert!((p - 0.25 * (-1.0f64).exp()).abs() < 1e-12);
        assert!((p - 0.091_97).abs() < 1e-5);
        assert_eq!(signal_probability(20, 20, 0, 7.0), 1.0);
        assert_eq!(signal_probability(20, 20, 0, f64::INFINITY), 1.0);
        assert!((signal_probability(3, 10, 42, 0.0) - 0.3).abs() < 1e-15);
        assert_eq!(signal_probability(3, 10, 4, f64::INFINITY), 0.0);
    }

    #[test]
    #[should_panic]
    fn signal_without_miners_panics() {
        signal_probability(0, 0, 1, 0.1);
    }

    #[test]
    fn productivity_examples() {
        assert_eq!(productivity_from_draws(0, 1.0, 0.0, 0, 0.0), 0.0);
        assert_eq!(productivity_from_draws(4, 3.0, 2.0, 0, 0.0), 10.0);
        // Negative raw value clamps.
        assert_eq!(productivity_from_draws(1, 0.0, 0.0, 2, -3.0), 0.0);
    }

    #[test]
    fn productivity_expectation_at_distance_five() {
        // E[(1+P)(d + eta)] = (1 + lambda) * d when phi = 0; clamping is
        // negligible five standard deviations out.
        let params = ModelParams { breakthrough_rate: 1.0, skill_weight: 0.0, ..Default::default() };
        let mut rng = sim_rng(2024);
        let n = 1_000_000;
        let pos = Pos::new(2, -3);
        let mean = (0..n).map(|_| island_productivity(pos, 1.0, &params, &mut rng)).sum::<f64>() / n as f64;
        // sd of (1+P)(5+eta) is about 5.6; 4 standard errors is ~0.023.
        assert!((mean - 10.0).abs() < 0.03, "mean {mean}");
    }
}
