use core::fmt;
use core::str::FromStr;

use super::WorldState;

/// Quantities that can be read off a [`WorldState`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Observable {
    Gdp,
    LogGdp,
    Agr,
    AgrTotal,
    Steps,
    NMiners,
    NImitators,
    NExplorers,
    NIslands,
}

impl Observable {
    pub const ALL: [Observable; 9] = [
        Observable::Gdp,
        Observable::LogGdp,
        Observable::Agr,
        Observable::AgrTotal,
        Observable::Steps,
        Observable::NMiners,
        Observable::NImitators,
        Observable::NExplorers,
        Observable::NIslands,
    ];

    /// Registry names, in [`Observable::ALL`] order.
    pub const NAMES: [&'static str; 9] =
        ["GDP", "logGDP", "AGR", "AGR_total", "steps", "n_miners", "n_imitators", "n_explorers", "n_islands"];

    pub fn name(self) -> &'static str {
        let i = Observable::ALL.iter().position(|o| *o == self).unwrap_or(0);
        Observable::NAMES[i]
    }
}

impl FromStr for Observable {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        Observable::NAMES
            .iter()
            .position(|n| *n == s)
            .map(|i| Observable::ALL[i])
            .ok_or(())
    }
}

impl fmt::Display for Observable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ObservableError {
    /// Not enough completed steps (GDP needs 1, AGR needs 2).
    InsufficientHistory { observable: Observable, step: u32 },
    /// A logarithm of a non-positive GDP.
    NonFinite { observable: Observable, gdp: f64 },
}

impl fmt::Display for ObservableError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ObservableError::InsufficientHistory { observable, step } => {
                write!(f, "{observable} is undefined at step {step}")
            }
            ObservableError::NonFinite { observable, gdp } => {
                write!(f, "{observable} is not finite (GDP = {gdp})")
            }
        }
    }
}

impl core::error::Error for ObservableError {}

/// Evaluates `obs` on the current state.
pub fn eval_observable(world: &WorldState, obs: Observable) -> Result<f64, ObservableError> {
    match obs {
        Observable::Gdp | Observable::LogGdp | Observable::Agr | Observable::AgrTotal => {
            series_observable(obs, world.gdp_series())
        }
        Observable::Steps => Ok(f64::from(world.step_count())),
        Observable::NMiners => Ok(world.n_miners() as f64),
        Observable::NImitators => Ok(world.n_imitators() as f64),
        Observable::NExplorers => Ok(world.n_explorers() as f64),
        Observable::NIslands => Ok(world.islands().len() as f64),
    }
}

/// GDP-derived observables on a bare series whose length is the step count.
///
/// `AGR_total` is `(ln GDP(t) - ln GDP(t0)) / (t - t0 + 1)` where `t0` is the
/// first step with positive GDP.
pub fn series_observable(obs: Observable, gdp: &[f64]) -> Result<f64, ObservableError> {
    let step = gdp.len() as u32;
    let history = |need: u32| {
        if step < need {
            Err(ObservableError::InsufficientHistory { observable: obs, step })
        } else {
            Ok(())
        }
    };
    let ln = |x: f64| {
        if x > 0.0 {
            Ok(libm::log(x))
        } else {
            Err(ObservableError::NonFinite { observable: obs, gdp: x })
        }
    };
    match obs {
        Observable::Gdp => history(1).map(|_| gdp[gdp.len() - 1]),
        Observable::LogGdp => {
            history(1)?;
            ln(gdp[gdp.len() - 1])
        }
        Observable::Agr => {
            history(2)?;
            Ok(gdp[gdp.len() - 1] - gdp[gdp.len() - 2])
        }
        Observable::AgrTotal => {
            history(1)?;
            let end = gdp[gdp.len() - 1];
            let Some(first) = gdp.iter().position(|g| *g > 0.0) else {
                return Err(ObservableError::NonFinite { observable: obs, gdp: end });
            };
            let (ln_end, ln_start) = (ln(end)?, ln(gdp[first])?);
            let t0 = first as f64 + 1.0;
            Ok((ln_end - ln_start) / (f64::from(step) - t0 + 1.0))
        }
        _ => unreachable!("{obs} is not derived from the GDP series"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_names_parse() {
        for (o, n) in Observable::ALL.iter().zip(Observable::NAMES) {
            assert_eq!(n.parse::<Observable>(), Ok(*o));
            assert_eq!(o.name(), n);
        }
        assert!("my_time".parse::<Observable>().is_err());
        assert!("gdp".parse::<Observable>().is_err());
    }

    #[test]
    fn gdp_examples() {
        let v = series_observable(Observable::LogGdp, &[89.44]).unwrap();
        assert!((v - 4.4936).abs() < 1e-4);
        assert_eq!(series_observable(Observable::Agr, &[10.0, 10.0]), Ok(0.0));
        assert_eq!(series_observable(Observable::Gdp, &[3.0, 7.5]), Ok(7.5));
    }

    #[test]
    fn agr_total_formula() {
        let mut series = alloc::vec![1.0; 201];
        series[0] = 2.0f64.exp();
        series[200] = 8.0f64.exp();
        let v = series_observable(Observable::AgrTotal, &series).unwrap();
        assert!((v - 6.0 / 201.0).abs() < 1e-12);
        assert!((v - 0.02985).abs() < 1e-5);
    }

    #[test]
    fn agr_total_skips_leading_zeros() {
        let series = [0.0, 0.0, 1.0, core::f64::consts::E];
        // t0 = 3, t = 4: (1 - 0) / 2
        let v = series_observable(Observable::AgrTotal, &series).unwrap();
        assert!((v - 0.5).abs() < 1e-12);
    }

    #[test]
    fn history_and_finiteness_errors() {
        use ObservableError::*;
        assert!(matches!(series_observable(Observable::Gdp, &[]), Err(InsufficientHistory { .. })));
        assert!(matches!(series_observable(Observable::Agr, &[1.0]), Err(InsufficientHistory { .. })));
        assert!(matches!(series_observable(Observable::LogGdp, &[0.0]), Err(NonFinite { .. })));
        assert!(matches!(series_observable(Observable::AgrTotal, &[0.0, 0.0]), Err(NonFinite { .. })));
        assert!(matches!(series_observable(Observable::AgrTotal, &[1.0, 0.0]), Err(NonFinite { .. })));
    }
}
