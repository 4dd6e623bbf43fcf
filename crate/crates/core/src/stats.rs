//! Running moments and the Student-t / normal distribution functions behind
//! confidence intervals and t-tests.

use core::fmt;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StatsError {
    /// A non-finite sample; carries the run it came from.
    Poisoned { run_index: u64, value: f64 },
    /// Fewer than two samples.
    InsufficientData { n: u64 },
    /// Argument outside the function's domain.
    Domain { what: &'static str, value: f64 },
}

impl fmt::Display for StatsError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StatsError::Poisoned { run_index, value } => {
                write!(f, "non-finite sample {value} from run {run_index}")
            }
            StatsError::InsufficientData { n } => write!(f, "need at least 2 samples, have {n}"),
            StatsError::Domain { what, value } => write!(f, "{what} out of domain: {value}"),
        }
    }
}

impl core::error::Error for StatsError {}

/// Welford running mean and sum of squared deviations.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Accumulator {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Accumulator {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds one sample. Non-finite samples are refused and leave the
    /// accumulator untouched.
    pub fn update(&mut self, x: f64, run_index: u64) -> Result<(), StatsError> {
        if !x.is_finite() {
            return Err(StatsError::Poisoned { run_index, value: x });
        }
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
        Ok(())
    }

    /// Chan et al. pairwise combination.
    pub fn merge(&mut self, other: &Accumulator) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *other;
            return;
        }
        let n = self.n + other.n;
        let delta = other.mean - self.mean;
        let (na, nb) = (self.n as f64, other.n as f64);
        self.mean += delta * nb / n as f64;
        self.m2 += other.m2 + delta * delta * na * nb / n as f64;
        self.n = n;
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance; `None` below two samples.
    pub fn variance(&self) -> Option<f64> {
        (self.n >= 2).then(|| (self.m2 / (self.n - 1) as f64).max(0.0))
    }
}

impl FromIterator<f64> for Accumulator {
    /// Collects finite samples; panics on a non-finite one.
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = Accumulator::new();
        for (i, x) in iter.into_iter().enumerate() {
            acc.update(x, i as u64).expect("finite sample");
        }
        acc
    }
}

/// Half-width of the two-sided `1 - alpha` Student-t interval for the mean.
pub fn ci_halfwidth(acc: &Accumulator, confidence_alpha: f64) -> Result<f64, StatsError> {
    let variance = acc.variance().ok_or(StatsError::InsufficientData { n: acc.n() })?;
    if variance == 0.0 {
        return Ok(0.0);
    }
    let q = t_quantile(1.0 - confidence_alpha / 2.0, (acc.n() - 1) as f64)?;
    Ok(q * libm::sqrt(variance / acc.n() as f64))
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / core::f64::consts::SQRT_2)
}

/// Standard normal quantile: Acklam's rational approximation polished by
/// one Halley step, good to about 1e-15.
pub fn normal_quantile(p: f64) -> Result<f64, StatsError> {
    if !(p > 0.0 && p < 1.0) {
        return Err(StatsError::Domain { what: "probability", value: p });
    }
    const A: [f64; 6] = [
        -3.969_683_028_665_376e1,
        2.209_460_984_245_205e2,
        -2.759_285_104_469_687e2,
        1.383_577_518_672_69e2,
        -3.066_479_806_614_716e1,
        2.506_628_277_459_239,
    ];
    const B: [f64; 5] = [
        -5.447_609_879_822_406e1,
        1.615_858_368_580_409e2,
        -1.556_989_798_598_866e2,
        6.680_131_188_771_972e1,
        -1.328_068_155_288_572e1,
    ];
    const C: [f64; 6] = [
        -7.784_894_002_430_293e-3,
        -3.223_964_580_411_365e-1,
        -2.400_758_277_161_838,
        -2.549_732_539_343_734,
        4.374_664_141_464_968,
        2.938_163_982_698_783,
    ];
    const D: [f64; 4] =
        [7.784_695_709_041_462e-3, 3.224_671_290_700_398e-1, 2.445_134_137_142_996, 3.754_408_661_907_416];
    const LOW: f64 = 0.024_25;

    let x = if p < LOW {
        let q = libm::sqrt(-2.0 * libm::log(p));
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = libm::sqrt(-2.0 * libm::log(1.0 - p));
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };
    let e = normal_cdf(x) - p;
    let u = e * libm::sqrt(core::f64::consts::TAU) * libm::exp(x * x / 2.0);
    Ok(x - u / (1.0 + x * u / 2.0))
}

fn ln_beta(a: f64, b: f64) -> f64 {
    libm::lgamma(a) + libm::lgamma(b) - libm::lgamma(a + b)
}

/// Continued fraction for the incomplete beta (modified Lentz).
fn beta_continued_fraction(a: f64, b: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-16;
    let (qab, qap, qam) = (a + b, a + 1.0, a - 1.0);
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..100_000 {
        let m = f64::from(m);
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Regularized incomplete beta I_x(a, b).
pub fn inc_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let front = libm::exp(a * libm::log(x) + b * libm::log1p(-x) - ln_beta(a, b));
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_continued_fraction(a, b, x) / a
    } else {
        1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b
    }
}

/// Student-t CDF with `df` degrees of freedom (real, > 0).
pub fn t_cdf(t: f64, df: f64) -> f64 {
    if t.is_nan() {
        return f64::NAN;
    }
    if t == f64::INFINITY {
        return 1.0;
    }
    if t == f64::NEG_INFINITY {
        return 0.0;
    }
    // Lower tail mass of |t|, computed on whichever side is better conditioned.
    let t2 = t * t;
    let tail = if t2 < df {
        let x = df / (df + t2);
        0.5 * inc_beta(df / 2.0, 0.5, x)
    } else {
        let x = t2 / (df + t2);
        0.5 * (1.0 - inc_beta(0.5, df / 2.0, x))
    };
    if t > 0.0 {
        1.0 - tail
    } else {
        tail
    }
}

/// Two-sided tail probability P(|T| >= |t|).
pub fn t_two_sided_p(t: f64, df: f64) -> f64 {
    let t2 = t * t;
    if t2.is_infinite() {
        return 0.0;
    }
    let p = if t2 < df {
        inc_beta(df / 2.0, 0.5, df / (df + t2))
    } else {
        1.0 - inc_beta(0.5, df / 2.0, t2 / (df + t2))
    };
    p.clamp(0.0, 1.0)
}

fn t_pdf(t: f64, df: f64) -> f64 {
    let ln_norm = libm::lgamma((df + 1.0) / 2.0) - libm::lgamma(df / 2.0) - 0.5 * libm::log(df * core::f64::consts::PI);
    libm::exp(ln_norm - (df + 1.0) / 2.0 * libm::log1p(t * t / df))
}

/// Student-t quantile: safeguarded Newton iteration on [`t_cdf`], started
/// from the normal quantile and kept inside a shrinking bracket.
pub fn t_quantile(p: f64, df: f64) -> Result<f64, StatsError> {
    if !(p > 0.0 && p < 1.0) {
        return Err(StatsError::Domain { what: "probability", value: p });
    }
    if !(df >= 1.0) {
        return Err(StatsError::Domain { what: "degrees of freedom", value: df });
    }
    if p == 0.5 {
        return Ok(0.0);
    }
    // Solve for the upper half and mirror.
    let (target, sign) = if p > 0.5 { (p, 1.0) } else { (1.0 - p, -1.0) };
    let mut lo = 0.0;
    let mut hi = 1.0;
    while t_cdf(hi, df) < target {
        lo = hi;
        hi *= 2.0;
        if hi > 1e300 {
            return Ok(sign * f64::INFINITY);
        }
    }
    let mut x = normal_quantile(target)?.clamp(lo, hi);
    for _ in 0..200 {
        let f = t_cdf(x, df) - target;
        if f == 0.0 {
            break;
        }
        if f > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        let step = f / t_pdf(x, df);
        let mut next = x - step;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= 1e-14 * x.abs().max(1.0) {
            x = next;
            break;
        }
        x = next;
    }
    Ok(sign * x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn two_pass_variance(xs: &[f64]) -> f64 {
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (xs.len() - 1) as f64
    }

    #[test]
    fn welford_examples() {
        let acc: Accumulator = [1.0, 2.0, 3.0].into_iter().collect();
        assert_eq!(acc.n(), 3);
        assert_eq!(acc.mean(), 2.0);
        assert_eq!(acc.variance(), Some(1.0));

        let single: Accumulator = [5.0].into_iter().collect();
        assert_eq!((single.n(), single.mean(), single.variance()), (1, 5.0, None));
    }

    #[test]
    fn poisoned_update_is_refused() {
        let mut acc = Accumulator::new();
        acc.update(1.0, 0).unwrap();
        let err = acc.update(f64::NEG_INFINITY, 7).unwrap_err();
        assert!(matches!(err, StatsError::Poisoned { run_index: 7, .. }));
        assert_eq!(acc.n(), 1);
    }

    #[test]
    fn law_of_large_numbers() {
        let mut rng = crate::random::sim_rng(99);
        let acc: Accumulator = (0..10_000).map(|_| crate::random::standard_normal(&mut rng)).collect();
        assert!(acc.mean().abs() < 0.05);
        assert!((acc.variance().unwrap() - 1.0).abs() < 0.1);
    }

    #[test]
    fn large_offset_fixture_matches_two_pass() {
        let xs: Vec<f64> = (0..1000).map(|i| 1e5 + f64::from(i % 17) * 0.25).collect();
        let acc: Accumulator = xs.iter().copied().collect();
        let v = two_pass_variance(&xs);
        assert!(((acc.variance().unwrap() - v) / v).abs() < 1e-10);
    }

    #[test]
    fn quantile_examples() {
        assert!((t_quantile(0.975, 29.0).unwrap() - 2.045_229_642).abs() < 1e-6);
        assert_eq!(t_quantile(0.5, 3.0).unwrap(), 0.0);
        assert!((t_quantile(0.975, 1e6).unwrap() - 1.959_966).abs() < 1e-5);
        assert!((t_quantile(0.975, 1.0).unwrap() - 12.706_204_736).abs() < 1e-6);
        assert!((t_quantile(0.025, 10.0).unwrap() + 2.228_138_852).abs() < 1e-6);
        assert!(matches!(t_quantile(0.9, 0.5), Err(StatsError::Domain { .. })));
        assert!(t_quantile(1.0, 5.0).is_err());
    }

    #[test]
    fn normal_quantile_table() {
        assert!((normal_quantile(0.975).unwrap() - 1.959_963_984_540_054).abs() < 1e-12);
        assert!((normal_quantile(0.5).unwrap()).abs() < 1e-15);
        assert!((normal_quantile(0.001).unwrap() + 3.090_232_306_167_813_5).abs() < 1e-10);
    }

    #[test]
    fn halfwidth_examples() {
        let mut acc = Accumulator::new();
        // Thirty samples with variance exactly 4: +-a pattern.
        let a = (4.0f64 * 29.0 / 30.0).sqrt();
        for i in 0..30 {
            acc.update(if i % 2 == 0 { a } else { -a }, i).unwrap();
        }
        assert!((acc.variance().unwrap() - 4.0).abs() < 1e-12);
        let hw = ci_halfwidth(&acc, 0.05).unwrap();
        assert!((hw - 2.045_229_642 * 2.0 / 30f64.sqrt()).abs() < 1e-8, "{hw}");
        assert!((hw - 0.746_88).abs() < 1e-4, "{hw}");

        let flat: Accumulator = [3.0; 30].into_iter().collect();
        assert_eq!(ci_halfwidth(&flat, 0.05), Ok(0.0));

        let one: Accumulator = [3.0].into_iter().collect();
        assert_eq!(ci_halfwidth(&one, 0.05), Err(StatsError::InsufficientData { n: 1 }));
    }

    #[test]
    fn halfwidth_with_variance_seven_and_a_half_misses_unit_width() {
        let scale = (7.5f64 * 29.0 / 30.0).sqrt();
        let acc: Accumulator = (0..30).map(|i| if i % 2 == 0 { scale } else { -scale }).collect();
        let width = 2.0 * ci_halfwidth(&acc, 0.05).unwrap();
        assert!((width - 2.045).abs() < 1e-3, "{width}");
        assert!(width > 1.0);
    }

    proptest! {
        #[test]
        fn merge_equals_sequential(xs in prop::collection::vec(-1e3f64..1e3, 2..200), split in 0usize..200) {
            let split = split.min(xs.len());
            let seq: Accumulator = xs.iter().copied().collect();
            let mut left: Accumulator = xs[..split].iter().copied().collect();
            let right: Accumulator = xs[split..].iter().copied().collect();
            left.merge(&right);
            prop_assert_eq!(left.n(), seq.n());
            let scale = seq.mean().abs().max(1.0);
            prop_assert!((left.mean() - seq.mean()).abs() <= 1e-9 * scale);
            let (vl, vs) = (left.variance().unwrap(), seq.variance().unwrap());
            prop_assert!((vl - vs).abs() <= 1e-9 * vs.max(1e-12));
        }

        #[test]
        fn welford_matches_two_pass(xs in prop::collection::vec(-1e6f64..1e6, 2..300)) {
            let acc: Accumulator = xs.iter().copied().collect();
            let v = two_pass_variance(&xs);
            prop_assert!((acc.variance().unwrap() - v).abs() <= 1e-10 * v.max(1e-300) + 1e-12);
        }

        #[test]
        fn quantile_inverts_cdf(p in 0.001f64..0.999, df in 1.0f64..500.0) {
            let q = t_quantile(p, df).unwrap();
            prop_assert!((t_cdf(q, df) - p).abs() < 1e-10);
        }

        #[test]
        fn halfwidth_shrinks_with_n(var in 0.01f64..100.0, n in 2u64..500) {
            // Same variance, more samples: the interval cannot widen.
            let hw = |n: u64| {
                let q = t_quantile(0.975, (n - 1) as f64).unwrap();
                q * (var / n as f64).sqrt()
            };
            prop_assert!(hw(n + 1) <= hw(n));
        }
    }
}
