use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Smallest `ᾱ_T` the β-parameterized schedules are clipped to.
pub const MIN_ALPHA_BAR: f64 = 1e-5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ScheduleKind {
    /// `1 − ᾱ_t` linear in `t` between `s·α_min` and `s·α_max`.
    LinearVariance,
    /// `β_t` linear in `t` between `s·α_min` and `s·α_max`.
    Linear,
    /// Squared-cosine `ᾱ` with offset 0.008, `β ≤ 0.999`.
    Cosine,
    /// `β_t = 1/(T − t + 2)`.
    Binomial,
}

impl ScheduleKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ScheduleKind::LinearVariance => "linear_variance",
            ScheduleKind::Linear => "linear",
            ScheduleKind::Cosine => "cosine",
            ScheduleKind::Binomial => "binomial",
        }
    }
}

impl std::str::FromStr for ScheduleKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear_variance" => Ok(ScheduleKind::LinearVariance),
            "linear" => Ok(ScheduleKind::Linear),
            "cosine" => Ok(ScheduleKind::Cosine),
            "binomial" => Ok(ScheduleKind::Binomial),
            other => Err(Error::Contract(format!("unknown schedule `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScheduleConfig {
    pub steps: usize,
    pub scale: f64,
    pub alpha_min: f64,
    pub alpha_max: f64,
    pub kind: ScheduleKind,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        Self {
            steps: 20,
            scale: 1e-3,
            alpha_min: 1e-4,
            alpha_max: 1e-2,
            kind: ScheduleKind::LinearVariance,
        }
    }
}

impl ScheduleConfig {
    pub fn build<S: Scalar>(&self) -> Result<NoiseSchedule<S>> {
        NoiseSchedule::new(*self)
    }
}

/// Precomputed diffusion coefficients for `t = 0..=T` with `ᾱ_0 = 1`.
///
/// `1 − ᾱ_t` is stored directly rather than derived from `ᾱ_t`: the small-noise
/// schedules live around `1 − 10⁻⁵`, where subtracting from one would discard
/// most significant digits.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseSchedule<S> {
    config: ScheduleConfig,
    one_minus_alpha_bar: Vec<S>,
    beta: Vec<S>,
}

fn linear_ramp(t: usize, steps: usize, lo: f64, hi: f64) -> f64 {
    if steps == 1 {
        lo
    } else {
        lo + (t - 1) as f64 / (steps - 1) as f64 * (hi - lo)
    }
}

impl<S: Scalar> NoiseSchedule<S> {
    pub fn new(config: ScheduleConfig) -> Result<Self> {
        let steps = config.steps;
        if steps == 0 {
            return Err(Error::InvalidSchedule("T must be at least 1".into()));
        }
        let (s, lo, hi) = (config.scale, config.alpha_min, config.alpha_max);
        if matches!(config.kind, ScheduleKind::LinearVariance | ScheduleKind::Linear) {
            if !(s > 0.0 && s < 1.0) {
                return Err(Error::InvalidSchedule(format!("noise scale {s} outside (0, 1)")));
            }
            if !(lo > 0.0 && lo < hi) {
                return Err(Error::InvalidSchedule(format!("need 0 < alpha_min < alpha_max, got {lo}, {hi}")));
            }
        }

        let mut oma = vec![S::zero(); steps + 1];
        let mut beta = vec![S::zero(); steps + 1];
        match config.kind {
            ScheduleKind::LinearVariance => {
                for t in 1..=steps {
                    oma[t] = S::of(s) * (S::of(lo) + S::of(linear_ramp(t, steps, 0.0, 1.0)) * (S::of(hi) - S::of(lo)));
                    // β_t = (ᾱ_{t−1} − ᾱ_t)/ᾱ_{t−1}
                    beta[t] = (oma[t] - oma[t - 1]) / (S::one() - oma[t - 1]);
                }
            }
            kind => {
                let raw: Vec<f64> = (1..=steps)
                    .map(|t| match kind {
                        ScheduleKind::Linear => s * linear_ramp(t, steps, lo, hi),
                        ScheduleKind::Cosine => {
                            let f = |tau: f64| ((tau + 0.008) / 1.008 * std::f64::consts::FRAC_PI_2).cos().powi(2);
                            (1.0 - f(t as f64 / steps as f64) / f((t - 1) as f64 / steps as f64)).min(0.999)
                        }
                        ScheduleKind::Binomial => 1.0 / (steps - t + 2) as f64,
                        ScheduleKind::LinearVariance => unreachable!(),
                    })
                    .collect();
                for t in 1..=steps {
                    let alpha_bar_prev = S::one() - oma[t - 1];
                    let cap = S::one() - S::of(MIN_ALPHA_BAR) / alpha_bar_prev;
                    let b = S::of(raw[t - 1]).min(cap);
                    beta[t] = b;
                    oma[t] = oma[t - 1] + b - b * oma[t - 1];
                }
            }
        }

        let sched = Self {
            config,
            one_minus_alpha_bar: oma,
            beta,
        };
        sched.check()?;
        Ok(sched)
    }

    fn check(&self) -> Result<()> {
        for t in 1..=self.steps() {
            let v = self.one_minus_alpha_bar[t];
            if !(v > S::zero() && v < S::one()) || !v.is_finite() {
                return Err(Error::InvalidSchedule(format!("alpha_bar_{t} = {} outside (0, 1)", S::one() - v)));
            }
            if v <= self.one_minus_alpha_bar[t - 1] {
                return Err(Error::InvalidSchedule(format!("alpha_bar is not strictly decreasing at t = {t}")));
            }
            let b = self.beta[t];
            if !(b > S::zero() && b < S::one()) {
                return Err(Error::InvalidSchedule(format!("beta_{t} = {b} outside (0, 1)")));
            }
        }
        Ok(())
    }

    pub fn config(&self) -> ScheduleConfig {
        self.config
    }

    #[inline]
    pub fn steps(&self) -> usize {
        self.config.steps
    }

    #[inline]
    pub fn one_minus_alpha_bar(&self, t: usize) -> S {
        self.one_minus_alpha_bar[t]
    }

    #[inline]
    pub fn alpha_bar(&self, t: usize) -> S {
        S::one() - self.one_minus_alpha_bar[t]
    }

    /// `β_t` for `t ≥ 1` (zero at `t = 0`).
    #[inline]
    pub fn beta(&self, t: usize) -> S {
        self.beta[t]
    }

    #[inline]
    pub fn alpha(&self, t: usize) -> S {
        S::one() - self.beta[t]
    }

    /// Posterior variance `β̃_t = β_t (1 − ᾱ_{t−1}) / (1 − ᾱ_t)`.
    pub fn posterior_variance(&self, t: usize) -> S {
        self.beta[t] * self.one_minus_alpha_bar[t - 1] / self.one_minus_alpha_bar[t]
    }

    /// Coefficients `(c_t, c_0)` of the posterior mean `c_t·x_t + c_0·x̂_0`.
    pub fn posterior_coefficients(&self, t: usize) -> (S, S) {
        let denom = self.one_minus_alpha_bar[t];
        (
            self.alpha(t).sqrt() * self.one_minus_alpha_bar[t - 1] / denom,
            self.alpha_bar(t - 1).sqrt() * self.beta[t] / denom,
        )
    }

    /// Builds a schedule straight from `1 − ᾱ_t` values (`t = 1..=T`).
    pub fn from_one_minus_alpha_bar(config: ScheduleConfig, values: &[S]) -> Result<Self> {
        let mut oma = vec![S::zero()];
        oma.extend_from_slice(values);
        let beta = (0..oma.len())
            .map(|t| if t == 0 { S::zero() } else { (oma[t] - oma[t - 1]) / (S::one() - oma[t - 1]) })
            .collect();
        let sched = Self {
            config: ScheduleConfig { steps: values.len(), ..config },
            one_minus_alpha_bar: oma,
            beta,
        };
        sched.check()?;
        Ok(sched)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lv(steps: usize, scale: f64, lo: f64, hi: f64) -> ScheduleConfig {
        ScheduleConfig {
            steps,
            scale,
            alpha_min: lo,
            alpha_max: hi,
            kind: ScheduleKind::LinearVariance,
        }
    }

    #[test]
    fn endpoints_of_linear_variance() {
        let s: NoiseSchedule<f64> = lv(10, 1e-3, 1e-4, 1e-2).build().unwrap();
        assert!((s.one_minus_alpha_bar(1) - 1e-7).abs() < 1e-20);
        assert!((s.one_minus_alpha_bar(10) - 1e-5).abs() < 1e-20);
        assert_eq!(s.posterior_variance(1), 0.0);
    }

    #[test]
    fn single_step_collapses_to_alpha_min() {
        let s: NoiseSchedule<f64> = lv(1, 1e-3, 1e-4, 1e-2).build().unwrap();
        assert_eq!(s.steps(), 1);
        assert!((s.one_minus_alpha_bar(1) - 1e-7).abs() < 1e-20);
    }

    #[test]
    fn posterior_terms_for_hand_computed_pair() {
        let s = NoiseSchedule::<f64>::from_one_minus_alpha_bar(ScheduleConfig::default(), &[0.1, 0.2]).unwrap();
        assert!((s.alpha(2) - 8.0 / 9.0).abs() < 1e-15);
        assert!((s.posterior_variance(2) - 1.0 / 18.0).abs() < 1e-15);
        let (ct, c0) = s.posterior_coefficients(2);
        assert!((ct - (8.0f64 / 9.0).sqrt() * 0.1 / 0.2).abs() < 1e-15);
        assert!((c0 - 0.9f64.sqrt() * (1.0 / 9.0) / 0.2).abs() < 1e-15);
        assert!((ct - 0.4714).abs() < 1e-4 && (c0 - 0.5270).abs() < 1e-4);
    }

    #[test]
    fn final_reverse_coefficients_are_zero_and_one() {
        let s: NoiseSchedule<f64> = lv(5, 1e-3, 1e-4, 1e-2).build().unwrap();
        assert_eq!(s.posterior_coefficients(1), (0.0, 1.0));
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        assert!(lv(0, 1e-3, 1e-4, 1e-2).build::<f64>().is_err());
        assert!(lv(10, 1.5, 1e-4, 1e-2).build::<f64>().is_err());
        assert!(lv(10, 1e-3, 1e-2, 1e-4).build::<f64>().is_err());
        assert!(lv(10, 1e-3, 1e-3, 1e-3).build::<f64>().is_err());
        assert!(NoiseSchedule::<f64>::from_one_minus_alpha_bar(ScheduleConfig::default(), &[0.2, 0.1]).is_err());
    }

    #[test]
    fn alternative_schedules_are_valid_and_clipped() {
        for kind in [ScheduleKind::Linear, ScheduleKind::Cosine, ScheduleKind::Binomial] {
            for steps in [1, 2, 10, 60, 100] {
                let cfg = ScheduleConfig { steps, kind, ..ScheduleConfig::default() };
                let s: NoiseSchedule<f64> = cfg.build().unwrap();
                assert!(s.alpha_bar(steps) >= MIN_ALPHA_BAR * (1.0 - 1e-9), "{kind:?} T={steps}");
                for t in 1..=steps {
                    assert!(s.alpha_bar(t) < s.alpha_bar(t - 1));
                }
            }
        }
        let b: NoiseSchedule<f64> = ScheduleConfig { steps: 4, kind: ScheduleKind::Binomial, ..Default::default() }
            .build()
            .unwrap();
        assert!((b.beta(1) - 0.2).abs() < 1e-15 && (b.beta(4) - 0.5).abs() < 1e-15);
        assert!((b.alpha_bar(4) - 0.2).abs() < 1e-15);
    }

    #[test]
    fn linear_beta_ramp() {
        let s: NoiseSchedule<f64> = ScheduleConfig { steps: 3, kind: ScheduleKind::Linear, ..Default::default() }
            .build()
            .unwrap();
        assert!((s.beta(1) - 1e-7).abs() < 1e-20);
        assert!((s.beta(3) - 1e-5).abs() < 1e-20);
        let expected = 1.0 - (1.0 - 1e-7) * (1.0 - (1e-7 + 1e-5) / 2.0) * (1.0 - 1e-5);
        assert!((s.one_minus_alpha_bar(3) - expected).abs() < 1e-15);
    }
}
