use std::collections::VecDeque;

use super::{show, ConformalError};
use crate::float::{lit, Real};

/// Scale estimate used before any score has been observed.
pub const DEFAULT_B_HAT: f64 = 1.0;

/// Floor keeping the emitted step strictly positive when every observed
/// score is exactly zero.
const MIN_B_HAT: f64 = 1e-12;

/// How the (pre-division) step size is produced at each timestep.
#[derive(Debug, Clone)]
pub enum GammaVariant<F> {
    /// Fixed base step size.
    Constant { gamma: F },
    /// Base step `lr * b_hat`, where `b_hat` is the largest score magnitude
    /// over the last `lookback` observation events.
    LookbackScaled {
        lr: F,
        lookback: usize,
        window: VecDeque<F>,
    },
}

/// Step-size schedule for the quantile update.
///
/// With `p_dependent = true` the update applies the full `gamma_t / p_t`
/// division, so steps grow when labels are rare. With `p_dependent = false`
/// the schedule folds a factor of `p_t` into `gamma_t`, the division cancels,
/// and the applied step is independent of the observation probability.
#[derive(Debug, Clone)]
pub struct GammaSchedule<F> {
    variant: GammaVariant<F>,
    p_dependent: bool,
}

impl<F: Real> GammaSchedule<F> {
    fn check_positive(x: F) -> Result<(), ConformalError> {
        if !(x.is_finite() && x > F::zero()) {
            return Err(ConformalError::InvalidStepSize(show(x)));
        }
        Ok(())
    }

    /// Constant `gamma_t = gamma`, applied as `gamma / p_t`.
    pub fn constant(gamma: F) -> Result<Self, ConformalError> {
        Self::check_positive(gamma)?;
        Ok(Self {
            variant: GammaVariant::Constant { gamma },
            p_dependent: true,
        })
    }

    /// Constant base scaled by the observation probability,
    /// `gamma_t = gamma * p_t`, so the applied step is exactly `gamma`.
    ///
    /// With `gamma = 1` this is the `gamma_t = p_t` schedule whose update
    /// reduces to `q + (err - alpha)` on observed steps.
    pub fn constant_scaled_by_p(gamma: F) -> Result<Self, ConformalError> {
        Self::check_positive(gamma)?;
        Ok(Self {
            variant: GammaVariant::Constant { gamma },
            p_dependent: false,
        })
    }

    /// Lookback-scaled schedule with explicit probability dependence.
    pub fn lookback(lr: F, lookback: usize, p_dependent: bool) -> Result<Self, ConformalError> {
        Self::check_positive(lr)?;
        if lookback == 0 {
            return Err(ConformalError::EmptyLookback);
        }
        Ok(Self {
            variant: GammaVariant::LookbackScaled {
                lr,
                lookback,
                window: VecDeque::with_capacity(lookback),
            },
            p_dependent,
        })
    }

    /// Probability-independent variant: `gamma_t = lr * b_hat * p_t`.
    pub fn iqt_pi(lr: F, lookback: usize) -> Result<Self, ConformalError> {
        Self::lookback(lr, lookback, false)
    }

    /// Probability-dependent variant: `gamma_t = lr * b_hat`.
    pub fn iqt_pd(lr: F, lookback: usize) -> Result<Self, ConformalError> {
        Self::lookback(lr, lookback, true)
    }

    pub fn is_p_dependent(&self) -> bool {
        self.p_dependent
    }

    /// Current lookback scale, if this schedule uses one.
    pub fn b_hat(&self) -> Option<F> {
        match &self.variant {
            GammaVariant::Constant { .. } => None,
            GammaVariant::LookbackScaled { window, .. } => {
                if window.is_empty() {
                    Some(lit(DEFAULT_B_HAT))
                } else {
                    let max = window.iter().cloned().fold(F::zero(), F::max);
                    Some(max.max(lit(MIN_B_HAT)))
                }
            }
        }
    }

    fn base(&self) -> F {
        match &self.variant {
            GammaVariant::Constant { gamma } => *gamma,
            GammaVariant::LookbackScaled { lr, .. } => {
                *lr * self.b_hat().expect("lookback schedule has b_hat")
            }
        }
    }

    /// The schedule's `gamma_t` for a step with observation probability `p`.
    pub fn gamma(&self, p: F) -> F {
        if self.p_dependent {
            self.base()
        } else {
            self.base() * p
        }
    }

    /// The applied step `gamma_t / p_t`.
    pub fn effective_step(&self, p: F) -> F {
        if self.p_dependent {
            self.base() / p
        } else {
            self.base()
        }
    }

    /// Record an observed score's magnitude into the lookback window.
    /// No-op for constant schedules and for unobserved steps (callers only
    /// invoke this when a label arrived).
    pub fn record_score(&mut self, score: F) {
        if let GammaVariant::LookbackScaled {
            lookback, window, ..
        } = &mut self.variant
        {
            if window.len() == *lookback {
                window.pop_front();
            }
            window.push_back(score.abs());
        }
    }

    pub fn window_len(&self) -> Option<usize> {
        match &self.variant {
            GammaVariant::Constant { .. } => None,
            GammaVariant::LookbackScaled { window, .. } => Some(window.len()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_schedule_divides_by_p() {
        let s = GammaSchedule::constant(0.1).unwrap();
        assert_eq!(s.gamma(0.5), 0.1);
        assert_eq!(s.effective_step(0.5), 0.2);
        assert_eq!(s.effective_step(1.0), 0.1);
    }

    #[test]
    fn constant_scaled_by_p_cancels() {
        let s = GammaSchedule::constant_scaled_by_p(1.0).unwrap();
        assert_eq!(s.gamma(0.25), 0.25);
        assert_eq!(s.effective_step(0.25), 1.0);
    }

    #[test]
    fn b_hat_defaults_then_tracks_window_max() {
        let mut s = GammaSchedule::iqt_pd(0.5, 3).unwrap();
        assert_eq!(s.b_hat(), Some(DEFAULT_B_HAT));
        s.record_score(-2.0);
        assert_eq!(s.b_hat(), Some(2.0));
        s.record_score(0.5);
        s.record_score(0.1);
        assert_eq!(s.b_hat(), Some(2.0));
        // Window of 3: the 2.0 falls out.
        s.record_score(0.2);
        assert_eq!(s.b_hat(), Some(0.5));
        assert_eq!(s.window_len(), Some(3));
    }

    #[test]
    fn effective_step_stays_positive_on_zero_scores() {
        let mut s = GammaSchedule::iqt_pd(1.0, 4).unwrap();
        s.record_score(0.0);
        s.record_score(0.0);
        assert!(s.effective_step(0.1) > 0.0);
        assert!(s.gamma(0.1) > 0.0);
    }

    #[test]
    fn pi_and_pd_agree_at_p_one() {
        let mut pi = GammaSchedule::iqt_pi(0.3, 5).unwrap();
        let mut pd = GammaSchedule::iqt_pd(0.3, 5).unwrap();
        for s in [1.0, -0.4, 2.2] {
            pi.record_score(s);
            pd.record_score(s);
        }
        assert_eq!(pi.effective_step(1.0), pd.effective_step(1.0));
        assert_eq!(pi.gamma(1.0), pd.gamma(1.0));
    }

    #[test]
    fn rejects_nonpositive_parameters() {
        assert!(GammaSchedule::constant(0.0).is_err());
        assert!(GammaSchedule::constant(f64::NAN).is_err());
        assert!(GammaSchedule::lookback(-1.0, 5, true).is_err());
        assert!(GammaSchedule::lookback(0.1, 0, true).is_err());
    }
}
