use std::collections::VecDeque;

use super::{show, ConformalError, ObservationEvent};
use crate::float::Real;

/// Empirical quantile of observed scores, each inverse-weighted by its
/// observation probability.
///
/// Returns `inf { m : (1/n) * sum_i (1/p_i) * 1[s_i <= m] >= level }` over
/// the window of `(score, p)` pairs. By convention the result is negative
/// infinity for `level <= 0` and positive infinity when `level` exceeds the
/// achievable weighted mass.
pub fn weighted_empirical_quantile<F: Real>(
    window: &[(F, F)],
    level: F,
) -> Result<F, ConformalError> {
    if window.is_empty() {
        if level < F::zero() {
            return Ok(F::neg_infinity());
        }
        if level <= F::one() {
            return Err(ConformalError::EmptyWindow);
        }
        return Ok(F::infinity());
    }
    if level <= F::zero() {
        return Ok(F::neg_infinity());
    }
    let n = F::from(window.len()).expect("window length fits scalar");
    let mut sorted: Vec<(F, F)> = window.to_vec();
    sorted.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("scores are comparable"));
    let mut mass = F::zero();
    for (score, p) in sorted {
        mass = mass + (F::one() / p) / n;
        if mass >= level {
            return Ok(score);
        }
    }
    Ok(F::infinity())
}

/// Intermittent adaptive-alpha tracker.
///
/// Instead of moving the quantile, this adjusts the working miscoverage
/// level `alpha_t`; the interval radius is read off the weighted empirical
/// quantile of observed scores at level `1 - alpha_t`. Unobserved steps make
/// no change.
#[derive(Debug, Clone)]
pub struct AciTracker<F> {
    alpha_t: F,
    gamma: F,
    target_alpha: F,
    window: VecDeque<(F, F)>,
    lookback_k: usize,
    min_p: F,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AciStepOutcome<F> {
    pub observed: bool,
    /// Miscoverage indicator against the pre-update threshold, when observed.
    pub err: Option<bool>,
    /// Interval radius in effect for this step.
    pub threshold: F,
    pub alpha_t: F,
}

impl<F: Real> AciTracker<F> {
    pub fn new(
        alpha0: F,
        gamma: F,
        target_alpha: F,
        lookback_k: usize,
    ) -> Result<Self, ConformalError> {
        if !(alpha0 >= F::zero() && alpha0 <= F::one()) {
            return Err(ConformalError::InvalidInitialAlpha(show(alpha0)));
        }
        if !(gamma.is_finite() && gamma > F::zero()) {
            return Err(ConformalError::InvalidStepSize(show(gamma)));
        }
        if !(target_alpha > F::zero() && target_alpha < F::one()) {
            return Err(ConformalError::InvalidAlpha(show(target_alpha)));
        }
        if lookback_k == 0 {
            return Err(ConformalError::EmptyLookback);
        }
        Ok(Self {
            alpha_t: alpha0,
            gamma,
            target_alpha,
            window: VecDeque::with_capacity(lookback_k),
            lookback_k,
            min_p: F::one(),
        })
    }

    pub fn alpha_t(&self) -> F {
        self.alpha_t
    }

    pub fn gamma(&self) -> F {
        self.gamma
    }

    pub fn target_alpha(&self) -> F {
        self.target_alpha
    }

    /// Running minimum of the observation probabilities seen so far.
    pub fn min_p(&self) -> F {
        self.min_p
    }

    pub fn window_len(&self) -> usize {
        self.window.len()
    }

    /// Current interval radius: the weighted empirical quantile at level
    /// `1 - alpha_t`. Levels outside `[0, 1]` are forced to the trivial
    /// radii (`+inf` above one, `-inf` below zero) even when the weighted
    /// mass could reach them; the boundedness of `alpha_t` depends on that.
    /// Before any score is observed the radius is infinite.
    pub fn threshold(&self) -> F {
        let level = F::one() - self.alpha_t;
        if level > F::one() {
            return F::infinity();
        }
        if level < F::zero() {
            return F::neg_infinity();
        }
        let window: Vec<(F, F)> = self.window.iter().cloned().collect();
        match weighted_empirical_quantile(&window, level) {
            Ok(v) => v,
            Err(ConformalError::EmptyWindow) => F::infinity(),
            Err(_) => unreachable!("only the empty window can fail here"),
        }
    }

    /// One intermittent update of `alpha_t`.
    pub fn iaci_step(&mut self, event: &ObservationEvent<F>) -> AciStepOutcome<F> {
        let p = event.p();
        self.min_p = self.min_p.min(p);
        let threshold = self.threshold();
        if !event.is_observed() {
            return AciStepOutcome {
                observed: false,
                err: None,
                threshold,
                alpha_t: self.alpha_t,
            };
        }
        let score = event.score().expect("observed event carries a score");
        // A +inf threshold always covers, a -inf threshold never does.
        let err = score > threshold;
        let ind = if err { F::one() } else { F::zero() };
        self.alpha_t = self.alpha_t + (self.gamma / p) * (self.target_alpha - ind);
        if self.window.len() == self.lookback_k {
            self.window.pop_front();
        }
        self.window.push_back((score, p));
        AciStepOutcome {
            observed: true,
            err: Some(err),
            threshold,
            alpha_t: self.alpha_t,
        }
    }
}
