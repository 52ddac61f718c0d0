//! Online conformal calibration with intermittently observed labels.
//!
//! The quantile trackers here adjust interval radii by online gradient steps
//! on the quantile loss. Labels may arrive only on a random subset of steps;
//! when a label is missing the trackers make no change, and when it arrives
//! the step is rescaled by the observation probability so that long-run
//! coverage still converges to the requested level.

mod aci;
mod bound;
mod schedule;
mod tracker;

pub use aci::{weighted_empirical_quantile, AciStepOutcome, AciTracker};
pub use bound::coverage_bound;
pub use schedule::{GammaSchedule, GammaVariant, DEFAULT_B_HAT};
pub use tracker::{
    ScalarTracker, StepOutcome, TrackerSnapshot, VectorIntervalTracker, VectorStepOutcome,
};

use thiserror::Error;

use crate::float::Real;

/// Errors from constructing or driving conformal trackers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConformalError {
    #[error("observation probability must lie in (0, 1], got {0}")]
    InvalidProbability(f64),
    #[error("alpha must lie in (0, 1), got {0}")]
    InvalidAlpha(f64),
    #[error("initial alpha must lie in [0, 1], got {0}")]
    InvalidInitialAlpha(f64),
    #[error("step-size parameter must be positive and finite, got {0}")]
    InvalidStepSize(f64),
    #[error("lookback window must hold at least one entry")]
    EmptyLookback,
    #[error("score bound must be positive, got {0}")]
    InvalidBound(f64),
    #[error("initial quantile {q0} outside [0, {bound}]")]
    InitialQuantileOutOfRange { q0: f64, bound: f64 },
    #[error("score must be finite, got {0}")]
    NonFiniteScore(f64),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("empty score window")]
    EmptyWindow,
    #[error("empty sequence")]
    EmptySequence,
    #[error("sequence length mismatch: gammas {gammas}, ps {ps}")]
    SequenceLengthMismatch { gammas: usize, ps: usize },
}

pub(crate) fn show<F: Real>(x: F) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

fn check_probability<F: Real>(p: F) -> Result<(), ConformalError> {
    if !(p > F::zero() && p <= F::one()) {
        return Err(ConformalError::InvalidProbability(show(p)));
    }
    Ok(())
}

fn check_score<F: Real>(s: F) -> Result<(), ConformalError> {
    if !s.is_finite() {
        return Err(ConformalError::NonFiniteScore(show(s)));
    }
    Ok(())
}

/// A timestep's label-observation outcome for a scalar tracker.
///
/// `p` is the probability with which the label would be revealed at this
/// step; it must be strictly positive so the rescaled update stays finite.
/// A score is carried if and only if the label was actually observed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObservationEvent<F> {
    observed: bool,
    p: F,
    score: Option<F>,
}

impl<F: Real> ObservationEvent<F> {
    /// An observed label with its nonconformity score.
    pub fn observed(p: F, score: F) -> Result<Self, ConformalError> {
        check_probability(p)?;
        check_score(score)?;
        Ok(Self {
            observed: true,
            p,
            score: Some(score),
        })
    }

    /// A step on which the label stayed hidden.
    pub fn unobserved(p: F) -> Result<Self, ConformalError> {
        check_probability(p)?;
        Ok(Self {
            observed: false,
            p,
            score: None,
        })
    }

    pub fn is_observed(&self) -> bool {
        self.observed
    }

    pub fn p(&self) -> F {
        self.p
    }

    pub fn score(&self) -> Option<F> {
        self.score
    }
}

/// Per-dimension lower/upper residual scores for a vector tracker.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorObservationEvent<F> {
    observed: bool,
    p: F,
    scores_lo: Vec<F>,
    scores_hi: Vec<F>,
}

impl<F: Real> VectorObservationEvent<F> {
    pub fn observed(p: F, scores_lo: Vec<F>, scores_hi: Vec<F>) -> Result<Self, ConformalError> {
        check_probability(p)?;
        if scores_lo.len() != scores_hi.len() {
            return Err(ConformalError::DimensionMismatch {
                expected: scores_lo.len(),
                got: scores_hi.len(),
            });
        }
        for &s in scores_lo.iter().chain(scores_hi.iter()) {
            check_score(s)?;
        }
        Ok(Self {
            observed: true,
            p,
            scores_lo,
            scores_hi,
        })
    }

    pub fn unobserved(p: F) -> Result<Self, ConformalError> {
        check_probability(p)?;
        Ok(Self {
            observed: false,
            p,
            scores_lo: Vec::new(),
            scores_hi: Vec::new(),
        })
    }

    pub fn is_observed(&self) -> bool {
        self.observed
    }

    pub fn p(&self) -> F {
        self.p
    }

    pub fn scores_lo(&self) -> &[F] {
        &self.scores_lo
    }

    pub fn scores_hi(&self) -> &[F] {
        &self.scores_hi
    }
}

/// Signed residual pair: `(prediction - label, label - prediction)`.
///
/// The first component scores the interval's lower side, the second its
/// upper side; they are always negatives of each other.
pub fn score_signed_residual<F: Real>(prediction: F, label: F) -> (F, F) {
    (prediction - label, label - prediction)
}

/// Miscoverage indicator: true iff the score exceeds the tracked quantile.
///
/// The boundary `score == q` counts as covered.
pub fn coverage_error<F: Real>(score: F, q: F) -> bool {
    score > q
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn signed_residual_examples() {
        assert_eq!(score_signed_residual(5.0, 3.0), (2.0, -2.0));
        assert_eq!(score_signed_residual(3.0, 3.0), (0.0, 0.0));
        assert_eq!(score_signed_residual(1.5, 4.0), (-2.5, 2.5));
    }

    #[test]
    fn signed_residual_sides_are_negatives() {
        for (p, l) in [(0.3, -1.2), (-4.0, 2.5), (0.0, 0.0), (1e6, -1e6)] {
            let (lo, hi) = score_signed_residual(p, l);
            assert_eq!(lo, -hi);
        }
    }

    #[test]
    fn coverage_error_examples() {
        assert!(coverage_error(2.0, 1.0));
        // Boundary is covered.
        assert!(!coverage_error(1.0, 1.0));
        assert!(!coverage_error(-0.5, 0.0));
    }

    #[test]
    fn event_rejects_bad_probability() {
        assert!(ObservationEvent::observed(0.0, 1.0).is_err());
        assert!(ObservationEvent::observed(-0.1, 1.0).is_err());
        assert!(ObservationEvent::observed(1.5, 1.0).is_err());
        assert!(ObservationEvent::unobserved(f64::NAN).is_err());
        assert!(ObservationEvent::observed(1.0, 1.0).is_ok());
        assert!(ObservationEvent::observed(f64::MIN_POSITIVE, 1.0).is_ok());
    }

    #[test]
    fn event_score_present_iff_observed() {
        let e = ObservationEvent::observed(0.5, 2.0).unwrap();
        assert!(e.is_observed() && e.score() == Some(2.0));
        let u = ObservationEvent::<f64>::unobserved(0.5).unwrap();
        assert!(!u.is_observed() && u.score().is_none());
    }

    #[test]
    fn vector_event_checks_lengths_and_scores() {
        assert!(VectorObservationEvent::observed(0.5, vec![1.0, 2.0], vec![3.0]).is_err());
        assert!(VectorObservationEvent::observed(0.5, vec![1.0], vec![f64::INFINITY]).is_err());
        let e = VectorObservationEvent::observed(0.5, vec![1.0, 2.0], vec![-1.0, -2.0]).unwrap();
        assert_eq!(e.scores_lo(), &[1.0, 2.0]);
    }
}
