use super::{show, ConformalError};
use crate::float::Real;

/// Worst-case gap between realized mean miscoverage and the target level
/// for an intermittent quantile-tracking run.
///
/// Evaluates `(B + max_t gamma_t / p_t) / T * || delta ||_1`, where
/// `delta_1 = 1 / gamma_1` and `delta_t = 1 / gamma_t - 1 / gamma_{t-1}`.
/// `B` bounds the score range; larger applied steps or a wobblier step-size
/// sequence loosen the guarantee.
pub fn coverage_bound<F: Real>(
    bound_b: F,
    gammas: &[F],
    ps: &[F],
) -> Result<F, ConformalError> {
    if gammas.is_empty() || ps.is_empty() {
        return Err(ConformalError::EmptySequence);
    }
    if gammas.len() != ps.len() {
        return Err(ConformalError::SequenceLengthMismatch {
            gammas: gammas.len(),
            ps: ps.len(),
        });
    }
    if !(bound_b > F::zero()) {
        return Err(ConformalError::InvalidBound(show(bound_b)));
    }
    let mut max_ratio = F::zero();
    let mut delta_l1 = F::zero();
    let mut prev_inv: Option<F> = None;
    for (&gamma, &p) in gammas.iter().zip(ps) {
        if !(gamma.is_finite() && gamma > F::zero()) {
            return Err(ConformalError::InvalidStepSize(show(gamma)));
        }
        if !(p > F::zero() && p <= F::one()) {
            return Err(ConformalError::InvalidProbability(show(p)));
        }
        max_ratio = max_ratio.max(gamma / p);
        let inv = F::one() / gamma;
        delta_l1 = delta_l1
            + match prev_inv {
                None => inv.abs(),
                Some(prev) => (inv - prev).abs(),
            };
        prev_inv = Some(inv);
    }
    let t = F::from(gammas.len()).expect("sequence length fits scalar");
    Ok((bound_b + max_ratio) / t * delta_l1)
}
