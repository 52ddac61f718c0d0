//! Autoregressive point forecaster used as the base model for the
//! time-series benchmark.

use thiserror::Error;

use crate::float::{lit, Real};

/// Ridge term added to the normal equations. Constant or perfectly
/// collinear lag histories otherwise make them singular.
const RIDGE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ForecastError {
    #[error("need at least {needed} points to fit an order-{order} model, got {got}")]
    InsufficientHistory {
        order: usize,
        needed: usize,
        got: usize,
    },
    #[error("order must be at least one")]
    ZeroOrder,
    #[error("lag vector must have length {expected}, got {got}")]
    WrongLagLength { expected: usize, got: usize },
    #[error("history contains a non-finite value")]
    NonFiniteHistory,
    #[error("normal equations could not be solved")]
    SingularSystem,
}

/// Least-squares autoregressive model with an intercept.
///
/// `coefficients[0]` is the intercept; `coefficients[k]` multiplies the
/// k-th lag. Lag vectors are ordered most recent first: `recent[0]` is the
/// value one step back.
#[derive(Debug, Clone, PartialEq)]
pub struct ArModel<F> {
    order: usize,
    coefficients: Vec<F>,
}

impl<F: Real> ArModel<F> {
    /// Fit by ordinary least squares on the lagged design matrix, with a
    /// tiny ridge term for numerical safety. Deterministic for fixed input.
    /// `fit_window` caps the history to its most recent values.
    pub fn fit(
        order: usize,
        history: &[F],
        fit_window: Option<usize>,
    ) -> Result<Self, ForecastError> {
        if order == 0 {
            return Err(ForecastError::ZeroOrder);
        }
        let history = match fit_window {
            Some(w) if history.len() > w => &history[history.len() - w..],
            _ => history,
        };
        let n = history.len();
        if n < order + 1 {
            return Err(ForecastError::InsufficientHistory {
                order,
                needed: order + 1,
                got: n,
            });
        }
        if history.iter().any(|v| !v.is_finite()) {
            return Err(ForecastError::NonFiniteHistory);
        }

        // Normal equations X'X c = X'y over rows
        // [1, y_{t-1}, ..., y_{t-order}] -> y_t.
        let dim = order + 1;
        let mut xtx = vec![vec![F::zero(); dim]; dim];
        let mut xty = vec![F::zero(); dim];
        let mut row = vec![F::zero(); dim];
        for t in order..n {
            row[0] = F::one();
            for k in 0..order {
                row[1 + k] = history[t - 1 - k];
            }
            let y = history[t];
            for i in 0..dim {
                xty[i] = xty[i] + row[i] * y;
                for j in i..dim {
                    xtx[i][j] = xtx[i][j] + row[i] * row[j];
                }
            }
        }
        for i in 0..dim {
            for j in 0..i {
                xtx[i][j] = xtx[j][i];
            }
            xtx[i][i] = xtx[i][i] + lit(RIDGE);
        }
        let coefficients = solve(xtx, xty).ok_or(ForecastError::SingularSystem)?;
        Ok(Self {
            order,
            coefficients,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Intercept followed by the lag coefficients.
    pub fn coefficients(&self) -> &[F] {
        &self.coefficients
    }

    /// Construct directly from coefficients (intercept first). Mostly for
    /// tests and fixtures.
    pub fn from_coefficients(coefficients: Vec<F>) -> Result<Self, ForecastError> {
        if coefficients.len() < 2 {
            return Err(ForecastError::ZeroOrder);
        }
        Ok(Self {
            order: coefficients.len() - 1,
            coefficients,
        })
    }

    /// One-step-ahead prediction from the most-recent-first lag vector.
    pub fn predict(&self, recent: &[F]) -> Result<F, ForecastError> {
        if recent.len() != self.order {
            return Err(ForecastError::WrongLagLength {
                expected: self.order,
                got: recent.len(),
            });
        }
        let mut acc = self.coefficients[0];
        for (c, x) in self.coefficients[1..].iter().zip(recent) {
            acc = acc + *c * *x;
        }
        Ok(acc)
    }

    /// Prediction for the step following `history`.
    pub fn predict_next(&self, history: &[F]) -> Result<F, ForecastError> {
        if history.len() < self.order {
            return Err(ForecastError::WrongLagLength {
                expected: self.order,
                got: history.len(),
            });
        }
        let recent: Vec<F> = history.iter().rev().take(self.order).cloned().collect();
        self.predict(&recent)
    }
}

/// Gaussian elimination with partial pivoting. Small systems only.
fn solve<F: Real>(mut a: Vec<Vec<F>>, mut b: Vec<F>) -> Option<Vec<F>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| {
            a[i][col]
                .abs()
                .partial_cmp(&a[j][col].abs())
                .unwrap_or(std::cmp::Ordering::Equal)
        })?;
        if a[pivot][col].abs() == F::zero() {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let factor = a[row][col] / a[col][col];
            for k in col..n {
                let upd = a[col][k];
                a[row][k] = a[row][k] - factor * upd;
            }
            let upd = b[col];
            b[row] = b[row] - factor * upd;
        }
    }
    let mut x = vec![F::zero(); n];
    for row in (0..n).rev() {
        let mut acc = b[row];
        for k in row + 1..n {
            acc = acc - a[row][k] * x[k];
        }
        x[row] = acc / a[row][row];
        if !x[row].is_finite() {
            return None;
        }
    }
    Some(x)
}
