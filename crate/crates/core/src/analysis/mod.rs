//! Closed-form bounds, exact combinatorial values and Monte Carlo
//! estimators for the protocols' failure probability and load.
//!
//! ```
//! use securecast::analysis::{overall_conflict_bound, AnalysisParams};
//!
//! let params = AnalysisParams::new(100, 10, 3, 5).unwrap();
//! let bound = overall_conflict_bound(&params);
//! assert!((bound.specific - 0.11266).abs() < 1e-5);
//! assert!((bound.worst_case - 0.163847).abs() < 1e-6);
//! ```

mod bounds;
mod combinatorics;
mod csv;
mod montecarlo;
mod sampling;

use thiserror::Error;

pub use bounds::{
    failure_free_load, failure_load_bound, overall_conflict_bound, p_faulty_active_set, p_kappa_c,
    probe_miss_probability, solve_epsilon, BoundReport, ConflictBound, PKappaC, Probability,
};
pub use combinatorics::{binomial, binomial_ratio, hypergeometric_tail, hypergeometric_tail_with, Method, EXACT_LIMIT};
pub use csv::{fmt_g, CsvTable};
pub use montecarlo::{monte_carlo_conflict_rate, worker_threads, MonteCarloEstimate};
pub use sampling::{faulty_active_fraction, probe_miss_rate, SampleRate};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("n: need 3t+1 <= n, got n={n}, t={t}")]
    TooManyFaults { n: usize, t: usize },
    #[error("kappa: need 1 <= kappa <= n, got kappa={kappa}, n={n}")]
    Kappa { kappa: usize, n: usize },
    #[error("delta: need delta <= 3t, got delta={delta}, t={t}")]
    Delta { delta: usize, t: usize },
    #[error("slack_c: need C <= kappa, got C={c}, kappa={kappa}")]
    Slack { c: usize, kappa: usize },
    #[error("epsilon: must lie in (0, 1), got {0}")]
    Epsilon(f64),
    #[error("p_kappa_c: exact value {exact} exceeds the closed-form bound {bound} at n={n}, kappa={kappa}, C={c}")]
    BoundExceeded { n: usize, kappa: usize, c: usize, exact: f64, bound: f64 },
    #[error("no (kappa, delta) with n-t >= kappa*delta reaches epsilon={0}")]
    Unreachable(f64),
}

/// Parameters of the probabilistic analysis.
#[derive(Clone, Debug, PartialEq)]
pub struct AnalysisParams {
    pub n: usize,
    pub t: usize,
    pub kappa: usize,
    pub delta: usize,
    /// Fast-path slack `C`.
    pub slack_c: usize,
    /// Target conflict fraction, if any.
    pub epsilon: Option<f64>,
}

impl AnalysisParams {
    pub fn new(n: usize, t: usize, kappa: usize, delta: usize) -> Result<Self, AnalysisError> {
        let params = AnalysisParams { n, t, kappa, delta, slack_c: 0, epsilon: None };
        params.validate()?;
        Ok(params)
    }

    pub fn with_slack(mut self, c: usize) -> Result<Self, AnalysisError> {
        self.slack_c = c;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), AnalysisError> {
        let AnalysisParams { n, t, kappa, delta, slack_c, epsilon } = *self;
        if 3 * t + 1 > n {
            return Err(AnalysisError::TooManyFaults { n, t });
        }
        if kappa == 0 || kappa > n {
            return Err(AnalysisError::Kappa { kappa, n });
        }
        if delta > 3 * t {
            return Err(AnalysisError::Delta { delta, t });
        }
        if slack_c > kappa {
            return Err(AnalysisError::Slack { c: slack_c, kappa });
        }
        if let Some(e) = epsilon {
            if !(e > 0.0 && e < 1.0) {
                return Err(AnalysisError::Epsilon(e));
            }
        }
        Ok(())
    }
}
