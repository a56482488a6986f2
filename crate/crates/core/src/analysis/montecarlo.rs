use rayon::prelude::*;

use crate::sim::{derive_seed, SimConfig, SimError, SimWorld};

/// Conflict rate over many independent worlds.
#[derive(Clone, Debug, PartialEq)]
pub struct MonteCarloEstimate {
    pub trials: usize,
    pub attacked: usize,
    pub conflicts: usize,
    pub estimate: f64,
    /// 3σ normal-approximation interval, clamped to `[0, 1]`.
    pub ci_low: f64,
    pub ci_high: f64,
    pub violations: usize,
    pub non_quiescent: usize,
}

impl MonteCarloEstimate {
    fn from_counts(trials: usize, attacked: usize, conflicts: usize, violations: usize, non_quiescent: usize) -> Self {
        let (estimate, sigma) = if attacked == 0 {
            (0.0, 0.0)
        } else {
            let p = conflicts as f64 / attacked as f64;
            (p, (p * (1.0 - p) / attacked as f64).sqrt())
        };
        MonteCarloEstimate {
            trials,
            attacked,
            conflicts,
            estimate,
            ci_low: (estimate - 3.0 * sigma).max(0.0),
            ci_high: (estimate + 3.0 * sigma).min(1.0),
            violations,
            non_quiescent,
        }
    }

    /// 3σ binomial margin of a rate `bound` at this sample size.
    pub fn margin(&self, bound: f64) -> f64 {
        if self.attacked == 0 {
            return f64::INFINITY;
        }
        3.0 * (bound * (1.0 - bound) / self.attacked as f64).sqrt()
    }

    /// Warning text when a 3σ interval around `bound` is wider than
    /// `bound` itself.
    pub fn insufficient_trials(&self, bound: f64) -> Option<String> {
        let width = 2.0 * self.margin(bound);
        (width > bound).then(|| {
            format!(
                "warning: insufficient trials: {} attacked messages give a 3-sigma interval of width {} around a bound of {}",
                self.attacked,
                super::fmt_g(width),
                super::fmt_g(bound)
            )
        })
    }

    /// The estimate is consistent with `bound` unless the whole interval
    /// lies above it.
    pub fn passes(&self, bound: f64) -> bool {
        self.ci_low <= bound
    }
}

/// Worker count: `requested`, capped by `SECURECAST_THREADS` when set.
pub fn worker_threads(requested: Option<usize>) -> usize {
    let cap = std::env::var("SECURECAST_THREADS").ok().and_then(|v| v.parse::<usize>().ok()).filter(|&v| v > 0);
    let base = requested.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    cap.map_or(base, |c| base.min(c)).max(1)
}

/// Runs `trials` worlds of `config`, trial `i` seeded from
/// `(config.seed, i)`, and pools their attacked and conflicting ids.
pub fn monte_carlo_conflict_rate(config: &SimConfig, trials: usize, threads: usize) -> Result<MonteCarloEstimate, SimError> {
    config.validate()?;
    let mut base = config.clone();
    base.record_trace = false;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads.max(1)).build().expect("thread pool");
    let results: Result<Vec<(usize, usize, usize, bool)>, SimError> = pool.install(|| {
        (0..trials)
            .into_par_iter()
            .map(|i| {
                let mut c = base.clone();
                c.seed = derive_seed(base.seed, format!("trial{i}").as_bytes());
                let r = SimWorld::build(c)?.run_to_quiescence()?;
                Ok((r.attacked.len(), r.conflicts, r.violations.len(), r.quiescent))
            })
            .collect()
    });
    let (mut attacked, mut conflicts, mut violations, mut non_quiescent) = (0, 0, 0, 0);
    for (a, c, v, q) in results? {
        attacked += a;
        conflicts += c;
        violations += v;
        non_quiescent += usize::from(!q);
    }
    Ok(MonteCarloEstimate::from_counts(trials, attacked, conflicts, violations, non_quiescent))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::Workload;

    #[test]
    fn honest_sender_estimate_is_zero() {
        let mut c = SimConfig::act(31, 10, 3, 5);
        c.messages = 2;
        let est = monte_carlo_conflict_rate(&c, 4, 2).unwrap();
        assert_eq!(est.attacked, 0);
        assert_eq!(est.estimate, 0.0);
        assert_eq!(est.violations, 0);
    }

    #[test]
    fn few_trials_warn() {
        let mut c = SimConfig::act(31, 10, 3, 5);
        c.adversary = crate::adversary::AdversarySpec::RegimeSplit;
        c.workload = Workload::Faulty;
        let est = monte_carlo_conflict_rate(&c, 10, 2).unwrap();
        assert_eq!(est.attacked, 10);
        assert!(est.insufficient_trials(0.1416).is_some());
    }
}
