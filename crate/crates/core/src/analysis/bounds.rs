use super::combinatorics::{binomial_ratio, hypergeometric_tail};
use super::montecarlo::MonteCarloEstimate;
use super::{AnalysisError, AnalysisParams};
use crate::protocol::ProtocolKind;

/// A closed-form value next to its exact (sampling without replacement)
/// counterpart.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Probability {
    pub formula: f64,
    pub exact: f64,
}

/// Chance that every member of `W_active` is faulty: `(t/n)^κ`, and
/// `C(t,κ)/C(n,κ)` for a set of distinct processes.
pub fn p_faulty_active_set(params: &AnalysisParams) -> Probability {
    let AnalysisParams { n, t, kappa, .. } = *params;
    let formula = (t as f64 / n as f64).powi(kappa as i32);
    let exact = if kappa <= t { binomial_ratio(t as u64, n as u64, kappa as u64) } else { 0.0 };
    Probability { formula, exact }
}

/// Chance that `δ` probes into `W_3T` all miss the `t+1` or more correct
/// processes holding the other variant: `(2t/(3t+1))^δ`. The exact value
/// is for `δ` distinct probes, `C(2t,δ)/C(3t+1,δ)`.
pub fn probe_miss_probability(params: &AnalysisParams) -> Probability {
    let AnalysisParams { t, delta, .. } = *params;
    if delta == 0 {
        return Probability { formula: 1.0, exact: 1.0 };
    }
    let formula = (2.0 * t as f64 / (3 * t + 1) as f64).powi(delta as i32);
    let exact = binomial_ratio(2 * t as u64, 3 * t as u64 + 1, delta as u64);
    Probability { formula, exact }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConflictBound {
    /// `(t/n)^κ + (1−(t/n)^κ)(2t/(3t+1))^δ`
    pub specific: f64,
    /// `(1/3)^κ + (1−(1/3)^κ)(2/3)^δ`
    pub worst_case: f64,
}

/// Bound on the chance that a conflicting message becomes deliverable.
pub fn overall_conflict_bound(params: &AnalysisParams) -> ConflictBound {
    let a = p_faulty_active_set(params).formula;
    let m = probe_miss_probability(params).formula;
    let wa = (1.0f64 / 3.0).powi(params.kappa as i32);
    let wm = (2.0f64 / 3.0).powi(params.delta as i32);
    ConflictBound { specific: a + (1.0 - a) * m, worst_case: wa + (1.0 - wa) * wm }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PKappaC {
    pub exact: f64,
    pub bound: f64,
}

/// Chance that at least `κ−C` of `κ` random processes are faulty when
/// `⌊n/3⌋` of the `n` are.
///
/// Fails with [`AnalysisError::BoundExceeded`] when the exact value lies
/// above the closed-form bound `(κn/(C(n−κ)))^C·(1/3)^(κ−C)`, which
/// happens for large `C` relative to `κ`.
pub fn p_kappa_c(params: &AnalysisParams) -> Result<PKappaC, AnalysisError> {
    let AnalysisParams { n, kappa, slack_c: c, .. } = *params;
    let bad = (n / 3) as u64;
    let exact = hypergeometric_tail(bad, n as u64 - bad, kappa as u64, c as u64);
    let third = (1.0f64 / 3.0).powi((kappa - c) as i32);
    let bound = if c == 0 {
        third
    } else if n == kappa {
        f64::INFINITY
    } else {
        ((kappa * n) as f64 / (c * (n - kappa)) as f64).powi(c as i32) * third
    };
    if exact > bound * (1.0 + 1e-12) {
        return Err(AnalysisError::BoundExceeded { n, kappa, c, exact, bound });
    }
    Ok(PKappaC { exact, bound })
}

/// Limit of the busiest process's per-message load without failures.
///
/// For E this is `q/n`, which is not part of the original analysis.
pub fn failure_free_load(kind: ProtocolKind, params: &AnalysisParams) -> f64 {
    let AnalysisParams { n, t, kappa, delta, .. } = *params;
    let accessed = match kind {
        ProtocolKind::E => (n + t + 1).div_ceil(2),
        ProtocolKind::ThreeT => 2 * t + 1,
        ProtocolKind::Act => kappa * (delta + 1),
    };
    accessed as f64 / n as f64
}

/// Upper bound on the load when failures force the slow path.
pub fn failure_load_bound(kind: ProtocolKind, params: &AnalysisParams) -> f64 {
    let AnalysisParams { n, t, kappa, delta, .. } = *params;
    let accessed = match kind {
        ProtocolKind::E => n,
        ProtocolKind::ThreeT => 3 * t + 1,
        ProtocolKind::Act => kappa * (delta + 1) + 3 * t + 1,
    };
    accessed as f64 / n as f64
}

/// Cheapest `(κ, δ)` whose specific bound is at most `epsilon`.
///
/// Cost is the failure-free access count `κ(δ+1)`; ties go to the smaller
/// `κ`. Only pairs with `n−t ≥ κδ` and `δ ≤ 3t` are considered.
pub fn solve_epsilon(n: usize, t: usize, epsilon: f64) -> Result<(usize, usize), AnalysisError> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(AnalysisError::Epsilon(epsilon));
    }
    AnalysisParams::new(n, t, 1, 0)?;
    let mut best: Option<(usize, usize, usize)> = None;
    for kappa in 1..=n {
        for delta in 0..=(3 * t) {
            if kappa * delta > n - t {
                break;
            }
            let params = AnalysisParams { n, t, kappa, delta, slack_c: 0, epsilon: None };
            if overall_conflict_bound(&params).specific > epsilon {
                continue;
            }
            let cost = kappa * (delta + 1);
            if best.is_none_or(|(c, _, _)| cost < c) {
                best = Some((cost, kappa, delta));
            }
            break;
        }
    }
    best.map(|(_, k, d)| (k, d)).ok_or(AnalysisError::Unreachable(epsilon))
}

/// Every bound for one parameter set.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundReport {
    pub params: AnalysisParams,
    pub p_faulty_active: Probability,
    pub probe_miss: Probability,
    pub overall_conflict: ConflictBound,
    pub p_kappa_c: PKappaC,
    pub load_free_e: f64,
    pub load_free_3t: f64,
    pub load_free_act: f64,
    pub load_fail_3t: f64,
    pub load_fail_act: f64,
    pub monte_carlo: Option<MonteCarloEstimate>,
}

impl BoundReport {
    pub const CSV_HEADER: [&'static str; 19] = [
        "n",
        "t",
        "kappa",
        "delta",
        "slack_c",
        "p_faulty_active",
        "p_faulty_active_exact",
        "probe_miss",
        "probe_miss_exact",
        "overall_conflict",
        "overall_conflict_worst",
        "p_kappa_c_exact",
        "p_kappa_c_bound",
        "load_free_e",
        "load_free_3t",
        "load_free_act",
        "load_fail_3t",
        "load_fail_act",
        "detection",
    ];

    pub fn compute(params: &AnalysisParams) -> Result<BoundReport, AnalysisError> {
        params.validate()?;
        Ok(BoundReport {
            params: params.clone(),
            p_faulty_active: p_faulty_active_set(params),
            probe_miss: probe_miss_probability(params),
            overall_conflict: overall_conflict_bound(params),
            p_kappa_c: p_kappa_c(params)?,
            load_free_e: failure_free_load(ProtocolKind::E, params),
            load_free_3t: failure_free_load(ProtocolKind::ThreeT, params),
            load_free_act: failure_free_load(ProtocolKind::Act, params),
            load_fail_3t: failure_load_bound(ProtocolKind::ThreeT, params),
            load_fail_act: failure_load_bound(ProtocolKind::Act, params),
            monte_carlo: None,
        })
    }

    /// Chance that a conflicting message is detected: one minus the
    /// specific bound.
    pub fn detection(&self) -> f64 {
        1.0 - self.overall_conflict.specific
    }

    pub fn csv_row(&self) -> Vec<String> {
        let p = &self.params;
        let mut row: Vec<String> =
            [p.n, p.t, p.kappa, p.delta, p.slack_c].iter().map(|v| v.to_string()).collect();
        row.extend(
            [
                self.p_faulty_active.formula,
                self.p_faulty_active.exact,
                self.probe_miss.formula,
                self.probe_miss.exact,
                self.overall_conflict.specific,
                self.overall_conflict.worst_case,
                self.p_kappa_c.exact,
                self.p_kappa_c.bound,
                self.load_free_e,
                self.load_free_3t,
                self.load_free_act,
                self.load_fail_3t,
                self.load_fail_act,
                self.detection(),
            ]
            .iter()
            .map(|&v| super::fmt_g(v)),
        );
        row
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(n: usize, t: usize, kappa: usize, delta: usize) -> AnalysisParams {
        AnalysisParams::new(n, t, kappa, delta).unwrap()
    }

    #[test]
    fn faulty_active_examples() {
        assert!((p_faulty_active_set(&p(100, 10, 3, 5)).formula - 0.001).abs() < 1e-15);
        let zero = AnalysisParams { n: 10, t: 0, kappa: 3, delta: 0, slack_c: 0, epsilon: None };
        assert_eq!(p_faulty_active_set(&zero).formula, 0.0);
        assert_eq!(p_faulty_active_set(&zero).exact, 0.0);
        assert!((p_faulty_active_set(&p(30, 9, 3, 5)).exact - 84.0 / 4060.0).abs() < 1e-15);
    }

    #[test]
    fn probe_miss_examples() {
        assert!((probe_miss_probability(&p(100, 10, 3, 5)).formula - (20.0f64 / 31.0).powi(5)).abs() < 1e-15);
        assert_eq!(probe_miss_probability(&p(100, 10, 3, 0)).formula, 1.0);
    }

    #[test]
    fn loads() {
        let q = p(100, 10, 3, 5);
        assert!((failure_free_load(ProtocolKind::ThreeT, &q) - 0.21).abs() < 1e-12);
        assert!((failure_free_load(ProtocolKind::Act, &q) - 0.18).abs() < 1e-12);
        assert!((failure_load_bound(ProtocolKind::ThreeT, &q) - 0.31).abs() < 1e-12);
        assert!((failure_load_bound(ProtocolKind::Act, &q) - 0.49).abs() < 1e-12);
        assert!((failure_free_load(ProtocolKind::E, &q) - 0.56).abs() < 1e-12);
        let all = AnalysisParams { n: 10, t: 0, kappa: 10, delta: 0, slack_c: 0, epsilon: None };
        assert_eq!(failure_free_load(ProtocolKind::Act, &all), 1.0);
        assert!((failure_load_bound(ProtocolKind::Act, &all) - 1.1).abs() < 1e-12);
    }

    #[test]
    fn slack_bound_can_fail() {
        let q = p(300, 99, 5, 5).with_slack(4).unwrap();
        assert!(matches!(p_kappa_c(&q), Err(AnalysisError::BoundExceeded { .. })));
    }

    #[test]
    fn epsilon_solver() {
        let (k, d) = solve_epsilon(100, 10, 0.001).unwrap();
        assert!(overall_conflict_bound(&p(100, 10, k, d)).specific <= 0.001);
        assert!(k * d <= 90);
        assert!(solve_epsilon(4, 1, 1e-9).is_err());
        assert!(solve_epsilon(100, 10, 0.0).is_err());
    }
}
