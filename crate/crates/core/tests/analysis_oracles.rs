use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use securecast::analysis::{
    failure_free_load, faulty_active_fraction, overall_conflict_bound, p_faulty_active_set, p_kappa_c,
    probe_miss_probability, probe_miss_rate, AnalysisParams,
};
use securecast::protocol::ProtocolKind;
use securecast::sim::{SimConfig, SimWorld, Workload};

/// Counts `k`-subsets of `0..n` holding at least `need` members of `0..bad`.
fn enumerate(n: usize, bad: usize, k: usize, need: usize) -> (u64, u64) {
    fn walk(start: usize, n: usize, bad: usize, left: usize, hits: usize, need: usize, acc: &mut (u64, u64)) {
        if left == 0 {
            acc.1 += 1;
            if hits >= need {
                acc.0 += 1;
            }
            return;
        }
        for i in start..=(n - left) {
            walk(i + 1, n, bad, left - 1, hits + usize::from(i < bad), need, acc);
        }
    }
    let mut acc = (0, 0);
    walk(0, n, bad, k, 0, need, &mut acc);
    acc
}

fn params(n: usize, t: usize, kappa: usize, delta: usize) -> AnalysisParams {
    AnalysisParams::new(n, t, kappa, delta).unwrap()
}

#[test]
fn worked_examples() {
    let p = params(100, 10, 3, 5);
    assert!((p_faulty_active_set(&p).formula - 0.001).abs() < 1e-12);
    assert!((probe_miss_probability(&p).formula - 0.11178).abs() < 1e-4);
    assert!((overall_conflict_bound(&p).specific - 0.11266).abs() < 1e-5);
    assert!((overall_conflict_bound(&p).worst_case - 0.163847).abs() < 1e-6);
    let (hits, total) = enumerate(30, 10, 3, 3);
    assert_eq!((hits, total), (120, 4060));
    assert!((p_faulty_active_set(&params(30, 9, 3, 5)).exact - enumerate(30, 9, 3, 3).0 as f64 / 4060.0).abs() < 1e-15);
    let pk = p_kappa_c(&params(30, 9, 3, 5).with_slack(1).unwrap()).unwrap();
    assert!((pk.exact - 1020.0 / 4060.0).abs() < 1e-12);
    assert!((pk.bound - 10.0 / 27.0).abs() < 1e-12);
}

#[test]
fn probe_miss_tends_to_two_thirds() {
    let p = params(3_000_001, 1_000_000, 3, 5);
    assert!((probe_miss_probability(&p).formula - (2.0f64 / 3.0).powi(5)).abs() < 1e-6);
    assert!((probe_miss_probability(&p).exact - (2.0f64 / 3.0).powi(5)).abs() < 1e-5);
}

#[test]
fn p_kappa_c_matches_enumeration() {
    for n in (6..=30).step_by(3) {
        for kappa in 1..=5 {
            for c in 0..=2.min(kappa) {
                let p = AnalysisParams { n, t: 1, kappa, delta: 0, slack_c: c, epsilon: None };
                let got = p_kappa_c(&p).unwrap();
                let (hits, total) = enumerate(n, n / 3, kappa, kappa - c);
                assert!((got.exact - hits as f64 / total as f64).abs() < 1e-12, "n={n} kappa={kappa} C={c}");
                assert!(got.exact <= got.bound, "n={n} kappa={kappa} C={c}");
                if c == 0 {
                    let fa = p_faulty_active_set(&AnalysisParams { t: n / 3, ..p.clone() }).exact;
                    assert!((got.exact - fa).abs() < 1e-12);
                }
            }
        }
    }
}

#[test]
fn p_kappa_c_matches_sampling_up_to_3000() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for &(n, kappa, c) in &[(300usize, 3usize, 1usize), (1000, 4, 1), (3000, 5, 2), (999, 3, 0)] {
        let p = AnalysisParams { n, t: 1, kappa, delta: 0, slack_c: c, epsilon: None };
        let exact = p_kappa_c(&p).unwrap().exact;
        let trials = 200_000;
        let hits = (0..trials)
            .filter(|_| sample(&mut rng, n, kappa).iter().filter(|&i| i < n / 3).count() >= kappa - c)
            .count();
        let sigma = (exact * (1.0 - exact) / trials as f64).sqrt();
        assert!((hits as f64 / trials as f64 - exact).abs() <= 3.0 * sigma, "n={n} kappa={kappa} C={c}");
    }
}

#[test]
fn bound_decreases_in_kappa_and_delta() {
    let t = 10;
    for kappa in 1..=12 {
        for delta in 1..=12 {
            let b = |k, d| overall_conflict_bound(&params(31, t, k, d));
            let here = b(kappa, delta);
            if kappa < 12 {
                assert!(b(kappa + 1, delta).specific < here.specific);
                assert!(b(kappa + 1, delta).worst_case < here.worst_case);
            }
            if delta < 12 {
                assert!(b(kappa, delta + 1).specific < here.specific);
                assert!(b(kappa, delta + 1).worst_case < here.worst_case);
            }
        }
    }
}

#[test]
fn production_probe_sampler_matches_hypergeometric() {
    let draws = 300_000;
    let rate = probe_miss_rate(31, 20, 5, draws, 3);
    let (hits, total) = enumerate(31, 20, 5, 5);
    let exact = hits as f64 / total as f64;
    assert!((rate.rate() - exact).abs() <= 3.0 * rate.sigma(exact));
    assert!(rate.rate() <= probe_miss_probability(&params(100, 10, 3, 5)).formula);
}

#[test]
fn faulty_active_sets_follow_the_exact_rate() {
    let samples = 300_000;
    let rate = faulty_active_fraction(31, 10, 2, samples, 5);
    let exact = p_faulty_active_set(&params(31, 10, 2, 5)).exact;
    assert!((rate.rate() - exact).abs() <= 3.0 * rate.sigma(exact), "{} vs {exact}", rate.rate());
}

#[test]
fn measured_load_converges() {
    let (n, t) = (40, 5);
    for kind in [ProtocolKind::ThreeT, ProtocolKind::Act] {
        let target = failure_free_load(kind, &params(n, t, 3, 5));
        let mut errors = Vec::new();
        for (messages, band) in [(100, 0.25), (1000, 0.08), (10_000, 0.025)] {
            let mut c = if kind == ProtocolKind::Act { SimConfig::act(n, t, 3, 5) } else { SimConfig::new(kind, n, t) };
            c.workload = Workload::Uniform;
            c.messages = messages;
            c.check = false;
            let load = SimWorld::build(c).unwrap().run_to_quiescence().unwrap().measured_load();
            let err = load - target;
            assert!(err > -0.01 && err < band, "{kind} messages={messages}: load {load} vs {target}");
            errors.push(err);
        }
        assert!(errors[2] < errors[0], "{kind}: {errors:?}");
    }
}
