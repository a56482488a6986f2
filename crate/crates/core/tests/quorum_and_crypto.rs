use std::collections::BTreeSet;
use std::sync::Arc;

use proptest::prelude::*;
use securecast::crypto::{digest, Ack, AckSet, Caller, KeyRing, MulticastMessage, ProtocolTag};
use securecast::protocol::{ProcessState, ProtocolKind, ProtocolParams};
use securecast::quorum::{check_dissemination_properties, w3t, w_active, QuorumParams, WitnessSeed};
use securecast::{MessageId, ProcessId};
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn subsets(n: usize, k: usize) -> Vec<u32> {
    (0u32..(1 << n)).filter(|m| m.count_ones() as usize == k).collect()
}

#[test]
fn quorum_grid() {
    for n in 4..=1000 {
        for t in 1..=(n - 1) / 3 {
            let p = QuorumParams::new(n, t).unwrap();
            let q = p.dissemination_quorum_size();
            assert!(check_dissemination_properties(p, q), "n={n} t={t} q={q}");
            assert!(2 * q >= n + t + 1 && q <= n - t, "n={n} t={t} q={q}");
        }
    }
}

#[test]
fn quorums_intersect_in_t_plus_one() {
    for n in 4..=12 {
        for t in 1..=(n - 1) / 3 {
            let q = QuorumParams::new(n, t).unwrap().dissemination_quorum_size();
            let all = subsets(n, q);
            let min = all
                .iter()
                .flat_map(|a| all.iter().map(move |b| (a & b).count_ones()))
                .min()
                .unwrap();
            assert!(min as usize > t, "n={n} t={t}: two quorums share only {min}");
        }
    }
}

#[test]
fn w_active_membership_is_uniform() {
    let (n, kappa, ids) = (20usize, 3usize, 100_000u64);
    let params = QuorumParams::new(n, 6).unwrap();
    let seed = WitnessSeed::from_u64(99);
    let mut counts = vec![0u64; n];
    for i in 0..ids {
        let id = MessageId::new(ProcessId((i % n as u64) as u32), i / n as u64 + 1);
        for p in w_active(id, kappa, params, &seed).unwrap().iter() {
            counts[p.index()] += 1;
        }
    }
    let expected = (ids * kappa as u64) as f64 / n as f64;
    let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    let critical = ChiSquared::new((n - 1) as f64).unwrap().inverse_cdf(0.99);
    assert!(chi2 < critical, "chi-square {chi2} exceeds {critical}");
}

proptest! {
    #[test]
    fn witness_sets_are_pure(sender in 0u32..31, seq in 1u64..1000, seed in any::<u64>()) {
        let params = QuorumParams::new(31, 10).unwrap();
        let id = MessageId::new(ProcessId(sender), seq);
        let s = WitnessSeed::from_u64(seed);
        prop_assert_eq!(w3t(id, params, &s), w3t(id, params, &WitnessSeed::from_u64(seed)));
        prop_assert_eq!(w_active(id, 4, params, &s).unwrap(), w_active(id, 4, params, &s).unwrap());
        let members: BTreeSet<ProcessId> = w3t(id, params, &s).iter().collect();
        prop_assert_eq!(members.len(), 31);
    }

    #[test]
    fn ack_conflicts_symmetric(a in 0u8..4, b in 0u8..4, seq_a in 1u64..3, seq_b in 1u64..3) {
        let ring = KeyRing::new(4, 1, BTreeSet::new());
        let key = ring.signing_key(Caller::Process(ProcessId(1)), ProcessId(1)).unwrap();
        let x = Ack::sign(&key, ProtocolTag::E, MessageId::new(ProcessId(0), seq_a), digest(&[a]), None);
        let y = Ack::sign(&key, ProtocolTag::E, MessageId::new(ProcessId(0), seq_b), digest(&[b]), None);
        prop_assert!(!x.conflicts(&x));
        prop_assert_eq!(x.conflicts(&y), y.conflicts(&x));
        prop_assert_eq!(x.conflicts(&y), seq_a == seq_b && a != b);
    }

    #[test]
    fn ack_set_validity_is_monotone(
        n in 4usize..14,
        forged in proptest::collection::vec(any::<bool>(), 14),
        take in 1usize..14,
        drop in 0usize..14,
    ) {
        let t = (n - 1) / 3;
        let ring = Arc::new(KeyRing::new(n, 5, BTreeSet::new()));
        let other = KeyRing::new(n, 6, BTreeSet::new());
        let params = ProtocolParams::new(ProtocolKind::E, n, t).unwrap();
        let me = ProcessId(0);
        let key = ring.signing_key(Caller::Process(me), me).unwrap();
        let state = ProcessState::new(me, params, ring.clone(), key, 0).unwrap();
        let message = MulticastMessage::new(MessageId::new(ProcessId(1), 1), b"m".to_vec());
        let d = message.digest();
        let acks: Vec<Ack> = (0..take.min(n))
            .map(|i| {
                let p = ProcessId(i as u32);
                let source = if forged[i] { &other } else { &*ring };
                let k = source.signing_key(Caller::Process(p), p).unwrap();
                Ack::sign(&k, ProtocolTag::E, message.id, d, None)
            })
            .collect();
        let set = AckSet::new(acks).unwrap();
        let before = state.valid_delivery(&message, &set);
        if let Some(smaller) = set.without(ProcessId((drop % n) as u32)) {
            if !before {
                prop_assert!(!state.valid_delivery(&message, &smaller));
            }
        }
    }
}
