use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::crypto::{MessageId, ProcessId};
use crate::quorum::{sample_peers, w_active, QuorumParams, WitnessSeed};

/// Empirical frequency of an event.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SampleRate {
    pub hits: u64,
    pub samples: u64,
}

impl SampleRate {
    pub fn rate(&self) -> f64 {
        self.hits as f64 / self.samples as f64
    }

    /// Standard error of a rate `p` at this sample size.
    pub fn sigma(&self, p: f64) -> f64 {
        (p * (1.0 - p) / self.samples as f64).sqrt()
    }
}

/// Fraction of `samples` message ids whose `W_active`, drawn with the
/// production sampler, consists of faulty processes only. Processes
/// `0..t` are faulty, fixed before the witness seed is drawn.
pub fn faulty_active_fraction(n: usize, t: usize, kappa: usize, samples: u64, seed: u64) -> SampleRate {
    let params = QuorumParams::new(n, t).expect("valid n, t");
    let ws = WitnessSeed::from_u64(seed);
    let mut hits = 0;
    for i in 0..samples {
        let id = MessageId::new(ProcessId::from((i % n as u64) as usize), i / n as u64 + 1);
        let set = w_active(id, kappa, params, &ws).expect("kappa <= n");
        if set.iter().all(|p| p.index() < t) {
            hits += 1;
        }
    }
    SampleRate { hits, samples }
}

/// Draws `delta` probes `draws` times from a pool of `pool` processes with
/// [`sample_peers`] and counts the draws that land only on the first
/// `marked` processes.
pub fn probe_miss_rate(pool: usize, marked: usize, delta: usize, draws: u64, seed: u64) -> SampleRate {
    let members: Vec<ProcessId> = (0..pool).map(ProcessId::from).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hits = 0;
    for _ in 0..draws {
        let probes = sample_peers(&members, None, delta, &mut rng);
        if probes.iter().all(|p| p.index() < marked) {
            hits += 1;
        }
    }
    SampleRate { hits, samples: draws }
}
