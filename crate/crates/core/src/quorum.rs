//! Dissemination quorum arithmetic and witness-set selection.
//!
//! `W_3T(m)` and `W_active(m)` are keyed pseudorandom samples without
//! replacement: SHA-256 over `(domain, seed, sender, seq, counter)` yields a
//! stream of 64-bit words, each reduced modulo `n`; duplicates are rejected.
//! Both are pure functions of their inputs, so every process computes the
//! same set for the same message id.

use std::fmt;

use rand::seq::SliceRandom;
use rand::Rng;
use sha2::{Digest as _, Sha256};
use thiserror::Error;

use crate::crypto::{MessageId, ProcessId};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum QuorumError {
    #[error("t must be at least 1 (got t={0})")]
    ZeroThreshold(usize),
    #[error("3t+1 > n: n={n}, t={t} leaves no room for a 3t+1 witness range")]
    TooManyFaults { n: usize, t: usize },
    #[error("kappa={kappa} exceeds n={n}")]
    KappaTooLarge { kappa: usize, n: usize },
}

/// `(n, t)` with `1 ≤ t` and `3t+1 ≤ n`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct QuorumParams {
    n: usize,
    t: usize,
}

impl QuorumParams {
    pub fn new(n: usize, t: usize) -> Result<Self, QuorumError> {
        if t == 0 {
            return Err(QuorumError::ZeroThreshold(t));
        }
        if 3 * t + 1 > n {
            return Err(QuorumError::TooManyFaults { n, t });
        }
        Ok(QuorumParams { n, t })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn t(&self) -> usize {
        self.t
    }

    /// `q = ⌈(n+t+1)/2⌉`.
    pub fn dissemination_quorum_size(&self) -> usize {
        (self.n + self.t + 1).div_ceil(2)
    }

    pub fn w3t_size(&self) -> usize {
        3 * self.t + 1
    }

    /// `2t+1`, the 3T acknowledgment threshold.
    pub fn w3t_threshold(&self) -> usize {
        2 * self.t + 1
    }
}

/// Consistency (`2q − n > t`) and Availability (`q ≤ n − t`) for
/// threshold quorums of size `q`.
pub fn check_dissemination_properties(params: QuorumParams, q: usize) -> bool {
    let (n, t) = (params.n as i64, params.t as i64);
    let q = q as i64;
    q <= n && 2 * q - n > t && q <= n - t
}

/// Seed of the witness-selection function `R`, fixed at world setup.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct WitnessSeed(pub [u8; 32]);

impl WitnessSeed {
    pub fn from_u64(seed: u64) -> Self {
        let mut h = Sha256::new();
        h.update(b"securecast/witness-seed");
        h.update(seed.to_le_bytes());
        WitnessSeed(h.finalize().into())
    }
}

impl fmt::Debug for WitnessSeed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "WitnessSeed({:02x}{:02x}{:02x}{:02x}…)", self.0[0], self.0[1], self.0[2], self.0[3])
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum WitnessKind {
    EQuorum,
    W3tRange,
    W3tQuorum,
    WActive,
    PeerTargets,
}

/// How `W_3T` ranges are laid out over the process space.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum W3tLayout {
    /// Keyed uniform sample per message id.
    #[default]
    Uniform,
    /// Consecutive blocks of `3t+1` ids, rotated by sender and sequence number.
    RoundRobinBlocks,
}

/// A set of distinct processes, kept sorted.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct WitnessSet {
    members: Vec<ProcessId>,
    kind: WitnessKind,
}

impl WitnessSet {
    pub fn new(kind: WitnessKind, members: impl IntoIterator<Item = ProcessId>) -> Self {
        let mut members: Vec<ProcessId> = members.into_iter().collect();
        members.sort_unstable();
        members.dedup();
        WitnessSet { members, kind }
    }

    pub fn kind(&self) -> WitnessKind {
        self.kind
    }

    pub fn members(&self) -> &[ProcessId] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, p: ProcessId) -> bool {
        self.members.binary_search(&p).is_ok()
    }

    pub fn iter(&self) -> impl Iterator<Item = ProcessId> + '_ {
        self.members.iter().copied()
    }
}

/// Keyed sample of `k` distinct processes out of `n`.
fn keyed_sample(domain: &[u8], id: MessageId, n: usize, k: usize, seed: &WitnessSeed) -> Vec<ProcessId> {
    assert!(k <= n, "cannot sample {k} distinct processes out of {n}");
    let mut chosen = vec![false; n];
    let mut out = Vec::with_capacity(k);
    let mut counter = 0u64;
    while out.len() < k {
        let mut h = Sha256::new();
        h.update(domain);
        h.update(seed.0);
        h.update(id.sender.0.to_le_bytes());
        h.update(id.seq.to_le_bytes());
        h.update(counter.to_le_bytes());
        let block: [u8; 32] = h.finalize().into();
        counter += 1;
        for word in block.chunks_exact(8) {
            let v = u64::from_le_bytes(word.try_into().unwrap());
            let idx = (v % n as u64) as usize;
            if !chosen[idx] {
                chosen[idx] = true;
                out.push(ProcessId::from(idx));
                if out.len() == k {
                    break;
                }
            }
        }
    }
    out
}

/// `W_3T(m)`: the `3t+1` potential witnesses of message `id`.
pub fn w3t(id: MessageId, params: QuorumParams, seed: &WitnessSeed) -> WitnessSet {
    w3t_with_layout(id, params, seed, W3tLayout::Uniform)
}

pub fn w3t_with_layout(id: MessageId, params: QuorumParams, seed: &WitnessSeed, layout: W3tLayout) -> WitnessSet {
    let size = params.w3t_size();
    match layout {
        W3tLayout::Uniform => WitnessSet::new(WitnessKind::W3tRange, keyed_sample(b"w3t", id, params.n, size, seed)),
        W3tLayout::RoundRobinBlocks => {
            let n = params.n as u64;
            let start = (id.sender.0 as u64 + id.seq.wrapping_mul(size as u64)) % n;
            WitnessSet::new(
                WitnessKind::W3tRange,
                (0..size as u64).map(|i| ProcessId(((start + i) % n) as u32)),
            )
        }
    }
}

/// `W_active(m)`: the `κ` fast-path witnesses of message `id`.
pub fn w_active(id: MessageId, kappa: usize, params: QuorumParams, seed: &WitnessSeed) -> Result<WitnessSet, QuorumError> {
    if kappa > params.n {
        return Err(QuorumError::KappaTooLarge { kappa, n: params.n });
    }
    Ok(WitnessSet::new(WitnessKind::WActive, keyed_sample(b"w-active", id, params.n, kappa, seed)))
}

/// Picks `count` distinct peers uniformly from `pool`, never `exclude`.
///
/// This is the sampler active witnesses use to choose their probe targets.
/// When fewer than `count` candidates exist, all of them are returned.
pub fn sample_peers<R: Rng + ?Sized>(
    pool: &[ProcessId],
    exclude: Option<ProcessId>,
    count: usize,
    rng: &mut R,
) -> Vec<ProcessId> {
    let candidates: Vec<ProcessId> = pool.iter().copied().filter(|p| Some(*p) != exclude).collect();
    let mut out: Vec<ProcessId> = candidates.choose_multiple(rng, count).copied().collect();
    out.sort_unstable();
    out
}
