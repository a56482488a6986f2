//! Secure reliable multicast for large groups.
//!
//! This crate implements three Byzantine-tolerant reliable multicast
//! protocols as deterministic, event-driven state machines:
//!
//! * **E** collects signed acknowledgments from a dissemination quorum of
//!   `⌈(n+t+1)/2⌉` processes before a message may be delivered.
//! * **3T** designates a range `W_3T(m)` of `3t+1` processes per message and
//!   needs `2t+1` acknowledgments from that range.
//! * **ACT(t)** asks a pseudorandom set `W_active(m)` of only `κ` witnesses,
//!   each of which probes `δ` random peers before acknowledging, and falls
//!   back to 3T when the fast path times out. Agreement becomes
//!   probabilistic; the conflict probability is computed by [`analysis`].
//!
//! The protocols run inside [`sim`], a seeded discrete-event network
//! simulator with authenticated FIFO channels, lossy-but-retransmitting
//! links, a trusted stability oracle and an out-of-band alert plane.
//! Byzantine behavior is injected through [`adversary`].
//!
//! ```
//! use securecast::protocol::ProtocolKind;
//! use securecast::sim::{SimConfig, SimWorld};
//!
//! let mut config = SimConfig::new(ProtocolKind::ThreeT, 7, 2);
//! config.messages = 3;
//! let report = SimWorld::build(config).unwrap().run_to_quiescence().unwrap();
//! assert!(report.quiescent);
//! assert_eq!(report.conflicts, 0);
//! assert!(report.violations.is_empty());
//! ```

pub mod adversary;
pub mod analysis;
pub mod crypto;
pub mod protocol;
pub mod quorum;
pub mod sim;

pub use crypto::{Digest, MessageId, MulticastMessage, ProcessId, Signature};
pub use protocol::{ProtocolKind, ProtocolParams, Tick};
pub use quorum::QuorumParams;
