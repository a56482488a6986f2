//! The E, 3T and ACT(t) engines.
//!
//! A [`ProcessState`] consumes one input at a time (a received PDU, a timer,
//! a multicast request) and returns the [`Action`]s it wants performed. It
//! owns no I/O and no clock; the caller supplies `now` and carries out the
//! actions. All randomness comes from a seeded stream inside the state, so a
//! process is a deterministic function of its inputs.

mod state;
mod wire;

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::crypto::{Digest, MessageId, MulticastMessage, ProcessId, ProtocolTag};
use crate::quorum::{QuorumError, QuorumParams, W3tLayout, WitnessSeed};

pub use state::{PendingSend, ProcessState, Regime};
pub use wire::{AlertEvidence, Role, SignedRegular, StabilityBatch, WireBody, WireMessage};

/// Simulated time.
pub type Tick = u64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ProtocolKind {
    E,
    ThreeT,
    Act,
}

impl ProtocolKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ProtocolKind::E => "e",
            ProtocolKind::ThreeT => "3t",
            ProtocolKind::Act => "act",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "e" => Some(ProtocolKind::E),
            "3t" | "three_t" => Some(ProtocolKind::ThreeT),
            "act" | "av" => Some(ProtocolKind::Act),
            _ => None,
        }
    }

    /// Tag carried by this protocol's regular and deliver messages.
    pub fn tag(self) -> ProtocolTag {
        match self {
            ProtocolKind::E => ProtocolTag::E,
            ProtocolKind::ThreeT => ProtocolTag::ThreeT,
            ProtocolKind::Act => ProtocolTag::Av,
        }
    }

    /// Whether conflicting deliveries are ruled out for every run.
    pub fn has_absolute_agreement(self) -> bool {
        !matches!(self, ProtocolKind::Act)
    }
}

impl fmt::Display for ProtocolKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ProtocolError {
    #[error(transparent)]
    Quorum(#[from] QuorumError),
    #[error("kappa must be at least 1")]
    ZeroKappa,
    #[error("n−t ≥ κδ violated: n−t = {available} < κδ = {needed}")]
    ProbeBudget { available: usize, needed: usize },
    #[error("delta={delta} exceeds the 3t={max} peers available in a W_3T range")]
    DeltaTooLarge { delta: usize, max: usize },
    #[error("active slack C={slack} must be smaller than kappa={kappa}")]
    SlackTooLarge { slack: usize, kappa: usize },
    #[error("process {me} outside 0..{n}")]
    BadProcess { me: ProcessId, n: usize },
    #[error("sequence gap: expected to multicast seq {expected}, got {got}")]
    SequenceGap { expected: u64, got: u64 },
    #[error("process {me} cannot multicast on behalf of {sender}")]
    NotSender { me: ProcessId, sender: ProcessId },
}

/// Static configuration of one protocol instance.
#[derive(Clone, Debug, PartialEq)]
pub struct ProtocolParams {
    pub kind: ProtocolKind,
    pub quorum: QuorumParams,
    /// `κ`, size of `W_active`.
    pub kappa: usize,
    /// `δ`, number of peers each active witness probes.
    pub delta: usize,
    /// `C`: the fast path accepts `κ − C` of the `κ` active acks.
    pub active_slack_c: usize,
    /// How long a sender waits for the fast path before falling back to 3T.
    pub recovery_timeout: Tick,
    /// Delay before a witness answers a 3T recovery request.
    pub recovery_ack_delay: Tick,
    /// How long after delivering a process waits before re-forwarding.
    pub reforward_timeout: Tick,
    /// Maximum number of early deliver messages buffered.
    pub holdback_cap: usize,
    pub witness_seed: WitnessSeed,
    pub w3t_layout: W3tLayout,
}

impl ProtocolParams {
    fn base(kind: ProtocolKind, n: usize, t: usize) -> Result<Self, ProtocolError> {
        Ok(ProtocolParams {
            kind,
            quorum: QuorumParams::new(n, t)?,
            kappa: 0,
            delta: 0,
            active_slack_c: 0,
            recovery_timeout: 200,
            recovery_ack_delay: 20,
            reforward_timeout: 100,
            holdback_cap: 1024,
            witness_seed: WitnessSeed::from_u64(0),
            w3t_layout: W3tLayout::Uniform,
        })
    }

    /// Parameters for E or 3T. ACT needs [`ProtocolParams::act`].
    pub fn new(kind: ProtocolKind, n: usize, t: usize) -> Result<Self, ProtocolError> {
        let params = Self::base(kind, n, t)?;
        params.validate()?;
        Ok(params)
    }

    pub fn act(n: usize, t: usize, kappa: usize, delta: usize) -> Result<Self, ProtocolError> {
        let mut params = Self::base(ProtocolKind::Act, n, t)?;
        params.kappa = kappa;
        params.delta = delta;
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<(), ProtocolError> {
        if self.kind != ProtocolKind::Act {
            return Ok(());
        }
        let (n, t) = (self.quorum.n(), self.quorum.t());
        if self.kappa == 0 {
            return Err(ProtocolError::ZeroKappa);
        }
        if self.kappa > n {
            return Err(QuorumError::KappaTooLarge { kappa: self.kappa, n }.into());
        }
        if n - t < self.kappa * self.delta {
            return Err(ProtocolError::ProbeBudget { available: n - t, needed: self.kappa * self.delta });
        }
        if self.delta > 3 * t {
            return Err(ProtocolError::DeltaTooLarge { delta: self.delta, max: 3 * t });
        }
        if self.active_slack_c >= self.kappa {
            return Err(ProtocolError::SlackTooLarge { slack: self.active_slack_c, kappa: self.kappa });
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.quorum.n()
    }

    pub fn t(&self) -> usize {
        self.quorum.t()
    }
}

/// Timers a process may ask for.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Timer {
    /// ACT fast path deadline for one of our own multicasts.
    Recovery(MessageId),
    /// A 3T recovery ack held back by `recovery_ack_delay`.
    DelayedAck { subject: MessageId, digest: Digest, requested_at: Tick },
    /// Re-forward a delivered message to processes not known to have it.
    Reforward(MessageId),
}

/// Output of a handler.
#[derive(Clone, Debug, PartialEq)]
pub enum Action {
    Send { to: ProcessId, msg: WireMessage },
    /// Send to every process, including the sender itself.
    Broadcast(WireMessage),
    /// `WAN-deliver(m)`.
    Deliver(Arc<MulticastMessage>),
    SetTimer { timer: Timer, delay: Tick },
    RaiseAlert(Arc<AlertEvidence>),
}

/// Why a handler ignored its input.
#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
pub enum Rejection {
    #[error("sender is known to be faulty")]
    KnownFaulty,
    #[error("protocol tag not handled by this engine")]
    WrongProtocol,
    #[error("message not authentic for the channel it arrived on")]
    Unauthentic,
    #[error("invalid signature")]
    InvalidSignature,
    #[error("conflicts with a previously recorded message")]
    Conflict,
    #[error("duplicate")]
    Duplicate,
    #[error("no matching outstanding request")]
    Unsolicited,
    #[error("signer outside the expected witness range")]
    OutOfRange,
    #[error("ack set does not meet the delivery rule")]
    InvalidAckSet,
    #[error("holdback buffer full")]
    HoldbackFull,
    #[error("invalid alert evidence")]
    BogusAlert,
}

impl Rejection {
    pub fn as_str(self) -> &'static str {
        match self {
            Rejection::KnownFaulty => "known-faulty",
            Rejection::WrongProtocol => "wrong-protocol",
            Rejection::Unauthentic => "unauthentic",
            Rejection::InvalidSignature => "invalid-signature",
            Rejection::Conflict => "conflict",
            Rejection::Duplicate => "duplicate",
            Rejection::Unsolicited => "unsolicited",
            Rejection::OutOfRange => "out-of-range",
            Rejection::InvalidAckSet => "invalid-ack-set",
            Rejection::HoldbackFull => "holdback-full",
            Rejection::BogusAlert => "bogus-alert",
        }
    }
}

pub type HandlerResult = Result<Vec<Action>, Rejection>;
