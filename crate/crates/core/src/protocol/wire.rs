use std::fmt;
use std::sync::Arc;

use crate::crypto::{regular_signing_bytes, Ack, AckSet, Digest, KeyRing, MessageId, MulticastMessage, ProcessId, ProtocolTag, Signature};

/// Role field of a protocol PDU.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Role {
    Regular,
    Ack,
    Deliver,
    Inform,
    Verify,
    Alert,
    SmNotify,
}

impl Role {
    pub const ALL: [Role; 7] =
        [Role::Regular, Role::Ack, Role::Deliver, Role::Inform, Role::Verify, Role::Alert, Role::SmNotify];

    pub fn as_str(self) -> &'static str {
        match self {
            Role::Regular => "regular",
            Role::Ack => "ack",
            Role::Deliver => "deliver",
            Role::Inform => "inform",
            Role::Verify => "verify",
            Role::Alert => "alert",
            Role::SmNotify => "sm_notify",
        }
    }

    pub fn parse(s: &str) -> Option<Role> {
        Role::ALL.into_iter().find(|r| r.as_str() == s)
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A regular message carrying its sender's signature over `(sender, seq, H(m))`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SignedRegular {
    pub subject: MessageId,
    pub digest: Digest,
    pub sender_sig: Signature,
}

impl SignedRegular {
    pub fn verify(&self, ring: &KeyRing) -> bool {
        ring.verify(self.subject.sender, &regular_signing_bytes(self.subject, &self.digest), &self.sender_sig)
    }
}

/// Proof of equivocation: two conflicting messages, both signed by their sender.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct AlertEvidence {
    pub first: SignedRegular,
    pub second: SignedRegular,
}

impl AlertEvidence {
    pub fn accused(&self) -> ProcessId {
        self.first.subject.sender
    }

    pub fn subject(&self) -> MessageId {
        self.first.subject
    }

    pub fn is_valid(&self, ring: &KeyRing) -> bool {
        self.first.subject == self.second.subject
            && self.first.digest != self.second.digest
            && self.first.verify(ring)
            && self.second.verify(ring)
    }
}

/// What the stability oracle tells a process: `(message, who delivered it)`.
pub type StabilityBatch = Arc<Vec<(MessageId, ProcessId)>>;

/// Role-specific contents of a PDU.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum WireBody {
    Regular { subject: MessageId, digest: Digest, sender_sig: Option<Signature> },
    Ack(Ack),
    Deliver { message: Arc<MulticastMessage>, acks: Arc<AckSet> },
    Inform(SignedRegular),
    Verify { subject: MessageId, digest: Digest },
    Alert(Arc<AlertEvidence>),
    SmNotify { batch_id: u64, batch: StabilityBatch },
}

/// A tagged protocol PDU.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WireMessage {
    pub proto: ProtocolTag,
    pub body: WireBody,
}

impl WireMessage {
    pub fn regular(proto: ProtocolTag, subject: MessageId, digest: Digest, sender_sig: Option<Signature>) -> Self {
        WireMessage { proto, body: WireBody::Regular { subject, digest, sender_sig } }
    }

    pub fn role(&self) -> Role {
        match &self.body {
            WireBody::Regular { .. } => Role::Regular,
            WireBody::Ack(_) => Role::Ack,
            WireBody::Deliver { .. } => Role::Deliver,
            WireBody::Inform(_) => Role::Inform,
            WireBody::Verify { .. } => Role::Verify,
            WireBody::Alert(_) => Role::Alert,
            WireBody::SmNotify { .. } => Role::SmNotify,
        }
    }

    pub fn subject(&self) -> Option<MessageId> {
        match &self.body {
            WireBody::Regular { subject, .. } | WireBody::Verify { subject, .. } => Some(*subject),
            WireBody::Ack(a) => Some(a.subject),
            WireBody::Deliver { message, .. } => Some(message.id),
            WireBody::Inform(s) => Some(s.subject),
            WireBody::Alert(e) => Some(e.subject()),
            WireBody::SmNotify { .. } => None,
        }
    }

    pub fn digest(&self) -> Option<Digest> {
        match &self.body {
            WireBody::Regular { digest, .. } | WireBody::Verify { digest, .. } => Some(*digest),
            WireBody::Ack(a) => Some(a.digest),
            WireBody::Deliver { acks, .. } => Some(acks.digest()),
            WireBody::Inform(s) => Some(s.digest),
            WireBody::Alert(e) => Some(e.first.digest),
            WireBody::SmNotify { .. } => None,
        }
    }
}
