//! Identities, digests and signatures shared by every protocol.
//!
//! Cryptography is modeled, not implemented: a [`Digest`] is SHA-256 over a
//! canonical encoding, and a [`Signature`] is a keyed tag that only the
//! [`KeyRing`] can mint or check. The ring hands out [`SigningKey`]s under a
//! capability rule: a process may obtain its own key, and the adversary may
//! obtain the keys of faulty processes only. Every other request is a
//! [`CryptoError::Forgery`].
//!
//! # Canonical encoding
//!
//! All multi-byte integers are little-endian.
//!
//! | item              | layout                                                     |
//! |-------------------|------------------------------------------------------------|
//! | `ProcessId`       | `u32`                                                      |
//! | `MessageId`       | sender `u32`, seq `u64`                                    |
//! | `MulticastMessage`| `b"MSG"`, id, payload length `u64`, payload bytes          |
//! | `Signature`       | signer `u32`, covered digest (32 bytes), key tag (16 bytes)|
//! | signed regular    | `b"REG"`, id, digest                                       |
//! | ack               | `b"ACK"`, protocol tag `u8`, id, digest, then `0u8` or `1u8` followed by the sender signature |

use std::collections::BTreeSet;
use std::fmt;

use sha2::{Digest as _, Sha256};
use thiserror::Error;

/// Width of a [`Digest`] in bytes.
pub const DIGEST_LEN: usize = 32;
/// Width of a signature key tag in bytes.
pub const TAG_LEN: usize = 16;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CryptoError {
    #[error("forgery attempt: {requester} asked for the private key of correct process {signer}")]
    Forgery { requester: Caller, signer: ProcessId },
    #[error("process {0} is outside the key ring")]
    UnknownProcess(ProcessId),
}

/// Index of a participating process, `0 ≤ index < n`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ProcessId(pub u32);

impl ProcessId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl From<usize> for ProcessId {
    fn from(i: usize) -> Self {
        ProcessId(i as u32)
    }
}

impl fmt::Display for ProcessId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// `⟨sender, seq⟩`. A correct sender numbers its multicasts `1, 2, 3, …`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MessageId {
    pub sender: ProcessId,
    pub seq: u64,
}

impl MessageId {
    pub fn new(sender: ProcessId, seq: u64) -> Self {
        MessageId { sender, seq }
    }

    fn encode_into(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.sender.0.to_le_bytes());
        out.extend_from_slice(&self.seq.to_le_bytes());
    }
}

impl fmt::Display for MessageId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.sender, self.seq)
    }
}

/// Application-level message handed to `WAN-multicast`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct MulticastMessage {
    pub id: MessageId,
    pub payload: Vec<u8>,
}

impl MulticastMessage {
    pub fn new(id: MessageId, payload: impl Into<Vec<u8>>) -> Self {
        MulticastMessage { id, payload: payload.into() }
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(3 + 12 + 8 + self.payload.len());
        out.extend_from_slice(b"MSG");
        self.id.encode_into(&mut out);
        out.extend_from_slice(&(self.payload.len() as u64).to_le_bytes());
        out.extend_from_slice(&self.payload);
        out
    }

    /// `H(m)`, covering the id as well as the payload.
    pub fn digest(&self) -> Digest {
        digest(&self.encode())
    }
}

/// Output of the hash function `H`.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Digest(pub [u8; DIGEST_LEN]);

impl Digest {
    /// First eight bytes as a big-endian integer; what traces record.
    pub fn prefix(&self) -> u64 {
        let mut b = [0u8; 8];
        b.copy_from_slice(&self.0[..8]);
        u64::from_be_bytes(b)
    }

    pub fn to_hex(&self) -> String {
        self.0.iter().map(|b| format!("{b:02x}")).collect()
    }
}

impl fmt::Debug for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Digest({:016x})", self.prefix())
    }
}

pub fn digest(data: &[u8]) -> Digest {
    Digest(Sha256::digest(data).into())
}

/// Who is asking the key ring for a private key.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Caller {
    Process(ProcessId),
    Adversary,
}

impl fmt::Display for Caller {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Caller::Process(p) => write!(f, "process {p}"),
            Caller::Adversary => write!(f, "the adversary"),
        }
    }
}

/// `⟨d⟩_i`: a signature of `signer` over the data whose digest is `over`.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Signature {
    pub signer: ProcessId,
    pub over: Digest,
    pub key_tag: [u8; TAG_LEN],
}

impl Signature {
    fn encode_into(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.signer.0.to_le_bytes());
        out.extend_from_slice(&self.over.0);
        out.extend_from_slice(&self.key_tag);
    }
}

impl fmt::Debug for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Sig(by {} over {:016x})", self.signer, self.over.prefix())
    }
}

/// Holder of the world secret from which every private key is derived.
///
/// Verification is public: anyone holding a `&KeyRing` can check a
/// signature, but minting one requires a [`SigningKey`].
#[derive(Clone)]
pub struct KeyRing {
    secret: [u8; 32],
    n: usize,
    faulty: BTreeSet<ProcessId>,
}

impl fmt::Debug for KeyRing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KeyRing").field("n", &self.n).field("faulty", &self.faulty).finish()
    }
}

impl KeyRing {
    pub fn new(n: usize, seed: u64, faulty: BTreeSet<ProcessId>) -> Self {
        let mut h = Sha256::new();
        h.update(b"securecast/keyring");
        h.update(seed.to_le_bytes());
        KeyRing { secret: h.finalize().into(), n, faulty }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn faulty(&self) -> &BTreeSet<ProcessId> {
        &self.faulty
    }

    pub fn is_faulty(&self, p: ProcessId) -> bool {
        self.faulty.contains(&p)
    }

    /// Hands out `signer`'s private key if `requester` is entitled to it.
    pub fn signing_key(&self, requester: Caller, signer: ProcessId) -> Result<SigningKey, CryptoError> {
        if signer.index() >= self.n {
            return Err(CryptoError::UnknownProcess(signer));
        }
        let allowed = match requester {
            Caller::Process(p) => p == signer,
            Caller::Adversary => self.faulty.contains(&signer),
        };
        if !allowed {
            return Err(CryptoError::Forgery { requester, signer });
        }
        Ok(SigningKey { signer, holder: requester, private: self.private_key(signer) })
    }

    fn private_key(&self, signer: ProcessId) -> [u8; 32] {
        let mut h = Sha256::new();
        h.update(self.secret);
        h.update(signer.0.to_le_bytes());
        h.finalize().into()
    }

    pub fn verify(&self, signer: ProcessId, data: &[u8], sig: &Signature) -> bool {
        sig.signer == signer && sig.over == digest(data) && self.verify_digest(sig)
    }

    /// Checks that `sig` is a genuine signature over `sig.over`, without
    /// rehashing the underlying data.
    pub fn verify_digest(&self, sig: &Signature) -> bool {
        sig.signer.index() < self.n && tag(&self.private_key(sig.signer), &sig.over) == sig.key_tag
    }
}

fn tag(private: &[u8; 32], over: &Digest) -> [u8; TAG_LEN] {
    let mut h = Sha256::new();
    h.update(b"sig");
    h.update(private);
    h.update(over.0);
    let full: [u8; 32] = h.finalize().into();
    let mut out = [0u8; TAG_LEN];
    out.copy_from_slice(&full[..TAG_LEN]);
    out
}

/// A private key, together with the party that was allowed to obtain it.
#[derive(Clone)]
pub struct SigningKey {
    signer: ProcessId,
    holder: Caller,
    private: [u8; 32],
}

impl fmt::Debug for SigningKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SigningKey").field("signer", &self.signer).field("holder", &self.holder).finish()
    }
}

impl SigningKey {
    pub fn signer(&self) -> ProcessId {
        self.signer
    }

    pub fn holder(&self) -> Caller {
        self.holder
    }

    pub fn sign(&self, data: &[u8]) -> Signature {
        let over = digest(data);
        Signature { signer: self.signer, over, key_tag: tag(&self.private, &over) }
    }
}

/// Wire-level protocol tag carried in every PDU.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ProtocolTag {
    E,
    ThreeT,
    Av,
}

impl ProtocolTag {
    pub fn as_str(self) -> &'static str {
        match self {
            ProtocolTag::E => "E",
            ProtocolTag::ThreeT => "3T",
            ProtocolTag::Av => "AV",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "E" => Some(ProtocolTag::E),
            "3T" => Some(ProtocolTag::ThreeT),
            "AV" => Some(ProtocolTag::Av),
            _ => None,
        }
    }

    fn byte(self) -> u8 {
        match self {
            ProtocolTag::E => 0,
            ProtocolTag::ThreeT => 1,
            ProtocolTag::Av => 2,
        }
    }
}

impl fmt::Display for ProtocolTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Bytes a sender signs for its own AV regular message: `(p_i, seq, H(m))`.
pub fn regular_signing_bytes(subject: MessageId, digest: &Digest) -> Vec<u8> {
    let mut out = Vec::with_capacity(3 + 12 + DIGEST_LEN);
    out.extend_from_slice(b"REG");
    subject.encode_into(&mut out);
    out.extend_from_slice(&digest.0);
    out
}

fn ack_signing_bytes(
    proto: ProtocolTag,
    subject: MessageId,
    digest: &Digest,
    sender_sig: Option<&Signature>,
) -> Vec<u8> {
    let mut out = Vec::with_capacity(4 + 12 + DIGEST_LEN + 1 + 52);
    out.extend_from_slice(b"ACK");
    out.push(proto.byte());
    subject.encode_into(&mut out);
    out.extend_from_slice(&digest.0);
    match sender_sig {
        None => out.push(0),
        Some(s) => {
            out.push(1);
            s.encode_into(&mut out);
        }
    }
    out
}

/// A signed acknowledgment `⟨proto, ack, sender, seq, H(m) [, sign]⟩_signer`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Ack {
    pub proto: ProtocolTag,
    pub signer: ProcessId,
    pub subject: MessageId,
    pub digest: Digest,
    /// The sender's own signature; present on AV acks only.
    pub sender_sig: Option<Signature>,
    pub sig: Signature,
}

impl Ack {
    pub fn sign(
        key: &SigningKey,
        proto: ProtocolTag,
        subject: MessageId,
        digest: Digest,
        sender_sig: Option<Signature>,
    ) -> Ack {
        let sig = key.sign(&ack_signing_bytes(proto, subject, &digest, sender_sig.as_ref()));
        Ack { proto, signer: key.signer(), subject, digest, sender_sig, sig }
    }

    pub fn verify(&self, ring: &KeyRing) -> bool {
        let data = ack_signing_bytes(self.proto, self.subject, &self.digest, self.sender_sig.as_ref());
        ring.verify(self.signer, &data, &self.sig)
    }

    /// Same subject, different digest.
    pub fn conflicts(&self, other: &Ack) -> bool {
        self.subject == other.subject && self.digest != other.digest
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AckSetError {
    #[error("an ack set needs at least one ack")]
    Empty,
    #[error("ack by {0} does not match the set's (protocol, subject, digest)")]
    Mismatch(ProcessId),
    #[error("duplicate signer {0}")]
    DuplicateSigner(ProcessId),
}

/// Acknowledgments from distinct signers, all for the same
/// `(proto, subject, digest)`. Sorted by signer.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct AckSet {
    proto: ProtocolTag,
    subject: MessageId,
    digest: Digest,
    acks: Vec<Ack>,
}

impl AckSet {
    pub fn new(acks: impl IntoIterator<Item = Ack>) -> Result<AckSet, AckSetError> {
        let mut acks: Vec<Ack> = acks.into_iter().collect();
        let first = acks.first().ok_or(AckSetError::Empty)?;
        let (proto, subject, digest) = (first.proto, first.subject, first.digest);
        if let Some(a) = acks.iter().find(|a| a.proto != proto || a.subject != subject || a.digest != digest) {
            return Err(AckSetError::Mismatch(a.signer));
        }
        acks.sort_by_key(|a| a.signer);
        if let Some(w) = acks.windows(2).find(|w| w[0].signer == w[1].signer) {
            return Err(AckSetError::DuplicateSigner(w[0].signer));
        }
        Ok(AckSet { proto, subject, digest, acks })
    }

    pub fn proto(&self) -> ProtocolTag {
        self.proto
    }

    pub fn subject(&self) -> MessageId {
        self.subject
    }

    pub fn digest(&self) -> Digest {
        self.digest
    }

    pub fn acks(&self) -> &[Ack] {
        &self.acks
    }

    pub fn len(&self) -> usize {
        self.acks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.acks.is_empty()
    }

    pub fn signers(&self) -> impl Iterator<Item = ProcessId> + '_ {
        self.acks.iter().map(|a| a.signer)
    }

    /// Signers whose ack verifies and who satisfy `eligible`.
    ///
    /// Invalid acks are skipped rather than poisoning the set, so the count
    /// can only shrink when acks are removed.
    pub fn count_valid(&self, ring: &KeyRing, mut eligible: impl FnMut(ProcessId) -> bool) -> usize {
        self.acks.iter().filter(|a| eligible(a.signer) && a.verify(ring)).count()
    }

    /// True when every ack verifies.
    pub fn all_valid(&self, ring: &KeyRing) -> bool {
        self.acks.iter().all(|a| a.verify(ring))
    }

    pub fn without(&self, signer: ProcessId) -> Option<AckSet> {
        AckSet::new(self.acks.iter().filter(|a| a.signer != signer).cloned()).ok()
    }
}
