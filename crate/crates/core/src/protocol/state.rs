use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::wire::{AlertEvidence, SignedRegular, StabilityBatch, WireBody, WireMessage};
use super::{Action, HandlerResult, ProtocolError, ProtocolKind, ProtocolParams, Rejection, Tick, Timer};
use crate::crypto::{
    regular_signing_bytes, Ack, AckSet, Digest, KeyRing, MessageId, MulticastMessage, ProcessId, ProtocolTag,
    Signature, SigningKey,
};
use crate::quorum::{sample_peers, w3t_with_layout, w_active, WitnessSet};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Regime {
    Active,
    Recovery,
}

/// One of our own multicasts that is still collecting acknowledgments.
#[derive(Clone, Debug)]
pub struct PendingSend {
    pub message: Arc<MulticastMessage>,
    pub digest: Digest,
    pub regime: Regime,
    pub sender_sig: Option<Signature>,
    pub acks: BTreeMap<ProcessId, Ack>,
    /// Processes whose acks count; `None` means everyone.
    pub range: Option<WitnessSet>,
    pub threshold: usize,
    pub done: bool,
}

#[derive(Clone, Debug)]
struct Recorded {
    digest: Digest,
    signed: Option<SignedRegular>,
}

enum RecordOutcome {
    Fresh,
    Same,
    Conflict(Option<AlertEvidence>),
}

#[derive(Clone, Debug)]
struct Probe {
    digest: Digest,
    sender_sig: Signature,
    targets: Vec<ProcessId>,
    verified: BTreeSet<ProcessId>,
    acked: bool,
}

type Validated = (Arc<MulticastMessage>, Arc<AckSet>);

/// Protocol engine of a single process.
#[derive(Clone, Debug)]
pub struct ProcessState {
    me: ProcessId,
    params: ProtocolParams,
    ring: Arc<KeyRing>,
    key: SigningKey,
    rng: ChaCha8Rng,
    next_seq: u64,
    delivery: Vec<u64>,
    recorded: BTreeMap<MessageId, Recorded>,
    pending: BTreeMap<u64, PendingSend>,
    holdback: BTreeMap<MessageId, Validated>,
    probes: BTreeMap<MessageId, Probe>,
    known_faulty: BTreeSet<ProcessId>,
    stability: BTreeMap<MessageId, Vec<u64>>,
    reforward: BTreeMap<MessageId, Validated>,
}

impl ProcessState {
    /// A fresh engine with an all-zero delivery vector.
    ///
    /// `key` must be `me`'s own signing key; `rng_seed` seeds the stream used
    /// for peer selection.
    pub fn new(
        me: ProcessId,
        params: ProtocolParams,
        ring: Arc<KeyRing>,
        key: SigningKey,
        rng_seed: u64,
    ) -> Result<Self, ProtocolError> {
        params.validate()?;
        let n = params.n();
        if me.index() >= n || key.signer() != me {
            return Err(ProtocolError::BadProcess { me, n });
        }
        Ok(ProcessState {
            me,
            params,
            ring,
            key,
            rng: ChaCha8Rng::seed_from_u64(rng_seed),
            next_seq: 0,
            delivery: vec![0; n],
            recorded: BTreeMap::new(),
            pending: BTreeMap::new(),
            holdback: BTreeMap::new(),
            probes: BTreeMap::new(),
            known_faulty: BTreeSet::new(),
            stability: BTreeMap::new(),
            reforward: BTreeMap::new(),
        })
    }

    pub fn me(&self) -> ProcessId {
        self.me
    }

    pub fn params(&self) -> &ProtocolParams {
        &self.params
    }

    pub fn kind(&self) -> ProtocolKind {
        self.params.kind
    }

    /// `delivery_i[]`: last delivered sequence number per sender.
    pub fn delivery(&self) -> &[u64] {
        &self.delivery
    }

    pub fn known_faulty(&self) -> &BTreeSet<ProcessId> {
        &self.known_faulty
    }

    pub fn pending(&self, seq: u64) -> Option<&PendingSend> {
        self.pending.get(&seq)
    }

    pub fn recorded_digest(&self, id: MessageId) -> Option<Digest> {
        self.recorded.get(&id).map(|r| r.digest)
    }

    pub fn holdback_len(&self) -> usize {
        self.holdback.len()
    }

    /// Peers chosen for `id` and how many of them have verified.
    pub fn probe_status(&self, id: MessageId) -> Option<(&[ProcessId], usize)> {
        self.probes.get(&id).map(|p| (p.targets.as_slice(), p.verified.len()))
    }

    pub fn stability_knows(&self, id: MessageId, who: ProcessId) -> bool {
        self.stability.get(&id).is_some_and(|bits| bit(bits, who.index()))
    }

    pub fn w3t(&self, id: MessageId) -> WitnessSet {
        w3t_with_layout(id, self.params.quorum, &self.params.witness_seed, self.params.w3t_layout)
    }

    pub fn w_active(&self, id: MessageId) -> WitnessSet {
        // kappa ≤ n is checked by ProtocolParams::validate.
        w_active(id, self.params.kappa, self.params.quorum, &self.params.witness_seed)
            .expect("validated kappa")
    }

    /// Multicasts `payload` under the next sequence number.
    pub fn multicast(&mut self, payload: impl Into<Vec<u8>>) -> Result<(MessageId, Vec<Action>), ProtocolError> {
        let id = MessageId::new(self.me, self.next_seq + 1);
        let actions = self.wan_multicast(MulticastMessage::new(id, payload))?;
        Ok((id, actions))
    }

    /// `WAN-multicast(m)`. `m` must carry the next gapless sequence number.
    pub fn wan_multicast(&mut self, message: MulticastMessage) -> Result<Vec<Action>, ProtocolError> {
        if message.id.sender != self.me {
            return Err(ProtocolError::NotSender { me: self.me, sender: message.id.sender });
        }
        if message.id.seq != self.next_seq + 1 {
            return Err(ProtocolError::SequenceGap { expected: self.next_seq + 1, got: message.id.seq });
        }
        self.next_seq += 1;
        let id = message.id;
        let digest = message.digest();
        let message = Arc::new(message);
        let q = self.params.quorum;
        let mut actions = Vec::new();
        let (range, threshold, sender_sig, regime) = match self.params.kind {
            ProtocolKind::E => {
                let regular = WireMessage::regular(ProtocolTag::E, id, digest, None);
                actions.extend((0..q.n()).map(|j| Action::Send { to: ProcessId::from(j), msg: regular.clone() }));
                (None, q.dissemination_quorum_size(), None, Regime::Active)
            }
            ProtocolKind::ThreeT => {
                let range = self.w3t(id);
                let regular = WireMessage::regular(ProtocolTag::ThreeT, id, digest, None);
                actions.extend(range.iter().map(|to| Action::Send { to, msg: regular.clone() }));
                (Some(range), q.w3t_threshold(), None, Regime::Active)
            }
            ProtocolKind::Act => {
                let sig = self.key.sign(&regular_signing_bytes(id, &digest));
                let range = self.w_active(id);
                let regular = WireMessage::regular(ProtocolTag::Av, id, digest, Some(sig));
                actions.extend(range.iter().map(|to| Action::Send { to, msg: regular.clone() }));
                actions.push(Action::SetTimer { timer: Timer::Recovery(id), delay: self.params.recovery_timeout });
                let threshold = self.params.kappa - self.params.active_slack_c;
                (Some(range), threshold, Some(sig), Regime::Active)
            }
        };
        self.pending.insert(
            id.seq,
            PendingSend { message, digest, regime, sender_sig, acks: BTreeMap::new(), range, threshold, done: false },
        );
        Ok(actions)
    }

    fn accepts(&self, proto: ProtocolTag, body: &WireBody) -> bool {
        match self.params.kind {
            ProtocolKind::E => proto == ProtocolTag::E,
            ProtocolKind::ThreeT => proto == ProtocolTag::ThreeT,
            ProtocolKind::Act => match body {
                WireBody::Regular { .. } | WireBody::Ack(_) => matches!(proto, ProtocolTag::Av | ProtocolTag::ThreeT),
                WireBody::Alert(_) | WireBody::SmNotify { .. } => true,
                _ => proto == ProtocolTag::Av,
            },
        }
    }

    /// Dispatches a PDU received from `from` over an authenticated channel.
    pub fn handle(&mut self, from: ProcessId, msg: &WireMessage, now: Tick) -> HandlerResult {
        match &msg.body {
            WireBody::Alert(evidence) => return self.on_alert(evidence),
            WireBody::SmNotify { batch, .. } => return self.on_sm_notify(batch),
            _ => {}
        }
        if self.known_faulty.contains(&from) {
            return Err(Rejection::KnownFaulty);
        }
        if from.index() >= self.params.n() {
            return Err(Rejection::Unauthentic);
        }
        if !self.accepts(msg.proto, &msg.body) {
            return Err(Rejection::WrongProtocol);
        }
        match &msg.body {
            WireBody::Regular { subject, digest, sender_sig } => {
                self.on_regular(from, msg.proto, *subject, *digest, *sender_sig, now)
            }
            WireBody::Inform(signed) => self.on_inform(from, signed),
            WireBody::Verify { subject, digest } => self.on_verify(from, *subject, *digest),
            WireBody::Ack(ack) => self.on_ack(from, ack),
            WireBody::Deliver { message, acks } => self.on_deliver(message, acks),
            WireBody::Alert(_) | WireBody::SmNotify { .. } => unreachable!(),
        }
    }

    fn record(&mut self, subject: MessageId, digest: Digest, signed: Option<SignedRegular>) -> RecordOutcome {
        match self.recorded.get_mut(&subject) {
            None => {
                self.recorded.insert(subject, Recorded { digest, signed });
                RecordOutcome::Fresh
            }
            Some(r) if r.digest == digest => {
                if r.signed.is_none() {
                    r.signed = signed;
                }
                RecordOutcome::Same
            }
            Some(r) => match (&r.signed, signed) {
                (Some(first), Some(second)) => {
                    RecordOutcome::Conflict(Some(AlertEvidence { first: first.clone(), second }))
                }
                _ => RecordOutcome::Conflict(None),
            },
        }
    }

    /// Turns a conflicting record into an alert, or a silent refusal when
    /// the conflict cannot be proven.
    fn refuse(&mut self, outcome: RecordOutcome) -> HandlerResult {
        match outcome {
            RecordOutcome::Conflict(Some(evidence)) => {
                let accused = evidence.accused();
                if self.known_faulty.insert(accused) {
                    Ok(vec![Action::RaiseAlert(Arc::new(evidence))])
                } else {
                    Err(Rejection::KnownFaulty)
                }
            }
            _ => Err(Rejection::Conflict),
        }
    }

    pub fn on_regular(
        &mut self,
        from: ProcessId,
        proto: ProtocolTag,
        subject: MessageId,
        digest: Digest,
        sender_sig: Option<Signature>,
        now: Tick,
    ) -> HandlerResult {
        if subject.sender != from {
            return Err(Rejection::Unauthentic);
        }
        match (self.params.kind, proto) {
            (ProtocolKind::E, ProtocolTag::E) | (ProtocolKind::ThreeT, ProtocolTag::ThreeT) => {
                match self.record(subject, digest, None) {
                    RecordOutcome::Conflict(_) => Err(Rejection::Conflict),
                    _ => {
                        let ack = Ack::sign(&self.key, proto, subject, digest, None);
                        Ok(vec![Action::Send { to: from, msg: WireMessage { proto, body: WireBody::Ack(ack) } }])
                    }
                }
            }
            (ProtocolKind::Act, ProtocolTag::ThreeT) => match self.record(subject, digest, None) {
                RecordOutcome::Conflict(_) => Err(Rejection::Conflict),
                _ => Ok(vec![Action::SetTimer {
                    timer: Timer::DelayedAck { subject, digest, requested_at: now },
                    delay: self.params.recovery_ack_delay,
                }]),
            },
            (ProtocolKind::Act, ProtocolTag::Av) => {
                let sig = sender_sig.ok_or(Rejection::InvalidSignature)?;
                let signed = SignedRegular { subject, digest, sender_sig: sig };
                if !signed.verify(&self.ring) {
                    return Err(Rejection::InvalidSignature);
                }
                match self.record(subject, digest, Some(signed.clone())) {
                    c @ RecordOutcome::Conflict(_) => return self.refuse(c),
                    RecordOutcome::Fresh | RecordOutcome::Same => {}
                }
                if self.probes.contains_key(&subject) {
                    return Err(Rejection::Duplicate);
                }
                self.start_probe(signed)
            }
            _ => Err(Rejection::WrongProtocol),
        }
    }

    /// Active phase: inform `δ` random peers of `W_3T(m)` before acknowledging.
    fn start_probe(&mut self, signed: SignedRegular) -> HandlerResult {
        let range = self.w3t(signed.subject);
        let targets = sample_peers(range.members(), Some(self.me), self.params.delta, &mut self.rng);
        let mut actions: Vec<Action> = targets
            .iter()
            .map(|&to| Action::Send {
                to,
                msg: WireMessage { proto: ProtocolTag::Av, body: WireBody::Inform(signed.clone()) },
            })
            .collect();
        let probe = Probe {
            digest: signed.digest,
            sender_sig: signed.sender_sig,
            targets,
            verified: BTreeSet::new(),
            acked: false,
        };
        let ready = probe.targets.is_empty();
        self.probes.insert(signed.subject, probe);
        if ready {
            actions.extend(self.finish_probe(signed.subject));
        }
        Ok(actions)
    }

    fn finish_probe(&mut self, subject: MessageId) -> Option<Action> {
        let probe = self.probes.get_mut(&subject)?;
        if probe.acked || self.known_faulty.contains(&subject.sender) {
            return None;
        }
        probe.acked = true;
        // The ack reveals nothing about which peers were probed.
        let ack = Ack::sign(&self.key, ProtocolTag::Av, subject, probe.digest, Some(probe.sender_sig));
        Some(Action::Send {
            to: subject.sender,
            msg: WireMessage { proto: ProtocolTag::Av, body: WireBody::Ack(ack) },
        })
    }

    pub fn on_inform(&mut self, from: ProcessId, signed: &SignedRegular) -> HandlerResult {
        if self.known_faulty.contains(&signed.subject.sender) {
            return Err(Rejection::KnownFaulty);
        }
        if !signed.verify(&self.ring) {
            return Err(Rejection::InvalidSignature);
        }
        match self.record(signed.subject, signed.digest, Some(signed.clone())) {
            c @ RecordOutcome::Conflict(_) => self.refuse(c),
            RecordOutcome::Fresh | RecordOutcome::Same => Ok(vec![Action::Send {
                to: from,
                msg: WireMessage {
                    proto: ProtocolTag::Av,
                    body: WireBody::Verify { subject: signed.subject, digest: signed.digest },
                },
            }]),
        }
    }

    pub fn on_verify(&mut self, from: ProcessId, subject: MessageId, digest: Digest) -> HandlerResult {
        let probe = self.probes.get_mut(&subject).ok_or(Rejection::Unsolicited)?;
        if probe.digest != digest || !probe.targets.contains(&from) {
            return Err(Rejection::Unsolicited);
        }
        if !probe.verified.insert(from) {
            return Err(Rejection::Duplicate);
        }
        if probe.verified.len() < probe.targets.len() {
            return Ok(vec![]);
        }
        Ok(self.finish_probe(subject).into_iter().collect())
    }

    pub fn on_ack(&mut self, from: ProcessId, ack: &Ack) -> HandlerResult {
        if ack.signer != from {
            return Err(Rejection::Unauthentic);
        }
        if ack.subject.sender != self.me {
            return Err(Rejection::Unsolicited);
        }
        let kind = self.params.kind;
        let pending = self.pending.get_mut(&ack.subject.seq).ok_or(Rejection::Unsolicited)?;
        if pending.done {
            return Err(Rejection::Duplicate);
        }
        if ack.digest != pending.digest {
            return Err(Rejection::Unsolicited);
        }
        let expected = match (kind, pending.regime) {
            (ProtocolKind::E, _) => ProtocolTag::E,
            (ProtocolKind::ThreeT, _) | (ProtocolKind::Act, Regime::Recovery) => ProtocolTag::ThreeT,
            (ProtocolKind::Act, Regime::Active) => ProtocolTag::Av,
        };
        if ack.proto != expected {
            return Err(Rejection::WrongProtocol);
        }
        if expected == ProtocolTag::Av && ack.sender_sig != pending.sender_sig {
            return Err(Rejection::InvalidSignature);
        }
        if pending.range.as_ref().is_some_and(|r| !r.contains(ack.signer)) {
            return Err(Rejection::OutOfRange);
        }
        if pending.acks.contains_key(&ack.signer) {
            return Err(Rejection::Duplicate);
        }
        if !ack.verify(&self.ring) {
            return Err(Rejection::InvalidSignature);
        }
        pending.acks.insert(ack.signer, ack.clone());
        if pending.acks.len() < pending.threshold {
            return Ok(vec![]);
        }
        pending.done = true;
        let acks = AckSet::new(pending.acks.values().cloned()).expect("acks share one header");
        Ok(vec![Action::Broadcast(WireMessage {
            proto: kind.tag(),
            body: WireBody::Deliver { message: pending.message.clone(), acks: Arc::new(acks) },
        })])
    }

    /// ACT fast-path deadline: fall back to 3T over `W_3T(m)`.
    pub fn on_recovery_timeout(&mut self, subject: MessageId) -> HandlerResult {
        if self.params.kind != ProtocolKind::Act || subject.sender != self.me {
            return Ok(vec![]);
        }
        let range = self.w3t(subject);
        let threshold = self.params.quorum.w3t_threshold();
        let Some(pending) = self.pending.get_mut(&subject.seq) else {
            return Ok(vec![]);
        };
        if pending.done || pending.regime == Regime::Recovery {
            return Ok(vec![]);
        }
        pending.regime = Regime::Recovery;
        // Fast-path acks are not carried over into the recovery quorum.
        pending.acks.clear();
        pending.threshold = threshold;
        let regular = WireMessage::regular(ProtocolTag::ThreeT, subject, pending.digest, None);
        let actions = range.iter().map(|to| Action::Send { to, msg: regular.clone() }).collect();
        pending.range = Some(range);
        Ok(actions)
    }

    pub fn on_timer(&mut self, timer: &Timer, _now: Tick) -> HandlerResult {
        match timer {
            Timer::Recovery(id) => self.on_recovery_timeout(*id),
            Timer::DelayedAck { subject, digest, .. } => {
                if self.known_faulty.contains(&subject.sender) {
                    return Err(Rejection::KnownFaulty);
                }
                if self.recorded_digest(*subject) != Some(*digest) {
                    return Err(Rejection::Conflict);
                }
                let ack = Ack::sign(&self.key, ProtocolTag::ThreeT, *subject, *digest, None);
                Ok(vec![Action::Send {
                    to: subject.sender,
                    msg: WireMessage { proto: ProtocolTag::ThreeT, body: WireBody::Ack(ack) },
                }])
            }
            Timer::Reforward(id) => {
                let Some((message, acks)) = self.reforward.remove(id) else {
                    return Ok(vec![]);
                };
                let msg = WireMessage {
                    proto: self.params.kind.tag(),
                    body: WireBody::Deliver { message, acks },
                };
                Ok((0..self.params.n())
                    .map(ProcessId::from)
                    .filter(|&j| j != self.me && !self.known_faulty.contains(&j) && !self.stability_knows(*id, j))
                    .map(|to| Action::Send { to, msg: msg.clone() })
                    .collect())
            }
        }
    }

    /// Checks an ack set against this protocol's delivery rule.
    pub fn valid_delivery(&self, message: &MulticastMessage, acks: &AckSet) -> bool {
        let id = message.id;
        let digest = message.digest();
        if acks.subject() != id || acks.digest() != digest {
            return false;
        }
        let q = self.params.quorum;
        match (self.params.kind, acks.proto()) {
            (ProtocolKind::E, ProtocolTag::E) => acks.count_valid(&self.ring, |_| true) >= q.dissemination_quorum_size(),
            (ProtocolKind::ThreeT, ProtocolTag::ThreeT) | (ProtocolKind::Act, ProtocolTag::ThreeT) => {
                let range = self.w3t(id);
                acks.count_valid(&self.ring, |p| range.contains(p)) >= q.w3t_threshold()
            }
            (ProtocolKind::Act, ProtocolTag::Av) => {
                let range = self.w_active(id);
                let regular = regular_signing_bytes(id, &digest);
                let mut sender_ok: std::collections::HashMap<Signature, bool> = std::collections::HashMap::new();
                let valid = acks
                    .acks()
                    .iter()
                    .filter(|a| range.contains(a.signer))
                    .filter(|a| {
                        a.sender_sig.is_some_and(|s| {
                            *sender_ok.entry(s).or_insert_with(|| self.ring.verify(id.sender, &regular, &s))
                        })
                    })
                    .filter(|a| a.verify(&self.ring))
                    .count();
                valid >= self.params.kappa - self.params.active_slack_c
            }
            _ => false,
        }
    }

    pub fn on_deliver(&mut self, message: &Arc<MulticastMessage>, acks: &Arc<AckSet>) -> HandlerResult {
        let id = message.id;
        let s = id.sender.index();
        if s >= self.params.n() || id.seq == 0 {
            return Err(Rejection::Unauthentic);
        }
        if self.delivery[s] >= id.seq || self.holdback.contains_key(&id) {
            return Err(Rejection::Duplicate);
        }
        if !self.valid_delivery(message, acks) {
            return Err(Rejection::InvalidAckSet);
        }
        if self.delivery[s] + 1 != id.seq {
            if self.holdback.len() >= self.params.holdback_cap {
                return Err(Rejection::HoldbackFull);
            }
            self.holdback.insert(id, (message.clone(), acks.clone()));
            return Ok(vec![]);
        }
        let mut actions = self.deliver_now(message.clone(), acks.clone());
        let mut next = MessageId::new(id.sender, id.seq + 1);
        while let Some((m, a)) = self.holdback.remove(&next) {
            actions.extend(self.deliver_now(m, a));
            next.seq += 1;
        }
        Ok(actions)
    }

    fn deliver_now(&mut self, message: Arc<MulticastMessage>, acks: Arc<AckSet>) -> Vec<Action> {
        let id = message.id;
        self.delivery[id.sender.index()] = id.seq;
        self.reforward.insert(id, (message.clone(), acks));
        vec![
            Action::Deliver(message),
            Action::SetTimer { timer: Timer::Reforward(id), delay: self.params.reforward_timeout },
        ]
    }

    pub fn on_alert(&mut self, evidence: &AlertEvidence) -> HandlerResult {
        if !evidence.is_valid(&self.ring) {
            return Err(Rejection::BogusAlert);
        }
        self.known_faulty.insert(evidence.accused());
        Ok(vec![])
    }

    pub fn on_sm_notify(&mut self, batch: &StabilityBatch) -> HandlerResult {
        let n = self.params.n();
        for &(id, who) in batch.iter() {
            if who.index() < n {
                let bits = self.stability.entry(id).or_insert_with(|| vec![0; n.div_ceil(64)]);
                bits[who.index() / 64] |= 1 << (who.index() % 64);
            }
        }
        Ok(vec![])
    }
}

fn bit(bits: &[u64], i: usize) -> bool {
    bits.get(i / 64).is_some_and(|w| w & (1 << (i % 64)) != 0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::Caller;
    use crate::quorum::WitnessSeed;

    struct Group {
        ring: Arc<KeyRing>,
        procs: Vec<ProcessState>,
    }

    fn group(params: ProtocolParams, faulty: &[u32]) -> Group {
        let n = params.n();
        let ring = Arc::new(KeyRing::new(n, 11, faulty.iter().map(|&p| ProcessId(p)).collect()));
        let procs = (0..n)
            .map(|i| {
                let me = ProcessId::from(i);
                let key = ring.signing_key(Caller::Process(me), me).unwrap();
                ProcessState::new(me, params.clone(), ring.clone(), key, 100 + i as u64).unwrap()
            })
            .collect();
        Group { ring, procs }
    }

    fn sends(actions: &[Action]) -> Vec<(ProcessId, &WireMessage)> {
        actions
            .iter()
            .filter_map(|a| match a {
                Action::Send { to, msg } => Some((*to, msg)),
                _ => None,
            })
            .collect()
    }

    fn take_ack(actions: &[Action]) -> Ack {
        actions
            .iter()
            .find_map(|a| match a {
                Action::Send { msg: WireMessage { body: WireBody::Ack(ack), .. }, .. } => Some(ack.clone()),
                _ => None,
            })
            .expect("an ack")
    }

    fn broadcast_deliver(actions: &[Action]) -> Option<(Arc<MulticastMessage>, Arc<AckSet>)> {
        actions.iter().find_map(|a| match a {
            Action::Broadcast(WireMessage { body: WireBody::Deliver { message, acks }, .. }) => {
                Some((message.clone(), acks.clone()))
            }
            _ => None,
        })
    }

    fn e_params(n: usize, t: usize) -> ProtocolParams {
        ProtocolParams::new(ProtocolKind::E, n, t).unwrap()
    }

    #[test]
    fn init_has_zero_delivery_vector() {
        let g = group(e_params(4, 1), &[]);
        assert_eq!(g.procs[0].delivery(), &[0, 0, 0, 0]);
    }

    #[test]
    fn init_rejects_invalid_params() {
        assert!(matches!(ProtocolParams::act(10, 3, 4, 10), Err(ProtocolError::ProbeBudget { available: 7, needed: 40 })));
        assert!(ProtocolParams::new(ProtocolKind::ThreeT, 3, 1).is_err());
        let ring = Arc::new(KeyRing::new(4, 0, BTreeSet::new()));
        let key = ring.signing_key(Caller::Process(ProcessId(1)), ProcessId(1)).unwrap();
        assert!(ProcessState::new(ProcessId(0), e_params(4, 1), ring, key, 0).is_err());
    }

    #[test]
    fn sequence_gap_is_an_error() {
        let mut g = group(e_params(4, 1), &[]);
        let m = MulticastMessage::new(MessageId::new(ProcessId(0), 2), "x");
        assert_eq!(g.procs[0].wan_multicast(m), Err(ProtocolError::SequenceGap { expected: 1, got: 2 }));
        let m = MulticastMessage::new(MessageId::new(ProcessId(1), 1), "x");
        assert!(matches!(g.procs[0].wan_multicast(m), Err(ProtocolError::NotSender { .. })));
    }

    #[test]
    fn e_multicast_sends_regular_to_everyone() {
        let mut g = group(e_params(4, 1), &[]);
        let (_, actions) = g.procs[0].multicast("hello").unwrap();
        let s = sends(&actions);
        assert_eq!(s.len(), 4);
        assert!(s.iter().all(|(_, m)| m.role() == super::super::Role::Regular && m.proto == ProtocolTag::E));
    }

    #[test]
    fn three_t_multicast_targets_w3t() {
        let params = ProtocolParams::new(ProtocolKind::ThreeT, 10, 2).unwrap();
        let mut g = group(params, &[]);
        let (id, actions) = g.procs[0].multicast("x").unwrap();
        let range = g.procs[0].w3t(id);
        let s = sends(&actions);
        assert_eq!(s.len(), 7);
        assert!(s.iter().all(|(to, _)| range.contains(*to)));
    }

    #[test]
    fn act_multicast_signs_and_sets_timer() {
        let params = ProtocolParams::act(31, 10, 3, 5).unwrap();
        let mut g = group(params, &[]);
        let (id, actions) = g.procs[0].multicast("x").unwrap();
        let s = sends(&actions);
        assert_eq!(s.len(), 3);
        assert!(s.iter().all(|(_, m)| matches!(m.body, WireBody::Regular { sender_sig: Some(_), .. })));
        assert!(actions.iter().any(|a| matches!(a, Action::SetTimer { timer: Timer::Recovery(t), .. } if *t == id)));
    }

    #[test]
    fn e_regular_acked_once_conflict_refused() {
        let mut g = group(e_params(4, 1), &[]);
        let id = MessageId::new(ProcessId(0), 1);
        let d1 = crate::crypto::digest(b"m");
        let d2 = crate::crypto::digest(b"m'");
        let p = &mut g.procs[2];
        let actions = p.on_regular(ProcessId(0), ProtocolTag::E, id, d1, None, 0).unwrap();
        let ack = take_ack(&actions);
        assert_eq!(ack.signer, ProcessId(2));
        assert!(ack.verify(&g.ring));
        assert_eq!(p.on_regular(ProcessId(0), ProtocolTag::E, id, d2, None, 1), Err(Rejection::Conflict));
        // Only the sender itself may send its regular.
        assert_eq!(p.on_regular(ProcessId(1), ProtocolTag::E, id, d1, None, 1), Err(Rejection::Unauthentic));
    }

    #[test]
    fn e_third_ack_triggers_deliver_broadcast() {
        let mut g = group(e_params(4, 1), &[]);
        let (id, actions) = g.procs[0].multicast("m").unwrap();
        let digest = g.procs[0].pending(1).unwrap().digest;
        let mut acks = Vec::new();
        for j in 1..4 {
            let a = g.procs[j].on_regular(ProcessId(0), ProtocolTag::E, id, digest, None, 0).unwrap();
            acks.push(take_ack(&a));
        }
        drop(actions);
        let sender = &mut g.procs[0];
        assert!(sender.on_ack(ProcessId(1), &acks[0]).unwrap().is_empty());
        assert_eq!(sender.on_ack(ProcessId(1), &acks[0]), Err(Rejection::Duplicate));
        assert!(sender.on_ack(ProcessId(2), &acks[1]).unwrap().is_empty());
        let out = sender.on_ack(ProcessId(3), &acks[2]).unwrap();
        let (m, set) = broadcast_deliver(&out).expect("deliver broadcast");
        assert_eq!(m.id, id);
        assert_eq!(set.len(), 3);
    }

    #[test]
    fn three_t_ignores_ack_from_outside_w3t() {
        let params = ProtocolParams::new(ProtocolKind::ThreeT, 10, 2).unwrap();
        let mut g = group(params, &[]);
        let (id, _) = g.procs[0].multicast("m").unwrap();
        let digest = g.procs[0].pending(1).unwrap().digest;
        let range = g.procs[0].w3t(id);
        let outsider = (0..10).map(ProcessId::from).find(|p| !range.contains(*p)).unwrap();
        let actions = g.procs[outsider.index()].on_regular(ProcessId(0), ProtocolTag::ThreeT, id, digest, None, 0).unwrap();
        let ack = take_ack(&actions);
        assert_eq!(g.procs[0].on_ack(outsider, &ack), Err(Rejection::OutOfRange));
    }

    fn act_regular(g: &mut Group, sender: usize) -> (MessageId, Digest, Signature) {
        let (id, actions) = g.procs[sender].multicast("payload").unwrap();
        match &sends(&actions)[0].1.body {
            WireBody::Regular { digest, sender_sig: Some(sig), .. } => (id, *digest, *sig),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn act_regular_starts_probe_without_ack() {
        let params = ProtocolParams::act(31, 10, 3, 5).unwrap();
        let mut g = group(params, &[]);
        let (id, digest, sig) = act_regular(&mut g, 0);
        let p = &mut g.procs[7];
        let actions = p.on_regular(ProcessId(0), ProtocolTag::Av, id, digest, Some(sig), 0).unwrap();
        let s = sends(&actions);
        assert_eq!(s.len(), 5);
        assert!(s.iter().all(|(to, m)| m.role() == super::super::Role::Inform && *to != ProcessId(7)));
        assert!(!actions.iter().any(|a| matches!(a, Action::Send { msg: WireMessage { body: WireBody::Ack(_), .. }, .. })));
    }

    #[test]
    fn act_regular_with_bad_signature_dropped() {
        let params = ProtocolParams::act(31, 10, 3, 5).unwrap();
        let mut g = group(params, &[]);
        let (id, _, sig) = act_regular(&mut g, 0);
        let forged_digest = crate::crypto::digest(b"not what was signed");
        let r = g.procs[3].on_regular(ProcessId(0), ProtocolTag::Av, id, forged_digest, Some(sig), 0);
        assert_eq!(r, Err(Rejection::InvalidSignature));
        let r = g.procs[3].on_regular(ProcessId(0), ProtocolTag::Av, id, forged_digest, None, 0);
        assert_eq!(r, Err(Rejection::InvalidSignature));
    }

    #[test]
    fn verify_threshold_releases_ack() {
        let params = ProtocolParams::act(31, 10, 3, 5).unwrap();
        let mut g = group(params, &[]);
        let (id, digest, sig) = act_regular(&mut g, 0);
        let actions = g.procs[7].on_regular(ProcessId(0), ProtocolTag::Av, id, digest, Some(sig), 0).unwrap();
        let targets: Vec<ProcessId> = sends(&actions).iter().map(|(to, _)| *to).collect();
        let outsider = (0..31).map(ProcessId::from).find(|p| !targets.contains(p) && *p != ProcessId(7)).unwrap();
        let p = &mut g.procs[7];
        assert_eq!(p.on_verify(outsider, id, digest), Err(Rejection::Unsolicited));
        for (k, &peer) in targets.iter().enumerate() {
            let out = p.on_verify(peer, id, digest).unwrap();
            if k + 1 < targets.len() {
                assert!(out.is_empty(), "ack released after {} of 5 verifies", k + 1);
            } else {
                let ack = take_ack(&out);
                assert_eq!(ack.proto, ProtocolTag::Av);
                assert_eq!(ack.sender_sig, Some(sig));
                assert!(ack.verify(&g.ring));
            }
        }
        assert_eq!(p.probe_status(id).unwrap().1, 5);
    }

    #[test]
    fn inform_verifies_and_conflict_raises_alert() {
        let params = ProtocolParams::act(31, 10, 3, 5).unwrap();
        let mut g = group(params, &[0]);
        let faulty_key = g.ring.signing_key(Caller::Adversary, ProcessId(0)).unwrap();
        let id = MessageId::new(ProcessId(0), 1);
        let signed = |payload: &str| {
            let d = MulticastMessage::new(id, payload.to_string()).digest();
            SignedRegular { subject: id, digest: d, sender_sig: faulty_key.sign(&regular_signing_bytes(id, &d)) }
        };
        let (m, m2) = (signed("m"), signed("m'"));
        let p = &mut g.procs[5];
        let out = p.on_inform(ProcessId(9), &m).unwrap();
        assert!(matches!(&sends(&out)[0], (to, msg) if *to == ProcessId(9) && msg.role() == super::super::Role::Verify));
        // Idempotent on duplicates.
        assert_eq!(sends(&p.on_inform(ProcessId(9), &m).unwrap()).len(), 1);
        let out = p.on_inform(ProcessId(10), &m2).unwrap();
        let evidence = match &out[..] {
            [Action::RaiseAlert(e)] => e.clone(),
            other => panic!("expected an alert, got {other:?}"),
        };
        assert!(evidence.is_valid(&g.ring));
        assert!(p.known_faulty().contains(&ProcessId(0)));

        let q = &mut g.procs[6];
        assert!(q.on_alert(&evidence).unwrap().is_empty());
        assert!(q.on_alert(&evidence).unwrap().is_empty());
        assert_eq!(q.known_faulty().len(), 1);
        let mut bogus = (*evidence).clone();
        bogus.second.digest = bogus.first.digest;
        assert_eq!(g.procs[7].on_alert(&bogus), Err(Rejection::BogusAlert));
        let mut forged = (*evidence).clone();
        forged.second.sender_sig.key_tag[0] ^= 1;
        assert_eq!(g.procs[7].on_alert(&forged), Err(Rejection::BogusAlert));
        assert!(g.procs[7].known_faulty().is_empty());
    }

    #[test]
    fn known_faulty_sender_is_shunned() {
        let params = ProtocolParams::act(31, 10, 3, 5).unwrap();
        let mut g = group(params, &[]);
        let (id, digest, sig) = act_regular(&mut g, 0);
        g.procs[4].known_faulty.insert(ProcessId(0));
        let msg = WireMessage::regular(ProtocolTag::Av, id, digest, Some(sig));
        assert_eq!(g.procs[4].handle(ProcessId(0), &msg, 0), Err(Rejection::KnownFaulty));
    }

    #[test]
    fn recovery_timeout_switches_to_three_t() {
        let params = ProtocolParams::act(31, 10, 3, 5).unwrap();
        let mut g = group(params, &[]);
        let (id, _, _) = act_regular(&mut g, 0);
        let out = g.procs[0].on_recovery_timeout(id).unwrap();
        let s = sends(&out);
        assert_eq!(s.len(), 31);
        assert!(s.iter().all(|(_, m)| m.proto == ProtocolTag::ThreeT && m.role() == super::super::Role::Regular));
        assert_eq!(g.procs[0].pending(1).unwrap().regime, Regime::Recovery);
        assert!(g.procs[0].on_recovery_timeout(id).unwrap().is_empty());
        // E has no recovery regime.
        let mut e = group(e_params(4, 1), &[]);
        let (eid, _) = e.procs[0].multicast("x").unwrap();
        assert!(e.procs[0].on_recovery_timeout(eid).unwrap().is_empty());
    }

    #[test]
    fn recovery_ack_is_delayed_and_suppressed_after_alert() {
        let params = ProtocolParams::act(31, 10, 3, 5).unwrap();
        let mut g = group(params, &[]);
        let id = MessageId::new(ProcessId(0), 1);
        let d = crate::crypto::digest(b"m");
        let p = &mut g.procs[3];
        let out = p.on_regular(ProcessId(0), ProtocolTag::ThreeT, id, d, None, 40).unwrap();
        let timer = match &out[..] {
            [Action::SetTimer { timer, delay }] => {
                assert_eq!(*delay, 20);
                timer.clone()
            }
            other => panic!("{other:?}"),
        };
        assert_eq!(timer, Timer::DelayedAck { subject: id, digest: d, requested_at: 40 });
        let ack = take_ack(&p.on_timer(&timer, 60).unwrap());
        assert_eq!(ack.proto, ProtocolTag::ThreeT);
        p.known_faulty.insert(ProcessId(0));
        assert_eq!(p.on_timer(&timer, 60), Err(Rejection::KnownFaulty));
    }

    fn deliver_pair(g: &mut Group, sender: usize, payload: &str) -> (Arc<MulticastMessage>, Arc<AckSet>) {
        let (id, _) = g.procs[sender].multicast(payload.to_string()).unwrap();
        let digest = g.procs[sender].pending(id.seq).unwrap().digest;
        let n = g.procs.len();
        let mut out = None;
        for j in 0..n {
            let a = g.procs[j].on_regular(id.sender, ProtocolTag::E, id, digest, None, 0).unwrap();
            let ack = take_ack(&a);
            if let Ok(actions) = g.procs[sender].on_ack(ProcessId::from(j), &ack) {
                if let Some(d) = broadcast_deliver(&actions) {
                    out = Some(d);
                }
            }
        }
        out.unwrap()
    }

    #[test]
    fn deliver_in_order_with_holdback() {
        let mut g = group(e_params(4, 1), &[]);
        let (m1, a1) = deliver_pair(&mut g, 0, "one");
        let (m2, a2) = deliver_pair(&mut g, 0, "two");
        let (m3, a3) = deliver_pair(&mut g, 0, "three");
        let p = &mut g.procs[1];
        assert!(p.on_deliver(&m3, &a3).unwrap().is_empty());
        assert_eq!(p.holdback_len(), 1);
        assert_eq!(p.on_deliver(&m3, &a3), Err(Rejection::Duplicate));
        let out = p.on_deliver(&m1, &a1).unwrap();
        assert!(matches!(out[0], Action::Deliver(ref m) if m.id.seq == 1));
        assert_eq!(p.delivery()[0], 1);
        let out = p.on_deliver(&m2, &a2).unwrap();
        let delivered: Vec<u64> =
            out.iter().filter_map(|a| if let Action::Deliver(m) = a { Some(m.id.seq) } else { None }).collect();
        assert_eq!(delivered, vec![2, 3]);
        assert_eq!(p.delivery()[0], 3);
        assert_eq!(p.holdback_len(), 0);
        assert_eq!(p.on_deliver(&m1, &a1), Err(Rejection::Duplicate));
    }

    #[test]
    fn deliver_with_too_few_acks_dropped() {
        let mut g = group(e_params(4, 1), &[]);
        let (m, a) = deliver_pair(&mut g, 0, "one");
        let short = Arc::new(a.without(a.signers().next().unwrap()).unwrap());
        assert_eq!(short.len(), 2);
        assert_eq!(g.procs[2].on_deliver(&m, &short), Err(Rejection::InvalidAckSet));
        let other = Arc::new(MulticastMessage::new(m.id, "tampered"));
        assert_eq!(g.procs[2].on_deliver(&other, &a), Err(Rejection::InvalidAckSet));
    }

    #[test]
    fn reforward_skips_processes_known_to_have_delivered() {
        let mut g = group(e_params(4, 1), &[]);
        let (m, a) = deliver_pair(&mut g, 0, "one");
        let p = &mut g.procs[1];
        p.on_deliver(&m, &a).unwrap();
        p.on_sm_notify(&Arc::new(vec![(m.id, ProcessId(2))])).unwrap();
        assert!(p.stability_knows(m.id, ProcessId(2)));
        let out = p.on_timer(&Timer::Reforward(m.id), 100).unwrap();
        let targets: Vec<ProcessId> = sends(&out).iter().map(|(to, _)| *to).collect();
        assert_eq!(targets, vec![ProcessId(0), ProcessId(3)]);
        // Fires once.
        assert!(p.on_timer(&Timer::Reforward(m.id), 200).unwrap().is_empty());

        let q = &mut g.procs[2];
        q.on_deliver(&m, &a).unwrap();
        q.on_sm_notify(&Arc::new((0..4).map(|j| (m.id, ProcessId(j))).collect())).unwrap();
        assert!(q.on_timer(&Timer::Reforward(m.id), 100).unwrap().is_empty());
    }

    #[test]
    fn witness_seed_changes_active_sets() {
        let mut a = ProtocolParams::act(100, 10, 3, 5).unwrap();
        let mut b = a.clone();
        a.witness_seed = WitnessSeed::from_u64(1);
        b.witness_seed = WitnessSeed::from_u64(2);
        let ga = group(a, &[]);
        let gb = group(b, &[]);
        let id = MessageId::new(ProcessId(0), 1);
        assert_eq!(ga.procs[0].w_active(id), ga.procs[5].w_active(id));
        assert!((1..10).any(|s| {
            let id = MessageId::new(ProcessId(0), s);
            ga.procs[0].w_active(id) != gb.procs[0].w_active(id)
        }));
    }
}
