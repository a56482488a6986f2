//! Byzantine strategies for the faulty processes of a simulated run.
//!
//! The faulty set is fixed when the world is built, before any witness set
//! is computed. An [`Adversary`] then receives every event addressed to a
//! faulty process and answers with actions performed in that process's
//! name. It holds the signing keys of faulty processes only; the key ring
//! refuses to hand out any other key.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use crate::crypto::{
    regular_signing_bytes, Ack, AckSet, Caller, CryptoError, Digest, KeyRing, MessageId, MulticastMessage, ProcessId,
    ProtocolTag, Signature, SigningKey,
};
use crate::protocol::{
    Action, AlertEvidence, ProcessState, ProtocolKind, ProtocolParams, SignedRegular, Tick, Timer, WireBody,
    WireMessage,
};
use crate::quorum::{w3t_with_layout, w_active, WitnessSet};

/// Strategy selector, as given on the command line.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum AdversarySpec {
    /// Everyone is correct.
    #[default]
    None,
    /// Faulty processes never send anything.
    Silent,
    /// Faulty processes behave correctly until tick `at`, then stop.
    Crash { at: Tick },
    /// Faulty senders send conflicting messages to two halves of the group;
    /// other faulty processes behave correctly.
    Equivocate,
    /// Equivocating senders plus faulty witnesses that acknowledge and
    /// verify anything.
    Collusive,
    /// ACT only: `m` goes to `W_active(m)` while a conflicting `m'` is
    /// pushed through the recovery regime via `2t+1` processes avoiding
    /// `W_active(m)`.
    RegimeSplit,
    /// ACT only: burns sequence numbers with junk until an id whose active
    /// witnesses are all faulty comes up, then equivocates on it.
    SeqBurner,
}

impl AdversarySpec {
    pub fn parse(s: &str, crash_at: Tick) -> Result<Self, String> {
        Ok(match s {
            "none" => AdversarySpec::None,
            "silent" => AdversarySpec::Silent,
            "crash" => AdversarySpec::Crash { at: crash_at },
            "equivocate" => AdversarySpec::Equivocate,
            "collusive" => AdversarySpec::Collusive,
            "regime-split" | "regime_split" => AdversarySpec::RegimeSplit,
            "seq-burner" | "seq_burner" => AdversarySpec::SeqBurner,
            _ => {
                return Err(format!(
                    "unknown adversary {s:?} (expected none, silent, crash, equivocate, collusive, regime-split or seq-burner)"
                ))
            }
        })
    }

    pub fn as_str(self) -> &'static str {
        match self {
            AdversarySpec::None => "none",
            AdversarySpec::Silent => "silent",
            AdversarySpec::Crash { .. } => "crash",
            AdversarySpec::Equivocate => "equivocate",
            AdversarySpec::Collusive => "collusive",
            AdversarySpec::RegimeSplit => "regime-split",
            AdversarySpec::SeqBurner => "seq-burner",
        }
    }

    fn colludes(self) -> bool {
        matches!(self, AdversarySpec::Collusive | AdversarySpec::RegimeSplit | AdversarySpec::SeqBurner)
    }
}

impl fmt::Display for AdversarySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// What the adversary wants done in response to one event.
#[derive(Clone, Debug, Default)]
pub struct AdversaryOutput {
    /// `(acting faulty process, action)`.
    pub actions: Vec<(ProcessId, Action)>,
    /// Messages a faulty sender issued, with their digests.
    pub multicasts: Vec<(MessageId, Digest)>,
    /// Ids on which a conflicting delivery was attempted.
    pub attacks: Vec<MessageId>,
}

#[derive(Clone, Debug)]
struct Variant {
    message: Arc<MulticastMessage>,
    digest: Digest,
    sig: Signature,
    deliver_to: Vec<ProcessId>,
    acks: BTreeMap<(ProtocolTag, ProcessId), Ack>,
    ready: Option<Arc<AckSet>>,
    sent: bool,
}

#[derive(Clone, Debug)]
struct Attack {
    variants: Vec<Variant>,
    /// Hold deliveries back until every variant has an ack set.
    all_or_nothing: bool,
    /// Sends released when the sender's phase timer fires.
    second_phase: Vec<(ProcessId, WireMessage)>,
}

/// Drives every faulty process of one world.
#[derive(Debug)]
pub struct Adversary {
    spec: AdversarySpec,
    params: ProtocolParams,
    ring: Arc<KeyRing>,
    faulty: BTreeSet<ProcessId>,
    correct: Vec<ProcessId>,
    keys: BTreeMap<ProcessId, SigningKey>,
    engines: BTreeMap<ProcessId, ProcessState>,
    next_seq: BTreeMap<ProcessId, u64>,
    attacks: BTreeMap<MessageId, Attack>,
    knows_r: bool,
    phase_delay: Tick,
}

impl Adversary {
    /// Binds `spec` to the faulty set recorded in `ring`.
    ///
    /// `phase_delay` is how long a regime splitter waits between pushing
    /// `m'` and releasing `m`; `engine_seed` seeds the honest engines some
    /// strategies run.
    pub fn new(
        spec: AdversarySpec,
        params: ProtocolParams,
        ring: Arc<KeyRing>,
        knows_r: bool,
        phase_delay: Tick,
        engine_seed: impl Fn(ProcessId) -> u64,
    ) -> Result<Self, CryptoError> {
        let faulty = ring.faulty().clone();
        let mut keys = BTreeMap::new();
        let mut engines = BTreeMap::new();
        for &p in &faulty {
            let key = ring.signing_key(Caller::Adversary, p)?;
            if matches!(spec, AdversarySpec::Crash { .. } | AdversarySpec::Equivocate) {
                let engine = ProcessState::new(p, params.clone(), ring.clone(), key.clone(), engine_seed(p))
                    .expect("world parameters were validated");
                engines.insert(p, engine);
            }
            keys.insert(p, key);
        }
        let correct = (0..params.n()).map(ProcessId::from).filter(|p| !faulty.contains(p)).collect();
        Ok(Adversary {
            spec,
            params,
            ring,
            faulty,
            correct,
            keys,
            engines,
            next_seq: BTreeMap::new(),
            attacks: BTreeMap::new(),
            knows_r,
            phase_delay,
        })
    }

    pub fn spec(&self) -> AdversarySpec {
        self.spec
    }

    pub fn faulty(&self) -> &BTreeSet<ProcessId> {
        &self.faulty
    }

    fn crashed(&self, now: Tick) -> bool {
        matches!(self.spec, AdversarySpec::Crash { at } if now >= at)
    }

    fn w3t(&self, id: MessageId) -> WitnessSet {
        w3t_with_layout(id, self.params.quorum, &self.params.witness_seed, self.params.w3t_layout)
    }

    fn w_active(&self, id: MessageId) -> WitnessSet {
        w_active(id, self.params.kappa, self.params.quorum, &self.params.witness_seed).expect("validated kappa")
    }

    fn take_seq(&mut self, sender: ProcessId) -> MessageId {
        let seq = self.next_seq.entry(sender).or_insert(0);
        *seq += 1;
        MessageId::new(sender, *seq)
    }

    /// A workload slot assigned to faulty process `sender`.
    pub fn on_multicast(&mut self, sender: ProcessId, payload: Vec<u8>, now: Tick) -> AdversaryOutput {
        let mut out = AdversaryOutput::default();
        match self.spec {
            AdversarySpec::None | AdversarySpec::Silent => {}
            AdversarySpec::Crash { .. } => {
                if self.crashed(now) {
                    return out;
                }
                let engine = self.engines.get_mut(&sender).expect("engine for faulty process");
                let (id, actions) = engine.multicast(payload).expect("engine sequence is gapless");
                out.multicasts.push((id, engine.pending(id.seq).expect("just multicast").digest));
                out.actions.extend(actions.into_iter().map(|a| (sender, a)));
            }
            AdversarySpec::Equivocate | AdversarySpec::Collusive => self.equivocate(sender, payload, &mut out),
            AdversarySpec::RegimeSplit => self.regime_split(sender, payload, &mut out),
            AdversarySpec::SeqBurner => self.seq_burn(sender, payload, &mut out),
        }
        out
    }

    fn variant(&self, id: MessageId, payload: Vec<u8>, deliver_to: Vec<ProcessId>) -> Variant {
        let message = Arc::new(MulticastMessage::new(id, payload));
        let digest = message.digest();
        let sig = self.keys[&id.sender].sign(&regular_signing_bytes(id, &digest));
        Variant { message, digest, sig, deliver_to, acks: BTreeMap::new(), ready: None, sent: false }
    }

    fn regular(&self, proto: ProtocolTag, v: &Variant) -> WireMessage {
        let sig = (proto == ProtocolTag::Av).then_some(v.sig);
        WireMessage::regular(proto, v.message.id, v.digest, sig)
    }

    fn conflicting(payload: &[u8]) -> Vec<u8> {
        let mut p = payload.to_vec();
        p.extend_from_slice(b" (conflicting)");
        p
    }

    /// Sends `variant` of an attack to `targets`; the sender acks its own
    /// copy directly when it belongs to the range.
    fn push_regular(
        &mut self,
        id: MessageId,
        index: usize,
        proto: ProtocolTag,
        targets: impl IntoIterator<Item = ProcessId>,
        out: &mut Vec<(ProcessId, WireMessage)>,
    ) {
        let sender = id.sender;
        let attack = &self.attacks[&id];
        let msg = self.regular(proto, &attack.variants[index]);
        let mut self_ack = false;
        for to in targets {
            if to == sender {
                self_ack = true;
            } else {
                out.push((to, msg.clone()));
            }
        }
        if self_ack {
            let v = &attack.variants[index];
            let sig = (proto == ProtocolTag::Av).then_some(v.sig);
            let ack = Ack::sign(&self.keys[&sender], proto, id, v.digest, sig);
            self.attacks.get_mut(&id).unwrap().variants[index].acks.insert((proto, sender), ack);
        }
    }

    fn halves(&self) -> (Vec<ProcessId>, Vec<ProcessId>) {
        let mid = self.correct.len() / 2;
        (self.correct[..mid].to_vec(), self.correct[mid..].to_vec())
    }

    fn equivocate(&mut self, sender: ProcessId, payload: Vec<u8>, out: &mut AdversaryOutput) {
        let id = self.take_seq(sender);
        let (a, b) = self.halves();
        let variants =
            vec![self.variant(id, payload.clone(), a.clone()), self.variant(id, Self::conflicting(&payload), b.clone())];
        for v in &variants {
            out.multicasts.push((id, v.digest));
        }
        self.attacks.insert(id, Attack { variants, all_or_nothing: false, second_phase: Vec::new() });
        out.attacks.push(id);
        let faulty: Vec<ProcessId> = self.faulty.iter().copied().collect();
        let side = |half: &[ProcessId], range: Option<&WitnessSet>| -> Vec<ProcessId> {
            faulty
                .iter()
                .chain(half.iter())
                .copied()
                .filter(|p| range.is_none_or(|r| r.contains(*p)))
                .collect()
        };
        let mut sends = Vec::new();
        match self.params.kind {
            ProtocolKind::E => {
                self.push_regular(id, 0, ProtocolTag::E, side(&a, None), &mut sends);
                self.push_regular(id, 1, ProtocolTag::E, side(&b, None), &mut sends);
            }
            ProtocolKind::ThreeT => {
                let range = self.w3t(id);
                self.push_regular(id, 0, ProtocolTag::ThreeT, side(&a, Some(&range)), &mut sends);
                self.push_regular(id, 1, ProtocolTag::ThreeT, side(&b, Some(&range)), &mut sends);
            }
            ProtocolKind::Act => {
                let active = self.w_active(id);
                let range = self.w3t(id);
                self.push_regular(id, 0, ProtocolTag::Av, side(&a, Some(&active)), &mut sends);
                self.push_regular(id, 1, ProtocolTag::Av, side(&b, Some(&active)), &mut sends);
                self.push_regular(id, 0, ProtocolTag::ThreeT, side(&a, Some(&range)), &mut sends);
                self.push_regular(id, 1, ProtocolTag::ThreeT, side(&b, Some(&range)), &mut sends);
            }
        }
        out.actions.extend(sends.into_iter().map(|(to, msg)| (sender, Action::Send { to, msg })));
        self.check_ready(id, out);
    }

    fn regime_split(&mut self, sender: ProcessId, payload: Vec<u8>, out: &mut AdversaryOutput) {
        let id = self.take_seq(sender);
        let (a, b) = self.halves();
        let variants = vec![self.variant(id, payload.clone(), a), self.variant(id, Self::conflicting(&payload), b)];
        for v in &variants {
            out.multicasts.push((id, v.digest));
        }
        let active = self.w_active(id);
        let range = self.w3t(id);
        let need = self.params.quorum.w3t_threshold();
        // S: faulty members of W_3T first, then the lowest correct ids.
        let mut s: Vec<ProcessId> = range.iter().filter(|p| self.faulty.contains(p)).collect();
        let fill = range
            .iter()
            .filter(|p| !self.faulty.contains(p) && (!self.knows_r || !active.contains(*p)))
            .take(need.saturating_sub(s.len()));
        s.extend(fill);
        self.attacks.insert(id, Attack { variants, all_or_nothing: true, second_phase: Vec::new() });
        out.attacks.push(id);
        let mut first = Vec::new();
        self.push_regular(id, 1, ProtocolTag::ThreeT, s, &mut first);
        let mut second = Vec::new();
        self.push_regular(id, 0, ProtocolTag::Av, active.iter(), &mut second);
        self.attacks.get_mut(&id).unwrap().second_phase = second;
        out.actions.extend(first.into_iter().map(|(to, msg)| (sender, Action::Send { to, msg })));
        out.actions.push((sender, Action::SetTimer { timer: Timer::Recovery(id), delay: self.phase_delay }));
    }

    fn seq_burn(&mut self, sender: ProcessId, payload: Vec<u8>, out: &mut AdversaryOutput) {
        let id = self.take_seq(sender);
        let active = self.w_active(id);
        let all_faulty = active.iter().all(|p| self.faulty.contains(&p));
        let mut sends = Vec::new();
        if all_faulty {
            let (a, b) = self.halves();
            let variants =
                vec![self.variant(id, payload.clone(), a), self.variant(id, Self::conflicting(&payload), b)];
            for v in &variants {
                out.multicasts.push((id, v.digest));
            }
            self.attacks.insert(id, Attack { variants, all_or_nothing: true, second_phase: Vec::new() });
            out.attacks.push(id);
            self.push_regular(id, 0, ProtocolTag::Av, active.iter(), &mut sends);
            self.push_regular(id, 1, ProtocolTag::Av, active.iter(), &mut sends);
        } else {
            let junk = self.variant(id, b"junk".to_vec(), self.correct.clone());
            out.multicasts.push((id, junk.digest));
            self.attacks.insert(id, Attack { variants: vec![junk], all_or_nothing: false, second_phase: Vec::new() });
            self.push_regular(id, 0, ProtocolTag::Av, active.iter(), &mut sends);
        }
        out.actions.extend(sends.into_iter().map(|(to, msg)| (sender, Action::Send { to, msg })));
        self.check_ready(id, out);
    }

    /// Marks variants whose acks now meet a delivery rule and releases
    /// the corresponding deliver messages.
    fn check_ready(&mut self, id: MessageId, out: &mut AdversaryOutput) {
        let q = self.params.quorum;
        let threshold_av = self.params.kappa.saturating_sub(self.params.active_slack_c);
        let active = (self.params.kind == ProtocolKind::Act).then(|| self.w_active(id));
        let range = (self.params.kind != ProtocolKind::E).then(|| self.w3t(id));
        let Some(attack) = self.attacks.get_mut(&id) else { return };
        for v in attack.variants.iter_mut().filter(|v| v.ready.is_none()) {
            let group = |tag: ProtocolTag, eligible: &dyn Fn(ProcessId) -> bool| -> Vec<Ack> {
                v.acks.iter().filter(|((t, p), _)| *t == tag && eligible(*p)).map(|(_, a)| a.clone()).collect()
            };
            let candidates = [
                (ProtocolTag::E, group(ProtocolTag::E, &|_| true), q.dissemination_quorum_size()),
                (
                    ProtocolTag::ThreeT,
                    group(ProtocolTag::ThreeT, &|p| range.as_ref().is_some_and(|r| r.contains(p))),
                    q.w3t_threshold(),
                ),
                (ProtocolTag::Av, group(ProtocolTag::Av, &|p| active.as_ref().is_some_and(|r| r.contains(p))), threshold_av),
            ];
            for (_, acks, need) in candidates {
                if need > 0 && acks.len() >= need {
                    v.ready = Some(Arc::new(AckSet::new(acks).expect("acks share one header")));
                    break;
                }
            }
        }
        let all_ready = attack.variants.iter().all(|v| v.ready.is_some());
        let sender = id.sender;
        for v in attack.variants.iter_mut() {
            let go = !v.sent && v.ready.is_some() && (all_ready || !attack.all_or_nothing);
            if !go {
                continue;
            }
            v.sent = true;
            let msg = WireMessage {
                proto: self.params.kind.tag(),
                body: WireBody::Deliver { message: v.message.clone(), acks: v.ready.clone().unwrap() },
            };
            out.actions.extend(v.deliver_to.iter().map(|&to| (sender, Action::Send { to, msg: msg.clone() })));
        }
    }

    fn collect_ack(&mut self, me: ProcessId, from: ProcessId, ack: &Ack, out: &mut AdversaryOutput) -> bool {
        let Some(attack) = self.attacks.get_mut(&ack.subject) else { return false };
        if ack.subject.sender != me {
            return false;
        }
        if ack.signer == from && ack.verify(&self.ring) {
            if let Some(v) = attack.variants.iter_mut().find(|v| v.digest == ack.digest) {
                let sig_ok = ack.proto != ProtocolTag::Av || ack.sender_sig == Some(v.sig);
                if sig_ok {
                    v.acks.insert((ack.proto, ack.signer), ack.clone());
                }
            }
        }
        self.check_ready(ack.subject, out);
        true
    }

    fn collude(&self, me: ProcessId, from: ProcessId, msg: &WireMessage) -> Vec<(ProcessId, Action)> {
        let key = &self.keys[&me];
        match &msg.body {
            WireBody::Regular { subject, digest, sender_sig } if subject.sender == from => {
                let sig = if msg.proto == ProtocolTag::Av { *sender_sig } else { None };
                let ack = Ack::sign(key, msg.proto, *subject, *digest, sig);
                vec![(me, Action::Send { to: from, msg: WireMessage { proto: msg.proto, body: WireBody::Ack(ack) } })]
            }
            WireBody::Inform(SignedRegular { subject, digest, .. }) => vec![(
                me,
                Action::Send {
                    to: from,
                    msg: WireMessage { proto: ProtocolTag::Av, body: WireBody::Verify { subject: *subject, digest: *digest } },
                },
            )],
            _ => Vec::new(),
        }
    }

    /// A PDU arriving at faulty process `me`.
    pub fn on_message(&mut self, me: ProcessId, from: ProcessId, msg: &WireMessage, now: Tick) -> AdversaryOutput {
        let mut out = AdversaryOutput::default();
        if matches!(self.spec, AdversarySpec::None | AdversarySpec::Silent) || self.crashed(now) {
            return out;
        }
        if let WireBody::Ack(ack) = &msg.body {
            if self.collect_ack(me, from, ack, &mut out) {
                return out;
            }
        }
        if self.spec.colludes() {
            out.actions = self.collude(me, from, msg);
        } else if let Some(engine) = self.engines.get_mut(&me) {
            if let Ok(actions) = engine.handle(from, msg, now) {
                out.actions.extend(actions.into_iter().map(|a| (me, a)));
            }
        }
        out
    }

    /// A timer set by faulty process `me` fired.
    pub fn on_timer(&mut self, me: ProcessId, timer: &Timer, now: Tick) -> AdversaryOutput {
        let mut out = AdversaryOutput::default();
        if self.crashed(now) {
            return out;
        }
        if let Timer::Recovery(id) = timer {
            if let Some(attack) = self.attacks.get_mut(id) {
                if id.sender == me {
                    if attack.second_phase.is_empty() {
                        // Second firing: stop holding back.
                        attack.all_or_nothing = false;
                        for v in attack.variants.iter_mut().filter(|v| !v.sent) {
                            v.deliver_to = self.correct.clone();
                        }
                    } else {
                        let sends = std::mem::take(&mut attack.second_phase);
                        out.actions.extend(sends.into_iter().map(|(to, msg)| (me, Action::Send { to, msg })));
                        let delay = self.params.recovery_timeout;
                        out.actions.push((me, Action::SetTimer { timer: Timer::Recovery(*id), delay }));
                    }
                    self.check_ready(*id, &mut out);
                    return out;
                }
            }
        }
        if let Some(engine) = self.engines.get_mut(&me) {
            if let Ok(actions) = engine.on_timer(timer, now) {
                out.actions.extend(actions.into_iter().map(|a| (me, a)));
            }
        }
        out
    }

    /// Alerts reach faulty processes too; honest engines react to them.
    pub fn on_alert(&mut self, me: ProcessId, evidence: &AlertEvidence, now: Tick) {
        if self.crashed(now) {
            return;
        }
        if let Some(engine) = self.engines.get_mut(&me) {
            let _ = engine.on_alert(evidence);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup(spec: AdversarySpec, kind: ProtocolKind) -> (Adversary, Arc<KeyRing>) {
        let params = match kind {
            ProtocolKind::Act => ProtocolParams::act(31, 10, 3, 5).unwrap(),
            k => ProtocolParams::new(k, 31, 10).unwrap(),
        };
        let faulty: BTreeSet<ProcessId> = (0..10).map(ProcessId).collect();
        let ring = Arc::new(KeyRing::new(31, 5, faulty));
        (Adversary::new(spec, params, ring.clone(), true, 6, |p| p.0 as u64).unwrap(), ring)
    }

    #[test]
    fn silent_does_nothing() {
        let (mut adv, _) = setup(AdversarySpec::Silent, ProtocolKind::E);
        assert!(adv.on_multicast(ProcessId(0), b"x".to_vec(), 0).actions.is_empty());
        let msg = WireMessage::regular(ProtocolTag::E, MessageId::new(ProcessId(20), 1), crate::crypto::digest(b"m"), None);
        assert!(adv.on_message(ProcessId(1), ProcessId(20), &msg, 0).actions.is_empty());
    }

    #[test]
    fn collusive_witness_acks_conflicting_regulars() {
        let (mut adv, ring) = setup(AdversarySpec::Collusive, ProtocolKind::ThreeT);
        let id = MessageId::new(ProcessId(20), 1);
        for payload in [&b"m"[..], &b"m'"[..]] {
            let msg = WireMessage::regular(ProtocolTag::ThreeT, id, crate::crypto::digest(payload), None);
            let out = adv.on_message(ProcessId(3), ProcessId(20), &msg, 0);
            match &out.actions[..] {
                [(ProcessId(3), Action::Send { to, msg: WireMessage { body: WireBody::Ack(ack), .. } })] => {
                    assert_eq!(*to, ProcessId(20));
                    assert!(ack.verify(&ring));
                }
                other => panic!("{other:?}"),
            }
        }
    }

    #[test]
    fn regime_splitter_targets_disjoint_sets() {
        let (mut adv, _) = setup(AdversarySpec::RegimeSplit, ProtocolKind::Act);
        let out = adv.on_multicast(ProcessId(0), b"m".to_vec(), 0);
        let id = MessageId::new(ProcessId(0), 1);
        assert_eq!(out.attacks, vec![id]);
        let active = adv.w_active(id);
        let s: Vec<ProcessId> = out
            .actions
            .iter()
            .filter_map(|(_, a)| match a {
                Action::Send { to, msg } if msg.proto == ProtocolTag::ThreeT => Some(*to),
                _ => None,
            })
            .collect();
        // S has 2t+1 members; the sender itself is one of them.
        assert_eq!(s.len() + 1, 21);
        assert!(s.iter().all(|p| !active.contains(*p) || adv.faulty.contains(p)));
        let phase = adv.on_timer(ProcessId(0), &Timer::Recovery(id), 6);
        let av: Vec<ProcessId> = phase
            .actions
            .iter()
            .filter_map(|(_, a)| match a {
                Action::Send { to, msg } if msg.proto == ProtocolTag::Av => Some(*to),
                _ => None,
            })
            .collect();
        assert_eq!(av.len() + usize::from(active.contains(ProcessId(0))), 3);
    }

    #[test]
    fn keys_only_for_faulty_processes() {
        let (adv, ring) = setup(AdversarySpec::Collusive, ProtocolKind::E);
        assert_eq!(adv.keys.len(), 10);
        assert!(ring.signing_key(Caller::Adversary, ProcessId(20)).is_err());
    }
}
