use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use super::trace::{TraceKind, TraceRecord};
use crate::crypto::{MessageId, ProcessId, ProtocolTag};
use crate::protocol::{ProtocolKind, Role, Tick};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ViolationKind {
    Integrity,
    SelfDelivery,
    Reliability,
    Agreement,
    /// A correct process signed acks for two different digests of one id.
    ConflictingAcks,
    /// A valid ack set for a correct sender's id that the sender never multicast.
    UnauthorizedAckSet,
    SmIntegrity,
    Fifo,
    Conservation,
    AlertRace,
}

impl ViolationKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ViolationKind::Integrity => "Integrity",
            ViolationKind::SelfDelivery => "Self-delivery",
            ViolationKind::Reliability => "Reliability",
            ViolationKind::Agreement => "Agreement",
            ViolationKind::ConflictingAcks => "ConflictingAcks",
            ViolationKind::UnauthorizedAckSet => "UnauthorizedAckSet",
            ViolationKind::SmIntegrity => "SM_Integrity",
            ViolationKind::Fifo => "FIFO",
            ViolationKind::Conservation => "Conservation",
            ViolationKind::AlertRace => "AlertRace",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub kind: ViolationKind,
    pub tick: Tick,
    /// Index of the offending record among those fed, if any.
    pub record: Option<usize>,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} violation at tick {}: {}", self.kind.as_str(), self.tick, self.message)
    }
}

#[derive(Clone, Debug, Default)]
struct ChannelState {
    sent: u64,
    received: u64,
}

/// Outcome of a checked run.
#[derive(Clone, Debug, Default)]
pub struct CheckSummary {
    pub violations: Vec<Violation>,
    /// Ids delivered with two different digests by correct processes.
    pub conflicts: Vec<MessageId>,
    pub quiescent: Option<bool>,
}

/// Checks run-level properties over a stream of trace records.
///
/// Feed records in trace order with [`observe`](Self::observe), then call
/// [`finish`](Self::finish). Liveness properties (Self-delivery,
/// Reliability, channel conservation) are only checked when the trace ends
/// with a quiescent `end` record.
#[derive(Clone, Debug)]
pub struct InvariantChecker {
    n: usize,
    kind: ProtocolKind,
    faulty: BTreeSet<ProcessId>,
    fed: usize,
    mcasts: HashMap<MessageId, u64>,
    delivered: HashMap<(ProcessId, MessageId), u64>,
    delivered_by_id: BTreeMap<MessageId, (usize, BTreeSet<u64>)>,
    conflicts: BTreeSet<MessageId>,
    acks: HashMap<(ProcessId, MessageId), u64>,
    channels: HashMap<(ProcessId, ProcessId), ChannelState>,
    published: BTreeSet<u64>,
    alerts: Vec<(Tick, ProcessId)>,
    knows: HashMap<ProcessId, BTreeSet<ProcessId>>,
    violations: Vec<Violation>,
    quiescent: Option<bool>,
    last_tick: Tick,
}

impl InvariantChecker {
    pub fn new(n: usize, kind: ProtocolKind, faulty: BTreeSet<ProcessId>) -> Self {
        InvariantChecker {
            n,
            kind,
            faulty,
            fed: 0,
            mcasts: HashMap::new(),
            delivered: HashMap::new(),
            delivered_by_id: BTreeMap::new(),
            conflicts: BTreeSet::new(),
            acks: HashMap::new(),
            channels: HashMap::new(),
            published: BTreeSet::new(),
            alerts: Vec::new(),
            knows: HashMap::new(),
            violations: Vec::new(),
            quiescent: None,
            last_tick: 0,
        }
    }

    fn correct(&self, p: ProcessId) -> bool {
        !self.faulty.contains(&p)
    }

    fn flag(&mut self, kind: ViolationKind, tick: Tick, message: String) {
        let record = self.fed.checked_sub(1);
        self.violations.push(Violation { kind, tick, record, message });
    }

    pub fn violations(&self) -> &[Violation] {
        &self.violations
    }

    pub fn conflicts(&self) -> usize {
        self.conflicts.len()
    }

    pub fn observe(&mut self, r: &TraceRecord) {
        self.fed += 1;
        if r.tick < self.last_tick {
            self.flag(ViolationKind::Fifo, r.tick, format!("time went backwards from {}", self.last_tick));
        }
        self.last_tick = r.tick;
        match r.kind {
            TraceKind::Mcast => self.on_mcast(r),
            TraceKind::Send => self.on_send(r),
            TraceKind::Recv | TraceKind::Reject => self.on_recv(r),
            TraceKind::Deliver => self.on_deliver(r),
            TraceKind::Sign => self.on_sign(r),
            TraceKind::Alert => {
                if let (Some(p), Some(a)) = (r.src, r.note.accused) {
                    self.alerts.push((r.tick, a));
                    self.knows.entry(p).or_default().insert(a);
                }
            }
            TraceKind::AlertRecv => {
                if let (Some(p), Some(a)) = (r.dst, r.note.accused) {
                    self.knows.entry(p).or_default().insert(a);
                }
            }
            TraceKind::Publish => self.on_publish(r),
            TraceKind::Notify => {
                let batch = r.note.batch.unwrap_or(u64::MAX);
                if !self.published.contains(&batch) {
                    self.flag(ViolationKind::SmIntegrity, r.tick, format!("notify for unpublished batch {batch}"));
                }
            }
            TraceKind::End => self.quiescent = r.note.quiescent,
            TraceKind::Drop | TraceKind::Timer => {}
        }
    }

    fn on_mcast(&mut self, r: &TraceRecord) {
        let (Some(src), Some(id), Some(d)) = (r.src, r.subject, r.digest) else { return };
        if !self.correct(src) {
            return;
        }
        if let Some(old) = self.mcasts.insert(id, d) {
            if old != d {
                self.flag(ViolationKind::Integrity, r.tick, format!("correct process {src} multicast {id} twice"));
            }
        }
    }

    fn on_send(&mut self, r: &TraceRecord) {
        let (Some(src), Some(dst), Some(ch)) = (r.src, r.dst, r.note.ch) else { return };
        let c = self.channels.entry((src, dst)).or_default();
        let expected = c.sent + 1;
        c.sent = ch.max(c.sent);
        if ch != expected {
            self.flag(ViolationKind::Conservation, r.tick, format!("send {src}->{dst} ch={ch}, expected ch={expected}"));
        }
    }

    fn on_recv(&mut self, r: &TraceRecord) {
        let (Some(src), Some(dst)) = (r.src, r.dst) else { return };
        if let Some(ch) = r.note.ch {
            let c = self.channels.entry((src, dst)).or_default();
            let expected = c.received + 1;
            let sent = c.sent;
            c.received = c.received.max(ch);
            if ch > sent {
                self.flag(ViolationKind::Conservation, r.tick, format!("{src}->{dst} received ch={ch} never sent"));
            } else if ch != expected {
                self.flag(ViolationKind::Fifo, r.tick, format!("{src}->{dst} received ch={ch}, expected ch={expected}"));
            }
        }
        if r.kind == TraceKind::Recv && r.role == Some(Role::Deliver) && self.correct(dst) {
            if let (Some(id), Some(d)) = (r.subject, r.digest) {
                if self.correct(id.sender) && self.mcasts.get(&id) != Some(&d) {
                    self.flag(
                        ViolationKind::UnauthorizedAckSet,
                        r.tick,
                        format!("{dst} accepted an ack set for {id} digest {d:016x} that {} never multicast", id.sender),
                    );
                }
            }
        }
    }

    fn on_deliver(&mut self, r: &TraceRecord) {
        let (Some(p), Some(id), Some(d)) = (r.src, r.subject, r.digest) else { return };
        if !self.correct(p) {
            return;
        }
        if self.delivered.insert((p, id), d).is_some() {
            self.flag(ViolationKind::Integrity, r.tick, format!("{p} delivered {id} more than once"));
            return;
        }
        if self.correct(id.sender) && self.mcasts.get(&id) != Some(&d) {
            self.flag(ViolationKind::Integrity, r.tick, format!("{p} delivered {id} with a digest its correct sender never multicast"));
        }
        let entry = self.delivered_by_id.entry(id).or_default();
        entry.0 += 1;
        entry.1.insert(d);
        if entry.1.len() > 1 && self.conflicts.insert(id) && self.kind.has_absolute_agreement() {
            self.flag(ViolationKind::Agreement, r.tick, format!("correct processes delivered conflicting messages for {id}"));
        }
    }

    fn on_sign(&mut self, r: &TraceRecord) {
        let (Some(p), Some(id), Some(d)) = (r.src, r.subject, r.digest) else { return };
        if !self.correct(p) {
            return;
        }
        if let Some(old) = self.acks.insert((p, id), d) {
            if old != d {
                self.flag(ViolationKind::ConflictingAcks, r.tick, format!("correct process {p} acked two digests for {id}"));
            }
        }
        if self.kind == ProtocolKind::Act && r.proto == Some(ProtocolTag::ThreeT) {
            if let Some(req) = r.note.req {
                let accused = id.sender;
                let raised = self.alerts.iter().any(|&(t, a)| a == accused && t <= req);
                let known = self.knows.get(&p).is_some_and(|k| k.contains(&accused));
                if raised && !known {
                    self.flag(
                        ViolationKind::AlertRace,
                        r.tick,
                        format!("{p} signed a recovery ack for {id} requested at {req} before learning of the alert against {accused}"),
                    );
                }
            }
        }
    }

    fn on_publish(&mut self, r: &TraceRecord) {
        for &(id, p) in &r.note.about {
            if !self.delivered.contains_key(&(p, id)) {
                self.flag(ViolationKind::SmIntegrity, r.tick, format!("oracle claims {p} delivered {id}, but it did not"));
            }
        }
        if let Some(b) = r.note.batch {
            self.published.insert(b);
        }
    }

    /// Runs the end-of-run checks.
    pub fn finish(mut self) -> CheckSummary {
        let tick = self.last_tick;
        self.fed = 0;
        if self.quiescent == Some(true) {
            let correct = self.n - self.faulty.len();
            let mut own: Vec<MessageId> = self.mcasts.keys().copied().collect();
            own.sort_unstable();
            for id in own {
                if !self.delivered.contains_key(&(id.sender, id)) {
                    self.flag(ViolationKind::SelfDelivery, tick, format!("{} never delivered its own {id}", id.sender));
                }
            }
            let partial: Vec<(MessageId, usize)> =
                self.delivered_by_id.iter().filter(|(_, e)| e.0 < correct).map(|(id, e)| (*id, e.0)).collect();
            for (id, count) in partial {
                self.flag(ViolationKind::Reliability, tick, format!("{id} delivered by only {count} of {correct} correct processes"));
            }
            let mut open: Vec<(ProcessId, ProcessId, u64, u64)> = self
                .channels
                .iter()
                .filter(|(_, c)| c.received != c.sent)
                .map(|(&(s, d), c)| (s, d, c.sent, c.received))
                .collect();
            open.sort_unstable();
            for (s, d, sent, received) in open {
                self.flag(ViolationKind::Conservation, tick, format!("{s}->{d}: {sent} sent but {received} received"));
            }
        }
        CheckSummary { violations: self.violations, conflicts: self.conflicts.into_iter().collect(), quiescent: self.quiescent }
    }
}
