use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};
use std::io;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest as _, Sha256};
use thiserror::Error;

use super::checker::InvariantChecker;
use super::config::{derive_seed, ConfigError, SimConfig, Workload};
use super::report::{RunReport, SupportStats};
use super::trace::{TraceKind, TraceRecord};
use crate::adversary::{Adversary, AdversaryOutput, AdversarySpec};
use crate::crypto::{Caller, CryptoError, Digest, KeyRing, MessageId, ProcessId, ProtocolTag};
use crate::protocol::{
    Action, AlertEvidence, ProcessState, ProtocolKind, ProtocolParams, Role, StabilityBatch, Tick, Timer, WireBody,
    WireMessage,
};
use crate::quorum::{w3t_with_layout, w_active};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid configuration: {0}")]
    Config(#[from] ConfigError),
    #[error("harness bug: {0}")]
    Crypto(#[from] CryptoError),
}

#[derive(Clone, Debug)]
enum Event {
    Multicast { index: usize },
    Attempt { src: ProcessId, dst: ProcessId, ch: u64, attempt: u32 },
    Arrive { src: ProcessId, dst: ProcessId, ch: u64 },
    Timer { p: ProcessId, timer: Timer },
    AlertArrive { dst: ProcessId, evidence: Arc<AlertEvidence> },
    Publish,
    Notify { dst: ProcessId, batch_id: u64, batch: StabilityBatch },
}

#[derive(Debug)]
struct Scheduled {
    time: Tick,
    seq: u64,
    event: Event,
}

impl PartialEq for Scheduled {
    fn eq(&self, other: &Self) -> bool {
        (self.time, self.seq) == (other.time, other.seq)
    }
}

impl Eq for Scheduled {}

impl PartialOrd for Scheduled {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Scheduled {
    // Reversed: BinaryHeap is a max-heap.
    fn cmp(&self, other: &Self) -> Ordering {
        (other.time, other.seq).cmp(&(self.time, self.seq))
    }
}

#[derive(Debug, Default)]
struct Channel {
    rng: Option<ChaCha8Rng>,
    sent: u64,
    received: u64,
    buffer: BTreeMap<u64, (WireMessage, bool)>,
}

#[derive(Debug)]
struct Oracle {
    pending: Vec<(MessageId, ProcessId)>,
    scheduled: bool,
    next_batch: u64,
    rng: ChaCha8Rng,
}

/// A seeded discrete-event simulation of one run.
#[derive(Debug)]
pub struct SimWorld {
    config: SimConfig,
    params: ProtocolParams,
    faulty: BTreeSet<ProcessId>,
    processes: Vec<Option<ProcessState>>,
    adversary: Option<Adversary>,
    clock: Tick,
    queue: BinaryHeap<Scheduled>,
    counter: u64,
    channels: Vec<Channel>,
    channel_seed: u64,
    oracle: Oracle,
    alert_rng: ChaCha8Rng,
    workload: Vec<ProcessId>,
    trace: Vec<TraceRecord>,
    checker: Option<InvariantChecker>,
    report: RunReport,
    delivered: BTreeMap<MessageId, Vec<Digest>>,
}

fn process_seed(seed: u64, p: ProcessId) -> u64 {
    let mut purpose = b"process".to_vec();
    purpose.extend_from_slice(&p.0.to_le_bytes());
    derive_seed(seed, &purpose)
}

fn ack_of(msg: &WireMessage) -> Option<&crate::crypto::Ack> {
    match &msg.body {
        WireBody::Ack(a) => Some(a),
        _ => None,
    }
}

impl SimWorld {
    /// Validates `config`, picks the faulty set, initializes every process
    /// and schedules the workload.
    pub fn build(config: SimConfig) -> Result<SimWorld, SimError> {
        config.validate()?;
        let params = config.protocol_params()?;
        let n = config.n;

        // The faulty set depends only on the adversary seed.
        let f = config.effective_faulty_count();
        let mut adv_rng = ChaCha8Rng::seed_from_u64(config.adversary_seed());
        let faulty: BTreeSet<ProcessId> =
            rand::seq::index::sample(&mut adv_rng, n, f).into_iter().map(ProcessId::from).collect();

        let ring = Arc::new(KeyRing::new(n, derive_seed(config.seed, b"keys"), faulty.clone()));
        let mut processes = Vec::with_capacity(n);
        for i in 0..n {
            let p = ProcessId::from(i);
            if faulty.contains(&p) {
                processes.push(None);
                continue;
            }
            let key = ring.signing_key(Caller::Process(p), p)?;
            let state = ProcessState::new(p, params.clone(), ring.clone(), key, process_seed(config.seed, p))
                .map_err(|e| ConfigError::new("protocol", e))?;
            processes.push(Some(state));
        }
        let adversary = if config.adversary == AdversarySpec::None {
            None
        } else {
            let seed = config.seed;
            Some(Adversary::new(
                config.adversary,
                params.clone(),
                ring.clone(),
                config.adversary_knows_r,
                config.latency_hi + 1,
                move |p| process_seed(seed, p),
            )?)
        };

        let mut workload_rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, b"workload"));
        let faulty_list: Vec<ProcessId> = faulty.iter().copied().collect();
        let workload: Vec<ProcessId> = (0..config.messages)
            .map(|i| match config.workload {
                Workload::RoundRobin => ProcessId::from(i % n),
                Workload::Uniform => ProcessId::from(workload_rng.gen_range(0..n)),
                Workload::Faulty => faulty_list[i % faulty_list.len()],
            })
            .collect();

        let checker = config.check.then(|| InvariantChecker::new(n, config.protocol, faulty.clone()));
        let report = RunReport::empty(config.protocol, n, config.t, faulty_list);
        let mut world = SimWorld {
            params,
            faulty,
            processes,
            adversary,
            clock: 0,
            queue: BinaryHeap::new(),
            counter: 0,
            channels: (0..n * n).map(|_| Channel::default()).collect(),
            channel_seed: derive_seed(config.seed, b"channels"),
            oracle: Oracle {
                pending: Vec::new(),
                scheduled: false,
                next_batch: 0,
                rng: ChaCha8Rng::seed_from_u64(derive_seed(config.seed, b"oracle")),
            },
            alert_rng: ChaCha8Rng::seed_from_u64(derive_seed(config.seed, b"alerts")),
            workload,
            trace: Vec::new(),
            checker,
            report,
            delivered: BTreeMap::new(),
            config,
        };
        for index in 0..world.workload.len() {
            let at = index as Tick * world.config.multicast_interval;
            world.schedule(at, Event::Multicast { index });
        }
        Ok(world)
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn clock(&self) -> Tick {
        self.clock
    }

    pub fn faulty(&self) -> &BTreeSet<ProcessId> {
        &self.faulty
    }

    pub fn process(&self, p: ProcessId) -> Option<&ProcessState> {
        self.processes.get(p.index()).and_then(|s| s.as_ref())
    }

    pub fn pending_events(&self) -> usize {
        self.queue.len()
    }

    pub fn trace(&self) -> &[TraceRecord] {
        &self.trace
    }

    /// Header lines for a trace file of this world.
    pub fn trace_header(&self) -> Vec<String> {
        let mut lines = vec!["# securecast trace v1".to_string()];
        lines.extend(self.config.to_kv().into_iter().map(|(k, v)| format!("# {k}={v}")));
        let faulty: Vec<String> = self.faulty.iter().map(|p| p.to_string()).collect();
        lines.push(format!("# faulty={}", faulty.join(",")));
        lines.push("# columns=tick kind src dst proto role subject digest note".to_string());
        lines
    }

    pub fn write_trace(&self, out: &mut impl io::Write) -> io::Result<()> {
        for line in self.trace_header() {
            writeln!(out, "{line}")?;
        }
        for r in &self.trace {
            writeln!(out, "{r}")?;
        }
        Ok(())
    }

    pub fn trace_text(&self) -> String {
        let mut buf = Vec::new();
        self.write_trace(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("trace is UTF-8")
    }

    /// Hash of the full simulation state; equal for equal configs.
    pub fn state_fingerprint(&self) -> String {
        let mut h = Sha256::new();
        for (k, v) in self.config.to_kv() {
            h.update(format!("{k}={v}\n"));
        }
        h.update(format!("{:?}\n", self.faulty));
        h.update(self.params.witness_seed.0);
        h.update(format!("clock={}\n", self.clock));
        let mut events: Vec<&Scheduled> = self.queue.iter().collect();
        events.sort_by_key(|s| (s.time, s.seq));
        for s in events {
            h.update(format!("{} {} {:?}\n", s.time, s.seq, s.event));
        }
        for p in self.processes.iter().flatten() {
            h.update(format!("{:?}\n", p.delivery()));
        }
        let out: [u8; 32] = h.finalize().into();
        out.iter().map(|b| format!("{b:02x}")).collect()
    }

    fn schedule(&mut self, time: Tick, event: Event) {
        self.counter += 1;
        self.queue.push(Scheduled { time, seq: self.counter, event });
    }

    fn recording(&self) -> bool {
        self.config.record_trace || self.checker.is_some()
    }

    fn emit(&mut self, record: TraceRecord) {
        if let Some(c) = &mut self.checker {
            c.observe(&record);
        }
        if self.config.record_trace {
            self.trace.push(record);
        }
    }

    fn pdu_record(&self, kind: TraceKind, src: ProcessId, dst: ProcessId, msg: &WireMessage) -> TraceRecord {
        let mut r = TraceRecord::new(self.clock, kind);
        r.src = Some(src);
        r.dst = Some(dst);
        r.proto = Some(msg.proto);
        r.role = Some(msg.role());
        r.subject = msg.subject();
        r.digest = msg.digest().map(|d| d.prefix());
        r
    }

    fn channel_mut(&mut self, src: ProcessId, dst: ProcessId) -> &mut Channel {
        let n = self.config.n;
        let idx = src.index() * n + dst.index();
        let seed = self.channel_seed;
        let ch = &mut self.channels[idx];
        if ch.rng.is_none() {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(idx as u64);
            ch.rng = Some(rng);
        }
        ch
    }

    fn transmit(&mut self, src: ProcessId, dst: ProcessId, msg: WireMessage) {
        self.report.sends += 1;
        let recording = self.recording();
        let record = recording.then(|| self.pdu_record(TraceKind::Send, src, dst, &msg));
        let channel = self.channel_mut(src, dst);
        channel.sent += 1;
        let ch = channel.sent;
        channel.buffer.insert(ch, (msg, false));
        if let Some(mut r) = record {
            r.note.ch = Some(ch);
            self.emit(r);
        }
        self.attempt(src, dst, ch, 1);
    }

    fn attempt(&mut self, src: ProcessId, dst: ProcessId, ch: u64, attempt: u32) {
        let (p, lo, hi) = (self.config.drop_prob, self.config.latency_lo, self.config.latency_hi);
        let rng = self.channel_mut(src, dst).rng.as_mut().expect("initialized on send");
        let dropped = p > 0.0 && rng.gen_bool(p);
        if dropped {
            self.report.drops += 1;
            if self.recording() {
                let msg = &self.channels[src.index() * self.config.n + dst.index()].buffer[&ch].0;
                let mut r = self.pdu_record(TraceKind::Drop, src, dst, msg);
                r.note.ch = Some(ch);
                r.note.attempt = Some(attempt);
                self.emit(r);
            }
            let at = self.clock + self.config.retransmit_interval;
            self.schedule(at, Event::Attempt { src, dst, ch, attempt: attempt + 1 });
        } else {
            let latency = rng.gen_range(lo..=hi);
            let at = self.clock + latency;
            self.schedule(at, Event::Arrive { src, dst, ch });
        }
    }

    fn arrive(&mut self, src: ProcessId, dst: ProcessId, ch: u64) {
        let channel = self.channel_mut(src, dst);
        if let Some(entry) = channel.buffer.get_mut(&ch) {
            entry.1 = true;
        }
        loop {
            let channel = self.channel_mut(src, dst);
            let next = channel.received + 1;
            match channel.buffer.get(&next) {
                Some((_, true)) => {
                    let (msg, _) = channel.buffer.remove(&next).unwrap();
                    channel.received = next;
                    self.dispatch(src, dst, next, msg);
                }
                _ => break,
            }
        }
    }

    fn count_access(&mut self, dst: ProcessId, msg: &WireMessage) {
        let role = msg.role();
        self.report.role_counts[dst.index()][role.index()] += 1;
        let witness = match role {
            Role::Regular => msg.proto == ProtocolTag::Av,
            Role::Inform => true,
            _ => false,
        };
        if witness {
            self.report.witness_accesses[dst.index()] += 1;
        }
    }

    fn observe_support(&mut self, msg: &WireMessage) {
        let WireBody::Deliver { message, acks } = &msg.body else { return };
        let id = message.id;
        let q = self.params.quorum;
        let seed = &self.params.witness_seed;
        let s = &mut self.report.min_support;
        match acks.proto() {
            ProtocolTag::E => SupportStats::observe(&mut s.e, acks.len()),
            ProtocolTag::ThreeT => {
                let range = w3t_with_layout(id, q, seed, self.params.w3t_layout);
                SupportStats::observe(&mut s.three_t, acks.signers().filter(|p| range.contains(*p)).count());
            }
            ProtocolTag::Av => {
                let active = w_active(id, self.params.kappa, q, seed).expect("validated kappa");
                SupportStats::observe(&mut s.av, acks.signers().filter(|p| active.contains(*p)).count());
            }
        }
    }

    fn dispatch(&mut self, src: ProcessId, dst: ProcessId, ch: u64, msg: WireMessage) {
        self.count_access(dst, &msg);
        let now = self.clock;
        if self.faulty.contains(&dst) {
            if self.recording() {
                let mut r = self.pdu_record(TraceKind::Recv, src, dst, &msg);
                r.note.ch = Some(ch);
                self.emit(r);
            }
            let out = self.adversary.as_mut().map(|a| a.on_message(dst, src, &msg, now)).unwrap_or_default();
            self.apply_adversary(out);
            return;
        }
        let state = self.processes[dst.index()].as_mut().expect("correct process has an engine");
        let result = state.handle(src, &msg, now);
        match result {
            Ok(actions) => {
                if self.recording() {
                    let mut r = self.pdu_record(TraceKind::Recv, src, dst, &msg);
                    r.note.ch = Some(ch);
                    self.emit(r);
                }
                self.observe_support(&msg);
                self.apply(dst, actions, None);
            }
            Err(why) => {
                self.report.rejections += 1;
                if self.recording() {
                    let mut r = self.pdu_record(TraceKind::Reject, src, dst, &msg);
                    r.note.ch = Some(ch);
                    r.note.why = Some(why.as_str().to_string());
                    self.emit(r);
                }
            }
        }
    }

    fn record_sign(&mut self, signer: ProcessId, msg: &WireMessage, req: Option<Tick>) {
        if !self.recording() {
            return;
        }
        if let Some(ack) = ack_of(msg) {
            let mut r = TraceRecord::new(self.clock, TraceKind::Sign);
            r.src = Some(signer);
            r.proto = Some(ack.proto);
            r.role = Some(Role::Ack);
            r.subject = Some(ack.subject);
            r.digest = Some(ack.digest.prefix());
            r.note.req = req;
            self.emit(r);
        }
    }

    /// Carries out actions of process `p`. `req` is the request tick when
    /// the actions come from a delayed recovery ack.
    fn apply(&mut self, p: ProcessId, actions: Vec<Action>, req: Option<Tick>) {
        for action in actions {
            match action {
                Action::Send { to, msg } => {
                    self.record_sign(p, &msg, req);
                    self.transmit(p, to, msg);
                }
                Action::Broadcast(msg) => {
                    self.count_final_ack_set(p, &msg);
                    for j in 0..self.config.n {
                        self.transmit(p, ProcessId::from(j), msg.clone());
                    }
                }
                Action::Deliver(message) => {
                    if self.faulty.contains(&p) {
                        continue;
                    }
                    let id = message.id;
                    let digest = message.digest();
                    self.report.deliveries[p.index()] += 1;
                    let seen = self.delivered.entry(id).or_default();
                    if !seen.contains(&digest) {
                        seen.push(digest);
                        if seen.len() == 2 {
                            self.report.conflict_ids.push(id);
                        }
                    }
                    if self.recording() {
                        let mut r = TraceRecord::new(self.clock, TraceKind::Deliver);
                        r.src = Some(p);
                        r.subject = Some(id);
                        r.digest = Some(digest.prefix());
                        self.emit(r);
                    }
                    self.oracle.pending.push((id, p));
                    if !self.oracle.scheduled {
                        self.oracle.scheduled = true;
                        let at = self.clock + self.config.stability_lag;
                        self.schedule(at, Event::Publish);
                    }
                }
                Action::SetTimer { timer, delay } => {
                    let at = self.clock + delay;
                    self.schedule(at, Event::Timer { p, timer });
                }
                Action::RaiseAlert(evidence) => self.raise_alert(p, evidence),
            }
        }
    }

    /// Counts the signers of a correct sender's final E or 3T ack set as
    /// witness accesses.
    fn count_final_ack_set(&mut self, p: ProcessId, msg: &WireMessage) {
        if self.faulty.contains(&p) {
            return;
        }
        if let WireBody::Deliver { message, acks } = &msg.body {
            if message.id.sender == p && acks.proto() != ProtocolTag::Av {
                for s in acks.signers() {
                    self.report.witness_accesses[s.index()] += 1;
                }
            }
        }
    }

    fn raise_alert(&mut self, p: ProcessId, evidence: Arc<AlertEvidence>) {
        self.report.alerts += 1;
        if self.recording() {
            let mut r = TraceRecord::new(self.clock, TraceKind::Alert);
            r.src = Some(p);
            r.proto = Some(ProtocolTag::Av);
            r.role = Some(Role::Alert);
            r.subject = Some(evidence.subject());
            r.digest = Some(evidence.first.digest.prefix());
            r.note.accused = Some(evidence.accused());
            self.emit(r);
        }
        for j in 0..self.config.n {
            let dst = ProcessId::from(j);
            if dst == p {
                continue;
            }
            if self.config.alert_can_lose && self.config.drop_prob > 0.0 && self.alert_rng.gen_bool(self.config.drop_prob) {
                continue;
            }
            let at = self.clock + self.alert_rng.gen_range(1..=self.config.alert_latency);
            self.schedule(at, Event::AlertArrive { dst, evidence: evidence.clone() });
        }
    }

    fn apply_adversary(&mut self, out: AdversaryOutput) {
        for (id, digest) in out.multicasts {
            if self.recording() {
                let mut r = TraceRecord::new(self.clock, TraceKind::Mcast);
                r.src = Some(id.sender);
                r.subject = Some(id);
                r.digest = Some(digest.prefix());
                self.emit(r);
            }
        }
        self.report.attacked.extend(out.attacks);
        let mut by_actor: Vec<(ProcessId, Vec<Action>)> = Vec::new();
        for (p, a) in out.actions {
            match by_actor.last_mut() {
                Some((q, list)) if *q == p => list.push(a),
                _ => by_actor.push((p, vec![a])),
            }
        }
        for (p, actions) in by_actor {
            debug_assert!(self.faulty.contains(&p), "adversary acted for correct process {p}");
            self.apply(p, actions, None);
        }
    }

    fn fire_timer(&mut self, p: ProcessId, timer: Timer) {
        let now = self.clock;
        if self.recording() {
            let mut r = TraceRecord::new(now, TraceKind::Timer);
            r.src = Some(p);
            let (why, subject) = match &timer {
                Timer::Recovery(id) => ("recovery", *id),
                Timer::DelayedAck { subject, .. } => ("delayed_ack", *subject),
                Timer::Reforward(id) => ("reforward", *id),
            };
            r.subject = Some(subject);
            r.note.why = Some(why.to_string());
            if let Timer::DelayedAck { requested_at, .. } = &timer {
                r.note.req = Some(*requested_at);
            }
            self.emit(r);
        }
        if self.faulty.contains(&p) {
            let out = self.adversary.as_mut().map(|a| a.on_timer(p, &timer, now)).unwrap_or_default();
            self.apply_adversary(out);
            return;
        }
        let req = match &timer {
            Timer::DelayedAck { requested_at, .. } => Some(*requested_at),
            _ => None,
        };
        let state = self.processes[p.index()].as_mut().expect("correct process has an engine");
        if let Ok(actions) = state.on_timer(&timer, now) {
            self.apply(p, actions, req);
        }
    }

    fn multicast(&mut self, index: usize) {
        let sender = self.workload[index];
        let payload = format!("message {index} from {sender}").into_bytes();
        let now = self.clock;
        if self.faulty.contains(&sender) {
            let out = self.adversary.as_mut().map(|a| a.on_multicast(sender, payload, now)).unwrap_or_default();
            self.apply_adversary(out);
            return;
        }
        let state = self.processes[sender.index()].as_mut().expect("correct process has an engine");
        let (id, actions) = state.multicast(payload).expect("engine sequence numbers are gapless");
        let digest = state.pending(id.seq).expect("just multicast").digest;
        self.report.multicasts += 1;
        if self.recording() {
            let mut r = TraceRecord::new(now, TraceKind::Mcast);
            r.src = Some(sender);
            r.proto = Some(self.params.kind.tag());
            r.subject = Some(id);
            r.digest = Some(digest.prefix());
            self.emit(r);
        }
        self.apply(sender, actions, None);
    }

    fn publish(&mut self) {
        self.oracle.scheduled = false;
        let batch: StabilityBatch = Arc::new(std::mem::take(&mut self.oracle.pending));
        self.oracle.next_batch += 1;
        let batch_id = self.oracle.next_batch;
        if self.recording() {
            let mut r = TraceRecord::new(self.clock, TraceKind::Publish);
            r.note.batch = Some(batch_id);
            r.note.about = batch.to_vec();
            self.emit(r);
        }
        let (lo, hi) = (self.config.latency_lo, self.config.latency_hi);
        for j in 0..self.config.n {
            let dst = ProcessId::from(j);
            if self.faulty.contains(&dst) {
                continue;
            }
            let at = self.clock + self.oracle.rng.gen_range(lo..=hi);
            self.schedule(at, Event::Notify { dst, batch_id, batch: batch.clone() });
        }
    }

    /// Processes the next event. Returns `false` when nothing is left or
    /// the next event lies beyond `max_ticks`.
    pub fn step(&mut self) -> bool {
        match self.queue.peek() {
            Some(s) if s.time <= self.config.max_ticks => {}
            _ => return false,
        }
        let Scheduled { time, event, .. } = self.queue.pop().expect("peeked");
        self.clock = time;
        self.report.events += 1;
        match event {
            Event::Multicast { index } => self.multicast(index),
            Event::Attempt { src, dst, ch, attempt } => self.attempt(src, dst, ch, attempt),
            Event::Arrive { src, dst, ch } => self.arrive(src, dst, ch),
            Event::Timer { p, timer } => self.fire_timer(p, timer),
            Event::AlertArrive { dst, evidence } => {
                if self.recording() {
                    let mut r = TraceRecord::new(time, TraceKind::AlertRecv);
                    r.dst = Some(dst);
                    r.proto = Some(ProtocolTag::Av);
                    r.role = Some(Role::Alert);
                    r.subject = Some(evidence.subject());
                    r.digest = Some(evidence.first.digest.prefix());
                    r.note.accused = Some(evidence.accused());
                    self.emit(r);
                }
                if self.faulty.contains(&dst) {
                    if let Some(a) = self.adversary.as_mut() {
                        a.on_alert(dst, &evidence, time);
                    }
                } else {
                    let state = self.processes[dst.index()].as_mut().expect("correct process has an engine");
                    let _ = state.on_alert(&evidence);
                }
            }
            Event::Publish => self.publish(),
            Event::Notify { dst, batch_id, batch } => {
                if self.recording() {
                    let mut r = TraceRecord::new(time, TraceKind::Notify);
                    r.dst = Some(dst);
                    r.role = Some(Role::SmNotify);
                    r.note.batch = Some(batch_id);
                    self.emit(r);
                }
                let state = self.processes[dst.index()].as_mut().expect("correct process has an engine");
                let _ = state.on_sm_notify(&batch);
            }
        }
        true
    }

    /// Steps until the queue drains or `max_ticks` is reached.
    pub fn run(&mut self) -> bool {
        while self.step() {}
        self.queue.is_empty()
    }

    /// Runs the world to completion and returns its report.
    pub fn run_to_quiescence(mut self) -> Result<RunReport, SimError> {
        self.run();
        Ok(self.finish())
    }

    /// Like [`run_to_quiescence`](Self::run_to_quiescence) but keeps the
    /// world so that its trace can be written afterwards.
    pub fn run_and_report(&mut self) -> RunReport {
        self.run();
        self.finish()
    }

    fn finish(&mut self) -> RunReport {
        let quiescent = self.queue.is_empty();
        if self.recording() {
            let mut r = TraceRecord::new(self.clock, TraceKind::End);
            r.note.quiescent = Some(quiescent);
            r.note.ticks = Some(self.clock);
            self.emit(r);
        }
        let mut report = self.report.clone();
        report.quiescent = quiescent;
        report.elapsed = self.clock;
        report.conflicts = report.conflict_ids.len();
        if let Some(checker) = self.checker.take() {
            report.violations = checker.finish().violations;
        }
        report
    }

    /// The engine kind this world runs.
    pub fn protocol(&self) -> ProtocolKind {
        self.params.kind
    }
}
