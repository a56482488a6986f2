use std::fmt::Write as _;

use super::checker::Violation;
use crate::crypto::{MessageId, ProcessId};
use crate::protocol::{ProtocolKind, Role, Tick};

/// Smallest number of in-range signers seen on an accepted ack set, per
/// protocol tag.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SupportStats {
    pub e: Option<usize>,
    pub three_t: Option<usize>,
    pub av: Option<usize>,
}

impl SupportStats {
    pub(crate) fn observe(slot: &mut Option<usize>, v: usize) {
        *slot = Some(slot.map_or(v, |old| old.min(v)));
    }
}

/// Measurements of one run.
#[derive(Clone, Debug)]
pub struct RunReport {
    pub protocol: ProtocolKind,
    pub n: usize,
    pub t: usize,
    pub faulty: Vec<ProcessId>,
    /// Multicasts issued by correct processes.
    pub multicasts: usize,
    /// Deliveries per process (faulty processes stay at zero).
    pub deliveries: Vec<u64>,
    /// Ids that correct processes delivered with different contents.
    pub conflict_ids: Vec<MessageId>,
    pub conflicts: usize,
    /// Ids on which the adversary attempted a conflicting delivery.
    pub attacked: Vec<MessageId>,
    pub alerts: usize,
    /// PDUs received per process and role, indexed by [`Role::index`].
    pub role_counts: Vec<[u64; 7]>,
    /// Accesses in a witness or probe capacity, per process.
    pub witness_accesses: Vec<u64>,
    pub min_support: SupportStats,
    pub elapsed: Tick,
    pub events: u64,
    pub sends: u64,
    pub drops: u64,
    pub rejections: u64,
    pub quiescent: bool,
    pub violations: Vec<Violation>,
}

impl RunReport {
    pub(crate) fn empty(protocol: ProtocolKind, n: usize, t: usize, faulty: Vec<ProcessId>) -> Self {
        RunReport {
            protocol,
            n,
            t,
            faulty,
            multicasts: 0,
            deliveries: vec![0; n],
            conflict_ids: Vec::new(),
            conflicts: 0,
            attacked: Vec::new(),
            alerts: 0,
            role_counts: vec![[0; 7]; n],
            witness_accesses: vec![0; n],
            min_support: SupportStats::default(),
            elapsed: 0,
            events: 0,
            sends: 0,
            drops: 0,
            rejections: 0,
            quiescent: false,
            violations: Vec::new(),
        }
    }

    pub fn total_deliveries(&self) -> u64 {
        self.deliveries.iter().sum()
    }

    /// Busiest process's witness accesses divided by the number of
    /// multicasts by correct processes.
    pub fn measured_load(&self) -> f64 {
        if self.multicasts == 0 {
            return 0.0;
        }
        let max = self.witness_accesses.iter().copied().max().unwrap_or(0);
        max as f64 / self.multicasts as f64
    }

    pub fn received(&self, p: ProcessId, role: Role) -> u64 {
        self.role_counts[p.index()][role.index()]
    }

    /// Human-readable `key: value` summary.
    pub fn summary(&self) -> String {
        let mut s = String::new();
        let faulty: Vec<String> = self.faulty.iter().map(|p| p.to_string()).collect();
        let _ = writeln!(s, "protocol: {}", self.protocol);
        let _ = writeln!(s, "n: {}  t: {}", self.n, self.t);
        let _ = writeln!(s, "faulty: [{}]", faulty.join(","));
        let _ = writeln!(s, "multicasts: {}", self.multicasts);
        let _ = writeln!(s, "deliveries: {}", self.total_deliveries());
        let _ = writeln!(s, "conflicts: {}", self.conflicts);
        let _ = writeln!(s, "attacked: {}", self.attacked.len());
        let _ = writeln!(s, "alerts: {}", self.alerts);
        let _ = writeln!(s, "load: {:.6}", self.measured_load());
        let _ = writeln!(s, "sends: {}  drops: {}  rejections: {}", self.sends, self.drops, self.rejections);
        let _ = writeln!(s, "elapsed: {} ticks, {} events", self.elapsed, self.events);
        let _ = writeln!(s, "quiescent: {}", self.quiescent);
        let _ = writeln!(s, "violations: {}", self.violations.len());
        for v in &self.violations {
            let _ = writeln!(s, "  {v}");
        }
        s
    }
}
