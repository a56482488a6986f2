use std::fmt;
use std::str::FromStr;

use sha2::{Digest as _, Sha256};
use thiserror::Error;

use crate::adversary::AdversarySpec;
use crate::protocol::{ProtocolError, ProtocolKind, ProtocolParams, Tick};
use crate::quorum::{QuorumParams, W3tLayout, WitnessSeed};

/// A configuration problem, tagged with the offending field.
#[derive(Debug, Error, Clone, PartialEq)]
#[error("{field}: {message}")]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(field: impl Into<String>, message: impl fmt::Display) -> Self {
        ConfigError { field: field.into(), message: message.to_string() }
    }
}

/// Which process issues each multicast of the workload.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Workload {
    /// Message `i` is sent by process `i mod n`.
    RoundRobin,
    /// Senders drawn uniformly at random.
    Uniform,
    /// Only faulty processes send, in turn.
    Faulty,
}

impl Workload {
    pub fn as_str(self) -> &'static str {
        match self {
            Workload::RoundRobin => "round-robin",
            Workload::Uniform => "uniform",
            Workload::Faulty => "faulty",
        }
    }
}

impl FromStr for Workload {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "round-robin" | "rr" => Ok(Workload::RoundRobin),
            "uniform" => Ok(Workload::Uniform),
            "faulty" => Ok(Workload::Faulty),
            _ => Err(format!("unknown workload {s:?} (expected round-robin, uniform or faulty)")),
        }
    }
}

/// Everything needed to build a [`SimWorld`](super::SimWorld).
///
/// Two worlds built from equal configs produce identical traces.
#[derive(Clone, Debug, PartialEq)]
pub struct SimConfig {
    pub protocol: ProtocolKind,
    pub n: usize,
    pub t: usize,
    pub kappa: usize,
    pub delta: usize,
    pub slack_c: usize,
    pub messages: usize,
    pub workload: Workload,
    /// Ticks between consecutive workload multicasts.
    pub multicast_interval: Tick,
    pub latency_lo: Tick,
    pub latency_hi: Tick,
    /// Independent loss probability of each transmission attempt.
    pub drop_prob: f64,
    pub retransmit_interval: Tick,
    /// Upper bound on alert-plane latency.
    pub alert_latency: Tick,
    /// Defaults to twice `alert_latency`.
    pub recovery_ack_delay: Option<Tick>,
    pub recovery_timeout: Tick,
    pub reforward_timeout: Tick,
    /// Period of the stability oracle.
    pub stability_lag: Tick,
    pub holdback_cap: usize,
    pub adversary: AdversarySpec,
    /// Number of faulty processes; defaults to `t` when an adversary is set.
    pub faulty_count: Option<usize>,
    pub adversary_knows_r: bool,
    /// Lets alerts be lost like ordinary transmissions. Outside the model.
    pub alert_can_lose: bool,
    pub seed: u64,
    pub witness_seed: Option<u64>,
    pub adversary_seed: Option<u64>,
    pub max_ticks: Tick,
    pub w3t_layout: W3tLayout,
    /// Keep the full event trace in memory.
    pub record_trace: bool,
    /// Run the invariant checker online.
    pub check: bool,
}

impl SimConfig {
    pub fn new(protocol: ProtocolKind, n: usize, t: usize) -> Self {
        let (kappa, delta) = if protocol == ProtocolKind::Act { (3, 5.min(3 * t)) } else { (0, 0) };
        SimConfig {
            protocol,
            n,
            t,
            kappa,
            delta,
            slack_c: 0,
            messages: 1,
            workload: Workload::RoundRobin,
            multicast_interval: 5,
            latency_lo: 1,
            latency_hi: 5,
            drop_prob: 0.0,
            retransmit_interval: 10,
            alert_latency: 5,
            recovery_ack_delay: None,
            recovery_timeout: 100,
            reforward_timeout: 60,
            stability_lag: 20,
            holdback_cap: 1024,
            adversary: AdversarySpec::None,
            faulty_count: None,
            adversary_knows_r: true,
            alert_can_lose: false,
            seed: 0,
            witness_seed: None,
            adversary_seed: None,
            max_ticks: 10_000_000,
            w3t_layout: W3tLayout::Uniform,
            record_trace: false,
            check: true,
        }
    }

    pub fn act(n: usize, t: usize, kappa: usize, delta: usize) -> Self {
        let mut c = SimConfig::new(ProtocolKind::Act, n, t);
        c.kappa = kappa;
        c.delta = delta;
        c
    }

    pub fn effective_recovery_ack_delay(&self) -> Tick {
        self.recovery_ack_delay.unwrap_or(2 * self.alert_latency)
    }

    pub fn effective_faulty_count(&self) -> usize {
        match self.faulty_count {
            Some(f) => f,
            None if self.adversary == AdversarySpec::None => 0,
            None => self.t,
        }
    }

    pub fn witness_seed(&self) -> WitnessSeed {
        WitnessSeed::from_u64(self.witness_seed.unwrap_or_else(|| derive_seed(self.seed, b"witness")))
    }

    pub fn adversary_seed(&self) -> u64 {
        self.adversary_seed.unwrap_or_else(|| derive_seed(self.seed, b"adversary"))
    }

    pub fn quorum(&self) -> Result<QuorumParams, ConfigError> {
        QuorumParams::new(self.n, self.t).map_err(|e| ConfigError::new("t", e))
    }

    /// Protocol parameters every correct process runs with.
    pub fn protocol_params(&self) -> Result<ProtocolParams, ConfigError> {
        let mut params = match self.protocol {
            ProtocolKind::Act => ProtocolParams::act(self.n, self.t, self.kappa, self.delta),
            kind => ProtocolParams::new(kind, self.n, self.t),
        }
        .map_err(protocol_field_error)?;
        params.active_slack_c = self.slack_c;
        params.recovery_timeout = self.recovery_timeout;
        params.recovery_ack_delay = self.effective_recovery_ack_delay();
        params.reforward_timeout = self.reforward_timeout;
        params.holdback_cap = self.holdback_cap;
        params.witness_seed = self.witness_seed();
        params.w3t_layout = self.w3t_layout;
        params.validate().map_err(protocol_field_error)?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.quorum()?;
        self.protocol_params()?;
        if self.latency_lo == 0 || self.latency_lo > self.latency_hi {
            return Err(ConfigError::new("latency_lo", format!("need 1 ≤ latency_lo ≤ latency_hi, got {}..{}", self.latency_lo, self.latency_hi)));
        }
        if !(0.0..1.0).contains(&self.drop_prob) {
            return Err(ConfigError::new("drop_prob", format!("must lie in [0, 1), got {}", self.drop_prob)));
        }
        if self.retransmit_interval == 0 {
            return Err(ConfigError::new("retransmit_interval", "must be at least 1"));
        }
        if self.alert_latency == 0 {
            return Err(ConfigError::new("alert_latency", "must be at least 1"));
        }
        if self.stability_lag == 0 {
            return Err(ConfigError::new("stability_lag", "must be at least 1"));
        }
        if self.protocol == ProtocolKind::Act && self.alert_latency >= self.effective_recovery_ack_delay() {
            return Err(ConfigError::new(
                "recovery_ack_delay",
                format!(
                    "alert latency bound {} must be smaller than recovery_ack_delay {}",
                    self.alert_latency,
                    self.effective_recovery_ack_delay()
                ),
            ));
        }
        let f = self.effective_faulty_count();
        if f > self.t {
            return Err(ConfigError::new("faulty_count", format!("{f} faulty processes exceed t={}", self.t)));
        }
        if self.adversary != AdversarySpec::None && f == 0 {
            return Err(ConfigError::new("faulty_count", "an adversary needs at least one faulty process"));
        }
        if self.workload == Workload::Faulty && f == 0 {
            return Err(ConfigError::new("workload", "faulty workload needs at least one faulty process"));
        }
        if matches!(self.adversary, AdversarySpec::RegimeSplit | AdversarySpec::SeqBurner)
            && self.protocol != ProtocolKind::Act
        {
            return Err(ConfigError::new("adversary", format!("{} only applies to act", self.adversary)));
        }
        Ok(())
    }

    /// `key=value` lines, one per field, in a fixed order.
    pub fn to_kv(&self) -> Vec<(&'static str, String)> {
        let opt = |v: Option<u64>| v.map_or_else(|| "-".to_string(), |v| v.to_string());
        let mut kv = vec![
            ("protocol", self.protocol.as_str().to_string()),
            ("n", self.n.to_string()),
            ("t", self.t.to_string()),
            ("kappa", self.kappa.to_string()),
            ("delta", self.delta.to_string()),
            ("slack_c", self.slack_c.to_string()),
            ("messages", self.messages.to_string()),
            ("workload", self.workload.as_str().to_string()),
            ("multicast_interval", self.multicast_interval.to_string()),
            ("latency_lo", self.latency_lo.to_string()),
            ("latency_hi", self.latency_hi.to_string()),
            ("drop_prob", self.drop_prob.to_string()),
            ("retransmit_interval", self.retransmit_interval.to_string()),
            ("alert_latency", self.alert_latency.to_string()),
            ("recovery_ack_delay", self.effective_recovery_ack_delay().to_string()),
            ("recovery_timeout", self.recovery_timeout.to_string()),
            ("reforward_timeout", self.reforward_timeout.to_string()),
            ("stability_lag", self.stability_lag.to_string()),
            ("holdback_cap", self.holdback_cap.to_string()),
            ("adversary", self.adversary.to_string()),
        ];
        if let AdversarySpec::Crash { at } = self.adversary {
            kv.push(("crash_at", at.to_string()));
        }
        kv.extend([
            ("faulty_count", self.effective_faulty_count().to_string()),
            ("adversary_knows_r", self.adversary_knows_r.to_string()),
            ("alert_can_lose", self.alert_can_lose.to_string()),
            ("seed", self.seed.to_string()),
            ("witness_seed", opt(self.witness_seed)),
            ("adversary_seed", opt(self.adversary_seed)),
            ("max_ticks", self.max_ticks.to_string()),
            (
                "w3t_layout",
                match self.w3t_layout {
                    W3tLayout::Uniform => "uniform",
                    W3tLayout::RoundRobinBlocks => "round-robin-blocks",
                }
                .to_string(),
            ),
        ]);
        kv
    }

    /// Sets one field from its textual form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let value = value.trim();
        let key = key.trim().replace('-', "_");
        let key = key.as_str();
        fn num<T: FromStr>(key: &str, v: &str) -> Result<T, ConfigError>
        where
            T::Err: fmt::Display,
        {
            v.parse::<T>().map_err(|e| ConfigError::new(key, format!("cannot parse {v:?}: {e}")))
        }
        fn opt_num(key: &str, v: &str) -> Result<Option<u64>, ConfigError> {
            if v == "-" || v.is_empty() {
                Ok(None)
            } else {
                num(key, v).map(Some)
            }
        }
        match key {
            "protocol" => {
                self.protocol = ProtocolKind::parse(value)
                    .ok_or_else(|| ConfigError::new(key, format!("unknown protocol {value:?} (expected e, 3t or act)")))?
            }
            "n" => self.n = num(key, value)?,
            "t" => self.t = num(key, value)?,
            "kappa" => self.kappa = num(key, value)?,
            "delta" => self.delta = num(key, value)?,
            "slack_c" | "active_slack_c" => self.slack_c = num(key, value)?,
            "messages" => self.messages = num(key, value)?,
            "workload" => self.workload = value.parse().map_err(|e| ConfigError::new(key, e))?,
            "multicast_interval" => self.multicast_interval = num(key, value)?,
            "latency_lo" => self.latency_lo = num(key, value)?,
            "latency_hi" => self.latency_hi = num(key, value)?,
            "drop_prob" => self.drop_prob = num(key, value)?,
            "retransmit_interval" => self.retransmit_interval = num(key, value)?,
            "alert_latency" => self.alert_latency = num(key, value)?,
            "recovery_ack_delay" => self.recovery_ack_delay = opt_num(key, value)?,
            "recovery_timeout" => self.recovery_timeout = num(key, value)?,
            "reforward_timeout" => self.reforward_timeout = num(key, value)?,
            "stability_lag" => self.stability_lag = num(key, value)?,
            "holdback_cap" => self.holdback_cap = num(key, value)?,
            "adversary" => {
                let at = match self.adversary {
                    AdversarySpec::Crash { at } => at,
                    _ => 0,
                };
                self.adversary = AdversarySpec::parse(value, at).map_err(|e| ConfigError::new(key, e))?
            }
            "crash_at" => {
                let at = num(key, value)?;
                if let AdversarySpec::Crash { at: a } = &mut self.adversary {
                    *a = at;
                } else {
                    self.adversary = AdversarySpec::Crash { at };
                }
            }
            "faulty_count" => self.faulty_count = opt_num(key, value)?.map(|v| v as usize),
            "adversary_knows_r" => self.adversary_knows_r = num(key, value)?,
            "alert_can_lose" => self.alert_can_lose = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "witness_seed" => self.witness_seed = opt_num(key, value)?,
            "adversary_seed" => self.adversary_seed = opt_num(key, value)?,
            "max_ticks" => self.max_ticks = num(key, value)?,
            "w3t_layout" => {
                self.w3t_layout = match value {
                    "uniform" => W3tLayout::Uniform,
                    "round-robin-blocks" | "round_robin_blocks" => W3tLayout::RoundRobinBlocks,
                    _ => return Err(ConfigError::new(key, format!("unknown layout {value:?}"))),
                }
            }
            "record_trace" => self.record_trace = num(key, value)?,
            "check" => self.check = num(key, value)?,
            _ => return Err(ConfigError::new(key, "unknown configuration key")),
        }
        Ok(())
    }

    /// Applies `key=value` lines on top of `self`. Blank lines and lines
    /// starting with `#` are skipped.
    pub fn apply_kv(&mut self, text: &str) -> Result<(), ConfigError> {
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| ConfigError::new(format!("line {}", lineno + 1), format!("expected key=value, got {line:?}")))?;
            self.set(k, v)?;
        }
        Ok(())
    }

    pub fn from_kv(text: &str) -> Result<Self, ConfigError> {
        let mut c = SimConfig::new(ProtocolKind::E, 4, 1);
        c.apply_kv(text)?;
        // ACT defaults depend on the final protocol.
        if c.protocol == ProtocolKind::Act && c.kappa == 0 && !text.contains("kappa") {
            c.kappa = 3;
            if !text.contains("delta") {
                c.delta = 5.min(3 * c.t);
            }
        }
        Ok(c)
    }
}

fn protocol_field_error(e: ProtocolError) -> ConfigError {
    let field = match &e {
        ProtocolError::Quorum(_) => "t",
        ProtocolError::ZeroKappa => "kappa",
        ProtocolError::ProbeBudget { .. } | ProtocolError::DeltaTooLarge { .. } => "delta",
        ProtocolError::SlackTooLarge { .. } => "slack_c",
        _ => "protocol",
    };
    ConfigError::new(field, e)
}

/// Independent sub-seed of `seed` for the named purpose.
pub fn derive_seed(seed: u64, purpose: &[u8]) -> u64 {
    let mut h = Sha256::new();
    h.update(b"securecast/seed");
    h.update(seed.to_le_bytes());
    h.update(purpose);
    let out: [u8; 32] = h.finalize().into();
    u64::from_le_bytes(out[..8].try_into().unwrap())
}
