//! Line-oriented trace format.
//!
//! Each event is one line of nine tab-separated columns:
//!
//! | # | column  | content                                            |
//! |---|---------|----------------------------------------------------|
//! | 1 | tick    | simulated time                                     |
//! | 2 | kind    | `mcast send drop recv reject deliver sign timer alert alert_recv publish notify end` |
//! | 3 | src     | sending or acting process                          |
//! | 4 | dst     | receiving process                                  |
//! | 5 | proto   | `E`, `3T` or `AV`                                  |
//! | 6 | role    | PDU role (`regular`, `ack`, …)                     |
//! | 7 | subject | message id as `sender:seq`                         |
//! | 8 | digest  | first 8 digest bytes, 16 hex digits                |
//! | 9 | note    | space-separated `key=value` annotations            |
//!
//! Empty columns hold `-`. Lines starting with `#` form the header: the
//! configuration as `# key=value` lines and the faulty set as
//! `# faulty=1,4,7`.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use crate::crypto::{MessageId, ProcessId, ProtocolTag};
use crate::protocol::{Role, Tick};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TraceKind {
    Mcast,
    Send,
    Drop,
    Recv,
    Reject,
    Deliver,
    Sign,
    Timer,
    Alert,
    AlertRecv,
    Publish,
    Notify,
    End,
}

impl TraceKind {
    pub const ALL: [TraceKind; 13] = [
        TraceKind::Mcast,
        TraceKind::Send,
        TraceKind::Drop,
        TraceKind::Recv,
        TraceKind::Reject,
        TraceKind::Deliver,
        TraceKind::Sign,
        TraceKind::Timer,
        TraceKind::Alert,
        TraceKind::AlertRecv,
        TraceKind::Publish,
        TraceKind::Notify,
        TraceKind::End,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TraceKind::Mcast => "mcast",
            TraceKind::Send => "send",
            TraceKind::Drop => "drop",
            TraceKind::Recv => "recv",
            TraceKind::Reject => "reject",
            TraceKind::Deliver => "deliver",
            TraceKind::Sign => "sign",
            TraceKind::Timer => "timer",
            TraceKind::Alert => "alert",
            TraceKind::AlertRecv => "alert_recv",
            TraceKind::Publish => "publish",
            TraceKind::Notify => "notify",
            TraceKind::End => "end",
        }
    }
}

impl FromStr for TraceKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        TraceKind::ALL.into_iter().find(|k| k.as_str() == s).ok_or_else(|| format!("unknown event kind {s:?}"))
    }
}

/// Annotations. Only the fields relevant to a record's kind are set.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Note {
    /// Channel sequence number.
    pub ch: Option<u64>,
    /// Transmission attempt, starting at 1.
    pub attempt: Option<u32>,
    /// Tick at which a delayed ack was requested.
    pub req: Option<Tick>,
    pub accused: Option<ProcessId>,
    /// Rejection reason or timer kind.
    pub why: Option<String>,
    pub quiescent: Option<bool>,
    pub ticks: Option<Tick>,
    pub batch: Option<u64>,
    /// Stability entries `(message, process that delivered it)`.
    pub about: Vec<(MessageId, ProcessId)>,
}

impl Note {
    fn is_empty(&self) -> bool {
        *self == Note::default()
    }
}

impl fmt::Display for Note {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_empty() {
            return f.write_str("-");
        }
        let mut parts: Vec<String> = Vec::new();
        if let Some(v) = self.ch {
            parts.push(format!("ch={v}"));
        }
        if let Some(v) = self.attempt {
            parts.push(format!("try={v}"));
        }
        if let Some(v) = self.req {
            parts.push(format!("req={v}"));
        }
        if let Some(v) = self.accused {
            parts.push(format!("accused={v}"));
        }
        if let Some(v) = &self.why {
            parts.push(format!("why={v}"));
        }
        if let Some(v) = self.quiescent {
            parts.push(format!("quiescent={}", u8::from(v)));
        }
        if let Some(v) = self.ticks {
            parts.push(format!("ticks={v}"));
        }
        if let Some(v) = self.batch {
            parts.push(format!("batch={v}"));
        }
        if !self.about.is_empty() {
            let mut s = String::from("about=");
            for (i, (id, p)) in self.about.iter().enumerate() {
                if i > 0 {
                    s.push('|');
                }
                let _ = write!(s, "{id}@{p}");
            }
            parts.push(s);
        }
        f.write_str(&parts.join(" "))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraceRecord {
    pub tick: Tick,
    pub kind: TraceKind,
    pub src: Option<ProcessId>,
    pub dst: Option<ProcessId>,
    pub proto: Option<ProtocolTag>,
    pub role: Option<Role>,
    pub subject: Option<MessageId>,
    pub digest: Option<u64>,
    pub note: Note,
}

impl TraceRecord {
    pub fn new(tick: Tick, kind: TraceKind) -> Self {
        TraceRecord { tick, kind, src: None, dst: None, proto: None, role: None, subject: None, digest: None, note: Note::default() }
    }
}

fn dash<T: fmt::Display>(v: &Option<T>) -> String {
    v.as_ref().map_or_else(|| "-".to_string(), |v| v.to_string())
}

impl fmt::Display for TraceRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            self.tick,
            self.kind.as_str(),
            dash(&self.src),
            dash(&self.dst),
            dash(&self.proto),
            dash(&self.role),
            dash(&self.subject),
            self.digest.map_or_else(|| "-".to_string(), |d| format!("{d:016x}")),
            self.note
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("line {line}: {message}")]
pub struct TraceParseError {
    pub line: usize,
    pub message: String,
}

fn parse_opt<T>(s: &str, f: impl FnOnce(&str) -> Result<T, String>) -> Result<Option<T>, String> {
    if s == "-" {
        Ok(None)
    } else {
        f(s).map(Some)
    }
}

fn parse_pid(s: &str) -> Result<ProcessId, String> {
    s.parse::<u32>().map(ProcessId).map_err(|_| format!("bad process id {s:?}"))
}

fn parse_mid(s: &str) -> Result<MessageId, String> {
    let (a, b) = s.split_once(':').ok_or_else(|| format!("bad message id {s:?}"))?;
    Ok(MessageId::new(parse_pid(a)?, b.parse().map_err(|_| format!("bad sequence number in {s:?}"))?))
}

fn parse_num<T: FromStr>(k: &str, v: &str) -> Result<T, String> {
    v.parse().map_err(|_| format!("bad value for {k}: {v:?}"))
}

fn parse_note(s: &str) -> Result<Note, String> {
    let mut note = Note::default();
    if s == "-" {
        return Ok(note);
    }
    for part in s.split(' ').filter(|p| !p.is_empty()) {
        let (k, v) = part.split_once('=').ok_or_else(|| format!("bad annotation {part:?}"))?;
        match k {
            "ch" => note.ch = Some(parse_num(k, v)?),
            "try" => note.attempt = Some(parse_num(k, v)?),
            "req" => note.req = Some(parse_num(k, v)?),
            "accused" => note.accused = Some(parse_pid(v)?),
            "why" => note.why = Some(v.to_string()),
            "quiescent" => note.quiescent = Some(parse_num::<u8>(k, v)? != 0),
            "ticks" => note.ticks = Some(parse_num(k, v)?),
            "batch" => note.batch = Some(parse_num(k, v)?),
            "about" => {
                for entry in v.split('|') {
                    let (id, p) = entry.split_once('@').ok_or_else(|| format!("bad stability entry {entry:?}"))?;
                    note.about.push((parse_mid(id)?, parse_pid(p)?));
                }
            }
            _ => return Err(format!("unknown annotation {k:?}")),
        }
    }
    Ok(note)
}

impl FromStr for TraceRecord {
    type Err = String;

    fn from_str(line: &str) -> Result<Self, String> {
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 9 {
            return Err(format!("expected 9 tab-separated columns, got {}", cols.len()));
        }
        Ok(TraceRecord {
            tick: parse_num("tick", cols[0])?,
            kind: cols[1].parse()?,
            src: parse_opt(cols[2], parse_pid)?,
            dst: parse_opt(cols[3], parse_pid)?,
            proto: parse_opt(cols[4], |s| ProtocolTag::parse(s).ok_or_else(|| format!("bad protocol tag {s:?}")))?,
            role: parse_opt(cols[5], |s| Role::parse(s).ok_or_else(|| format!("bad role {s:?}")))?,
            subject: parse_opt(cols[6], parse_mid)?,
            digest: parse_opt(cols[7], |s| u64::from_str_radix(s, 16).map_err(|_| format!("bad digest {s:?}")))?,
            note: parse_note(cols[8])?,
        })
    }
}

/// A parsed trace file: header pairs plus records with their line numbers.
#[derive(Clone, Debug, Default)]
pub struct TraceFile {
    pub header: Vec<(String, String)>,
    pub records: Vec<(usize, TraceRecord)>,
}

impl TraceFile {
    pub fn parse(text: &str) -> Result<TraceFile, TraceParseError> {
        let mut file = TraceFile::default();
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            if line.trim().is_empty() {
                continue;
            }
            if let Some(h) = line.strip_prefix('#') {
                if let Some((k, v)) = h.trim().split_once('=') {
                    file.header.push((k.trim().to_string(), v.trim().to_string()));
                }
                continue;
            }
            let rec = line.parse().map_err(|message| TraceParseError { line: line_no, message })?;
            file.records.push((line_no, rec));
        }
        Ok(file)
    }

    pub fn header_value(&self, key: &str) -> Option<&str> {
        self.header.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }
}
