//! Run log and its CSV form (`time_cycles,kind,vector_or_addr,detail`).

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use thiserror::Error;

use super::Cycle;
use crate::mem_model::VirtAddr;

pub const LOG_HEADER: [&str; 4] = ["time_cycles", "kind", "vector_or_addr", "detail"];

#[derive(Debug, Error)]
pub enum LogError {
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad header {0:?}")]
    Header(Vec<String>),
    #[error("line {line}: {msg}")]
    Record { line: u64, msg: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LogKind {
    Irq,
    Detect,
    Tick,
}

impl LogKind {
    pub fn as_str(self) -> &'static str {
        match self {
            LogKind::Irq => "irq",
            LogKind::Detect => "detect",
            LogKind::Tick => "tick",
        }
    }
}

impl FromStr for LogKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "irq" => Ok(LogKind::Irq),
            "detect" => Ok(LogKind::Detect),
            "tick" => Ok(LogKind::Tick),
            other => Err(format!("unknown kind {other:?}")),
        }
    }
}

/// What a record is about: an interrupt vector, an address, or a workload.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subject {
    Vector(u8),
    Addr(VirtAddr),
    Workload(u16),
}

impl fmt::Display for Subject {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Subject::Vector(v) => write!(f, "{v}"),
            Subject::Addr(a) => write!(f, "{:#x}", a.as_u64()),
            Subject::Workload(w) => write!(f, "w{w}"),
        }
    }
}

impl FromStr for Subject {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        if let Some(hex) = s.strip_prefix("0x") {
            let raw = u64::from_str_radix(hex, 16).map_err(|e| e.to_string())?;
            return VirtAddr::try_new(raw).map(Subject::Addr).map_err(|e| e.to_string());
        }
        if let Some(w) = s.strip_prefix('w') {
            return w.parse().map(Subject::Workload).map_err(|e| format!("{e}"));
        }
        s.parse().map(Subject::Vector).map_err(|e| format!("bad vector {s:?}: {e}"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LogRecord {
    pub time: Cycle,
    pub kind: LogKind,
    pub subject: Subject,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SimLog {
    pub records: Vec<LogRecord>,
}

impl SimLog {
    pub fn push(&mut self, time: Cycle, kind: LogKind, subject: Subject, detail: impl Into<String>) {
        self.records.push(LogRecord { time, kind, subject, detail: detail.into() });
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn of_kind(&self, kind: LogKind) -> impl Iterator<Item = &LogRecord> {
        self.records.iter().filter(move |r| r.kind == kind)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), LogError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(LOG_HEADER)?;
        for r in &self.records {
            w.write_record([
                r.time.0.to_string(),
                r.kind.as_str().to_string(),
                r.subject.to_string(),
                r.detail.clone(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("log is utf-8")
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self, LogError> {
        let mut rdr = csv::Reader::from_reader(input);
        let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        if header != LOG_HEADER {
            return Err(LogError::Header(header));
        }
        let mut log = SimLog::default();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let line = i as u64 + 2;
            let bad = |msg: String| LogError::Record { line, msg };
            if rec.len() != 4 {
                return Err(bad(format!("expected 4 fields, got {}", rec.len())));
            }
            let time = rec[0].parse::<u64>().map_err(|e| bad(e.to_string()))?;
            let kind = rec[1].parse::<LogKind>().map_err(bad)?;
            let subject = rec[2].parse::<Subject>().map_err(|e| LogError::Record { line, msg: e })?;
            log.push(Cycle(time), kind, subject, rec[3].to_string());
        }
        Ok(log)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_shape() {
        let mut log = SimLog::default();
        log.push(Cycle(100), LogKind::Irq, Subject::Vector(35), "");
        log.push(Cycle(2100), LogKind::Detect, Subject::Vector(35), "leakidt");
        log.push(Cycle(3000), LogKind::Detect, Subject::Addr(VirtAddr::new(0xffff_fe00_0000_0230)), "prime_probe");
        let text = log.to_csv_string();
        assert_eq!(
            text,
            "time_cycles,kind,vector_or_addr,detail\n100,irq,35,\n2100,detect,35,leakidt\n3000,detect,0xfffffe0000000230,prime_probe\n"
        );
        assert_eq!(SimLog::read_csv(text.as_bytes()).unwrap(), log);
    }

    #[test]
    fn rejects_wrong_header() {
        assert!(matches!(SimLog::read_csv("a,b,c,d\n".as_bytes()), Err(LogError::Header(_))));
    }
}
