//! Raw multimodal event streams and their line-delimited JSON format.
//!
//! One record per line, tagged by `type` ∈ {prox, phys, dwell, link};
//! timestamps are epoch seconds.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{GvfError, Result};

/// Pairwise radio proximity sample between two agents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProxRecord {
    pub t: f64,
    pub agent_i: String,
    pub agent_j: String,
    /// Signal quality in dB, higher = closer.
    pub rssi: f64,
}

/// One sample of a named physiological channel for an agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhysRecord {
    pub t: f64,
    pub agent: String,
    pub channel: String,
    pub value: f64,
}

/// Time an agent spent inside a sensor's active radius, in minutes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DwellRecord {
    pub t: f64,
    pub agent: String,
    pub sensor: String,
    pub duration: f64,
}

/// Kind of the non-agent endpoint of a static link.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinkTargetKind {
    #[default]
    External,
    Spatial,
}

/// Static agent-to-node association (EHR entry, registered spatial cell).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkRecord {
    pub agent: String,
    pub node: String,
    #[serde(default)]
    pub node_kind: LinkTargetKind,
}

/// Wire form of a single JSONL line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum WireRecord {
    Prox(ProxRecord),
    Phys(PhysRecord),
    Dwell(DwellRecord),
    Link(LinkRecord),
}

/// Timestamped multimodal records feeding complex construction.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EventStream {
    pub proximity: Vec<ProxRecord>,
    pub physio: Vec<PhysRecord>,
    pub dwell: Vec<DwellRecord>,
    pub links: Vec<LinkRecord>,
}

impl EventStream {
    /// Checks that timestamps are non-decreasing within each record class.
    pub fn validate(&self) -> Result<()> {
        fn check<T>(items: &[T], class: &'static str, t: impl Fn(&T) -> f64) -> Result<()> {
            for (index, w) in items.windows(2).enumerate() {
                if t(&w[1]) < t(&w[0]) {
                    return Err(GvfError::TimestampOrder {
                        class,
                        index: index + 1,
                    });
                }
            }
            Ok(())
        }
        check(&self.proximity, "prox", |r| r.t)?;
        check(&self.physio, "phys", |r| r.t)?;
        check(&self.dwell, "dwell", |r| r.t)?;
        Ok(())
    }

    pub fn is_empty(&self) -> bool {
        self.proximity.is_empty()
            && self.physio.is_empty()
            && self.dwell.is_empty()
            && self.links.is_empty()
    }

    /// Parses line-delimited JSON. Line numbers in errors are 1-based.
    pub fn from_jsonl<R: BufRead>(reader: R) -> Result<Self> {
        let mut stream = EventStream::default();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let record: WireRecord =
                serde_json::from_str(&line).map_err(|e| GvfError::MalformedRecord {
                    line: i + 1,
                    message: e.to_string(),
                })?;
            match record {
                WireRecord::Prox(r) => stream.proximity.push(r),
                WireRecord::Phys(r) => stream.physio.push(r),
                WireRecord::Dwell(r) => stream.dwell.push(r),
                WireRecord::Link(r) => stream.links.push(r),
            }
        }
        stream.validate()?;
        Ok(stream)
    }

    /// Writes line-delimited JSON, one record per line, grouped by class.
    pub fn to_jsonl<W: Write>(&self, mut writer: W) -> Result<()> {
        for r in &self.proximity {
            serde_json::to_writer(&mut writer, &WireRecord::Prox(r.clone()))?;
            writer.write_all(b"\n")?;
        }
        for r in &self.physio {
            serde_json::to_writer(&mut writer, &WireRecord::Phys(r.clone()))?;
            writer.write_all(b"\n")?;
        }
        for r in &self.dwell {
            serde_json::to_writer(&mut writer, &WireRecord::Dwell(r.clone()))?;
            writer.write_all(b"\n")?;
        }
        for r in &self.links {
            serde_json::to_writer(&mut writer, &WireRecord::Link(r.clone()))?;
            writer.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_jsonl_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.to_jsonl(&mut buf)?;
        Ok(String::from_utf8(buf).expect("JSON is UTF-8"))
    }
}
