//! Transcript capture and the locality audit.
//!
//! A transcript line is `<timestamp> <from>-><to> <message json>`. The audit
//! scans a full run's captured messages and asserts that each station's
//! inbound traffic mentions at most one setting value — the only message
//! field the schema provides for a setting is CONFIG's `setting_angle_rad`,
//! and each station must see exactly its own.

use std::collections::{BTreeMap, BTreeSet};

use crate::wire::{decode, encode, Message, WireError};

/// Renders one transcript line (without the trailing newline).
pub fn format_entry(timestamp_micros: u128, from: &str, to: &str, msg: &Message) -> String {
    format!("{timestamp_micros} {from}->{to} {}", encode(msg).trim_end())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedEntry {
    pub timestamp_micros: u128,
    pub from: String,
    pub to: String,
    pub message: Message,
}

pub fn parse_entry(line: &str) -> Result<ParsedEntry, WireError> {
    let mut parts = line.splitn(3, ' ');
    let (Some(ts), Some(dir), Some(json)) = (parts.next(), parts.next(), parts.next()) else {
        return Err(WireError::Malformed(format!(
            "transcript line needs `<ts> <from>-><to> <json>`: {line}"
        )));
    };
    let timestamp_micros: u128 = ts
        .parse()
        .map_err(|_| WireError::Malformed(format!("bad timestamp `{ts}`")))?;
    let Some((from, to)) = dir.split_once("->") else {
        return Err(WireError::Malformed(format!("bad direction `{dir}`")));
    };
    Ok(ParsedEntry {
        timestamp_micros,
        from: from.to_string(),
        to: to.to_string(),
        message: decode(json)?,
    })
}

/// What each station's inbound traffic revealed about settings.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalityReport {
    /// station name -> distinct setting values (by bit pattern) seen inbound
    settings: BTreeMap<String, BTreeSet<u64>>,
    pub messages_scanned: usize,
}

impl LocalityReport {
    /// No station saw more than one setting value.
    pub fn passes(&self) -> bool {
        self.settings.values().all(|s| s.len() <= 1)
    }

    pub fn settings_for(&self, station: &str) -> Vec<f64> {
        self.settings
            .get(station)
            .map(|s| s.iter().map(|bits| f64::from_bits(*bits)).collect())
            .unwrap_or_default()
    }

    pub fn stations(&self) -> impl Iterator<Item = &str> {
        self.settings.keys().map(String::as_str)
    }
}

/// Scans transcript lines (blank lines are skipped) and tallies every
/// setting value that reached each station.
pub fn audit_locality<I, S>(lines: I) -> Result<LocalityReport, WireError>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let mut settings: BTreeMap<String, BTreeSet<u64>> = BTreeMap::new();
    let mut messages_scanned = 0usize;
    for line in lines {
        let line = line.as_ref().trim();
        if line.is_empty() {
            continue;
        }
        let entry = parse_entry(line)?;
        messages_scanned += 1;
        if !entry.to.starts_with("station") {
            continue;
        }
        if let Message::Config { setting, .. } = entry.message {
            settings
                .entry(entry.to)
                .or_default()
                .insert(setting.angle_rad().to_bits());
        }
    }
    Ok(LocalityReport {
        settings,
        messages_scanned,
    })
}
