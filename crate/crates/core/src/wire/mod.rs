//! Message formats and role behaviors for running the source, the two
//! stations and a collector as separated processes.
//!
//! One structured-text object per line: UTF-8 JSON with a `type`
//! discriminator, newline-terminated, no embedded newlines. Decoding is
//! strict — unknown fields are rejected — which is what keeps the protocol
//! local: no message type deliverable to a station has any field capable of
//! carrying the other station's setting.

mod session;
mod transcript;

pub use session::{CollectorSession, ProtocolError, StationConfig, StationSession};
pub use transcript::{audit_locality, format_entry, parse_entry, LocalityReport, ParsedEntry};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::geometry::Direction;
use crate::response::{Sign, StationId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Source,
    Station,
    Collector,
}

impl std::fmt::Display for Role {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Role::Source => "source",
            Role::Station => "station",
            Role::Collector => "collector",
        };
        write!(f, "{s}")
    }
}

/// Which of the three table columns a run realizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ExperimentTag {
    I,
    II,
    III,
}

impl ExperimentTag {
    pub const ALL: [ExperimentTag; 3] = [ExperimentTag::I, ExperimentTag::II, ExperimentTag::III];

    pub fn as_str(&self) -> &'static str {
        match self {
            ExperimentTag::I => "I",
            ExperimentTag::II => "II",
            ExperimentTag::III => "III",
        }
    }
}

impl std::fmt::Display for ExperimentTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.as_str())
    }
}

impl std::str::FromStr for ExperimentTag {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "I" | "i" => Ok(ExperimentTag::I),
            "II" | "ii" => Ok(ExperimentTag::II),
            "III" | "iii" => Ok(ExperimentTag::III),
            other => Err(format!("unknown experiment tag `{other}` (expected I, II or III)")),
        }
    }
}

/// Everything a run is determined by: the collector holds one of these and
/// regenerates the point stream from the seed instead of receiving points on
/// the wire.
#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    pub run_id: String,
    pub seed: u64,
    pub n_trials: u64,
    pub setting1: Direction,
    pub setting2: Direction,
    pub experiment_tag: ExperimentTag,
}

impl RunManifest {
    pub fn setting_for(&self, station: StationId) -> Direction {
        match station {
            StationId::Station1 => self.setting1,
            StationId::Station2 => self.setting2,
        }
    }
}

/// A protocol message. CONFIG flows orchestrator→station, POINT
/// source→station, ANSWER station→collector; HELLO opens the dialed
/// connections and DONE closes a stream with its count.
#[derive(Debug, Clone, PartialEq)]
pub enum Message {
    Hello {
        role: Role,
        station_id: Option<StationId>,
        run_id: String,
    },
    Config {
        run_id: String,
        station_id: StationId,
        setting: Direction,
        n_trials: u64,
    },
    Point {
        trial_id: u64,
        x: f64,
        y: f64,
    },
    Answer {
        trial_id: u64,
        station_id: StationId,
        value: Sign,
    },
    Done {
        run_id: String,
        count: u64,
    },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WireError {
    #[error("malformed message line: {0}")]
    Malformed(String),
    #[error("message must be a JSON object")]
    NotAnObject,
    #[error("message has no `type` discriminator")]
    MissingType,
    #[error("unknown message type `{0}`")]
    UnknownType(String),
    #[error("{0}")]
    Schema(String),
    #[error("field `{field}`: {message}")]
    InvalidField {
        field: &'static str,
        message: String,
    },
}

/// Serializes to one newline-terminated line.
pub fn encode(msg: &Message) -> String {
    let value = match msg {
        Message::Hello {
            role,
            station_id,
            run_id,
        } => {
            let mut v = json!({ "type": "HELLO", "role": role, "run_id": run_id });
            if let Some(sid) = station_id {
                v["station_id"] = json!(sid.id());
            }
            v
        }
        Message::Config {
            run_id,
            station_id,
            setting,
            n_trials,
        } => json!({
            "type": "CONFIG",
            "run_id": run_id,
            "station_id": station_id.id(),
            "setting_angle_rad": setting.angle_rad(),
            "n_trials": n_trials,
        }),
        Message::Point { trial_id, x, y } => json!({
            "type": "POINT",
            "trial_id": trial_id,
            "x": x,
            "y": y,
        }),
        Message::Answer {
            trial_id,
            station_id,
            value,
        } => json!({
            "type": "ANSWER",
            "trial_id": trial_id,
            "station_id": station_id.id(),
            "value": value.value(),
        }),
        Message::Done { run_id, count } => json!({
            "type": "DONE",
            "run_id": run_id,
            "count": count,
        }),
    };
    let mut line = value.to_string();
    line.push('\n');
    line
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct HelloRaw {
    role: Role,
    #[serde(default)]
    station_id: Option<u8>,
    run_id: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigRaw {
    run_id: String,
    station_id: u8,
    setting_angle_rad: f64,
    n_trials: u64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PointRaw {
    trial_id: u64,
    x: f64,
    y: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct AnswerRaw {
    trial_id: u64,
    station_id: u8,
    value: i64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DoneRaw {
    run_id: String,
    count: u64,
}

fn from_fields<T: serde::de::DeserializeOwned>(
    fields: serde_json::Map<String, Value>,
) -> Result<T, WireError> {
    let value = Value::Object(fields);
    serde_path_to_error::deserialize(&value).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner().to_string();
        if path == "." {
            WireError::Schema(inner)
        } else {
            WireError::Schema(format!("field `{path}`: {inner}"))
        }
    })
}

fn station_from_u8(id: u8) -> Result<StationId, WireError> {
    StationId::from_id(id).ok_or(WireError::InvalidField {
        field: "station_id",
        message: format!("must be 1 or 2, got {id}"),
    })
}

/// Strict decode of one line: unknown types, unknown fields and
/// out-of-range values are rejected with the offending field named.
pub fn decode(line: &str) -> Result<Message, WireError> {
    let trimmed = line.trim_end_matches(['\n', '\r']);
    let value: Value =
        serde_json::from_str(trimmed).map_err(|e| WireError::Malformed(e.to_string()))?;
    let Value::Object(mut fields) = value else {
        return Err(WireError::NotAnObject);
    };
    let type_value = fields.remove("type").ok_or(WireError::MissingType)?;
    let Some(msg_type) = type_value.as_str().map(str::to_owned) else {
        return Err(WireError::InvalidField {
            field: "type",
            message: "must be a string".into(),
        });
    };
    match msg_type.as_str() {
        "HELLO" => {
            let raw: HelloRaw = from_fields(fields)?;
            let station_id = raw.station_id.map(station_from_u8).transpose()?;
            Ok(Message::Hello {
                role: raw.role,
                station_id,
                run_id: raw.run_id,
            })
        }
        "CONFIG" => {
            let raw: ConfigRaw = from_fields(fields)?;
            if raw.n_trials == 0 {
                return Err(WireError::InvalidField {
                    field: "n_trials",
                    message: "must be at least 1".into(),
                });
            }
            let setting =
                Direction::from_radians(raw.setting_angle_rad).map_err(|e| {
                    WireError::InvalidField {
                        field: "setting_angle_rad",
                        message: e.to_string(),
                    }
                })?;
            Ok(Message::Config {
                run_id: raw.run_id,
                station_id: station_from_u8(raw.station_id)?,
                setting,
                n_trials: raw.n_trials,
            })
        }
        "POINT" => {
            let raw: PointRaw = from_fields(fields)?;
            Ok(Message::Point {
                trial_id: raw.trial_id,
                x: raw.x,
                y: raw.y,
            })
        }
        "ANSWER" => {
            let raw: AnswerRaw = from_fields(fields)?;
            let value = Sign::from_value(raw.value).ok_or(WireError::InvalidField {
                field: "value",
                message: format!("must be -1 or 1, got {}", raw.value),
            })?;
            Ok(Message::Answer {
                trial_id: raw.trial_id,
                station_id: station_from_u8(raw.station_id)?,
                value,
            })
        }
        "DONE" => {
            let raw: DoneRaw = from_fields(fields)?;
            Ok(Message::Done {
                run_id: raw.run_id,
                count: raw.count,
            })
        }
        other => Err(WireError::UnknownType(other.to_string())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dir(a: f64) -> Direction {
        Direction::from_radians(a).unwrap()
    }

    #[test]
    fn round_trips() {
        let messages = [
            Message::Hello {
                role: Role::Source,
                station_id: None,
                run_id: "r1".into(),
            },
            Message::Hello {
                role: Role::Station,
                station_id: Some(StationId::Station2),
                run_id: "r1".into(),
            },
            Message::Config {
                run_id: "r1".into(),
                station_id: StationId::Station1,
                setting: dir(0.3141593),
                n_trials: 50_000,
            },
            Message::Point {
                trial_id: 3,
                x: 0.25,
                y: -0.5,
            },
            Message::Answer {
                trial_id: 7,
                station_id: StationId::Station2,
                value: Sign::Minus,
            },
            Message::Done {
                run_id: "r1".into(),
                count: 50_000,
            },
        ];
        for m in messages {
            let line = encode(&m);
            assert!(line.ends_with('\n'));
            assert_eq!(line.matches('\n').count(), 1);
            assert_eq!(decode(&line).unwrap(), m, "round trip of {m:?}");
        }
    }

    #[test]
    fn answer_carries_exactly_four_fields() {
        let line = encode(&Message::Answer {
            trial_id: 7,
            station_id: StationId::Station2,
            value: Sign::Minus,
        });
        let v: Value = serde_json::from_str(line.trim_end()).unwrap();
        let obj = v.as_object().unwrap();
        let mut keys: Vec<&str> = obj.keys().map(String::as_str).collect();
        keys.sort_unstable();
        assert_eq!(keys, ["station_id", "trial_id", "type", "value"]);
        assert_eq!(obj["value"], json!(-1));
    }

    #[test]
    fn extra_field_is_rejected_by_name() {
        let line = r#"{"type":"CONFIG","run_id":"r1","station_id":1,"setting_angle_rad":0.1,"n_trials":5,"other_setting":0.7}"#;
        let err = decode(line).unwrap_err();
        assert!(
            err.to_string().contains("other_setting"),
            "error must name the field: {err}"
        );
    }

    #[test]
    fn unknown_type_and_malformed_lines() {
        assert!(matches!(
            decode(r#"{"type":"NOPE"}"#),
            Err(WireError::UnknownType(t)) if t == "NOPE"
        ));
        assert!(matches!(decode("not json"), Err(WireError::Malformed(_))));
        assert!(matches!(decode(r#"[1,2]"#), Err(WireError::NotAnObject)));
        assert!(matches!(decode(r#"{"x":1}"#), Err(WireError::MissingType)));
        assert!(matches!(
            decode(r#"{"type":7}"#),
            Err(WireError::InvalidField { field: "type", .. })
        ));
    }

    #[test]
    fn out_of_range_values_are_rejected() {
        let err = decode(r#"{"type":"ANSWER","trial_id":1,"station_id":2,"value":2}"#).unwrap_err();
        assert!(err.to_string().contains("value"));

        let err = decode(r#"{"type":"ANSWER","trial_id":1,"station_id":3,"value":1}"#).unwrap_err();
        assert!(err.to_string().contains("station_id"));

        let err = decode(
            r#"{"type":"CONFIG","run_id":"r","station_id":1,"setting_angle_rad":0.1,"n_trials":0}"#,
        )
        .unwrap_err();
        assert!(err.to_string().contains("n_trials"));

        let err = decode(r#"{"type":"HELLO","role":"referee","run_id":"r"}"#).unwrap_err();
        assert!(err.to_string().contains("role"));
    }

    #[test]
    fn missing_field_is_an_error() {
        let err = decode(r#"{"type":"POINT","trial_id":1,"x":0.5}"#).unwrap_err();
        assert!(err.to_string().contains('y'), "{err}");
    }

    #[test]
    fn experiment_tag_round_trip() {
        for tag in ExperimentTag::ALL {
            assert_eq!(tag.as_str().parse::<ExperimentTag>().unwrap(), tag);
        }
        assert!("IV".parse::<ExperimentTag>().is_err());
    }
}
