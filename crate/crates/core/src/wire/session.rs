//! Transport-agnostic state machines for the station and collector roles.
//! The runner feeds decoded messages in; the sessions answer with messages
//! to emit. All pairing state is confined here.

use std::collections::{BTreeMap, HashSet};

use thiserror::Error;

use crate::experiment::TrialRecord;
use crate::geometry::{Direction, Point};
use crate::response::{station_response, Sign, StationId};
use crate::source::{stream, SourceConfig};
use crate::wire::{Message, Role, RunManifest};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProtocolError {
    #[error("POINT for trial {trial_id} arrived before CONFIG")]
    PointBeforeConfig { trial_id: u64 },
    #[error("duplicate CONFIG")]
    DuplicateConfig,
    #[error("CONFIG addressed to station {got}, but this is station {expected}")]
    WrongStation { expected: u8, got: u8 },
    #[error("duplicate trial_id {trial_id}")]
    DuplicateTrial { trial_id: u64 },
    #[error("trial_id {trial_id} out of range for a run of {n_trials} trials")]
    TrialOutOfRange { trial_id: u64, n_trials: u64 },
    #[error("invalid point at trial {trial_id}: {reason}")]
    InvalidPoint { trial_id: u64, reason: String },
    #[error("run_id mismatch: expected `{expected}`, got `{got}`")]
    RunIdMismatch { expected: String, got: String },
    #[error("count mismatch: DONE reported {reported}, expected {expected}")]
    CountMismatch { reported: u64, expected: u64 },
    #[error("duplicate station_id {station_id} in handshake")]
    DuplicateStation { station_id: u8 },
    #[error("duplicate answer for trial {trial_id} from station {station_id}")]
    DuplicateAnswer { trial_id: u64, station_id: u8 },
    #[error("missing answer for trial {trial_id} from station {station_id}")]
    MissingAnswer { trial_id: u64, station_id: u8 },
    #[error("missing DONE from station {station_id}")]
    MissingDone { station_id: u8 },
    #[error("connection sent messages before a station HELLO")]
    UnclaimedConnection,
    #[error("unexpected message for {context}: {detail}")]
    UnexpectedMessage {
        context: &'static str,
        detail: String,
    },
}

/// The local configuration a station runs under: its own setting only.
#[derive(Debug, Clone, PartialEq)]
pub struct StationConfig {
    pub run_id: String,
    pub setting: Direction,
    pub n_trials: u64,
}

/// One station's protocol state: answers each POINT with its local response
/// and closes with a DONE carrying its answer count.
#[derive(Debug)]
pub struct StationSession {
    station_id: StationId,
    config: Option<StationConfig>,
    source_run_id: Option<String>,
    seen: HashSet<u64>,
    answered: u64,
    done_emitted: bool,
}

impl StationSession {
    pub fn new(station_id: StationId) -> Self {
        StationSession {
            station_id,
            config: None,
            source_run_id: None,
            seen: HashSet::new(),
            answered: 0,
            done_emitted: false,
        }
    }

    pub fn station_id(&self) -> StationId {
        self.station_id
    }

    pub fn config(&self) -> Option<&StationConfig> {
        self.config.as_ref()
    }

    pub fn is_done(&self) -> bool {
        self.done_emitted
    }

    fn check_run_ids(&self) -> Result<(), ProtocolError> {
        if let (Some(cfg), Some(src)) = (&self.config, &self.source_run_id) {
            if cfg.run_id != *src {
                return Err(ProtocolError::RunIdMismatch {
                    expected: cfg.run_id.clone(),
                    got: src.clone(),
                });
            }
        }
        Ok(())
    }

    /// Feeds one inbound message; returns the messages to emit toward the
    /// collector.
    pub fn on_message(&mut self, msg: Message) -> Result<Vec<Message>, ProtocolError> {
        match msg {
            Message::Config {
                run_id,
                station_id,
                setting,
                n_trials,
            } => {
                if station_id != self.station_id {
                    return Err(ProtocolError::WrongStation {
                        expected: self.station_id.id(),
                        got: station_id.id(),
                    });
                }
                if self.config.is_some() {
                    return Err(ProtocolError::DuplicateConfig);
                }
                self.config = Some(StationConfig {
                    run_id,
                    setting,
                    n_trials,
                });
                self.check_run_ids()?;
                Ok(Vec::new())
            }
            Message::Hello {
                role: Role::Source,
                run_id,
                ..
            } => {
                self.source_run_id = Some(run_id);
                self.check_run_ids()?;
                Ok(Vec::new())
            }
            Message::Point { trial_id, x, y } => {
                let Some(cfg) = self.config.as_ref() else {
                    return Err(ProtocolError::PointBeforeConfig { trial_id });
                };
                if trial_id >= cfg.n_trials {
                    return Err(ProtocolError::TrialOutOfRange {
                        trial_id,
                        n_trials: cfg.n_trials,
                    });
                }
                if !self.seen.insert(trial_id) {
                    return Err(ProtocolError::DuplicateTrial { trial_id });
                }
                let point = Point::new(x, y).map_err(|e| ProtocolError::InvalidPoint {
                    trial_id,
                    reason: e.to_string(),
                })?;
                let value = station_response(self.station_id, cfg.setting, point);
                self.answered += 1;
                Ok(vec![Message::Answer {
                    trial_id,
                    station_id: self.station_id,
                    value,
                }])
            }
            Message::Done { run_id, count } => {
                let Some(cfg) = self.config.as_ref() else {
                    return Err(ProtocolError::UnexpectedMessage {
                        context: "station",
                        detail: "DONE before CONFIG".into(),
                    });
                };
                if self.done_emitted {
                    // a second DONE is a no-op
                    return Ok(Vec::new());
                }
                if run_id != cfg.run_id {
                    return Err(ProtocolError::RunIdMismatch {
                        expected: cfg.run_id.clone(),
                        got: run_id,
                    });
                }
                if count != self.answered {
                    return Err(ProtocolError::CountMismatch {
                        reported: count,
                        expected: self.answered,
                    });
                }
                if count != cfg.n_trials {
                    return Err(ProtocolError::CountMismatch {
                        reported: count,
                        expected: cfg.n_trials,
                    });
                }
                self.done_emitted = true;
                Ok(vec![Message::Done {
                    run_id: cfg.run_id.clone(),
                    count: self.answered,
                }])
            }
            other => Err(ProtocolError::UnexpectedMessage {
                context: "station",
                detail: format!("{other:?}"),
            }),
        }
    }
}

/// The collector's protocol state: pairs answers from the two stations by
/// trial id. Points are regenerated from the manifest seed, so the paired
/// records are bit-identical to an in-process run.
#[derive(Debug)]
pub struct CollectorSession {
    manifest: RunManifest,
    conn_claims: BTreeMap<usize, StationId>,
    claimed: [bool; 2],
    answers: [BTreeMap<u64, Sign>; 2],
    done: [bool; 2],
}

fn idx(station: StationId) -> usize {
    (station.id() - 1) as usize
}

impl CollectorSession {
    pub fn new(manifest: RunManifest) -> Self {
        CollectorSession {
            manifest,
            conn_claims: BTreeMap::new(),
            claimed: [false; 2],
            answers: [BTreeMap::new(), BTreeMap::new()],
            done: [false; 2],
        }
    }

    pub fn manifest(&self) -> &RunManifest {
        &self.manifest
    }

    /// Both stations have closed their answer streams.
    pub fn is_complete(&self) -> bool {
        self.done == [true, true]
    }

    /// Feeds one message from the inbound connection `conn_id`. Answers may
    /// interleave arbitrarily across connections.
    pub fn on_message(&mut self, conn_id: usize, msg: Message) -> Result<(), ProtocolError> {
        match msg {
            Message::Hello {
                role: Role::Station,
                station_id: Some(station_id),
                run_id,
            } => {
                if run_id != self.manifest.run_id {
                    return Err(ProtocolError::RunIdMismatch {
                        expected: self.manifest.run_id.clone(),
                        got: run_id,
                    });
                }
                if self.claimed[idx(station_id)] {
                    return Err(ProtocolError::DuplicateStation {
                        station_id: station_id.id(),
                    });
                }
                if self.conn_claims.contains_key(&conn_id) {
                    return Err(ProtocolError::UnexpectedMessage {
                        context: "collector",
                        detail: "second HELLO on one connection".into(),
                    });
                }
                self.claimed[idx(station_id)] = true;
                self.conn_claims.insert(conn_id, station_id);
                Ok(())
            }
            Message::Hello { .. } => Err(ProtocolError::UnexpectedMessage {
                context: "collector",
                detail: "HELLO must come from a station and carry station_id".into(),
            }),
            Message::Answer {
                trial_id,
                station_id,
                value,
            } => {
                let claimed = self
                    .conn_claims
                    .get(&conn_id)
                    .copied()
                    .ok_or(ProtocolError::UnclaimedConnection)?;
                if claimed != station_id {
                    return Err(ProtocolError::UnexpectedMessage {
                        context: "collector",
                        detail: format!(
                            "connection of station {} sent an answer claiming station {}",
                            claimed.id(),
                            station_id.id()
                        ),
                    });
                }
                if trial_id >= self.manifest.n_trials {
                    return Err(ProtocolError::TrialOutOfRange {
                        trial_id,
                        n_trials: self.manifest.n_trials,
                    });
                }
                if self.answers[idx(station_id)].insert(trial_id, value).is_some() {
                    return Err(ProtocolError::DuplicateAnswer {
                        trial_id,
                        station_id: station_id.id(),
                    });
                }
                Ok(())
            }
            Message::Done { run_id, count } => {
                let claimed = self
                    .conn_claims
                    .get(&conn_id)
                    .copied()
                    .ok_or(ProtocolError::UnclaimedConnection)?;
                if run_id != self.manifest.run_id {
                    return Err(ProtocolError::RunIdMismatch {
                        expected: self.manifest.run_id.clone(),
                        got: run_id,
                    });
                }
                if self.done[idx(claimed)] {
                    // a second DONE is a no-op
                    return Ok(());
                }
                if count != self.manifest.n_trials {
                    return Err(ProtocolError::CountMismatch {
                        reported: count,
                        expected: self.manifest.n_trials,
                    });
                }
                self.done[idx(claimed)] = true;
                Ok(())
            }
            other => Err(ProtocolError::UnexpectedMessage {
                context: "collector",
                detail: format!("{other:?}"),
            }),
        }
    }

    /// Pairs the answers into records sorted by trial id. Errors on a
    /// missing half or a missing DONE.
    pub fn finish(self) -> Result<Vec<TrialRecord>, ProtocolError> {
        for station in [StationId::Station1, StationId::Station2] {
            if !self.done[idx(station)] {
                return Err(ProtocolError::MissingDone {
                    station_id: station.id(),
                });
            }
        }
        let cfg = SourceConfig::new(self.manifest.seed, self.manifest.n_trials)
            .expect("manifest n_trials is validated nonzero");
        let mut records = Vec::with_capacity(self.manifest.n_trials as usize);
        for trial in stream(&cfg) {
            let answer1 = *self.answers[0].get(&trial.trial_id).ok_or(
                ProtocolError::MissingAnswer {
                    trial_id: trial.trial_id,
                    station_id: 1,
                },
            )?;
            let answer2 = *self.answers[1].get(&trial.trial_id).ok_or(
                ProtocolError::MissingAnswer {
                    trial_id: trial.trial_id,
                    station_id: 2,
                },
            )?;
            records.push(TrialRecord {
                trial_id: trial.trial_id,
                point: trial.point,
                setting1: self.manifest.setting1,
                setting2: self.manifest.setting2,
                answer1,
                answer2,
            });
        }
        Ok(records)
    }
}
