//! Net mode: one source, two stations and a collector run as separate
//! processes and talk the line protocol over TCP. The orchestrator spawns
//! the four roles per experiment, delivers each station its CONFIG, and
//! assembles the report from the collector's CSVs.
//!
//! Artifacts are byte-identical to local mode: stations compute the same
//! pure responses and the collector regenerates the point stream from the
//! manifest seed.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::net::{TcpListener, TcpStream};
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Stdio};
use std::sync::mpsc;
use std::thread;
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use anyhow::{bail, Context, Result};
use clap::Args;
use thiserror::Error;

use eprsim_core::experiment::TrialRecord;
use eprsim_core::response::StationId;
use eprsim_core::source::{stream, SourceConfig};
use eprsim_core::wire::{
    decode, encode, format_entry, CollectorSession, ExperimentTag, Message, ProtocolError, Role,
    RunManifest, StationSession,
};
use eprsim_core::Direction;

use crate::artifacts::{fmt_real, read_trials_csv, trials_csv_path};
use crate::config::{ConfigError, RunConfig};
use crate::local::ExperimentRuns;

const IO_TIMEOUT: Duration = Duration::from_secs(60);
const CONNECT_DEADLINE: Duration = Duration::from_secs(15);

#[derive(Debug, Error)]
#[error("{role}: {detail}")]
pub struct NetError {
    pub role: &'static str,
    pub detail: String,
}

fn net_err(role: &'static str, detail: impl Into<String>) -> anyhow::Error {
    NetError {
        role,
        detail: detail.into(),
    }
    .into()
}

#[derive(Args, Debug)]
pub struct SourceArgs {
    #[arg(long)]
    pub run_id: String,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub n: u64,
    /// host:port of station 1
    #[arg(long)]
    pub station1: String,
    /// host:port of station 2
    #[arg(long)]
    pub station2: String,
    #[arg(long)]
    pub transcript: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct StationArgs {
    #[arg(long)]
    pub run_id: String,
    #[arg(long)]
    pub station_id: u8,
    /// host:port to listen on
    #[arg(long)]
    pub listen: String,
    /// host:port of the collector
    #[arg(long)]
    pub collector: String,
    #[arg(long)]
    pub transcript: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct CollectorArgs {
    #[arg(long)]
    pub run_id: String,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub n: u64,
    #[arg(long)]
    pub setting1: f64,
    #[arg(long)]
    pub setting2: f64,
    /// experiment tag: I, II or III
    #[arg(long)]
    pub tag: String,
    /// host:port to listen on
    #[arg(long)]
    pub listen: String,
    /// where to write the paired trial CSV
    #[arg(long)]
    pub csv_out: PathBuf,
    #[arg(long)]
    pub transcript: Option<PathBuf>,
}

fn now_micros() -> u128 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .unwrap_or_default()
        .as_micros()
}

/// Appends captured messages to `<dir>/<run_id>.<role>.log`, one per line,
/// prefixed with direction and timestamp. No-op when capture is off.
struct Transcript {
    out: Option<BufWriter<File>>,
}

impl Transcript {
    fn open(dir: Option<&Path>, run_id: &str, role: &str) -> Result<Transcript> {
        let out = match dir {
            None => None,
            Some(dir) => {
                std::fs::create_dir_all(dir)
                    .with_context(|| format!("cannot create transcript dir {}", dir.display()))?;
                let path = dir.join(format!("{run_id}.{role}.log"));
                Some(BufWriter::new(File::create(&path).with_context(|| {
                    format!("cannot create transcript {}", path.display())
                })?))
            }
        };
        Ok(Transcript { out })
    }

    fn log(&mut self, from: &str, to: &str, msg: &Message) {
        if let Some(w) = &mut self.out {
            let _ = writeln!(w, "{}", format_entry(now_micros(), from, to, msg));
        }
    }

    fn finish(mut self) -> Result<()> {
        if let Some(w) = &mut self.out {
            w.flush()?;
        }
        Ok(())
    }
}

fn connect_retry(addr: &str, role: &'static str, peer: &str) -> Result<TcpStream> {
    let deadline = Instant::now() + CONNECT_DEADLINE;
    loop {
        match TcpStream::connect(addr) {
            Ok(s) => {
                s.set_read_timeout(Some(IO_TIMEOUT))?;
                return Ok(s);
            }
            Err(e) => {
                if Instant::now() >= deadline {
                    return Err(net_err(role, format!("cannot connect to {peer} at {addr}: {e}")));
                }
                thread::sleep(Duration::from_millis(25));
            }
        }
    }
}

fn send_line(w: &mut impl Write, msg: &Message) -> std::io::Result<()> {
    w.write_all(encode(msg).as_bytes())
}

/// Emits the seeded point stream to both stations, one POINT at a time, and
/// closes each stream with DONE.
pub fn role_source(args: &SourceArgs) -> Result<()> {
    let cfg = SourceConfig::new(args.seed, args.n).map_err(|e| ConfigError(e.to_string()))?;
    let mut transcript = Transcript::open(args.transcript.as_deref(), &args.run_id, "source")?;

    let mut writers = Vec::new();
    for (id, addr) in [(1u8, &args.station1), (2u8, &args.station2)] {
        let stream = connect_retry(addr, "source", &format!("station{id}"))?;
        writers.push((format!("station{id}"), BufWriter::new(stream)));
    }

    let hello = Message::Hello {
        role: Role::Source,
        station_id: None,
        run_id: args.run_id.clone(),
    };
    for (name, w) in &mut writers {
        send_line(w, &hello)?;
        transcript.log("source", name, &hello);
    }
    for trial in stream(&cfg) {
        let msg = Message::Point {
            trial_id: trial.trial_id,
            x: trial.point.x(),
            y: trial.point.y(),
        };
        for (name, w) in &mut writers {
            send_line(w, &msg)?;
            transcript.log("source", name, &msg);
        }
    }
    let done = Message::Done {
        run_id: args.run_id.clone(),
        count: args.n,
    };
    for (name, w) in &mut writers {
        send_line(w, &done)?;
        transcript.log("source", name, &done);
        w.flush()?;
    }
    transcript.finish()
}

/// Waits for its CONFIG and the source stream, answers every POINT toward
/// the collector, and forwards its DONE.
pub fn role_station(args: &StationArgs) -> Result<()> {
    let station_id = StationId::from_id(args.station_id)
        .ok_or_else(|| ConfigError(format!("station-id must be 1 or 2, got {}", args.station_id)))?;
    let me = format!("station{}", station_id.id());
    let mut transcript = Transcript::open(args.transcript.as_deref(), &args.run_id, &me)?;
    let listener = TcpListener::bind(&args.listen)
        .map_err(|e| net_err("station", format!("cannot bind {}: {e}", args.listen)))?;

    let mut session = StationSession::new(station_id);
    let mut source_reader: Option<BufReader<TcpStream>> = None;

    // Two inbound connections in either order: the orchestrator's CONFIG and
    // the source stream. The source connection is held unread until the
    // CONFIG has arrived, so points can never outrun the configuration.
    while session.config().is_none() || source_reader.is_none() {
        let (conn, _) = listener
            .accept()
            .map_err(|e| net_err("station", format!("accept failed: {e}")))?;
        conn.set_read_timeout(Some(IO_TIMEOUT))?;
        let mut reader = BufReader::new(conn);
        let mut line = String::new();
        if reader
            .read_line(&mut line)
            .map_err(|e| net_err("station", format!("handshake read failed: {e}")))?
            == 0
        {
            bail!(net_err("station", "peer closed during handshake"));
        }
        let msg = decode(&line)?;
        match &msg {
            Message::Config { .. } => {
                transcript.log("orchestrator", &me, &msg);
                session.on_message(msg)?;
            }
            Message::Hello {
                role: Role::Source, ..
            } => {
                if source_reader.is_some() {
                    bail!(net_err("station", "second source connection"));
                }
                transcript.log("source", &me, &msg);
                session.on_message(msg)?;
                source_reader = Some(reader);
            }
            _ => {
                transcript.log("peer", &me, &msg);
                // surfaces the protocol violation (e.g. POINT before CONFIG)
                session.on_message(msg)?;
                bail!(net_err("station", "unexpected handshake message"));
            }
        }
    }

    let run_id = session.config().expect("configured above").run_id.clone();
    if run_id != args.run_id {
        return Err(ProtocolError::RunIdMismatch {
            expected: args.run_id.clone(),
            got: run_id,
        }
        .into());
    }

    let collector = connect_retry(&args.collector, "station", "collector")?;
    let mut out = BufWriter::new(collector);
    let hello = Message::Hello {
        role: Role::Station,
        station_id: Some(station_id),
        run_id: run_id.clone(),
    };
    send_line(&mut out, &hello)?;
    transcript.log(&me, "collector", &hello);

    let mut reader = source_reader.expect("present above");
    let mut line = String::new();
    while !session.is_done() {
        line.clear();
        if reader
            .read_line(&mut line)
            .map_err(|e| net_err("station", format!("source read failed: {e}")))?
            == 0
        {
            bail!(net_err("station", "source closed before DONE"));
        }
        let msg = decode(&line)?;
        transcript.log("source", &me, &msg);
        for reply in session.on_message(msg)? {
            send_line(&mut out, &reply)?;
            transcript.log(&me, "collector", &reply);
        }
    }
    out.flush()?;
    transcript.finish()
}

enum ConnEvent {
    Line(usize, String),
    Eof(usize),
    Failed(usize, String),
}

/// Accepts the two station connections, pairs their answers by trial id and
/// writes the trial CSV.
pub fn role_collector(args: &CollectorArgs) -> Result<()> {
    let tag: ExperimentTag = args.tag.parse().map_err(ConfigError)?;
    let manifest = RunManifest {
        run_id: args.run_id.clone(),
        seed: args.seed,
        n_trials: args.n,
        setting1: Direction::from_radians(args.setting1)
            .map_err(|e| ConfigError(format!("setting1: {e}")))?,
        setting2: Direction::from_radians(args.setting2)
            .map_err(|e| ConfigError(format!("setting2: {e}")))?,
        experiment_tag: tag,
    };
    if args.n == 0 {
        return Err(ConfigError("n must be at least 1".into()).into());
    }
    let mut transcript = Transcript::open(args.transcript.as_deref(), &args.run_id, "collector")?;
    let listener = TcpListener::bind(&args.listen)
        .map_err(|e| net_err("collector", format!("cannot bind {}: {e}", args.listen)))?;

    // one reader thread per inbound stream, one event loop doing the pairing
    let (tx, rx) = mpsc::channel::<ConnEvent>();
    let mut readers = Vec::new();
    for conn_id in 0..2usize {
        let (conn, _) = listener
            .accept()
            .map_err(|e| net_err("collector", format!("accept failed: {e}")))?;
        conn.set_read_timeout(Some(IO_TIMEOUT))?;
        let tx = tx.clone();
        readers.push(thread::spawn(move || {
            let mut reader = BufReader::new(conn);
            loop {
                let mut line = String::new();
                match reader.read_line(&mut line) {
                    Ok(0) => {
                        let _ = tx.send(ConnEvent::Eof(conn_id));
                        break;
                    }
                    Ok(_) => {
                        if tx.send(ConnEvent::Line(conn_id, line)).is_err() {
                            break;
                        }
                    }
                    Err(e) => {
                        let _ = tx.send(ConnEvent::Failed(conn_id, e.to_string()));
                        break;
                    }
                }
            }
        }));
    }
    drop(tx);

    let mut session = CollectorSession::new(manifest);
    let mut peer_names = vec!["peer0".to_string(), "peer1".to_string()];
    let mut conn_done = [false; 2];
    while !session.is_complete() {
        match rx.recv() {
            Err(_) => bail!(net_err("collector", "stations disconnected before DONE")),
            Ok(ConnEvent::Eof(conn_id)) => {
                // a station closing after its DONE is the normal shutdown
                if !conn_done[conn_id] {
                    bail!(net_err(
                        "collector",
                        format!("{} closed its stream before DONE", peer_names[conn_id])
                    ));
                }
            }
            Ok(ConnEvent::Failed(conn_id, e)) => {
                bail!(net_err(
                    "collector",
                    format!("read from {} failed: {e}", peer_names[conn_id])
                ));
            }
            Ok(ConnEvent::Line(conn_id, line)) => {
                let msg = decode(&line)?;
                if let Message::Hello {
                    station_id: Some(sid),
                    ..
                } = &msg
                {
                    peer_names[conn_id] = format!("station{}", sid.id());
                }
                let is_done = matches!(msg, Message::Done { .. });
                transcript.log(&peer_names[conn_id], "collector", &msg);
                session.on_message(conn_id, msg)?;
                if is_done {
                    conn_done[conn_id] = true;
                }
            }
        }
    }

    let records = session.finish()?;
    crate::artifacts::write_trials_csv(&args.csv_out, &records)?;
    transcript.finish()?;
    for handle in readers {
        let _ = handle.join();
    }
    Ok(())
}

struct RoleChildren(Vec<(&'static str, Child)>);

impl RoleChildren {
    fn wait_all(mut self) -> Result<()> {
        let mut failure: Option<anyhow::Error> = None;
        for (name, child) in &mut self.0 {
            if failure.is_some() {
                let _ = child.kill();
                let _ = child.wait();
                continue;
            }
            match child.wait() {
                Ok(status) if status.success() => {}
                Ok(status) => failure = Some(net_err(name, format!("exited with {status}"))),
                Err(e) => failure = Some(net_err(name, format!("wait failed: {e}"))),
            }
        }
        match failure {
            Some(e) => Err(e),
            None => Ok(()),
        }
    }
}

impl Drop for RoleChildren {
    fn drop(&mut self) {
        for (_, child) in &mut self.0 {
            let _ = child.kill();
            let _ = child.wait();
        }
    }
}

/// Runs all three experiments across processes and reads back the paired
/// records from the collectors' CSVs.
pub fn run_net(cfg: &RunConfig) -> Result<ExperimentRuns> {
    let exe = std::env::current_exe().context("cannot locate own binary")?;
    let seeds = cfg.experiment_seeds();
    std::fs::create_dir_all(&cfg.csv_dir)?;
    let mut runs: [Vec<TrialRecord>; 3] = Default::default();

    for (idx, tag) in ExperimentTag::ALL.into_iter().enumerate() {
        let seed = seeds[idx];
        let run_id = format!("{tag}-{seed}");
        let (s1, s2) = cfg.settings_for(tag);
        let base = cfg
            .port_base
            .checked_add(idx as u16 * 3)
            .ok_or_else(|| ConfigError("port-base too large".into()))?;
        let collector_addr = format!("{}:{}", cfg.host, base);
        let station_addrs = [
            format!("{}:{}", cfg.host, base + 1),
            format!("{}:{}", cfg.host, base + 2),
        ];
        let csv_path = trials_csv_path(&cfg.csv_dir, tag);

        let transcript_args = |args: &mut Vec<String>| {
            if let Some(dir) = &cfg.transcript {
                args.push("--transcript".into());
                args.push(dir.display().to_string());
            }
        };
        let spawn = |args: Vec<String>, role: &'static str| -> Result<Child> {
            Command::new(&exe)
                .args(&args)
                .stdin(Stdio::null())
                .spawn()
                .map_err(|e| net_err(role, format!("spawn failed: {e}")))
        };

        let mut collector_args: Vec<String> = vec![
            "run-role".into(),
            "collector".into(),
            "--run-id".into(),
            run_id.clone(),
            "--seed".into(),
            seed.to_string(),
            "--n".into(),
            cfg.n_trials.to_string(),
            "--setting1".into(),
            fmt_real(s1),
            "--setting2".into(),
            fmt_real(s2),
            "--tag".into(),
            tag.as_str().into(),
            "--listen".into(),
            collector_addr.clone(),
            "--csv-out".into(),
            csv_path.display().to_string(),
        ];
        transcript_args(&mut collector_args);
        let mut children = RoleChildren(vec![("collector", spawn(collector_args, "collector")?)]);

        for (station, addr) in [StationId::Station1, StationId::Station2]
            .into_iter()
            .zip(&station_addrs)
        {
            let mut args: Vec<String> = vec![
                "run-role".into(),
                "station".into(),
                "--run-id".into(),
                run_id.clone(),
                "--station-id".into(),
                station.id().to_string(),
                "--listen".into(),
                addr.clone(),
                "--collector".into(),
                collector_addr.clone(),
            ];
            transcript_args(&mut args);
            let name = match station {
                StationId::Station1 => "station1",
                StationId::Station2 => "station2",
            };
            children.0.push((name, spawn(args, name)?));
        }

        // deliver each station its own setting, nothing else
        let mut orch = Transcript::open(cfg.transcript.as_deref(), &run_id, "orchestrator")?;
        for (station, (addr, angle)) in [StationId::Station1, StationId::Station2]
            .into_iter()
            .zip(station_addrs.iter().zip([s1, s2]))
        {
            let peer = format!("station{}", station.id());
            let conn = connect_retry(addr, "orchestrator", &peer)?;
            let msg = Message::Config {
                run_id: run_id.clone(),
                station_id: station,
                setting: Direction::from_radians(angle)
                    .map_err(|e| ConfigError(format!("setting: {e}")))?,
                n_trials: cfg.n_trials,
            };
            let mut w = BufWriter::new(conn);
            send_line(&mut w, &msg)?;
            w.flush()?;
            orch.log("orchestrator", &peer, &msg);
        }
        orch.finish()?;

        let mut source_args: Vec<String> = vec![
            "run-role".into(),
            "source".into(),
            "--run-id".into(),
            run_id.clone(),
            "--seed".into(),
            seed.to_string(),
            "--n".into(),
            cfg.n_trials.to_string(),
            "--station1".into(),
            station_addrs[0].clone(),
            "--station2".into(),
            station_addrs[1].clone(),
        ];
        transcript_args(&mut source_args);
        children.0.push(("source", spawn(source_args, "source")?));

        children.wait_all()?;
        runs[idx] = read_trials_csv(&csv_path)?;
    }

    Ok(ExperimentRuns { runs, seeds })
}
