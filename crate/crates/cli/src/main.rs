//! `eprsim`: run the three-computer Bell experiment locally or across
//! processes, query the exact oracle, and check the value-attribution
//! constraint systems.

mod artifacts;
mod config;
mod local;
mod net;

use anyhow::Result;
use clap::{Parser, Subcommand};
use serde_json::json;

use eprsim_core::ghz::{
    cross_particle_system, full_attribution_system, solve, Assignment, ConstraintSystem, SignVar,
    Solution,
};
use eprsim_core::oracle::{exact_corr, exact_joint};
use eprsim_core::wire::{ExperimentTag, ProtocolError, WireError};
use eprsim_core::Direction;

use crate::artifacts::{
    build_report, trials_csv_path, verify_artifacts, write_report, write_trials_csv, VerifyError,
};
use crate::config::{BellArgs, ConfigError, Mode, RunConfig};
use crate::net::{role_collector, role_source, role_station, CollectorArgs, NetError, SourceArgs, StationArgs};

// Exit codes: 0 success, 1 other, then one code per failure class.
const EXIT_OTHER: i32 = 1;
const EXIT_CONFIG: i32 = 2;
const EXIT_PROTOCOL: i32 = 3;
const EXIT_VERIFY: i32 = 4;

#[derive(Parser)]
#[command(name = "eprsim", version, about = "Three-computer Bell experiment over the unit disk")]
struct Cli {
    #[command(subcommand)]
    command: CliCommand,
}

#[derive(Subcommand)]
enum CliCommand {
    /// Print the exact joint probabilities and correlation for two settings
    Oracle {
        /// setting of station 1, radians
        #[arg(long)]
        a: f64,
        /// setting of station 2, radians
        #[arg(long)]
        b: f64,
    },
    /// Run experiments I, II, III and write the report JSON and trial CSVs
    Bell(BellArgs),
    /// Solve the value-attribution constraint systems
    Ghz {
        /// cross, full or both
        #[arg(long, default_value = "both")]
        system: String,
        /// drop every constraint with this label first (repeatable)
        #[arg(long)]
        drop: Vec<String>,
    },
    /// Run one protocol role as a separate process
    #[command(subcommand)]
    RunRole(RoleCommand),
}

#[derive(Subcommand)]
enum RoleCommand {
    /// Emit the seeded point stream to both stations
    Source(SourceArgs),
    /// Answer points with the local response for one setting
    Station(StationArgs),
    /// Pair station answers by trial id and write the trial CSV
    Collector(CollectorArgs),
}

fn main() {
    let cli = Cli::parse();
    if let Err(err) = run(cli) {
        eprintln!("error: {err:#}");
        std::process::exit(exit_code(&err));
    }
}

fn exit_code(err: &anyhow::Error) -> i32 {
    if err.is::<ConfigError>() {
        EXIT_CONFIG
    } else if err.is::<ProtocolError>() || err.is::<WireError>() || err.is::<NetError>() {
        EXIT_PROTOCOL
    } else if err.is::<VerifyError>() {
        EXIT_VERIFY
    } else {
        EXIT_OTHER
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        CliCommand::Oracle { a, b } => cmd_oracle(a, b),
        CliCommand::Bell(args) => cmd_bell(args),
        CliCommand::Ghz { system, drop } => cmd_ghz(&system, &drop),
        CliCommand::RunRole(role) => match role {
            RoleCommand::Source(args) => role_source(&args),
            RoleCommand::Station(args) => role_station(&args),
            RoleCommand::Collector(args) => role_collector(&args),
        },
    }
}

fn parse_direction(name: &str, v: f64) -> Result<Direction> {
    Ok(Direction::from_radians(v).map_err(|e| ConfigError(format!("angle {name}: {e}")))?)
}

fn cmd_oracle(a: f64, b: f64) -> Result<()> {
    let da = parse_direction("a", a)?;
    let db = parse_direction("b", b)?;
    let joint = exact_joint(da, db);
    let out = json!({
        "a_rad": da.angle_rad(),
        "b_rad": db.angle_rad(),
        "angular_distance_rad": da.angular_distance(&db),
        "joint": {
            "p_pp": joint.p_pp,
            "p_pm": joint.p_pm,
            "p_mp": joint.p_mp,
            "p_mm": joint.p_mm,
        },
        "correlation": exact_corr(da, db),
    });
    println!("{}", serde_json::to_string_pretty(&out)?);
    Ok(())
}

fn cmd_bell(args: BellArgs) -> Result<()> {
    let cfg = RunConfig::resolve(&args)?;
    std::fs::create_dir_all(&cfg.csv_dir)?;
    if let Some(parent) = cfg.out.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }

    let runs = match cfg.mode {
        Mode::Local => {
            let runs = local::run_local(&cfg)?;
            for (idx, tag) in ExperimentTag::ALL.into_iter().enumerate() {
                write_trials_csv(&trials_csv_path(&cfg.csv_dir, tag), &runs.runs[idx])?;
            }
            runs
        }
        // net-mode collectors write the CSVs themselves
        Mode::Net => net::run_net(&cfg)?,
    };

    let report = build_report(&cfg, &runs)?;
    write_report(&cfg.out, &report)?;
    if cfg.verify {
        verify_artifacts(&cfg)?;
    }

    let summary = json!({
        "report": cfg.out.display().to_string(),
        "csv_dir": cfg.csv_dir.display().to_string(),
        "exact_violation": report.exact.violation,
        "empirical_violation": report.empirical.violation,
        "z_score": report.empirical.z_score,
    });
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(())
}

fn assignment_json(a: &Assignment) -> serde_json::Value {
    let mut map = serde_json::Map::new();
    for var in SignVar::ALL {
        map.insert(var.to_string(), json!(a.get(var).value()));
    }
    serde_json::Value::Object(map)
}

fn system_json(name: &str, system: &ConstraintSystem) -> serde_json::Value {
    let constraints: Vec<String> = system.constraints().iter().map(|c| c.to_string()).collect();
    match solve(system) {
        Solution::Satisfiable(witness) => json!({
            "name": name,
            "constraints": constraints,
            "satisfiable": true,
            "witness": assignment_json(&witness),
        }),
        Solution::Unsatisfiable(rows) => json!({
            "name": name,
            "constraints": constraints,
            "satisfiable": false,
            "refutation": rows.iter().map(|row| json!({
                "assignment": assignment_json(&row.assignment),
                "violated": row.violated_label,
            })).collect::<Vec<_>>(),
        }),
    }
}

fn cmd_ghz(system: &str, drops: &[String]) -> Result<()> {
    let selected: Vec<(&str, ConstraintSystem)> = match system {
        "cross" => vec![("cross", cross_particle_system())],
        "full" => vec![("full", full_attribution_system())],
        "both" => vec![
            ("cross", cross_particle_system()),
            ("full", full_attribution_system()),
        ],
        other => {
            return Err(ConfigError(format!(
                "system must be cross, full or both, got `{other}`"
            ))
            .into())
        }
    };
    let mut sections = Vec::new();
    for (name, mut sys) in selected {
        for label in drops {
            let remaining = sys
                .constraints()
                .iter()
                .filter(|c| c.label != *label)
                .count();
            if remaining == 0 {
                return Err(ConfigError(format!(
                    "dropping `{label}` would leave `{name}` empty"
                ))
                .into());
            }
            sys = sys.without_label(label);
        }
        sections.push(system_json(name, &sys));
    }
    println!(
        "{}",
        serde_json::to_string_pretty(&json!({ "systems": sections }))?
    );
    Ok(())
}
