//! Run configuration: defaults, the optional TOML config file, and the
//! flag-beats-file merge.

use std::path::PathBuf;

use clap::Args;
use serde::Deserialize;
use thiserror::Error;

use eprsim_core::source::DEFAULT_N_TRIALS;
use eprsim_core::wire::ExperimentTag;
use eprsim_core::Direction;

// Defaults reproduce the published three-experiment run.
pub const DEFAULT_A_RAD: f64 = 0.0;
pub const DEFAULT_B_RAD: f64 = 0.3141593;
pub const DEFAULT_C_RAD: f64 = 1.989675;
pub const DEFAULT_SEED: u64 = 1;
pub const DEFAULT_HOST: &str = "127.0.0.1";
pub const DEFAULT_PORT_BASE: u16 = 7800;

#[derive(Debug, Error)]
#[error("configuration error: {0}")]
pub struct ConfigError(pub String);

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Mode {
    Local,
    Net,
}

#[derive(Args, Debug, Default)]
pub struct BellArgs {
    /// First setting angle in radians
    #[arg(long)]
    pub a: Option<f64>,
    /// Second setting angle in radians
    #[arg(long)]
    pub b: Option<f64>,
    /// Third setting angle in radians
    #[arg(long)]
    pub c: Option<f64>,
    /// Trials per experiment
    #[arg(long)]
    pub n: Option<u64>,
    /// Base seed; experiments use seed, seed+1, seed+2 unless the stream is shared
    #[arg(long)]
    pub seed: Option<u64>,
    /// local: single process; net: four processes over loopback
    #[arg(long, value_enum)]
    pub mode: Option<Mode>,
    /// Use one point stream for all three experiments
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub share_stream: Option<bool>,
    /// Report JSON path
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Directory for the per-experiment trial CSVs
    #[arg(long)]
    pub csv_dir: Option<PathBuf>,
    /// Bind/dial host for net mode
    #[arg(long)]
    pub host: Option<String>,
    /// First port of the per-experiment port blocks in net mode
    #[arg(long)]
    pub port_base: Option<u16>,
    /// Directory for wire transcripts (net mode)
    #[arg(long)]
    pub transcript: Option<PathBuf>,
    /// TOML config file mirroring these flags; flags win
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Re-read the written artifacts and assert the report is recomputable
    #[arg(long)]
    pub verify: bool,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    a: Option<f64>,
    b: Option<f64>,
    c: Option<f64>,
    n: Option<u64>,
    seed: Option<u64>,
    mode: Option<String>,
    share_stream: Option<bool>,
    out: Option<PathBuf>,
    csv_dir: Option<PathBuf>,
    host: Option<String>,
    port_base: Option<u16>,
    transcript: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub a_rad: f64,
    pub b_rad: f64,
    pub c_rad: f64,
    pub n_trials: u64,
    pub seed: u64,
    pub mode: Mode,
    pub share_stream: bool,
    pub out: PathBuf,
    pub csv_dir: PathBuf,
    pub host: String,
    pub port_base: u16,
    pub transcript: Option<PathBuf>,
    pub verify: bool,
}

impl RunConfig {
    pub fn resolve(args: &BellArgs) -> Result<RunConfig, ConfigError> {
        let file = match &args.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
                toml::from_str::<FileConfig>(&text)
                    .map_err(|e| ConfigError(format!("bad config file {}: {e}", path.display())))?
            }
            None => FileConfig::default(),
        };
        let mode = match (&args.mode, &file.mode) {
            (Some(m), _) => *m,
            (None, Some(s)) => match s.as_str() {
                "local" => Mode::Local,
                "net" => Mode::Net,
                other => {
                    return Err(ConfigError(format!(
                        "mode must be `local` or `net`, got `{other}`"
                    )))
                }
            },
            (None, None) => Mode::Local,
        };
        let cfg = RunConfig {
            a_rad: args.a.or(file.a).unwrap_or(DEFAULT_A_RAD),
            b_rad: args.b.or(file.b).unwrap_or(DEFAULT_B_RAD),
            c_rad: args.c.or(file.c).unwrap_or(DEFAULT_C_RAD),
            n_trials: args.n.or(file.n).unwrap_or(DEFAULT_N_TRIALS),
            seed: args.seed.or(file.seed).unwrap_or(DEFAULT_SEED),
            mode,
            share_stream: args.share_stream.or(file.share_stream).unwrap_or(false),
            out: args
                .out
                .clone()
                .or(file.out)
                .unwrap_or_else(|| PathBuf::from("bell_report.json")),
            csv_dir: args
                .csv_dir
                .clone()
                .or(file.csv_dir)
                .unwrap_or_else(|| PathBuf::from(".")),
            host: args
                .host
                .clone()
                .or(file.host)
                .unwrap_or_else(|| DEFAULT_HOST.to_string()),
            port_base: args.port_base.or(file.port_base).unwrap_or(DEFAULT_PORT_BASE),
            transcript: args.transcript.clone().or(file.transcript),
            verify: args.verify,
        };
        if cfg.n_trials == 0 {
            return Err(ConfigError("n must be at least 1".into()));
        }
        for (name, v) in [("a", cfg.a_rad), ("b", cfg.b_rad), ("c", cfg.c_rad)] {
            if !v.is_finite() {
                return Err(ConfigError(format!("angle {name} must be finite, got {v}")));
            }
        }
        Ok(cfg)
    }

    pub fn directions(&self) -> Result<(Direction, Direction, Direction), ConfigError> {
        let parse = |name: &str, v: f64| {
            Direction::from_radians(v).map_err(|e| ConfigError(format!("angle {name}: {e}")))
        };
        Ok((
            parse("a", self.a_rad)?,
            parse("b", self.b_rad)?,
            parse("c", self.c_rad)?,
        ))
    }

    /// Seeds for experiments I, II, III.
    pub fn experiment_seeds(&self) -> [u64; 3] {
        if self.share_stream {
            [self.seed; 3]
        } else {
            [
                self.seed,
                self.seed.wrapping_add(1),
                self.seed.wrapping_add(2),
            ]
        }
    }

    /// Station settings for one experiment: I = (a,b), II = (c,b), III = (a,c).
    pub fn settings_for(&self, tag: ExperimentTag) -> (f64, f64) {
        match tag {
            ExperimentTag::I => (self.a_rad, self.b_rad),
            ExperimentTag::II => (self.c_rad, self.b_rad),
            ExperimentTag::III => (self.a_rad, self.c_rad),
        }
    }

    pub fn uses_default_angles(&self) -> bool {
        self.a_rad == DEFAULT_A_RAD && self.b_rad == DEFAULT_B_RAD && self.c_rad == DEFAULT_C_RAD
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn defaults_reproduce_the_table() {
        let cfg = RunConfig::resolve(&BellArgs::default()).unwrap();
        assert_eq!(cfg.a_rad, 0.0);
        assert_eq!(cfg.b_rad, 0.3141593);
        assert_eq!(cfg.c_rad, 1.989675);
        assert_eq!(cfg.n_trials, 50_000);
        assert_eq!(cfg.seed, 1);
        assert_eq!(cfg.mode, Mode::Local);
        assert!(!cfg.share_stream);
        assert!(cfg.uses_default_angles());
        assert_eq!(cfg.experiment_seeds(), [1, 2, 3]);
    }

    #[test]
    fn flags_beat_file_beats_defaults() {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        writeln!(file, "b = 0.5\nc = 1.0\nseed = 9\nshare_stream = true").unwrap();
        let args = BellArgs {
            c: Some(2.0),
            config: Some(file.path().to_path_buf()),
            ..Default::default()
        };
        let cfg = RunConfig::resolve(&args).unwrap();
        assert_eq!(cfg.b_rad, 0.5); // file
        assert_eq!(cfg.c_rad, 2.0); // flag wins
        assert_eq!(cfg.seed, 9);
        assert!(cfg.share_stream);
        assert_eq!(cfg.experiment_seeds(), [9, 9, 9]);
        assert_eq!(cfg.a_rad, 0.0); // default
    }

    #[test]
    fn bad_file_keys_are_rejected() {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        writeln!(file, "angle_a = 0.5").unwrap();
        let args = BellArgs {
            config: Some(file.path().to_path_buf()),
            ..Default::default()
        };
        let err = RunConfig::resolve(&args).unwrap_err();
        assert!(err.to_string().contains("angle_a"));
    }

    #[test]
    fn invalid_values_are_rejected() {
        let args = BellArgs {
            n: Some(0),
            ..Default::default()
        };
        assert!(RunConfig::resolve(&args).is_err());

        let args = BellArgs {
            a: Some(f64::NAN),
            ..Default::default()
        };
        assert!(RunConfig::resolve(&args).is_err());
    }

    #[test]
    fn settings_follow_the_three_experiment_scheme() {
        let cfg = RunConfig::resolve(&BellArgs::default()).unwrap();
        assert_eq!(cfg.settings_for(ExperimentTag::I), (0.0, 0.3141593));
        assert_eq!(cfg.settings_for(ExperimentTag::II), (1.989675, 0.3141593));
        assert_eq!(cfg.settings_for(ExperimentTag::III), (0.0, 1.989675));
    }
}
