//! Single-process pipeline: run the three experiments over seeded point
//! streams and collect the records.

use anyhow::Result;

use eprsim_core::experiment::TrialRecord;
use eprsim_core::run_experiment;
use eprsim_core::source::{stream, SourceConfig};
use eprsim_core::wire::ExperimentTag;
use eprsim_core::Direction;

use crate::config::RunConfig;

/// Records of experiments I, II, III plus the seeds that produced them.
#[derive(Debug)]
pub struct ExperimentRuns {
    pub runs: [Vec<TrialRecord>; 3],
    pub seeds: [u64; 3],
}

pub fn run_local(cfg: &RunConfig) -> Result<ExperimentRuns> {
    let seeds = cfg.experiment_seeds();
    let mut runs: [Vec<TrialRecord>; 3] = Default::default();
    for (idx, tag) in ExperimentTag::ALL.into_iter().enumerate() {
        let (s1, s2) = cfg.settings_for(tag);
        let setting1 = Direction::from_radians(s1)?;
        let setting2 = Direction::from_radians(s2)?;
        let source = SourceConfig::new(seeds[idx], cfg.n_trials)?;
        runs[idx] = run_experiment(stream(&source), setting1, setting2)?;
    }
    Ok(ExperimentRuns { runs, seeds })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{BellArgs, RunConfig};

    #[test]
    fn shared_stream_reuses_points() {
        let args = BellArgs {
            n: Some(50),
            share_stream: Some(true),
            ..Default::default()
        };
        let cfg = RunConfig::resolve(&args).unwrap();
        let runs = run_local(&cfg).unwrap();
        assert_eq!(runs.seeds, [1, 1, 1]);
        for k in 0..50 {
            assert_eq!(runs.runs[0][k].point, runs.runs[1][k].point);
            assert_eq!(runs.runs[0][k].point, runs.runs[2][k].point);
        }
    }

    #[test]
    fn split_streams_differ() {
        let args = BellArgs {
            n: Some(50),
            ..Default::default()
        };
        let cfg = RunConfig::resolve(&args).unwrap();
        let runs = run_local(&cfg).unwrap();
        assert_eq!(runs.seeds, [1, 2, 3]);
        assert_ne!(runs.runs[0][0].point, runs.runs[1][0].point);
    }
}
