//! A three-computer Bell experiment over the unit disk.
//!
//! A source emits pseudo-random points of the closed unit disk; two stations
//! answer ±1 to locally chosen directions by reading off the semidisk sign of
//! the rotated point; a collector pairs the answers and estimates
//! correlations. The empirical correlations violate the three-setting Bell
//! inequality |E(a,b) − E(c,b)| ≤ 1 + E(a,c) even though every answer is a
//! pre-determined function of the local setting and the shared point.
//!
//! The crate also ships the exact correlation oracle (arc overlap on the
//! circle), a brute-force grid integrator guarding it, the pointwise
//! inequality diagnostics with the measurement-flip substitution, an
//! exhaustive satisfiability checker for simultaneous ±1 value attributions,
//! and a line-delimited wire protocol whose schema enforces locality when the
//! three roles run as separate processes.

pub mod experiment;
pub mod geometry;
pub mod ghz;
pub mod oracle;
pub mod response;
pub mod source;
#[cfg(test)]
pub(crate) mod testrng;
pub mod wire;

pub use experiment::{
    bell_report_empirical, bell_report_exact, chameleon_substitution_audit, empirical_corr,
    pointwise_bell_identity, run_experiment, singlet_audit, BellReport, CorrelationEstimate,
    TrialRecord,
};
pub use geometry::{rotate_cw, Direction, GeometryError, Point};
pub use ghz::{cross_particle_system, full_attribution_system, solve, ConstraintSystem, Solution};
pub use oracle::{exact_corr, exact_joint, grid_joint, JointStats};
pub use response::{chameleon_flip, hidden_s, station_response, Sign, StationId};
pub use source::{sample_disk, stream, SourceConfig, TrialPoint};
