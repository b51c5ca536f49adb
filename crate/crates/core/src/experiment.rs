//! The three-experiment scheme: trial records, empirical correlations, the
//! Bell report and the pointwise diagnostics.
//!
//! The three runs measure the setting pairs I = (a, b), II = (c, b),
//! III = (a, c). Accumulation uses exact integer tallies of ±1 products, so
//! estimates are independent of record order and of how a run was
//! transported.

use thiserror::Error;

use crate::geometry::{Direction, Point};
use crate::oracle;
use crate::response::{station_response, PreparedSetting, Sign, StationId};
use crate::source::{stream, SourceConfig, TrialPoint};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExperimentError {
    #[error("a run needs at least one trial")]
    EmptyRun,
    #[error("runs have mismatched trial counts: {0}, {1}, {2}")]
    TrialCountMismatch(usize, usize, usize),
    #[error("runs do not share one point stream (first difference at trial {trial_id})")]
    StreamMismatch { trial_id: u64 },
}

/// One completed trial: the shared point, both local settings and both
/// answers. Answers are immutable facts once produced; they can be
/// re-derived from (setting, point) for auditing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialRecord {
    pub trial_id: u64,
    pub point: Point,
    pub setting1: Direction,
    pub setting2: Direction,
    pub answer1: Sign,
    pub answer2: Sign,
}

impl TrialRecord {
    pub fn product(&self) -> i64 {
        (self.answer1.value() * self.answer2.value()) as i64
    }

    /// Both answers equal what the stations would compute today.
    pub fn rederives(&self) -> bool {
        self.answer1 == station_response(StationId::Station1, self.setting1, self.point)
            && self.answer2 == station_response(StationId::Station2, self.setting2, self.point)
    }
}

/// Empirical correlation of ±1 products with its standard error
/// sqrt((1 − value²)/n).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrelationEstimate {
    pub value: f64,
    pub n: u64,
    pub stderr: f64,
}

/// One correlation entry of a Bell report: closed-form or estimated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CorrelationValue {
    Exact(f64),
    Estimate(CorrelationEstimate),
}

impl CorrelationValue {
    pub fn value(&self) -> f64 {
        match self {
            CorrelationValue::Exact(v) => *v,
            CorrelationValue::Estimate(e) => e.value,
        }
    }

    pub fn stderr(&self) -> f64 {
        match self {
            CorrelationValue::Exact(_) => 0.0,
            CorrelationValue::Estimate(e) => e.stderr,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BellMode {
    Exact,
    Empirical,
}

/// The two sides of |E(a,b) − E(c,b)| ≤ 1 + E(a,c) and their difference.
/// `violation > 0` means the inequality fails.
#[derive(Debug, Clone, PartialEq)]
pub struct BellReport {
    pub mode: BellMode,
    pub e_ab: CorrelationValue,
    pub e_cb: CorrelationValue,
    pub e_ac: CorrelationValue,
    pub lhs: f64,
    pub rhs: f64,
    pub violation: f64,
    /// violation divided by the combined standard error; `None` in exact mode.
    pub z_score: Option<f64>,
}

fn assemble_report(
    mode: BellMode,
    e_ab: CorrelationValue,
    e_cb: CorrelationValue,
    e_ac: CorrelationValue,
) -> BellReport {
    let lhs = (e_ab.value() - e_cb.value()).abs();
    let rhs = 1.0 + e_ac.value();
    let violation = lhs - rhs;
    let z_score = match mode {
        BellMode::Exact => None,
        BellMode::Empirical => {
            let var = e_ab.stderr().powi(2) + e_cb.stderr().powi(2) + e_ac.stderr().powi(2);
            Some(violation / var.sqrt())
        }
    };
    BellReport {
        mode,
        e_ab,
        e_cb,
        e_ac,
        lhs,
        rhs,
        violation,
        z_score,
    }
}

/// Runs one experiment: both settings stay fixed for the whole run and every
/// answer is computed from the local setting and the shared point alone.
pub fn run_experiment(
    points: impl IntoIterator<Item = TrialPoint>,
    setting1: Direction,
    setting2: Direction,
) -> Result<Vec<TrialRecord>, ExperimentError> {
    let resp1 = PreparedSetting::new(setting1);
    let resp2 = PreparedSetting::new(setting2);
    let records: Vec<TrialRecord> = points
        .into_iter()
        .map(|t| TrialRecord {
            trial_id: t.trial_id,
            point: t.point,
            setting1,
            setting2,
            answer1: resp1.respond(t.point),
            answer2: resp2.respond(t.point),
        })
        .collect();
    if records.is_empty() {
        return Err(ExperimentError::EmptyRun);
    }
    Ok(records)
}

/// Mean of answer1·answer2 over a run, tallied in integers.
pub fn empirical_corr(records: &[TrialRecord]) -> Result<CorrelationEstimate, ExperimentError> {
    if records.is_empty() {
        return Err(ExperimentError::EmptyRun);
    }
    let sum: i64 = records.iter().map(TrialRecord::product).sum();
    let n = records.len() as u64;
    let value = sum as f64 / n as f64;
    let stderr = ((1.0 - value * value).max(0.0) / n as f64).sqrt();
    Ok(CorrelationEstimate { value, n, stderr })
}

/// Bell report from the closed-form correlations.
pub fn bell_report_exact(a: Direction, b: Direction, c: Direction) -> BellReport {
    assemble_report(
        BellMode::Exact,
        CorrelationValue::Exact(oracle::exact_corr(a, b)),
        CorrelationValue::Exact(oracle::exact_corr(c, b)),
        CorrelationValue::Exact(oracle::exact_corr(a, c)),
    )
}

/// Bell report from the three recorded runs I = (a,b), II = (c,b),
/// III = (a,c).
pub fn bell_report_empirical(
    run_i: &[TrialRecord],
    run_ii: &[TrialRecord],
    run_iii: &[TrialRecord],
) -> Result<BellReport, ExperimentError> {
    if run_i.len() != run_ii.len() || run_i.len() != run_iii.len() {
        return Err(ExperimentError::TrialCountMismatch(
            run_i.len(),
            run_ii.len(),
            run_iii.len(),
        ));
    }
    Ok(assemble_report(
        BellMode::Empirical,
        CorrelationValue::Estimate(empirical_corr(run_i)?),
        CorrelationValue::Estimate(empirical_corr(run_ii)?),
        CorrelationValue::Estimate(empirical_corr(run_iii)?),
    ))
}

/// Both sides of the pointwise inequality
/// |S⁽¹⁾ₐS⁽²⁾ᵦ − S⁽¹⁾꜀S⁽²⁾ᵦ| ≤ 1 − S⁽¹⁾ₐS⁽¹⁾꜀, evaluated from raw responses.
/// For ±1 values the two sides are equal, so `holds` is always true.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointwiseIdentity {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

pub fn pointwise_bell_identity(
    p: Point,
    a: Direction,
    b: Direction,
    c: Direction,
) -> PointwiseIdentity {
    let s1_a = station_response(StationId::Station1, a, p).value() as f64;
    let s1_c = station_response(StationId::Station1, c, p).value() as f64;
    let s2_b = station_response(StationId::Station2, b, p).value() as f64;
    let lhs = (s1_a * s2_b - s1_c * s2_b).abs();
    let rhs = 1.0 - s1_a * s1_c;
    PointwiseIdentity {
        lhs,
        rhs,
        holds: lhs <= rhs,
    }
}

fn shares_stream(
    run_i: &[TrialRecord],
    run_ii: &[TrialRecord],
    run_iii: &[TrialRecord],
) -> Result<(), ExperimentError> {
    if run_i.len() != run_ii.len() || run_i.len() != run_iii.len() {
        return Err(ExperimentError::TrialCountMismatch(
            run_i.len(),
            run_ii.len(),
            run_iii.len(),
        ));
    }
    for ((r1, r2), r3) in run_i.iter().zip(run_ii).zip(run_iii) {
        let same = r1.trial_id == r2.trial_id
            && r1.trial_id == r3.trial_id
            && r1.point == r2.point
            && r1.point == r3.point;
        if !same {
            return Err(ExperimentError::StreamMismatch {
                trial_id: r1.trial_id,
            });
        }
    }
    Ok(())
}

/// Fraction of trials on which the substituted pointwise bound
/// |S⁽¹⁾ₐS⁽²⁾ᵦ − S⁽¹⁾꜀S⁽²⁾ᵦ| ≤ 1 + S⁽¹⁾ₐS⁽²⁾꜀ fails, the substitution being
/// the measurement flip S⁽¹⁾꜀ ↦ −S⁽²⁾꜀ applied to the unmeasured observable.
/// Requires the three runs to share one point stream; the expected fraction
/// for the semidisk rule is Δ(a,c)/π.
pub fn chameleon_substitution_audit(
    run_i: &[TrialRecord],
    run_ii: &[TrialRecord],
    run_iii: &[TrialRecord],
) -> Result<f64, ExperimentError> {
    shares_stream(run_i, run_ii, run_iii)?;
    if run_i.is_empty() {
        return Err(ExperimentError::EmptyRun);
    }
    let mut violating = 0u64;
    for ((r1, r2), r3) in run_i.iter().zip(run_ii).zip(run_iii) {
        let ab = r1.product();
        let cb = r2.product();
        let ac = r3.product();
        if (ab - cb).abs() > 1 + ac {
            violating += 1;
        }
    }
    Ok(violating as f64 / run_i.len() as f64)
}

/// Runs `n_trials` trials with settings (c, reflect c) and passes iff every
/// product is −1.
pub fn singlet_audit(n_trials: u64, seed: u64, c: Direction) -> Result<bool, ExperimentError> {
    let cfg = SourceConfig::new(seed, n_trials).map_err(|_| ExperimentError::EmptyRun)?;
    let resp1 = PreparedSetting::new(c);
    let resp2 = PreparedSetting::new(c.reflect());
    Ok(stream(&cfg).all(|t| resp1.respond(t.point) * resp2.respond(t.point) == Sign::Minus))
}
