//! Monte Carlo experiments over many protocol runs.
//!
//! A trial is one full [`run_protocol`] call with fresh random messages on
//! its own random stream (see [`crate::rng::trial_stream`]). Trials run in
//! parallel and are folded in trial order, so a report depends only on the
//! configuration and its seed.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adversary::{
    analytic_detection_probability_with, nominal_detection_claim, AttackError, AttackKind, AttackModel,
};
use crate::bit::Bit;
use crate::protocol::{
    decode_alice, decode_bob, decode_charlie, AbortPolicy, Announcement, CheckBasisPolicy, MessageTriple,
    ProtocolConfig, ProtocolError, RoundEngine, RoundKind, RoundPlan, RunLog, SchedulePolicy, run_protocol,
};
use crate::quantum::{BellLabel, DecoyState};
use crate::rng::{seeded_stream, trial_stream};
use crate::stats::{linear_fit, standard_error, wilson_interval, JointCounts, LinearFit, Z_95};

/// Sampled rates must sit within this many standard errors of the analytic
/// value.
pub const TOLERANCE_SIGMAS: f64 = 4.0;

/// Upper bound on batches for the run-until-enough-checks helpers.
const MAX_BATCHES: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HarnessError {
    #[error("invalid experiment config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Attack(#[from] AttackError),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error("only {got} {kind} checks after {trials} trials, wanted {wanted}")]
    InsufficientChecks {
        kind: RoundKind,
        wanted: u64,
        got: u64,
        trials: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub message_length: usize,
    pub trials: usize,
    pub schedule: SchedulePolicy,
    pub attack: AttackModel,
    pub abort_policy: AbortPolicy,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            message_length: 64,
            trials: 50,
            schedule: SchedulePolicy::default(),
            attack: AttackModel::none(),
            abort_policy: AbortPolicy::Strict,
            seed: 0,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.message_length == 0 {
            return Err(HarnessError::InvalidConfig("message_length must be at least 1".into()));
        }
        if self.trials == 0 {
            return Err(HarnessError::InvalidConfig("trials must be at least 1".into()));
        }
        self.schedule
            .validate()
            .map_err(|e| HarnessError::InvalidConfig(e.to_string()))
    }

    fn protocol(&self) -> ProtocolConfig {
        ProtocolConfig {
            schedule: self.schedule,
            attack: self.attack.clone(),
            abort_policy: self.abort_policy,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckStats {
    pub kind: RoundKind,
    pub checks_run: u64,
    pub checks_failed: u64,
    pub estimate: Option<f64>,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
    pub analytic: Option<f64>,
    pub z_score: Option<f64>,
    /// `|estimate - analytic| <= 4 standard errors`.
    pub within_tolerance: Option<bool>,
    /// The flat 1/2 figure usually quoted for this attack class, shown next to
    /// the enumerated `analytic` value.
    pub nominal_claim: Option<f64>,
}

impl CheckStats {
    fn build(kind: RoundKind, run: u64, failed: u64, analytic: Option<f64>, nominal_claim: Option<f64>) -> Self {
        let estimate = (run > 0).then(|| failed as f64 / run as f64);
        let ci = wilson_interval(failed, run, Z_95);
        let (z_score, within_tolerance) = match (estimate, analytic) {
            (Some(p_hat), Some(p)) => {
                let se = standard_error(p, run);
                let gap = p_hat - p;
                if se > 0.0 {
                    (Some(gap / se), Some(gap.abs() <= TOLERANCE_SIGMAS * se))
                } else {
                    let exact = gap.abs() <= 1e-12;
                    (exact.then_some(0.0), Some(exact))
                }
            }
            _ => (None, None),
        };
        CheckStats {
            kind,
            checks_run: run,
            checks_failed: failed,
            estimate,
            ci_low: ci.map(|c| c.0),
            ci_high: ci.map(|c| c.1),
            analytic,
            z_score,
            within_tolerance,
            nominal_claim,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecoyStats {
    pub decoy: DecoyState,
    pub checks_run: u64,
    pub checks_failed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionReport {
    pub attack: String,
    /// One entry per check kind, in [`RoundKind::CHECKS`] order.
    pub checks: Vec<CheckStats>,
    /// One entry per decoy preparation, in [`DecoyState::ALL`] order.
    pub decoys: Vec<DecoyStats>,
}

impl DetectionReport {
    pub fn check(&self, kind: RoundKind) -> &CheckStats {
        self.checks
            .iter()
            .find(|c| c.kind == kind)
            .expect("every check kind is reported")
    }

    pub fn decoy(&self, decoy: DecoyState) -> &DecoyStats {
        self.decoys
            .iter()
            .find(|d| d.decoy == decoy)
            .expect("every decoy is reported")
    }

    pub fn total_failed(&self) -> u64 {
        self.checks.iter().map(|c| c.checks_failed).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeakageReport {
    pub rounds_audited: u64,
    /// Fraction of message rounds with `x ^ y == j ^ k`.
    pub parity_identity_fraction: Option<f64>,
    /// Plug-in MI in bits between the announced pair `(x, y)` and `i`.
    pub mi_announcement_alice: f64,
    pub mi_announcement_bob: f64,
    pub mi_announcement_charlie: f64,
    /// Plug-in MI in bits between `x ^ y` and `j ^ k`.
    pub mi_parity: f64,
}

/// Per-party fraction of correctly recovered bits over completed trials.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Fidelity {
    pub alice: f64,
    pub bob: f64,
    pub charlie: f64,
}

impl Fidelity {
    pub fn is_perfect(&self) -> bool {
        self.alice == 1.0 && self.bob == 1.0 && self.charlie == 1.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AbortEvent {
    pub trial: usize,
    pub round: usize,
    pub kind: RoundKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub seed: u64,
    pub message_length: usize,
    pub trials: usize,
    pub completed_trials: usize,
    pub exhausted_trials: usize,
    pub total_rounds: u64,
    pub message_rounds: u64,
    /// Trials stopped by a failed check under the strict policy, in trial
    /// order.
    pub aborts: Vec<AbortEvent>,
    pub detection: DetectionReport,
    pub leakage: LeakageReport,
    /// `None` when no trial completed.
    pub fidelity: Option<Fidelity>,
}

impl ExperimentReport {
    pub fn first_abort(&self) -> Option<&AbortEvent> {
        self.aborts.first()
    }
}

/// Raw counts from one or more trials; merging is order independent.
#[derive(Debug, Clone, Default)]
struct Tally {
    trials: usize,
    checks: [(u64, u64); 3],
    decoys: [(u64, u64); 4],
    rounds: u64,
    message_rounds: u64,
    parity_holds: u64,
    mi_alice: JointCounts,
    mi_bob: JointCounts,
    mi_charlie: JointCounts,
    mi_parity: JointCounts,
    correct: [u64; 3],
    decoded_bits: u64,
    completed: usize,
    exhausted: usize,
    aborts: Vec<AbortEvent>,
}

fn check_slot(kind: RoundKind) -> Option<usize> {
    RoundKind::CHECKS.iter().position(|&k| k == kind)
}

fn decoy_slot(decoy: DecoyState) -> usize {
    DecoyState::ALL.iter().position(|&d| d == decoy).expect("known decoy")
}

impl Tally {
    fn absorb_log(&mut self, log: &RunLog, messages: &MessageTriple) {
        self.rounds += log.records.len() as u64;
        for record in &log.records {
            if let Some(slot) = check_slot(record.kind) {
                let failed = record.check_passed == Some(false);
                self.checks[slot].0 += 1;
                self.checks[slot].1 += failed as u64;
                if let Some(decoy) = record.decoy {
                    let d = &mut self.decoys[decoy_slot(decoy)];
                    d.0 += 1;
                    d.1 += failed as u64;
                }
            }
        }
        for record in log.message_rounds() {
            let (Some(n), Some(a)) = (record.message_index, record.announcement) else {
                continue;
            };
            let (i, j, k) = messages.bits(n);
            self.message_rounds += 1;
            self.parity_holds += (a.parity() == (j ^ k)) as u64;
            let pair = 2 * a.x.as_u8() + a.y.as_u8();
            self.mi_alice.add(pair, i.as_u8());
            self.mi_bob.add(pair, j.as_u8());
            self.mi_charlie.add(pair, k.as_u8());
            self.mi_parity.add(a.parity().as_u8(), (j ^ k).as_u8());
        }
    }

    fn merge(&mut self, other: Tally) {
        self.trials += other.trials;
        for (a, b) in self.checks.iter_mut().zip(other.checks) {
            a.0 += b.0;
            a.1 += b.1;
        }
        for (a, b) in self.decoys.iter_mut().zip(other.decoys) {
            a.0 += b.0;
            a.1 += b.1;
        }
        self.rounds += other.rounds;
        self.message_rounds += other.message_rounds;
        self.parity_holds += other.parity_holds;
        self.mi_alice.merge(&other.mi_alice);
        self.mi_bob.merge(&other.mi_bob);
        self.mi_charlie.merge(&other.mi_charlie);
        self.mi_parity.merge(&other.mi_parity);
        for (a, b) in self.correct.iter_mut().zip(other.correct) {
            *a += b;
        }
        self.decoded_bits += other.decoded_bits;
        self.completed += other.completed;
        self.exhausted += other.exhausted;
        self.aborts.extend(other.aborts);
    }

    fn checks_of(&self, kind: RoundKind) -> u64 {
        check_slot(kind).map_or(0, |s| self.checks[s].0)
    }

    fn report(&self, config: &ExperimentConfig) -> ExperimentReport {
        let attack = &config.attack;
        let checks = RoundKind::CHECKS
            .iter()
            .zip(self.checks)
            .map(|(&kind, (run, failed))| {
                let analytic = if attack.is_none() {
                    Some(0.0)
                } else {
                    analytic_detection_probability_with(attack, kind, config.schedule.check_basis).ok()
                };
                let reachable = kind.tested_segments().iter().any(|&s| attack.covers(s));
                let nominal = nominal_detection_claim(attack).filter(|_| reachable);
                CheckStats::build(kind, run, failed, analytic, nominal)
            })
            .collect();
        let decoys = DecoyState::ALL
            .iter()
            .zip(self.decoys)
            .map(|(&decoy, (run, failed))| DecoyStats {
                decoy,
                checks_run: run,
                checks_failed: failed,
            })
            .collect();
        let fidelity = (self.decoded_bits > 0).then(|| {
            let f = |c: u64| c as f64 / self.decoded_bits as f64;
            Fidelity {
                alice: f(self.correct[0]),
                bob: f(self.correct[1]),
                charlie: f(self.correct[2]),
            }
        });
        ExperimentReport {
            seed: config.seed,
            message_length: config.message_length,
            trials: self.trials,
            completed_trials: self.completed,
            exhausted_trials: self.exhausted,
            total_rounds: self.rounds,
            message_rounds: self.message_rounds,
            aborts: self.aborts.clone(),
            detection: DetectionReport {
                attack: attack.to_string(),
                checks,
                decoys,
            },
            leakage: LeakageReport {
                rounds_audited: self.message_rounds,
                parity_identity_fraction: (self.message_rounds > 0)
                    .then(|| self.parity_holds as f64 / self.message_rounds as f64),
                mi_announcement_alice: self.mi_alice.mutual_information(),
                mi_announcement_bob: self.mi_bob.mutual_information(),
                mi_announcement_charlie: self.mi_charlie.mutual_information(),
                mi_parity: self.mi_parity.mutual_information(),
            },
            fidelity,
        }
    }
}

fn run_trial(config: &ExperimentConfig, index: usize) -> Result<Tally, HarnessError> {
    let mut rng = trial_stream(config.seed, index as u64);
    let messages = MessageTriple::random(config.message_length, &mut rng)?;
    let mut tally = Tally {
        trials: 1,
        ..Tally::default()
    };
    match run_protocol(&messages, &config.protocol(), &mut rng) {
        Ok(run) => {
            tally.absorb_log(&run.log, &messages);
            let correct = run.decoded.correct_counts(&messages);
            for (slot, c) in tally.correct.iter_mut().zip(correct) {
                *slot += c as u64;
            }
            tally.decoded_bits += 2 * messages.len() as u64;
            tally.completed += 1;
        }
        Err(ProtocolError::Aborted { round, kind, log }) => {
            tally.absorb_log(&log, &messages);
            tally.aborts.push(AbortEvent {
                trial: index,
                round,
                kind,
            });
        }
        Err(ProtocolError::Exhausted { log, .. }) => {
            tally.absorb_log(&log, &messages);
            tally.exhausted += 1;
        }
        Err(other) => return Err(other.into()),
    }
    Ok(tally)
}

fn run_range(config: &ExperimentConfig, range: std::ops::Range<usize>) -> Result<Tally, HarnessError> {
    let tallies: Vec<Result<Tally, HarnessError>> =
        range.into_par_iter().map(|t| run_trial(config, t)).collect();
    let mut total = Tally::default();
    for tally in tallies {
        total.merge(tally?);
    }
    Ok(total)
}

/// Runs `config.trials` independent trials and summarizes them.
///
/// Strict-policy aborts do not stop the experiment; they are listed in
/// [`ExperimentReport::aborts`] and their partial logs still feed the
/// detection and leakage statistics.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport, HarnessError> {
    config.validate()?;
    let tally = run_range(config, 0..config.trials)?;
    Ok(tally.report(config))
}

/// Runs batches of `config.trials` trials until at least `min_checks` checks
/// of `kind` have been observed.
pub fn run_until_checks(
    config: &ExperimentConfig,
    kind: RoundKind,
    min_checks: u64,
) -> Result<ExperimentReport, HarnessError> {
    config.validate()?;
    if !kind.is_check() {
        return Err(HarnessError::InvalidConfig(format!("{kind} is not a check")));
    }
    let mut tally = Tally::default();
    let mut next = 0;
    for _ in 0..MAX_BATCHES {
        if tally.checks_of(kind) >= min_checks {
            return Ok(tally.report(config));
        }
        tally.merge(run_range(config, next..next + config.trials)?);
        next += config.trials;
    }
    if tally.checks_of(kind) >= min_checks {
        return Ok(tally.report(config));
    }
    Err(HarnessError::InsufficientChecks {
        kind,
        wanted: min_checks,
        got: tally.checks_of(kind),
        trials: tally.trials,
    })
}

/// One deterministic honest message round per `(i, j, k)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleRow {
    pub i: Bit,
    pub j: Bit,
    pub k: Bit,
    pub bell: BellLabel,
    pub announcement: Announcement,
    /// Alice's `(j, k)`.
    pub alice: (Bit, Bit),
    /// Bob's `(i, k)`.
    pub bob: (Bit, Bit),
    /// Charlie's `(i, j)`.
    pub charlie: (Bit, Bit),
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleVerdict {
    pub rows: Vec<OracleRow>,
    pub failing: Option<(Bit, Bit, Bit)>,
}

impl OracleVerdict {
    pub fn passed(&self) -> bool {
        self.failing.is_none()
    }
}

/// Enumerates all eight `(i, j, k)` triples through a full state-vector
/// message round and checks every party's decoding.
pub fn exhaustive_oracle() -> OracleVerdict {
    let mut rows = Vec::with_capacity(8);
    let mut failing = None;
    for i in Bit::ALL {
        for j in Bit::ALL {
            for k in Bit::ALL {
                let mut engine = RoundEngine::new(AttackModel::none(), CheckBasisPolicy::Uniform);
                let record = engine
                    .execute(RoundPlan::Message, 0, (i, j, k), &mut seeded_stream(0))
                    .expect("honest round on a fresh pair");
                let bell = record.bell_outcome.expect("message round measures");
                let announcement = record.announcement.expect("message round announces");
                let alice = decode_alice(announcement, i);
                let bob = decode_bob(announcement, j);
                let charlie = decode_charlie(announcement, k);
                let ok = alice == (j, k) && bob == (i, k) && charlie == (i, j);
                if !ok && failing.is_none() {
                    failing = Some((i, j, k));
                }
                rows.push(OracleRow {
                    i,
                    j,
                    k,
                    bell,
                    announcement,
                    alice,
                    bob,
                    charlie,
                    ok,
                });
            }
        }
    }
    OracleVerdict { rows, failing }
}

/// The attack parameter a detection curve varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepParameter {
    /// `|beta|^2` of an entangle-and-measure attack.
    BetaSquared,
    /// Per-passage probability that Eve acts.
    AttackProbability,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    /// Schedule, trial batch size, seed and the attack being varied.
    pub base: ExperimentConfig,
    pub parameter: SweepParameter,
    pub grid: Vec<f64>,
    pub check_kind: RoundKind,
    pub min_checks: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub parameter: f64,
    pub analytic: f64,
    pub sampled: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub checks_run: u64,
    pub checks_failed: u64,
}

impl SweepConfig {
    fn attack_at(&self, value: f64) -> Result<AttackModel, HarnessError> {
        let base = &self.base.attack;
        if !(0.0..=1.0).contains(&value) {
            return Err(HarnessError::InvalidConfig(format!(
                "sweep grid value {value} outside [0, 1]"
            )));
        }
        match self.parameter {
            SweepParameter::BetaSquared => {
                if !matches!(base.kind(), AttackKind::EntangleMeasure { .. }) {
                    return Err(HarnessError::InvalidConfig(
                        "a beta_sq sweep needs an entangle_measure attack".into(),
                    ));
                }
                Ok(AttackModel::entangle_measure_beta_sq(value, base.segments().iter().copied())?
                    .with_attack_probability(base.attack_probability())?)
            }
            SweepParameter::AttackProbability => {
                if base.is_none() {
                    return Err(HarnessError::InvalidConfig(
                        "an attack_probability sweep needs an attack".into(),
                    ));
                }
                Ok(base.clone().with_attack_probability(value)?)
            }
        }
    }
}

/// Analytic and sampled detection probability of one check kind across a
/// parameter grid. Failed checks never abort here.
pub fn detection_curve(config: &SweepConfig) -> Result<Vec<CurveRow>, HarnessError> {
    if config.grid.is_empty() {
        return Err(HarnessError::InvalidConfig("sweep grid is empty".into()));
    }
    let attacks = config
        .grid
        .iter()
        .map(|&v| config.attack_at(v))
        .collect::<Result<Vec<_>, _>>()?;
    config
        .grid
        .iter()
        .zip(attacks)
        .map(|(&value, attack)| {
            let point = ExperimentConfig {
                attack,
                abort_policy: AbortPolicy::RecordAndContinue,
                ..config.base.clone()
            };
            let report = run_until_checks(&point, config.check_kind, config.min_checks)?;
            let stats = report.detection.check(config.check_kind);
            let analytic =
                analytic_detection_probability_with(&point.attack, config.check_kind, point.schedule.check_basis)?;
            Ok(CurveRow {
                parameter: value,
                analytic,
                sampled: stats.estimate.unwrap_or(0.0),
                ci_low: stats.ci_low.unwrap_or(0.0),
                ci_high: stats.ci_high.unwrap_or(1.0),
                checks_run: stats.checks_run,
                checks_failed: stats.checks_failed,
            })
        })
        .collect()
}

/// Completion rate of strict-policy runs at one message length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurvivalPoint {
    pub message_length: usize,
    pub trials: usize,
    pub completed: usize,
    pub completion_rate: f64,
}

/// Strict-policy completion rate for each message length in `lengths`.
pub fn survival_curve(config: &ExperimentConfig, lengths: &[usize]) -> Result<Vec<SurvivalPoint>, HarnessError> {
    lengths
        .iter()
        .map(|&n| {
            let point = ExperimentConfig {
                message_length: n,
                abort_policy: AbortPolicy::Strict,
                ..config.clone()
            };
            let report = run_experiment(&point)?;
            Ok(SurvivalPoint {
                message_length: n,
                trials: report.trials,
                completed: report.completed_trials,
                completion_rate: report.completed_trials as f64 / report.trials as f64,
            })
        })
        .collect()
}

/// Fits `ln(completion_rate)` against message length. A geometric decay
/// shows up as a negative slope with a good linear fit. Points with no
/// survivors are skipped.
pub fn fit_survival(points: &[SurvivalPoint]) -> Option<LinearFit> {
    let (xs, ys): (Vec<f64>, Vec<f64>) = points
        .iter()
        .filter(|p| p.completed > 0)
        .map(|p| (p.message_length as f64, p.completion_rate.ln()))
        .unzip();
    linear_fit(&xs, &ys)
}
