use std::fmt::Write as _;
use std::path::Path;

use log::{info, warn};

use qsdc_core::protocol::{encode_bob, encode_charlie, ProtocolConfig, RoundRecord};
use qsdc_core::rng::seeded_stream;
use qsdc_core::{
    detection_curve, exhaustive_oracle, run_experiment, run_protocol, AbortPolicy, AttackModel, Bit,
    ExperimentReport, MessageTriple, RoundKind, SchedulePolicy,
};

use crate::config::FileConfig;
use crate::report::{self, Format, SweepReport};
use crate::{Cli, CliError};

pub const DEMO_MAX_LENGTH: usize = 16;

fn emit(out: Option<&Path>, text: &str) -> Result<(), CliError> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|source| CliError::Output {
            path: path.to_path_buf(),
            source,
        }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// Checks that must hold in every unattacked run.
fn honest_invariants(report: &ExperimentReport) -> Result<(), CliError> {
    if let Some(f) = report.fidelity.filter(|f| !f.is_perfect()) {
        return Err(CliError::Invariant(format!("unattacked fidelity {f:?}")));
    }
    if let Some(p) = report.leakage.parity_identity_fraction.filter(|&p| p != 1.0) {
        return Err(CliError::Invariant(format!("unattacked parity identity fraction {p}")));
    }
    let failed = report.detection.total_failed();
    if failed > 0 {
        return Err(CliError::Invariant(format!("{failed} failed checks without an attack")));
    }
    Ok(())
}

pub fn run(file: &FileConfig, cli: &Cli) -> Result<(), CliError> {
    let config = file.experiment(cli.seed)?;
    info!(
        "running {} trials of N = {} against {} (seed {})",
        config.trials, config.message_length, config.attack, config.seed
    );
    let report = run_experiment(&config)?;
    let text = match cli.format {
        Format::Json => report::to_json(&report)?,
        Format::Csv => report::run_to_csv(&report)?,
    };
    emit(cli.out.as_deref(), &text)?;
    for c in &report.detection.checks {
        info!(
            "{}: {} of {} failed, analytic {:?}",
            c.kind, c.checks_failed, c.checks_run, c.analytic
        );
    }
    if report.exhausted_trials > 0 {
        warn!("{} trials ran out of rounds", report.exhausted_trials);
    }
    if config.attack.is_none() {
        honest_invariants(&report)?;
    }
    if let Some(first) = report.first_abort() {
        warn!("{} of {} trials aborted", report.aborts.len(), report.trials);
        return Err(CliError::Aborted {
            trial: first.trial,
            round: first.round,
            kind: first.kind,
        });
    }
    Ok(())
}

fn bits(b: &[Bit]) -> String {
    b.iter().map(ToString::to_string).collect()
}

pub fn oracle(cli: &Cli) -> Result<(), CliError> {
    let verdict = exhaustive_oracle();
    println!("i j k | r s | x y | alice:jk bob:ik charlie:ij | ok");
    for r in &verdict.rows {
        println!(
            "{} {} {} | {} {} | {} {} |       {}{}     {}{}         {}{} | {}",
            r.i,
            r.j,
            r.k,
            r.bell.r,
            r.bell.s,
            r.announcement.x,
            r.announcement.y,
            r.alice.0,
            r.alice.1,
            r.bob.0,
            r.bob.1,
            r.charlie.0,
            r.charlie.1,
            if r.ok { "yes" } else { "NO" }
        );
    }
    if let Some(out) = cli.out.as_deref() {
        let text = match cli.format {
            Format::Json => report::to_json(&verdict)?,
            Format::Csv => report::oracle_to_csv(&verdict)?,
        };
        emit(Some(out), &text)?;
    }
    match verdict.failing {
        None => {
            println!("oracle: pass ({} rows)", verdict.rows.len());
            Ok(())
        }
        Some((i, j, k)) => Err(CliError::Invariant(format!("oracle failed at (i, j, k) = ({i}, {j}, {k})"))),
    }
}

pub fn sweep(file: &FileConfig, cli: &Cli) -> Result<(), CliError> {
    let config = file.sweep_config(cli.seed)?;
    info!(
        "sweeping {:?} over {} points, {} checks, at least {} each",
        config.parameter,
        config.grid.len(),
        config.check_kind,
        config.min_checks
    );
    let rows = detection_curve(&config)?;
    for r in &rows {
        info!(
            "{:.6}: analytic {:.6}, sampled {:.6} [{:.6}, {:.6}] over {}",
            r.parameter, r.analytic, r.sampled, r.ci_low, r.ci_high, r.checks_run
        );
    }
    let text = match cli.format {
        Format::Json => report::to_json(&SweepReport {
            parameter: config.parameter,
            check_kind: config.check_kind,
            base_attack: config.base.attack.to_string(),
            seed: config.base.seed,
            rows,
        })?,
        Format::Csv => report::curve_to_csv(&rows)?,
    };
    emit(cli.out.as_deref(), &text)
}

fn describe(record: &RoundRecord, messages: &MessageTriple) -> Result<String, CliError> {
    let verdict = |r: &RoundRecord| match r.check_passed {
        Some(true) => "pass",
        _ => "FAIL",
    };
    let basis = record.check_basis.map(|b| b.to_string()).unwrap_or_default();
    let line = match record.kind {
        RoundKind::BobEavesdropCheck => {
            format!("Bob measures the arriving qubit; A-B check in {basis}: {}", verdict(record))
        }
        RoundKind::BobControlCheck => format!(
            "Bob in control mode; Charlie measures, C-A check in {basis}: {}",
            verdict(record)
        ),
        RoundKind::CharlieDecoyCheck => format!(
            "Bob encodes, Charlie discards it and sends decoy {}; Alice checks: {}",
            record.decoy.map(|d| d.to_string()).unwrap_or_default(),
            verdict(record)
        ),
        RoundKind::MessageRound => {
            let n = record.message_index.expect("message round has an index");
            let (i, j, k) = messages.bits(n);
            let (Some(bell), Some(a)) = (record.bell_outcome, record.announcement) else {
                return Err(CliError::Invariant(format!("round {} lacks its outcome", record.round)));
            };
            if a.parity() != (j ^ k) {
                return Err(CliError::Invariant(format!("round {}: x^y != j^k", record.round)));
            }
            format!(
                "message bit {n}: i={i} j={j} k={k}, Bob applies {}, Charlie applies {}, Bell outcome {bell}, \
                 Alice announces {a}, x^y={} = j^k={}",
                encode_bob(j),
                encode_charlie(k),
                a.parity(),
                j ^ k
            )
        }
    };
    Ok(format!("round {:>3}  {line}", record.round))
}

pub fn demo(n: usize, cli: &Cli) -> Result<(), CliError> {
    if !(1..=DEMO_MAX_LENGTH).contains(&n) {
        return Err(CliError::Config(format!("demo: n must be between 1 and {DEMO_MAX_LENGTH}, got {n}")));
    }
    let seed = cli.seed.unwrap_or(0);
    let mut rng = seeded_stream(seed);
    let messages = MessageTriple::random(n, &mut rng).map_err(|e| CliError::Config(e.to_string()))?;
    let config = ProtocolConfig {
        schedule: SchedulePolicy::default(),
        attack: AttackModel::none(),
        abort_policy: AbortPolicy::Strict,
    };
    let run = run_protocol(&messages, &config, &mut rng).map_err(|e| CliError::Invariant(e.to_string()))?;

    let mut out = String::new();
    let w = &mut out;
    writeln!(w, "seed {seed}, {n} message bits per party").unwrap();
    writeln!(w, "Alice   i = {}", bits(messages.alice())).unwrap();
    writeln!(w, "Bob     j = {}", bits(messages.bob())).unwrap();
    writeln!(w, "Charlie k = {}", bits(messages.charlie())).unwrap();
    writeln!(w).unwrap();
    for record in &run.log.records {
        writeln!(w, "{}", describe(record, &messages)?).unwrap();
    }
    let d = &run.decoded;
    writeln!(w).unwrap();
    writeln!(w, "Alice   decodes j = {}, k = {}", bits(&d.alice_sees_bob), bits(&d.alice_sees_charlie)).unwrap();
    writeln!(w, "Bob     decodes i = {}, k = {}", bits(&d.bob_sees_alice), bits(&d.bob_sees_charlie)).unwrap();
    writeln!(w, "Charlie decodes i = {}, j = {}", bits(&d.charlie_sees_alice), bits(&d.charlie_sees_bob)).unwrap();
    if !d.is_exact(&messages) {
        emit(cli.out.as_deref(), &out)?;
        return Err(CliError::Invariant("honest run decoded incorrectly".into()));
    }
    writeln!(
        w,
        "all decodes correct after {} rounds ({} checks)",
        run.log.records.len(),
        run.log.checks().count()
    )
    .unwrap();
    emit(cli.out.as_deref(), &out)
}
