//! Report files: JSON objects and fixed-schema CSV tables.
//!
//! Every CSV table has a header row and a fixed column order; floats are
//! written with six fractional digits, so a CSV round trip is exact up to
//! that precision.

use std::collections::HashMap;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use qsdc_core::harness::{AbortEvent, CheckStats, DecoyStats, OracleRow};
use qsdc_core::protocol::Announcement;
use qsdc_core::{
    BellLabel, Bit, CurveRow, DecoyState, DetectionReport, ExperimentReport, Fidelity, LeakageReport, OracleVerdict,
    RoundKind, SweepParameter,
};

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("missing metric `{0}`")]
    Missing(String),
    #[error("bad value for `{key}`: {value:?}")]
    BadValue { key: String, value: String },
    #[error("unexpected header {0:?}")]
    Header(Vec<String>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

/// Output of the sweep command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub parameter: SweepParameter,
    pub check_kind: RoundKind,
    pub base_attack: String,
    pub seed: u64,
    pub rows: Vec<CurveRow>,
}

pub const SWEEP_COLUMNS: [&str; 7] = [
    "parameter",
    "analytic",
    "sampled",
    "ci_low",
    "ci_high",
    "checks_run",
    "checks_failed",
];

pub const ORACLE_COLUMNS: [&str; 11] = ["i", "j", "k", "r", "s", "x", "y", "alice", "bob", "charlie", "ok"];

fn fixed(v: f64) -> String {
    format!("{v:.6}")
}

fn opt_fixed(v: Option<f64>) -> String {
    v.map(fixed).unwrap_or_default()
}

fn decoy_key(d: DecoyState) -> &'static str {
    match d {
        DecoyState::Zero => "zero",
        DecoyState::One => "one",
        DecoyState::Plus => "plus",
        DecoyState::Minus => "minus",
    }
}

fn kind_from_slug(s: &str) -> Option<RoundKind> {
    [
        RoundKind::BobEavesdropCheck,
        RoundKind::BobControlCheck,
        RoundKind::CharlieDecoyCheck,
        RoundKind::MessageRound,
    ]
    .into_iter()
    .find(|k| k.slug() == s)
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String, ReportError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    Ok(text)
}

pub fn from_json<T: for<'de> Deserialize<'de>>(text: &str) -> Result<T, ReportError> {
    Ok(serde_json::from_str(text)?)
}

fn finish(writer: csv::Writer<Vec<u8>>) -> Result<String, ReportError> {
    let bytes = writer.into_inner().map_err(|e| csv::Error::from(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Long-format `metric,value` table of a run report.
pub fn run_to_csv(report: &ExperimentReport) -> Result<String, ReportError> {
    let mut rows: Vec<(String, String)> = Vec::new();
    let mut put = |k: String, v: String| rows.push((k, v));
    put("seed".into(), report.seed.to_string());
    put("message_length".into(), report.message_length.to_string());
    put("trials".into(), report.trials.to_string());
    put("completed_trials".into(), report.completed_trials.to_string());
    put("exhausted_trials".into(), report.exhausted_trials.to_string());
    put("total_rounds".into(), report.total_rounds.to_string());
    put("message_rounds".into(), report.message_rounds.to_string());
    put("aborts".into(), report.aborts.len().to_string());
    for (n, a) in report.aborts.iter().enumerate() {
        put(format!("abort.{n}.trial"), a.trial.to_string());
        put(format!("abort.{n}.round"), a.round.to_string());
        put(format!("abort.{n}.kind"), a.kind.slug().to_string());
    }
    put("attack".into(), report.detection.attack.clone());
    for c in &report.detection.checks {
        let p = format!("check.{}", c.kind.slug());
        put(format!("{p}.checks_run"), c.checks_run.to_string());
        put(format!("{p}.checks_failed"), c.checks_failed.to_string());
        put(format!("{p}.estimate"), opt_fixed(c.estimate));
        put(format!("{p}.ci_low"), opt_fixed(c.ci_low));
        put(format!("{p}.ci_high"), opt_fixed(c.ci_high));
        put(format!("{p}.analytic"), opt_fixed(c.analytic));
        put(format!("{p}.z_score"), opt_fixed(c.z_score));
        put(
            format!("{p}.within_tolerance"),
            c.within_tolerance.map(|b| b.to_string()).unwrap_or_default(),
        );
        put(format!("{p}.nominal_claim"), opt_fixed(c.nominal_claim));
    }
    for d in &report.detection.decoys {
        let p = format!("decoy.{}", decoy_key(d.decoy));
        put(format!("{p}.checks_run"), d.checks_run.to_string());
        put(format!("{p}.checks_failed"), d.checks_failed.to_string());
    }
    let l = &report.leakage;
    put("leakage.rounds_audited".into(), l.rounds_audited.to_string());
    put("leakage.parity_identity_fraction".into(), opt_fixed(l.parity_identity_fraction));
    put("leakage.mi_announcement_alice".into(), fixed(l.mi_announcement_alice));
    put("leakage.mi_announcement_bob".into(), fixed(l.mi_announcement_bob));
    put("leakage.mi_announcement_charlie".into(), fixed(l.mi_announcement_charlie));
    put("leakage.mi_parity".into(), fixed(l.mi_parity));
    let f = report.fidelity;
    put("fidelity.alice".into(), opt_fixed(f.map(|f| f.alice)));
    put("fidelity.bob".into(), opt_fixed(f.map(|f| f.bob)));
    put("fidelity.charlie".into(), opt_fixed(f.map(|f| f.charlie)));

    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["metric", "value"])?;
    for (k, v) in rows {
        w.write_record([k, v])?;
    }
    finish(w)
}

struct Metrics(HashMap<String, String>);

impl Metrics {
    fn raw(&self, key: &str) -> Result<&str, ReportError> {
        self.0
            .get(key)
            .map(String::as_str)
            .ok_or_else(|| ReportError::Missing(key.to_string()))
    }

    fn get<T: FromStr>(&self, key: &str) -> Result<T, ReportError> {
        let v = self.raw(key)?;
        v.parse().map_err(|_| ReportError::BadValue {
            key: key.to_string(),
            value: v.to_string(),
        })
    }

    fn opt<T: FromStr>(&self, key: &str) -> Result<Option<T>, ReportError> {
        if self.raw(key)?.is_empty() {
            Ok(None)
        } else {
            self.get(key).map(Some)
        }
    }

    fn kind(&self, key: &str) -> Result<RoundKind, ReportError> {
        let v = self.raw(key)?;
        kind_from_slug(v).ok_or_else(|| ReportError::BadValue {
            key: key.to_string(),
            value: v.to_string(),
        })
    }
}

fn check_header(reader: &mut csv::Reader<&[u8]>, expected: &[&str]) -> Result<(), ReportError> {
    let header = reader.headers()?;
    if header.iter().ne(expected.iter().copied()) {
        return Err(ReportError::Header(header.iter().map(String::from).collect()));
    }
    Ok(())
}

pub fn run_from_csv(text: &str) -> Result<ExperimentReport, ReportError> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    check_header(&mut reader, &["metric", "value"])?;
    let mut map = HashMap::new();
    for record in reader.records() {
        let record = record?;
        map.insert(record[0].to_string(), record[1].to_string());
    }
    let m = Metrics(map);
    let aborts = (0..m.get::<usize>("aborts")?)
        .map(|n| {
            Ok(AbortEvent {
                trial: m.get(&format!("abort.{n}.trial"))?,
                round: m.get(&format!("abort.{n}.round"))?,
                kind: m.kind(&format!("abort.{n}.kind"))?,
            })
        })
        .collect::<Result<Vec<_>, ReportError>>()?;
    let checks = RoundKind::CHECKS
        .into_iter()
        .map(|kind| {
            let p = format!("check.{}", kind.slug());
            Ok(CheckStats {
                kind,
                checks_run: m.get(&format!("{p}.checks_run"))?,
                checks_failed: m.get(&format!("{p}.checks_failed"))?,
                estimate: m.opt(&format!("{p}.estimate"))?,
                ci_low: m.opt(&format!("{p}.ci_low"))?,
                ci_high: m.opt(&format!("{p}.ci_high"))?,
                analytic: m.opt(&format!("{p}.analytic"))?,
                z_score: m.opt(&format!("{p}.z_score"))?,
                within_tolerance: m.opt(&format!("{p}.within_tolerance"))?,
                nominal_claim: m.opt(&format!("{p}.nominal_claim"))?,
            })
        })
        .collect::<Result<Vec<_>, ReportError>>()?;
    let decoys = DecoyState::ALL
        .into_iter()
        .map(|decoy| {
            let p = format!("decoy.{}", decoy_key(decoy));
            Ok(DecoyStats {
                decoy,
                checks_run: m.get(&format!("{p}.checks_run"))?,
                checks_failed: m.get(&format!("{p}.checks_failed"))?,
            })
        })
        .collect::<Result<Vec<_>, ReportError>>()?;
    let fidelity = match (
        m.opt("fidelity.alice")?,
        m.opt("fidelity.bob")?,
        m.opt("fidelity.charlie")?,
    ) {
        (Some(alice), Some(bob), Some(charlie)) => Some(Fidelity { alice, bob, charlie }),
        _ => None,
    };
    Ok(ExperimentReport {
        seed: m.get("seed")?,
        message_length: m.get("message_length")?,
        trials: m.get("trials")?,
        completed_trials: m.get("completed_trials")?,
        exhausted_trials: m.get("exhausted_trials")?,
        total_rounds: m.get("total_rounds")?,
        message_rounds: m.get("message_rounds")?,
        aborts,
        detection: DetectionReport {
            attack: m.raw("attack")?.to_string(),
            checks,
            decoys,
        },
        leakage: LeakageReport {
            rounds_audited: m.get("leakage.rounds_audited")?,
            parity_identity_fraction: m.opt("leakage.parity_identity_fraction")?,
            mi_announcement_alice: m.get("leakage.mi_announcement_alice")?,
            mi_announcement_bob: m.get("leakage.mi_announcement_bob")?,
            mi_announcement_charlie: m.get("leakage.mi_announcement_charlie")?,
            mi_parity: m.get("leakage.mi_parity")?,
        },
        fidelity,
    })
}

pub fn curve_to_csv(rows: &[CurveRow]) -> Result<String, ReportError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(SWEEP_COLUMNS)?;
    for r in rows {
        w.write_record([
            fixed(r.parameter),
            fixed(r.analytic),
            fixed(r.sampled),
            fixed(r.ci_low),
            fixed(r.ci_high),
            r.checks_run.to_string(),
            r.checks_failed.to_string(),
        ])?;
    }
    finish(w)
}

fn field<T: FromStr>(record: &csv::StringRecord, index: usize, name: &str) -> Result<T, ReportError> {
    record[index].parse().map_err(|_| ReportError::BadValue {
        key: name.to_string(),
        value: record[index].to_string(),
    })
}

pub fn curve_from_csv(text: &str) -> Result<Vec<CurveRow>, ReportError> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    check_header(&mut reader, &SWEEP_COLUMNS)?;
    reader
        .records()
        .map(|record| {
            let r = record?;
            Ok(CurveRow {
                parameter: field(&r, 0, "parameter")?,
                analytic: field(&r, 1, "analytic")?,
                sampled: field(&r, 2, "sampled")?,
                ci_low: field(&r, 3, "ci_low")?,
                ci_high: field(&r, 4, "ci_high")?,
                checks_run: field(&r, 5, "checks_run")?,
                checks_failed: field(&r, 6, "checks_failed")?,
            })
        })
        .collect()
}

fn pair(bits: (Bit, Bit)) -> String {
    format!("{}{}", bits.0, bits.1)
}

fn parse_pair(s: &str, name: &str) -> Result<(Bit, Bit), ReportError> {
    let bits = Bit::parse_string(s).filter(|b| b.len() == 2).ok_or_else(|| ReportError::BadValue {
        key: name.to_string(),
        value: s.to_string(),
    })?;
    Ok((bits[0], bits[1]))
}

pub fn oracle_to_csv(verdict: &OracleVerdict) -> Result<String, ReportError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(ORACLE_COLUMNS)?;
    for r in &verdict.rows {
        w.write_record([
            r.i.to_string(),
            r.j.to_string(),
            r.k.to_string(),
            r.bell.r.to_string(),
            r.bell.s.to_string(),
            r.announcement.x.to_string(),
            r.announcement.y.to_string(),
            pair(r.alice),
            pair(r.bob),
            pair(r.charlie),
            r.ok.to_string(),
        ])?;
    }
    finish(w)
}

pub fn oracle_from_csv(text: &str) -> Result<OracleVerdict, ReportError> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    check_header(&mut reader, &ORACLE_COLUMNS)?;
    let bit = |r: &csv::StringRecord, n: usize| -> Result<Bit, ReportError> {
        let v: u8 = field(r, n, ORACLE_COLUMNS[n])?;
        Bit::try_from(v).map_err(|_| ReportError::BadValue {
            key: ORACLE_COLUMNS[n].to_string(),
            value: v.to_string(),
        })
    };
    let rows = reader
        .records()
        .map(|record| {
            let r = record?;
            Ok(OracleRow {
                i: bit(&r, 0)?,
                j: bit(&r, 1)?,
                k: bit(&r, 2)?,
                bell: BellLabel::new(bit(&r, 3)?, bit(&r, 4)?),
                announcement: Announcement {
                    x: bit(&r, 5)?,
                    y: bit(&r, 6)?,
                },
                alice: parse_pair(&r[7], "alice")?,
                bob: parse_pair(&r[8], "bob")?,
                charlie: parse_pair(&r[9], "charlie")?,
                ok: field(&r, 10, "ok")?,
            })
        })
        .collect::<Result<Vec<_>, ReportError>>()?;
    let failing = rows.iter().find(|r| !r.ok).map(|r| (r.i, r.j, r.k));
    Ok(OracleVerdict { rows, failing })
}
