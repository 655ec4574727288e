//! TOML experiment configuration.
//!
//! ```toml
//! message_length = 64
//! trials = 50
//! p_ab_check = 0.25
//! p_bob_cm = 0.25
//! p_charlie_cm = 0.25
//! abort_policy = "strict"
//! seed = 7
//!
//! [attack]
//! kind = "entangle_measure"
//! segments = ["A->B"]
//! beta_sq = 0.5
//!
//! [sweep]
//! parameter = "beta_sq"
//! grid = [0.0, 0.25, 0.5, 0.75, 1.0]
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use qsdc_core::{
    AbortPolicy, AttackModel, Basis, ChannelSegment, CheckBasisPolicy, DisturbancePauli, ExperimentConfig,
    RoundKind, SchedulePolicy, SweepConfig, SweepParameter,
};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub message_length: usize,
    pub trials: usize,
    pub p_ab_check: f64,
    pub p_bob_cm: f64,
    pub p_charlie_cm: f64,
    pub check_basis: BasisChoice,
    pub max_rounds: Option<usize>,
    pub abort_policy: AbortChoice,
    pub seed: u64,
    pub attack: AttackSection,
    pub sweep: Option<SweepSection>,
}

impl Default for FileConfig {
    fn default() -> Self {
        let base = ExperimentConfig::default();
        FileConfig {
            message_length: base.message_length,
            trials: base.trials,
            p_ab_check: base.schedule.p_ab_check,
            p_bob_cm: base.schedule.p_bob_cm,
            p_charlie_cm: base.schedule.p_charlie_cm,
            check_basis: BasisChoice::Uniform,
            max_rounds: None,
            abort_policy: AbortChoice::Strict,
            seed: base.seed,
            attack: AttackSection::default(),
            sweep: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisChoice {
    #[default]
    Uniform,
    Z,
    X,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AbortChoice {
    #[default]
    Strict,
    RecordAndContinue,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackChoice {
    #[default]
    None,
    InterceptResend,
    DisturbanceX,
    DisturbanceZ,
    EntangleMeasure,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SegmentName {
    #[serde(rename = "A->B", alias = "ab")]
    AtoB,
    #[serde(rename = "B->C", alias = "bc")]
    BtoC,
    #[serde(rename = "C->A", alias = "ca")]
    CtoA,
}

impl From<SegmentName> for ChannelSegment {
    fn from(s: SegmentName) -> Self {
        match s {
            SegmentName::AtoB => ChannelSegment::AtoB,
            SegmentName::BtoC => ChannelSegment::BtoC,
            SegmentName::CtoA => ChannelSegment::CtoA,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AttackSection {
    pub kind: AttackChoice,
    pub segments: Vec<SegmentName>,
    pub beta_sq: Option<f64>,
    /// Per-round attack probability.
    pub probability: f64,
}

impl Default for AttackSection {
    fn default() -> Self {
        AttackSection {
            kind: AttackChoice::None,
            segments: Vec::new(),
            beta_sq: None,
            probability: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameterName {
    BetaSq,
    AttackProbability,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckName {
    #[default]
    BobEavesdropCheck,
    BobControlCheck,
    CharlieDecoyCheck,
}

impl From<CheckName> for RoundKind {
    fn from(c: CheckName) -> Self {
        match c {
            CheckName::BobEavesdropCheck => RoundKind::BobEavesdropCheck,
            CheckName::BobControlCheck => RoundKind::BobControlCheck,
            CheckName::CharlieDecoyCheck => RoundKind::CharlieDecoyCheck,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub parameter: SweepParameterName,
    pub grid: Vec<f64>,
    #[serde(default)]
    pub check: CheckName,
    #[serde(default = "default_min_checks")]
    pub min_checks: u64,
}

fn default_min_checks() -> u64 {
    10_000
}

fn config_error(field: &str, message: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{field}: {message}"))
}

fn unit_interval(field: &str, value: f64) -> Result<f64, CliError> {
    if (0.0..=1.0).contains(&value) {
        Ok(value)
    } else {
        Err(config_error(field, format_args!("{value} outside [0, 1]")))
    }
}

impl FileConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    fn attack_model(&self) -> Result<AttackModel, CliError> {
        let a = &self.attack;
        let segments: Vec<ChannelSegment> = a.segments.iter().map(|&s| s.into()).collect();
        let probability = unit_interval("attack.probability", a.probability)?;
        if a.kind != AttackChoice::EntangleMeasure && a.beta_sq.is_some() {
            return Err(config_error("attack.beta_sq", "only valid with kind = \"entangle_measure\""));
        }
        if a.kind == AttackChoice::None {
            if !segments.is_empty() {
                return Err(config_error("attack.segments", "must be empty with kind = \"none\""));
            }
            return Ok(AttackModel::none());
        }
        if segments.is_empty() {
            return Err(config_error("attack.segments", "at least one segment is required"));
        }
        let model = match a.kind {
            AttackChoice::None => unreachable!(),
            AttackChoice::InterceptResend => AttackModel::intercept_resend(segments),
            AttackChoice::DisturbanceX => AttackModel::disturbance(DisturbancePauli::X, segments),
            AttackChoice::DisturbanceZ => AttackModel::disturbance(DisturbancePauli::Z, segments),
            AttackChoice::EntangleMeasure => {
                let beta_sq = a
                    .beta_sq
                    .ok_or_else(|| config_error("attack.beta_sq", "required with kind = \"entangle_measure\""))?;
                AttackModel::entangle_measure_beta_sq(unit_interval("attack.beta_sq", beta_sq)?, segments)
            }
        };
        model
            .and_then(|m| m.with_attack_probability(probability))
            .map_err(|e| config_error("attack", e))
    }

    /// The harness configuration, with `seed` replaced when given.
    pub fn experiment(&self, seed: Option<u64>) -> Result<ExperimentConfig, CliError> {
        if self.message_length == 0 {
            return Err(config_error("message_length", "must be at least 1"));
        }
        if self.trials == 0 {
            return Err(config_error("trials", "must be at least 1"));
        }
        let schedule = SchedulePolicy {
            p_ab_check: unit_interval("p_ab_check", self.p_ab_check)?,
            p_bob_cm: unit_interval("p_bob_cm", self.p_bob_cm)?,
            p_charlie_cm: unit_interval("p_charlie_cm", self.p_charlie_cm)?,
            check_basis: match self.check_basis {
                BasisChoice::Uniform => CheckBasisPolicy::Uniform,
                BasisChoice::Z => CheckBasisPolicy::Only(Basis::Z),
                BasisChoice::X => CheckBasisPolicy::Only(Basis::X),
            },
            max_rounds: self.max_rounds,
        };
        Ok(ExperimentConfig {
            message_length: self.message_length,
            trials: self.trials,
            schedule,
            attack: self.attack_model()?,
            abort_policy: match self.abort_policy {
                AbortChoice::Strict => AbortPolicy::Strict,
                AbortChoice::RecordAndContinue => AbortPolicy::RecordAndContinue,
            },
            seed: seed.unwrap_or(self.seed),
        })
    }

    pub fn sweep_config(&self, seed: Option<u64>) -> Result<SweepConfig, CliError> {
        let sweep = self
            .sweep
            .as_ref()
            .ok_or_else(|| config_error("sweep", "section is required for the sweep command"))?;
        if sweep.grid.is_empty() {
            return Err(config_error("sweep.grid", "must not be empty"));
        }
        for (n, &v) in sweep.grid.iter().enumerate() {
            unit_interval(&format!("sweep.grid[{n}]"), v)?;
        }
        let base = self.experiment(seed)?;
        let parameter = match sweep.parameter {
            SweepParameterName::BetaSq => {
                if self.attack.kind != AttackChoice::EntangleMeasure {
                    return Err(config_error(
                        "sweep.parameter",
                        "beta_sq needs attack.kind = \"entangle_measure\"",
                    ));
                }
                SweepParameter::BetaSquared
            }
            SweepParameterName::AttackProbability => {
                if base.attack.is_none() {
                    return Err(config_error("sweep.parameter", "attack_probability needs an attack"));
                }
                SweepParameter::AttackProbability
            }
        };
        Ok(SweepConfig {
            base,
            parameter,
            grid: sweep.grid.clone(),
            check_kind: sweep.check.into(),
            min_checks: sweep.min_checks,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn err(text: &str) -> String {
        match FileConfig::parse(text).and_then(|c| c.experiment(None)) {
            Err(CliError::Config(msg)) => msg,
            other => panic!("expected a config error, got {other:?}"),
        }
    }

    #[test]
    fn empty_file_gives_defaults() {
        let c = FileConfig::parse("").unwrap();
        assert_eq!(c, FileConfig::default());
        assert_eq!(c.experiment(None).unwrap(), ExperimentConfig::default());
    }

    #[test]
    fn full_file() {
        let c = FileConfig::parse(
            r#"
            message_length = 10
            trials = 3
            p_ab_check = 0.5
            abort_policy = "record_and_continue"
            check_basis = "z"
            seed = 9
            [attack]
            kind = "entangle_measure"
            segments = ["A->B", "ca"]
            beta_sq = 0.25
            "#,
        )
        .unwrap();
        let e = c.experiment(Some(4)).unwrap();
        assert_eq!(e.seed, 4);
        assert_eq!(e.abort_policy, AbortPolicy::RecordAndContinue);
        assert_eq!(e.schedule.check_basis, CheckBasisPolicy::Only(Basis::Z));
        assert_eq!(e.attack, AttackModel::entangle_measure_beta_sq(0.25, [ChannelSegment::AtoB, ChannelSegment::CtoA]).unwrap());
        assert_eq!(c.experiment(None).unwrap().seed, 9);
    }

    #[test]
    fn diagnostics_name_the_field() {
        assert!(err("mesage_length = 3").contains("mesage_length"));
        assert!(err("[attack]\nkind = \"teleport\"").contains("teleport"));
        assert!(err("[attack]\nkind = \"none\"\nbogus = 1").contains("bogus"));
        assert!(err("p_bob_cm = 1.5").starts_with("p_bob_cm"));
        assert!(err("trials = 0").starts_with("trials"));
        assert!(err("[attack]\nkind = \"entangle_measure\"\nsegments = [\"ab\"]").starts_with("attack.beta_sq"));
        assert!(err("[attack]\nkind = \"disturbance_x\"").starts_with("attack.segments"));
        assert!(err("[attack]\nkind = \"disturbance_x\"\nsegments = [\"ab\"]\nbeta_sq = 0.1").starts_with("attack.beta_sq"));
    }

    #[test]
    fn sweep_validation() {
        let sweep = |grid: &str| {
            FileConfig::parse(&format!(
                "[attack]\nkind = \"entangle_measure\"\nsegments = [\"ab\"]\nbeta_sq = 0.5\n[sweep]\nparameter = \"beta_sq\"\ngrid = {grid}"
            ))
            .unwrap()
            .sweep_config(None)
        };
        assert_eq!(sweep("[0.0, 1.0]").unwrap().grid, vec![0.0, 1.0]);
        assert!(matches!(sweep("[]"), Err(CliError::Config(m)) if m.starts_with("sweep.grid")));
        assert!(matches!(sweep("[0.5, 1.5]"), Err(CliError::Config(m)) if m.starts_with("sweep.grid[1]")));
        assert!(FileConfig::default().sweep_config(None).is_err());
    }
}
