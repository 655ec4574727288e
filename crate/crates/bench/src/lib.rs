//! Fixtures shared by the benchmarks.

use qsdc_core::{AbortPolicy, AttackModel, ChannelSegment, ExperimentConfig, SchedulePolicy};

/// A small experiment under entangle-and-measure on every segment, the most
/// expensive attack to simulate.
pub fn attacked_experiment(message_length: usize, trials: usize) -> ExperimentConfig {
    ExperimentConfig {
        message_length,
        trials,
        schedule: SchedulePolicy::default(),
        attack: AttackModel::entangle_measure_beta_sq(0.3, ChannelSegment::ALL).unwrap(),
        abort_policy: AbortPolicy::RecordAndContinue,
        seed: 1,
    }
}

pub fn honest_experiment(message_length: usize, trials: usize) -> ExperimentConfig {
    ExperimentConfig {
        message_length,
        trials,
        seed: 1,
        ..ExperimentConfig::default()
    }
}
