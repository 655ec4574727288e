//! Simulator for three-party simultaneous quantum secure direct
//! communication over EPR pairs.
//!
//! * [`quantum`]: exact state vectors for a home/transit pair, optional
//!   eavesdropper ancilla, Bell and single-qubit measurements.
//! * [`protocol`]: the round state machine, encoding, announcement and
//!   decoding rules, public transcript.
//! * [`adversary`]: intercept-resend, disturbance and entangle-and-measure
//!   attacks plus closed-form detection probabilities.
//! * [`harness`]: seeded Monte Carlo experiments, detection curves, leakage
//!   audit and the exhaustive decode oracle.

pub mod adversary;
pub mod bit;
pub mod harness;
pub mod protocol;
pub mod quantum;
pub mod rng;
pub mod stats;

pub use adversary::{
    analytic_detection_probability, analytic_detection_probability_with, AttackKind, AttackModel, ChannelSegment,
    DisturbancePauli, EveRecord,
};
pub use bit::Bit;
pub use harness::{
    detection_curve, exhaustive_oracle, run_experiment, run_until_checks, CurveRow, DetectionReport,
    ExperimentConfig, ExperimentReport, Fidelity, HarnessError, LeakageReport, OracleVerdict, SweepConfig,
    SweepParameter,
};
pub use protocol::{
    run_protocol, AbortPolicy, CheckBasisPolicy, MessageTriple, ProtocolConfig, ProtocolError, PublicTranscript,
    RoundKind, RoundRecord, SchedulePolicy,
};
pub use quantum::{Basis, BellLabel, DecoyState, JointState, Pauli, Qubit, QuantumError};
pub use rng::RandomStream;
