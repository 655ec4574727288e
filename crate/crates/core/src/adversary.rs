//! Eavesdropper strategies on the three quantum channel segments.
//!
//! An [`AttackModel`] names one strategy and the segments it sits on. The
//! free functions [`attack_transit`] and [`attack_decoy`] apply that strategy
//! to a single passing qubit; [`Eve`] wraps them with the per-run log and
//! takes care of reading out her ancilla before it is needed elsewhere.
//!
//! [`analytic_detection_probability`] is the closed-form oracle for the
//! per-check detection rate. Every strategy here reduces, once Eve's private
//! records are averaged out, to a Pauli channel on the transit qubit, and the
//! checks only care about which Pauli error reached them.

use std::collections::BTreeSet;
use std::fmt;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bit::Bit;
use crate::protocol::{CheckBasisPolicy, RoundKind};
use crate::quantum::{Basis, JointState, Pauli, Qubit, QuantumError, COEFFICIENT_TOLERANCE};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AttackError {
    #[error("an attack needs at least one channel segment")]
    NoSegments,
    #[error("the no-attack model cannot name channel segments")]
    SegmentsWithoutAttack,
    #[error("|alpha|^2 + |beta|^2 = {0}, expected 1")]
    UnnormalizedCoefficients(f64),
    #[error("{name} must lie in [0, 1], got {value}")]
    OutOfRange { name: &'static str, value: f64 },
    #[error("no closed form for {attack} against {check:?}")]
    Unsupported { attack: String, check: RoundKind },
}

/// Quantum channel legs, in the order the transit qubit travels them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ChannelSegment {
    AtoB,
    BtoC,
    CtoA,
}

impl ChannelSegment {
    pub const ALL: [ChannelSegment; 3] = [ChannelSegment::AtoB, ChannelSegment::BtoC, ChannelSegment::CtoA];
}

impl fmt::Display for ChannelSegment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ChannelSegment::AtoB => "A->B",
            ChannelSegment::BtoC => "B->C",
            ChannelSegment::CtoA => "C->A",
        })
    }
}

/// The Pauli a disturbance attack applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DisturbancePauli {
    X,
    Z,
}

impl From<DisturbancePauli> for Pauli {
    fn from(p: DisturbancePauli) -> Pauli {
        match p {
            DisturbancePauli::X => Pauli::X,
            DisturbancePauli::Z => Pauli::Z,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum AttackKind {
    None,
    /// Measure in a uniformly random basis, forward a fresh eigenstate.
    InterceptResend,
    /// Apply a fixed Pauli without measuring.
    Disturbance(DisturbancePauli),
    /// Couple a two-level ancilla to the qubit, read it out later.
    EntangleMeasure { alpha: Complex64, beta: Complex64 },
}

impl fmt::Display for AttackKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AttackKind::None => f.write_str("none"),
            AttackKind::InterceptResend => f.write_str("intercept-resend"),
            AttackKind::Disturbance(p) => write!(f, "disturbance({})", Pauli::from(*p)),
            AttackKind::EntangleMeasure { beta, .. } => {
                write!(f, "entangle-measure(|beta|^2={:.6})", beta.norm_sqr())
            }
        }
    }
}

/// A strategy, the segments it is applied on, and the chance that Eve acts
/// on any given passage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackModel {
    kind: AttackKind,
    segments: BTreeSet<ChannelSegment>,
    attack_probability: f64,
}

impl Default for AttackModel {
    fn default() -> Self {
        AttackModel::none()
    }
}

impl AttackModel {
    pub fn none() -> Self {
        AttackModel {
            kind: AttackKind::None,
            segments: BTreeSet::new(),
            attack_probability: 1.0,
        }
    }

    pub fn new(
        kind: AttackKind,
        segments: impl IntoIterator<Item = ChannelSegment>,
    ) -> Result<Self, AttackError> {
        let segments: BTreeSet<_> = segments.into_iter().collect();
        match kind {
            AttackKind::None if !segments.is_empty() => return Err(AttackError::SegmentsWithoutAttack),
            AttackKind::None => {}
            _ if segments.is_empty() => return Err(AttackError::NoSegments),
            AttackKind::EntangleMeasure { alpha, beta } => {
                let weight = alpha.norm_sqr() + beta.norm_sqr();
                if (weight - 1.0).abs() > COEFFICIENT_TOLERANCE {
                    return Err(AttackError::UnnormalizedCoefficients(weight));
                }
            }
            _ => {}
        }
        Ok(AttackModel {
            kind,
            segments,
            attack_probability: 1.0,
        })
    }

    pub fn intercept_resend(segments: impl IntoIterator<Item = ChannelSegment>) -> Result<Self, AttackError> {
        AttackModel::new(AttackKind::InterceptResend, segments)
    }

    pub fn disturbance(
        pauli: DisturbancePauli,
        segments: impl IntoIterator<Item = ChannelSegment>,
    ) -> Result<Self, AttackError> {
        AttackModel::new(AttackKind::Disturbance(pauli), segments)
    }

    pub fn entangle_measure(
        alpha: Complex64,
        beta: Complex64,
        segments: impl IntoIterator<Item = ChannelSegment>,
    ) -> Result<Self, AttackError> {
        AttackModel::new(AttackKind::EntangleMeasure { alpha, beta }, segments)
    }

    /// Entangle-and-measure with real `alpha = sqrt(1 - beta_sq)`,
    /// `beta = sqrt(beta_sq)`.
    pub fn entangle_measure_beta_sq(
        beta_sq: f64,
        segments: impl IntoIterator<Item = ChannelSegment>,
    ) -> Result<Self, AttackError> {
        if !(0.0..=1.0).contains(&beta_sq) {
            return Err(AttackError::OutOfRange {
                name: "beta_sq",
                value: beta_sq,
            });
        }
        AttackModel::entangle_measure(
            Complex64::new((1.0 - beta_sq).sqrt(), 0.0),
            Complex64::new(beta_sq.sqrt(), 0.0),
            segments,
        )
    }

    pub fn with_attack_probability(mut self, probability: f64) -> Result<Self, AttackError> {
        if !(0.0..=1.0).contains(&probability) {
            return Err(AttackError::OutOfRange {
                name: "attack_probability",
                value: probability,
            });
        }
        self.attack_probability = probability;
        Ok(self)
    }

    pub fn kind(&self) -> AttackKind {
        self.kind
    }

    pub fn segments(&self) -> &BTreeSet<ChannelSegment> {
        &self.segments
    }

    pub fn attack_probability(&self) -> f64 {
        self.attack_probability
    }

    pub fn is_none(&self) -> bool {
        matches!(self.kind, AttackKind::None)
    }

    pub fn covers(&self, segment: ChannelSegment) -> bool {
        !self.is_none() && self.segments.contains(&segment)
    }

    /// Averaged effect of one passage through `segment` on the transit qubit.
    pub fn passage_channel(&self, segment: ChannelSegment) -> PauliChannel {
        if !self.covers(segment) {
            return PauliChannel::IDENTITY;
        }
        let acting = match self.kind {
            AttackKind::None => PauliChannel::IDENTITY,
            // Z-basis measurement dephases (I or Z), X-basis measurement
            // de-flips (I or X), each chosen half the time.
            AttackKind::InterceptResend => PauliChannel::new(0.5, 0.25, 0.0, 0.25),
            AttackKind::Disturbance(DisturbancePauli::X) => PauliChannel::new(0.0, 1.0, 0.0, 0.0),
            AttackKind::Disturbance(DisturbancePauli::Z) => PauliChannel::new(0.0, 0.0, 0.0, 1.0),
            AttackKind::EntangleMeasure { alpha, beta } => {
                let weight = alpha.norm_sqr() + beta.norm_sqr();
                PauliChannel::new(alpha.norm_sqr() / weight, beta.norm_sqr() / weight, 0.0, 0.0)
            }
        };
        PauliChannel::IDENTITY.mix(&acting, self.attack_probability)
    }
}

impl fmt::Display for AttackModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.kind)?;
        if !self.segments.is_empty() {
            let segs: Vec<String> = self.segments.iter().map(ToString::to_string).collect();
            write!(f, " on {}", segs.join(","))?;
        }
        if self.attack_probability < 1.0 {
            write!(f, " (rate {:.6})", self.attack_probability)?;
        }
        Ok(())
    }
}

/// Probabilities of the four Pauli errors `I, X, Y, Z` (up to phase) on one
/// qubit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PauliChannel {
    pub i: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl PauliChannel {
    pub const IDENTITY: PauliChannel = PauliChannel {
        i: 1.0,
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    pub const fn new(i: f64, x: f64, y: f64, z: f64) -> Self {
        PauliChannel { i, x, y, z }
    }

    /// Pauli errors as (bit-flip, phase-flip) pairs with their weights.
    fn terms(&self) -> [((bool, bool), f64); 4] {
        [
            ((false, false), self.i),
            ((true, false), self.x),
            ((true, true), self.y),
            ((false, true), self.z),
        ]
    }

    fn from_terms(weights: impl IntoIterator<Item = ((bool, bool), f64)>) -> Self {
        let mut out = PauliChannel::new(0.0, 0.0, 0.0, 0.0);
        for (flip, w) in weights {
            match flip {
                (false, false) => out.i += w,
                (true, false) => out.x += w,
                (true, true) => out.y += w,
                (false, true) => out.z += w,
            }
        }
        out
    }

    /// `self` followed by `next`. Paulis multiply by XOR of their flip bits.
    pub fn then(&self, next: &PauliChannel) -> PauliChannel {
        let mut products = Vec::with_capacity(16);
        for ((fa, pa), wa) in self.terms() {
            for ((fb, pb), wb) in next.terms() {
                products.push(((fa ^ fb, pa ^ pb), wa * wb));
            }
        }
        PauliChannel::from_terms(products)
    }

    /// With probability `p` apply `other`, otherwise `self`.
    pub fn mix(&self, other: &PauliChannel, p: f64) -> PauliChannel {
        PauliChannel::new(
            (1.0 - p) * self.i + p * other.i,
            (1.0 - p) * self.x + p * other.x,
            (1.0 - p) * self.y + p * other.y,
            (1.0 - p) * self.z + p * other.z,
        )
    }

    /// Failure probability of a correlation or decoy check. A Z-basis check
    /// trips on any bit flip (X or Y); an X-basis check trips on any phase
    /// flip (Z or Y).
    pub fn check_failure(&self, bases: CheckBasisPolicy) -> f64 {
        let (wz, wx) = match bases {
            CheckBasisPolicy::Uniform => (0.5, 0.5),
            CheckBasisPolicy::Only(Basis::Z) => (1.0, 0.0),
            CheckBasisPolicy::Only(Basis::X) => (0.0, 1.0),
        };
        wz * (self.x + self.y) + wx * (self.z + self.y)
    }
}

/// Exact per-check detection probability with uniformly random check bases.
pub fn analytic_detection_probability(model: &AttackModel, check: RoundKind) -> Result<f64, AttackError> {
    analytic_detection_probability_with(model, check, CheckBasisPolicy::Uniform)
}

/// Exact per-check detection probability under the given check-basis policy.
pub fn analytic_detection_probability_with(
    model: &AttackModel,
    check: RoundKind,
    bases: CheckBasisPolicy,
) -> Result<f64, AttackError> {
    if model.is_none() || !check.is_check() {
        return Err(AttackError::Unsupported {
            attack: model.to_string(),
            check,
        });
    }
    let channel = check
        .tested_segments()
        .iter()
        .fold(PauliChannel::IDENTITY, |acc, &seg| acc.then(&model.passage_channel(seg)));
    Ok(channel.check_failure(bases).clamp(0.0, 1.0))
}

/// The flat per-check detection probability of 1/2 commonly quoted for the
/// intercept-resend and disturbance attacks, kept so reports can show it next
/// to the enumerated value.
pub fn nominal_detection_claim(model: &AttackModel) -> Option<f64> {
    match model.kind() {
        AttackKind::InterceptResend | AttackKind::Disturbance(_) => Some(0.5),
        _ => None,
    }
}

/// What Eve did to one passing qubit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EveAction {
    Intercepted { basis: Basis, outcome: Bit },
    Disturbed { pauli: Pauli },
    /// `ancilla_outcome` is filled in when Eve reads her ancilla.
    Entangled { ancilla_outcome: Option<Bit> },
}

/// One attack event in a run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EveRecord {
    pub round: usize,
    pub segment: ChannelSegment,
    pub action: EveAction,
    /// Eve's guess of `j XOR k`, read off the public announcement of a message
    /// round she touched.
    pub parity_guess: Option<Bit>,
}

/// Applies `model` to a qubit passing through `segment`. Returns the action
/// taken, or `None` when Eve does not act.
pub fn attack_transit<R: Rng + ?Sized>(
    model: &AttackModel,
    segment: ChannelSegment,
    state: &JointState,
    rng: &mut R,
) -> Result<(JointState, Option<EveAction>), QuantumError> {
    if !model.covers(segment) {
        return Ok((state.clone(), None));
    }
    if model.attack_probability < 1.0 && !rng.random_bool(model.attack_probability) {
        return Ok((state.clone(), None));
    }
    match model.kind {
        AttackKind::None => Ok((state.clone(), None)),
        AttackKind::InterceptResend => {
            let basis = if rng.random_bool(0.5) { Basis::X } else { Basis::Z };
            let (outcome, forwarded) =
                state.measure_and_replace(Qubit::Transit, basis, rng, |o| basis.eigenstate(o))?;
            Ok((forwarded, Some(EveAction::Intercepted { basis, outcome })))
        }
        AttackKind::Disturbance(p) => {
            let pauli = Pauli::from(p);
            Ok((
                state.apply_pauli_on_transit(pauli),
                Some(EveAction::Disturbed { pauli }),
            ))
        }
        AttackKind::EntangleMeasure { alpha, beta } => Ok((
            state.attach_ancilla_and_entangle(alpha, beta)?,
            Some(EveAction::Entangled { ancilla_outcome: None }),
        )),
    }
}

/// [`attack_transit`] on a lone decoy qubit travelling C->A.
pub fn attack_decoy<R: Rng + ?Sized>(
    model: &AttackModel,
    state: &JointState,
    rng: &mut R,
) -> Result<(JointState, Option<EveAction>), QuantumError> {
    debug_assert!(!state.has_home(), "decoys are single qubits");
    attack_transit(model, ChannelSegment::CtoA, state, rng)
}

/// The eavesdropper for one protocol run: her strategy plus her log.
#[derive(Debug, Clone)]
pub struct Eve {
    model: AttackModel,
    log: Vec<EveRecord>,
    /// Index into `log` of the entangle event whose ancilla is still unread.
    pending_ancilla: Option<usize>,
}

impl Eve {
    pub fn new(model: AttackModel) -> Self {
        Eve {
            model,
            log: Vec::new(),
            pending_ancilla: None,
        }
    }

    pub fn model(&self) -> &AttackModel {
        &self.model
    }

    pub fn log(&self) -> &[EveRecord] {
        &self.log
    }

    pub fn into_log(self) -> Vec<EveRecord> {
        self.log
    }

    /// Attacks a qubit on `segment`; returns the forwarded state and whether
    /// Eve acted.
    pub fn intercept<R: Rng + ?Sized>(
        &mut self,
        round: usize,
        segment: ChannelSegment,
        state: JointState,
        rng: &mut R,
    ) -> Result<(JointState, bool), QuantumError> {
        if !self.model.covers(segment) {
            return Ok((state, false));
        }
        // One ancilla at a time: read the previous one before coupling again.
        let state = if state.has_ancilla() && matches!(self.model.kind, AttackKind::EntangleMeasure { .. }) {
            self.read_ancilla(state, rng)?
        } else {
            state
        };
        let (state, action) = attack_transit(&self.model, segment, &state, rng)?;
        let Some(action) = action else {
            return Ok((state, false));
        };
        if matches!(action, EveAction::Entangled { .. }) {
            self.pending_ancilla = Some(self.log.len());
        }
        self.log.push(EveRecord {
            round,
            segment,
            action,
            parity_guess: None,
        });
        Ok((state, true))
    }

    /// Reads out and removes Eve's ancilla, if one is attached.
    pub fn read_ancilla<R: Rng + ?Sized>(&mut self, state: JointState, rng: &mut R) -> Result<JointState, QuantumError> {
        if !state.has_ancilla() {
            return Ok(state);
        }
        let (outcome, rest) = state.measure_ancilla(rng)?;
        if let Some(index) = self.pending_ancilla.take() {
            self.log[index].action = EveAction::Entangled {
                ancilla_outcome: Some(outcome),
            };
        }
        Ok(rest)
    }

    /// Attaches the public parity `x XOR y` of `round` to every record Eve
    /// holds for that round.
    pub fn note_announcement(&mut self, round: usize, parity: Bit) {
        for record in self.log.iter_mut().rev().take_while(|r| r.round == round) {
            record.parity_guess = Some(parity);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::{BellLabel, DecoyState, AMPLITUDE_TOLERANCE};
    use crate::rng::seeded_stream;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn psi(r: u8, s: u8) -> JointState {
        JointState::bell_state(BellLabel::from_bits(r, s))
    }

    #[test]
    fn model_validation() {
        assert_eq!(
            AttackModel::intercept_resend([]).unwrap_err(),
            AttackError::NoSegments
        );
        assert_eq!(
            AttackModel::new(AttackKind::None, [ChannelSegment::AtoB]).unwrap_err(),
            AttackError::SegmentsWithoutAttack
        );
        assert!(matches!(
            AttackModel::entangle_measure(c(1.0), c(1.0), [ChannelSegment::AtoB]),
            Err(AttackError::UnnormalizedCoefficients(_))
        ));
        assert!(AttackModel::entangle_measure_beta_sq(1.5, [ChannelSegment::AtoB]).is_err());
        assert!(AttackModel::none().with_attack_probability(-0.1).is_err());
    }

    #[test]
    fn entangle_on_pair_gives_weighted_bell_superposition() {
        let (alpha, beta) = (c(0.6), c(0.8));
        let model = AttackModel::entangle_measure(alpha, beta, [ChannelSegment::AtoB]).unwrap();
        let (state, action) =
            attack_transit(&model, ChannelSegment::AtoB, &psi(0, 0), &mut seeded_stream(0)).unwrap();
        assert_eq!(action, Some(EveAction::Entangled { ancilla_outcome: None }));
        let mut expected = vec![Complex64::new(0.0, 0.0); 8];
        for i in 0..4 {
            expected[i << 1] = alpha * psi(0, 0).amplitudes()[i];
            expected[(i << 1) | 1] = beta * psi(1, 0).amplitudes()[i];
        }
        let expected = JointState::from_amplitudes(state.layout(), expected).unwrap();
        assert!(state.approx_eq(&expected, AMPLITUDE_TOLERANCE));
    }

    #[test]
    fn uncovered_segment_is_identity() {
        let model = AttackModel::disturbance(DisturbancePauli::X, [ChannelSegment::BtoC]).unwrap();
        let (state, action) =
            attack_transit(&model, ChannelSegment::AtoB, &psi(0, 0), &mut seeded_stream(0)).unwrap();
        assert_eq!(action, None);
        assert_eq!(state, psi(0, 0));
    }

    #[test]
    fn disturbance_x_flips_bell_label() {
        let model = AttackModel::disturbance(DisturbancePauli::X, [ChannelSegment::AtoB]).unwrap();
        let (state, _) = attack_transit(&model, ChannelSegment::AtoB, &psi(0, 0), &mut seeded_stream(0)).unwrap();
        assert!(state.approx_eq(&psi(1, 0), AMPLITUDE_TOLERANCE));
    }

    #[test]
    fn disturbance_z_on_decoys() {
        let model = AttackModel::disturbance(DisturbancePauli::Z, [ChannelSegment::CtoA]).unwrap();
        let mut rng = seeded_stream(0);
        let (zero, _) = attack_decoy(&model, &JointState::decoy(DecoyState::Zero), &mut rng).unwrap();
        assert!(zero.approx_eq(&JointState::decoy(DecoyState::Zero), AMPLITUDE_TOLERANCE));
        let (plus, _) = attack_decoy(&model, &JointState::decoy(DecoyState::Plus), &mut rng).unwrap();
        assert!(plus.approx_eq(&JointState::decoy(DecoyState::Minus), AMPLITUDE_TOLERANCE));
    }

    #[test]
    fn entangle_on_decoys() {
        let (alpha, beta) = (c(0.6), c(0.8));
        let model = AttackModel::entangle_measure(alpha, beta, [ChannelSegment::CtoA]).unwrap();
        let mut rng = seeded_stream(0);
        let (zero, _) = attack_decoy(&model, &JointState::decoy(DecoyState::Zero), &mut rng).unwrap();
        let zero_expected = JointState::from_amplitudes(zero.layout(), vec![alpha, c(0.0), c(0.0), beta]).unwrap();
        assert!(zero.approx_eq(&zero_expected, AMPLITUDE_TOLERANCE));

        let (plus, _) = attack_decoy(&model, &JointState::decoy(DecoyState::Plus), &mut rng).unwrap();
        let h = c(FRAC_1_SQRT_2);
        let plus_expected =
            JointState::from_amplitudes(plus.layout(), vec![h * alpha, h * beta, h * alpha, h * beta]).unwrap();
        assert!(plus.approx_eq(&plus_expected, AMPLITUDE_TOLERANCE));
    }

    #[test]
    fn intercept_resend_in_z_collapses_pair() {
        let model = AttackModel::intercept_resend([ChannelSegment::AtoB]).unwrap();
        let mut seen_zero = false;
        for seed in 0..200 {
            let mut rng = seeded_stream(seed);
            let (state, action) = attack_transit(&model, ChannelSegment::AtoB, &psi(0, 0), &mut rng).unwrap();
            if let Some(EveAction::Intercepted {
                basis: Basis::Z,
                outcome: Bit::ZERO,
            }) = action
            {
                // home |1>, transit |0>
                let expected = JointState::from_amplitudes(
                    state.layout(),
                    vec![c(0.0), c(0.0), c(1.0), c(0.0)],
                )
                .unwrap();
                assert!(state.approx_eq(&expected, AMPLITUDE_TOLERANCE));
                seen_zero = true;
            }
        }
        assert!(seen_zero);
    }

    #[test]
    fn eve_logs_ancilla_outcomes() {
        let model = AttackModel::entangle_measure_beta_sq(0.5, [ChannelSegment::AtoB, ChannelSegment::BtoC]).unwrap();
        let mut eve = Eve::new(model);
        let mut rng = seeded_stream(4);
        let (s, acted) = eve.intercept(0, ChannelSegment::AtoB, psi(0, 0), &mut rng).unwrap();
        assert!(acted && s.has_ancilla());
        // Second passage reads out the first ancilla before re-coupling.
        let (s, _) = eve.intercept(0, ChannelSegment::BtoC, s, &mut rng).unwrap();
        assert!(s.has_ancilla());
        let s = eve.read_ancilla(s, &mut rng).unwrap();
        assert!(!s.has_ancilla());
        assert_eq!(eve.log().len(), 2);
        for record in eve.log() {
            assert!(matches!(
                record.action,
                EveAction::Entangled {
                    ancilla_outcome: Some(_)
                }
            ));
        }
        eve.note_announcement(0, Bit::ONE);
        assert!(eve.log().iter().all(|r| r.parity_guess == Some(Bit::ONE)));
    }

    #[test]
    fn ancilla_statistics_follow_beta() {
        // P(chi_1) = |beta|^2 for Z-family inputs.
        let model = AttackModel::entangle_measure_beta_sq(0.3, [ChannelSegment::CtoA]).unwrap();
        let mut rng = seeded_stream(11);
        let trials = 20_000;
        let mut ones = 0;
        for _ in 0..trials {
            let (s, _) = attack_decoy(&model, &JointState::decoy(DecoyState::One), &mut rng).unwrap();
            let (o, _) = s.measure_ancilla(&mut rng).unwrap();
            ones += o.as_u8() as usize;
        }
        let p = ones as f64 / trials as f64;
        let se = (0.3f64 * 0.7 / trials as f64).sqrt();
        assert!((p - 0.3).abs() < 4.0 * se, "{p}");
    }

    #[test]
    fn channel_composition() {
        let ir = PauliChannel::new(0.5, 0.25, 0.0, 0.25);
        let twice = ir.then(&ir);
        assert!((twice.i - 0.375).abs() < 1e-15);
        assert!((twice.x - 0.25).abs() < 1e-15);
        assert!((twice.z - 0.25).abs() < 1e-15);
        assert!((twice.y - 0.125).abs() < 1e-15);
        let x = PauliChannel::new(0.0, 1.0, 0.0, 0.0);
        assert_eq!(x.then(&x), PauliChannel::IDENTITY);
    }

    #[test]
    fn analytic_values() {
        let ab = RoundKind::BobEavesdropCheck;
        let dx = AttackModel::disturbance(DisturbancePauli::X, [ChannelSegment::AtoB]).unwrap();
        assert_eq!(analytic_detection_probability(&dx, ab).unwrap(), 0.5);
        let dz = AttackModel::disturbance(DisturbancePauli::Z, [ChannelSegment::AtoB]).unwrap();
        assert_eq!(analytic_detection_probability(&dz, ab).unwrap(), 0.5);
        let ir = AttackModel::intercept_resend([ChannelSegment::AtoB]).unwrap();
        assert_eq!(analytic_detection_probability(&ir, ab).unwrap(), 0.25);
        for beta_sq in [0.0, 0.25, 0.5, 0.75, 1.0] {
            let em = AttackModel::entangle_measure_beta_sq(beta_sq, ChannelSegment::ALL).unwrap();
            for kind in [RoundKind::BobEavesdropCheck, RoundKind::CharlieDecoyCheck] {
                let p = analytic_detection_probability(&em, kind).unwrap();
                assert!((p - beta_sq / 2.0).abs() < 1e-15);
            }
        }
        // The decoy is fresh, so an A->B attacker never meets it.
        assert_eq!(
            analytic_detection_probability(&dx, RoundKind::CharlieDecoyCheck).unwrap(),
            0.0
        );
        // X on both legs cancels before Charlie's check.
        let dx2 = AttackModel::disturbance(DisturbancePauli::X, [ChannelSegment::AtoB, ChannelSegment::BtoC]).unwrap();
        assert_eq!(analytic_detection_probability(&dx2, RoundKind::BobControlCheck).unwrap(), 0.0);
        let em1 = AttackModel::entangle_measure_beta_sq(1.0, [ChannelSegment::AtoB]).unwrap();
        assert_eq!(
            analytic_detection_probability_with(&em1, ab, CheckBasisPolicy::Only(Basis::Z)).unwrap(),
            1.0
        );
        assert!(analytic_detection_probability(&AttackModel::none(), ab).is_err());
        assert!(analytic_detection_probability(&dx, RoundKind::MessageRound).is_err());
        let half = dx.clone().with_attack_probability(0.5).unwrap();
        assert_eq!(analytic_detection_probability(&half, ab).unwrap(), 0.25);
    }

    #[test]
    fn nominal_claims() {
        let ir = AttackModel::intercept_resend([ChannelSegment::AtoB]).unwrap();
        assert_eq!(nominal_detection_claim(&ir), Some(0.5));
        let em = AttackModel::entangle_measure_beta_sq(0.5, [ChannelSegment::AtoB]).unwrap();
        assert_eq!(nominal_detection_claim(&em), None);
    }
}
