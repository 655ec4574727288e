//! The three-party round state machine.
//!
//! Each round Alice prepares `|Psi_00>` and sends the transit qubit around
//! the ring A->B->C->A. Bob either checks the A->B leg, passes the qubit on
//! untouched (control mode) or encodes his bit (message mode). After a Bob
//! control round Charlie and Alice check the pair. After a Bob message round
//! Charlie either swaps in a decoy (control mode) or encodes his bit, after
//! which Alice Bell-measures and publishes `(x, y) = (r ^ i, s ^ i)`.
//!
//! Only completed message rounds consume a message index; every other round
//! is retried with the same bits.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adversary::{AttackModel, ChannelSegment, Eve, EveRecord};
use crate::bit::Bit;
use crate::quantum::{BellLabel, Basis, DecoyState, JointState, Pauli, Qubit, QuantumError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Party {
    Alice,
    Bob,
    Charlie,
}

impl fmt::Display for Party {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Party::Alice => "Alice",
            Party::Bob => "Bob",
            Party::Charlie => "Charlie",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RunningMode {
    Control,
    Message,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RoundKind {
    /// Bob measures the incoming qubit; Bob and Alice compare.
    BobEavesdropCheck,
    /// Bob ran control mode; Charlie and Alice compare.
    BobControlCheck,
    /// Charlie sent a decoy; Alice measures it.
    CharlieDecoyCheck,
    MessageRound,
}

impl RoundKind {
    pub const CHECKS: [RoundKind; 3] = [
        RoundKind::BobEavesdropCheck,
        RoundKind::BobControlCheck,
        RoundKind::CharlieDecoyCheck,
    ];

    pub fn is_check(self) -> bool {
        self != RoundKind::MessageRound
    }

    /// Segments the tested qubit crossed before the check looked at it.
    pub fn tested_segments(self) -> &'static [ChannelSegment] {
        match self {
            RoundKind::BobEavesdropCheck => &[ChannelSegment::AtoB],
            RoundKind::BobControlCheck => &[ChannelSegment::AtoB, ChannelSegment::BtoC],
            RoundKind::CharlieDecoyCheck => &[ChannelSegment::CtoA],
            RoundKind::MessageRound => &[],
        }
    }

    pub fn slug(self) -> &'static str {
        match self {
            RoundKind::BobEavesdropCheck => "bob_eavesdrop_check",
            RoundKind::BobControlCheck => "bob_control_check",
            RoundKind::CharlieDecoyCheck => "charlie_decoy_check",
            RoundKind::MessageRound => "message_round",
        }
    }
}

impl fmt::Display for RoundKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.slug())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProtocolError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("aborted: {kind} failed in round {round}")]
    Aborted {
        round: usize,
        kind: RoundKind,
        log: Box<RunLog>,
    },
    #[error("round budget of {budget} exhausted after delivering {delivered} message bits")]
    Exhausted {
        budget: usize,
        delivered: usize,
        log: Box<RunLog>,
    },
    #[error(transparent)]
    Quantum(#[from] QuantumError),
}

/// The three secrets: Alice's `i`, Bob's `j` and Charlie's `k`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MessageTriple {
    alice: Vec<Bit>,
    bob: Vec<Bit>,
    charlie: Vec<Bit>,
}

impl MessageTriple {
    pub fn new(alice: Vec<Bit>, bob: Vec<Bit>, charlie: Vec<Bit>) -> Result<Self, ProtocolError> {
        if alice.is_empty() {
            return Err(ProtocolError::InvalidInput("messages must be non-empty".into()));
        }
        if alice.len() != bob.len() || alice.len() != charlie.len() {
            return Err(ProtocolError::InvalidInput(format!(
                "message lengths differ: {}, {}, {}",
                alice.len(),
                bob.len(),
                charlie.len()
            )));
        }
        Ok(MessageTriple { alice, bob, charlie })
    }

    /// Parses three `0`/`1` strings.
    pub fn parse(alice: &str, bob: &str, charlie: &str) -> Result<Self, ProtocolError> {
        let parse = |s: &str| {
            Bit::parse_string(s).ok_or_else(|| ProtocolError::InvalidInput(format!("not a bit string: {s:?}")))
        };
        MessageTriple::new(parse(alice)?, parse(bob)?, parse(charlie)?)
    }

    pub fn zeros(len: usize) -> Result<Self, ProtocolError> {
        MessageTriple::new(vec![Bit::ZERO; len], vec![Bit::ZERO; len], vec![Bit::ZERO; len])
    }

    pub fn random<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Result<Self, ProtocolError> {
        let mut draw = || (0..len).map(|_| Bit::new(rng.random())).collect::<Vec<_>>();
        let (a, b, c) = (draw(), draw(), draw());
        MessageTriple::new(a, b, c)
    }

    pub fn len(&self) -> usize {
        self.alice.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alice.is_empty()
    }

    pub fn alice(&self) -> &[Bit] {
        &self.alice
    }

    pub fn bob(&self) -> &[Bit] {
        &self.bob
    }

    pub fn charlie(&self) -> &[Bit] {
        &self.charlie
    }

    /// `(i_n, j_n, k_n)`
    pub fn bits(&self, n: usize) -> (Bit, Bit, Bit) {
        (self.alice[n], self.bob[n], self.charlie[n])
    }
}

/// How the bases of correlation checks and the family of decoys are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum CheckBasisPolicy {
    #[default]
    Uniform,
    Only(Basis),
}

impl CheckBasisPolicy {
    pub fn sample<R: Rng + ?Sized>(self, rng: &mut R) -> Basis {
        match self {
            CheckBasisPolicy::Uniform => {
                if rng.random_bool(0.5) {
                    Basis::X
                } else {
                    Basis::Z
                }
            }
            CheckBasisPolicy::Only(b) => b,
        }
    }

    pub fn sample_decoy<R: Rng + ?Sized>(self, rng: &mut R) -> DecoyState {
        let basis = self.sample(rng);
        DecoyState::from_eigenstate(basis, Bit::new(rng.random()))
    }
}

/// Independent Bernoulli choices made by Bob and Charlie each round.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SchedulePolicy {
    /// Probability that Bob measures the incoming qubit.
    pub p_ab_check: f64,
    /// Probability that Bob, not checking, runs control mode.
    pub p_bob_cm: f64,
    /// Probability that Charlie, after a Bob message round, sends a decoy.
    pub p_charlie_cm: f64,
    pub check_basis: CheckBasisPolicy,
    /// Round budget; defaults to `100 * N + 1000`.
    pub max_rounds: Option<usize>,
}

impl Default for SchedulePolicy {
    fn default() -> Self {
        SchedulePolicy {
            p_ab_check: 0.25,
            p_bob_cm: 0.25,
            p_charlie_cm: 0.25,
            check_basis: CheckBasisPolicy::Uniform,
            max_rounds: None,
        }
    }
}

impl SchedulePolicy {
    pub fn validate(&self) -> Result<(), ProtocolError> {
        for (name, p) in [
            ("p_ab_check", self.p_ab_check),
            ("p_bob_cm", self.p_bob_cm),
            ("p_charlie_cm", self.p_charlie_cm),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(ProtocolError::InvalidInput(format!("{name} must lie in [0, 1], got {p}")));
            }
        }
        Ok(())
    }

    pub fn budget(&self, message_length: usize) -> usize {
        self.max_rounds
            .unwrap_or_else(|| message_length.saturating_mul(100).saturating_add(1000))
    }
}

/// What a failed check does to the run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum AbortPolicy {
    /// Stop the whole communication on the first failure.
    #[default]
    Strict,
    /// Record the failure and keep going.
    RecordAndContinue,
}

/// The parties' mode choices for one round.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RoundPlan {
    BobCheck,
    BobControl,
    CharlieDecoy(DecoyState),
    Message,
}

impl RoundPlan {
    pub fn sample<R: Rng + ?Sized>(schedule: &SchedulePolicy, rng: &mut R) -> Self {
        if rng.random_bool(schedule.p_ab_check) {
            RoundPlan::BobCheck
        } else if rng.random_bool(schedule.p_bob_cm) {
            RoundPlan::BobControl
        } else if rng.random_bool(schedule.p_charlie_cm) {
            RoundPlan::CharlieDecoy(schedule.check_basis.sample_decoy(rng))
        } else {
            RoundPlan::Message
        }
    }
}

/// Alice's public pair `(x, y)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Announcement {
    pub x: Bit,
    pub y: Bit,
}

impl Announcement {
    pub fn parity(self) -> Bit {
        self.x ^ self.y
    }
}

impl fmt::Display for Announcement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.x, self.y)
    }
}

/// Everything one round produced.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: usize,
    pub kind: RoundKind,
    pub message_index: Option<usize>,
    pub alice_bit: Option<Bit>,
    pub bob_bit: Option<Bit>,
    pub charlie_bit: Option<Bit>,
    pub bell_outcome: Option<BellLabel>,
    pub announcement: Option<Announcement>,
    pub check_passed: Option<bool>,
    pub check_basis: Option<Basis>,
    pub decoy: Option<DecoyState>,
    pub attack_touched: Vec<ChannelSegment>,
}

impl RoundRecord {
    fn new(round: usize, kind: RoundKind, attack_touched: Vec<ChannelSegment>) -> Self {
        RoundRecord {
            round,
            kind,
            message_index: None,
            alice_bit: None,
            bob_bit: None,
            charlie_bit: None,
            bell_outcome: None,
            announcement: None,
            check_passed: None,
            check_basis: None,
            decoy: None,
            attack_touched,
        }
    }
}

/// Classical messages, in the order they were sent. Nothing quantum appears
/// here and Eve may read all of it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum TranscriptEvent {
    /// A party confirms it received a qubit.
    Receipt { round: usize, party: Party },
    ModeAnnouncement { round: usize, party: Party, mode: RunningMode },
    /// A checker discloses basis and outcome.
    CheckDisclosure {
        round: usize,
        party: Party,
        basis: Basis,
        outcome: Bit,
    },
    DecoyReveal { round: usize, state: DecoyState },
    CheckVerdict { round: usize, kind: RoundKind, passed: bool },
    Announcement {
        round: usize,
        message_index: usize,
        x: Bit,
        y: Bit,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PublicTranscript {
    events: Vec<TranscriptEvent>,
}

impl PublicTranscript {
    pub fn push(&mut self, event: TranscriptEvent) {
        self.events.push(event);
    }

    pub fn extend(&mut self, events: impl IntoIterator<Item = TranscriptEvent>) {
        self.events.extend(events);
    }

    pub fn events(&self) -> &[TranscriptEvent] {
        &self.events
    }

    /// `(message_index, announcement)` in message order.
    pub fn announcements(&self) -> impl Iterator<Item = (usize, Announcement)> + '_ {
        self.events.iter().filter_map(|e| match *e {
            TranscriptEvent::Announcement { message_index, x, y, .. } => Some((message_index, Announcement { x, y })),
            _ => None,
        })
    }
}

/// Bob's message-mode operator: `I` for 0, `X` for 1.
pub fn encode_bob(j: Bit) -> Pauli {
    if j.is_set() {
        Pauli::X
    } else {
        Pauli::I
    }
}

/// Charlie's message-mode operator: `I` for 0, `Z` for 1.
pub fn encode_charlie(k: Bit) -> Pauli {
    if k.is_set() {
        Pauli::Z
    } else {
        Pauli::I
    }
}

/// Alice hides her bit in both halves of the Bell outcome.
pub fn announce(r: Bit, s: Bit, i: Bit) -> Announcement {
    Announcement { x: r ^ i, y: s ^ i }
}

/// Alice recovers `(j, k)`.
pub fn decode_alice(a: Announcement, i: Bit) -> (Bit, Bit) {
    (a.x ^ i, a.y ^ i)
}

/// Bob recovers `(i, k)`.
pub fn decode_bob(a: Announcement, j: Bit) -> (Bit, Bit) {
    (a.x ^ j, a.x ^ a.y ^ j)
}

/// Charlie recovers `(i, j)`.
pub fn decode_charlie(a: Announcement, k: Bit) -> (Bit, Bit) {
    (a.y ^ k, a.x ^ a.y ^ k)
}

/// Result of a two-party correlation check on the pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CheckOutcome {
    pub basis: Basis,
    pub checker_outcome: Bit,
    pub alice_outcome: Bit,
    pub passed: bool,
}

fn run_pair_check<R: Rng + ?Sized>(
    checker: Party,
    kind: RoundKind,
    round: usize,
    state: &JointState,
    bases: CheckBasisPolicy,
    rng: &mut R,
) -> Result<(CheckOutcome, Vec<TranscriptEvent>), QuantumError> {
    let basis = bases.sample(rng);
    let (checker_outcome, collapsed) = state.measure_qubit(Qubit::Transit, basis, rng)?;
    let (alice_outcome, _) = collapsed.measure_qubit(Qubit::Home, basis, rng)?;
    // |Psi_00> is anti-correlated in Z and correlated in X.
    let passed = match basis {
        Basis::Z => checker_outcome != alice_outcome,
        Basis::X => checker_outcome == alice_outcome,
    };
    let events = vec![
        TranscriptEvent::CheckDisclosure {
            round,
            party: checker,
            basis,
            outcome: checker_outcome,
        },
        TranscriptEvent::CheckVerdict { round, kind, passed },
    ];
    Ok((
        CheckOutcome {
            basis,
            checker_outcome,
            alice_outcome,
            passed,
        },
        events,
    ))
}

/// Bob measures the transit qubit in a random basis and discloses it; Alice
/// measures her home qubit in the same basis.
pub fn run_ab_check<R: Rng + ?Sized>(
    round: usize,
    state: &JointState,
    bases: CheckBasisPolicy,
    rng: &mut R,
) -> Result<(CheckOutcome, Vec<TranscriptEvent>), QuantumError> {
    run_pair_check(Party::Bob, RoundKind::BobEavesdropCheck, round, state, bases, rng)
}

/// The same test as [`run_ab_check`], between Charlie and Alice.
pub fn run_ca_check<R: Rng + ?Sized>(
    round: usize,
    state: &JointState,
    bases: CheckBasisPolicy,
    rng: &mut R,
) -> Result<(CheckOutcome, Vec<TranscriptEvent>), QuantumError> {
    run_pair_check(Party::Charlie, RoundKind::BobControlCheck, round, state, bases, rng)
}

/// Alice measures the received decoy in the basis of the revealed state and
/// compares.
pub fn run_decoy_check<R: Rng + ?Sized>(
    decoy: DecoyState,
    received: &JointState,
    rng: &mut R,
) -> Result<bool, QuantumError> {
    let (outcome, _) = received.measure_qubit(Qubit::Transit, decoy.basis(), rng)?;
    Ok(outcome == decoy.outcome())
}

/// Each party's view of the other two messages.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DecodedMessages {
    pub alice_sees_bob: Vec<Bit>,
    pub alice_sees_charlie: Vec<Bit>,
    pub bob_sees_alice: Vec<Bit>,
    pub bob_sees_charlie: Vec<Bit>,
    pub charlie_sees_alice: Vec<Bit>,
    pub charlie_sees_bob: Vec<Bit>,
}

impl DecodedMessages {
    /// Runs every party's decoding rule over the announced pairs.
    pub fn decode(messages: &MessageTriple, announcements: &[Announcement]) -> Self {
        let mut out = DecodedMessages::default();
        for (n, &a) in announcements.iter().enumerate() {
            let (i, j, k) = messages.bits(n);
            let (aj, ak) = decode_alice(a, i);
            let (bi, bk) = decode_bob(a, j);
            let (ci, cj) = decode_charlie(a, k);
            out.alice_sees_bob.push(aj);
            out.alice_sees_charlie.push(ak);
            out.bob_sees_alice.push(bi);
            out.bob_sees_charlie.push(bk);
            out.charlie_sees_alice.push(ci);
            out.charlie_sees_bob.push(cj);
        }
        out
    }

    /// Correctly recovered bits per party as `[alice, bob, charlie]`; each
    /// party recovers `2 * N` bits.
    pub fn correct_counts(&self, truth: &MessageTriple) -> [usize; 3] {
        let hits = |got: &[Bit], want: &[Bit]| got.iter().zip(want).filter(|(a, b)| a == b).count();
        [
            hits(&self.alice_sees_bob, truth.bob()) + hits(&self.alice_sees_charlie, truth.charlie()),
            hits(&self.bob_sees_alice, truth.alice()) + hits(&self.bob_sees_charlie, truth.charlie()),
            hits(&self.charlie_sees_alice, truth.alice()) + hits(&self.charlie_sees_bob, truth.bob()),
        ]
    }

    pub fn is_exact(&self, truth: &MessageTriple) -> bool {
        self.correct_counts(truth).iter().all(|&c| c == 2 * truth.len())
    }
}

/// Everything a run leaves behind, whether or not it completed.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RunLog {
    pub records: Vec<RoundRecord>,
    pub transcript: PublicTranscript,
    pub eve_log: Vec<EveRecord>,
}

impl RunLog {
    pub fn message_rounds(&self) -> impl Iterator<Item = &RoundRecord> {
        self.records.iter().filter(|r| r.kind == RoundKind::MessageRound)
    }

    pub fn checks(&self) -> impl Iterator<Item = &RoundRecord> {
        self.records.iter().filter(|r| r.kind.is_check())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProtocolRun {
    pub log: RunLog,
    pub decoded: DecodedMessages,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ProtocolConfig {
    pub schedule: SchedulePolicy,
    pub attack: AttackModel,
    pub abort_policy: AbortPolicy,
}

/// Runs rounds until all message bits are delivered.
pub fn run_protocol<R: Rng + ?Sized>(
    messages: &MessageTriple,
    config: &ProtocolConfig,
    rng: &mut R,
) -> Result<ProtocolRun, ProtocolError> {
    config.schedule.validate()?;
    let budget = config.schedule.budget(messages.len());
    let mut engine = RoundEngine::new(config.attack.clone(), config.schedule.check_basis);
    let mut announcements = Vec::with_capacity(messages.len());

    while announcements.len() < messages.len() {
        let round = engine.rounds_run();
        if round >= budget {
            return Err(ProtocolError::Exhausted {
                budget,
                delivered: announcements.len(),
                log: Box::new(engine.into_log()),
            });
        }
        let plan = RoundPlan::sample(&config.schedule, rng);
        let n = announcements.len();
        let record = engine.execute(plan, n, messages.bits(n), rng)?;
        if let Some(a) = record.announcement {
            announcements.push(a);
        }
        if record.check_passed == Some(false) && config.abort_policy == AbortPolicy::Strict {
            let kind = record.kind;
            return Err(ProtocolError::Aborted {
                round,
                kind,
                log: Box::new(engine.into_log()),
            });
        }
    }

    let decoded = DecodedMessages::decode(messages, &announcements);
    Ok(ProtocolRun {
        log: engine.into_log(),
        decoded,
    })
}

/// Executes single rounds against a persistent transcript and Eve.
#[derive(Debug, Clone)]
pub struct RoundEngine {
    eve: Eve,
    bases: CheckBasisPolicy,
    records: Vec<RoundRecord>,
    transcript: PublicTranscript,
}

impl RoundEngine {
    pub fn new(attack: AttackModel, bases: CheckBasisPolicy) -> Self {
        RoundEngine {
            eve: Eve::new(attack),
            bases,
            records: Vec::new(),
            transcript: PublicTranscript::default(),
        }
    }

    pub fn rounds_run(&self) -> usize {
        self.records.len()
    }

    pub fn into_log(self) -> RunLog {
        RunLog {
            records: self.records,
            transcript: self.transcript,
            eve_log: self.eve.into_log(),
        }
    }

    /// Plays one round with the given mode choices and the bits
    /// `(i, j, k)` for message index `n`. The record is also kept internally.
    pub fn execute<R: Rng + ?Sized>(
        &mut self,
        plan: RoundPlan,
        n: usize,
        (i, j, k): (Bit, Bit, Bit),
        rng: &mut R,
    ) -> Result<RoundRecord, QuantumError> {
        let round = self.records.len();
        let mut touched = Vec::new();

        // S1: Alice keeps h, sends t to Bob.
        let pair = JointState::bell_state(BellLabel::from_bits(0, 0));
        let pair = self.pass(round, ChannelSegment::AtoB, pair, &mut touched, rng)?;

        // S2: Bob measures, or encodes in control/message mode.
        if plan == RoundPlan::BobCheck {
            let pair = self.eve.read_ancilla(pair, rng)?;
            let (check, events) = run_ab_check(round, &pair, self.bases, rng)?;
            self.transcript.extend(events);
            let mut record = RoundRecord::new(round, RoundKind::BobEavesdropCheck, touched);
            record.check_passed = Some(check.passed);
            record.check_basis = Some(check.basis);
            return Ok(self.keep(record));
        }
        let bob_mode = if plan == RoundPlan::BobControl {
            RunningMode::Control
        } else {
            RunningMode::Message
        };
        let pair = match bob_mode {
            RunningMode::Control => pair,
            RunningMode::Message => pair.apply_pauli_on_transit(encode_bob(j)),
        };
        let pair = self.pass(round, ChannelSegment::BtoC, pair, &mut touched, rng)?;

        // S3: Charlie confirms receipt, Bob announces his mode.
        self.transcript.push(TranscriptEvent::Receipt {
            round,
            party: Party::Charlie,
        });
        self.transcript.push(TranscriptEvent::ModeAnnouncement {
            round,
            party: Party::Bob,
            mode: bob_mode,
        });
        if bob_mode == RunningMode::Control {
            let pair = self.eve.read_ancilla(pair, rng)?;
            let (check, events) = run_ca_check(round, &pair, self.bases, rng)?;
            self.transcript.extend(events);
            let mut record = RoundRecord::new(round, RoundKind::BobControlCheck, touched);
            record.check_passed = Some(check.passed);
            record.check_basis = Some(check.basis);
            return Ok(self.keep(record));
        }

        if let RoundPlan::CharlieDecoy(decoy) = plan {
            // Charlie drops the encoded qubit; j is retried next round.
            self.eve.read_ancilla(pair, rng)?;
            let sent = JointState::decoy(decoy);
            let received = self.pass(round, ChannelSegment::CtoA, sent, &mut touched, rng)?;
            self.transcript.push(TranscriptEvent::Receipt {
                round,
                party: Party::Alice,
            });
            self.transcript.push(TranscriptEvent::ModeAnnouncement {
                round,
                party: Party::Charlie,
                mode: RunningMode::Control,
            });
            self.transcript.push(TranscriptEvent::DecoyReveal { round, state: decoy });
            let received = self.eve.read_ancilla(received, rng)?;
            let passed = run_decoy_check(decoy, &received, rng)?;
            self.transcript.push(TranscriptEvent::CheckVerdict {
                round,
                kind: RoundKind::CharlieDecoyCheck,
                passed,
            });
            let mut record = RoundRecord::new(round, RoundKind::CharlieDecoyCheck, touched);
            record.bob_bit = Some(j);
            record.check_passed = Some(passed);
            record.check_basis = Some(decoy.basis());
            record.decoy = Some(decoy);
            return Ok(self.keep(record));
        }

        let pair = pair.apply_pauli_on_transit(encode_charlie(k));
        let pair = self.pass(round, ChannelSegment::CtoA, pair, &mut touched, rng)?;
        // S4: Alice confirms, Charlie announces message mode.
        self.transcript.push(TranscriptEvent::Receipt {
            round,
            party: Party::Alice,
        });
        self.transcript.push(TranscriptEvent::ModeAnnouncement {
            round,
            party: Party::Charlie,
            mode: RunningMode::Message,
        });
        let pair = self.eve.read_ancilla(pair, rng)?;
        let (outcome, _) = pair.bell_measure(rng)?;
        let announcement = announce(outcome.r, outcome.s, i);
        self.transcript.push(TranscriptEvent::Announcement {
            round,
            message_index: n,
            x: announcement.x,
            y: announcement.y,
        });
        if !touched.is_empty() {
            self.eve.note_announcement(round, announcement.parity());
        }
        let mut record = RoundRecord::new(round, RoundKind::MessageRound, touched);
        record.message_index = Some(n);
        record.alice_bit = Some(i);
        record.bob_bit = Some(j);
        record.charlie_bit = Some(k);
        record.bell_outcome = Some(outcome);
        record.announcement = Some(announcement);
        Ok(self.keep(record))
    }

    fn pass<R: Rng + ?Sized>(
        &mut self,
        round: usize,
        segment: ChannelSegment,
        state: JointState,
        touched: &mut Vec<ChannelSegment>,
        rng: &mut R,
    ) -> Result<JointState, QuantumError> {
        let (state, acted) = self.eve.intercept(round, segment, state, rng)?;
        if acted {
            touched.push(segment);
        }
        Ok(state)
    }

    fn keep(&mut self, record: RoundRecord) -> RoundRecord {
        self.records.push(record.clone());
        record
    }
}
