use num_complex::Complex64;
use proptest::prelude::*;
use qsdc_core::protocol::{
    announce, decode_alice, decode_bob, decode_charlie, encode_bob, encode_charlie, ProtocolConfig,
};
use qsdc_core::quantum::NORM_TOLERANCE;
use qsdc_core::rng::seeded_stream;
use qsdc_core::{
    run_protocol, AbortPolicy, AttackModel, Basis, BellLabel, Bit, ChannelSegment, DecoyState, DisturbancePauli,
    JointState, MessageTriple, Pauli, Qubit, RoundKind, SchedulePolicy,
};

fn bit() -> impl Strategy<Value = Bit> {
    any::<bool>().prop_map(Bit::new)
}

fn pauli() -> impl Strategy<Value = Pauli> {
    prop_oneof![Just(Pauli::I), Just(Pauli::X), Just(Pauli::Z)]
}

fn basis() -> impl Strategy<Value = Basis> {
    prop_oneof![Just(Basis::Z), Just(Basis::X)]
}

/// `(alpha, beta)` with `|alpha|^2 + |beta|^2 = 1` and arbitrary phases.
fn coefficients() -> impl Strategy<Value = (Complex64, Complex64)> {
    (0.0..=1.0f64, 0.0..std::f64::consts::TAU, 0.0..std::f64::consts::TAU).prop_map(|(w, pa, pb)| {
        (
            Complex64::from_polar((1.0 - w).sqrt(), pa),
            Complex64::from_polar(w.sqrt(), pb),
        )
    })
}

fn segments() -> impl Strategy<Value = Vec<ChannelSegment>> {
    proptest::sample::subsequence(ChannelSegment::ALL.to_vec(), 1..=3)
}

fn attack() -> impl Strategy<Value = AttackModel> {
    (0..4u8, segments(), coefficients()).prop_map(|(which, segs, (a, b))| match which {
        0 => AttackModel::intercept_resend(segs).unwrap(),
        1 => AttackModel::disturbance(DisturbancePauli::X, segs).unwrap(),
        2 => AttackModel::disturbance(DisturbancePauli::Z, segs).unwrap(),
        _ => AttackModel::entangle_measure(a, b, segs).unwrap(),
    })
}

#[derive(Debug, Clone)]
enum Op {
    Pauli(Qubit, Pauli),
    Measure(Qubit, Basis),
    Entangle(Complex64, Complex64),
    ReadAncilla,
}

fn op() -> impl Strategy<Value = Op> {
    prop_oneof![
        (prop_oneof![Just(Qubit::Home), Just(Qubit::Transit)], pauli()).prop_map(|(q, p)| Op::Pauli(q, p)),
        (prop_oneof![Just(Qubit::Home), Just(Qubit::Transit)], basis()).prop_map(|(q, b)| Op::Measure(q, b)),
        coefficients().prop_map(|(a, b)| Op::Entangle(a, b)),
        Just(Op::ReadAncilla),
    ]
}

proptest! {
    #[test]
    fn operations_preserve_norm(
        start in 0..6usize,
        ops in proptest::collection::vec(op(), 0..12),
        seed in any::<u64>(),
    ) {
        let mut rng = seeded_stream(seed);
        let mut state = match start {
            0..=3 => JointState::bell_state(BellLabel::all()[start]),
            4 => JointState::decoy(DecoyState::Plus),
            _ => JointState::decoy(DecoyState::One),
        };
        for op in ops {
            let next = match op {
                Op::Pauli(q, p) => state.apply_pauli(q, p),
                Op::Measure(q, b) => state.measure_qubit(q, b, &mut rng).map(|(_, s)| s),
                Op::Entangle(a, b) => state.attach_ancilla_and_entangle(a, b),
                Op::ReadAncilla => state.measure_ancilla(&mut rng).map(|(_, s)| s),
            };
            if let Ok(next) = next {
                state = next;
            }
            prop_assert!((state.norm_sqr() - 1.0).abs() <= NORM_TOLERANCE);
            prop_assert_eq!(state.amplitudes().len(), state.layout().dimension());
            let expected_len = match (state.has_home(), state.has_ancilla()) {
                (true, false) => 4,
                (true, true) => 8,
                (false, false) => 2,
                (false, true) => 4,
            };
            prop_assert_eq!(state.amplitudes().len(), expected_len);
        }
    }

    #[test]
    fn encoding_identity(j in bit(), k in bit(), seed in any::<u64>()) {
        let state = JointState::bell_state(BellLabel::from_bits(0, 0))
            .apply_pauli_on_transit(encode_bob(j))
            .apply_pauli_on_transit(encode_charlie(k));
        let probs = state.bell_probabilities().unwrap();
        let target = BellLabel::all().iter().position(|&l| l == BellLabel::new(j, k)).unwrap();
        prop_assert!((probs[target] - 1.0).abs() < 1e-12);
        let (label, _) = state.bell_measure(&mut seeded_stream(seed)).unwrap();
        prop_assert_eq!(label, BellLabel::new(j, k));
    }

    #[test]
    fn psi00_check_correlations(seed in any::<u64>()) {
        let mut rng = seeded_stream(seed);
        let psi = JointState::bell_state(BellLabel::from_bits(0, 0));
        let (t, post) = psi.measure_qubit(Qubit::Transit, Basis::Z, &mut rng).unwrap();
        let (h, _) = post.measure_qubit(Qubit::Home, Basis::Z, &mut rng).unwrap();
        prop_assert_ne!(t, h);
        let (t, post) = psi.measure_qubit(Qubit::Transit, Basis::X, &mut rng).unwrap();
        let (h, _) = post.measure_qubit(Qubit::Home, Basis::X, &mut rng).unwrap();
        prop_assert_eq!(t, h);
    }

    #[test]
    fn x_family_decoys_survive_entangling(
        (a, b) in coefficients(),
        minus in any::<bool>(),
        seed in any::<u64>(),
    ) {
        let decoy = if minus { DecoyState::Minus } else { DecoyState::Plus };
        let attacked = JointState::decoy(decoy).attach_ancilla_and_entangle(a, b).unwrap();
        let probs = attacked.outcome_probabilities(Qubit::Transit, Basis::X).unwrap();
        prop_assert!((probs[usize::from(decoy.outcome())] - 1.0).abs() < 1e-12);
        let (o, _) = attacked.measure_qubit(Qubit::Transit, Basis::X, &mut seeded_stream(seed)).unwrap();
        prop_assert_eq!(o, decoy.outcome());
    }

    #[test]
    fn transit_marginal_is_maximally_mixed(
        r in bit(), s in bit(), b in basis(),
    ) {
        let probs = JointState::bell_state(BellLabel::new(r, s))
            .outcome_probabilities(Qubit::Transit, b)
            .unwrap();
        prop_assert!((probs[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn decode_round_trip(i in bit(), j in bit(), k in bit()) {
        let a = announce(j, k, i);
        prop_assert_eq!(a.x ^ a.y, j ^ k);
        prop_assert_eq!(decode_alice(a, i), (j, k));
        prop_assert_eq!(decode_bob(a, j), (i, k));
        prop_assert_eq!(decode_charlie(a, k), (i, j));
    }

    #[test]
    fn json_round_trip_of_states(start in 0..4usize, (a, b) in coefficients()) {
        let state = JointState::bell_state(BellLabel::all()[start]).attach_ancilla_and_entangle(a, b).unwrap();
        let text = serde_json::to_string(&state).unwrap();
        let back: JointState = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(back, state);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Record invariants of full runs, attacked or not.
    #[test]
    fn run_invariants(
        attack in prop_oneof![Just(AttackModel::none()), attack()],
        n in 1..24usize,
        seed in any::<u64>(),
    ) {
        let mut rng = seeded_stream(seed);
        let messages = MessageTriple::random(n, &mut rng).unwrap();
        let config = ProtocolConfig {
            schedule: SchedulePolicy::default(),
            attack: attack.clone(),
            abort_policy: AbortPolicy::RecordAndContinue,
        };
        let run = run_protocol(&messages, &config, &mut rng).unwrap();
        let log = &run.log;

        // Message-index conservation: indices 0..n, each once, in order.
        let indices: Vec<usize> = log.message_rounds().map(|r| r.message_index.unwrap()).collect();
        prop_assert_eq!(indices, (0..n).collect::<Vec<_>>());
        prop_assert_eq!(log.transcript.announcements().count(), n);

        for record in &log.records {
            match record.kind {
                RoundKind::MessageRound => {
                    prop_assert!(record.bell_outcome.is_some() && record.announcement.is_some());
                    prop_assert!(record.check_passed.is_none());
                    let (i, j, k) = messages.bits(record.message_index.unwrap());
                    let bell = record.bell_outcome.unwrap();
                    let a = record.announcement.unwrap();
                    prop_assert_eq!(a, announce(bell.r, bell.s, i));
                    if bell == BellLabel::new(j, k) {
                        prop_assert_eq!(a.x ^ a.y, j ^ k);
                    }
                    if record.attack_touched.is_empty() {
                        prop_assert_eq!(bell, BellLabel::new(j, k));
                    }
                    let agree = decode_bob(a, j).0 == decode_charlie(a, k).0;
                    prop_assert_eq!(agree, a.x ^ a.y == j ^ k);
                }
                _ => {
                    prop_assert!(record.check_passed.is_some());
                    prop_assert!(record.announcement.is_none());
                    prop_assert!(record.message_index.is_none());
                    if record.attack_touched.is_empty() {
                        prop_assert_eq!(record.check_passed, Some(true));
                    }
                }
            }
            if attack.is_none() {
                prop_assert!(record.attack_touched.is_empty());
            }
        }
        prop_assert!(log.eve_log.iter().all(|e| attack.covers(e.segment)));
        if attack.is_none() {
            prop_assert!(run.decoded.is_exact(&messages));
            prop_assert!(log.eve_log.is_empty());
        }
    }
}
