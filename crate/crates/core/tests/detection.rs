//! Detection probabilities: brute-force branch enumeration against the
//! closed form, and Monte Carlo against both.

use num_complex::Complex64;
use qsdc_core::adversary::{analytic_detection_probability, AttackKind};
use qsdc_core::harness::{fit_survival, run_experiment, run_until_checks, survival_curve, ExperimentConfig};
use qsdc_core::{AbortPolicy, AttackModel, ChannelSegment, DisturbancePauli, RoundKind, SchedulePolicy};

type C = Complex64;

/// Minimal dense simulator, independent of `qsdc_core::quantum`. Qubit 0 is
/// the most significant bit.
#[derive(Clone, Debug)]
struct Dense {
    n: usize,
    amps: Vec<C>,
}

const H: f64 = std::f64::consts::FRAC_1_SQRT_2;

impl Dense {
    fn psi00() -> Self {
        Dense {
            n: 2,
            amps: vec![C::new(0.0, 0.0), C::new(H, 0.0), C::new(H, 0.0), C::new(0.0, 0.0)],
        }
    }

    fn single(v: [C; 2]) -> Self {
        Dense { n: 1, amps: v.to_vec() }
    }

    fn bit(&self, index: usize, q: usize) -> usize {
        (index >> (self.n - 1 - q)) & 1
    }

    fn pauli(&self, q: usize, flip: bool, phase: bool) -> Dense {
        let mut out = vec![C::new(0.0, 0.0); self.amps.len()];
        for (i, &a) in self.amps.iter().enumerate() {
            let b = self.bit(i, q);
            let sign = if phase && b == 1 { -1.0 } else { 1.0 };
            let j = if flip { i ^ (1 << (self.n - 1 - q)) } else { i };
            out[j] += a * sign;
        }
        Dense { n: self.n, amps: out }
    }

    /// Appends an ancilla and applies `|t>|0> -> alpha|t>|0> + beta|t^1>|1>`.
    fn entangle(&self, q: usize, alpha: C, beta: C) -> Dense {
        let n = self.n + 1;
        let mut out = vec![C::new(0.0, 0.0); 1 << n];
        for (i, &a) in self.amps.iter().enumerate() {
            out[i << 1] += alpha * a;
            let flipped = i ^ (1 << (self.n - 1 - q));
            out[(flipped << 1) | 1] += beta * a;
        }
        Dense { n, amps: out }
    }

    fn eigen(basis_x: bool, outcome: usize) -> [C; 2] {
        match (basis_x, outcome) {
            (false, 0) => [C::new(1.0, 0.0), C::new(0.0, 0.0)],
            (false, _) => [C::new(0.0, 0.0), C::new(1.0, 0.0)],
            (true, 0) => [C::new(H, 0.0), C::new(H, 0.0)],
            (true, _) => [C::new(H, 0.0), C::new(-H, 0.0)],
        }
    }

    /// Projects qubit `q` onto an eigenvector; returns probability and the
    /// normalized post-measurement state.
    fn project(&self, q: usize, basis_x: bool, outcome: usize) -> (f64, Dense) {
        let e = Dense::eigen(basis_x, outcome);
        let mask = 1 << (self.n - 1 - q);
        let mut out = vec![C::new(0.0, 0.0); self.amps.len()];
        let mut p = 0.0;
        for lo in (0..self.amps.len()).filter(|i| i & mask == 0) {
            let c = e[0].conj() * self.amps[lo] + e[1].conj() * self.amps[lo | mask];
            p += c.norm_sqr();
            out[lo] = e[0] * c;
            out[lo | mask] = e[1] * c;
        }
        if p > 0.0 {
            for a in &mut out {
                *a /= p.sqrt();
            }
        }
        (p, Dense { n: self.n, amps: out })
    }
}

/// Every branch Eve's action can produce on qubit `q`, with weights.
fn eve_branches(kind: AttackKind, state: &Dense, q: usize) -> Vec<(f64, Dense)> {
    match kind {
        AttackKind::None => vec![(1.0, state.clone())],
        AttackKind::Disturbance(DisturbancePauli::X) => vec![(1.0, state.pauli(q, true, false))],
        AttackKind::Disturbance(DisturbancePauli::Z) => vec![(1.0, state.pauli(q, false, true))],
        AttackKind::EntangleMeasure { alpha, beta } => vec![(1.0, state.entangle(q, alpha, beta))],
        AttackKind::InterceptResend => {
            let mut out = Vec::new();
            for basis_x in [false, true] {
                for o in 0..2 {
                    let (p, post) = state.project(q, basis_x, o);
                    if p > 1e-15 {
                        // The forwarded fresh eigenstate equals the collapsed qubit.
                        out.push((0.5 * p, post));
                    }
                }
            }
            out
        }
    }
}

fn pair_check_failure(state: &Dense, transit: usize, home: usize) -> f64 {
    let mut fail = 0.0;
    for basis_x in [false, true] {
        for ot in 0..2 {
            let (pt, post) = state.project(transit, basis_x, ot);
            for oh in 0..2 {
                let (ph, _) = post.project(home, basis_x, oh);
                let passed = if basis_x { ot == oh } else { ot != oh };
                if !passed {
                    fail += 0.5 * pt * ph;
                }
            }
        }
    }
    fail
}

/// Exact detection probability by enumerating every random choice.
fn enumerate_detection(model: &AttackModel, check: RoundKind) -> f64 {
    let kind = model.kind();
    let hits = |seg| model.segments().contains(&seg);
    let through = |branches: Vec<(f64, Dense)>, seg| -> Vec<(f64, Dense)> {
        if !hits(seg) {
            return branches;
        }
        branches
            .into_iter()
            .flat_map(|(w, s)| eve_branches(kind, &s, 1).into_iter().map(move |(w2, s2)| (w * w2, s2)))
            .collect()
    };
    match check {
        RoundKind::BobEavesdropCheck => through(vec![(1.0, Dense::psi00())], ChannelSegment::AtoB)
            .iter()
            .map(|(w, s)| w * pair_check_failure(s, 1, 0))
            .sum(),
        RoundKind::BobControlCheck => {
            let b = through(vec![(1.0, Dense::psi00())], ChannelSegment::AtoB);
            through(b, ChannelSegment::BtoC)
                .iter()
                .map(|(w, s)| w * pair_check_failure(s, 1, 0))
                .sum()
        }
        RoundKind::CharlieDecoyCheck => {
            let mut fail = 0.0;
            for basis_x in [false, true] {
                for expected in 0..2 {
                    let decoy = Dense::single(Dense::eigen(basis_x, expected));
                    let decoy_q = 0;
                    let branches = if hits(ChannelSegment::CtoA) {
                        eve_branches(kind, &decoy, decoy_q)
                    } else {
                        vec![(1.0, decoy)]
                    };
                    for (w, s) in branches {
                        let (p_wrong, _) = s.project(decoy_q, basis_x, 1 - expected);
                        fail += 0.25 * w * p_wrong;
                    }
                }
            }
            fail
        }
        RoundKind::MessageRound => unreachable!(),
    }
}

fn attack_zoo() -> Vec<AttackModel> {
    let segment_sets: Vec<Vec<ChannelSegment>> = vec![
        vec![ChannelSegment::AtoB],
        vec![ChannelSegment::BtoC],
        vec![ChannelSegment::CtoA],
        ChannelSegment::ALL.to_vec(),
    ];
    let mut zoo = Vec::new();
    for segs in segment_sets {
        zoo.push(AttackModel::intercept_resend(segs.clone()).unwrap());
        zoo.push(AttackModel::disturbance(DisturbancePauli::X, segs.clone()).unwrap());
        zoo.push(AttackModel::disturbance(DisturbancePauli::Z, segs.clone()).unwrap());
        zoo.push(AttackModel::entangle_measure_beta_sq(0.3, segs.clone()).unwrap());
        zoo.push(AttackModel::entangle_measure(C::new(0.0, 0.6), C::new(0.48, 0.64), segs).unwrap());
    }
    zoo
}

#[test]
fn closed_form_matches_enumeration() {
    for model in attack_zoo() {
        for check in RoundKind::CHECKS {
            let exact = enumerate_detection(&model, check);
            let closed = analytic_detection_probability(&model, check).unwrap();
            assert!(
                (exact - closed).abs() < 1e-12,
                "{model} / {check}: enumeration {exact} vs closed form {closed}"
            );
        }
    }
}

#[test]
fn enumeration_reproduces_headline_values() {
    let ab = RoundKind::BobEavesdropCheck;
    let ir = AttackModel::intercept_resend([ChannelSegment::AtoB]).unwrap();
    assert!((enumerate_detection(&ir, ab) - 0.25).abs() < 1e-12);
    let dx = AttackModel::disturbance(DisturbancePauli::X, [ChannelSegment::AtoB]).unwrap();
    assert!((enumerate_detection(&dx, ab) - 0.5).abs() < 1e-12);
    for beta_sq in [0.0, 0.25, 0.5, 0.75, 1.0] {
        let em = AttackModel::entangle_measure_beta_sq(beta_sq, ChannelSegment::ALL).unwrap();
        assert!((enumerate_detection(&em, ab) - beta_sq / 2.0).abs() < 1e-12);
        assert!((enumerate_detection(&em, RoundKind::CharlieDecoyCheck) - beta_sq / 2.0).abs() < 1e-12);
    }
}

fn balanced_schedule() -> SchedulePolicy {
    SchedulePolicy {
        p_ab_check: 0.3,
        p_bob_cm: 0.4,
        p_charlie_cm: 0.6,
        ..SchedulePolicy::default()
    }
}

#[test]
fn monte_carlo_within_four_standard_errors() {
    for (index, model) in attack_zoo().into_iter().enumerate() {
        let config = ExperimentConfig {
            message_length: 128,
            trials: 16,
            schedule: balanced_schedule(),
            attack: model.clone(),
            abort_policy: AbortPolicy::RecordAndContinue,
            seed: 1000 + index as u64,
        };
        // The decoy check is the rarest kind under this schedule.
        let mut report = run_until_checks(&config, RoundKind::CharlieDecoyCheck, 10_000).unwrap();
        for kind in [RoundKind::BobEavesdropCheck, RoundKind::BobControlCheck] {
            if report.detection.check(kind).checks_run < 10_000 {
                report = run_until_checks(&config, kind, 10_000).unwrap();
            }
        }
        for stats in &report.detection.checks {
            assert!(stats.checks_run >= 10_000, "{model}: {stats:?}");
            assert_eq!(stats.within_tolerance, Some(true), "{model}: {stats:?}");
            let exact = enumerate_detection(&model, stats.kind);
            let sampled = stats.checks_failed as f64 / stats.checks_run as f64;
            let se = (exact * (1.0 - exact) / stats.checks_run as f64).sqrt();
            assert!((sampled - exact).abs() <= 4.0 * se + 1e-12, "{model}: {stats:?}");
        }
    }
}

#[test]
fn x_family_decoys_blind_entangle_measure() {
    for beta_sq in [0.25, 1.0] {
        let config = ExperimentConfig {
            message_length: 64,
            trials: 16,
            schedule: SchedulePolicy {
                p_ab_check: 0.0,
                p_bob_cm: 0.0,
                p_charlie_cm: 0.7,
                ..SchedulePolicy::default()
            },
            attack: AttackModel::entangle_measure_beta_sq(beta_sq, [ChannelSegment::CtoA]).unwrap(),
            abort_policy: AbortPolicy::RecordAndContinue,
            seed: 5,
        };
        let report = run_until_checks(&config, RoundKind::CharlieDecoyCheck, 4_000).unwrap();
        for decoy in [qsdc_core::DecoyState::Plus, qsdc_core::DecoyState::Minus] {
            let d = report.detection.decoy(decoy);
            assert!(d.checks_run > 500);
            assert_eq!(d.checks_failed, 0);
        }
        for decoy in [qsdc_core::DecoyState::Zero, qsdc_core::DecoyState::One] {
            let d = report.detection.decoy(decoy);
            let p = d.checks_failed as f64 / d.checks_run as f64;
            let se = (beta_sq * (1.0 - beta_sq) / d.checks_run as f64).sqrt();
            assert!((p - beta_sq).abs() <= 4.0 * se + 1e-12, "{decoy:?}: {p}");
        }
    }
}

#[test]
fn identity_entangle_attack_is_invisible() {
    let config = ExperimentConfig {
        message_length: 128,
        trials: 20,
        attack: AttackModel::entangle_measure_beta_sq(0.0, ChannelSegment::ALL).unwrap(),
        abort_policy: AbortPolicy::Strict,
        seed: 8,
        ..ExperimentConfig::default()
    };
    let report = run_experiment(&config).unwrap();
    assert_eq!(report.completed_trials, 20);
    assert_eq!(report.detection.total_failed(), 0);
    assert!(report.fidelity.unwrap().is_perfect());
}

#[test]
fn strict_disturbance_run_aborts() {
    // One A->B check detects with probability 1/2, so 50 checks leave well
    // under (3/4)^50 chance of escaping.
    let config = ExperimentConfig {
        message_length: 100,
        trials: 200,
        schedule: SchedulePolicy {
            p_ab_check: 0.5,
            ..SchedulePolicy::default()
        },
        attack: AttackModel::disturbance(DisturbancePauli::X, [ChannelSegment::AtoB]).unwrap(),
        abort_policy: AbortPolicy::Strict,
        seed: 21,
    };
    let report = run_experiment(&config).unwrap();
    assert_eq!(report.aborts.len(), 200);
    assert_eq!(report.completed_trials, 0);
    assert!(report.fidelity.is_none());
}

#[test]
fn survival_decays_geometrically() {
    // Per delivered bit, the run survives with probability
    // m / (m + (a + c) d): m = message-round rate, a and c the rates of the
    // two pair checks, d their per-check detection probability.
    let beta_sq = 0.25;
    let schedule = SchedulePolicy::default();
    let a = schedule.p_ab_check;
    let c = (1.0 - a) * schedule.p_bob_cm;
    let m = (1.0 - a) * (1.0 - schedule.p_bob_cm) * (1.0 - schedule.p_charlie_cm);
    let d = beta_sq / 2.0;
    let per_bit = m / (m + (a + c) * d);

    let config = ExperimentConfig {
        trials: 4000,
        schedule,
        attack: AttackModel::entangle_measure_beta_sq(beta_sq, [ChannelSegment::AtoB]).unwrap(),
        seed: 77,
        ..ExperimentConfig::default()
    };
    let points = survival_curve(&config, &[1, 2, 4, 8, 16]).unwrap();
    for w in points.windows(2) {
        assert!(w[1].completion_rate < w[0].completion_rate, "{points:?}");
    }
    let fit = fit_survival(&points).unwrap();
    assert!(fit.r_squared > 0.99, "{fit:?}");
    assert!((fit.slope - per_bit.ln()).abs() < 0.01, "{fit:?} vs {}", per_bit.ln());
}
