//! Exact state-vector model of one protocol round.
//!
//! A round involves at most three two-level systems, always in the order
//! home, transit, ancilla. The transit qubit is always present; the home
//! qubit is absent for lone decoy qubits and the ancilla only exists after an
//! entangling attack. Amplitudes are stored lexicographically with the first
//! present qubit as the most significant bit and `|0>` before `|1>`.
//!
//! Operations never mutate in place: each returns a new [`JointState`].

use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bit::Bit;

/// Maximum allowed deviation of the squared norm from 1.
pub const NORM_TOLERANCE: f64 = 1e-12;
/// Absolute tolerance for amplitude comparisons.
pub const AMPLITUDE_TOLERANCE: f64 = 1e-9;
/// Tolerance on `|alpha|^2 + |beta|^2 = 1` for the entangling attack.
pub const COEFFICIENT_TOLERANCE: f64 = 1e-9;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const HALF_ROOT: Complex64 = Complex64::new(FRAC_1_SQRT_2, 0.0);

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QuantumError {
    #[error("state has no {0} qubit")]
    MissingQubit(Qubit),
    #[error("Bell measurement needs exactly the home and transit qubits (resolve the ancilla first)")]
    BellMeasurementUnavailable,
    #[error("state already carries an ancilla")]
    AncillaAlreadyAttached,
    #[error("|alpha|^2 + |beta|^2 = {0}, expected 1")]
    UnnormalizedCoefficients(f64),
    #[error("expected {expected} amplitudes, got {actual}")]
    WrongDimension { expected: usize, actual: usize },
    #[error("squared norm is {0}, expected 1")]
    NotNormalized(f64),
}

/// Names the physical subsystems of a round.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Qubit {
    Home,
    Transit,
    Ancilla,
}

impl fmt::Display for Qubit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Qubit::Home => "home",
            Qubit::Transit => "transit",
            Qubit::Ancilla => "ancilla",
        })
    }
}

/// Measurement basis. Outcome `0` always names the first eigenstate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Basis {
    /// `{|0>, |1>}`
    Z,
    /// `{|+>, |->}`
    X,
}

impl Basis {
    pub const ALL: [Basis; 2] = [Basis::Z, Basis::X];

    /// Eigenvector for `outcome` in the computational basis.
    pub fn eigenstate(self, outcome: Bit) -> [Complex64; 2] {
        match (self, outcome.is_set()) {
            (Basis::Z, false) => [ONE, ZERO],
            (Basis::Z, true) => [ZERO, ONE],
            (Basis::X, false) => [HALF_ROOT, HALF_ROOT],
            (Basis::X, true) => [HALF_ROOT, -HALF_ROOT],
        }
    }
}

impl fmt::Display for Basis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Basis::Z => "Z",
            Basis::X => "X",
        })
    }
}

/// Single-qubit operators used for encoding and for the disturbance attack.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Pauli {
    I,
    X,
    Z,
}

impl Pauli {
    fn matrix(self) -> [[Complex64; 2]; 2] {
        match self {
            Pauli::I => [[ONE, ZERO], [ZERO, ONE]],
            Pauli::X => [[ZERO, ONE], [ONE, ZERO]],
            Pauli::Z => [[ONE, ZERO], [ZERO, -ONE]],
        }
    }
}

impl fmt::Display for Pauli {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Pauli::I => "I",
            Pauli::X => "X",
            Pauli::Z => "Z",
        })
    }
}

/// Label `(r, s)` of the Bell state `|Psi_rs>`: `r` is the bit-flip index and
/// `s` the phase-flip index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BellLabel {
    pub r: Bit,
    pub s: Bit,
}

impl BellLabel {
    pub const fn new(r: Bit, s: Bit) -> Self {
        BellLabel { r, s }
    }

    pub fn from_bits(r: u8, s: u8) -> Self {
        BellLabel {
            r: Bit::new(r != 0),
            s: Bit::new(s != 0),
        }
    }

    /// All four labels in `(r, s)` lexicographic order.
    pub fn all() -> [BellLabel; 4] {
        [
            BellLabel::from_bits(0, 0),
            BellLabel::from_bits(0, 1),
            BellLabel::from_bits(1, 0),
            BellLabel::from_bits(1, 1),
        ]
    }

    fn index(self) -> usize {
        2 * usize::from(self.r) + usize::from(self.s)
    }
}

impl fmt::Display for BellLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.r, self.s)
    }
}

/// The four single-qubit decoy preparations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DecoyState {
    Zero,
    One,
    Plus,
    Minus,
}

impl DecoyState {
    pub const ALL: [DecoyState; 4] = [
        DecoyState::Zero,
        DecoyState::One,
        DecoyState::Plus,
        DecoyState::Minus,
    ];

    /// The basis this state is an eigenstate of.
    pub fn basis(self) -> Basis {
        match self {
            DecoyState::Zero | DecoyState::One => Basis::Z,
            DecoyState::Plus | DecoyState::Minus => Basis::X,
        }
    }

    /// The measurement outcome this state yields in [`DecoyState::basis`].
    pub fn outcome(self) -> Bit {
        match self {
            DecoyState::Zero | DecoyState::Plus => Bit::ZERO,
            DecoyState::One | DecoyState::Minus => Bit::ONE,
        }
    }

    pub fn from_eigenstate(basis: Basis, outcome: Bit) -> Self {
        match (basis, outcome.is_set()) {
            (Basis::Z, false) => DecoyState::Zero,
            (Basis::Z, true) => DecoyState::One,
            (Basis::X, false) => DecoyState::Plus,
            (Basis::X, true) => DecoyState::Minus,
        }
    }

    pub fn amplitudes(self) -> [Complex64; 2] {
        self.basis().eigenstate(self.outcome())
    }
}

impl fmt::Display for DecoyState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DecoyState::Zero => "|0>",
            DecoyState::One => "|1>",
            DecoyState::Plus => "|+>",
            DecoyState::Minus => "|->",
        })
    }
}

/// Which subsystems a [`JointState`] carries. The transit qubit is always
/// present.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Layout {
    pub home: bool,
    pub ancilla: bool,
}

impl Layout {
    pub const PAIR: Layout = Layout {
        home: true,
        ancilla: false,
    };
    pub const LONE: Layout = Layout {
        home: false,
        ancilla: false,
    };

    pub fn qubits(self) -> Vec<Qubit> {
        let mut out = Vec::with_capacity(3);
        if self.home {
            out.push(Qubit::Home);
        }
        out.push(Qubit::Transit);
        if self.ancilla {
            out.push(Qubit::Ancilla);
        }
        out
    }

    pub fn num_qubits(self) -> usize {
        1 + self.home as usize + self.ancilla as usize
    }

    pub fn dimension(self) -> usize {
        1 << self.num_qubits()
    }

    /// Bit mask selecting `qubit` inside an amplitude index.
    fn mask(self, qubit: Qubit) -> Result<usize, QuantumError> {
        let qubits = self.qubits();
        let position = qubits
            .iter()
            .position(|&q| q == qubit)
            .ok_or(QuantumError::MissingQubit(qubit))?;
        Ok(1 << (qubits.len() - 1 - position))
    }
}

/// Complex amplitude vector over the subsystems named by its [`Layout`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointState {
    amplitudes: Vec<Complex64>,
    layout: Layout,
}

impl JointState {
    /// Builds a state from raw amplitudes, checking dimension and norm.
    pub fn from_amplitudes(layout: Layout, amplitudes: Vec<Complex64>) -> Result<Self, QuantumError> {
        if amplitudes.len() != layout.dimension() {
            return Err(QuantumError::WrongDimension {
                expected: layout.dimension(),
                actual: amplitudes.len(),
            });
        }
        let state = JointState { amplitudes, layout };
        let norm = state.norm_sqr();
        if (norm - 1.0).abs() > NORM_TOLERANCE {
            return Err(QuantumError::NotNormalized(norm));
        }
        Ok(state)
    }

    /// The Bell state `|Psi_rs>` over (home, transit), using the sign
    /// conventions
    /// `|Psi_00> = (|01> + |10>)/sqrt2`, `|Psi_10> = (|00> + |11>)/sqrt2`,
    /// `|Psi_01> = (|10> - |01>)/sqrt2`, `|Psi_11> = (|00> - |11>)/sqrt2`.
    pub fn bell_state(label: BellLabel) -> Self {
        let amplitudes = match (label.r.is_set(), label.s.is_set()) {
            (false, false) => vec![ZERO, HALF_ROOT, HALF_ROOT, ZERO],
            (true, false) => vec![HALF_ROOT, ZERO, ZERO, HALF_ROOT],
            (false, true) => vec![ZERO, -HALF_ROOT, HALF_ROOT, ZERO],
            (true, true) => vec![HALF_ROOT, ZERO, ZERO, -HALF_ROOT],
        };
        JointState {
            amplitudes,
            layout: Layout::PAIR,
        }
    }

    /// A lone transit qubit prepared in a decoy state.
    pub fn decoy(label: DecoyState) -> Self {
        JointState {
            amplitudes: label.amplitudes().to_vec(),
            layout: Layout::LONE,
        }
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    pub fn has_ancilla(&self) -> bool {
        self.layout.ancilla
    }

    pub fn has_home(&self) -> bool {
        self.layout.home
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    /// `<self|other>`; zero when the layouts differ.
    pub fn inner(&self, other: &JointState) -> Complex64 {
        if self.layout != other.layout {
            return ZERO;
        }
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    /// Amplitude-wise equality within `tol`.
    pub fn approx_eq(&self, other: &JointState, tol: f64) -> bool {
        self.layout == other.layout
            && self
                .amplitudes
                .iter()
                .zip(&other.amplitudes)
                .all(|(a, b)| (a - b).norm() <= tol)
    }

    /// Equality as physical rays, ignoring global phase.
    pub fn same_ray(&self, other: &JointState, tol: f64) -> bool {
        self.layout == other.layout && (1.0 - self.inner(other).norm()).abs() <= tol
    }

    /// Applies a single-qubit operator to `qubit`.
    pub fn apply_pauli(&self, qubit: Qubit, pauli: Pauli) -> Result<JointState, QuantumError> {
        self.apply_single(qubit, pauli.matrix())
    }

    /// Applies a single-qubit operator to the transit qubit, which every state
    /// carries.
    pub fn apply_pauli_on_transit(&self, pauli: Pauli) -> JointState {
        self.apply_pauli(Qubit::Transit, pauli)
            .expect("transit qubit is always present")
    }

    fn apply_single(&self, qubit: Qubit, m: [[Complex64; 2]; 2]) -> Result<JointState, QuantumError> {
        let mask = self.layout.mask(qubit)?;
        let mut out = self.amplitudes.clone();
        for lo in (0..self.amplitudes.len()).filter(|i| i & mask == 0) {
            let hi = lo | mask;
            let (a0, a1) = (self.amplitudes[lo], self.amplitudes[hi]);
            out[lo] = m[0][0] * a0 + m[0][1] * a1;
            out[hi] = m[1][0] * a0 + m[1][1] * a1;
        }
        Ok(JointState {
            amplitudes: out,
            layout: self.layout,
        })
    }

    /// Contracts `qubit` against `<vector|`, returning the unnormalized
    /// amplitudes over the remaining subsystems, indexed as if `qubit` were
    /// still present with value 0.
    fn contract(&self, mask: usize, vector: [Complex64; 2]) -> Vec<(usize, Complex64)> {
        (0..self.amplitudes.len())
            .filter(|i| i & mask == 0)
            .map(|lo| {
                let value =
                    vector[0].conj() * self.amplitudes[lo] + vector[1].conj() * self.amplitudes[lo | mask];
                (lo, value)
            })
            .collect()
    }

    /// Probabilities of outcomes 0 and 1 when measuring `qubit` in `basis`.
    pub fn outcome_probabilities(&self, qubit: Qubit, basis: Basis) -> Result<[f64; 2], QuantumError> {
        let mask = self.layout.mask(qubit)?;
        let mut probs = [0.0; 2];
        for outcome in Bit::ALL {
            probs[usize::from(outcome)] = self
                .contract(mask, basis.eigenstate(outcome))
                .iter()
                .map(|(_, a)| a.norm_sqr())
                .sum();
        }
        Ok(probs)
    }

    /// Projective measurement of `qubit` in `basis`. The measured qubit stays
    /// in the state, collapsed onto the observed eigenvector.
    pub fn measure_qubit<R: Rng + ?Sized>(
        &self,
        qubit: Qubit,
        basis: Basis,
        rng: &mut R,
    ) -> Result<(Bit, JointState), QuantumError> {
        self.measure_and_replace(qubit, basis, rng, |outcome| basis.eigenstate(outcome))
    }

    /// Measures `qubit` in `basis` and swaps in a freshly prepared qubit
    /// chosen from the outcome.
    pub fn measure_and_replace<R, F>(
        &self,
        qubit: Qubit,
        basis: Basis,
        rng: &mut R,
        replacement: F,
    ) -> Result<(Bit, JointState), QuantumError>
    where
        R: Rng + ?Sized,
        F: FnOnce(Bit) -> [Complex64; 2],
    {
        let mask = self.layout.mask(qubit)?;
        let probs = self.outcome_probabilities(qubit, basis)?;
        let outcome = Bit::new(sample_index(&probs, rng) == 1);
        let residual = self.contract(mask, basis.eigenstate(outcome));
        let scale = 1.0 / probs[usize::from(outcome)].sqrt();
        let fresh = replacement(outcome);
        let mut amplitudes = vec![ZERO; self.amplitudes.len()];
        for (lo, value) in residual {
            amplitudes[lo] = fresh[0] * value * scale;
            amplitudes[lo | mask] = fresh[1] * value * scale;
        }
        Ok((
            outcome,
            JointState {
                amplitudes,
                layout: self.layout,
            },
        ))
    }

    /// Squared overlaps `|<Psi_rs|state>|^2`, indexed in [`BellLabel::all`]
    /// order.
    pub fn bell_probabilities(&self) -> Result<[f64; 4], QuantumError> {
        if self.layout != Layout::PAIR {
            return Err(QuantumError::BellMeasurementUnavailable);
        }
        let mut probs = [0.0; 4];
        for label in BellLabel::all() {
            probs[label.index()] = JointState::bell_state(label).inner(self).norm_sqr();
        }
        Ok(probs)
    }

    /// Joint measurement of (home, transit) in the Bell basis.
    pub fn bell_measure<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<(BellLabel, JointState), QuantumError> {
        let probs = self.bell_probabilities()?;
        let label = BellLabel::all()[sample_index(&probs, rng)];
        let basis_state = JointState::bell_state(label);
        let overlap = basis_state.inner(self);
        let phase = overlap / overlap.norm();
        let amplitudes = basis_state.amplitudes.iter().map(|a| a * phase).collect();
        Ok((
            label,
            JointState {
                amplitudes,
                layout: Layout::PAIR,
            },
        ))
    }

    /// The Bell label with maximum squared overlap, provided that overlap is 1
    /// within [`AMPLITUDE_TOLERANCE`].
    pub fn identify_bell_state(&self) -> Option<BellLabel> {
        let probs = self.bell_probabilities().ok()?;
        let (index, best) = probs
            .iter()
            .copied()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(&b.1))?;
        ((1.0 - best).abs() <= AMPLITUDE_TOLERANCE).then(|| BellLabel::all()[index])
    }

    /// Couples a fresh two-level ancilla to the transit qubit:
    /// `|0>|chi> -> alpha|0>|chi_0> + beta|1>|chi_1>` and
    /// `|1>|chi> -> alpha|1>|chi_0> + beta|0>|chi_1>`, with `chi_0`, `chi_1`
    /// stored as ancilla `|0>`, `|1>`.
    pub fn attach_ancilla_and_entangle(
        &self,
        alpha: Complex64,
        beta: Complex64,
    ) -> Result<JointState, QuantumError> {
        if self.layout.ancilla {
            return Err(QuantumError::AncillaAlreadyAttached);
        }
        let weight = alpha.norm_sqr() + beta.norm_sqr();
        if (weight - 1.0).abs() > COEFFICIENT_TOLERANCE {
            return Err(QuantumError::UnnormalizedCoefficients(weight));
        }
        let (alpha, beta) = (alpha / weight.sqrt(), beta / weight.sqrt());

        let layout = Layout {
            ancilla: true,
            ..self.layout
        };
        let mut amplitudes = vec![ZERO; layout.dimension()];
        // Old index i becomes 2i (ancilla = chi_0); flipping the transit bit
        // of i, which is the lowest old bit, gives the chi_1 partner.
        for (i, &amp) in self.amplitudes.iter().enumerate() {
            amplitudes[i << 1] += alpha * amp;
            amplitudes[((i ^ 1) << 1) | 1] += beta * amp;
        }
        let out = JointState { amplitudes, layout };
        let (before, after) = (self.norm_sqr(), out.norm_sqr());
        assert!(
            (before - after).abs() <= NORM_TOLERANCE,
            "entangling map is not norm preserving: {before} -> {after}"
        );
        Ok(out)
    }

    /// Eve's read-out of her ancilla in the `{chi_0, chi_1}` basis. The
    /// measured ancilla is factored out of the returned state.
    pub fn measure_ancilla<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<(Bit, JointState), QuantumError> {
        let mask = self.layout.mask(Qubit::Ancilla)?;
        let probs = self.outcome_probabilities(Qubit::Ancilla, Basis::Z)?;
        let outcome = Bit::new(sample_index(&probs, rng) == 1);
        let scale = 1.0 / probs[usize::from(outcome)].sqrt();
        let offset = if outcome.is_set() { mask } else { 0 };
        // The ancilla is the least significant qubit.
        let amplitudes = (0..self.amplitudes.len() / 2)
            .map(|i| self.amplitudes[(i << 1) | offset] * scale)
            .collect();
        Ok((
            outcome,
            JointState {
                amplitudes,
                layout: Layout {
                    ancilla: false,
                    ..self.layout
                },
            },
        ))
    }
}

impl fmt::Display for JointState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let n = self.layout.num_qubits();
        let mut first = true;
        for (i, a) in self.amplitudes.iter().enumerate() {
            if a.norm() <= AMPLITUDE_TOLERANCE {
                continue;
            }
            if !first {
                f.write_str(" + ")?;
            }
            first = false;
            write!(f, "({:.4}{:+.4}i)|{:0width$b}>", a.re, a.im, i, width = n)?;
        }
        if first {
            f.write_str("0")?;
        }
        Ok(())
    }
}

/// Draws an index with the given (possibly slightly unnormalized)
/// probabilities. Each entry is clamped to `[0, 1]` first.
pub fn sample_index<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let clamped: Vec<f64> = probs.iter().map(|p| p.clamp(0.0, 1.0)).collect();
    let total: f64 = clamped.iter().sum();
    let u = rng.random::<f64>() * total;
    let mut cumulative = 0.0;
    let mut last_positive = 0;
    for (i, &p) in clamped.iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        cumulative += p;
        last_positive = i;
        if u < cumulative {
            return i;
        }
    }
    last_positive
}
