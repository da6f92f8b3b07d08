//! Exact pure-state engine for a handful of labelled qubits.
//!
//! A [`PureState`] carries an ordered list of symbolic qubit labels and a
//! dense amplitude vector of length `2^n`. The first label is the most
//! significant bit of the amplitude index, so `|01⟩` on labels `(B, C)` sits at
//! index 1 and means B in `|0⟩`, C in `|1⟩`.
//!
//! Nothing in here owns random state. Sampling operations take a caller
//! supplied uniform `rand01` in `[0, 1)` and walk the outcomes in a fixed
//! canonical order (bits 0 then 1, Bell outcomes φ⁺, φ⁻, ψ⁺, ψ⁻).

use std::collections::BTreeMap;
use std::fmt;
use std::ops::BitXor;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kki::KkiSignal;

pub type Amplitude = Complex64;

/// Tolerance for exact-algebra checks (norms, probability sums).
pub const EXACT_TOL: f64 = 1e-12;
/// Tolerance for reconstruction and branch-identity overlaps.
pub const OVERLAP_TOL: f64 = 1e-10;
/// Branches below this probability are treated as structurally absent.
pub const ZERO_PROB: f64 = 1e-24;

const FRAC_1_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QStateError {
    #[error("duplicate qubit label `{0}`")]
    DuplicateLabel(String),
    #[error("unknown qubit label `{0}`")]
    UnknownLabel(String),
    #[error("expected {expected} labels, got {got}")]
    LabelCount { expected: usize, got: usize },
    #[error("amplitude vector has length {got}, expected {expected}")]
    AmplitudeLength { expected: usize, got: usize },
    #[error("state is not normalized (norm {0})")]
    NotNormalized(f64),
    #[error("state holds a non-finite amplitude")]
    NonFinite,
    #[error("label sets differ: {left:?} vs {right:?}")]
    LabelMismatch { left: Vec<String>, right: Vec<String> },
    #[error("basis list has {got} entries for {expected} qubits")]
    BasisCount { expected: usize, got: usize },
}

pub type Result<T> = std::result::Result<T, QStateError>;

/// Single-qubit measurement basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Basis {
    Z,
    X,
    Y,
}

impl Basis {
    pub const ALL: [Basis; 3] = [Basis::Z, Basis::X, Basis::Y];

    /// Eigenvector for `bit`; 0 is the `+1` eigenstate.
    pub fn eigenvector(self, bit: Bit) -> [Amplitude; 2] {
        let h = FRAC_1_SQRT_2;
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        match (self, bit) {
            (Basis::Z, Bit::Zero) => [one, zero],
            (Basis::Z, Bit::One) => [zero, one],
            (Basis::X, Bit::Zero) => [Complex64::new(h, 0.0), Complex64::new(h, 0.0)],
            (Basis::X, Bit::One) => [Complex64::new(h, 0.0), Complex64::new(-h, 0.0)],
            (Basis::Y, Bit::Zero) => [Complex64::new(h, 0.0), Complex64::new(0.0, h)],
            (Basis::Y, Bit::One) => [Complex64::new(h, 0.0), Complex64::new(0.0, -h)],
        }
    }
}

impl fmt::Display for Basis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Basis::Z => "z",
            Basis::X => "x",
            Basis::Y => "y",
        };
        f.write_str(s)
    }
}

/// Measurement outcome. `Zero` pairs with `|0⟩`, `|+x⟩` and `|+y⟩`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum Bit {
    Zero,
    One,
}

impl Bit {
    pub const ALL: [Bit; 2] = [Bit::Zero, Bit::One];

    pub fn from_bool(b: bool) -> Bit {
        if b {
            Bit::One
        } else {
            Bit::Zero
        }
    }

    pub fn is_one(self) -> bool {
        self == Bit::One
    }

    pub fn flip(self) -> Bit {
        self ^ Bit::One
    }
}

impl BitXor for Bit {
    type Output = Bit;
    fn bitxor(self, rhs: Bit) -> Bit {
        Bit::from_bool(self.is_one() != rhs.is_one())
    }
}

impl From<Bit> for u8 {
    fn from(b: Bit) -> u8 {
        b as u8
    }
}

impl TryFrom<u8> for Bit {
    type Error = String;
    fn try_from(v: u8) -> std::result::Result<Self, Self::Error> {
        match v {
            0 => Ok(Bit::Zero),
            1 => Ok(Bit::One),
            other => Err(format!("bit must be 0 or 1, got {other}")),
        }
    }
}

impl fmt::Display for Bit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", u8::from(*self))
    }
}

/// Outcome of a two-qubit Bell-state measurement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BellOutcome {
    PhiPlus,
    PhiMinus,
    PsiPlus,
    PsiMinus,
}

impl BellOutcome {
    /// Canonical sampling order.
    pub const ALL: [BellOutcome; 4] = [
        BellOutcome::PhiPlus,
        BellOutcome::PhiMinus,
        BellOutcome::PsiPlus,
        BellOutcome::PsiMinus,
    ];

    /// Amplitudes over `|00⟩, |01⟩, |10⟩, |11⟩`.
    pub fn amplitudes(self) -> [Amplitude; 4] {
        let h = Complex64::new(FRAC_1_SQRT_2, 0.0);
        let z = Complex64::new(0.0, 0.0);
        match self {
            BellOutcome::PhiPlus => [h, z, z, h],
            BellOutcome::PhiMinus => [h, z, z, -h],
            BellOutcome::PsiPlus => [z, h, h, z],
            BellOutcome::PsiMinus => [z, h, -h, z],
        }
    }
}

impl fmt::Display for BellOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            BellOutcome::PhiPlus => "phi+",
            BellOutcome::PhiMinus => "phi-",
            BellOutcome::PsiPlus => "psi+",
            BellOutcome::PsiMinus => "psi-",
        };
        f.write_str(s)
    }
}

/// Single-qubit Pauli correction. `XZ` applies Z first, then X.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PauliOp {
    I,
    X,
    Z,
    XZ,
}

impl PauliOp {
    pub const ALL: [PauliOp; 4] = [PauliOp::I, PauliOp::X, PauliOp::Z, PauliOp::XZ];

    /// Row-major 2x2 matrix.
    pub fn matrix(self) -> [[Amplitude; 2]; 2] {
        let o = Complex64::new(1.0, 0.0);
        let z = Complex64::new(0.0, 0.0);
        match self {
            PauliOp::I => [[o, z], [z, o]],
            PauliOp::X => [[z, o], [o, z]],
            PauliOp::Z => [[o, z], [z, -o]],
            PauliOp::XZ => [[z, -o], [o, z]],
        }
    }

    /// Whether this operator anticommutes with the observable measured in
    /// `basis`. Identity commutes with everything; each non-trivial Pauli
    /// commutes only with its own axis (XZ is proportional to Y).
    pub fn anticommutes_with(self, basis: Basis) -> bool {
        match self {
            PauliOp::I => false,
            PauliOp::Z => basis != Basis::Z,
            PauliOp::X => basis != Basis::X,
            PauliOp::XZ => basis != Basis::Y,
        }
    }
}

/// Normalized state over labelled qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    labels: Vec<String>,
    amps: Vec<Amplitude>,
}

/// One branch of a Bell-basis expansion over a pair of qubits.
#[derive(Debug, Clone)]
pub struct BellBranch {
    pub outcome: BellOutcome,
    pub probability: f64,
    /// `None` when the branch has zero weight.
    pub residual: Option<PureState>,
}

impl PureState {
    /// Builds a state, validating labels, length, finiteness and norm.
    pub fn new<S: AsRef<str>>(labels: &[S], amps: Vec<Amplitude>) -> Result<PureState> {
        let labels: Vec<String> = labels.iter().map(|s| s.as_ref().to_owned()).collect();
        check_unique(&labels)?;
        let expected = 1usize << labels.len();
        if amps.len() != expected {
            return Err(QStateError::AmplitudeLength {
                expected,
                got: amps.len(),
            });
        }
        if amps.iter().any(|a| !a.re.is_finite() || !a.im.is_finite()) {
            return Err(QStateError::NonFinite);
        }
        let norm = norm_of(&amps);
        if (norm - 1.0).abs() > EXACT_TOL {
            return Err(QStateError::NotNormalized(norm));
        }
        Ok(PureState { labels, amps })
    }

    /// Normalizes `amps` before validating. Used for hand-written kets.
    pub fn normalized<S: AsRef<str>>(labels: &[S], mut amps: Vec<Amplitude>) -> Result<PureState> {
        let norm = norm_of(&amps);
        if norm == 0.0 || !norm.is_finite() {
            return Err(QStateError::NotNormalized(norm));
        }
        for a in &mut amps {
            *a /= norm;
        }
        PureState::new(labels, amps)
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn amplitudes(&self) -> &[Amplitude] {
        &self.amps
    }

    pub fn num_qubits(&self) -> usize {
        self.labels.len()
    }

    pub fn norm(&self) -> f64 {
        norm_of(&self.amps)
    }

    pub fn has_label(&self, label: &str) -> bool {
        self.labels.iter().any(|l| l == label)
    }

    fn position(&self, label: &str) -> Result<usize> {
        self.labels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| QStateError::UnknownLabel(label.to_owned()))
    }

    /// `⟨self|other⟩`; labels must match in order.
    pub fn inner(&self, other: &PureState) -> Result<Amplitude> {
        if self.labels != other.labels {
            return Err(QStateError::LabelMismatch {
                left: self.labels.clone(),
                right: other.labels.clone(),
            });
        }
        Ok(self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum())
    }

    /// Kronecker product; `self`'s labels come first.
    pub fn tensor(&self, other: &PureState) -> Result<PureState> {
        for l in &other.labels {
            if self.has_label(l) {
                return Err(QStateError::DuplicateLabel(l.clone()));
            }
        }
        let mut labels = self.labels.clone();
        labels.extend(other.labels.iter().cloned());
        let amps = self
            .amps
            .iter()
            .flat_map(|a| other.amps.iter().map(move |b| a * b))
            .collect();
        Ok(PureState { labels, amps })
    }

    /// Same state with qubits listed in `order` (a permutation of the labels).
    pub fn reorder<S: AsRef<str>>(&self, order: &[S]) -> Result<PureState> {
        if order.len() != self.labels.len() {
            return Err(QStateError::LabelCount {
                expected: self.labels.len(),
                got: order.len(),
            });
        }
        let new_labels: Vec<String> = order.iter().map(|s| s.as_ref().to_owned()).collect();
        check_unique(&new_labels)?;
        let src_pos = new_labels
            .iter()
            .map(|l| self.position(l))
            .collect::<Result<Vec<_>>>()?;
        let n = self.labels.len();
        let mut amps = vec![Complex64::new(0.0, 0.0); self.amps.len()];
        for (new_idx, slot) in amps.iter_mut().enumerate() {
            let mut old_idx = 0usize;
            for (k, &p) in src_pos.iter().enumerate() {
                if bit_at(new_idx, k, n) {
                    old_idx |= 1 << (n - 1 - p);
                }
            }
            *slot = self.amps[old_idx];
        }
        Ok(PureState {
            labels: new_labels,
            amps,
        })
    }

    /// Applies a 2x2 operator to one qubit. The caller guarantees unitarity.
    pub fn apply_single(&self, label: &str, m: [[Amplitude; 2]; 2]) -> Result<PureState> {
        let pos = self.position(label)?;
        let shift = self.labels.len() - 1 - pos;
        let mask = 1usize << shift;
        let mut amps = self.amps.clone();
        for i0 in (0..self.amps.len()).filter(|i| i & mask == 0) {
            let i1 = i0 | mask;
            let (a0, a1) = (self.amps[i0], self.amps[i1]);
            amps[i0] = m[0][0] * a0 + m[0][1] * a1;
            amps[i1] = m[1][0] * a0 + m[1][1] * a1;
        }
        Ok(PureState {
            labels: self.labels.clone(),
            amps,
        })
    }

    pub fn apply_pauli(&self, label: &str, p: PauliOp) -> Result<PureState> {
        self.apply_single(label, p.matrix())
    }

    /// Contracts the qubits at `positions` against `bra` (indexed with the
    /// first listed position as most significant bit). Returns the
    /// unnormalized residual and its labels.
    fn project(&self, positions: &[usize], bra: &[Amplitude]) -> (Vec<String>, Vec<Amplitude>) {
        let n = self.labels.len();
        let m = positions.len();
        debug_assert_eq!(bra.len(), 1 << m);
        let rest: Vec<usize> = (0..n).filter(|p| !positions.contains(p)).collect();
        let mut residual = vec![Complex64::new(0.0, 0.0); 1 << rest.len()];
        for (idx, amp) in self.amps.iter().enumerate() {
            let mut j = 0usize;
            for &p in positions {
                j = (j << 1) | usize::from(bit_at(idx, p, n));
            }
            let mut r = 0usize;
            for &p in &rest {
                r = (r << 1) | usize::from(bit_at(idx, p, n));
            }
            residual[r] += bra[j].conj() * amp;
        }
        let labels = rest.iter().map(|&p| self.labels[p].clone()).collect();
        (labels, residual)
    }

    /// Projective measurement of one qubit. The measured qubit is removed
    /// from the returned state.
    pub fn measure_one(&self, label: &str, basis: Basis, rand01: f64) -> Result<(Bit, PureState)> {
        let pos = self.position(label)?;
        let branches: Vec<(Bit, Vec<String>, Vec<Amplitude>)> = Bit::ALL
            .iter()
            .map(|&b| {
                let (labels, res) = self.project(&[pos], &basis.eigenvector(b));
                (b, labels, res)
            })
            .collect();
        let probs: Vec<f64> = branches.iter().map(|(_, _, r)| norm_sqr_of(r)).collect();
        let k = sample_index(&probs, rand01);
        let (bit, labels, res) = branches.into_iter().nth(k).expect("sampled branch exists");
        Ok((bit, renormalize(labels, res, probs[k])))
    }

    /// Bell-state measurement of the ordered pair `(first, second)`.
    pub fn measure_bell(&self, first: &str, second: &str, rand01: f64) -> Result<(BellOutcome, PureState)> {
        let branches = self.bell_decompose(first, second)?;
        let probs: Vec<f64> = branches.iter().map(|b| b.probability).collect();
        let k = sample_index(&probs, rand01);
        let branch = branches.into_iter().nth(k).expect("sampled branch exists");
        let residual = branch.residual.expect("sampled branch has weight");
        Ok((branch.outcome, residual))
    }

    /// Full expansion `Σ_o |o⟩_{first,second} ⊗ r_o` in canonical Bell order.
    pub fn bell_decompose(&self, first: &str, second: &str) -> Result<Vec<BellBranch>> {
        let p1 = self.position(first)?;
        let p2 = self.position(second)?;
        if p1 == p2 {
            return Err(QStateError::DuplicateLabel(first.to_owned()));
        }
        Ok(BellOutcome::ALL
            .iter()
            .map(|&outcome| {
                let (labels, res) = self.project(&[p1, p2], &outcome.amplitudes());
                let probability = norm_sqr_of(&res);
                let residual = (probability > ZERO_PROB).then(|| renormalize(labels, res, probability));
                BellBranch {
                    outcome,
                    probability,
                    residual,
                }
            })
            .collect())
    }

    /// Exact joint outcome distribution with `bases[k]` applied to the k-th
    /// label. Every tuple is listed, including zero-probability ones.
    ///
    /// Computed by overlapping with explicit product eigenkets, independent of
    /// the partial-projection path the sampling functions use.
    pub fn outcome_distribution(&self, bases: &[Basis]) -> Result<BTreeMap<Vec<Bit>, f64>> {
        let n = self.labels.len();
        if bases.len() != n {
            return Err(QStateError::BasisCount {
                expected: n,
                got: bases.len(),
            });
        }
        let mut dist = BTreeMap::new();
        for idx in 0..(1usize << n) {
            let bits: Vec<Bit> = (0..n).map(|k| Bit::from_bool(bit_at(idx, k, n))).collect();
            let mut ket = PureState::scalar();
            for (k, (&b, &basis)) in bits.iter().zip(bases).enumerate() {
                ket = ket.tensor(&make_ket(b, basis, &self.labels[k]))?;
            }
            let p = ket.inner(self)?.norm_sqr();
            dist.insert(bits, p);
        }
        Ok(dist)
    }

    /// The zero-qubit state with amplitude 1, the unit of `tensor`.
    pub fn scalar() -> PureState {
        PureState {
            labels: Vec::new(),
            amps: vec![Complex64::new(1.0, 0.0)],
        }
    }
}

impl fmt::Display for PureState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let n = self.labels.len();
        let mut first = true;
        for (idx, a) in self.amps.iter().enumerate() {
            if a.norm_sqr() < ZERO_PROB {
                continue;
            }
            if !first {
                f.write_str(" + ")?;
            }
            first = false;
            let bits: String = (0..n).map(|k| if bit_at(idx, k, n) { '1' } else { '0' }).collect();
            write!(f, "({:.4}{:+.4}i)|{}⟩", a.re, a.im, bits)?;
        }
        write!(f, "_{}", self.labels.join(""))
    }
}

/// Single-qubit eigenstate of `basis` on `label`.
pub fn make_ket(bit: Bit, basis: Basis, label: &str) -> PureState {
    PureState {
        labels: vec![label.to_owned()],
        amps: basis.eigenvector(bit).to_vec(),
    }
}

/// `(|000⟩ + |111⟩)/√2`.
pub fn ghz3<S: AsRef<str>>(labels: &[S]) -> Result<PureState> {
    expect_count(labels, 3)?;
    let h = Complex64::new(FRAC_1_SQRT_2, 0.0);
    let mut amps = vec![Complex64::new(0.0, 0.0); 8];
    amps[0] = h;
    amps[7] = h;
    PureState::new(labels, amps)
}

pub fn bell<S: AsRef<str>>(outcome: BellOutcome, labels: &[S]) -> Result<PureState> {
    expect_count(labels, 2)?;
    PureState::new(labels, outcome.amplitudes().to_vec())
}

/// One of the four two-qubit source states Alice may send in the KKI round.
pub fn kki_source<S: AsRef<str>>(signal: KkiSignal, labels: &[S]) -> Result<PureState> {
    expect_count(labels, 2)?;
    let phi_m = BellOutcome::PhiMinus.amplitudes();
    let psi_p = BellOutcome::PsiPlus.amplitudes();
    let h = FRAC_1_SQRT_2;
    let amps: Vec<Amplitude> = match signal {
        KkiSignal::PsiPlus => psi_p.to_vec(),
        KkiSignal::PhiMinus => phi_m.to_vec(),
        KkiSignal::CapPsiPlus => phi_m.iter().zip(&psi_p).map(|(a, b)| (a + b) * h).collect(),
        KkiSignal::CapPhiMinus => phi_m.iter().zip(&psi_p).map(|(a, b)| (a - b) * h).collect(),
    };
    PureState::new(labels, amps)
}

/// `|⟨a|b⟩| ≥ 1 − tol`.
pub fn same_up_to_phase(a: &PureState, b: &PureState, tol: f64) -> Result<bool> {
    Ok(a.inner(b)?.norm() >= 1.0 - tol)
}

fn expect_count<S: AsRef<str>>(labels: &[S], expected: usize) -> Result<()> {
    if labels.len() != expected {
        return Err(QStateError::LabelCount {
            expected,
            got: labels.len(),
        });
    }
    Ok(())
}

fn check_unique(labels: &[String]) -> Result<()> {
    for (i, l) in labels.iter().enumerate() {
        if labels[..i].contains(l) {
            return Err(QStateError::DuplicateLabel(l.clone()));
        }
    }
    Ok(())
}

#[inline]
fn bit_at(idx: usize, pos: usize, n: usize) -> bool {
    (idx >> (n - 1 - pos)) & 1 == 1
}

fn norm_sqr_of(v: &[Amplitude]) -> f64 {
    v.iter().map(|a| a.norm_sqr()).sum()
}

fn norm_of(v: &[Amplitude]) -> f64 {
    norm_sqr_of(v).sqrt()
}

fn renormalize(labels: Vec<String>, mut amps: Vec<Amplitude>, probability: f64) -> PureState {
    let scale = probability.sqrt();
    for a in &mut amps {
        *a /= scale;
    }
    PureState { labels, amps }
}

/// Cumulative sampling in list order. Branches at or below [`ZERO_PROB`] are
/// never returned; rounding overshoot falls back to the last live branch.
fn sample_index(probs: &[f64], rand01: f64) -> usize {
    let mut acc = 0.0;
    let mut last_live = None;
    for (k, &p) in probs.iter().enumerate() {
        if p <= ZERO_PROB {
            continue;
        }
        last_live = Some(k);
        acc += p;
        if rand01 < acc {
            return k;
        }
    }
    last_live.expect("a normalized state has at least one live branch")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Amplitude {
        Complex64::new(re, im)
    }

    fn assert_amps(s: &PureState, expected: &[Amplitude]) {
        assert_eq!(s.amplitudes().len(), expected.len());
        for (a, e) in s.amplitudes().iter().zip(expected) {
            assert!((a - e).norm() < EXACT_TOL, "{s} vs {expected:?}");
        }
    }

    const H: f64 = FRAC_1_SQRT_2;

    #[test]
    fn kets_match_eigenvector_definitions() {
        assert_amps(&make_ket(Bit::Zero, Basis::Z, "A"), &[c(1.0, 0.0), c(0.0, 0.0)]);
        assert_amps(&make_ket(Bit::Zero, Basis::X, "A"), &[c(H, 0.0), c(H, 0.0)]);
        assert_amps(&make_ket(Bit::One, Basis::Y, "A"), &[c(H, 0.0), c(0.0, -H)]);
        for basis in Basis::ALL {
            for bit in Bit::ALL {
                assert!((make_ket(bit, basis, "A").norm() - 1.0).abs() < EXACT_TOL);
            }
        }
    }

    #[test]
    fn tensor_orders_labels_and_rejects_overlap() {
        let s = make_ket(Bit::Zero, Basis::Z, "A")
            .tensor(&make_ket(Bit::One, Basis::Z, "B"))
            .unwrap();
        assert_eq!(s.labels(), ["A", "B"]);
        assert_amps(&s, &[c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);

        let pp = make_ket(Bit::Zero, Basis::X, "A")
            .tensor(&make_ket(Bit::Zero, Basis::X, "B"))
            .unwrap();
        assert_amps(&pp, &[c(0.5, 0.0); 4]);

        let big = ghz3(&["A", "B", "C"])
            .unwrap()
            .tensor(&bell(BellOutcome::PhiPlus, &["B'", "C'"]).unwrap())
            .unwrap();
        assert_eq!(big.num_qubits(), 5);
        assert!((big.norm() - 1.0).abs() < EXACT_TOL);

        let a = make_ket(Bit::Zero, Basis::Z, "A");
        assert_eq!(a.tensor(&a), Err(QStateError::DuplicateLabel("A".into())));
    }

    #[test]
    fn ghz_amplitudes_and_label_count() {
        let g = ghz3(&["A", "B", "C"]).unwrap();
        for (i, a) in g.amplitudes().iter().enumerate() {
            let want = if i == 0 || i == 7 { H } else { 0.0 };
            assert!((a - c(want, 0.0)).norm() < EXACT_TOL);
        }
        assert!(matches!(ghz3(&["A", "B"]), Err(QStateError::LabelCount { .. })));
        assert!(matches!(ghz3(&["A", "B", "A"]), Err(QStateError::DuplicateLabel(_))));
    }

    #[test]
    fn ghz_all_x_has_even_parity() {
        let g = ghz3(&["A", "B", "C"]).unwrap();
        let dist = g.outcome_distribution(&[Basis::X, Basis::X, Basis::X]).unwrap();
        for (bits, p) in dist {
            let parity = bits[0] ^ bits[1] ^ bits[2];
            let want = if parity == Bit::Zero { 0.25 } else { 0.0 };
            assert!((p - want).abs() < EXACT_TOL, "{bits:?} {p}");
        }
    }

    #[test]
    fn ghz_yyx_has_odd_parity() {
        let g = ghz3(&["A", "B", "C"]).unwrap();
        let dist = g.outcome_distribution(&[Basis::Y, Basis::Y, Basis::X]).unwrap();
        for (bits, p) in dist {
            let parity = bits[0] ^ bits[1] ^ bits[2];
            let want = if parity == Bit::One { 0.25 } else { 0.0 };
            assert!((p - want).abs() < EXACT_TOL, "{bits:?} {p}");
        }
    }

    #[test]
    fn bell_states_are_orthonormal() {
        assert_amps(
            &bell(BellOutcome::PhiPlus, &["a", "b"]).unwrap(),
            &[c(H, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(H, 0.0)],
        );
        assert_amps(
            &bell(BellOutcome::PsiMinus, &["a", "b"]).unwrap(),
            &[c(0.0, 0.0), c(H, 0.0), c(-H, 0.0), c(0.0, 0.0)],
        );
        for o1 in BellOutcome::ALL {
            for o2 in BellOutcome::ALL {
                let ip = bell(o1, &["a", "b"])
                    .unwrap()
                    .inner(&bell(o2, &["a", "b"]).unwrap())
                    .unwrap();
                let want = if o1 == o2 { 1.0 } else { 0.0 };
                assert!((ip.norm() - want).abs() < EXACT_TOL);
            }
        }
        assert!(bell(BellOutcome::PhiPlus, &["a"]).is_err());
    }

    #[test]
    fn kki_sources_expand_as_expected() {
        // (φ⁻ + ψ⁺)/√2 and (φ⁻ − ψ⁺)/√2 expanded by hand.
        assert_amps(
            &kki_source(KkiSignal::CapPsiPlus, &["B", "C"]).unwrap(),
            &[c(0.5, 0.0), c(0.5, 0.0), c(0.5, 0.0), c(-0.5, 0.0)],
        );
        assert_amps(
            &kki_source(KkiSignal::CapPhiMinus, &["B", "C"]).unwrap(),
            &[c(0.5, 0.0), c(-0.5, 0.0), c(-0.5, 0.0), c(-0.5, 0.0)],
        );
        for s1 in KkiSignal::ALL {
            let a = kki_source(s1, &["B", "C"]).unwrap();
            assert!((a.norm() - 1.0).abs() < EXACT_TOL);
            for s2 in KkiSignal::ALL {
                let b = kki_source(s2, &["B", "C"]).unwrap();
                let ov = a.inner(&b).unwrap().norm();
                let want = if s1 == s2 {
                    1.0
                } else if s1.class() == s2.class() {
                    0.0
                } else {
                    H
                };
                assert!((ov - want).abs() < EXACT_TOL, "{s1:?} {s2:?} {ov}");
            }
        }
    }

    #[test]
    fn pauli_actions() {
        let zero = make_ket(Bit::Zero, Basis::Z, "q");
        let one = make_ket(Bit::One, Basis::Z, "q");
        assert_eq!(zero.apply_pauli("q", PauliOp::I).unwrap(), zero);
        assert_amps(&zero.apply_pauli("q", PauliOp::X).unwrap(), one.amplitudes());
        assert_amps(&zero.apply_pauli("q", PauliOp::XZ).unwrap(), one.amplitudes());
        assert_amps(
            &one.apply_pauli("q", PauliOp::XZ).unwrap(),
            &[c(-1.0, 0.0), c(0.0, 0.0)],
        );
        assert!(matches!(
            zero.apply_pauli("r", PauliOp::X),
            Err(QStateError::UnknownLabel(_))
        ));
    }

    #[test]
    fn xz_equals_u1_up_to_sign() {
        // U1 = |0⟩⟨1| − |1⟩⟨0|
        let u1 = [[c(0.0, 0.0), c(1.0, 0.0)], [c(-1.0, 0.0), c(0.0, 0.0)]];
        let s = PureState::normalized(&["q"], vec![c(0.6, 0.1), c(-0.3, 0.7)]).unwrap();
        let a = s.apply_single("q", u1).unwrap();
        let b = s.apply_pauli("q", PauliOp::XZ).unwrap();
        assert!(same_up_to_phase(&a, &b, EXACT_TOL).unwrap());
        assert!((a.inner(&b).unwrap() - c(-1.0, 0.0)).norm() < EXACT_TOL);
    }

    #[test]
    fn measure_eigenstate_and_ghz_collapse() {
        let plus = make_ket(Bit::Zero, Basis::X, "A");
        for r in [0.0, 0.5, 0.999_999] {
            let (bit, rest) = plus.measure_one("A", Basis::X, r).unwrap();
            assert_eq!(bit, Bit::Zero);
            assert_eq!(rest.num_qubits(), 0);
        }

        let g = ghz3(&["A", "B", "C"]).unwrap();
        let (bit, rest) = g.measure_one("A", Basis::Z, 0.3).unwrap();
        assert_eq!(bit, Bit::Zero);
        assert_eq!(rest.labels(), ["B", "C"]);
        assert_amps(&rest, &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
        let (bit, _) = g.measure_one("A", Basis::Z, 0.7).unwrap();
        assert_eq!(bit, Bit::One);
        assert!(g.measure_one("D", Basis::Z, 0.1).is_err());
    }

    #[test]
    fn phi_plus_x_measurements_agree() {
        let phi = bell(BellOutcome::PhiPlus, &["a", "b"]).unwrap();
        // oracle first: the joint distribution has no mismatched outcomes
        let dist = phi.outcome_distribution(&[Basis::X, Basis::X]).unwrap();
        assert!(dist[&vec![Bit::Zero, Bit::One]] < EXACT_TOL);
        assert!(dist[&vec![Bit::One, Bit::Zero]] < EXACT_TOL);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let (b1, rest) = phi.measure_one("a", Basis::X, rng.random()).unwrap();
            let (b2, _) = rest.measure_one("b", Basis::X, rng.random()).unwrap();
            assert_eq!(b1, b2);
        }
    }

    #[test]
    fn bell_measurement_of_swapping_input() {
        let s = ghz3(&["A", "B", "C"])
            .unwrap()
            .tensor(&bell(BellOutcome::PhiPlus, &["B'", "C'"]).unwrap())
            .unwrap();
        let branches = s.bell_decompose("C", "B'").unwrap();
        for b in &branches {
            assert!((b.probability - 0.25).abs() < EXACT_TOL);
        }
        let (o, rest) = s.measure_bell("C", "B'", 0.1).unwrap();
        assert_eq!(o, BellOutcome::PhiPlus);
        assert_eq!(rest.labels(), ["A", "B", "C'"]);
        let want = ghz3(&["A", "B", "C'"]).unwrap();
        assert!(same_up_to_phase(&rest, &want, OVERLAP_TOL).unwrap());

        let psi_m = bell(BellOutcome::PsiMinus, &["x", "y"]).unwrap();
        for r in [0.0, 0.4, 0.99] {
            assert_eq!(psi_m.measure_bell("x", "y", r).unwrap().0, BellOutcome::PsiMinus);
        }
    }

    #[test]
    fn product_state_splits_between_phis() {
        let s = make_ket(Bit::Zero, Basis::Z, "p")
            .tensor(&make_ket(Bit::Zero, Basis::Z, "q"))
            .unwrap();
        let probs: Vec<f64> = s
            .bell_decompose("p", "q")
            .unwrap()
            .iter()
            .map(|b| b.probability)
            .collect();
        for (p, want) in probs.iter().zip([0.5, 0.5, 0.0, 0.0]) {
            assert!((p - want).abs() < EXACT_TOL);
        }
        let branches = s.bell_decompose("p", "q").unwrap();
        assert!(branches[2].residual.is_none());
        assert!(branches[3].residual.is_none());
    }

    #[test]
    fn same_up_to_phase_cases() {
        let s = ghz3(&["A", "B", "C"]).unwrap();
        let neg = PureState::new(s.labels(), s.amplitudes().iter().map(|a| -a).collect()).unwrap();
        assert!(same_up_to_phase(&s, &s, EXACT_TOL).unwrap());
        assert!(same_up_to_phase(&s, &neg, EXACT_TOL).unwrap());
        let p = bell(BellOutcome::PhiPlus, &["a", "b"]).unwrap();
        let m = bell(BellOutcome::PhiMinus, &["a", "b"]).unwrap();
        assert!(!same_up_to_phase(&p, &m, EXACT_TOL).unwrap());
        let other = bell(BellOutcome::PhiPlus, &["a", "c"]).unwrap();
        assert!(matches!(
            same_up_to_phase(&p, &other, EXACT_TOL),
            Err(QStateError::LabelMismatch { .. })
        ));
    }

    #[test]
    fn psi_plus_zz_distribution() {
        let s = bell(BellOutcome::PsiPlus, &["a", "b"]).unwrap();
        let d = s.outcome_distribution(&[Basis::Z, Basis::Z]).unwrap();
        let expect = [(0, 0, 0.0), (0, 1, 0.5), (1, 0, 0.5), (1, 1, 0.0)];
        for (x, y, p) in expect {
            let key = vec![Bit::try_from(x).unwrap(), Bit::try_from(y).unwrap()];
            assert!((d[&key] - p).abs() < EXACT_TOL);
        }
        assert!(s.outcome_distribution(&[Basis::Z]).is_err());
    }

    #[test]
    fn born_rule_frequencies_match_distribution() {
        let s = PureState::normalized(&["a", "b"], vec![c(0.3, 0.2), c(-0.5, 0.1), c(0.1, -0.6), c(0.4, 0.0)]).unwrap();
        let exact = s.outcome_distribution(&[Basis::Y, Basis::X]).unwrap();
        let n = 100_000;
        let mut counts: BTreeMap<Vec<Bit>, usize> = BTreeMap::new();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..n {
            let (b1, rest) = s.measure_one("a", Basis::Y, rng.random()).unwrap();
            let (b2, _) = rest.measure_one("b", Basis::X, rng.random()).unwrap();
            *counts.entry(vec![b1, b2]).or_default() += 1;
        }
        for (k, p) in exact {
            let freq = *counts.get(&k).unwrap_or(&0) as f64 / n as f64;
            let se = (p * (1.0 - p) / n as f64).sqrt();
            assert!((freq - p).abs() <= 4.0 * se + 1e-12, "{k:?}: {freq} vs {p}");
        }
    }

    #[test]
    fn reorder_round_trips() {
        let s = PureState::normalized(&["a", "b", "c"], (0..8).map(|i| c(i as f64, 1.0 - i as f64)).collect()).unwrap();
        let r = s.reorder(&["c", "a", "b"]).unwrap();
        // |a b c⟩ = |1 0 1⟩ (index 5) becomes |c a b⟩ = |1 1 0⟩ (index 6)
        assert_eq!(r.amplitudes()[6], s.amplitudes()[5]);
        assert_eq!(r.reorder(&["a", "b", "c"]).unwrap(), s);
    }

    #[test]
    fn constructor_rejects_bad_input() {
        assert!(matches!(
            PureState::new(&["a"], vec![c(1.0, 0.0)]),
            Err(QStateError::AmplitudeLength { .. })
        ));
        assert!(matches!(
            PureState::new(&["a"], vec![c(1.0, 0.0), c(1.0, 0.0)]),
            Err(QStateError::NotNormalized(_))
        ));
        assert!(matches!(
            PureState::new(&["a"], vec![c(f64::NAN, 0.0), c(0.0, 0.0)]),
            Err(QStateError::NonFinite)
        ));
    }

    fn arb_state(n: usize) -> impl Strategy<Value = PureState> {
        prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 1 << n)
            .prop_filter("non-degenerate", |v| {
                v.iter().map(|(a, b)| a * a + b * b).sum::<f64>() > 1e-3
            })
            .prop_map(move |v| {
                let labels: Vec<String> = (0..n).map(|i| format!("q{i}")).collect();
                PureState::normalized(&labels, v.into_iter().map(|(a, b)| c(a, b)).collect()).unwrap()
            })
    }

    proptest! {
        #[test]
        fn measurement_preserves_norm(s in arb_state(3), r in 0.0f64..1.0, bi in 0usize..3, q in 0usize..3) {
            let label = format!("q{q}");
            let (_, rest) = s.measure_one(&label, Basis::ALL[bi], r).unwrap();
            prop_assert!((rest.norm() - 1.0).abs() < EXACT_TOL);
            prop_assert!(!rest.has_label(&label));
            let (_, rest) = s.measure_bell("q0", "q2", r).unwrap();
            prop_assert!((rest.norm() - 1.0).abs() < EXACT_TOL);
        }

        #[test]
        fn bell_decomposition_reconstructs(s in arb_state(4)) {
            let branches = s.bell_decompose("q2", "q0").unwrap();
            let total: f64 = branches.iter().map(|b| b.probability).sum();
            prop_assert!((total - 1.0).abs() < EXACT_TOL);
            let mut acc = vec![c(0.0, 0.0); 16];
            for b in &branches {
                if let Some(res) = &b.residual {
                    prop_assert!((res.norm() - 1.0).abs() < EXACT_TOL);
                    let full = res
                        .tensor(&bell(b.outcome, &["q2", "q0"]).unwrap())
                        .unwrap()
                        .reorder(s.labels())
                        .unwrap();
                    for (a, f) in acc.iter_mut().zip(full.amplitudes()) {
                        *a += f * b.probability.sqrt();
                    }
                }
            }
            let rebuilt = PureState::normalized(s.labels(), acc).unwrap();
            prop_assert!(same_up_to_phase(&rebuilt, &s, OVERLAP_TOL).unwrap());
        }

        #[test]
        fn paulis_square_to_identity(s in arb_state(2), pi in 0usize..4) {
            let p = PauliOp::ALL[pi];
            let twice = s.apply_pauli("q1", p).unwrap().apply_pauli("q1", p).unwrap();
            prop_assert!((twice.norm() - 1.0).abs() < EXACT_TOL);
            prop_assert!(same_up_to_phase(&twice, &s, EXACT_TOL).unwrap());
        }

        #[test]
        fn eigenstates_measure_deterministically(bi in 0usize..3, b in 0u8..2, r in 0.0f64..1.0) {
            let basis = Basis::ALL[bi];
            let bit = Bit::try_from(b).unwrap();
            let (got, _) = make_ket(bit, basis, "q").measure_one("q", basis, r).unwrap();
            prop_assert_eq!(got, bit);
        }

        #[test]
        fn distributions_sum_to_one(s in arb_state(3), b0 in 0usize..3, b1 in 0usize..3, b2 in 0usize..3) {
            let d = s.outcome_distribution(&[Basis::ALL[b0], Basis::ALL[b1], Basis::ALL[b2]]).unwrap();
            let total: f64 = d.values().sum();
            prop_assert!((total - 1.0).abs() < EXACT_TOL);
        }
    }
}
