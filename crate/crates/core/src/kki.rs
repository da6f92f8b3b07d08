//! One round of the two-qubit entangled-state sharing scheme: Alice sends one
//! of four states on (B, C), Bob and Charlie measure in x or z, and rounds
//! whose bases are correlated for that state are kept.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adversary::{self, AttackLog, AttackStrategy, CheatMode};
use crate::qstate::{kki_source, Basis, Bit};
use crate::stream::{chance, pick};
use crate::Sift;

pub const AGENT_BASES: [Basis; 2] = [Basis::X, Basis::Z];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum KkiSignal {
    /// ψ⁺
    PsiPlus,
    /// φ⁻
    PhiMinus,
    /// Ψ⁺ = (φ⁻ + ψ⁺)/√2
    CapPsiPlus,
    /// Φ⁻ = (φ⁻ − ψ⁺)/√2
    CapPhiMinus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum KkiClass {
    /// ψ⁺ and φ⁻: correlated in (z, z) and (x, x).
    A,
    /// Ψ⁺ and Φ⁻: correlated in (z, x) and (x, z).
    B,
}

impl KkiSignal {
    pub const ALL: [KkiSignal; 4] = [
        KkiSignal::PsiPlus,
        KkiSignal::PhiMinus,
        KkiSignal::CapPsiPlus,
        KkiSignal::CapPhiMinus,
    ];

    pub fn class(self) -> KkiClass {
        match self {
            KkiSignal::PsiPlus | KkiSignal::PhiMinus => KkiClass::A,
            KkiSignal::CapPsiPlus | KkiSignal::CapPhiMinus => KkiClass::B,
        }
    }
}

/// When Alice reveals which state she sent, relative to Bob's sample
/// announcement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StateReveal {
    Before,
    After,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KkiError {
    #[error("bases ({0}, {1}) are not correlated for {2:?}")]
    Uncorrelated(Basis, Basis, KkiSignal),
    #[error("agents measure only in x or z, got {0}")]
    NonXzBasis(Basis),
    #[error("unitary cheating needs the signal revealed before Bob announces")]
    UnitaryNeedsEarlyReveal,
}

pub fn correlated_bases(signal: KkiSignal) -> [(Basis, Basis); 2] {
    match signal.class() {
        KkiClass::A => [(Basis::Z, Basis::Z), (Basis::X, Basis::X)],
        KkiClass::B => [(Basis::Z, Basis::X), (Basis::X, Basis::Z)],
    }
}

/// The deterministic value of `b_B ⊕ b_C` for a kept basis pair.
pub fn expected_parity(signal: KkiSignal, basis_b: Basis, basis_c: Basis) -> Result<Bit, KkiError> {
    for b in [basis_b, basis_c] {
        if b == Basis::Y {
            return Err(KkiError::NonXzBasis(b));
        }
    }
    use Basis::{X, Z};
    use KkiSignal::*;
    let parity = match (signal, basis_b, basis_c) {
        (PsiPlus, Z, Z) => Bit::One,
        (PsiPlus, X, X) => Bit::Zero,
        (PhiMinus, Z, Z) => Bit::Zero,
        (PhiMinus, X, X) => Bit::One,
        (CapPsiPlus, Z, X) | (CapPsiPlus, X, Z) => Bit::Zero,
        (CapPhiMinus, Z, X) | (CapPhiMinus, X, Z) => Bit::One,
        _ => return Err(KkiError::Uncorrelated(basis_b, basis_c, signal)),
    };
    Ok(parity)
}

pub fn sift_decision(signal: KkiSignal, basis_b: Basis, basis_c: Basis) -> Sift {
    match expected_parity(signal, basis_b, basis_c) {
        Ok(expected_parity) => Sift::Kept { expected_parity },
        Err(_) => Sift::Discarded,
    }
}

/// Attack plus reveal timing, validated together.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KkiSettings {
    attack: AttackStrategy,
    state_reveal: StateReveal,
}

impl KkiSettings {
    pub fn new(attack: AttackStrategy, state_reveal: StateReveal) -> Result<KkiSettings, KkiError> {
        if attack == AttackStrategy::FakeSignalCheat(CheatMode::Unitary) && state_reveal != StateReveal::Before {
            return Err(KkiError::UnitaryNeedsEarlyReveal);
        }
        Ok(KkiSettings { attack, state_reveal })
    }

    pub fn attack(&self) -> AttackStrategy {
        self.attack
    }

    pub fn state_reveal(&self) -> StateReveal {
        self.state_reveal
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KkiRound {
    pub round_id: u64,
    pub signal: KkiSignal,
    /// Bob's then Charlie's basis.
    pub bases: [Basis; 2],
    pub true_bits: [Bit; 2],
    /// Published bits, present on checked samples only.
    pub announced_bits: Option<[Bit; 2]>,
    pub sift: Sift,
    pub is_sample: bool,
    pub check_passed: Option<bool>,
    pub attacker_log: Option<AttackLog>,
}

impl KkiRound {
    /// The bit Alice's choice of state fixes for this round, if kept.
    pub fn secret_bit(&self) -> Option<Bit> {
        self.sift.expected_parity()
    }
}

/// Runs one round. `is_sample` only takes effect if the round is kept, and is
/// consulted after bases are public.
pub fn run_round<R: Rng + ?Sized>(round_id: u64, settings: &KkiSettings, is_sample: bool, rng: &mut R) -> KkiRound {
    let signal = pick(&KkiSignal::ALL, rng);
    let joint = kki_source(signal, &["B", "C"]).expect("two distinct labels");
    let tap = adversary::tap_channel(settings.attack, joint, "C", AGENT_BASES, rng).expect("channel C is in flight");

    let basis_b = pick(&AGENT_BASES, rng);
    let basis_c = pick(&AGENT_BASES, rng);
    let (bit_c, joint) = tap
        .state
        .measure_one(&tap.delivered, basis_c, rng.random())
        .expect("delivered photon present");

    let sift = sift_decision(signal, basis_b, basis_c);
    let is_sample = is_sample && sift.is_kept();
    let unitary_signal = (settings.attack == AttackStrategy::FakeSignalCheat(CheatMode::Unitary)).then_some(signal);
    let bob = adversary::bob_turn(
        settings.attack,
        &joint,
        tap.log,
        basis_b,
        basis_c,
        sift,
        is_sample,
        unitary_signal,
        rng,
    )
    .expect("stored photons present");

    let (announced_bits, check_passed) = match sift {
        Sift::Kept { expected_parity } if is_sample => {
            let announced = [bob.announced, bit_c];
            (Some(announced), Some(announced[0] ^ announced[1] == expected_parity))
        }
        _ => (None, None),
    };

    KkiRound {
        round_id,
        signal,
        bases: [basis_b, basis_c],
        true_bits: [bob.true_bit, bit_c],
        announced_bits,
        sift,
        is_sample,
        check_passed,
        attacker_log: bob.log,
    }
}

/// Convenience wrapper drawing the sample flag from the same stream.
pub fn run_sampled_round<R: Rng + ?Sized>(
    round_id: u64,
    settings: &KkiSettings,
    sample_frac: f64,
    rng: &mut R,
) -> KkiRound {
    let is_sample = chance(sample_frac, rng);
    run_round(round_id, settings, is_sample, rng)
}
