//! One round of GHZ-based secret sharing between Alice and her agents Bob and
//! Charlie.
//!
//! Alice keeps A of `(|000⟩ + |111⟩)/√2` and sends B to Bob and C to Charlie.
//! Everyone measures in a random x or y basis. Rounds where all three used x,
//! or exactly two used y, are kept: their bits satisfy
//! `b_A ⊕ b_B ⊕ b_C = parity` with parity 0 for xxx and 1 otherwise.

use rand::Rng;
use serde::Serialize;
use thiserror::Error;

use crate::adversary::{self, AttackLog, AttackStrategy};
use crate::qstate::{ghz3, Basis, Bit};
use crate::stream::{chance, pick};
use crate::Sift;

pub const AGENT_BASES: [Basis; 2] = [Basis::X, Basis::Y];

/// Basis triples (Alice, Bob, Charlie) that carry a deterministic parity.
pub const KEPT_BASES: [[Basis; 3]; 4] = [
    [Basis::X, Basis::X, Basis::X],
    [Basis::X, Basis::Y, Basis::Y],
    [Basis::Y, Basis::X, Basis::Y],
    [Basis::Y, Basis::Y, Basis::X],
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Party {
    Alice,
    Bob,
    Charlie,
}

impl Party {
    fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HbbError {
    #[error("parties measure only in x or y, got {0}")]
    NonXyBasis(Basis),
    #[error("round {0} is not a key round (discarded or used as a sample)")]
    NotKeyRound(u64),
    #[error("{0:?} is not an agent")]
    NotAnAgent(Party),
}

pub fn sift_decision(bases: [Basis; 3]) -> Result<Sift, HbbError> {
    if let Some(&b) = bases.iter().find(|b| **b == Basis::Z) {
        return Err(HbbError::NonXyBasis(b));
    }
    let ys = bases.iter().filter(|b| **b == Basis::Y).count();
    Ok(match ys {
        0 => Sift::Kept {
            expected_parity: Bit::Zero,
        },
        2 => Sift::Kept {
            expected_parity: Bit::One,
        },
        _ => Sift::Discarded,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HbbRound {
    pub round_id: u64,
    /// Alice, Bob, Charlie.
    pub bases: [Basis; 3],
    pub true_bits: [Bit; 3],
    /// Bits compared on a checked sample; Bob's entry is what he published.
    pub announced_bits: Option<[Bit; 3]>,
    pub sift: Sift,
    pub is_sample: bool,
    pub check_passed: Option<bool>,
    pub attacker_log: Option<AttackLog>,
}

impl HbbRound {
    fn key_parity(&self) -> Result<Bit, HbbError> {
        match self.sift {
            Sift::Kept { expected_parity } if !self.is_sample => Ok(expected_parity),
            _ => Err(HbbError::NotKeyRound(self.round_id)),
        }
    }
}

/// `K_A = b_A ⊕ parity`, so that `K_A = K_B ⊕ K_C` on honest rounds.
pub fn alice_key_bit(round: &HbbRound) -> Result<Bit, HbbError> {
    let parity = round.key_parity()?;
    Ok(round.true_bits[Party::Alice.index()] ^ parity)
}

pub fn agent_key_bit(round: &HbbRound, party: Party) -> Result<Bit, HbbError> {
    round.key_parity()?;
    match party {
        Party::Alice => Err(HbbError::NotAnAgent(party)),
        _ => Ok(round.true_bits[party.index()]),
    }
}

/// Runs one round. `is_sample` is Alice's post-sifting choice; it only
/// applies to kept rounds and Bob learns it after all bases are public.
pub fn run_round<R: Rng + ?Sized>(round_id: u64, attack: AttackStrategy, is_sample: bool, rng: &mut R) -> HbbRound {
    let joint = ghz3(&["A", "B", "C"]).expect("three distinct labels");
    let tap = adversary::tap_channel(attack, joint, "C", AGENT_BASES, rng).expect("channel C is in flight");

    let bases = [
        pick(&AGENT_BASES, rng),
        pick(&AGENT_BASES, rng),
        pick(&AGENT_BASES, rng),
    ];
    let (bit_a, joint) = tap.state.measure_one("A", bases[0], rng.random()).expect("A present");
    let (bit_c, joint) = joint
        .measure_one(&tap.delivered, bases[2], rng.random())
        .expect("delivered photon present");

    let sift = sift_decision(bases).expect("x/y bases only");
    let is_sample = is_sample && sift.is_kept();
    let bob = adversary::bob_turn(attack, &joint, tap.log, bases[1], bases[2], sift, is_sample, None, rng)
        .expect("stored photons present");

    let (announced_bits, check_passed) = match sift {
        Sift::Kept { expected_parity } if is_sample => {
            let announced = [bit_a, bob.announced, bit_c];
            let parity = announced[0] ^ announced[1] ^ announced[2];
            (Some(announced), Some(parity == expected_parity))
        }
        _ => (None, None),
    };

    HbbRound {
        round_id,
        bases,
        true_bits: [bit_a, bob.true_bit, bit_c],
        announced_bits,
        sift,
        is_sample,
        check_passed,
        attacker_log: bob.log,
    }
}

/// Draws Alice's sample flag from the round stream, then runs the round.
pub fn run_sampled_round<R: Rng + ?Sized>(
    round_id: u64,
    attack: AttackStrategy,
    sample_frac: f64,
    rng: &mut R,
) -> HbbRound {
    let is_sample = chance(sample_frac, rng);
    run_round(round_id, attack, is_sample, rng)
}
