//! Decoy-photon checking.
//!
//! With probability `1 − p` Alice replaces both channel photons of a round by
//! single-photon decoys drawn uniformly from the eigenstates of the agents'
//! two bases. Once bases are public each agent reports the decoy outcome to
//! Alice alone, so the check on channel C never involves Bob's data.

use rand::Rng;
use serde::Serialize;

use crate::adversary::{self, AttackStrategy};
use crate::hbb99;
use crate::qstate::{ghz3, make_ket, Basis, Bit, PureState};
use crate::stream::{chance, pick};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Channel {
    B,
    C,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct DecoyRecord {
    pub round_id: u64,
    pub channel: Channel,
    pub prep_basis: Basis,
    pub prep_bit: Bit,
    pub agent_basis: Basis,
    pub agent_bit: Bit,
    pub matched: bool,
    pub error: bool,
}

impl DecoyRecord {
    pub fn new(round_id: u64, channel: Channel, prep: (Basis, Bit), agent: (Basis, Bit)) -> DecoyRecord {
        let matched = prep.0 == agent.0;
        DecoyRecord {
            round_id,
            channel,
            prep_basis: prep.0,
            prep_bit: prep.1,
            agent_basis: agent.0,
            agent_bit: agent.1,
            matched,
            error: matched && prep.1 != agent.1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Decoy {
    pub state: PureState,
    pub basis: Basis,
    pub bit: Bit,
}

/// Uniform over the four eigenstates of `bases` (x and y for the GHZ scheme).
pub fn decoy_source<R: Rng + ?Sized>(bases: [Basis; 2], label: &str, rng: &mut R) -> Decoy {
    let basis = pick(&bases, rng);
    let bit = pick(&Bit::ALL, rng);
    Decoy {
        state: make_ket(bit, basis, label),
        basis,
        bit,
    }
}

/// A decoy carved out of a GHZ triplet: B and C are measured in random x/y
/// bases and the collapsed A becomes the decoy. The triplet is used up.
#[derive(Debug, Clone)]
pub struct GhzDecoy {
    pub decoy: Decoy,
    /// Bases and outcomes of the consumed B and C.
    pub consumed: [(Basis, Bit); 2],
}

pub fn ghz_decoy_source<R: Rng + ?Sized>(label: &str, rng: &mut R) -> GhzDecoy {
    let basis_b = pick(&hbb99::AGENT_BASES, rng);
    let basis_c = pick(&hbb99::AGENT_BASES, rng);
    let ghz = ghz3(&["A", "B", "C"]).expect("distinct labels");
    let (bit_b, rest) = ghz.measure_one("B", basis_b, rng.random()).expect("B present");
    let (bit_c, rest) = rest.measure_one("C", basis_c, rng.random()).expect("C present");

    // A lands in x when B and C share a basis, in y otherwise; its bit closes
    // the parity of the resulting kept triple.
    let basis_a = if basis_b == basis_c { Basis::X } else { Basis::Y };
    let parity = hbb99::sift_decision([basis_a, basis_b, basis_c])
        .expect("x/y bases")
        .expected_parity()
        .expect("triple is kept by construction");
    let bit_a = parity ^ bit_b ^ bit_c;
    let state = PureState::new(&[label], rest.amplitudes().to_vec()).expect("single qubit residual");
    GhzDecoy {
        decoy: Decoy {
            state,
            basis: basis_a,
            bit: bit_a,
        },
        consumed: [(basis_b, bit_b), (basis_c, bit_c)],
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RoundKind {
    Decoy,
    Key,
}

/// `Key` with probability `p`, otherwise `Decoy`.
pub fn inject_decoys<R: Rng + ?Sized>(p: f64, rng: &mut R) -> RoundKind {
    if chance(p, rng) {
        RoundKind::Key
    } else {
        RoundKind::Decoy
    }
}

/// A decoy round: both channel photons are decoys, channel C passes through
/// the same tap as a genuine photon, and each agent measures in a random
/// basis from `agent_bases`.
pub fn decoy_round<R: Rng + ?Sized>(
    round_id: u64,
    attack: AttackStrategy,
    agent_bases: [Basis; 2],
    rng: &mut R,
) -> [DecoyRecord; 2] {
    let to_bob = decoy_source(agent_bases, "B", rng);
    let to_charlie = decoy_source(agent_bases, "C", rng);
    let joint = to_bob.state.tensor(&to_charlie.state).expect("distinct labels");
    let tap = adversary::tap_channel(attack, joint, "C", agent_bases, rng).expect("C in flight");

    let basis_b = pick(&agent_bases, rng);
    let basis_c = pick(&agent_bases, rng);
    let (bit_c, rest) = tap
        .state
        .measure_one(&tap.delivered, basis_c, rng.random())
        .expect("delivered photon present");
    let (bit_b, _) = rest.measure_one("B", basis_b, rng.random()).expect("B present");

    [
        DecoyRecord::new(round_id, Channel::B, (to_bob.basis, to_bob.bit), (basis_b, bit_b)),
        DecoyRecord::new(
            round_id,
            Channel::C,
            (to_charlie.basis, to_charlie.bit),
            (basis_c, bit_c),
        ),
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecoyCheck {
    pub matched: u64,
    pub errors: u64,
    pub error_rate: f64,
}

/// Error rate over matched decoys of one channel. Each record pairs Alice's
/// preparation with that channel's agent only.
pub fn decoy_check(records: &[DecoyRecord], channel: Channel) -> DecoyCheck {
    let (matched, errors) = records
        .iter()
        .filter(|r| r.channel == channel && r.matched)
        .fold((0u64, 0u64), |(m, e), r| (m + 1, e + u64::from(r.error)));
    DecoyCheck {
        matched,
        errors,
        error_rate: if matched == 0 {
            0.0
        } else {
            errors as f64 / matched as f64
        },
    }
}

/// When an observed error count flags an attack.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DetectionRule {
    /// From this many checked items on, any error flags.
    pub min_checked: u64,
    /// Below `min_checked`, flag when the error rate exceeds this.
    pub small_sample_rate: f64,
}

impl Default for DetectionRule {
    fn default() -> Self {
        DetectionRule {
            min_checked: 4,
            small_sample_rate: 0.1,
        }
    }
}

impl DetectionRule {
    pub fn flags(&self, checked: u64, errors: u64) -> bool {
        if checked == 0 {
            return false;
        }
        let rate = errors as f64 / checked as f64;
        if checked >= self.min_checked {
            rate > 0.0
        } else {
            rate > self.small_sample_rate
        }
    }
}
