//! Simulator for GHZ and Bell-pair quantum secret sharing under a dishonest
//! agent.
//!
//! - [`qstate`]: exact state vectors over labelled qubits, measurements and
//!   Bell-basis expansion.
//! - [`hbb99`] and [`kki`]: one protocol round each, with sifting and sample
//!   checks.
//! - [`adversary`]: the fake-signal-and-cheating attack, an intercept-resend
//!   baseline, and key theft from stored photons.
//! - [`decoy`]: decoy-photon substitution and per-agent checking.
//! - [`identities`]: exhaustive algebraic checks behind `qsslab verify-identities`.
//! - [`simlab`]: seeded Monte Carlo runs, reports, serialization.

use serde::Serialize;

pub mod adversary;
pub mod decoy;
pub mod hbb99;
pub mod identities;
pub mod kki;
pub mod qstate;
pub mod simlab;
pub mod stream;

use qstate::Bit;

/// Outcome of basis sifting for a round.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Sift {
    Kept { expected_parity: Bit },
    Discarded,
}

impl Sift {
    pub fn is_kept(self) -> bool {
        matches!(self, Sift::Kept { .. })
    }

    pub fn expected_parity(self) -> Option<Bit> {
        match self {
            Sift::Kept { expected_parity } => Some(expected_parity),
            Sift::Discarded => None,
        }
    }
}
