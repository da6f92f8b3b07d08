//! Seeded Monte Carlo experiments over many rounds, and their reports.
//!
//! Round `k` draws everything from `stream::round_stream(seed, k)` in this
//! order: the decoy/key choice (decoy defense only), then for key rounds the
//! sample flag followed by the protocol's own draws. Per-round results are
//! reduced with integer counts and boolean conjunctions only, so serial and
//! parallel runs produce identical reports.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::adversary::{AttackStrategy, CheatMode};
use crate::decoy::{self, Channel, DecoyRecord, DetectionRule, RoundKind};
use crate::hbb99::{self, HbbRound};
use crate::kki::{self, KkiRound, KkiSettings, StateReveal};
use crate::qstate::Basis;
use crate::stream::round_stream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Protocol {
    Hbb99,
    Kki,
}

impl Protocol {
    pub fn agent_bases(self) -> [Basis; 2] {
        match self {
            Protocol::Hbb99 => hbb99::AGENT_BASES,
            Protocol::Kki => kki::AGENT_BASES,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum AttackKind {
    None,
    InterceptResend,
    FakeSignal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum CheatModeArg {
    Forge,
    Unitary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum RevealArg {
    Before,
    After,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Defense {
    None,
    Decoy,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub protocol: Protocol,
    pub attack: AttackKind,
    pub cheat_mode: Option<CheatModeArg>,
    pub state_reveal: Option<RevealArg>,
    pub defense: Defense,
    /// Probability that a round is a key round under the decoy defense.
    pub decoy_p: f64,
    pub rounds: u64,
    pub sample_frac: f64,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            protocol: Protocol::Hbb99,
            attack: AttackKind::None,
            cheat_mode: None,
            state_reveal: None,
            defense: Defense::None,
            decoy_p: 0.8,
            rounds: 10_000,
            sample_frac: 0.2,
            seed: 0,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("--cheat-mode applies only to --attack fake-signal")]
    CheatModeWithoutFakeSignal,
    #[error("--cheat-mode applies only to --protocol kki")]
    CheatModeOnHbb99,
    #[error("--state-reveal applies only to --protocol kki")]
    StateRevealOnHbb99,
    #[error("--cheat-mode unitary requires --state-reveal before")]
    UnitaryNeedsEarlyReveal,
    #[error("{name} must lie in [0, 1], got {value}")]
    ProbabilityOutOfRange { name: &'static str, value: f64 },
    #[error("--rounds must be at least 1")]
    NoRounds,
}

impl SimConfig {
    /// Checks the config and fills protocol-specific defaults (forge mode,
    /// late reveal) so the echoed config says what actually ran.
    pub fn resolve(&self) -> Result<SimConfig, ConfigError> {
        for (name, value) in [("decoy-p", self.decoy_p), ("sample-frac", self.sample_frac)] {
            if !(0.0..=1.0).contains(&value) {
                return Err(ConfigError::ProbabilityOutOfRange { name, value });
            }
        }
        if self.rounds == 0 {
            return Err(ConfigError::NoRounds);
        }
        let mut cfg = *self;
        match self.protocol {
            Protocol::Hbb99 => {
                if self.state_reveal.is_some() {
                    return Err(ConfigError::StateRevealOnHbb99);
                }
                if self.cheat_mode.is_some() {
                    return Err(if self.attack == AttackKind::FakeSignal {
                        ConfigError::CheatModeOnHbb99
                    } else {
                        ConfigError::CheatModeWithoutFakeSignal
                    });
                }
            }
            Protocol::Kki => {
                if self.cheat_mode.is_some() && self.attack != AttackKind::FakeSignal {
                    return Err(ConfigError::CheatModeWithoutFakeSignal);
                }
                if self.attack == AttackKind::FakeSignal && cfg.cheat_mode.is_none() {
                    cfg.cheat_mode = Some(CheatModeArg::Forge);
                }
                let reveal = *cfg.state_reveal.get_or_insert(RevealArg::After);
                if cfg.cheat_mode == Some(CheatModeArg::Unitary) && reveal != RevealArg::Before {
                    return Err(ConfigError::UnitaryNeedsEarlyReveal);
                }
            }
        }
        Ok(cfg)
    }

    fn attack_strategy(&self) -> AttackStrategy {
        match self.attack {
            AttackKind::None => AttackStrategy::None,
            AttackKind::InterceptResend => AttackStrategy::InterceptResend,
            AttackKind::FakeSignal => AttackStrategy::FakeSignalCheat(match self.cheat_mode {
                Some(CheatModeArg::Unitary) => CheatMode::Unitary,
                _ => CheatMode::Forge,
            }),
        }
    }

    fn reveal(&self) -> StateReveal {
        match self.state_reveal {
            Some(RevealArg::Before) => StateReveal::Before,
            _ => StateReveal::After,
        }
    }
}

/// Everything one round produced.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RoundRecord {
    Hbb99(HbbRound),
    Kki(KkiRound),
    Decoy { round_id: u64, records: [DecoyRecord; 2] },
}

/// A config that passed [`SimConfig::resolve`], ready to run rounds.
#[derive(Debug, Clone, Copy)]
pub struct Experiment {
    config: SimConfig,
    attack: AttackStrategy,
    kki: KkiSettings,
}

impl Experiment {
    pub fn new(config: &SimConfig) -> Result<Experiment, ConfigError> {
        let config = config.resolve()?;
        let attack = config.attack_strategy();
        let kki = KkiSettings::new(attack, config.reveal()).map_err(|_| ConfigError::UnitaryNeedsEarlyReveal)?;
        Ok(Experiment { config, attack, kki })
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn round(&self, round_id: u64) -> RoundRecord {
        let cfg = &self.config;
        let mut rng = round_stream(cfg.seed, round_id);
        if cfg.defense == Defense::Decoy && decoy::inject_decoys(cfg.decoy_p, &mut rng) == RoundKind::Decoy {
            let records = decoy::decoy_round(round_id, self.attack, cfg.protocol.agent_bases(), &mut rng);
            return RoundRecord::Decoy { round_id, records };
        }
        match cfg.protocol {
            Protocol::Hbb99 => RoundRecord::Hbb99(hbb99::run_sampled_round(
                round_id,
                self.attack,
                cfg.sample_frac,
                &mut rng,
            )),
            Protocol::Kki => RoundRecord::Kki(kki::run_sampled_round(round_id, &self.kki, cfg.sample_frac, &mut rng)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Serial,
    Parallel,
}

/// Integer tallies; merging is associative and commutative.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Tally {
    rounds: u64,
    decoy_rounds: u64,
    kept: u64,
    samples: u64,
    failed_samples: u64,
    key_bits: u64,
    key_identity_ok: u64,
    stolen: u64,
    stolen_correct: u64,
    secret_correct: u64,
    matched: [u64; 2],
    decoy_errors: [u64; 2],
}

impl Tally {
    const EMPTY: Tally = Tally {
        rounds: 0,
        decoy_rounds: 0,
        kept: 0,
        samples: 0,
        failed_samples: 0,
        key_bits: 0,
        key_identity_ok: 0,
        stolen: 0,
        stolen_correct: 0,
        secret_correct: 0,
        matched: [0; 2],
        decoy_errors: [0; 2],
    };

    fn merge(self, o: Tally) -> Tally {
        Tally {
            rounds: self.rounds + o.rounds,
            decoy_rounds: self.decoy_rounds + o.decoy_rounds,
            kept: self.kept + o.kept,
            samples: self.samples + o.samples,
            failed_samples: self.failed_samples + o.failed_samples,
            key_bits: self.key_bits + o.key_bits,
            key_identity_ok: self.key_identity_ok + o.key_identity_ok,
            stolen: self.stolen + o.stolen,
            stolen_correct: self.stolen_correct + o.stolen_correct,
            secret_correct: self.secret_correct + o.secret_correct,
            matched: [self.matched[0] + o.matched[0], self.matched[1] + o.matched[1]],
            decoy_errors: [
                self.decoy_errors[0] + o.decoy_errors[0],
                self.decoy_errors[1] + o.decoy_errors[1],
            ],
        }
    }

    fn of(record: &RoundRecord) -> Tally {
        let mut t = Tally {
            rounds: 1,
            ..Tally::EMPTY
        };
        match record {
            RoundRecord::Decoy { records, .. } => {
                t.decoy_rounds = 1;
                for (slot, channel) in [Channel::B, Channel::C].into_iter().enumerate() {
                    let check = decoy::decoy_check(records, channel);
                    t.matched[slot] = check.matched;
                    t.decoy_errors[slot] = check.errors;
                }
            }
            RoundRecord::Hbb99(r) => {
                let key = hbb99::alice_key_bit(r).ok().map(|ka| {
                    let kb = r.true_bits[1];
                    let kc = r.true_bits[2];
                    (ka, ka == kb ^ kc)
                });
                t.add_round(
                    r.sift.is_kept(),
                    r.check_passed,
                    key,
                    r.true_bits[2],
                    r.attacker_log.as_ref(),
                );
            }
            RoundRecord::Kki(r) => {
                let key = match (r.sift.expected_parity(), r.is_sample) {
                    (Some(p), false) => Some((p, r.true_bits[0] ^ r.true_bits[1] == p)),
                    _ => None,
                };
                t.add_round(
                    r.sift.is_kept(),
                    r.check_passed,
                    key,
                    r.true_bits[1],
                    r.attacker_log.as_ref(),
                );
            }
        }
        t
    }

    fn add_round(
        &mut self,
        kept: bool,
        check: Option<bool>,
        key: Option<(crate::qstate::Bit, bool)>,
        charlie_bit: crate::qstate::Bit,
        log: Option<&crate::adversary::AttackLog>,
    ) {
        self.kept = u64::from(kept);
        if let Some(ok) = check {
            self.samples = 1;
            self.failed_samples = u64::from(!ok);
        }
        if let Some((secret, identity_ok)) = key {
            self.key_bits = 1;
            self.key_identity_ok = u64::from(identity_ok);
            if let Some(log) = log {
                if let Some(stolen) = log.stolen_bit {
                    self.stolen = 1;
                    self.stolen_correct = u64::from(stolen == charlie_bit);
                }
                self.secret_correct = u64::from(log.reconstructed_secret == Some(secret));
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub config: SimConfig,
    pub rounds: u64,
    pub decoy_rounds: u64,
    pub kept: u64,
    pub discarded: u64,
    pub samples: u64,
    pub failed_samples: u64,
    /// Kept rounds not used as samples.
    pub key_bits: u64,
    pub matched_decoys_b: u64,
    pub matched_decoys_c: u64,
    pub decoy_errors_b: u64,
    pub decoy_errors_c: u64,
    pub sift_rate: f64,
    pub sample_error_rate: f64,
    pub decoy_error_rate_b: f64,
    pub decoy_error_rate_c: f64,
    /// Fraction of key bits where the agents' bits reproduce Alice's secret.
    pub key_identity_rate: Option<f64>,
    pub detected: bool,
    /// Fraction of Charlie's key bits Bob holds a correct copy of.
    pub attacker_recovery_rate: Option<f64>,
    /// Bob reconstructed every one of Alice's key bits on his own.
    pub alice_key_recovered: bool,
}

/// Rounds to six significant digits.
pub fn round6(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{x:.5e}").parse().expect("formatted float parses")
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        round6(num as f64 / den as f64)
    }
}

fn build_report(config: SimConfig, t: Tally, rule: DetectionRule) -> SimReport {
    let key_rounds = t.rounds - t.decoy_rounds;
    let attacked = config.attack != AttackKind::None;
    let detected = rule.flags(t.samples, t.failed_samples)
        || rule.flags(t.matched[0], t.decoy_errors[0])
        || rule.flags(t.matched[1], t.decoy_errors[1]);
    SimReport {
        config,
        rounds: t.rounds,
        decoy_rounds: t.decoy_rounds,
        kept: t.kept,
        discarded: key_rounds - t.kept,
        samples: t.samples,
        failed_samples: t.failed_samples,
        key_bits: t.key_bits,
        matched_decoys_b: t.matched[0],
        matched_decoys_c: t.matched[1],
        decoy_errors_b: t.decoy_errors[0],
        decoy_errors_c: t.decoy_errors[1],
        sift_rate: ratio(t.kept, key_rounds),
        sample_error_rate: ratio(t.failed_samples, t.samples),
        decoy_error_rate_b: ratio(t.decoy_errors[0], t.matched[0]),
        decoy_error_rate_c: ratio(t.decoy_errors[1], t.matched[1]),
        key_identity_rate: (t.key_bits > 0).then(|| ratio(t.key_identity_ok, t.key_bits)),
        detected,
        attacker_recovery_rate: (attacked && t.key_bits > 0).then(|| ratio(t.stolen_correct, t.key_bits)),
        alice_key_recovered: attacked && t.key_bits > 0 && t.secret_correct == t.key_bits,
    }
}

pub fn run_experiment(config: &SimConfig) -> Result<SimReport, ConfigError> {
    run_experiment_with(config, Execution::Parallel, DetectionRule::default())
}

pub fn run_experiment_with(
    config: &SimConfig,
    execution: Execution,
    rule: DetectionRule,
) -> Result<SimReport, ConfigError> {
    let exp = Experiment::new(config)?;
    let tally = match execution {
        Execution::Serial => (0..config.rounds)
            .map(|id| Tally::of(&exp.round(id)))
            .fold(Tally::EMPTY, Tally::merge),
        Execution::Parallel => (0..config.rounds)
            .into_par_iter()
            .map(|id| Tally::of(&exp.round(id)))
            .reduce(|| Tally::EMPTY, Tally::merge),
    };
    Ok(build_report(*exp.config(), tally, rule))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

pub fn serialize_report(report: &SimReport, format: Format) -> Vec<u8> {
    match format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(report).expect("report serializes");
            s.push('\n');
            s.into_bytes()
        }
        Format::Csv => {
            let value = serde_json::to_value(report).expect("report serializes");
            let mut header = Vec::new();
            let mut row = Vec::new();
            flatten(&value, "", &mut header, &mut row);
            let mut out = String::new();
            writeln!(out, "{}", header.join(",")).expect("string write");
            writeln!(out, "{}", row.join(",")).expect("string write");
            out.into_bytes()
        }
    }
}

/// Depth-first over objects in key order; nested keys get their parent's
/// key as a prefix (`config_seed`).
fn flatten(value: &Value, prefix: &str, header: &mut Vec<String>, row: &mut Vec<String>) {
    if let Value::Object(map) = value {
        for (k, v) in map {
            let name = format!("{prefix}{k}");
            match v {
                Value::Object(_) => flatten(v, &format!("{name}_"), header, row),
                _ => {
                    header.push(name);
                    row.push(scalar(v));
                }
            }
        }
    }
}

fn scalar(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}
