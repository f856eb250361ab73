//! Simulation library for a public-key cipher built on shared entangled
//! qubit pairs.
//!
//! Alice prepares two-qubit channels drawn from an eight-state alphabet and
//! publishes rotated measurement axes as the public key; the matching
//! private key records, per pair, which axis Alice must measure and the
//! sign of the outcome correlation. Bob's measurement outcomes select
//! Hadamard or phase-flip gates that encrypt qubit blocks; Alice recovers
//! the same gate string from her own outcomes and inverts it. A CHSH test
//! over sacrificed pairs detects intercept-resend eavesdropping, and the
//! `adversary` module quantifies what an attacker can do.

pub mod adversary;
pub mod channels;
pub mod cipher;
pub mod error;
pub mod jsonio;
pub mod keys;
pub mod protocol;
pub mod qmath;

pub use adversary::{AttackConfig, AttackReport, EveConfig, EveStrategy, EveTap};
pub use channels::{ChannelId, CorrelationMatrix, GateTag};
pub use cipher::{Ciphertext, Message, MessageOrigin, PlainQubit};
pub use error::{Error, Result};
pub use keys::{BaseOp, PrivateKey, PublicKey, SecretParams};
pub use protocol::{
    AgreedKeys, EveCheckReport, KeyAgreement, OutcomeString, PairPool, SessionConfig,
    SessionOutcome, SessionRun, Verdict,
};
pub use qmath::{Axis, OneQubitState, Operator2, Party, RandomSource, TwoQubitState};
