//! The three-phase protocol: distribute entangled pairs, test a sacrificed
//! subset for eavesdropping, then measure the survivors to agree on a gate
//! string.
//!
//! The eavesdropping test is a CHSH estimate over sacrificed pairs, which
//! at that stage are all `|Phi+>`: Bob measures along `z` or `x`, Alice
//! along `pi/4` or `-pi/4`, and the combination
//! `S = |E(z,pi/4) + E(z,-pi/4) + E(x,pi/4) - E(x,-pi/4)|`
//! reaches `2*sqrt(2)` on honest pools while any measure-and-resend attack
//! caps it at 2 (and in fact drives it to `sqrt(2)` at full coverage).
//!
//! Randomness is budgeted by stream: a session master seed is split into
//! fixed child streams (parameters, distribution/Eve, check, Bob, Alice,
//! message, Eve post-processing), so identical seeds replay bit-identically
//! no matter how the phases are interleaved.

use std::f64::consts::FRAC_PI_4;

use crate::adversary::{tamper_pair, EveConfig, EveTap};
use crate::channels::channel_fidelity;
use crate::cipher::{choose_gates, decrypt, encrypt, Ciphertext, Message};
use crate::error::{Error, Result};
use crate::keys::{derive_private_key, derive_public_key, gen_secret_params, PrivateKey, PublicKey, SecretParams};
use crate::qmath::{
    apply_single, expectation, measure_one, Axis, Party, RandomSource, TwoQubitState,
};
use crate::GateTag;

/// Minimum number of sacrificed pairs for a meaningful CHSH estimate.
pub const MIN_SACRIFICE: usize = 16;

/// Whether a pair reached the parties untouched.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Provenance {
    Honest,
    Tampered,
}

/// Shared pairs in flight, with bookkeeping of which were tampered.
#[derive(Clone, Debug)]
pub struct PairPool {
    pairs: Vec<TwoQubitState>,
    provenance: Vec<Provenance>,
}

impl PairPool {
    pub fn new() -> PairPool {
        PairPool {
            pairs: Vec::new(),
            provenance: Vec::new(),
        }
    }

    pub fn push(&mut self, state: TwoQubitState, provenance: Provenance) {
        self.pairs.push(state);
        self.provenance.push(provenance);
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn pair(&self, i: usize) -> &TwoQubitState {
        &self.pairs[i]
    }

    pub fn provenance(&self, i: usize) -> Provenance {
        self.provenance[i]
    }

    pub(crate) fn set_pair(&mut self, i: usize, state: TwoQubitState) {
        self.pairs[i] = state;
    }
}

impl Default for PairPool {
    fn default() -> Self {
        PairPool::new()
    }
}

/// Measurement outcomes: one label per pair plus the axis it was read along.
#[derive(Clone, Debug, PartialEq)]
pub struct OutcomeString {
    labels: Vec<u8>,
    axes: Vec<Axis>,
}

impl OutcomeString {
    pub fn new(labels: Vec<u8>, axes: Vec<Axis>) -> Result<OutcomeString> {
        if labels.len() != axes.len() {
            return Err(Error::LengthMismatch {
                what: "axes",
                got: axes.len(),
                want: labels.len(),
            });
        }
        for (index, &l) in labels.iter().enumerate() {
            if l > 1 {
                return Err(Error::InvalidBit { index, value: l });
            }
        }
        Ok(OutcomeString { labels, axes })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }
}

/// Outcome of the eavesdropping test.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Clean,
    Eavesdropped,
}

impl Verdict {
    pub fn name(self) -> &'static str {
        match self {
            Verdict::Clean => "clean",
            Verdict::Eavesdropped => "eavesdropped",
        }
    }
}

/// Result of sacrificing pairs for the CHSH estimate.
#[derive(Clone, Debug)]
pub struct EveCheckReport {
    pub sacrificed: usize,
    /// Sacrificed pool positions, sorted ascending.
    pub sacrificed_indices: Vec<usize>,
    pub s_estimate: f64,
    pub threshold: f64,
    pub verdict: Verdict,
}

/// Bob's CHSH measurement settings.
pub fn chsh_bob_settings() -> [Axis; 2] {
    [Axis::z(), Axis::x()]
}

/// Alice's CHSH measurement settings.
pub fn chsh_alice_settings() -> [Axis; 2] {
    [Axis::new(FRAC_PI_4), Axis::new(-FRAC_PI_4)]
}

/// The CHSH combination evaluated from exact expectations of one state.
pub fn exact_chsh(s: &TwoQubitState) -> f64 {
    let b = chsh_bob_settings();
    let a = chsh_alice_settings();
    let e = |i: usize, j: usize| expectation(s, b[i], a[j]);
    (e(0, 0) + e(0, 1) + e(1, 0) - e(1, 1)).abs()
}

/// Creates `m` shared `|Phi+>` pairs, optionally letting Eve tamper.
///
/// With an Eve configuration present, each pair is independently touched
/// with probability `coverage`; touched pairs are measured and resent per
/// the strategy. Returns the pool and, per pair, Eve's tap record if any.
pub fn distribute_with_taps(
    m: usize,
    rng: &mut RandomSource,
    eve: Option<&EveConfig>,
) -> Result<(PairPool, Vec<Option<EveTap>>)> {
    if let Some(cfg) = eve {
        cfg.validate()?;
    }
    let mut pool = PairPool::new();
    let mut taps = Vec::with_capacity(m);
    let honest = crate::channels::ChannelId::PhiPlus.state();
    for index in 0..m {
        match eve {
            Some(cfg) if rng.unit_f64() < cfg.coverage => {
                let (state, axis, label) = tamper_pair(&honest, cfg, rng)?;
                pool.push(state, Provenance::Tampered);
                taps.push(Some(EveTap {
                    pair_index: index,
                    axis,
                    label,
                }));
            }
            _ => {
                pool.push(honest, Provenance::Honest);
                taps.push(None);
            }
        }
    }
    Ok((pool, taps))
}

/// Creates `m` shared pairs; see [`distribute_with_taps`].
pub fn distribute_pairs(
    m: usize,
    rng: &mut RandomSource,
    eve: Option<&EveConfig>,
) -> Result<PairPool> {
    distribute_with_taps(m, rng, eve).map(|(pool, _)| pool)
}

/// Sacrifices `ceil(fraction * len)` random pairs for a CHSH estimate and
/// returns the verdict plus the surviving pool (original order).
///
/// Per sacrificed pair the draw order is: Bob's setting, Alice's setting,
/// Bob's outcome, Alice's outcome.
pub fn eavesdrop_check(
    pool: PairPool,
    fraction: f64,
    threshold: f64,
    rng: &mut RandomSource,
) -> Result<(EveCheckReport, PairPool)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidFraction(fraction));
    }
    let m = pool.len();
    let k = (fraction * m as f64).ceil() as usize;
    if k < MIN_SACRIFICE {
        return Err(Error::InsufficientSacrifice {
            got: k,
            min: MIN_SACRIFICE,
        });
    }

    // Partial Fisher-Yates: the first k slots become the sacrifice.
    let mut order: Vec<usize> = (0..m).collect();
    for i in 0..k {
        let j = i + rng.below((m - i) as u64) as usize;
        order.swap(i, j);
    }

    let bob_axes = chsh_bob_settings();
    let alice_axes = chsh_alice_settings();
    let mut sums = [[0.0f64; 2]; 2];
    let mut counts = [[0u64; 2]; 2];
    for &idx in &order[..k] {
        let bs = rng.below(2) as usize;
        let asn = rng.below(2) as usize;
        let (lb, collapsed) = measure_one(pool.pair(idx), bob_axes[bs], Party::Bob, rng);
        let (la, _) = measure_one(&collapsed, alice_axes[asn], Party::Alice, rng);
        let product = f64::from(1 - 2 * i32::from(lb)) * f64::from(1 - 2 * i32::from(la));
        sums[bs][asn] += product;
        counts[bs][asn] += 1;
    }
    // An empty cell contributes 0 correlation, which can only lower S;
    // with >= 16 sacrificed pairs this is conservative, never permissive.
    let e = |b: usize, a: usize| {
        if counts[b][a] == 0 {
            0.0
        } else {
            sums[b][a] / counts[b][a] as f64
        }
    };
    let s_estimate = (e(0, 0) + e(0, 1) + e(1, 0) - e(1, 1)).abs();
    let verdict = if s_estimate > threshold {
        Verdict::Clean
    } else {
        Verdict::Eavesdropped
    };

    let mut sacrificed_indices: Vec<usize> = order[..k].to_vec();
    sacrificed_indices.sort_unstable();
    let mut is_sacrificed = vec![false; m];
    for &i in &sacrificed_indices {
        is_sacrificed[i] = true;
    }
    let mut remaining = PairPool::new();
    for (i, &gone) in is_sacrificed.iter().enumerate() {
        if !gone {
            remaining.push(*pool.pair(i), pool.provenance(i));
        }
    }
    Ok((
        EveCheckReport {
            sacrificed: k,
            sacrificed_indices,
            s_estimate,
            threshold,
            verdict,
        },
        remaining,
    ))
}

/// Alice turns the first `n` surviving pairs into her chosen channels by
/// applying the per-pair gate to her half. Extra pairs are dropped.
pub fn apply_channel_gates(pool: PairPool, params: &SecretParams) -> Result<PairPool> {
    let n = params.n();
    if pool.len() < n {
        return Err(Error::PoolTooSmall {
            got: pool.len(),
            want: n,
        });
    }
    let mut out = PairPool::new();
    for i in 0..n {
        let state = apply_single(&params.gates()[i].matrix(), pool.pair(i), Party::Alice)?;
        out.push(state, pool.provenance(i));
    }
    Ok(out)
}

/// Bob measures pair `i` along his public axis `i`.
pub fn bob_measure(
    pool: &mut PairPool,
    key: &PublicKey,
    rng: &mut RandomSource,
) -> Result<OutcomeString> {
    if pool.len() != key.n() {
        return Err(Error::LengthMismatch {
            what: "pair pool",
            got: pool.len(),
            want: key.n(),
        });
    }
    let mut labels = Vec::with_capacity(key.n());
    for i in 0..key.n() {
        let (label, collapsed) = measure_one(pool.pair(i), key.axes()[i], Party::Bob, rng);
        pool.set_pair(i, collapsed);
        labels.push(label);
    }
    OutcomeString::new(labels, key.axes().to_vec())
}

/// Alice measures pair `i` along her private line `i`.
pub fn alice_measure(
    pool: &mut PairPool,
    key: &PrivateKey,
    rng: &mut RandomSource,
) -> Result<OutcomeString> {
    if pool.len() != key.n() {
        return Err(Error::LengthMismatch {
            what: "pair pool",
            got: pool.len(),
            want: key.n(),
        });
    }
    let mut labels = Vec::with_capacity(key.n());
    for i in 0..key.n() {
        let (label, collapsed) = measure_one(pool.pair(i), key.axes()[i], Party::Alice, rng);
        pool.set_pair(i, collapsed);
        labels.push(label);
    }
    OutcomeString::new(labels, key.axes().to_vec())
}

/// Reconstructs Bob's labels from Alice's: equal where the correlation
/// sign is +1, flipped where it is -1. Exact, never statistical.
pub fn infer_bob_outcomes(ka: &OutcomeString, key: &PrivateKey) -> Result<OutcomeString> {
    if ka.len() != key.n() {
        return Err(Error::LengthMismatch {
            what: "alice outcomes",
            got: ka.len(),
            want: key.n(),
        });
    }
    let labels = ka
        .labels()
        .iter()
        .zip(key.corr_signs())
        .map(|(&l, &s)| if s == 1 { l } else { 1 - l })
        .collect();
    let public_axes = derive_public_key(key.params()).axes().to_vec();
    OutcomeString::new(labels, public_axes)
}

/// Sizing and thresholds for one protocol session.
#[derive(Clone, Copy, Debug)]
pub struct SessionConfig {
    pub n: usize,
    pub m: usize,
    pub fraction: f64,
    pub threshold: f64,
}

impl SessionConfig {
    /// Smallest pool that leaves `n` pairs after sacrificing, plus a margin.
    pub fn default_m(n: usize, fraction: f64) -> usize {
        (n as f64 / (1.0 - fraction)).ceil() as usize + MIN_SACRIFICE
    }

    pub fn new(n: usize, m: usize, fraction: f64, threshold: f64) -> Result<SessionConfig> {
        let cfg = SessionConfig {
            n,
            m,
            fraction,
            threshold,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::EmptyKey);
        }
        if !(self.fraction > 0.0 && self.fraction < 1.0) {
            return Err(Error::InvalidFraction(self.fraction));
        }
        if !(self.threshold > 0.0 && self.threshold < 4.0) || !self.threshold.is_finite() {
            return Err(Error::InvalidField {
                field: "threshold",
                reason: format!("{} outside (0, 4)", self.threshold),
            });
        }
        let k = (self.fraction * self.m as f64).ceil() as usize;
        if k < MIN_SACRIFICE {
            return Err(Error::InsufficientSacrifice {
                got: k,
                min: MIN_SACRIFICE,
            });
        }
        if self.m - k < self.n {
            return Err(Error::PoolTooSmall {
                got: self.m - k,
                want: self.n,
            });
        }
        Ok(())
    }
}

/// Outcome strings of a completed key agreement.
#[derive(Clone, Debug)]
pub struct AgreedKeys {
    pub kb: OutcomeString,
    pub ka: OutcomeString,
    pub inferred_kb: OutcomeString,
}

/// Everything the message-free part of a session produces.
#[derive(Clone, Debug)]
pub struct KeyAgreement {
    pub config: SessionConfig,
    pub params: SecretParams,
    pub public_key: PublicKey,
    pub private_key: PrivateKey,
    pub check: EveCheckReport,
    /// Eve's per-pair tap records, indexed like the distributed pool.
    pub eve_taps: Vec<Option<EveTap>>,
    /// Original pool positions of the pairs used for the key, in order.
    pub used_pair_indices: Vec<usize>,
    /// `None` when the check aborted the session.
    pub keys: Option<AgreedKeys>,
}

/// Everything phase II and III produced when the check passed.
#[derive(Clone, Debug)]
pub struct SessionCompletion {
    pub kb: OutcomeString,
    pub ka: OutcomeString,
    pub inferred_kb: OutcomeString,
    pub cipher_gates: Vec<GateTag>,
    pub ciphertext: Ciphertext,
    pub decrypted: Message,
    /// Per-qubit squared overlap of decrypted vs original plaintext.
    pub fidelities: Vec<f64>,
    pub recovered: bool,
}

/// How a session ended.
#[derive(Clone, Debug)]
pub enum SessionOutcome {
    /// The CHSH verdict was `Eavesdropped`; the session stopped.
    Aborted,
    Completed(Box<SessionCompletion>),
}

/// Full record of one protocol session.
#[derive(Clone, Debug)]
pub struct SessionRun {
    pub config: SessionConfig,
    pub params: SecretParams,
    pub public_key: PublicKey,
    pub private_key: PrivateKey,
    pub check: EveCheckReport,
    /// Eve's per-pair tap records, indexed like the distributed pool.
    pub eve_taps: Vec<Option<EveTap>>,
    /// Original pool positions of the pairs used for the key, in order.
    pub used_pair_indices: Vec<usize>,
    pub outcome: SessionOutcome,
}

impl SessionRun {
    pub fn aborted(&self) -> bool {
        matches!(self.outcome, SessionOutcome::Aborted)
    }
}

/// Child-stream indices of the session master seed. Every phase draws from
/// its own stream, so consuming more or less randomness in one phase never
/// shifts another.
pub mod stream {
    pub const PARAMS: u64 = 0;
    pub const DISTRIBUTE: u64 = 1;
    pub const CHECK: u64 = 2;
    pub const BOB: u64 = 3;
    pub const ALICE: u64 = 4;
}

/// Runs the message-free part of a session: keys, distribution, the
/// eavesdropping check, and (unless aborted) both measurement phases plus
/// inference. Bob's encryption gates follow from `keys.kb`, Alice's
/// decryption gates from `keys.inferred_kb`; neither depends on any
/// message, so a session can be replayed from its seed alone.
pub fn run_key_agreement(
    config: &SessionConfig,
    eve: Option<&EveConfig>,
    master: &RandomSource,
) -> Result<KeyAgreement> {
    config.validate()?;
    let params = gen_secret_params(config.n, &mut master.split(stream::PARAMS))?;
    let public_key = derive_public_key(&params);
    let private_key = derive_private_key(&params)?;

    let (pool, eve_taps) =
        distribute_with_taps(config.m, &mut master.split(stream::DISTRIBUTE), eve)?;
    let (check, remaining) = eavesdrop_check(
        pool,
        config.fraction,
        config.threshold,
        &mut master.split(stream::CHECK),
    )?;

    // Original indices of survivors, in order; the first n become the key.
    let mut is_sacrificed = vec![false; config.m];
    for &i in &check.sacrificed_indices {
        is_sacrificed[i] = true;
    }
    let used_pair_indices: Vec<usize> = (0..config.m)
        .filter(|&i| !is_sacrificed[i])
        .take(config.n)
        .collect();

    if check.verdict == Verdict::Eavesdropped {
        return Ok(KeyAgreement {
            config: *config,
            params,
            public_key,
            private_key,
            check,
            eve_taps,
            used_pair_indices,
            keys: None,
        });
    }

    let mut pool = apply_channel_gates(remaining, &params)?;
    debug_assert!((0..pool.len()).all(|i| {
        pool.provenance(i) == Provenance::Tampered
            || channel_fidelity(pool.pair(i), params.channels()[i]) > 1.0 - 1e-9
    }));

    let kb = bob_measure(&mut pool, &public_key, &mut master.split(stream::BOB))?;
    let ka = alice_measure(&mut pool, &private_key, &mut master.split(stream::ALICE))?;
    let inferred_kb = infer_bob_outcomes(&ka, &private_key)?;

    Ok(KeyAgreement {
        config: *config,
        params,
        public_key,
        private_key,
        check,
        eve_taps,
        used_pair_indices,
        keys: Some(AgreedKeys {
            kb,
            ka,
            inferred_kb,
        }),
    })
}

/// Runs a complete session: keys, distribution, eavesdropping check, both
/// measurement phases, encryption by Bob and decryption by Alice.
pub fn run_session(
    config: &SessionConfig,
    message: &Message,
    eve: Option<&EveConfig>,
    master: &RandomSource,
) -> Result<SessionRun> {
    let agreement = run_key_agreement(config, eve, master)?;
    let KeyAgreement {
        config,
        params,
        public_key,
        private_key,
        check,
        eve_taps,
        used_pair_indices,
        keys,
    } = agreement;

    let keys = match keys {
        Some(keys) => keys,
        None => {
            return Ok(SessionRun {
                config,
                params,
                public_key,
                private_key,
                check,
                eve_taps,
                used_pair_indices,
                outcome: SessionOutcome::Aborted,
            })
        }
    };

    let bob_gates = choose_gates(keys.kb.labels())?;
    let alice_gates = choose_gates(keys.inferred_kb.labels())?;
    let ciphertext = encrypt(message, &bob_gates)?;
    let decrypted = decrypt(&ciphertext, &alice_gates)?;

    let fidelities: Vec<f64> = message
        .qubits()
        .iter()
        .zip(decrypted.qubits())
        .map(|(a, b)| a.fidelity(b))
        .collect();
    let recovered = fidelities.iter().all(|&f| f >= 1.0 - 1e-12);

    Ok(SessionRun {
        config,
        params,
        public_key,
        private_key,
        check,
        eve_taps,
        used_pair_indices,
        outcome: SessionOutcome::Completed(Box::new(SessionCompletion {
            kb: keys.kb,
            ka: keys.ka,
            inferred_kb: keys.inferred_kb,
            cipher_gates: bob_gates,
            ciphertext,
            decrypted,
            fidelities,
            recovered,
        })),
    })
}
