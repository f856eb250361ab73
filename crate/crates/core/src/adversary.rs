//! Eavesdropping strategies and the security experiments that measure them.
//!
//! Two families live here. Tampering strategies (intercept and resend)
//! touch pairs in flight and are what the CHSH check is designed to catch.
//! Passive strategies never touch a pair; they model an attacker who only
//! sees public data (the key axes, the ciphertext) and try to beat chance.

use std::f64::consts::{SQRT_2, TAU};

use crate::cipher::{decrypt, encode_bits};
use crate::error::{Error, Result};
use crate::protocol::{run_session, SessionConfig, SessionOutcome};
use crate::qmath::{
    axis_of, measure_one, measure_single, overlap_single, Axis, OneQubitState, Operator2, Party,
    RandomSource, TwoQubitState,
};
use crate::GateTag;

/// What Eve does.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum EveStrategy {
    /// Measure Bob's leg of each covered pair along a fixed axis, resend
    /// the collapsed pair.
    InterceptResendFixed(Axis),
    /// Same, but with a fresh uniform random axis per pair.
    InterceptResendRandom,
    /// Never touch a pair; guess each secret channel outright.
    ChannelGuess,
    /// Never touch a pair; tell the two cipher gates apart from the
    /// ciphertext alone.
    CiphertextDistinguish,
}

impl EveStrategy {
    pub fn name(&self) -> &'static str {
        match self {
            EveStrategy::InterceptResendFixed(_) => "intercept-resend-fixed",
            EveStrategy::InterceptResendRandom => "intercept-resend-random",
            EveStrategy::ChannelGuess => "channel-guess",
            EveStrategy::CiphertextDistinguish => "ciphertext-distinguish",
        }
    }

    /// Whether the strategy disturbs pairs in flight.
    pub fn is_tamper(&self) -> bool {
        matches!(
            self,
            EveStrategy::InterceptResendFixed(_) | EveStrategy::InterceptResendRandom
        )
    }
}

/// A strategy plus how aggressively it is applied.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EveConfig {
    pub strategy: EveStrategy,
    /// Probability that any given pair is touched.
    pub coverage: f64,
    /// Also read Alice's leg of each touched pair (costs nothing extra in
    /// disturbance; the legs are perfectly correlated along Eve's axis).
    pub both_legs: bool,
}

impl EveConfig {
    pub fn new(strategy: EveStrategy, coverage: f64, both_legs: bool) -> EveConfig {
        EveConfig {
            strategy,
            coverage,
            both_legs,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.coverage.is_finite() || !(0.0..=1.0).contains(&self.coverage) {
            return Err(Error::InvalidCoverage(self.coverage));
        }
        Ok(())
    }
}

/// Record of one tampered pair: where it sat in the pool, which axis Eve
/// measured along, and the label she saw on Bob's leg.
#[derive(Clone, Copy, Debug)]
pub struct EveTap {
    pub pair_index: usize,
    pub axis: Axis,
    pub label: u8,
}

/// Measures one leg of `s` (both legs if configured) along the strategy's
/// axis and returns the resent pair plus what Eve learned.
///
/// Only the intercept-resend strategies are valid here; the passive ones
/// have nothing to do to a pair.
pub fn tamper_pair(
    s: &TwoQubitState,
    cfg: &EveConfig,
    rng: &mut RandomSource,
) -> Result<(TwoQubitState, Axis, u8)> {
    let axis = match cfg.strategy {
        EveStrategy::InterceptResendFixed(a) => a,
        EveStrategy::InterceptResendRandom => Axis::new(rng.unit_f64() * TAU),
        other => return Err(Error::NotATamperStrategy(other.name())),
    };
    let (label, collapsed) = measure_one(s, axis, Party::Bob, rng);
    let resent = if cfg.both_legs {
        let (_, read_both) = measure_one(&collapsed, axis, Party::Alice, rng);
        read_both
    } else {
        collapsed
    };
    Ok((resent, axis, label))
}

/// Outcome of a security experiment.
#[derive(Clone, Debug, serde::Serialize, serde::Deserialize)]
pub struct AttackReport {
    pub strategy: String,
    pub trials: usize,
    /// Fraction of trials the protocol aborted on.
    pub detection_rate: f64,
    /// Fraction of trials the attacker won (metric depends on the
    /// experiment; see the function that produced the report).
    pub success_rate: f64,
    /// The analytic value the observed rate should approach.
    pub theory_value: f64,
}

/// Chance that guessing all `n` secret channels goes unnoticed: each guess
/// is right with probability 1/8, independently.
pub fn undetected_prob(n: u32) -> f64 {
    0.125f64.powi(n as i32)
}

/// Eve guesses the secret channel of `pairs` pairs per trial; a trial
/// succeeds only if every guess is right. Success approaches `8^-pairs`.
pub fn joint_channel_guess_experiment(
    trials: usize,
    pairs: usize,
    rng: &mut RandomSource,
) -> Result<AttackReport> {
    if trials == 0 {
        return Err(Error::InvalidField {
            field: "trials",
            reason: "must be positive".into(),
        });
    }
    if pairs == 0 {
        return Err(Error::InvalidField {
            field: "pairs",
            reason: "must be positive".into(),
        });
    }
    let mut hits = 0usize;
    for _ in 0..trials {
        let mut all_right = true;
        for _ in 0..pairs {
            let truth = rng.below(8);
            let guess = rng.below(8);
            if truth != guess {
                all_right = false;
            }
        }
        hits += usize::from(all_right);
    }
    Ok(AttackReport {
        strategy: "channel-guess".into(),
        trials,
        detection_rate: 0.0,
        success_rate: hits as f64 / trials as f64,
        theory_value: undetected_prob(pairs as u32),
    })
}

/// Single-pair channel guessing; success approaches 1/8.
pub fn channel_guess_experiment(trials: usize, rng: &mut RandomSource) -> Result<AttackReport> {
    joint_channel_guess_experiment(trials, 1, rng)
}

fn outer(s: &OneQubitState) -> Operator2 {
    let mut m = [[num_complex::Complex64::new(0.0, 0.0); 2]; 2];
    for (r, row) in m.iter_mut().enumerate() {
        for (c, entry) in row.iter_mut().enumerate() {
            *entry = s.amp(r) * s.amp(c).conj();
        }
    }
    Operator2::new(m)
}

/// The best possible rate for telling the two cipher gates apart from one
/// ciphertext qubit with a real plaintext amplitude pair.
///
/// The two candidate ciphertexts always overlap in `1/sqrt(2)`, so the
/// optimal two-outcome measurement wins with probability
/// `(1 + sqrt(1 - 1/2)) / 2`, about 0.8536, independent of the plaintext.
pub fn distinguish_bound() -> f64 {
    0.5 * (1.0 + 0.5f64.sqrt())
}

/// Eve sees one ciphertext qubit of a known random real plaintext and
/// guesses which of the two gates produced it, using the measurement that
/// is optimal for the pair of candidates. Success approaches
/// [`distinguish_bound`], well short of certainty.
pub fn ciphertext_distinguish_experiment(
    trials: usize,
    rng: &mut RandomSource,
) -> Result<AttackReport> {
    if trials == 0 {
        return Err(Error::InvalidField {
            field: "trials",
            reason: "must be positive".into(),
        });
    }
    let h = GateTag::H.matrix();
    let z = GateTag::Z.matrix();
    let mut hits = 0usize;
    for _ in 0..trials {
        let angle = rng.unit_f64() * TAU;
        let psi = OneQubitState::from_real(angle.cos(), angle.sin()).expect("unit vector");
        let candidate0 = h.apply(&psi);
        let candidate1 = z.apply(&psi);
        let truth = rng.bit();
        let ciphertext = if truth == 0 { candidate0 } else { candidate1 };
        // The optimal discriminator measures along the axis of the
        // difference of the two candidate projectors; the positive outcome
        // votes for the first candidate.
        let mut gamma = outer(&candidate0);
        let neg = outer(&candidate1);
        let m = [
            [
                gamma.entry(0, 0) - neg.entry(0, 0),
                gamma.entry(0, 1) - neg.entry(0, 1),
            ],
            [
                gamma.entry(1, 0) - neg.entry(1, 0),
                gamma.entry(1, 1) - neg.entry(1, 1),
            ],
        ];
        gamma = Operator2::new(m);
        let eve_axis = axis_of(&gamma)?;
        let (guess, _) = measure_single(&ciphertext, eve_axis, rng);
        hits += usize::from(guess == truth);
    }
    Ok(AttackReport {
        strategy: "ciphertext-distinguish".into(),
        trials,
        detection_rate: 0.0,
        success_rate: hits as f64 / trials as f64,
        theory_value: distinguish_bound(),
    })
}

/// Expected CHSH estimate when a fraction `coverage` of pairs has been
/// intercepted and resent.
///
/// A resent pair is a product of eigenstates along Eve's axis `e`, so its
/// correlations factor: `E(a, b) = (a . e)(e . b)`. Summed over the four
/// check settings this collapses to `sqrt(2)` for every `e`, which is why
/// the value does not depend on Eve's axis choice. Untouched pairs keep
/// the full `2 sqrt(2)`, and coverage mixes the two linearly.
pub fn mixture_chsh(coverage: f64) -> f64 {
    (1.0 - coverage) * 2.0 * SQRT_2 + coverage * SQRT_2
}

/// Sizing of a full interactive attack experiment.
#[derive(Clone, Copy, Debug)]
pub struct AttackConfig {
    pub session: SessionConfig,
    pub eve: EveConfig,
    pub trials: usize,
    pub seed: u64,
    /// Worker threads; results are identical for any value.
    pub threads: usize,
}

/// Trial-local child streams, chosen clear of the session's own streams.
const STREAM_MESSAGE: u64 = 100;
const STREAM_EVE: u64 = 101;

/// Runs `trials` full sessions against an intercept-resend Eve and reports
/// how often she is caught and how often she still learns plaintext.
///
/// Per trial, a fresh random bit message of length `n` is run through the
/// session. On abort Eve is counted as detected. On completion she guesses
/// Bob's gate string (from her taps where she has them, coin flips where
/// she does not), decrypts the ciphertext with the guess, measures, and
/// the trial counts as a success if at least one plaintext bit comes out
/// right. `theory_value` is the asymptotic detection rate: 1 when the
/// expected CHSH estimate under her coverage falls below the threshold,
/// else 0.
pub fn full_attack_run(config: &AttackConfig) -> Result<AttackReport> {
    config.session.validate()?;
    config.eve.validate()?;
    if config.trials == 0 {
        return Err(Error::InvalidField {
            field: "trials",
            reason: "must be positive".into(),
        });
    }
    if !config.eve.strategy.is_tamper() {
        return Err(Error::NotATamperStrategy(config.eve.strategy.name()));
    }

    let master = RandomSource::new(config.seed);
    let run_trial = |t: u64| -> Result<(bool, bool)> {
        let trial = master.split(t);
        let mut msg_rng = trial.split(STREAM_MESSAGE);
        let bits: Vec<u8> = (0..config.session.n).map(|_| msg_rng.bit()).collect();
        let message = encode_bits(&bits)?;
        let run = run_session(&config.session, &message, Some(&config.eve), &trial)?;
        let done = match run.outcome {
            SessionOutcome::Aborted => return Ok((true, false)),
            SessionOutcome::Completed(done) => done,
        };

        let mut eve_rng = trial.split(STREAM_EVE);
        let mut gate_guess = Vec::with_capacity(config.session.n);
        for (slot, &pool_index) in run.used_pair_indices.iter().enumerate() {
            let public_axis = run.public_key.axes()[slot];
            let label_guess = match &run.eve_taps[pool_index] {
                Some(tap) => {
                    // Bob's leg of a resent pair sits in Eve's eigenstate,
                    // so his label is 0 with probability
                    // cos^2((phi_pub - phi_eve)/2); guess the likelier one.
                    let resent_leg = tap.axis.eigenstate(tap.label);
                    let p0 = overlap_single(&public_axis.eigenstate(0), &resent_leg).norm_sqr();
                    u8::from(p0 < 0.5)
                }
                None => eve_rng.bit(),
            };
            gate_guess.push(if label_guess == 0 { GateTag::H } else { GateTag::Z });
        }
        let opened = decrypt(&done.ciphertext, &gate_guess)?;
        let mut any_bit = false;
        for (i, q) in opened.qubits().iter().enumerate() {
            let (bit, _) = measure_single(q.state(), Axis::z(), &mut eve_rng);
            if bit == bits[i] {
                any_bit = true;
            }
        }
        Ok((false, any_bit))
    };

    let threads = config.threads.clamp(1, config.trials);
    let (detected, succeeded) = if threads == 1 {
        let mut d = 0usize;
        let mut s = 0usize;
        for t in 0..config.trials {
            let (det, suc) = run_trial(t as u64)?;
            d += usize::from(det);
            s += usize::from(suc);
        }
        (d, s)
    } else {
        // Strided trial assignment; counts are order-independent, so the
        // totals match the serial run exactly.
        let worker_results: Vec<Result<(usize, usize)>> = std::thread::scope(|scope| {
            let handles: Vec<_> = (0..threads)
                .map(|tid| {
                    let run_trial = &run_trial;
                    scope.spawn(move || {
                        let mut d = 0usize;
                        let mut s = 0usize;
                        let mut t = tid;
                        while t < config.trials {
                            let (det, suc) = run_trial(t as u64)?;
                            d += usize::from(det);
                            s += usize::from(suc);
                            t += threads;
                        }
                        Ok((d, s))
                    })
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("attack worker panicked"))
                .collect()
        });
        let mut d = 0usize;
        let mut s = 0usize;
        for r in worker_results {
            let (dd, ss) = r?;
            d += dd;
            s += ss;
        }
        (d, s)
    };

    let expected_s = mixture_chsh(config.eve.coverage);
    Ok(AttackReport {
        strategy: config.eve.strategy.name().into(),
        trials: config.trials,
        detection_rate: detected as f64 / config.trials as f64,
        success_rate: succeeded as f64 / config.trials as f64,
        theory_value: if expected_s < config.session.threshold {
            1.0
        } else {
            0.0
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::ChannelId;
    use crate::protocol::exact_chsh;
    use crate::qmath::{expectation, overlap, project_one, reduced_single};

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} != {b} (tol {tol})");
    }

    #[test]
    fn tampering_yields_product_states_with_the_recorded_tap() {
        let honest = ChannelId::PhiPlus.state();
        let cfg = EveConfig::new(EveStrategy::InterceptResendFixed(Axis::z()), 1.0, false);
        let mut rng = RandomSource::new(2);
        for _ in 0..50 {
            let (resent, axis, label) = tamper_pair(&honest, &cfg, &mut rng).unwrap();
            assert_eq!(axis, Axis::z());
            assert!(label <= 1);
            assert!(exact_chsh(&resent) <= 2.0 + 1e-12);
            // Product state: each reduced half is pure.
            for party in [Party::Bob, Party::Alice] {
                let rho = reduced_single(&resent, party);
                let purity = rho.mul(&rho).trace().re;
                assert_close(purity, 1.0, 1e-12);
            }
            // Bob's leg really is Eve's eigenstate.
            let eigen = axis.eigenstate(label);
            let leg = reduced_single(&resent, Party::Bob);
            let back = leg.apply(&eigen);
            assert_close(overlap_single(&eigen, &back).norm(), 1.0, 1e-12);
        }
    }

    #[test]
    fn reading_both_legs_changes_nothing_about_the_resent_state() {
        let honest = ChannelId::PhiPlus.state();
        let one_leg = EveConfig::new(EveStrategy::InterceptResendFixed(Axis::x()), 1.0, false);
        let two_leg = EveConfig::new(EveStrategy::InterceptResendFixed(Axis::x()), 1.0, true);
        let (a, _, la) = tamper_pair(&honest, &one_leg, &mut RandomSource::new(31)).unwrap();
        let (b, _, lb) = tamper_pair(&honest, &two_leg, &mut RandomSource::new(31)).unwrap();
        assert_eq!(la, lb);
        assert_close(overlap(&a, &b).norm(), 1.0, 1e-12);
    }

    #[test]
    fn passive_strategies_cannot_tamper() {
        let honest = ChannelId::PhiPlus.state();
        let cfg = EveConfig::new(EveStrategy::ChannelGuess, 1.0, false);
        assert!(matches!(
            tamper_pair(&honest, &cfg, &mut RandomSource::new(0)),
            Err(Error::NotATamperStrategy("channel-guess"))
        ));
    }

    #[test]
    fn coverage_is_validated() {
        let cfg = EveConfig::new(EveStrategy::InterceptResendRandom, 1.5, false);
        assert!(matches!(cfg.validate(), Err(Error::InvalidCoverage(_))));
        assert!(EveConfig::new(EveStrategy::InterceptResendRandom, 0.0, false)
            .validate()
            .is_ok());
    }

    #[test]
    fn resent_ensembles_average_to_sqrt_two_for_every_axis() {
        // The ensemble of both collapse outcomes, weighted by probability,
        // gives a CHSH combination of exactly sqrt(2) whatever Eve's axis.
        let honest = ChannelId::PhiPlus.state();
        let bob = crate::protocol::chsh_bob_settings();
        let alice = crate::protocol::chsh_alice_settings();
        for k in 0..16 {
            let e = Axis::new(k as f64 * TAU / 16.0);
            let mut terms = [[0.0f64; 2]; 2];
            for label in 0..2u8 {
                let (p, collapsed) = project_one(&honest, e, Party::Bob, label);
                let collapsed = collapsed.expect("both outcomes occur");
                for (i, &ba) in bob.iter().enumerate() {
                    for (j, &aa) in alice.iter().enumerate() {
                        terms[i][j] += p * expectation(&collapsed, ba, aa);
                    }
                }
            }
            let s = (terms[0][0] + terms[0][1] + terms[1][0] - terms[1][1]).abs();
            assert_close(s, SQRT_2, 1e-12);
        }
        assert_close(mixture_chsh(0.0), 2.0 * SQRT_2, 1e-15);
        assert_close(mixture_chsh(1.0), SQRT_2, 1e-15);
    }

    #[test]
    fn channel_guessing_hits_one_in_eight() {
        let mut rng = RandomSource::new(808);
        let report = channel_guess_experiment(80_000, &mut rng).unwrap();
        assert_eq!(report.theory_value, 0.125);
        assert!(
            (0.115..=0.135).contains(&report.success_rate),
            "rate {}",
            report.success_rate
        );
    }

    #[test]
    fn joint_guessing_decays_exponentially() {
        let mut rng = RandomSource::new(809);
        let two = joint_channel_guess_experiment(40_000, 2, &mut rng).unwrap();
        assert_eq!(two.theory_value, 1.0 / 64.0);
        assert_close(two.success_rate, 1.0 / 64.0, 0.0025);
        let three = joint_channel_guess_experiment(40_000, 3, &mut rng).unwrap();
        assert_close(three.success_rate, 1.0 / 512.0, 0.001);
    }

    #[test]
    fn undetected_prob_is_exact_and_decreasing() {
        for n in 1..=16u32 {
            let expected = 1.0 / 8u64.pow(n) as f64;
            assert_eq!(undetected_prob(n).to_bits(), expected.to_bits(), "n = {n}");
        }
        for n in 1..16u32 {
            assert!(undetected_prob(n + 1) < undetected_prob(n));
        }
    }

    #[test]
    fn distinguishing_reaches_the_optimal_rate_and_no_more() {
        let mut rng = RandomSource::new(5150);
        let report = ciphertext_distinguish_experiment(100_000, &mut rng).unwrap();
        assert_close(report.theory_value, 0.853_553_390_593_273_7, 1e-15);
        assert_close(report.success_rate, distinguish_bound(), 0.01);
        assert!(report.success_rate < 0.9);
    }

    #[test]
    fn experiments_reject_zero_trials() {
        let mut rng = RandomSource::new(0);
        assert!(channel_guess_experiment(0, &mut rng).is_err());
        assert!(ciphertext_distinguish_experiment(0, &mut rng).is_err());
        assert!(joint_channel_guess_experiment(10, 0, &mut rng).is_err());
    }

    fn attack_config(coverage: f64, trials: usize, threads: usize) -> AttackConfig {
        AttackConfig {
            session: SessionConfig::new(16, 2000, 0.25, 2.5).unwrap(),
            eve: EveConfig::new(EveStrategy::InterceptResendFixed(Axis::z()), coverage, false),
            trials,
            seed: 11,
            threads,
        }
    }

    #[test]
    fn full_coverage_interception_is_caught() {
        let report = full_attack_run(&attack_config(1.0, 40, 1)).unwrap();
        assert_eq!(report.theory_value, 1.0);
        assert!(report.detection_rate >= 0.9, "{}", report.detection_rate);
        assert!(report.success_rate <= 1.0 - report.detection_rate + 1e-12);
    }

    #[test]
    fn zero_coverage_rarely_false_alarms() {
        // 2048 sacrificed pairs put the honest estimate 5 sigma above the
        // threshold, so a false abort is a one-in-ten-million event.
        let mut cfg = attack_config(0.0, 100, 2);
        cfg.session = SessionConfig::new(16, 8192, 0.25, 2.5).unwrap();
        let report = full_attack_run(&cfg).unwrap();
        assert_eq!(report.theory_value, 0.0);
        assert!(report.detection_rate < 0.01, "{}", report.detection_rate);
    }

    #[test]
    fn detection_grows_with_coverage() {
        let mut rates = Vec::new();
        for &coverage in &[0.0, 0.4, 0.8, 1.0] {
            let mut cfg = attack_config(coverage, 30, 2);
            cfg.session = SessionConfig::new(8, 1500, 0.25, 2.5).unwrap();
            cfg.seed = 5;
            rates.push(full_attack_run(&cfg).unwrap().detection_rate);
        }
        assert!(rates[0] <= 0.1, "honest-ish baseline {rates:?}");
        assert!(rates[3] >= 0.9, "full coverage {rates:?}");
        for w in rates.windows(2) {
            assert!(w[1] >= w[0] - 0.15, "not monotone enough: {rates:?}");
        }
    }

    #[test]
    fn worker_count_does_not_change_the_report() {
        let serial = full_attack_run(&attack_config(0.5, 12, 1)).unwrap();
        let parallel = full_attack_run(&attack_config(0.5, 12, 4)).unwrap();
        assert_eq!(serial.detection_rate.to_bits(), parallel.detection_rate.to_bits());
        assert_eq!(serial.success_rate.to_bits(), parallel.success_rate.to_bits());
    }

    #[test]
    fn full_attack_rejects_bad_configs() {
        let mut cfg = attack_config(1.0, 0, 1);
        assert!(full_attack_run(&cfg).is_err());
        cfg.trials = 10;
        cfg.eve.strategy = EveStrategy::CiphertextDistinguish;
        assert!(matches!(
            full_attack_run(&cfg),
            Err(Error::NotATamperStrategy("ciphertext-distinguish"))
        ));
        cfg.eve = EveConfig::new(EveStrategy::InterceptResendRandom, -0.2, false);
        assert!(matches!(
            full_attack_run(&cfg),
            Err(Error::InvalidCoverage(_))
        ));
    }
}
