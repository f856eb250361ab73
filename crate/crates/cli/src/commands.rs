//! Implementations of the six subcommands.

use qpkc_core::adversary::{
    ciphertext_distinguish_experiment, full_attack_run, joint_channel_guess_experiment,
    AttackConfig, EveConfig, EveStrategy,
};
use qpkc_core::cipher::{choose_gates, decode_bits, decrypt, encode_bits, encrypt, Ciphertext};
use qpkc_core::keys::{derive_private_key, derive_public_key, gen_secret_params};
use qpkc_core::protocol::{self, run_key_agreement, run_session};
use qpkc_core::qmath::Axis;
use qpkc_core::{jsonio, MessageOrigin, RandomSource, SessionConfig};

use crate::error::{usage, CliError};
use crate::files::{read_text, sha256_hex, write_text, EveSection, SessionFile, TranscriptFile, FILE_VERSION};
use crate::{
    AttackArgs, Cli, Command, DecryptArgs, EncryptArgs, EveArgs, Format, KeygenArgs, RunArgs,
    SessionArgs, StrategyArg,
};

type CmdResult = Result<u8, CliError>;

/// Stream index for seed-derived plaintext bits, clear of the session's
/// own streams.
const MESSAGE_STREAM: u64 = 100;

pub fn dispatch(cli: Cli) -> CmdResult {
    match cli.command {
        Command::Keygen(args) => keygen(args),
        Command::Run(args) => run(args),
        Command::Encrypt(args) => encrypt_cmd(args),
        Command::Decrypt(args) => decrypt_cmd(args),
        Command::Attack(args) => attack(args),
        Command::Selftest => selftest(),
    }
}

fn resolve_seed(flag: u64) -> Result<u64, CliError> {
    match std::env::var("QPKC_SEED") {
        Ok(text) => text.trim().parse().map_err(|_| CliError::BadSeedVar(text)),
        Err(std::env::VarError::NotPresent) => Ok(flag),
        Err(std::env::VarError::NotUnicode(raw)) => Err(CliError::BadSeedVar(format!("{raw:?}"))),
    }
}

fn parse_bits(text: &str) -> Result<Vec<u8>, CliError> {
    if text.is_empty() {
        return Err(usage("message must contain at least one bit"));
    }
    text.chars()
        .map(|c| match c {
            '0' => Ok(0),
            '1' => Ok(1),
            other => Err(usage(format!("message must be 0s and 1s, got {other:?}"))),
        })
        .collect()
}

fn bits_string(bits: &[u8]) -> String {
    bits.iter().map(|&b| char::from(b'0' + b)).collect()
}

fn session_config(args: &SessionArgs) -> Result<SessionConfig, CliError> {
    let m = args
        .m
        .unwrap_or_else(|| SessionConfig::default_m(args.n, args.fraction));
    Ok(SessionConfig::new(args.n, m, args.fraction, args.threshold)?)
}

fn eve_config(strategy: StrategyArg, args: &EveArgs) -> Result<EveConfig, CliError> {
    if !args.axis.is_finite() {
        return Err(usage("axis must be finite"));
    }
    let strategy = match strategy {
        StrategyArg::InterceptResendFixed => EveStrategy::InterceptResendFixed(Axis::new(args.axis)),
        StrategyArg::InterceptResendRandom => EveStrategy::InterceptResendRandom,
        StrategyArg::ChannelGuess => EveStrategy::ChannelGuess,
        StrategyArg::CiphertextDistinguish => EveStrategy::CiphertextDistinguish,
    };
    let cfg = EveConfig::new(strategy, args.coverage, args.both_legs);
    cfg.validate()?;
    Ok(cfg)
}

fn eve_section(cfg: &EveConfig) -> EveSection {
    EveSection {
        strategy: cfg.strategy.name().into(),
        axis: match cfg.strategy {
            EveStrategy::InterceptResendFixed(a) => Some(a.radians()),
            _ => None,
        },
        coverage: cfg.coverage,
        both_legs: cfg.both_legs,
    }
}

fn keygen(args: KeygenArgs) -> CmdResult {
    let seed = resolve_seed(args.seed)?;
    // Same stream layout as a session, so `run --seed X` uses these keys.
    let mut rng = RandomSource::new(seed).split(protocol::stream::PARAMS);
    let params = gen_secret_params(args.n, &mut rng)?;
    let public = derive_public_key(&params);
    let private = derive_private_key(&params)?;
    let public_json = public.to_json()?;
    let private_json = private.to_json()?;

    if let Some(path) = &args.public {
        write_text(path, &public_json)?;
    }
    if let Some(path) = &args.private {
        write_text(path, &private_json)?;
    }

    match args.format {
        Format::Json => print!("{public_json}"),
        Format::Text => {
            println!("keypair: n={} seed={}", args.n, seed);
            let axes: Vec<String> = public
                .axes()
                .iter()
                .map(|a| a.radians().to_string())
                .collect();
            println!("public-axes: {}", axes.join(" "));
            if let Some(path) = &args.public {
                println!("public: {} sha256={}", path.display(), sha256_hex(&public_json));
            }
            if let Some(path) = &args.private {
                println!(
                    "private: {} sha256={}",
                    path.display(),
                    sha256_hex(&private_json)
                );
            }
        }
    }
    Ok(0)
}

fn run(args: RunArgs) -> CmdResult {
    let seed = resolve_seed(args.seed)?;
    let config = session_config(&args.session)?;
    let master = RandomSource::new(seed);

    let bits = match &args.message {
        Some(text) => parse_bits(text)?,
        None => {
            let mut rng = master.split(MESSAGE_STREAM);
            (0..config.n).map(|_| rng.bit()).collect()
        }
    };
    let message = encode_bits(&bits)?;

    let eve_cfg = match args.eve {
        None => None,
        Some(strategy) => {
            let cfg = eve_config(strategy, &args.eve_args)?;
            if !cfg.strategy.is_tamper() {
                return Err(usage(format!(
                    "--eve {} never touches pairs; measure it with `qpkc attack`",
                    cfg.strategy.name()
                )));
            }
            Some(cfg)
        }
    };

    let run = run_session(&config, &message, eve_cfg.as_ref(), &master)?;
    let transcript =
        TranscriptFile::from_run(&run, seed, eve_cfg.as_ref().map(eve_section), &bits)?;
    let json = transcript.to_json()?;
    if let Some(path) = &args.transcript {
        write_text(path, &json)?;
    }

    match args.format {
        Format::Json => {
            print!("{json}");
            eprintln!("fingerprint: sha256={}", sha256_hex(&json));
        }
        Format::Text => {
            println!(
                "config: n={} m={} fraction={} threshold={} seed={}",
                config.n, config.m, config.fraction, config.threshold, seed
            );
            if let Some(cfg) = &eve_cfg {
                let axis = match cfg.strategy {
                    EveStrategy::InterceptResendFixed(a) => format!(" axis={}", a.radians()),
                    _ => String::new(),
                };
                println!(
                    "eve: {}{axis} coverage={} both-legs={}",
                    cfg.strategy.name(),
                    cfg.coverage,
                    cfg.both_legs
                );
            }
            println!(
                "check: sacrificed={} s-estimate={} threshold={} verdict={}",
                run.check.sacrificed,
                run.check.s_estimate,
                run.check.threshold,
                run.check.verdict.name()
            );
            println!("outcome: {}", transcript.outcome);
            if let qpkc_core::SessionOutcome::Completed(done) = &run.outcome {
                println!("bob-labels: {}", bits_string(done.kb.labels()));
                println!("inferred-labels: {}", bits_string(done.inferred_kb.labels()));
                println!("plaintext: {}", bits_string(&bits));
                println!(
                    "decrypted: {}",
                    bits_string(&decode_bits(&done.decrypted)?)
                );
                println!("recovered: {}", done.recovered);
            }
            if let Some(path) = &args.transcript {
                println!("transcript-file: {}", path.display());
            }
            println!("transcript-sha256: {}", sha256_hex(&json));
        }
    }
    Ok(if run.aborted() { 2 } else { 0 })
}

#[derive(serde::Serialize)]
struct EncryptStatus {
    version: u32,
    kind: &'static str,
    seed: u64,
    verdict: &'static str,
    s_estimate: f64,
    message_len: usize,
    ciphertext_sha256: Option<String>,
    session_sha256: Option<String>,
}

fn encrypt_cmd(args: EncryptArgs) -> CmdResult {
    let seed = resolve_seed(args.seed)?;
    let config = session_config(&args.session)?;
    let bits = parse_bits(&args.message)?;
    let message = encode_bits(&bits)?;

    let master = RandomSource::new(seed);
    let agreement = run_key_agreement(&config, None, &master)?;
    let mut status = EncryptStatus {
        version: FILE_VERSION,
        kind: "encrypt-status",
        seed,
        verdict: agreement.check.verdict.name(),
        s_estimate: agreement.check.s_estimate,
        message_len: bits.len(),
        ciphertext_sha256: None,
        session_sha256: None,
    };

    let exit = match &agreement.keys {
        None => 2,
        Some(keys) => {
            let gates = choose_gates(keys.kb.labels())?;
            let ciphertext = encrypt(&message, &gates)?;
            let ct_json = ciphertext.to_json()?;
            let sess_json = SessionFile::new(seed, &config).to_json()?;
            write_text(&args.ciphertext, &ct_json)?;
            write_text(&args.session_file, &sess_json)?;
            status.ciphertext_sha256 = Some(sha256_hex(&ct_json));
            status.session_sha256 = Some(sha256_hex(&sess_json));
            0
        }
    };

    match args.format {
        Format::Json => print!("{}", jsonio::to_string_17(&status)?),
        Format::Text => {
            println!(
                "check: sacrificed={} s-estimate={} threshold={} verdict={}",
                agreement.check.sacrificed,
                agreement.check.s_estimate,
                agreement.check.threshold,
                status.verdict
            );
            if exit == 0 {
                println!(
                    "ciphertext: {} sha256={}",
                    args.ciphertext.display(),
                    status.ciphertext_sha256.as_deref().unwrap_or("")
                );
                println!(
                    "session: {} sha256={}",
                    args.session_file.display(),
                    status.session_sha256.as_deref().unwrap_or("")
                );
            } else {
                println!("outcome: aborted");
            }
        }
    }
    Ok(exit)
}

#[derive(serde::Serialize)]
struct PlaintextOut {
    version: u32,
    kind: &'static str,
    origin: &'static str,
    bits: Option<Vec<u8>>,
    qubits: Option<Vec<[f64; 4]>>,
}

fn decrypt_cmd(args: DecryptArgs) -> CmdResult {
    let session = SessionFile::from_json(&read_text(&args.session_file)?)?;
    let config = session.config()?;
    let ciphertext = Ciphertext::from_json(&read_text(&args.ciphertext)?)?;

    let master = RandomSource::new(session.seed);
    let agreement = run_key_agreement(&config, None, &master)?;
    let keys = match &agreement.keys {
        Some(keys) => keys,
        None => {
            // Encrypt never writes a session file for an aborted check, so
            // a replay abort means the file was edited or corrupted.
            match args.format {
                Format::Text => println!("outcome: aborted"),
                Format::Json => print!(
                    "{}",
                    jsonio::to_string_17(&PlaintextOut {
                        version: FILE_VERSION,
                        kind: "aborted",
                        origin: "none",
                        bits: None,
                        qubits: None,
                    })?
                ),
            }
            return Ok(2);
        }
    };

    let gates = choose_gates(keys.inferred_kb.labels())?;
    let message = decrypt(&ciphertext, &gates)?;

    match message.origin() {
        MessageOrigin::Bits => {
            let bits = decode_bits(&message)?;
            match args.format {
                Format::Text => println!("plaintext: {}", bits_string(&bits)),
                Format::Json => print!(
                    "{}",
                    jsonio::to_string_17(&PlaintextOut {
                        version: FILE_VERSION,
                        kind: "plaintext",
                        origin: "bits",
                        bits: Some(bits),
                        qubits: None,
                    })?
                ),
            }
        }
        MessageOrigin::Qubits => {
            let qubits: Vec<[f64; 4]> = message
                .qubits()
                .iter()
                .map(|q| [q.alpha().re, q.alpha().im, q.beta().re, q.beta().im])
                .collect();
            match args.format {
                Format::Text => {
                    for (i, q) in qubits.iter().enumerate() {
                        println!("qubit-{i}: {} {} {} {}", q[0], q[1], q[2], q[3]);
                    }
                }
                Format::Json => print!(
                    "{}",
                    jsonio::to_string_17(&PlaintextOut {
                        version: FILE_VERSION,
                        kind: "plaintext",
                        origin: "qubits",
                        bits: None,
                        qubits: Some(qubits),
                    })?
                ),
            }
        }
    }
    Ok(0)
}

#[derive(serde::Serialize)]
struct AttackOut {
    version: u32,
    kind: &'static str,
    strategy: String,
    trials: usize,
    detection_rate: f64,
    success_rate: f64,
    theory_value: f64,
}

fn attack(args: AttackArgs) -> CmdResult {
    let seed = resolve_seed(args.seed)?;
    let report = match args.strategy {
        StrategyArg::ChannelGuess => {
            let mut rng = RandomSource::new(seed);
            joint_channel_guess_experiment(args.trials, args.pairs, &mut rng)?
        }
        StrategyArg::CiphertextDistinguish => {
            let mut rng = RandomSource::new(seed);
            ciphertext_distinguish_experiment(args.trials, &mut rng)?
        }
        tamper => {
            let config = AttackConfig {
                session: session_config(&args.session)?,
                eve: eve_config(tamper, &args.eve_args)?,
                trials: args.trials,
                seed,
                threads: args.parallel.max(1),
            };
            full_attack_run(&config)?
        }
    };

    match args.format {
        Format::Json => print!(
            "{}",
            jsonio::to_string_17(&AttackOut {
                version: FILE_VERSION,
                kind: "attack-report",
                strategy: report.strategy.clone(),
                trials: report.trials,
                detection_rate: report.detection_rate,
                success_rate: report.success_rate,
                theory_value: report.theory_value,
            })?
        ),
        Format::Text => {
            println!("attack: strategy={} trials={}", report.strategy, report.trials);
            println!("detection-rate: {}", report.detection_rate);
            println!("success-rate: {}", report.success_rate);
            println!("theory: {}", report.theory_value);
        }
    }
    Ok(0)
}

fn selftest() -> CmdResult {
    use qpkc_core::adversary::{distinguish_bound, undetected_prob};
    use qpkc_core::channels::{channel_to_gate, gate_to_channel, ChannelId, GateTag};
    use qpkc_core::protocol::{
        alice_measure, apply_channel_gates, bob_measure, chsh_alice_settings, chsh_bob_settings,
        distribute_pairs, exact_chsh, infer_bob_outcomes,
    };
    use qpkc_core::qmath::{expectation, overlap_single, project_one, Party};

    type Check = (&'static str, fn() -> Result<(), String>);

    fn check_channel_alphabet() -> Result<(), String> {
        for &id in &ChannelId::ALL {
            let norm: f64 = id.state().amps().iter().map(|a| a.norm_sqr()).sum();
            if (norm - 1.0).abs() > 1e-12 {
                return Err(format!("{id} has norm {norm}"));
            }
            let gate = channel_to_gate(id);
            let back = gate_to_channel(gate).map_err(|e| e.to_string())?;
            if back != id {
                return Err(format!("{id} -> {gate} -> {back}"));
            }
        }
        Ok(())
    }

    fn check_honest_chsh() -> Result<(), String> {
        let s = exact_chsh(&ChannelId::PhiPlus.state());
        let want = 2.0 * std::f64::consts::SQRT_2;
        if (s - want).abs() > 1e-12 {
            return Err(format!("honest CHSH {s}, want {want}"));
        }
        Ok(())
    }

    fn check_resend_chsh() -> Result<(), String> {
        let honest = ChannelId::PhiPlus.state();
        let (bob, alice) = (chsh_bob_settings(), chsh_alice_settings());
        let mut terms = [[0.0f64; 2]; 2];
        for label in 0..2u8 {
            let (p, collapsed) = project_one(&honest, Axis::z(), Party::Bob, label);
            let collapsed = collapsed.ok_or("collapse lost a branch")?;
            for i in 0..2 {
                for j in 0..2 {
                    terms[i][j] += p * expectation(&collapsed, bob[i], alice[j]);
                }
            }
        }
        let s = (terms[0][0] + terms[0][1] + terms[1][0] - terms[1][1]).abs();
        if (s - std::f64::consts::SQRT_2).abs() > 1e-12 {
            return Err(format!("resent CHSH {s}"));
        }
        Ok(())
    }

    fn check_cipher_overlap() -> Result<(), String> {
        let h = GateTag::H.matrix();
        let z = GateTag::Z.matrix();
        for k in 0..100 {
            let t = k as f64 * std::f64::consts::TAU / 100.0;
            let psi = qpkc_core::OneQubitState::from_real(t.cos(), t.sin())
                .map_err(|e| e.to_string())?;
            let p = overlap_single(&h.apply(&psi), &z.apply(&psi)).norm_sqr();
            if (p - 0.5).abs() > 1e-12 {
                return Err(format!("overlap^2 {p} at angle {t}"));
            }
        }
        Ok(())
    }

    fn check_undetected_prob() -> Result<(), String> {
        for n in 1..=16u32 {
            let want = 1.0 / 8u64.pow(n) as f64;
            if undetected_prob(n).to_bits() != want.to_bits() {
                return Err(format!("n={n}: {} != {want}", undetected_prob(n)));
            }
        }
        Ok(())
    }

    fn check_distinguish_bound() -> Result<(), String> {
        let want = 0.5 * (1.0 + 0.5f64.sqrt());
        if distinguish_bound().to_bits() != want.to_bits() {
            return Err(format!("{} != {want}", distinguish_bound()));
        }
        Ok(())
    }

    fn check_inference() -> Result<(), String> {
        let master = RandomSource::new(904);
        for round in 0..50 {
            let mut rng = master.split(round);
            let params = gen_secret_params(8, &mut rng).map_err(|e| e.to_string())?;
            let public = derive_public_key(&params);
            let private = derive_private_key(&params).map_err(|e| e.to_string())?;
            let pool = distribute_pairs(8, &mut rng, None).map_err(|e| e.to_string())?;
            let mut pool = apply_channel_gates(pool, &params).map_err(|e| e.to_string())?;
            let kb = bob_measure(&mut pool, &public, &mut rng).map_err(|e| e.to_string())?;
            let ka = alice_measure(&mut pool, &private, &mut rng).map_err(|e| e.to_string())?;
            let inferred = infer_bob_outcomes(&ka, &private).map_err(|e| e.to_string())?;
            if inferred.labels() != kb.labels() {
                return Err(format!("round {round}: inference mismatch"));
            }
        }
        Ok(())
    }

    fn check_session_recovery() -> Result<(), String> {
        let config = SessionConfig::new(16, 2048, 0.25, 2.2).map_err(|e| e.to_string())?;
        let master = RandomSource::new(1);
        let mut rng = master.split(MESSAGE_STREAM);
        let bits: Vec<u8> = (0..16).map(|_| rng.bit()).collect();
        let message = encode_bits(&bits).map_err(|e| e.to_string())?;
        let run = run_session(&config, &message, None, &master).map_err(|e| e.to_string())?;
        match run.outcome {
            qpkc_core::SessionOutcome::Completed(done) if done.recovered => {
                let back = decode_bits(&done.decrypted).map_err(|e| e.to_string())?;
                if back == bits {
                    Ok(())
                } else {
                    Err("decrypted bits differ".into())
                }
            }
            qpkc_core::SessionOutcome::Completed(_) => Err("fidelity loss".into()),
            qpkc_core::SessionOutcome::Aborted => Err("honest session aborted".into()),
        }
    }

    fn check_key_roundtrip() -> Result<(), String> {
        let mut rng = RandomSource::new(3);
        let params = gen_secret_params(5, &mut rng).map_err(|e| e.to_string())?;
        let public = derive_public_key(&params);
        let private = derive_private_key(&params).map_err(|e| e.to_string())?;
        let p2 = qpkc_core::PublicKey::from_json(&public.to_json().map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?;
        let s2 = qpkc_core::PrivateKey::from_json(&private.to_json().map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?;
        if p2.axes() != public.axes() || s2.axes() != private.axes() {
            return Err("axes drifted through serialization".into());
        }
        if s2.corr_signs() != private.corr_signs() {
            return Err("signs drifted through serialization".into());
        }
        Ok(())
    }

    fn check_rng_splits() -> Result<(), String> {
        let fresh = RandomSource::new(77);
        let mut consumed = RandomSource::new(77);
        for _ in 0..5 {
            consumed.next_u64();
        }
        let mut a = fresh.split(3);
        let mut b = consumed.split(3);
        for _ in 0..4 {
            if a.next_u64() != b.next_u64() {
                return Err("split depends on consumption".into());
            }
        }
        Ok(())
    }

    let checks: [Check; 10] = [
        ("channel-alphabet", check_channel_alphabet),
        ("honest-chsh", check_honest_chsh),
        ("resend-chsh", check_resend_chsh),
        ("cipher-overlap", check_cipher_overlap),
        ("undetected-prob", check_undetected_prob),
        ("distinguish-bound", check_distinguish_bound),
        ("inference-agreement", check_inference),
        ("session-recovery", check_session_recovery),
        ("key-roundtrip", check_key_roundtrip),
        ("rng-splits", check_rng_splits),
    ];

    let mut failed = false;
    for (name, check) in checks {
        match check() {
            Ok(()) => println!("ok {name}"),
            Err(msg) => {
                failed = true;
                println!("failed {name}: {msg}");
            }
        }
    }
    Ok(if failed { 3 } else { 0 })
}
