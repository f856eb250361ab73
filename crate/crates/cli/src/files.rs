//! On-disk records the commands exchange: session transcripts and the
//! session file that carries Alice's decryption capability.
//!
//! Floats are written with 17 significant digits so every value reparses
//! to the same bits; a rerun of the producing command rewrites the same
//! bytes.

use std::path::Path;

use serde::{Deserialize, Serialize};

use qpkc_core::protocol::{SessionOutcome, SessionRun};
use qpkc_core::{jsonio, Error, Result, SessionConfig};

use crate::error::{io_at, CliError};

pub const FILE_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
pub struct EveSection {
    pub strategy: String,
    pub axis: Option<f64>,
    pub coverage: f64,
    pub both_legs: bool,
}

#[derive(Serialize, Deserialize)]
pub struct CheckSection {
    pub sacrificed: usize,
    pub s_estimate: f64,
    pub threshold: f64,
    pub verdict: String,
}

#[derive(Serialize, Deserialize)]
pub struct PrivateSection {
    pub axes: Vec<f64>,
    pub corr_signs: Vec<i8>,
    pub channels: Vec<String>,
    pub gates: Vec<String>,
    pub base_ops: Vec<String>,
    pub thetas: Vec<f64>,
}

/// Full record of one `run` invocation.
#[derive(Serialize, Deserialize)]
pub struct TranscriptFile {
    pub version: u32,
    pub kind: String,
    pub seed: u64,
    pub n: usize,
    pub m: usize,
    pub fraction: f64,
    pub threshold: f64,
    pub eve: Option<EveSection>,
    pub public_axes: Vec<f64>,
    pub private: PrivateSection,
    pub check: CheckSection,
    pub outcome: String,
    pub bob_labels: Option<Vec<u8>>,
    pub alice_labels: Option<Vec<u8>>,
    pub inferred_labels: Option<Vec<u8>>,
    pub plaintext_bits: Option<Vec<u8>>,
    pub decrypted_bits: Option<Vec<u8>>,
    pub ciphertext_qubits: Option<Vec<[f64; 4]>>,
    pub recovered: Option<bool>,
}

impl TranscriptFile {
    pub fn from_run(
        run: &SessionRun,
        seed: u64,
        eve: Option<EveSection>,
        plaintext_bits: &[u8],
    ) -> Result<TranscriptFile> {
        let private = &run.private_key;
        let params = private.params();
        let mut t = TranscriptFile {
            version: FILE_VERSION,
            kind: "transcript".into(),
            seed,
            n: run.config.n,
            m: run.config.m,
            fraction: run.config.fraction,
            threshold: run.config.threshold,
            eve,
            public_axes: run.public_key.axes().iter().map(|a| a.radians()).collect(),
            private: PrivateSection {
                axes: private.axes().iter().map(|a| a.radians()).collect(),
                corr_signs: private.corr_signs().to_vec(),
                channels: params.channels().iter().map(|c| c.name().into()).collect(),
                gates: params.gates().iter().map(|g| g.name().into()).collect(),
                base_ops: params.base_ops().iter().map(|b| b.name().into()).collect(),
                thetas: params.thetas().to_vec(),
            },
            check: CheckSection {
                sacrificed: run.check.sacrificed,
                s_estimate: run.check.s_estimate,
                threshold: run.check.threshold,
                verdict: run.check.verdict.name().into(),
            },
            outcome: "aborted".into(),
            bob_labels: None,
            alice_labels: None,
            inferred_labels: None,
            plaintext_bits: Some(plaintext_bits.to_vec()),
            decrypted_bits: None,
            ciphertext_qubits: None,
            recovered: None,
        };
        if let SessionOutcome::Completed(done) = &run.outcome {
            t.outcome = "completed".into();
            t.bob_labels = Some(done.kb.labels().to_vec());
            t.alice_labels = Some(done.ka.labels().to_vec());
            t.inferred_labels = Some(done.inferred_kb.labels().to_vec());
            t.decrypted_bits = Some(qpkc_core::cipher::decode_bits(&done.decrypted)?);
            t.ciphertext_qubits = Some(
                done.ciphertext
                    .qubits()
                    .iter()
                    .map(|q| {
                        [
                            q.amp(0).re,
                            q.amp(0).im,
                            q.amp(1).re,
                            q.amp(1).im,
                        ]
                    })
                    .collect(),
            );
            t.recovered = Some(done.recovered);
        }
        Ok(t)
    }

    pub fn to_json(&self) -> Result<String> {
        jsonio::to_string_17(self)
    }
}

/// What `decrypt` needs to replay a session: the seed and sizing. Written
/// by `encrypt` only when the eavesdropping check passed, and secret in
/// the same sense as the private key.
#[derive(Serialize, Deserialize)]
pub struct SessionFile {
    pub version: u32,
    pub kind: String,
    pub seed: u64,
    pub n: usize,
    pub m: usize,
    pub fraction: f64,
    pub threshold: f64,
}

impl SessionFile {
    pub fn new(seed: u64, config: &SessionConfig) -> SessionFile {
        SessionFile {
            version: FILE_VERSION,
            kind: "session".into(),
            seed,
            n: config.n,
            m: config.m,
            fraction: config.fraction,
            threshold: config.threshold,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        jsonio::to_string_17(self)
    }

    pub fn from_json(text: &str) -> Result<SessionFile> {
        let file: SessionFile = serde_json::from_str(text)?;
        if file.version != FILE_VERSION {
            return Err(Error::VersionMismatch {
                got: file.version,
                want: FILE_VERSION,
            });
        }
        if file.kind != "session" {
            return Err(Error::KindMismatch {
                got: file.kind,
                want: "session",
            });
        }
        Ok(file)
    }

    pub fn config(&self) -> Result<SessionConfig> {
        SessionConfig::new(self.n, self.m, self.fraction, self.threshold)
    }
}

pub fn write_text(path: &Path, text: &str) -> std::result::Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| io_at(path, e))
}

pub fn read_text(path: &Path) -> std::result::Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| io_at(path, e))
}

pub fn sha256_hex(text: &str) -> String {
    use sha2::{Digest, Sha256};
    let digest = Sha256::digest(text.as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}
