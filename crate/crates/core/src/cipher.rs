//! Gate-based encryption of qubit blocks.
//!
//! Bob's outcome labels pick one gate per position: label 0 encrypts with a
//! Hadamard, label 1 with a phase flip. A message of arbitrary length is
//! cut into blocks of the key length `n` (the last block padded with `|0>`)
//! and every block is encrypted with the same `n` gates. Decryption applies
//! the adjoint gates and strips the padding.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channels::GateTag;
use crate::error::{Error, Result};
use crate::jsonio;
use crate::qmath::{overlap_single, OneQubitState, TOL_AXIS};

const FILE_VERSION: u32 = 1;

/// Whether a message began life as raw qubits or as classical bits.
///
/// Bit-origin messages decode back to bits after decryption; qubit-origin
/// messages stay as state vectors.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MessageOrigin {
    Qubits,
    Bits,
}

impl MessageOrigin {
    pub fn name(self) -> &'static str {
        match self {
            MessageOrigin::Qubits => "qubits",
            MessageOrigin::Bits => "bits",
        }
    }

    pub fn from_name(name: &str) -> Result<MessageOrigin> {
        match name {
            "qubits" => Ok(MessageOrigin::Qubits),
            "bits" => Ok(MessageOrigin::Bits),
            other => Err(Error::UnknownName {
                what: "message origin",
                name: other.to_string(),
            }),
        }
    }
}

/// A single plaintext qubit.
///
/// The default constructor accepts real amplitudes only; complex
/// amplitudes are an explicit opt-in via [`PlainQubit::complex`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PlainQubit {
    state: OneQubitState,
}

impl PlainQubit {
    pub fn real(alpha: f64, beta: f64) -> Result<PlainQubit> {
        Ok(PlainQubit {
            state: OneQubitState::from_real(alpha, beta)?,
        })
    }

    pub fn complex(alpha: Complex64, beta: Complex64) -> Result<PlainQubit> {
        Ok(PlainQubit {
            state: OneQubitState::new(alpha, beta)?,
        })
    }

    pub fn from_state(state: OneQubitState) -> PlainQubit {
        PlainQubit { state }
    }

    pub fn basis(bit: u8) -> PlainQubit {
        PlainQubit {
            state: OneQubitState::basis(bit),
        }
    }

    pub fn alpha(&self) -> Complex64 {
        self.state.amp(0)
    }

    pub fn beta(&self) -> Complex64 {
        self.state.amp(1)
    }

    pub fn state(&self) -> &OneQubitState {
        &self.state
    }

    /// Squared overlap with another qubit.
    pub fn fidelity(&self, other: &PlainQubit) -> f64 {
        overlap_single(&self.state, &other.state).norm_sqr()
    }
}

/// A plaintext: a nonempty list of qubits plus its origin marker.
#[derive(Clone, Debug, PartialEq)]
pub struct Message {
    qubits: Vec<PlainQubit>,
    origin: MessageOrigin,
}

impl Message {
    pub fn from_qubits(qubits: Vec<PlainQubit>) -> Result<Message> {
        if qubits.is_empty() {
            return Err(Error::EmptyMessage);
        }
        Ok(Message {
            qubits,
            origin: MessageOrigin::Qubits,
        })
    }

    pub(crate) fn with_origin(qubits: Vec<PlainQubit>, origin: MessageOrigin) -> Result<Message> {
        if qubits.is_empty() {
            return Err(Error::EmptyMessage);
        }
        Ok(Message { qubits, origin })
    }

    pub fn len(&self) -> usize {
        self.qubits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.qubits.is_empty()
    }

    pub fn qubits(&self) -> &[PlainQubit] {
        &self.qubits
    }

    pub fn origin(&self) -> MessageOrigin {
        self.origin
    }
}

/// Encodes classical bits as computational basis qubits.
pub fn encode_bits(bits: &[u8]) -> Result<Message> {
    if bits.is_empty() {
        return Err(Error::EmptyMessage);
    }
    let qubits = bits
        .iter()
        .enumerate()
        .map(|(index, &b)| match b {
            0 | 1 => Ok(PlainQubit::basis(b)),
            value => Err(Error::InvalidBit { index, value }),
        })
        .collect::<Result<_>>()?;
    Message::with_origin(qubits, MessageOrigin::Bits)
}

/// Reads computational basis qubits back as bits.
///
/// Any qubit that is not a basis state within tolerance is reported with
/// its position; this is the signal that decryption used wrong gates.
pub fn decode_bits(msg: &Message) -> Result<Vec<u8>> {
    msg.qubits
        .iter()
        .enumerate()
        .map(|(index, q)| {
            let p1 = q.beta().norm_sqr();
            if p1 <= TOL_AXIS {
                Ok(0)
            } else if (p1 - 1.0).abs() <= TOL_AXIS {
                Ok(1)
            } else {
                Err(Error::NonBasisState { index, p1 })
            }
        })
        .collect()
}

/// Maps outcome labels to encryption gates: 0 picks `H`, 1 picks `Z`.
pub fn choose_gates(labels: &[u8]) -> Result<Vec<GateTag>> {
    labels
        .iter()
        .enumerate()
        .map(|(index, &l)| match l {
            0 => Ok(GateTag::H),
            1 => Ok(GateTag::Z),
            value => Err(Error::InvalidBit { index, value }),
        })
        .collect()
}

/// A message cut into equal blocks of the key length.
#[derive(Clone, Debug)]
pub struct Blocks {
    pub blocks: Vec<Vec<PlainQubit>>,
    pub pad_len: usize,
}

/// Splits a message into `ceil(len/n)` blocks of length `n`, padding the
/// last block with `|0>`.
pub fn block_message(msg: &Message, n: usize) -> Result<Blocks> {
    if n == 0 {
        return Err(Error::EmptyKey);
    }
    if msg.is_empty() {
        return Err(Error::EmptyMessage);
    }
    let block_count = msg.len().div_ceil(n);
    let pad_len = block_count * n - msg.len();
    let mut blocks = Vec::with_capacity(block_count);
    let mut it = msg.qubits.iter().copied();
    for _ in 0..block_count {
        let mut block: Vec<PlainQubit> = it.by_ref().take(n).collect();
        block.resize(n, PlainQubit::basis(0));
        blocks.push(block);
    }
    Ok(Blocks { blocks, pad_len })
}

/// An encrypted message: `block_count * n` cipher qubits plus the metadata
/// needed to invert the blocking.
#[derive(Clone, Debug, PartialEq)]
pub struct Ciphertext {
    qubits: Vec<OneQubitState>,
    n: usize,
    block_count: usize,
    pad_len: usize,
    origin: MessageOrigin,
}

impl Ciphertext {
    pub fn qubits(&self) -> &[OneQubitState] {
        &self.qubits
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn block_count(&self) -> usize {
        self.block_count
    }

    pub fn pad_len(&self) -> usize {
        self.pad_len
    }

    pub fn origin(&self) -> MessageOrigin {
        self.origin
    }

    /// Message length before padding.
    pub fn message_len(&self) -> usize {
        self.block_count * self.n - self.pad_len
    }
}

fn check_cipher_gates(gates: &[GateTag]) -> Result<()> {
    if gates.is_empty() {
        return Err(Error::EmptyKey);
    }
    for g in gates {
        if !matches!(g, GateTag::H | GateTag::Z) {
            return Err(Error::InvalidField {
                field: "gates",
                reason: format!("cipher gates must be H or Z, got {g}"),
            });
        }
    }
    Ok(())
}

/// Encrypts a message: position `j` of every block is sent through
/// `gates[j]`.
pub fn encrypt(msg: &Message, gates: &[GateTag]) -> Result<Ciphertext> {
    check_cipher_gates(gates)?;
    let n = gates.len();
    let blocks = block_message(msg, n)?;
    let mut qubits = Vec::with_capacity(blocks.blocks.len() * n);
    for block in &blocks.blocks {
        for (j, q) in block.iter().enumerate() {
            qubits.push(gates[j].matrix().apply(q.state()));
        }
    }
    Ok(Ciphertext {
        n,
        block_count: blocks.blocks.len(),
        pad_len: blocks.pad_len,
        origin: msg.origin(),
        qubits,
    })
}

/// Decrypts with the adjoint gates and strips the padding.
pub fn decrypt(c: &Ciphertext, gates: &[GateTag]) -> Result<Message> {
    check_cipher_gates(gates)?;
    if gates.len() != c.n {
        return Err(Error::LengthMismatch {
            what: "gates",
            got: gates.len(),
            want: c.n,
        });
    }
    let mut qubits = Vec::with_capacity(c.message_len());
    for (i, q) in c.qubits.iter().take(c.message_len()).enumerate() {
        let g = gates[i % c.n].matrix().adjoint();
        qubits.push(PlainQubit::from_state(g.apply(q)));
    }
    Message::with_origin(qubits, c.origin)
}

#[derive(Serialize, Deserialize)]
struct CiphertextFile {
    version: u32,
    n: usize,
    block_count: usize,
    pad_len: usize,
    origin: String,
    qubits: Vec<[f64; 4]>,
}

impl Ciphertext {
    pub fn to_json(&self) -> Result<String> {
        jsonio::to_string_17(&CiphertextFile {
            version: FILE_VERSION,
            n: self.n,
            block_count: self.block_count,
            pad_len: self.pad_len,
            origin: self.origin.name().to_string(),
            qubits: self
                .qubits
                .iter()
                .map(|q| [q.amp(0).re, q.amp(0).im, q.amp(1).re, q.amp(1).im])
                .collect(),
        })
    }

    pub fn from_json(text: &str) -> Result<Ciphertext> {
        let file: CiphertextFile = serde_json::from_str(text)?;
        if file.version != FILE_VERSION {
            return Err(Error::VersionMismatch {
                got: file.version,
                want: FILE_VERSION,
            });
        }
        if file.n == 0 || file.block_count == 0 {
            return Err(Error::InvalidField {
                field: "n",
                reason: "n and block_count must be positive".to_string(),
            });
        }
        if file.pad_len >= file.n {
            return Err(Error::InvalidField {
                field: "pad_len",
                reason: format!("pad_len {} not below n {}", file.pad_len, file.n),
            });
        }
        if file.qubits.len() != file.block_count * file.n {
            return Err(Error::LengthMismatch {
                what: "qubits",
                got: file.qubits.len(),
                want: file.block_count * file.n,
            });
        }
        let qubits = file
            .qubits
            .iter()
            .map(|[r0, i0, r1, i1]| {
                OneQubitState::new(Complex64::new(*r0, *i0), Complex64::new(*r1, *i1))
            })
            .collect::<Result<_>>()?;
        Ok(Ciphertext {
            qubits,
            n: file.n,
            block_count: file.block_count,
            pad_len: file.pad_len,
            origin: MessageOrigin::from_name(&file.origin)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qmath::RandomSource;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} != {b} (tol {tol})");
    }

    fn random_real_qubit(rng: &mut RandomSource) -> PlainQubit {
        let chi = rng.unit_f64() * std::f64::consts::TAU;
        PlainQubit::real(chi.cos(), chi.sin()).unwrap()
    }

    #[test]
    fn gate_choice_follows_labels() {
        let gates = choose_gates(&[0, 1, 1, 0]).unwrap();
        assert_eq!(gates, vec![GateTag::H, GateTag::Z, GateTag::Z, GateTag::H]);
        assert!(matches!(
            choose_gates(&[0, 2]),
            Err(Error::InvalidBit { index: 1, value: 2 })
        ));
    }

    #[test]
    fn single_qubit_encryption_examples() {
        // H|0> = |+>.
        let msg = encode_bits(&[0]).unwrap();
        let c = encrypt(&msg, &[GateTag::H]).unwrap();
        assert_close(c.qubits()[0].amp(0).re, FRAC_1_SQRT_2, 1e-15);
        assert_close(c.qubits()[0].amp(1).re, FRAC_1_SQRT_2, 1e-15);

        // Z|+> = |->.
        let plus = Message::from_qubits(vec![
            PlainQubit::real(FRAC_1_SQRT_2, FRAC_1_SQRT_2).unwrap()
        ])
        .unwrap();
        let c = encrypt(&plus, &[GateTag::Z]).unwrap();
        assert_close(c.qubits()[0].amp(0).re, FRAC_1_SQRT_2, 1e-15);
        assert_close(c.qubits()[0].amp(1).re, -FRAC_1_SQRT_2, 1e-15);
    }

    #[test]
    fn the_two_cipher_images_always_half_overlap() {
        // For any real plaintext, |<H psi|Z psi>|^2 is exactly 1/2, so the
        // gate bit is never revealed by the ciphertext alone.
        let mut rng = RandomSource::new(31337);
        for _ in 0..500 {
            let q = random_real_qubit(&mut rng);
            let h = GateTag::H.matrix().apply(q.state());
            let z = GateTag::Z.matrix().apply(q.state());
            assert_close(overlap_single(&h, &z).norm_sqr(), 0.5, 1e-12);
        }
    }

    #[test]
    fn decrypt_inverts_encrypt() {
        let mut rng = RandomSource::new(2718);
        for len in [1usize, 2, 5, 8, 16, 33] {
            let qubits: Vec<PlainQubit> =
                (0..len).map(|_| random_real_qubit(&mut rng)).collect();
            let msg = Message::from_qubits(qubits).unwrap();
            let labels: Vec<u8> = (0..8).map(|_| rng.bit()).collect();
            let gates = choose_gates(&labels).unwrap();
            let c = encrypt(&msg, &gates).unwrap();
            assert_eq!(c.block_count(), len.div_ceil(8));
            let back = decrypt(&c, &gates).unwrap();
            assert_eq!(back.len(), len);
            for (a, b) in msg.qubits().iter().zip(back.qubits()) {
                assert!(a.fidelity(b) >= 1.0 - 1e-12);
            }
        }
    }

    #[test]
    fn bit_messages_round_trip_exactly() {
        let mut rng = RandomSource::new(5);
        let bits: Vec<u8> = (0..100).map(|_| rng.bit()).collect();
        let msg = encode_bits(&bits).unwrap();
        assert_eq!(msg.origin(), MessageOrigin::Bits);
        let gates = choose_gates(&(0..16).map(|_| rng.bit()).collect::<Vec<_>>()).unwrap();
        let c = encrypt(&msg, &gates).unwrap();
        let back = decrypt(&c, &gates).unwrap();
        assert_eq!(back.origin(), MessageOrigin::Bits);
        assert_eq!(decode_bits(&back).unwrap(), bits);
    }

    #[test]
    fn wrong_gates_corrupt_and_are_detected() {
        let bits = [1u8, 0, 1, 1, 0, 0, 1, 0];
        let msg = encode_bits(&bits).unwrap();
        let gates = choose_gates(&[0, 0, 1, 1, 0, 1, 0, 1]).unwrap();
        let c = encrypt(&msg, &gates).unwrap();

        let mut wrong = gates.clone();
        wrong[2] = GateTag::H; // was Z
        let back = decrypt(&c, &wrong).unwrap();
        let err = decode_bits(&back).unwrap_err();
        match err {
            Error::NonBasisState { index, p1 } => {
                assert_eq!(index, 2);
                assert_close(p1, 0.5, 1e-12);
            }
            other => panic!("unexpected error {other}"),
        }
        // The mismatched position has fidelity 1/2 with the original.
        assert_close(msg.qubits()[2].fidelity(&back.qubits()[2]), 0.5, 1e-12);
        // Untouched positions survive.
        assert!(msg.qubits()[0].fidelity(&back.qubits()[0]) >= 1.0 - 1e-12);
    }

    #[test]
    fn blocking_arithmetic() {
        let msg = encode_bits(&[1; 5]).unwrap();
        let blocks = block_message(&msg, 2).unwrap();
        assert_eq!(blocks.blocks.len(), 3);
        assert_eq!(blocks.pad_len, 1);
        // Pad qubits are exactly |0>.
        let last = blocks.blocks.last().unwrap();
        assert_eq!(last[1].alpha().re, 1.0);
        assert_eq!(last[1].beta().re, 0.0);

        let blocks = block_message(&msg, 5).unwrap();
        assert_eq!((blocks.blocks.len(), blocks.pad_len), (1, 0));
        let blocks = block_message(&msg, 7).unwrap();
        assert_eq!((blocks.blocks.len(), blocks.pad_len), (1, 2));
    }

    #[test]
    fn degenerate_inputs_error() {
        assert!(matches!(encode_bits(&[]), Err(Error::EmptyMessage)));
        assert!(matches!(
            encode_bits(&[0, 1, 7]),
            Err(Error::InvalidBit { index: 2, value: 7 })
        ));
        let msg = encode_bits(&[1]).unwrap();
        assert!(matches!(encrypt(&msg, &[]), Err(Error::EmptyKey)));
        assert!(encrypt(&msg, &[GateTag::X]).is_err());
        let c = encrypt(&msg, &[GateTag::H, GateTag::Z]).unwrap();
        assert!(matches!(
            decrypt(&c, &[GateTag::H]),
            Err(Error::LengthMismatch { .. })
        ));
        assert!(PlainQubit::real(0.9, 0.9).is_err());
    }

    #[test]
    fn ciphertext_files_round_trip() {
        let mut rng = RandomSource::new(11);
        let qubits: Vec<PlainQubit> = (0..5).map(|_| random_real_qubit(&mut rng)).collect();
        let msg = Message::from_qubits(qubits).unwrap();
        let gates = choose_gates(&[1, 0, 0]).unwrap();
        let c = encrypt(&msg, &gates).unwrap();
        assert_eq!(c.qubits().len(), c.block_count() * c.n());

        let text = c.to_json().unwrap();
        let back = Ciphertext::from_json(&text).unwrap();
        assert_eq!(c, back);
        assert_eq!(text, back.to_json().unwrap());

        let bad = text.replace("\"pad_len\": 1", "\"pad_len\": 3");
        assert!(Ciphertext::from_json(&bad).is_err());
    }
}
