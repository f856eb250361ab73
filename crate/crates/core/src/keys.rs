//! Key generation for the entangled-pair cipher.
//!
//! Per pair, Alice secretly draws a channel, a base observable (`Z` or
//! `X`), and a rotation angle `theta`. The public key axis is the base
//! observable conjugated by the rotation, `U^-1 m U`; because the rotation
//! never leaves the x-z plane this is again an in-plane axis. The private
//! key maps each public axis through the channel's correlation block
//! `b = T^t a`, which is the unique Alice axis whose outcomes are
//! perfectly correlated (or anti-correlated) with Bob's. The private axis
//! is stored as a line representative in `[0, pi)` together with the
//! correlation sign, so label inference is `label_B = label_A` for sign +1
//! and the flip for sign -1.

use serde::{Deserialize, Serialize};

use crate::channels::{channel_to_gate, correlation_matrix, ChannelId, GateTag};
use crate::error::{Error, Result};
use crate::jsonio;
use crate::qmath::{axis_of, conjugate, expectation, Axis, Operator2, RandomSource, TOL_AXIS};

const FILE_VERSION: u32 = 1;

/// The observable Alice nominally measures before rotating it.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BaseOp {
    Z,
    X,
}

impl BaseOp {
    pub const ALL: [BaseOp; 2] = [BaseOp::Z, BaseOp::X];

    pub fn name(self) -> &'static str {
        match self {
            BaseOp::Z => "Z",
            BaseOp::X => "X",
        }
    }

    pub fn from_name(name: &str) -> Result<BaseOp> {
        BaseOp::ALL
            .into_iter()
            .find(|b| b.name() == name)
            .ok_or_else(|| Error::UnknownName {
                what: "base observable",
                name: name.to_string(),
            })
    }

    pub fn matrix(self) -> Operator2 {
        match self {
            BaseOp::Z => Operator2::pauli_z(),
            BaseOp::X => Operator2::pauli_x(),
        }
    }
}

/// Alice's per-pair secret choices. The gate string is always the unique
/// one realizing the channel string, kept explicit for transcripts.
#[derive(Clone, Debug, PartialEq)]
pub struct SecretParams {
    channels: Vec<ChannelId>,
    gates: Vec<GateTag>,
    base_ops: Vec<BaseOp>,
    thetas: Vec<f64>,
}

impl SecretParams {
    pub fn new(
        channels: Vec<ChannelId>,
        base_ops: Vec<BaseOp>,
        thetas: Vec<f64>,
    ) -> Result<SecretParams> {
        let n = channels.len();
        if n == 0 {
            return Err(Error::EmptyKey);
        }
        if base_ops.len() != n {
            return Err(Error::LengthMismatch {
                what: "base_ops",
                got: base_ops.len(),
                want: n,
            });
        }
        if thetas.len() != n {
            return Err(Error::LengthMismatch {
                what: "thetas",
                got: thetas.len(),
                want: n,
            });
        }
        for (i, t) in thetas.iter().enumerate() {
            if !t.is_finite() {
                return Err(Error::InvalidField {
                    field: "thetas",
                    reason: format!("non-finite angle at index {i}"),
                });
            }
        }
        let gates = channels.iter().map(|&c| channel_to_gate(c)).collect();
        Ok(SecretParams {
            channels,
            gates,
            base_ops,
            thetas,
        })
    }

    pub fn n(&self) -> usize {
        self.channels.len()
    }

    pub fn channels(&self) -> &[ChannelId] {
        &self.channels
    }

    pub fn gates(&self) -> &[GateTag] {
        &self.gates
    }

    pub fn base_ops(&self) -> &[BaseOp] {
        &self.base_ops
    }

    pub fn thetas(&self) -> &[f64] {
        &self.thetas
    }
}

/// Bob's key: one oriented measurement axis per pair.
#[derive(Clone, Debug, PartialEq)]
pub struct PublicKey {
    axes: Vec<Axis>,
}

impl PublicKey {
    pub fn n(&self) -> usize {
        self.axes.len()
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }
}

/// Alice's key: the secret parameters plus, per pair, the correlated
/// measurement line and the outcome-correlation sign.
#[derive(Clone, Debug, PartialEq)]
pub struct PrivateKey {
    params: SecretParams,
    axes: Vec<Axis>,
    corr_signs: Vec<i8>,
}

impl PrivateKey {
    pub fn n(&self) -> usize {
        self.axes.len()
    }

    pub fn params(&self) -> &SecretParams {
        &self.params
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn corr_signs(&self) -> &[i8] {
        &self.corr_signs
    }
}

/// Draws `n` independent (channel, base observable, theta) triples.
///
/// Channels and base observables are uniform; theta is uniform in
/// `[0, 2pi)`. Draw order per pair is channel, base, theta.
pub fn gen_secret_params(n: usize, rng: &mut RandomSource) -> Result<SecretParams> {
    if n == 0 {
        return Err(Error::EmptyKey);
    }
    let mut channels = Vec::with_capacity(n);
    let mut base_ops = Vec::with_capacity(n);
    let mut thetas = Vec::with_capacity(n);
    for _ in 0..n {
        channels.push(ChannelId::ALL[rng.below(8) as usize]);
        base_ops.push(BaseOp::ALL[rng.below(2) as usize]);
        thetas.push(rng.unit_f64() * std::f64::consts::TAU);
    }
    SecretParams::new(channels, base_ops, thetas)
}

fn public_axis(base: BaseOp, theta: f64) -> Axis {
    let rotated = conjugate(&base.matrix(), &Operator2::rotation(theta))
        .expect("rotations are unitary");
    axis_of(&rotated).expect("conjugated Z/X stays in the x-z plane")
}

/// Public axes `U(theta)^-1 m U(theta)` per pair. Depends only on the base
/// observables and angles, never on the channel string.
pub fn derive_public_key(params: &SecretParams) -> PublicKey {
    let axes = params
        .base_ops
        .iter()
        .zip(&params.thetas)
        .map(|(&b, &t)| public_axis(b, t))
        .collect();
    PublicKey { axes }
}

/// Checks that measuring `channel` along `(bob_axis, alice_axis)` is
/// deterministic and returns the correlation sign.
pub(crate) fn correlation_sign(
    channel: ChannelId,
    bob_axis: Axis,
    alice_axis: Axis,
    index: usize,
) -> Result<i8> {
    let e = expectation(&channel.state(), bob_axis, alice_axis);
    if e.abs() < 1.0 - TOL_AXIS {
        return Err(Error::CorrelationBroken {
            index,
            magnitude: e.abs(),
        });
    }
    Ok(if e >= 0.0 { 1 } else { -1 })
}

/// Derives the private measurement lines and correlation signs.
///
/// Aborts (never silently continues) if any derived pair fails the
/// unit-correlation check.
pub fn derive_private_key(params: &SecretParams) -> Result<PrivateKey> {
    let public = derive_public_key(params);
    let mut axes = Vec::with_capacity(params.n());
    let mut corr_signs = Vec::with_capacity(params.n());
    for i in 0..params.n() {
        let a = public.axes[i];
        let t = correlation_matrix(params.channels[i]);
        let (bx, bz) = t.transpose_apply(a.vector());
        let (line, _) = Axis::from_vector(bx, bz).line_representative();
        let sign = correlation_sign(params.channels[i], a, line, i)?;
        axes.push(line);
        corr_signs.push(sign);
    }
    Ok(PrivateKey {
        params: params.clone(),
        axes,
        corr_signs,
    })
}

#[derive(Serialize, Deserialize)]
struct PublicKeyFile {
    version: u32,
    kind: String,
    n: usize,
    axes: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct PrivateKeyFile {
    version: u32,
    kind: String,
    n: usize,
    axes: Vec<f64>,
    corr_signs: Vec<i8>,
    channels: Vec<String>,
    gates: Vec<String>,
    base_ops: Vec<String>,
    thetas: Vec<f64>,
}

fn check_header(version: u32, kind: &str, want_kind: &'static str) -> Result<()> {
    if version != FILE_VERSION {
        return Err(Error::VersionMismatch {
            got: version,
            want: FILE_VERSION,
        });
    }
    if kind != want_kind {
        return Err(Error::KindMismatch {
            got: kind.to_string(),
            want: want_kind,
        });
    }
    Ok(())
}

fn check_len(what: &'static str, got: usize, want: usize) -> Result<()> {
    if got != want {
        return Err(Error::LengthMismatch { what, got, want });
    }
    Ok(())
}

fn parse_axes(raw: &[f64]) -> Result<Vec<Axis>> {
    raw.iter()
        .enumerate()
        .map(|(i, &r)| {
            if r.is_finite() {
                Ok(Axis::new(r))
            } else {
                Err(Error::InvalidField {
                    field: "axes",
                    reason: format!("non-finite angle at index {i}"),
                })
            }
        })
        .collect()
}

impl PublicKey {
    pub fn to_json(&self) -> Result<String> {
        jsonio::to_string_17(&PublicKeyFile {
            version: FILE_VERSION,
            kind: "public".to_string(),
            n: self.n(),
            axes: self.axes.iter().map(|a| a.radians()).collect(),
        })
    }

    pub fn from_json(text: &str) -> Result<PublicKey> {
        let file: PublicKeyFile = serde_json::from_str(text)?;
        check_header(file.version, &file.kind, "public")?;
        if file.n == 0 {
            return Err(Error::EmptyKey);
        }
        check_len("axes", file.axes.len(), file.n)?;
        Ok(PublicKey {
            axes: parse_axes(&file.axes)?,
        })
    }
}

impl PrivateKey {
    pub fn to_json(&self) -> Result<String> {
        jsonio::to_string_17(&PrivateKeyFile {
            version: FILE_VERSION,
            kind: "private".to_string(),
            n: self.n(),
            axes: self.axes.iter().map(|a| a.radians()).collect(),
            corr_signs: self.corr_signs.clone(),
            channels: self.params.channels.iter().map(|c| c.name().into()).collect(),
            gates: self.params.gates.iter().map(|g| g.name().into()).collect(),
            base_ops: self.params.base_ops.iter().map(|b| b.name().into()).collect(),
            thetas: self.params.thetas.clone(),
        })
    }

    pub fn from_json(text: &str) -> Result<PrivateKey> {
        let file: PrivateKeyFile = serde_json::from_str(text)?;
        check_header(file.version, &file.kind, "private")?;
        if file.n == 0 {
            return Err(Error::EmptyKey);
        }
        check_len("axes", file.axes.len(), file.n)?;
        check_len("corr_signs", file.corr_signs.len(), file.n)?;
        check_len("channels", file.channels.len(), file.n)?;
        check_len("gates", file.gates.len(), file.n)?;
        check_len("base_ops", file.base_ops.len(), file.n)?;
        check_len("thetas", file.thetas.len(), file.n)?;

        let channels: Vec<ChannelId> = file
            .channels
            .iter()
            .map(|s| ChannelId::from_name(s))
            .collect::<Result<_>>()?;
        let base_ops: Vec<BaseOp> = file
            .base_ops
            .iter()
            .map(|s| BaseOp::from_name(s))
            .collect::<Result<_>>()?;
        for (i, s) in file.corr_signs.iter().enumerate() {
            if *s != 1 && *s != -1 {
                return Err(Error::InvalidField {
                    field: "corr_signs",
                    reason: format!("value {s} at index {i}, expected 1 or -1"),
                });
            }
        }
        let params = SecretParams::new(channels, base_ops, file.thetas)?;
        // The stored gate string must be the one the channels imply.
        for (i, name) in file.gates.iter().enumerate() {
            let gate = GateTag::from_name(name)?;
            if gate != params.gates[i] {
                return Err(Error::GateChannelMismatch {
                    gate: name.clone(),
                    channel: params.channels[i].name().to_string(),
                });
            }
        }
        // The stored axes and signs must match what the parameters derive;
        // anything else means the file was edited inconsistently.
        let derived = derive_private_key(&params)?;
        let axes = parse_axes(&file.axes)?;
        for (i, axis) in axes.iter().enumerate() {
            let gap = (axis.radians() - derived.axes[i].radians()).abs();
            if gap > 1e-9 {
                return Err(Error::InvalidField {
                    field: "axes",
                    reason: format!("axis at index {i} is off by {gap} from the derived value"),
                });
            }
            if file.corr_signs[i] != derived.corr_signs[i] {
                return Err(Error::InvalidField {
                    field: "corr_signs",
                    reason: format!("sign at index {i} contradicts the derived correlation"),
                });
            }
        }
        Ok(PrivateKey {
            params,
            axes,
            corr_signs: file.corr_signs,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI, TAU};

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} != {b} (tol {tol})");
    }

    fn fixed_params(channel: ChannelId, base: BaseOp, theta: f64) -> SecretParams {
        SecretParams::new(vec![channel], vec![base], vec![theta]).unwrap()
    }

    #[test]
    fn public_axes_follow_the_closed_form() {
        // Conjugating by U(theta) sends z to angle -2*theta and x to
        // pi/2 - 2*theta.
        for k in 0..32 {
            let theta = k as f64 * TAU / 32.0 + 0.017;
            let pz = derive_public_key(&fixed_params(ChannelId::PhiPlus, BaseOp::Z, theta));
            let want = (-2.0 * theta).rem_euclid(TAU);
            assert_close(gap(pz.axes()[0].radians(), want), 0.0, 1e-9);
            let px = derive_public_key(&fixed_params(ChannelId::PhiPlus, BaseOp::X, theta));
            let want = (FRAC_PI_2 - 2.0 * theta).rem_euclid(TAU);
            assert_close(gap(px.axes()[0].radians(), want), 0.0, 1e-9);
        }
    }

    fn gap(a: f64, b: f64) -> f64 {
        let d = (a - b).rem_euclid(TAU);
        d.min(TAU - d)
    }

    #[test]
    fn unrotated_keys_reproduce_the_correlation_table() {
        // At theta = 0 the public axis is the base observable itself.
        // Plain channels keep the measurement line, rotated channels swap
        // z and x; the sign records correlation vs anti-correlation.
        use BaseOp::{X, Z};
        use ChannelId::*;
        let cases = [
            (PhiPlus, Z, 0.0, 1),
            (PhiPlus, X, FRAC_PI_2, 1),
            (PhiMinus, Z, 0.0, 1),
            (PhiMinus, X, FRAC_PI_2, -1),
            (PsiPlus, Z, 0.0, -1),
            (PsiPlus, X, FRAC_PI_2, 1),
            (PsiMinus, Z, 0.0, -1),
            (PsiMinus, X, FRAC_PI_2, -1),
            (PhiPlusH, Z, FRAC_PI_2, 1),
            (PhiPlusH, X, 0.0, 1),
            (PhiMinusH, Z, FRAC_PI_2, 1),
            (PhiMinusH, X, 0.0, -1),
            (PsiPlusH, Z, FRAC_PI_2, -1),
            (PsiPlusH, X, 0.0, 1),
            (PsiMinusH, Z, FRAC_PI_2, -1),
            (PsiMinusH, X, 0.0, -1),
        ];
        for (channel, base, want_axis, want_sign) in cases {
            let key = derive_private_key(&fixed_params(channel, base, 0.0)).unwrap();
            assert_close(key.axes()[0].radians(), want_axis, TOL_AXIS);
            assert_eq!(
                key.corr_signs()[0],
                want_sign,
                "channel {channel} base {}",
                base.name()
            );
        }
    }

    #[test]
    fn derived_keys_always_have_unit_correlation() {
        let mut rng = RandomSource::new(314159);
        for i in 0..1000 {
            let channel = ChannelId::ALL[rng.below(8) as usize];
            let base = BaseOp::ALL[rng.below(2) as usize];
            let theta = rng.unit_f64() * TAU;
            let params = fixed_params(channel, base, theta);
            let public = derive_public_key(&params);
            let private = derive_private_key(&params).unwrap();
            let e = expectation(&channel.state(), public.axes()[0], private.axes()[0]);
            assert!(
                e.abs() >= 1.0 - TOL_AXIS,
                "case {i}: |{e}| < 1 for {channel}/{}/{theta}",
                base.name()
            );
            assert_eq!(e >= 0.0, private.corr_signs()[0] == 1);
        }
    }

    #[test]
    fn private_axes_live_on_lines() {
        let mut rng = RandomSource::new(8);
        let params = gen_secret_params(64, &mut rng).unwrap();
        let key = derive_private_key(&params).unwrap();
        for axis in key.axes() {
            assert!(axis.radians() < PI, "axis {axis:?} not folded to [0, pi)");
        }
    }

    #[test]
    fn public_key_is_independent_of_channels() {
        let mut rng = RandomSource::new(5150);
        let params = gen_secret_params(32, &mut rng).unwrap();
        let all_phi = SecretParams::new(
            vec![ChannelId::PhiPlus; 32],
            params.base_ops().to_vec(),
            params.thetas().to_vec(),
        )
        .unwrap();
        let all_psi_h = SecretParams::new(
            vec![ChannelId::PsiMinusH; 32],
            params.base_ops().to_vec(),
            params.thetas().to_vec(),
        )
        .unwrap();
        assert_eq!(derive_public_key(&params), derive_public_key(&all_phi));
        assert_eq!(derive_public_key(&all_phi), derive_public_key(&all_psi_h));
    }

    #[test]
    fn fresh_angles_move_the_private_axes() {
        let channels = vec![ChannelId::PsiPlus; 4];
        let bases = vec![BaseOp::Z; 4];
        let a = SecretParams::new(channels.clone(), bases.clone(), vec![0.3; 4]).unwrap();
        let b = SecretParams::new(channels, bases, vec![1.1; 4]).unwrap();
        let ka = derive_private_key(&a).unwrap();
        let kb = derive_private_key(&b).unwrap();
        assert_ne!(ka.axes()[0], kb.axes()[0]);
    }

    #[test]
    fn generation_is_deterministic_and_roughly_uniform() {
        let mut r1 = RandomSource::new(42);
        let mut r2 = RandomSource::new(42);
        let p1 = gen_secret_params(100, &mut r1).unwrap();
        let p2 = gen_secret_params(100, &mut r2).unwrap();
        assert_eq!(p1, p2);

        // Channel histogram over 16000 draws: expected 2000 per channel,
        // std ~43; allow 4 sigma.
        let mut rng = RandomSource::new(777);
        let params = gen_secret_params(16_000, &mut rng).unwrap();
        let mut counts = [0usize; 8];
        for c in params.channels() {
            counts[ChannelId::ALL.iter().position(|x| x == c).unwrap()] += 1;
        }
        for (i, &c) in counts.iter().enumerate() {
            assert!(
                (c as f64 - 2000.0).abs() < 4.0 * 43.0,
                "channel {i} count {c}"
            );
        }
        let mean_theta: f64 =
            params.thetas().iter().sum::<f64>() / params.thetas().len() as f64;
        // Uniform on [0, 2pi): mean pi, std of the mean ~0.0143.
        assert_close(mean_theta, PI, 4.0 * 0.0144);
    }

    #[test]
    fn gates_match_channels_in_generated_params() {
        let mut rng = RandomSource::new(1);
        let params = gen_secret_params(50, &mut rng).unwrap();
        for (c, g) in params.channels().iter().zip(params.gates()) {
            assert_eq!(channel_to_gate(*c), *g);
        }
    }

    #[test]
    fn key_files_round_trip() {
        let mut rng = RandomSource::new(99);
        let params = gen_secret_params(16, &mut rng).unwrap();
        let public = derive_public_key(&params);
        let private = derive_private_key(&params).unwrap();

        let pub_text = public.to_json().unwrap();
        let back = PublicKey::from_json(&pub_text).unwrap();
        assert_eq!(public, back);
        // Serialization is byte-stable.
        assert_eq!(pub_text, back.to_json().unwrap());

        let priv_text = private.to_json().unwrap();
        let back = PrivateKey::from_json(&priv_text).unwrap();
        assert_eq!(private, back);
        assert_eq!(priv_text, back.to_json().unwrap());
    }

    #[test]
    fn key_parsing_rejects_malformed_files() {
        let mut rng = RandomSource::new(4);
        let params = gen_secret_params(3, &mut rng).unwrap();
        let public = derive_public_key(&params);
        let text = public.to_json().unwrap();

        // Truncation is a parse error carrying a position.
        let err = PublicKey::from_json(&text[..text.len() / 2]).unwrap_err();
        assert!(matches!(err, Error::Parse(_)), "{err}");

        let bad_version = text.replace("\"version\": 1", "\"version\": 9");
        assert!(matches!(
            PublicKey::from_json(&bad_version),
            Err(Error::VersionMismatch { got: 9, want: 1 })
        ));

        let private = derive_private_key(&params).unwrap();
        let priv_text = private.to_json().unwrap();
        assert!(matches!(
            PublicKey::from_json(&priv_text),
            Err(Error::KindMismatch { .. })
        ));

        // A corrupted sign contradicts the derived correlation.
        let flipped = if priv_text.contains("\n    -1") {
            priv_text.replacen("\n    -1", "\n    1", 1)
        } else {
            priv_text.replacen("\n    1", "\n    -1", 1)
        };
        assert!(PrivateKey::from_json(&flipped).is_err());
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        let mut rng = RandomSource::new(0);
        assert!(matches!(
            gen_secret_params(0, &mut rng),
            Err(Error::EmptyKey)
        ));
        assert!(SecretParams::new(
            vec![ChannelId::PhiPlus],
            vec![BaseOp::Z, BaseOp::X],
            vec![0.0],
        )
        .is_err());
        assert!(SecretParams::new(
            vec![ChannelId::PhiPlus],
            vec![BaseOp::Z],
            vec![f64::NAN],
        )
        .is_err());
    }

    #[test]
    fn broken_correlation_aborts() {
        // An axis pair that is not the derived partner has |E| < 1 and must
        // be refused rather than rounded.
        let err = correlation_sign(ChannelId::PhiPlusH, Axis::z(), Axis::z(), 3).unwrap_err();
        match err {
            Error::CorrelationBroken { index, magnitude } => {
                assert_eq!(index, 3);
                assert!(magnitude < 0.1);
            }
            other => panic!("unexpected error {other}"),
        }
    }
}
