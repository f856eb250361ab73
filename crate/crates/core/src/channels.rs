//! The eight-state channel alphabet and the gate set that realizes it.
//!
//! Channels come in two families of four. The plain family is the usual
//! Bell basis; the rotated family applies a Hadamard to Alice's half and is
//! written with lowercase names in the wire format. Every channel is the
//! image of `|Phi+>` under exactly one of eight single-qubit gates on
//! Alice's side, so a uniformly random gate is a uniformly random channel.

use crate::error::{Error, Result};
use crate::qmath::{
    apply_single, expectation, overlap, Axis, Operator2, Party, TwoQubitState, TOL_AXIS,
};

/// One of the eight two-qubit channel states.
///
/// `*H` variants are the Hadamard-rotated partners of the Bell states and
/// use lowercase wire names (`"phi+"`, `"psi-"`, ...).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ChannelId {
    PhiPlus,
    PhiMinus,
    PsiPlus,
    PsiMinus,
    PhiPlusH,
    PhiMinusH,
    PsiPlusH,
    PsiMinusH,
}

/// Single-qubit gates Alice may apply to her half of `|Phi+>`.
///
/// Two-letter tags are matrix products: `HZ` means "apply `sigma_z`,
/// then `H`".
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum GateTag {
    I,
    H,
    Z,
    HZ,
    X,
    HX,
    Y,
    HY,
}

impl ChannelId {
    pub const ALL: [ChannelId; 8] = [
        ChannelId::PhiPlus,
        ChannelId::PhiMinus,
        ChannelId::PsiPlus,
        ChannelId::PsiMinus,
        ChannelId::PhiPlusH,
        ChannelId::PhiMinusH,
        ChannelId::PsiPlusH,
        ChannelId::PsiMinusH,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ChannelId::PhiPlus => "Phi+",
            ChannelId::PhiMinus => "Phi-",
            ChannelId::PsiPlus => "Psi+",
            ChannelId::PsiMinus => "Psi-",
            ChannelId::PhiPlusH => "phi+",
            ChannelId::PhiMinusH => "phi-",
            ChannelId::PsiPlusH => "psi+",
            ChannelId::PsiMinusH => "psi-",
        }
    }

    pub fn from_name(name: &str) -> Result<ChannelId> {
        ChannelId::ALL
            .into_iter()
            .find(|c| c.name() == name)
            .ok_or_else(|| Error::UnknownName {
                what: "channel",
                name: name.to_string(),
            })
    }

    /// True for the Hadamard-rotated (lowercase) family.
    pub fn is_rotated(self) -> bool {
        matches!(
            self,
            ChannelId::PhiPlusH | ChannelId::PhiMinusH | ChannelId::PsiPlusH | ChannelId::PsiMinusH
        )
    }

    /// The canonical state vector of this channel.
    pub fn state(self) -> TwoQubitState {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let amps = match self {
            ChannelId::PhiPlus => [h, 0.0, 0.0, h],
            ChannelId::PhiMinus => [h, 0.0, 0.0, -h],
            ChannelId::PsiPlus => [0.0, h, h, 0.0],
            ChannelId::PsiMinus => [0.0, h, -h, 0.0],
            ChannelId::PhiPlusH => [0.5, 0.5, 0.5, -0.5],
            ChannelId::PhiMinusH => [0.5, 0.5, -0.5, 0.5],
            ChannelId::PsiPlusH => [0.5, -0.5, 0.5, 0.5],
            ChannelId::PsiMinusH => [0.5, -0.5, -0.5, -0.5],
        };
        TwoQubitState::from_real(amps).expect("canonical channel states are normalized")
    }
}

impl std::fmt::Display for ChannelId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for ChannelId {
    type Err = Error;
    fn from_str(s: &str) -> Result<ChannelId> {
        ChannelId::from_name(s)
    }
}

impl GateTag {
    pub const ALL: [GateTag; 8] = [
        GateTag::I,
        GateTag::H,
        GateTag::Z,
        GateTag::HZ,
        GateTag::X,
        GateTag::HX,
        GateTag::Y,
        GateTag::HY,
    ];

    pub fn name(self) -> &'static str {
        match self {
            GateTag::I => "I",
            GateTag::H => "H",
            GateTag::Z => "Z",
            GateTag::HZ => "HZ",
            GateTag::X => "X",
            GateTag::HX => "HX",
            GateTag::Y => "Y",
            GateTag::HY => "HY",
        }
    }

    pub fn from_name(name: &str) -> Result<GateTag> {
        GateTag::ALL
            .into_iter()
            .find(|g| g.name() == name)
            .ok_or_else(|| Error::UnknownName {
                what: "gate",
                name: name.to_string(),
            })
    }

    pub fn matrix(self) -> Operator2 {
        let h = Operator2::hadamard();
        match self {
            GateTag::I => Operator2::identity(),
            GateTag::H => h,
            GateTag::Z => Operator2::pauli_z(),
            GateTag::HZ => h.mul(&Operator2::pauli_z()),
            GateTag::X => Operator2::pauli_x(),
            GateTag::HX => h.mul(&Operator2::pauli_x()),
            GateTag::Y => Operator2::pauli_y(),
            GateTag::HY => h.mul(&Operator2::pauli_y()),
        }
    }
}

impl std::fmt::Display for GateTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for GateTag {
    type Err = Error;
    fn from_str(s: &str) -> Result<GateTag> {
        GateTag::from_name(s)
    }
}

/// Applies `gate` to Alice's half of `|Phi+>`.
pub fn create_channel(gate: GateTag) -> TwoQubitState {
    apply_single(&gate.matrix(), &ChannelId::PhiPlus.state(), Party::Alice)
        .expect("gate tags are unitary")
}

/// Identifies which canonical channel a gate realizes, up to global phase.
pub fn gate_to_channel(gate: GateTag) -> Result<ChannelId> {
    let created = create_channel(gate);
    for id in ChannelId::ALL {
        if (overlap(&id.state(), &created).norm() - 1.0).abs() <= TOL_AXIS {
            return Ok(id);
        }
    }
    Err(Error::NoChannelMatch)
}

/// The unique gate whose image of `|Phi+>` is the given channel.
pub fn channel_to_gate(id: ChannelId) -> GateTag {
    for gate in GateTag::ALL {
        if gate_to_channel(gate).ok() == Some(id) {
            return gate;
        }
    }
    unreachable!("gate set covers all eight channels")
}

/// The 2x2 block of two-party Pauli correlations `<sigma_i (x) sigma_j>`
/// restricted to the x-z plane; `i` indexes Bob's axis, `j` Alice's.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CorrelationMatrix {
    pub t_xx: f64,
    pub t_xz: f64,
    pub t_zx: f64,
    pub t_zz: f64,
}

impl CorrelationMatrix {
    /// `b = T^t * a` mapping Bob's axis vector to Alice's correlated one.
    pub fn transpose_apply(&self, a: (f64, f64)) -> (f64, f64) {
        let (ax, az) = a;
        (
            self.t_xx * ax + self.t_zx * az,
            self.t_xz * ax + self.t_zz * az,
        )
    }

    /// True when `T^t * T = I` within `tol`.
    pub fn is_orthogonal(&self, tol: f64) -> bool {
        let c00 = self.t_xx * self.t_xx + self.t_zx * self.t_zx;
        let c11 = self.t_xz * self.t_xz + self.t_zz * self.t_zz;
        let c01 = self.t_xx * self.t_xz + self.t_zx * self.t_zz;
        (c00 - 1.0).abs() <= tol && (c11 - 1.0).abs() <= tol && c01.abs() <= tol
    }
}

/// Measures the x-z correlation block of a channel.
pub fn correlation_matrix(id: ChannelId) -> CorrelationMatrix {
    let s = id.state();
    CorrelationMatrix {
        t_xx: expectation(&s, Axis::x(), Axis::x()),
        t_xz: expectation(&s, Axis::x(), Axis::z()),
        t_zx: expectation(&s, Axis::z(), Axis::x()),
        t_zz: expectation(&s, Axis::z(), Axis::z()),
    }
}

/// Pairwise squared overlaps `|<b_i|b_j>|^2` of the eight channels, indexed
/// in `ChannelId::ALL` order.
pub fn gram_matrix() -> [[f64; 8]; 8] {
    let states: Vec<TwoQubitState> = ChannelId::ALL.iter().map(|c| c.state()).collect();
    let mut g = [[0.0; 8]; 8];
    for i in 0..8 {
        for j in 0..8 {
            g[i][j] = overlap(&states[i], &states[j]).norm_sqr();
        }
    }
    g
}

/// Squared overlap of a state with a channel's canonical vector.
pub fn channel_fidelity(s: &TwoQubitState, id: ChannelId) -> f64 {
    overlap(&id.state(), s).norm_sqr()
}
