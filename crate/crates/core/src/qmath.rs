//! Two-qubit state algebra, in-plane measurement axes, and a splittable
//! deterministic random source.
//!
//! Conventions used by every module in this crate:
//!
//! * The joint amplitude index is `2*bob_bit + alice_bit`; Bob is always the
//!   first tensor factor and Alice the second.
//! * A measurement axis is an angle `phi` in the x-z plane of the Bloch
//!   sphere with observable `cos(phi)*sigma_z + sin(phi)*sigma_x`.
//! * Outcome label 0 names the +1 eigenstate
//!   `cos(phi/2)|0> + sin(phi/2)|1>`; label 1 names the -1 eigenstate.

use std::f64::consts::{FRAC_PI_2, TAU};

use num_complex::Complex64;
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Tolerance for identities that hold exactly up to float rounding.
pub const TOL_EXACT: f64 = 1e-12;
/// Tolerance for axis extraction and correlation-magnitude guarantees.
pub const TOL_AXIS: f64 = 1e-10;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Which qubit of a shared pair an operation acts on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Party {
    Bob,
    Alice,
}

/// A measurement direction in the x-z plane, stored as radians in [0, 2pi).
///
/// The angle is oriented: `phi` and `phi + pi` name the same measurement
/// line but swap which eigenstate gets outcome label 0.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Axis(f64);

impl Axis {
    pub fn new(radians: f64) -> Axis {
        let mut r = radians.rem_euclid(TAU);
        // rem_euclid can return TAU itself when radians is a tiny negative.
        if r >= TAU {
            r -= TAU;
        }
        Axis(r)
    }

    /// The z direction (computational basis).
    pub fn z() -> Axis {
        Axis(0.0)
    }

    /// The x direction (Hadamard basis).
    pub fn x() -> Axis {
        Axis(FRAC_PI_2)
    }

    /// Axis of the Bloch vector `(x, 0, z)`; the vector need not be unit.
    pub fn from_vector(x: f64, z: f64) -> Axis {
        Axis::new(x.atan2(z))
    }

    pub fn radians(self) -> f64 {
        self.0
    }

    /// Bloch-vector components `(x, z)` of the axis direction.
    pub fn vector(self) -> (f64, f64) {
        (self.0.sin(), self.0.cos())
    }

    /// Folds the oriented axis onto its measurement line in [0, pi).
    ///
    /// Returns the representative and whether the direction was reversed
    /// (reversal swaps outcome labels).
    pub fn line_representative(self) -> (Axis, bool) {
        if self.0 < std::f64::consts::PI {
            (self, false)
        } else {
            (Axis(self.0 - std::f64::consts::PI), true)
        }
    }

    /// The observable `cos(phi)*sigma_z + sin(phi)*sigma_x`.
    pub fn observable(self) -> Operator2 {
        let (x, z) = self.vector();
        Operator2::new([
            [Complex64::new(z, 0.0), Complex64::new(x, 0.0)],
            [Complex64::new(x, 0.0), Complex64::new(-z, 0.0)],
        ])
    }

    /// Eigenstate of the observable for the given outcome label.
    pub fn eigenstate(self, label: u8) -> OneQubitState {
        let h = self.0 / 2.0;
        let (a0, a1) = match label {
            0 => (h.cos(), h.sin()),
            _ => (-h.sin(), h.cos()),
        };
        OneQubitState::from_real(a0, a1).expect("eigenstate is normalized")
    }
}

/// A single-qubit state vector, kept normalized.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OneQubitState {
    amps: [Complex64; 2],
}

impl OneQubitState {
    pub fn new(a0: Complex64, a1: Complex64) -> Result<OneQubitState> {
        check_normalized(&[a0, a1])?;
        Ok(OneQubitState { amps: [a0, a1] })
    }

    pub fn from_real(a0: f64, a1: f64) -> Result<OneQubitState> {
        OneQubitState::new(Complex64::new(a0, 0.0), Complex64::new(a1, 0.0))
    }

    /// Computational basis state |0> or |1>.
    pub fn basis(bit: u8) -> OneQubitState {
        match bit {
            0 => OneQubitState {
                amps: [Complex64::new(1.0, 0.0), ZERO],
            },
            _ => OneQubitState {
                amps: [ZERO, Complex64::new(1.0, 0.0)],
            },
        }
    }

    pub fn amp(&self, i: usize) -> Complex64 {
        self.amps[i]
    }

    pub fn amps(&self) -> &[Complex64; 2] {
        &self.amps
    }
}

/// A two-qubit state vector over the Bob (first) and Alice (second) factors.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TwoQubitState {
    amps: [Complex64; 4],
}

impl TwoQubitState {
    pub fn new(amps: [Complex64; 4]) -> Result<TwoQubitState> {
        check_normalized(&amps)?;
        Ok(TwoQubitState { amps })
    }

    pub fn from_real(amps: [f64; 4]) -> Result<TwoQubitState> {
        TwoQubitState::new(amps.map(|a| Complex64::new(a, 0.0)))
    }

    /// Amplitude of `|bob, alice>`.
    pub fn amp(&self, bob: u8, alice: u8) -> Complex64 {
        self.amps[(2 * bob + alice) as usize]
    }

    pub fn amps(&self) -> &[Complex64; 4] {
        &self.amps
    }
}

fn check_normalized(amps: &[Complex64]) -> Result<()> {
    let mut norm_sq = 0.0;
    for a in amps {
        if !a.re.is_finite() || !a.im.is_finite() {
            return Err(Error::NonFiniteAmplitude);
        }
        norm_sq += a.norm_sqr();
    }
    let norm = norm_sq.sqrt();
    if (norm - 1.0).abs() > TOL_EXACT {
        return Err(Error::NotNormalized(norm));
    }
    Ok(())
}

/// A 2x2 complex matrix (gates, observables, density matrices).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Operator2 {
    m: [[Complex64; 2]; 2],
}

impl Operator2 {
    pub fn new(m: [[Complex64; 2]; 2]) -> Operator2 {
        Operator2 { m }
    }

    pub fn from_real(m: [[f64; 2]; 2]) -> Operator2 {
        Operator2 {
            m: m.map(|row| row.map(|x| Complex64::new(x, 0.0))),
        }
    }

    pub fn identity() -> Operator2 {
        Operator2::from_real([[1.0, 0.0], [0.0, 1.0]])
    }

    pub fn pauli_z() -> Operator2 {
        Operator2::from_real([[1.0, 0.0], [0.0, -1.0]])
    }

    pub fn pauli_x() -> Operator2 {
        Operator2::from_real([[0.0, 1.0], [1.0, 0.0]])
    }

    pub fn pauli_y() -> Operator2 {
        Operator2::new([
            [ZERO, Complex64::new(0.0, -1.0)],
            [Complex64::new(0.0, 1.0), ZERO],
        ])
    }

    pub fn hadamard() -> Operator2 {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        Operator2::from_real([[s, s], [s, -s]])
    }

    /// Real rotation `[[cos t, -sin t], [sin t, cos t]]`.
    pub fn rotation(theta: f64) -> Operator2 {
        let (s, c) = theta.sin_cos();
        Operator2::from_real([[c, -s], [s, c]])
    }

    pub fn entry(&self, row: usize, col: usize) -> Complex64 {
        self.m[row][col]
    }

    pub fn adjoint(&self) -> Operator2 {
        Operator2::new([
            [self.m[0][0].conj(), self.m[1][0].conj()],
            [self.m[0][1].conj(), self.m[1][1].conj()],
        ])
    }

    pub fn mul(&self, rhs: &Operator2) -> Operator2 {
        let mut out = [[ZERO; 2]; 2];
        for (r, row) in out.iter_mut().enumerate() {
            for (c, cell) in row.iter_mut().enumerate() {
                *cell = self.m[r][0] * rhs.m[0][c] + self.m[r][1] * rhs.m[1][c];
            }
        }
        Operator2::new(out)
    }

    pub fn apply(&self, s: &OneQubitState) -> OneQubitState {
        let a = s.amps();
        OneQubitState {
            amps: [
                self.m[0][0] * a[0] + self.m[0][1] * a[1],
                self.m[1][0] * a[0] + self.m[1][1] * a[1],
            ],
        }
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        let p = self.adjoint().mul(self);
        let id = Operator2::identity();
        (0..2).all(|r| (0..2).all(|c| (p.m[r][c] - id.m[r][c]).norm() <= tol))
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        (0..2).all(|r| (0..2).all(|c| (self.m[r][c] - self.m[c][r].conj()).norm() <= tol))
    }

    pub fn trace(&self) -> Complex64 {
        self.m[0][0] + self.m[1][1]
    }
}

/// `u^-1 * m * u` for unitary `u`.
pub fn conjugate(m: &Operator2, u: &Operator2) -> Result<Operator2> {
    if !u.is_unitary(TOL_AXIS) {
        return Err(Error::NonUnitary);
    }
    Ok(u.adjoint().mul(m).mul(u))
}

/// Extracts the axis angle from an in-plane observable.
///
/// The observable must be Hermitian, traceless, and have no y-component;
/// its overall sign and scale fold into the returned angle, so the result
/// always satisfies `m = |m| * observable(axis)`.
pub fn axis_of(m: &Operator2) -> Result<Axis> {
    if !m.is_hermitian(TOL_AXIS) {
        return Err(Error::NotInPlane("not hermitian"));
    }
    if m.trace().norm() > TOL_AXIS {
        return Err(Error::NotInPlane("nonzero trace"));
    }
    // For hermitian m = gx*sx + gy*sy + gz*sz: m10 = gx + i*gy.
    let gy = m.entry(1, 0).im;
    if gy.abs() > TOL_AXIS {
        return Err(Error::NotInPlane("nonzero y-component"));
    }
    let gx = m.entry(1, 0).re;
    let gz = m.entry(0, 0).re;
    Ok(Axis::from_vector(gx, gz))
}

/// Tensor product `|bob> (x) |alice>`.
pub fn tensor(bob: &OneQubitState, alice: &OneQubitState) -> TwoQubitState {
    let mut amps = [ZERO; 4];
    for b in 0..2 {
        for a in 0..2 {
            amps[2 * b + a] = bob.amp(b) * alice.amp(a);
        }
    }
    TwoQubitState { amps }
}

/// Applies a 2x2 matrix to one factor without any unitarity check.
fn apply_op(u: &Operator2, s: &TwoQubitState, which: Party) -> TwoQubitState {
    let a = s.amps();
    let mut out = [ZERO; 4];
    match which {
        Party::Bob => {
            for r in 0..2 {
                for al in 0..2 {
                    out[2 * r + al] = u.entry(r, 0) * a[al] + u.entry(r, 1) * a[2 + al];
                }
            }
        }
        Party::Alice => {
            for b in 0..2 {
                for r in 0..2 {
                    out[2 * b + r] = u.entry(r, 0) * a[2 * b] + u.entry(r, 1) * a[2 * b + 1];
                }
            }
        }
    }
    TwoQubitState { amps: out }
}

/// Applies a unitary to Bob's or Alice's qubit of a shared pair.
pub fn apply_single(u: &Operator2, s: &TwoQubitState, which: Party) -> Result<TwoQubitState> {
    if !u.is_unitary(TOL_AXIS) {
        return Err(Error::NonUnitary);
    }
    Ok(apply_op(u, s, which))
}

/// `<s| obs(bob_axis) (x) obs(alice_axis) |s>`, which is real.
pub fn expectation(s: &TwoQubitState, bob_axis: Axis, alice_axis: Axis) -> f64 {
    let t = apply_op(&bob_axis.observable(), s, Party::Bob);
    let t = apply_op(&alice_axis.observable(), &t, Party::Alice);
    let e = overlap(s, &t);
    debug_assert!(e.im.abs() < 1e-9, "expectation has imaginary part {}", e.im);
    e.re
}

/// Exact joint outcome distribution for measuring Bob along `bob_axis` and
/// Alice along `alice_axis`; entry `2*label_bob + label_alice`.
pub fn joint_distribution(s: &TwoQubitState, bob_axis: Axis, alice_axis: Axis) -> [f64; 4] {
    let mut p = [0.0; 4];
    for lb in 0..2u8 {
        let vb = bob_axis.eigenstate(lb);
        for la in 0..2u8 {
            let va = alice_axis.eigenstate(la);
            let mut amp = ZERO;
            for b in 0..2 {
                for a in 0..2 {
                    amp += vb.amp(b).conj() * va.amp(a).conj() * s.amp(b as u8, a as u8);
                }
            }
            p[(2 * lb + la) as usize] = amp.norm_sqr();
        }
    }
    p
}

/// Projects one party's qubit onto the eigenstate for `label`.
///
/// Returns the outcome probability and the collapsed normalized state
/// (`None` when the probability is zero).
pub fn project_one(
    s: &TwoQubitState,
    axis: Axis,
    which: Party,
    label: u8,
) -> (f64, Option<TwoQubitState>) {
    let v = axis.eigenstate(label);
    // Contract the measured factor against the eigenstate, leaving the
    // other party's (unnormalized) conditional amplitudes.
    let mut w = [ZERO; 2];
    match which {
        Party::Bob => {
            for a in 0..2u8 {
                w[a as usize] = v.amp(0).conj() * s.amp(0, a) + v.amp(1).conj() * s.amp(1, a);
            }
        }
        Party::Alice => {
            for b in 0..2u8 {
                w[b as usize] = v.amp(0).conj() * s.amp(b, 0) + v.amp(1).conj() * s.amp(b, 1);
            }
        }
    }
    let p = w[0].norm_sqr() + w[1].norm_sqr();
    if p <= 0.0 {
        return (0.0, None);
    }
    let scale = 1.0 / p.sqrt();
    let mut amps = [ZERO; 4];
    for (i, amp) in amps.iter_mut().enumerate() {
        let (b, a) = (i / 2, i % 2);
        *amp = match which {
            Party::Bob => v.amp(b) * w[a] * scale,
            Party::Alice => v.amp(a) * w[b] * scale,
        };
    }
    (p, Some(TwoQubitState { amps }))
}

/// Born-rule measurement of one party's qubit; collapses the pair.
pub fn measure_one(
    s: &TwoQubitState,
    axis: Axis,
    which: Party,
    rng: &mut RandomSource,
) -> (u8, TwoQubitState) {
    let (p0, collapsed0) = project_one(s, axis, which, 0);
    let u = rng.unit_f64();
    if u < p0 {
        (0, collapsed0.expect("p0 > 0"))
    } else {
        match project_one(s, axis, which, 1) {
            (_, Some(collapsed1)) => (1, collapsed1),
            // u >= p0 while the label-1 branch has zero weight can only
            // happen through rounding when p0 is within one ulp of 1.
            (_, None) => (0, collapsed0.expect("p0 ~ 1")),
        }
    }
}

/// Born-rule measurement of a lone qubit.
pub fn measure_single(s: &OneQubitState, axis: Axis, rng: &mut RandomSource) -> (u8, OneQubitState) {
    let p0 = overlap_single(&axis.eigenstate(0), s).norm_sqr();
    let label = if rng.unit_f64() < p0 { 0 } else { 1 };
    (label, axis.eigenstate(label))
}

/// Inner product `<s|t>` of two-qubit states.
pub fn overlap(s: &TwoQubitState, t: &TwoQubitState) -> Complex64 {
    s.amps()
        .iter()
        .zip(t.amps())
        .map(|(a, b)| a.conj() * b)
        .sum()
}

/// Inner product `<s|t>` of single-qubit states.
pub fn overlap_single(s: &OneQubitState, t: &OneQubitState) -> Complex64 {
    s.amps()
        .iter()
        .zip(t.amps())
        .map(|(a, b)| a.conj() * b)
        .sum()
}

/// Reduced density matrix of one party (partial trace over the other).
pub fn reduced_single(s: &TwoQubitState, which: Party) -> Operator2 {
    let mut m = [[ZERO; 2]; 2];
    for r in 0..2u8 {
        for c in 0..2u8 {
            m[r as usize][c as usize] = match which {
                Party::Bob => {
                    s.amp(r, 0) * s.amp(c, 0).conj() + s.amp(r, 1) * s.amp(c, 1).conj()
                }
                Party::Alice => {
                    s.amp(0, r) * s.amp(0, c).conj() + s.amp(1, r) * s.amp(1, c).conj()
                }
            };
        }
    }
    Operator2::new(m)
}

/// Deterministic, splittable random source.
///
/// Streams are ChaCha8 keyed from a 64-bit seed. `split(i)` derives a child
/// seeded with `mix(seed, i)`, a fixed integer hash of the parent seed and
/// the stream index, so child streams depend only on `(seed, i)` and never
/// on how much of the parent stream has been consumed. Identical seeds give
/// bit-identical streams on every platform.
#[derive(Clone, Debug)]
pub struct RandomSource {
    seed: u64,
    rng: ChaCha8Rng,
}

impl RandomSource {
    pub fn new(seed: u64) -> RandomSource {
        RandomSource {
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Independent child stream `index` of this source's seed.
    pub fn split(&self, index: u64) -> RandomSource {
        RandomSource::new(mix_streams(self.seed, index))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Uniform in [0, 1) with 53 random bits.
    pub fn unit_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `0..n`, unbiased by rejection.
    pub fn below(&mut self, n: u64) -> u64 {
        assert!(n > 0, "below(0)");
        let limit = u64::MAX - u64::MAX % n;
        loop {
            let v = self.next_u64();
            if v < limit {
                return v % n;
            }
        }
    }

    /// A single fair bit as 0 or 1.
    pub fn bit(&mut self) -> u8 {
        (self.next_u64() >> 63) as u8
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn mix_streams(seed: u64, index: u64) -> u64 {
    splitmix(seed ^ splitmix(index ^ 0xA076_1D64_78BD_642F))
}
