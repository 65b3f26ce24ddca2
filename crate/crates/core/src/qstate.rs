//! Dense statevector engine.
//!
//! Qubit ordering: qubit `0` is the most significant bit of the basis index,
//! so for `n` qubits the bit belonging to qubit `q` is `1 << (n - 1 - q)`.
//! Flipping qubit 0 of `|0…0⟩` therefore lands on index `2^(n-1)`.
//!
//! Rotations follow `R_P(θ) = exp(-iθP/2) = cos(θ/2)·I − i·sin(θ/2)·P`.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{ensure_dim, Error, Result};

pub type C64 = Complex64;

/// Largest register the dense engine accepts (4096 amplitudes).
pub const MAX_QUBITS: usize = 12;

const I_UNIT: C64 = C64::new(0.0, 1.0);

pub(crate) fn check_qubits(num_qubits: usize) -> Result<()> {
    if (1..=MAX_QUBITS).contains(&num_qubits) {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "qubit count {num_qubits} outside supported range 1..={MAX_QUBITS}"
        )))
    }
}

#[inline]
pub(crate) fn qubit_bit(num_qubits: usize, qubit: usize) -> usize {
    1 << (num_qubits - 1 - qubit)
}

/// Single-qubit Pauli letter.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub const ALL: [Pauli; 4] = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];

    pub fn as_char(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }

    pub fn matrix(self) -> DMatrix<C64> {
        let (o, l, i) = (C64::new(0.0, 0.0), C64::new(1.0, 0.0), I_UNIT);
        let entries = match self {
            Pauli::I => [l, o, o, l],
            Pauli::X => [o, l, l, o],
            Pauli::Y => [o, -i, i, o],
            Pauli::Z => [l, o, o, -l],
        };
        DMatrix::from_row_slice(2, 2, &entries)
    }
}

/// Tensor product of Pauli letters, one per qubit (qubit 0 first).
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PauliString {
    letters: Vec<Pauli>,
}

impl PauliString {
    pub fn new(letters: Vec<Pauli>) -> Result<Self> {
        check_qubits(letters.len())?;
        Ok(Self { letters })
    }

    pub fn identity(num_qubits: usize) -> Result<Self> {
        Self::new(vec![Pauli::I; num_qubits])
    }

    /// `pauli` on `qubit`, identity elsewhere.
    pub fn single(num_qubits: usize, qubit: usize, pauli: Pauli) -> Result<Self> {
        check_qubits(num_qubits)?;
        if qubit >= num_qubits {
            return Err(Error::Index { index: qubit, len: num_qubits });
        }
        let mut letters = vec![Pauli::I; num_qubits];
        letters[qubit] = pauli;
        Ok(Self { letters })
    }

    /// The same letter on every qubit, e.g. `X⊗X⊗X`.
    pub fn uniform(num_qubits: usize, pauli: Pauli) -> Result<Self> {
        Self::new(vec![pauli; num_qubits])
    }

    /// String number `index` in the canonical enumeration of all `4^n`
    /// strings: base-4 digits with qubit 0 most significant, `I,X,Y,Z = 0..3`.
    pub fn from_index(num_qubits: usize, index: usize) -> Result<Self> {
        check_qubits(num_qubits)?;
        let len = 1usize << (2 * num_qubits);
        if index >= len {
            return Err(Error::Index { index, len });
        }
        let letters = (0..num_qubits)
            .map(|q| Pauli::ALL[(index >> (2 * (num_qubits - 1 - q))) & 3])
            .collect();
        Ok(Self { letters })
    }

    pub fn index(&self) -> usize {
        self.letters
            .iter()
            .fold(0, |acc, p| (acc << 2) | (*p as usize))
    }

    pub fn num_qubits(&self) -> usize {
        self.letters.len()
    }

    pub fn letters(&self) -> &[Pauli] {
        &self.letters
    }

    /// Number of non-identity letters.
    pub fn weight(&self) -> usize {
        self.letters.iter().filter(|p| **p != Pauli::I).count()
    }

    /// Bit masks describing the action `P|b⟩ = i^{n_y}·(−1)^{|b ∧ z|}·|b ⊕ x⟩`.
    pub(crate) fn masks(&self) -> PauliMasks {
        let n = self.letters.len();
        let mut m = PauliMasks { x: 0, z: 0, y_count: 0 };
        for (q, p) in self.letters.iter().enumerate() {
            let bit = qubit_bit(n, q);
            match p {
                Pauli::I => {}
                Pauli::X => m.x |= bit,
                Pauli::Y => {
                    m.x |= bit;
                    m.z |= bit;
                    m.y_count += 1;
                }
                Pauli::Z => m.z |= bit,
            }
        }
        m
    }

    /// Dense `2^n × 2^n` matrix of the string.
    pub fn to_dense(&self) -> DMatrix<C64> {
        let dim = 1usize << self.num_qubits();
        let masks = self.masks();
        let mut m = DMatrix::zeros(dim, dim);
        for b in 0..dim {
            m[(b ^ masks.x, b)] = masks.phase(b);
        }
        m
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for p in &self.letters {
            write!(f, "{}", p.as_char())?;
        }
        Ok(())
    }
}

impl FromStr for PauliString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let letters = s
            .chars()
            .map(|c| match c.to_ascii_uppercase() {
                'I' => Ok(Pauli::I),
                'X' => Ok(Pauli::X),
                'Y' => Ok(Pauli::Y),
                'Z' => Ok(Pauli::Z),
                other => Err(Error::Format(format!("invalid Pauli letter {other:?}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(letters)
    }
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct PauliMasks {
    pub x: usize,
    pub z: usize,
    pub y_count: usize,
}

impl PauliMasks {
    /// Phase picked up by basis state `b`.
    #[inline]
    pub fn phase(&self, b: usize) -> C64 {
        let sign = if (b & self.z).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
        match self.y_count % 4 {
            0 => C64::new(sign, 0.0),
            1 => C64::new(0.0, sign),
            2 => C64::new(-sign, 0.0),
            _ => C64::new(0.0, -sign),
        }
    }
}

/// Pure state of `num_qubits` qubits stored as `2^n` amplitudes.
///
/// Gate methods mutate in place; a state has a single owner, and shared
/// `&StateVector` references can be read concurrently.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    num_qubits: usize,
    amps: Vec<C64>,
}

impl StateVector {
    /// `|0…0⟩`.
    pub fn zero(num_qubits: usize) -> Result<Self> {
        Self::basis(num_qubits, 0)
    }

    pub fn basis(num_qubits: usize, index: usize) -> Result<Self> {
        check_qubits(num_qubits)?;
        let dim = 1usize << num_qubits;
        if index >= dim {
            return Err(Error::Index { index, len: dim });
        }
        let mut amps = vec![C64::new(0.0, 0.0); dim];
        amps[index] = C64::new(1.0, 0.0);
        Ok(Self { num_qubits, amps })
    }

    /// Wraps raw amplitudes; they must already be normalised to within 1e-8.
    pub fn from_amplitudes(num_qubits: usize, amps: Vec<C64>) -> Result<Self> {
        check_qubits(num_qubits)?;
        ensure_dim(1 << num_qubits, amps.len())?;
        let state = Self { num_qubits, amps };
        let norm = state.norm();
        if (norm - 1.0).abs() > 1e-8 {
            return Err(Error::Numerical(format!("amplitudes have norm {norm}, expected 1")));
        }
        Ok(state)
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &StateVector) -> Result<C64> {
        ensure_dim(self.dim(), other.dim())?;
        Ok(self
            .amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    fn check_string(&self, p: &PauliString) -> Result<()> {
        ensure_dim(self.num_qubits, p.num_qubits())
    }

    /// Multiplies the state by `exp(-i·angle·P/2)`.
    pub fn apply_pauli_rotation(&mut self, generator: &PauliString, angle: f64) -> Result<()> {
        self.check_string(generator)?;
        self.rotate_unchecked(&generator.masks(), angle);
        Ok(())
    }

    pub(crate) fn rotate_unchecked(&mut self, m: &PauliMasks, angle: f64) {
        let (s, c) = (0.5 * angle).sin_cos();
        let mis = C64::new(0.0, -s);
        if m.x == 0 {
            for (b, a) in self.amps.iter_mut().enumerate() {
                *a *= C64::new(c, 0.0) + mis * m.phase(b);
            }
            return;
        }
        // Visit each pair {b, b ⊕ x} once, from the member whose top x-bit is clear.
        let top = 1usize << (usize::BITS - 1 - m.x.leading_zeros());
        for b in 0..self.amps.len() {
            if b & top != 0 {
                continue;
            }
            let partner = b ^ m.x;
            let (lo, hi) = (self.amps[b], self.amps[partner]);
            // (P ψ)[b] = phase(b ⊕ x)·ψ[b ⊕ x]
            self.amps[b] = lo * c + mis * m.phase(partner) * hi;
            self.amps[partner] = hi * c + mis * m.phase(b) * lo;
        }
    }

    /// Multiplies the state by the Pauli string itself.
    pub fn apply_pauli(&mut self, p: &PauliString) -> Result<()> {
        self.check_string(p)?;
        let m = p.masks();
        let mut out = vec![C64::new(0.0, 0.0); self.amps.len()];
        for (b, a) in self.amps.iter().enumerate() {
            out[b ^ m.x] = m.phase(b) * a;
        }
        self.amps = out;
        Ok(())
    }

    /// `ψ ← U·ψ`.
    pub fn apply_dense_unitary(&mut self, u: &DenseUnitary) -> Result<()> {
        ensure_dim(self.dim(), u.dim())?;
        self.amps = matvec(u.matrix(), &self.amps);
        Ok(())
    }

    /// `⟨ψ|P|ψ⟩`.
    pub fn expectation(&self, observable: &PauliString) -> Result<f64> {
        self.check_string(observable)?;
        Ok(self.expectation_unchecked(&observable.masks()))
    }

    pub(crate) fn expectation_unchecked(&self, m: &PauliMasks) -> f64 {
        let mut acc = 0.0;
        if m.x == 0 && m.y_count == 0 {
            for (b, a) in self.amps.iter().enumerate() {
                let w = a.norm_sqr();
                if (b & m.z).count_ones() % 2 == 0 {
                    acc += w;
                } else {
                    acc -= w;
                }
            }
            return acc;
        }
        for (b, a) in self.amps.iter().enumerate() {
            acc += (self.amps[b ^ m.x].conj() * m.phase(b) * a).re;
        }
        acc
    }
}

pub(crate) fn matvec(m: &DMatrix<C64>, v: &[C64]) -> Vec<C64> {
    let n = m.nrows();
    let mut out = vec![C64::new(0.0, 0.0); n];
    // Column-major storage: accumulate one column at a time.
    for (col, x) in m.column_iter().zip(v) {
        if x.re == 0.0 && x.im == 0.0 {
            continue;
        }
        for (o, e) in out.iter_mut().zip(col.iter()) {
            *o += e * x;
        }
    }
    out
}

/// Square unitary matrix acting on a whole register.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseUnitary {
    matrix: DMatrix<C64>,
}

/// Tolerance on `max |U†U − I|` accepted by [`DenseUnitary::new`].
pub const UNITARITY_TOL: f64 = 1e-9;

impl DenseUnitary {
    pub fn new(matrix: DMatrix<C64>) -> Result<Self> {
        let dim = matrix.nrows();
        ensure_dim(dim, matrix.ncols())?;
        if !dim.is_power_of_two() || dim < 2 {
            return Err(Error::Config(format!("matrix dimension {dim} is not 2^n")));
        }
        check_qubits(dim.trailing_zeros() as usize)?;
        let u = Self { matrix };
        let dev = u.unitarity_error();
        if dev.is_nan() || dev > UNITARITY_TOL {
            return Err(Error::Numerical(format!(
                "matrix is not unitary: max |U†U - I| = {dev:e}"
            )));
        }
        Ok(u)
    }

    pub fn identity(num_qubits: usize) -> Result<Self> {
        check_qubits(num_qubits)?;
        let dim = 1 << num_qubits;
        Ok(Self { matrix: DMatrix::identity(dim, dim) })
    }

    /// Dense `exp(-i·angle·P/2)`.
    pub fn pauli_rotation(generator: &PauliString, angle: f64) -> Self {
        let dim = 1usize << generator.num_qubits();
        let (s, c) = (0.5 * angle).sin_cos();
        let matrix = DMatrix::<C64>::identity(dim, dim) * C64::new(c, 0.0)
            + generator.to_dense() * C64::new(0.0, -s);
        Self { matrix }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn num_qubits(&self) -> usize {
        self.dim().trailing_zeros() as usize
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.matrix
    }

    pub fn adjoint(&self) -> Self {
        Self { matrix: self.matrix.adjoint() }
    }

    /// `self · rhs`
    pub fn compose(&self, rhs: &DenseUnitary) -> Result<Self> {
        ensure_dim(self.dim(), rhs.dim())?;
        Ok(Self { matrix: &self.matrix * &rhs.matrix })
    }

    /// `max |U†U − I|` over all entries.
    pub fn unitarity_error(&self) -> f64 {
        let dim = self.dim();
        let dev = self.matrix.adjoint() * &self.matrix - DMatrix::<C64>::identity(dim, dim);
        dev.iter().map(|v| v.norm()).fold(0.0, |acc: f64, d| {
            if acc.is_nan() || d.is_nan() {
                f64::NAN
            } else {
                acc.max(d)
            }
        })
    }
}
