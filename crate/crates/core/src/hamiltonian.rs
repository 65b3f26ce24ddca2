//! Fully connected transverse-field Ising Hamiltonian
//! `H = Σ_j a_j X_j + Σ_{j>k} J_jk Z_j Z_k` and its exact time evolution.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::RngExt;
use serde::{Deserialize, Serialize};

use crate::batch::EigenFactors;
use crate::error::{ensure_dim, Error, Result};
use crate::qstate::{check_qubits, qubit_bit, DenseUnitary, StateVector, C64};
use crate::rng;

/// Coefficients of the Ising model. `couplings[j]` holds `J_jk` for `k < j`,
/// so row 0 is empty and the triangle has `n(n-1)/2` entries.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IsingHamiltonian {
    pub fields: Vec<f64>,
    pub couplings: Vec<Vec<f64>>,
}

impl IsingHamiltonian {
    pub fn new(fields: Vec<f64>, couplings: Vec<Vec<f64>>) -> Result<Self> {
        let h = Self { fields, couplings };
        h.validate()?;
        Ok(h)
    }

    pub fn validate(&self) -> Result<()> {
        check_qubits(self.fields.len())?;
        ensure_dim(self.fields.len(), self.couplings.len())?;
        for (j, row) in self.couplings.iter().enumerate() {
            ensure_dim(j, row.len())?;
        }
        if self.fields.iter().chain(self.couplings.iter().flatten()).any(|v| !v.is_finite()) {
            return Err(Error::Config("Hamiltonian coefficients must be finite".into()));
        }
        Ok(())
    }

    /// Draws every `a_j`, then every `J_jk` (row by row), i.i.d. uniform on `[-1, 1]`.
    pub fn sample(num_qubits: usize, seed: u64) -> Result<Self> {
        check_qubits(num_qubits)?;
        let mut rng = rng::seeded(seed);
        let fields = (0..num_qubits).map(|_| rng.random_range(-1.0..=1.0)).collect();
        let couplings = (0..num_qubits)
            .map(|j| (0..j).map(|_| rng.random_range(-1.0..=1.0)).collect())
            .collect();
        Ok(Self { fields, couplings })
    }

    pub fn num_qubits(&self) -> usize {
        self.fields.len()
    }

    pub fn num_couplings(&self) -> usize {
        self.couplings.iter().map(Vec::len).sum()
    }

    /// `J_jk` for either ordering of the pair.
    pub fn coupling(&self, j: usize, k: usize) -> f64 {
        match j.cmp(&k) {
            std::cmp::Ordering::Greater => self.couplings[j][k],
            std::cmp::Ordering::Less => self.couplings[k][j],
            std::cmp::Ordering::Equal => 0.0,
        }
    }

    /// Dense matrix in the computational basis. Every term is real, so the
    /// Hermitian matrix is returned as a real symmetric one.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.num_qubits();
        let dim = 1usize << n;
        let mut h = DMatrix::zeros(dim, dim);
        for b in 0..dim {
            let z = |q: usize| if b & qubit_bit(n, q) == 0 { 1.0 } else { -1.0 };
            let mut diag = 0.0;
            for j in 0..n {
                for k in 0..j {
                    diag += self.couplings[j][k] * z(j) * z(k);
                }
                h[(b ^ qubit_bit(n, j), b)] += self.fields[j];
            }
            h[(b, b)] = diag;
        }
        h
    }

    pub fn spectrum(&self) -> Result<Spectrum> {
        Spectrum::of(self.to_dense())
    }

    /// `⟨ψ|H|ψ⟩`.
    pub fn energy(&self, state: &StateVector) -> Result<f64> {
        ensure_dim(self.num_qubits(), state.num_qubits())?;
        let h = self.to_dense();
        let psi = state.amplitudes();
        let mut e = 0.0;
        for (c, col) in h.column_iter().enumerate() {
            for (r, v) in col.iter().enumerate() {
                if *v != 0.0 {
                    e += (psi[r].conj() * psi[c] * *v).re;
                }
            }
        }
        Ok(e)
    }
}

/// Eigendecomposition `H = V Λ Vᵀ` of a real symmetric Hamiltonian.
#[derive(Clone, Debug)]
pub struct Spectrum {
    pub eigenvalues: DVector<f64>,
    pub eigenvectors: DMatrix<f64>,
}

impl Spectrum {
    pub fn of(h: DMatrix<f64>) -> Result<Self> {
        let dim = h.nrows();
        ensure_dim(dim, h.ncols())?;
        let eig = SymmetricEigen::try_new(h, f64::EPSILON, 0).ok_or_else(|| {
            Error::Numerical(format!("symmetric eigendecomposition of {dim}x{dim} matrix did not converge"))
        })?;
        if eig.eigenvalues.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("non-finite eigenvalue".into()));
        }
        Ok(Self { eigenvalues: eig.eigenvalues, eigenvectors: eig.eigenvectors })
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    fn phases(&self, time: f64) -> Vec<C64> {
        self.eigenvalues.iter().map(|l| C64::from_polar(1.0, -l * time)).collect()
    }

    pub(crate) fn factors(&self, time: f64) -> EigenFactors {
        EigenFactors {
            v: self.eigenvectors.clone(),
            vt: self.eigenvectors.transpose(),
            phases: self.phases(time),
        }
    }

    /// `exp(-iHt) = V·exp(-iΛt)·Vᵀ`.
    pub fn evolution(&self, time: f64) -> Result<DenseUnitary> {
        let dim = self.dim();
        let phases = self.phases(time);
        let v = &self.eigenvectors;
        // (V·diag(phases)) as a complex matrix, then multiply by Vᵀ.
        let left = DMatrix::from_fn(dim, dim, |r, k| phases[k] * v[(r, k)]);
        let right = v.transpose().map(|x| C64::new(x, 0.0));
        DenseUnitary::new(left * right)
    }

    /// `exp(-iHt)|ψ⟩` without forming the propagator.
    pub fn evolve_state(&self, state: &StateVector, time: f64) -> Result<StateVector> {
        ensure_dim(self.dim(), state.dim())?;
        let v = &self.eigenvectors;
        let psi = state.amplitudes();
        let phases = self.phases(time);
        let coeffs: Vec<C64> = v
            .column_iter()
            .zip(&phases)
            .map(|(col, ph)| ph * col.iter().zip(psi).map(|(x, a)| a * *x).sum::<C64>())
            .collect();
        let mut out = vec![C64::new(0.0, 0.0); self.dim()];
        for (col, c) in v.column_iter().zip(&coeffs) {
            for (o, x) in out.iter_mut().zip(col.iter()) {
                *o += c * *x;
            }
        }
        StateVector::from_amplitudes(state.num_qubits(), out)
    }
}

/// Propagator `exp(-iHt)` for a fixed evolution time.
#[derive(Clone, Debug)]
pub struct EvolutionGate {
    pub time: f64,
    pub unitary: DenseUnitary,
    /// Real eigenbasis form of `unitary`, when it came from a Hamiltonian.
    pub(crate) factors: Option<EigenFactors>,
}

impl EvolutionGate {
    /// Wraps an arbitrary unitary as the entangling gate.
    pub fn from_unitary(time: f64, unitary: DenseUnitary) -> Self {
        Self { time, unitary, factors: None }
    }
}

pub fn evolution_gate(h: &IsingHamiltonian, time: f64) -> Result<EvolutionGate> {
    if !time.is_finite() {
        return Err(Error::Config(format!("evolution time {time} is not finite")));
    }
    let spectrum = h.spectrum()?;
    let unitary = spectrum.evolution(time)?;
    Ok(EvolutionGate { time, unitary, factors: Some(spectrum.factors(time)) })
}
