//! Randomised self-checks of the gradient machinery, run by `qcl gradcheck`.

use std::sync::Arc;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::RngExt;
use serde::Serialize;

use crate::ansatz::{Circuit, ParameterVector};
use crate::encoding::{EncodingKind, EncodingSpec};
use crate::error::Result;
use crate::grad::{commutator_via_shifts, finite_diff_grad, param_shift_grad};
use crate::hamiltonian::{evolution_gate, IsingHamiltonian};
use crate::qstate::{Pauli, PauliString, C64};
use crate::rng;

pub const GRADIENT_TOL: f64 = 1e-6;
pub const FD_STEP: f64 = 1e-4;
pub const COMMUTATOR_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckReport {
    pub name: &'static str,
    pub instances: usize,
    pub max_abs_diff: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub elapsed_s: f64,
}

impl CheckReport {
    fn new(name: &'static str, instances: usize, max_abs_diff: f64, tolerance: f64, start: Instant) -> Self {
        Self {
            name,
            instances,
            max_abs_diff,
            tolerance,
            passed: max_abs_diff < tolerance,
            elapsed_s: start.elapsed().as_secs_f64(),
        }
    }
}

/// Parameter-shift against central differences on random 4-qubit, depth-2
/// circuits, each with its own Hamiltonian, angles, input and measured `Z`.
pub fn gradient_check(instances: usize, seed: u64) -> Result<CheckReport> {
    const N: usize = 4;
    let start = Instant::now();
    let mut rng = rng::seeded(seed);
    let mut worst = 0.0f64;
    for _ in 0..instances {
        let h = IsingHamiltonian::sample(N, rng.random())?;
        let gate = Arc::new(evolution_gate(&h, 10.0)?);
        let circuit = Circuit::new(EncodingSpec::new(EncodingKind::RyRz, N, 1)?, 2, gate)?;
        let theta = ParameterVector::random_uniform(circuit.num_params(), rng.random());
        let x = [rng.random_range(-1.0..=1.0)];
        let z = PauliString::single(N, rng.random_range(0..N), Pauli::Z)?;
        let shift = param_shift_grad(&circuit, &theta, &x, &z)?;
        let fd = finite_diff_grad(&circuit, &theta, &x, &z, FD_STEP)?;
        for (a, b) in shift.values().iter().zip(fd.values()) {
            worst = worst.max((a - b).abs());
        }
    }
    Ok(CheckReport::new("parameter_shift_vs_central_difference", instances, worst, GRADIENT_TOL, start))
}

fn random_hermitian(dim: usize, rng: &mut rng::QclRng) -> DMatrix<C64> {
    let a = DMatrix::from_fn(dim, dim, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
    (&a + a.adjoint()) * C64::new(0.5, 0.0)
}

/// `[P, ρ]` against its two-shift expression for random single-qubit Pauli
/// generators on two qubits and random Hermitian `ρ`.
pub fn commutator_check(instances: usize, seed: u64) -> Result<CheckReport> {
    let start = Instant::now();
    let mut rng = rng::seeded(seed);
    let mut worst = 0.0f64;
    for _ in 0..instances {
        let pauli = [Pauli::X, Pauli::Y, Pauli::Z][rng.random_range(0..3)];
        let p = PauliString::single(2, rng.random_range(0..2), pauli)?;
        let rho = random_hermitian(4, &mut rng);
        let dense = p.to_dense();
        let exact = &dense * &rho - &rho * &dense;
        let shifted = commutator_via_shifts(&p, &rho)?;
        worst = worst.max((exact - shifted).iter().map(|z| z.norm()).fold(0.0, f64::max));
    }
    Ok(CheckReport::new("commutator_identity", instances, worst, COMMUTATOR_TOL, start))
}
