//! Parameter-shift gradients.
//!
//! For a gate `exp(-iθ_j P_j/2)` the exact derivative of any expectation is
//! `(⟨B⟩(θ_j + π/2) − ⟨B⟩(θ_j − π/2)) / 2`. [`shifted_expectations`] runs the
//! two shifted circuits for every parameter; the unshifted prefix up to the
//! shifted gate is simulated once and shared by both evaluations.

use std::f64::consts::FRAC_PI_2;

use nalgebra::DMatrix;

use crate::ansatz::{Circuit, ObservableSet, ParameterVector, Step};
use crate::batch::StateBatch;
use crate::error::{ensure_dim, Error, Result};
use crate::learn::softmax;
use crate::qstate::{DenseUnitary, PauliString, C64};

/// Derivatives of one scalar with respect to every circuit parameter,
/// in [`ParameterVector`] layout.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientVector(Vec<f64>);

impl GradientVector {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_values(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Expectations at `θ` plus the `±π/2`-shifted expectations of every parameter.
#[derive(Clone, Debug, PartialEq)]
pub struct ShiftedExpectations {
    /// `⟨B_k⟩(θ)` per observable.
    pub values: Vec<f64>,
    /// `plus[j][k] = ⟨B_k⟩(θ + π/2·e_j)`.
    pub plus: Vec<Vec<f64>>,
    /// `minus[j][k] = ⟨B_k⟩(θ − π/2·e_j)`.
    pub minus: Vec<Vec<f64>>,
}

impl ShiftedExpectations {
    pub fn num_params(&self) -> usize {
        self.plus.len()
    }

    pub fn num_observables(&self) -> usize {
        self.values.len()
    }

    /// `∂⟨B_k⟩/∂θ` for observable `k`.
    pub fn gradient(&self, k: usize) -> GradientVector {
        GradientVector(
            self.plus
                .iter()
                .zip(&self.minus)
                .map(|(p, m)| 0.5 * (p[k] - m[k]))
                .collect(),
        )
    }
}

/// Runs the unshifted circuit and all `2·|θ|` shifted circuits side by side.
///
/// Each shifted circuit branches off the unshifted state just before its
/// rotation, so the shared prefix is simulated once; every branch then
/// receives the remaining gates in full.
pub fn shifted_expectations(
    circuit: &Circuit,
    theta: &ParameterVector,
    x: &[f64],
    observables: &ObservableSet,
) -> Result<ShiftedExpectations> {
    ensure_dim(circuit.num_params(), theta.len())?;
    ensure_dim(circuit.num_qubits(), observables.num_qubits())?;
    let num_params = circuit.num_params();
    let angles = theta.values();
    let mut batch = StateBatch::with_capacity(1 << circuit.num_qubits(), 1 + 2 * num_params);
    batch.push(&circuit.encoding().encode(x)?);
    let mut branch = vec![0usize; num_params];
    for step in circuit.steps() {
        match *step {
            Step::Evolution => circuit.evolve_batch(&mut batch),
            Step::Rotation { param, .. } => {
                let m = circuit.rotation_masks(param);
                let n = batch.len();
                batch.push_copy(0);
                batch.push_copy(0);
                batch.rotate(n, m, angles[param] + FRAC_PI_2);
                batch.rotate(n + 1, m, angles[param] - FRAC_PI_2);
                batch.rotate_range(0..n, m, angles[param]);
                branch[param] = n;
            }
        }
    }
    let masks = observables.masks();
    let measure = |j: usize| -> Vec<f64> { masks.iter().map(|m| batch.expectation(j, m)).collect() };
    Ok(ShiftedExpectations {
        values: measure(0),
        plus: branch.iter().map(|&j| measure(j)).collect(),
        minus: branch.iter().map(|&j| measure(j + 1)).collect(),
    })
}

/// `∂⟨B⟩/∂θ` by the parameter-shift rule.
pub fn param_shift_grad(
    circuit: &Circuit,
    theta: &ParameterVector,
    x: &[f64],
    observable: &PauliString,
) -> Result<GradientVector> {
    let obs = ObservableSet::new(vec![observable.clone()])?;
    Ok(shifted_expectations(circuit, theta, x, &obs)?.gradient(0))
}

/// Central differences `(f(θ + h e_j) − f(θ − h e_j)) / 2h`.
pub fn finite_diff_grad(
    circuit: &Circuit,
    theta: &ParameterVector,
    x: &[f64],
    observable: &PauliString,
    h: f64,
) -> Result<GradientVector> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::Config(format!("finite-difference step must be positive, got {h}")));
    }
    let obs = ObservableSet::new(vec![observable.clone()])?;
    let mut shifted = theta.values().to_vec();
    let eval = |v: &[f64]| -> Result<f64> {
        Ok(circuit.forward(&ParameterVector::new(v.to_vec()), x, &obs)?[0])
    };
    let mut out = Vec::with_capacity(theta.len());
    for j in 0..theta.len() {
        let orig = shifted[j];
        shifted[j] = orig + h;
        let up = eval(&shifted)?;
        shifted[j] = orig - h;
        let down = eval(&shifted)?;
        shifted[j] = orig;
        out.push((up - down) / (2.0 * h));
    }
    Ok(GradientVector(out))
}

/// `i·[U(π/2)ρU(π/2)† − U(−π/2)ρU(−π/2)†]` with `U(φ) = exp(-iφP/2)`,
/// which equals the commutator `[P, ρ]`.
pub fn commutator_via_shifts(generator: &PauliString, rho: &DMatrix<C64>) -> Result<DMatrix<C64>> {
    let dim = 1usize << generator.num_qubits();
    ensure_dim(dim, rho.nrows())?;
    ensure_dim(dim, rho.ncols())?;
    let conj = |angle: f64| {
        let u = DenseUnitary::pauli_rotation(generator, angle).into_matrix();
        &u * rho * u.adjoint()
    };
    Ok((conj(FRAC_PI_2) - conj(-FRAC_PI_2)) * C64::new(0.0, 1.0))
}

fn check_batch(evals: &[ShiftedExpectations], teachers: &[Vec<f64>]) -> Result<usize> {
    ensure_dim(evals.len(), teachers.len())?;
    let first = evals
        .first()
        .ok_or_else(|| Error::Config("empty batch".into()))?;
    for (e, t) in evals.iter().zip(teachers) {
        ensure_dim(e.num_observables(), t.len())?;
        ensure_dim(first.num_params(), e.num_params())?;
    }
    Ok(first.num_params())
}

/// Gradient of `L = Σ_i Σ_k (a·⟨B_k⟩_i − f_ik)²` with respect to `θ` and the
/// output scale `a`.
pub fn quadratic_cost_gradient(
    evals: &[ShiftedExpectations],
    teachers: &[Vec<f64>],
    scale: f64,
) -> Result<(GradientVector, f64)> {
    let num_params = check_batch(evals, teachers)?;
    let mut grad = vec![0.0; num_params];
    let mut d_scale = 0.0;
    for (e, f) in evals.iter().zip(teachers) {
        for (k, (&z, &target)) in e.values.iter().zip(f).enumerate() {
            let resid = 2.0 * (scale * z - target);
            d_scale += resid * z;
            let w = resid * scale * 0.5;
            for (g, (p, m)) in grad.iter_mut().zip(e.plus.iter().zip(&e.minus)) {
                *g += w * (p[k] - m[k]);
            }
        }
    }
    Ok((GradientVector(grad), d_scale))
}

/// `∂L/∂q_k = y_k − f_k` for `L = −Σ_k f_k log softmax(q)_k` and normalised `f`.
pub fn softmax_cross_entropy_output_gradient(q: &[f64], teacher: &[f64]) -> Result<Vec<f64>> {
    ensure_dim(q.len(), teacher.len())?;
    Ok(softmax(q).iter().zip(teacher).map(|(y, f)| y - f).collect())
}

/// Gradient of the summed softmax cross-entropy, with the raw expectations as logits.
pub fn cross_entropy_gradient(evals: &[ShiftedExpectations], teachers: &[Vec<f64>]) -> Result<GradientVector> {
    let num_params = check_batch(evals, teachers)?;
    let mut grad = vec![0.0; num_params];
    for (e, f) in evals.iter().zip(teachers) {
        let dq = softmax_cross_entropy_output_gradient(&e.values, f)?;
        for (k, w) in dq.iter().enumerate() {
            for (g, (p, m)) in grad.iter_mut().zip(e.plus.iter().zip(&e.minus)) {
                *g += 0.5 * w * (p[k] - m[k]);
            }
        }
    }
    Ok(GradientVector(grad))
}
