//! Layered circuit: input encoding, then `depth` layers of
//! (Ising evolution `e^{-iHT}`, then `R^X·R^Z·R^X` on every qubit).
//!
//! Parameters are laid out layer-major, then qubit, then rotation slot,
//! see [`Circuit::param_index`]. Within a qubit the rotations act in the
//! chronological order first X, then Z, then the second X.

use std::f64::consts::{FRAC_PI_2, PI};
use std::sync::Arc;

use rand::RngExt;

use crate::batch::StateBatch;
use crate::encoding::EncodingSpec;
use crate::error::{ensure_dim, Error, Result};
use crate::hamiltonian::EvolutionGate;
use crate::qstate::{check_qubits, DenseUnitary, Pauli, PauliMasks, PauliString, StateVector, C64};
use crate::rng;

/// Generators of the three rotation slots, in the order they act.
pub const ROTATION_AXES: [Pauli; 3] = [Pauli::X, Pauli::Z, Pauli::X];

/// Flat vector of rotation angles (radians).
#[derive(Clone, Debug, PartialEq)]
pub struct ParameterVector(Vec<f64>);

impl ParameterVector {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn zeros(len: usize) -> Self {
        Self(vec![0.0; len])
    }

    /// I.i.d. uniform angles on `[0, 2π)`.
    pub fn random_uniform(len: usize, seed: u64) -> Self {
        let mut rng = rng::seeded(seed);
        Self((0..len).map(|_| rng.random_range(0.0..2.0 * PI)).collect())
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
}

impl From<Vec<f64>> for ParameterVector {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

/// Measured observables, one output per entry.
#[derive(Clone, Debug, PartialEq)]
pub struct ObservableSet(Vec<PauliString>);

impl ObservableSet {
    pub fn new(observables: Vec<PauliString>) -> Result<Self> {
        let first = observables
            .first()
            .ok_or_else(|| Error::Config("observable set must not be empty".into()))?;
        let n = first.num_qubits();
        for o in &observables {
            ensure_dim(n, o.num_qubits())?;
        }
        Ok(Self(observables))
    }

    /// `Z` on each of the first `count` qubits.
    pub fn z_on_first(num_qubits: usize, count: usize) -> Result<Self> {
        check_qubits(num_qubits)?;
        if count == 0 || count > num_qubits {
            return Err(Error::Config(format!(
                "cannot measure {count} outputs on {num_qubits} qubits"
            )));
        }
        Self::new((0..count).map(|q| PauliString::single(num_qubits, q, Pauli::Z)).collect::<Result<_>>()?)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn num_qubits(&self) -> usize {
        self.0[0].num_qubits()
    }

    pub fn as_slice(&self) -> &[PauliString] {
        &self.0
    }

    pub(crate) fn masks(&self) -> Vec<PauliMasks> {
        self.0.iter().map(PauliString::masks).collect()
    }
}

/// One element of the gate schedule after encoding.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Step {
    Evolution,
    Rotation { qubit: usize, axis: Pauli, param: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Shift {
    Plus,
    Minus,
}

impl Shift {
    pub fn angle(self) -> f64 {
        match self {
            Shift::Plus => FRAC_PI_2,
            Shift::Minus => -FRAC_PI_2,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Circuit {
    encoding: EncodingSpec,
    depth: usize,
    evolution: Arc<EvolutionGate>,
    steps: Vec<Step>,
    rotation_masks: Vec<PauliMasks>,
}

impl Circuit {
    pub fn new(encoding: EncodingSpec, depth: usize, evolution: Arc<EvolutionGate>) -> Result<Self> {
        let n = encoding.num_qubits();
        if depth == 0 {
            return Err(Error::Config("circuit depth must be at least 1".into()));
        }
        ensure_dim(n, evolution.unitary.num_qubits())?;
        let mut steps = Vec::with_capacity(depth * (1 + 3 * n));
        let mut rotation_masks = Vec::with_capacity(3 * n * depth);
        for layer in 0..depth {
            steps.push(Step::Evolution);
            for qubit in 0..n {
                for (slot, axis) in ROTATION_AXES.into_iter().enumerate() {
                    let param = layer * 3 * n + qubit * 3 + slot;
                    debug_assert_eq!(param, rotation_masks.len());
                    steps.push(Step::Rotation { qubit, axis, param });
                    rotation_masks.push(PauliString::single(n, qubit, axis)?.masks());
                }
            }
        }
        Ok(Self { encoding, depth, evolution, steps, rotation_masks })
    }

    pub fn num_qubits(&self) -> usize {
        self.encoding.num_qubits()
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn encoding(&self) -> &EncodingSpec {
        &self.encoding
    }

    pub fn evolution(&self) -> &EvolutionGate {
        &self.evolution
    }

    pub fn num_params(&self) -> usize {
        3 * self.num_qubits() * self.depth
    }

    /// Position of rotation `slot` (0: first X, 1: Z, 2: second X) on `qubit` in `layer`.
    pub fn param_index(&self, layer: usize, qubit: usize, slot: usize) -> usize {
        (layer * self.num_qubits() + qubit) * 3 + slot
    }

    /// Inverse of [`Circuit::param_index`].
    pub fn param_location(&self, index: usize) -> (usize, usize, usize) {
        let n = self.num_qubits();
        (index / (3 * n), (index / 3) % n, index % 3)
    }

    /// Single-qubit generator of parameter `index`.
    pub fn generator(&self, index: usize) -> Result<PauliString> {
        if index >= self.num_params() {
            return Err(Error::Index { index, len: self.num_params() });
        }
        let (_, qubit, slot) = self.param_location(index);
        PauliString::single(self.num_qubits(), qubit, ROTATION_AXES[slot])
    }

    /// Gate schedule applied after the encoding.
    pub fn steps(&self) -> &[Step] {
        &self.steps
    }

    pub(crate) fn check_theta(&self, theta: &ParameterVector) -> Result<()> {
        ensure_dim(self.num_params(), theta.len())
    }

    pub(crate) fn apply_step(&self, state: &mut StateVector, step: Step, theta: &[f64]) {
        match step {
            Step::Evolution => {
                state
                    .apply_dense_unitary(&self.evolution.unitary)
                    .expect("evolution dimension checked at construction");
            }
            Step::Rotation { param, .. } => {
                state.rotate_unchecked(&self.rotation_masks[param], theta[param]);
            }
        }
    }

    pub(crate) fn rotation_masks(&self, param: usize) -> &PauliMasks {
        &self.rotation_masks[param]
    }

    pub(crate) fn evolve_batch(&self, batch: &mut StateBatch) {
        match &self.evolution.factors {
            Some(f) => batch.evolve(f),
            None => batch.apply_dense(self.evolution.unitary.matrix()),
        }
    }

    /// Expectations for many inputs at once, in input order.
    pub fn forward_batch(
        &self,
        theta: &ParameterVector,
        inputs: &[Vec<f64>],
        observables: &ObservableSet,
    ) -> Result<Vec<Vec<f64>>> {
        self.check_theta(theta)?;
        ensure_dim(self.num_qubits(), observables.num_qubits())?;
        let mut batch = StateBatch::with_capacity(1 << self.num_qubits(), inputs.len());
        for x in inputs {
            batch.push(&self.encoding.encode(x)?);
        }
        let all = 0..batch.len();
        for step in &self.steps {
            match *step {
                Step::Evolution => self.evolve_batch(&mut batch),
                Step::Rotation { param, .. } => {
                    batch.rotate_range(all.clone(), &self.rotation_masks[param], theta.values()[param])
                }
            }
        }
        let masks = observables.masks();
        Ok(all.map(|j| masks.iter().map(|m| batch.expectation(j, m)).collect()).collect())
    }

    /// `U(θ)|ψ⟩` for an arbitrary input state.
    pub fn apply(&self, theta: &ParameterVector, state: &StateVector) -> Result<StateVector> {
        self.check_theta(theta)?;
        ensure_dim(self.num_qubits(), state.num_qubits())?;
        let mut s = state.clone();
        for step in &self.steps {
            self.apply_step(&mut s, *step, theta.values());
        }
        Ok(s)
    }

    /// `U(θ)·U_in(x)|0…0⟩`.
    pub fn output_state(&self, theta: &ParameterVector, x: &[f64]) -> Result<StateVector> {
        self.check_theta(theta)?;
        let input = self.encoding.encode(x)?;
        self.apply(theta, &input)
    }

    /// Expectation of each observable on the output state.
    pub fn forward(&self, theta: &ParameterVector, x: &[f64], observables: &ObservableSet) -> Result<Vec<f64>> {
        ensure_dim(self.num_qubits(), observables.num_qubits())?;
        let out = self.output_state(theta, x)?;
        Ok(observables.masks().iter().map(|m| out.expectation_unchecked(m)).collect())
    }

    /// Dense matrix of `U(θ)` (encoding excluded), column by column.
    pub fn unitary(&self, theta: &ParameterVector) -> Result<DenseUnitary> {
        self.check_theta(theta)?;
        let n = self.num_qubits();
        let dim = 1usize << n;
        let mut m = nalgebra::DMatrix::<C64>::zeros(dim, dim);
        for c in 0..dim {
            let col = self.apply(theta, &StateVector::basis(n, c)?)?;
            m.set_column(c, &nalgebra::DVector::from_column_slice(col.amplitudes()));
        }
        DenseUnitary::new(m)
    }
}

/// `θ` with `±π/2` added at one coordinate. Each parameter enters through a
/// single `exp(-iθP/2)`, so this equals inserting the extra `±π/2` rotation
/// right after that gate.
pub fn insert_shifted(circuit: &Circuit, theta: &ParameterVector, index: usize, shift: Shift) -> Result<ParameterVector> {
    circuit.check_theta(theta)?;
    if index >= theta.len() {
        return Err(Error::Index { index, len: theta.len() });
    }
    let mut v = theta.values().to_vec();
    v[index] += shift.angle();
    Ok(ParameterVector(v))
}
