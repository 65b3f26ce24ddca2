//! Classical comparison for the small overfitting experiment: linear
//! regression on a fixed set of basis functions, the noisy toy datasets it is
//! compared on, and the Pauli transfer matrix of a circuit unitary.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::RngExt;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{ensure_dim, Error, Result};
use crate::learn::Dataset;
use crate::qstate::{DenseUnitary, PauliString, C64};
use crate::rng;

/// Largest register for which the `4^N × 4^N` transfer matrix is built.
pub const MAX_TRANSFER_QUBITS: usize = 3;
const UNITARITY_TOL: f64 = 1e-8;

#[derive(Clone, Copy)]
pub struct BasisFunction {
    pub name: &'static str,
    pub eval: fn(f64) -> f64,
}

impl fmt::Debug for BasisFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name)
    }
}

#[derive(Clone, Debug)]
pub struct BasisSet(Vec<BasisFunction>);

fn sqrt_1mx2(x: f64) -> f64 {
    (1.0 - x * x).max(0.0).sqrt()
}

impl BasisSet {
    pub fn new(functions: Vec<BasisFunction>) -> Result<Self> {
        if functions.is_empty() {
            return Err(Error::Config("basis set is empty".into()));
        }
        Ok(Self(functions))
    }

    /// The nine functions a 3-qubit `R^Y(sin⁻¹x)` encoding makes available.
    ///
    /// They span only seven dimensions: `x(1−x²) = x − x³` and
    /// `(1−x²)^{3/2} = √(1−x²) − x²√(1−x²)`.
    pub fn three_qubit_ry() -> Self {
        Self(vec![
            BasisFunction { name: "x", eval: |x| x },
            BasisFunction { name: "x^2", eval: |x| x * x },
            BasisFunction { name: "x^3", eval: |x| x * x * x },
            BasisFunction { name: "sqrt(1-x^2)", eval: sqrt_1mx2 },
            BasisFunction { name: "1-x^2", eval: |x| 1.0 - x * x },
            BasisFunction { name: "(1-x^2)^(3/2)", eval: |x| sqrt_1mx2(x).powi(3) },
            BasisFunction { name: "x*sqrt(1-x^2)", eval: |x| x * sqrt_1mx2(x) },
            BasisFunction { name: "x^2*sqrt(1-x^2)", eval: |x| x * x * sqrt_1mx2(x) },
            BasisFunction { name: "x*(1-x^2)", eval: |x| x * (1.0 - x * x) },
        ])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn functions(&self) -> &[BasisFunction] {
        &self.0
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.0.iter().map(|b| b.name).collect()
    }

    pub fn evaluate(&self, x: f64) -> Vec<f64> {
        self.0.iter().map(|b| (b.eval)(x)).collect()
    }

    pub fn design_matrix(&self, xs: &[f64]) -> DMatrix<f64> {
        DMatrix::from_fn(xs.len(), self.len(), |i, j| (self.0[j].eval)(xs[i]))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    /// Numerical rank of the design matrix.
    pub rank: usize,
    /// Set when the rank is below the number of basis functions, in which
    /// case `weights` is the minimum-norm least-squares solution.
    pub rank_deficient: bool,
}

impl LinearModel {
    pub fn predict(&self, basis: &BasisSet, x: f64) -> Result<f64> {
        ensure_dim(basis.len(), self.weights.len())?;
        Ok(basis.evaluate(x).iter().zip(&self.weights).map(|(p, w)| p * w).sum())
    }

    pub fn weight_norm(&self) -> f64 {
        weight_norm(&self.weights)
    }
}

pub fn weight_norm(weights: &[f64]) -> f64 {
    weights.iter().map(|w| w * w).sum::<f64>().sqrt()
}

/// Least-squares weights on the training split of a scalar dataset, by SVD
/// of the design matrix with singular values below `max(m,n)·ε·σ_max` dropped.
pub fn least_squares_fit(basis: &BasisSet, data: &Dataset) -> Result<LinearModel> {
    ensure_dim(1, data.input_dim())?;
    ensure_dim(1, data.output_dim())?;
    let train = &data.split.train;
    if train.is_empty() {
        return Err(Error::Config("least squares needs at least one sample".into()));
    }
    let xs: Vec<f64> = train.iter().map(|&i| data.inputs[i][0]).collect();
    let ys = DVector::from_iterator(train.len(), train.iter().map(|&i| data.teachers[i][0]));
    let a = basis.design_matrix(&xs);
    let svd = a.svd(true, true);
    let smax = svd.singular_values.max();
    let tol = (xs.len().max(basis.len()) as f64) * f64::EPSILON * smax;
    let rank = svd.singular_values.iter().filter(|s| **s > tol).count();
    let w = svd
        .solve(&ys, tol)
        .map_err(|e| Error::Numerical(format!("least-squares solve failed: {e}")))?;
    Ok(LinearModel { weights: w.iter().copied().collect(), rank, rank_deficient: rank < basis.len() })
}

/// Target functions of the small overfitting experiment.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OverfitTarget {
    HalfSin,
    Square,
}

impl OverfitTarget {
    pub fn name(self) -> &'static str {
        match self {
            OverfitTarget::HalfSin => "half_sin",
            OverfitTarget::Square => "x2",
        }
    }

    pub fn eval(self, x: f64) -> f64 {
        match self {
            OverfitTarget::HalfSin => 0.5 * x.sin(),
            OverfitTarget::Square => x * x,
        }
    }
}

impl FromStr for OverfitTarget {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "half_sin" => Ok(OverfitTarget::HalfSin),
            "x2" => Ok(OverfitTarget::Square),
            other => Err(Error::Config(format!("unknown overfitting target `{other}` (expected half_sin or x2)"))),
        }
    }
}

/// Uniform inputs on `[-1, 1]` with Gaussian-noised teachers: `train` points
/// followed by `test` held-out points, all drawn from one seeded stream.
pub fn noisy_dataset(target: OverfitTarget, train: usize, test: usize, noise_std: f64, seed: u64) -> Result<Dataset> {
    if !(noise_std >= 0.0 && noise_std.is_finite()) {
        return Err(Error::Config(format!("noise standard deviation must be non-negative, got {noise_std}")));
    }
    let normal = Normal::new(0.0, noise_std).map_err(|e| Error::Config(e.to_string()))?;
    let mut rng = rng::seeded(seed);
    let mut draw = |count: usize| {
        let mut xs = Vec::with_capacity(count);
        let mut ys = Vec::with_capacity(count);
        for _ in 0..count {
            let x: f64 = rng.random_range(-1.0..=1.0);
            xs.push(vec![x]);
            ys.push(vec![target.eval(x) + normal.sample(&mut rng)]);
        }
        (xs, ys)
    };
    let tr = draw(train);
    let te = draw(test);
    Dataset::from_parts(tr, te)
}

/// `R_mk = Tr(P_m U P_k U†) / 2^N` over the canonical Pauli ordering.
pub fn pauli_transfer_matrix(u: &DenseUnitary) -> Result<DMatrix<f64>> {
    let n = u.num_qubits();
    if n > MAX_TRANSFER_QUBITS {
        return Err(Error::Scale(format!(
            "transfer matrix limited to {MAX_TRANSFER_QUBITS} qubits, got {n}"
        )));
    }
    let err = u.unitarity_error();
    if !(err <= UNITARITY_TOL) {
        return Err(Error::Numerical(format!("matrix is not unitary (max |U†U - I| = {err:e})")));
    }
    let dim = u.dim();
    let terms = 1usize << (2 * n);
    let um = u.matrix();
    let udag = um.adjoint();
    let masks: Vec<_> = (0..terms)
        .map(|k| PauliString::from_index(n, k).map(|p| p.masks()))
        .collect::<Result<_>>()?;
    let mut r = DMatrix::zeros(terms, terms);
    for (k, pk) in masks.iter().enumerate() {
        // (U P_k)[:, c] = phase_k(c) · U[:, c ⊕ x_k]
        let up = DMatrix::from_fn(dim, dim, |row, c| pk.phase(c) * um[(row, c ^ pk.x)]);
        let conj = up * &udag;
        for (m, pm) in masks.iter().enumerate() {
            // Tr(P_m M) = Σ_c phase_m(c) · M[c, c ⊕ x_m]
            let tr: C64 = (0..dim).map(|c| pm.phase(c) * conj[(c, c ^ pm.x)]).sum();
            r[(m, k)] = tr.re / dim as f64;
        }
    }
    Ok(r)
}
