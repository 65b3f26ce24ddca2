//! Cost functions, output maps, sampling-noise emulation and the training loop.

mod bfgs;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use bfgs::{
    minimize, FnObjective, IterationRecord, Minimization, MinimizeOptions, Objective, Termination, GRADIENT_CHECK_TOL,
};

use crate::ansatz::{Circuit, ObservableSet, ParameterVector};
use crate::error::{ensure_dim, Error, Result};
use crate::grad::{cross_entropy_gradient, quadratic_cost_gradient, shifted_expectations, ShiftedExpectations};
use crate::rng::{self, QclRng};

/// Inputs simulated together in one batch by [`Learner::expectations`].
const FORWARD_CHUNK: usize = 32;

/// Probabilities below this are clamped before taking the logarithm.
pub const LOG_FLOOR: f64 = 1e-12;

fn check_pairs(outputs: &[Vec<f64>], teachers: &[Vec<f64>]) -> Result<()> {
    ensure_dim(teachers.len(), outputs.len())?;
    for (y, f) in outputs.iter().zip(teachers) {
        ensure_dim(f.len(), y.len())?;
    }
    Ok(())
}

/// `Σ_i ‖f_i − y_i‖²`.
pub fn quadratic_cost(outputs: &[Vec<f64>], teachers: &[Vec<f64>]) -> Result<f64> {
    check_pairs(outputs, teachers)?;
    Ok(outputs
        .iter()
        .zip(teachers)
        .flat_map(|(y, f)| y.iter().zip(f).map(|(a, b)| (a - b) * (a - b)))
        .sum())
}

pub fn softmax(q: &[f64]) -> Vec<f64> {
    let max = q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = q.iter().map(|v| (v - max).exp()).collect();
    let total: f64 = e.iter().sum();
    e.into_iter().map(|v| v / total).collect()
}

/// `−Σ_i Σ_k f_ik log y_ik`, with probabilities clamped at [`LOG_FLOOR`].
pub fn cross_entropy(outputs: &[Vec<f64>], teachers: &[Vec<f64>]) -> Result<f64> {
    check_pairs(outputs, teachers)?;
    let mut total = 0.0;
    for (y, f) in outputs.iter().zip(teachers) {
        for (&p, &t) in y.iter().zip(f) {
            if t == 0.0 {
                continue;
            }
            let p = if p < LOG_FLOOR {
                log::warn!("probability {p} at a labelled class clamped to {LOG_FLOOR}");
                LOG_FLOOR
            } else {
                p
            };
            total -= t * p.ln();
        }
    }
    Ok(total)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputKind {
    ScaledIdentity,
    Softmax,
}

/// Map from raw expectations `q` to model outputs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutputMap {
    pub kind: OutputKind,
    /// Multiplier `a` of the scaled identity map; unused by softmax.
    pub scale: f64,
    pub trainable_scale: bool,
}

impl OutputMap {
    pub fn scaled(scale: f64, trainable: bool) -> Self {
        Self { kind: OutputKind::ScaledIdentity, scale, trainable_scale: trainable }
    }

    pub fn softmax() -> Self {
        Self { kind: OutputKind::Softmax, scale: 1.0, trainable_scale: false }
    }

    pub fn apply(&self, q: &[f64]) -> Vec<f64> {
        match self.kind {
            OutputKind::ScaledIdentity => q.iter().map(|v| self.scale * v).collect(),
            OutputKind::Softmax => softmax(q),
        }
    }

    fn with_scale(self, scale: f64) -> Self {
        Self { scale, ..self }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostKind {
    Quadratic,
    CrossEntropy,
}

impl CostKind {
    pub fn evaluate(self, outputs: &[Vec<f64>], teachers: &[Vec<f64>]) -> Result<f64> {
        match self {
            CostKind::Quadratic => quadratic_cost(outputs, teachers),
            CostKind::CrossEntropy => cross_entropy(outputs, teachers),
        }
    }
}

/// Shot-noise emulation: `z + N(0, σ²)` with `σ = sqrt(2/N_s)(1 − z²)/4`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub enabled: bool,
    pub shots: u64,
    pub seed: u64,
}

impl NoiseModel {
    pub fn disabled() -> Self {
        Self { enabled: false, shots: 1, seed: 0 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.enabled && self.shots < 1 {
            return Err(Error::Config("noise model needs at least one shot".into()));
        }
        Ok(())
    }

    pub fn sigma(&self, z: f64) -> f64 {
        (2.0 / self.shots as f64).sqrt() * (1.0 - z * z).abs() / 4.0
    }
}

pub fn add_sampling_noise<R: Rng + ?Sized>(z: f64, model: &NoiseModel, rng: &mut R) -> Result<f64> {
    model.validate()?;
    if !model.enabled {
        return Ok(z);
    }
    if !(z.abs() <= 1.0 + 1e-12) {
        return Err(Error::Config(format!("expectation {z} outside [-1, 1]")));
    }
    let sigma = model.sigma(z.clamp(-1.0, 1.0));
    if sigma == 0.0 {
        return Ok(z);
    }
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::Numerical(e.to_string()))?;
    Ok((z + normal.sample(rng)).clamp(-1.0, 1.0))
}

/// A [`NoiseModel`] with its own generator, seeded from the model.
#[derive(Clone, Debug)]
pub struct SamplingNoise {
    model: NoiseModel,
    rng: QclRng,
}

impl SamplingNoise {
    pub fn new(model: NoiseModel) -> Result<Self> {
        model.validate()?;
        Ok(Self { model, rng: rng::seeded(model.seed) })
    }

    pub fn apply(&mut self, z: f64) -> Result<f64> {
        add_sampling_noise(z, &self.model, &mut self.rng)
    }

    fn apply_all(&mut self, values: &mut [f64]) -> Result<()> {
        for v in values {
            *v = self.apply(*v)?;
        }
        Ok(())
    }
}

/// Disjoint train/test index sets into a [`Dataset`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

impl Split {
    pub fn new(len: usize, train: Vec<usize>, test: Vec<usize>) -> Result<Self> {
        let mut seen = vec![false; len];
        for &i in train.iter().chain(&test) {
            if i >= len {
                return Err(Error::Index { index: i, len });
            }
            if seen[i] {
                return Err(Error::Config(format!("sample {i} appears twice in the train/test split")));
            }
            seen[i] = true;
        }
        Ok(Self { train, test })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub inputs: Vec<Vec<f64>>,
    pub teachers: Vec<Vec<f64>>,
    pub split: Split,
}

impl Dataset {
    /// Every sample goes to the training set.
    pub fn new(inputs: Vec<Vec<f64>>, teachers: Vec<Vec<f64>>) -> Result<Self> {
        let n = inputs.len();
        Self::with_split(inputs, teachers, (0..n).collect(), Vec::new())
    }

    pub fn with_split(inputs: Vec<Vec<f64>>, teachers: Vec<Vec<f64>>, train: Vec<usize>, test: Vec<usize>) -> Result<Self> {
        ensure_dim(inputs.len(), teachers.len())?;
        if let (Some(x0), Some(f0)) = (inputs.first(), teachers.first()) {
            for (x, f) in inputs.iter().zip(&teachers) {
                ensure_dim(x0.len(), x.len())?;
                ensure_dim(f0.len(), f.len())?;
            }
        }
        if inputs.iter().flatten().chain(teachers.iter().flatten()).any(|v| !v.is_finite()) {
            return Err(Error::Config("dataset contains non-finite values".into()));
        }
        let split = Split::new(inputs.len(), train, test)?;
        Ok(Self { inputs, teachers, split })
    }

    /// Training samples first, then test samples.
    pub fn from_parts(train: (Vec<Vec<f64>>, Vec<Vec<f64>>), test: (Vec<Vec<f64>>, Vec<Vec<f64>>)) -> Result<Self> {
        let (mut inputs, mut teachers) = train;
        let n_train = inputs.len();
        inputs.extend(test.0);
        teachers.extend(test.1);
        let n = inputs.len();
        Self::with_split(inputs, teachers, (0..n_train).collect(), (n_train..n).collect())
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn input_dim(&self) -> usize {
        self.inputs.first().map_or(0, Vec::len)
    }

    pub fn output_dim(&self) -> usize {
        self.teachers.first().map_or(0, Vec::len)
    }

    fn gather(&self, indices: &[usize]) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        (
            indices.iter().map(|&i| self.inputs[i].clone()).collect(),
            indices.iter().map(|&i| self.teachers[i].clone()).collect(),
        )
    }
}

/// Seeds that fully determine a run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedBundle {
    pub hamiltonian: u64,
    pub theta: u64,
    pub data: u64,
    pub noise: u64,
    pub teacher: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainRecord {
    pub iteration: usize,
    pub cost: f64,
    pub best_cost: f64,
    pub grad_norm: f64,
    /// `θ`, followed by `a` when the scale is trainable.
    pub params: Vec<f64>,
    pub elapsed_s: f64,
    pub seeds: SeedBundle,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub samples: usize,
    pub cost: f64,
    /// Mean squared error over samples and outputs.
    pub mse: f64,
    pub per_output_mse: Vec<f64>,
    /// Fraction of samples whose output argmax matches the teacher argmax.
    pub accuracy: Option<f64>,
}

fn argmax(v: &[f64]) -> usize {
    v.iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, &x)| if x > best.1 { (i, x) } else { best })
        .0
}

fn metrics(cost: CostKind, outputs: &[Vec<f64>], teachers: &[Vec<f64>]) -> Result<Metrics> {
    let samples = outputs.len();
    let dim = teachers.first().map_or(0, Vec::len);
    let mut per_output = vec![0.0; dim];
    for (y, f) in outputs.iter().zip(teachers) {
        for (k, (a, b)) in y.iter().zip(f).enumerate() {
            per_output[k] += (a - b) * (a - b);
        }
    }
    let denom = samples.max(1) as f64;
    per_output.iter_mut().for_each(|v| *v /= denom);
    let mse = per_output.iter().sum::<f64>() / dim.max(1) as f64;
    let accuracy = (cost == CostKind::CrossEntropy).then(|| {
        let hits = outputs.iter().zip(teachers).filter(|(y, f)| argmax(y) == argmax(f)).count();
        hits as f64 / denom
    });
    Ok(Metrics { samples, cost: cost.evaluate(outputs, teachers)?, mse, per_output_mse: per_output, accuracy })
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub theta: ParameterVector,
    pub output: OutputMap,
    pub records: Vec<TrainRecord>,
    pub termination: Termination,
    pub evaluations: usize,
    pub train: Metrics,
    pub test: Option<Metrics>,
}

/// A circuit, its measured observables and the cost that ties them to teachers.
#[derive(Clone, Copy, Debug)]
pub struct Learner<'a> {
    pub circuit: &'a Circuit,
    pub observables: &'a ObservableSet,
    pub cost: CostKind,
}

impl<'a> Learner<'a> {
    pub fn new(circuit: &'a Circuit, observables: &'a ObservableSet, cost: CostKind) -> Result<Self> {
        ensure_dim(circuit.num_qubits(), observables.num_qubits())?;
        Ok(Self { circuit, observables, cost })
    }

    fn check_output(&self, output: &OutputMap) -> Result<()> {
        match (self.cost, output.kind) {
            (CostKind::Quadratic, OutputKind::ScaledIdentity) | (CostKind::CrossEntropy, OutputKind::Softmax) => Ok(()),
            (cost, kind) => Err(Error::Config(format!("cost {cost:?} cannot be paired with output map {kind:?}"))),
        }
    }

    /// Raw expectations `q(x)` for every input, in input order.
    pub fn expectations(&self, theta: &ParameterVector, inputs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        let chunks: Vec<Vec<Vec<f64>>> = inputs
            .par_chunks(FORWARD_CHUNK)
            .map(|chunk| self.circuit.forward_batch(theta, chunk, self.observables))
            .collect::<Result<_>>()?;
        Ok(chunks.into_iter().flatten().collect())
    }

    pub fn predict(&self, theta: &ParameterVector, output: &OutputMap, inputs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        Ok(self.expectations(theta, inputs)?.iter().map(|q| output.apply(q)).collect())
    }

    pub fn evaluate(&self, theta: &ParameterVector, output: &OutputMap, data: &Dataset, indices: &[usize]) -> Result<Metrics> {
        let (inputs, teachers) = data.gather(indices);
        let outputs = self.predict(theta, output, &inputs)?;
        metrics(self.cost, &outputs, &teachers)
    }

    pub fn train(
        &self,
        data: &Dataset,
        output: OutputMap,
        noise: NoiseModel,
        theta0: ParameterVector,
        options: &MinimizeOptions,
        seeds: SeedBundle,
    ) -> Result<TrainOutcome> {
        self.check_output(&output)?;
        ensure_dim(self.circuit.num_params(), theta0.len())?;
        ensure_dim(self.observables.len(), data.output_dim())?;
        if data.split.train.is_empty() {
            return Err(Error::Config("training set is empty".into()));
        }
        let (inputs, teachers) = data.gather(&data.split.train);
        for x in &inputs {
            self.circuit.encoding().check_input(x)?;
        }
        let mut objective = TrainingObjective {
            learner: *self,
            inputs: &inputs,
            teachers: &teachers,
            output,
            noise: if noise.enabled { Some(SamplingNoise::new(noise)?) } else { None },
        };
        let num_theta = theta0.len();
        let mut x0 = theta0.into_values();
        if output.trainable_scale {
            x0.push(output.scale);
        }
        // Finite differences of a stochastic objective are meaningless.
        let options = MinimizeOptions { check_gradient: options.check_gradient && !noise.enabled, ..options.clone() };
        let result = minimize(&mut objective, x0, &options)?;
        log::info!(
            "training finished after {} iterations ({:?}), cost {}",
            result.trace.len().saturating_sub(1),
            result.termination,
            result.value
        );

        let records = result
            .trace
            .iter()
            .map(|r| TrainRecord {
                iteration: r.iteration,
                cost: r.value,
                best_cost: r.best_value,
                grad_norm: r.grad_norm,
                params: r.x.clone(),
                elapsed_s: r.elapsed_s,
                seeds,
            })
            .collect();
        let (theta, fitted) = split_params(&result.x, num_theta, output);
        let train = self.evaluate(&theta, &fitted, data, &data.split.train)?;
        let test = if data.split.test.is_empty() {
            None
        } else {
            Some(self.evaluate(&theta, &fitted, data, &data.split.test)?)
        };
        Ok(TrainOutcome {
            theta,
            output: fitted,
            records,
            termination: result.termination,
            evaluations: result.evaluations,
            train,
            test,
        })
    }
}

fn split_params(x: &[f64], num_theta: usize, output: OutputMap) -> (ParameterVector, OutputMap) {
    let theta = ParameterVector::new(x[..num_theta].to_vec());
    let fitted = if output.trainable_scale { output.with_scale(x[num_theta]) } else { output };
    (theta, fitted)
}

struct TrainingObjective<'a> {
    learner: Learner<'a>,
    inputs: &'a [Vec<f64>],
    teachers: &'a [Vec<f64>],
    output: OutputMap,
    noise: Option<SamplingNoise>,
}

impl TrainingObjective<'_> {
    fn unpack(&self, x: &[f64]) -> (ParameterVector, OutputMap) {
        split_params(x, self.learner.circuit.num_params(), self.output)
    }
}

impl Objective for TrainingObjective<'_> {
    fn value(&mut self, x: &[f64]) -> Result<f64> {
        let (theta, output) = self.unpack(x);
        let mut q = self.learner.expectations(&theta, self.inputs)?;
        if let Some(noise) = self.noise.as_mut() {
            for row in &mut q {
                noise.apply_all(row)?;
            }
        }
        let outputs: Vec<Vec<f64>> = q.iter().map(|v| output.apply(v)).collect();
        self.learner.cost.evaluate(&outputs, self.teachers)
    }

    fn value_and_gradient(&mut self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        let (theta, output) = self.unpack(x);
        let circuit = self.learner.circuit;
        let observables = self.learner.observables;
        let mut evals: Vec<ShiftedExpectations> = self
            .inputs
            .par_iter()
            .map(|xi| shifted_expectations(circuit, &theta, xi, observables))
            .collect::<Result<_>>()?;
        if let Some(noise) = self.noise.as_mut() {
            for e in &mut evals {
                noise.apply_all(&mut e.values)?;
                for row in e.plus.iter_mut().chain(e.minus.iter_mut()) {
                    noise.apply_all(row)?;
                }
            }
        }
        let outputs: Vec<Vec<f64>> = evals.iter().map(|e| output.apply(&e.values)).collect();
        let value = self.learner.cost.evaluate(&outputs, self.teachers)?;
        let grad = match self.learner.cost {
            CostKind::Quadratic => {
                let (g, d_scale) = quadratic_cost_gradient(&evals, self.teachers, output.scale)?;
                let mut g = g.into_values();
                if output.trainable_scale {
                    g.push(d_scale);
                }
                g
            }
            CostKind::CrossEntropy => cross_entropy_gradient(&evals, self.teachers)?.into_values(),
        };
        Ok((value, grad))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoding::{EncodingKind, EncodingSpec};
    use crate::hamiltonian::{evolution_gate, IsingHamiltonian};
    use std::sync::Arc;

    fn circuit(n: usize, depth: usize, kind: EncodingKind, input_dim: usize) -> Circuit {
        let h = IsingHamiltonian::sample(n, 5).unwrap();
        let gate = Arc::new(evolution_gate(&h, 10.0).unwrap());
        Circuit::new(EncodingSpec::new(kind, n, input_dim).unwrap(), depth, gate).unwrap()
    }

    fn seeds() -> SeedBundle {
        SeedBundle { hamiltonian: 5, theta: 1, data: 2, noise: 3, teacher: 4 }
    }

    #[test]
    fn quadratic_cost_examples() {
        let a = vec![vec![0.2, 0.3], vec![1.0, -1.0]];
        assert_eq!(quadratic_cost(&a, &a).unwrap(), 0.0);
        assert_eq!(quadratic_cost(&[vec![0.0]], &[vec![1.0]]).unwrap(), 1.0);
        assert_eq!(quadratic_cost(&[vec![0.5], vec![-0.5]], &[vec![0.0], vec![0.0]]).unwrap(), 0.5);
        assert!(quadratic_cost(&[vec![0.5]], &[vec![0.0, 1.0]]).is_err());
        assert!(quadratic_cost(&[vec![0.5]], &[]).is_err());
    }

    #[test]
    fn softmax_examples() {
        assert_eq!(softmax(&[0.0, 0.0]), vec![0.5, 0.5]);
        let p = softmax(&[2f64.ln(), 0.0]);
        assert!((p[0] - 2.0 / 3.0).abs() < 1e-15 && (p[1] - 1.0 / 3.0).abs() < 1e-15);
        let big = softmax(&[1000.0, 999.0]);
        assert!(big.iter().all(|v| v.is_finite()));
        let shifted = softmax(&[1000.0 - 1000.0, 999.0 - 1000.0]);
        assert!((big[0] - shifted[0]).abs() < 1e-15);
    }

    #[test]
    fn cross_entropy_examples() {
        assert_eq!(cross_entropy(&[vec![1.0, 0.0]], &[vec![1.0, 0.0]]).unwrap(), 0.0);
        let half = cross_entropy(&[vec![0.5, 0.5]], &[vec![1.0, 0.0]]).unwrap();
        assert!((half - 2f64.ln()).abs() < 1e-15);
        let two = cross_entropy(&[vec![0.5, 0.5], vec![0.5, 0.5]], &[vec![1.0, 0.0], vec![1.0, 0.0]]).unwrap();
        assert_eq!(two, 2.0 * half);
        let clamped = cross_entropy(&[vec![0.0, 1.0]], &[vec![1.0, 0.0]]).unwrap();
        assert!((clamped + LOG_FLOOR.ln()).abs() < 1e-12);
    }

    #[test]
    fn noise_examples() {
        let model = NoiseModel { enabled: true, shots: 800, seed: 9 };
        let mut rng = rng::seeded(1);
        assert_eq!(add_sampling_noise(1.0, &model, &mut rng).unwrap(), 1.0);
        assert_eq!(add_sampling_noise(-1.0, &model, &mut rng).unwrap(), -1.0);
        assert_eq!(add_sampling_noise(0.3, &NoiseModel::disabled(), &mut rng).unwrap(), 0.3);
        assert!(add_sampling_noise(1.5, &model, &mut rng).is_err());
        let bad = NoiseModel { enabled: true, shots: 0, seed: 0 };
        assert!(add_sampling_noise(0.0, &bad, &mut rng).is_err());
        assert!((model.sigma(0.0) - 0.0125).abs() < 1e-15);
        let v = add_sampling_noise(0.999_999, &NoiseModel { shots: 1, ..model }, &mut rng).unwrap();
        assert!(v <= 1.0);
    }

    #[test]
    fn sampling_noise_is_reproducible() {
        let model = NoiseModel { enabled: true, shots: 100, seed: 4 };
        let draw = || {
            let mut n = SamplingNoise::new(model).unwrap();
            (0..5).map(|_| n.apply(0.2).unwrap()).collect::<Vec<_>>()
        };
        assert_eq!(draw(), draw());
    }

    #[test]
    fn split_must_be_disjoint() {
        assert!(Split::new(4, vec![0, 1], vec![2, 3]).is_ok());
        assert!(Split::new(4, vec![0, 1], vec![1, 3]).is_err());
        assert!(Split::new(4, vec![0, 4], vec![]).is_err());
        let d = Dataset::from_parts((vec![vec![0.1]], vec![vec![1.0]]), (vec![vec![0.2]], vec![vec![2.0]])).unwrap();
        assert_eq!(d.split, Split { train: vec![0], test: vec![1] });
    }

    #[test]
    fn objective_gradient_matches_finite_differences() {
        let c = circuit(3, 2, EncodingKind::RyRz, 1);
        let obs = ObservableSet::z_on_first(3, 1).unwrap();
        let learner = Learner::new(&c, &obs, CostKind::Quadratic).unwrap();
        let inputs: Vec<Vec<f64>> = [-0.7, -0.1, 0.4, 0.9].iter().map(|&x| vec![x]).collect();
        let teachers: Vec<Vec<f64>> = inputs.iter().map(|x| vec![x[0] * x[0]]).collect();
        let mut obj = TrainingObjective {
            learner,
            inputs: &inputs,
            teachers: &teachers,
            output: OutputMap::scaled(1.3, true),
            noise: None,
        };
        let mut x = ParameterVector::random_uniform(c.num_params(), 3).into_values();
        x.push(1.3);
        let (_, g) = obj.value_and_gradient(&x).unwrap();
        let h = 1e-5;
        for j in 0..x.len() {
            let mut up = x.clone();
            up[j] += h;
            let mut down = x.clone();
            down[j] -= h;
            let fd = (obj.value(&up).unwrap() - obj.value(&down).unwrap()) / (2.0 * h);
            assert!((fd - g[j]).abs() < 1e-6, "component {j}: {fd} vs {}", g[j]);
        }
    }

    #[test]
    fn softmax_cross_entropy_gradient_matches_finite_differences() {
        let c = circuit(3, 2, EncodingKind::MultiDimRyRz, 2);
        let obs = ObservableSet::z_on_first(3, 2).unwrap();
        let learner = Learner::new(&c, &obs, CostKind::CrossEntropy).unwrap();
        let inputs = vec![vec![0.1, -0.5], vec![0.8, 0.3], vec![-0.6, -0.2]];
        let teachers = vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0]];
        let mut obj = TrainingObjective {
            learner,
            inputs: &inputs,
            teachers: &teachers,
            output: OutputMap::softmax(),
            noise: None,
        };
        let x = ParameterVector::random_uniform(c.num_params(), 8).into_values();
        let (_, g) = obj.value_and_gradient(&x).unwrap();
        let h = 1e-5;
        for j in 0..x.len() {
            let mut up = x.clone();
            up[j] += h;
            let mut down = x.clone();
            down[j] -= h;
            let fd = (obj.value(&up).unwrap() - obj.value(&down).unwrap()) / (2.0 * h);
            assert!((fd - g[j]).abs() < 1e-6, "component {j}: {fd} vs {}", g[j]);
        }
    }

    #[test]
    fn self_generated_teacher_converges_immediately() {
        let c = circuit(2, 2, EncodingKind::RyRz, 1);
        let obs = ObservableSet::z_on_first(2, 1).unwrap();
        let learner = Learner::new(&c, &obs, CostKind::Quadratic).unwrap();
        let theta = ParameterVector::random_uniform(c.num_params(), 11);
        let inputs: Vec<Vec<f64>> = (0..8).map(|i| vec![-0.9 + 0.25 * i as f64]).collect();
        let teachers = learner.expectations(&theta, &inputs).unwrap();
        let data = Dataset::new(inputs, teachers).unwrap();
        let out = learner
            .train(&data, OutputMap::scaled(1.0, false), NoiseModel::disabled(), theta.clone(), &MinimizeOptions::default(), seeds())
            .unwrap();
        assert_eq!(out.termination, Termination::Converged);
        assert_eq!(out.records.len(), 1);
        assert_eq!(out.theta, theta);
        assert!(out.train.cost < 1e-25);
    }

    #[test]
    fn small_fit_reduces_cost_and_keeps_outputs_bounded() {
        let c = circuit(2, 2, EncodingKind::RyRz, 1);
        let obs = ObservableSet::z_on_first(2, 1).unwrap();
        let learner = Learner::new(&c, &obs, CostKind::Quadratic).unwrap();
        let inputs: Vec<Vec<f64>> = (0..10).map(|i| vec![-1.0 + 2.0 * i as f64 / 9.0]).collect();
        let teachers: Vec<Vec<f64>> = inputs.iter().map(|x| vec![x[0] * x[0]]).collect();
        let data = Dataset::new(inputs.clone(), teachers).unwrap();
        let theta0 = ParameterVector::random_uniform(c.num_params(), 2);
        let output = OutputMap::scaled(1.0, false);
        let initial = learner.evaluate(&theta0, &output, &data, &data.split.train).unwrap();
        let out = learner
            .train(&data, output, NoiseModel::disabled(), theta0, &MinimizeOptions::default(), seeds())
            .unwrap();
        assert!(out.train.cost < initial.cost);
        for w in out.records.windows(2) {
            assert!(w[1].iteration > w[0].iteration);
            assert!(w[1].best_cost <= w[0].best_cost);
        }
        let preds = learner.predict(&out.theta, &out.output, &inputs).unwrap();
        assert!(preds.iter().flatten().all(|v| v.abs() <= 1.0 + 1e-12));
    }

    #[test]
    fn mismatched_wiring_rejected() {
        let c = circuit(2, 1, EncodingKind::RyRz, 1);
        let obs = ObservableSet::z_on_first(2, 2).unwrap();
        let learner = Learner::new(&c, &obs, CostKind::Quadratic).unwrap();
        let data = Dataset::new(vec![vec![0.1]], vec![vec![0.2]]).unwrap();
        let theta = ParameterVector::zeros(c.num_params());
        let opts = MinimizeOptions::default();
        let err = learner.train(&data, OutputMap::scaled(1.0, false), NoiseModel::disabled(), theta.clone(), &opts, seeds());
        assert!(matches!(err, Err(Error::Dimension { .. })));
        let err = learner.train(&data, OutputMap::softmax(), NoiseModel::disabled(), theta, &opts, seeds());
        assert!(matches!(err, Err(Error::Config(_))));
    }

    #[test]
    fn accuracy_counts_argmax_hits() {
        let m = metrics(
            CostKind::CrossEntropy,
            &[vec![0.7, 0.3], vec![0.4, 0.6], vec![0.9, 0.1]],
            &[vec![1.0, 0.0], vec![1.0, 0.0], vec![1.0, 0.0]],
        )
        .unwrap();
        assert!((m.accuracy.unwrap() - 2.0 / 3.0).abs() < 1e-15);
    }
}
