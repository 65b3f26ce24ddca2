//! Teacher data for the many-body dynamics task: `⟨Z⟩` of a few spins of a
//! larger Ising system, sampled over a time window after a transient.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_dim, Error, Result};
use crate::hamiltonian::{IsingHamiltonian, Spectrum};
use crate::learn::Dataset;
use crate::qstate::{check_qubits, Pauli, PauliString, StateVector};

const NORM_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DynamicsTask {
    pub teacher_qubits: usize,
    /// Zero-based indices of the measured spins.
    pub observed_spins: Vec<usize>,
    pub transient: f64,
    /// Length of the sampled time window; `x ∈ [-1, 1]` spans it.
    pub window: f64,
    pub samples: usize,
}

impl Default for DynamicsTask {
    fn default() -> Self {
        Self { teacher_qubits: 10, observed_spins: vec![0, 1, 2], transient: 300.0, window: 8.0, samples: 100 }
    }
}

impl DynamicsTask {
    pub fn validate(&self) -> Result<()> {
        check_qubits(self.teacher_qubits)?;
        if self.observed_spins.is_empty() {
            return Err(Error::Config("at least one spin must be observed".into()));
        }
        for &s in &self.observed_spins {
            if s >= self.teacher_qubits {
                return Err(Error::Index { index: s, len: self.teacher_qubits });
            }
        }
        if !(self.transient.is_finite() && self.window.is_finite() && self.window > 0.0) {
            return Err(Error::Config("transient must be finite and window positive".into()));
        }
        if self.samples < 2 {
            return Err(Error::Config("dynamics task needs at least two samples".into()));
        }
        Ok(())
    }

    /// `t = (window/2)(x + 1) + transient`.
    pub fn time_for(&self, x: f64) -> f64 {
        0.5 * self.window * (x + 1.0) + self.transient
    }

    /// `samples` evenly spaced points on `[-1, 1]`, endpoints included.
    pub fn grid(&self) -> Vec<f64> {
        let step = 2.0 / (self.samples - 1) as f64;
        (0..self.samples).map(|i| -1.0 + step * i as f64).collect()
    }

    /// Midpoints between consecutive grid points, used as held-out inputs.
    pub fn midpoints(&self) -> Vec<f64> {
        self.grid().windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }
}

/// A teacher Hamiltonian diagonalised once, ready to be observed at any time.
#[derive(Clone, Debug)]
pub struct TeacherSystem {
    pub hamiltonian: IsingHamiltonian,
    spectrum: Spectrum,
    observables: Vec<PauliString>,
    initial: StateVector,
}

impl TeacherSystem {
    pub fn new(task: &DynamicsTask, hamiltonian: IsingHamiltonian) -> Result<Self> {
        task.validate()?;
        hamiltonian.validate()?;
        ensure_dim(task.teacher_qubits, hamiltonian.num_qubits())?;
        let n = task.teacher_qubits;
        let observables = task
            .observed_spins
            .iter()
            .map(|&q| PauliString::single(n, q, Pauli::Z))
            .collect::<Result<_>>()?;
        log::debug!("diagonalising {n}-spin teacher Hamiltonian");
        Ok(Self { spectrum: hamiltonian.spectrum()?, hamiltonian, observables, initial: StateVector::zero(n)? })
    }

    /// `⟨Z_s⟩` of each observed spin after evolving `|0…0⟩` for time `t`.
    pub fn observe(&self, t: f64) -> Result<Vec<f64>> {
        let state = self.spectrum.evolve_state(&self.initial, t)?;
        let norm = state.norm();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::Numerical(format!("evolved teacher state has norm {norm} at t = {t}")));
        }
        self.observables.iter().map(|z| state.expectation(z)).collect()
    }

    fn observe_all(&self, task: &DynamicsTask, xs: &[f64]) -> Result<Vec<Vec<f64>>> {
        xs.par_iter().map(|&x| self.observe(task.time_for(x))).collect()
    }

    /// Training samples on the task grid, held-out samples at the midpoints.
    pub fn dataset(&self, task: &DynamicsTask) -> Result<Dataset> {
        let train_x = task.grid();
        let test_x = task.midpoints();
        let train_f = self.observe_all(task, &train_x)?;
        let test_f = self.observe_all(task, &test_x)?;
        let wrap = |xs: Vec<f64>| xs.into_iter().map(|x| vec![x]).collect();
        Dataset::from_parts((wrap(train_x), train_f), (wrap(test_x), test_f))
    }
}

/// Teacher dataset from a freshly drawn Hamiltonian. The draw must not share a
/// seed with the learner's Hamiltonian.
pub fn generate_teacher(task: &DynamicsTask, teacher_seed: u64, circuit_seed: u64) -> Result<Dataset> {
    if teacher_seed == circuit_seed {
        return Err(Error::Config(format!(
            "teacher Hamiltonian seed {teacher_seed} collides with the circuit Hamiltonian seed"
        )));
    }
    task.validate()?;
    let h = IsingHamiltonian::sample(task.teacher_qubits, teacher_seed)?;
    TeacherSystem::new(task, h)?.dataset(task)
}

/// Writes `x, z1, z2, …` rows for the training split.
pub fn write_teacher_csv(path: &Path, data: &Dataset) -> Result<()> {
    ensure_dim(1, data.input_dim())?;
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["x".to_string()];
    header.extend((1..=data.output_dim()).map(|k| format!("z{k}")));
    w.write_record(&header)?;
    for &i in &data.split.train {
        let mut row = vec![data.inputs[i][0].to_string()];
        row.extend(data.teachers[i].iter().map(f64::to_string));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a file written by [`write_teacher_csv`]; every row becomes a training sample.
pub fn read_teacher_csv(path: &Path) -> Result<Dataset> {
    let mut r = csv::Reader::from_path(path)?;
    let header = r.headers()?.clone();
    if header.get(0) != Some("x") || header.len() < 2 {
        return Err(Error::Format(format!("{}: expected header `x,z1,...`", path.display())));
    }
    let mut inputs = Vec::new();
    let mut teachers = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let vals = rec
            .iter()
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Format(format!("{}: row {}: {e}", path.display(), line + 1)))?;
        inputs.push(vec![vals[0]]);
        teachers.push(vals[1..].to_vec());
    }
    if inputs.is_empty() {
        return Err(Error::Format(format!("{}: no teacher rows", path.display())));
    }
    Dataset::new(inputs, teachers)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_task() -> DynamicsTask {
        DynamicsTask { teacher_qubits: 4, samples: 20, ..Default::default() }
    }

    #[test]
    fn time_map() {
        let t = DynamicsTask::default();
        assert_eq!(t.time_for(-1.0), 300.0);
        assert_eq!(t.time_for(1.0), 308.0);
        assert_eq!(t.time_for(0.0), 304.0);
        let g = t.grid();
        assert_eq!(g.len(), 100);
        assert_eq!((g[0], g[99]), (-1.0, 1.0));
    }

    #[test]
    fn zero_time_leaves_spins_up() {
        let task = small_task();
        let sys = TeacherSystem::new(&task, IsingHamiltonian::sample(4, 1).unwrap()).unwrap();
        for z in sys.observe(0.0).unwrap() {
            assert!((z - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn teacher_values_bounded_and_smooth() {
        let task = small_task();
        let data = generate_teacher(&task, 11, 12).unwrap();
        assert_eq!(data.split.train.len(), 20);
        assert_eq!(data.split.test.len(), 19);
        assert_eq!(data.output_dim(), 3);
        assert!(data.teachers.iter().flatten().all(|v| v.abs() <= 1.0 + 1e-12));
        let train: Vec<&Vec<f64>> = data.split.train.iter().map(|&i| &data.teachers[i]).collect();
        for w in train.windows(2) {
            for k in 0..3 {
                assert!((w[1][k] - w[0][k]).abs() < 0.5);
            }
        }
    }

    #[test]
    fn seed_collision_rejected() {
        assert!(matches!(generate_teacher(&small_task(), 3, 3), Err(Error::Config(_))));
    }

    #[test]
    fn invalid_tasks_rejected() {
        let bad = DynamicsTask { observed_spins: vec![0, 4], ..small_task() };
        assert!(bad.validate().is_err());
        let bad = DynamicsTask { samples: 1, ..small_task() };
        assert!(bad.validate().is_err());
        let bad = DynamicsTask { window: 0.0, ..small_task() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn csv_round_trip() {
        let task = small_task();
        let data = generate_teacher(&task, 5, 6).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("teacher.csv");
        write_teacher_csv(&path, &data).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("x,z1,z2,z3\n"));
        let back = read_teacher_csv(&path).unwrap();
        assert_eq!(back.len(), 20);
        for (k, &i) in data.split.train.iter().enumerate() {
            assert_eq!(back.inputs[k], data.inputs[i]);
            assert_eq!(back.teachers[k], data.teachers[i]);
        }
    }

    #[test]
    fn malformed_csv_is_a_format_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "x,z1\n0.1,abc\n").unwrap();
        assert!(matches!(read_teacher_csv(&path), Err(Error::Format(_))));
        std::fs::write(&path, "t,z1\n0.1,0.2\n").unwrap();
        assert!(matches!(read_teacher_csv(&path), Err(Error::Format(_))));
    }
}
