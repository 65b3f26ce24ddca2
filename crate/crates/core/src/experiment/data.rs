//! Dataset construction for each experiment task.

use std::f64::consts::TAU;

use rand::RngExt;
use rand_distr::{Distribution, Normal};

use super::config::{ExperimentConfig, Target, Task};
use crate::baseline::noisy_dataset;
use crate::dynamics::{read_teacher_csv, TeacherSystem};
use crate::error::{Error, Result};
use crate::hamiltonian::IsingHamiltonian;
use crate::learn::Dataset;
use crate::rng;

pub const INNER_RADIUS: f64 = 0.4;
pub const OUTER_RADII: (f64, f64) = (0.7, 1.0);

/// Task data plus, where one exists, the noiseless function behind it.
pub(crate) struct TaskData {
    pub data: Dataset,
    pub truth: Truth,
}

pub(crate) enum Truth {
    Function(Target),
    Teacher(Box<TeacherSystem>, crate::dynamics::DynamicsTask),
    None,
}

impl Truth {
    pub fn eval(&self, x: f64) -> Result<Option<Vec<f64>>> {
        Ok(match self {
            Truth::Function(t) => Some(vec![t.eval(x)]),
            Truth::Teacher(sys, task) => Some(sys.observe(task.time_for(x))?),
            Truth::None => None,
        })
    }
}

/// `n` evenly spaced points on `[-1, 1]`, endpoints included.
pub fn linspace(n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..n).map(|i| -1.0 + 2.0 * i as f64 / (n - 1) as f64).collect(),
    }
}

/// Training inputs on the evenly spaced grid, held-out inputs drawn uniformly.
/// Teacher noise, if any, follows the held-out draws in the same stream.
pub fn regression_dataset(target: Target, train: usize, test: usize, noise_std: f64, seed: u64) -> Result<Dataset> {
    let mut rng = rng::seeded(seed);
    let train_x = linspace(train);
    let test_x: Vec<f64> = (0..test).map(|_| rng.random_range(-1.0..=1.0)).collect();
    let normal = Normal::new(0.0, noise_std).map_err(|e| Error::Config(format!("noise_std: {e}")))?;
    let mut label = |x: f64| vec![target.eval(x) + if noise_std > 0.0 { normal.sample(&mut rng) } else { 0.0 }];
    let train_f: Vec<_> = train_x.iter().map(|&x| label(x)).collect();
    let test_f: Vec<_> = test_x.iter().map(|&x| label(x)).collect();
    let wrap = |xs: Vec<f64>| xs.into_iter().map(|x| vec![x]).collect();
    Dataset::from_parts((wrap(train_x), train_f), (wrap(test_x), test_f))
}

fn ring_point<R: rand::Rng + ?Sized>(rng: &mut R, r_min: f64, r_max: f64) -> Vec<f64> {
    // Uniform in area: r² uniform on [r_min², r_max²].
    let r = rng.random_range(r_min * r_min..=r_max * r_max).sqrt();
    let phi = rng.random_range(0.0..TAU);
    vec![(r * phi.cos()).clamp(-1.0, 1.0), (r * phi.sin()).clamp(-1.0, 1.0)]
}

/// Class 0 uniform in a centred disk, class 1 uniform in a surrounding
/// annulus. Teachers are one-hot; each split lists class 0 first.
pub fn two_class_dataset(train: usize, test: usize, seed: u64) -> Result<Dataset> {
    if train % 2 != 0 || test % 2 != 0 {
        return Err(Error::Config("class-balanced sample counts must be even".into()));
    }
    let mut rng = rng::seeded(seed);
    let mut draw = |count: usize| {
        let mut xs = Vec::with_capacity(count);
        let mut fs = Vec::with_capacity(count);
        for _ in 0..count / 2 {
            xs.push(ring_point(&mut rng, 0.0, INNER_RADIUS));
            fs.push(vec![1.0, 0.0]);
        }
        for _ in 0..count / 2 {
            xs.push(ring_point(&mut rng, OUTER_RADII.0, OUTER_RADII.1));
            fs.push(vec![0.0, 1.0]);
        }
        (xs, fs)
    };
    let train = draw(train);
    let test = draw(test);
    Dataset::from_parts(train, test)
}

pub(crate) fn build(config: &ExperimentConfig) -> Result<TaskData> {
    let d = &config.data;
    let seeds = &config.seeds;
    match config.task {
        Task::Fit1d => {
            let target = config.target.expect("validated");
            Ok(TaskData {
                data: regression_dataset(target, d.train_samples, d.test_samples, d.noise_std, seeds.data)?,
                truth: Truth::Function(target),
            })
        }
        Task::OverfitAppendix => {
            let target = config.target.expect("validated");
            let overfit = target.overfit_target().expect("validated");
            Ok(TaskData {
                data: noisy_dataset(overfit, d.train_samples, d.test_samples, d.noise_std, seeds.data)?,
                truth: Truth::Function(target),
            })
        }
        Task::Classify2d => {
            Ok(TaskData { data: two_class_dataset(d.train_samples, d.test_samples, seeds.data)?, truth: Truth::None })
        }
        Task::Dynamics => {
            let task = config.dynamics_task().expect("validated");
            if let Some(path) = &config.teacher_file {
                let data = read_teacher_csv(path)?;
                if data.output_dim() != task.observed_spins.len() {
                    return Err(Error::Format(format!(
                        "{}: {} teacher columns but {} observed spins",
                        path.display(),
                        data.output_dim(),
                        task.observed_spins.len()
                    )));
                }
                return Ok(TaskData { data, truth: Truth::None });
            }
            let h = match &config.teacher_hamiltonian {
                Some(h) => h.clone(),
                None => IsingHamiltonian::sample(task.teacher_qubits, seeds.teacher)?,
            };
            let system = TeacherSystem::new(&task, h)?;
            let data = system.dataset(&task)?;
            Ok(TaskData { data, truth: Truth::Teacher(Box::new(system), task) })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn regression_split_layout() {
        let d = regression_dataset(Target::Exp, 100, 50, 0.0, 7).unwrap();
        assert_eq!((d.split.train.len(), d.split.test.len()), (100, 50));
        let first = &d.inputs[d.split.train[0]];
        let last = &d.inputs[d.split.train[99]];
        assert_eq!((first[0], last[0]), (-1.0, 1.0));
        for i in 0..d.len() {
            assert!(d.inputs[i][0].abs() <= 1.0);
            assert_eq!(d.teachers[i][0], d.inputs[i][0].exp());
        }
        assert_eq!(d, regression_dataset(Target::Exp, 100, 50, 0.0, 7).unwrap());
        assert_ne!(d, regression_dataset(Target::Exp, 100, 50, 0.0, 8).unwrap());
    }

    #[test]
    fn two_class_geometry() {
        let d = two_class_dataset(200, 100, 3).unwrap();
        assert_eq!(d.split.train.len(), 200);
        assert_eq!(d.split.test.len(), 100);
        for (x, f) in d.inputs.iter().zip(&d.teachers) {
            let r = x[0].hypot(x[1]);
            assert!(x.iter().all(|v| v.abs() <= 1.0));
            if f[0] == 1.0 {
                assert!(r <= INNER_RADIUS + 1e-12);
            } else {
                assert!(r >= OUTER_RADII.0 - 1e-12 && r <= OUTER_RADII.1 + 1e-12);
            }
        }
        let class0 = d.teachers.iter().filter(|f| f[0] == 1.0).count();
        assert_eq!(class0, 150);
        assert!(two_class_dataset(3, 2, 1).is_err());
    }

    #[test]
    fn linspace_endpoints() {
        assert_eq!(linspace(3), vec![-1.0, 0.0, 1.0]);
        assert_eq!(linspace(1), vec![0.0]);
        assert!(linspace(0).is_empty());
    }
}
