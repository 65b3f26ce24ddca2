//! Experiment configuration: a sparse JSON document resolved against
//! per-task defaults into a fully explicit [`ExperimentConfig`].

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::baseline::OverfitTarget;
use crate::dynamics::DynamicsTask;
use crate::encoding::EncodingKind;
use crate::error::{Error, Result};
use crate::hamiltonian::IsingHamiltonian;
use crate::learn::{MinimizeOptions, NoiseModel, SeedBundle};
use crate::qstate::MAX_QUBITS;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Fit1d,
    Classify2d,
    Dynamics,
    OverfitAppendix,
}

impl Task {
    pub const ALL: [Task; 4] = [Task::Fit1d, Task::Classify2d, Task::Dynamics, Task::OverfitAppendix];

    pub fn name(self) -> &'static str {
        match self {
            Task::Fit1d => "fit1d",
            Task::Classify2d => "classify2d",
            Task::Dynamics => "dynamics",
            Task::OverfitAppendix => "overfit_appendix",
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Task::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown task `{s}` (expected fit1d, classify2d, dynamics or overfit_appendix)")))
    }
}

/// Scalar target function for the regression tasks.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    X2,
    Exp,
    Sin,
    Abs,
    HalfSin,
}

impl Target {
    pub fn name(self) -> &'static str {
        match self {
            Target::X2 => "x2",
            Target::Exp => "exp",
            Target::Sin => "sin",
            Target::Abs => "abs",
            Target::HalfSin => "half_sin",
        }
    }

    pub fn eval(self, x: f64) -> f64 {
        match self {
            Target::X2 => x * x,
            Target::Exp => x.exp(),
            Target::Sin => x.sin(),
            Target::Abs => x.abs(),
            Target::HalfSin => 0.5 * x.sin(),
        }
    }

    pub(crate) fn overfit_target(self) -> Option<OverfitTarget> {
        match self {
            Target::HalfSin => Some(OverfitTarget::HalfSin),
            Target::X2 => Some(OverfitTarget::Square),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSettings {
    pub enabled: bool,
    pub shots: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSettings {
    pub train_samples: usize,
    pub test_samples: usize,
    /// Standard deviation of Gaussian noise added to scalar regression teachers.
    pub noise_std: f64,
    /// Points per axis of the emitted class-probability grid (classification only).
    pub grid_resolution: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSettings {
    /// Initial value of the output multiplier `a`.
    pub scale: f64,
    pub trainable_scale: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DynamicsSettings {
    pub teacher_qubits: usize,
    pub observed_spins: Vec<usize>,
    pub transient: f64,
    pub window: f64,
}

/// Fully resolved experiment description; every field is explicit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub task: Task,
    pub target: Option<Target>,
    pub num_qubits: usize,
    pub depth: usize,
    pub evolution_time: f64,
    pub encoding: EncodingKind,
    pub seeds: SeedBundle,
    pub noise: NoiseSettings,
    pub optimizer: MinimizeOptions,
    pub data: DataSettings,
    pub output: OutputSettings,
    pub dynamics: Option<DynamicsSettings>,
    pub teacher_file: Option<PathBuf>,
    pub hamiltonian: Option<IsingHamiltonian>,
    pub teacher_hamiltonian: Option<IsingHamiltonian>,
    pub output_dir: PathBuf,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSeeds {
    hamiltonian: Option<u64>,
    theta: Option<u64>,
    data: Option<u64>,
    noise: Option<u64>,
    teacher: Option<u64>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNoise {
    enabled: Option<bool>,
    shots: Option<u64>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOptimizer {
    max_iterations: Option<usize>,
    gtol: Option<f64>,
    check_gradient: Option<bool>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawData {
    train_samples: Option<usize>,
    test_samples: Option<usize>,
    noise_std: Option<f64>,
    grid_resolution: Option<usize>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    scale: Option<f64>,
    trainable_scale: Option<bool>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDynamics {
    teacher_qubits: Option<usize>,
    observed_spins: Option<Vec<usize>>,
    transient: Option<f64>,
    window: Option<f64>,
}

/// The on-disk form, where everything but `task` may be omitted.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    schema_version: Option<u32>,
    task: Option<Task>,
    target: Option<Target>,
    num_qubits: Option<usize>,
    depth: Option<usize>,
    evolution_time: Option<f64>,
    encoding: Option<EncodingKind>,
    seeds: Option<RawSeeds>,
    noise: Option<RawNoise>,
    optimizer: Option<RawOptimizer>,
    data: Option<RawData>,
    output: Option<RawOutput>,
    dynamics: Option<RawDynamics>,
    teacher_file: Option<PathBuf>,
    hamiltonian: Option<IsingHamiltonian>,
    teacher_hamiltonian: Option<IsingHamiltonian>,
    output_dir: Option<PathBuf>,
}

pub const DEFAULT_SEEDS: SeedBundle = SeedBundle { hamiltonian: 1, theta: 2, data: 3, noise: 4, teacher: 5 };

fn invalid(field: &str, msg: impl fmt::Display) -> Error {
    Error::Config(format!("`{field}`: {msg}"))
}

impl ExperimentConfig {
    /// Defaults for a task, equivalent to resolving `{"task": "<task>"}`.
    pub fn defaults(task: Task) -> Self {
        resolve(RawConfig { task: Some(task), ..Default::default() }).expect("task defaults are valid")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: RawConfig = serde_json::from_str(text).map_err(|e| Error::Config(format!("invalid config: {e}")))?;
        resolve(raw)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    /// Replaces the seed bundle by `base, base+1, …, base+4`.
    pub fn override_seeds(&mut self, base: u64) {
        self.seeds = SeedBundle {
            hamiltonian: base,
            theta: base.wrapping_add(1),
            data: base.wrapping_add(2),
            noise: base.wrapping_add(3),
            teacher: base.wrapping_add(4),
        };
    }

    pub fn noise_model(&self) -> NoiseModel {
        NoiseModel { enabled: self.noise.enabled, shots: self.noise.shots, seed: self.seeds.noise }
    }

    pub fn input_dim(&self) -> usize {
        if self.task == Task::Classify2d {
            2
        } else {
            1
        }
    }

    /// Number of measured `Z` observables, one per model output.
    pub fn num_outputs(&self) -> usize {
        match self.task {
            Task::Fit1d | Task::OverfitAppendix => 1,
            Task::Classify2d => 2,
            Task::Dynamics => self.dynamics.as_ref().map_or(3, |d| d.observed_spins.len()),
        }
    }

    pub fn dynamics_task(&self) -> Option<DynamicsTask> {
        self.dynamics.as_ref().map(|d| DynamicsTask {
            teacher_qubits: d.teacher_qubits,
            observed_spins: d.observed_spins.clone(),
            transient: d.transient,
            window: d.window,
            samples: self.data.train_samples,
        })
    }

    /// Checks cross-field consistency of a resolved config.
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(invalid(
                "schema_version",
                format!("unsupported version {} (this build reads {SCHEMA_VERSION})", self.schema_version),
            ));
        }
        match (self.task, self.target) {
            (Task::Fit1d, Some(Target::X2 | Target::Exp | Target::Sin | Target::Abs)) => {}
            (Task::OverfitAppendix, Some(Target::HalfSin | Target::X2)) => {}
            (Task::Classify2d | Task::Dynamics, None) => {}
            (task, Some(t)) => return Err(invalid("target", format!("`{}` is not a target of task {task}", t.name()))),
            (task, None) => return Err(invalid("target", format!("task {task} needs a target"))),
        }
        if !(1..=MAX_QUBITS).contains(&self.num_qubits) {
            return Err(invalid("num_qubits", format!("must be between 1 and {MAX_QUBITS}, got {}", self.num_qubits)));
        }
        if self.depth == 0 {
            return Err(invalid("depth", "must be at least 1"));
        }
        if !self.evolution_time.is_finite() {
            return Err(invalid("evolution_time", "must be finite"));
        }
        if (self.task == Task::Classify2d) != (self.encoding == EncodingKind::MultiDimRyRz) {
            return Err(invalid(
                "encoding",
                format!("`{}` does not match the input dimension of task {}", self.encoding, self.task),
            ));
        }
        if self.num_outputs() > self.num_qubits {
            return Err(invalid(
                "num_qubits",
                format!("{} outputs need at least as many qubits", self.num_outputs()),
            ));
        }
        if self.noise.enabled && self.noise.shots < 1 {
            return Err(invalid("noise.shots", "must be at least 1 when noise is enabled"));
        }
        if self.optimizer.max_iterations == 0 {
            return Err(invalid("optimizer.max_iterations", "must be at least 1"));
        }
        if !(self.optimizer.gtol > 0.0 && self.optimizer.gtol.is_finite()) {
            return Err(invalid("optimizer.gtol", "must be positive"));
        }
        if !(self.data.noise_std >= 0.0 && self.data.noise_std.is_finite()) {
            return Err(invalid("data.noise_std", "must be non-negative"));
        }
        if self.data.noise_std > 0.0 && matches!(self.task, Task::Classify2d | Task::Dynamics) {
            return Err(invalid("data.noise_std", format!("teacher noise is not supported for task {}", self.task)));
        }
        if self.data.train_samples == 0 {
            return Err(invalid("data.train_samples", "must be at least 1"));
        }
        if self.task == Task::Classify2d {
            if self.data.train_samples % 2 != 0 || self.data.test_samples % 2 != 0 {
                return Err(invalid("data", "classification sample counts must be even (two balanced classes)"));
            }
            if self.data.grid_resolution < 2 {
                return Err(invalid("data.grid_resolution", "must be at least 2"));
            }
        }
        if !self.output.scale.is_finite() {
            return Err(invalid("output.scale", "must be finite"));
        }
        if self.task == Task::Classify2d && (self.output.trainable_scale || self.output.scale != 1.0) {
            return Err(invalid("output", "the softmax output has no scale; leave scale at 1 and untrainable"));
        }
        if let Some(h) = &self.hamiltonian {
            h.validate().map_err(|e| invalid("hamiltonian", e))?;
            if h.num_qubits() != self.num_qubits {
                return Err(invalid(
                    "hamiltonian",
                    format!("has {} spins but the circuit has {} qubits", h.num_qubits(), self.num_qubits),
                ));
            }
        }
        match self.task {
            Task::Dynamics => {
                let task = self.dynamics_task().ok_or_else(|| invalid("dynamics", "missing"))?;
                task.validate().map_err(|e| invalid("dynamics", e))?;
                if self.data.test_samples != self.data.train_samples - 1 {
                    return Err(invalid(
                        "data.test_samples",
                        format!("dynamics holds out the {} grid midpoints", self.data.train_samples - 1),
                    ));
                }
                if let Some(h) = &self.teacher_hamiltonian {
                    h.validate().map_err(|e| invalid("teacher_hamiltonian", e))?;
                    if h.num_qubits() != task.teacher_qubits {
                        return Err(invalid("teacher_hamiltonian", "spin count differs from dynamics.teacher_qubits"));
                    }
                    if self.teacher_file.is_some() {
                        return Err(invalid("teacher_file", "give either teacher_file or teacher_hamiltonian"));
                    }
                } else if self.teacher_file.is_none() && self.hamiltonian.is_none() && self.seeds.teacher == self.seeds.hamiltonian {
                    return Err(invalid(
                        "seeds.teacher",
                        "must differ from seeds.hamiltonian so the teacher is drawn independently",
                    ));
                }
            }
            _ => {
                if self.dynamics.is_some() || self.teacher_file.is_some() || self.teacher_hamiltonian.is_some() {
                    return Err(invalid(
                        "dynamics",
                        format!("teacher settings only apply to the dynamics task, not {}", self.task),
                    ));
                }
            }
        }
        Ok(())
    }
}

fn resolve(raw: RawConfig) -> Result<ExperimentConfig> {
    let task = raw.task.ok_or_else(|| invalid("task", "missing"))?;
    let overfit = task == Task::OverfitAppendix;
    let (n, depth) = if overfit { (3, 3) } else { (6, 6) };
    let encoding = match task {
        Task::Fit1d | Task::Dynamics => EncodingKind::RyRz,
        Task::Classify2d => EncodingKind::MultiDimRyRz,
        Task::OverfitAppendix => EncodingKind::RyOnly,
    };
    let target = raw.target.or(match task {
        Task::Fit1d => Some(Target::X2),
        Task::OverfitAppendix => Some(Target::HalfSin),
        _ => None,
    });
    let seeds = raw.seeds.unwrap_or_default();
    let noise = raw.noise.unwrap_or_default();
    let opt = raw.optimizer.unwrap_or_default();
    let data = raw.data.unwrap_or_default();
    let out = raw.output.unwrap_or_default();
    let defaults = MinimizeOptions::default();

    let (train, test) = match task {
        Task::Fit1d => (100, 100),
        Task::Classify2d => (200, 200),
        Task::Dynamics => (100, 99),
        Task::OverfitAppendix => (10, 100),
    };
    let train_samples = data.train_samples.unwrap_or(train);
    let test_samples = match (task, data.test_samples) {
        (_, Some(t)) => t,
        (Task::Dynamics, None) => train_samples.saturating_sub(1),
        (_, None) => test,
    };
    let dynamics = (task == Task::Dynamics).then(|| {
        let d = raw.dynamics.clone().unwrap_or_default();
        let base = DynamicsTask::default();
        DynamicsSettings {
            teacher_qubits: d.teacher_qubits.unwrap_or(base.teacher_qubits),
            observed_spins: d.observed_spins.unwrap_or(base.observed_spins),
            transient: d.transient.unwrap_or(base.transient),
            window: d.window.unwrap_or(base.window),
        }
    });
    if task != Task::Dynamics && raw.dynamics.is_some() {
        return Err(invalid("dynamics", format!("only applies to the dynamics task, not {task}")));
    }

    let config = ExperimentConfig {
        schema_version: raw.schema_version.unwrap_or(SCHEMA_VERSION),
        task,
        target,
        num_qubits: raw.num_qubits.unwrap_or(n),
        depth: raw.depth.unwrap_or(depth),
        evolution_time: raw.evolution_time.unwrap_or(10.0),
        encoding: raw.encoding.unwrap_or(encoding),
        seeds: SeedBundle {
            hamiltonian: seeds.hamiltonian.unwrap_or(DEFAULT_SEEDS.hamiltonian),
            theta: seeds.theta.unwrap_or(DEFAULT_SEEDS.theta),
            data: seeds.data.unwrap_or(DEFAULT_SEEDS.data),
            noise: seeds.noise.unwrap_or(DEFAULT_SEEDS.noise),
            teacher: seeds.teacher.unwrap_or(DEFAULT_SEEDS.teacher),
        },
        noise: NoiseSettings { enabled: noise.enabled.unwrap_or(false), shots: noise.shots.unwrap_or(800) },
        optimizer: MinimizeOptions {
            max_iterations: opt.max_iterations.unwrap_or(defaults.max_iterations),
            gtol: opt.gtol.unwrap_or(defaults.gtol),
            check_gradient: opt.check_gradient.unwrap_or(defaults.check_gradient),
        },
        data: DataSettings {
            train_samples,
            test_samples,
            noise_std: data.noise_std.unwrap_or(if overfit { 0.05 } else { 0.0 }),
            grid_resolution: data.grid_resolution.unwrap_or(41),
        },
        output: OutputSettings {
            scale: out.scale.unwrap_or(1.0),
            trainable_scale: out.trainable_scale.unwrap_or(task == Task::Fit1d),
        },
        dynamics,
        teacher_file: raw.teacher_file,
        hamiltonian: raw.hamiltonian,
        teacher_hamiltonian: raw.teacher_hamiltonian,
        output_dir: raw.output_dir.unwrap_or_else(|| PathBuf::from("runs")),
    };
    config.validate()?;
    Ok(config)
}
