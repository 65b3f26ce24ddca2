//! End-to-end execution of one configured experiment.

use std::fs::File;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, Target, Task};
use super::data::{self, linspace, TaskData};
use super::plot::{column_name, emit_plots};
use crate::ansatz::{Circuit, ObservableSet, ParameterVector};
use crate::baseline::{least_squares_fit, pauli_transfer_matrix, weight_norm, BasisSet, LinearModel};
use crate::encoding::EncodingSpec;
use crate::error::{Error, Result};
use crate::hamiltonian::{evolution_gate, IsingHamiltonian};
use crate::learn::{CostKind, Dataset, Learner, Metrics, OutputMap, SeedBundle, Termination, TrainOutcome};
use crate::qstate::{Pauli, PauliString};

/// Points on `[-1, 1]` at which dense model curves are written.
pub const CURVE_POINTS: usize = 201;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Completed,
    Aborted,
}

/// Explicit linear-model view of the fitted circuit next to the classical baseline.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightComparison {
    pub classical_weight_norm: f64,
    pub classical_rank: usize,
    pub classical_rank_deficient: bool,
    pub classical_train_mse: f64,
    pub classical_test_mse: Option<f64>,
    /// Norm of the transfer-matrix row that maps input Pauli coefficients to the output.
    pub quantum_weight_norm: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub status: RunStatus,
    pub task: Task,
    pub target: Option<Target>,
    pub seeds: SeedBundle,
    pub termination: Termination,
    pub iterations: usize,
    pub evaluations: usize,
    pub output_scale: f64,
    pub initial_train: Metrics,
    pub initial_test: Option<Metrics>,
    pub train: Metrics,
    pub test: Option<Metrics>,
    pub weights: Option<WeightComparison>,
    pub run_dir: PathBuf,
    pub files: Vec<String>,
}

#[derive(Serialize)]
struct Timing<'a> {
    setup_s: f64,
    train_s: f64,
    total_s: f64,
    iteration_elapsed_s: &'a [f64],
}

fn seeds_line(s: &SeedBundle) -> String {
    format!(
        "# seeds hamiltonian={} theta={} data={} noise={} teacher={}",
        s.hamiltonian, s.theta, s.data, s.noise, s.teacher
    )
}

fn csv_writer(path: &Path, seeds: &SeedBundle) -> Result<csv::Writer<File>> {
    let mut f = File::create(path)?;
    writeln!(f, "{}", seeds_line(seeds))?;
    Ok(csv::Writer::from_writer(f))
}

fn num(v: f64) -> String {
    v.to_string()
}

fn run_dir_name(config: &ExperimentConfig) -> String {
    let millis = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis());
    let task = match config.target {
        Some(t) => format!("{}-{}", config.task, t.name()),
        None => config.task.to_string(),
    };
    format!("{task}-{millis}-s{}", config.seeds.hamiltonian)
}

/// Creates a fresh per-run directory, never reusing an existing one.
fn create_run_dir(config: &ExperimentConfig) -> Result<PathBuf> {
    std::fs::create_dir_all(&config.output_dir)?;
    let base = run_dir_name(config);
    for attempt in 0.. {
        let name = if attempt == 0 { base.clone() } else { format!("{base}-{attempt}") };
        let dir = config.output_dir.join(name);
        match std::fs::create_dir(&dir) {
            Ok(()) => return Ok(dir),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
            Err(e) => return Err(e.into()),
        }
    }
    unreachable!()
}

/// Everything needed to train and evaluate, built from a resolved config.
pub(crate) struct Setup {
    pub circuit: Circuit,
    pub observables: ObservableSet,
    pub cost: CostKind,
    pub output: OutputMap,
    pub task_data: TaskData,
    pub theta0: ParameterVector,
}

pub(crate) fn setup(config: &ExperimentConfig) -> Result<Setup> {
    config.validate()?;
    let n = config.num_qubits;
    let h = match &config.hamiltonian {
        Some(h) => h.clone(),
        None => IsingHamiltonian::sample(n, config.seeds.hamiltonian)?,
    };
    let gate = Arc::new(evolution_gate(&h, config.evolution_time)?);
    let encoding = EncodingSpec::new(config.encoding, n, config.input_dim())?;
    let circuit = Circuit::new(encoding, config.depth, gate)?;
    let observables = ObservableSet::z_on_first(n, config.num_outputs())?;
    let (cost, output) = match config.task {
        Task::Classify2d => (CostKind::CrossEntropy, OutputMap::softmax()),
        _ => (CostKind::Quadratic, OutputMap::scaled(config.output.scale, config.output.trainable_scale)),
    };
    let task_data = data::build(config)?;
    let theta0 = ParameterVector::random_uniform(circuit.num_params(), config.seeds.theta);
    Ok(Setup { circuit, observables, cost, output, task_data, theta0 })
}

fn metrics_pair(
    learner: &Learner,
    theta: &ParameterVector,
    output: &OutputMap,
    data: &Dataset,
) -> Result<(Metrics, Option<Metrics>)> {
    let train = learner.evaluate(theta, output, data, &data.split.train)?;
    let test = if data.split.test.is_empty() {
        None
    } else {
        Some(learner.evaluate(theta, output, data, &data.split.test)?)
    };
    Ok((train, test))
}

fn mse(model: &LinearModel, basis: &BasisSet, data: &Dataset, idx: &[usize]) -> Result<f64> {
    let mut acc = 0.0;
    for &i in idx {
        let r = model.predict(basis, data.inputs[i][0])? - data.teachers[i][0];
        acc += r * r;
    }
    Ok(acc / idx.len().max(1) as f64)
}

/// Runs the experiment and writes its artifacts into a new directory under
/// `config.output_dir`. A run whose cost turns non-finite still writes its
/// trace and returns with [`RunStatus::Aborted`].
pub fn run(config: &ExperimentConfig) -> Result<RunSummary> {
    let start = Instant::now();
    let s = setup(config)?;
    let run_dir = create_run_dir(config)?;
    log::info!("run directory {}", run_dir.display());
    std::fs::write(run_dir.join("config.json"), config.to_json()?)?;

    let data = &s.task_data.data;
    let learner = Learner::new(&s.circuit, &s.observables, s.cost)?;
    let (initial_train, initial_test) = metrics_pair(&learner, &s.theta0, &s.output, data)?;
    let setup_s = start.elapsed().as_secs_f64();

    let trained = Instant::now();
    let outcome = learner.train(
        data,
        s.output,
        config.noise_model(),
        s.theta0.clone(),
        &config.optimizer,
        config.seeds,
    )?;
    let train_s = trained.elapsed().as_secs_f64();
    let status = match outcome.termination {
        Termination::Aborted { .. } => RunStatus::Aborted,
        _ => RunStatus::Completed,
    };

    let mut files = vec!["config.json".to_string()];
    write_trace(&run_dir, config, &outcome)?;
    files.extend(["trace.csv".into(), "params.csv".into()]);

    let mut weights = None;
    if status == RunStatus::Completed {
        let classical = if config.task == Task::OverfitAppendix {
            let basis = BasisSet::three_qubit_ry();
            let model = least_squares_fit(&basis, data)?;
            let row = PauliString::single(config.num_qubits, 0, Pauli::Z)?.index();
            let transfer = pauli_transfer_matrix(&s.circuit.unitary(&outcome.theta)?)?;
            let quantum: Vec<f64> = transfer.row(row).iter().copied().collect();
            weights = Some(WeightComparison {
                classical_weight_norm: model.weight_norm(),
                classical_rank: model.rank,
                classical_rank_deficient: model.rank_deficient,
                classical_train_mse: mse(&model, &basis, data, &data.split.train)?,
                classical_test_mse: if data.split.test.is_empty() {
                    None
                } else {
                    Some(mse(&model, &basis, data, &data.split.test)?)
                },
                quantum_weight_norm: weight_norm(&quantum),
            });
            write_weights(&run_dir, config, &basis, &model, &quantum)?;
            files.push("weights.csv".into());
            Some((basis, model))
        } else {
            None
        };
        let classical = classical.as_ref().map(|(b, m)| (b, m));
        write_predictions(&run_dir, config, &learner, &s, &outcome, classical)?;
        files.push("predictions.csv".into());
        if config.task == Task::Classify2d {
            write_grid(&run_dir, config, &learner, &outcome)?;
            files.push("grid.csv".into());
        } else {
            write_curve(&run_dir, config, &learner, &s, &outcome, classical)?;
            files.push("curve.csv".into());
        }
    } else {
        log::warn!("run aborted: {:?}", outcome.termination);
    }

    let iterations = outcome.records.last().map_or(0, |r| r.iteration);
    let mut summary = RunSummary {
        status,
        task: config.task,
        target: config.target,
        seeds: config.seeds,
        termination: outcome.termination.clone(),
        iterations,
        evaluations: outcome.evaluations,
        output_scale: outcome.output.scale,
        initial_train,
        initial_test,
        train: outcome.train.clone(),
        test: outcome.test.clone(),
        weights,
        run_dir: run_dir.clone(),
        files,
    };
    if status == RunStatus::Completed {
        for p in emit_plots(&run_dir)? {
            summary.files.push(p.file_name().expect("plot file name").to_string_lossy().into_owned());
        }
    }
    summary.files.extend(["summary.json".into(), "timing.json".into()]);
    std::fs::write(run_dir.join("summary.json"), serde_json::to_string_pretty(&summary)? + "\n")?;
    let elapsed: Vec<f64> = outcome.records.iter().map(|r| r.elapsed_s).collect();
    let timing = Timing { setup_s, train_s, total_s: start.elapsed().as_secs_f64(), iteration_elapsed_s: &elapsed };
    std::fs::write(run_dir.join("timing.json"), serde_json::to_string_pretty(&timing)? + "\n")?;
    Ok(summary)
}

fn write_trace(dir: &Path, config: &ExperimentConfig, outcome: &TrainOutcome) -> Result<()> {
    let mut w = csv_writer(&dir.join("trace.csv"), &config.seeds)?;
    w.write_record(["iteration", "cost", "best_cost", "grad_norm"])?;
    for r in &outcome.records {
        w.write_record([r.iteration.to_string(), num(r.cost), num(r.best_cost), num(r.grad_norm)])?;
    }
    w.flush()?;

    let mut w = csv_writer(&dir.join("params.csv"), &config.seeds)?;
    let width = outcome.records.first().map_or(0, |r| r.params.len());
    let mut header = vec!["iteration".to_string()];
    header.extend((0..outcome.theta.len()).map(|i| format!("theta_{i}")));
    if width > outcome.theta.len() {
        header.push("scale".into());
    }
    w.write_record(&header)?;
    for r in &outcome.records {
        let mut row = vec![r.iteration.to_string()];
        row.extend(r.params.iter().map(|v| num(*v)));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

fn write_predictions(
    dir: &Path,
    config: &ExperimentConfig,
    learner: &Learner,
    s: &Setup,
    outcome: &TrainOutcome,
    classical: Option<(&BasisSet, &LinearModel)>,
) -> Result<()> {
    let data = &s.task_data.data;
    let initial = learner.predict(&s.theta0, &s.output, &data.inputs)?;
    let fitted = learner.predict(&outcome.theta, &outcome.output, &data.inputs)?;
    let (din, dout) = (data.input_dim(), data.output_dim());
    let mut w = csv_writer(&dir.join("predictions.csv"), &config.seeds)?;
    let mut header = vec!["split".to_string()];
    header.extend((0..din).map(|k| column_name("x", k, din)));
    for base in ["teacher", "initial", "final"] {
        header.extend((0..dout).map(|k| column_name(base, k, dout)));
    }
    if classical.is_some() {
        header.push("classical".into());
    }
    w.write_record(&header)?;
    for (split, idx) in [("train", &data.split.train), ("test", &data.split.test)] {
        for &i in idx.iter() {
            let mut row = vec![split.to_string()];
            row.extend(data.inputs[i].iter().map(|v| num(*v)));
            row.extend(data.teachers[i].iter().map(|v| num(*v)));
            row.extend(initial[i].iter().map(|v| num(*v)));
            row.extend(fitted[i].iter().map(|v| num(*v)));
            if let Some((basis, model)) = classical {
                row.push(num(model.predict(basis, data.inputs[i][0])?));
            }
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

fn write_curve(
    dir: &Path,
    config: &ExperimentConfig,
    learner: &Learner,
    s: &Setup,
    outcome: &TrainOutcome,
    classical: Option<(&BasisSet, &LinearModel)>,
) -> Result<()> {
    let xs = linspace(CURVE_POINTS);
    let inputs: Vec<Vec<f64>> = xs.iter().map(|&x| vec![x]).collect();
    let initial = learner.predict(&s.theta0, &s.output, &inputs)?;
    let fitted = learner.predict(&outcome.theta, &outcome.output, &inputs)?;
    let truth: Option<Vec<Vec<f64>>> = xs.iter().map(|&x| s.task_data.truth.eval(x)).collect::<Result<_>>()?;
    let dout = config.num_outputs();
    let mut w = csv_writer(&dir.join("curve.csv"), &config.seeds)?;
    let mut header = vec!["x".to_string()];
    let mut bases = vec!["initial", "final"];
    if truth.is_some() {
        bases.insert(0, "truth");
    }
    for base in &bases {
        header.extend((0..dout).map(|k| column_name(base, k, dout)));
    }
    if classical.is_some() {
        header.push("classical".into());
    }
    w.write_record(&header)?;
    for (i, &x) in xs.iter().enumerate() {
        let mut row = vec![num(x)];
        if let Some(t) = &truth {
            row.extend(t[i].iter().map(|v| num(*v)));
        }
        row.extend(initial[i].iter().map(|v| num(*v)));
        row.extend(fitted[i].iter().map(|v| num(*v)));
        if let Some((basis, model)) = classical {
            row.push(num(model.predict(basis, x)?));
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

fn write_grid(dir: &Path, config: &ExperimentConfig, learner: &Learner, outcome: &TrainOutcome) -> Result<()> {
    let axis = linspace(config.data.grid_resolution);
    let points: Vec<Vec<f64>> = axis.iter().flat_map(|&b| axis.iter().map(move |&a| vec![a, b])).collect();
    let probs = learner.predict(&outcome.theta, &outcome.output, &points)?;
    let mut w = csv_writer(&dir.join("grid.csv"), &config.seeds)?;
    w.write_record(["x_1", "x_2", "p_class0"])?;
    for (p, y) in points.iter().zip(&probs) {
        w.write_record([num(p[0]), num(p[1]), num(y[0])])?;
    }
    w.flush()?;
    Ok(())
}

fn write_weights(
    dir: &Path,
    config: &ExperimentConfig,
    basis: &BasisSet,
    model: &LinearModel,
    quantum: &[f64],
) -> Result<()> {
    let mut w = csv_writer(&dir.join("weights.csv"), &config.seeds)?;
    w.write_record(["model", "basis", "weight"])?;
    for (name, v) in basis.names().iter().zip(&model.weights) {
        w.write_record(["classical", name, &num(*v)])?;
    }
    w.write_record(["classical", "norm", &num(model.weight_norm())])?;
    for (k, v) in quantum.iter().enumerate() {
        let label = PauliString::from_index(config.num_qubits, k)?.to_string();
        w.write_record(["quantum", &label, &num(*v)])?;
    }
    w.write_record(["quantum", "norm", &num(weight_norm(quantum))])?;
    w.flush()?;
    Ok(())
}

/// Loads a run's summary back from disk.
pub fn read_summary(run_dir: &Path) -> Result<RunSummary> {
    let text = std::fs::read_to_string(run_dir.join("summary.json"))?;
    serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", run_dir.join("summary.json").display())))
}
