use std::path::Path;

use qcl::experiment::{self, emit_plots, read_summary, ExperimentConfig, RunStatus, Target, Task};
use qcl::learn::Termination;

fn small(task: Task, out: &Path) -> ExperimentConfig {
    let mut c = ExperimentConfig::defaults(task);
    c.output_dir = out.to_path_buf();
    c.optimizer.max_iterations = 8;
    match task {
        Task::Fit1d => {
            c.num_qubits = 3;
            c.depth = 2;
            c.data.train_samples = 20;
            c.data.test_samples = 10;
        }
        Task::Classify2d => {
            c.num_qubits = 3;
            c.depth = 2;
            c.data.train_samples = 20;
            c.data.test_samples = 10;
            c.data.grid_resolution = 5;
        }
        Task::Dynamics => {
            c.num_qubits = 3;
            c.depth = 2;
            c.dynamics.as_mut().unwrap().teacher_qubits = 4;
            c.data.train_samples = 12;
            c.data.test_samples = 11;
        }
        Task::OverfitAppendix => {}
    }
    c.validate().unwrap();
    c
}

fn svg_series(path: &Path) -> Vec<String> {
    let text = std::fs::read_to_string(path).unwrap();
    let doc = roxmltree::Document::parse(&text).unwrap();
    assert_eq!(doc.root_element().tag_name().name(), "svg");
    doc.descendants()
        .filter(|n| n.attribute("class") == Some("series"))
        .map(|n| n.attribute("data-label").unwrap().to_string())
        .collect()
}

fn csv_lines(path: &Path) -> Vec<String> {
    std::fs::read_to_string(path).unwrap().lines().map(str::to_string).collect()
}

#[test]
fn fit1d_run_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let s = experiment::run(&small(Task::Fit1d, dir.path())).unwrap();
    assert_eq!(s.status, RunStatus::Completed);
    let name = s.run_dir.file_name().unwrap().to_string_lossy().into_owned();
    assert!(name.starts_with("fit1d-x2-") && name.ends_with("-s1"), "{name}");
    for f in ["config.json", "trace.csv", "params.csv", "predictions.csv", "curve.csv", "fit.svg", "trace.svg", "summary.json", "timing.json"] {
        assert!(s.run_dir.join(f).exists(), "missing {f}");
        assert!(s.files.iter().any(|x| x == f), "{f} not listed");
    }
    let preds = csv_lines(&s.run_dir.join("predictions.csv"));
    assert_eq!(preds[0], "# seeds hamiltonian=1 theta=2 data=3 noise=4 teacher=5");
    assert_eq!(preds[1], "split,x,teacher,initial,final");
    assert_eq!(preds.len(), 2 + 30);
    let trace = csv_lines(&s.run_dir.join("trace.csv"));
    assert_eq!(trace[1], "iteration,cost,best_cost,grad_norm");
    assert!(trace.len() > 2);
    let params = csv_lines(&s.run_dir.join("params.csv"));
    assert!(params[1].ends_with(",scale"));

    let config = ExperimentConfig::from_file(&s.run_dir.join("config.json")).unwrap();
    assert_eq!(config, small(Task::Fit1d, dir.path()));
    assert_eq!(read_summary(&s.run_dir).unwrap(), s);
    assert!(s.train.mse <= s.initial_train.mse);
    assert_eq!(svg_series(&s.run_dir.join("fit.svg")), ["teacher", "initial", "final"]);
}

#[test]
fn classification_run_emits_probability_grid() {
    let dir = tempfile::tempdir().unwrap();
    let s = experiment::run(&small(Task::Classify2d, dir.path())).unwrap();
    assert!(s.train.accuracy.is_some());
    let grid = csv_lines(&s.run_dir.join("grid.csv"));
    assert_eq!(grid[1], "x_1,x_2,p_class0");
    assert_eq!(grid.len(), 2 + 25);
    let header = &csv_lines(&s.run_dir.join("predictions.csv"))[1];
    assert_eq!(header, "split,x_1,x_2,teacher_1,teacher_2,initial_1,initial_2,final_1,final_2");
    assert_eq!(svg_series(&s.run_dir.join("decision.svg")), ["class 0", "class 1"]);
}

#[test]
fn dynamics_run_plots_each_output() {
    let dir = tempfile::tempdir().unwrap();
    let s = experiment::run(&small(Task::Dynamics, dir.path())).unwrap();
    assert_eq!(s.train.per_output_mse.len(), 3);
    for k in 1..=3 {
        assert_eq!(svg_series(&s.run_dir.join(format!("fit_{k}.svg"))), ["teacher", "initial", "final"]);
    }
    let curve = csv_lines(&s.run_dir.join("curve.csv"));
    assert!(curve[1].starts_with("x,truth_1,truth_2,truth_3,initial_1"));
}

#[test]
fn dynamics_teacher_from_file() {
    let dir = tempfile::tempdir().unwrap();
    let task = qcl::dynamics::DynamicsTask { teacher_qubits: 4, samples: 12, ..Default::default() };
    let data = qcl::dynamics::generate_teacher(&task, 21, 22).unwrap();
    let file = dir.path().join("teacher.csv");
    qcl::dynamics::write_teacher_csv(&file, &data).unwrap();
    let mut c = small(Task::Dynamics, dir.path());
    c.teacher_file = Some(file);
    let s = experiment::run(&c).unwrap();
    assert_eq!(s.train.samples, 12);
    assert!(s.test.is_none());
}

#[test]
fn overfit_run_reports_weights() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = small(Task::OverfitAppendix, dir.path());
    c.target = Some(Target::X2);
    let s = experiment::run(&c).unwrap();
    let w = s.weights.unwrap();
    assert_eq!(w.classical_rank, 7);
    assert!((w.quantum_weight_norm - 1.0).abs() < 1e-9);
    let weights = csv_lines(&s.run_dir.join("weights.csv"));
    assert_eq!(weights[1], "model,basis,weight");
    assert_eq!(weights.len(), 2 + 10 + 65);
    assert!(weights.iter().any(|l| l.starts_with("quantum,ZII,")));
    assert_eq!(svg_series(&s.run_dir.join("fit.svg")), ["teacher", "initial", "final", "classical"]);
}

#[test]
fn repeated_runs_use_fresh_directories_and_identical_csvs() {
    let dir = tempfile::tempdir().unwrap();
    let c = small(Task::Fit1d, dir.path());
    let a = experiment::run(&c).unwrap();
    let b = experiment::run(&c).unwrap();
    assert_ne!(a.run_dir, b.run_dir);
    for f in ["trace.csv", "params.csv", "predictions.csv", "curve.csv"] {
        assert_eq!(std::fs::read(a.run_dir.join(f)).unwrap(), std::fs::read(b.run_dir.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn non_finite_cost_leaves_an_aborted_run() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = small(Task::Fit1d, dir.path());
    c.output.scale = 1e300;
    let s = experiment::run(&c).unwrap();
    assert_eq!(s.status, RunStatus::Aborted);
    assert!(matches!(s.termination, Termination::Aborted { .. }));
    assert!(s.run_dir.join("trace.csv").exists());
    assert!(s.run_dir.join("summary.json").exists());
    assert!(!s.run_dir.join("predictions.csv").exists());
    let trace = csv_lines(&s.run_dir.join("trace.csv"));
    assert!(trace.len() >= 3, "{trace:?}");
}

#[test]
fn plotting_empty_predictions_fails_without_writing() {
    let dir = tempfile::tempdir().unwrap();
    let c = small(Task::Fit1d, dir.path());
    std::fs::write(dir.path().join("config.json"), c.to_json().unwrap()).unwrap();
    std::fs::write(dir.path().join("predictions.csv"), "split,x,teacher,initial,final\n").unwrap();
    assert!(emit_plots(dir.path()).is_err());
    std::fs::write(dir.path().join("predictions.csv"), "split,x,initial,final\ntrain,0,0,0\n").unwrap();
    match emit_plots(dir.path()) {
        Err(qcl::Error::Format(msg)) => assert!(msg.contains("teacher"), "{msg}"),
        other => panic!("expected a format error, got {other:?}"),
    }
    let svgs = std::fs::read_dir(dir.path())
        .unwrap()
        .filter(|e| e.as_ref().unwrap().path().extension().is_some_and(|x| x == "svg"))
        .count();
    assert_eq!(svgs, 0);
}

#[test]
fn plots_can_be_regenerated() {
    let dir = tempfile::tempdir().unwrap();
    let s = experiment::run(&small(Task::Fit1d, dir.path())).unwrap();
    let before = std::fs::read(s.run_dir.join("fit.svg")).unwrap();
    std::fs::remove_file(s.run_dir.join("fit.svg")).unwrap();
    let files = emit_plots(&s.run_dir).unwrap();
    assert!(files.iter().any(|f| f.ends_with("fit.svg")));
    assert_eq!(std::fs::read(s.run_dir.join("fit.svg")).unwrap(), before);
}
