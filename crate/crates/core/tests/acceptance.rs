//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use qcl::ansatz::{Circuit, ParameterVector};
use qcl::baseline::{least_squares_fit, noisy_dataset, pauli_transfer_matrix, OverfitTarget, BasisSet};
use qcl::encoding::{pauli_coefficient_vector, EncodingKind, EncodingSpec};
use qcl::experiment::{self, ExperimentConfig, RunStatus, RunSummary, Target, Task, INNER_RADIUS, OUTER_RADII};
use qcl::grad::{commutator_via_shifts, finite_diff_grad, param_shift_grad};
use qcl::hamiltonian::{evolution_gate, IsingHamiltonian};
use qcl::learn::{add_sampling_noise, NoiseModel};
use qcl::qstate::{Pauli, PauliString, StateVector, C64};
use qcl::rng::{self, QclRng};
use rand::RngExt;
use rand_distr::{Distribution, StandardNormal};

type Outcome = Result<(bool, String), String>;

struct Suite {
    results: Vec<(String, bool)>,
}

impl Suite {
    fn check(&mut self, id: &str, name: &str, f: impl FnOnce() -> Outcome) {
        let start = Instant::now();
        let (passed, detail) = match f() {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        let tag = if passed { "PASS" } else { "FAIL" };
        println!("[{tag}] criterion {id} {name}: {detail} [{:.1} s]", start.elapsed().as_secs_f64());
        self.results.push((id.to_string(), passed));
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn random_circuit(rng: &mut QclRng, n: usize, depth: usize, kind: EncodingKind) -> Result<Circuit, String> {
    let h = IsingHamiltonian::sample(n, rng.random()).map_err(err)?;
    let gate = Arc::new(evolution_gate(&h, 10.0).map_err(err)?);
    Circuit::new(EncodingSpec::new(kind, n, 1).map_err(err)?, depth, gate).map_err(err)
}

fn gradient_correctness() -> Outcome {
    const TOL: f64 = 1e-6;
    let start = Instant::now();
    let mut rng = rng::seeded(101);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let circuit = random_circuit(&mut rng, 4, 2, EncodingKind::RyRz)?;
        let theta = ParameterVector::random_uniform(circuit.num_params(), rng.random());
        let x = [rng.random_range(-1.0..=1.0)];
        let z = PauliString::single(4, rng.random_range(0..4), Pauli::Z).map_err(err)?;
        let shift = param_shift_grad(&circuit, &theta, &x, &z).map_err(err)?;
        let fd = finite_diff_grad(&circuit, &theta, &x, &z, 1e-4).map_err(err)?;
        for (a, b) in shift.values().iter().zip(fd.values()) {
            worst = worst.max((a - b).abs());
        }
    }
    let secs = start.elapsed().as_secs_f64();
    Ok((worst < TOL && secs < 30.0, format!("max |shift - fd| = {worst:.2e} (< {TOL:e}), {secs:.2} s (< 30 s)")))
}

fn commutator_identity() -> Outcome {
    const TOL: f64 = 1e-12;
    let start = Instant::now();
    let mut rng = rng::seeded(102);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let pauli = [Pauli::X, Pauli::Y, Pauli::Z][rng.random_range(0..3)];
        let p = PauliString::single(2, rng.random_range(0..2), pauli).map_err(err)?;
        let a = DMatrix::from_fn(4, 4, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        let rho = (&a + a.adjoint()) * C64::new(0.5, 0.0);
        let pm = p.to_dense();
        let exact = &pm * &rho - &rho * &pm;
        let shifted = commutator_via_shifts(&p, &rho).map_err(err)?;
        worst = worst.max((exact - shifted).iter().map(|z| z.norm()).fold(0.0, f64::max));
    }
    let secs = start.elapsed().as_secs_f64();
    Ok((worst <= TOL && secs < 5.0, format!("max entry error {worst:.2e} (<= {TOL:e}), {secs:.2} s (< 5 s)")))
}

fn encoding_content() -> Outcome {
    let mut rng = rng::seeded(103);
    let (mut worst_x, mut worst_z) = (0.0f64, 0.0f64);
    for n in 2..=6 {
        let enc = EncodingSpec::new(EncodingKind::RyOnly, n, 1).map_err(err)?;
        let xn = PauliString::uniform(n, Pauli::X).map_err(err)?;
        for _ in 0..20 {
            let x: f64 = rng.random_range(-1.0..=1.0);
            let psi = enc.encode(&[x]).map_err(err)?;
            worst_x = worst_x.max((psi.expectation(&xn).map_err(err)? - x.powi(n as i32)).abs());
            for q in 0..n {
                let z = PauliString::single(n, q, Pauli::Z).map_err(err)?;
                worst_z = worst_z.max((psi.expectation(&z).map_err(err)? - (1.0 - x * x).sqrt()).abs());
            }
        }
    }
    Ok((
        worst_x <= 1e-10 && worst_z <= 1e-12,
        format!("max |<X..X> - x^N| = {worst_x:.2e} (<= 1e-10), max |<Z> - sqrt(1-x^2)| = {worst_z:.2e} (<= 1e-12)"),
    ))
}

fn random_state(rng: &mut QclRng, n: usize) -> Result<StateVector, String> {
    let amps: Vec<C64> = (0..1usize << n)
        .map(|_| C64::new(StandardNormal.sample(rng), StandardNormal.sample(rng)))
        .collect();
    let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    StateVector::from_amplitudes(n, amps.into_iter().map(|a| a / norm).collect()).map_err(err)
}

fn transfer_matrix() -> Outcome {
    const TOL: f64 = 1e-9;
    let mut rng = rng::seeded(104);
    let (mut ortho, mut linear, mut rows, mut oracle) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for i in 0..50 {
        let n = 1 + i % 3;
        let depth = 1 + rng.random_range(0..3);
        let circuit = random_circuit(&mut rng, n, depth, EncodingKind::RyRz)?;
        let theta = ParameterVector::random_uniform(circuit.num_params(), rng.random());
        let u = circuit.unitary(&theta).map_err(err)?;
        let r = pauli_transfer_matrix(&u).map_err(err)?;
        let dim = r.nrows();
        ortho = ortho.max((r.transpose() * &r - DMatrix::identity(dim, dim)).amax());
        for row in r.row_iter() {
            rows = rows.max((row.norm() - 1.0).abs());
        }
        let psi = random_state(&mut rng, n)?;
        let a = DVector::from_vec(pauli_coefficient_vector(&psi).map_err(err)?);
        let mut out = psi.clone();
        out.apply_dense_unitary(&u).map_err(err)?;
        let b = DVector::from_vec(pauli_coefficient_vector(&out).map_err(err)?);
        linear = linear.max((&r * a - b).amax());
        // Brute-force trace oracle on one random entry.
        let (m, k) = (rng.random_range(0..dim), rng.random_range(0..dim));
        let pm = PauliString::from_index(n, m).map_err(err)?.to_dense();
        let pk = PauliString::from_index(n, k).map_err(err)?.to_dense();
        let tr = (pm * u.matrix() * pk * u.matrix().adjoint()).trace().re / (1u64 << n) as f64;
        oracle = oracle.max((tr - r[(m, k)]).abs());
    }
    Ok((
        ortho <= TOL && linear <= TOL && rows <= TOL && oracle <= TOL,
        format!(
            "max |R^T R - I| = {ortho:.2e}, max |R a - b| = {linear:.2e}, max ||row| - 1| = {rows:.2e}, \
             trace oracle {oracle:.2e} (all <= {TOL:e})"
        ),
    ))
}

fn run_default(task: Task, target: Option<Target>, out: &Path) -> Result<RunSummary, String> {
    let mut config = ExperimentConfig::defaults(task);
    if target.is_some() {
        config.target = target;
    }
    config.output_dir = out.to_path_buf();
    config.validate().map_err(err)?;
    let summary = experiment::run(&config).map_err(err)?;
    if summary.status != RunStatus::Completed {
        return Err(format!("run aborted: {:?}", summary.termination));
    }
    Ok(summary)
}

fn fit1d(out: &Path) -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for (target, tol) in [(Target::X2, 1e-3), (Target::Exp, 1e-3), (Target::Sin, 1e-3), (Target::Abs, 2e-2)] {
        let start = Instant::now();
        let s = run_default(Task::Fit1d, Some(target), out)?;
        let secs = start.elapsed().as_secs_f64();
        let train = s.train.mse;
        let test = s.test.as_ref().ok_or("no held-out metrics")?.mse;
        let pass = train < tol && test <= 3.0 * train && secs < 600.0;
        ok &= pass;
        parts.push(format!(
            "{}: train {train:.2e} (< {tol:e}), test {test:.2e} (<= 3x train), a = {:.3}, {secs:.0} s{}",
            target.name(),
            s.output_scale,
            if pass { "" } else { " <-- fail" }
        ));
    }
    Ok((ok, parts.join("; ")))
}

fn read_grid(path: &Path) -> Result<Vec<[f64; 3]>, String> {
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_path(path).map_err(err)?;
    r.deserialize::<(f64, f64, f64)>()
        .map(|row| row.map(|(a, b, p)| [a, b, p]).map_err(err))
        .collect()
}

fn classify(out: &Path) -> Outcome {
    let start = Instant::now();
    let s = run_default(Task::Classify2d, None, out)?;
    let secs = start.elapsed().as_secs_f64();
    let train = s.train.accuracy.ok_or("no train accuracy")?;
    let test = s.test.as_ref().and_then(|m| m.accuracy).ok_or("no held-out accuracy")?;
    let grid = read_grid(&s.run_dir.join("grid.csv"))?;
    let mean = |keep: &dyn Fn(f64) -> bool| {
        let sel: Vec<f64> = grid.iter().filter(|g| keep(g[0].hypot(g[1]))).map(|g| g[2]).collect();
        sel.iter().sum::<f64>() / sel.len().max(1) as f64
    };
    let inner = mean(&|r| r <= INNER_RADIUS);
    let outer = mean(&|r| (OUTER_RADII.0..=OUTER_RADII.1).contains(&r));
    let crosses = inner > 0.5 && outer < 0.5;
    Ok((
        train >= 0.95 && test >= 0.90 && crosses && secs < 900.0,
        format!(
            "train accuracy {train:.3} (>= 0.95), test accuracy {test:.3} (>= 0.90), \
             mean p(class 0) inner {inner:.3} / outer {outer:.3} (crosses 0.5: {crosses}), {secs:.0} s (< 900 s)"
        ),
    ))
}

fn dynamics(out: &Path) -> Outcome {
    let start = Instant::now();
    let s = run_default(Task::Dynamics, None, out)?;
    let secs = start.elapsed().as_secs_f64();
    let per = &s.train.per_output_mse;
    let worst = per.iter().copied().fold(0.0, f64::max);
    let test = s.test.as_ref().map_or(f64::NAN, |m| m.mse);
    let per_text: Vec<String> = per.iter().map(|v| format!("{v:.2e}")).collect();
    Ok((
        per.len() == 3 && worst < 1e-2 && secs < 1800.0,
        format!("per-output train MSE [{}] (< 1e-2), held-out MSE {test:.2e}, {secs:.0} s (< 1800 s)", per_text.join(", ")),
    ))
}

fn overfitting(out: &Path) -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for target in [Target::HalfSin, Target::X2] {
        let s = run_default(Task::OverfitAppendix, Some(target), out)?;
        let w = s.weights.as_ref().ok_or("no weight comparison")?;
        let c_train = w.classical_train_mse;
        let c_test = w.classical_test_mse.ok_or("no classical held-out error")?;
        let q_train = s.train.mse;
        let q_test = s.test.as_ref().ok_or("no held-out metrics")?.mse;
        let checks = [
            ("classical train < 1e-6", c_train < 1e-6),
            ("|w| >= 50", w.classical_weight_norm >= 50.0),
            ("QCL train > 1e-3", q_train > 1e-3),
            ("QCL test < classical test", q_test < c_test),
        ];
        let failed: Vec<&str> = checks.iter().filter(|c| !c.1).map(|c| c.0).collect();
        ok &= failed.is_empty();
        parts.push(format!(
            "{}: classical train {c_train:.2e}, |w| = {:.1} (rank {}/9), classical test {c_test:.2e}; \
             QCL train {q_train:.2e}, QCL test {q_test:.2e}, QCL |w| = {:.3}{}",
            target.name(),
            w.classical_weight_norm,
            w.classical_rank,
            w.quantum_weight_norm,
            if failed.is_empty() { String::new() } else { format!(" <-- failed: {}", failed.join(", ")) }
        ));
    }
    Ok((ok, parts.join("; ")))
}

/// Not a criterion: the same classical comparison with as many points as the
/// basis has independent functions, where interpolation is possible.
fn overfitting_diagnostic() -> Result<String, String> {
    let basis = BasisSet::three_qubit_ry();
    let mut parts = Vec::new();
    for target in [OverfitTarget::HalfSin, OverfitTarget::Square] {
        let data = noisy_dataset(target, 7, 100, 0.05, 3).map_err(err)?;
        let model = least_squares_fit(&basis, &data).map_err(err)?;
        let mut worst = 0.0f64;
        for &i in &data.split.train {
            worst = worst.max((model.predict(&basis, data.inputs[i][0]).map_err(err)? - data.teachers[i][0]).abs());
        }
        parts.push(format!("{}: max train residual {worst:.1e}, |w| = {:.1}", target.name(), model.weight_norm()));
    }
    Ok(parts.join("; "))
}

fn csv_files(dir: &Path) -> Result<BTreeMap<String, Vec<u8>>, String> {
    let mut out = BTreeMap::new();
    for entry in std::fs::read_dir(dir).map_err(err)? {
        let path = entry.map_err(err)?.path();
        if path.extension().is_some_and(|e| e == "csv") {
            let name = path.file_name().unwrap().to_string_lossy().into_owned();
            out.insert(name, std::fs::read(&path).map_err(err)?);
        }
    }
    Ok(out)
}

fn determinism(out: &Path) -> Outcome {
    let mut configs = Vec::new();
    let mut fit = ExperimentConfig::defaults(Task::Fit1d);
    fit.target = Some(Target::Sin);
    fit.num_qubits = 4;
    fit.depth = 3;
    fit.optimizer.max_iterations = 15;
    fit.noise.enabled = true;
    configs.push(fit);
    let mut cls = ExperimentConfig::defaults(Task::Classify2d);
    cls.num_qubits = 4;
    cls.depth = 2;
    cls.data.train_samples = 40;
    cls.data.test_samples = 20;
    cls.data.grid_resolution = 11;
    cls.optimizer.max_iterations = 10;
    configs.push(cls);
    let mut dynamics = ExperimentConfig::defaults(Task::Dynamics);
    dynamics.num_qubits = 4;
    dynamics.depth = 2;
    dynamics.dynamics.as_mut().unwrap().teacher_qubits = 5;
    dynamics.data.train_samples = 20;
    dynamics.data.test_samples = 19;
    dynamics.optimizer.max_iterations = 10;
    configs.push(dynamics);
    configs.push(ExperimentConfig::defaults(Task::OverfitAppendix));

    let mut compared = 0;
    let mut mismatches = Vec::new();
    for mut config in configs {
        config.output_dir = out.to_path_buf();
        config.validate().map_err(err)?;
        let a = experiment::run(&config).map_err(err)?;
        let b = experiment::run(&config).map_err(err)?;
        if a.run_dir == b.run_dir {
            return Err("two runs shared an output directory".into());
        }
        let (fa, fb) = (csv_files(&a.run_dir)?, csv_files(&b.run_dir)?);
        if fa.keys().ne(fb.keys()) {
            mismatches.push(format!("{}: different file sets", config.task));
        }
        for (name, bytes) in &fa {
            compared += 1;
            if fb.get(name) != Some(bytes) {
                mismatches.push(format!("{}/{name}", config.task));
            }
        }
    }
    Ok((
        mismatches.is_empty() && compared > 0,
        format!("{compared} CSV files compared across 4 tasks, mismatches: {mismatches:?}"),
    ))
}

fn noise_model() -> Outcome {
    let model = NoiseModel { enabled: true, shots: 800, seed: 105 };
    let mut rng = rng::seeded(model.seed);
    let draws: Vec<f64> =
        (0..100_000).map(|_| add_sampling_noise(0.0, &model, &mut rng)).collect::<Result<_, _>>().map_err(err)?;
    let mean = draws.iter().sum::<f64>() / draws.len() as f64;
    let var = draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (draws.len() - 1) as f64;
    let std = var.sqrt();
    let expected = (2.0f64 / 800.0).sqrt() / 4.0;
    let rel = (std - expected).abs() / expected;
    Ok((rel <= 0.05, format!("sample std {std:.5} vs {expected:.5} (relative error {rel:.3} <= 0.05)")))
}

fn main() -> ExitCode {
    let scratch = tempfile::tempdir().expect("temporary directory");
    let out = scratch.path();
    let mut suite = Suite { results: Vec::new() };
    suite.check("1", "gradient correctness", gradient_correctness);
    suite.check("2", "commutator identity", commutator_identity);
    suite.check("3", "encoding content", encoding_content);
    suite.check("4", "transfer matrix", transfer_matrix);
    suite.check("5", "function fitting", || fit1d(out));
    suite.check("6", "two-class classification", || classify(out));
    suite.check("7", "spin dynamics fitting", || dynamics(out));
    suite.check("8", "overfitting comparison", || overfitting(out));
    match overfitting_diagnostic() {
        Ok(d) => println!("[INFO] criterion 8 diagnostic, classical fit on 7 points: {d}"),
        Err(e) => println!("[INFO] criterion 8 diagnostic failed: {e}"),
    }
    suite.check("9", "determinism", || determinism(out));
    suite.check("10", "sampling noise", noise_model);

    let failed: Vec<&str> = suite.results.iter().filter(|r| !r.1).map(|r| r.0.as_str()).collect();
    println!(
        "acceptance: {} passed, {} failed{}",
        suite.results.len() - failed.len(),
        failed.len(),
        if failed.is_empty() { String::new() } else { format!(" (criteria {})", failed.join(", ")) }
    );
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
