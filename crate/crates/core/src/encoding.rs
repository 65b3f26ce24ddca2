//! Input-state preparation `|ψ_in(x)⟩ = U_in(x)|0…0⟩`.
//!
//! Every qubit receives `R^Y(asin x)` and, for the `ry_rz` kinds, a
//! subsequent `R^Z(acos x²)`. A `ry_only` qubit therefore has Bloch vector
//! `(x, 0, √(1−x²))`.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{ensure_dim, Error, Result};
use crate::qstate::{check_qubits, Pauli, PauliString, StateVector};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EncodingKind {
    RyOnly,
    RyRz,
    /// `R^Z·R^Y` on every qubit, qubit `j` reading feature `j mod d`.
    #[serde(rename = "multi_dim")]
    MultiDimRyRz,
}

impl EncodingKind {
    pub fn name(self) -> &'static str {
        match self {
            EncodingKind::RyOnly => "ry_only",
            EncodingKind::RyRz => "ry_rz",
            EncodingKind::MultiDimRyRz => "multi_dim",
        }
    }
}

impl fmt::Display for EncodingKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EncodingKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ry_only" => Ok(EncodingKind::RyOnly),
            "ry_rz" => Ok(EncodingKind::RyRz),
            "multi_dim" => Ok(EncodingKind::MultiDimRyRz),
            other => Err(Error::Config(format!(
                "unknown encoding {other:?} (expected ry_only, ry_rz or multi_dim)"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EncodingSpec {
    kind: EncodingKind,
    num_qubits: usize,
    input_dim: usize,
}

impl EncodingSpec {
    pub fn new(kind: EncodingKind, num_qubits: usize, input_dim: usize) -> Result<Self> {
        check_qubits(num_qubits)?;
        match kind {
            EncodingKind::RyOnly | EncodingKind::RyRz if input_dim != 1 => {
                return Err(Error::Config(format!(
                    "encoding {kind} takes scalar input, got input_dim {input_dim}"
                )))
            }
            EncodingKind::MultiDimRyRz if input_dim == 0 || input_dim > num_qubits => {
                return Err(Error::Config(format!(
                    "input_dim {input_dim} must be in 1..={num_qubits}"
                )))
            }
            _ => {}
        }
        Ok(Self { kind, num_qubits, input_dim })
    }

    pub fn kind(&self) -> EncodingKind {
        self.kind
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    /// Feature index read by `qubit`.
    pub fn feature_for_qubit(&self, qubit: usize) -> usize {
        qubit % self.input_dim
    }

    pub fn check_input(&self, x: &[f64]) -> Result<()> {
        ensure_dim(self.input_dim, x.len())?;
        match x.iter().find(|v| !(v.abs() <= 1.0)) {
            Some(bad) => Err(Error::Domain(*bad)),
            None => Ok(()),
        }
    }

    pub fn encode(&self, x: &[f64]) -> Result<StateVector> {
        self.check_input(x)?;
        let n = self.num_qubits;
        let mut state = StateVector::zero(n)?;
        for q in 0..n {
            let v = x[self.feature_for_qubit(q)];
            state.apply_pauli_rotation(&PauliString::single(n, q, Pauli::Y)?, v.asin())?;
            if self.kind != EncodingKind::RyOnly {
                state.apply_pauli_rotation(&PauliString::single(n, q, Pauli::Z)?, (v * v).acos())?;
            }
        }
        Ok(state)
    }
}

/// Largest register for which the full `4^n` Pauli expansion is produced.
pub const MAX_EXPANSION_QUBITS: usize = 4;

/// Coefficients `a_k = ⟨P_k⟩ / 2^n` with `|ψ⟩⟨ψ| = Σ_k a_k P_k`, in canonical
/// [`PauliString::from_index`] order.
pub fn pauli_coefficient_vector(state: &StateVector) -> Result<Vec<f64>> {
    let n = state.num_qubits();
    if n > MAX_EXPANSION_QUBITS {
        return Err(Error::Scale(format!(
            "Pauli expansion of {n} qubits exceeds the {MAX_EXPANSION_QUBITS}-qubit limit"
        )));
    }
    let norm = (1u64 << n) as f64;
    (0..1usize << (2 * n))
        .map(|k| Ok(state.expectation(&PauliString::from_index(n, k)?)? / norm))
        .collect()
}

pub fn pauli_coefficients(state: &StateVector) -> Result<BTreeMap<PauliString, f64>> {
    let n = state.num_qubits();
    pauli_coefficient_vector(state)?
        .into_iter()
        .enumerate()
        .map(|(k, a)| Ok((PauliString::from_index(n, k)?, a)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qstate::C64;
    use nalgebra::{DMatrix, DVector};

    fn z(n: usize, q: usize) -> PauliString {
        PauliString::single(n, q, Pauli::Z).unwrap()
    }

    /// Bloch vector after `R^Z(γ)·R^Y(β)|0⟩`, built from 2×2 matrices.
    fn bloch_oracle(x: f64, with_z: bool) -> [f64; 3] {
        let ry = |t: f64| {
            DMatrix::from_row_slice(2, 2, &[
                C64::new((t / 2.0).cos(), 0.0),
                C64::new(-(t / 2.0).sin(), 0.0),
                C64::new((t / 2.0).sin(), 0.0),
                C64::new((t / 2.0).cos(), 0.0),
            ])
        };
        let rz = |t: f64| {
            DMatrix::from_row_slice(2, 2, &[
                C64::from_polar(1.0, -t / 2.0),
                C64::new(0.0, 0.0),
                C64::new(0.0, 0.0),
                C64::from_polar(1.0, t / 2.0),
            ])
        };
        let mut u = ry(x.asin());
        if with_z {
            u = rz((x * x).acos()) * u;
        }
        let psi = u * DVector::from_vec(vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0)]);
        let ev = |p: Pauli| (psi.adjoint() * p.matrix() * &psi)[(0, 0)].re;
        [ev(Pauli::X), ev(Pauli::Y), ev(Pauli::Z)]
    }

    #[test]
    fn kind_names_round_trip() {
        for k in [EncodingKind::RyOnly, EncodingKind::RyRz, EncodingKind::MultiDimRyRz] {
            assert_eq!(k.name().parse::<EncodingKind>().unwrap(), k);
            let json = serde_json::to_string(&k).unwrap();
            assert_eq!(json, format!("\"{}\"", k.name()));
        }
        assert!("legendre".parse::<EncodingKind>().is_err());
    }

    #[test]
    fn ry_rz_at_zero_is_all_up() {
        let spec = EncodingSpec::new(EncodingKind::RyRz, 4, 1).unwrap();
        let s = spec.encode(&[0.0]).unwrap();
        for q in 0..4 {
            assert!((s.expectation(&z(4, q)).unwrap() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn ry_only_bloch_vector() {
        let spec = EncodingSpec::new(EncodingKind::RyOnly, 3, 1).unwrap();
        let s = spec.encode(&[0.6]).unwrap();
        for q in 0..3 {
            let x = PauliString::single(3, q, Pauli::X).unwrap();
            assert!((s.expectation(&x).unwrap() - 0.6).abs() < 1e-12);
            assert!((s.expectation(&z(3, q)).unwrap() - 0.8).abs() < 1e-12);
        }
    }

    #[test]
    fn ry_rz_bloch_vector_matches_matrix_oracle() {
        let spec = EncodingSpec::new(EncodingKind::RyRz, 2, 1).unwrap();
        for x in [0.6, -0.35, 0.99, 0.0] {
            let s = spec.encode(&[x]).unwrap();
            let oracle = bloch_oracle(x, true);
            for q in 0..2 {
                for (p, want) in [Pauli::X, Pauli::Y, Pauli::Z].into_iter().zip(oracle) {
                    let got = s.expectation(&PauliString::single(2, q, p).unwrap()).unwrap();
                    assert!((got - want).abs() < 1e-12, "x={x} q={q} {p:?}");
                }
            }
            assert!((oracle[2] - (1.0 - x * x).sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn highest_order_term_in_global_x() {
        for n in 2..=6 {
            let spec = EncodingSpec::new(EncodingKind::RyOnly, n, 1).unwrap();
            let s = spec.encode(&[-0.7]).unwrap();
            let xx = PauliString::uniform(n, Pauli::X).unwrap();
            assert!((s.expectation(&xx).unwrap() - (-0.7f64).powi(n as i32)).abs() < 1e-12);
        }
    }

    #[test]
    fn domain_and_shape_errors() {
        let spec = EncodingSpec::new(EncodingKind::RyRz, 2, 1).unwrap();
        assert!(matches!(spec.encode(&[1.5]), Err(Error::Domain(_))));
        assert!(matches!(spec.encode(&[f64::NAN]), Err(Error::Domain(_))));
        assert!(matches!(spec.encode(&[0.1, 0.2]), Err(Error::Dimension { .. })));
        assert!(EncodingSpec::new(EncodingKind::RyOnly, 2, 2).is_err());
        assert!(EncodingSpec::new(EncodingKind::MultiDimRyRz, 2, 3).is_err());
        assert!(spec.encode(&[1.0]).is_ok());
    }

    #[test]
    fn multi_dim_qubits_read_their_own_feature() {
        let spec = EncodingSpec::new(EncodingKind::MultiDimRyRz, 6, 2).unwrap();
        let base = spec.encode(&[0.3, -0.5]).unwrap();
        let moved0 = spec.encode(&[0.31, -0.5]).unwrap();
        let moved1 = spec.encode(&[0.3, -0.49]).unwrap();
        for q in 0..6 {
            let d0 = moved0.expectation(&z(6, q)).unwrap() - base.expectation(&z(6, q)).unwrap();
            let d1 = moved1.expectation(&z(6, q)).unwrap() - base.expectation(&z(6, q)).unwrap();
            if q % 2 == 0 {
                assert!(d0.abs() > 1e-6 && d1.abs() < 1e-13, "qubit {q}");
            } else {
                assert!(d1.abs() > 1e-6 && d0.abs() < 1e-13, "qubit {q}");
            }
        }
    }

    #[test]
    fn zero_state_coefficients() {
        let c = pauli_coefficients(&StateVector::zero(1).unwrap()).unwrap();
        let get = |s: &str| c[&s.parse::<PauliString>().unwrap()];
        assert!((get("I") - 0.5).abs() < 1e-15);
        assert!((get("Z") - 0.5).abs() < 1e-15);
        assert_eq!(get("X"), 0.0);
        assert_eq!(get("Y"), 0.0);
    }

    #[test]
    fn two_qubit_xx_coefficient() {
        let spec = EncodingSpec::new(EncodingKind::RyOnly, 2, 1).unwrap();
        for x in [0.2, -0.9, 0.55] {
            let c = pauli_coefficients(&spec.encode(&[x]).unwrap()).unwrap();
            assert!((c[&"XX".parse::<PauliString>().unwrap()] - x * x / 4.0).abs() < 1e-12);
        }
    }

    #[test]
    fn expansion_reconstructs_projector() {
        let spec = EncodingSpec::new(EncodingKind::RyRz, 3, 1).unwrap();
        let s = spec.encode(&[0.42]).unwrap();
        let a = pauli_coefficient_vector(&s).unwrap();
        let mut rho = DMatrix::<C64>::zeros(8, 8);
        for (k, ak) in a.iter().enumerate() {
            rho += PauliString::from_index(3, k).unwrap().to_dense() * C64::new(*ak, 0.0);
        }
        let psi = DVector::from_column_slice(s.amplitudes());
        let proj = &psi * psi.adjoint();
        assert!((rho - proj).iter().all(|v| v.norm() < 1e-12));
    }

    #[test]
    fn expansion_refuses_large_registers() {
        let s = StateVector::zero(5).unwrap();
        assert!(matches!(pauli_coefficient_vector(&s), Err(Error::Scale(_))));
    }
}
