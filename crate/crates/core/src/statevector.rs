//! Pure-state simulation with Ry and CNOT gates.
//!
//! Amplitude index `k` holds basis state `|k⟩` under the little-endian
//! convention of [`crate::pauli`]: qubit `n` is bit `n` of `k`.

use num_complex::Complex64;
use rayon::prelude::*;
use thiserror::Error;

use crate::pauli::{PauliString, PauliSum};

/// Desk-scale register limit (2^24 amplitudes, 256 MiB).
pub const MAX_QUBITS: usize = 24;

/// Registers at least this large evaluate Pauli terms on the rayon pool.
const PARALLEL_QUBITS: usize = 8;

#[derive(Debug, Error)]
pub enum SimulationError {
    #[error("register of {qubits} qubits is outside 1..={MAX_QUBITS}")]
    QubitGuard { qubits: usize },
    #[error("gate {gate:?} addresses a qubit outside a {qubits}-qubit register")]
    QubitIndex { gate: GateOp, qubits: usize },
    #[error("CNOT control and target are both qubit {0}")]
    CnotSameQubit(usize),
    #[error("qubit count mismatch: state has {state}, operator has {operator}")]
    QubitMismatch { state: usize, operator: usize },
    #[error("expectation value has imaginary part {0:e}; operator is not Hermitian")]
    NonHermitian(f64),
    #[error("parameter vector has length {found}, ansatz needs {expected}")]
    ParameterCount { found: usize, expected: usize },
}

/// A gate of the RealAmplitudes family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GateOp {
    /// `Ry(angle)` on `target`, angle in radians.
    Ry {
        angle: f64,
        target: usize,
    },
    Cnot {
        control: usize,
        target: usize,
    },
}

/// A `q`-qubit pure state.
#[derive(Debug, Clone, PartialEq)]
pub struct Statevector {
    amplitudes: Vec<Complex64>,
    qubits: usize,
}

impl Statevector {
    /// `|0…0⟩` on `qubits` qubits.
    pub fn init_zero(qubits: usize) -> Result<Self, SimulationError> {
        if qubits == 0 || qubits > MAX_QUBITS {
            return Err(SimulationError::QubitGuard { qubits });
        }
        let mut amplitudes = vec![Complex64::default(); 1 << qubits];
        amplitudes[0] = Complex64::new(1.0, 0.0);
        Ok(Self { amplitudes, qubits })
    }

    /// Wraps an amplitude vector whose length is a power of two. The vector
    /// is used as given; callers normalise it when needed.
    pub fn from_amplitudes(amplitudes: Vec<Complex64>) -> Result<Self, SimulationError> {
        let len = amplitudes.len();
        if len < 2 || !len.is_power_of_two() || len.trailing_zeros() as usize > MAX_QUBITS {
            return Err(SimulationError::QubitGuard {
                qubits: len.trailing_zeros() as usize,
            });
        }
        Ok(Self {
            qubits: len.trailing_zeros() as usize,
            amplitudes,
        })
    }

    pub fn qubits(&self) -> usize {
        self.qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub(crate) fn amplitudes_mut(&mut self) -> &mut [Complex64] {
        &mut self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Born-rule probabilities of the computational basis states.
    pub fn probabilities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }

    pub fn apply(&mut self, gate: GateOp) -> Result<(), SimulationError> {
        match gate {
            GateOp::Ry { angle, target } => {
                if target >= self.qubits {
                    return Err(SimulationError::QubitIndex {
                        gate,
                        qubits: self.qubits,
                    });
                }
                let (s, c) = (angle / 2.0).sin_cos();
                let bit = 1usize << target;
                for k in 0..self.amplitudes.len() {
                    if k & bit == 0 {
                        let (a0, a1) = (self.amplitudes[k], self.amplitudes[k | bit]);
                        self.amplitudes[k] = a0 * c - a1 * s;
                        self.amplitudes[k | bit] = a0 * s + a1 * c;
                    }
                }
            }
            GateOp::Cnot { control, target } => {
                if control >= self.qubits || target >= self.qubits {
                    return Err(SimulationError::QubitIndex {
                        gate,
                        qubits: self.qubits,
                    });
                }
                if control == target {
                    return Err(SimulationError::CnotSameQubit(control));
                }
                let (cbit, tbit) = (1usize << control, 1usize << target);
                for k in 0..self.amplitudes.len() {
                    if k & cbit != 0 && k & tbit == 0 {
                        self.amplitudes.swap(k, k | tbit);
                    }
                }
            }
        }
        Ok(())
    }

    pub fn apply_all<'a>(
        &mut self,
        gates: impl IntoIterator<Item = &'a GateOp>,
    ) -> Result<(), SimulationError> {
        gates.into_iter().try_for_each(|g| self.apply(*g))
    }
}

/// Applies `gate` and returns the new state.
pub fn apply_gate(mut state: Statevector, gate: GateOp) -> Result<Statevector, SimulationError> {
    state.apply(gate)?;
    Ok(state)
}

/// `⟨ψ|P|ψ⟩` for a single Pauli string, computed from the axis action
/// `P|k⟩ = i^{|x∧z|} (-1)^{|z∧k|} |k⊕x⟩` without forming a matrix.
pub fn pauli_expectation(state: &Statevector, string: &PauliString) -> Complex64 {
    let (x, z) = (string.x_mask() as usize, string.z_mask() as usize);
    let amps = state.amplitudes();
    let mut acc = Complex64::default();
    for (k, &a) in amps.iter().enumerate() {
        let term = amps[k ^ x].conj() * a;
        if (z & k).count_ones() % 2 == 0 {
            acc += term;
        } else {
            acc -= term;
        }
    }
    match string.y_count() % 4 {
        0 => acc,
        1 => Complex64::new(-acc.im, acc.re),
        2 => -acc,
        _ => Complex64::new(acc.im, -acc.re),
    }
}

/// `⟨ψ|H|ψ⟩` for a Pauli sum, summed in term order. Terms are evaluated in
/// parallel on large registers; the reduction order stays fixed.
pub fn exact_expectation(state: &Statevector, sum: &PauliSum) -> Result<f64, SimulationError> {
    if state.qubits() != sum.qubits() {
        return Err(SimulationError::QubitMismatch {
            state: state.qubits(),
            operator: sum.qubits(),
        });
    }
    let contributions: Vec<Complex64> = if state.qubits() >= PARALLEL_QUBITS {
        sum.terms()
            .par_iter()
            .map(|t| t.coefficient * pauli_expectation(state, &t.string))
            .collect()
    } else {
        sum.terms()
            .iter()
            .map(|t| t.coefficient * pauli_expectation(state, &t.string))
            .collect()
    };
    let total: Complex64 = contributions.into_iter().sum();
    let scale = sum
        .terms()
        .iter()
        .map(|t| t.coefficient.norm())
        .sum::<f64>()
        .max(1.0);
    if total.im.abs() > 1e-10 * scale {
        return Err(SimulationError::NonHermitian(total.im));
    }
    Ok(total.re)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::HermitianMatrix;
    use crate::pauli::{encode_matrix, BitEncoding, PaddingPolicy};
    use std::f64::consts::PI;

    fn re(v: f64) -> Complex64 {
        Complex64::new(v, 0.0)
    }

    fn state(values: &[f64]) -> Statevector {
        Statevector::from_amplitudes(values.iter().map(|&v| re(v)).collect()).unwrap()
    }

    fn h2_sum() -> PauliSum {
        PauliSum::from_text("-1.0431 0 I\n-0.7835 0 Z\n0.1814 0 X\n").unwrap()
    }

    #[test]
    fn init_zero_examples() {
        assert_eq!(
            Statevector::init_zero(1).unwrap().amplitudes(),
            &[re(1.0), re(0.0)]
        );
        assert_eq!(Statevector::init_zero(2).unwrap().amplitudes().len(), 4);
        let big = Statevector::init_zero(12).unwrap();
        assert_eq!(big.amplitudes().len(), 4096);
        assert_eq!(big.amplitudes()[0], re(1.0));
        assert!(matches!(
            Statevector::init_zero(0),
            Err(SimulationError::QubitGuard { .. })
        ));
        assert!(matches!(
            Statevector::init_zero(25),
            Err(SimulationError::QubitGuard { .. })
        ));
    }

    #[test]
    fn ry_examples() {
        let s = apply_gate(
            Statevector::init_zero(1).unwrap(),
            GateOp::Ry {
                angle: PI,
                target: 0,
            },
        )
        .unwrap();
        assert!((s.amplitudes()[0]).norm() < 1e-12);
        assert!((s.amplitudes()[1] - re(1.0)).norm() < 1e-12);
        let theta = 0.7;
        let s = apply_gate(
            Statevector::init_zero(1).unwrap(),
            GateOp::Ry {
                angle: theta,
                target: 0,
            },
        )
        .unwrap();
        assert!((s.amplitudes()[0] - re((theta / 2.0).cos())).norm() < 1e-15);
        assert!((s.amplitudes()[1] - re((theta / 2.0).sin())).norm() < 1e-15);
    }

    #[test]
    fn cnot_follows_little_endian_permutation() {
        // Index 1 has qubit 0 set; CNOT(0->1) maps |01> (index 1) to index 3.
        let s = apply_gate(
            state(&[0., 1., 0., 0.]),
            GateOp::Cnot {
                control: 0,
                target: 1,
            },
        )
        .unwrap();
        assert_eq!(s.amplitudes(), state(&[0., 0., 0., 1.]).amplitudes());
        // Permutation-matrix oracle on every basis state.
        for k in 0..4 {
            let mut v = [0.0; 4];
            v[k] = 1.0;
            let out = apply_gate(
                state(&v),
                GateOp::Cnot {
                    control: 0,
                    target: 1,
                },
            )
            .unwrap();
            let expected = if k & 1 == 1 { k ^ 2 } else { k };
            assert_eq!(out.amplitudes()[expected], re(1.0));
        }
    }

    #[test]
    fn gate_index_errors() {
        let mut s = Statevector::init_zero(2).unwrap();
        assert!(matches!(
            s.apply(GateOp::Ry {
                angle: 1.0,
                target: 2
            }),
            Err(SimulationError::QubitIndex { .. })
        ));
        assert!(matches!(
            s.apply(GateOp::Cnot {
                control: 1,
                target: 1
            }),
            Err(SimulationError::CnotSameQubit(1))
        ));
    }

    #[test]
    fn h2_diagonal_expectations() {
        let e0 = exact_expectation(&state(&[1., 0.]), &h2_sum()).unwrap();
        assert!((e0 - -1.8266).abs() < 1e-12);
        let e1 = exact_expectation(&state(&[0., 1.]), &h2_sum()).unwrap();
        assert!((e1 - -0.2596).abs() < 1e-12);
        let three = Statevector::init_zero(3).unwrap();
        assert!(matches!(
            exact_expectation(&three, &h2_sum()),
            Err(SimulationError::QubitMismatch {
                state: 3,
                operator: 1
            })
        ));
    }

    #[test]
    fn y_expectation_on_complex_state() {
        // |+i> = (|0> + i|1>)/sqrt 2 has <Y> = 1.
        let h = 0.5f64.sqrt();
        let s = Statevector::from_amplitudes(vec![re(h), Complex64::new(0.0, h)]).unwrap();
        let y: PauliString = "Y".parse().unwrap();
        assert!((pauli_expectation(&s, &y) - re(1.0)).norm() < 1e-15);
    }

    #[test]
    fn expectation_matches_dense_quadratic_form() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let n = 8;
        let mut values = vec![Complex64::default(); n * n];
        for r in 0..n {
            for c in r..n {
                let v = if r == c {
                    re(rng.random_range(-1.0..1.0))
                } else {
                    Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
                };
                values[r * n + c] = v;
                values[c * n + r] = v.conj();
            }
        }
        let m = HermitianMatrix::from_dense(n, &values).unwrap();
        let sum = encode_matrix(&m, BitEncoding::new(3).unwrap(), PaddingPolicy::Reject).unwrap();
        let mut amps: Vec<Complex64> = (0..n)
            .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        amps.iter_mut().for_each(|a| *a /= norm);
        let dense = m.to_dense();
        let v = nalgebra::DVector::from_vec(amps.clone());
        let oracle = (v.adjoint() * &dense * &v)[(0, 0)].re;
        let s = Statevector::from_amplitudes(amps).unwrap();
        assert!((exact_expectation(&s, &sum).unwrap() - oracle).abs() < 1e-10);
    }
}
