//! RealAmplitudes ansatz with circular CNOT entanglement.
//!
//! Layer 0 is a row of Ry rotations. Each further layer is a CNOT chain
//! `0→1, 1→2, …, (q−1)→0` followed by another row of Ry rotations. Only real
//! gates are used, so amplitudes stay real.

use crate::statevector::{GateOp, SimulationError, Statevector};

/// Layer counts for 1..=7 qubits.
const LAYER_SCHEDULE: [usize; 7] = [0, 1, 2, 3, 5, 11, 18];

/// Shape of a RealAmplitudes circuit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AnsatzSpec {
    pub qubits: usize,
    pub layers: usize,
}

impl AnsatzSpec {
    pub fn new(qubits: usize, layers: usize) -> Self {
        assert!(qubits >= 1, "ansatz needs at least one qubit");
        Self { qubits, layers }
    }

    /// Spec with the default layer count for `qubits`.
    pub fn with_default_layers(qubits: usize) -> Self {
        Self::new(qubits, default_layers(qubits).layers)
    }

    pub fn parameter_count(&self) -> usize {
        self.qubits * (self.layers + 1)
    }

    /// CNOT edges of one entangling layer.
    pub fn entangling_pairs(&self) -> Vec<(usize, usize)> {
        match self.qubits {
            1 => Vec::new(),
            2 => vec![(0, 1)],
            q => (0..q).map(|n| (n, (n + 1) % q)).collect(),
        }
    }

    pub fn cnot_count(&self) -> usize {
        self.layers * self.entangling_pairs().len()
    }

    /// Gate list for the given parameters.
    pub fn build_circuit(&self, params: &[f64]) -> Result<Vec<GateOp>, SimulationError> {
        if params.len() != self.parameter_count() {
            return Err(SimulationError::ParameterCount {
                found: params.len(),
                expected: self.parameter_count(),
            });
        }
        let pairs = self.entangling_pairs();
        let mut gates = Vec::with_capacity(params.len() + self.cnot_count());
        for (layer, angles) in params.chunks(self.qubits).enumerate() {
            if layer > 0 {
                gates.extend(
                    pairs
                        .iter()
                        .map(|&(control, target)| GateOp::Cnot { control, target }),
                );
            }
            gates.extend(
                angles
                    .iter()
                    .enumerate()
                    .map(|(target, &angle)| GateOp::Ry { angle, target }),
            );
        }
        Ok(gates)
    }

    /// Runs the circuit on `|0…0⟩`.
    pub fn prepare_state(&self, params: &[f64]) -> Result<Statevector, SimulationError> {
        let gates = self.build_circuit(params)?;
        let mut state = Statevector::init_zero(self.qubits)?;
        state.apply_all(&gates)?;
        Ok(state)
    }
}

/// Default layer count and whether it lies inside the validated range.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerChoice {
    pub layers: usize,
    pub validated: bool,
}

/// Layer schedule: `{1:0, 2:1, 3:2, 4:3, 5:5, 6:11, 7:18}`. Larger registers
/// continue linearly from the last two points and are flagged unvalidated.
pub fn default_layers(qubits: usize) -> LayerChoice {
    assert!(qubits >= 1);
    match LAYER_SCHEDULE.get(qubits - 1) {
        Some(&layers) => LayerChoice {
            layers,
            validated: true,
        },
        None => {
            let n = LAYER_SCHEDULE.len();
            let slope = LAYER_SCHEDULE[n - 1] - LAYER_SCHEDULE[n - 2];
            LayerChoice {
                layers: LAYER_SCHEDULE[n - 1] + slope * (qubits - n),
                validated: false,
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn counts(gates: &[GateOp]) -> (usize, usize) {
        let ry = gates
            .iter()
            .filter(|g| matches!(g, GateOp::Ry { .. }))
            .count();
        (ry, gates.len() - ry)
    }

    #[test]
    fn gate_counts() {
        let spec = AnsatzSpec::new(4, 2);
        assert_eq!(counts(&spec.build_circuit(&[0.0; 12]).unwrap()), (12, 8));
        assert_eq!(
            counts(&AnsatzSpec::new(3, 0).build_circuit(&[0.0; 3]).unwrap()),
            (3, 0)
        );
        assert_eq!(
            counts(&AnsatzSpec::new(1, 5).build_circuit(&[0.0; 6]).unwrap()),
            (6, 0)
        );
        assert_eq!(
            counts(&AnsatzSpec::new(2, 3).build_circuit(&[0.0; 8]).unwrap()),
            (8, 3)
        );
        let single = AnsatzSpec::new(1, 0).build_circuit(&[0.3]).unwrap();
        assert_eq!(
            single,
            vec![GateOp::Ry {
                angle: 0.3,
                target: 0
            }]
        );
    }

    #[test]
    fn gate_order() {
        let params: Vec<f64> = (0..6).map(f64::from).collect();
        let gates = AnsatzSpec::new(3, 1).build_circuit(&params).unwrap();
        let expected = vec![
            GateOp::Ry {
                angle: 0.0,
                target: 0,
            },
            GateOp::Ry {
                angle: 1.0,
                target: 1,
            },
            GateOp::Ry {
                angle: 2.0,
                target: 2,
            },
            GateOp::Cnot {
                control: 0,
                target: 1,
            },
            GateOp::Cnot {
                control: 1,
                target: 2,
            },
            GateOp::Cnot {
                control: 2,
                target: 0,
            },
            GateOp::Ry {
                angle: 3.0,
                target: 0,
            },
            GateOp::Ry {
                angle: 4.0,
                target: 1,
            },
            GateOp::Ry {
                angle: 5.0,
                target: 2,
            },
        ];
        assert_eq!(gates, expected);
    }

    #[test]
    fn parameter_length_is_checked() {
        assert!(matches!(
            AnsatzSpec::new(2, 1).build_circuit(&[0.0; 3]),
            Err(SimulationError::ParameterCount {
                found: 3,
                expected: 4
            })
        ));
    }

    #[test]
    fn prepare_state_examples() {
        let s = AnsatzSpec::new(1, 0).prepare_state(&[0.0]).unwrap();
        assert_eq!(s, Statevector::init_zero(1).unwrap());
        let s = AnsatzSpec::new(1, 0).prepare_state(&[1.1]).unwrap();
        assert!((s.amplitudes()[0].re - 0.55f64.cos()).abs() < 1e-15);
        assert!((s.amplitudes()[1].re - 0.55f64.sin()).abs() < 1e-15);
        let s = AnsatzSpec::new(2, 1).prepare_state(&[0.0; 4]).unwrap();
        assert_eq!(s, Statevector::init_zero(2).unwrap());
    }

    #[test]
    fn layer_schedule() {
        let layers: Vec<usize> = (1..=7).map(|q| default_layers(q).layers).collect();
        assert_eq!(layers, [0, 1, 2, 3, 5, 11, 18]);
        assert!((1..=7).all(|q| default_layers(q).validated));
        assert_eq!(
            default_layers(8),
            LayerChoice {
                layers: 25,
                validated: false
            }
        );
        assert_eq!(default_layers(12).layers, 53);
    }
}
