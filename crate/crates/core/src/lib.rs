//! Variational quantum selected-configuration-interaction (VQ-SCI) on a
//! classical statevector simulator.
//!
//! The pipeline ranks the configurations of a Hermitian (CI) matrix, keeps
//! the `2^q` most significant ones, encodes matrix indices onto `q` qubits
//! with a little-endian binary encoding, decomposes the resulting operator
//! into Pauli strings, and minimises its expectation value over a
//! RealAmplitudes circuit. Energies can be evaluated exactly or from
//! simulated shots with optional readout noise and calibration-matrix
//! mitigation. A dense/Lanczos eigensolver serves as the classical oracle.
//!
//! Module map:
//!
//! - [`matrix`]: Hermitian matrix model and the `VQSCI-FIX v1` fixture format.
//! - [`pauli`]: index-operator encoding of a matrix into a [`pauli::PauliSum`].
//! - [`statevector`]: Ry/CNOT statevector engine and exact expectations.
//! - [`ansatz`]: RealAmplitudes circuit with circular entanglement.
//! - [`measurement`]: shot sampling, readout noise and mitigation.
//! - [`optimizer`]: COBYLA-style trust region and Nelder–Mead minimisers.
//! - [`oracle`]: exact groundstate solver and configuration selection.
//! - [`resources`]: qubit, determinant and Pauli-string counting.
//! - [`driver`]: end-to-end runs, dissociation curves, convergence studies.

pub mod ansatz;
pub mod driver;
pub mod error;
pub mod matrix;
pub mod measurement;
pub mod optimizer;
pub mod oracle;
pub mod pauli;
pub mod resources;
pub mod statevector;

pub use error::{Error, Result};
pub use num_complex::Complex64;

/// Chemical accuracy in Hartree.
pub const CHEMICAL_ACCURACY: f64 = 0.0016;
