//! Classical reference: exact groundstates and configuration selection.
//!
//! Small matrices are diagonalised densely (real symmetric fast path,
//! complex Hermitian otherwise). Large ones use Lanczos with full
//! reorthogonalisation, restarted from the current Ritz vector and started
//! from the first basis vector (the Hartree–Fock determinant).

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::matrix::{FixtureError, HermitianMatrix, MatrixFixture};
use crate::pauli::{required_qubits, PaddingPolicy};

/// Largest matrix handled by the dense path.
pub const MAX_DENSE_DIMENSION: usize = 16_384;
/// Automatic dispatch switches to Lanczos above this size.
pub const DENSE_DISPATCH_LIMIT: usize = 1_024;

const KRYLOV_DIMENSION: usize = 80;
const MAX_RESTARTS: usize = 500;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("dimension {dimension} exceeds the dense eigensolver limit {MAX_DENSE_DIMENSION}")]
    TooLarge { dimension: usize },
    #[error("Lanczos did not converge after {restarts} restarts (residual {residual:e})")]
    NotConverged { restarts: usize, residual: f64 },
    #[error(transparent)]
    Fixture(#[from] FixtureError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EigenMethod {
    Dense,
    Iterative,
}

/// Lowest eigenpair of a Hermitian matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundstateSolution {
    pub energy: f64,
    pub eigenvector: Vec<Complex64>,
    pub method: EigenMethod,
}

impl GroundstateSolution {
    /// `|v_k|` for every component.
    pub fn weights(&self) -> Vec<f64> {
        self.eigenvector.iter().map(|v| v.norm()).collect()
    }

    /// `‖M v − E v‖`.
    pub fn residual(&self, matrix: &HermitianMatrix) -> f64 {
        let mut mv = vec![Complex64::default(); matrix.dimension()];
        matrix.matvec(&self.eigenvector, &mut mv);
        mv.iter()
            .zip(&self.eigenvector)
            .map(|(a, v)| (a - v * self.energy).norm_sqr())
            .sum::<f64>()
            .sqrt()
    }
}

/// A spectral-norm bound used to scale tolerances.
pub fn norm_bound(matrix: &HermitianMatrix) -> f64 {
    matrix
        .gershgorin_upper()
        .abs()
        .max(matrix.gershgorin_lower().abs())
        .max(f64::MIN_POSITIVE)
}

/// Lowest eigenpair, dense for `D ≤ 1024` and Lanczos beyond.
pub fn exact_ground(matrix: &HermitianMatrix) -> Result<GroundstateSolution, OracleError> {
    let method = if matrix.dimension() <= DENSE_DISPATCH_LIMIT {
        EigenMethod::Dense
    } else {
        EigenMethod::Iterative
    };
    exact_ground_with(matrix, method)
}

pub fn exact_ground_with(
    matrix: &HermitianMatrix,
    method: EigenMethod,
) -> Result<GroundstateSolution, OracleError> {
    match method {
        EigenMethod::Dense => dense_ground(matrix),
        EigenMethod::Iterative => lanczos_ground(matrix),
    }
}

/// Fixes the arbitrary phase: the largest-magnitude component is made real
/// and positive (first index on ties).
fn fix_phase(v: &mut [Complex64]) {
    let mut pivot = 0;
    for (k, a) in v.iter().enumerate() {
        if a.norm() > v[pivot].norm() * (1.0 + 1e-12) {
            pivot = k;
        }
    }
    let norm = v[pivot].norm();
    if norm > 0.0 {
        let phase = v[pivot].conj() / norm;
        v.iter_mut().for_each(|a| *a *= phase);
    }
}

fn dense_ground(matrix: &HermitianMatrix) -> Result<GroundstateSolution, OracleError> {
    let dimension = matrix.dimension();
    if dimension > MAX_DENSE_DIMENSION {
        return Err(OracleError::TooLarge { dimension });
    }
    let (energy, mut eigenvector) = if matrix.is_real() {
        let eig = SymmetricEigen::new(matrix.to_dense_real());
        let i = eig.eigenvalues.argmin().0;
        let v: Vec<Complex64> = eig
            .eigenvectors
            .column(i)
            .iter()
            .map(|&x| Complex64::new(x, 0.0))
            .collect();
        (eig.eigenvalues[i], v)
    } else {
        let eig = SymmetricEigen::new(matrix.to_dense());
        let i = eig.eigenvalues.argmin().0;
        (
            eig.eigenvalues[i],
            eig.eigenvectors.column(i).iter().copied().collect(),
        )
    };
    fix_phase(&mut eigenvector);
    Ok(GroundstateSolution {
        energy,
        eigenvector,
        method: EigenMethod::Dense,
    })
}

fn lanczos_ground(matrix: &HermitianMatrix) -> Result<GroundstateSolution, OracleError> {
    let n = matrix.dimension();
    let scale = norm_bound(matrix);
    let tolerance = 1e-10 * scale;
    let krylov = KRYLOV_DIMENSION.min(n);

    let mut start = vec![Complex64::default(); n];
    start[0] = Complex64::new(1.0, 0.0);
    let mut residual = f64::INFINITY;
    let mut w = vec![Complex64::default(); n];

    for _ in 0..MAX_RESTARTS {
        let mut basis: Vec<DVector<Complex64>> = vec![DVector::from_vec(start.clone())];
        let mut alphas = Vec::with_capacity(krylov);
        let mut betas: Vec<f64> = Vec::with_capacity(krylov);
        for j in 0..krylov {
            matrix.matvec(basis[j].as_slice(), &mut w);
            let mut wv = DVector::from_column_slice(&w);
            alphas.push(basis[j].dotc(&wv).re);
            // Two passes of Gram-Schmidt against the whole basis.
            for _ in 0..2 {
                for b in &basis {
                    let overlap = b.dotc(&wv);
                    wv.axpy(-overlap, b, Complex64::new(1.0, 0.0));
                }
            }
            let beta = wv.norm();
            if j + 1 == krylov || beta <= 1e-12 * scale {
                break;
            }
            betas.push(beta);
            basis.push(wv.unscale(beta));
        }
        let m = alphas.len();
        let tridiagonal = DMatrix::from_fn(m, m, |r, c| {
            if r == c {
                alphas[r]
            } else if r + 1 == c {
                betas[r]
            } else if c + 1 == r {
                betas[c]
            } else {
                0.0
            }
        });
        let eig = SymmetricEigen::new(tridiagonal);
        let i = eig.eigenvalues.argmin().0;
        let theta = eig.eigenvalues[i];
        let mut ritz = DVector::<Complex64>::zeros(n);
        for (k, b) in basis.iter().enumerate().take(m) {
            ritz.axpy(
                Complex64::new(eig.eigenvectors[(k, i)], 0.0),
                b,
                Complex64::new(1.0, 0.0),
            );
        }
        let norm = ritz.norm();
        ritz.unscale_mut(norm);
        start = ritz.as_slice().to_vec();
        let candidate = GroundstateSolution {
            energy: theta,
            eigenvector: start.clone(),
            method: EigenMethod::Iterative,
        };
        residual = candidate.residual(matrix);
        if residual < tolerance {
            let mut solution = candidate;
            fix_phase(&mut solution.eigenvector);
            return Ok(solution);
        }
    }
    Err(OracleError::NotConverged {
        restarts: MAX_RESTARTS,
        residual,
    })
}

/// Ordering by descending `|amplitude|`, ties by ascending index.
pub fn rank_configurations(amplitudes: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..amplitudes.len()).collect();
    order.sort_by(|&a, &b| {
        amplitudes[b]
            .abs()
            .total_cmp(&amplitudes[a].abs())
            .then(a.cmp(&b))
    });
    order
}

/// Lowest eigenvalue without the eigenvector. Small matrices skip the
/// eigenvector accumulation, which is most of the cost of a dense solve.
pub fn ground_energy(matrix: &HermitianMatrix) -> Result<f64, OracleError> {
    if matrix.dimension() > DENSE_DISPATCH_LIMIT {
        return Ok(exact_ground(matrix)?.energy);
    }
    let eigenvalues = if matrix.is_real() {
        matrix.to_dense_real().symmetric_eigenvalues()
    } else {
        matrix.to_dense().symmetric_eigenvalues()
    };
    Ok(eigenvalues.min())
}

/// Lowest eigenvalue of each leading principal submatrix of `ordering`.
pub fn nested_subset_energies(
    matrix: &HermitianMatrix,
    ordering: &[usize],
    sizes: &[usize],
) -> Result<Vec<f64>, OracleError> {
    sizes
        .iter()
        .map(|&size| ground_energy(&matrix.principal_submatrix(ordering, size)?))
        .collect()
}

/// Where the reference energy of a selection comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReferenceKind {
    /// The fixture's stored FCI energy.
    Fci,
    /// The ground energy of the fixture matrix itself.
    SelfReferential,
}

/// One candidate register size tried during selection. Energies are totals
/// (electronic plus nuclear repulsion) in hartree.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelectionStep {
    pub qubits: usize,
    pub determinants: usize,
    pub energy: f64,
    pub error: f64,
}

/// Outcome of doubling the configuration count until the threshold is met.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelectionReport {
    pub ordering: Vec<usize>,
    pub chosen_q: usize,
    pub chosen_count: usize,
    pub achieved_energy: f64,
    pub reference_energy: f64,
    pub reference_kind: ReferenceKind,
    pub threshold: f64,
    /// False when even the largest admissible subset misses the threshold.
    pub reached: bool,
    pub steps: Vec<SelectionStep>,
}

/// Configuration ordering of a fixture: by stored amplitudes, or by the
/// exact groundstate of the full matrix when none are stored.
pub fn fixture_ordering(fixture: &MatrixFixture) -> Result<Vec<usize>, OracleError> {
    Ok(match &fixture.determinants.amplitudes {
        Some(amplitudes) => rank_configurations(amplitudes),
        None => rank_configurations(&exact_ground(&fixture.matrix)?.weights()),
    })
}

/// Smallest `q` whose top-`2^q` configurations reach `threshold` of the
/// reference energy. With [`PaddingPolicy::Reject`] only power-of-two subsets
/// inside the fixture are tried; with padding the full matrix is the final
/// candidate.
pub fn select_minimal_qubits(
    fixture: &MatrixFixture,
    threshold: f64,
    padding: PaddingPolicy,
) -> Result<SelectionReport, OracleError> {
    let matrix = &fixture.matrix;
    let dimension = matrix.dimension();
    let shift = fixture.nuclear_repulsion();
    let ordering = fixture_ordering(fixture)?;
    let (reference_energy, reference_kind) = match fixture.determinants.reference_fci_energy {
        Some(e) => (e, ReferenceKind::Fci),
        None => (
            exact_ground(matrix)?.energy + shift,
            ReferenceKind::SelfReferential,
        ),
    };

    let max_q = match padding {
        PaddingPolicy::Reject if dimension >= 2 => {
            usize::BITS as usize - 1 - dimension.leading_zeros() as usize
        }
        _ => required_qubits(dimension),
    };
    let mut steps = Vec::new();
    for q in 1..=max_q.max(1) {
        let count = (1usize << q).min(dimension);
        let energy = exact_ground(&matrix.principal_submatrix(&ordering, count)?)?.energy + shift;
        let error = (energy - reference_energy).abs();
        steps.push(SelectionStep {
            qubits: q,
            determinants: count,
            energy,
            error,
        });
        if error <= threshold {
            break;
        }
    }
    let last = steps.last().expect("at least one candidate").clone();
    Ok(SelectionReport {
        ordering,
        chosen_q: last.qubits,
        chosen_count: 1 << last.qubits,
        achieved_energy: last.energy,
        reference_energy,
        reference_kind,
        threshold,
        reached: last.error <= threshold,
        steps,
    })
}
