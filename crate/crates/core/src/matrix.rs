//! Hermitian matrix model, determinant bookkeeping and the `VQSCI-FIX v1`
//! fixture format.
//!
//! A fixture is a single JSON document:
//!
//! ```text
//! { "version": 1, "dimension": D, "storage": "sparse" | "dense",
//!   "entries": [[j, k, re, im], ...]          // sparse
//!            | [[re, im], ...],                // dense, row-major, D*D pairs
//!   "determinant_labels": [...], "amplitudes": [...]?,
//!   "n_electrons"?, "n_spin_orbitals"?, "nuclear_repulsion"?,
//!   "reference_fci_energy"?, "provenance": { "key": "value" } }
//! ```
//!
//! Sparse files list the diagonal and one element of each conjugate pair;
//! the loader mirrors the other half. Listing both halves is accepted when
//! they agree.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance for `entry(j,k) == conj(entry(k,j))` and real diagonals.
pub const HERMITIAN_TOL: f64 = 1e-12;

const FIXTURE_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum FixtureError {
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed fixture: {0}")]
    Parse(String),
    #[error("entry ({row},{col}) is out of range for dimension {dimension}")]
    IndexOutOfRange {
        row: usize,
        col: usize,
        dimension: usize,
    },
    #[error("entry ({row},{col}) is listed twice")]
    DuplicateEntry { row: usize, col: usize },
    #[error("matrix is not Hermitian at pair ({row},{col}): |a_jk - conj(a_kj)| = {mismatch:e}")]
    NotHermitian {
        row: usize,
        col: usize,
        mismatch: f64,
    },
    #[error("diagonal entry ({index},{index}) has imaginary part {imag:e}")]
    ComplexDiagonal { index: usize, imag: f64 },
    #[error("dimension mismatch: {what} has length {found}, expected {expected}")]
    DimensionMismatch {
        what: &'static str,
        found: usize,
        expected: usize,
    },
    #[error("amplitudes are not normalised: sum of squares = {0}")]
    AmplitudeNorm(f64),
    #[error("principal submatrix: {0}")]
    Submatrix(String),
}

/// How a matrix is written to disk.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StorageKind {
    Dense,
    Sparse,
}

/// A Hermitian matrix stored as its nonzero entries (both triangles),
/// sorted row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix {
    dimension: usize,
    storage: StorageKind,
    entries: Vec<(usize, usize, Complex64)>,
}

impl HermitianMatrix {
    /// Builds a matrix from a full list of entries. Every off-diagonal entry
    /// may be given once (its mirror is filled in) or twice (the two must be
    /// conjugate). Zero entries are dropped.
    pub fn from_entries(
        dimension: usize,
        entries: impl IntoIterator<Item = (usize, usize, Complex64)>,
    ) -> Result<Self, FixtureError> {
        if dimension == 0 {
            return Err(FixtureError::Parse("dimension must be positive".into()));
        }
        let mut map: BTreeMap<(usize, usize), Complex64> = BTreeMap::new();
        for (row, col, value) in entries {
            if row >= dimension || col >= dimension {
                return Err(FixtureError::IndexOutOfRange {
                    row,
                    col,
                    dimension,
                });
            }
            if map.insert((row, col), value).is_some() {
                return Err(FixtureError::DuplicateEntry { row, col });
            }
        }
        let mut full = map.clone();
        for (&(row, col), &value) in &map {
            if row == col {
                if value.im.abs() >= HERMITIAN_TOL {
                    return Err(FixtureError::ComplexDiagonal {
                        index: row,
                        imag: value.im,
                    });
                }
                full.insert((row, col), Complex64::new(value.re, 0.0));
                continue;
            }
            match map.get(&(col, row)) {
                Some(mirror) => {
                    let mismatch = (value - mirror.conj()).norm();
                    if mismatch >= HERMITIAN_TOL {
                        let (a, b) = (row.min(col), row.max(col));
                        return Err(FixtureError::NotHermitian {
                            row: a,
                            col: b,
                            mismatch,
                        });
                    }
                }
                None => {
                    full.insert((col, row), value.conj());
                }
            }
        }
        Ok(Self {
            dimension,
            storage: StorageKind::Sparse,
            entries: full
                .into_iter()
                .filter(|(_, v)| v.norm_sqr() > 0.0)
                .map(|((r, c), v)| (r, c, v))
                .collect(),
        })
    }

    /// Builds a matrix from a row-major dense array of `dimension^2` values.
    pub fn from_dense(dimension: usize, values: &[Complex64]) -> Result<Self, FixtureError> {
        if values.len() != dimension * dimension {
            return Err(FixtureError::DimensionMismatch {
                what: "dense entries",
                found: values.len(),
                expected: dimension * dimension,
            });
        }
        let entries = values
            .iter()
            .enumerate()
            .map(|(i, &v)| (i / dimension, i % dimension, v));
        let mut m = Self::from_entries(dimension, entries)?;
        m.storage = StorageKind::Dense;
        Ok(m)
    }

    /// Real symmetric matrix from row-major values.
    pub fn from_real_dense(dimension: usize, values: &[f64]) -> Result<Self, FixtureError> {
        let complex: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        Self::from_dense(dimension, &complex)
    }

    /// Copies a nalgebra matrix, validating Hermiticity.
    pub fn from_nalgebra(matrix: &DMatrix<Complex64>) -> Result<Self, FixtureError> {
        let n = matrix.nrows();
        if matrix.ncols() != n {
            return Err(FixtureError::DimensionMismatch {
                what: "columns",
                found: matrix.ncols(),
                expected: n,
            });
        }
        let entries = (0..n).flat_map(|r| (0..n).map(move |c| (r, c, matrix[(r, c)])));
        Self::from_entries(n, entries)
    }

    pub fn identity(dimension: usize) -> Self {
        Self {
            dimension,
            storage: StorageKind::Sparse,
            entries: (0..dimension)
                .map(|i| (i, i, Complex64::new(1.0, 0.0)))
                .collect(),
        }
    }

    pub fn with_storage(mut self, storage: StorageKind) -> Self {
        self.storage = storage;
        self
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn storage(&self) -> StorageKind {
        self.storage
    }

    /// Nonzero entries, both triangles, row-major.
    pub fn nonzeros(&self) -> &[(usize, usize, Complex64)] {
        &self.entries
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.entries
            .binary_search_by(|&(r, c, _)| (r, c).cmp(&(row, col)))
            .map(|i| self.entries[i].2)
            .unwrap_or_default()
    }

    pub fn is_real(&self) -> bool {
        self.entries.iter().all(|(_, _, v)| v.im == 0.0)
    }

    pub fn max_abs_entry(&self) -> f64 {
        self.entries
            .iter()
            .map(|(_, _, v)| v.norm())
            .fold(0.0, f64::max)
    }

    pub fn to_dense(&self) -> DMatrix<Complex64> {
        let mut m = DMatrix::zeros(self.dimension, self.dimension);
        for &(r, c, v) in &self.entries {
            m[(r, c)] = v;
        }
        m
    }

    /// Real part as a dense matrix; exact for real symmetric inputs.
    pub fn to_dense_real(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.dimension, self.dimension);
        for &(r, c, v) in &self.entries {
            m[(r, c)] = v.re;
        }
        m
    }

    /// `y = M x`.
    pub fn matvec(&self, x: &[Complex64], y: &mut [Complex64]) {
        y.iter_mut().for_each(|v| *v = Complex64::default());
        for &(r, c, v) in &self.entries {
            y[r] += v * x[c];
        }
    }

    /// `y = M x` using the real parts only.
    pub fn matvec_real(&self, x: &[f64], y: &mut [f64]) {
        y.iter_mut().for_each(|v| *v = 0.0);
        for &(r, c, v) in &self.entries {
            y[r] += v.re * x[c];
        }
    }

    /// Upper bound on the spectrum from Gershgorin discs.
    pub fn gershgorin_upper(&self) -> f64 {
        let mut bound = vec![0.0; self.dimension];
        for &(r, c, v) in &self.entries {
            bound[r] += if r == c { v.re } else { v.norm() };
        }
        bound.into_iter().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Lower bound on the spectrum from Gershgorin discs.
    pub fn gershgorin_lower(&self) -> f64 {
        let mut bound = vec![0.0; self.dimension];
        for &(r, c, v) in &self.entries {
            bound[r] += if r == c { v.re } else { -v.norm() };
        }
        bound.into_iter().fold(f64::INFINITY, f64::min)
    }

    /// Conjugate transpose (equal to `self` up to rounding, kept for checks).
    pub fn adjoint(&self) -> Self {
        let mut entries: Vec<_> = self
            .entries
            .iter()
            .map(|&(r, c, v)| (c, r, v.conj()))
            .collect();
        entries.sort_by_key(|&(r, c, _)| (r, c));
        Self {
            dimension: self.dimension,
            storage: self.storage,
            entries,
        }
    }

    /// Principal submatrix: entry `(a, b)` of the result is
    /// `self[ordering[a], ordering[b]]` for `a, b < size`.
    pub fn principal_submatrix(
        &self,
        ordering: &[usize],
        size: usize,
    ) -> Result<Self, FixtureError> {
        check_permutation(ordering, self.dimension)?;
        if size == 0 || size > self.dimension {
            return Err(FixtureError::Submatrix(format!(
                "size {size} must lie in 1..={}",
                self.dimension
            )));
        }
        let mut position = vec![usize::MAX; self.dimension];
        for (a, &original) in ordering[..size].iter().enumerate() {
            position[original] = a;
        }
        let mut entries: Vec<_> = self
            .entries
            .iter()
            .filter_map(|&(r, c, v)| {
                let (a, b) = (position[r], position[c]);
                (a != usize::MAX && b != usize::MAX).then_some((a, b, v))
            })
            .collect();
        entries.sort_by_key(|&(r, c, _)| (r, c));
        Ok(Self {
            dimension: size,
            storage: self.storage,
            entries,
        })
    }

    /// Embeds the matrix in a larger one with `value` on the new diagonal
    /// slots and zero coupling.
    pub fn padded(&self, dimension: usize, value: f64) -> Self {
        assert!(dimension >= self.dimension);
        let mut entries = self.entries.clone();
        entries.extend((self.dimension..dimension).map(|i| (i, i, Complex64::new(value, 0.0))));
        Self {
            dimension,
            storage: self.storage,
            entries,
        }
    }

    /// Scaled sum `alpha * self + beta * other`.
    pub fn linear_combination(&self, alpha: f64, other: &Self, beta: f64) -> Self {
        assert_eq!(self.dimension, other.dimension);
        let mut map: BTreeMap<(usize, usize), Complex64> = BTreeMap::new();
        for &(r, c, v) in &self.entries {
            *map.entry((r, c)).or_default() += v * alpha;
        }
        for &(r, c, v) in &other.entries {
            *map.entry((r, c)).or_default() += v * beta;
        }
        Self {
            dimension: self.dimension,
            storage: self.storage,
            entries: map
                .into_iter()
                .filter(|(_, v)| v.norm_sqr() > 0.0)
                .map(|((r, c), v)| (r, c, v))
                .collect(),
        }
    }
}

pub(crate) fn check_permutation(ordering: &[usize], dimension: usize) -> Result<(), FixtureError> {
    if ordering.len() != dimension {
        return Err(FixtureError::Submatrix(format!(
            "ordering has length {}, expected {dimension}",
            ordering.len()
        )));
    }
    let mut seen = vec![false; dimension];
    for &i in ordering {
        if i >= dimension || std::mem::replace(&mut seen[i], true) {
            return Err(FixtureError::Submatrix(format!(
                "ordering is not a permutation of 0..{dimension} (index {i})"
            )));
        }
    }
    Ok(())
}

/// Configuration labels and optional groundstate weights.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DeterminantSet {
    pub labels: Vec<String>,
    pub amplitudes: Option<Vec<f64>>,
    pub n_electrons: Option<u32>,
    pub n_spin_orbitals: Option<u32>,
    pub nuclear_repulsion: Option<f64>,
    pub reference_fci_energy: Option<f64>,
}

impl DeterminantSet {
    /// Generic labels `"0"`, `"1"`, ... for matrices without chemistry.
    pub fn anonymous(dimension: usize) -> Self {
        Self {
            labels: (0..dimension).map(|i| i.to_string()).collect(),
            ..Default::default()
        }
    }

    fn validate(&self, dimension: usize) -> Result<(), FixtureError> {
        if self.labels.len() != dimension {
            return Err(FixtureError::DimensionMismatch {
                what: "determinant_labels",
                found: self.labels.len(),
                expected: dimension,
            });
        }
        if let Some(amps) = &self.amplitudes {
            if amps.len() != dimension {
                return Err(FixtureError::DimensionMismatch {
                    what: "amplitudes",
                    found: amps.len(),
                    expected: dimension,
                });
            }
            let norm: f64 = amps.iter().map(|a| a * a).sum();
            if (norm - 1.0).abs() > 1e-6 {
                return Err(FixtureError::AmplitudeNorm(norm));
            }
        }
        Ok(())
    }
}

/// A matrix with its determinant metadata and free-form provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixFixture {
    pub matrix: HermitianMatrix,
    pub determinants: DeterminantSet,
    pub provenance: BTreeMap<String, String>,
}

impl MatrixFixture {
    pub fn new(
        matrix: HermitianMatrix,
        determinants: DeterminantSet,
        provenance: BTreeMap<String, String>,
    ) -> Result<Self, FixtureError> {
        determinants.validate(matrix.dimension())?;
        Ok(Self {
            matrix,
            determinants,
            provenance,
        })
    }

    pub fn dimension(&self) -> usize {
        self.matrix.dimension()
    }

    pub fn nuclear_repulsion(&self) -> f64 {
        self.determinants.nuclear_repulsion.unwrap_or(0.0)
    }

    /// Free-form provenance value parsed as a number, e.g. a bond length.
    pub fn provenance_f64(&self, key: &str) -> Option<f64> {
        self.provenance.get(key).and_then(|v| v.trim().parse().ok())
    }

    pub fn name(&self) -> &str {
        self.provenance
            .get("molecule")
            .map(String::as_str)
            .unwrap_or("matrix")
    }
}

#[derive(Serialize, Deserialize)]
struct FixtureFile {
    version: u32,
    dimension: usize,
    storage: StorageKind,
    entries: Vec<Vec<serde_json::Value>>,
    determinant_labels: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    amplitudes: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    n_electrons: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    n_spin_orbitals: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    nuclear_repulsion: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    reference_fci_energy: Option<f64>,
    #[serde(default)]
    provenance: BTreeMap<String, String>,
}

fn as_index(v: &serde_json::Value, what: &str) -> Result<usize, FixtureError> {
    v.as_u64().map(|i| i as usize).ok_or_else(|| {
        FixtureError::Parse(format!("{what} must be a non-negative integer, got {v}"))
    })
}

fn as_real(v: &serde_json::Value, what: &str) -> Result<f64, FixtureError> {
    v.as_f64()
        .ok_or_else(|| FixtureError::Parse(format!("{what} must be a number, got {v}")))
}

/// Parses a fixture document from text.
pub fn parse_fixture(text: &str) -> Result<MatrixFixture, FixtureError> {
    let file: FixtureFile =
        serde_json::from_str(text).map_err(|e| FixtureError::Parse(e.to_string()))?;
    if file.version != FIXTURE_VERSION {
        return Err(FixtureError::Parse(format!(
            "unsupported version {} (expected {FIXTURE_VERSION})",
            file.version
        )));
    }
    let matrix = match file.storage {
        StorageKind::Sparse => {
            let entries = file
                .entries
                .iter()
                .enumerate()
                .map(|(n, e)| {
                    if e.len() != 4 {
                        return Err(FixtureError::Parse(format!(
                            "sparse entry {n} must be [j, k, re, im]"
                        )));
                    }
                    Ok((
                        as_index(&e[0], "row index")?,
                        as_index(&e[1], "column index")?,
                        Complex64::new(as_real(&e[2], "re")?, as_real(&e[3], "im")?),
                    ))
                })
                .collect::<Result<Vec<_>, _>>()?;
            HermitianMatrix::from_entries(file.dimension, entries)?
        }
        StorageKind::Dense => {
            let values = file
                .entries
                .iter()
                .enumerate()
                .map(|(n, e)| {
                    if e.len() != 2 {
                        return Err(FixtureError::Parse(format!(
                            "dense entry {n} must be [re, im]"
                        )));
                    }
                    Ok(Complex64::new(as_real(&e[0], "re")?, as_real(&e[1], "im")?))
                })
                .collect::<Result<Vec<_>, _>>()?;
            HermitianMatrix::from_dense(file.dimension, &values)?
        }
    };
    let determinants = DeterminantSet {
        labels: file.determinant_labels,
        amplitudes: file.amplitudes,
        n_electrons: file.n_electrons,
        n_spin_orbitals: file.n_spin_orbitals,
        nuclear_repulsion: file.nuclear_repulsion,
        reference_fci_energy: file.reference_fci_energy,
    };
    MatrixFixture::new(matrix, determinants, file.provenance)
}

/// Serialises a fixture to its text form.
pub fn fixture_to_string(fixture: &MatrixFixture) -> String {
    let m = &fixture.matrix;
    let num = |x: f64| serde_json::Value::from(x);
    let entries = match m.storage() {
        StorageKind::Sparse => m
            .nonzeros()
            .iter()
            .filter(|&&(r, c, _)| r <= c)
            .map(|&(r, c, v)| vec![r.into(), c.into(), num(v.re), num(v.im)])
            .collect(),
        StorageKind::Dense => {
            let dense = m.to_dense();
            let n = m.dimension();
            (0..n * n)
                .map(|i| {
                    let v = dense[(i / n, i % n)];
                    vec![num(v.re), num(v.im)]
                })
                .collect()
        }
    };
    let d = &fixture.determinants;
    let file = FixtureFile {
        version: FIXTURE_VERSION,
        dimension: m.dimension(),
        storage: m.storage(),
        entries,
        determinant_labels: d.labels.clone(),
        amplitudes: d.amplitudes.clone(),
        n_electrons: d.n_electrons,
        n_spin_orbitals: d.n_spin_orbitals,
        nuclear_repulsion: d.nuclear_repulsion,
        reference_fci_energy: d.reference_fci_energy,
        provenance: fixture.provenance.clone(),
    };
    // serde_json writes the shortest decimal that round-trips each f64.
    serde_json::to_string(&file).expect("fixture serialisation cannot fail") + "\n"
}

pub fn load_fixture(path: impl AsRef<Path>) -> Result<MatrixFixture, FixtureError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| FixtureError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_fixture(&text)
}

pub fn save_fixture(fixture: &MatrixFixture, path: impl AsRef<Path>) -> Result<(), FixtureError> {
    let path = path.as_ref();
    fs::write(path, fixture_to_string(fixture)).map_err(|source| FixtureError::Io {
        path: path.to_path_buf(),
        source,
    })
}
