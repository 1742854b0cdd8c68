//! Index-operator encoding of a Hermitian matrix into a sum of Pauli strings.
//!
//! Matrix index `k` is mapped to the computational basis state `|k⟩` with a
//! little-endian binary encoding: qubit `j` carries the bit of weight `2^j`.
//! Each elementary matrix `|j⟩⟨k|` is a tensor product of single-qubit
//! projectors and transitions,
//!
//! ```text
//! |0⟩⟨0| = (I+Z)/2   |0⟩⟨1| = (X+iY)/2   |1⟩⟨0| = (X-iY)/2   |1⟩⟨1| = (I-Z)/2
//! ```
//!
//! and expands into `2^q` Pauli strings, all with X/Y support on the bits
//! where `j` and `k` differ.
//!
//! A Pauli string is stored as two bit masks `(x, z)`: qubit `n` carries `I`
//! for `(0,0)`, `X` for `(1,0)`, `Z` for `(0,1)` and `Y` for `(1,1)`. With
//! this convention
//!
//! ```text
//! P(x,z)|k⟩ = i^{|x∧z|} (-1)^{|z∧k|} |k ⊕ x⟩
//! ```
//!
//! and the coefficient of `P(j⊕k, s)` in `|j⟩⟨k|` is
//! `2^-q (-1)^{|s∧j|} i^{|s∧(j⊕k)|}`.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use thiserror::Error;

use crate::matrix::HermitianMatrix;

/// Largest register a Pauli mask can describe.
pub const MAX_MASK_QUBITS: usize = 62;
/// Size guard for [`reconstruct_dense`].
pub const MAX_RECONSTRUCT_QUBITS: usize = 12;
/// Terms below this magnitude, relative to the largest matrix entry, are
/// dropped after like terms are combined.
pub const DROP_THRESHOLD: f64 = 1e-14;

#[derive(Debug, Error)]
pub enum EncodingError {
    #[error("matrix dimension {dimension} does not fit in {qubits} qubits")]
    RegisterTooSmall { dimension: usize, qubits: usize },
    #[error(
        "matrix dimension {dimension} is smaller than 2^{qubits}; padding policy 'reject' requires D = 2^q"
    )]
    PaddingRejected { dimension: usize, qubits: usize },
    #[error("basis index {index} is out of range for {qubits} qubits")]
    IndexOutOfRange { index: usize, qubits: usize },
    #[error("{qubits} qubits exceeds the limit of {limit}")]
    TooManyQubits { qubits: usize, limit: usize },
    #[error("Pauli sum line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// Single-qubit Pauli operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub fn as_char(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }

    pub fn from_char(c: char) -> Option<Self> {
        match c {
            'I' => Some(Pauli::I),
            'X' => Some(Pauli::X),
            'Y' => Some(Pauli::Y),
            'Z' => Some(Pauli::Z),
            _ => None,
        }
    }

    fn from_bits(x: bool, z: bool) -> Self {
        match (x, z) {
            (false, false) => Pauli::I,
            (true, false) => Pauli::X,
            (true, true) => Pauli::Y,
            (false, true) => Pauli::Z,
        }
    }

    fn bits(self) -> (bool, bool) {
        match self {
            Pauli::I => (false, false),
            Pauli::X => (true, false),
            Pauli::Y => (true, true),
            Pauli::Z => (false, true),
        }
    }
}

/// A tensor product of single-qubit Paulis over `q` qubits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PauliString {
    x: u64,
    z: u64,
    qubits: usize,
}

impl PauliString {
    /// Builds a string from its masks. Bits above `qubits` must be clear.
    pub fn from_masks(x: u64, z: u64, qubits: usize) -> Self {
        assert!(qubits <= MAX_MASK_QUBITS);
        let valid = (1u64 << qubits) - 1;
        assert!(x & !valid == 0 && z & !valid == 0, "mask exceeds register");
        Self { x, z, qubits }
    }

    pub fn identity(qubits: usize) -> Self {
        Self::from_masks(0, 0, qubits)
    }

    pub fn from_axes(axes: &[Pauli]) -> Self {
        let (mut x, mut z) = (0u64, 0u64);
        for (n, p) in axes.iter().enumerate() {
            let (bx, bz) = p.bits();
            x |= (bx as u64) << n;
            z |= (bz as u64) << n;
        }
        Self::from_masks(x, z, axes.len())
    }

    pub fn x_mask(&self) -> u64 {
        self.x
    }

    pub fn z_mask(&self) -> u64 {
        self.z
    }

    pub fn qubits(&self) -> usize {
        self.qubits
    }

    pub fn axis(&self, qubit: usize) -> Pauli {
        Pauli::from_bits(self.x >> qubit & 1 == 1, self.z >> qubit & 1 == 1)
    }

    pub fn axes(&self) -> Vec<Pauli> {
        (0..self.qubits).map(|n| self.axis(n)).collect()
    }

    pub fn is_identity(&self) -> bool {
        self.x == 0 && self.z == 0
    }

    /// Qubits on which the string acts non-trivially.
    pub fn support(&self) -> u64 {
        self.x | self.z
    }

    /// Number of `Y` factors, which sets the phase `i^{|x∧z|}`.
    pub fn y_count(&self) -> u32 {
        (self.x & self.z).count_ones()
    }

    /// Lexicographic key over the axes string (qubit 0 most significant,
    /// `I < X < Y < Z`).
    fn sort_key(&self) -> u128 {
        let mut key = 0u128;
        for n in 0..self.qubits {
            let digit = self.axis(n) as u128;
            key = key << 2 | digit;
        }
        key
    }
}

impl Ord for PauliString {
    fn cmp(&self, other: &Self) -> Ordering {
        self.qubits
            .cmp(&other.qubits)
            .then_with(|| self.sort_key().cmp(&other.sort_key()))
    }
}

impl PartialOrd for PauliString {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for n in 0..self.qubits {
            write!(f, "{}", self.axis(n).as_char())?;
        }
        Ok(())
    }
}

impl FromStr for PauliString {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let axes = s
            .chars()
            .map(|c| Pauli::from_char(c).ok_or_else(|| format!("invalid Pauli axis '{c}'")))
            .collect::<Result<Vec<_>, _>>()?;
        if axes.is_empty() || axes.len() > MAX_MASK_QUBITS {
            return Err(format!(
                "axes string must have 1..={MAX_MASK_QUBITS} letters"
            ));
        }
        Ok(PauliString::from_axes(&axes))
    }
}

/// A weighted Pauli string.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PauliTerm {
    pub coefficient: Complex64,
    pub string: PauliString,
}

impl PauliTerm {
    pub fn new(coefficient: Complex64, string: PauliString) -> Self {
        Self {
            coefficient,
            string,
        }
    }

    pub fn axes(&self) -> Vec<Pauli> {
        self.string.axes()
    }
}

/// Little-endian binary encoding of matrix indices onto `q` qubits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BitEncoding {
    qubits: usize,
}

impl BitEncoding {
    pub fn new(qubits: usize) -> Result<Self, EncodingError> {
        if qubits == 0 || qubits > MAX_MASK_QUBITS {
            return Err(EncodingError::TooManyQubits {
                qubits,
                limit: MAX_MASK_QUBITS,
            });
        }
        Ok(Self { qubits })
    }

    /// Smallest encoding that holds `dimension` indices.
    pub fn for_dimension(dimension: usize) -> Self {
        Self {
            qubits: required_qubits(dimension),
        }
    }

    pub fn qubits(&self) -> usize {
        self.qubits
    }

    pub fn capacity(&self) -> usize {
        1usize << self.qubits
    }

    /// Bit `n` of the returned vector is the state of qubit `n`.
    pub fn index_to_bits(&self, index: usize) -> Vec<bool> {
        (0..self.qubits).map(|n| index >> n & 1 == 1).collect()
    }

    pub fn bits_to_index(&self, bits: &[bool]) -> usize {
        bits.iter()
            .enumerate()
            .map(|(n, &b)| (b as usize) << n)
            .sum()
    }

    fn check_index(&self, index: usize) -> Result<(), EncodingError> {
        if index >= self.capacity() {
            return Err(EncodingError::IndexOutOfRange {
                index,
                qubits: self.qubits,
            });
        }
        Ok(())
    }
}

/// Number of qubits needed to index `dimension` configurations; at least 1.
pub fn required_qubits(dimension: usize) -> usize {
    assert!(dimension >= 1, "dimension must be positive");
    if dimension <= 2 {
        1
    } else {
        (usize::BITS - (dimension - 1).leading_zeros()) as usize
    }
}

/// Multiplies by `i^power`. Exact: only swaps and negates components.
fn times_i_pow(v: Complex64, power: u32) -> Complex64 {
    match power % 4 {
        0 => v,
        1 => Complex64::new(-v.im, v.re),
        2 => Complex64::new(-v.re, -v.im),
        _ => Complex64::new(v.im, -v.re),
    }
}

/// Contribution of `value·|j⟩⟨k|` to the coefficient of `P(j⊕k, s)`. Both
/// the batch and streaming encoders go through this function, which keeps
/// their outputs bit-identical.
#[inline]
fn elementary_coefficient(value: Complex64, row: usize, x: u64, s: u64, scale: f64) -> Complex64 {
    let power = 2 * (s & row as u64).count_ones() + (s & x).count_ones();
    times_i_pow(value, power) * scale
}

/// Expands `|j⟩⟨k|` into its `2^q` Pauli terms.
pub fn index_pair_to_terms(
    row: usize,
    col: usize,
    encoding: BitEncoding,
) -> Result<Vec<PauliTerm>, EncodingError> {
    encoding.check_index(row)?;
    encoding.check_index(col)?;
    let q = encoding.qubits();
    let x = (row ^ col) as u64;
    let scale = (-(q as f64)).exp2();
    let one = Complex64::new(1.0, 0.0);
    Ok((0..1u64 << q)
        .map(|s| {
            PauliTerm::new(
                elementary_coefficient(one, row, x, s, scale),
                PauliString::from_masks(x, s, q),
            )
        })
        .collect())
}

/// How to handle a matrix whose dimension is below `2^q`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PaddingPolicy {
    /// Require `D = 2^q`.
    #[default]
    Reject,
    /// Pad the diagonal with `G + 1`, `G` being the Gershgorin upper bound,
    /// so padded states sit above the whole spectrum.
    Gershgorin,
}

impl FromStr for PaddingPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "reject" => Ok(Self::Reject),
            "gershgorin" => Ok(Self::Gershgorin),
            other => Err(format!(
                "unknown padding policy '{other}' (reject|gershgorin)"
            )),
        }
    }
}

/// Returns the matrix extended to `2^q` rows according to `padding`.
pub fn pad_matrix(
    matrix: &HermitianMatrix,
    encoding: BitEncoding,
    padding: PaddingPolicy,
) -> Result<HermitianMatrix, EncodingError> {
    let dimension = matrix.dimension();
    let capacity = encoding.capacity();
    if dimension > capacity {
        return Err(EncodingError::RegisterTooSmall {
            dimension,
            qubits: encoding.qubits(),
        });
    }
    if dimension == capacity {
        return Ok(matrix.clone());
    }
    match padding {
        PaddingPolicy::Reject => Err(EncodingError::PaddingRejected {
            dimension,
            qubits: encoding.qubits(),
        }),
        PaddingPolicy::Gershgorin => Ok(matrix.padded(capacity, matrix.gershgorin_upper() + 1.0)),
    }
}

/// A combined, sorted sum of Pauli terms over a fixed register.
#[derive(Debug, Clone, PartialEq)]
pub struct PauliSum {
    qubits: usize,
    terms: Vec<PauliTerm>,
}

impl PauliSum {
    /// Combines like terms (summing in input order), drops terms with
    /// magnitude below `drop_below`, and sorts by axes string.
    pub fn from_terms(
        qubits: usize,
        terms: impl IntoIterator<Item = PauliTerm>,
        drop_below: f64,
    ) -> Self {
        let mut combined: HashMap<(u64, u64), Complex64> = HashMap::new();
        for term in terms {
            assert_eq!(term.string.qubits(), qubits, "term qubit count mismatch");
            *combined
                .entry((term.string.x_mask(), term.string.z_mask()))
                .or_default() += term.coefficient;
        }
        Self::finish(
            qubits,
            combined
                .into_iter()
                .map(|((x, z), c)| PauliTerm::new(c, PauliString::from_masks(x, z, qubits))),
            drop_below,
        )
    }

    fn finish(qubits: usize, terms: impl Iterator<Item = PauliTerm>, drop_below: f64) -> Self {
        let mut terms: Vec<PauliTerm> = terms
            .filter(|t| t.coefficient.norm() >= drop_below && t.coefficient.norm() > 0.0)
            .collect();
        terms.sort_by_key(|a| a.string);
        Self { qubits, terms }
    }

    pub fn qubits(&self) -> usize {
        self.qubits
    }

    pub fn terms(&self) -> &[PauliTerm] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Coefficient of the given string, zero when absent.
    pub fn coefficient(&self, string: &PauliString) -> Complex64 {
        self.terms
            .binary_search_by(|t| t.string.cmp(string))
            .map(|i| self.terms[i].coefficient)
            .unwrap_or_default()
    }

    /// Coefficient looked up by axes string such as `"XZ"`.
    pub fn coefficient_of(&self, axes: &str) -> Option<Complex64> {
        let string: PauliString = axes.parse().ok()?;
        (string.qubits() == self.qubits).then(|| self.coefficient(&string))
    }

    pub fn max_imaginary(&self) -> f64 {
        self.terms
            .iter()
            .map(|t| t.coefficient.im.abs())
            .fold(0.0, f64::max)
    }

    /// Adds `shift` to the identity coefficient.
    pub fn shifted(&self, shift: f64) -> Self {
        let identity = PauliTerm::new(
            Complex64::new(shift, 0.0),
            PauliString::identity(self.qubits),
        );
        Self::from_terms(
            self.qubits,
            self.terms.iter().copied().chain(std::iter::once(identity)),
            0.0,
        )
    }

    /// Term-wise `alpha·self + beta·other`.
    pub fn linear_combination(&self, alpha: f64, other: &Self, beta: f64) -> Self {
        assert_eq!(self.qubits, other.qubits);
        let scaled = |s: &Self, f: f64| {
            s.terms
                .iter()
                .map(move |t| PauliTerm::new(t.coefficient * f, t.string))
                .collect::<Vec<_>>()
        };
        Self::from_terms(
            self.qubits,
            scaled(self, alpha).into_iter().chain(scaled(other, beta)),
            0.0,
        )
    }

    /// Terms grouped by X-mask, in ascending X-mask order. Strings sharing
    /// an X-mask map `|k⟩` to the same `|k ⊕ x⟩`.
    pub fn x_groups(&self) -> Vec<(u64, Vec<(u64, Complex64)>)> {
        let mut groups: BTreeMap<u64, Vec<(u64, Complex64)>> = BTreeMap::new();
        for t in &self.terms {
            groups
                .entry(t.string.x_mask())
                .or_default()
                .push((t.string.z_mask(), t.coefficient));
        }
        groups.into_iter().collect()
    }

    /// Text form: one `<re> <im> <axes>` line per term.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for t in &self.terms {
            out.push_str(&format!(
                "{:?} {:?} {}\n",
                t.coefficient.re, t.coefficient.im, t.string
            ));
        }
        out
    }

    /// Parses the text form. Blank lines and lines starting with `#` are
    /// skipped. Repeated axes are combined.
    pub fn from_text(text: &str) -> Result<Self, EncodingError> {
        let mut qubits = None;
        let mut terms = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line_no = n + 1;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |message: String| EncodingError::Parse {
                line: line_no,
                message,
            };
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 3 {
                return Err(err(format!("expected '<re> <im> <axes>', got '{line}'")));
            }
            let re: f64 = fields[0]
                .parse()
                .map_err(|e| err(format!("real part: {e}")))?;
            let im: f64 = fields[1]
                .parse()
                .map_err(|e| err(format!("imaginary part: {e}")))?;
            let string: PauliString = fields[2].parse().map_err(err)?;
            match qubits {
                None => qubits = Some(string.qubits()),
                Some(q) if q != string.qubits() => {
                    return Err(err(format!(
                        "axes '{}' has {} qubits, expected {q}",
                        fields[2],
                        string.qubits()
                    )))
                }
                _ => {}
            }
            terms.push(PauliTerm::new(Complex64::new(re, im), string));
        }
        let qubits = qubits.ok_or(EncodingError::Parse {
            line: 0,
            message: "no terms".into(),
        })?;
        Ok(Self::from_terms(qubits, terms, 0.0))
    }
}

fn drop_threshold(matrix: &HermitianMatrix) -> f64 {
    DROP_THRESHOLD * matrix.max_abs_entry()
}

/// Encodes `matrix` as a [`PauliSum`] on `encoding.qubits()` qubits.
///
/// Entries are grouped by `x = j ⊕ k`; every group fills its `2^q` Z-mask
/// coefficients independently, visiting rows in ascending order.
pub fn encode_matrix(
    matrix: &HermitianMatrix,
    encoding: BitEncoding,
    padding: PaddingPolicy,
) -> Result<PauliSum, EncodingError> {
    let padded = pad_matrix(matrix, encoding, padding)?;
    let q = encoding.qubits();
    let scale = (-(q as f64)).exp2();
    let mut groups: BTreeMap<u64, Vec<(usize, Complex64)>> = BTreeMap::new();
    for &(row, col, value) in padded.nonzeros() {
        groups
            .entry((row ^ col) as u64)
            .or_default()
            .push((row, value));
    }
    let groups: Vec<_> = groups.into_iter().collect();
    let encoded: Vec<Vec<PauliTerm>> = groups
        .par_iter()
        .map(|(x, entries)| {
            let mut coefficients = vec![Complex64::default(); 1 << q];
            for &(row, value) in entries {
                for (s, c) in coefficients.iter_mut().enumerate() {
                    *c += elementary_coefficient(value, row, *x, s as u64, scale);
                }
            }
            coefficients
                .into_iter()
                .enumerate()
                .map(|(s, c)| PauliTerm::new(c, PauliString::from_masks(*x, s as u64, q)))
                .collect()
        })
        .collect();
    Ok(PauliSum::finish(
        q,
        encoded.into_iter().flatten(),
        drop_threshold(&padded),
    ))
}

/// Lazily yields the Pauli terms of every nonzero entry, row-major, `2^q`
/// terms per entry. Only the current entry and Z-mask are held.
pub struct EntryTermStream {
    matrix: HermitianMatrix,
    qubits: usize,
    scale: f64,
    entry: usize,
    s: u64,
}

impl EntryTermStream {
    /// Number of matrix entries the stream visits.
    pub fn entry_count(&self) -> usize {
        self.matrix.nnz()
    }

    /// Threshold that [`PauliSum::from_terms`] should use to match
    /// [`encode_matrix`].
    pub fn drop_threshold(&self) -> f64 {
        drop_threshold(&self.matrix)
    }

    pub fn qubits(&self) -> usize {
        self.qubits
    }

    /// Consumes the stream and combines like terms.
    pub fn combine(self) -> PauliSum {
        let (q, threshold) = (self.qubits, self.drop_threshold());
        PauliSum::from_terms(q, self, threshold)
    }
}

impl Iterator for EntryTermStream {
    type Item = PauliTerm;

    fn next(&mut self) -> Option<PauliTerm> {
        let &(row, col, value) = self.matrix.nonzeros().get(self.entry)?;
        let x = (row ^ col) as u64;
        let term = PauliTerm::new(
            elementary_coefficient(value, row, x, self.s, self.scale),
            PauliString::from_masks(x, self.s, self.qubits),
        );
        self.s += 1;
        if self.s == 1 << self.qubits {
            self.s = 0;
            self.entry += 1;
        }
        Some(term)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let per_entry = 1usize << self.qubits;
        let left = (self.matrix.nnz() - self.entry) * per_entry - self.s as usize;
        (left, Some(left))
    }
}

/// Streaming counterpart of [`encode_matrix`]. Combining the stream with
/// [`EntryTermStream::combine`] reproduces the batch result bit for bit.
pub fn stream_entry_terms(
    matrix: &HermitianMatrix,
    encoding: BitEncoding,
    padding: PaddingPolicy,
) -> Result<EntryTermStream, EncodingError> {
    let matrix = pad_matrix(matrix, encoding, padding)?;
    let qubits = encoding.qubits();
    Ok(EntryTermStream {
        matrix,
        qubits,
        scale: (-(qubits as f64)).exp2(),
        entry: 0,
        s: 0,
    })
}

/// Dense `2^q × 2^q` matrix of the operator.
pub fn reconstruct_dense(sum: &PauliSum) -> Result<DMatrix<Complex64>, EncodingError> {
    let q = sum.qubits();
    if q > MAX_RECONSTRUCT_QUBITS {
        return Err(EncodingError::TooManyQubits {
            qubits: q,
            limit: MAX_RECONSTRUCT_QUBITS,
        });
    }
    let n = 1usize << q;
    let mut m = DMatrix::zeros(n, n);
    for t in sum.terms() {
        let (x, z) = (t.string.x_mask(), t.string.z_mask());
        let c = times_i_pow(t.coefficient, t.string.y_count());
        for k in 0..n {
            let sign = if (z & k as u64).count_ones().is_multiple_of(2) {
                1.0
            } else {
                -1.0
            };
            m[(k ^ x as usize, k)] += c * sign;
        }
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    /// Independent Kronecker-product construction of a Pauli string.
    fn kron_string(axes: &[Pauli]) -> DMatrix<Complex64> {
        let single = |p: Pauli| -> DMatrix<Complex64> {
            let (o, z, i) = (c(1.0, 0.0), c(0.0, 0.0), c(0.0, 1.0));
            match p {
                Pauli::I => DMatrix::from_row_slice(2, 2, &[o, z, z, o]),
                Pauli::X => DMatrix::from_row_slice(2, 2, &[z, o, o, z]),
                Pauli::Y => DMatrix::from_row_slice(2, 2, &[z, -i, i, z]),
                Pauli::Z => DMatrix::from_row_slice(2, 2, &[o, z, z, -o]),
            }
        };
        // Little-endian: qubit 0 is the least significant, i.e. rightmost factor.
        axes.iter()
            .fold(DMatrix::from_element(1, 1, c(1.0, 0.0)), |acc, &p| {
                single(p).kronecker(&acc)
            })
    }

    fn h2() -> HermitianMatrix {
        HermitianMatrix::from_real_dense(2, &[-1.8266, 0.1814, 0.1814, -0.2596]).unwrap()
    }

    #[test]
    fn required_qubits_examples() {
        assert_eq!(required_qubits(1), 1);
        assert_eq!(required_qubits(2), 1);
        assert_eq!(required_qubits(3), 2);
        assert_eq!(required_qubits(4), 2);
        assert_eq!(required_qubits(5), 3);
        assert_eq!(required_qubits(4096), 12);
        assert_eq!(required_qubits(4097), 13);
    }

    #[test]
    fn bit_encoding_is_little_endian() {
        let e = BitEncoding::new(3).unwrap();
        assert_eq!(e.index_to_bits(1), vec![true, false, false]);
        assert_eq!(e.index_to_bits(6), vec![false, true, true]);
        for k in 0..8 {
            assert_eq!(e.bits_to_index(&e.index_to_bits(k)), k);
        }
    }

    #[test]
    fn single_qubit_elementary_matrices() {
        let e = BitEncoding::new(1).unwrap();
        let t = index_pair_to_terms(0, 0, e).unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(
            (t[0].string.to_string(), t[0].coefficient),
            ("I".into(), c(0.5, 0.0))
        );
        assert_eq!(
            (t[1].string.to_string(), t[1].coefficient),
            ("Z".into(), c(0.5, 0.0))
        );
        let t = index_pair_to_terms(0, 1, e).unwrap();
        assert_eq!(
            (t[0].string.to_string(), t[0].coefficient),
            ("X".into(), c(0.5, 0.0))
        );
        assert_eq!(
            (t[1].string.to_string(), t[1].coefficient),
            ("Y".into(), c(0.0, 0.5))
        );
        assert!(matches!(
            index_pair_to_terms(0, 2, e),
            Err(EncodingError::IndexOutOfRange { index: 2, .. })
        ));
    }

    #[test]
    fn elementary_matrices_match_kronecker_oracle() {
        for q in 1..=3 {
            let e = BitEncoding::new(q).unwrap();
            let n = 1 << q;
            for j in 0..n {
                for k in 0..n {
                    let terms = index_pair_to_terms(j, k, e).unwrap();
                    assert_eq!(terms.len(), n);
                    let mut sum = DMatrix::zeros(n, n);
                    for t in &terms {
                        assert!((t.coefficient.norm() - 1.0 / n as f64).abs() < 1e-15);
                        sum += kron_string(&t.axes()) * t.coefficient;
                    }
                    let mut expected = DMatrix::zeros(n, n);
                    expected[(j, k)] = c(1.0, 0.0);
                    assert!((sum - expected).norm() < 1e-14, "q={q} j={j} k={k}");
                }
            }
        }
    }

    #[test]
    fn golden_h2_coefficients() {
        let sum =
            encode_matrix(&h2(), BitEncoding::new(1).unwrap(), PaddingPolicy::Reject).unwrap();
        assert_eq!(sum.len(), 3);
        let get = |a: &str| sum.coefficient_of(a).unwrap();
        assert!((get("I").re - -1.0431).abs() < 1e-4);
        assert!((get("Z").re - -0.7835).abs() < 1e-4);
        assert!((get("X").re - 0.1814).abs() < 1e-4);
        assert_eq!(get("Y"), c(0.0, 0.0));
        let order: Vec<String> = sum.terms().iter().map(|t| t.string.to_string()).collect();
        assert_eq!(order, ["I", "X", "Z"]);
    }

    #[test]
    fn identity_encodes_to_single_term() {
        let sum = encode_matrix(
            &HermitianMatrix::identity(8),
            BitEncoding::new(3).unwrap(),
            PaddingPolicy::Reject,
        )
        .unwrap();
        assert_eq!(sum.len(), 1);
        assert_eq!(sum.terms()[0].string.to_string(), "III");
        assert_eq!(sum.terms()[0].coefficient, c(1.0, 0.0));
    }

    #[test]
    fn stream_of_h2_has_eight_terms() {
        let stream =
            stream_entry_terms(&h2(), BitEncoding::new(1).unwrap(), PaddingPolicy::Reject).unwrap();
        assert_eq!(stream.entry_count(), 4);
        assert_eq!(stream.size_hint(), (8, Some(8)));
        let batch =
            encode_matrix(&h2(), BitEncoding::new(1).unwrap(), PaddingPolicy::Reject).unwrap();
        assert_eq!(stream.combine(), batch);
    }

    #[test]
    fn stream_skips_zero_entries() {
        let m = HermitianMatrix::from_real_dense(
            4,
            &[
                1., 0., 0., 0., 0., 2., 0., 0., 0., 0., 3., 0., 0., 0., 0., 4.,
            ],
        )
        .unwrap();
        let stream =
            stream_entry_terms(&m, BitEncoding::new(2).unwrap(), PaddingPolicy::Reject).unwrap();
        assert_eq!(stream.entry_count(), 4);
        assert_eq!(stream.count(), 16);
    }

    #[test]
    fn padding_policies() {
        let m = HermitianMatrix::from_real_dense(3, &[1., 0.5, 0., 0.5, 2., 0.25, 0., 0.25, 3.])
            .unwrap();
        let e = BitEncoding::new(2).unwrap();
        assert!(matches!(
            encode_matrix(&m, e, PaddingPolicy::Reject),
            Err(EncodingError::PaddingRejected {
                dimension: 3,
                qubits: 2
            })
        ));
        let sum = encode_matrix(&m, e, PaddingPolicy::Gershgorin).unwrap();
        let dense = reconstruct_dense(&sum).unwrap();
        // Gershgorin bound: max(1.5, 2.75, 3.25) = 3.25, padded with 4.25.
        assert!((dense[(3, 3)] - c(4.25, 0.0)).norm() < 1e-12);
        assert!(dense[(3, 0)].norm() < 1e-12);
        assert!((dense[(1, 2)] - c(0.25, 0.0)).norm() < 1e-12);
        assert!(matches!(
            encode_matrix(&m, BitEncoding::new(1).unwrap(), PaddingPolicy::Gershgorin),
            Err(EncodingError::RegisterTooSmall { .. })
        ));
    }

    #[test]
    fn reconstruct_examples() {
        let sum = PauliSum::from_text("0.5 0 I\n0.5 0 Z\n").unwrap();
        let d = reconstruct_dense(&sum).unwrap();
        assert_eq!(
            d,
            DMatrix::from_row_slice(2, 2, &[c(1., 0.), c(0., 0.), c(0., 0.), c(0., 0.)])
        );
        let eq19 = PauliSum::from_text("-1.0431 0 I\n-0.7835 0 Z\n0.1814 0 X\n").unwrap();
        let d = reconstruct_dense(&eq19).unwrap();
        let m = h2().to_dense();
        assert!((d - m).camax() < 1e-4);
        let big = PauliSum::from_terms(
            13,
            [PauliTerm::new(c(1., 0.), PauliString::identity(13))],
            0.0,
        );
        assert!(matches!(
            reconstruct_dense(&big),
            Err(EncodingError::TooManyQubits { .. })
        ));
    }

    #[test]
    fn reconstruct_matches_kronecker_for_random_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let q = 3;
        let terms: Vec<PauliTerm> = (0..5)
            .map(|_| {
                let axes: Vec<Pauli> = (0..q)
                    .map(|_| [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z][rng.random_range(0..4)])
                    .collect();
                PauliTerm::new(c(rng.random(), rng.random()), PauliString::from_axes(&axes))
            })
            .collect();
        let sum = PauliSum::from_terms(q, terms.clone(), 0.0);
        let mut oracle = DMatrix::zeros(8, 8);
        for t in &terms {
            oracle += kron_string(&t.axes()) * t.coefficient;
        }
        assert!((reconstruct_dense(&sum).unwrap() - oracle).camax() < 1e-14);
    }

    #[test]
    fn text_round_trip_and_errors() {
        let sum =
            encode_matrix(&h2(), BitEncoding::new(1).unwrap(), PaddingPolicy::Reject).unwrap();
        let text = sum.to_text();
        assert!(text.lines().any(|l| l == "-0.7835 0.0 Z"));
        assert_eq!(PauliSum::from_text(&text).unwrap(), sum);
        assert!(matches!(
            PauliSum::from_text("1 0 Q"),
            Err(EncodingError::Parse { line: 1, .. })
        ));
        assert!(matches!(
            PauliSum::from_text("1 0 I\n1 0 XX"),
            Err(EncodingError::Parse { line: 2, .. })
        ));
        assert!(PauliSum::from_text("# nothing\n").is_err());
    }

    #[test]
    fn sort_order_is_lexicographic_in_axes() {
        let mut strings: Vec<PauliString> = ["ZI", "IZ", "XY", "YX", "II", "IX"]
            .iter()
            .map(|s| s.parse().unwrap())
            .collect();
        strings.sort();
        let names: Vec<String> = strings.iter().map(|s| s.to_string()).collect();
        assert_eq!(names, ["II", "IX", "IZ", "XY", "YX", "ZI"]);
    }
}
