//! Qubit, determinant and Pauli-string counts for VQE, FCI and SCI
//! encodings of a molecule with `N` electrons in `M` spin orbitals.
//!
//! All counts are exact integers (`u128`); the closed-form `P_SCI` estimate
//! is a float and labelled as an estimate wherever it is emitted.

use serde::Serialize;

use crate::error::{Error, Result};

/// `C(n, k)` in exact integer arithmetic; zero when `k > n`.
pub fn binomial(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut result: u128 = 1;
    for i in 0..k {
        // Each partial product is itself a binomial coefficient, so the
        // division is exact.
        result = result * (n - i) as u128 / (i + 1) as u128;
    }
    result
}

fn check_counts(n_electrons: u64, n_orbitals: u64) -> Result<()> {
    if n_electrons == 0 || n_electrons > n_orbitals {
        return Err(Error::Config(format!(
            "need 0 < N <= M, got N={n_electrons}, M={n_orbitals}"
        )));
    }
    Ok(())
}

/// Number of FCI determinants. Spin-restricted: `C(M/2, N/2)^2`;
/// otherwise `C(M, N)`.
pub fn d_fci(n_electrons: u64, n_orbitals: u64, spin_restricted: bool) -> Result<u128> {
    check_counts(n_electrons, n_orbitals)?;
    if !spin_restricted {
        return Ok(binomial(n_orbitals, n_electrons));
    }
    if !n_electrons.is_multiple_of(2) || !n_orbitals.is_multiple_of(2) {
        return Err(Error::Config(format!(
            "spin restriction needs even N and M, got N={n_electrons}, M={n_orbitals}"
        )));
    }
    let per_spin = binomial(n_orbitals / 2, n_electrons / 2);
    Ok(per_spin * per_spin)
}

/// `ceil(log2 d)`, at least 1.
pub fn qubits_for(determinants: u128) -> usize {
    assert!(determinants >= 1);
    if determinants <= 2 {
        1
    } else {
        (u128::BITS - (determinants - 1).leading_zeros()) as usize
    }
}

/// `4^q`, the number of distinct Pauli strings on `q` qubits.
pub fn pauli_upper_bound(qubits: usize) -> Result<u128> {
    if qubits > 62 {
        return Err(Error::Config(format!(
            "4^{qubits} exceeds the integer width guard (q <= 62)"
        )));
    }
    Ok(1u128 << (2 * qubits))
}

/// Closed-form estimate `(M/2)^N / ((N/2)!)^2` of the SCI Pauli count.
pub fn p_sci_estimate(n_electrons: u64, n_orbitals: u64) -> Result<f64> {
    check_counts(n_electrons, n_orbitals)?;
    if !n_electrons.is_multiple_of(2) {
        return Err(Error::Config(format!(
            "estimate needs even N, got {n_electrons}"
        )));
    }
    let half_factorial: f64 = (1..=n_electrons / 2).map(|i| i as f64).product();
    Ok((n_orbitals as f64 / 2.0).powi(n_electrons as i32) / (half_factorial * half_factorial))
}

/// Nonzeros per CI matrix row allowed by the Slater–Condon rules: single
/// and double excitations plus the diagonal.
pub fn slater_condon_sparsity_bound(n_electrons: u64, n_orbitals: u64) -> Result<u128> {
    check_counts(n_electrons, n_orbitals)?;
    let (n, virt) = (n_electrons, n_orbitals - n_electrons);
    Ok(binomial(n, 1) * binomial(virt, 1) + binomial(n, 2) * binomial(virt, 2) + 1)
}

/// Circuit executions `L·P·S·I` for `L` layers, `P` Pauli strings, `S`
/// shots per string and `I` optimiser iterations.
pub fn execution_cost(layers: u64, paulis: u64, shots: u64, iterations: u64) -> Result<u128> {
    if layers == 0 || paulis == 0 || shots == 0 || iterations == 0 {
        return Err(Error::Config(
            "execution cost inputs must be positive".into(),
        ));
    }
    Ok(layers as u128 * paulis as u128 * shots as u128 * iterations as u128)
}

/// Resource counts for one molecule.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResourceProfile {
    pub molecule: String,
    pub n_electrons: u64,
    pub n_spin_orbitals: u64,
    pub d_fci: u128,
    pub d_sci: u128,
    pub q_vqe: usize,
    pub q_fci: usize,
    pub q_sci: usize,
    pub p_upper_fci: u128,
    pub p_upper_sci: u128,
    /// Closed-form estimate, not an exact count.
    pub p_sci_estimate: f64,
    /// `M^4` envelope of the second-quantised VQE term count.
    pub p_vqe_envelope: u128,
    pub sparsity_bound: u128,
}

impl ResourceProfile {
    /// Spin-restricted profile; `d_sci` comes from a selection report or a
    /// reference value.
    pub fn new(molecule: &str, n_electrons: u64, n_orbitals: u64, d_sci: u128) -> Result<Self> {
        let d_fci = d_fci(n_electrons, n_orbitals, true)?;
        if d_sci == 0 || d_sci > d_fci {
            return Err(Error::Config(format!(
                "d_sci={d_sci} must lie in 1..={d_fci}"
            )));
        }
        let (q_fci, q_sci) = (qubits_for(d_fci), qubits_for(d_sci));
        Ok(Self {
            molecule: molecule.to_string(),
            n_electrons,
            n_spin_orbitals: n_orbitals,
            d_fci,
            d_sci,
            q_vqe: n_orbitals as usize,
            q_fci,
            q_sci,
            p_upper_fci: pauli_upper_bound(q_fci)?,
            p_upper_sci: pauli_upper_bound(q_sci)?,
            p_sci_estimate: p_sci_estimate(n_electrons, n_orbitals)?,
            p_vqe_envelope: (n_orbitals as u128).pow(4),
            sparsity_bound: slater_condon_sparsity_bound(n_electrons, n_orbitals)?,
        })
    }

    /// `log2(d_sci) − ½·log2(d_fci)`, the deviation from `d_sci ≈ √d_fci`.
    pub fn sqrt_relation_deviation(&self) -> f64 {
        (self.d_sci as f64).log2() - 0.5 * (self.d_fci as f64).log2()
    }
}

/// CSV header of [`ResourceProfile::csv_row`].
pub const CSV_HEADER: &str =
    "molecule,N,M,d_fci,d_sci,q_vqe,q_fci,q_sci,p_upper_sci,sparsity_bound";

impl ResourceProfile {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.molecule,
            self.n_electrons,
            self.n_spin_orbitals,
            self.d_fci,
            self.d_sci,
            self.q_vqe,
            self.q_fci,
            self.q_sci,
            self.p_upper_sci,
            self.sparsity_bound
        )
    }
}

/// Reference `(name, N, M, d_sci)` of the benchmark molecules (sto-3g).
pub const BENCHMARK_MOLECULES: [(&str, u64, u64, u128); 6] = [
    ("H2", 2, 4, 2),
    ("LiH", 4, 12, 8),
    ("BeH2", 6, 14, 16),
    ("H2O", 10, 14, 32),
    ("NH3", 10, 16, 64),
    ("C2H4", 16, 28, 4096),
];

/// Resource table for [`BENCHMARK_MOLECULES`].
pub fn benchmark_table() -> Vec<ResourceProfile> {
    BENCHMARK_MOLECULES
        .iter()
        .map(|&(name, n, m, d)| {
            ResourceProfile::new(name, n, m, d).expect("valid benchmark counts")
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binomials() {
        assert_eq!(binomial(14, 8), 3003);
        assert_eq!(binomial(5, 0), 1);
        assert_eq!(binomial(3, 4), 0);
        assert_eq!(binomial(60, 30), 118_264_581_564_861_424);
    }

    #[test]
    fn d_fci_examples() {
        assert_eq!(d_fci(2, 4, true).unwrap(), 4);
        assert_eq!(d_fci(16, 28, true).unwrap(), 9_018_009);
        assert_eq!(d_fci(10, 14, true).unwrap(), 441);
        assert_eq!(d_fci(2, 4, false).unwrap(), 6);
        assert!(d_fci(3, 4, true).is_err());
        assert!(d_fci(5, 4, false).is_err());
    }

    #[test]
    fn pauli_bounds_and_estimate() {
        assert_eq!(pauli_upper_bound(1).unwrap(), 4);
        assert_eq!(pauli_upper_bound(12).unwrap(), 16_777_216);
        assert!(pauli_upper_bound(63).is_err());
        assert_eq!(p_sci_estimate(2, 8).unwrap(), 16.0);
    }

    #[test]
    fn sparsity_examples() {
        assert_eq!(slater_condon_sparsity_bound(2, 4).unwrap(), 6);
        assert_eq!(slater_condon_sparsity_bound(4, 4).unwrap(), 1);
        assert_eq!(slater_condon_sparsity_bound(10, 14).unwrap(), 311);
    }

    #[test]
    fn execution_cost_examples() {
        assert_eq!(execution_cost(1, 3, 20_000, 50).unwrap(), 3_000_000);
        assert_eq!(execution_cost(1, 1, 1, 1).unwrap(), 1);
        assert_eq!(execution_cost(2, 64, 100_000, 300).unwrap(), 3_840_000_000);
        assert!(execution_cost(0, 1, 1, 1).is_err());
    }

    #[test]
    fn qubit_triples() {
        let table = benchmark_table();
        let triples: Vec<(usize, usize, usize)> =
            table.iter().map(|p| (p.q_vqe, p.q_fci, p.q_sci)).collect();
        assert_eq!(
            triples,
            [
                (4, 2, 1),
                (12, 8, 3),
                (14, 11, 4),
                (14, 9, 5),
                (16, 12, 6),
                (28, 24, 12)
            ]
        );
        assert_eq!(
            table.iter().map(|p| p.d_fci).collect::<Vec<_>>(),
            [4, 225, 1225, 441, 3136, 9_018_009]
        );
        assert_eq!(table[0].csv_row(), "H2,2,4,4,2,4,2,1,4,6");
    }
}
