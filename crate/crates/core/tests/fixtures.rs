//! Checks on the committed fixture set.

use std::path::{Path, PathBuf};

use vqsci::matrix::{load_fixture, save_fixture, MatrixFixture};
use vqsci::oracle::{
    exact_ground, fixture_ordering, nested_subset_energies, select_minimal_qubits, ReferenceKind,
};
use vqsci::pauli::{encode_matrix, BitEncoding, PaddingPolicy};
use vqsci::CHEMICAL_ACCURACY;

fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn all_fixtures() -> Vec<(PathBuf, MatrixFixture)> {
    let mut paths = Vec::new();
    let mut pending = vec![fixture_dir()];
    while let Some(dir) = pending.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                pending.push(path);
            } else if path.extension().is_some_and(|e| e == "json") {
                paths.push(path);
            }
        }
    }
    paths.sort();
    paths
        .into_iter()
        .map(|p| {
            let fixture = load_fixture(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
            (p, fixture)
        })
        .collect()
}

fn load(name: &str) -> MatrixFixture {
    load_fixture(fixture_dir().join(name)).unwrap()
}

#[test]
fn every_fixture_loads_with_metadata() {
    let fixtures = all_fixtures();
    assert!(fixtures.len() >= 21, "found {}", fixtures.len());
    for (path, f) in &fixtures {
        let d = &f.determinants;
        assert!(d.amplitudes.is_some(), "{}", path.display());
        assert!(d.reference_fci_energy.is_some(), "{}", path.display());
        assert!(d.n_electrons.is_some() && d.n_spin_orbitals.is_some());
        assert!(f.matrix.is_real());
        assert_ne!(f.name(), "matrix");
    }
}

#[test]
fn ground_energies_sit_above_the_fci_reference() {
    for (path, f) in all_fixtures() {
        let energy = exact_ground(&f.matrix).unwrap().energy + f.nuclear_repulsion();
        let fci = f.determinants.reference_fci_energy.unwrap();
        // Truncated fixtures are variational upper bounds; complete ones match.
        assert!(energy >= fci - 1e-8, "{}: {energy} < {fci}", path.display());
        if f.provenance_f64("retained_weight")
            .is_some_and(|w| (w - 1.0).abs() < 1e-12)
        {
            assert!(
                (energy - fci).abs() < 1e-7,
                "{}: {energy} vs {fci}",
                path.display()
            );
        }
    }
}

#[test]
fn nested_subsets_are_monotone_on_fixtures() {
    for (path, f) in all_fixtures() {
        let ordering = fixture_ordering(&f).unwrap();
        let d = f.dimension();
        let mut sizes: Vec<usize> = (0..).map(|k| 1usize << k).take_while(|&s| s < d).collect();
        sizes.push(d);
        let energies = nested_subset_energies(&f.matrix, &ordering, &sizes).unwrap();
        let full = exact_ground(&f.matrix).unwrap().energy;
        for pair in energies.windows(2) {
            assert!(
                pair[1] <= pair[0] + 1e-10,
                "{}: {energies:?}",
                path.display()
            );
        }
        assert!(
            energies.iter().all(|&e| e >= full - 1e-10),
            "{}",
            path.display()
        );
    }
}

#[test]
fn h2_two_by_two_matrix_has_the_expected_pauli_coefficients() {
    let f = load("h2_sci_0.745.json");
    let sum = encode_matrix(
        &f.matrix,
        BitEncoding::new(1).unwrap(),
        PaddingPolicy::Reject,
    )
    .unwrap();
    assert_eq!(sum.len(), 3);
    for (axes, expected) in [("I", -1.0431), ("Z", -0.7835), ("X", 0.1814)] {
        let c = sum.coefficient_of(axes).unwrap();
        assert!((c.re - expected).abs() < 1e-4 && c.im == 0.0, "{axes}: {c}");
    }
}

#[test]
fn selection_matches_the_expected_register_sizes() {
    for (name, qubits) in [
        ("h2_fci_0.745.json", 1),
        ("lih_curve/lih_1.500.json", 3),
        ("beh2_1.300_top256.json", 4),
        ("h2o_fci.json", 5),
    ] {
        let report =
            select_minimal_qubits(&load(name), CHEMICAL_ACCURACY, PaddingPolicy::Reject).unwrap();
        assert!(report.reached, "{name}");
        assert_eq!(report.reference_kind, ReferenceKind::Fci);
        assert_eq!(report.chosen_q, qubits, "{name}: {:?}", report.steps);
    }
}

#[test]
fn curve_fixtures_carry_distances() {
    for (path, f) in all_fixtures() {
        if path
            .parent()
            .unwrap()
            .file_name()
            .unwrap()
            .to_string_lossy()
            .ends_with("_curve")
        {
            assert!(
                f.provenance_f64("distance_angstrom").is_some(),
                "{}",
                path.display()
            );
        }
    }
}

#[test]
fn saved_fixtures_reload_identically() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["h2_sci_0.745.json", "lih_curve/lih_2.200.json"] {
        let original = load(name);
        let path = dir.path().join("copy.json");
        save_fixture(&original, &path).unwrap();
        assert_eq!(load_fixture(&path).unwrap(), original, "{name}");
    }
}
