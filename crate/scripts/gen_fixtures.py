#!/usr/bin/env python3
"""Regenerate the committed VQSCI-FIX v1 fixtures under fixtures/.

Requires pyscf. Matrices are electronic (nuclear repulsion is stored
separately); determinants are spin-restricted (N/2 alpha, N/2 beta) products
of RHF/sto-3g molecular orbitals, with FCI amplitudes from pyscf.

Usage: python3 scripts/gen_fixtures.py [outdir]
"""

import ctypes
import json
import math
import os
import sys

import numpy
from pyscf import ao2mo, fci, gto, scf
from pyscf.fci import cistring, direct_spin1

BOHR = 0.52917721092


def ci_matrix(h1e, eri, norb, nelec, addr):
    """Hamiltonian block over the given FCI addresses (pyscf string basis)."""
    neleca, nelecb = nelec
    eri = ao2mo.restore(1, eri, norb)
    h1e = numpy.ascontiguousarray(h1e)
    nb = cistring.num_strings(norb, nelecb)
    addra, addrb = divmod(numpy.asarray(addr), nb)
    stra = cistring.addrs2str(norb, neleca, addra)
    strb = cistring.addrs2str(norb, nelecb, addrb)
    n = len(addr)
    h0 = numpy.zeros((n, n))
    direct_spin1.libfci.FCIpspace_h0tril(
        h0.ctypes.data_as(ctypes.c_void_p),
        h1e.ctypes.data_as(ctypes.c_void_p),
        eri.ctypes.data_as(ctypes.c_void_p),
        stra.ctypes.data_as(ctypes.c_void_p),
        strb.ctypes.data_as(ctypes.c_void_p),
        ctypes.c_int(norb),
        ctypes.c_int(n),
    )
    h0 = h0 + numpy.tril(h0, -1).T
    hdiag = direct_spin1.make_hdiag(h1e, eri, norb, nelec, compress=False)
    h0[numpy.arange(n), numpy.arange(n)] = hdiag[addr]
    return h0, stra, strb


def occ_label(s, norb):
    return "".join("1" if (int(s) >> i) & 1 else "0" for i in range(norb))


def build(name, atom, max_dim=None, extra=None):
    mol = gto.M(atom=atom, basis="sto-3g", unit="Angstrom", verbose=0)
    mf = scf.RHF(mol)
    mf.conv_tol = 1e-12
    e_hf = mf.kernel()
    assert mf.converged, f"SCF did not converge for {name}"
    norb = mf.mo_coeff.shape[1]
    nelec = (mol.nelectron // 2, mol.nelectron // 2)
    h1e = mf.mo_coeff.T @ mf.get_hcore() @ mf.mo_coeff
    eri = ao2mo.kernel(mol, mf.mo_coeff)
    solver = fci.direct_spin1.FCI()
    solver.conv_tol = 1e-12
    e_fci_el, civec = solver.kernel(h1e, eri, norb, nelec, nroots=1)
    e_nuc = mol.energy_nuc()
    amps = numpy.asarray(civec).ravel()
    amps = amps / numpy.linalg.norm(amps)
    d_fci = amps.size

    if max_dim is not None and d_fci > max_dim:
        order = sorted(range(d_fci), key=lambda a: (-abs(amps[a]), a))
        addr = numpy.array(order[:max_dim])
    else:
        addr = numpy.arange(d_fci)
    h, stra, strb = ci_matrix(h1e, eri, norb, nelec, addr)
    sub_amps = amps[addr]
    retained = float(numpy.sum(sub_amps ** 2))
    sub_amps = sub_amps / math.sqrt(retained)

    if len(addr) == d_fci:
        w = numpy.linalg.eigvalsh(h)
        assert abs(w[0] - e_fci_el) < 1e-8, (name, w[0], e_fci_el)
    assert abs(h[0, 0] + e_nuc - e_hf) < 1e-6 or len(addr) != d_fci or addr[0] != 0

    entries = []
    n = len(addr)
    for j in range(n):
        for k in range(j, n):
            v = h[j, k]
            if abs(v) > 1e-14:
                entries.append([j, k, float(v), 0.0])
    labels = [f"{occ_label(a, norb)}|{occ_label(b, norb)}" for a, b in zip(stra, strb)]
    provenance = {
        "molecule": name,
        "basis": "sto-3g",
        "geometry_angstrom": atom,
        "hf_energy": repr(float(e_hf)),
        "d_fci": str(d_fci),
        "retained_weight": repr(retained),
        "generator": "pyscf " + __import__("pyscf").__version__,
    }
    if extra:
        provenance.update(extra)
    return {
        "version": 1,
        "dimension": n,
        "storage": "sparse",
        "entries": entries,
        "determinant_labels": labels,
        "amplitudes": [float(x) for x in sub_amps],
        "n_electrons": int(mol.nelectron),
        "n_spin_orbitals": int(2 * norb),
        "nuclear_repulsion": float(e_nuc),
        "reference_fci_energy": float(e_fci_el + e_nuc),
        "provenance": provenance,
    }


def write(outdir, fname, fixture):
    path = os.path.join(outdir, fname)
    with open(path, "w") as fh:
        # repr() of a Python float is the shortest round-trip decimal.
        json.dump(fixture, fh, separators=(",", ":"))
        fh.write("\n")
    print(
        f"{fname}: D={fixture['dimension']} "
        f"E_hf={fixture['provenance'].get('hf_energy', '-')} "
        f"E_fci={fixture['reference_fci_energy']:.6f}"
    )


def h2_two_by_two(outdir):
    m = numpy.array([[-1.8266, 0.1814], [0.1814, -0.2596]])
    e_nuc = BOHR / 0.745
    e0 = float(numpy.linalg.eigvalsh(m)[0])
    _, v = numpy.linalg.eigh(m)
    amps = v[:, 0] * numpy.sign(v[0, 0])
    fixture = {
        "version": 1,
        "dimension": 2,
        "storage": "sparse",
        "entries": [[0, 0, -1.8266, 0.0], [0, 1, 0.1814, 0.0], [1, 1, -0.2596, 0.0]],
        "determinant_labels": ["10|10", "01|01"],
        "amplitudes": [float(a) for a in amps],
        "n_electrons": 2,
        "n_spin_orbitals": 4,
        "nuclear_repulsion": e_nuc,
        "reference_fci_energy": e0 + e_nuc,
        "provenance": {
            "molecule": "H2",
            "basis": "sto-3g",
            "geometry_angstrom": "H 0 0 0; H 0 0 0.745",
            "source": "gerade-sector 2x2 CI matrix (4 decimals)",
        },
    }
    write(outdir, "h2_sci_0.745.json", fixture)


def main():
    outdir = sys.argv[1] if len(sys.argv) > 1 else os.path.join(os.path.dirname(__file__), "..", "fixtures")
    os.makedirs(outdir, exist_ok=True)
    h2_two_by_two(outdir)

    write(outdir, "h2_fci_0.745.json", build("H2", "H 0 0 0; H 0 0 0.745"))
    os.makedirs(os.path.join(outdir, "h2_curve"), exist_ok=True)
    for r in [0.5, 0.6, 0.745, 0.9, 1.1, 1.4, 1.8, 2.4]:
        write(outdir, f"h2_curve/h2_{r:.3f}.json", build("H2", f"H 0 0 0; H 0 0 {r}", extra={"distance_angstrom": repr(r)}))

    os.makedirs(os.path.join(outdir, "lih_curve"), exist_ok=True)
    for r in [1.1, 1.3, 1.5, 1.8, 2.2, 2.6, 3.1, 3.7]:
        write(outdir, f"lih_curve/lih_{r:.3f}.json", build("LiH", f"Li 0 0 0; H 0 0 {r}", extra={"distance_angstrom": repr(r)}))

    write(outdir, "beh2_1.300_top256.json", build("BeH2", "Be 0 0 0; H 0 0 1.3; H 0 0 -1.3", max_dim=256))

    theta = math.radians(105.0) / 2
    r = 0.955
    water = f"O 0 0 0; H 0 {r*math.sin(theta):.10f} {r*math.cos(theta):.10f}; H 0 {-r*math.sin(theta):.10f} {r*math.cos(theta):.10f}"
    write(outdir, "h2o_fci.json", build("H2O", water))

    nh, hh = 1.0325, 1.6291
    rc = hh / math.sqrt(3.0)
    hgt = math.sqrt(nh * nh - rc * rc)
    hs = [(rc * math.cos(2 * math.pi * i / 3), rc * math.sin(2 * math.pi * i / 3)) for i in range(3)]
    ammonia = f"N 0 0 {hgt:.10f}; " + "; ".join(f"H {x:.10f} {y:.10f} 0" for x, y in hs)
    write(outdir, "nh3_top512.json", build("NH3", ammonia, max_dim=512))


if __name__ == "__main__":
    main()
