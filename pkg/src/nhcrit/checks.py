"""Invariant suite behind ``nhcrit check``.

Each check returns a :class:`CheckResult`; the CLI prints them as a table
and exits non-zero if any fails.  ``brute_force_rdm`` is the independent
oracle for the symmetric-sector partial trace and is also used by the tests.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, replace

import numpy as np

from .criticality import fit_exponent
from .eigensolver import diagonalize
from .model import dicke_operators, generic_hamiltonian, lmg_hamiltonian, lmg_model
from .steady import (
    DegenerateSteadyStateError,
    hf_check,
    rdm,
    solve_steady,
    steady_state,
)


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    value: float
    threshold: float

    def row(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{status}  {self.name:<28s} {self.value:11.3e}  (limit {self.threshold:.1e})"


def brute_force_rdm(amplitudes, k: int) -> np.ndarray:
    """Partial trace of the explicit 2^N symmetric state down to its first k spins.

    ``amplitudes[u]`` multiplies the normalized Dicke state with u spins up;
    qubit basis |0> = up, spin 1 is the most significant bit.
    """
    a = np.asarray(amplitudes, dtype=complex)
    n = len(a) - 1
    psi = np.zeros(2**n, dtype=complex)
    for bits in itertools.product((0, 1), repeat=n):
        ups = n - sum(bits)
        idx = int("".join(map(str, bits)), 2) if n else 0
        psi[idx] = a[ups] / np.sqrt(math.comb(n, ups))
    psi /= np.linalg.norm(psi)
    m = psi.reshape(2**k, 2 ** (n - k))
    return m @ m.conj().T


def _commutators(ops):
    jx, jy, jz = ops.jx, ops.jy, ops.jz
    return max(
        np.abs(jx @ jy - jy @ jx - 1j * jz).max(),
        np.abs(jy @ jz - jz @ jy - 1j * jx).max(),
        np.abs(jz @ jx - jx @ jz - 1j * jy).max(),
    )


def run_checks(n_spins: int = 6, inject_fault: bool = False) -> list[CheckResult]:
    if int(n_spins) != n_spins or n_spins < 1:
        raise ValueError(f"n_spins must be a positive integer, got {n_spins!r}")
    n = int(n_spins)
    ops = dicke_operators(n)
    if inject_fault:
        ops = replace(ops, jz=ops.jz + 1e-6 * np.eye(n + 1)[::-1])
    spec = lmg_model(n)
    results = []

    def add(name, value, threshold):
        results.append(CheckResult(name, bool(value <= threshold), float(value), threshold))

    add("su2 commutators", _commutators(ops), 1e-12 * n)
    j = n / 2
    casimir = ops.jx @ ops.jx + ops.jy @ ops.jy + ops.jz @ ops.jz
    add("casimir j(j+1)", np.abs(casimir - j * (j + 1) * np.eye(n + 1)).max(), 1e-12 * n)
    add("lmg = h0 + i*gamma*h1",
        np.abs(lmg_hamiltonian(n, 0.7) - generic_hamiltonian(spec, 0.7)).max(), 1e-14)

    gammas = (0.0, 0.5, 1.0, 2.0)
    resid = biorth = recon = 0.0
    for g in gammas:
        sp = diagonalize(lmg_hamiltonian(n, g))
        norm = max(sp.matrix_norm, 1e-300)
        resid = max(resid, sp.residual / norm)
        good = np.nonzero(~sp.defective)[0]
        gram = sp.left[good] @ sp.right[:, good]
        biorth = max(biorth, np.abs(gram - np.eye(len(good))).max())
        if not sp.defective.any():
            recon = max(recon, np.abs(sp.reconstruct() - lmg_hamiltonian(n, g)).max() / norm)
    add("eigen residual / |H|", resid, 1e-10)
    add("biorthonormality", biorth, 1e-10)
    add("reconstruction / |H|", recon, 1e-8)

    shift_err = 0.0
    for g in (0.0, 0.3, 1.0, 1.7, 2.5):
        h = lmg_hamiltonian(n, g)
        base = steady_state(diagonalize(h)).index
        for c in (2.5, 0.8j, -1.3j):
            moved = steady_state(diagonalize(h + c * np.eye(n + 1))).index
            shift_err = max(shift_err, float(moved != base))
    add("shift covariance of steady", shift_err, 0.0)

    if n >= 2:
        try:
            r1 = hf_check(spec, 1.0, step=1e-3)
            r2 = hf_check(spec, 1.0, step=5e-4)
            ratio = r1 / r2 if r2 > 0 else np.inf
            add("hellmann-feynman h^2 ratio", abs(ratio - 4.0), 0.5)
            add("hellmann-feynman residual", hf_check(spec, 1.0, step=1e-5), 1e-7)
        except DegenerateSteadyStateError:
            results.append(CheckResult("hellmann-feynman", False, np.inf, 0.0))

    if n <= 12:
        _, st = solve_steady(spec, 1.0)
        err = 0.0
        for k in (1, 2):
            if k <= n:
                err = max(err, np.abs(rdm(st, n, k).matrix - brute_force_rdm(st.ket, k)).max())
        add("rdm vs brute-force trace", err, 1e-12)

    x = np.geomspace(1e-3, 1e-1, 12)
    pairs = list(zip(0.2 + x, 1.0 - 3.0 * x**0.5))
    fit = fit_exponent(pairs, gamma_c=0.2, window=(1e-3, 1e-1), reference=1.0)
    add("power-law fit exactness",
        max(abs(fit.exponent - 0.5) / 0.5, abs(fit.amplitude - 3.0) / 3.0), 1e-10)
    return results
