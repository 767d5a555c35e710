"""Steady-state selection, expectation values, reduced density matrices and QFI.

Two expectation conventions are exposed.  The *right* convention
<R|O|R>/<R|R> is bounded by the spectrum of O and is the default for
observables, reduced density matrices and the quantum Fisher information.
The *biorthogonal* convention <L|O|R>/<L|R> is the one in which the
Hellmann-Feynman identity dE/dgamma = <L|dH/dgamma|R> holds.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.special import comb

from .eigensolver import DEFECT_TOL, Spectrum, diagonalize
from .model import CollectiveOps, ModelSpec, generic_hamiltonian

REAL_RESIDUE_TOL = 1e-10

PAULI = {
    "0": np.eye(2, dtype=complex),
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "z": np.array([[1, 0], [0, -1]], dtype=complex),
}


class SteadyStateError(ValueError):
    """Base class for steady-state selection failures."""


class DegenerateSteadyStateError(SteadyStateError):
    """Several eigenvalues share the maximal imaginary part."""


class DefectiveStateError(SteadyStateError):
    """The steady pair is (numerically) defective: too close to an exceptional point."""


@dataclass(frozen=True)
class SteadyState:
    index: int
    energy: complex
    ket: np.ndarray
    bra: np.ndarray
    degenerate: bool
    tied_indices: tuple[int, ...]
    defective: bool
    h1_density: complex | None = None

    @property
    def pairing(self) -> complex:
        return complex(self.bra @ self.ket)


def default_tie_tol(values: np.ndarray) -> float:
    return 1e-9 * float(np.abs(values).max()) if len(values) else 0.0


def steady_state(
    spectrum: Spectrum, tie_tol: float | None = None, h1: np.ndarray | None = None
) -> SteadyState:
    """Pick the eigenpair with the largest imaginary eigenvalue.

    Eigenvalues within ``tie_tol`` of the maximal imaginary part are tied;
    the tie is broken by smallest |Re E - Re c|, with c = tr(H)/dim the
    spectral centroid, then by largest Re E, then by position in the
    spectrum.  Measuring Re E from the centroid keeps the choice invariant
    under H -> H + const; for a traceless Re H (the LMG model) it is the
    plain smallest |Re E| rule.  When ``h1`` is given and the pair is not
    defective, <H1>_B is cached on the result.
    """
    values = spectrum.values
    if len(values) == 0:
        raise SteadyStateError("empty spectrum")
    if np.all(spectrum.defective):
        raise DefectiveStateError("every eigenpair is defective; no steady state can be paired")
    if tie_tol is None:
        tie_tol = default_tie_tol(values)
    top = values.imag.max()
    tied = np.nonzero(values.imag >= top - tie_tol)[0]
    centre = values.real.mean()
    absre = np.abs(values.real[tied] - centre)
    near = tied[absre <= absre.min() + tie_tol]
    index = int(near[np.argmax(values.real[near])])

    ket = spectrum.right[:, index]
    bra = spectrum.left[index]
    defective = bool(spectrum.defective[index])
    h1_density = None
    if h1 is not None and not defective:
        h1_density = complex(bra @ h1 @ ket / (bra @ ket))
    return SteadyState(
        index=index,
        energy=complex(values[index]),
        ket=ket,
        bra=bra,
        degenerate=len(tied) > 1,
        tied_indices=tuple(int(i) for i in tied),
        defective=defective,
        h1_density=h1_density,
    )


def solve_steady(spec: ModelSpec, gamma: float, tie_tol=None, defect_tol=DEFECT_TOL):
    """Diagonalize H(gamma) and select its steady state; returns (spectrum, state)."""
    spectrum = diagonalize(generic_hamiltonian(spec, gamma), defect_tol=defect_tol)
    return spectrum, steady_state(spectrum, tie_tol=tie_tol, h1=spec.h1)


def _check_dims(state: SteadyState, observable: np.ndarray) -> np.ndarray:
    o = np.asarray(observable, dtype=complex)
    n = len(state.ket)
    if o.shape != (n, n):
        raise ValueError(f"observable shape {o.shape} does not match state dimension {n}")
    return o


def expect_right(state: SteadyState, observable) -> float:
    """<R|O|R> with the unit-norm right ket; O must be Hermitian."""
    o = _check_dims(state, observable)
    if np.abs(o - o.conj().T).max() > 1e-12 * max(np.linalg.norm(o), 1.0):
        raise ValueError("expect_right needs a Hermitian observable")
    ket = state.ket / np.linalg.norm(state.ket)
    val = np.vdot(ket, o @ ket)
    if abs(val.imag) > REAL_RESIDUE_TOL * max(1.0, abs(val.real)):
        raise ArithmeticError(f"Hermitian expectation has imaginary part {val.imag:.3e}")
    return float(val.real)


def expect_biorth(state: SteadyState, observable) -> complex:
    """<L|O|R>/<L|R>; raises :class:`DefectiveStateError` near an exceptional point."""
    o = _check_dims(state, observable)
    if state.defective:
        raise DefectiveStateError(
            "steady pair is defective (|<L|R>| below defect_tol): too close to an "
            "exceptional point for the biorthogonal expectation"
        )
    return complex(state.bra @ o @ state.ket / (state.bra @ state.ket))


def default_fd_step(gamma: float) -> float:
    return 1e-5 * max(1.0, abs(gamma))


def _nondegenerate_energy(spec, gamma, tie_tol, defect_tol):
    _, st = solve_steady(spec, gamma, tie_tol=tie_tol, defect_tol=defect_tol)
    if st.degenerate:
        raise DegenerateSteadyStateError(
            f"steady state is degenerate at gamma={gamma!r} (tied indices {st.tied_indices})"
        )
    if st.defective:
        raise DefectiveStateError(f"steady pair is defective at gamma={gamma!r}")
    return st


def hf_check(spec: ModelSpec, gamma: float, step: float | None = None,
             tie_tol=None, defect_tol=DEFECT_TOL) -> float:
    """|<H1>_B - (-i) dE_S/dgamma| with a central difference of step ``step``.

    The residual is O(step**2) when the Hellmann-Feynman identity holds.
    """
    if step is None:
        step = default_fd_step(gamma)
    if not step > 0:
        raise ValueError("step must be positive")
    centre = _nondegenerate_energy(spec, gamma, tie_tol, defect_tol)
    up = _nondegenerate_energy(spec, gamma + step, tie_tol, defect_tol)
    down = _nondegenerate_energy(spec, gamma - step, tie_tol, defect_tol)
    derivative = (up.energy - down.energy) / (2 * step)
    return float(abs(centre.h1_density - (-1j) * derivative))


# --- reduced density matrices ------------------------------------------------


@dataclass(frozen=True)
class ReducedDensityMatrix:
    """k-spin reduced state in the {up, down}^k product basis (spin 1 leftmost)."""

    k: int
    matrix: np.ndarray
    pauli_coeffs: dict[str, complex]

    def from_coeffs(self) -> np.ndarray:
        out = np.zeros_like(self.matrix)
        for label, c in self.pauli_coeffs.items():
            out += c * pauli_string(label)
        return out


def pauli_string(label: str) -> np.ndarray:
    out = np.ones((1, 1), dtype=complex)
    for a in label:
        out = np.kron(out, PAULI[a])
    return out


def _embed_dicke(n: int, q: int) -> np.ndarray:
    """Normalized n-qubit Dicke state with q spins up (bit 0 = up)."""
    vec = np.zeros(2**n, dtype=complex)
    for ups in itertools.combinations(range(n), q):
        idx = sum(1 << (n - 1 - site) for site in range(n) if site not in ups)
        vec[idx] = 1.0
    return vec / np.sqrt(comb(n, q, exact=True))


def symmetric_rdm(amplitudes: np.ndarray, k: int) -> np.ndarray:
    """k-spin reduced density matrix of a permutation-symmetric pure state.

    ``amplitudes[u]`` is the coefficient of the Dicke state with u spins up
    (u = m + N/2).  Splitting the N spins into k kept and N-k traced, each
    Dicke state decomposes as
        |D_N^u> = sum_q sqrt(C(k,q) C(N-k,u-q) / C(N,u)) |D_k^q> |D_{N-k}^{u-q}>,
    and tracing the environment over its Dicke states r = u - q gives
        rho = sum_r |phi_r><phi_r|,
        phi_r = sum_q a_{q+r} sqrt(C(k,q) C(N-k,r) / C(N,q+r)) |D_k^q>.
    """
    a = np.asarray(amplitudes, dtype=complex)
    n = len(a) - 1
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= N, got k={k}, N={n}")
    a = a / np.linalg.norm(a)
    basis = np.array([_embed_dicke(k, q) for q in range(k + 1)]).T
    rho = np.zeros((2**k, 2**k), dtype=complex)
    for r in range(n - k + 1):
        q = np.arange(k + 1)
        weights = np.sqrt(
            comb(k, q) * comb(n - k, r) / comb(n, q + r)
        )
        phi = basis @ (a[q + r] * weights)
        rho += np.outer(phi, phi.conj())
    return rho


def rdm(state: SteadyState, n_spins: int, k: int) -> ReducedDensityMatrix:
    """k-spin (k = 1 or 2) reduced density matrix of rho_S = |R_S><R_S|."""
    if k not in (1, 2):
        raise ValueError(f"k must be 1 or 2, got {k!r}")
    if k > n_spins:
        raise ValueError(f"cannot keep k={k} spins out of N={n_spins}")
    if len(state.ket) != n_spins + 1:
        raise ValueError("state does not live on the (N+1)-dim Dicke manifold")
    rho = symmetric_rdm(state.ket, k)
    coeffs = {
        "".join(lab): complex(np.trace(rho @ pauli_string("".join(lab))) / 2**k)
        for lab in itertools.product("0xyz", repeat=k)
    }
    return ReducedDensityMatrix(k=k, matrix=rho, pauli_coeffs=coeffs)


def qfi(state: SteadyState, ops: CollectiveOps) -> float:
    """Averaged quantum Fisher information 4/(3N^2) * sum_a Var(J_a), right convention."""
    ket = state.ket / np.linalg.norm(state.ket)
    total = 0.0
    for j in (ops.jx, ops.jy, ops.jz):
        v = j @ ket
        mean = np.vdot(ket, v).real
        second = np.vdot(v, v).real
        total += second - mean**2
    return float(4.0 * total / (3.0 * ops.n_spins**2))
