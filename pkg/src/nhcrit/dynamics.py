"""Non-unitary time evolution by spectral propagation.

psi(t) = sum_n c_n exp(-i lambda_n t) |R_n>, c_n = <L_n|psi0>, normalized at
every reported time.  The common factor exp(-i E_S t) is divided out before
summation so that the steady component stays O(1) and every other mode
decays; without it the exponentials over/underflow at large t.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .eigensolver import Spectrum
from .steady import (
    DefectiveStateError,
    DegenerateSteadyStateError,
    SteadyState,
    steady_state,
)

DEFAULT_SEED = 20190101
TIME_CAP = 1e6


class DegenerateSteadyStateWarning(RuntimeWarning):
    """Evolution under a spectrum whose steady state is not unique."""


class ConvergenceWarning(RuntimeWarning):
    """The initial state has (numerically) no weight on the steady eigenvector."""


@dataclass(frozen=True)
class EvolvedState:
    time: float
    ket: np.ndarray
    fidelity_to_steady: float
    weights: np.ndarray


def random_state(dim: int, seed: int = DEFAULT_SEED) -> np.ndarray:
    """Haar-like random unit vector from a seeded generator."""
    rng = np.random.default_rng(seed)
    v = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return v / np.linalg.norm(v)


def _prepare(spectrum: Spectrum, psi0, tie_tol=None):
    if not spectrum.biorthonormal:
        raise ValueError("spectrum must be biorthonormalized")
    if np.any(spectrum.defective):
        raise DefectiveStateError(
            "spectral propagation needs a complete eigenbasis; spectrum has defective pairs"
        )
    psi0 = np.asarray(psi0, dtype=complex)
    if psi0.shape != (spectrum.dim,):
        raise ValueError(f"psi0 has shape {psi0.shape}, expected ({spectrum.dim},)")
    norm = np.linalg.norm(psi0)
    if not norm > 0:
        raise ValueError("psi0 must be non-zero")
    psi0 = psi0 / norm
    state = steady_state(spectrum, tie_tol=tie_tol)
    weights = spectrum.left @ psi0
    return psi0, state, weights


def _fidelity(state: SteadyState, ket: np.ndarray) -> float:
    s = state.ket / np.linalg.norm(state.ket)
    return float(min(1.0, abs(np.vdot(s, ket)) ** 2))


def _propagate(spectrum, state, weights, t):
    phase = np.exp(-1j * (spectrum.values - state.energy) * t)
    ket = spectrum.right @ (weights * phase)
    return ket / np.linalg.norm(ket)


def evolve(spectrum: Spectrum, psi0, t: float, tie_tol=None) -> EvolvedState:
    """Normalized state exp(-iHt) psi0 / |...| at time ``t`` >= 0."""
    if not t >= 0:
        raise ValueError(f"t must be non-negative, got {t!r}")
    psi0, state, weights = _prepare(spectrum, psi0, tie_tol)
    if state.degenerate:
        warnings.warn(
            f"steady state is degenerate (tied indices {state.tied_indices}); "
            "the evolved state need not converge",
            DegenerateSteadyStateWarning,
            stacklevel=2,
        )
    if abs(weights[state.index]) < 1e-12 * np.abs(weights).max():
        warnings.warn(
            "initial state has no weight on the steady eigenvector; it cannot converge to it",
            ConvergenceWarning,
            stacklevel=2,
        )
    ket = psi0 if t == 0 else _propagate(spectrum, state, weights, t)
    return EvolvedState(
        time=float(t), ket=ket, fidelity_to_steady=_fidelity(state, ket), weights=weights
    )


def convergence_time(
    spectrum: Spectrum,
    psi0,
    target: float,
    tie_tol=None,
    t_cap: float = TIME_CAP,
    tol: float = 1e-6,
) -> float:
    """Earliest time at which the fidelity to the steady state reaches ``target``.

    Doubling search from t = 1 until the target is met, requiring the last
    three sampled fidelities to be non-decreasing (asymptotic regime), then
    bisection on the final doubling interval down to relative width ``tol``.
    """
    if not 0 <= target < 1:
        raise ValueError(f"target must lie in [0, 1), got {target!r}")
    psi0, state, weights = _prepare(spectrum, psi0, tie_tol)
    if state.degenerate:
        raise DegenerateSteadyStateError(
            "convergence time is undefined for a degenerate steady state"
        )
    if abs(weights[state.index]) < 1e-12 * np.abs(weights).max():
        raise ValueError("initial state has no weight on the steady eigenvector")

    def fid(t):
        return _fidelity(state, psi0 if t == 0 else _propagate(spectrum, state, weights, t))

    if fid(0.0) >= target:
        return 0.0
    history = [fid(0.0)]
    lo, hi = 0.0, 1.0
    while True:
        f = fid(hi)
        history.append(f)
        if f >= target and (len(history) < 3 or history[-3] <= history[-2] <= history[-1]):
            break
        lo = hi
        hi *= 2
        if hi > t_cap:
            raise RuntimeError(f"fidelity {target} not reached before t = {t_cap:g}")
    while hi - lo > tol * hi:
        mid = 0.5 * (lo + hi)
        if fid(mid) >= target:
            hi = mid
        else:
            lo = mid
    return hi
