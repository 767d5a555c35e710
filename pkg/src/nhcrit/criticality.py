"""Sweeps, exceptional-point location and critical-exponent fits."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import stats

from .eigensolver import DEFECT_TOL, EigenSolverError, diagonalize, min_pair_gap
from .model import ModelSpec, dicke_operators, generic_hamiltonian
from .steady import (
    DefectiveStateError,
    DegenerateSteadyStateError,
    default_fd_step,
    expect_right,
    qfi,
    steady_state,
)

GOLDEN = (math.sqrt(5) - 1) / 2
RESOLUTION_FLOOR = 1e-9
DEFAULT_WINDOW = (1e-3, 1e-1)
VECTOR_COALESCENCE = 0.99


class NoExceptionalPointError(RuntimeError):
    """The steady-state gap has no interior minimum in the bracket."""


class FitError(ValueError):
    """The data inside the fit window cannot support a power-law fit."""


@dataclass(frozen=True)
class SweepRecord:
    gamma: float
    energy: complex
    h1_density: complex | None
    sz: float
    qfi: float
    degenerate: bool
    min_gap: float
    steady_gap: float = math.nan
    defective: bool = False
    error: str | None = None

    def value(self, column: str) -> float:
        if column in ("sz", "qfi", "min_gap", "steady_gap", "gamma"):
            return float(getattr(self, column))
        if column == "re_E":
            return self.energy.real
        if column == "im_E":
            return self.energy.imag
        if column in ("re_h1b", "im_h1b"):
            if self.h1_density is None:
                return math.nan
            return self.h1_density.real if column == "re_h1b" else self.h1_density.imag
        raise KeyError(f"unknown column {column!r}")


@dataclass(frozen=True)
class EPResult:
    """Located exceptional point.

    ``p`` is the branch order governing E_S ~ (gamma - gamma_c)^(1/p) (the
    rounded ``p_fit``); ``multiplicity`` counts the eigenvalues that sit in
    the coalescing cluster at ``gamma_c``.  The two differ when a symmetry
    forces extra levels into the coalescence without changing the branch.
    """

    gamma_c: float
    p: int
    e_c: complex
    bracket: tuple[float, float]
    gap_at_min: float
    multiplicity: int
    p_fit: float
    cluster: tuple[complex, ...] = ()


@dataclass(frozen=True)
class FitResult:
    exponent: float
    amplitude: float
    stderr: float
    r_squared: float
    window: tuple[float, float]
    n_points: int
    reference: float
    side: str = "above"


# --- sweeps -----------------------------------------------------------------


def steady_gap(values: np.ndarray, index: int) -> float:
    """Distance from eigenvalue ``index`` to its nearest neighbour."""
    d = np.abs(values - values[index])
    d[index] = np.inf
    return float(d.min()) if len(values) > 1 else math.inf


def _record(spec, gamma, ops, tie_tol, defect_tol):
    try:
        spectrum = diagonalize(generic_hamiltonian(spec, gamma), defect_tol=defect_tol)
        st = steady_state(spectrum, tie_tol=tie_tol, h1=spec.h1)
    except (EigenSolverError, ValueError, np.linalg.LinAlgError) as exc:
        return SweepRecord(
            gamma=float(gamma), energy=complex(math.nan, math.nan), h1_density=None,
            sz=math.nan, qfi=math.nan, degenerate=False, min_gap=math.nan,
            defective=True, error=f"{type(exc).__name__}: {exc}",
        )
    if ops is not None:
        sz = expect_right(st, ops.jz) / ops.n_spins
        f = qfi(st, ops)
    else:
        sz = f = math.nan
    return SweepRecord(
        gamma=float(gamma),
        energy=st.energy,
        h1_density=st.h1_density,
        sz=sz,
        qfi=f,
        degenerate=st.degenerate,
        min_gap=min_pair_gap(spectrum.values),
        steady_gap=steady_gap(spectrum.values, st.index),
        defective=st.defective,
    )


def sweep(
    spec: ModelSpec,
    gammas: Sequence[float],
    tie_tol: float | None = None,
    defect_tol: float = DEFECT_TOL,
    workers: int = 1,
) -> list[SweepRecord]:
    """One :class:`SweepRecord` per gamma; per-point failures are recorded, not raised."""
    gammas = np.asarray(gammas, dtype=float)
    if gammas.ndim != 1 or len(gammas) == 0:
        raise ValueError("gammas must be a non-empty 1-d sequence")
    if np.any(np.diff(gammas) <= 0):
        raise ValueError("gammas must be strictly ascending")
    ops = dicke_operators(spec.n_spins) if spec.n_spins else None

    def one(g):
        return _record(spec, g, ops, tie_tol, defect_tol)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(one, gammas))
    return [one(g) for g in gammas]


# --- exceptional points -------------------------------------------------------


MatrixFamily = Callable[[float], np.ndarray]


def _family(model) -> MatrixFamily:
    if isinstance(model, ModelSpec):
        return lambda g: generic_hamiltonian(model, g)
    if callable(model):
        return model
    raise TypeError("model must be a ModelSpec or a callable gamma -> matrix")


def _gap_at(family: MatrixFamily, gamma: float, tie_tol=None):
    spectrum = diagonalize(family(gamma))
    try:
        index = steady_state(spectrum, tie_tol=tie_tol).index
    except DefectiveStateError:
        # exactly at a full coalescence every pair is defective; index 0 has the largest Im
        index = 0
    return steady_gap(spectrum.values, index), spectrum, index


def golden_section(f: Callable[[float], float], a: float, b: float, tol: float):
    """Minimize a unimodal ``f`` on [a, b] until the bracket is narrower than ``tol``."""
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = f(d)
    return (c, fc) if fc <= fd else (d, fd)


def _coalescing_group(vectors: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """Largest set of mutually parallel eigenvectors among nearby levels.

    A level from a decoupled sector can sit at the coalesced eigenvalue with
    an orthogonal eigenvector; it is not part of the exceptional point.
    """
    overlap = np.abs(vectors.conj().T @ vectors) >= VECTOR_COALESCENCE
    best = np.array([], dtype=int)
    seen = np.zeros(len(labels), dtype=bool)
    for i in range(len(labels)):
        if seen[i]:
            continue
        group = np.nonzero(overlap[i])[0]
        seen[group] = True
        if len(group) > len(best):
            best = group
    return labels[best]


def locate_ep(
    model,
    bracket: tuple[float, float],
    tol: float = 1e-8,
    coarse_points: int = 41,
    coalescence_tol: float | None = None,
    tie_tol: float | None = None,
) -> EPResult:
    """Find the exceptional point where the steady state coalesces with its neighbour.

    The objective is the distance from the steady eigenvalue to its nearest
    neighbour.  A coarse grid over ``bracket`` must show an interior
    minimum, which is then refined by golden-section search to width
    ``tol``.  The coalescing cluster is every eigenpair within
    ``coalescence_tol`` (default max(100 x residual gap, 1e-3 x max|E|)) of the steady
    eigenvalue whose right eigenvector is also parallel to the steady one.
    """
    lo, hi = map(float, bracket)
    if not lo < hi:
        raise ValueError(f"bracket must satisfy lo < hi, got {bracket!r}")
    family = _family(model)
    grid = np.linspace(lo, hi, coarse_points)
    gaps = np.array([_gap_at(family, g, tie_tol)[0] for g in grid])
    i = int(np.argmin(gaps))
    if i == 0 or i == len(grid) - 1:
        raise NoExceptionalPointError(
            f"no interior gap minimum in [{lo}, {hi}]: steady-state gap is monotone "
            f"({gaps[0]:.3g} -> {gaps[-1]:.3g})"
        )
    gamma_c, gap_min = golden_section(
        lambda g: _gap_at(family, g, tie_tol)[0], grid[i - 1], grid[i + 1], tol
    )
    _, spectrum, s = _gap_at(family, gamma_c, tie_tol)
    values = spectrum.values
    if coalescence_tol is None:
        scale = max(float(np.abs(values).max()), 1.0)
        coalescence_tol = max(100 * gap_min, 1e-3 * scale)
    near = np.nonzero(np.abs(values - values[s]) <= coalescence_tol)[0]
    members = _coalescing_group(spectrum.right[:, near], near)
    if len(members) < 2:
        raise NoExceptionalPointError(
            f"gap minimum at gamma={gamma_c:.10g} is not a coalescence "
            f"(gap {gap_min:.3g} > coalescence_tol {coalescence_tol:.3g})"
        )
    cluster = values[members]
    # Branch order from the gap scaling just above the minimum.
    offsets = np.geomspace(1e-3, 1e-5, 5) * max(hi - lo, 1e-3)
    try:
        p_fit = estimate_p(family, gamma_c, offsets, tie_tol=tie_tol)
        p = max(2, int(round(p_fit)))
    except FitError:
        p_fit = math.nan
        p = len(members)
    return EPResult(
        gamma_c=float(gamma_c),
        p=p,
        e_c=complex(cluster.mean()),
        bracket=(lo, hi),
        gap_at_min=float(gap_min),
        multiplicity=len(members),
        p_fit=float(p_fit),
        cluster=tuple(complex(z) for z in cluster),
    )


def estimate_p(
    model,
    gamma_c: float,
    offsets: Sequence[float],
    tie_tol: float | None = None,
    floor: float = RESOLUTION_FLOOR,
) -> float:
    """Coalescence order from gap ~ |gamma - gamma_c|^(1/p); returns 1/slope.

    Offsets are applied above ``gamma_c``; those below the double-precision
    resolution floor (``floor * max(1, |gamma_c|)``) are discarded.
    """
    offsets = np.asarray(offsets, dtype=float)
    if np.any(offsets <= 0):
        raise FitError("offsets must be positive")
    floor_abs = floor * max(1.0, abs(gamma_c))
    usable = offsets[offsets >= floor_abs]
    if len(usable) < 4:
        raise FitError(
            f"only {len(usable)} offsets above the resolution floor {floor_abs:.1e}; "
            "roundoff dominates the eigenvalue gap below it"
        )
    if usable.max() / usable.min() < 10 * (1 - 1e-12):
        raise FitError("offsets must span at least one decade")
    family = _family(model)
    gaps = np.array([_gap_at(family, gamma_c + x, tie_tol)[0] for x in usable])
    if np.any(~np.isfinite(gaps)) or np.any(gaps <= 0):
        raise FitError("non-positive eigenvalue gap; cannot take logarithms")
    slope = stats.linregress(np.log(usable), np.log(gaps)).slope
    if not slope > 0:
        raise FitError(f"gap does not close towards gamma_c (slope {slope:.3g})")
    return float(1.0 / slope)


# --- exponent fits -----------------------------------------------------------


def _as_xy(data, column):
    xs, ys, bad = [], [], []
    for item in data:
        if isinstance(item, SweepRecord):
            xs.append(item.gamma)
            ys.append(item.value(column))
            bad.append(item.degenerate or item.defective or item.error is not None)
        else:
            x, y = item
            xs.append(float(x))
            ys.append(float(y))
            bad.append(False)
    return np.array(xs), np.array(ys), np.array(bad, dtype=bool)


def fit_exponent(
    data,
    column: str = "sz",
    gamma_c: float = 0.0,
    window: tuple[float, float] = DEFAULT_WINDOW,
    side: str = "above",
    reference: float | None = None,
    floor: float = RESOLUTION_FLOOR,
) -> FitResult:
    """Least-squares slope of ln|y_c - y| against ln|gamma - gamma_c|.

    ``data`` holds :class:`SweepRecord` objects (``column`` selects the
    quantity) or plain (gamma, y) pairs.  ``reference`` defaults to the value
    at the gamma nearest ``gamma_c``.  Only points on ``side`` of
    ``gamma_c`` with |gamma - gamma_c| inside ``window`` (inclusive) enter.
    """
    if side not in ("above", "below"):
        raise ValueError("side must be 'above' or 'below'")
    lo, hi = window
    if not 0 < lo < hi:
        raise ValueError(f"window must satisfy 0 < lo < hi, got {window!r}")
    x, y, bad = _as_xy(data, column)
    if len(x) == 0:
        raise FitError("no data")
    if reference is None:
        reference = float(y[np.argmin(np.abs(x - gamma_c))])
    delta = x - gamma_c if side == "above" else gamma_c - x
    lo = max(lo, floor * max(1.0, abs(gamma_c)))
    inside = (delta >= lo) & (delta <= hi)
    if np.any(bad & inside):
        raise FitError("degenerate, defective or failed records inside the fit window")
    dy = reference - y[inside]
    if np.any(~np.isfinite(dy)):
        raise FitError(f"column {column!r} has non-finite values inside the window")
    if inside.sum() < 4:
        raise FitError(f"need at least 4 points inside the window, found {int(inside.sum())}")
    signs = np.sign(dy)
    if np.any(signs == 0) or np.any(signs != signs[0]):
        raise FitError("y_c - y changes sign (or vanishes) inside the fit window")
    res = stats.linregress(np.log(delta[inside]), np.log(np.abs(dy)))
    return FitResult(
        exponent=float(res.slope),
        amplitude=float(np.exp(res.intercept)),
        stderr=float(res.stderr),
        r_squared=float(min(1.0, res.rvalue**2)),
        window=(float(lo), float(hi)),
        n_points=int(inside.sum()),
        reference=float(reference),
        side=side,
    )


# --- susceptibility -----------------------------------------------------------


def observable_at(spec: ModelSpec, column: str, gamma: float, tie_tol=None,
                  defect_tol: float = DEFECT_TOL) -> SweepRecord:
    ops = dicke_operators(spec.n_spins) if spec.n_spins else None
    return _record(spec, gamma, ops, tie_tol, defect_tol)


def susceptibility(
    spec: ModelSpec,
    observable: str = "sz",
    gamma: float = 0.0,
    step: float | None = None,
    tie_tol=None,
    defect_tol: float = DEFECT_TOL,
    allow_degenerate: bool = False,
) -> float:
    """Central difference d<O>/dgamma of a right-convention sweep column.

    Degenerate stencil points raise unless ``allow_degenerate`` is set, in
    which case the tie-broken steady state is differentiated.
    """
    if step is None:
        step = default_fd_step(gamma)
    vals = []
    for g in (gamma + step, gamma - step):
        rec = observable_at(spec, observable, g, tie_tol, defect_tol)
        if rec.error is not None:
            raise EigenSolverError(rec.error)
        if rec.degenerate and not allow_degenerate:
            raise DegenerateSteadyStateError(f"degenerate steady state at gamma={g!r}")
        vals.append(rec.value(observable))
    return float((vals[0] - vals[1]) / (2 * step))


def susceptibility_series(spec, observable, gammas, step=None, **kw) -> list[tuple[float, float]]:
    return [(float(g), susceptibility(spec, observable, g, step, **kw)) for g in gammas]


__all__ = [
    "SweepRecord", "EPResult", "FitResult", "NoExceptionalPointError", "FitError",
    "sweep", "locate_ep", "estimate_p", "fit_exponent", "susceptibility",
    "susceptibility_series", "steady_gap", "golden_section",
]
