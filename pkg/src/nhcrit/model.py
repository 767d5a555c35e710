"""Collective spin operators and model Hamiltonians H(gamma) = H0 + i*gamma*H1.

Basis convention: the Dicke manifold j = N/2 is indexed by ascending
magnetic quantum number, so index 0 is m = -N/2 and index N is m = +N/2.
Energies are in units of the coupling V (V = 1).
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

HERMITIAN_RTOL = 1e-12


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=complex)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class CollectiveOps:
    """Collective angular-momentum matrices on the (N+1)-dim Dicke manifold."""

    n_spins: int
    jx: np.ndarray
    jy: np.ndarray
    jz: np.ndarray
    jplus: np.ndarray
    jminus: np.ndarray

    @property
    def dim(self) -> int:
        return self.n_spins + 1

    @property
    def m_values(self) -> np.ndarray:
        return np.arange(self.dim) - self.n_spins / 2


def dicke_operators(n_spins: int) -> CollectiveOps:
    """Build J_x, J_y, J_z, J_+ and J_- for ``n_spins`` spin-1/2 particles.

    Raises
    ------
    ValueError
        If ``n_spins`` is not a positive integer.
    """
    if int(n_spins) != n_spins or n_spins < 1:
        raise ValueError(f"n_spins must be a positive integer, got {n_spins!r}")
    n_spins = int(n_spins)
    j = n_spins / 2
    m = np.arange(n_spins + 1) - j
    # <m+1|J+|m> sits at row i+1, column i in ascending-m order.
    ladder = np.sqrt(j * (j + 1) - m[:-1] * (m[:-1] + 1))
    jplus = np.diag(ladder, -1).astype(complex)
    jminus = jplus.conj().T
    jx = (jplus + jminus) / 2
    jy = (jplus - jminus) / 2j
    jz = np.diag(m).astype(complex)
    return CollectiveOps(
        n_spins=n_spins,
        jx=_frozen(jx),
        jy=_frozen(jy),
        jz=_frozen(jz),
        jplus=_frozen(jplus),
        jminus=_frozen(jminus),
    )


def _check_hermitian(name: str, a: np.ndarray) -> None:
    scale = max(np.linalg.norm(a), 1.0)
    err = np.abs(a - a.conj().T).max() if a.size else 0.0
    if err > HERMITIAN_RTOL * scale:
        raise ValueError(f"{name} is not Hermitian (max |A - A^H| = {err:.3e})")


@dataclass(frozen=True)
class ModelSpec:
    """A non-Hermitian model H(gamma) = h0 + i*gamma*h1 with Hermitian h0, h1."""

    h0: np.ndarray
    h1: np.ndarray
    label: str = "matrix"
    n_spins: int | None = None

    def __post_init__(self):
        h0 = np.asarray(self.h0, dtype=complex)
        h1 = np.asarray(self.h1, dtype=complex)
        for name, a in (("h0", h0), ("h1", h1)):
            if a.ndim != 2 or a.shape[0] != a.shape[1]:
                raise ValueError(f"{name} must be a square matrix, got shape {a.shape}")
        if h0.shape != h1.shape:
            raise ValueError(f"dimension mismatch: h0 {h0.shape} vs h1 {h1.shape}")
        if not (np.all(np.isfinite(h0)) and np.all(np.isfinite(h1))):
            raise ValueError("model matrices must be finite")
        _check_hermitian("h0", h0)
        _check_hermitian("h1", h1)
        if self.n_spins is not None and h0.shape[0] != self.n_spins + 1:
            raise ValueError(
                f"n_spins={self.n_spins} implies dimension {self.n_spins + 1}, "
                f"got {h0.shape[0]}"
            )
        object.__setattr__(self, "h0", _frozen(h0))
        object.__setattr__(self, "h1", _frozen(h1))

    @property
    def dim(self) -> int:
        return self.h0.shape[0]


def lmg_hamiltonian(n_spins: int, gamma: float) -> np.ndarray:
    """Non-Hermitian LMG Hamiltonian H/V on the Dicke manifold.

    H/V = (J+^2 + J-^2)/(4N) - (i*gamma/2) J_z - i*gamma*N/4.  The matrix is
    complex symmetric; diagonal entries are -i*gamma*(m/2 + N/4).
    """
    if not np.isfinite(gamma):
        raise ValueError(f"gamma must be finite, got {gamma!r}")
    ops = dicke_operators(n_spins)
    n = ops.n_spins
    jp2 = ops.jplus @ ops.jplus
    hop = (jp2 + jp2.T) / (4 * n)
    diag = -1j * gamma * (ops.m_values / 2 + n / 4)
    return hop + np.diag(diag)


def lmg_model(n_spins: int) -> ModelSpec:
    """The LMG Hamiltonian split into its Hermitian parts h0 and h1."""
    ops = dicke_operators(n_spins)
    n = ops.n_spins
    h0 = (ops.jplus @ ops.jplus + ops.jminus @ ops.jminus) / (4 * n)
    h1 = -ops.jz / 2 - (n / 4) * np.eye(n + 1)
    return ModelSpec(h0=h0, h1=h1, label=f"lmg-N{n}", n_spins=n)


def generic_hamiltonian(spec: ModelSpec, gamma: float) -> np.ndarray:
    """Return h0 + i*gamma*h1."""
    if not np.isfinite(gamma):
        raise ValueError(f"gamma must be finite, got {gamma!r}")
    if gamma == 0:
        return np.array(spec.h0)
    return spec.h0 + 1j * gamma * spec.h1


# --- raw-matrix file format ------------------------------------------------
#
#   dim d
#   H0
#   <d rows of d complex entries, e.g. 0.5-0.25j>
#   H1
#   <d rows>
#
# Blank lines and lines starting with '#' are ignored.


def _parse_block(lines, dim, name, path):
    rows = []
    for line in lines:
        tokens = line.split()
        if len(tokens) != dim:
            raise ValueError(f"{path}: {name} row has {len(tokens)} entries, expected {dim}")
        try:
            rows.append([complex(t) for t in tokens])
        except ValueError as exc:
            raise ValueError(f"{path}: bad complex entry in {name}: {exc}") from None
    return np.array(rows, dtype=complex)


def parse_matrix_text(text: str, source: str = "<string>") -> ModelSpec:
    lines = [ln.strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln and not ln.startswith("#")]
    if not lines or not lines[0].lower().startswith("dim"):
        raise ValueError(f"{source}: first line must be 'dim d'")
    try:
        dim = int(lines[0].split()[1])
    except (IndexError, ValueError):
        raise ValueError(f"{source}: cannot read dimension from {lines[0]!r}") from None
    if dim < 1:
        raise ValueError(f"{source}: dimension must be positive")
    expected = 1 + 2 * (dim + 1)
    if len(lines) != expected:
        raise ValueError(f"{source}: expected {expected} non-empty lines, found {len(lines)}")
    if lines[1].upper() != "H0" or lines[dim + 2].upper() != "H1":
        raise ValueError(f"{source}: blocks must be labelled 'H0' and 'H1'")
    h0 = _parse_block(lines[2 : dim + 2], dim, "H0", source)
    h1 = _parse_block(lines[dim + 3 :], dim, "H1", source)
    return ModelSpec(h0=h0, h1=h1, label=Path(source).stem if source != "<string>" else "matrix")


def load_matrix_file(path) -> ModelSpec:
    """Read a ModelSpec from the plain-text ``dim/H0/H1`` format."""
    path = Path(path)
    return parse_matrix_text(path.read_text(), source=str(path))


def _fmt_complex(z: complex) -> str:
    return f"{z.real:.17g}{z.imag:+.17g}j"


def format_matrix_text(spec: ModelSpec) -> str:
    out = [f"dim {spec.dim}"]
    for name, mat in (("H0", spec.h0), ("H1", spec.h1)):
        out.append(name)
        out.extend(" ".join(_fmt_complex(z) for z in row) for row in mat)
    return "\n".join(out) + "\n"


def save_matrix_file(spec: ModelSpec, path) -> None:
    Path(path).write_text(format_matrix_text(spec))
