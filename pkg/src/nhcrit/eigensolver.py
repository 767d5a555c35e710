"""Dense eigendecomposition with paired left/right eigenvectors.

The heavy lifting is LAPACK (balancing, Hessenberg reduction, shifted QR)
through :func:`scipy.linalg.eig` / :func:`scipy.linalg.eigh`.  This module
adds what the steady-state analysis needs on top of it: a fixed eigenvalue
ordering, left bras paired with right kets, biorthonormalization and a
defectiveness diagnosis based on the collapse of the pairing overlap
<L_n|R_n>.

Near-defectiveness is judged per cluster of numerically coincident
eigenvalues, so that accidental degeneracies (e.g. between symmetry
sectors) are not mistaken for exceptional points.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
import scipy.linalg

# A pair is numerically defective when |<L|R>| < DEFECT_TOL * |L| * |R|.
# Below ~1e-6 a biorthonormal pairing can no longer be resolved to 1e-10 in
# double precision (rounding of <L|R> alone is ~eps/|<L|R>|).
DEFECT_TOL = 2e-4
CLUSTER_RTOL = 1e-10
STRUCTURE_RTOL = 1e-14


class EigenSolverError(RuntimeError):
    """Raised when the dense eigendecomposition fails or its input is invalid."""


@dataclass(frozen=True)
class Spectrum:
    """Eigenpairs sorted by descending imaginary part (ties: descending real part).

    ``right[:, n]`` is the unit-norm ket |R_n>, ``left[n]`` is the row vector
    <L_n| so that ``left[n] @ right[:, m]`` is <L_n|R_m>.
    """

    values: np.ndarray
    right: np.ndarray
    left: np.ndarray
    pairing_overlap: np.ndarray
    defective: np.ndarray
    residual: float
    matrix_norm: float
    kind: str
    defect_tol: float = DEFECT_TOL
    biorthonormal: bool = False

    def __len__(self):
        return len(self.values)

    @property
    def dim(self) -> int:
        return self.right.shape[0]

    def reconstruct(self) -> np.ndarray:
        """Sum_n |R_n> lambda_n <L_n|; only meaningful when nothing is defective."""
        return (self.right * self.values) @ self.left


def _structure(a: np.ndarray, scale: float) -> str:
    tol = STRUCTURE_RTOL * max(scale, 1.0)
    if np.abs(a - a.conj().T).max() <= tol:
        return "hermitian"
    if np.abs(a - a.T).max() <= tol:
        return "complex-symmetric"
    return "general"


def _ordering(values: np.ndarray, tol: float) -> np.ndarray:
    """Descending Im, then descending Re among values whose Im agree to ``tol``.

    Treating rounding-level Im differences as ties keeps the order (and so
    the steady-state index) stable under H -> H + const.
    """
    by_im = np.argsort(-values.imag, kind="stable")
    im = values.imag[by_im]
    group = np.concatenate([[0], np.cumsum(im[:-1] - im[1:] > tol)])
    return by_im[np.lexsort((-values.real[by_im], group))]


def _clusters(values: np.ndarray, tol: float) -> list[np.ndarray]:
    """Connected groups of eigenvalues closer than ``tol`` to each other."""
    n = len(values)
    label = np.arange(n)
    close = np.abs(values[:, None] - values[None, :]) <= tol
    for i in range(n):
        for j in np.nonzero(close[i, i + 1 :])[0] + i + 1:
            a, b = label[i], label[j]
            if a != b:
                label[label == b] = a
    return [np.nonzero(label == lab)[0] for lab in np.unique(label)]


def _defect_flags(values, right, left, defect_tol, cluster_tol):
    flags = np.zeros(len(values), dtype=bool)
    for idx in _clusters(values, cluster_tol):
        lc = left[idx] / np.linalg.norm(left[idx], axis=1, keepdims=True)
        rc = right[:, idx] / np.linalg.norm(right[:, idx], axis=0, keepdims=True)
        gram = lc @ rc
        if len(idx) == 1:
            smin = abs(gram[0, 0])
        else:
            smin = np.linalg.svd(gram, compute_uv=False).min()
        flags[idx] = smin < defect_tol
    return flags


def eig(matrix, defect_tol: float = DEFECT_TOL) -> Spectrum:
    """Full eigendecomposition of a dense complex square matrix.

    Left bras are taken as the conjugate transpose of the right kets for
    Hermitian input, as the *unconjugated* transpose for complex symmetric
    input (A = A^T), and from LAPACK's left eigenvectors otherwise.

    Raises
    ------
    EigenSolverError
        Non-square or non-finite input, or LAPACK non-convergence.
    """
    a = np.asarray(matrix, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] == 0:
        raise EigenSolverError(f"expected a non-empty square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise EigenSolverError("matrix has non-finite entries")
    norm = float(np.linalg.norm(a, 2))
    kind = _structure(a, norm)
    try:
        if kind == "hermitian":
            w, vr = scipy.linalg.eigh((a + a.conj().T) / 2)
            w = w.astype(complex)
            vl = None
        elif kind == "complex-symmetric":
            w, vr = scipy.linalg.eig(a, right=True, left=False)
            vl = None
        else:
            w, vl, vr = scipy.linalg.eig(a, left=True, right=True)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise EigenSolverError(f"eigendecomposition did not converge: {exc}") from exc

    order = _ordering(w, CLUSTER_RTOL * max(norm, 1.0))
    w = w[order]
    vr = vr[:, order]
    vr = vr / np.linalg.norm(vr, axis=0, keepdims=True)
    if kind == "hermitian":
        left = vr.conj().T
    elif kind == "complex-symmetric":
        left = vr.T.copy()
    else:
        vl = vl[:, order]
        left = (vl / np.linalg.norm(vl, axis=0, keepdims=True)).conj().T

    overlap = np.einsum("ij,ji->i", left, vr)
    cluster_tol = CLUSTER_RTOL * max(norm, 1.0)
    defective = _defect_flags(w, vr, left, defect_tol, cluster_tol)
    residual = float(np.linalg.norm(a @ vr - vr * w, axis=0).max())
    return Spectrum(
        values=w,
        right=vr,
        left=left,
        pairing_overlap=overlap,
        defective=defective,
        residual=residual,
        matrix_norm=norm,
        kind=kind,
        defect_tol=defect_tol,
    )


def biorthonormalize(spectrum: Spectrum) -> Spectrum:
    """Rescale the bras so that <L_n|R_m> = delta_nm over non-defective pairs.

    Coincident eigenvalues are handled as a block (the bras of a cluster are
    recombined by the inverse of the cluster Gram matrix); a final solve
    against the full Gram matrix of the non-defective set removes the
    residual cross terms left by rounding.  Defective pairs are untouched.
    """
    if spectrum.biorthonormal:
        return spectrum
    values, right = spectrum.values, spectrum.right
    left = np.array(spectrum.left)
    good = ~spectrum.defective
    cluster_tol = CLUSTER_RTOL * max(spectrum.matrix_norm, 1.0)
    for idx in _clusters(values, cluster_tol):
        idx = idx[good[idx]]
        if len(idx) == 0:
            continue
        gram = left[idx] @ right[:, idx]
        left[idx] = np.linalg.solve(gram, left[idx])
    sel = np.nonzero(good)[0]
    if len(sel):
        gram = left[sel] @ right[:, sel]
        left[sel] = np.linalg.solve(gram, left[sel])
    return replace(spectrum, left=left, biorthonormal=True)


def diagonalize(matrix, defect_tol: float = DEFECT_TOL) -> Spectrum:
    """:func:`eig` followed by :func:`biorthonormalize`."""
    return biorthonormalize(eig(matrix, defect_tol=defect_tol))


def min_pair_gap(values: np.ndarray) -> float:
    """Smallest distance between two eigenvalues (inf for a 1x1 spectrum)."""
    if len(values) < 2:
        return float("inf")
    d = np.abs(values[:, None] - values[None, :])
    np.fill_diagonal(d, np.inf)
    return float(d.min())
