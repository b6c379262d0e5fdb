"""Symmetric eigensolvers and sparse storage shared by the whole package.

Dense problems go to LAPACK. Large sparse problems use a thick-restart Lanczos
iteration with full reorthogonalization (:func:`krylov_lowest`).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np
import scipy.linalg
import scipy.sparse as sp

__all__ = [
    "EigenResult",
    "SparseSymmetric",
    "KrylovConvergenceError",
    "as_symmetric",
    "dense_sym_eig",
    "banded_sym_eig",
    "krylov_lowest",
    "cluster_indices",
]

CLUSTER_RTOL = 1e-10


class KrylovConvergenceError(RuntimeError):
    """Lanczos did not reach the requested residual within the restart budget."""

    def __init__(self, message: str, eigenvalues: np.ndarray, residuals: np.ndarray):
        super().__init__(message)
        self.eigenvalues = eigenvalues
        self.residuals = residuals


@dataclass(frozen=True)
class EigenResult:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    residuals: np.ndarray

    def __len__(self) -> int:
        return len(self.eigenvalues)


def as_symmetric(matrix) -> np.ndarray:
    """Validate a dense real symmetric matrix and return it as a float array."""
    a = np.asarray(matrix, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
        raise ValueError(f"expected a non-empty square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        bad = np.argwhere(~np.isfinite(a))[0]
        raise ValueError(f"matrix has non-finite entry at {tuple(bad)}")
    if not np.array_equal(a, a.T):
        raise ValueError("matrix is not exactly symmetric")
    return a


def dense_sym_eig(matrix) -> EigenResult:
    """Full spectrum of a dense symmetric matrix, ascending."""
    a = as_symmetric(matrix)
    w, v = np.linalg.eigh(a)
    res = np.linalg.norm(a @ v - v * w, axis=0)
    return EigenResult(w, v, res)


def banded_sym_eig(bands: np.ndarray, k: int) -> EigenResult:
    """Lowest ``k`` eigenpairs of a symmetric banded matrix.

    ``bands`` uses the LAPACK lower storage: ``bands[d, i] = A[i + d, i]``.
    Eigenvalues come from LAPACK bisection; vectors from shifted inverse
    iteration with banded LU solves (much cheaper than the banded QR path).
    """
    bands = np.asarray(bands, dtype=float)
    if not np.all(np.isfinite(bands)):
        raise ValueError("banded matrix has non-finite entries")
    nb, n = bands.shape
    k = min(k, n)
    w = scipy.linalg.eig_banded(bands, lower=True, select="i", select_range=(0, k - 1),
                                eigvals_only=True)

    def matvec(v):
        out = bands[0][:, None] * v
        for d in range(1, nb):
            out[d:] += bands[d, : n - d][:, None] * v[: n - d]
            out[: n - d] += bands[d, : n - d][:, None] * v[d:]
        return out

    # general band storage (upper rows first) for solve_banded
    ab = np.zeros((2 * nb - 1, n))
    for d in range(nb):
        ab[nb - 1 - d, d:] = bands[d, : n - d]
        ab[nb - 1 + d, : n - d] = bands[d, : n - d]
    scale = max(1.0, float(np.max(np.abs(w))))
    rng = np.random.default_rng(12345)
    v = np.empty((n, k))
    for i, theta in enumerate(w):
        shifted = ab.copy()
        shifted[nb - 1] -= theta + 1e-13 * scale
        x = rng.standard_normal(n)
        for _ in range(3):
            x = scipy.linalg.solve_banded((nb - 1, nb - 1), shifted, x, check_finite=False)
            x /= np.linalg.norm(x)
        v[:, i] = x
    for group in cluster_indices(w, 1e-9):
        if group.size > 1:
            q, _r = np.linalg.qr(v[:, group])
            v[:, group] = q
    res = np.linalg.norm(matvec(v) - v * w, axis=0)
    return EigenResult(w, v, res)


class SparseSymmetric:
    """Write-once sparse symmetric matrix.

    Entries are kept as a sorted upper-triangle coordinate list; a full CSR
    view is built once for matrix-vector products.
    """

    def __init__(self, order: int, rows, cols, values):
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        values = np.asarray(values, dtype=float)
        if order < 1:
            raise ValueError("order must be positive")
        if not (rows.shape == cols.shape == values.shape):
            raise ValueError("rows, cols and values must have equal length")
        if rows.size and (rows.min() < 0 or cols.max() >= order or rows.max() >= order or cols.min() < 0):
            raise ValueError("index out of range")
        if np.any(rows > cols):
            raise ValueError("only upper-triangle entries (row <= col) may be stored")
        if not np.all(np.isfinite(values)):
            raise ValueError("non-finite matrix entry")
        key = rows * order + cols
        perm = np.argsort(key, kind="stable")
        key = key[perm]
        if key.size and np.any(key[1:] == key[:-1]):
            raise ValueError("duplicate (row, col) entries")
        self.order = int(order)
        self.rows = rows[perm]
        self.cols = cols[perm]
        self.values = values[perm]
        upper = sp.csr_matrix((self.values, (self.rows, self.cols)), shape=(order, order))
        strict = sp.triu(upper, k=1)
        self._csr = (upper + strict.T).tocsr()
        self._csr.sort_indices()
        self._norm_bound: Optional[float] = None

    @classmethod
    def from_scipy(cls, matrix) -> "SparseSymmetric":
        """Build from an exactly symmetric scipy sparse matrix."""
        matrix = sp.csr_matrix(matrix)
        if matrix.shape[0] != matrix.shape[1]:
            raise ValueError("matrix must be square")
        asym = abs(matrix - matrix.T)
        if asym.nnz and asym.max() != 0.0:
            raise ValueError("matrix is not exactly symmetric")
        coo = sp.triu(matrix).tocoo()
        coo.sum_duplicates()
        mask = coo.data != 0.0
        return cls(matrix.shape[0], coo.row[mask], coo.col[mask], coo.data[mask])

    @property
    def nnz(self) -> int:
        return int(self.values.size)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.order, self.order)

    def matvec(self, x: np.ndarray) -> np.ndarray:
        return self._csr @ x

    __matmul__ = matvec

    def tocsr(self) -> sp.csr_matrix:
        return self._csr

    def toarray(self) -> np.ndarray:
        return self._csr.toarray()

    def diagonal(self) -> np.ndarray:
        return self._csr.diagonal()

    def norm_bound(self) -> float:
        """Gershgorin bound on the spectral radius."""
        if self._norm_bound is None:
            self._norm_bound = float(abs(self._csr).sum(axis=1).max()) if self.nnz else 0.0
        return self._norm_bound

    def __repr__(self) -> str:
        return f"SparseSymmetric(order={self.order}, nnz_upper={self.nnz})"


Operator = Union[SparseSymmetric, Callable[[np.ndarray], np.ndarray], sp.spmatrix]


def _as_matvec(apply: Operator) -> Callable[[np.ndarray], np.ndarray]:
    if isinstance(apply, SparseSymmetric):
        return apply.matvec
    if sp.issparse(apply) or isinstance(apply, np.ndarray):
        return lambda x: apply @ x
    if hasattr(apply, "matvec"):
        return apply.matvec
    if callable(apply):
        return apply
    raise TypeError(f"cannot apply object of type {type(apply).__name__}")


def _orthogonalize(w: np.ndarray, basis: np.ndarray, locked: Optional[np.ndarray]) -> np.ndarray:
    """Two passes of classical Gram-Schmidt against ``basis`` (and ``locked``)."""
    h = np.zeros(basis.shape[1])
    for _ in range(2):
        if locked is not None:
            w -= locked @ (locked.T @ w)
        c = basis.T @ w
        w -= basis @ c
        h += c
    return h


def _random_start(rng: np.random.Generator, n: int, others: list[Optional[np.ndarray]]) -> np.ndarray:
    for _ in range(10):
        v = rng.standard_normal(n)
        for _ in range(2):
            for q in others:
                if q is not None and q.shape[1]:
                    v -= q @ (q.T @ v)
        nv = np.linalg.norm(v)
        if nv > 1e-8 * np.sqrt(n):
            return v / nv
    raise RuntimeError("could not build a start vector outside the current subspace")


def _lanczos_run(matvec, n, k, tol, rng, ncv, max_restarts, locked):
    """Single thick-restart Lanczos run; returns (theta, vectors, residual estimates)."""
    m = min(n - (0 if locked is None else locked.shape[1]), ncv)
    m = max(m, k)
    V = np.zeros((n, m + 1))
    T = np.zeros((m + 1, m + 1))
    V[:, 0] = _random_start(rng, n, [locked])
    start = 0
    anorm = 0.0
    best = None
    for restart in range(max_restarts + 1):
        beta = 0.0
        for j in range(start, m):
            w = matvec(V[:, j]).astype(float, copy=True)
            h = _orthogonalize(w, V[:, : j + 1], locked)
            T[: j + 1, j] = h
            T[j, : j + 1] = h
            beta = float(np.linalg.norm(w))
            anorm = max(anorm, float(np.max(np.abs(h))), beta)
            if beta <= 1e-13 * max(anorm, 1e-300):
                # invariant subspace: continue with a fresh direction
                beta = 0.0
                try:
                    V[:, j + 1] = _random_start(rng, n, [V[:, : j + 1], locked])
                except RuntimeError:
                    m_eff = j + 1
                    theta, Y = np.linalg.eigh(T[:m_eff, :m_eff])
                    vecs = V[:, :m_eff] @ Y[:, :k]
                    return theta[:k], vecs, np.zeros(min(k, m_eff))
                T[j + 1, j] = T[j, j + 1] = 0.0
            else:
                V[:, j + 1] = w / beta
                T[j + 1, j] = T[j, j + 1] = beta
        Tm = T[:m, :m]
        theta, Y = np.linalg.eigh(0.5 * (Tm + Tm.T))
        anorm = max(anorm, float(np.max(np.abs(theta))))
        resid = np.abs(beta * Y[m - 1, :])
        best = (theta[:k], resid[:k])
        if m >= n - (0 if locked is None else locked.shape[1]):
            # Krylov space spans the whole (deflated) space
            return theta[:k], V[:, :m] @ Y[:, :k], resid[:k]
        if np.all(resid[:k] <= tol * anorm):
            return theta[:k], V[:, :m] @ Y[:, :k], resid[:k]
        keep = min(m - 1, max(k + (m - k) // 2, k + 1))
        V[:, :keep] = V[:, :m] @ Y[:, :keep]
        V[:, keep] = V[:, m]
        V[:, keep + 1 :] = 0.0
        T[:] = 0.0
        T[np.arange(keep), np.arange(keep)] = theta[:keep]
        T[keep, :keep] = T[:keep, keep] = beta * Y[m - 1, :keep]
        start = keep
    raise KrylovConvergenceError(
        f"Lanczos did not converge after {max_restarts} restarts "
        f"(worst residual {best[1].max():.3e}, target {tol * anorm:.3e})",
        best[0],
        best[1],
    )


def krylov_lowest(
    apply: Operator,
    order: int,
    k: int = 1,
    tol: float = 1e-10,
    seed: int = 0,
    ncv: Optional[int] = None,
    max_restarts: int = 2000,
    check_degeneracy: bool = True,
) -> EigenResult:
    """Lowest ``k`` eigenpairs of a symmetric operator given only its action.

    Thick-restart Lanczos with full reorthogonalization. Convergence requires
    ``||A v - theta v|| <= tol * ||A||_est`` for every wanted pair. The start
    vector is drawn from ``numpy.random.default_rng(seed)``, so repeated calls
    are bitwise reproducible.

    With ``check_degeneracy`` a second, deflated run looks for eigenvalues
    hidden from the first Krylov space (exact degeneracies) and merges them.
    """
    if k < 1 or k > order:
        raise ValueError(f"need 1 <= k <= order, got k={k}, order={order}")
    matvec = _as_matvec(apply)
    rng = np.random.default_rng(seed)
    ncv = ncv or min(order, max(2 * k + 20, 40))
    theta, vecs, _ = _lanczos_run(matvec, order, k, tol, rng, ncv, max_restarts, None)

    if check_degeneracy and k < order:
        for _ in range(order):
            q, _r = np.linalg.qr(vecs)
            if q.shape[1] >= order:
                break
            extra_theta, extra_vecs, _ = _lanczos_run(
                matvec, order, 1, tol, rng, ncv, max_restarts, q
            )
            scale = max(1.0, float(np.max(np.abs(theta))))
            if extra_theta[0] >= theta[-1] - CLUSTER_RTOL * scale:
                break
            theta = np.concatenate([theta, extra_theta])
            vecs = np.concatenate([vecs, extra_vecs], axis=1)
            # re-diagonalize in the merged subspace
            q, _r = np.linalg.qr(vecs)
            aq = np.column_stack([matvec(q[:, i]) for i in range(q.shape[1])])
            small = q.T @ aq
            w, y = np.linalg.eigh(0.5 * (small + small.T))
            theta, vecs = w[:k], q @ y[:, :k]

    # final orthonormalization within clusters and residual check with a true matvec
    vecs = _orthonormalize_clusters(theta, vecs)
    av = np.column_stack([matvec(vecs[:, i]) for i in range(vecs.shape[1])])
    small = vecs.T @ av
    w, y = np.linalg.eigh(0.5 * (small + small.T))
    vecs = vecs @ y
    av = av @ y
    residuals = np.linalg.norm(av - vecs * w, axis=0)
    return EigenResult(w, vecs, residuals)


def _orthonormalize_clusters(theta: np.ndarray, vecs: np.ndarray) -> np.ndarray:
    q, r = np.linalg.qr(vecs)
    # keep the sign convention of the incoming vectors
    signs = np.sign(np.diag(r))
    signs[signs == 0] = 1.0
    return q * signs


def cluster_indices(eigenvalues: np.ndarray, rtol: float = CLUSTER_RTOL) -> list[np.ndarray]:
    """Group indices of (ascending) eigenvalues that are degenerate within ``rtol``."""
    ev = np.asarray(eigenvalues)
    if ev.size == 0:
        return []
    scale = max(1.0, float(np.max(np.abs(ev))))
    groups = [[0]]
    for i in range(1, ev.size):
        if abs(ev[i] - ev[groups[-1][-1]]) <= rtol * scale:
            groups[-1].append(i)
        else:
            groups.append([i])
    return [np.array(g) for g in groups]
