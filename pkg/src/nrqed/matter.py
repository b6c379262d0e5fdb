"""One-dimensional matter models on real-space grids.

Free particle, the soft ``1/cosh^2`` atom and the two-electron 1D H2 molecule
at clamped internuclear distance. Kinetic energies use an 8th-order central
finite-difference Laplacian.
"""
from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass
from typing import Literal, Optional

import numpy as np
import scipy.sparse as sp

from .continuum import PROTON_MASS
from .linalg import SparseSymmetric, banded_sym_eig, dense_sym_eig, krylov_lowest

__all__ = [
    "Grid1D",
    "AtomModel",
    "H2Model",
    "MatterBasis",
    "GridWarning",
    "FD8_COEFFICIENTS",
    "fd_kinetic",
    "potential_hamiltonian",
    "atom_potential",
    "atom_hamiltonian",
    "atom_analytic_levels",
    "atom_bound_state_count",
    "h2_electronic_hamiltonian",
    "h2_symmetric_projector",
    "eigensolve_matter",
    "atom_matter_basis",
    "h2_matter_basis",
]

log = logging.getLogger(__name__)

# second-derivative stencil, offsets 0..4 (symmetric)
FD8_COEFFICIENTS = np.array([-205.0 / 72.0, 8.0 / 5.0, -1.0 / 5.0, 8.0 / 315.0, -1.0 / 560.0])


class GridWarning(UserWarning):
    pass


@dataclass(frozen=True)
class Grid1D:
    x_min: float
    dx: float
    n: int
    boundary: Literal["hardwall", "periodic"] = "hardwall"

    def __post_init__(self):
        if self.n < 9:
            raise ValueError("grid needs at least 9 points for the 9-point stencil")
        if not self.dx > 0.0:
            raise ValueError("grid spacing must be positive")
        if self.boundary not in ("hardwall", "periodic"):
            raise ValueError(f"unknown boundary {self.boundary!r}")

    @classmethod
    def centered(cls, n: int, dx: float, boundary="hardwall") -> "Grid1D":
        """Grid symmetric about x = 0."""
        return cls(-0.5 * (n - 1) * dx, dx, n, boundary)

    @property
    def x(self) -> np.ndarray:
        return self.x_min + self.dx * np.arange(self.n)

    @property
    def length(self) -> float:
        return self.n * self.dx


@dataclass(frozen=True)
class AtomModel:
    v0: float = 10.0
    k0: float = 0.05
    mass: float = 1.0

    def __post_init__(self):
        if not (self.v0 > 0 and self.k0 > 0 and self.mass > 0):
            raise ValueError("v0, k0 and mass must be positive")


@dataclass(frozen=True)
class H2Model:
    """1D H2 with soft-Coulomb interactions; masses in bare electron masses."""

    a_ee: float = 2.0
    a_en: float = 1.0
    nuclear_mass: float = PROTON_MASS
    electron_mass: float = 1.0

    def __post_init__(self):
        if not (self.a_ee > 0 and self.a_en > 0):
            raise ValueError("soft-Coulomb parameters must be positive")
        if not (self.nuclear_mass > 0 and self.electron_mass > 0):
            raise ValueError("masses must be positive")

    @property
    def mu_e(self) -> float:
        """Reduced electron mass, 2 M m / (2 M + m)."""
        m, big = self.electron_mass, self.nuclear_mass
        return 2.0 * big * m / (2.0 * big + m)

    @property
    def mu_n(self) -> float:
        return 0.5 * self.nuclear_mass


@dataclass(frozen=True)
class MatterBasis:
    """Lowest matter eigenstates plus their dipole matrix.

    ``wavefunctions[:, i]`` is sampled on the grid (the flattened
    ``(x1, x2)`` product grid for two electrons) and normalized so that
    ``sum(psi**2) * dx**n_electrons == 1``.
    """

    energies: np.ndarray
    wavefunctions: np.ndarray
    dipole: np.ndarray
    grid: Grid1D
    n_electrons: int = 1

    @property
    def n_states(self) -> int:
        return int(self.energies.size)

    @property
    def volume_element(self) -> float:
        return self.grid.dx ** self.n_electrons

    def overlap(self) -> np.ndarray:
        return self.wavefunctions.T @ self.wavefunctions * self.volume_element

    def dipole_squared(self) -> np.ndarray:
        """``mu @ mu`` within the retained states."""
        return self.dipole @ self.dipole

    def truncate(self, n_states: int) -> "MatterBasis":
        if not 1 <= n_states <= self.n_states:
            raise ValueError(f"cannot keep {n_states} of {self.n_states} states")
        return MatterBasis(self.energies[:n_states], self.wavefunctions[:, :n_states],
                           self.dipole[:n_states, :n_states], self.grid, self.n_electrons)


def _laplacian_1d(grid: Grid1D) -> sp.csr_matrix:
    n = grid.n
    c = FD8_COEFFICIENTS / grid.dx**2
    if grid.boundary == "periodic":
        rows, cols, vals = [], [], []
        idx = np.arange(n)
        for off in range(-4, 5):
            rows.append(idx)
            cols.append((idx + off) % n)
            vals.append(np.full(n, c[abs(off)]))
        lap = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                            shape=(n, n))
        return lap.tocsr()  # duplicates (tiny grids) are summed
    diags = [np.full(n - abs(off), c[abs(off)]) for off in range(-4, 5)]
    return sp.diags(diags, list(range(-4, 5)), shape=(n, n), format="csr")


def fd_kinetic(grid: Grid1D, mass: float) -> SparseSymmetric:
    """``-(1/2 mass) d^2/dx^2`` with the 9-point 8th-order stencil."""
    if not mass > 0:
        raise ValueError("mass must be positive")
    return SparseSymmetric.from_scipy(-0.5 / mass * _laplacian_1d(grid))


def potential_hamiltonian(grid: Grid1D, potential: np.ndarray, mass: float = 1.0) -> SparseSymmetric:
    """Kinetic energy plus a local potential sampled on ``grid``."""
    potential = np.asarray(potential, dtype=float)
    if potential.shape != (grid.n,):
        raise ValueError("potential must be sampled on the grid")
    h = -0.5 / mass * _laplacian_1d(grid) + sp.diags(potential)
    return SparseSymmetric.from_scipy(h)


def atom_potential(x: np.ndarray, model: AtomModel) -> np.ndarray:
    return -model.v0 / np.cosh(model.k0 * x) ** 2


def atom_hamiltonian(grid: Grid1D, model: AtomModel) -> SparseSymmetric:
    """Kinetic energy plus ``-v0 / cosh^2(k0 x)``."""
    v = atom_potential(grid.x, model)
    edge = max(abs(v[0]), abs(v[-1]))
    if edge >= 1e-8 * model.v0:
        warnings.warn(
            f"atom potential at the grid edge is {edge:.2e} (> 1e-8 v0); "
            "the box truncates the well tails",
            GridWarning,
            stacklevel=2,
        )
    return potential_hamiltonian(grid, v, model.mass)


def atom_bound_state_count(model: AtomModel) -> int:
    """Number of n >= 0 with a negative analytic level."""
    s = math.sqrt(1.0 + 8.0 * model.mass * model.v0 / model.k0**2)
    return int(math.ceil((s - 1.0) / 2.0))


def atom_analytic_levels(model: AtomModel, n_levels: int) -> np.ndarray:
    """E_n = -(k0^2 / 8m) (sqrt(1 + 8 m v0 / k0^2) - (1 + 2n))^2 for n < n_levels."""
    count = atom_bound_state_count(model)
    if n_levels > count:
        raise ValueError(f"the well supports only {count} bound states, asked for {n_levels}")
    n = np.arange(n_levels)
    s = math.sqrt(1.0 + 8.0 * model.mass * model.v0 / model.k0**2)
    return -(model.k0**2) / (8.0 * model.mass) * (s - (1.0 + 2.0 * n)) ** 2


def _soft_coulomb(r2, a):
    return 1.0 / np.sqrt(r2 + a)


def h2_electronic_hamiltonian(R: float, grid: Grid1D, model: H2Model) -> SparseSymmetric:
    """Clamped-nuclei two-electron Hamiltonian on the ``(x1, x2)`` product grid.

    Includes the nuclear repulsion ``1/R`` as a constant diagonal shift.
    Index of grid point ``(i1, i2)`` is ``i1 * n + i2``.
    """
    if not R > 0:
        raise ValueError("internuclear distance must be positive")
    n = grid.n
    t1 = -0.5 / model.mu_e * _laplacian_1d(grid)
    eye = sp.identity(n, format="csr")
    x = grid.x
    x1, x2 = np.meshgrid(x, x, indexing="ij")

    def v_en(y):
        return -_soft_coulomb((y - 0.5 * R) ** 2, model.a_en) - _soft_coulomb((y + 0.5 * R) ** 2, model.a_en)

    v = _soft_coulomb((x1 - x2) ** 2, model.a_ee) + v_en(x1) + v_en(x2) + 1.0 / R
    h = sp.kron(t1, eye, format="csr") + sp.kron(eye, t1, format="csr") + sp.diags(v.ravel())
    return SparseSymmetric.from_scipy(h)


def h2_symmetric_projector(n: int) -> sp.csr_matrix:
    """Isometry from exchange-symmetric pair states ``(i <= j)`` to the product grid."""
    i, j = np.triu_indices(n)
    cols = np.arange(i.size)
    diag = i == j
    w = np.where(diag, 1.0, math.sqrt(0.5))
    rows = np.concatenate([i * n + j, (j * n + i)[~diag]])
    cc = np.concatenate([cols, cols[~diag]])
    vals = np.concatenate([w, w[~diag]])
    return sp.csr_matrix((vals, (rows, cc)), shape=(n * n, i.size))


def _fix_signs(vecs: np.ndarray) -> np.ndarray:
    idx = np.argmax(np.abs(vecs), axis=0)
    signs = np.sign(vecs[idx, np.arange(vecs.shape[1])])
    signs[signs == 0] = 1.0
    return vecs * signs


def _bands_from_sparse(h: SparseSymmetric, width: int) -> Optional[np.ndarray]:
    """Lower band storage, or None if entries fall outside ``width``."""
    if np.any(h.cols - h.rows > width):
        return None
    bands = np.zeros((width + 1, h.order))
    bands[h.cols - h.rows, h.rows] = h.values
    return bands


def eigensolve_matter(
    hamiltonian: SparseSymmetric,
    grid: Grid1D,
    n_states: int,
    dipole_op: np.ndarray,
    n_electrons: Optional[int] = None,
    projector: Optional[sp.spmatrix] = None,
    tol: float = 1e-11,
    seed: int = 0,
) -> MatterBasis:
    """Lowest ``n_states`` eigenpairs and the dipole matrix ``<psi_i| mu |psi_j>``.

    ``dipole_op`` is the (diagonal) dipole operator sampled on the grid, e.g.
    ``-x`` for one electron or ``-(x1 + x2)`` on the product grid.  When
    ``projector`` is given the Hamiltonian is restricted to its range
    (e.g. exchange-symmetric two-electron states) before solving.
    """
    full_dim = projector.shape[0] if projector is not None else hamiltonian.order
    if n_electrons is None:
        n_electrons = 1 if full_dim == grid.n else 2
    if full_dim != grid.n**n_electrons:
        raise ValueError("Hamiltonian size does not match the grid")
    if not 1 <= n_states <= max(1, hamiltonian.order // 4):
        raise ValueError(f"n_states={n_states} is too large for order {hamiltonian.order}")
    dipole_op = np.asarray(dipole_op, dtype=float).ravel()

    if projector is not None:
        p = projector.tocsr()
        h_red = SparseSymmetric.from_scipy(p.T @ hamiltonian.tocsr() @ p)
    else:
        h_red = hamiltonian

    bands = _bands_from_sparse(h_red, 4) if n_electrons == 1 else None
    if bands is not None:
        res = banded_sym_eig(bands, n_states)
    elif h_red.order <= 1500:
        full = dense_sym_eig(h_red.toarray())
        res = full
        res = type(full)(full.eigenvalues[:n_states], full.eigenvectors[:, :n_states],
                         full.residuals[:n_states])
    else:
        res = krylov_lowest(h_red, h_red.order, n_states, tol=tol, seed=seed)
    vecs = res.eigenvectors
    if projector is not None:
        vecs = projector @ vecs
    vecs = _fix_signs(vecs) / math.sqrt(grid.dx**n_electrons)
    dv = grid.dx**n_electrons
    dipole = vecs.T @ (dipole_op[:, None] * vecs) * dv
    dipole = 0.5 * (dipole + dipole.T)
    return MatterBasis(np.array(res.eigenvalues), vecs, dipole, grid, n_electrons)


def atom_matter_basis(grid: Grid1D, model: AtomModel, n_states: int) -> MatterBasis:
    h = atom_hamiltonian(grid, model)
    return eigensolve_matter(h, grid, n_states, -grid.x, n_electrons=1)


def h2_matter_basis(R: float, grid: Grid1D, model: H2Model, n_states: int,
                    symmetric: bool = True, seed: int = 0) -> MatterBasis:
    """Matter basis of the clamped H2 molecule.

    With ``symmetric`` only exchange-symmetric (spatial singlet) states are
    kept; they are the only ones the dipole couples to the ground state.
    """
    h = h2_electronic_hamiltonian(R, grid, model)
    x1, x2 = np.meshgrid(grid.x, grid.x, indexing="ij")
    projector = h2_symmetric_projector(grid.n) if symmetric else None
    return eigensolve_matter(h, grid, n_states, -(x1 + x2), n_electrons=2,
                             projector=projector, seed=seed)
