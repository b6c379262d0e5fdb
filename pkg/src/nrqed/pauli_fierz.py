"""Coupled matter-photon Hamiltonians in a truncated Fock space.

The length-gauge Pauli-Fierz Hamiltonian projected on ``N_s`` matter states
and on photon configurations with at most ``max_photons`` quanta in total:

    H = sum_i E_i |i><i| + sum_a w_a (n_a + 1/2)
        - sum_a lambda_a sqrt(w_a / 2) (b_a + b_a^+) mu
        + 1/2 sum_a lambda_a^2 mu^2

Matter index is the slow index: basis state ``(i, F)`` sits at ``i * dim_F + F``,
so state amplitudes reshape to ``(N_s, dim_F)``.
"""
from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass
from itertools import combinations_with_replacement
from typing import Literal, Optional

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from .continuum import ModeContinuum
from .linalg import SparseSymmetric, dense_sym_eig, krylov_lowest
from .matter import MatterBasis

__all__ = [
    "FockBasis",
    "CouplingConfig",
    "CoupledState",
    "TruncationWarning",
    "build_fock_basis",
    "assemble_length_gauge",
    "assemble_bqm_dse",
    "effective_single_mode",
    "ground_state",
    "excited_states",
    "numeric_free_dispersion",
    "photon_occupation",
    "velocity_displacement",
    "calibrate_velocity_displacement",
    "DEFAULT_MAX_DIMENSION",
]

log = logging.getLogger(__name__)

DEFAULT_MAX_DIMENSION = 2_000_000
DENSE_LIMIT = 2000


class TruncationWarning(UserWarning):
    pass


class FockBasis:
    """Multimode photon configurations with at most ``max_photons`` quanta in total.

    States are ordered by total photon number, then lexicographically by the
    sorted tuple of occupied mode indices: vacuum, ``(a,)`` for a single
    photon in mode ``a``, ``(a, b)`` with ``a <= b`` for two photons, ...
    """

    def __init__(self, n_modes: int, max_photons: int = 2):
        if n_modes < 0 or max_photons < 0:
            raise ValueError("n_modes and max_photons must be non-negative")
        self.n_modes = int(n_modes)
        self.max_photons = int(max_photons) if n_modes else 0
        states: list[tuple[int, ...]] = [()]
        for n in range(1, self.max_photons + 1):
            states.extend(combinations_with_replacement(range(self.n_modes), n))
        self.states = states
        self.index = {s: i for i, s in enumerate(states)}
        self._lowering = self._build_lowering()
        occ = np.zeros((len(states), max(self.n_modes, 1)), dtype=np.int64)
        src, mode, _tgt, val = self._lowering
        np.add.at(occ, (src, mode), np.rint(val * val).astype(np.int64))
        self._occupations = occ[:, : self.n_modes]

    def _build_lowering(self):
        src, mode, tgt, val = [], [], [], []
        for i, s in enumerate(self.states):
            if not s:
                continue
            seen = set()
            for pos, a in enumerate(s):
                if a in seen:
                    continue
                seen.add(a)
                n_a = s.count(a)
                reduced = s[:pos] + s[pos + 1:]
                src.append(i)
                mode.append(a)
                tgt.append(self.index[reduced])
                val.append(math.sqrt(n_a))
        return (np.array(src, dtype=np.int64), np.array(mode, dtype=np.int64),
                np.array(tgt, dtype=np.int64), np.array(val, dtype=float))

    @property
    def dimension(self) -> int:
        return len(self.states)

    def __len__(self) -> int:
        return self.dimension

    @property
    def occupations(self) -> np.ndarray:
        """``occupations[F, a]`` = photons in mode ``a`` for configuration ``F``."""
        return self._occupations

    def photon_energies(self, frequencies: np.ndarray, zero_point: bool = True) -> np.ndarray:
        frequencies = np.asarray(frequencies, dtype=float)
        if frequencies.size != self.n_modes:
            raise ValueError("need one frequency per mode")
        e = self._occupations @ frequencies if self.n_modes else np.zeros(1)
        if zero_point:
            e = e + 0.5 * float(np.sum(frequencies))
        return e

    def lowering_entries(self):
        """Arrays ``(source, mode, target, value)`` with ``b_mode |source> = value |target>``."""
        return self._lowering

    def lowering(self, mode: int) -> sp.csr_matrix:
        src, m, tgt, val = self._lowering
        sel = m == mode
        d = self.dimension
        return sp.csr_matrix((val[sel], (tgt[sel], src[sel])), shape=(d, d))

    def field_operator(self, coefficients: np.ndarray) -> sp.csr_matrix:
        """``sum_a c_a (b_a + b_a^+)`` restricted to the truncated space."""
        coefficients = np.asarray(coefficients, dtype=float)
        src, m, tgt, val = self._lowering
        d = self.dimension
        v = coefficients[m] * val
        lower = sp.csr_matrix((v, (tgt, src)), shape=(d, d))
        return (lower + lower.T).tocsr()

    def __repr__(self) -> str:
        return f"FockBasis(n_modes={self.n_modes}, max_photons={self.max_photons}, dim={self.dimension})"


def build_fock_basis(n_modes: int, max_photons: int = 2) -> FockBasis:
    """Vacuum, one-photon and (by default) two-photon configurations of ``n_modes`` modes."""
    if n_modes < 1:
        raise ValueError("need at least one photon mode")
    return FockBasis(n_modes, max_photons)


@dataclass(frozen=True)
class CouplingConfig:
    """How matter couples to the photon modes.

    ``gauge``: ``"length"`` (full Pauli-Fierz), ``"bqm_dse"`` (bare matter plus
    dipole self-energy, no photons) or ``"effective_single"`` (length gauge with
    the continuum replaced by one mode chosen by ``strategy``).
    """

    gauge: Literal["length", "bqm_dse", "effective_single"] = "length"
    strategy: Literal["lowest", "averaged"] = "lowest"
    include_bilinear: bool = True
    include_dse: bool = True
    max_photons: int = 2
    max_dimension: int = DEFAULT_MAX_DIMENSION

    def __post_init__(self):
        if self.gauge not in ("length", "bqm_dse", "effective_single"):
            raise ValueError(f"unknown gauge {self.gauge!r}")
        if self.strategy not in ("lowest", "averaged"):
            raise ValueError(f"unknown effective-mode strategy {self.strategy!r}")
        if self.gauge == "bqm_dse" and (self.include_bilinear or not self.include_dse):
            # the approximation is defined by dropping the bilinear term and keeping the DSE
            object.__setattr__(self, "include_bilinear", False)
            object.__setattr__(self, "include_dse", True)

    @classmethod
    def bqm_dse(cls) -> "CouplingConfig":
        return cls(gauge="bqm_dse", include_bilinear=False, include_dse=True)


@dataclass
class CoupledState:
    """Eigenstate of a coupled Hamiltonian; ``amplitudes[i, F]`` over matter x Fock."""

    energy: float
    amplitudes: np.ndarray
    matter: MatterBasis
    fock: FockBasis
    modes: Optional[ModeContinuum] = None
    residual: float = 0.0

    @property
    def vector(self) -> np.ndarray:
        return self.amplitudes.ravel()

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def matter_density_matrix(self) -> np.ndarray:
        """Reduced matter density matrix ``rho_ij = sum_F c_iF c_jF``."""
        return self.amplitudes @ self.amplitudes.T


def effective_single_mode(modes: ModeContinuum,
                          strategy: Literal["lowest", "averaged"] = "lowest") -> ModeContinuum:
    """Replace a continuum by one mode: its lowest mode, or the mean frequency and coupling."""
    if strategy == "lowest":
        return modes.lowest(1)
    if strategy == "averaged":
        return ModeContinuum(np.array([np.mean(modes.frequencies)]),
                             np.array([np.mean(modes.couplings)]))
    raise ValueError(f"unknown strategy {strategy!r}")


def _dse_prefactor(modes: ModeContinuum) -> float:
    return 0.5 * float(np.sum(modes.couplings ** 2))


def assemble_length_gauge(mb: MatterBasis, modes: ModeContinuum,
                          cfg: CouplingConfig = CouplingConfig()) -> tuple[SparseSymmetric, FockBasis]:
    """Length-gauge Hamiltonian on ``mb`` x truncated Fock space.

    Returns the operator and the Fock basis that indexes its photon factor.
    With ``cfg.gauge == "effective_single"`` the continuum is first reduced to
    a single mode.
    """
    if cfg.gauge == "bqm_dse":
        raise ValueError("use assemble_bqm_dse for the photon-free approximation")
    if cfg.gauge == "effective_single":
        modes = effective_single_mode(modes, cfg.strategy)
    fb = build_fock_basis(modes.n_modes, cfg.max_photons)
    dim = mb.n_states * fb.dimension
    if dim > cfg.max_dimension:
        raise ValueError(f"coupled dimension {dim} exceeds max_dimension={cfg.max_dimension}")

    matter = np.diag(mb.energies)
    if cfg.include_dse:
        matter = matter + _dse_prefactor(modes) * mb.dipole_squared()
    matter = 0.5 * (matter + matter.T)
    photons = fb.photon_energies(modes.frequencies)
    eye_f = sp.identity(fb.dimension, format="csr")
    h = sp.kron(sp.csr_matrix(matter), eye_f, format="csr")
    h = h + sp.kron(sp.identity(mb.n_states, format="csr"), sp.diags(photons), format="csr")
    if cfg.include_bilinear:
        coeff = modes.couplings * np.sqrt(0.5 * modes.frequencies)
        x = fb.field_operator(coeff)
        h = h - sp.kron(sp.csr_matrix(mb.dipole), x, format="csr")
    return SparseSymmetric.from_scipy(h), fb


def assemble_bqm_dse(mb: MatterBasis, modes: ModeContinuum) -> SparseSymmetric:
    """Matter-only ``sum_i E_i |i><i| + 1/2 sum_a lambda_a^2 mu^2`` (dimension ``N_s``)."""
    h = np.diag(mb.energies) + _dse_prefactor(modes) * mb.dipole_squared()
    h = 0.5 * (h + h.T)
    return SparseSymmetric.from_scipy(sp.csr_matrix(h))


def _lowest_pairs(h: SparseSymmetric, k: int, tol: float, seed: int):
    if h.order <= DENSE_LIMIT:
        res = dense_sym_eig(h.toarray())
        return res.eigenvalues[:k], res.eigenvectors[:, :k], res.residuals[:k]
    res = krylov_lowest(h, h.order, k, tol=tol, seed=seed, check_degeneracy=k > 1)
    return res.eigenvalues, res.eigenvectors, res.residuals


def _as_state(energy, vec, residual, mb, fb, modes) -> CoupledState:
    i = int(np.argmax(np.abs(vec)))
    if vec[i] < 0:
        vec = -vec
    vec = vec / np.linalg.norm(vec)
    return CoupledState(float(energy), vec.reshape(mb.n_states, fb.dimension), mb, fb, modes,
                        float(residual))


def ground_state(h: SparseSymmetric, mb: MatterBasis, fb: Optional[FockBasis] = None,
                 modes: Optional[ModeContinuum] = None, tol: float = 1e-11,
                 seed: int = 0) -> CoupledState:
    """Lowest eigenpair of an assembled Hamiltonian as a normalized CoupledState."""
    fb = fb if fb is not None else FockBasis(0)
    if h.order != mb.n_states * fb.dimension:
        raise ValueError("Hamiltonian dimension does not match the bases")
    w, v, r = _lowest_pairs(h, 1, tol, seed)
    return _as_state(w[0], v[:, 0], r[0], mb, fb, modes)


def excited_states(h: SparseSymmetric, mb: MatterBasis, fb: Optional[FockBasis], k: int,
                   modes: Optional[ModeContinuum] = None, tol: float = 1e-10,
                   seed: int = 0) -> tuple[CoupledState, list[CoupledState]]:
    """Ground state and the ``k`` lowest states above it."""
    fb = fb if fb is not None else FockBasis(0)
    if k < 1 or k + 1 > h.order:
        raise ValueError("k must satisfy 1 <= k < dimension")
    w, v, r = _lowest_pairs(h, k + 1, tol, seed)
    states = [_as_state(w[i], v[:, i], r[i], mb, fb, modes) for i in range(k + 1)]
    return states[0], states[1:]


# ---------------------------------------------------------------- free particle


def _shifted_oscillator_ground(omega: float, force: float, n_max: int) -> float:
    """Lowest eigenvalue of 1/2 (P^2 + omega^2 Q^2) + force * Q in an n_max Fock basis."""
    n = np.arange(n_max)
    diag = omega * (n + 0.5)
    off = force * np.sqrt(n[1:] / (2.0 * omega))
    return float(scipy.linalg.eigh_tridiagonal(diag, off, eigvals_only=True,
                                               select="i", select_range=(0, 0))[0])


def numeric_free_dispersion(k: float, modes: ModeContinuum, coupling: Optional[float] = None,
                            m: float = 1.0, n_max_per_mode: int = 64,
                            adaptive: bool = True, subtract_zero_point: bool = False) -> float:
    """Lowest velocity-gauge energy of a free particle at conserved momentum ``k``.

    The photon part ``(k + sum lambda q)^2 / 2m + sum (p^2 + w^2 q^2)/2`` is
    brought to normal modes by a dense eigensolve of its frequency matrix;
    each normal mode is then a linearly shifted oscillator diagonalized in a
    Fock basis of ``n_max_per_mode`` states.
    """
    lam = modes.couplings if coupling is None else np.full(modes.n_modes, float(coupling))
    w = modes.frequencies
    d = lam / math.sqrt(m)
    wmat = np.diag(w * w) + np.outer(d, d)
    res = dense_sym_eig(wmat)
    omega = np.sqrt(res.eigenvalues)
    force = k / math.sqrt(m) * (res.eigenvectors.T @ d)
    total = 0.5 * k * k / m
    for om, f in zip(omega, force):
        n_max = n_max_per_mode
        e = _shifted_oscillator_ground(om, f, n_max)
        while True:
            e2 = _shifted_oscillator_ground(om, f, 2 * n_max)
            if abs(e2 - e) <= 1e-8 * max(1.0, abs(e)) * 1e-4 or not adaptive:
                break
            if n_max >= 1 << 14:
                break
            n_max *= 2
            e = e2
        if abs(e2 - e) > 1e-8:
            warnings.warn(f"shifted oscillator (omega={om:.3g}) not converged at "
                          f"n_max={n_max}: change {abs(e2 - e):.2e}", TruncationWarning,
                          stacklevel=2)
        total += e2 - (0.5 * om if subtract_zero_point else 0.0)
    return total


# ---------------------------------------------------------------- photon occupation


_VELOCITY_SIGN: Optional[float] = None


def velocity_displacement(modes: ModeContinuum) -> np.ndarray:
    """kappa_a such that the velocity-gauge photon operator is ``b_a - kappa_a mu``.

    The magnitude is ``lambda_a / sqrt(2 w_a)``; the sign is fixed by
    :func:`calibrate_velocity_displacement`.
    """
    sign = calibrate_velocity_displacement()
    return sign * modes.couplings / np.sqrt(2.0 * modes.frequencies)


def _ho_matrices(n: int, omega: float):
    a = np.diag(np.sqrt(np.arange(1, n)), 1)
    x = (a + a.T) / math.sqrt(2.0 * omega)
    p = 1j * math.sqrt(omega / 2.0) * (a.T - a)
    return x, p


def _velocity_gauge_oracle(omega0: float, omega: float, lam: float, n_matter: int, n_photon: int):
    """Ground-state <a^+ a> for a harmonic electron + one mode, solved directly in the velocity gauge."""
    x, p = _ho_matrices(n_matter, omega0)
    q, pq = _ho_matrices(n_photon, omega)
    im, ip = np.eye(n_matter), np.eye(n_photon)
    kin = np.kron(p @ p, ip) + 2.0 * lam * np.kron(p, q) + lam**2 * np.kron(im, q @ q)
    h = 0.5 * kin + 0.5 * omega0**2 * np.kron(x @ x, ip)
    h = h + np.kron(im, np.diag(omega * (np.arange(n_photon) + 0.5)))
    # matrix products of truncated x, p are inexact in the last rows; the
    # ground state never reaches them for the couplings used here
    w, v = np.linalg.eigh(0.5 * (h + h.conj().T))
    psi = v[:, 0].reshape(n_matter, n_photon)
    return float(np.sum(np.abs(psi) ** 2 * np.arange(n_photon)[None, :]))


def calibrate_velocity_displacement(force: bool = False) -> float:
    """Fix the sign of the length-to-velocity displacement against a direct oracle.

    A harmonic electron coupled to one mode is solved twice: directly in the
    velocity gauge and in this module's length-gauge assembly.  The sign for
    which ``||(b - kappa mu) Psi||^2`` reproduces the velocity-gauge ``<a^+ a>``
    to 1e-6 is cached; if neither sign does, occupations in the velocity gauge
    are refused.
    """
    global _VELOCITY_SIGN
    if _VELOCITY_SIGN is not None and not force:
        return _VELOCITY_SIGN
    omega0, omega, lam = 0.25, 0.1, 0.05
    ref = _velocity_gauge_oracle(omega0, omega, lam, 40, 24)
    mb = _harmonic_matter_basis(omega0, 24)
    modes = ModeContinuum(np.array([omega]), np.array([lam]))
    h, fb = assemble_length_gauge(mb, modes, CouplingConfig(max_photons=16))
    state = ground_state(h, mb, fb, modes)
    for sign in (1.0, -1.0):
        kappa = sign * lam / math.sqrt(2.0 * omega)
        n = _displaced_occupation(state, np.array([kappa]))[0]
        if abs(n - ref) <= 1e-6:
            _VELOCITY_SIGN = sign
            log.debug("velocity displacement sign %+g (n=%.10f, oracle %.10f)", sign, n, ref)
            return sign
    raise RuntimeError("velocity-gauge photon occupation failed its calibration against "
                       f"the direct velocity-gauge oracle (oracle n={ref:.8g})")


def _harmonic_matter_basis(omega0: float, n_states: int) -> MatterBasis:
    from .matter import Grid1D

    x, _p = _ho_matrices(n_states + 8, omega0)
    dip = -x[:n_states, :n_states]
    energies = omega0 * (np.arange(n_states) + 0.5)
    grid = Grid1D.centered(9, 1.0)
    return MatterBasis(energies, np.zeros((grid.n, n_states)), dip, grid, 1)


def _displaced_occupation(state: CoupledState, kappa: np.ndarray) -> np.ndarray:
    c = state.amplitudes
    fb = state.fock
    src, mode, tgt, val = fb.lowering_entries()
    nf = fb.n_modes
    weights = np.sum(c * c, axis=0)
    n_len = fb.occupations.T @ weights if nf else np.zeros(0)
    if not np.any(kappa):
        return n_len
    mu_c = state.matter.dipole @ c
    cross = np.bincount(mode, weights=val * np.einsum("ij,ij->j", mu_c[:, tgt], c[:, src]),
                        minlength=nf)
    mu2 = float(np.sum(mu_c * mu_c))
    return n_len - 2.0 * kappa * cross + kappa**2 * mu2


def photon_occupation(state: CoupledState, gauge: Literal["length", "velocity"] = "velocity",
                      modes: Optional[ModeContinuum] = None) -> np.ndarray:
    """Mean photon number per mode in a coupled state.

    ``"length"``: ``<b_a^+ b_a>`` of the length-gauge ladder operators.
    ``"velocity"``: occupation of ``b_a - kappa_a mu``, the physical photon
    operator of the velocity gauge expressed in length-gauge variables.
    """
    modes = modes if modes is not None else state.modes
    if gauge == "length":
        return _displaced_occupation(state, np.zeros(state.fock.n_modes))
    if gauge != "velocity":
        raise ValueError(f"unknown gauge {gauge!r}")
    if modes is None or modes.n_modes != state.fock.n_modes:
        raise ValueError("velocity-gauge occupations need the modes the state was built with")
    return _displaced_occupation(state, velocity_displacement(modes))
