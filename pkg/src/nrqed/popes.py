"""Polaritonic potential-energy surfaces of 1D H2 and their Morse analysis."""
from __future__ import annotations

import hashlib
import json
import logging
import math
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import least_squares

from .continuum import (PROTON, ModeContinuum, Species, coupling_vector,
                        multimode_coupling_g, renormalized_mass)
from .matter import Grid1D, H2Model, MatterBasis, h2_matter_basis
from .pauli_fierz import (CouplingConfig, assemble_bqm_dse, assemble_length_gauge,
                          effective_single_mode, ground_state)

__all__ = [
    "PESCurve",
    "MorseFit",
    "MatterCache",
    "PlateauWarning",
    "default_r_grid",
    "pes_scan",
    "dissociation_energy",
    "morse",
    "morse_fit",
    "harmonic_frequency",
    "proton_renormalized_mass",
    "qm_model",
]

log = logging.getLogger(__name__)

PLATEAU_TOL = 1e-4


class PlateauWarning(UserWarning):
    pass


@dataclass(frozen=True)
class PESCurve:
    R: np.ndarray
    energies: np.ndarray
    label: str = "bare"
    n_modes: int = 0
    coupling: float = 0.0
    residuals: Optional[np.ndarray] = None

    def __post_init__(self):
        r = np.asarray(self.R, dtype=float)
        e = np.asarray(self.energies, dtype=float)
        if r.ndim != 1 or r.shape != e.shape or r.size < 3:
            raise ValueError("need matching 1D arrays of at least three R points")
        if np.any(np.diff(r) <= 0) or r[0] <= 0:
            raise ValueError("R must be positive and strictly ascending")
        if not np.all(np.isfinite(e)):
            raise ValueError("PES energies must be finite")
        object.__setattr__(self, "R", r)
        object.__setattr__(self, "energies", e)

    @property
    def argmin(self) -> int:
        return int(np.argmin(self.energies))

    @property
    def R_eq(self) -> float:
        return float(self.R[self.argmin])

    @property
    def E_min(self) -> float:
        return float(self.energies[self.argmin])

    def has_interior_minimum(self) -> bool:
        return 0 < self.argmin < self.R.size - 1


@dataclass(frozen=True)
class MorseFit:
    D_e: float
    a: float
    C: float
    R_eq: float
    omega_e: float
    residual: float
    mu_n: float

    @property
    def force_constant(self) -> float:
        return 2.0 * self.D_e * self.a**2


def default_r_grid(dR: float = 0.1, r_max: float = 9.0) -> np.ndarray:
    """Uniform grid on ``(0, r_max]`` with spacing ``dR``."""
    n = int(round(r_max / dR))
    return dR * np.arange(1, n + 1)


# ---------------------------------------------------------------- matter cache


class MatterCache:
    """Disk cache of per-R clamped-nuclei solves (energies and dipole matrices).

    The cache key covers R, grid, model parameters, state count and the
    symmetry choice, so a hit reproduces a cold solve bit for bit.
    """

    def __init__(self, directory: os.PathLike | str):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)

    @staticmethod
    def key(R: float, grid: Grid1D, model: H2Model, n_states: int, symmetric: bool) -> str:
        payload = json.dumps({
            "R": float(R).hex(), "grid": [float(grid.x_min).hex(), float(grid.dx).hex(), grid.n,
                                          grid.boundary],
            "model": [float(v).hex() for v in (model.a_ee, model.a_en, model.nuclear_mass,
                                               model.electron_mass)],
            "n_states": n_states, "symmetric": bool(symmetric),
        }, sort_keys=True)
        return hashlib.sha256(payload.encode()).hexdigest()[:32]

    def load(self, key: str, grid: Grid1D) -> Optional[MatterBasis]:
        path = self.directory / f"h2-{key}.npz"
        if not path.exists():
            return None
        with np.load(path) as data:
            energies, dipole = data["energies"], data["dipole"]
        return MatterBasis(energies, np.zeros((0, energies.size)), dipole, grid, 2)

    def store(self, key: str, mb: MatterBasis):
        path = self.directory / f"h2-{key}.npz"
        tmp = path.with_suffix(".tmp.npz")
        np.savez(tmp, energies=mb.energies, dipole=mb.dipole)
        os.replace(tmp, path)


def _matter_at(R, grid, model, n_states, symmetric, cache_dir, seed):
    cache = MatterCache(cache_dir) if cache_dir else None
    if cache is not None:
        key = cache.key(R, grid, model, n_states, symmetric)
        hit = cache.load(key, grid)
        if hit is not None:
            return hit
    mb = h2_matter_basis(R, grid, model, n_states, symmetric=symmetric, seed=seed)
    if cache is not None:
        cache.store(key, mb)
    return mb


def _coupled_energy(mb: MatterBasis, photons: Optional[ModeContinuum], cfg: CouplingConfig):
    if photons is None:
        return float(mb.energies[0]), 0.0
    if cfg.gauge == "bqm_dse":
        h = assemble_bqm_dse(mb, photons)
        st = ground_state(h, mb)
        return st.energy, st.residual
    h, fb = assemble_length_gauge(mb, photons, cfg)
    st = ground_state(h, mb, fb)
    used = effective_single_mode(photons, cfg.strategy) if cfg.gauge == "effective_single" else photons
    return st.energy - used.zero_point, st.residual


def _scan_point(args):
    R, grid, model, n_states, photons, cfg, symmetric, cache_dir, seed = args
    try:
        mb = _matter_at(R, grid, model, n_states, symmetric, cache_dir, seed)
        return _coupled_energy(mb, photons, cfg)
    except Exception as exc:  # noqa: BLE001 - rewrapped with the failing R
        raise RuntimeError(f"PES point R={R:g} failed: {exc}") from exc


def pes_scan(R: Sequence[float], model: H2Model, n_states: int, grid: Grid1D,
             photons: Optional[ModeContinuum] = None,
             cfg: CouplingConfig = CouplingConfig(), label: Optional[str] = None,
             symmetric: bool = True, cache_dir: Optional[str] = None,
             workers: int = 1, seed: int = 0) -> PESCurve:
    """Ground-state PES ``E(R)`` of H2, optionally dressed by photons.

    With photons the vacuum zero-point energy of the modes is removed.
    R points are independent; with ``workers > 1`` they run in a process
    pool and are collected in input order.
    """
    R = np.asarray(R, dtype=float)
    tasks = [(float(r), grid, model, n_states, photons, cfg, symmetric, cache_dir, seed) for r in R]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            out = list(pool.map(_scan_point, tasks))
    else:
        out = [_scan_point(t) for t in tasks]
    energies = np.array([e for e, _ in out])
    residuals = np.array([r for _, r in out])
    if label is None:
        label = "bare" if photons is None else {"length": "NRQED", "bqm_dse": "bQM+DSE",
                                                "effective_single": "effective-mode"}[cfg.gauge]
    n_modes = 0 if photons is None else photons.n_modes
    lam = 0.0 if photons is None else float(np.max(photons.couplings))
    return PESCurve(R, energies, label, n_modes, lam, residuals)


def dissociation_energy(curve: PESCurve, check_plateau: bool = True) -> float:
    """``D_e = E(R_max) - min_R E(R)``."""
    if not curve.has_interior_minimum():
        raise ValueError("PES has no interior minimum; cannot define a dissociation energy")
    if check_plateau:
        tail = abs(curve.energies[-1] - np.interp(curve.R[-1] - 1.0, curve.R, curve.energies))
        if tail >= PLATEAU_TOL:
            warnings.warn(f"PES not flat at R_max: |E(R_max) - E(R_max - 1)| = {tail:.2e}",
                          PlateauWarning, stacklevel=2)
    return float(curve.energies[-1] - curve.E_min)


def morse(R, D_e, a, R_eq, C):
    return D_e * (np.exp(-a * (np.asarray(R) - R_eq)) - 1.0) ** 2 + C


def harmonic_frequency(D_e: float, a: float, mu_n: float) -> float:
    """``omega_e = sqrt(2 D_e a^2 / mu_n)``."""
    if not (D_e > 0 and a > 0 and mu_n > 0):
        raise ValueError("D_e, a and mu_n must be positive")
    return math.sqrt(2.0 * D_e * a * a / mu_n)


def morse_fit(curve: PESCurve, R_eq: Optional[float] = None, D_e: Optional[float] = None,
              C: Optional[float] = None, mu_n: float = 0.5 * PROTON.mass,
              window: Optional[tuple[float, float]] = None, a0: float = 1.0) -> MorseFit:
    """Least-squares Morse width ``a`` with ``R_eq``, ``D_e`` and ``C`` fixed from the curve."""
    R_eq = curve.R_eq if R_eq is None else float(R_eq)
    D_e = dissociation_energy(curve) if D_e is None else float(D_e)
    C = curve.E_min if C is None else float(C)
    r, e = curve.R, curve.energies
    if window is not None:
        sel = (r >= window[0]) & (r <= window[1])
        r, e = r[sel], e[sel]
    if r.size < 2:
        raise ValueError("fit window holds fewer than two points")

    def resid(p):
        return morse(r, D_e, p[0], R_eq, C) - e

    sol = least_squares(resid, x0=[a0], bounds=([1e-8], [np.inf]), xtol=1e-15, ftol=1e-15,
                        gtol=1e-15)
    res = float(np.sqrt(np.mean(sol.fun**2)))
    if not sol.success or not sol.x[0] > 0:
        raise RuntimeError(f"Morse fit failed ({sol.message}); rms residual {res:.3e}")
    a = float(sol.x[0])
    return MorseFit(D_e, a, C, R_eq, harmonic_frequency(D_e, a, mu_n), res, mu_n)


def proton_renormalized_mass(modes: ModeContinuum, proton: Species = PROTON) -> float:
    """Observable nuclear mass ``M / (1 - g_p)`` for a nucleus coupled to ``modes``."""
    g = multimode_coupling_g(modes, coupling_vector(modes, proton))
    return renormalized_mass(proton.mass, g)


def qm_model(modes: ModeContinuum, base: H2Model = H2Model()) -> H2Model:
    """H2 model with both electron and proton masses replaced by their renormalized values."""
    m_e = renormalized_mass(base.electron_mass,
                            multimode_coupling_g(modes, coupling_vector(
                                modes, Species(mass=base.electron_mass))))
    m_p = proton_renormalized_mass(modes, Species(mass=base.nuclear_mass))
    return replace(base, electron_mass=m_e, nuclear_mass=m_p)
