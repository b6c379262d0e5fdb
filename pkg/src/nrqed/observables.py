"""Densities, density differences, dipole strength functions and Lorentzian fits."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np
from scipy.optimize import curve_fit

from .matter import Grid1D, MatterBasis
from .pauli_fierz import CoupledState

__all__ = [
    "DensityProfile",
    "SpectrumData",
    "FitError",
    "density",
    "integrated_density_diff",
    "signed_density_diff",
    "lorentzian",
    "default_omega_grid",
    "dipole_strength",
    "lorentzian_fit",
    "trk_sum",
    "DEFAULT_BROADENING",
]

DEFAULT_BROADENING = 0.0034


class FitError(RuntimeError):
    def __init__(self, message: str, residual: float = float("nan")):
        super().__init__(message)
        self.residual = residual


@dataclass(frozen=True)
class DensityProfile:
    """One-body density sampled on a 1D grid; integrates to ``n_electrons``."""

    grid: Grid1D
    values: np.ndarray
    n_electrons: int = 1

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.grid.n,):
            raise ValueError("density must be sampled on every grid point")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def x(self) -> np.ndarray:
        return self.grid.x

    def norm(self) -> float:
        return float(self.grid.dx * np.sum(self.values))

    def peak(self) -> float:
        return float(np.max(self.values))

    def width(self) -> float:
        """Root-mean-square spread about the mean position."""
        x = self.grid.x
        w = self.values / np.sum(self.values)
        mean = float(np.sum(w * x))
        return math.sqrt(float(np.sum(w * (x - mean) ** 2)))


StateLike = Union[CoupledState, np.ndarray]


def _reduced_density_matrix(state: StateLike, n_states: int) -> np.ndarray:
    if isinstance(state, CoupledState):
        return state.matter_density_matrix()
    c = np.asarray(state, dtype=float)
    if c.ndim == 1:
        if c.size != n_states:
            raise ValueError("matter coefficient vector does not match the basis")
        return np.outer(c, c)
    if c.shape == (n_states, n_states):
        return c
    if c.ndim == 2 and c.shape[0] == n_states:
        return c @ c.T
    raise ValueError(f"cannot interpret state of shape {c.shape}")


def density(state: StateLike, mb: Optional[MatterBasis] = None) -> DensityProfile:
    """Ground-state one-body density ``n(x) = sum_ij rho_ij psi_i(x) psi_j(x)``.

    ``state`` is a CoupledState, a vector of matter coefficients or a matter
    density matrix.  For two electrons on a product grid the second
    coordinate is integrated out and the result integrates to 2.
    """
    if mb is None:
        if not isinstance(state, CoupledState):
            raise ValueError("a matter basis is required for bare coefficient vectors")
        mb = state.matter
    rho = _reduced_density_matrix(state, mb.n_states)
    grid = mb.grid
    psi = mb.wavefunctions
    if mb.n_electrons == 1:
        n = np.einsum("xi,ij,xj->x", psi, rho, psi, optimize=True)
    elif mb.n_electrons == 2:
        p = psi.reshape(grid.n, grid.n, mb.n_states)
        pair = np.einsum("abi,ij,abj->a", p, rho, p, optimize=True)
        n = 2.0 * pair * grid.dx
    else:
        raise ValueError("densities are implemented for one or two electrons")
    return DensityProfile(grid, n, mb.n_electrons)


def _check_same_grid(a: DensityProfile, b: DensityProfile):
    if a.grid != b.grid:
        raise ValueError("density profiles live on different grids")


def integrated_density_diff(a: DensityProfile, b: DensityProfile, signed: bool = False):
    """``dx * sum |n_a - n_b|``; with ``signed`` also return ``n_a - n_b`` pointwise."""
    _check_same_grid(a, b)
    diff = a.values - b.values
    total = float(a.grid.dx * np.sum(np.abs(diff)))
    if signed:
        return total, diff
    return total


def signed_density_diff(a: DensityProfile, b: DensityProfile) -> np.ndarray:
    _check_same_grid(a, b)
    return a.values - b.values


def lorentzian(omega, center, gamma):
    """Unit-area Lorentzian with half width at half maximum ``gamma``."""
    omega = np.asarray(omega, dtype=float)
    return (gamma / math.pi) / ((omega - center) ** 2 + gamma**2)


def default_omega_grid(energies: np.ndarray, n: int = 2000) -> np.ndarray:
    top = 1.2 * float(np.max(energies)) if len(energies) else 1.0
    return np.linspace(0.0, top, n)


@dataclass(frozen=True)
class SpectrumData:
    energies: np.ndarray
    strengths: np.ndarray
    gamma: float
    omega: np.ndarray
    curve: np.ndarray

    def __post_init__(self):
        if self.gamma <= 0:
            raise ValueError("broadening must be positive")
        if np.any(np.asarray(self.strengths) < 0):
            raise ValueError("strengths must be non-negative")

    def evaluate(self, omega) -> np.ndarray:
        omega = np.asarray(omega, dtype=float)
        out = np.zeros_like(omega)
        for e, s in zip(self.energies, self.strengths):
            out += s * lorentzian(omega, e, self.gamma)
        return out

    def total_strength(self) -> float:
        return float(np.sum(self.strengths))

    def brightest(self) -> int:
        return int(np.argmax(self.strengths))


def _transition_dipole(ground: CoupledState, excited: CoupledState) -> float:
    if ground.amplitudes.shape != excited.amplitudes.shape:
        raise ValueError("states come from different bases")
    # <Psi_0| mu (x) 1 |Psi_n>
    return float(np.sum(ground.amplitudes * (ground.matter.dipole @ excited.amplitudes)))


def dipole_strength(ground: CoupledState, excited: Sequence[CoupledState],
                    gamma: float = DEFAULT_BROADENING,
                    omega: Optional[np.ndarray] = None) -> SpectrumData:
    """``S(w) = sum_n 2 w_n |<0|x|n>|^2 L_gamma(w - w_n)`` with unit-area Lorentzians."""
    energies = np.array([s.energy - ground.energy for s in excited], dtype=float)
    dips = np.array([_transition_dipole(ground, s) for s in excited], dtype=float)
    strengths = 2.0 * energies * dips**2
    strengths = np.where(strengths < 0, 0.0, strengths)
    if omega is None:
        omega = default_omega_grid(energies)
    omega = np.asarray(omega, dtype=float)
    curve = np.zeros_like(omega)
    for e, s in zip(energies, strengths):
        curve += s * lorentzian(omega, e, gamma)
    return SpectrumData(energies, strengths, float(gamma), omega, curve)


def trk_sum(mb: MatterBasis, state: int = 0) -> float:
    """``sum_n 2 (E_n - E_0) |mu_0n|^2``; tends to ``N_e / m`` as the basis grows."""
    de = mb.energies - mb.energies[state]
    return float(np.sum(2.0 * de * mb.dipole[state] ** 2))


def _model(omega, center, gamma, amplitude):
    return amplitude * lorentzian(omega, center, gamma)


def lorentzian_fit(spectrum: SpectrumData, window: tuple[float, float],
                   gamma: Optional[float] = None, omega: Optional[np.ndarray] = None,
                   values: Optional[np.ndarray] = None) -> tuple[float, float, float]:
    """Least-squares single Lorentzian ``A L_gamma(w - w0)`` to the curve inside ``window``.

    With ``gamma`` given the width is held fixed.  Returns ``(w0, gamma, A)``.
    The curve is re-evaluated on a fine grid inside the window unless
    explicit samples are passed.
    """
    lo, hi = window
    if not hi > lo:
        raise ValueError("empty fit window")
    if values is None:
        omega = np.linspace(lo, hi, 4001) if omega is None else np.asarray(omega, dtype=float)
        sel = (omega >= lo) & (omega <= hi)
        omega = omega[sel]
        values = spectrum.evaluate(omega)
    else:
        omega = np.asarray(omega, dtype=float)
        values = np.asarray(values, dtype=float)
        sel = (omega >= lo) & (omega <= hi)
        omega, values = omega[sel], values[sel]
    if omega.size < 4:
        raise ValueError("fit window contains too few samples")
    i = int(np.argmax(values))
    c0 = float(omega[i])
    g0 = float(gamma) if gamma is not None else spectrum.gamma
    a0 = float(values[i]) * math.pi * g0
    scale = float(np.max(np.abs(values))) or 1.0
    try:
        if gamma is None:
            popt, _ = curve_fit(_model, omega, values, p0=(c0, g0, a0),
                                bounds=([lo, 1e-12, 0.0], [hi, np.inf, np.inf]),
                                xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=20000)
            c, g, a = popt
        else:
            def fixed(w, center, amplitude):
                return _model(w, center, gamma, amplitude)

            popt, _ = curve_fit(fixed, omega, values, p0=(c0, a0),
                                bounds=([lo, 0.0], [hi, np.inf]),
                                xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=20000)
            (c, a), g = popt, float(gamma)
    except (RuntimeError, ValueError) as exc:
        raise FitError(f"Lorentzian fit did not converge: {exc}") from exc
    resid = float(np.sqrt(np.mean((_model(omega, c, g, a) - values) ** 2)) / scale)
    if not np.all(np.isfinite([c, g, a])):
        raise FitError("Lorentzian fit produced non-finite parameters", resid)
    return float(c), float(g), float(a)
