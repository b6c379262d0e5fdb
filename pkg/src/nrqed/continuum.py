"""Sampled photon continuum and the closed-form free-particle results.

Everything here is in adapted units: e = 4*pi*eps0 = hbar = m_electron(bare) = 1.

The A^2 (diamagnetic) term of a single free charge coupled to ``N_p`` modes
turns the photon frequency matrix into the rank-one update
``W = diag(omega**2) + d d^T``.  Its eigenvalues are the dressed photon
frequencies and ``g = d^T W^{-1} d`` is the total multimode coupling that
renormalizes the mass, ``m_e = m / (1 - g)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import brentq

__all__ = [
    "ModeContinuum",
    "Species",
    "ELECTRON",
    "PROTON",
    "NormalModeSet",
    "DispersionPoint",
    "CouplingConsistencyError",
    "sample_equidistant",
    "coupling_vector",
    "normal_modes",
    "secular_roots",
    "multimode_coupling_g",
    "g_routes",
    "renormalized_mass",
    "photon_induced_mass",
    "bare_mass",
    "dispersion_analytic",
    "dispersion_length_gauge_single_mode",
    "perturbative_g",
    "PROTON_MASS",
]

PROTON_MASS = 1836.0
G_ROUTE_RTOL = 1e-12


class CouplingConsistencyError(ArithmeticError):
    """The independent evaluations of g disagree."""


@dataclass(frozen=True)
class ModeContinuum:
    """Discrete photon modes: frequencies (ascending) and per-mode couplings."""

    frequencies: np.ndarray
    couplings: np.ndarray

    def __post_init__(self):
        w = np.atleast_1d(np.asarray(self.frequencies, dtype=float))
        lam = np.broadcast_to(np.asarray(self.couplings, dtype=float), w.shape).copy()
        if w.size < 1:
            raise ValueError("a continuum needs at least one mode")
        if not np.all(np.isfinite(w)) or w[0] <= 0.0:
            raise ValueError("mode frequencies must be finite and positive")
        if np.any(np.diff(w) <= 0.0):
            raise ValueError("mode frequencies must be strictly ascending")
        if not np.all(np.isfinite(lam)) or np.any(lam < 0.0):
            raise ValueError("couplings must be finite and non-negative")
        w.setflags(write=False)
        lam.setflags(write=False)
        object.__setattr__(self, "frequencies", w)
        object.__setattr__(self, "couplings", lam)

    @property
    def n_modes(self) -> int:
        return int(self.frequencies.size)

    def __len__(self) -> int:
        return self.n_modes

    def lowest(self, n: int) -> "ModeContinuum":
        """The ``n`` lowest modes (a lower photon cutoff on the same grid)."""
        if not 1 <= n <= self.n_modes:
            raise ValueError(f"cannot take {n} of {self.n_modes} modes")
        return ModeContinuum(self.frequencies[:n], self.couplings[:n])

    def with_coupling(self, coupling) -> "ModeContinuum":
        return ModeContinuum(self.frequencies, coupling)

    @property
    def zero_point(self) -> float:
        return 0.5 * float(np.sum(self.frequencies))


@dataclass(frozen=True)
class Species:
    """A kind of charged particle: bare mass, charge magnitude (units of e), count."""

    mass: float
    charge: float = 1.0
    count: int = 1

    def __post_init__(self):
        if not self.mass > 0.0:
            raise ValueError("mass must be positive")
        if not self.charge > 0.0:
            raise ValueError("charge magnitude must be positive")
        if int(self.count) != self.count or self.count < 1:
            raise ValueError("particle count must be a positive integer")


ELECTRON = Species(mass=1.0)
PROTON = Species(mass=PROTON_MASS)


@dataclass(frozen=True)
class NormalModeSet:
    """Dressed photon modes of a free charge.

    ``rotation[:, j]`` expresses dressed mode ``j`` in the bare-mode basis.
    ``shift[j] = omega[j]**2 - bare[j]**2`` is kept separately because it is
    obtained without cancellation from the secular equation.
    """

    bare: np.ndarray
    omega: np.ndarray
    rotation: np.ndarray
    coupling: np.ndarray
    g: float
    shift: np.ndarray

    @property
    def diamagnetic(self) -> np.ndarray:
        """Per-mode diamagnetic frequency (equal to the coupling vector)."""
        return np.abs(self.coupling)

    @property
    def projected_coupling(self) -> np.ndarray:
        return self.rotation.T @ self.coupling

    @property
    def zero_point(self) -> float:
        return 0.5 * float(np.sum(self.omega))


@dataclass(frozen=True)
class DispersionPoint:
    k: float
    occupations: np.ndarray
    energy: float


def sample_equidistant(
    w_min: float,
    w_max: float,
    n_modes: int,
    coupling: float | Sequence[float] = 0.0,
    spacing: Optional[float] = None,
) -> ModeContinuum:
    """Equidistant photon modes on ``[w_min, w_max]``, endpoints included.

    With ``spacing`` given the grid instead starts at ``w_min`` with that fixed
    step (``w_max`` is then ignored).
    """
    if not w_min > 0.0:
        raise ValueError("lower frequency cutoff must be positive; a zero-frequency mode "
                         "has no consistent matter length scale")
    if n_modes < 1:
        raise ValueError("n_modes must be >= 1")
    if spacing is not None:
        if not spacing > 0.0:
            raise ValueError("spacing must be positive")
        w = w_min + spacing * np.arange(n_modes)
    else:
        if w_max < w_min:
            raise ValueError("need w_min <= w_max")
        if n_modes == 1:
            w = np.array([w_min])
        else:
            w = w_min + np.arange(n_modes) * ((w_max - w_min) / (n_modes - 1))
            w[-1] = w_max
    return ModeContinuum(w, coupling)


def coupling_vector(modes: ModeContinuum, species: Species) -> np.ndarray:
    """d_alpha = Z * lambda_alpha * sqrt(N / m)."""
    return species.charge * modes.couplings * math.sqrt(species.count / species.mass)


def secular_roots(a: np.ndarray, d: np.ndarray):
    """Eigenvalues of ``diag(a) + d d^T`` for strictly ascending ``a`` and nonzero ``d``.

    Returns ``(origin_index, delta)``: root ``j`` equals ``a[origin_index[j]] + delta[j]``.
    Each root is bracketed between consecutive poles and solved relative to the
    nearer pole, which keeps ``root - a_i`` free of cancellation.
    """
    n = a.size
    d2 = d * d
    norm2 = float(np.sum(d2))
    origin = np.empty(n, dtype=int)
    delta = np.empty(n)

    def f(x, o):
        with np.errstate(divide="ignore", over="ignore"):
            return 1.0 + np.sum(d2 / ((a - a[o]) - x))

    for j in range(n):
        if j < n - 1:
            gap = a[j + 1] - a[j]
            o = j if f(0.5 * gap, j) > 0.0 else j + 1
            lo = (a[j] - a[o])
            hi = (a[j + 1] - a[o])
        else:
            o = j
            lo, hi = 0.0, norm2
            while f(hi, o) < 0.0:  # rounding guard; analytically f(norm2) >= 0
                hi *= 1.0 + 1e-12
        lo_in = np.nextafter(lo, hi)
        hi_in = np.nextafter(hi, lo)
        flo, fhi = f(lo_in, o), f(hi_in, o)
        if flo >= 0.0:
            x = lo_in
        elif fhi <= 0.0:
            x = hi_in
        else:
            x = brentq(f, lo_in, hi_in, args=(o,), xtol=1e-300, rtol=4 * np.finfo(float).eps,
                       maxiter=500)
        origin[j] = o
        delta[j] = x
    return origin, delta


def normal_modes(modes: ModeContinuum, d) -> NormalModeSet:
    """Diagonalize ``W = diag(omega**2) + d d^T`` through its secular equation.

    Eigenvectors use the Loewner (Gu-Eisenstat) reconstruction of the coupling
    vector from the computed roots, which keeps them orthogonal to working
    precision even for tightly interlaced roots.
    """
    w = modes.frequencies
    d = np.asarray(d, dtype=float)
    if d.shape != w.shape:
        raise ValueError(f"coupling vector has length {d.size}, expected {w.size}")
    a = w * w
    n = a.size
    active = np.flatnonzero(d != 0.0)
    # every eigenvalue is stored as base + offset with base a pole of W
    base = a.copy()
    offset = np.zeros(n)
    rotation = np.eye(n)
    if active.size:
        aa = a[active]
        dd = d[active]
        origin, delta = secular_roots(aa, dd)
        m = aa.size
        # diff[i, j] = root_j - aa_i, evaluated relative to the root's pole
        diff = (aa[origin][None, :] - aa[:, None]) + delta[None, :]
        # Loewner formula for the coupling vector consistent with the roots
        zhat2 = np.empty(m)
        for i in range(m):
            prod = diff[i, m - 1]
            for j in range(i):
                prod *= diff[i, j] / (aa[j] - aa[i])
            for j in range(i, m - 1):
                prod *= diff[i, j] / (aa[j + 1] - aa[i])
            zhat2[i] = prod
        zhat = np.sqrt(np.abs(zhat2)) * np.sign(dd)
        vecs = zhat[:, None] / (-diff)
        vecs /= np.linalg.norm(vecs, axis=0)
        base[active] = aa[origin]
        offset[active] = delta
        rotation[:, active] = 0.0
        rotation[np.ix_(active, active)] = vecs
    omega2 = base + offset
    order = np.argsort(omega2, kind="stable")
    omega2 = omega2[order]
    rotation = rotation[:, order]
    shift_sorted = (base[order] - a) + offset[order]
    # fix eigenvector sign so the largest component is positive
    signs = np.sign(rotation[np.argmax(np.abs(rotation), axis=0), np.arange(n)])
    rotation = rotation * signs
    omega = np.sqrt(omega2)
    nm = NormalModeSet(bare=w, omega=omega, rotation=rotation, coupling=d,
                       g=0.0, shift=shift_sorted)
    g = _g_checked(a, d, nm)
    return NormalModeSet(bare=w, omega=omega, rotation=rotation, coupling=d, g=g,
                         shift=shift_sorted)


def _route_sherman_morrison(a: np.ndarray, d: np.ndarray) -> float:
    s = float(np.sum(d * d / a))
    return s / (1.0 + s)


def _route_projection(nm: NormalModeSet) -> float:
    p = nm.rotation.T @ nm.coupling
    return float(np.sum(p * p / (nm.omega * nm.omega)))


def _route_determinant(a: np.ndarray, nm: NormalModeSet) -> float:
    # 1 - prod(a)/prod(Omega^2) = -expm1(-sum log(Omega^2 / a))
    return float(-np.expm1(-np.sum(np.log1p(nm.shift / a))))


def g_routes(modes: ModeContinuum, d, nm: Optional[NormalModeSet] = None) -> dict[str, float]:
    """The three evaluations of g: projection, Sherman-Morrison and determinant ratio."""
    d = np.asarray(d, dtype=float)
    a = modes.frequencies ** 2
    if nm is None:
        nm = normal_modes(modes, d)
    return {
        "projection": _route_projection(nm),
        "sherman_morrison": _route_sherman_morrison(a, d),
        "determinant": _route_determinant(a, nm),
    }


def _g_checked(a: np.ndarray, d: np.ndarray, nm: NormalModeSet) -> float:
    g = _route_sherman_morrison(a, d)
    if g == 0.0:
        return 0.0
    for name, other in (("projection", _route_projection(nm)),
                        ("determinant", _route_determinant(a, nm))):
        if abs(other - g) > G_ROUTE_RTOL * abs(g):
            raise CouplingConsistencyError(
                f"{name} route gives g={other!r}, Sherman-Morrison gives {g!r} "
                f"(relative difference {abs(other - g) / abs(g):.2e})"
            )
    return g


def multimode_coupling_g(modes: ModeContinuum, d) -> float:
    """Total multimode coupling ``g = d^T W^{-1} d = S / (1 + S)``, ``S = sum d^2/omega^2``.

    The projection and determinant routes are evaluated as well and must
    agree with the returned Sherman-Morrison value to 1e-12 relative.
    """
    d = np.asarray(d, dtype=float)
    if d.shape != modes.frequencies.shape:
        raise ValueError("coupling vector length does not match the number of modes")
    return normal_modes(modes, d).g


def renormalized_mass(m: float, g: float) -> float:
    """Observable mass ``m / (1 - g)``."""
    if not m > 0.0:
        raise ValueError("bare mass must be positive")
    if not 0.0 <= g < 1.0:
        raise ValueError(f"multimode coupling must lie in [0, 1), got {g}")
    return m / (1.0 - g)


def photon_induced_mass(m: float, g: float) -> float:
    """``m_pt = m_e - m``; equals ``m * g / (1 - g)``."""
    return renormalized_mass(m, g) - m


def bare_mass(m_observed: float, g: float) -> float:
    """Cutoff-dependent bare mass ``m(N_p) = m_e (1 - g(N_p))``."""
    if not 0.0 <= g <= 1.0:
        raise ValueError(f"multimode coupling must lie in [0, 1], got {g}")
    return m_observed * (1.0 - g)


def dispersion_analytic(
    k: float,
    nm: NormalModeSet,
    species: Species = ELECTRON,
    occupations=None,
    subtract_zero_point: bool = False,
) -> DispersionPoint:
    """E = k^2/(2m) (1 - g) + sum_alpha Omega_alpha (n_alpha + 1/2)."""
    n = nm.omega.size
    occ = np.zeros(n, dtype=int) if occupations is None else np.asarray(occupations, dtype=int)
    if occ.shape != (n,) or np.any(occ < 0):
        raise ValueError("occupations must be non-negative integers, one per mode")
    energy = 0.5 * k * k / species.mass * (1.0 - nm.g) + float(np.sum(nm.omega * (occ + 0.5)))
    if subtract_zero_point:
        energy -= nm.zero_point
    return DispersionPoint(k=float(k), occupations=occ, energy=energy)


def dispersion_length_gauge_single_mode(k: float, omega: float, coupling: float,
                                        m: float = 1.0, n: int = 0) -> float:
    """Single-mode free-particle dispersion solved in the length gauge.

    Uses the centre-of-mass / relative split of the electron and displacement
    coordinates: a free polaritonic coordinate ``w`` of mass ``mbar + 1``
    (``mbar = m omega^2 / lambda^2``), a relative oscillator of frequency
    ``sqrt(omega^2 + lambda^2/m)``, and the momentum map ``k_w = (omega/lambda) k``.
    """
    if n < 0:
        raise ValueError("n must be non-negative")
    if coupling == 0.0:
        return 0.5 * k * k / m + omega * (n + 0.5)
    mbar = m * omega * omega / (coupling * coupling)
    omega_rel = omega * math.sqrt((mbar + 1.0) / mbar)
    k_w = omega / coupling * k
    return 0.5 * k_w * k_w / (mbar + 1.0) + omega_rel * (n + 0.5)


def perturbative_g(lower: float, upper: float = math.inf, prefactor: float = 1.0) -> float:
    """Second-order multimode coupling ``prefactor * (1/lower - 1/upper)``.

    ``upper=math.inf`` gives the UV-converged value ``prefactor / lower``.
    """
    if lower == 0.0:
        raise ValueError("perturbative coupling is infrared divergent: lower cutoff 0 "
                         "gives g -> infinity")
    if not 0.0 < lower <= upper:
        raise ValueError("need 0 < lower <= upper")
    return prefactor * (1.0 / lower - 1.0 / upper)
