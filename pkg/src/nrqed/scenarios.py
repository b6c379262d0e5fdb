"""Registered scenarios: parameter sweeps that write CSV tables and a run manifest.

Each scenario has a ``desk`` preset (minutes on one core, reduced sizes) and a
``full`` preset (production sizes: 200 modes, 10 matter states, a 200x200
H2 grid).  A config selects a scenario and preset and may override any
preset parameter.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
import platform
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Optional

import numpy as np
import yaml

from . import __version__
from .continuum import (ELECTRON, ModeContinuum, coupling_vector, multimode_coupling_g,
                        perturbative_g, renormalized_mass, sample_equidistant)
from .matter import (AtomModel, Grid1D, GridWarning, H2Model, atom_matter_basis,
                     h2_matter_basis)
from .observables import (DEFAULT_BROADENING, DensityProfile, density, dipole_strength,
                          integrated_density_diff, lorentzian_fit)
from .pauli_fierz import (CouplingConfig, assemble_bqm_dse, assemble_length_gauge,
                          excited_states, ground_state, numeric_free_dispersion,
                          photon_occupation)
from .popes import (default_r_grid, dissociation_energy, morse_fit, pes_scan,
                    qm_model)

__all__ = [
    "Scenario",
    "ScenarioConfig",
    "RunManifest",
    "SCENARIOS",
    "ConfigError",
    "load_config",
    "validate_config",
    "run_scenario",
    "list_scenarios",
    "config_template",
    "cache_dir",
    "CACHE_ENV",
]

CACHE_ENV = "NRQED_CACHE_DIR"
PRESETS = ("desk", "full")

REFERENCE_MASSES = {0.0019: 1.1683661411, 0.0012: 1.0673464565, 0.0009: 1.0336732282}
REFERENCE_MORSE = {"QM": (1.1306567, 0.0202009), "NRQED": (1.18811731, 0.0217312)}
BARE_H2_OMEGA_E = 0.020455


class ConfigError(ValueError):
    pass


def cache_dir() -> Path:
    env = os.environ.get(CACHE_ENV)
    return Path(env) if env else Path.home() / ".cache" / "nrqed"


# ---------------------------------------------------------------- tables


@dataclass
class Table:
    columns: list[str]
    rows: list[list[Any]] = field(default_factory=list)

    def add(self, *values):
        if len(values) != len(self.columns):
            raise ValueError("row does not match the table header")
        self.rows.append(list(values))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        for row in self.rows:
            w.writerow([_fmt(v) for v in row])
        return buf.getvalue()


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


@dataclass
class Result:
    tables: dict[str, Table] = field(default_factory=dict)
    metadata: dict[str, Any] = field(default_factory=dict)
    residuals: list[float] = field(default_factory=list)


@dataclass
class Context:
    params: dict[str, Any]
    seed: int
    workers: int
    cache: Optional[str]

    def __getitem__(self, key):
        return self.params[key]

    def map(self, fn: Callable, items: list) -> list:
        """Evaluate sweep points, in a process pool when more than one worker is allowed."""
        if self.workers > 1 and len(items) > 1:
            with ProcessPoolExecutor(max_workers=self.workers) as pool:
                return list(pool.map(fn, items))
        return [fn(x) for x in items]


# ---------------------------------------------------------------- shared helpers


def _continuum(p, n_modes=None, coupling=0.0) -> ModeContinuum:
    full = sample_equidistant(p["omega_min"], p["omega_max"], p["n_sample"], coupling)
    return full if n_modes is None else full.lowest(int(n_modes))


def _electron_mass(modes: ModeContinuum) -> float:
    return renormalized_mass(1.0, multimode_coupling_g(modes, coupling_vector(modes, ELECTRON)))


def _atom_grid(p) -> Grid1D:
    return Grid1D.centered(int(p["grid_n"]), float(p["grid_dx"]))


def _atom_basis(p, mass=1.0, n_states=None):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", GridWarning)
        return atom_matter_basis(_atom_grid(p), AtomModel(mass=mass),
                                 int(n_states or p["n_states"]))


def _atom_nrqed(p, modes, seed=0):
    mb = _atom_basis(p)
    h, fb = assemble_length_gauge(mb, modes)
    return mb, ground_state(h, mb, fb, modes, seed=seed)


def _h2_grid(p) -> Grid1D:
    return Grid1D.centered(int(p["grid_n"]), float(p["grid_dx"]))


def _r_grid(p) -> np.ndarray:
    return default_r_grid(float(p["r_step"]), float(p["r_max"]))


# ---------------------------------------------------------------- scenarios


def _free_dispersion(ctx: Context) -> Result:
    p = ctx.params
    res = Result()
    t = Table(["k", "E_nrqed", "E_qm", "lambda"])
    ks = np.linspace(-p["k_max"], p["k_max"], int(p["n_k"]))
    for lam in p["couplings"]:
        modes = _continuum(p, p["n_modes"], lam)
        m_e = _electron_mass(modes) if lam > 0 else 1.0
        e0 = numeric_free_dispersion(0.0, modes)
        for k in ks:
            e = numeric_free_dispersion(float(k), modes) - e0
            t.add(float(k), e, 0.5 * k * k / m_e, lam)
        res.metadata[f"m_e[{lam}]"] = m_e
    res.tables["free_dispersion.csv"] = t
    return res


def _mass_vs_modes(ctx: Context) -> Result:
    p = ctx.params
    res = Result()
    sweep = Table(["lambda", "n_modes", "g", "m_e"])
    table = Table(["lambda", "m_e", "m_e_reference", "relative_deviation", "m_pt"])
    for lam in p["couplings"]:
        full = _continuum(p, None, lam)
        for n in p["n_modes_sweep"]:
            modes = full.lowest(int(n))
            g = multimode_coupling_g(modes, coupling_vector(modes, ELECTRON))
            sweep.add(lam, int(n), g, renormalized_mass(1.0, g))
        g = multimode_coupling_g(full, coupling_vector(full, ELECTRON))
        m_e = renormalized_mass(1.0, g)
        ref = REFERENCE_MASSES.get(float(lam), float("nan"))
        table.add(lam, m_e, ref, (m_e - ref) / ref if ref == ref else float("nan"), m_e - 1.0)
    res.tables["mass_vs_modes.csv"] = sweep
    res.tables["renormalized_masses.csv"] = table
    return res


def _atom_density_point(args):
    p, lam, seed = args
    modes = _continuum(p, p["n_modes"], lam)
    mb, st = _atom_nrqed(p, modes, seed)
    m_e = _electron_mass(modes)
    qm = _atom_basis(p, mass=m_e, n_states=1)
    # photon-number truncation check: one-photon space against the default two-photon space
    h1, f1 = assemble_length_gauge(mb, modes, CouplingConfig(max_photons=1))
    st1 = ground_state(h1, mb, f1, modes, seed=seed)
    trunc = (integrated_density_diff(density(st), density(st1)), st1.energy - st.energy)
    return (density(st).values, density(np.ones(1), qm).values,
            density(np.eye(mb.n_states)[0], mb).values, m_e, st.residual, trunc)


def _atom_density(ctx: Context) -> Result:
    p = ctx.params
    res = Result()
    grid = _atom_grid(p)
    prof = Table(["x", "lambda", "n_nrqed", "n_qm", "n_bare"])
    summ = Table(["lambda", "m_e", "delta_n_qm", "delta_n_bare", "peak_nrqed", "peak_qm",
                  "width_nrqed", "width_qm", "delta_n_1v2_photons", "delta_e_1v2_photons"])
    out = ctx.map(_atom_density_point, [(p, lam, ctx.seed) for lam in p["couplings"]])
    for lam, (nq, nqm, nb, m_e, r, trunc) in zip(p["couplings"], out):
        a, b, c = (DensityProfile(grid, v) for v in (nq, nqm, nb))
        for x, u, v, w in zip(grid.x, nq, nqm, nb):
            prof.add(float(x), lam, u, v, w)
        summ.add(lam, m_e, integrated_density_diff(a, b), integrated_density_diff(a, c),
                 a.peak(), b.peak(), a.width(), b.width(), *trunc)
        res.residuals.append(r)
    res.tables["atom_density.csv"] = prof
    res.tables["atom_density_summary.csv"] = summ
    return res


def _occupation_point(args):
    p, lam, seed = args
    modes = _continuum(p, p["n_modes"], lam)
    _mb, st = _atom_nrqed(p, modes, seed)
    return photon_occupation(st, p["gauge"]), st.residual


def _photon_occupation(ctx: Context) -> Result:
    p = ctx.params
    res = Result()
    t = Table(["mode_index", "omega", "n_occ", "lambda"])
    out = ctx.map(_occupation_point, [(p, lam, ctx.seed) for lam in p["couplings"]])
    for lam, (n, r) in zip(p["couplings"], out):
        modes = _continuum(p, p["n_modes"], lam)
        for i in range(min(int(p["n_report"]), modes.n_modes)):
            t.add(i + 1, float(modes.frequencies[i]), float(n[i]), lam)
        res.residuals.append(r)
    res.tables["photon_occupation.csv"] = t
    res.metadata["gauge"] = p["gauge"]
    res.metadata["velocity_displacement"] = "calibrated against a single-mode velocity-gauge oracle"
    return res


def _saturation_point(args):
    p, lam, n, seed = args
    modes = _continuum(p, n, lam)
    _mb, st = _atom_nrqed(p, modes, seed)
    m_e = _electron_mass(modes)
    nq = density(st)
    qm = density(np.ones(1), _atom_basis(p, mass=m_e, n_states=1))
    bare = density(np.eye(st.matter.n_states)[0], st.matter)
    g = multimode_coupling_g(modes, coupling_vector(modes, ELECTRON))
    return integrated_density_diff(nq, qm), integrated_density_diff(nq, bare), g, st.residual


def _density_saturation(ctx: Context) -> Result:
    p = ctx.params
    res = Result()
    t = Table(["lambda", "n_modes", "delta_n", "delta_n_bare", "g"])
    items = [(p, lam, int(n), ctx.seed) for lam in p["couplings"] for n in p["n_modes_sweep"]]
    for (_, lam, n, _s), (dn, dnb, g, r) in zip(items, ctx.map(_saturation_point, items)):
        t.add(lam, n, dn, dnb, g)
        res.residuals.append(r)
    res.tables["density_saturation.csv"] = t
    return res


def _bright_window(energies, strengths, half_width):
    bright = np.flatnonzero(strengths >= 0.1 * strengths.max())
    centre = float(energies[bright.min()])
    near = np.abs(energies - centre) <= half_width
    w = strengths[near]
    mean = float(np.sum(w * energies[near]) / np.sum(w))
    return (mean - half_width, mean + half_width), mean


def _absorption(ctx: Context) -> Result:
    p = ctx.params
    res = Result()
    lam, gamma = float(p["coupling"]), float(p["gamma"])
    modes = _continuum(p, p["n_modes"], lam)
    mb = _atom_basis(p)
    h, fb = assemble_length_gauge(mb, modes)
    k = min(int(p["n_excited"]), h.order - 1)
    g0, exc = excited_states(h, mb, fb, k, modes, seed=ctx.seed)
    m_e = _electron_mass(modes)
    qm = _atom_basis(p, mass=m_e)
    q0, qexc = excited_states(assemble_bqm_dse(qm, modes.with_coupling(0.0)), qm, None,
                              qm.n_states - 1)
    top = 1.2 * max(max(s.energy for s in exc) - g0.energy, qm.energies[-1] - qm.energies[0])
    omega = np.linspace(0.0, top, int(p["n_omega"]))
    s_nrqed = dipole_strength(g0, exc, gamma, omega)
    s_qm = dipole_strength(q0, qexc, gamma, omega)
    spec = Table(["omega", "S_nrqed", "S_qm"])
    for w, a, b in zip(omega, s_nrqed.curve, s_qm.curve):
        spec.add(float(w), float(a), float(b))
    lines = Table(["setting", "omega_n", "strength"])
    for label, s in (("NRQED", s_nrqed), ("QM", s_qm)):
        for e, f in zip(s.energies, s.strengths):
            lines.add(label, float(e), float(f))
    fits = Table(["setting", "omega_0", "gamma", "amplitude", "window_lo", "window_hi",
                  "cluster_mean"])
    for label, s in (("NRQED", s_nrqed), ("QM", s_qm)):
        window, mean = _bright_window(s.energies, s.strengths, float(p["fit_half_width"]))
        c, gfit, a = lorentzian_fit(s, window, gamma=gamma)
        fits.add(label, c, gfit, a, window[0], window[1], mean)
        res.metadata[f"fit_window[{label}]"] = list(window)
    res.tables["absorption_spectrum.csv"] = spec
    res.tables["absorption_lines.csv"] = lines
    res.tables["absorption_fit.csv"] = fits
    res.metadata["m_e"] = m_e
    res.residuals.extend(s.residual for s in [g0, *exc])
    return res


def _h2_scans(p, ctx, lam, n_modes, settings=("bare", "NRQED", "QM")):
    grid, R = _h2_grid(p), _r_grid(p)
    ns, cache = int(p["n_states"]), ctx.cache
    modes = _continuum(p, n_modes, lam) if n_modes else None
    curves = {}
    for s in settings:
        if s == "bare" or (s != "QM" and modes is None):
            curves[s] = pes_scan(R, H2Model(), ns, grid, cache_dir=cache, workers=ctx.workers,
                                 seed=ctx.seed)
        elif s == "NRQED":
            curves[s] = pes_scan(R, H2Model(), ns, grid, modes, cache_dir=cache,
                                 workers=ctx.workers, seed=ctx.seed)
        elif s == "QM":
            model = qm_model(modes) if modes is not None else H2Model()
            curves[s] = pes_scan(R, model, ns, grid, label="QM", cache_dir=cache,
                                 workers=ctx.workers, seed=ctx.seed)
        elif s == "bQM+DSE":
            curves[s] = pes_scan(R, H2Model(), ns, grid, modes, CouplingConfig.bqm_dse(),
                                 cache_dir=cache, workers=ctx.workers, seed=ctx.seed)
        elif s in ("lowest", "averaged"):
            cfg = CouplingConfig(gauge="effective_single", strategy=s)
            curves[s] = pes_scan(R, H2Model(), ns, grid, modes, cfg, label=s, cache_dir=cache,
                                 workers=ctx.workers, seed=ctx.seed)
    return curves


def _h2_popes(ctx: Context) -> Result:
    p = ctx.params
    res = Result()
    lam, n = float(p["coupling"]), int(p["n_modes"])
    curves = _h2_scans(p, ctx, lam, n, ("bare", "NRQED", "QM", "bQM+DSE"))
    t = Table(["R", "E_bare", "E_nrqed", "E_qm", "E_bqm_dse"])
    for i, r in enumerate(curves["bare"].R):
        t.add(float(r), *(float(curves[s].energies[i]) for s in ("bare", "NRQED", "QM", "bQM+DSE")))
    morse = Table(["setting", "D_e", "a", "C", "R_eq", "omega_e", "residual", "a_reference",
                   "omega_e_reference"])
    modes = _continuum(p, n, lam)
    for s in ("bare", "NRQED", "QM"):
        mu_n = qm_model(modes).mu_n if s == "QM" else H2Model().mu_n
        f = morse_fit(curves[s], mu_n=mu_n)
        ref = REFERENCE_MORSE.get(s, (float("nan"), BARE_H2_OMEGA_E if s == "bare" else float("nan")))
        morse.add(s, f.D_e, f.a, f.C, f.R_eq, f.omega_e, f.residual, ref[0], ref[1])
    res.tables["h2_popes.csv"] = t
    res.tables["h2_morse.csv"] = morse
    for c in curves.values():
        res.residuals.extend(c.residuals.tolist())
    return res


def _np_sweep(ctx: Context):
    p = ctx.params
    rows = []
    for lam in p["couplings"]:
        for n in p["n_modes_sweep"]:
            n = int(n)
            curves = _h2_scans(p, ctx, float(lam), n, ("NRQED", "QM"))
            modes = _continuum(p, n, lam) if n else None
            mu_qm = qm_model(modes).mu_n if modes is not None else H2Model().mu_n
            fn = morse_fit(curves["NRQED"], mu_n=H2Model().mu_n)
            fq = morse_fit(curves["QM"], mu_n=mu_qm)
            rows.append((lam, n, fn, fq, curves))
    return rows


def _dissociation_vs_np(ctx: Context) -> Result:
    res = Result()
    t = Table(["lambda", "n_modes", "D_e_nrqed", "D_e_qm"])
    for lam, n, fn, fq, curves in _np_sweep(ctx):
        t.add(lam, n, fn.D_e, fq.D_e)
        for c in curves.values():
            res.residuals.extend(c.residuals.tolist())
    res.tables["dissociation_vs_np.csv"] = t
    return res


def _harmonic_vs_np(ctx: Context) -> Result:
    res = Result()
    t = Table(["lambda", "n_modes", "a_nrqed", "omega_e_nrqed", "a_qm", "omega_e_qm"])
    for lam, n, fn, fq, curves in _np_sweep(ctx):
        t.add(lam, n, fn.a, fn.omega_e, fq.a, fq.omega_e)
        for c in curves.values():
            res.residuals.extend(c.residuals.tolist())
    res.tables["harmonic_vs_np.csv"] = t
    return res


def _h2_density_at(p, R, lam, n_modes, seed):
    grid = _h2_grid(p)
    mb = h2_matter_basis(R, grid, H2Model(), int(p["n_states"]), seed=seed)
    modes = _continuum(p, n_modes, lam)
    h, fb = assemble_length_gauge(mb, modes)
    st = ground_state(h, mb, fb, modes, seed=seed)
    return density(st), st.residual


def _cavity_compare(ctx: Context) -> Result:
    p = ctx.params
    res = Result()
    n = int(p["n_modes"])
    lams = sorted(float(x) for x in p["couplings"])
    de = Table(["lambda", "n_modes", "D_e", "R_eq"])
    req = None
    for lam in lams:
        c = _h2_scans(p, ctx, lam, n, ("NRQED",))["NRQED"]
        de.add(lam, n, dissociation_energy(c), c.R_eq)
        req = c.R_eq if req is None else req
        res.residuals.extend(c.residuals.tolist())
    ref, r0 = _h2_density_at(p, req, lams[0], n, ctx.seed)
    dens = Table(["x", "lambda", "lambda_reference", "delta_n"])
    for lam in lams[1:]:
        cur, r = _h2_density_at(p, req, lam, n, ctx.seed)
        for x, d in zip(ref.grid.x, cur.values - ref.values):
            dens.add(float(x), lam, lams[0], float(d))
        res.residuals.append(r)
    res.tables["cavity_dissociation.csv"] = de
    res.tables["cavity_density_difference.csv"] = dens
    res.metadata["R_density"] = req
    return res


def _approx_compare(ctx: Context) -> Result:
    p = ctx.params
    res = Result()
    lam = float(p["coupling"])
    modes = _continuum(p, p["atom_n_modes"], lam)
    atom_p = dict(p, grid_n=p["atom_grid_n"], grid_dx=p["atom_grid_dx"],
                  n_states=p["atom_n_states"])
    mb, st = _atom_nrqed(atom_p, modes, ctx.seed)
    ref = density(st)
    profiles = {"bQM+DSE": density(ground_state(assemble_bqm_dse(mb, modes), mb)),
                "bare": density(np.eye(mb.n_states)[0], mb)}
    for strat in ("lowest", "averaged"):
        h, fb = assemble_length_gauge(mb, modes, CouplingConfig(gauge="effective_single",
                                                                strategy=strat))
        profiles[strat] = density(ground_state(h, mb, fb, seed=ctx.seed))
    dn = Table(["approximation", "delta_n"])
    for name, prof in profiles.items():
        dn.add(name, integrated_density_diff(ref, prof))
    res.tables["approx_density_deviation.csv"] = dn
    curves = _h2_scans(p, ctx, lam, int(p["n_modes"]),
                       ("NRQED", "bQM+DSE", "lowest", "averaged"))
    t = Table(["R", "E_nrqed", "E_bqm_dse", "E_lowest", "E_averaged"])
    for i, r in enumerate(curves["NRQED"].R):
        t.add(float(r), *(float(curves[s].energies[i])
                          for s in ("NRQED", "bQM+DSE", "lowest", "averaged")))
    res.tables["approx_popes.csv"] = t
    res.residuals.append(st.residual)
    return res


def _ir_mismatch(ctx: Context) -> Result:
    p = ctx.params
    res = Result()
    lam = float(p["coupling"])
    sets = {"matched": sample_equidistant(p["omega_min"], p["omega_max"], int(p["n_modes"]), lam),
            "mismatched": sample_equidistant(p["off_omega_min"], p["off_omega_max"],
                                             int(p["n_modes"]), lam)}
    ks = np.linspace(-p["k_max"], p["k_max"], int(p["n_k"]))
    curve = Table(["k", "E_matched", "E_mismatched", "E_bare"])
    e0 = {s: numeric_free_dispersion(0.0, m) for s, m in sets.items()}
    for k in ks:
        vals = [numeric_free_dispersion(float(k), sets[s]) - e0[s] for s in sets]
        curve.add(float(k), *vals, 0.5 * k * k)
    summ = Table(["continuum", "omega_min", "omega_max", "g", "curvature_numeric",
                  "curvature_closed"])
    dk = float(p["curvature_step"])
    for s, m in sets.items():
        g = multimode_coupling_g(m, coupling_vector(m, ELECTRON))
        num = 2.0 * (numeric_free_dispersion(dk, m) - e0[s]) / dk**2
        summ.add(s, float(m.frequencies[0]), float(m.frequencies[-1]), g, num, 1.0 - g)
    res.tables["ir_mismatch_dispersion.csv"] = curve
    res.tables["ir_mismatch_curvature.csv"] = summ
    return res


def _coupling_bounds(ctx: Context) -> Result:
    p = ctx.params
    res = Result()
    pert = Table(["lower_cutoff", "upper_cutoff", "g_normalized"])
    for lo in p["lower_cutoffs"]:
        for up in np.geomspace(lo, lo * p["upper_span"], int(p["n_upper"])):
            pert.add(float(lo), float(up), perturbative_g(float(lo), float(up)))
    exact = Table(["ratio", "n_modes", "g"])
    w = float(p["lowest_frequency"])
    for ratio in p["ratios"]:
        for n in range(1, int(p["max_modes"]) + 1):
            modes = ModeContinuum(w * np.arange(1, n + 1), np.full(n, ratio * w))
            exact.add(float(ratio), n, multimode_coupling_g(modes, coupling_vector(modes,
                                                                                   ELECTRON)))
    contrast = Table(["lower_cutoff", "g_perturbative", "g_nonperturbative"])
    lam = float(p["coupling"])
    for lo in p["lower_cutoffs"]:
        modes = sample_equidistant(float(lo), float(lo) * p["upper_span"], int(p["max_modes"]),
                                   lam)
        contrast.add(float(lo), perturbative_g(float(lo)),
                     multimode_coupling_g(modes, coupling_vector(modes, ELECTRON)))
    res.tables["perturbative_coupling.csv"] = pert
    res.tables["exact_coupling.csv"] = exact
    res.tables["coupling_contrast.csv"] = contrast
    return res


# ---------------------------------------------------------------- registry


_ATOM = {"grid_n": 3000, "grid_dx": 0.0707, "omega_min": 0.01, "omega_max": 0.5, "n_sample": 200}
_H2_DESK = {"grid_n": 100, "grid_dx": 0.35, "r_step": 0.1, "r_max": 9.0, "n_states": 6,
            "omega_min": 0.01, "omega_max": 0.5, "n_sample": 200}
_H2_FULL = dict(_H2_DESK, grid_n=200, n_states=10)
_LAMS = [0.0009, 0.0012, 0.0019]


@dataclass(frozen=True)
class Scenario:
    id: str
    description: str
    run: Callable[[Context], Result]
    desk: dict
    full: dict


SCENARIOS: dict[str, Scenario] = {s.id: s for s in [
    Scenario("free-dispersion", "free-electron dispersion, NRQED vs renormalized mass",
             _free_dispersion,
             {"omega_min": 0.01, "omega_max": 0.5, "n_sample": 200, "n_modes": 50,
              "couplings": _LAMS, "k_max": 1.0, "n_k": 21},
             {"omega_min": 0.01, "omega_max": 0.5, "n_sample": 200, "n_modes": 200,
              "couplings": _LAMS, "k_max": 1.0, "n_k": 41}),
    Scenario("mass-vs-coupling-modes", "renormalized mass vs modes and coupling",
             _mass_vs_modes,
             {"omega_min": 0.01, "omega_max": 0.5, "n_sample": 200, "couplings": _LAMS,
              "n_modes_sweep": list(range(10, 201, 10))},
             {"omega_min": 0.01, "omega_max": 0.5, "n_sample": 200, "couplings": _LAMS,
              "n_modes_sweep": list(range(1, 201))}),
    Scenario("atom-density", "atomic ground-state density, NRQED vs QM",
             _atom_density, dict(_ATOM, n_modes=50, n_states=6, couplings=_LAMS),
             dict(_ATOM, n_modes=200, n_states=10, couplings=_LAMS)),
    Scenario("photon-occupation", "photon occupation per mode in the atomic ground state",
             _photon_occupation,
             dict(_ATOM, n_modes=200, n_states=6, couplings=_LAMS, n_report=20, gauge="velocity"),
             dict(_ATOM, n_modes=200, n_states=10, couplings=_LAMS, n_report=20,
                  gauge="velocity")),
    Scenario("density-saturation", "density difference vs number of modes",
             _density_saturation,
             dict(_ATOM, n_states=6, couplings=[0.0019],
                  n_modes_sweep=list(range(10, 201, 10))),
             dict(_ATOM, n_states=10, couplings=_LAMS, n_modes_sweep=list(range(10, 201, 10)))),
    Scenario("absorption", "dipole absorption spectrum, NRQED vs QM",
             _absorption,
             {"grid_n": 3000, "grid_dx": 0.0707, "omega_min": 0.01, "omega_max": 0.5,
              "n_sample": 20, "n_modes": 20, "n_states": 6, "coupling": 0.0019,
              "n_excited": 200, "gamma": DEFAULT_BROADENING, "n_omega": 2000,
              "fit_half_width": 0.05},
             dict(_ATOM, n_modes=200, n_states=10, coupling=0.0019, n_excited=2500,
                  gamma=DEFAULT_BROADENING, n_omega=2000, fit_half_width=0.05)),
    Scenario("h2-popes", "H2 ground-state PoPES and Morse fits",
             _h2_popes, dict(_H2_DESK, n_modes=50, coupling=0.0019),
             dict(_H2_FULL, n_modes=50, coupling=0.0019)),
    Scenario("dissociation-vs-Np", "dissociation energy vs number of modes",
             _dissociation_vs_np, dict(_H2_DESK, couplings=[0.0019], n_modes_sweep=[0, 10, 30, 50]),
             dict(_H2_FULL, couplings=_LAMS, n_modes_sweep=[0, 10, 20, 30, 40, 50, 60, 70])),
    Scenario("harmonic-vs-Np", "harmonic frequency vs number of modes",
             _harmonic_vs_np, dict(_H2_DESK, couplings=[0.0019], n_modes_sweep=[0, 10, 30, 50]),
             dict(_H2_FULL, couplings=[0.0019],
                  n_modes_sweep=[0, 10, 20, 30, 40, 50, 60, 70])),
    Scenario("cavity-compare", "free space vs cavity couplings for H2",
             _cavity_compare, dict(_H2_DESK, couplings=_LAMS, n_modes=30),
             dict(_H2_FULL, couplings=_LAMS, n_modes=50)),
    Scenario("approx-compare", "bQM+DSE and effective single-mode approximations",
             _approx_compare,
             dict(_H2_DESK, coupling=0.0019, n_modes=50, atom_n_modes=50, atom_n_states=6,
                  atom_grid_n=3000, atom_grid_dx=0.0707),
             dict(_H2_FULL, coupling=0.0019, n_modes=50, atom_n_modes=200, atom_n_states=10,
                  atom_grid_n=3000, atom_grid_dx=0.0707)),
    Scenario("ir-mismatch", "dispersion with an infrared-shifted mode continuum",
             _ir_mismatch,
             {"omega_min": 0.01, "omega_max": 0.5, "off_omega_min": 0.001, "off_omega_max": 0.05,
              "n_modes": 50, "coupling": 0.0019, "k_max": 1.0, "n_k": 21,
              "curvature_step": 0.1},
             {"omega_min": 0.01, "omega_max": 0.5, "off_omega_min": 0.001, "off_omega_max": 0.05,
              "n_modes": 200, "coupling": 0.0019, "k_max": 1.0, "n_k": 41,
              "curvature_step": 0.1}),
    Scenario("coupling-bounds", "perturbative vs exact multimode coupling",
             _coupling_bounds,
             {"lower_cutoffs": [1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1, 1.0], "upper_span": 1e4,
              "n_upper": 20, "ratios": [1.0, 5.0, 10.0, 15.0], "max_modes": 50,
              "lowest_frequency": 0.01, "coupling": 0.0019},
             {"lower_cutoffs": [1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1, 1.0], "upper_span": 1e4,
              "n_upper": 100, "ratios": [1.0, 5.0, 10.0, 15.0], "max_modes": 200,
              "lowest_frequency": 0.01, "coupling": 0.0019}),
]}


# ---------------------------------------------------------------- config


@dataclass(frozen=True)
class ScenarioConfig:
    scenario: str
    preset: str
    params: dict
    seed: int = 0
    threads: int = 1
    svg: bool = False

    def canonical(self) -> str:
        return json.dumps({"scenario": self.scenario, "preset": self.preset,
                           "params": self.params, "seed": self.seed}, sort_keys=True)

    def digest(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()


def _check_value(key, default, value):
    if isinstance(default, list):
        if not isinstance(value, list) or not value:
            raise ConfigError(f"{key}: expected a non-empty list")
        for v in value:
            _check_value(key, default[0], v)
        return
    if isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigError(f"{key}: expected a string")
        return
    if isinstance(default, bool) or isinstance(value, bool):
        raise ConfigError(f"{key}: booleans are not valid here")
    if isinstance(default, int) and not isinstance(value, int):
        raise ConfigError(f"{key}: expected an integer")
    if not isinstance(value, (int, float)) or not math.isfinite(value):
        raise ConfigError(f"{key}: expected a finite number")


def validate_config(raw: dict) -> ScenarioConfig:
    """Check a parsed config tree and merge it over the selected preset."""
    if not isinstance(raw, dict):
        raise ConfigError("config must be a mapping")
    unknown = set(raw) - {"scenario", "preset", "params", "seed", "threads", "svg"}
    if unknown:
        raise ConfigError(f"unknown top-level keys: {sorted(unknown)}")
    sid = raw.get("scenario")
    if sid not in SCENARIOS:
        raise ConfigError(f"unknown scenario {sid!r}; see list-scenarios")
    preset = raw.get("preset", "desk")
    if preset not in PRESETS:
        raise ConfigError(f"preset must be one of {list(PRESETS)}")
    base = dict(getattr(SCENARIOS[sid], preset))
    over = raw.get("params") or {}
    if not isinstance(over, dict):
        raise ConfigError("params must be a mapping")
    for key, value in over.items():
        if key not in base:
            raise ConfigError(f"parameter {key!r} is not used by {sid}")
        _check_value(key, base[key], value)
        base[key] = value
    seed, threads = raw.get("seed", 0), raw.get("threads", 1)
    if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
        raise ConfigError("seed must be a non-negative integer")
    if not isinstance(threads, int) or isinstance(threads, bool) or threads < 1:
        raise ConfigError("threads must be a positive integer")
    return ScenarioConfig(sid, preset, base, seed, threads, bool(raw.get("svg", False)))


def load_config(path: os.PathLike | str) -> ScenarioConfig:
    with open(path, encoding="utf-8") as fh:
        try:
            raw = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise ConfigError(f"cannot parse {path}: {exc}") from exc
    return validate_config(raw)


def config_template(sid: str, preset: str = "desk") -> str:
    sc = SCENARIOS[sid]
    return yaml.safe_dump({"scenario": sid, "preset": preset, "seed": 0, "threads": 1,
                           "svg": False, "params": dict(getattr(sc, preset))},
                          sort_keys=False)


def list_scenarios() -> list[dict]:
    return [{"id": s.id, "description": s.description, "presets": list(PRESETS)}
            for s in SCENARIOS.values()]


# ---------------------------------------------------------------- running


@dataclass
class RunManifest:
    scenario: str
    preset: str
    config_hash: str
    version: str
    seed: int
    workers: int
    status: str = "running"
    timing: dict = field(default_factory=dict)
    residuals: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)
    error: Optional[str] = None

    def to_json(self) -> str:
        return json.dumps(self.__dict__, indent=2, sort_keys=True, default=_jsonable) + "\n"


def _jsonable(v):
    if isinstance(v, np.generic):
        return v.item()
    if isinstance(v, np.ndarray):
        return v.tolist()
    raise TypeError(type(v).__name__)


def _sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def run_scenario(cfg: ScenarioConfig, out: os.PathLike | str,
                 threads: Optional[int] = None, seed: Optional[int] = None) -> RunManifest:
    """Execute one scenario and write its CSV tables plus ``manifest.json`` into ``out``."""
    if threads is not None or seed is not None:
        cfg = ScenarioConfig(cfg.scenario, cfg.preset, cfg.params,
                             cfg.seed if seed is None else seed,
                             cfg.threads if threads is None else threads, cfg.svg)
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    sc = SCENARIOS[cfg.scenario]
    man = RunManifest(cfg.scenario, cfg.preset, cfg.digest(), __version__, cfg.seed, cfg.threads,
                      params=cfg.params)
    if cfg.preset == "desk":
        man.metadata["scale"] = "desk: reduced sizes, tolerances widened relative to the full preset"
    ctx = Context(cfg.params, cfg.seed, cfg.threads, str(cache_dir()))
    start = time.perf_counter()
    try:
        result = sc.run(ctx)
        for name, table in result.tables.items():
            data = table.to_csv().encode()
            (out / name).write_bytes(data)
            man.outputs[name] = _sha256(data)
        if cfg.svg:
            for name, table in result.tables.items():
                svg = _plot(table, name)
                if svg is not None:
                    (out / svg[0]).write_bytes(svg[1])
                    man.outputs[svg[0]] = _sha256(svg[1])
        man.metadata.update(result.metadata)
        if result.residuals:
            man.residuals = {"max": float(np.max(result.residuals)), "count": len(result.residuals)}
        man.status = "ok"
    except Exception as exc:
        man.status = "failed"
        man.error = f"{type(exc).__name__}: {exc}"
        raise
    finally:
        man.timing = {"wall_seconds": round(time.perf_counter() - start, 3),
                      "python": platform.python_version()}
        (out / "manifest.json").write_text(man.to_json(), encoding="utf-8")
    return man


def _plot(table: Table, name: str):
    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        return None
    numeric = [i for i, v in enumerate(table.rows[0]) if isinstance(v, (int, float, np.number))] \
        if table.rows else []
    if len(numeric) < 2:
        return None
    data = np.array([[row[i] for i in numeric] for row in table.rows], dtype=float)
    fig, ax = plt.subplots(figsize=(6, 4))
    for j in range(1, len(numeric)):
        ax.plot(data[:, 0], data[:, j], ".", ms=3, label=table.columns[numeric[j]])
    ax.set_xlabel(table.columns[numeric[0]])
    ax.legend(fontsize=7)
    buf = io.BytesIO()
    fig.savefig(buf, format="svg", metadata={"Date": None})
    plt.close(fig)
    return name.replace(".csv", ".svg"), buf.getvalue()
