import warnings

import numpy as np
import pytest
from scipy.integrate import quad

from nrqed.continuum import sample_equidistant
from nrqed.matter import (AtomModel, Grid1D, GridWarning, atom_matter_basis,
                          eigensolve_matter, potential_hamiltonian)
from nrqed.observables import (DEFAULT_BROADENING, FitError, SpectrumData, density,
                               dipole_strength, integrated_density_diff, lorentzian,
                               lorentzian_fit, signed_density_diff, trk_sum)
from nrqed.pauli_fierz import assemble_length_gauge, excited_states, ground_state


@pytest.fixture(scope="module")
def atom():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", GridWarning)
        return atom_matter_basis(Grid1D.centered(1200, 0.1414), AtomModel(), 6)


@pytest.fixture(scope="module")
def coupled(atom):
    modes = sample_equidistant(0.01, 0.5, 10, 0.0019)
    h, fb = assemble_length_gauge(atom, modes)
    return excited_states(h, atom, fb, 30, modes)


def test_density_normalization_and_bare_limit(atom, coupled):
    n0 = density(np.eye(6)[0], atom)
    np.testing.assert_allclose(n0.values, atom.wavefunctions[:, 0] ** 2, atol=1e-14)
    assert n0.norm() == pytest.approx(1.0, abs=1e-10)
    assert density(coupled[0]).norm() == pytest.approx(1.0, abs=1e-10)
    modes = sample_equidistant(0.01, 0.5, 4, 0.0)
    h, fb = assemble_length_gauge(atom, modes)
    st = ground_state(h, atom, fb)
    np.testing.assert_allclose(density(st).values, n0.values, atol=1e-12)


def test_density_difference_metric(atom, coupled):
    a = density(coupled[0])
    b = density(np.eye(6)[0], atom)
    assert integrated_density_diff(a, a) == 0.0
    d_ab = integrated_density_diff(a, b)
    assert d_ab == integrated_density_diff(b, a)
    assert d_ab > 0
    c = density(np.eye(6)[2], atom)
    assert integrated_density_diff(a, c) <= d_ab + integrated_density_diff(b, c) + 1e-15
    total, diff = integrated_density_diff(a, b, signed=True)
    assert total == d_ab
    np.testing.assert_array_equal(diff, signed_density_diff(a, b))
    # both normalised, so the signed difference integrates to zero
    assert abs(a.grid.dx * diff.sum()) < 1e-10
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", GridWarning)
        small = atom_matter_basis(Grid1D.centered(900, 0.1414), AtomModel(), 2)
    other = density(np.eye(2)[0], small)
    with pytest.raises(ValueError):
        integrated_density_diff(a, other)


def test_lorentzian_unit_area():
    area, _ = quad(lorentzian, -np.inf, np.inf, args=(0.3, 0.0034))
    assert area == pytest.approx(1.0, abs=1e-10)
    assert lorentzian(0.3, 0.3, 0.0034) == pytest.approx(1 / (np.pi * 0.0034))


def test_spectrum_area_equals_strength(coupled):
    g0, exc = coupled
    sp = dipole_strength(g0, exc)
    assert sp.gamma == DEFAULT_BROADENING
    assert sp.total_strength() > 0
    total, _ = quad(lambda w: float(sp.evaluate(np.array([w]))[0]), -np.inf, np.inf, limit=2000)
    assert total == pytest.approx(sp.total_strength(), rel=1e-8)


def test_rotation_within_cluster_preserves_strength(coupled):
    # any orthogonal mix of degenerate-ish excited states leaves total strength invariant
    g0, exc = coupled
    amps = np.stack([s.amplitudes.ravel() for s in exc[:4]])
    theta = 0.37
    rot = np.eye(4)
    rot[:2, :2] = [[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]]
    mixed = rot @ amps
    mu = g0.matter.dipole
    d_orig = [np.sum(g0.amplitudes * (mu @ a.reshape(g0.amplitudes.shape))) for a in amps]
    d_mix = [np.sum(g0.amplitudes * (mu @ a.reshape(g0.amplitudes.shape))) for a in mixed]
    assert np.sum(np.square(d_orig)) == pytest.approx(np.sum(np.square(d_mix)), rel=1e-12)


def test_single_lorentzian_recovery():
    sp = SpectrumData(np.array([0.4]), np.array([0.7]), 0.005, np.linspace(0, 1, 10),
                      np.zeros(10))
    c, g, a = lorentzian_fit(sp, (0.35, 0.45))
    assert c == pytest.approx(0.4, abs=1e-10)
    assert g == pytest.approx(0.005, rel=1e-10)
    assert a == pytest.approx(0.7, rel=1e-10)
    c2, g2, a2 = lorentzian_fit(sp, (0.35, 0.45), gamma=0.005)
    assert (c2, g2) == (pytest.approx(0.4, abs=1e-10), 0.005)


def test_two_peak_window_recovery():
    sp = SpectrumData(np.array([0.3, 0.6]), np.array([1.0, 0.5]), 0.004, np.zeros(1),
                      np.zeros(1))
    c, _, a = lorentzian_fit(sp, (0.25, 0.35))
    assert c == pytest.approx(0.3, abs=1e-6)
    assert a == pytest.approx(1.0, rel=1e-2)


def test_fit_errors():
    sp = SpectrumData(np.array([0.4]), np.array([0.7]), 0.005, np.zeros(1), np.zeros(1))
    with pytest.raises(ValueError):
        lorentzian_fit(sp, (0.5, 0.4))
    with pytest.raises(ValueError):
        SpectrumData(np.array([0.4]), np.array([0.7]), 0.0, np.zeros(1), np.zeros(1))
    assert issubclass(FitError, RuntimeError)


def test_harmonic_single_line_exhausts_sum_rule():
    g = Grid1D.centered(400, 0.05)
    omega = 0.8
    mb = eigensolve_matter(potential_hamiltonian(g, 0.5 * omega**2 * g.x**2), g, 6, -g.x)
    assert trk_sum(mb) == pytest.approx(1.0, rel=1e-6)
    contributions = 2 * (mb.energies - mb.energies[0]) * mb.dipole[0] ** 2
    assert contributions[1] == pytest.approx(1.0, rel=1e-6)
