import math
import warnings

import numpy as np
import pytest

from nrqed.continuum import (ELECTRON, ModeContinuum, coupling_vector, dispersion_analytic,
                             multimode_coupling_g, normal_modes, sample_equidistant)
from nrqed.linalg import dense_sym_eig
from nrqed.matter import AtomModel, Grid1D, GridWarning, MatterBasis, atom_matter_basis
from nrqed.pauli_fierz import (CouplingConfig, TruncationWarning,
                               assemble_bqm_dse, assemble_length_gauge,
                               build_fock_basis, calibrate_velocity_displacement,
                               effective_single_mode, excited_states, ground_state,
                               numeric_free_dispersion, photon_occupation)
from nrqed.pauli_fierz import _velocity_gauge_oracle
from oracles import coupled_oscillator_ground, harmonic_position, second_order_two_level


def _toy_basis(energies, dipole):
    g = Grid1D.centered(9, 1.0)
    return MatterBasis(np.asarray(energies, float), np.zeros((9, len(energies))),
                       np.asarray(dipole, float), g)


def _ho_basis(omega0, n):
    x = harmonic_position(n + 4, omega0)[:n, :n]
    return _toy_basis(omega0 * (np.arange(n) + 0.5), -x)


@pytest.fixture(scope="module")
def atom6():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", GridWarning)
        return atom_matter_basis(Grid1D.centered(3000, 0.0707), AtomModel(), 6)


def test_fock_dimensions_and_order():
    assert build_fock_basis(200).dimension == 20301
    assert build_fock_basis(1).dimension == 3
    fb = build_fock_basis(3)
    assert fb.dimension == 10
    assert fb.states == [(), (0,), (1,), (2,), (0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)]
    assert all(s == tuple(sorted(s)) for s in fb.states)
    with pytest.raises(ValueError):
        build_fock_basis(0)


def test_fock_ladder_elements():
    fb = build_fock_basis(3)
    c = np.array([0.1, 0.2, 0.3])
    x = fb.field_operator(c).toarray()
    i = fb.index
    assert x[i[()], i[(1,)]] == pytest.approx(0.2)
    assert x[i[(0,)], i[(0, 2)]] == pytest.approx(0.3)
    assert x[i[(2,)], i[(0, 2)]] == pytest.approx(0.1)
    assert x[i[(1,)], i[(1, 1)]] == pytest.approx(math.sqrt(2) * 0.2)
    assert x[i[()], i[(0, 0)]] == 0.0
    np.testing.assert_array_equal(x, x.T)
    occ = fb.occupations
    assert occ[i[(1, 1)]].tolist() == [0, 2, 0]


def test_lambda_zero_decouples(atom6):
    modes = sample_equidistant(0.01, 0.5, 4, 0.0)
    h, fb = assemble_length_gauge(atom6, modes)
    st = ground_state(h, atom6, fb, modes)
    assert st.energy == pytest.approx(atom6.energies[0] + modes.zero_point, abs=1e-12)
    assert abs(st.amplitudes[0, 0]) == pytest.approx(1.0, abs=1e-12)
    np.testing.assert_allclose(photon_occupation(st, "length"), 0.0, atol=1e-20)
    np.testing.assert_allclose(photon_occupation(st, "velocity"), 0.0, atol=1e-20)


def test_second_order_perturbation_oracle():
    e0, e1, dip, omega = -1.0, -0.6, 1.3, 0.25
    mb = _toy_basis([e0, e1], [[0.0, dip], [dip, 0.0]])
    errs = []
    for lam in (0.01, 0.02):
        modes = ModeContinuum(np.array([omega]), lam)
        h, fb = assemble_length_gauge(mb, modes)
        e = ground_state(h, mb, fb).energy
        errs.append(abs(e - second_order_two_level(e0, e1, dip, omega, lam)))
    # residual is fourth order in the coupling
    assert errs[0] < 1e-7
    assert errs[1] / errs[0] == pytest.approx(16.0, rel=0.1)


def test_two_oscillator_oracle():
    omega0, omega, lam = 0.3, 0.2, 0.08
    mb = _ho_basis(omega0, 30)
    modes = ModeContinuum(np.array([omega]), lam)
    h, fb = assemble_length_gauge(mb, modes, CouplingConfig(max_photons=20))
    e = ground_state(h, mb, fb).energy
    assert e == pytest.approx(coupled_oscillator_ground(omega0, omega, lam), abs=1e-10)


def test_small_dense_oracle_and_excited(atom6):
    mb = atom6.truncate(3)
    modes = sample_equidistant(0.1, 0.3, 2, 0.05)
    h, fb = assemble_length_gauge(mb, modes)
    ref = dense_sym_eig(h.toarray()).eigenvalues
    g0, exc = excited_states(h, mb, fb, 4)
    assert g0.energy == pytest.approx(ref[0], abs=1e-12)
    np.testing.assert_allclose([s.energy for s in exc], ref[1:5], atol=1e-12)
    assert g0.norm() == pytest.approx(1.0, abs=1e-10)


def test_krylov_path_matches_dense(atom6):
    # dimension above the dense cutoff forces the Lanczos path
    mb = atom6.truncate(4)
    modes = sample_equidistant(0.01, 0.5, 40, 0.0019)
    h, fb = assemble_length_gauge(mb, modes)
    assert h.order > 2000
    st = ground_state(h, mb, fb, modes)
    tight = ground_state(h, mb, fb, modes, tol=1e-13)
    assert st.energy == pytest.approx(tight.energy, abs=1e-8)
    assert st.energy == pytest.approx(dense_sym_eig(h.toarray()).eigenvalues[0], abs=1e-9)


def test_bqm_dse_operator(atom6):
    modes = sample_equidistant(0.01, 0.5, 50, 0.0019)
    h = assemble_bqm_dse(atom6, modes)
    assert h.order == atom6.n_states
    e = ground_state(h, atom6).energy
    assert e >= atom6.energies[0]
    h0 = assemble_bqm_dse(atom6, modes.with_coupling(0.0))
    np.testing.assert_allclose(np.diag(h0.toarray()), atom6.energies)
    cfg = CouplingConfig(gauge="bqm_dse", include_bilinear=True)
    assert cfg.include_bilinear is False and cfg.include_dse is True
    with pytest.raises(ValueError):
        assemble_length_gauge(atom6, modes, CouplingConfig.bqm_dse())


def test_variational_ordering(atom6):
    modes = sample_equidistant(0.01, 0.5, 20, 0.0019)
    es = []
    for n in (2, 4, 6):
        mb = atom6.truncate(n)
        h, fb = assemble_length_gauge(mb, modes)
        es.append(ground_state(h, mb, fb).energy)
    assert es[0] >= es[1] >= es[2]
    h1, f1 = assemble_length_gauge(atom6, modes, CouplingConfig(max_photons=1))
    h2, f2 = assemble_length_gauge(atom6, modes, CouplingConfig(max_photons=2))
    assert ground_state(h1, atom6, f1).energy >= ground_state(h2, atom6, f2).energy


def test_zero_field_condition(atom6):
    modes = sample_equidistant(0.01, 0.5, 20, 0.0019)
    h, fb = assemble_length_gauge(atom6, modes)
    st = ground_state(h, atom6, fb, modes)
    c = st.amplitudes
    assert abs(np.sum(c * (atom6.dipole @ c))) < 1e-8
    for a in range(3):
        q = fb.field_operator(np.eye(20)[a]).toarray()
        assert abs(np.sum(c * (c @ q))) < 1e-8


def test_truncation_delta_decreases_with_coupling(atom6):
    from nrqed.observables import density, integrated_density_diff

    deltas = []
    for lam in (0.0019, 0.0009):
        modes = sample_equidistant(0.01, 0.5, 20, lam)
        d = []
        for k in (1, 2):
            h, fb = assemble_length_gauge(atom6, modes, CouplingConfig(max_photons=k))
            d.append(density(ground_state(h, atom6, fb)))
        deltas.append(integrated_density_diff(*d))
    assert deltas[1] < deltas[0]


def test_dimension_guard(atom6):
    modes = sample_equidistant(0.01, 0.5, 50, 0.0019)
    with pytest.raises(ValueError):
        assemble_length_gauge(atom6, modes, CouplingConfig(max_dimension=1000))


def test_effective_single_mode():
    m = sample_equidistant(0.01, 0.5, 200, 0.0019)
    lo = effective_single_mode(m, "lowest")
    assert lo.frequencies.tolist() == [0.01] and lo.couplings.tolist() == [0.0019]
    av = effective_single_mode(m, "averaged")
    assert av.frequencies[0] == pytest.approx(0.255, abs=1e-15)
    one = ModeContinuum(np.array([0.2]), 0.003)
    for s in ("lowest", "averaged"):
        e = effective_single_mode(one, s)
        assert e.frequencies.tolist() == [0.2] and e.couplings.tolist() == [0.003]


def test_numeric_dispersion_limits():
    modes = sample_equidistant(0.05, 0.3, 5, 0.0)
    e = numeric_free_dispersion(0.4, modes)
    assert e == pytest.approx(0.08 + modes.zero_point, abs=1e-12)
    one = ModeContinuum(np.array([0.1]), 0.05)
    nm = normal_modes(one, coupling_vector(one, ELECTRON))
    assert numeric_free_dispersion(1.0, one) == pytest.approx(dispersion_analytic(1.0, nm).energy,
                                                              abs=1e-8)


def test_numeric_dispersion_truncation_warning():
    one = ModeContinuum(np.array([0.001]), 0.05)
    with pytest.warns(TruncationWarning):
        numeric_free_dispersion(2.0, one, n_max_per_mode=8, adaptive=False)


def test_numeric_dispersion_curvature_tracks_g():
    for lo, hi in ((0.01, 0.5), (0.001, 0.05)):
        m = sample_equidistant(lo, hi, 30, 0.0019)
        g = multimode_coupling_g(m, coupling_vector(m, ELECTRON))
        dk = 0.1
        c = 2 * (numeric_free_dispersion(dk, m) - numeric_free_dispersion(0.0, m)) / dk**2
        assert c == pytest.approx(1 - g, rel=1e-8)


def test_velocity_calibration_and_oracle():
    assert calibrate_velocity_displacement() in (1.0, -1.0)
    omega0, omega, lam = 0.3, 0.15, 0.06
    ref = _velocity_gauge_oracle(omega0, omega, lam, 40, 24)
    mb = _ho_basis(omega0, 24)
    modes = ModeContinuum(np.array([omega]), lam)
    h, fb = assemble_length_gauge(mb, modes, CouplingConfig(max_photons=16))
    st = ground_state(h, mb, fb, modes)
    assert photon_occupation(st, "velocity")[0] == pytest.approx(ref, abs=1e-6)
    # the length-gauge ladder occupation is a different observable
    assert abs(photon_occupation(st, "length")[0] - ref) > 1e-4


def test_velocity_needs_modes(atom6):
    modes = sample_equidistant(0.01, 0.5, 3, 0.0019)
    h, fb = assemble_length_gauge(atom6, modes)
    st = ground_state(h, atom6, fb)
    with pytest.raises(ValueError):
        photon_occupation(st, "velocity")
    assert photon_occupation(st, "velocity", modes).shape == (3,)


def test_occupation_trends_atom(atom6):
    full = sample_equidistant(0.01, 0.5, 200)
    prev = None
    for lam in (0.0009, 0.0012, 0.0019):
        modes = full.lowest(40).with_coupling(lam)
        h, fb = assemble_length_gauge(atom6, modes)
        n = photon_occupation(ground_state(h, atom6, fb, modes), "velocity")
        assert np.all(np.diff(n) < 0)
        if prev is not None:
            assert np.all(n > prev)
        prev = n
