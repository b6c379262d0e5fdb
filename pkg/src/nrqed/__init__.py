"""Exact diagonalization of electrons coupled to a discretized photon continuum.

Modules:

* :mod:`nrqed.linalg` - dense, banded and sparse symmetric eigensolvers
* :mod:`nrqed.continuum` - mode sampling, photon normal modes, mass renormalization
* :mod:`nrqed.matter` - 1D finite-difference atom and H2 models
* :mod:`nrqed.pauli_fierz` - truncated Fock space and coupled Hamiltonians
* :mod:`nrqed.observables` - densities, spectra, Lorentzian fits
* :mod:`nrqed.popes` - potential-energy surfaces and Morse analysis
* :mod:`nrqed.scenarios` - scenario runner behind the ``nrqed`` command
"""

__version__ = "0.1.0"
