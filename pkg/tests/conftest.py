# tests/conftest.py

import numpy as np
import pytest

from exciton_pimc.engine.hamiltonian import ModelSystem, build_alexander, build_dimer
from exciton_pimc.models.parameter_models import DimerParameters


def central_difference(f, x, h=1e-4):
    """Central finite-difference gradient of a scalar or array valued f at x."""
    x = np.asarray(x, dtype=float)
    grads = []
    for index in np.ndindex(*x.shape):
        up, down = x.copy(), x.copy()
        up[index] += h
        down[index] -= h
        grads.append((np.asarray(f(up)) - np.asarray(f(down))) / (2.0 * h))
    return np.array(grads).reshape(x.shape + np.shape(grads[0]))


def taylor_expm(a, terms=30, squarings=4):
    """Scaled-and-squared Taylor series, independent of any eigensolver."""
    a = np.asarray(a, dtype=float) / 2.0**squarings
    out = np.eye(len(a))
    term = np.eye(len(a))
    for k in range(1, terms):
        term = term @ a / k
        out = out + term
    for _ in range(squarings):
        out = out @ out
    return out


class HarmonicSiteModel(ModelSystem):
    """Single site, E = 0, V_g = k x^2 / 2 in any number of coordinates."""

    name = "harmonic"

    def __init__(self, k=1.0, mass=1.0, n_dof=1):
        super().__init__(n_sites=1, mass=np.full(n_dof, mass))
        self.k = k

    def ground_potential(self, r):
        r = np.asarray(r, dtype=float)
        return 0.5 * self.k * float(np.dot(r, r))

    def ground_gradient(self, r):
        return self.k * np.asarray(r, dtype=float)

    def gap_matrix(self, r):
        return np.zeros((1, 1))

    def gap_gradient(self, r, j):
        self._check_index(j)
        return np.zeros((1, 1))


class LinearGapModel(ModelSystem):
    """E(R) = E0 + sum_j R_j B_j with random symmetric E0, B_j; V_g = |R|^2 / 2."""

    name = "linear-gap"

    def __init__(self, n_sites=3, n_dof=2, seed=7, scale=1.0, mass=1.0):
        super().__init__(n_sites=n_sites, mass=np.full(n_dof, mass))
        rng = np.random.default_rng(seed)
        e0 = rng.normal(size=(n_sites, n_sites))
        b = rng.normal(size=(n_dof, n_sites, n_sites))
        self.e0 = scale * 0.5 * (e0 + e0.T)
        self.b = scale * 0.5 * (b + np.swapaxes(b, 1, 2))

    def ground_potential(self, r):
        r = np.asarray(r, dtype=float)
        return 0.5 * float(np.dot(r, r))

    def ground_gradient(self, r):
        return np.asarray(r, dtype=float)

    def gap_matrix(self, r):
        return self.e0 + np.einsum("j,jab->ab", np.asarray(r, dtype=float), self.b)

    def gap_gradient(self, r, j):
        self._check_index(j)
        return self.b[j].copy()


class ConstantGapModel(LinearGapModel):
    name = "constant-gap"

    def __init__(self, **kwargs):
        super().__init__(**kwargs)
        self.b = np.zeros_like(self.b)


class ZeroGapModel(ConstantGapModel):
    name = "zero-gap"

    def __init__(self, **kwargs):
        super().__init__(**kwargs)
        self.e0 = np.zeros_like(self.e0)


@pytest.fixture
def alexander():
    return build_alexander()


@pytest.fixture
def dimer():
    return build_dimer()


@pytest.fixture
def light_symmetric_dimer():
    """Equal sites and modes with masses small enough for a coarse 2D grid."""
    return build_dimer(
        DimerParameters(d1=2.0, d2=2.0, eps1=8.0e-2, eps2=8.0e-2, m1=1.0e3, m2=1.0e3)
    )


@pytest.fixture
def light_dimer():
    return build_dimer(DimerParameters(m1=1.0e3, m2=1.0e3))


@pytest.fixture
def harmonic_site():
    return HarmonicSiteModel()


@pytest.fixture
def linear_gap():
    return LinearGapModel()


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def room_beta():
    return 1.0 / (3.1668115634e-6 * 300.0)


def assert_close_relative(actual, expected, rtol, floor=1e-300):
    actual, expected = np.asarray(actual), np.asarray(expected)
    scale = max(float(np.max(np.abs(expected))), floor)
    assert float(np.max(np.abs(actual - expected))) <= rtol * scale, (actual, expected)

