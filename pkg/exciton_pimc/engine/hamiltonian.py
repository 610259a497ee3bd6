# exciton_pimc/engine/hamiltonian.py
"""Exciton-phonon Hamiltonians in the diabatic basis.

A model supplies the ground-state phonon surface V_g(R), the gap matrix
E(R) (diagonal V_m - V_g, off-diagonal couplings J_mn) and their gradients,
together with the diagonal mass tensor. Everything is in atomic units.
"""

from abc import ABC, abstractmethod
from typing import Optional

import numpy as np
from numpy.typing import NDArray

from exciton_pimc.models.parameter_models import AlexanderParameters, DimerParameters

PhononCoords = NDArray[np.float64]
SiteMatrix = NDArray[np.float64]
MassTensor = NDArray[np.float64]


class ModelSystem(ABC):
    """Value-and-gradient interface every phonon bath model implements.

    Only the single-point methods are abstract. The batched ``*_path``
    methods act on an (M, N) array of bead positions and loop by default;
    closed-form models override them with vectorized versions.
    """

    name: str = "model"

    def __init__(self, n_sites: int, mass: MassTensor):
        mass = np.asarray(mass, dtype=float).reshape(-1)
        if np.any(mass <= 0):
            raise ValueError("all masses must be strictly positive")
        self.n_sites = int(n_sites)
        self.n_dof = mass.size
        self.mass = mass

    @abstractmethod
    def ground_potential(self, r: PhononCoords) -> float: ...

    @abstractmethod
    def ground_gradient(self, r: PhononCoords) -> NDArray[np.float64]: ...

    @abstractmethod
    def gap_matrix(self, r: PhononCoords) -> SiteMatrix: ...

    @abstractmethod
    def gap_gradient(self, r: PhononCoords, j: int) -> SiteMatrix: ...

    def reference_point(self) -> PhononCoords:
        """Minimum of the ground surface; chains start with every bead here."""
        return np.zeros(self.n_dof)

    def parameters(self) -> Optional[dict]:
        return None

    def _check_index(self, j: int) -> None:
        if not 0 <= j < self.n_dof:
            raise IndexError(f"coordinate index {j} out of range for {self.n_dof} dof")

    def ground_potentials(self, path: NDArray[np.float64]) -> NDArray[np.float64]:
        return np.array([self.ground_potential(r) for r in path])

    def ground_gradients(self, path: NDArray[np.float64]) -> NDArray[np.float64]:
        return np.array([self.ground_gradient(r) for r in path])

    def gap_matrices(self, path: NDArray[np.float64]) -> NDArray[np.float64]:
        return np.array([self.gap_matrix(r) for r in path])

    def gap_gradients(self, path: NDArray[np.float64]) -> NDArray[np.float64]:
        """Shape (M, N, n, n): derivative of E(R_i) along coordinate j."""
        return np.array(
            [[self.gap_gradient(r, j) for j in range(self.n_dof)] for r in path]
        )


class AlexanderModel(ModelSystem):
    """One coordinate, two diabatic surfaces crossing near a Gaussian coupling.

    The ground surface is not used by this model (V_g = 0): the two diabatic
    surfaces sit directly on the gap-matrix diagonal.
    """

    name = "alexander"

    def __init__(self, params: AlexanderParameters):
        super().__init__(n_sites=2, mass=[params.mass])
        self.params = params

    def parameters(self) -> dict:
        return self.params.model_dump()

    def reference_point(self) -> PhononCoords:
        return np.array([self.params.x11])

    def ground_potential(self, r):
        return 0.0

    def ground_gradient(self, r):
        return np.zeros(1)

    def gap_matrix(self, r):
        return self.gap_matrices(np.reshape(r, (1, 1)))[0]

    def gap_gradient(self, r, j):
        self._check_index(j)
        return self.gap_gradients(np.reshape(r, (1, 1)))[0, j]

    def ground_potentials(self, path):
        return np.zeros(len(path))

    def ground_gradients(self, path):
        return np.zeros((len(path), 1))

    def _coupling(self, x):
        p = self.params
        return p.c * np.exp(-p.alpha * (x - p.x12) ** 2)

    def gap_matrices(self, path):
        p = self.params
        x = np.asarray(path, dtype=float)[:, 0]
        out = np.empty((x.size, 2, 2))
        out[:, 0, 0] = 0.5 * p.k11 * (x - p.x11) ** 2 + p.eps11
        out[:, 1, 1] = 0.5 * p.k22 * (x - p.x22) ** 2 + p.eps22
        out[:, 0, 1] = out[:, 1, 0] = self._coupling(x)
        return out

    def gap_gradients(self, path):
        p = self.params
        x = np.asarray(path, dtype=float)[:, 0]
        out = np.empty((x.size, 1, 2, 2))
        out[:, 0, 0, 0] = p.k11 * (x - p.x11)
        out[:, 0, 1, 1] = p.k22 * (x - p.x22)
        out[:, 0, 0, 1] = out[:, 0, 1, 0] = -2.0 * p.alpha * (x - p.x12) * self._coupling(x)
        return out


class DisplacedDimerModel(ModelSystem):
    """Two chromophores, each with its own displaced harmonic mode.

    The second diagonal entry is ``k2/2 ((x2 - d2)^2 - x2^2) + eps2``, the
    same form as the first one.
    """

    name = "dimer"

    def __init__(self, params: DimerParameters):
        super().__init__(n_sites=2, mass=[params.m1, params.m2])
        self.params = params
        self._k = np.array([params.k1, params.k2])
        self._d = np.array([params.d1, params.d2])
        self._eps = np.array([params.eps1, params.eps2])

    def parameters(self) -> dict:
        return self.params.model_dump()

    def ground_potential(self, r):
        r = np.asarray(r, dtype=float)
        return 0.5 * float(np.dot(self._k, r * r))

    def ground_gradient(self, r):
        return self._k * np.asarray(r, dtype=float)

    def gap_matrix(self, r):
        return self.gap_matrices(np.reshape(r, (1, 2)))[0]

    def gap_gradient(self, r, j):
        self._check_index(j)
        out = np.zeros((2, 2))
        out[j, j] = -self._k[j] * self._d[j]
        return out

    def ground_potentials(self, path):
        path = np.asarray(path, dtype=float)
        return 0.5 * (path * path) @ self._k

    def ground_gradients(self, path):
        return np.asarray(path, dtype=float) * self._k

    def gap_matrices(self, path):
        path = np.asarray(path, dtype=float)
        diag = 0.5 * self._k * ((path - self._d) ** 2 - path**2) + self._eps
        out = np.empty((len(path), 2, 2))
        out[:, 0, 0] = diag[:, 0]
        out[:, 1, 1] = diag[:, 1]
        out[:, 0, 1] = out[:, 1, 0] = self.params.J
        return out

    def gap_gradients(self, path):
        out = np.zeros((len(path), 2, 2, 2))
        out[:, 0, 0, 0] = -self._k[0] * self._d[0]
        out[:, 1, 1, 1] = -self._k[1] * self._d[1]
        return out


def ground_potential(model: ModelSystem, r: PhononCoords) -> float:
    return model.ground_potential(np.asarray(r, dtype=float))


def ground_gradient(model: ModelSystem, r: PhononCoords) -> NDArray[np.float64]:
    return model.ground_gradient(np.asarray(r, dtype=float))


def gap_matrix(model: ModelSystem, r: PhononCoords) -> SiteMatrix:
    return model.gap_matrix(np.asarray(r, dtype=float))


def gap_gradient(model: ModelSystem, r: PhononCoords, j: int) -> SiteMatrix:
    return model.gap_gradient(np.asarray(r, dtype=float), j)


def build_alexander(params: Optional[AlexanderParameters] = None) -> AlexanderModel:
    return AlexanderModel(params or AlexanderParameters())


def build_dimer(params: Optional[DimerParameters] = None) -> DisplacedDimerModel:
    return DisplacedDimerModel(params or DimerParameters())


def build_model(name: str, parameters: Optional[dict] = None, path: Optional[str] = None) -> ModelSystem:
    """Factory used by the run configuration."""
    parameters = parameters or {}
    if name == "alexander":
        return build_alexander(AlexanderParameters(**parameters))
    if name == "dimer":
        return build_dimer(DimerParameters(**parameters))
    if name == "external-spec":
        from exciton_pimc.engine.tabulated import load_tabulated_model

        if path is None:
            raise ValueError("external-spec model needs a table path")
        return load_tabulated_model(path)
    raise ValueError(f"unknown model '{name}'")
