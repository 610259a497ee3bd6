# exciton_pimc/engine/tabulated.py
"""User-supplied surfaces tabulated on a rectilinear grid.

Values are interpolated multilinearly. Gradients come from the same
interpolation applied to ``numpy.gradient`` tables, so they are smooth
approximations of the cell-wise slopes rather than exact derivatives of the
interpolant; the two differ by at most half a grid spacing times the
surface curvature. A bead outside the table is a dead configuration: the
surfaces are undefined there and a sampler must reject the move.
"""

import json
from pathlib import Path

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from exciton_pimc.engine.hamiltonian import ModelSystem
from exciton_pimc.errors import DeadConfigurationError
from exciton_pimc.logger import get_logger, log_info, log_success
from exciton_pimc.models.parameter_models import TabulatedSurfaceFile

logger = get_logger(__name__)


class TabulatedModel(ModelSystem):
    name = "external-spec"

    def __init__(self, table: TabulatedSurfaceFile):
        super().__init__(n_sites=len(table.gap), mass=table.mass)
        self.table = table
        self._axes = [np.asarray(a, dtype=float) for a in table.axes]
        self._lo = np.array([a[0] for a in self._axes])
        self._hi = np.array([a[-1] for a in self._axes])
        shape = tuple(a.size for a in self._axes)

        ground = np.asarray(table.ground, dtype=float)
        gap = np.asarray(table.gap, dtype=float)
        if ground.shape != shape or gap.shape != (self.n_sites, self.n_sites) + shape:
            raise ValueError(f"tables must have grid shape {shape}")
        if not np.allclose(gap, np.swapaxes(gap, 0, 1), rtol=1e-12, atol=0.0):
            raise ValueError("tabulated gap matrix must be symmetric")

        # Site indices moved last so one interpolator returns whole matrices.
        gap_last = np.moveaxis(gap, (0, 1), (-2, -1))
        self._ground = self._interpolator(ground)
        self._ground_grad = self._interpolator(self._gradient_table(ground))
        self._gap = self._interpolator(gap_last)
        self._gap_grad = self._interpolator(self._gradient_table(gap_last))

    def _interpolator(self, values):
        return RegularGridInterpolator(self._axes, values, method="linear", bounds_error=True)

    def _gradient_table(self, values):
        """Stack of derivatives along each grid axis, axis index last-but-sites."""
        n_grid = len(self._axes)
        if n_grid == 1:
            grads = [np.gradient(values, self._axes[0], axis=0)]
        else:
            grads = np.gradient(values, *self._axes, axis=tuple(range(n_grid)))
        return np.stack(grads, axis=n_grid)

    def _inside(self, points):
        points = np.atleast_2d(np.asarray(points, dtype=float))
        outside = np.any((points < self._lo) | (points > self._hi), axis=1)
        if np.any(outside):
            first = points[np.argmax(outside)]
            raise DeadConfigurationError(
                f"point {first.tolist()} lies outside the tabulated range {self._lo.tolist()}..{self._hi.tolist()}"
            )
        return points

    def reference_point(self):
        flat = int(np.argmin(np.asarray(self.table.ground, dtype=float)))
        index = np.unravel_index(flat, tuple(a.size for a in self._axes))
        return np.array([axis[i] for axis, i in zip(self._axes, index)])

    def ground_potential(self, r):
        return float(self._ground(self._inside(r))[0])

    def ground_gradient(self, r):
        return self._ground_grad(self._inside(r))[0]

    def gap_matrix(self, r):
        return self._gap(self._inside(r))[0]

    def gap_gradient(self, r, j):
        self._check_index(j)
        return self._gap_grad(self._inside(r))[0, j]

    def ground_potentials(self, path):
        return self._ground(self._inside(path))

    def ground_gradients(self, path):
        return self._ground_grad(self._inside(path))

    def gap_matrices(self, path):
        return self._gap(self._inside(path))

    def gap_gradients(self, path):
        return self._gap_grad(self._inside(path))


def load_tabulated_model(path: str) -> TabulatedModel:
    log_info(logger, f"Loading tabulated surfaces from '{path}'")
    raw = json.loads(Path(path).read_text())
    table = TabulatedSurfaceFile.model_validate(raw)
    model = TabulatedModel(table)
    log_success(logger, f"Tabulated model ready: {model.n_sites} sites, {model.n_dof} dof.")
    return model
