# exciton_pimc/engine/oracle.py
"""Grid references for the sampler.

``solve_grid`` diagonalizes the full exciton-phonon Hamiltonian in a
Colbert-Miller sinc-DVR, which gives the beta-exact reduced density matrix
and nuclear density. ``finite_m_quadrature`` evaluates the M-bead
path-integral expression on the same grid, i.e. exactly what the sampler
targets at that M, so sampler bias can be told apart from Trotter error.
"""

from dataclasses import dataclass
from functools import reduce
from typing import List, Sequence

import numpy as np
from numpy.typing import NDArray
from scipy.linalg import eigh

from exciton_pimc.constants import HBAR, ORACLE_BOUNDARY_TOLERANCE, ORACLE_MIN_POINTS, ORACLE_SIZE_CAP
from exciton_pimc.engine.hamiltonian import ModelSystem, SiteMatrix
from exciton_pimc.errors import GridSizeError
from exciton_pimc.logger import get_logger, log_oracle_call, log_success, log_warning

logger = get_logger(__name__)


@dataclass(frozen=True)
class GridSpec:
    lo: Sequence[float]
    hi: Sequence[float]
    n_points: Sequence[int]

    def __post_init__(self):
        if not len(self.lo) == len(self.hi) == len(self.n_points):
            raise ValueError("lo, hi and n_points need one entry per coordinate")
        if any(n < ORACLE_MIN_POINTS for n in self.n_points):
            raise ValueError(f"at least {ORACLE_MIN_POINTS} points per coordinate are required")
        if any(h <= l for l, h in zip(self.lo, self.hi)):
            raise ValueError("hi must exceed lo in every coordinate")

    @property
    def axes(self) -> List[NDArray[np.float64]]:
        return [np.linspace(l, h, n) for l, h, n in zip(self.lo, self.hi, self.n_points)]

    @property
    def spacing(self) -> NDArray[np.float64]:
        return np.array([(h - l) / (n - 1) for l, h, n in zip(self.lo, self.hi, self.n_points)])

    @property
    def size(self) -> int:
        return int(np.prod(self.n_points))

    @property
    def shape(self):
        return tuple(self.n_points)

    def points(self) -> NDArray[np.float64]:
        """All grid points, shape (size, N), first coordinate slowest."""
        mesh = np.meshgrid(*self.axes, indexing="ij")
        return np.stack([m.reshape(-1) for m in mesh], axis=1)

    def refined(self, factor: int = 2) -> "GridSpec":
        return GridSpec(self.lo, self.hi, [factor * (n - 1) + 1 for n in self.n_points])


def sinc_dvr_kinetic(n_points: int, spacing: float, mass: float) -> NDArray[np.float64]:
    """Colbert-Miller kinetic matrix on an evenly spaced infinite-range grid."""
    coeff = HBAR**2 / (2.0 * mass * spacing**2)
    k = np.subtract.outer(np.arange(n_points), np.arange(n_points))
    with np.errstate(divide="ignore"):
        off = 2.0 * (-1.0) ** np.abs(k) / k.astype(float) ** 2
    return coeff * np.where(k == 0, np.pi**2 / 3.0, off)


def _check_size(model: ModelSystem, grid: GridSpec) -> int:
    if len(grid.n_points) != model.n_dof:
        raise ValueError(f"grid has {len(grid.n_points)} coordinates, model has {model.n_dof}")
    size = model.n_sites * grid.size
    if size > ORACLE_SIZE_CAP:
        raise GridSizeError(f"grid problem of size {size} exceeds the cap of {ORACLE_SIZE_CAP}")
    return size


def build_grid_hamiltonian(model: ModelSystem, grid: GridSpec) -> NDArray[np.float64]:
    """Dense H with site-major ordering: index = site * grid.size + point."""
    _check_size(model, grid)
    eyes = [np.eye(n) for n in grid.n_points]
    kinetic = np.zeros((grid.size, grid.size))
    for d, (n, dx, m) in enumerate(zip(grid.n_points, grid.spacing, model.mass)):
        factors = list(eyes)
        factors[d] = sinc_dvr_kinetic(n, dx, m)
        kinetic += reduce(np.kron, factors)

    points = grid.points()
    ground = model.ground_potentials(points)
    gaps = model.gap_matrices(points)
    n = model.n_sites
    h = np.zeros((n * grid.size, n * grid.size))
    for a in range(n):
        rows = slice(a * grid.size, (a + 1) * grid.size)
        for b in range(n):
            cols = slice(b * grid.size, (b + 1) * grid.size)
            if a == b:
                h[rows, cols] = kinetic + np.diag(ground + gaps[:, a, a])
            else:
                h[rows, cols] = np.diag(gaps[:, a, b])
    return h


@dataclass(frozen=True)
class GridSolution:
    grid: GridSpec
    n_sites: int
    energies: NDArray[np.float64]
    vectors: NDArray[np.float64]

    def boltzmann(self, beta: float) -> NDArray[np.float64]:
        return np.exp(-beta * (self.energies - self.energies[0]))

    def amplitudes(self) -> NDArray[np.float64]:
        """Eigenvectors reshaped to (site, point, state)."""
        return self.vectors.reshape(self.n_sites, self.grid.size, -1)

    def reduced_density(self, beta: float) -> SiteMatrix:
        psi = self.amplitudes()
        rho = np.einsum("agk,bgk,k->ab", psi, psi, self.boltzmann(beta))
        rho = 0.5 * (rho + rho.T)
        return rho / np.trace(rho)

    def nuclear_density(self, beta: float) -> NDArray[np.float64]:
        """Normalized so that sum(density) * cell volume = 1; shaped like the grid."""
        psi = self.amplitudes()
        weight = np.einsum("agk,k->g", psi**2, self.boltzmann(beta))
        cell = float(np.prod(self.grid.spacing))
        return (weight / (weight.sum() * cell)).reshape(self.grid.shape)


def boundary_ratio(density: NDArray[np.float64]) -> float:
    """Largest density on the grid edges relative to the peak density."""
    edges = []
    for axis in range(density.ndim):
        edges.append(np.take(density, 0, axis=axis).max())
        edges.append(np.take(density, -1, axis=axis).max())
    return float(max(edges) / density.max())


def solve_grid(model: ModelSystem, grid: GridSpec) -> GridSolution:
    size = _check_size(model, grid)
    log_oracle_call(logger, "solve_grid", f"{model.n_sites} sites x {grid.size} points = {size}")
    energies, vectors = eigh(build_grid_hamiltonian(model, grid))
    log_success(logger, f"Grid Hamiltonian diagonalized; ground level {energies[0]:.10g} Hartree.")
    return GridSolution(grid=grid, n_sites=model.n_sites, energies=energies, vectors=vectors)


def check_support(solution: GridSolution, beta: float) -> bool:
    ratio = boundary_ratio(solution.nuclear_density(beta))
    if ratio >= ORACLE_BOUNDARY_TOLERANCE:
        log_warning(
            logger,
            f"Grid not converged: edge density is {ratio:.2e} of the peak (tolerance {ORACLE_BOUNDARY_TOLERANCE:.0e}).",
        )
        return False
    return True


def exact_reduced_density(model: ModelSystem, beta: float, grid: GridSpec) -> SiteMatrix:
    solution = solve_grid(model, grid)
    check_support(solution, beta)
    return solution.reduced_density(beta)


def exact_nuclear_density(model: ModelSystem, beta: float, grid: GridSpec) -> NDArray[np.float64]:
    solution = solve_grid(model, grid)
    check_support(solution, beta)
    return solution.nuclear_density(beta)


def grid_refinement_delta(model: ModelSystem, beta: float, grid: GridSpec, factor: int = 2) -> float:
    """Largest change of any reduced-density entry when the grid is refined."""
    coarse = exact_reduced_density(model, beta, grid)
    fine = exact_reduced_density(model, beta, grid.refined(factor))
    return float(np.max(np.abs(fine - coarse)))


def _trapezoid_weights(grid: GridSpec) -> NDArray[np.float64]:
    per_axis = []
    for n, dx in zip(grid.n_points, grid.spacing):
        w = np.full(n, dx)
        w[[0, -1]] = 0.5 * dx
        per_axis.append(w)
    return reduce(np.multiply.outer, per_axis).reshape(-1)


def finite_m_quadrature(model: ModelSystem, beta: float, n_beads: int, grid: GridSpec) -> SiteMatrix:
    """Population-normalized M-bead estimate, integrated on the grid.

    The one-link kernel K[(p, a), (q, b)] = s_p s_q G(p, q) (H_p H_q)[a, b],
    with H = exp(-tau E / 2), s = sqrt(weight exp(-tau V_g)) and G the free
    ring-polymer spring factor. The block trace of K^M is the sum of the
    chain integrand over every bead tuple.
    """
    if n_beads < 1:
        raise ValueError("n_beads must be at least 1")
    _check_size(model, grid)
    log_oracle_call(logger, "finite_m_quadrature", f"M={n_beads}, {grid.size} points")
    tau = HBAR * beta / n_beads
    points = grid.points()
    n = model.n_sites

    gaps = model.gap_matrices(points)
    w, v = np.linalg.eigh(gaps)
    half = np.einsum("pab,pb,pcb->pac", v, np.exp(-tau * (w - w.min()) / (2.0 * HBAR)), v)
    ground = model.ground_potentials(points)
    s = np.sqrt(_trapezoid_weights(grid) * np.exp(-tau * (ground - ground.min()) / HBAR))

    diff = points[:, None, :] - points[None, :, :]
    springs = np.exp(-n_beads / (2.0 * beta * HBAR**2) * np.einsum("pqd,d->pq", diff**2, model.mass))
    link = np.einsum("p,q,pq->pq", s, s, springs)
    kernel = np.einsum("pq,pac,qcb->paqb", link, half, half).reshape(n * grid.size, n * grid.size)
    kernel /= np.max(np.abs(kernel))

    power = np.linalg.matrix_power(kernel, n_beads).reshape(grid.size, n, grid.size, n)
    rho = np.einsum("papb->ab", power)
    rho = 0.5 * (rho + rho.T)
    return rho / np.trace(rho)
