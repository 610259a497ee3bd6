# exciton_pimc/engine/estimator.py
"""Path-integral quantities for a closed ring of M beads.

Bead i carries the factor A_i = exp(-tau E(R_i)/hbar). The chain estimator
of a ring is H_0 A_{M-1} ... A_1 H_0 with H_0 = exp(-tau E(R_0)/2hbar), and
the cyclic average runs that over every rotation of the ring. All products
are carried as (matrix, log_scale) pairs so that large beta*E never
underflows.
"""

from dataclasses import dataclass
from typing import Literal, Tuple

import numpy as np
from numpy.typing import NDArray

from exciton_pimc.constants import HBAR, SYMMETRY_TOLERANCE
from exciton_pimc.engine.hamiltonian import ModelSystem, SiteMatrix
from exciton_pimc.errors import DeadConfigurationError, NonSymmetricMatrixError

BeadPath = NDArray[np.float64]

# Running products are rescaled by their largest entry at this interval.
RENORM_INTERVAL = 16


@dataclass(frozen=True)
class PathWeights:
    """Log-domain weight of a path under f_I, with the estimators it was built from.

    ``rho_bar`` is the cyclic-averaged estimator divided by ``exp(log_scale)``.
    ``boundary`` holds, for each bead i, the chain estimator of the rotation
    that puts bead i at the boundary, normalized to unit trace.
    """

    log_fg: float
    log_trace: float
    rho_bar: SiteMatrix
    log_scale: float
    boundary: NDArray[np.float64]
    beta: float
    tau: float

    @property
    def log_fi(self) -> float:
        return self.log_fg + self.log_trace


@dataclass(frozen=True)
class DriftField:
    mu: NDArray[np.float64]


def imaginary_timestep(beta: float, n_beads: int) -> float:
    return HBAR * beta / n_beads


def rotate_path(path: BeadPath, k: int) -> BeadPath:
    """Ring relabelled so that bead k becomes bead 0."""
    return np.roll(np.asarray(path), -k, axis=0)


def reverse_path(path: BeadPath) -> BeadPath:
    """Ring traversed backwards, keeping bead 0 in place."""
    path = np.asarray(path)
    return np.concatenate([path[:1], path[:0:-1]], axis=0)


def _check_symmetric(e: NDArray[np.float64]) -> None:
    scale = max(float(np.max(np.abs(e))), np.finfo(float).tiny)
    asymmetry = float(np.max(np.abs(e - np.swapaxes(e, -1, -2))))
    if asymmetry > SYMMETRY_TOLERANCE * scale:
        raise NonSymmetricMatrixError(
            f"matrix asymmetry {asymmetry:.3e} exceeds tolerance relative to {scale:.3e}"
        )


def bead_exponential(e: SiteMatrix, tau: float, half: bool = False) -> SiteMatrix:
    """exp(-tau e / (s hbar)), s = 2 for a half factor, via eigendecomposition."""
    e = np.asarray(e, dtype=float)
    _check_symmetric(e)
    if tau <= 0:
        raise ValueError("tau must be positive")
    s = 2.0 if half else 1.0
    w, v = np.linalg.eigh(e)
    return (v * np.exp(-tau * w / (s * HBAR))) @ v.T


def _shifted_factors(gaps: NDArray[np.float64], tau: float):
    """Full and half bead factors with their largest eigenvalue scaled to 1.

    Returns (full, half, shifts) where the true full factor of bead i is
    exp(shifts[i]) * full[i] and the true half factor is
    exp(shifts[i] / 2) * half[i].
    """
    _check_symmetric(gaps)
    w, v = np.linalg.eigh(gaps)
    w_min = w[:, :1]
    full = np.einsum("kab,kb,kcb->kac", v, np.exp(-tau * (w - w_min) / HBAR), v)
    half = np.einsum("kab,kb,kcb->kac", v, np.exp(-tau * (w - w_min) / (2.0 * HBAR)), v)
    return full, half, -tau * w_min[:, 0] / HBAR


def _rescale(matrix, log_scale):
    peak = float(np.max(np.abs(matrix)))
    if not np.isfinite(peak) or peak <= 0.0:
        raise DeadConfigurationError("bead product collapsed to zero or overflowed")
    return matrix / peak, log_scale + np.log(peak)


def _rotation_chains(gaps: NDArray[np.float64], tau: float) -> Tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Chain estimators of all M rotations from prefix/suffix products.

    With L_i = A_{i-1} ... A_0 and U_i = A_{M-1} ... A_{i+1}, the rotation
    starting at bead i is H_i L_i U_i H_i. Returns (chains, log_scales) with
    true chain i equal to exp(log_scales[i]) * chains[i].
    """
    full, half, shifts = _shifted_factors(gaps, tau)
    m, n = full.shape[0], full.shape[1]
    eye = np.eye(n)

    prefix = np.empty((m, n, n))
    prefix_scale = np.zeros(m)
    prefix[0] = eye
    for k in range(1, m):
        prefix[k] = full[k - 1] @ prefix[k - 1]
        prefix_scale[k] = prefix_scale[k - 1]
        if k % RENORM_INTERVAL == 0:
            prefix[k], prefix_scale[k] = _rescale(prefix[k], prefix_scale[k])

    suffix = np.empty((m, n, n))
    suffix_scale = np.zeros(m)
    suffix[m - 1] = eye
    for k in range(m - 2, -1, -1):
        suffix[k] = suffix[k + 1] @ full[k + 1]
        suffix_scale[k] = suffix_scale[k + 1]
        if (m - 1 - k) % RENORM_INTERVAL == 0:
            suffix[k], suffix_scale[k] = _rescale(suffix[k], suffix_scale[k])

    chains = half @ prefix @ suffix @ half
    log_scales = prefix_scale + suffix_scale + float(np.sum(shifts))
    return chains, log_scales


def rho_chain_scaled(model: ModelSystem, path: BeadPath, beta: float) -> Tuple[SiteMatrix, float]:
    """Chain estimator H_0 A_{M-1} ... A_1 H_0 as (matrix, log_scale).

    The trace is positive for M <= 2, where the chain is a congruence of a
    positive-definite factor, and for any M while tau times the summed
    eigenvalue spreads of E(R_i) stays below log 2. Outside those limits
    non-commuting factors can drive it negative; log_weight_importance then
    reports a dead configuration.
    """
    path = np.atleast_2d(np.asarray(path, dtype=float))
    tau = imaginary_timestep(beta, len(path))
    full, half, shifts = _shifted_factors(model.gap_matrices(path), tau)
    product, log_scale = half[0], 0.0
    for count, k in enumerate(range(len(path) - 1, 0, -1), start=1):
        product = product @ full[k]
        if count % RENORM_INTERVAL == 0:
            product, log_scale = _rescale(product, log_scale)
    return product @ half[0], log_scale + float(np.sum(shifts))


def rho_chain(model: ModelSystem, path: BeadPath, beta: float) -> SiteMatrix:
    product, log_scale = rho_chain_scaled(model, path, beta)
    return product * np.exp(log_scale)


def rho_cyclic_avg_scaled(model: ModelSystem, path: BeadPath, beta: float) -> Tuple[SiteMatrix, float]:
    path = np.atleast_2d(np.asarray(path, dtype=float))
    tau = imaginary_timestep(beta, len(path))
    chains, log_scales = _rotation_chains(model.gap_matrices(path), tau)
    top = float(np.max(log_scales))
    weights = np.exp(log_scales - top)
    return np.einsum("k,kab->ab", weights, chains) / len(path), top


def rho_cyclic_avg(model: ModelSystem, path: BeadPath, beta: float) -> SiteMatrix:
    matrix, log_scale = rho_cyclic_avg_scaled(model, path, beta)
    return matrix * np.exp(log_scale)


def v_pimc(model: ModelSystem, path: BeadPath, beta: float) -> float:
    """Ring-polymer potential: bead-averaged V_g plus harmonic springs."""
    path = np.atleast_2d(np.asarray(path, dtype=float))
    m = len(path)
    links = path - np.roll(path, -1, axis=0)
    springs = m / (2.0 * beta**2 * HBAR**2) * float(np.sum(links * links * model.mass))
    return float(np.mean(model.ground_potentials(path))) + springs


def log_weight_importance(model: ModelSystem, path: BeadPath, beta: float) -> PathWeights:
    """log f_I = -beta V_PIMC + log Tr(rho_bar), additive constants dropped.

    Raises DeadConfigurationError when the trace is not a positive finite
    number; callers treat that as a rejected move.
    """
    path = np.atleast_2d(np.asarray(path, dtype=float))
    m = len(path)
    tau = imaginary_timestep(beta, m)
    try:
        chains, log_scales = _rotation_chains(model.gap_matrices(path), tau)
    except np.linalg.LinAlgError as exc:
        raise DeadConfigurationError(f"eigendecomposition failed: {exc}") from exc
    top = float(np.max(log_scales))
    rho_bar = np.einsum("k,kab->ab", np.exp(log_scales - top), chains) / m
    trace = float(np.trace(rho_bar))
    traces = np.trace(chains, axis1=1, axis2=2)
    if not np.isfinite(trace) or trace <= 0.0 or np.any(traces <= 0.0):
        raise DeadConfigurationError(f"cyclic-averaged estimator has trace {trace!r}")
    log_fg = -beta * v_pimc(model, path, beta)
    if not np.isfinite(log_fg):
        raise DeadConfigurationError("ring-polymer potential is not finite")
    return PathWeights(
        log_fg=log_fg,
        log_trace=float(np.log(trace)) + top,
        rho_bar=rho_bar,
        log_scale=top,
        boundary=chains / traces[:, None, None],
        beta=beta,
        tau=tau,
    )


def population_normalize(rho_bar: SiteMatrix) -> SiteMatrix:
    rho_bar = np.asarray(rho_bar, dtype=float)
    trace = float(np.trace(rho_bar))
    if not np.isfinite(trace) or trace <= 0.0:
        raise DeadConfigurationError(f"cannot normalize a matrix with trace {trace!r}")
    return rho_bar / trace


def grad_log_fg(model: ModelSystem, path: BeadPath, beta: float) -> NDArray[np.float64]:
    """Per-bead gradient of -beta V_PIMC, shape (M, N)."""
    path = np.atleast_2d(np.asarray(path, dtype=float))
    m = len(path)
    neighbours = np.roll(path, -1, axis=0) + np.roll(path, 1, axis=0) - 2.0 * path
    return -(beta / m) * model.ground_gradients(path) + (m / (beta * HBAR**2)) * model.mass * neighbours


def approx_grad_log_trace(
    model: ModelSystem,
    path: BeadPath,
    beta: float,
    weights: PathWeights = None,
    mode: Literal["boundary", "averaged"] = "boundary",
) -> NDArray[np.float64]:
    """Symmetrized-derivative approximation to grad log Tr(rho_bar), shape (M, N).

    d exp(-tau E) is replaced by -tau exp(-tau E/2) dE exp(-tau E/2), which
    turns entry (i, j) into -(tau/hbar) Tr[dE(R_i)/dR_ij C_i] / Tr[C_i], C_i
    being the chain that has bead i at its boundary. Exact whenever all gap
    matrices commute. ``mode="averaged"`` uses rho_bar in place of C_i.
    """
    path = np.atleast_2d(np.asarray(path, dtype=float))
    if weights is None:
        weights = log_weight_importance(model, path, beta)
    if mode == "boundary":
        estimators = weights.boundary
    elif mode == "averaged":
        normalized = weights.rho_bar / np.trace(weights.rho_bar)
        estimators = np.broadcast_to(normalized, weights.boundary.shape)
    else:
        raise ValueError(f"unknown trace-gradient mode '{mode}'")
    d_gap = model.gap_gradients(path)
    return -(weights.tau / HBAR) * np.einsum("ijab,iba->ij", d_gap, estimators)


def drift_field(
    model: ModelSystem,
    path: BeadPath,
    beta: float,
    weights: PathWeights = None,
    mode: Literal["boundary", "averaged"] = "boundary",
) -> DriftField:
    """Langevin drift mu_i ~ grad_i log f_I."""
    path = np.atleast_2d(np.asarray(path, dtype=float))
    mu = grad_log_fg(model, path, beta) + approx_grad_log_trace(model, path, beta, weights, mode)
    if not np.all(np.isfinite(mu)):
        raise DeadConfigurationError("drift field is not finite")
    return DriftField(mu=mu)
