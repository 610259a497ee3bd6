# exciton_pimc/engine/sampler.py
"""Markov kernels on the bead path targeting f_I, warm-up tuning, chain driver.

Both kernels move every bead at once. MALA drifts the proposal along the
approximate gradient of log f_I and corrects with the Hastings ratio, so the
stationary law is exact whatever the drift quality.
"""

import time
from dataclasses import dataclass, field
from typing import Callable, Literal, Optional, Tuple

import numpy as np
from numpy.typing import NDArray

from exciton_pimc.constants import HISTOGRAM_BINS, HISTOGRAM_PADDING, TUNING_TOLERANCE
from exciton_pimc.engine.estimator import (
    BeadPath,
    DriftField,
    PathWeights,
    drift_field,
    log_weight_importance,
    population_normalize,
)
from exciton_pimc.engine.hamiltonian import ModelSystem
from exciton_pimc.engine.stats import HistogramGrid, MatrixAccumulator, default_batch_size
from exciton_pimc.errors import DeadConfigurationError
from exciton_pimc.logger import (
    get_logger,
    log_chain_end,
    log_chain_start,
    log_progress,
    log_warning,
)
from exciton_pimc.models.config_models import SamplerConfig
from exciton_pimc.models.summary_models import ChainSummary

logger = get_logger(__name__)

GradientMode = Literal["boundary", "averaged"]
ProgressHook = Callable[[int, float], None]


@dataclass(frozen=True)
class ChainState:
    """A bead path with the weights and drift computed from it."""

    path: BeadPath
    weights: PathWeights
    drift: Optional[DriftField] = None

    @property
    def log_fi(self) -> float:
        return self.weights.log_fi


@dataclass
class ChainAccumulators:
    matrix: Optional[MatrixAccumulator] = None
    histogram: Optional[HistogramGrid] = None
    histogram_bins: object = HISTOGRAM_BINS


@dataclass
class KernelCounters:
    """Proposals rejected as dead configurations: no positive finite weight exists there."""

    dead: int = 0


@dataclass(frozen=True)
class StepSizeTuning:
    dt: float
    acceptance: float
    converged: bool
    state: ChainState
    bounds: Tuple[NDArray[np.float64], NDArray[np.float64]] = field(repr=False, default=None)


def make_rng(seed: int, chain_index: int = 0) -> np.random.Generator:
    """Counter-based Philox stream keyed by (seed, chain index)."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(chain_index,))))


def default_timestep(model: ModelSystem, beta: float, n_beads: int) -> float:
    """Inverse curvature of the stiffest spring, beta / (2 M m_max)."""
    return beta / (2.0 * n_beads * float(np.max(model.mass)))


def make_state(
    model: ModelSystem,
    path: BeadPath,
    beta: float,
    with_drift: bool,
    mode: GradientMode = "boundary",
) -> ChainState:
    path = np.atleast_2d(np.asarray(path, dtype=float))
    weights = log_weight_importance(model, path, beta)
    drift = drift_field(model, path, beta, weights, mode) if with_drift else None
    return ChainState(path=path, weights=weights, drift=drift)


def initial_state(
    model: ModelSystem,
    beta: float,
    n_beads: int,
    kernel: str = "mala",
    mode: GradientMode = "boundary",
) -> ChainState:
    """Every bead at the ground-surface minimum."""
    path = np.tile(model.reference_point(), (n_beads, 1))
    return make_state(model, path, beta, with_drift=(kernel == "mala"), mode=mode)


def _accept(log_alpha: float, u: float) -> bool:
    return bool(np.isfinite(log_alpha)) and np.log(u) < log_alpha


def _count_dead(counters: Optional[KernelCounters]) -> None:
    if counters is not None:
        counters.dead += 1


def rwm_step(
    state: ChainState,
    model: ModelSystem,
    beta: float,
    dt: float,
    rng: np.random.Generator,
    mode: GradientMode = "boundary",
    counters: Optional[KernelCounters] = None,
) -> Tuple[ChainState, bool]:
    """Symmetric Gaussian proposal of variance dt per coordinate."""
    xi = rng.standard_normal(state.path.shape)
    u = rng.random()
    proposal = state.path + np.sqrt(dt) * xi
    try:
        candidate = make_state(model, proposal, beta, with_drift=False)
    except DeadConfigurationError:
        _count_dead(counters)
        return state, False
    if _accept(candidate.log_fi - state.log_fi, u):
        return candidate, True
    return state, False


def mala_step(
    state: ChainState,
    model: ModelSystem,
    beta: float,
    dt: float,
    rng: np.random.Generator,
    mode: GradientMode = "boundary",
    counters: Optional[KernelCounters] = None,
) -> Tuple[ChainState, bool]:
    """Langevin proposal R' = R + mu dt + xi sqrt(dt) with Hastings correction.

    The proposal density has mean R + mu(R) dt in both directions.
    """
    xi = rng.standard_normal(state.path.shape)
    u = rng.random()
    mu = state.drift.mu
    proposal = state.path + mu * dt + np.sqrt(dt) * xi
    try:
        candidate = make_state(model, proposal, beta, with_drift=True, mode=mode)
    except DeadConfigurationError:
        _count_dead(counters)
        return state, False
    log_q_forward = -0.5 * float(np.sum(xi * xi))
    backward = state.path - proposal - candidate.drift.mu * dt
    log_q_backward = -float(np.sum(backward * backward)) / (2.0 * dt)
    log_alpha = candidate.log_fi - state.log_fi + log_q_backward - log_q_forward
    if _accept(log_alpha, u):
        return candidate, True
    return state, False


KERNELS = {"rwm": rwm_step, "mala": mala_step}


def tune_step_size(
    model: ModelSystem,
    beta: float,
    n_beads: int,
    config: SamplerConfig,
    rng: np.random.Generator,
    state: Optional[ChainState] = None,
    counters: Optional[KernelCounters] = None,
) -> StepSizeTuning:
    """Warm-up with dt <- dt exp(kappa (acc - target)) after every window.

    A window with no acceptances divides dt by 10 and a window with only
    acceptances doubles it, so a badly scaled start is bracketed quickly.
    The returned dt is frozen for the measured part of the chain.
    """
    n_warmup = config.warmup_steps()
    if n_warmup <= 0:
        raise ValueError("step-size tuning needs at least one warm-up step")
    kernel = KERNELS[config.kernel]
    target = config.target()
    window = config.adapt_window
    dt = config.dt or default_timestep(model, beta, n_beads)
    if state is None:
        state = initial_state(model, beta, n_beads, config.kernel, config.trace_gradient)

    lo = np.full(model.n_dof, np.inf)
    hi = np.full(model.n_dof, -np.inf)
    rates = []
    in_window = 0
    for step in range(1, n_warmup + 1):
        state, accepted = kernel(state, model, beta, dt, rng, config.trace_gradient, counters)
        in_window += accepted
        if step > n_warmup // 2:
            lo = np.minimum(lo, state.path.min(axis=0))
            hi = np.maximum(hi, state.path.max(axis=0))
        if step % window == 0:
            rate = in_window / window
            rates.append(rate)
            if rate == 0.0:
                dt *= 0.1
            elif rate == 1.0:
                dt *= 2.0
            else:
                dt *= float(np.exp(config.adapt_rate * (rate - target)))
            in_window = 0

    # Acceptance over the last fifth of the warm-up windows.
    tail = rates[-max(1, len(rates) // 5):] if rates else [in_window / max(n_warmup, 1)]
    acceptance = float(np.mean(tail))
    return StepSizeTuning(
        dt=dt,
        acceptance=acceptance,
        converged=abs(acceptance - target) <= TUNING_TOLERANCE,
        state=state,
        bounds=(lo, hi),
    )


def _histogram_from_bounds(lo, hi, bins) -> HistogramGrid:
    span = np.where(hi > lo, hi - lo, 1.0)
    return HistogramGrid(lo - HISTOGRAM_PADDING * span, hi + HISTOGRAM_PADDING * span, bins)


def run_chain(
    model: ModelSystem,
    beta: float,
    n_beads: int,
    config: SamplerConfig,
    accumulators: Optional[ChainAccumulators] = None,
    chain_index: int = 0,
    progress: Optional[ProgressHook] = None,
) -> ChainSummary:
    """Warm up, then run ``config.n_steps`` steps, recording every ``thin``-th state.

    Population-normalized estimators go into ``accumulators.matrix`` and all
    bead positions into ``accumulators.histogram``; both are created on
    demand (histogram bounds from the second half of the warm-up).
    """
    started = time.perf_counter()
    accumulators = accumulators if accumulators is not None else ChainAccumulators()
    rng = make_rng(config.seed, chain_index)
    counters = KernelCounters()
    kernel = KERNELS[config.kernel]
    n_warmup = config.warmup_steps()
    warnings = []
    log_chain_start(
        logger,
        chain_index,
        f"kernel={config.kernel} M={n_beads} beta={beta:.6g} warmup={n_warmup} steps={config.n_steps}",
    )

    state = initial_state(model, beta, n_beads, config.kernel, config.trace_gradient)
    dt_initial = config.dt or default_timestep(model, beta, n_beads)
    dt = dt_initial
    tuning = None
    if n_warmup > 0:
        tuning = tune_step_size(model, beta, n_beads, config, rng, state, counters)
        dt, state = tuning.dt, tuning.state
        if not tuning.converged:
            message = (
                f"chain {chain_index}: warm-up acceptance {tuning.acceptance:.3f} "
                f"missed target {config.target():.3f} by more than {TUNING_TOLERANCE}"
            )
            log_warning(logger, message)
            warnings.append(message)

    if accumulators.matrix is None:
        n_samples = config.n_steps // config.thin
        accumulators.matrix = MatrixAccumulator((model.n_sites, model.n_sites), default_batch_size(n_samples))
    if accumulators.histogram is None:
        if tuning is not None and np.all(np.isfinite(tuning.bounds[0])):
            lo, hi = tuning.bounds
        else:
            lo = hi = state.path.min(axis=0)
        accumulators.histogram = _histogram_from_bounds(lo, hi, accumulators.histogram_bins)

    accepted = 0
    for step in range(1, config.n_steps + 1):
        state, was_accepted = kernel(state, model, beta, dt, rng, config.trace_gradient, counters)
        accepted += was_accepted
        if step % config.thin == 0:
            accumulators.matrix.push(population_normalize(state.weights.rho_bar))
            accumulators.histogram.push_many(state.path)
        if step % config.progress_interval == 0:
            log_progress(logger, chain_index, step, accepted / step)
            if progress is not None:
                progress(step, accepted / step)

    if counters.dead:
        message = (
            f"chain {chain_index}: {counters.dead} proposals rejected as dead configurations "
            "(non-positive estimator trace or surfaces undefined); the sampled law excludes those paths"
        )
        log_warning(logger, message)
        warnings.append(message)
    acceptance = accepted / config.n_steps if config.n_steps else None
    summary = ChainSummary(
        chain_index=chain_index,
        seed=config.seed,
        kernel=config.kernel,
        n_beads=n_beads,
        n_warmup=n_warmup,
        n_steps=config.n_steps,
        n_samples=config.n_steps // config.thin,
        accepted=accepted,
        acceptance_rate=acceptance,
        dt_initial=dt_initial,
        dt=dt,
        tuning_acceptance=tuning.acceptance if tuning else None,
        tuning_converged=tuning.converged if tuning else None,
        dead_rejections=counters.dead,
        warnings=warnings,
        wall_time_s=time.perf_counter() - started,
    )
    log_chain_end(
        logger,
        chain_index,
        f"acceptance={acceptance if acceptance is None else round(acceptance, 4)} dt={dt:.4g} "
        f"wall={summary.wall_time_s:.1f}s",
    )
    return summary
