# exciton_pimc/runner.py
"""Experiment orchestration: chains on a worker pool, merge, summarize, write."""

import os
import time
from concurrent.futures import ProcessPoolExecutor
from functools import reduce
from pathlib import Path
from typing import Callable, List, Optional, Tuple

import numpy as np
from dotenv import load_dotenv

from exciton_pimc.constants import CONFIDENCE_Z, ORACLE_BOUNDARY_TOLERANCE, beta_from_kelvin
from exciton_pimc.engine.hamiltonian import ModelSystem, build_model
from exciton_pimc.engine.oracle import (
    GridSpec,
    boundary_ratio,
    finite_m_quadrature,
    solve_grid,
)
from exciton_pimc.engine.sampler import ChainAccumulators, run_chain
from exciton_pimc.engine.stats import (
    HistogramGrid,
    MatrixAccumulator,
    batch_means_stderr,
    chi2_quantile,
    default_batch_size,
    ljung_box_elements,
    rebatch_until_uncorrelated,
)
from exciton_pimc.errors import ConfigError, InsufficientBatchesError
from exciton_pimc.logger import get_logger, log_error, log_info, log_success, log_warning
from exciton_pimc.models.config_models import RunConfig
from exciton_pimc.models.summary_models import (
    ChainSummary,
    ElementComparison,
    ElementEstimate,
    OracleSummary,
    RunSummary,
    SweepRow,
    VerifyReport,
)
from exciton_pimc.outputs import write_density_files, write_json, write_outputs, write_sweep_csv

load_dotenv()
logger = get_logger(__name__)

# Default DVR grids for built-in models whose thermal density fits on a desk-size grid.
DEFAULT_ORACLE_GRIDS = {"alexander": GridSpec(lo=[-5.0], hi=[23.0], n_points=[281])}


def worker_count() -> int:
    try:
        return max(1, int(os.getenv("PIMC_WORKERS", "1")))
    except ValueError:
        log_warning(logger, "PIMC_WORKERS is not an integer; using a single worker.")
        return 1


def model_from_config(config: RunConfig) -> ModelSystem:
    try:
        return build_model(config.model.name, config.model.parameters, config.model.path)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"model: {exc}", key="model") from exc


def _new_accumulators(config: RunConfig, model: ModelSystem, batch_size: int) -> ChainAccumulators:
    section = config.histogram
    histogram = None
    if section.lo is not None:
        if len(section.lo) != model.n_dof:
            raise ConfigError(f"histogram bounds need {model.n_dof} entries", key="histogram.lo")
        histogram = HistogramGrid(section.lo, section.hi, section.bins)
    matrix = MatrixAccumulator((model.n_sites, model.n_sites), batch_size)
    return ChainAccumulators(matrix=matrix, histogram=histogram, histogram_bins=section.bins)


def _chain_job(model, beta, config: RunConfig, chain_index, accumulators) -> Tuple[ChainSummary, ChainAccumulators]:
    summary = run_chain(model, beta, config.run.n_beads, config.run.sampler(), accumulators, chain_index)
    return summary, accumulators


def summarize(
    config: RunConfig,
    matrix: MatrixAccumulator,
    chains: List[ChainSummary],
    status: str = "COMPLETED",
) -> Tuple[RunSummary, MatrixAccumulator]:
    """Batch-means statistics and Ljung-Box diagnostics of the merged chains.

    With `stats.rebatch` on, the batch size is doubled until Ljung-Box stops
    rejecting; the returned accumulator carries the batching that was used.
    """
    lags = config.stats.ljung_box_lags
    warnings = [w for chain in chains for w in chain.warnings]
    initial_batch_size = matrix.batch_size
    q = reject = None
    doublings = 0
    if config.stats.rebatch:
        rebatching = rebatch_until_uncorrelated(matrix, lags)
        matrix, q, reject, doublings = rebatching.matrix, rebatching.q, rebatching.reject, rebatching.doublings
        if doublings:
            log_info(logger, f"Batch size doubled {doublings} times to {matrix.batch_size} for Ljung-Box.")
    elif matrix.n_batches > lags:
        q, reject = ljung_box_elements(matrix.batch_means, lags)
    elements, rho, max_q = [], None, None
    try:
        estimate = batch_means_stderr(matrix)
        rho = estimate.mean
        stderr = estimate.stderr
    except InsufficientBatchesError as exc:
        stderr = None
        rho = matrix.mean()
        if matrix.total_count:
            warnings.append(f"no standard errors: {exc}")
    if q is not None:
        if np.any(np.isfinite(q)):
            max_q = float(np.nanmax(q))
        if np.any(reject):
            warnings.append(
                f"Ljung-Box rejects uncorrelated batches at batch size {matrix.batch_size} "
                f"(max Q {max_q:.3f}); increase batch_size"
            )
    elif matrix.n_batches:
        warnings.append(f"only {matrix.n_batches} batches; Ljung-Box with {lags} lags skipped")

    if rho is not None:
        for (row, col), mean in np.ndenumerate(rho):
            se = float(stderr[row, col]) if stderr is not None else None
            q_value = float(q[row, col]) if q is not None and np.isfinite(q[row, col]) else None
            elements.append(
                ElementEstimate(
                    row=row,
                    col=col,
                    mean=float(mean),
                    stderr=se,
                    ci_low=float(mean) - CONFIDENCE_Z * se if se is not None else None,
                    ci_high=float(mean) + CONFIDENCE_Z * se if se is not None else None,
                    ljung_box_q=q_value,
                    ljung_box_reject=bool(reject[row, col]) if q_value is not None else None,
                )
            )

    measured = [c for c in chains if c.acceptance_rate is not None]
    acceptance = (
        sum(c.accepted for c in measured) / sum(c.n_steps for c in measured) if measured else None
    )
    summary = RunSummary(
        status=status,
        model=config.model.name,
        temperature_K=config.run.temperature_K,
        beta=beta_from_kelvin(config.run.temperature_K),
        n_beads=config.run.n_beads,
        kernel=config.run.kernel,
        n_chains=len(chains),
        n_samples=matrix.total_count,
        n_batches=matrix.n_batches,
        batch_size=matrix.batch_size,
        initial_batch_size=initial_batch_size,
        rebatch_doublings=doublings,
        rho=rho.tolist() if rho is not None else None,
        elements=elements,
        acceptance_rate=acceptance,
        dt=[c.dt for c in chains],
        ljung_box_lags=lags,
        ljung_box_max_q=max_q,
        ljung_box_threshold=chi2_quantile(0.95, lags),
        warnings=warnings,
        chains=chains,
        wall_time_s=sum(c.wall_time_s for c in chains),
        config=config.model_dump(mode="json", exclude_none=True),
    )
    return summary, matrix


def run_experiment(
    config: RunConfig,
    output_dir: Optional[Path] = None,
    progress: Optional[Callable[[int, float], None]] = None,
) -> RunSummary:
    """Run ``n_chains`` chains, merge them in chain order, write the outputs.

    Chain 0 runs first in-process and fixes the histogram bounds the other
    chains use, so results do not depend on the pool size.
    """
    started = time.perf_counter()
    model = model_from_config(config)
    beta = beta_from_kelvin(config.run.temperature_K)
    n_samples = config.run.n_steps // config.run.thin
    batch_size = config.stats.batch_size or default_batch_size(n_samples)
    directory = Path(output_dir or config.output.directory)
    log_info(
        logger,
        f"Run: model={config.model.name} T={config.run.temperature_K}K M={config.run.n_beads} "
        f"kernel={config.run.kernel} chains={config.run.n_chains}",
    )

    first = _new_accumulators(config, model, batch_size)
    first_summary = run_chain(model, beta, config.run.n_beads, config.run.sampler(), first, 0, progress)
    results = {0: (first_summary, first)}
    failure = None

    remaining = list(range(1, config.run.n_chains))
    jobs = {}
    for index in remaining:
        accumulators = _new_accumulators(config, model, batch_size)
        accumulators.histogram = HistogramGrid(first.histogram.lo, first.histogram.hi, first.histogram.bins)
        jobs[index] = accumulators

    workers = worker_count()
    if remaining and workers > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(remaining))) as pool:
            futures = {i: pool.submit(_chain_job, model, beta, config, i, jobs[i]) for i in remaining}
            for index, future in futures.items():
                try:
                    results[index] = future.result()
                except Exception as exc:
                    log_error(logger, f"Chain {index} failed: {exc}", exc_info=True)
                    failure = failure or exc
    else:
        for index in remaining:
            try:
                results[index] = _chain_job(model, beta, config, index, jobs[index])
            except Exception as exc:
                log_error(logger, f"Chain {index} failed: {exc}", exc_info=True)
                failure = failure or exc

    ordered = [results[i] for i in sorted(results)]
    merged = ChainAccumulators(
        matrix=reduce(lambda a, b: a.merge(b), (acc.matrix for _, acc in ordered)),
        histogram=reduce(lambda a, b: a.merge(b), (acc.histogram for _, acc in ordered)),
    )
    summary, merged.matrix = summarize(
        config,
        merged.matrix,
        [chain for chain, _ in ordered],
        status="PARTIAL" if failure else "COMPLETED",
    )
    write_outputs(summary, merged, directory)
    if failure is not None:
        raise failure
    log_success(
        logger,
        f"Run complete: {summary.n_samples} samples, {summary.n_batches} batches, "
        f"wall {time.perf_counter() - started:.1f}s.",
    )
    return summary


def sweep_configs(config: RunConfig) -> List[Tuple[float, int, RunConfig]]:
    temperatures = config.sweep.temperatures_K or [config.run.temperature_K]
    bead_counts = config.sweep.bead_counts or [config.run.n_beads]
    out = []
    for temperature in temperatures:
        for n_beads in bead_counts:
            run = config.run.model_copy(update={"temperature_K": temperature, "n_beads": n_beads})
            out.append((temperature, n_beads, config.model_copy(update={"run": run})))
    return out


def run_sweep(config: RunConfig, output_dir: Optional[Path] = None) -> List[RunSummary]:
    """One run per (temperature, bead count) plus a combined sweep.csv."""
    directory = Path(output_dir or config.output.directory)
    summaries, rows = [], []
    for temperature, n_beads, point in sweep_configs(config):
        summary = run_experiment(point, directory / f"T{temperature:g}K_M{n_beads}")
        summaries.append(summary)
        rows.extend(
            SweepRow(
                temperature_K=temperature,
                n_beads=n_beads,
                row=e.row,
                col=e.col,
                mean=e.mean,
                stderr=e.stderr,
                ci_low=e.ci_low,
                ci_high=e.ci_high,
            )
            for e in summary.elements
        )
    directory.mkdir(parents=True, exist_ok=True)
    write_sweep_csv(rows, directory / "sweep.csv")
    log_success(logger, f"Sweep of {len(summaries)} runs written to '{directory}'.")
    return summaries


def oracle_grid(config: RunConfig, model: ModelSystem) -> GridSpec:
    section = config.oracle
    if section.lo is not None:
        if len(section.lo) != model.n_dof:
            raise ConfigError(f"oracle grid needs {model.n_dof} coordinates", key="oracle.lo")
        return GridSpec(section.lo, section.hi, section.n_points)
    if config.model.name in DEFAULT_ORACLE_GRIDS:
        return DEFAULT_ORACLE_GRIDS[config.model.name]
    raise ConfigError(f"model '{config.model.name}' has no default oracle grid; add an [oracle] section", key="oracle")


def run_oracle(
    config: RunConfig,
    output_dir: Optional[Path] = None,
    n_beads: Optional[int] = None,
) -> OracleSummary:
    """Grid reference for the configured model and temperature.

    With ``n_beads`` the finite-M quadrature is evaluated instead of the
    beta-exact diagonalization.
    """
    model = model_from_config(config)
    beta = beta_from_kelvin(config.run.temperature_K)
    grid = oracle_grid(config, model)
    directory = Path(output_dir or config.output.directory)
    directory.mkdir(parents=True, exist_ok=True)

    solution = solve_grid(model, grid)
    density = solution.nuclear_density(beta)
    ratio = boundary_ratio(density)
    converged = ratio < ORACLE_BOUNDARY_TOLERANCE
    if not converged:
        log_warning(logger, f"Oracle grid edge density ratio {ratio:.2e}; widen the [oracle] bounds.")
    if n_beads is None:
        rho = solution.reduced_density(beta)
    else:
        rho = finite_m_quadrature(model, beta, n_beads, grid)

    summary = OracleSummary(
        model=config.model.name,
        temperature_K=config.run.temperature_K,
        beta=beta,
        method="dvr" if n_beads is None else "finite-m",
        n_beads=n_beads,
        grid_lo=list(grid.lo),
        grid_hi=list(grid.hi),
        grid_points=list(grid.n_points),
        rho=rho.tolist(),
        boundary_ratio=ratio,
        converged=converged,
    )
    write_json(summary, directory / "oracle.json")
    write_density_files(
        grid.axes, density, float(np.prod(grid.spacing)), directory / "oracle_density.csv", directory / "oracle_density.gp"
    )
    log_success(logger, f"Oracle written to '{directory}'.")
    return summary


def compare(run: RunSummary, oracle: OracleSummary) -> VerifyReport:
    comparisons = []
    for e in run.elements:
        reference = oracle.rho[e.row][e.col]
        z = (e.mean - reference) / e.stderr if e.stderr else None
        comparisons.append(
            ElementComparison(row=e.row, col=e.col, sampled=e.mean, oracle=reference, stderr=e.stderr, z=z)
        )
    zs = [c.z for c in comparisons]
    within = all(abs(z) <= CONFIDENCE_Z for z in zs) if zs and None not in zs else None
    return VerifyReport(run=run, oracle=oracle, comparisons=comparisons, all_within_ci=within)


def verify(config: RunConfig, output_dir: Optional[Path] = None, finite_m: bool = False) -> VerifyReport:
    """Sampler run and grid reference side by side, with per-element z-scores."""
    directory = Path(output_dir or config.output.directory)
    run = run_experiment(config, directory)
    oracle = run_oracle(config, directory, n_beads=config.run.n_beads if finite_m else None)
    report = compare(run, oracle)
    write_json(report, directory / "verify.json")
    for c in report.comparisons:
        log_info(logger, f"rho[{c.row},{c.col}] sampled={c.sampled:.6f} oracle={c.oracle:.6f} z={c.z}")
    return report
