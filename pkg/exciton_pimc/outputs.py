# exciton_pimc/outputs.py
"""summary.json, batches.csv, density.csv and density.gp writers."""

import csv
import json
from pathlib import Path
from typing import List, Optional

import numpy as np
from pydantic import BaseModel

from exciton_pimc.engine.stats import HistogramGrid, MatrixAccumulator
from exciton_pimc.errors import EmptyHistogramError
from exciton_pimc.logger import get_logger, log_success

logger = get_logger(__name__)


def write_json(model: BaseModel, path: Path) -> Path:
    path.write_text(json.dumps(model.model_dump(mode="json"), indent=2) + "\n")
    return path


def write_batches_csv(matrix: Optional[MatrixAccumulator], path: Path) -> Path:
    with path.open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["batch", "row", "col", "value"])
        if matrix is not None:
            for b, means in enumerate(matrix.batch_means):
                for (row, col), value in np.ndenumerate(means):
                    writer.writerow([b, row, col, repr(float(value))])
    return path


def _coordinate_names(n_dof: int) -> List[str]:
    return ["x"] if n_dof == 1 else [f"x{d + 1}" for d in range(n_dof)]


def density_rows(centers: List[np.ndarray], density: np.ndarray, cell: float):
    """(coordinates..., density, mass) per grid cell, first coordinate slowest."""
    for index in np.ndindex(*density.shape):
        coords = [float(axis[i]) for axis, i in zip(centers, index)]
        value = float(density[index])
        yield coords + [value, value * cell]


def write_density_files(centers, density, cell, csv_path: Path, gp_path: Path):
    n_dof = len(centers)
    names = _coordinate_names(n_dof)
    with csv_path.open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(names + ["density", "mass"])
        if density is not None:
            for row in density_rows(centers, density, cell):
                writer.writerow([repr(v) for v in row])
    with gp_path.open("w") as handle:
        handle.write("# " + " ".join(names + ["density"]) + "\n")
        if density is not None:
            previous = None
            for row in density_rows(centers, density, cell):
                # Blank line between scan lines for 2D surface plots.
                if n_dof > 1 and previous is not None and row[0] != previous:
                    handle.write("\n")
                previous = row[0]
                handle.write(" ".join(f"{v:.10g}" for v in row[:-1]) + "\n")
    return csv_path, gp_path


def write_histogram(histogram: Optional[HistogramGrid], n_dof: int, directory: Path):
    density = None
    centers = [np.empty(0)] * n_dof
    cell = 1.0
    if histogram is not None:
        centers, cell = histogram.centers(), histogram.bin_volume
        try:
            density = histogram.normalize()
        except EmptyHistogramError:
            density = None
    return write_density_files(centers, density, cell, directory / "density.csv", directory / "density.gp")


def write_outputs(summary, accumulators, directory) -> List[Path]:
    """Write every run artifact into ``directory`` (created if missing)."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    n_dof = accumulators.histogram.lo.size if accumulators.histogram is not None else 1
    written = [
        write_json(summary, directory / "summary.json"),
        write_batches_csv(accumulators.matrix, directory / "batches.csv"),
        *write_histogram(accumulators.histogram, n_dof, directory),
    ]
    log_success(logger, f"Outputs written to '{directory}'.")
    return written


def write_sweep_csv(rows, path: Path) -> Path:
    with path.open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["temperature_K", "n_beads", "row", "col", "mean", "stderr", "ci_low", "ci_high"])
        for r in rows:
            writer.writerow([r.temperature_K, r.n_beads, r.row, r.col, r.mean, r.stderr, r.ci_low, r.ci_high])
    return path
