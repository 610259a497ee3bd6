# exciton_pimc/models/summary_models.py

from typing import Any, Dict, List, Literal, Optional

from pydantic import BaseModel, Field


class ChainSummary(BaseModel):
    chain_index: int
    seed: int
    kernel: Literal["rwm", "mala"]
    n_beads: int
    n_warmup: int
    n_steps: int
    n_samples: int
    accepted: int
    acceptance_rate: Optional[float] = None
    dt_initial: float
    dt: float
    tuning_acceptance: Optional[float] = None
    tuning_converged: Optional[bool] = None
    dead_rejections: int = Field(0, description="Proposals rejected as dead configurations, warm-up included.")
    warnings: List[str] = Field(default_factory=list)
    wall_time_s: float = 0.0


class ElementEstimate(BaseModel):
    """One (row, col) entry of the reduced density matrix."""

    row: int
    col: int
    mean: float
    stderr: Optional[float] = None
    ci_low: Optional[float] = None
    ci_high: Optional[float] = None
    ljung_box_q: Optional[float] = None
    ljung_box_reject: Optional[bool] = None


class RunSummary(BaseModel):
    status: Literal["COMPLETED", "PARTIAL"] = "COMPLETED"
    model: str
    temperature_K: float
    beta: float
    n_beads: int
    kernel: Literal["rwm", "mala"]
    n_chains: int
    n_samples: int
    n_batches: int
    batch_size: int = Field(..., description="Batch size used for the reported errors, after any re-batching.")
    initial_batch_size: Optional[int] = None
    rebatch_doublings: int = 0
    rho: Optional[List[List[float]]] = Field(None, description="Mean population-normalized reduced density matrix.")
    elements: List[ElementEstimate]
    acceptance_rate: Optional[float] = None
    dt: List[float] = Field(default_factory=list, description="Tuned timestep per chain.")
    ljung_box_lags: int
    ljung_box_max_q: Optional[float] = None
    ljung_box_threshold: float
    warnings: List[str] = Field(default_factory=list)
    chains: List[ChainSummary] = Field(default_factory=list)
    wall_time_s: float = 0.0
    config: Dict[str, Any] = Field(default_factory=dict, description="Echo of the validated run configuration.")


class OracleSummary(BaseModel):
    model: str
    temperature_K: float
    beta: float
    method: Literal["dvr", "finite-m"]
    n_beads: Optional[int] = None
    grid_lo: List[float]
    grid_hi: List[float]
    grid_points: List[int]
    rho: List[List[float]]
    boundary_ratio: float
    converged: bool


class ElementComparison(BaseModel):
    row: int
    col: int
    sampled: float
    oracle: float
    stderr: Optional[float] = None
    z: Optional[float] = None


class VerifyReport(BaseModel):
    run: RunSummary
    oracle: OracleSummary
    comparisons: List[ElementComparison]
    all_within_ci: Optional[bool] = None


class SweepRow(BaseModel):
    temperature_K: float
    n_beads: int
    row: int
    col: int
    mean: float
    stderr: Optional[float] = None
    ci_low: Optional[float] = None
    ci_high: Optional[float] = None
