# exciton_pimc/models/config_models.py

from typing import Dict, List, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, model_validator

from exciton_pimc.constants import (
    ADAPT_RATE,
    ADAPT_WINDOW,
    HISTOGRAM_BINS,
    LJUNG_BOX_LAGS,
    MALA_TARGET_ACCEPTANCE,
    MIN_WARMUP_STEPS,
    ORACLE_MIN_POINTS,
    PROGRESS_INTERVAL,
    RWM_TARGET_ACCEPTANCE,
    WARMUP_FRACTION,
)


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class SamplerConfig(_Section):
    kernel: Literal["rwm", "mala"] = Field("mala", description="Markov kernel.")
    n_steps: int = Field(100_000, ge=0, description="Measured kernel steps per chain.")
    n_warmup: Optional[int] = Field(None, ge=0, description="Tuning steps; default 5% of n_steps, at least 1e4.")
    thin: int = Field(1, ge=1, description="Record every `thin` steps.")
    seed: int = Field(0, ge=0, lt=2**63, description="Base seed; chain streams derive from (seed, chain index).")
    dt: Optional[float] = Field(None, gt=0, description="Initial Monte Carlo timestep (bohr^2).")
    target_acceptance: Optional[float] = Field(None, gt=0, lt=1)
    adapt_rate: float = Field(ADAPT_RATE, gt=0)
    adapt_window: int = Field(ADAPT_WINDOW, ge=1)
    progress_interval: int = Field(PROGRESS_INTERVAL, ge=1)
    trace_gradient: Literal["boundary", "averaged"] = "boundary"

    def warmup_steps(self) -> int:
        if self.n_warmup is not None:
            return self.n_warmup
        return max(int(WARMUP_FRACTION * self.n_steps), MIN_WARMUP_STEPS)

    def target(self) -> float:
        if self.target_acceptance is not None:
            return self.target_acceptance
        return MALA_TARGET_ACCEPTANCE if self.kernel == "mala" else RWM_TARGET_ACCEPTANCE


class ModelSection(_Section):
    name: Literal["alexander", "dimer", "external-spec"] = "dimer"
    path: Optional[str] = Field(None, description="Tabulated surface file for external-spec.")
    parameters: Dict[str, float] = Field(default_factory=dict, description="Overrides of the built-in parameter record.")

    @model_validator(mode="after")
    def _check_path(self):
        if self.name == "external-spec" and not self.path:
            raise ValueError("external-spec model requires `path`")
        if self.name == "external-spec" and self.parameters:
            raise ValueError("external-spec model takes no parameter overrides")
        return self


class RunSection(SamplerConfig):
    temperature_K: float = Field(300.0, gt=0, description="Temperature in kelvin.")
    n_beads: int = Field(16, ge=1, description="Discretization number M.")
    n_chains: int = Field(1, ge=1, description="Independent chains to merge.")

    def sampler(self) -> SamplerConfig:
        return SamplerConfig(**self.model_dump(include=set(SamplerConfig.model_fields)))


class StatsSection(_Section):
    batch_size: Optional[int] = Field(None, ge=1, description="Default max(samples/40, 1e3).")
    ljung_box_lags: int = Field(LJUNG_BOX_LAGS, ge=1)
    rebatch: bool = Field(True, description="Double the batch size until Ljung-Box stops rejecting.")


class HistogramSection(_Section):
    bins: Union[int, List[int]] = Field(HISTOGRAM_BINS, description="Bins per coordinate.")
    lo: Optional[List[float]] = None
    hi: Optional[List[float]] = None

    @model_validator(mode="after")
    def _check_bounds(self):
        if (self.lo is None) != (self.hi is None):
            raise ValueError("give both `lo` and `hi`, or neither")
        if self.lo is not None:
            if len(self.lo) != len(self.hi) or any(h <= l for l, h in zip(self.lo, self.hi)):
                raise ValueError("`hi` must exceed `lo` in every dimension")
        bins = self.bins if isinstance(self.bins, list) else [self.bins]
        if any(b < 1 for b in bins):
            raise ValueError("`bins` must be positive")
        return self


class OracleSection(_Section):
    lo: Optional[List[float]] = None
    hi: Optional[List[float]] = None
    n_points: Optional[List[int]] = None

    @model_validator(mode="after")
    def _check_grid(self):
        given = [v is not None for v in (self.lo, self.hi, self.n_points)]
        if any(given) and not all(given):
            raise ValueError("give `lo`, `hi` and `n_points` together")
        if all(given):
            if not len(self.lo) == len(self.hi) == len(self.n_points):
                raise ValueError("`lo`, `hi` and `n_points` need one entry per coordinate")
            if any(h <= l for l, h in zip(self.lo, self.hi)):
                raise ValueError("`hi` must exceed `lo` in every dimension")
            if any(n < ORACLE_MIN_POINTS for n in self.n_points):
                raise ValueError(f"`n_points` must be at least {ORACLE_MIN_POINTS}")
        return self


class SweepSection(_Section):
    temperatures_K: List[float] = Field(default_factory=list)
    bead_counts: List[int] = Field(default_factory=list)

    @model_validator(mode="after")
    def _check_values(self):
        if any(t <= 0 for t in self.temperatures_K):
            raise ValueError("sweep temperatures must be positive")
        if any(m < 1 for m in self.bead_counts):
            raise ValueError("sweep bead counts must be >= 1")
        return self


class OutputSection(_Section):
    directory: str = "results"


class RunConfig(_Section):
    model: ModelSection = Field(default_factory=ModelSection)
    run: RunSection = Field(default_factory=RunSection)
    stats: StatsSection = Field(default_factory=StatsSection)
    histogram: HistogramSection = Field(default_factory=HistogramSection)
    oracle: OracleSection = Field(default_factory=OracleSection)
    sweep: SweepSection = Field(default_factory=SweepSection)
    output: OutputSection = Field(default_factory=OutputSection)

    @property
    def is_sweep(self) -> bool:
        return bool(self.sweep.temperatures_K or self.sweep.bead_counts)
