# exciton_pimc/models/parameter_models.py

from typing import List

from pydantic import BaseModel, ConfigDict, Field, model_validator


class AlexanderParameters(BaseModel):
    """Two crossing harmonic diabats with a Gaussian coupling, one coordinate."""

    model_config = ConfigDict(extra="forbid")

    k11: float = Field(4e-5, gt=0, description="Force constant of surface 1.")
    k22: float = Field(3.2e-5, gt=0, description="Force constant of surface 2.")
    x11: float = Field(7.0, description="Minimum of surface 1 (bohr).")
    x22: float = Field(10.5, description="Minimum of surface 2 (bohr).")
    eps11: float = Field(0.0, description="Energy offset of surface 1 (Hartree).")
    eps22: float = Field(2.2782e-5, description="Energy offset of surface 2 (Hartree).")
    c: float = Field(5e-5, description="Peak coupling (Hartree).")
    alpha: float = Field(0.4, gt=0, description="Gaussian width parameter of the coupling.")
    x12: float = Field(8.75, description="Centre of the coupling (bohr).")
    mass: float = Field(3.6743e3, gt=0, description="Nuclear mass (electron masses).")


class DimerParameters(BaseModel):
    """Heterodimer of displaced harmonic oscillators in the single exciton manifold."""

    model_config = ConfigDict(extra="forbid")

    k1: float = Field(2.227817e-3, gt=0, description="Force constant of mode 1.")
    k2: float = Field(2.227817e-3, gt=0, description="Force constant of mode 2.")
    d1: float = Field(3.0, description="Excited-state displacement of mode 1 (bohr).")
    d2: float = Field(2.0, description="Excited-state displacement of mode 2 (bohr).")
    eps1: float = Field(8.064745e-2, description="Vertical gap of site 1 (Hartree).")
    eps2: float = Field(7.976238e-2, description="Vertical gap of site 2 (Hartree).")
    J: float = Field(-4.738588e-4, description="Constant excitonic coupling (Hartree).")
    m1: float = Field(3.418218e6, gt=0, description="Mass of mode 1 (electron masses).")
    m2: float = Field(3.418218e6, gt=0, description="Mass of mode 2 (electron masses).")


class TabulatedSurfaceFile(BaseModel):
    """On-disk layout of a user-supplied, grid-tabulated exciton-phonon model."""

    model_config = ConfigDict(extra="forbid")

    axes: List[List[float]] = Field(..., description="Strictly increasing grid per coordinate (bohr).")
    mass: List[float] = Field(..., description="Diagonal mass tensor (electron masses).")
    ground: list = Field(..., description="V_g tabulated on the grid (nested lists, one level per axis).")
    gap: List[List[list]] = Field(..., description="n x n gap-matrix tables, each shaped like `ground`.")

    @model_validator(mode="after")
    def _check_shapes(self):
        if len(self.mass) != len(self.axes):
            raise ValueError("mass must have one entry per axis")
        if any(m <= 0 for m in self.mass):
            raise ValueError("masses must be strictly positive")
        n_sites = len(self.gap)
        if n_sites == 0 or any(len(row) != n_sites for row in self.gap):
            raise ValueError("gap must be a square n x n array of tables")
        for axis in self.axes:
            if len(axis) < 2 or any(b <= a for a, b in zip(axis, axis[1:])):
                raise ValueError("each axis needs at least two strictly increasing points")
        return self
