"""Strict run configuration. Unknown keys are rejected; physical parameters
(grid, data amplitude and seed) have no defaults."""
from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

SCENARIOS = (
    "solve",
    "persistence",
    "asymptotics",
    "kappa-scan",
    "evolve",
    "steadiness",
    "liouville",
    "lorentz-selftest",
    "constants",
)

Scenario = Literal[
    "solve",
    "persistence",
    "asymptotics",
    "kappa-scan",
    "evolve",
    "steadiness",
    "liouville",
    "lorentz-selftest",
    "constants",
]


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True, ser_json_inf_nan="strings")


def _exponent(p):
    if isinstance(p, str) and p.lower() in ("inf", "infinity"):
        return math.inf
    return float(p)


class GridConfig(_Strict):
    N: int = Field(ge=8)
    L: float = Field(gt=0)

    @field_validator("N")
    @classmethod
    def _even(cls, v):
        if v % 2:
            raise ValueError("N must be even")
        return v


class DataConfig(_Strict):
    seed: int = Field(ge=0)
    band: tuple[float, float]
    amplitude: float = Field(ge=0)
    toy_mode: bool
    kappa: Optional[float] = Field(default=None, gt=0)
    # rescale so that δ = delta_fraction·ε_emp (and ‖g⃗‖ likewise)
    delta_fraction: Optional[float] = Field(default=None, gt=0)
    window_beta: float = Field(default=12.0, gt=0)


class SolverSection(_Strict):
    max_iterations: int = Field(default=200, ge=1)
    residual_tol: float = Field(default=1e-10, gt=0)
    p_list: tuple[float, ...] = (4.0, 5.0, 7.0, math.inf)
    divergence_factor: float = Field(default=1e6, gt=1)

    @field_validator("p_list", mode="before")
    @classmethod
    def _ps(cls, v):
        return tuple(_exponent(p) for p in v)


class ConstantsSection(_Strict):
    probe_count: int = Field(default=100, ge=10)
    seed: int = Field(default=7, ge=0)


class FlowSection(_Strict):
    T: float = Field(default=1.0, gt=0)
    M: int = Field(default=64, ge=4)
    picard_depth: int = Field(default=2, ge=2)
    p: float = Field(default=4.0, gt=3)
    perturbation: float = Field(default=0.0, ge=0)
    perturbation_seed: int = Field(default=1, ge=0)


class AsymptoticsSection(_Strict):
    n_radii: int = Field(default=40, ge=10)
    span: tuple[float, float] = (0.5, 20.0)
    p_list: tuple[float, ...] = (1.5, 2.0, 3.0, 4.0, 6.0)
    kappas: tuple[float, ...] = (0.125, 0.25, 0.5, 1.0)

    @model_validator(mode="after")
    def _span(self):
        if not 0.5 <= self.span[0] < self.span[1]:
            raise ValueError("asymptotics.span needs 0.5 <= lo < hi (radii in units of L)")
        return self


class LiouvilleSection(_Strict):
    p: float = Field(default=4.0, gt=3)
    q: float = math.inf
    radius_fractions: tuple[float, ...] = (0.125, 0.25)
    seeds: tuple[int, ...] = (1, 2, 3)
    calibration_margin: float = Field(default=2.0, ge=1)

    @field_validator("q", mode="before")
    @classmethod
    def _q(cls, v):
        return _exponent(v)

    @field_validator("radius_fractions")
    @classmethod
    def _fr(cls, v):
        if not v or any(not 0 < r <= 0.5 for r in v):
            raise ValueError("radius fractions must lie in (0, 1/2]")
        return v


class SelftestSection(_Strict):
    field_count: int = Field(default=8, ge=2)
    seed: int = Field(default=0, ge=0)


class ScenarioConfig(_Strict):
    scenario: Optional[Scenario] = None
    grid: GridConfig
    data: DataConfig
    solver: SolverSection = SolverSection()
    constants: ConstantsSection = ConstantsSection()
    flow: FlowSection = FlowSection()
    asymptotics: AsymptoticsSection = AsymptoticsSection()
    liouville: LiouvilleSection = LiouvilleSection()
    selftest: SelftestSection = SelftestSection()
    output_dir: Optional[str] = None

    @model_validator(mode="after")
    def _band(self):
        lo, hi = self.data.band
        if lo < 1 or hi <= lo or hi >= self.grid.N / 3:
            raise ValueError(f"data.band {list(self.data.band)} must satisfy 1 <= lo < hi < N/3")
        return self

    def with_seed(self, seed: int) -> "ScenarioConfig":
        return self.model_copy(update={"data": self.data.model_copy(update={"seed": int(seed)})})

    def echo(self) -> dict:
        return json.loads(self.model_dump_json())


def load_config(path) -> ScenarioConfig:
    text = Path(path).read_text()
    return ScenarioConfig.model_validate_json(text)
