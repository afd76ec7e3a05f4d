"""
Run-level schemas: what to execute, and what comes back.
"""
from pathlib import Path
from typing import Any, List, Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from app.core.config import settings
from app.schemas.params import ModelParams

RunMode = Literal["single", "sweep", "theta-scan", "oracle-compare", "convergence-scan", "calibrate"]
OutputFormat = Literal["csv", "json"]

SWEEPABLE = ("Omega", "Delta", "omegaD", "gamma0", "theta0")
THETA_GRID_DEG = [23.5, 35.0, 40.0, 45.0, 50.0, 62.0, 73.0, 84.5]
DEFAULT_CONVERGENCE_DEPTHS = [(5, 5), (10, 10), (15, 15), (20, 20), (25, 25)]


class SweepAxis(BaseModel):
    """One sweep dimension: a linear grid, or an explicit list of values."""

    name: str
    min: float = 0.0
    max: float = 0.0
    count: int = Field(1, ge=1)
    values: Optional[List[float]] = None

    model_config = ConfigDict(frozen=True)

    @field_validator("name")
    @classmethod
    def check_name(cls, value: str) -> str:
        if value not in SWEEPABLE:
            raise ValueError(f"cannot sweep '{value}'; choose from {', '.join(SWEEPABLE)}")
        return value

    @classmethod
    def parse(cls, text: str) -> "SweepAxis":
        """``name:min:max:count`` or ``name:v1,v2,...``."""
        name, _, rest = text.partition(":")
        parts = rest.split(":")
        if len(parts) == 3:
            return cls(name=name.strip(), min=float(parts[0]), max=float(parts[1]), count=int(parts[2]))
        if len(parts) == 1 and parts[0]:
            values = [float(v) for v in parts[0].split(",") if v.strip()]
            return cls(name=name.strip(), values=values, count=len(values))
        raise ValueError(f"sweep axis '{text}' is neither name:min:max:count nor name:v1,v2,...")

    def grid(self) -> List[float]:
        if self.values is not None:
            return list(self.values)
        if self.count == 1:
            return [self.min]
        return [float(v) for v in np.linspace(self.min, self.max, self.count)]


class RunConfig(BaseModel):
    params: ModelParams = Field(default_factory=ModelParams)
    mode: RunMode = "single"
    sweep_axes: List[SweepAxis] = Field(default_factory=list)
    sweep_cycles: List[int] = Field(default_factory=list)
    theta_grid: List[float] = Field(default_factory=lambda: list(THETA_GRID_DEG))
    convergence_depths: List[tuple[int, int]] = Field(default_factory=lambda: list(DEFAULT_CONVERGENCE_DEPTHS))
    convergence_gammas: List[float] = Field(default_factory=lambda: [0.1, 1.0])
    prominence: float = Field(1e-3, gt=0)
    near_unity: float = Field(0.05, gt=0)  # band around ratio 1 for stable cycles and sweep regions
    compare_periods: bool = False
    out: Optional[Path] = None
    format: OutputFormat = settings.DEFAULT_FORMAT
    workers: int = Field(settings.DEFAULT_WORKERS, ge=1)
    seed: int = 0
    preset: Optional[str] = None

    model_config = ConfigDict(extra="forbid")

    @field_validator("sweep_axes")
    @classmethod
    def check_axes(cls, value: List[SweepAxis]) -> List[SweepAxis]:
        if len(value) > 2:
            raise ValueError("at most two sweep axes")
        if len({a.name for a in value}) != len(value):
            raise ValueError("sweep axes must name different parameters")
        return value

    @field_validator("sweep_cycles")
    @classmethod
    def check_cycles(cls, value: List[int]) -> List[int]:
        if any(n < 1 for n in value):
            raise ValueError("sweep cycle counts must be >= 1")
        return sorted(set(value))

    @field_validator("theta_grid")
    @classmethod
    def check_theta(cls, value: List[float]) -> List[float]:
        if any(not 0 < t < 180 for t in value):
            raise ValueError("theta grid values are degrees strictly inside (0, 180)")
        return value

    @model_validator(mode="after")
    def check_mode(self) -> "RunConfig":
        if self.mode == "sweep" and not self.sweep_axes:
            raise ValueError("sweep mode needs at least one sweep axis")
        if self.sweep_cycles and max(self.sweep_cycles) > self.params.cycles:
            raise ValueError("sweep cycle counts cannot exceed cycles")
        return self

    @property
    def reported_cycles(self) -> List[int]:
        return self.sweep_cycles or [self.params.cycles]

    def echo(self) -> dict:
        """Flat key-value form of the config, loadable again as a config file."""
        flat: dict[str, Any] = {"schema_version": 1}
        for key, value in self.params.model_dump().items():
            if value is None:
                continue
            flat[key] = ",".join(str(v) for v in value) if isinstance(value, tuple) else value
        flat["mode"] = self.mode
        for i, axis in enumerate(self.sweep_axes, start=1):
            if axis.values is not None:
                flat[f"sweep_axis{i}"] = f"{axis.name}:{','.join(repr(v) for v in axis.values)}"
            else:
                flat[f"sweep_axis{i}"] = f"{axis.name}:{axis.min!r}:{axis.max!r}:{axis.count}"
        if self.sweep_cycles:
            flat["sweep_cycles"] = ",".join(str(n) for n in self.sweep_cycles)
        flat["theta_grid"] = ",".join(repr(t) for t in self.theta_grid)
        flat["convergence_depths"] = ";".join(f"{a},{b}" for a, b in self.convergence_depths)
        flat["convergence_gammas"] = ",".join(repr(g) for g in self.convergence_gammas)
        flat["prominence"] = self.prominence
        flat["near_unity"] = self.near_unity
        flat["compare_periods"] = self.compare_periods
        flat["format"] = self.format
        flat["seed"] = self.seed
        if self.preset:
            flat["preset"] = self.preset
        return flat


class SampleRow(BaseModel):
    tau: float
    cycle: int
    x: float
    y: float
    z: float
    R: float
    rho11: float
    re_rho12: float
    im_rho12: float
    eps1: float
    eps2: float
    phi_unwrapped: float
    phi_unitary: float
    ratio: float
    trace_drift: float
    min_eig: float


SAMPLE_COLUMNS = list(SampleRow.model_fields)


class SweepRow(BaseModel):
    axis1: float
    axis2: Optional[float] = None
    N: int
    phi_unwrapped: Optional[float] = None
    phi_unitary: float
    ratio: Optional[float] = None
    revivals: Optional[int] = None
    min_eig: Optional[float] = None
    status: str = "ok"
    detail: Optional[str] = Field(None, exclude=True)


SWEEP_COLUMNS = [name for name, f in SweepRow.model_fields.items() if not f.exclude]


class RunRecord(BaseModel):
    """Everything a run produced, plus the config that reproduces it."""

    config: dict
    version: str
    wall_clock: float = 0.0
    status: str = "ok"
    rows: List[SampleRow] = Field(default_factory=list)
    sweep: List[SweepRow] = Field(default_factory=list)
    diagnostics: dict = Field(default_factory=dict)
    gp: dict = Field(default_factory=dict)
    revivals: Optional[int] = None
    degeneracy_events: List[dict] = Field(default_factory=list)
    extras: dict = Field(default_factory=dict)
