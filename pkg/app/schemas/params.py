"""
Pydantic schemas for the physical model parameters.

All quantities are dimensionless: energies in units of the Lorentzian width
lambda, time in tau = lambda * t.
"""
import math
from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator

from app.core.config import settings

CouplingConvention = Literal["correlation", "printed"]
PeriodPolicy = Literal["omega", "omega-plus-delta", "nonsecular"]


class ModelParams(BaseModel):
    """Physical parameters plus numerical controls for one trajectory."""

    Omega: float = 20.0
    Delta: float = Field(0.0, ge=0)
    omegaD: float = Field(0.0, ge=0)
    gamma0: float = Field(0.01, ge=0)
    theta0: float = Field(math.pi / 4, ge=0, le=math.pi)

    cycles: int = Field(15, ge=1)
    depth: tuple[int, int] = settings.DEFAULT_DEPTH
    dt: Optional[float] = Field(None, gt=0)  # None selects the automatic step
    samples_per_cycle: int = Field(settings.DEFAULT_SAMPLES_PER_CYCLE, ge=4)
    auto_refine: bool = False  # opt-in; each refinement doubles the step count

    coupling_convention: CouplingConvention = "printed"
    period_policy: PeriodPolicy = "omega"

    model_config = ConfigDict(frozen=True, extra="forbid")

    @field_validator("depth", mode="before")
    @classmethod
    def parse_depth(cls, value):
        if isinstance(value, str):
            value = tuple(int(part) for part in value.replace(" ", "").split(","))
        if isinstance(value, int):
            value = (value, value)
        return tuple(value)

    @field_validator("depth")
    @classmethod
    def check_depth(cls, value: tuple[int, int]) -> tuple[int, int]:
        if len(value) != 2 or min(value) < 1:
            raise ValueError("depth needs two components, each >= 1")
        return value

    @property
    def tau_c(self) -> float:
        return 1.0

    @property
    def tau_r(self) -> float:
        return math.inf if self.gamma0 == 0 else 1.0 / self.gamma0

    @property
    def markovian(self) -> bool:
        return self.gamma0 < 1.0

    def with_updates(self, **changes) -> "ModelParams":
        """Validated copy with some fields replaced."""
        return ModelParams(**{**self.model_dump(), **changes})
