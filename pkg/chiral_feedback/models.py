import math
from typing import Dict, List, Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

# Phases landing a hair outside [-pi, pi] through float round-off are clamped.
_PHASE_SLACK = 1e-9


class SystemParams(BaseModel):
    """Physical rates and phases of the driven V-atom, in units where gamma sets the scale.

    The drive phase ``phi_prime`` defaults to 0. It is only read when eta < 1,
    where it is an independent knob on the e2 drive term; at eta = 1 only
    ``delta_phi`` matters.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    omega: float = Field(0.0, ge=0.0, description="Rabi frequency")
    gamma: float = Field(1.0, gt=0.0, description="guided coupling")
    gamma_loss: float = Field(0.0, ge=0.0, description="non-guided decay gamma'")
    delta1: float = 0.0
    delta2: float = 0.0
    delta_phi: float = 0.0
    phi_prime: float = Field(0.0, description="drive phase, used only when eta < 1")
    tau: float = Field(0.0, ge=0.0, description="feedback delay")
    eta: float = Field(1.0, description="directionality of the coupling")

    @field_validator("delta_phi")
    @classmethod
    def _phase_in_range(cls, v: float) -> float:
        if not math.isfinite(v) or abs(v) > math.pi + _PHASE_SLACK:
            raise ValueError(f"delta_phi must lie in [-pi, pi], got {v}")
        return max(-math.pi, min(math.pi, v))

    @field_validator("eta")
    @classmethod
    def _eta_in_range(cls, v: float) -> float:
        if not 0.5 <= v <= 1.0:
            raise ValueError(f"eta must lie in [0.5, 1], got {v}")
        return v

    @classmethod
    def from_bare_phases(cls, feedback_phase: float, drive_phase: float, **kwargs) -> "SystemParams":
        """Build params from the bare feedback phase and the relative drive phase.

        Only their difference enters the dynamics at eta = 1.
        """
        from .operators import wrap_phase

        return cls(delta_phi=wrap_phase(feedback_phase - drive_phase), **kwargs)

    @property
    def detuning(self) -> float:
        """Common detuning, meaningful when delta1 == delta2."""
        return self.delta1

    @property
    def beta(self) -> float:
        return self.gamma / (self.gamma + self.gamma_loss)


class CavityConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    g: float = Field(..., gt=0.0)
    kappa: float = Field(..., gt=0.0)
    kappa_loss: float = Field(0.0, ge=0.0)
    n_max: int = Field(3, ge=1)


class TimeBinConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    dt: float = Field(0.02, gt=0.0)
    fock_cutoff: int = Field(1, ge=1)
    d_max: int = Field(64, ge=1)
    svd_tol: float = Field(1e-8, gt=0.0, lt=1.0)
    t_final: float = Field(50.0, gt=0.0)
    max_step_product: Optional[float] = Field(0.05, gt=0.0)
    stop_at_steady: bool = False
    steady_window: float = Field(5.0, gt=0.0)
    steady_tol: float = Field(1e-5, gt=0.0)

    def delay_steps(self, tau: float) -> int:
        return int(math.floor(tau / self.dt + 1e-9))

    @property
    def n_steps(self) -> int:
        return int(round(self.t_final / self.dt))


class StepSettings(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    dt: float = Field(0.005, gt=0.0)
    t_final: Optional[float] = Field(None, gt=0.0)
    method: Literal["expm", "rk4"] = "expm"
    sample_every: int = Field(10, ge=1)


class GridAxis(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    name: str
    start: Optional[float] = None
    stop: Optional[float] = None
    points: Optional[int] = None
    values: Optional[List[float]] = None

    @model_validator(mode="after")
    def _check_shape(self) -> "GridAxis":
        if self.values is not None:
            if len(self.values) < 2:
                raise ValueError(f"axis '{self.name}' needs at least 2 values")
            return self
        if self.start is None or self.stop is None or self.points is None:
            raise ValueError(f"axis '{self.name}' needs start, stop and points (or explicit values)")
        if self.points < 2:
            raise ValueError(f"axis '{self.name}' needs points >= 2, got {self.points}")
        return self

    def grid(self) -> np.ndarray:
        if self.values is not None:
            return np.asarray(self.values, dtype=float)
        return np.linspace(self.start, self.stop, self.points)


class OutputOptions(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    path: Optional[str] = None
    format: Literal["csv", "jsonl"] = "csv"


RunMode = Literal["steady", "evolve", "mps", "cavity", "dark-curve", "sweep"]


class RunConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    mode: RunMode
    model: Literal["v-atom", "dimer"] = "v-atom"
    engine: Literal["markov", "mps"] = "markov"
    params: SystemParams = SystemParams()
    initial_state: Literal["g", "e1", "e2", "S", "T"] = "g"
    grid: List[GridAxis] = []
    steps: StepSettings = StepSettings()
    time_bins: TimeBinConfig = TimeBinConfig()
    cavity: Optional[CavityConfig] = None
    output: OutputOptions = OutputOptions()

    @model_validator(mode="after")
    def _check_mode(self) -> "RunConfig":
        fields = set(SystemParams.model_fields)
        for axis in self.grid:
            if axis.name not in fields:
                raise ValueError(f"grid axis '{axis.name}' is not a SystemParams field ({', '.join(sorted(fields))})")
        if self.mode == "sweep" and not self.grid:
            raise ValueError("mode 'sweep' needs at least one grid axis")
        if self.mode == "dark-curve" and any(a.name != "delta_phi" for a in self.grid):
            raise ValueError("mode 'dark-curve' only accepts a 'delta_phi' grid axis")
        if self.mode == "cavity" and self.cavity is None:
            raise ValueError("mode 'cavity' needs a 'cavity' section")
        if self.engine == "mps" and self.mode != "sweep":
            raise ValueError("engine 'mps' is only meaningful for mode 'sweep'; use mode 'mps' for a single run")
        if self.model == "dimer" and (self.mode not in ("steady", "evolve", "sweep") or self.engine != "markov"):
            raise ValueError("model 'dimer' is only available for markov steady/evolve/sweep runs")
        return self


class RunResult(BaseModel):
    mode: str
    columns: List[str]
    rows: List[List[Optional[float]]]
    warnings: List[str] = []

    def json_rows(self) -> List[List[Optional[float]]]:
        """Rows with NaN replaced by None so they serialize as JSON null."""
        return [[None if v is None or math.isnan(v) else v for v in row] for row in self.rows]


class CriterionResult(BaseModel):
    id: int
    name: str
    # None when the criterion was skipped
    passed: Optional[bool] = None
    skipped: bool = False
    detail: str = ""
    metrics: Dict[str, float] = {}


class ValidationReport(BaseModel):
    passed: bool
    criteria: List[CriterionResult]
