"""
Scenario-file sections as pydantic models.

A scenario file is TOML with the sections [params], [bottom], [grid],
[evolve] and [scenario]; every section is optional and falls back to the
defaults below.
"""

from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

try:
    import tomllib
except ImportError:  # Python < 3.11
    import tomli as tomllib

from wavelab.core.model import AbcdParams, BottomSpec, params_from_theta
from wavelab.core.spectral import GridSpec
from wavelab.dynamics.evolve import EvolveConfig
from wavelab.errors import ConfigurationError, WavelabError

ScenarioKind = Literal[
    "soliton-validate",
    "linear-validate",
    "identity-check",
    "approx-sweep",
    "interaction",
    "exit-stability",
]


class ParamsSection(BaseModel):
    model_config = ConfigDict(populate_by_name=True, extra="forbid")

    a: float = Field(default=-1.0, lt=0, description="Dispersion constant of the eta equation (b = 1)")
    c: float = Field(default=-1.0, lt=0, description="Dispersion constant of the u equation (d = 1)")
    a1: float = Field(default=1.0 / 3.0, description="Bottom coupling in the eta equation")
    c1: float = Field(default=1.0, description="Bottom coupling in the u equation")
    theta: Optional[float] = Field(default=None, ge=0, le=1, description="Depth parameter; overrides a, c, a1, c1")
    lam: Optional[float] = Field(default=None, alias="lambda")
    mu: Optional[float] = None

    @model_validator(mode="after")
    def _check_theta(self):
        if self.theta is None:
            return self
        if self.lam is None or self.mu is None:
            raise ValueError("theta requires both lambda and mu")
        raw = params_from_theta(self.theta, self.lam, self.mu)
        if raw.b <= 0 or abs(raw.b - raw.d) > 1e-12:
            raise ValueError(f"theta path needs b = d > 0 for rescaling, got b={raw.b}, d={raw.d}")
        if raw.a >= 0 or raw.c >= 0:
            raise ValueError(f"theta path gives a={raw.a}, c={raw.c}; both must be negative")
        return self

    def to_params(self) -> AbcdParams:
        if self.theta is None:
            return AbcdParams(a=self.a, c=self.c, a1=self.a1, c1=self.c1)
        raw = params_from_theta(self.theta, self.lam, self.mu)
        return AbcdParams(a=raw.a / raw.b, c=raw.c / raw.d, a1=raw.a1, c1=raw.c1)


class BottomSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    epsilon: float = Field(default=0.1, ge=1e-3, le=0.5, description="Bottom amplitude and slowness")
    amplitude: float = 1.0
    kind: Literal["gaussian", "sech2-product", "zero"] = "gaussian"
    k0: float = Field(default=1.0, gt=0)
    l0: float = Field(default=1.0, gt=0)
    s0: float = 0.0
    y0: float = 0.0
    delta0: float = Field(default=0.1, gt=0)

    def to_spec(self, epsilon: Optional[float] = None) -> BottomSpec:
        data = self.model_dump()
        if epsilon is not None:
            data["epsilon"] = epsilon
        return BottomSpec(**data)


class GridSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    n: int = Field(default=1024, ge=16, description="Grid points (power of two)")
    half_length: float = Field(default=60.0, gt=0, description="Half-width L of the window")

    @field_validator("n")
    @classmethod
    def _power_of_two(cls, value: int) -> int:
        if value & (value - 1):
            raise ValueError(f"n must be a power of two, got {value}")
        return value

    def to_grid(self) -> GridSpec:
        return GridSpec(self.n, self.half_length)


class EvolveSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    dt: Optional[float] = Field(default=None, gt=0)
    t_start: Optional[float] = None
    t_end: Optional[float] = None
    dealias: bool = True
    output_stride: Optional[int] = Field(default=None, ge=1)
    stepper: Literal["rk4", "splitstep"] = "rk4"
    comoving: bool = False
    recenter_margin: float = Field(default=30.0, gt=0)

    def to_config(self, t_start: float, t_end: float) -> EvolveConfig:
        return EvolveConfig(
            t_start=self.t_start if self.t_start is not None else t_start,
            t_end=self.t_end if self.t_end is not None else t_end,
            dt=self.dt,
            dealias=self.dealias,
            output_stride=self.output_stride,
            stepper=self.stepper,
            comoving=self.comoving,
            recenter_margin=self.recenter_margin,
        )


class ScenarioSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kind: ScenarioKind = "soliton-validate"
    epsilons: List[float] = Field(default_factory=lambda: [0.2, 0.1, 0.05])
    omega0: float = Field(default=0.5, gt=0, lt=1, description="Incoming solitary-wave speed")
    alpha: float = Field(default=-1.0, gt=-3, description="Chen amplitude for validation runs")
    branch: Literal["plus", "minus"] = "plus"
    seed_paths: List[str] = Field(default_factory=list)
    output_dir: Optional[str] = None
    t: float = 0.0
    count: int = Field(default=6, ge=1)
    tracker_mode: Literal["shift-only", "shift-speed"] = "shift-only"
    weighted_pairing: bool = False
    perturbation: float = Field(default=1e-3, ge=0)
    seed: int = 0

    @field_validator("epsilons")
    @classmethod
    def _sorted_epsilons(cls, values: List[float]) -> List[float]:
        for eps in values:
            if not 1e-3 <= eps <= 0.5:
                raise ValueError(f"epsilon {eps} outside [0.001, 0.5]")
        return sorted(values, reverse=True)

    @field_validator("seed_paths")
    @classmethod
    def _seeds_exist(cls, values: List[str]) -> List[str]:
        missing = [p for p in values if not Path(p).exists()]
        if missing:
            raise ValueError(f"seed files not found: {missing}")
        return values


class ScenarioConfig(BaseModel):
    """Complete scenario: model, bottom, grid, time stepping and the experiment to run."""
    model_config = ConfigDict(extra="forbid")

    params: ParamsSection = Field(default_factory=ParamsSection)
    bottom: BottomSection = Field(default_factory=BottomSection)
    grid: GridSection = Field(default_factory=GridSection)
    evolve: EvolveSection = Field(default_factory=EvolveSection)
    scenario: ScenarioSection = Field(default_factory=ScenarioSection)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ScenarioConfig":
        """
        Raises:
            ConfigurationError: naming every offending key
        """
        try:
            return cls.model_validate(data)
        except ValidationError as exc:
            issues = [
                f"{'.'.join(str(part) for part in err['loc'])}: {err['msg']}"
                for err in exc.errors()
            ]
            raise ConfigurationError("invalid scenario: " + "; ".join(issues)) from exc
        except WavelabError as exc:
            raise ConfigurationError(f"invalid scenario: {exc}") from exc

    @classmethod
    def from_toml(cls, path: Union[str, Path]) -> "ScenarioConfig":
        path = Path(path)
        try:
            with open(path, "rb") as fh:
                data = tomllib.load(fh)
        except FileNotFoundError as exc:
            raise ConfigurationError(f"scenario file not found: {path}") from exc
        except tomllib.TOMLDecodeError as exc:
            raise ConfigurationError(f"{path}: not valid TOML ({exc})") from exc
        return cls.from_dict(data)
