"""Run configuration schema. Unknown keys are rejected everywhere."""
from __future__ import annotations

from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .dirac import DiracSpec
from .paths import PathList
from .system import (InductiveSystem, Stage, custom_system, jiang_su_preset, reindex,
                     toy_preset)


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class StageConfig(_Strict):
    from_dim: int = Field(ge=1)
    to_dim: int = Field(ge=1)
    paths: list[dict]


class SystemConfig(_Strict):
    preset: Literal["toy-doubling", "toy-tripling", "jiang-su", "custom"] = "toy-doubling"
    depth: int = Field(4, ge=0)
    reindex: bool = False
    search_bound: int = Field(1000, ge=1)
    stages: Optional[list[StageConfig]] = None

    @model_validator(mode="after")
    def _custom_needs_stages(self):
        if self.preset == "custom" and not self.stages:
            raise ValueError("preset 'custom' needs a non-empty 'stages' list")
        if self.preset != "custom" and self.stages is not None:
            raise ValueError("'stages' is only allowed with preset 'custom'")
        if self.preset == "jiang-su" and self.depth < 1:
            raise ValueError("jiang-su needs depth >= 1")
        return self

    def build_raw(self) -> InductiveSystem:
        if self.preset == "custom":
            stages = [Stage(s.from_dim, s.to_dim, PathList.from_json(s.paths))
                      for s in self.stages]
            return custom_system(stages)
        if self.preset == "jiang-su":
            return jiang_su_preset(self.depth, search_bound=self.search_bound)
        return toy_preset(self.preset.removeprefix("toy-"), self.depth)

    def build(self) -> InductiveSystem:
        raw = self.build_raw()
        return reindex(raw) if self.reindex else raw


class DiracConfig(_Strict):
    beta: float = Field(1.9, gt=1, lt=2)
    alphas: Optional[list[float]] = None

    def build(self) -> DiracSpec:
        return DiracSpec(self.beta, None if self.alphas is None else tuple(self.alphas))


class FunctionConfig(_Strict):
    level: int = Field(1, ge=0)
    seed: int = Field(0, ge=0, lt=2 ** 64)
    gamma: float = Field(1.5, gt=1, lt=2)
    count: int = Field(5, ge=0)
    resolution: int = Field(3, ge=0, le=12)
    hermitian: bool = False
    include_constant: bool = True
    include_unit: bool = True


class QcheckConfig(_Strict):
    max_dim: int = Field(32, ge=1)
    pairs: int = Field(20, ge=0)
    self_adjoint_tol: float = Field(1e-12, gt=0)
    idempotent_tol: float = Field(1e-10, gt=0)
    orthogonal_tol: float = Field(1e-10, gt=0)
    complete_tol: float = Field(1e-10, gt=0)
    adjointness_tol: float = Field(1e-12, gt=0)
    inject_fault: bool = False  # test mode: perturb Q_1 so the suite must fail


class CommutatorConfig(_Strict):
    M: int = Field(6, ge=1)


class SummabilityConfig(_Strict):
    p_grid: list[float] = Field(default_factory=lambda: [1.0, 2.0, 4.0, 8.0])
    depth: Optional[int] = Field(None, ge=1)
    cross_check_max_dim: int = Field(16, ge=1)
    cross_check_tol: float = Field(1e-8, gt=0)

    @field_validator("p_grid")
    @classmethod
    def _positive(cls, v):
        if not v or any(p <= 0 for p in v):
            raise ValueError("p_grid must be a non-empty list of positive numbers")
        return v


class OutputConfig(_Strict):
    dir: str = "aftriple-out"
    timestamp: bool = True


class RunConfig(_Strict):
    system: SystemConfig = Field(default_factory=SystemConfig)
    dirac: DiracConfig = Field(default_factory=DiracConfig)
    functions: FunctionConfig = Field(default_factory=FunctionConfig)
    qcheck: QcheckConfig = Field(default_factory=QcheckConfig)
    commutator: CommutatorConfig = Field(default_factory=CommutatorConfig)
    summability: SummabilityConfig = Field(default_factory=SummabilityConfig)
    output: OutputConfig = Field(default_factory=OutputConfig)


def resolved(cfg: RunConfig) -> dict:
    """Every field with its effective value, defaults included."""
    return cfg.model_dump(mode="json")


def json_schema() -> dict:
    return RunConfig.model_json_schema()
