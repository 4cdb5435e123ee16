from __future__ import annotations

from typing import Annotated, Literal, Union

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

Method = Literal["ista", "fista", "newton_ista", "newton_fista"]

_METHOD_LABELS = {
    "ista": ("", "ISTA"),
    "fista": ("", "FISTA"),
    "newton_ista": ("Newton_", "ISTA"),
    "newton_fista": ("Newton_", "FISTA"),
}


class _Frozen(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class FixedStep(_Frozen):
    kind: Literal["fixed"] = "fixed"
    alpha: float | None = Field(default=None, gt=0)  # None: 1 / L from the loss hint


class BacktrackingStep(_Frozen):
    kind: Literal["backtracking"] = "backtracking"
    alpha0: float | None = Field(default=None, gt=0)
    shrink: float = Field(default=0.5, gt=0, lt=1)
    growth: float = Field(default=1.0, ge=1)


class OriginalFista(_Frozen):
    kind: Literal["original_fista"] = "original_fista"


class ChambolleDossal(_Frozen):
    kind: Literal["chambolle_dossal"] = "chambolle_dossal"
    d: float = 3.0

    @field_validator("d", mode="after")
    @classmethod
    def _check_d(cls, value: float) -> float:
        if not value > 2.0:
            raise ValueError("chambolle_dossal requires d > 2")
        return value


class LiangLuoTao(_Frozen):
    kind: Literal["liang_luo_tao"] = "liang_luo_tao"
    p: float = 1.0 / 20.0
    q: float = 0.5

    @model_validator(mode="after")
    def _check_pq(self) -> "LiangLuoTao":
        if not 0.0 < self.p <= 1.0:
            raise ValueError("liang_luo_tao requires p in (0, 1]")
        if not self.p**2 <= self.q <= (2.0 - self.p) ** 2:
            raise ValueError("liang_luo_tao requires q in [p^2, (2 - p)^2]")
        return self


StepMode = Annotated[Union[FixedStep, BacktrackingStep], Field(discriminator="kind")]
Extrapolation = Annotated[
    Union[OriginalFista, ChambolleDossal, LiangLuoTao], Field(discriminator="kind")
]


class SolverConfig(_Frozen):
    """All tunables of one solver run."""

    method: Method = "newton_fista"
    step: StepMode = Field(default_factory=FixedStep)
    extrapolation: Extrapolation = Field(default_factory=OriginalFista)
    switch_tol: float = Field(default=1e-3, gt=0)
    kkt_tol: float = Field(default=1e-8, gt=0)
    max_iters: int = Field(default=10_000, ge=1)
    safeguard: bool = True
    keep_history: bool = True

    @property
    def uses_newton(self) -> bool:
        return self.method.startswith("newton_")

    @property
    def uses_momentum(self) -> bool:
        return self.method.endswith("fista")

    @property
    def backtracking(self) -> bool:
        return isinstance(self.step, BacktrackingStep)

    @property
    def label(self) -> str:
        prefix, base = _METHOD_LABELS[self.method]
        return f"{prefix}{'BT_' if self.backtracking else ''}{base}"


__all__ = [
    "BacktrackingStep",
    "ChambolleDossal",
    "Extrapolation",
    "FixedStep",
    "LiangLuoTao",
    "Method",
    "OriginalFista",
    "SolverConfig",
    "StepMode",
]
