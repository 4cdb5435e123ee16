from __future__ import annotations

from typing import Annotated, Any, List, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

SUPPORTED_SCHEMA_VERSIONS = {"1.0"}

RegKind = Literal["l1", "linf", "slope", "oscar", "tv1d", "nonneg_l1", "zero"]


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", populate_by_name=True)


class LeastSquaresSpec(_Strict):
    kind: Literal["least_squares"] = "least_squares"
    A: Optional[List[List[float]]] = None
    b: Optional[List[float]] = None
    A_file: Optional[str] = None  # raw row-major float64
    b_file: Optional[str] = None
    shape: Optional[List[int]] = None

    @model_validator(mode="after")
    def _check_sources(self) -> "LeastSquaresSpec":
        if (self.A is None) == (self.A_file is None):
            raise ValueError("exactly one of A or A_file is required")
        if (self.b is None) == (self.b_file is None):
            raise ValueError("exactly one of b or b_file is required")
        if self.A_file is not None and (self.shape is None or len(self.shape) != 2):
            raise ValueError("A_file requires shape [m, n]")
        if self.A is not None and len({len(row) for row in self.A}) > 1:
            raise ValueError("A rows must have equal length")
        return self


class PoissonKLSpec(_Strict):
    kind: Literal["poisson_kl"] = "poisson_kl"
    n_side: int = Field(gt=0)
    q: int = Field(gt=0)
    fwhm: float = Field(ge=0)
    background: Union[float, List[float]] = 1.0
    y: List[float]


LossSpec = Annotated[Union[LeastSquaresSpec, PoissonKLSpec], Field(discriminator="kind")]


class RegSpec(_Strict):
    kind: RegKind
    lambda_: float = Field(default=1.0, gt=0, alias="lambda")
    weights: Optional[List[float]] = None
    w1: Optional[float] = Field(default=None, ge=0)
    w2: Optional[float] = Field(default=None, ge=0)

    @model_validator(mode="after")
    def _check_params(self) -> "RegSpec":
        if self.kind == "slope" and not self.weights:
            raise ValueError("slope regularizer requires weights")
        if self.kind == "oscar" and (self.w1 is None or self.w2 is None):
            raise ValueError("oscar regularizer requires w1 and w2")
        return self


class ProblemSpec(_Strict):
    schema_version: str = "1.0"
    name: str = "problem"
    n: int = Field(gt=0)
    loss: LossSpec
    reg: RegSpec

    @field_validator("schema_version", mode="after")
    @classmethod
    def validate_schema_version(cls, v: str) -> str:
        if v not in SUPPORTED_SCHEMA_VERSIONS:
            raise ValueError(f"Unsupported schema_version: {v}")
        return v


def parse_problem(payload: dict[str, Any]) -> ProblemSpec:
    """Validate a problem document; raises pydantic.ValidationError."""
    return ProblemSpec.model_validate(payload)


__all__ = [
    "LeastSquaresSpec",
    "LossSpec",
    "PoissonKLSpec",
    "ProblemSpec",
    "RegKind",
    "RegSpec",
    "SUPPORTED_SCHEMA_VERSIONS",
    "parse_problem",
]
