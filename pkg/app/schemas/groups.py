from fractions import Fraction
from typing import Any, List, Optional

from pydantic import BaseModel, Field, field_validator

from app.models.enums import GroupKind
from app.schemas.common import Rational


class GroupSpec(BaseModel):
    """
    JSON description of a finite group backend.

    zmr: {"kind": "zmr", "m": 4, "r": 2}
    abelian: {"kind": "abelian", "moduli": [2, 4]}
    perm: {"kind": "perm", "degree": 3, "generators": [[[1, 2]], [[1, 2, 3]]]}
          or {"kind": "perm", "named": "symmetric", "degree": 4}
    product: {"kind": "product", "factors": [...]}
    """

    kind: GroupKind
    m: Optional[int] = None
    r: Optional[int] = None
    moduli: Optional[List[int]] = None
    degree: Optional[int] = None
    named: Optional[str] = None
    generators: Optional[List[Any]] = None
    factors: Optional[List["GroupSpec"]] = None

    class Config:
        json_schema_extra = {
            "example": {"kind": "perm", "degree": 3, "generators": [[[1, 2]], [[1, 2, 3]]]}
        }


GroupSpec.model_rebuild()


class SubgroupLattice(BaseModel):
    group: str
    order: int
    all_subgroups: List[List[int]]
    orders: List[int]
    indexes: List[int]
    maximal: List[int]


class PMSGParams(BaseModel):
    exponent: Rational = Fraction(17, 4)
    delta: Rational
    k: int = Field(ge=1)

    @field_validator("delta")
    @classmethod
    def _delta_range(cls, value: Fraction) -> Fraction:
        if not 0 < value < Fraction(1, 3):
            raise ValueError(f"delta must lie in (0, 1/3), got {value}")
        return value


class PMSGReport(BaseModel):
    n: int
    k: int
    ratio: float
    proof_constant: float
    envelope: int
    within_envelope: bool


class SolvableCodeResult(BaseModel):
    group: str
    n: int
    elements: List[Any]
    delta: Rational
    target: Rational
    attempts: int


class PushforwardReport(BaseModel):
    source: str
    target: str
    delta_source: Rational
    delta_target: Rational
    monotone_ok: bool
    kernel_order: int
    is_frattini: bool
    equality_ok: Optional[bool] = None
    passed: bool


class TesterReport(BaseModel):
    trials: int
    rejections: int
    empirical_rate: float
    expected_rate: Rational
