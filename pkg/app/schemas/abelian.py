from typing import Any, List, Optional

from pydantic import BaseModel

from app.models.enums import DistanceMethod
from app.schemas.common import Rational


class MatrixDocument(BaseModel):
    """Integers travel as strings so arbitrary precision survives JSON."""

    rows: int
    cols: int
    entries: List[List[str]]

    class Config:
        json_schema_extra = {"example": {"rows": 1, "cols": 3, "entries": [["1", "1", "1"]]}}


class DistanceResult(BaseModel):
    p: int
    n: int
    k: int
    distance: int
    method: DistanceMethod
    messages_checked: int
    heuristic: bool = False


class PrimeCheck(BaseModel):
    p: int
    dimension: int
    min_distance: int
    method: DistanceMethod
    meets_alpha: bool


class AbelianCodeReport(BaseModel):
    n: int
    k: int
    m: int
    primes_checked: List[int]
    per_prime: List[PrimeCheck]
    alpha_target: Rational
    distance_target: int
    entry_bitsize: int
    rank_bound_ok: bool
    passed: bool
    failure: Optional[str] = None


class GVPoint(BaseModel):
    n: int
    k: int
    delta: Rational
    rate: Rational
    gv_rate: float
    above_gv: bool


class CoprimeReport(BaseModel):
    delta_left: Rational
    delta_right: Rational
    delta_combined: Rational
    preserved: bool
    elements: List[Any]
