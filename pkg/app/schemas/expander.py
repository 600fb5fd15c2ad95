from typing import List, Optional

from pydantic import BaseModel

from app.models.enums import CertificateMode, ExpansionCriterion
from app.schemas.common import Rational


class GraphDocument(BaseModel):
    n: int
    m: int
    d: int
    adj: List[List[int]]

    class Config:
        json_schema_extra = {"example": {"n": 2, "m": 2, "d": 2, "adj": [[1, 2], [1, 2]]}}


class ExpanderWitness(BaseModel):
    subset: List[int]
    neighbors: int
    unique_neighbors: int


class ExpanderCert(BaseModel):
    """
    Result of checking small left sets S for expansion.

    lossless: every checked S has at least (1 - epsilon) d |S| distinct neighbors.
    unique: every checked S has a right vertex met by exactly one of its edges.
    """

    alpha: Rational
    epsilon: Rational
    s_max: int
    s_checked: int
    criterion: ExpansionCriterion
    mode: CertificateMode
    subsets_checked: int
    passed: bool
    worst_case: Optional[ExpanderWitness] = None


class LosslessParams(BaseModel):
    d: int
    alpha: Rational
    n0: int
