from typing import Dict, List, Optional

from pydantic import BaseModel, Field

from app.models.enums import CertificateMode
from app.schemas.common import Rational
from app.schemas.words import LengthStats


class SyndromeCertificate(BaseModel):
    """
    One-occurrence certificate: for every checked syndrome C, the number of
    words with exactly one letter from C. Only the minimizer and the minimum
    per syndrome size are kept.
    """

    k: int
    n: int
    mode: CertificateMode
    certifying: bool
    delta_lower: Rational
    worst_syndrome: List[int]
    worst_count: int
    syndromes_checked: int
    min_count_by_size: Dict[int, int] = Field(default_factory=dict)


class MatchingCertificate(BaseModel):
    value: Rational
    base_size: int
    mode: CertificateMode
    pairs_checked: int
    base_is_basis: bool
    witness: str


class BlockCertificate(BaseModel):
    """
    Certificate for unions of subset closures: a block whose base holds a word
    certified outside Sigma_C keeps at least half of its closure outside.
    """

    k: int
    n: int
    blocks: int
    mode: CertificateMode
    certifying: bool
    delta_lower: Rational
    worst_syndrome: List[int]
    good_block_fraction: Rational
    syndromes_checked: int


class CoverageReport(BaseModel):
    k: int
    min_fraction: Rational
    weakest_generator: int
    avg_reduced_length: Rational
    delta_lower: Rational
    length_bound_holds: bool


class QuotientDelta(BaseModel):
    group: str
    delta: Rational


class GVComparison(BaseModel):
    rate: Rational
    delta: Rational
    gv_rate: Optional[float] = None
    above_gv: Optional[bool] = None


class DetectionReport(BaseModel):
    label: str
    n: int
    k: int
    rate: Rational
    length: LengthStats
    syndrome: SyndromeCertificate
    matching: Optional[MatchingCertificate] = None
    blocks: Optional[BlockCertificate] = None
    best_certified: Rational
    f2_quotient_delta: Optional[Rational] = None
    exact: List[QuotientDelta] = Field(default_factory=list)
    coverage: CoverageReport
    gv: GVComparison


class SubsetCoverage(BaseModel):
    """For the worst syndrome C, how many chosen subsets still hold a word met by C exactly once."""

    k: int
    subsets: int
    min_covered: int
    covered_fraction: Rational
    worst_syndrome: List[int]
    mode: CertificateMode
    certifying: bool
    syndromes_checked: int
