import math
from fractions import Fraction
from typing import List, Optional

from pydantic import BaseModel, Field, field_validator

from app.core.config import settings
from app.models.enums import CertificateMode, ExpansionCriterion
from app.models.word import WordSet
from app.schemas.certificates import BlockCertificate, SubsetCoverage, SyndromeCertificate
from app.schemas.common import Rational
from app.schemas.expander import ExpanderCert

# Largest fraction of sampled subsets allowed to miss a syndrome entirely.
CHERNOFF_FRACTION = 2 / math.e


class SyndromeParams(BaseModel):
    k: int = Field(ge=2)
    reps_per_level: int = Field(default_factory=lambda: settings.SYNDROME_REPS, ge=1)
    target_factor: int = Field(default_factory=lambda: settings.SYNDROME_TARGET_FACTOR, ge=1)
    target: Optional[Rational] = None
    seed: int = 0
    max_resamples: int = Field(default_factory=lambda: settings.MAX_RESAMPLES, ge=1)
    exhaustive_max_k: Optional[int] = None
    threads: Optional[int] = None

    @property
    def levels(self) -> int:
        """ceil(log2 k)."""
        return (self.k - 1).bit_length()

    @property
    def threshold(self) -> Fraction:
        if self.target is not None:
            return self.target
        return Fraction(1, self.target_factor * self.levels)


class AmplifyParams(BaseModel):
    delta_in: Rational
    groups: int = Field(default_factory=lambda: settings.AMPLIFY_GROUPS, ge=1)
    subset_size: Optional[int] = Field(default=None, ge=1)
    max_uncovered: float = CHERNOFF_FRACTION
    seed: int = 0
    max_resamples: int = Field(default_factory=lambda: settings.MAX_RESAMPLES, ge=1)
    exhaustive_max_k: Optional[int] = None
    threads: Optional[int] = None

    @field_validator("delta_in")
    @classmethod
    def _delta_range(cls, value: Fraction) -> Fraction:
        if not 0 < value <= 1:
            raise ValueError(f"delta_in must lie in (0, 1], got {value}")
        return value

    @property
    def d(self) -> int:
        return self.subset_size or math.ceil(1 / self.delta_in)


class ComposeParams(BaseModel):
    reps_per_level: int = Field(default_factory=lambda: settings.SYNDROME_REPS, ge=1)
    target_factor: int = Field(default_factory=lambda: settings.SYNDROME_TARGET_FACTOR, ge=1)
    groups: int = Field(default_factory=lambda: settings.AMPLIFY_GROUPS, ge=1)
    subset_size: Optional[int] = Field(default=None, ge=1)
    max_uncovered: float = CHERNOFF_FRACTION
    seed: int = 0
    max_resamples: int = Field(default_factory=lambda: settings.MAX_RESAMPLES, ge=1)
    size_budget: int = Field(default_factory=lambda: settings.COMPOSE_SIZE_BUDGET, ge=1)
    exhaustive_max_k: Optional[int] = None
    threads: Optional[int] = None


class SpielmanParams(BaseModel):
    """Desk-scale doubling chain. The asymptotic constants come from ExpanderService.spielman_params."""

    k0: int = Field(default=4, ge=1)
    steps: int = Field(default=1, ge=0)
    d: int = Field(default=4, ge=1)
    alpha: Rational = Fraction(1, 32)
    epsilon: Rational = Fraction(3, 8)
    s_max: int = Field(default=4, ge=1)
    criterion: ExpansionCriterion = ExpansionCriterion.UNIQUE
    seed: int = 0
    max_resamples: int = Field(default_factory=lambda: settings.GRAPH_MAX_RESAMPLES, ge=1)
    # attempts per radius above the floor max(1, floor(alpha n))
    radius_resamples: int = Field(default=200, ge=1)
    quotient_rank: int = Field(default=16, ge=1)
    threads: Optional[int] = None


class SyndromeCodeResult(BaseModel):
    code: WordSet
    certificate: SyndromeCertificate
    threshold: Rational
    attempts: int


class AmplifyResult(BaseModel):
    code: WordSet
    certificate: BlockCertificate
    coverage: SubsetCoverage
    subset_size: int
    groups: int
    target: float
    attempts: int


class ComposeLevel(BaseModel):
    rank: int
    lambda_size: int
    lambda_delta: Rational
    subset_size: int
    groups: int
    covered_fraction: Rational
    attempts: int


class ComposeResult(BaseModel):
    code: WordSet
    t: int
    levels: List[ComposeLevel]
    leaves: int
    size: int
    predicted_size: float
    structural_delta: Rational
    target: float
    certificate: Optional[BlockCertificate] = None


class SpielmanStepReport(BaseModel):
    step: int
    rank: int
    size: int
    max_len: int
    left_graph: ExpanderCert
    right_graph: ExpanderCert
    quotient_rank: int
    quotient_delta: Optional[Rational] = None
    flat_delta: Rational
    flat_mode: CertificateMode


class SpielmanResult(BaseModel):
    code: WordSet
    k0: int
    base_quotient_delta: Optional[Rational] = None
    steps: List[SpielmanStepReport]
