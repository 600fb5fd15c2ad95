import logging
import math
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from app.core.config import settings
from app.core.exceptions import BudgetExceededError, CertificationError, InvalidInputError
from app.core.random import substream
from app.models.graph import BipartiteGraph
from app.models.word import ClosureBlock, Word, WordSet
from app.schemas.certificates import SubsetCoverage
from app.schemas.expander import ExpanderCert
from app.schemas.constructions import (
    CHERNOFF_FRACTION,
    AmplifyParams,
    AmplifyResult,
    ComposeLevel,
    ComposeParams,
    ComposeResult,
    SpielmanParams,
    SpielmanResult,
    SpielmanStepReport,
    SyndromeCodeResult,
    SyndromeParams,
)
from app.services.certify_service import certify_service
from app.services.expander_service import expander_service
from app.services.group_service import group_service
from app.services.word_service import word_service

logger = logging.getLogger(__name__)

# (the level's syndrome code, chosen position subsets, level report)
_Selection = Tuple[WordSet, List[Tuple[int, ...]], ComposeLevel]


class ConstructionService:
    def __init__(self):
        self.hadamard_max_k = settings.HADAMARD_MAX_K
        self.size_budget = settings.COMPOSE_SIZE_BUDGET

    # subset closures

    def _closure_words(self, base: Sequence[Word]) -> List[Word]:
        m = len(base)
        if m > self.hadamard_max_k:
            raise BudgetExceededError(
                f"closure over {m} words has 2^{m} elements", budget=self.hadamard_max_k, required=m
            )
        return word_service.closure_products(base)

    def _closure_union(self, rank: int, bases: Sequence[Sequence[Word]], label: str) -> WordSet:
        words: List[Word] = []
        blocks = []
        for base in bases:
            base = tuple(tuple(w) for w in base)
            blocks.append(ClosureBlock(offset=len(words), base=base))
            words.extend(self._closure_words(base))
        return WordSet(rank=rank, words=tuple(words), label=label, closure=tuple(blocks))

    def hadamard_closure(self, Y: Sequence[Sequence[int]], rank: int, label: Optional[str] = None) -> WordSet:
        """All ordered subset products of Y in binary-counting order: bit j of the position selects Y[j]."""
        if not Y:
            raise InvalidInputError("closure needs at least one word")
        return self._closure_union(rank, [Y], label or f"closure({len(Y)} words)")

    def hadamard_code(self, k: int) -> WordSet:
        """x_S for every S in {1..k}, letters in increasing index order."""
        if k < 1:
            raise InvalidInputError(f"rank must be positive, got {k}")
        if k > self.hadamard_max_k:
            raise BudgetExceededError(f"hadamard code of rank {k} has 2^{k} words", budget=self.hadamard_max_k, required=k)
        return self.hadamard_closure(WordSet.basis(k).words, k, label=f"hadamard(k={k})")

    # random syndrome sampling

    def _syndrome_words(self, params: SyndromeParams, rng: np.random.Generator) -> List[Word]:
        k = params.k
        words: List[Word] = []
        for level in range(1, params.levels + 1):
            keep = rng.random((params.reps_per_level * k, k)) < 2.0 ** -level
            words.extend(tuple(int(i) + 1 for i in np.flatnonzero(row)) for row in keep)
        return words

    def random_syndrome_code(self, params: SyndromeParams) -> SyndromeCodeResult:
        """
        c k words per level l = 1..ceil(log2 k), each generator kept with
        probability 2^-l, resampled until the one-occurrence certificate reaches
        the threshold.
        """
        threshold = params.threshold
        best: Optional[SyndromeCodeResult] = None
        for attempt in range(1, params.max_resamples + 1):
            rng = substream(params.seed, f"constructions.syndrome.k{params.k}.attempt{attempt}")
            code = WordSet(
                rank=params.k,
                words=tuple(self._syndrome_words(params, rng)),
                label=f"syndrome(k={params.k}, c={params.reps_per_level})",
            )
            cert = certify_service.certified_delta(
                code, exhaustive_max_k=params.exhaustive_max_k, seed=params.seed, threads=params.threads
            )
            result = SyndromeCodeResult(code=code, certificate=cert, threshold=threshold, attempts=attempt)
            if best is None or cert.delta_lower > best.certificate.delta_lower:
                best = result
            if cert.delta_lower >= threshold:
                logger.info(f"Syndrome code k={params.k}: n={len(code)}, delta >= {cert.delta_lower} after {attempt} attempt(s)")
                return result
            logger.info(f"Attempt {attempt}: certificate {cert.delta_lower} below {threshold}, resampling")
        raise CertificationError(
            f"no syndrome code for k={params.k} reached {threshold} in {params.max_resamples} attempts",
            best_attempt=best.code,
            best_value=best.certificate.delta_lower,
        )

    # amplification

    def _select_subsets(
        self,
        A: WordSet,
        count: int,
        d: int,
        max_uncovered: float,
        seed: int,
        label: str,
        max_resamples: int,
        exhaustive_max_k: Optional[int],
        threads: Optional[int] = None,
    ) -> Tuple[List[Tuple[int, ...]], SubsetCoverage, int]:
        """Sample `count` d-subsets of positions of A until no syndrome misses more than max_uncovered of them."""
        if d > len(A):
            raise InvalidInputError(f"cannot draw {d} distinct words from {len(A)}")
        best = None
        for attempt in range(1, max_resamples + 1):
            rng = substream(seed, f"{label}.attempt{attempt}")
            subsets = [tuple(sorted(int(i) for i in rng.choice(len(A), size=d, replace=False))) for _ in range(count)]
            coverage = certify_service.subset_coverage(A, subsets, exhaustive_max_k=exhaustive_max_k, seed=seed, threads=threads)
            if best is None or coverage.min_covered > best[1].min_covered:
                best = (subsets, coverage)
            if count - coverage.min_covered <= max_uncovered * count:
                return subsets, coverage, attempt
            logger.info(
                f"Attempt {attempt}: syndrome {coverage.worst_syndrome} misses "
                f"{count - coverage.min_covered} of {count} subsets, resampling"
            )
        raise CertificationError(
            f"no subset family for {label} met the coverage bound in {max_resamples} attempts",
            best_attempt=best[0],
            best_value=best[1].covered_fraction,
        )

    def amplify(self, A: WordSet, params: AmplifyParams) -> AmplifyResult:
        """
        Draw c_amp k subsets of A of size d = ceil(1/delta) and replace each by
        its subset closure. Every syndrome is met exactly once inside at least
        (1 - 2/e) of the subsets, so half of those closures escape.
        """
        cert = certify_service.certified_delta(A, exhaustive_max_k=params.exhaustive_max_k, seed=params.seed, threads=params.threads)
        if cert.certifying and cert.delta_lower < params.delta_in:
            raise InvalidInputError(f"input certificate {cert.delta_lower} is below delta_in {params.delta_in}")
        d = params.d
        count = params.groups * A.rank
        if count * (1 << d) > self.size_budget:
            raise BudgetExceededError(
                f"amplified set would hold {count} x 2^{d} words", budget=self.size_budget, required=count * (1 << d)
            )
        subsets, coverage, attempts = self._select_subsets(
            A,
            count,
            d,
            params.max_uncovered,
            params.seed,
            "constructions.amplify",
            params.max_resamples,
            params.exhaustive_max_k,
            params.threads,
        )
        code = self._closure_union(
            A.rank,
            [tuple(A.words[i] for i in s) for s in subsets],
            label=f"amplify({A.label}, d={d}, c={params.groups})",
        )
        block_cert = certify_service.closure_certificate(
            code, exhaustive_max_k=params.exhaustive_max_k, seed=params.seed, threads=params.threads
        )
        logger.info(f"Amplified {A.label or 'word set'} to {len(code)} words, certified {block_cert.delta_lower}")
        return AmplifyResult(
            code=code,
            certificate=block_cert,
            coverage=coverage,
            subset_size=d,
            groups=count,
            target=0.5 * (1 - params.max_uncovered),
            attempts=attempts,
        )

    # iterative composition

    def _selection(self, s: int, params: ComposeParams, cache: Dict[int, _Selection]) -> _Selection:
        """The size-s set word map: its syndrome code over s positions and the chosen subsets of it."""
        if s in cache:
            return cache[s]
        count = params.groups * s
        if s == 1:
            code = WordSet.basis(1)
            subsets = [(0,)] * count
            level = ComposeLevel(
                rank=1, lambda_size=1, lambda_delta=Fraction(1), subset_size=1, groups=count, covered_fraction=Fraction(1), attempts=1
            )
        else:
            syndrome = self.random_syndrome_code(
                SyndromeParams(
                    k=s,
                    reps_per_level=params.reps_per_level,
                    target_factor=params.target_factor,
                    seed=params.seed,
                    max_resamples=params.max_resamples,
                    exhaustive_max_k=params.exhaustive_max_k,
                    threads=params.threads,
                )
            )
            code = syndrome.code
            delta = syndrome.certificate.delta_lower
            d = min(params.subset_size or math.ceil(1 / delta), len(code))
            subsets, coverage, attempts = self._select_subsets(
                code,
                count,
                d,
                params.max_uncovered,
                params.seed,
                f"constructions.compose.s{s}",
                params.max_resamples,
                params.exhaustive_max_k,
                params.threads,
            )
            level = ComposeLevel(
                rank=s,
                lambda_size=len(code),
                lambda_delta=delta,
                subset_size=d,
                groups=count,
                covered_fraction=coverage.covered_fraction,
                attempts=attempts,
            )
        cache[s] = (code, subsets, level)
        return cache[s]

    def predicted_compose_size(self, k: int, t: int, groups: int, factor: int) -> float:
        """Product formula for t levels: subsets per level times 2^(final subset size), sizes s' = factor log2 s."""
        s = float(k)
        count = 1.0
        for _ in range(t):
            count *= groups * s
            s = factor * math.log2(max(s, 2.0))
        return count * 2.0 ** s

    def iterative_compose(self, k: int, t: int, params: ComposeParams) -> ComposeResult:
        """
        t rounds of "syndrome code, then subsets of it" starting from the basis
        of F_k, then subset closures on the final tuples. The same size-s map is
        reused for every tuple of size s.
        """
        if t < 1:
            raise InvalidInputError(f"t must be at least 1, got {t}")
        if k < 2:
            raise InvalidInputError(f"rank must be at least 2, got {k}")
        cache: Dict[int, _Selection] = {}

        levels: List[ComposeLevel] = []
        s, leaves = k, 1
        for _ in range(t):
            _, subsets, level = self._selection(s, params, cache)
            levels.append(level)
            leaves *= len(subsets)
            s = level.subset_size
        size = leaves << s
        if size > params.size_budget:
            raise BudgetExceededError(f"composition would hold {size} words", budget=params.size_budget, required=size)

        tuples: List[Tuple[Word, ...]] = [WordSet.basis(k).words]
        for _ in range(t):
            expanded = []
            for g in tuples:
                code, subsets, _ = self._selection(len(g), params, cache)
                images = [word_service.substitute(w, g) for w in code.words]
                expanded.extend(tuple(images[i] for i in sub) for sub in subsets)
            tuples = expanded
        code = self._closure_union(k, tuples, label=f"compose(k={k}, t={t})")

        structural = Fraction(1, 2)
        for level in levels:
            structural *= level.covered_fraction
        certificate = certify_service.closure_certificate(
            code, exhaustive_max_k=params.exhaustive_max_k, seed=params.seed, threads=params.threads
        )
        logger.info(f"Composition k={k} t={t}: {len(code)} words, structural bound {structural}")
        return ComposeResult(
            code=code,
            t=t,
            levels=levels,
            leaves=leaves,
            size=len(code),
            predicted_size=self.predicted_compose_size(k, t, params.groups, params.target_factor),
            structural_delta=structural,
            target=0.5 * (1 - CHERNOFF_FRACTION) ** t,
            certificate=certificate,
        )

    # doubling chain

    def spielman_step(self, A: WordSet, G2k: BipartiteGraph, G4k: BipartiteGraph) -> WordSet:
        """
        From A of size 4k over F_k to a set of size 8k over F_2k: the basis B,
        then E = A(D) with D = upsilon(G2k, B), then F = upsilon(G4k, E).
        """
        k = A.rank
        if len(A) != 4 * k:
            raise InvalidInputError(f"step input must hold 4k = {4 * k} words, got {len(A)}")
        if (G2k.n, G2k.m) != (2 * k, k):
            raise InvalidInputError(f"first graph must be {2 * k}x{k}, got {G2k.n}x{G2k.m}")
        if (G4k.n, G4k.m) != (4 * k, 2 * k):
            raise InvalidInputError(f"second graph must be {4 * k}x{2 * k}, got {G4k.n}x{G4k.m}")
        B = WordSet.basis(2 * k)
        D = expander_service.upsilon(G2k, B)
        E = word_service.set_word_map(A, D.words, rank=2 * k)
        F = expander_service.upsilon(G4k, E, reduced=True)
        return WordSet(rank=2 * k, words=B.words + E.words + F.words, label=f"spielman(k={2 * k})")

    def _chain_graph(self, n: int, m: int, params: SpielmanParams, label: str) -> Tuple[BipartiteGraph, ExpanderCert]:
        """
        Verified graph for one side of a doubling step, checked up to the largest
        radius in [max(1, floor(alpha n)), s_max] that a random sample reaches.
        """
        floor = max(1, min(math.floor(params.alpha * n), params.s_max))
        for radius in range(params.s_max, floor, -1):
            try:
                return expander_service.sample_verified(
                    n,
                    m,
                    params.d,
                    Fraction(radius, n),
                    params.epsilon,
                    params.s_max,
                    seed=params.seed,
                    criterion=params.criterion,
                    max_resamples=params.radius_resamples,
                    label=f"{label}.radius{radius}",
                )
            except CertificationError:
                logger.info(f"No {n}x{m} graph verified at radius {radius}; trying {radius - 1}")
        return expander_service.sample_verified(
            n,
            m,
            params.d,
            Fraction(floor, n),
            params.epsilon,
            params.s_max,
            seed=params.seed,
            criterion=params.criterion,
            max_resamples=params.max_resamples,
            label=label,
        )

    def spielman_chain(self, params: SpielmanParams) -> SpielmanResult:
        """Start from four copies of the basis of F_k0 and double the rank `steps` times."""
        k = params.k0
        A = WordSet(rank=k, words=WordSet.basis(k).words * 4, label=f"basis x4 (k={k})")
        base_quotient = group_service.exact_delta_vector_space(A, 2, truncate=min(k, params.quotient_rank))

        reports: List[SpielmanStepReport] = []
        for step in range(1, params.steps + 1):
            left, left_cert = self._chain_graph(2 * k, k, params, f"constructions.spielman.step{step}.left")
            right, right_cert = self._chain_graph(4 * k, 2 * k, params, f"constructions.spielman.step{step}.right")
            A = self.spielman_step(A, left, right)
            k = A.rank

            quotient_rank = min(k, params.quotient_rank)
            try:
                quotient = group_service.exact_delta_vector_space(A, 2, truncate=quotient_rank)
            except BudgetExceededError as e:
                logger.warning(f"Step {step}: quotient evidence skipped: {str(e)}")
                quotient = None
            flat = certify_service.certified_delta(A, seed=params.seed, threads=params.threads)
            reports.append(
                SpielmanStepReport(
                    step=step,
                    rank=k,
                    size=len(A),
                    max_len=word_service.length_stats(A).max_len,
                    left_graph=left_cert,
                    right_graph=right_cert,
                    quotient_rank=quotient_rank,
                    quotient_delta=quotient,
                    flat_delta=flat.delta_lower,
                    flat_mode=flat.mode,
                )
            )
            logger.info(f"Doubling step {step}: rank {k}, {len(A)} words, F_2 quotient delta {quotient}")
        return SpielmanResult(code=A, k0=params.k0, base_quotient_delta=base_quotient, steps=reports)


construction_service = ConstructionService()
