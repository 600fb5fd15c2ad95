import logging
from concurrent.futures import ThreadPoolExecutor
from fractions import Fraction
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from app.core.bitops import (
    UINT64_MAX_BITS,
    as_mask_array,
    bit_count64,
    from_mask,
    occurrence_masks,
    single_bit,
    to_mask,
)
from app.core.config import settings
from app.core.exceptions import CertificationError, InvalidInputError
from app.core.random import substream
from app.models.enums import CertificateMode
from app.models.group import FiniteGroupBackend
from app.models.word import WordSet
from app.schemas.certificates import (
    BlockCertificate,
    CoverageReport,
    DetectionReport,
    GVComparison,
    MatchingCertificate,
    QuotientDelta,
    SubsetCoverage,
    SyndromeCertificate,
)
from app.services.abelian_service import abelian_service
from app.services.group_service import group_service
from app.services.word_service import word_service

logger = logging.getLogger(__name__)

# Upper bound on syndrome x word cells evaluated per kernel call.
_CELLS_PER_BLOCK = 1 << 22

# (min value, syndrome at min, syndromes checked, min value per syndrome size)
_BlockSummary = Tuple[int, int, int, Dict[int, int]]


class CertifyService:
    def __init__(self):
        self.exhaustive_max_k = settings.CERTIFY_EXHAUSTIVE_MAX_K
        self.sampled_trials = settings.CERTIFY_SAMPLED_TRIALS
        self.symbolic_max_k = settings.SYMBOLIC_MATCHING_MAX_K
        self.sampled_pairs = settings.MATCHING_SAMPLED_PAIRS
        self.threads = settings.THREADS

    # one-occurrence rule

    def one_occurrence_count(self, A: WordSet, C: Iterable[int]) -> int:
        """Words of A whose stored letters hit C exactly once (signs ignored, repeats counted)."""
        c_mask = to_mask(C)
        if c_mask == 0:
            raise InvalidInputError("syndrome must be nonempty")
        count = 0
        for word in A.words:
            once, multi = occurrence_masks(word)
            hit = once & c_mask
            if multi & c_mask == 0 and hit and hit & (hit - 1) == 0:
                count += 1
        return count

    def _profile(self, words: Sequence[Sequence[int]], k: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Distinct (once, multi) occurrence profiles with multiplicities."""
        counts: Dict[Tuple[int, int], int] = {}
        for word in words:
            key = occurrence_masks(word)
            counts[key] = counts.get(key, 0) + 1
        keys = sorted(counts)
        once = as_mask_array([a for a, _ in keys], k)
        multi = as_mask_array([b for _, b in keys], k)
        weights = np.array([counts[key] for key in keys], dtype=np.int64)
        return once, multi, weights

    @staticmethod
    def _hits(once: np.ndarray, multi: np.ndarray, syndromes: np.ndarray) -> np.ndarray:
        """Boolean (syndromes x profiles): the profile meets the syndrome exactly once."""
        cs = syndromes[:, None]
        return ((multi[None, :] & cs) == 0) & single_bit(once[None, :] & cs)

    def _syndrome_plan(self, k: int, width: int, exhaustive: bool, trials: int, seed: int, label: str) -> List[np.ndarray]:
        block = max(1, min(1 << 16, _CELLS_PER_BLOCK // max(1, width)))
        if exhaustive:
            total = (1 << k) - 1
            return [
                np.arange(start, min(start + block, total + 1), dtype=np.uint64)
                for start in range(1, total + 1, block)
            ]
        rng = substream(seed, f"certify.{label}.syndromes")
        drawn = []
        for _ in range(trials):
            size = int(rng.integers(1, k + 1))
            chosen = rng.choice(k, size=size, replace=False)
            drawn.append(to_mask(int(i) + 1 for i in chosen))
        return [as_mask_array(drawn[i:i + block], k) for i in range(0, len(drawn), block)]

    def _scan(
        self,
        plan: List[np.ndarray],
        evaluate: Callable[[np.ndarray], np.ndarray],
        threads: Optional[int],
    ) -> Tuple[int, int, int, Dict[int, int]]:
        def summarize(syndromes: np.ndarray) -> _BlockSummary:
            values = evaluate(syndromes)
            position = int(np.argmin(values))
            if syndromes.dtype == np.uint64:
                sizes = bit_count64(syndromes)
            else:
                sizes = np.array([int(c).bit_count() for c in syndromes], dtype=np.int64)
            by_size = {int(s): int(values[sizes == s].min()) for s in np.unique(sizes)}
            return int(values[position]), int(syndromes[position]), len(syndromes), by_size

        threads = threads or self.threads
        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                summaries = list(pool.map(summarize, plan))
        else:
            summaries = [summarize(block) for block in plan]

        best_value, best_syndrome, checked, by_size = None, 0, 0, {}
        for value, syndrome, count, sizes in summaries:
            checked += count
            if best_value is None or value < best_value:
                best_value, best_syndrome = value, syndrome
            for s, v in sizes.items():
                by_size[s] = min(v, by_size.get(s, v))
        return best_value, best_syndrome, checked, dict(sorted(by_size.items()))

    def _mode(self, k: int, exhaustive_max_k: Optional[int]) -> bool:
        limit = self.exhaustive_max_k if exhaustive_max_k is None else exhaustive_max_k
        return k <= min(limit, UINT64_MAX_BITS)

    def certified_delta(
        self,
        A: WordSet,
        exhaustive_max_k: Optional[int] = None,
        trials: Optional[int] = None,
        seed: int = 0,
        threads: Optional[int] = None,
    ) -> SyndromeCertificate:
        """
        Minimum over nonempty syndromes C of one_occurrence_count(A, C) / |A|.

        Exhaustive over all 2^k - 1 syndromes up to the cap; above it random
        syndromes of every size are drawn and the result is evidence only.
        """
        k = A.rank
        exhaustive = self._mode(k, exhaustive_max_k)
        once, multi, weights = self._profile(A.words, k)
        plan = self._syndrome_plan(k, len(weights), exhaustive, trials or self.sampled_trials, seed, "flat")

        def evaluate(syndromes: np.ndarray) -> np.ndarray:
            return self._hits(once, multi, syndromes).astype(np.int64) @ weights

        best, worst, checked, by_size = self._scan(plan, evaluate, threads)
        if not exhaustive:
            logger.warning(f"rank {k} above exhaustive cap: {checked} sampled syndromes, result is evidence only")
        return SyndromeCertificate(
            k=k,
            n=len(A),
            mode=CertificateMode.EXHAUSTIVE if exhaustive else CertificateMode.SAMPLED,
            certifying=exhaustive,
            delta_lower=Fraction(best, len(A)),
            worst_syndrome=from_mask(worst),
            worst_count=best,
            syndromes_checked=checked,
            min_count_by_size=by_size,
        )

    def verify_closure(self, A: WordSet) -> None:
        """Raise CertificationError unless every tagged block holds the subset products of its base."""
        for block in A.closure or ():
            stored = A.words[block.offset : block.offset + block.size]
            for s, (word, expected) in enumerate(zip(stored, word_service.closure_products(block.base))):
                if tuple(word) != expected:
                    raise CertificationError(
                        f"word {block.offset + s} is not the closure product of its subset in the block at offset {block.offset}"
                    )

    def closure_certificate(
        self,
        A: WordSet,
        exhaustive_max_k: Optional[int] = None,
        trials: Optional[int] = None,
        seed: int = 0,
        threads: Optional[int] = None,
    ) -> BlockCertificate:
        """
        Lower bound for a union of subset closures.

        For a syndrome C, a block is good when one of its base words meets C
        exactly once; its closure then has at least half of its words outside
        every subgroup with syndrome C. Words outside all blocks count through
        the flat one-occurrence rule.
        """
        if not A.closure:
            raise InvalidInputError(f"{A.label or 'word set'} carries no closure blocks")
        self.verify_closure(A)
        k = A.rank
        exhaustive = self._mode(k, exhaustive_max_k)

        blocks = [b for b in A.closure if b.base]
        covered = set()
        for b in A.closure:
            covered.update(range(b.offset, b.offset + b.size))
        base_words = [w for b in blocks for w in b.base]
        starts = np.cumsum([0] + [len(b.base) for b in blocks[:-1]]).astype(np.int64)
        sizes = np.array([b.size for b in blocks], dtype=np.int64)
        base_masks = [occurrence_masks(w) for w in base_words]
        base_once = as_mask_array([a for a, _ in base_masks], k)
        base_multi = as_mask_array([b for _, b in base_masks], k)
        free_words = [w for i, w in enumerate(A.words) if i not in covered]
        free_once, free_multi, free_weights = self._profile(free_words, k) if free_words else (None, None, None)

        # values are doubled so every block contributes an integer
        def evaluate(syndromes: np.ndarray) -> np.ndarray:
            total = np.zeros(len(syndromes), dtype=np.int64)
            if blocks:
                hits = self._hits(base_once, base_multi, syndromes)
                good = np.logical_or.reduceat(hits, starts, axis=1)
                total += good.astype(np.int64) @ sizes
            if free_words:
                total += 2 * (self._hits(free_once, free_multi, syndromes).astype(np.int64) @ free_weights)
            return total

        width = len(base_words) + (len(free_weights) if free_words else 0)
        plan = self._syndrome_plan(k, width, exhaustive, trials or self.sampled_trials, seed, "closure")
        best, worst, checked, _ = self._scan(plan, evaluate, threads)

        good_fraction = Fraction(0)
        if blocks:
            worst_arr = as_mask_array([worst], k)
            good = np.logical_or.reduceat(self._hits(base_once, base_multi, worst_arr), starts, axis=1)
            good_fraction = Fraction(int(good.sum()), len(A.closure))
        return BlockCertificate(
            k=k,
            n=len(A),
            blocks=len(A.closure),
            mode=CertificateMode.EXHAUSTIVE if exhaustive else CertificateMode.SAMPLED,
            certifying=exhaustive,
            delta_lower=Fraction(best, 2 * len(A)),
            worst_syndrome=from_mask(worst),
            good_block_fraction=good_fraction,
            syndromes_checked=checked,
        )

    def subset_coverage(
        self,
        A: WordSet,
        subsets: Sequence[Sequence[int]],
        exhaustive_max_k: Optional[int] = None,
        trials: Optional[int] = None,
        seed: int = 0,
        threads: Optional[int] = None,
    ) -> SubsetCoverage:
        """
        Minimum over nonempty syndromes C of the number of subsets (0-based word
        positions of A) containing a word met by C exactly once.
        """
        if not subsets or any(len(s) == 0 for s in subsets):
            raise InvalidInputError("subsets must be nonempty")
        k = A.rank
        exhaustive = self._mode(k, exhaustive_max_k)
        used = sorted({i for s in subsets for i in s})
        column = {i: j for j, i in enumerate(used)}
        masks = [occurrence_masks(A.words[i]) for i in used]
        once = as_mask_array([a for a, _ in masks], k)
        multi = as_mask_array([b for _, b in masks], k)
        flat = np.array([column[i] for s in subsets for i in s], dtype=np.int64)
        starts = np.cumsum([0] + [len(s) for s in subsets[:-1]]).astype(np.int64)

        def evaluate(syndromes: np.ndarray) -> np.ndarray:
            hits = self._hits(once, multi, syndromes)[:, flat]
            return np.logical_or.reduceat(hits, starts, axis=1).sum(axis=1).astype(np.int64)

        plan = self._syndrome_plan(k, len(flat), exhaustive, trials or self.sampled_trials, seed, "coverage")
        best, worst, checked, _ = self._scan(plan, evaluate, threads)
        return SubsetCoverage(
            k=k,
            subsets=len(subsets),
            min_covered=best,
            covered_fraction=Fraction(best, len(subsets)),
            worst_syndrome=from_mask(worst),
            mode=CertificateMode.EXHAUSTIVE if exhaustive else CertificateMode.SAMPLED,
            certifying=exhaustive,
            syndromes_checked=checked,
        )

    def hadamard_matching_certificate(self, A: WordSet, seed: int = 0) -> MatchingCertificate:
        """
        Matching certificate for a single full subset closure.

        Checks that word s is the ordered product of the base words selected by
        the bits of s, then for pairs S <-> S+{i} checks that
        x_{S+i} x_S^{-1} reduces to u y_i u^{-1}, u the product over base
        positions below i in S.
        """
        blocks = A.closure or ()
        if len(blocks) != 1 or blocks[0].offset != 0 or blocks[0].size != len(A):
            raise InvalidInputError(f"{A.label or 'word set'} is not a single subset closure")
        base = blocks[0].base
        m = len(base)
        for s, (word, expected) in enumerate(zip(A.words, word_service.closure_products(base))):
            if tuple(word) != expected:
                raise InvalidInputError(f"word {s} is not the closure product of its subset")

        if m <= self.symbolic_max_k:
            mode = CertificateMode.SYMBOLIC
            pairs = ((s, i) for i in range(m) for s in range(1 << m) if not (s >> i) & 1)
        else:
            mode = CertificateMode.SAMPLED
            rng = substream(seed, "certify.matching")
            drawn = []
            for _ in range(self.sampled_pairs):
                i = int(rng.integers(0, m))
                s = int(rng.integers(0, 1 << (m - 1)))
                low, high = s & ((1 << i) - 1), s >> i
                drawn.append(((high << (i + 1)) | low, i))
            pairs = iter(drawn)

        checked = 0
        for s, i in pairs:
            partner = s | (1 << i)
            lhs = word_service.reduce(word_service.concat(A.words[partner], word_service.inverse(A.words[s])))
            prefix = word_service.concat(*(base[j] for j in range(i) if (s >> j) & 1))
            rhs = word_service.reduce(word_service.concat(prefix, base[i], word_service.inverse(prefix)))
            if lhs != rhs:
                raise InvalidInputError(f"conjugation identity fails for subset {s} and position {i + 1}")
            checked += 1

        base_is_basis = all(len(w) == 1 for w in base) and sorted(abs(w[0]) for w in base) == list(
            range(1, A.rank + 1)
        )
        return MatchingCertificate(
            value=Fraction(1, 2),
            base_size=m,
            mode=mode,
            pairs_checked=checked,
            base_is_basis=base_is_basis,
            witness=f"S <-> S+{{i}} with i = min C over {1 << m} subsets; {checked} conjugation identities reduced",
        )

    def generator_coverage(self, A: WordSet, delta_lower: Fraction) -> CoverageReport:
        """Fraction of words whose reduced form uses each generator, and the average-length bound."""
        k = A.rank
        hits = [0] * k
        total_length = 0
        for word in A.words:
            reduced = word_service.reduce(word)
            total_length += len(reduced)
            for i in {abs(x) for x in reduced}:
                hits[i - 1] += 1
        weakest = min(range(k), key=lambda i: hits[i])
        avg = Fraction(total_length, len(A))
        return CoverageReport(
            k=k,
            min_fraction=Fraction(hits[weakest], len(A)),
            weakest_generator=weakest + 1,
            avg_reduced_length=avg,
            delta_lower=delta_lower,
            length_bound_holds=avg >= delta_lower * k,
        )

    def report(
        self,
        A: WordSet,
        backends: Sequence[Tuple[FiniteGroupBackend, Optional[Sequence]]] = (),
        seed: int = 0,
    ) -> DetectionReport:
        """Everything known about A: certificates, quotient deltas, lengths, rate and the GV point."""
        syndrome = self.certified_delta(A, seed=seed)
        candidates = [syndrome.delta_lower if syndrome.certifying else Fraction(0)]

        matching = None
        blocks = None
        closure_ok = bool(A.closure)
        if closure_ok:
            try:
                self.verify_closure(A)
            except CertificationError as e:
                logger.warning(f"Ignoring closure blocks of {A.label or 'word set'}: {str(e)}")
                closure_ok = False
        if closure_ok:
            blocks = self.closure_certificate(A, seed=seed)
            if blocks.certifying:
                candidates.append(blocks.delta_lower)
            if len(A.closure) == 1 and A.closure[0].offset == 0 and A.closure[0].size == len(A):
                matching = self.hadamard_matching_certificate(A, seed=seed)
                if matching.base_is_basis:
                    candidates.append(matching.value)
        best = max(candidates)

        f2_delta = None
        if (1 << A.rank) - 1 <= group_service.vector_space_budget:
            f2_delta = group_service.exact_delta_vector_space(A, 2, A.rank)

        exact = []
        for group, assignment in backends:
            delta = group_service.exact_delta(A, group, assignment)
            exact.append(QuotientDelta(group=group.describe(), delta=delta))

        rate = Fraction(A.rank, len(A))
        point = f2_delta if f2_delta is not None else best
        gv = GVComparison(rate=rate, delta=point)
        if point <= Fraction(1, 2):
            gv.gv_rate = 1.0 - abelian_service.gv_entropy(2, point)
            gv.above_gv = float(rate) >= gv.gv_rate

        logger.info(f"Report for {A.label or 'word set'}: n={len(A)} k={A.rank} certified={best}")
        return DetectionReport(
            label=A.label,
            n=len(A),
            k=A.rank,
            rate=rate,
            length=word_service.length_stats(A),
            syndrome=syndrome,
            matching=matching,
            blocks=blocks,
            best_certified=best,
            f2_quotient_delta=f2_delta,
            exact=exact,
            coverage=self.generator_coverage(A, best),
            gv=gv,
        )


certify_service = CertifyService()
