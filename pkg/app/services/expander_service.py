import logging
import math
from concurrent.futures import ThreadPoolExecutor
from fractions import Fraction
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

from pydantic import ValidationError

from app.core.bitops import from_mask
from app.core.config import settings
from app.core.exceptions import CertificationError, InvalidInputError
from app.core.random import substream
from app.models.enums import CertificateMode, ExpansionCriterion
from app.models.graph import BipartiteGraph
from app.models.word import WordSet
from app.schemas.common import parse_rational
from app.schemas.expander import ExpanderCert, ExpanderWitness, GraphDocument, LosslessParams
from app.services.word_service import word_service

logger = logging.getLogger(__name__)

RationalLike = Union[Fraction, int, str, float]

# (neighbour mask, right vertices hit once, right vertices hit twice or more)
_VertexMasks = Tuple[int, int, int]


class _Outcome:
    """Running worst case of a subset scan."""

    def __init__(self):
        self.checked = 0
        self.failed = False
        self.score: Optional[Fraction] = None
        self.subset: Tuple[int, ...] = ()
        self.neighbors = 0
        self.unique = 0

    def offer(self, subset: Tuple[int, ...], score: Fraction, neighbors: int, unique: int) -> None:
        if self.score is None or score < self.score:
            self.score, self.subset, self.neighbors, self.unique = score, subset, neighbors, unique

    def merge(self, other: "_Outcome") -> None:
        self.checked += other.checked
        self.failed = self.failed or other.failed
        if other.score is not None:
            self.offer(other.subset, other.score, other.neighbors, other.unique)


class ExpanderService:
    def __init__(self):
        self.subset_budget = settings.VERIFY_SUBSET_BUDGET
        self.sampled_trials = settings.VERIFY_SAMPLED_TRIALS
        self.max_resamples = settings.GRAPH_MAX_RESAMPLES
        self.spielman_degree = settings.SPIELMAN_DEGREE
        self.threads = settings.THREADS

    # parameters

    def lossless_params(self, beta: RationalLike, epsilon: RationalLike, min_degree: Optional[int] = None) -> LosslessParams:
        """
        Smallest left degree with d >= e, d >= 2/epsilon and d >= 1/beta, then
        alpha = d^(-ceil(8/epsilon)) and n0 = 1/alpha.

        Args:
            beta: right-to-left size ratio, 0 < beta <= 1
            epsilon: expansion loss, 0 < epsilon < 1/2
            min_degree: extra floor on d (the doubling chain asks for d >= 16)

        Returns:
            LosslessParams with exact alpha
        """
        beta = parse_rational(beta)
        epsilon = parse_rational(epsilon)
        if not 0 < beta <= 1:
            raise InvalidInputError(f"beta must lie in (0, 1], got {beta}")
        if not 0 < epsilon < Fraction(1, 2):
            raise InvalidInputError(f"epsilon must lie in (0, 1/2), got {epsilon}")
        d = max(math.ceil(math.e), math.ceil(2 / epsilon), math.ceil(1 / beta), min_degree or 1)
        exponent = math.ceil(8 / epsilon)
        n0 = d ** exponent
        return LosslessParams(d=d, alpha=Fraction(1, n0), n0=n0)

    def spielman_params(self) -> LosslessParams:
        """Expander constants of the doubling chain: beta = 1/2, epsilon = 1/4, d at least SPIELMAN_DEGREE."""
        # the degree rule alone gives d = 8 here; the chain fixes d = 16 through min_degree
        return self.lossless_params(Fraction(1, 2), Fraction(1, 4), min_degree=self.spielman_degree)

    def existence_failure_bound(
        self,
        n: int,
        beta: RationalLike,
        d: int,
        epsilon: RationalLike,
        alpha: RationalLike,
    ) -> float:
        """
        Union bound on the probability that a random left-d-regular graph with
        n left and floor(beta n) right vertices has some S, |S| <= alpha n, with
        fewer than (1 - epsilon) d |S| neighbours.

        Sum over s of C(n, s) C(m, t) (t/m)^(ds), t the largest neighbourhood size
        that still fails. Evaluated in log space; may exceed 1 (no guarantee).
        """
        beta, epsilon, alpha = parse_rational(beta), parse_rational(epsilon), parse_rational(alpha)
        m = math.floor(beta * n)
        if n < 1 or m < 1 or d < 1:
            raise InvalidInputError(f"need n, floor(beta n) and d positive, got n={n}, m={m}, d={d}")
        logs: List[float] = []
        for s in range(1, math.floor(alpha * n) + 1):
            t = min(math.ceil((1 - epsilon) * d * s) - 1, m)
            if t <= 0:
                continue
            log_term = _log_comb(n, s) + _log_comb(m, t) + d * s * (math.log(t) - math.log(m))
            logs.append(log_term)
        if not logs:
            return 0.0
        top = max(logs)
        if top > 700:
            return math.inf
        return math.exp(top) * math.fsum(math.exp(x - top) for x in logs)

    # sampling

    def sample_left_regular(self, n: int, m: int, d: int, seed: int = 0, label: str = "expanders.sample") -> BipartiteGraph:
        """Each left vertex draws d right endpoints independently and uniformly (repeats allowed)."""
        if n < 1 or m < 1 or d < 1:
            raise InvalidInputError(f"n, m and d must be positive, got n={n}, m={m}, d={d}")
        rng = substream(seed, label)
        draws = rng.integers(1, m + 1, size=(n, d))
        return BipartiteGraph(n=n, m=m, d=d, adj=tuple(tuple(int(w) for w in row) for row in draws))

    def sample_verified(
        self,
        n: int,
        m: int,
        d: int,
        alpha: RationalLike,
        epsilon: RationalLike,
        s_max: int,
        seed: int = 0,
        criterion: ExpansionCriterion = ExpansionCriterion.LOSSLESS,
        max_resamples: Optional[int] = None,
        trials: Optional[int] = None,
        label: str = "expanders.sample",
    ) -> Tuple[BipartiteGraph, ExpanderCert]:
        """Resample until the verifier passes; the returned certificate carries the full worst case."""
        criterion = ExpansionCriterion(criterion)
        attempts = max_resamples or self.max_resamples
        for attempt in range(1, attempts + 1):
            graph = self.sample_left_regular(n, m, d, seed, label=f"{label}.attempt{attempt}")
            quick = self.verify_unique_neighbors(
                graph, alpha, epsilon, s_max, criterion=criterion, trials=trials, seed=seed, stop_on_failure=True
            )
            if quick.passed:
                cert = self.verify_unique_neighbors(graph, alpha, epsilon, s_max, criterion=criterion, trials=trials, seed=seed)
                logger.info(f"Graph {n}x{m} d={d} passed {criterion.value} verification after {attempt} attempt(s)")
                return graph, cert
            logger.debug(f"Attempt {attempt}: graph {n}x{m} d={d} failed {criterion.value} verification")
        raise CertificationError(f"no {n}x{m} graph of degree {d} passed verification in {attempts} attempts")

    # verification

    def _vertex_masks(self, G: BipartiteGraph) -> List[_VertexMasks]:
        out = []
        for row in G.adj:
            union, once, multi = 0, 0, 0
            for w in row:
                bit = 1 << (w - 1)
                union |= bit
                if multi & bit:
                    continue
                if once & bit:
                    once &= ~bit
                    multi |= bit
                else:
                    once |= bit
            out.append((union, once, multi))
        return out

    def _score(
        self,
        criterion: ExpansionCriterion,
        neighbors: int,
        unique: int,
        size: int,
        bound: Fraction,
    ) -> Tuple[Fraction, bool]:
        if criterion == ExpansionCriterion.LOSSLESS:
            slack = neighbors - bound * size
            return slack, slack >= 0
        return Fraction(unique), unique >= 1

    def _walk(
        self,
        masks: List[_VertexMasks],
        first: int,
        s_limit: int,
        criterion: ExpansionCriterion,
        bound: Fraction,
        stop_on_failure: bool,
    ) -> _Outcome:
        """All subsets of size <= s_limit whose smallest member is `first`, depth first in lexicographic order."""
        outcome = _Outcome()
        n = len(masks)
        union0, once0, multi0 = masks[first]
        stack = [((first,), union0, once0, multi0)]
        while stack:
            members, union, once, multi = stack.pop()
            neighbors = union.bit_count()
            unique = once.bit_count()
            score, ok = self._score(criterion, neighbors, unique, len(members), bound)
            outcome.checked += 1
            outcome.offer(tuple(v + 1 for v in members), score, neighbors, unique)
            if not ok:
                outcome.failed = True
                if stop_on_failure:
                    return outcome
            if len(members) < s_limit:
                for v in range(n - 1, members[-1], -1):
                    u, o, mu = masks[v]
                    new_multi = multi | mu | (once & o)
                    stack.append((members + (v,), union | u, (once | o) & ~new_multi, new_multi))
        return outcome

    def _measure(self, masks: List[_VertexMasks], members: Sequence[int]) -> Tuple[int, int]:
        union, once, multi = 0, 0, 0
        for v in members:
            u, o, mu = masks[v]
            new_multi = multi | mu | (once & o)
            union, once, multi = union | u, (once | o) & ~new_multi, new_multi
        return union.bit_count(), once.bit_count()

    def verify_unique_neighbors(
        self,
        G: BipartiteGraph,
        alpha: RationalLike,
        epsilon: RationalLike,
        s_max: int,
        criterion: ExpansionCriterion = ExpansionCriterion.LOSSLESS,
        budget: Optional[int] = None,
        trials: Optional[int] = None,
        seed: int = 0,
        threads: Optional[int] = None,
        stop_on_failure: bool = False,
    ) -> ExpanderCert:
        """
        Check every left set S with |S| <= min(floor(alpha n), s_max).

        lossless: |N(S)| >= (1 - epsilon) d |S|, parallel edges collapsed.
        unique: some right vertex meets exactly one edge from S.

        Above the subset budget random sets of every size are drawn instead and
        the result is evidence, not a certificate.
        """
        alpha, epsilon = parse_rational(alpha), parse_rational(epsilon)
        criterion = ExpansionCriterion(criterion)
        s_checked = max(0, min(math.floor(alpha * G.n), s_max))
        bound = (1 - epsilon) * G.d
        masks = self._vertex_masks(G)
        budget = self.subset_budget if budget is None else budget
        total = sum(math.comb(G.n, s) for s in range(1, s_checked + 1))
        exhaustive = total <= budget

        outcome = _Outcome()
        if s_checked == 0:
            pass
        elif exhaustive:
            threads = threads or self.threads
            firsts = range(G.n)

            def walk(first: int) -> _Outcome:
                return self._walk(masks, first, s_checked, criterion, bound, stop_on_failure)

            if threads > 1 and not stop_on_failure:
                with ThreadPoolExecutor(max_workers=threads) as pool:
                    parts = list(pool.map(walk, firsts))
            else:
                parts = []
                for first in firsts:
                    parts.append(walk(first))
                    if stop_on_failure and parts[-1].failed:
                        break
            for part in parts:
                outcome.merge(part)
        else:
            rng = substream(seed, "expanders.verify")
            count = trials or self.sampled_trials
            logger.warning(f"{total} subsets exceed the budget {budget}; checking {count} random subsets")
            for _ in range(count):
                size = int(rng.integers(1, s_checked + 1))
                members = sorted(int(v) for v in rng.choice(G.n, size=size, replace=False))
                neighbors, unique = self._measure(masks, members)
                score, ok = self._score(criterion, neighbors, unique, size, bound)
                outcome.checked += 1
                outcome.offer(tuple(v + 1 for v in members), score, neighbors, unique)
                if not ok:
                    outcome.failed = True
                    if stop_on_failure:
                        break

        worst = None
        if outcome.score is not None:
            worst = ExpanderWitness(subset=list(outcome.subset), neighbors=outcome.neighbors, unique_neighbors=outcome.unique)
        return ExpanderCert(
            alpha=alpha,
            epsilon=epsilon,
            s_max=s_max,
            s_checked=s_checked,
            criterion=criterion,
            mode=CertificateMode.EXHAUSTIVE if exhaustive else CertificateMode.SAMPLED,
            subsets_checked=outcome.checked,
            passed=not outcome.failed,
            worst_case=worst,
        )

    # set word map

    def upsilon(self, G: BipartiteGraph, A: WordSet, reduced: bool = False, label: Optional[str] = None) -> WordSet:
        """
        One word per right vertex: the product of the words at its left
        neighbours in left order, a parallel edge repeating its word.

        Words stay unreduced unless `reduced`; certificates read the stored letters.
        """
        if len(A) != G.n:
            raise InvalidInputError(f"graph has {G.n} left vertices but the word set has {len(A)} words")
        words = []
        for neighbors in G.right_neighborhoods():
            word = word_service.concat(*(A.words[v - 1] for v in neighbors))
            words.append(word_service.reduce(word) if reduced else word)
        return WordSet(rank=A.rank, words=tuple(words), label=label or f"upsilon({A.label})")

    # documents

    def dump_graph(self, G: BipartiteGraph) -> Dict[str, Any]:
        return GraphDocument(n=G.n, m=G.m, d=G.d, adj=[list(row) for row in G.adj]).model_dump(mode="json")

    def load_graph(self, data: Dict[str, Any]) -> BipartiteGraph:
        try:
            document = GraphDocument.model_validate(data)
            return BipartiteGraph(n=document.n, m=document.m, d=document.d, adj=tuple(tuple(r) for r in document.adj))
        except ValidationError as e:
            logger.error(f"Invalid graph document: {str(e)}")
            raise InvalidInputError(f"invalid graph: {str(e)}")

    def neighbors_of(self, G: BipartiteGraph, subset: Sequence[int]) -> List[int]:
        """Distinct right neighbours of a 1-based left subset."""
        masks = self._vertex_masks(G)
        union = 0
        for v in subset:
            union |= masks[v - 1][0]
        return from_mask(union)


def _log_comb(a: int, b: int) -> float:
    return math.lgamma(a + 1) - math.lgamma(b + 1) - math.lgamma(a - b + 1)


expander_service = ExpanderService()
