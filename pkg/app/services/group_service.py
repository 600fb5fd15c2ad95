import itertools
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import ValidationError

from app.core.config import settings
from app.core.exceptions import (
    BudgetExceededError,
    CertificationError,
    HomomorphismError,
    InvalidInputError,
    NotSolvableError,
)
from app.core.random import substream
from app.models.enums import GroupKind
from app.models.group import (
    AbelianGroup,
    DirectProduct,
    Element,
    FiniteGroupBackend,
    MaskSubgroup,
    PermutationGroup,
    Subgroup,
    maximal_masks,
    subgroup_masks,
)
from app.models.matrix import projective_blocks, projective_count
from app.models.word import WordSet
from app.schemas.groups import (
    GroupSpec,
    PMSGParams,
    PMSGReport,
    PushforwardReport,
    SolvableCodeResult,
    SubgroupLattice,
    TesterReport,
)
from app.services.word_service import word_service

logger = logging.getLogger(__name__)

Code = Union[WordSet, Sequence[Element]]

_NAMED = {
    "symmetric": PermutationGroup.symmetric,
    "alternating": PermutationGroup.alternating,
    "cyclic": PermutationGroup.cyclic,
}


def binary_entropy(x: float) -> float:
    if x <= 0 or x >= 1:
        return 0.0
    return -x * math.log2(x) - (1 - x) * math.log2(1 - x)


class GroupService:
    def __init__(self):
        self.order_cap = settings.GROUP_ORDER_CAP
        self.vector_space_budget = settings.VECTOR_SPACE_BUDGET
        self.max_resamples = settings.MAX_RESAMPLES
        self.envelope = settings.PMSG_ENVELOPE
        self.threads = settings.THREADS

    # backends

    def build_group(self, spec: Union[GroupSpec, dict]) -> FiniteGroupBackend:
        """Backend from its JSON description."""
        try:
            if isinstance(spec, dict):
                spec = GroupSpec.model_validate(spec)
        except ValidationError as e:
            raise InvalidInputError(f"invalid group spec: {str(e)}")

        if spec.kind == GroupKind.ZMR:
            if spec.m is None or spec.r is None:
                raise InvalidInputError("zmr group needs m and r")
            return AbelianGroup.zmr(spec.m, spec.r, order_cap=self.order_cap)
        if spec.kind == GroupKind.ABELIAN:
            if not spec.moduli:
                raise InvalidInputError("abelian group needs moduli")
            return AbelianGroup(spec.moduli, spec.generators, order_cap=self.order_cap)
        if spec.kind == GroupKind.PERM:
            if spec.named:
                if spec.named == "wreath_z2_z3":
                    return PermutationGroup.wreath_z2_z3()
                if spec.named not in _NAMED or spec.degree is None:
                    raise InvalidInputError(f"unknown named group {spec.named!r} or missing degree")
                return _NAMED[spec.named](spec.degree)
            if spec.degree is None or spec.generators is None:
                raise InvalidInputError("perm group needs degree and generators")
            return PermutationGroup.from_cycles(spec.degree, spec.generators, order_cap=self.order_cap)
        if spec.kind == GroupKind.PRODUCT:
            if not spec.factors:
                raise InvalidInputError("product group needs factors")
            return DirectProduct([self.build_group(f) for f in spec.factors], order_cap=self.order_cap)
        raise InvalidInputError(f"unsupported group kind {spec.kind}")

    def elements_of(self, A: Code, group: FiniteGroupBackend, assignment: Optional[Sequence] = None) -> List[Element]:
        """Evaluate a word set under the assignment (default: the backend generators) or coerce raw elements."""
        if isinstance(A, WordSet):
            assignment = group.generators if assignment is None else assignment
            if len(assignment) != A.rank:
                raise InvalidInputError(f"assignment has {len(assignment)} elements for rank {A.rank}")
            return word_service.evaluate_all(A.words, assignment, group)
        return [group.coerce(x) for x in A]

    # subgroup structure

    def subgroup_lattice(self, group: FiniteGroupBackend) -> SubgroupLattice:
        group.check_cap()
        found = subgroup_masks(group)
        masks = [mask for mask, _ in found]
        full = (1 << group.order) - 1
        maximal = set(maximal_masks(masks, full))
        logger.info(f"Lattice of {group.describe()}: {len(masks)} subgroups, {len(maximal)} maximal")
        return SubgroupLattice(
            group=group.describe(),
            order=group.order,
            all_subgroups=[MaskSubgroup(group, m).indices() for m in masks],
            orders=[m.bit_count() for m in masks],
            indexes=[group.order // m.bit_count() for m in masks],
            maximal=[i for i, m in enumerate(masks) if m in maximal],
        )

    def maximal_subgroups(self, group: FiniteGroupBackend) -> List[Subgroup]:
        return group.maximal_subgroups()

    def _min_outside(self, elements: List[Element], subgroups: Sequence[Subgroup], threads: Optional[int]) -> Fraction:
        n = len(elements)
        if n == 0:
            raise InvalidInputError("cannot measure an empty code")
        if not subgroups:
            # trivial group: no proper subgroup to escape
            return Fraction(1)

        def outside(subgroup: Subgroup) -> Fraction:
            return Fraction(sum(1 for x in elements if not subgroup.contains(x)), n)

        threads = threads or self.threads
        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                fractions = list(pool.map(outside, subgroups))
        else:
            fractions = [outside(s) for s in subgroups]
        return min(fractions)

    def exact_delta(
        self,
        A: Code,
        group: FiniteGroupBackend,
        assignment: Optional[Sequence] = None,
        threads: Optional[int] = None,
    ) -> Fraction:
        """
        min over maximal subgroups M of 1 - |A cap M| / |A|, counting A as a multiset.

        Returns 0 when A does not generate (some maximal subgroup holds all of it).
        """
        elements = self.elements_of(A, group, assignment)
        return self._min_outside(elements, group.maximal_subgroups(), threads)

    def exact_delta_all_subgroups(self, A: Code, group: FiniteGroupBackend, assignment: Optional[Sequence] = None) -> Fraction:
        """Same infimum taken over every proper subgroup of the lattice."""
        elements = self.elements_of(A, group, assignment)
        full = (1 << group.order) - 1
        proper = [MaskSubgroup(group, m) for m, _ in subgroup_masks(group) if m != full]
        return self._min_outside(elements, proper, threads=1)

    def exact_delta_vector_space(self, A: WordSet, p: int, k: Optional[int] = None, truncate: Optional[int] = None) -> Fraction:
        """
        Exact delta of the abelianized code in F_p^k.

        Each word becomes its exponent-sum vector mod p; the result is the minimum
        over functionals (up to scale) of the fraction of vectors with nonzero
        pairing. With `truncate`, only the first `truncate` generators survive,
        which is the quotient killing the rest.
        """
        k = A.rank if k is None else k
        dims = min(k, truncate) if truncate else k
        count = projective_count(p, dims)
        if count > self.vector_space_budget:
            raise BudgetExceededError(
                f"{count} functionals over F_{p}^{dims} exceed the budget",
                budget=self.vector_space_budget,
                required=count,
            )
        vectors = np.array([word_service.abelianize(w, k, p)[:dims] for w in A.words], dtype=np.int64)
        n = len(A)
        best = n
        step = max(1, (1 << 22) // max(1, n))
        for block in projective_blocks(p, dims, step):
            nonzero = ((block @ vectors.T) % p != 0).sum(axis=1)
            best = min(best, int(nonzero.min()))
        return Fraction(best, n)

    # quotients

    def homomorphism_map(self, source: FiniteGroupBackend, target: FiniteGroupBackend, images: Sequence) -> Dict[Element, Element]:
        """
        Extend generator images to all of `source`, checking every Cayley-graph edge.

        Raises:
            HomomorphismError: when two paths to one element give different images
        """
        images = [target.coerce(x) for x in images]
        if len(images) != source.rank:
            raise InvalidInputError(f"{len(images)} images for {source.rank} generators")
        source.elements()
        mapping: Dict[Element, Element] = {source.identity: target.identity}
        queue = [source.identity]
        for x in queue:
            fx = mapping[x]
            for g, image in zip(source.generators, images):
                y = source.multiply(x, g)
                fy = target.multiply(fx, image)
                if y in mapping:
                    if mapping[y] != fy:
                        raise HomomorphismError(f"generator images of {source.describe()} violate a relation")
                else:
                    mapping[y] = fy
                    queue.append(y)
        return mapping

    def frattini_contains(self, group: FiniteGroupBackend, elements: Sequence[Element]) -> bool:
        maximal = group.maximal_subgroups()
        return all(m.contains(x) for m in maximal for x in elements)

    def quotient_pushforward_check(
        self,
        A: Code,
        source: FiniteGroupBackend,
        target: FiniteGroupBackend,
        images: Sequence,
    ) -> PushforwardReport:
        """Exact delta before and after an epimorphism, with equality expected for Frattini kernels."""
        mapping = self.homomorphism_map(source, target, images)
        if len(set(mapping.values())) != target.order:
            raise HomomorphismError(f"the map onto {target.describe()} is not surjective")
        elements = self.elements_of(A, source)
        pushed = [mapping[x] for x in elements]
        delta_source = self.exact_delta(elements, source)
        delta_target = self.exact_delta(pushed, target)
        kernel = [x for x, y in mapping.items() if y == target.identity]
        is_frattini = self.frattini_contains(source, kernel)
        monotone_ok = delta_target >= delta_source
        equality_ok = (delta_target == delta_source) if is_frattini else None
        passed = monotone_ok and equality_ok is not False
        if not passed:
            logger.error(f"Pushforward check failed: {delta_source} -> {delta_target} (frattini={is_frattini})")
        return PushforwardReport(
            source=source.describe(),
            target=target.describe(),
            delta_source=delta_source,
            delta_target=delta_target,
            monotone_ok=monotone_ok,
            kernel_order=len(kernel),
            is_frattini=is_frattini,
            equality_ok=equality_ok,
            passed=passed,
        )

    # solvability

    def _inverse_indices(self, group: FiniteGroupBackend) -> List[int]:
        return [group.index_of(group.inverse(x)) for x in group.elements()]

    def _derived_subgroup(self, group: FiniteGroupBackend, gens: List[int]) -> Tuple[int, List[int]]:
        """Commutator subgroup of <gens> as (mask, generating indices), via normal closure."""
        table = group.cayley_table()
        inv = self._inverse_indices(group)

        def commutator(a: int, b: int) -> int:
            return table[table[inv[a]][inv[b]]][table[a][b]]

        def conjugate(k: int, h: int) -> int:
            return table[table[inv[h]][k]][h]

        kgens = sorted({commutator(a, b) for a, b in itertools.combinations(gens, 2)} - {0})
        mask = group.generated_mask(kgens) if kgens else 1
        changed = True
        while changed:
            changed = False
            for k in list(kgens):
                for h in gens:
                    c = conjugate(k, h)
                    if not (mask >> c) & 1:
                        kgens.append(c)
                        mask = group.generated_mask(kgens)
                        changed = True
        return mask, kgens

    def derived_series(self, group: FiniteGroupBackend) -> List[int]:
        """Orders of G = G0 > G1 > ... until the series stabilizes."""
        gens = sorted({group.index_of(g) for g in group.generators} - {0})
        mask = group.generated_mask(gens) if gens else 1
        orders = [mask.bit_count()]
        while mask != 1:
            next_mask, next_gens = self._derived_subgroup(group, gens)
            if next_mask == mask:
                break
            mask, gens = next_mask, next_gens
            orders.append(mask.bit_count())
        return orders

    def is_solvable(self, group: FiniteGroupBackend) -> bool:
        if group.is_abelian:
            return True
        return self.derived_series(group)[-1] == 1

    def is_nilpotent(self, group: FiniteGroupBackend) -> bool:
        """A finite group is nilpotent exactly when its commutator subgroup lies in the Frattini subgroup."""
        if group.is_abelian:
            return True
        gens = sorted({group.index_of(g) for g in group.generators} - {0})
        mask, _ = self._derived_subgroup(group, gens)
        derived = MaskSubgroup(group, mask)
        elements = group.elements()
        return self.frattini_contains(group, [elements[i] for i in derived.indices()])

    # PMSG sampling

    def pmsg_sample_size(self, params: PMSGParams) -> PMSGReport:
        """
        n = ceil((2 + E'k) / ((1 - delta) - H_2(1 - delta))).

        Also reports 2E'/((1 - delta) - H_2(1 - delta)), the constant the
        counting argument gives per unit of rank, next to the stated envelope.
        """
        delta = float(params.delta)
        exponent = float(params.exponent)
        denominator = (1 - delta) - binary_entropy(1 - delta)
        if denominator <= 0:
            raise InvalidInputError(f"delta {params.delta} leaves no room for the counting bound")
        n = math.ceil((2 + exponent * params.k) / denominator)
        return PMSGReport(
            n=n,
            k=params.k,
            ratio=n / params.k,
            proof_constant=2 * exponent / denominator,
            envelope=self.envelope,
            within_envelope=n <= self.envelope * params.k,
        )

    def solvable_random_code(
        self,
        group: FiniteGroupBackend,
        params: PMSGParams,
        seed: int = 0,
        max_resamples: Optional[int] = None,
    ) -> SolvableCodeResult:
        """Sample n uniform elements and resample until the exact delta reaches params.delta."""
        if not self.is_solvable(group):
            raise NotSolvableError(f"{group.describe()} is not solvable")
        elements = group.elements()
        n = self.pmsg_sample_size(params).n
        attempts = max_resamples or self.max_resamples
        best, best_delta = None, Fraction(-1)
        for attempt in range(1, attempts + 1):
            rng = substream(seed, f"groups.pmsg.attempt{attempt}")
            sample = [elements[int(i)] for i in rng.integers(0, len(elements), size=n)]
            delta = self.exact_delta(sample, group)
            if delta > best_delta:
                best, best_delta = sample, delta
            if delta >= params.delta:
                logger.info(f"Solvable code for {group.describe()}: n={n}, delta={delta} after {attempt} attempt(s)")
                return SolvableCodeResult(
                    group=group.describe(),
                    n=n,
                    elements=[list(x) for x in sample],
                    delta=delta,
                    target=params.delta,
                    attempts=attempt,
                )
            logger.info(f"Attempt {attempt}: delta {delta} below target {params.delta}, resampling")
        raise CertificationError(
            f"no sample reached delta {params.delta} in {attempts} attempts", best_attempt=best, best_value=best_delta
        )

    def simulate_tester(
        self,
        A: Code,
        group: FiniteGroupBackend,
        subgroup: Subgroup,
        trials: int,
        seed: int = 0,
        assignment: Optional[Sequence] = None,
    ) -> TesterReport:
        """One-query tester: draw a code word uniformly and reject when it leaves the subgroup."""
        elements = self.elements_of(A, group, assignment)
        outside = [not subgroup.contains(x) for x in elements]
        rng = substream(seed, "groups.tester")
        picks = rng.integers(0, len(elements), size=trials)
        rejections = int(sum(outside[int(i)] for i in picks))
        return TesterReport(
            trials=trials,
            rejections=rejections,
            empirical_rate=rejections / trials,
            expected_rate=Fraction(sum(outside), len(elements)),
        )


group_service = GroupService()
