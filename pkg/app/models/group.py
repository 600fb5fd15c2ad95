import itertools
import logging
import math
from abc import ABC, abstractmethod
from typing import Dict, Hashable, List, Optional, Sequence, Tuple

import numpy as np
from sympy import primefactors
from sympy.combinatorics import Permutation
from sympy.combinatorics import PermutationGroup as SympyPermutationGroup
from sympy.combinatorics.named_groups import AlternatingGroup, CyclicGroup, SymmetricGroup

from app.core.config import settings
from app.core.exceptions import BudgetExceededError, InvalidInputError
from app.models.enums import GroupKind
from app.models.matrix import rank_mod_p

logger = logging.getLogger(__name__)

Element = Hashable


class Subgroup(ABC):
    order: int

    @abstractmethod
    def contains(self, element: Element) -> bool:
        ...


class MaskSubgroup(Subgroup):
    """Subgroup stored as a bitmask over the element enumeration of its group."""

    def __init__(self, group: "FiniteGroupBackend", mask: int):
        self.group = group
        self.mask = mask
        self.order = mask.bit_count()

    def contains(self, element: Element) -> bool:
        return bool((self.mask >> self.group.index_of(element)) & 1)

    def indices(self) -> List[int]:
        return [i for i in range(self.group.order) if (self.mask >> i) & 1]


class FunctionalSubgroup(Subgroup):
    """Kernel of x -> sum_i v_i (x_i mod p), a maximal subgroup of index p."""

    def __init__(self, group: "AbelianGroup", prime: int, functional: Tuple[int, ...]):
        self.group = group
        self.prime = prime
        self.functional = functional
        self.order = group.order // prime

    def contains(self, element: Element) -> bool:
        p = self.prime
        return sum(v * (x % p) for v, x in zip(self.functional, element)) % p == 0


class FiniteGroupBackend(ABC):
    kind: GroupKind

    def __init__(self, generators: Sequence, order_cap: Optional[int] = None):
        self.order_cap = order_cap or settings.GROUP_ORDER_CAP
        self._generators = tuple(self.coerce(g) for g in generators)
        self._elements: Optional[Tuple[Element, ...]] = None
        self._index: Optional[Dict[Element, int]] = None
        self._table: Optional[List[List[int]]] = None
        self._maximal: Optional[List[Subgroup]] = None

    # element arithmetic

    @property
    @abstractmethod
    def identity(self) -> Element:
        ...

    @abstractmethod
    def multiply(self, a: Element, b: Element) -> Element:
        ...

    @abstractmethod
    def inverse(self, a: Element) -> Element:
        ...

    @abstractmethod
    def coerce(self, raw) -> Element:
        """Normalize a raw element (int, list, sympy Permutation, ...) or raise InvalidInputError."""

    @property
    @abstractmethod
    def order(self) -> int:
        ...

    @abstractmethod
    def describe(self) -> str:
        ...

    @property
    def generators(self) -> Tuple[Element, ...]:
        return self._generators

    @property
    def rank(self) -> int:
        return len(self._generators)

    @property
    def is_abelian(self) -> bool:
        gens = self._generators
        return all(self.multiply(a, b) == self.multiply(b, a) for a, b in itertools.combinations(gens, 2))

    def commutator(self, a: Element, b: Element) -> Element:
        return self.multiply(self.multiply(self.inverse(a), self.inverse(b)), self.multiply(a, b))

    # enumeration

    def check_cap(self) -> None:
        if self.order > self.order_cap:
            raise BudgetExceededError(
                f"{self.describe()} has order {self.order} above the enumeration cap {self.order_cap}",
                budget=self.order_cap,
                required=self.order,
            )

    def elements(self) -> Tuple[Element, ...]:
        """All elements, identity first, in breadth-first order over the generators."""
        if self._elements is None:
            self.check_cap()
            seen = {self.identity: 0}
            queue = [self.identity]
            for x in queue:
                for g in self._generators:
                    y = self.multiply(x, g)
                    if y not in seen:
                        seen[y] = len(queue)
                        queue.append(y)
            if len(queue) != self.order:
                raise InvalidInputError(
                    f"generators of {self.describe()} reach {len(queue)} of {self.order} elements"
                )
            self._elements = tuple(queue)
            self._index = seen
        return self._elements

    def index_of(self, element: Element) -> int:
        if self._index is None:
            self.elements()
        try:
            return self._index[element]
        except KeyError:
            raise InvalidInputError(f"{element!r} is not an element of {self.describe()}")

    def cayley_table(self) -> List[List[int]]:
        """table[i][j] = index of elements[i] * elements[j]."""
        if self._table is None:
            elements = self.elements()
            index = self._index
            self._table = [[index[self.multiply(a, b)] for b in elements] for a in elements]
        return self._table

    def generated_mask(self, gen_indices: Sequence[int]) -> int:
        """Bitmask of the subgroup generated by the given element indices."""
        table = self.cayley_table()
        members = [0]
        mask = 1
        for x in members:
            row = table[x]
            for g in gen_indices:
                y = row[g]
                if not (mask >> y) & 1:
                    mask |= 1 << y
                    members.append(y)
        return mask

    def maximal_subgroups(self) -> List[Subgroup]:
        if self._maximal is None:
            masks = [mask for mask, _ in subgroup_masks(self)]
            full = (1 << self.order) - 1
            self._maximal = [MaskSubgroup(self, m) for m in maximal_masks(masks, full)]
        return self._maximal


class AbelianGroup(FiniteGroupBackend):
    """Z_{m1} x ... x Z_{mr}, elements are tuples of residues."""

    kind = GroupKind.ABELIAN

    def __init__(self, moduli: Sequence[int], generators: Optional[Sequence] = None, order_cap: Optional[int] = None):
        self.moduli = tuple(int(m) for m in moduli)
        if not self.moduli or any(m < 1 for m in self.moduli):
            raise InvalidInputError(f"moduli must be positive integers, got {moduli}")
        if generators is None:
            generators = [tuple(1 if i == j else 0 for j in range(len(self.moduli))) for i in range(len(self.moduli))]
        super().__init__(generators, order_cap)
        self._check_generates()

    @classmethod
    def zmr(cls, m: int, r: int, order_cap: Optional[int] = None) -> "AbelianGroup":
        return cls((m,) * r, order_cap=order_cap)

    @property
    def identity(self) -> Element:
        return (0,) * len(self.moduli)

    def multiply(self, a, b):
        return tuple((x + y) % m for x, y, m in zip(a, b, self.moduli))

    def inverse(self, a):
        return tuple((-x) % m for x, m in zip(a, self.moduli))

    def coerce(self, raw) -> Element:
        if isinstance(raw, (int, np.integer)):
            raw = (int(raw),)
        values = tuple(int(x) for x in raw)
        if len(values) != len(self.moduli):
            raise InvalidInputError(f"element {raw!r} does not have {len(self.moduli)} coordinates")
        return tuple(x % m for x, m in zip(values, self.moduli))

    @property
    def order(self) -> int:
        return math.prod(self.moduli)

    @property
    def is_abelian(self) -> bool:
        return True

    @property
    def primes(self) -> List[int]:
        return sorted({p for m in self.moduli for p in primefactors(m)})

    def describe(self) -> str:
        return "x".join(f"Z_{m}" for m in self.moduli)

    def _check_generates(self) -> None:
        for p in self.primes:
            coords = [i for i, m in enumerate(self.moduli) if m % p == 0]
            rows = [[g[i] for i in coords] for g in self._generators]
            if rank_mod_p(rows, p) < len(coords):
                raise InvalidInputError(f"generators do not generate {self.describe()} (fail mod {p})")

    def maximal_subgroups(self) -> List[Subgroup]:
        """Kernels of nonzero F_p functionals up to scale, for every prime p dividing the exponent."""
        if self._maximal is None:
            subgroups: List[Subgroup] = []
            for p in self.primes:
                coords = [i for i, m in enumerate(self.moduli) if m % p == 0]
                count = (p ** len(coords) - 1) // (p - 1)
                if count > settings.VECTOR_SPACE_BUDGET:
                    raise BudgetExceededError(
                        f"{count} functionals mod {p} exceed the budget",
                        budget=settings.VECTOR_SPACE_BUDGET,
                        required=count,
                    )
                for vector in itertools.product(range(p), repeat=len(coords)):
                    lead = next((x for x in vector if x), 0)
                    if lead != 1:
                        continue
                    functional = [0] * len(self.moduli)
                    for i, v in zip(coords, vector):
                        functional[i] = v
                    subgroups.append(FunctionalSubgroup(self, p, tuple(functional)))
            self._maximal = subgroups
        return self._maximal


class PermutationGroup(FiniteGroupBackend):
    """
    Group generated by permutations of 0..degree-1, stored as image tuples.

    Products compose left to right: (a*b)(x) = b(a(x)), the same convention as
    sympy's Permutation.__mul__.
    """

    kind = GroupKind.PERM

    def __init__(self, degree: int, generators: Sequence, order_cap: Optional[int] = None):
        if degree < 1:
            raise InvalidInputError("permutation degree must be at least 1")
        self.degree = degree
        self._order: Optional[int] = None
        super().__init__(generators, order_cap)

    @classmethod
    def from_cycles(cls, degree: int, generators: Sequence[Sequence[Sequence[int]]], order_cap: Optional[int] = None):
        """Generators in 1-based cycle notation, e.g. [[[1, 2]], [[1, 2, 3]]]."""
        perms = []
        for cycles in generators:
            zero_based = [[x - 1 for x in cycle] for cycle in cycles]
            if any(x < 0 or x >= degree for cycle in zero_based for x in cycle):
                raise InvalidInputError(f"cycle {cycles} leaves 1..{degree}")
            perms.append(Permutation(zero_based, size=degree))
        return cls(degree, perms, order_cap)

    @classmethod
    def from_sympy(cls, group: SympyPermutationGroup, order_cap: Optional[int] = None) -> "PermutationGroup":
        return cls(group.degree, list(group.generators), order_cap)

    @classmethod
    def symmetric(cls, n: int) -> "PermutationGroup":
        return cls.from_sympy(SymmetricGroup(n))

    @classmethod
    def alternating(cls, n: int) -> "PermutationGroup":
        return cls.from_sympy(AlternatingGroup(n))

    @classmethod
    def cyclic(cls, n: int) -> "PermutationGroup":
        return cls.from_sympy(CyclicGroup(n))

    @classmethod
    def wreath_z2_z3(cls) -> "PermutationGroup":
        """Z_2 wr Z_3 on six points: a swap in the first block and the block rotation."""
        return cls.from_cycles(6, [[[1, 2]], [[1, 3, 5], [2, 4, 6]]])

    @property
    def identity(self) -> Element:
        return tuple(range(self.degree))

    def multiply(self, a, b):
        return tuple(b[x] for x in a)

    def inverse(self, a):
        inv = [0] * len(a)
        for i, x in enumerate(a):
            inv[x] = i
        return tuple(inv)

    def coerce(self, raw) -> Element:
        if isinstance(raw, Permutation):
            raw = list(raw.array_form) + list(range(raw.size, self.degree))
        images = tuple(int(x) for x in raw)
        if sorted(images) != list(range(self.degree)):
            raise InvalidInputError(f"{raw!r} is not a permutation of 0..{self.degree - 1}")
        return images

    @property
    def order(self) -> int:
        if self._order is None:
            self._order = int(SympyPermutationGroup([Permutation(list(g)) for g in self._generators] or [Permutation(list(self.identity))]).order())
        return self._order

    def describe(self) -> str:
        return f"perm(degree={self.degree}, order={self.order})"


class DirectProduct(FiniteGroupBackend):
    """Direct product of backends; elements are tuples of factor elements."""

    kind = GroupKind.PRODUCT

    def __init__(self, factors: Sequence[FiniteGroupBackend], generators: Optional[Sequence] = None, order_cap: Optional[int] = None):
        if not factors:
            raise InvalidInputError("a direct product needs at least one factor")
        self.factors = tuple(factors)
        if generators is None:
            generators = []
            for i, factor in enumerate(self.factors):
                for g in factor.generators:
                    generators.append(tuple(g if j == i else f.identity for j, f in enumerate(self.factors)))
        super().__init__(generators, order_cap)

    @property
    def identity(self) -> Element:
        return tuple(f.identity for f in self.factors)

    def multiply(self, a, b):
        return tuple(f.multiply(x, y) for f, x, y in zip(self.factors, a, b))

    def inverse(self, a):
        return tuple(f.inverse(x) for f, x in zip(self.factors, a))

    def coerce(self, raw) -> Element:
        raw = tuple(raw)
        if len(raw) != len(self.factors):
            raise InvalidInputError(f"element {raw!r} does not have {len(self.factors)} components")
        return tuple(f.coerce(x) for f, x in zip(self.factors, raw))

    @property
    def order(self) -> int:
        return math.prod(f.order for f in self.factors)

    @property
    def is_abelian(self) -> bool:
        return all(f.is_abelian for f in self.factors)

    def describe(self) -> str:
        return " x ".join(f"({f.describe()})" for f in self.factors)


def cyclic_masks(group: FiniteGroupBackend) -> Dict[int, int]:
    """Distinct cyclic subgroups as mask -> index of one generator."""
    result: Dict[int, int] = {}
    for i in range(group.order):
        mask = group.generated_mask([i])
        result.setdefault(mask, i)
    return result


def subgroup_masks(group: FiniteGroupBackend, count_cap: Optional[int] = None) -> List[Tuple[int, Tuple[int, ...]]]:
    """
    Every subgroup as (mask, generating indices).

    Starts from the cyclic subgroups and closes under joins with cyclic
    subgroups until no new subgroup appears.
    """
    count_cap = count_cap or settings.SUBGROUP_COUNT_CAP
    cyclic = cyclic_masks(group)
    found: Dict[int, Tuple[int, ...]] = {mask: (g,) for mask, g in cyclic.items()}
    worklist = list(found.items())
    cyclic_items = list(cyclic.items())
    for mask, gens in worklist:
        for cmask, g in cyclic_items:
            if cmask & ~mask == 0:
                continue
            joined = group.generated_mask(list(gens) + [g])
            if joined not in found:
                found[joined] = tuple(gens) + (g,)
                worklist.append((joined, found[joined]))
                if len(found) > count_cap:
                    raise BudgetExceededError(
                        f"{group.describe()} has more than {count_cap} subgroups",
                        budget=count_cap,
                        required=len(found),
                    )
    logger.debug(f"{group.describe()}: {len(found)} subgroups from {len(cyclic)} cyclic seeds")
    return sorted(found.items(), key=lambda item: (item[0].bit_count(), item[0]))


def maximal_masks(masks: Sequence[int], full: int) -> List[int]:
    proper = [m for m in masks if m != full]
    return [h for h in proper if not any(k != h and h & ~k == 0 for k in proper)]
