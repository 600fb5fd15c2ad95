import logging
import math
from concurrent.futures import ThreadPoolExecutor
from fractions import Fraction
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import ValidationError
from sympy import isprime

from app.core.config import settings
from app.core.exceptions import InvalidInputError
from app.core.random import substream
from app.models.enums import CertificateMode, DistanceMethod, ExpansionCriterion
from app.models.graph import BipartiteGraph
from app.models.group import DirectProduct, Element, FiniteGroupBackend
from app.models.matrix import IntMatrix, projective_blocks, projective_count, rank_mod_p
from app.schemas.abelian import (
    AbelianCodeReport,
    CoprimeReport,
    DistanceResult,
    GVPoint,
    MatrixDocument,
    PrimeCheck,
)
from app.schemas.common import parse_rational
from app.schemas.expander import ExpanderCert
from app.services.group_service import group_service

logger = logging.getLogger(__name__)

RationalLike = Union[Fraction, int, str, float]


def _extgcd(a: int, b: int) -> Tuple[int, int, int]:
    """(g, x, y) with a x + b y = g = gcd(a, b) >= 0."""
    x0, y0, x1, y1 = 1, 0, 0, 1
    while b:
        q, a, b = a // b, b, a % b
        x0, x1 = x1, x0 - q * x1
        y0, y1 = y1, y0 - q * y1
    if a < 0:
        a, x0, y0 = -a, -x0, -y0
    return a, x0, y0


class AbelianService:
    def __init__(self):
        self.primes = list(settings.DEFAULT_PRIMES)
        self.distance_budget = settings.DISTANCE_BUDGET
        self.sampled_trials = settings.DISTANCE_SAMPLED_TRIALS
        self.threads = settings.THREADS

    # integer linear algebra

    def parity_matrix(self, G: BipartiteGraph) -> IntMatrix:
        """m x n matrix of pi: Z^L -> Z^R, entry (w, v) the multiplicity of edge v-w."""
        counts = G.multiplicities()
        return IntMatrix.from_rows(counts.T.tolist(), cols=G.n)

    def integer_kernel_basis(self, M: IntMatrix, reduce: bool = True) -> IntMatrix:
        """
        Basis of {v in Z^n : M v = 0} as the columns of an n x k matrix.

        Column operations with extended gcd bring M to a column echelon form
        M U = [H | 0] with U unimodular; the columns of U facing the zero block
        span the kernel over Z. The basis is then size reduced.
        """
        n = M.cols
        work = [list(row) for row in M.entries]
        U = [[1 if i == j else 0 for j in range(n)] for i in range(n)]

        def combine(p: int, j: int, a: int, b: int, c: int, d: int) -> None:
            # (col_p, col_j) <- (a col_p + b col_j, c col_p + d col_j), ad - bc = 1
            for rows in (work, U):
                for row in rows:
                    x, y = row[p], row[j]
                    row[p], row[j] = a * x + b * y, c * x + d * y

        pivot = 0
        for i in range(M.rows):
            if pivot == n:
                break
            row = work[i]
            for j in range(pivot + 1, n):
                a, b = row[pivot], row[j]
                if b == 0:
                    continue
                if a == 0:
                    combine(pivot, j, 0, 1, -1, 0)
                elif b % a == 0:
                    combine(pivot, j, 1, 0, -(b // a), 1)
                else:
                    g, x, y = _extgcd(a, b)
                    combine(pivot, j, x, y, -(b // g), a // g)
            if row[pivot] != 0:
                pivot += 1

        kernel = [[U[r][j] for r in range(n)] for j in range(pivot, n)]
        basis = IntMatrix.from_columns(kernel, rows=n)
        logger.debug(f"Kernel of a {M.rows}x{M.cols} matrix: rank {pivot}, {len(kernel)} basis vectors")
        return self.size_reduce(basis) if reduce else basis

    def size_reduce(self, B: IntMatrix, max_passes: int = 64) -> IntMatrix:
        """
        Pairwise size reduction: b_i <- b_i - round(<b_i, b_j> / <b_j, b_j>) b_j
        while that shortens b_i. Unimodular, so the lattice is unchanged.
        """
        cols = [list(c) for c in B.columns()]
        for _ in range(max_passes):
            changed = False
            norms = [sum(x * x for x in c) for c in cols]
            for i in range(len(cols)):
                for j in range(len(cols)):
                    if i == j or norms[j] == 0:
                        continue
                    dot = sum(x * y for x, y in zip(cols[i], cols[j]))
                    if 2 * abs(dot) <= norms[j]:
                        continue
                    q = round(Fraction(dot, norms[j]))
                    cols[i] = [x - q * y for x, y in zip(cols[i], cols[j])]
                    norms[i] = sum(x * x for x in cols[i])
                    changed = True
            if not changed:
                break
        return IntMatrix.from_columns(cols, rows=B.rows)

    def mod_p_independence(self, B: IntMatrix, p: int) -> bool:
        """True iff the columns of B stay linearly independent mod p."""
        if not isprime(p):
            raise InvalidInputError(f"{p} is not prime")
        if B.cols == 0:
            return True
        return rank_mod_p(B.transpose().entries, p) == B.cols

    # distance

    def distance_exact(
        self,
        Gen: IntMatrix,
        p: int,
        budget: Optional[int] = None,
        trials: Optional[int] = None,
        seed: int = 0,
        threads: Optional[int] = None,
    ) -> DistanceResult:
        """
        Minimum Hamming weight of Gen msg mod p over nonzero messages.

        Messages are taken up to scalar multiples, which keep the weight. Above
        the budget, random messages give an upper bound flagged as heuristic.
        """
        if not isprime(p):
            raise InvalidInputError(f"{p} is not prime")
        n, k = Gen.rows, Gen.cols
        if k == 0:
            raise InvalidInputError("a code with no generator columns has no distance")
        generator = Gen.mod(p)
        budget = self.distance_budget if budget is None else budget
        count = projective_count(p, k)
        step = max(1, (1 << 22) // max(1, n))

        def min_weight(messages: np.ndarray) -> int:
            codewords = (generator @ messages.T) % p
            return int((codewords != 0).sum(axis=0).min())

        if count <= budget:
            threads = threads or self.threads
            blocks = projective_blocks(p, k, step)
            if threads > 1:
                with ThreadPoolExecutor(max_workers=threads) as pool:
                    distance = min(pool.map(min_weight, blocks))
            else:
                distance = min(min_weight(block) for block in blocks)
            return DistanceResult(p=p, n=n, k=k, distance=distance, method=DistanceMethod.EXACT, messages_checked=count)

        rng = substream(seed, f"abelian.distance.p{p}")
        total = trials or self.sampled_trials
        logger.warning(f"{count} messages over F_{p}^{k} exceed the budget {budget}; sampling {total}")
        distance = n
        for start in range(0, total, step):
            messages = rng.integers(0, p, size=(min(step, total - start), k))
            messages = messages[messages.any(axis=1)]
            if len(messages):
                distance = min(distance, min_weight(messages))
        return DistanceResult(
            p=p, n=n, k=k, distance=distance, method=DistanceMethod.SAMPLED, messages_checked=total, heuristic=True
        )

    # the code over all primes

    def build_abelian_code(
        self,
        G: BipartiteGraph,
        cert: ExpanderCert,
        primes: Optional[Sequence[int]] = None,
        budget: Optional[int] = None,
        seed: int = 0,
    ) -> Tuple[IntMatrix, AbelianCodeReport]:
        """
        Kernel of the parity map of a verified graph, checked prime by prime.

        A nonzero vector of the kernel mod p whose support has at most s
        elements would need a right vertex seen once to vanish, so every
        verified size s_checked forces weight at least s_checked + 1.
        """
        if not cert.passed:
            raise InvalidInputError("the graph did not pass neighbour verification")
        if cert.criterion == ExpansionCriterion.LOSSLESS and cert.epsilon >= Fraction(1, 2):
            raise InvalidInputError(f"lossless expansion at epsilon {cert.epsilon} does not give unique neighbours")
        if cert.mode != CertificateMode.EXHAUSTIVE:
            logger.warning("neighbour certificate is sampled; distance targets are evidence only")

        primes = list(primes or self.primes)
        E = self.integer_kernel_basis(self.parity_matrix(G))
        k = E.cols
        rank_bound_ok = k >= G.n - G.m
        target = cert.s_checked + 1

        per_prime: List[PrimeCheck] = []
        failure = None
        if k == 0:
            failure = "integer kernel is trivial"
        else:
            for p in primes:
                dimension = rank_mod_p(E.transpose().entries, p)
                result = self.distance_exact(E, p, budget=budget, seed=seed)
                meets = result.distance >= target
                per_prime.append(
                    PrimeCheck(p=p, dimension=dimension, min_distance=result.distance, method=result.method, meets_alpha=meets)
                )
                if dimension != k and failure is None:
                    failure = f"basis loses rank mod {p}: {dimension} < {k}"
                if not meets and failure is None:
                    failure = f"distance {result.distance} mod {p} below the unique-neighbour bound {target}"

        if not rank_bound_ok and failure is None:
            failure = f"kernel rank {k} below n - m = {G.n - G.m}"
        passed = failure is None
        if not passed:
            logger.error(f"Abelian code check failed: {failure}")
        report = AbelianCodeReport(
            n=G.n,
            k=k,
            m=G.m,
            primes_checked=primes if k else [],
            per_prime=per_prime,
            alpha_target=cert.alpha,
            distance_target=target,
            entry_bitsize=E.max_bitsize,
            rank_bound_ok=rank_bound_ok,
            passed=passed,
            failure=failure,
        )
        return E, report

    # Gilbert-Varshamov

    def gv_entropy(self, p: int, x: RationalLike) -> float:
        """H_p(x) = x log_p(p-1) - x log_p x - (1-x) log_p(1-x), with 0 log 0 = 0."""
        if p < 2:
            raise InvalidInputError(f"alphabet size must be at least 2, got {p}")
        x = float(parse_rational(x))
        if not 0 <= x <= 1:
            raise InvalidInputError(f"entropy argument must lie in [0, 1], got {x}")
        value = x * math.log(p - 1, p) if p > 2 else 0.0
        if 0 < x:
            value -= x * math.log(x, p)
        if x < 1:
            value -= (1 - x) * math.log(1 - x, p)
        return value

    def gv_abelian_size(self, ranks: Dict[int, int], delta: RationalLike) -> int:
        """ceil(max over p of r(G, p) / (1 - H_p(delta))), the GV-style size for a finite abelian group."""
        if not ranks:
            raise InvalidInputError("need at least one prime rank")
        delta = parse_rational(delta)
        smallest = min(ranks)
        if not 0 <= delta < 1 - Fraction(1, smallest):
            raise InvalidInputError(f"delta {delta} must lie below 1 - 1/{smallest}")
        return math.ceil(max(r / (1 - self.gv_entropy(p, delta)) for p, r in ranks.items()))

    def gv_point(self, k: int, n: int, delta: RationalLike) -> GVPoint:
        delta = parse_rational(delta)
        rate = Fraction(k, n)
        gv_rate = 1 - self.gv_entropy(2, delta) if delta <= Fraction(1, 2) else 0.0
        return GVPoint(n=n, k=k, delta=delta, rate=rate, gv_rate=gv_rate, above_gv=float(rate) >= gv_rate)

    def coprime_combine(
        self,
        A: Sequence,
        G: FiniteGroupBackend,
        B: Sequence,
        G2: FiniteGroupBackend,
    ) -> Tuple[Tuple[Element, ...], CoprimeReport]:
        """Pair a_i with b_i in G x G2; for coprime orders the delta does not drop."""
        if len(A) != len(B):
            raise InvalidInputError(f"codes of sizes {len(A)} and {len(B)} cannot be paired")
        if math.gcd(G.order, G2.order) != 1:
            raise InvalidInputError(f"orders {G.order} and {G2.order} are not coprime")
        product = DirectProduct([G, G2], order_cap=max(G.order_cap, G.order * G2.order))
        combined = tuple(product.coerce((a, b)) for a, b in zip(A, B))
        delta_left = group_service.exact_delta(A, G)
        delta_right = group_service.exact_delta(B, G2)
        delta_combined = group_service.exact_delta(combined, product)
        preserved = delta_combined >= min(delta_left, delta_right)
        if not preserved:
            logger.error(f"Coprime combination lost delta: {delta_combined} < min({delta_left}, {delta_right})")
        report = CoprimeReport(
            delta_left=delta_left,
            delta_right=delta_right,
            delta_combined=delta_combined,
            preserved=preserved,
            elements=[list(x) for x in combined],
        )
        return combined, report

    # documents

    def dump_matrix(self, M: IntMatrix) -> Dict[str, Any]:
        return MatrixDocument(rows=M.rows, cols=M.cols, entries=[[str(x) for x in row] for row in M.entries]).model_dump()

    def load_matrix(self, data: Dict[str, Any]) -> IntMatrix:
        try:
            document = MatrixDocument.model_validate(data)
            return IntMatrix(
                rows=document.rows,
                cols=document.cols,
                entries=tuple(tuple(int(x) for x in row) for row in document.entries),
            )
        except (ValidationError, ValueError) as e:
            logger.error(f"Invalid matrix document: {str(e)}")
            raise InvalidInputError(f"invalid matrix: {str(e)}")


abelian_service = AbelianService()
