"""
Unit tests for abelian_service.py
"""
import math
from fractions import Fraction

import pytest

from app.core.exceptions import InvalidInputError
from app.models.enums import DistanceMethod, ExpansionCriterion
from app.models.graph import BipartiteGraph
from app.models.group import AbelianGroup
from app.models.matrix import IntMatrix, rank_mod_p
from app.services.abelian_service import abelian_service
from app.services.expander_service import expander_service


def _rank_over_q(B: IntMatrix) -> int:
    """Rank over Q, bounded below by the rank mod a large prime"""
    return rank_mod_p(B.transpose().entries, 1_000_003)


@pytest.mark.unit
class TestParityMatrix:
    """Test suite for the parity map of a graph"""

    def test_single_edge(self):
        """Test K_{1,1} gives [[1]]"""
        graph = BipartiteGraph(n=1, m=1, d=1, adj=((1,),))
        assert abelian_service.parity_matrix(graph).entries == ((1,),)

    def test_star(self):
        """Test three left vertices on one right vertex"""
        graph = BipartiteGraph(n=3, m=1, d=1, adj=((1,), (1,), (1,)))
        assert abelian_service.parity_matrix(graph).entries == ((1, 1, 1),)

    def test_double_edge(self):
        """Test multiplicity two becomes entry 2"""
        graph = BipartiteGraph(n=1, m=1, d=2, adj=((1, 1),))
        assert abelian_service.parity_matrix(graph).entries == ((2,),)


@pytest.mark.unit
class TestKernel:
    """Test suite for integer kernel bases"""

    def test_all_ones_row(self):
        """Test [[1, 1, 1]] has a rank-2 kernel"""
        M = IntMatrix.from_rows([[1, 1, 1]])
        B = abelian_service.integer_kernel_basis(M)
        assert B.rows == 3 and B.cols == 2
        assert M.matmul(B).is_zero()
        assert _rank_over_q(B) == 2

    def test_identity_has_empty_kernel(self):
        """Test the identity has no kernel"""
        B = abelian_service.integer_kernel_basis(IntMatrix.identity(2))
        assert B.cols == 0
        assert B.rows == 2

    def test_zero_row_keeps_everything(self):
        """Test a zero 1x3 matrix keeps all of Z^3"""
        B = abelian_service.integer_kernel_basis(IntMatrix.from_rows([[0, 0, 0]]))
        assert B.cols == 3
        assert _rank_over_q(B) == 3

    def test_kernel_is_saturated(self):
        """Test [[2, 4, 6]] gives a basis independent mod 2"""
        M = IntMatrix.from_rows([[2, 4, 6]])
        B = abelian_service.integer_kernel_basis(M)
        assert M.matmul(B).is_zero()
        assert B.cols == 2
        assert abelian_service.mod_p_independence(B, 2)

    def test_unreduced_basis_spans_same_kernel(self):
        """Test size reduction keeps the kernel"""
        M = IntMatrix.from_rows([[3, 5, 7, 11], [1, 1, 1, 1]])
        raw = abelian_service.integer_kernel_basis(M, reduce=False)
        reduced = abelian_service.integer_kernel_basis(M)
        assert M.matmul(raw).is_zero()
        assert M.matmul(reduced).is_zero()
        assert raw.cols == reduced.cols == 2
        assert abelian_service.mod_p_independence(reduced, 2)


@pytest.mark.unit
class TestIndependence:
    """Test suite for independence mod p"""

    def test_kernel_basis_mod_two(self):
        """Test the kernel of [[1, 1, 1]] stays independent mod 2"""
        B = abelian_service.integer_kernel_basis(IntMatrix.from_rows([[1, 1, 1]]))
        assert abelian_service.mod_p_independence(B, 2)

    def test_scaled_column(self):
        """Test a column scaled by 2 vanishes mod 2"""
        B = IntMatrix.from_rows([[2], [2]])
        assert not abelian_service.mod_p_independence(B, 2)
        assert abelian_service.mod_p_independence(B, 3)

    @pytest.mark.parametrize("p", [2, 3, 5, 7])
    def test_identity(self, p):
        """Test the identity is independent for every prime"""
        assert abelian_service.mod_p_independence(IntMatrix.identity(3), p)

    def test_non_prime(self):
        """Test composite moduli are rejected"""
        with pytest.raises(InvalidInputError):
            abelian_service.mod_p_independence(IntMatrix.identity(2), 4)


@pytest.mark.unit
class TestDistance:
    """Test suite for minimum distance"""

    def test_hadamard_two(self):
        """Test rows 00, 10, 01, 11 over F_2 have distance 2"""
        G = IntMatrix.from_rows([[0, 0], [1, 0], [0, 1], [1, 1]])
        result = abelian_service.distance_exact(G, 2)
        assert result.distance == 2
        assert result.n == 4
        assert result.method == DistanceMethod.EXACT
        assert result.messages_checked == 3

    def test_repetition(self):
        """Test (1; 1; 1) has distance 3"""
        assert abelian_service.distance_exact(IntMatrix.from_rows([[1], [1], [1]]), 2).distance == 3

    @pytest.mark.parametrize("p", [2, 3, 5])
    def test_identity(self, p):
        """Test the identity code has distance 1"""
        assert abelian_service.distance_exact(IntMatrix.identity(4), p).distance == 1

    def test_ternary_messages_up_to_scale(self):
        """Test F_3 messages are counted up to scalars"""
        result = abelian_service.distance_exact(IntMatrix.identity(2), 3)
        assert result.messages_checked == 4

    def test_sampled_fallback(self):
        """Test the budget switches to sampled messages flagged heuristic"""
        G = IntMatrix.identity(6)
        result = abelian_service.distance_exact(G, 2, budget=4, trials=200, seed=1)
        assert result.method == DistanceMethod.SAMPLED
        assert result.heuristic
        assert result.distance >= 1

    def test_no_columns(self):
        """Test a code without generator columns is rejected"""
        with pytest.raises(InvalidInputError):
            abelian_service.distance_exact(IntMatrix(rows=3, cols=0, entries=((), (), ())), 2)

    def test_non_prime(self):
        """Test composite moduli are rejected"""
        with pytest.raises(InvalidInputError):
            abelian_service.distance_exact(IntMatrix.identity(2), 6)


@pytest.mark.unit
class TestAbelianCode:
    """Test suite for kernel codes of verified graphs"""

    def test_small_graph(self):
        """Test a verified 8x6 graph gives a code meeting the unique-neighbour distance bound"""
        graph, cert = expander_service.sample_verified(
            8, 6, 3, Fraction(1, 4), Fraction(1, 4), 2, seed=4, criterion=ExpansionCriterion.UNIQUE
        )
        E, report = abelian_service.build_abelian_code(graph, cert, primes=[2, 3, 5])
        parity = abelian_service.parity_matrix(graph)
        assert parity.matmul(E).is_zero()
        assert report.k >= graph.n - graph.m
        assert report.passed, report.failure
        assert report.distance_target == cert.s_checked + 1
        for check in report.per_prime:
            assert check.min_distance >= report.distance_target
            assert check.dimension == report.k

    def test_rejects_failed_graph(self, sample_twin_graph):
        """Test a graph that failed verification is refused"""
        cert = expander_service.verify_unique_neighbors(sample_twin_graph, 1, Fraction(1, 4), 2)
        with pytest.raises(InvalidInputError):
            abelian_service.build_abelian_code(sample_twin_graph, cert)

    def test_rejects_lossless_at_half(self, sample_triangle_graph):
        """Test lossless expansion at epsilon 1/2 does not give unique neighbours"""
        cert = expander_service.verify_unique_neighbors(sample_triangle_graph, Fraction(1, 3), Fraction(1, 2), 1)
        with pytest.raises(InvalidInputError):
            abelian_service.build_abelian_code(sample_triangle_graph, cert)


@pytest.mark.unit
class TestGilbertVarshamov:
    """Test suite for entropy and GV sizes"""

    def test_binary_maximum(self):
        """Test H_2(1/2) = 1"""
        assert abelian_service.gv_entropy(2, Fraction(1, 2)) == pytest.approx(1.0)

    def test_ternary_maximum(self):
        """Test H_3(2/3) = 1"""
        assert abelian_service.gv_entropy(3, Fraction(2, 3)) == pytest.approx(1.0)

    def test_binary_point(self):
        """Test H_2(0.9) is about 0.4690"""
        assert abelian_service.gv_entropy(2, Fraction(9, 10)) == pytest.approx(0.4690, abs=1e-4)

    def test_endpoints(self):
        """Test H_p(0) = 0"""
        assert abelian_service.gv_entropy(5, 0) == 0.0

    def test_out_of_range(self):
        """Test arguments outside [0, 1]"""
        with pytest.raises(InvalidInputError):
            abelian_service.gv_entropy(2, Fraction(3, 2))

    def test_abelian_size(self):
        """Test the GV size takes the worst prime"""
        size = abelian_service.gv_abelian_size({2: 4, 3: 2}, Fraction(1, 10))
        expected = max(4 / (1 - abelian_service.gv_entropy(2, Fraction(1, 10))), 2 / (1 - abelian_service.gv_entropy(3, Fraction(1, 10))))
        assert size == math.ceil(expected)

    def test_abelian_size_delta_range(self):
        """Test delta must stay below 1 - 1/p"""
        with pytest.raises(InvalidInputError):
            abelian_service.gv_abelian_size({2: 3}, Fraction(1, 2))

    def test_gv_point(self):
        """Test the Hadamard [8, 3, 4] point sits below the GV rate at delta 1/2"""
        point = abelian_service.gv_point(3, 8, Fraction(1, 2))
        assert point.rate == Fraction(3, 8)
        assert point.gv_rate == pytest.approx(0.0)
        assert point.above_gv


@pytest.mark.unit
class TestCoprimeCombine:
    """Test suite for pairing codes over coprime groups"""

    def test_generators(self):
        """Test {1} in Z_2 and {1} in Z_3 pair to delta 1 in Z_2 x Z_3"""
        combined, report = abelian_service.coprime_combine([(1,)], AbelianGroup([2]), [(1,)], AbelianGroup([3]))
        assert report.delta_combined == 1
        assert report.preserved
        assert len(combined) == 1

    def test_identity_inputs(self):
        """Test identity elements give delta 0 on both sides"""
        _, report = abelian_service.coprime_combine([(0,)], AbelianGroup([2]), [(0,)], AbelianGroup([3]))
        assert report.delta_left == 0
        assert report.delta_combined == 0

    def test_gv_style_inputs(self):
        """Test Z_2^2 with Z_3 keeps the smaller delta"""
        A = [(1, 0), (0, 1), (1, 1)]
        B = [(1,), (2,), (1,)]
        _, report = abelian_service.coprime_combine(A, AbelianGroup([2, 2]), B, AbelianGroup([3]))
        assert report.delta_left == Fraction(2, 3)
        assert report.delta_right == 1
        assert report.delta_combined == Fraction(2, 3)
        assert report.preserved

    def test_orders_must_be_coprime(self):
        """Test Z_2 with Z_4 is refused"""
        with pytest.raises(InvalidInputError):
            abelian_service.coprime_combine([(1,)], AbelianGroup([2]), [(1,)], AbelianGroup([4]))

    def test_lengths_must_match(self):
        """Test codes of different sizes are refused"""
        with pytest.raises(InvalidInputError):
            abelian_service.coprime_combine([(1,)], AbelianGroup([2]), [(1,), (2,)], AbelianGroup([3]))


@pytest.mark.unit
class TestMatrixDocuments:
    """Test suite for matrix JSON documents"""

    def test_big_integers_survive(self):
        """Test entries beyond 64 bits round-trip"""
        M = IntMatrix.from_rows([[2 ** 80, -3], [0, 1]])
        assert abelian_service.load_matrix(abelian_service.dump_matrix(M)) == M

    def test_bad_entry(self):
        """Test non-integer entries are rejected"""
        with pytest.raises(InvalidInputError):
            abelian_service.load_matrix({"rows": 1, "cols": 1, "entries": [["x"]]})
