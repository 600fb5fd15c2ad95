"""
Unit tests for group_service.py
"""
import random
from fractions import Fraction

import pytest

from app.core.exceptions import HomomorphismError, InvalidInputError, NotSolvableError
from app.models.group import AbelianGroup, DirectProduct, MaskSubgroup, PermutationGroup
from app.models.word import WordSet
from app.schemas.groups import PMSGParams
from app.services.construction_service import construction_service
from app.services.group_service import group_service


@pytest.mark.unit
class TestBuildGroup:
    """Test suite for group backends built from JSON descriptions"""

    def test_zmr(self):
        """Test Z_4^2 has order 16"""
        group = group_service.build_group({"kind": "zmr", "m": 4, "r": 2})
        assert isinstance(group, AbelianGroup)
        assert group.order == 16

    def test_perm_cycles(self):
        """Test S_3 from 1-based cycles"""
        group = group_service.build_group({"kind": "perm", "degree": 3, "generators": [[[1, 2]], [[1, 2, 3]]]})
        assert group.order == 6

    def test_named(self):
        """Test named symmetric and wreath groups"""
        assert group_service.build_group({"kind": "perm", "named": "symmetric", "degree": 4}).order == 24
        assert group_service.build_group({"kind": "perm", "named": "wreath_z2_z3"}).order == 24

    def test_product(self):
        """Test Z_2 x S_3"""
        spec = {
            "kind": "product",
            "factors": [{"kind": "abelian", "moduli": [2]}, {"kind": "perm", "named": "symmetric", "degree": 3}],
        }
        group = group_service.build_group(spec)
        assert isinstance(group, DirectProduct)
        assert group.order == 12

    @pytest.mark.parametrize(
        "spec",
        [
            {"kind": "zmr", "m": 4},
            {"kind": "abelian"},
            {"kind": "perm", "named": "mystery", "degree": 3},
            {"kind": "perm", "degree": 3},
            {"kind": "lie"},
        ],
    )
    def test_invalid(self, spec):
        """Test incomplete or unknown descriptions"""
        with pytest.raises(InvalidInputError):
            group_service.build_group(spec)

    def test_abelian_generators_must_generate(self):
        """Test {2} does not generate Z_4"""
        with pytest.raises(InvalidInputError):
            AbelianGroup([4], generators=[(2,)])


@pytest.mark.unit
class TestSubgroupLattice:
    """Test suite for subgroup enumeration"""

    def test_s3(self, sample_s3):
        """Test S_3 has 6 subgroups, 4 of them maximal"""
        lattice = group_service.subgroup_lattice(sample_s3)
        assert len(lattice.all_subgroups) == 6
        assert len(lattice.maximal) == 4
        assert sorted(lattice.orders) == [1, 2, 2, 2, 3, 6]

    def test_z6(self, sample_z6):
        """Test Z_6 has 4 subgroups and maximal subgroups of index 2 and 3"""
        lattice = group_service.subgroup_lattice(sample_z6)
        assert len(lattice.all_subgroups) == 4
        assert sorted(lattice.indexes[i] for i in lattice.maximal) == [2, 3]

    def test_z2(self):
        """Test Z_2 has 2 subgroups and 1 maximal"""
        lattice = group_service.subgroup_lattice(AbelianGroup([2]))
        assert len(lattice.all_subgroups) == 2
        assert len(lattice.maximal) == 1

    def test_abelian_maximal_count(self, sample_z2_squared):
        """Test Z_2^2 has three maximal subgroups"""
        assert len(group_service.maximal_subgroups(sample_z2_squared)) == 3


@pytest.mark.unit
class TestExactDelta:
    """Test suite for exact deltas over maximal subgroups"""

    def test_s3_pair(self, sample_s3):
        """Test {(1 2), (1 2 3)} in S_3 has delta 1/2"""
        transposition = (1, 0, 2)
        rotation = (1, 2, 0)
        assert group_service.exact_delta([transposition, rotation], sample_s3) == Fraction(1, 2)

    def test_identity_in_z2(self):
        """Test {0} in Z_2 has delta 0"""
        assert group_service.exact_delta([(0,)], AbelianGroup([2])) == 0

    def test_trivial_group(self):
        """Test the trivial group has nothing to escape"""
        assert group_service.exact_delta([(0,)], AbelianGroup([1])) == 1

    def test_hadamard_in_z2_squared(self, sample_z2_squared):
        """Test Hadamard rank 2 evaluated at the standard generators has delta 1/2"""
        A = construction_service.hadamard_code(2)
        assert group_service.exact_delta(A, sample_z2_squared) == Fraction(1, 2)

    def test_multiset(self):
        """Test repeated elements count with multiplicity"""
        assert group_service.exact_delta([(1,), (1,), (0,)], AbelianGroup([2])) == Fraction(2, 3)

    def test_assignment_rank(self, sample_three_words, sample_z6):
        """Test the assignment must match the rank"""
        with pytest.raises(InvalidInputError):
            group_service.exact_delta(sample_three_words, sample_z6, [(1,)])

    def test_empty_code(self, sample_z6):
        """Test an empty element list is rejected"""
        with pytest.raises(InvalidInputError):
            group_service.exact_delta([], sample_z6)

    def test_threads_agree(self):
        """Test the threaded minimum matches the serial one"""
        group = PermutationGroup.symmetric(4)
        rng = random.Random(6)
        elements = [rng.choice(group.elements()) for _ in range(15)]
        assert group_service.exact_delta(elements, group, threads=4) == group_service.exact_delta(elements, group, threads=1)

    def test_all_subgroups_never_larger(self):
        """Test the infimum over every proper subgroup is at most the maximal one"""
        rng = random.Random(12)
        group = PermutationGroup.wreath_z2_z3()
        elements = group.elements()
        for _ in range(10):
            sample = [rng.choice(elements) for _ in range(rng.randint(1, 8))]
            assert group_service.exact_delta_all_subgroups(sample, group) <= group_service.exact_delta(sample, group)

    def test_all_subgroups_agree_on_s3(self, sample_s3):
        """Test proper subgroups lie in maximal ones, so both infima agree"""
        sample = [(1, 0, 2), (1, 2, 0), (0, 2, 1)]
        assert group_service.exact_delta_all_subgroups(sample, sample_s3) == group_service.exact_delta(sample, sample_s3)


@pytest.mark.unit
class TestVectorSpaceDelta:
    """Test suite for deltas of abelianized codes"""

    def test_three_words(self, sample_three_words):
        """Test {x1, x2, x1 x2} over F_2 has delta 2/3"""
        assert group_service.exact_delta_vector_space(sample_three_words, 2) == Fraction(2, 3)

    def test_basis(self):
        """Test the basis of F_2^2 has delta 1/2"""
        assert group_service.exact_delta_vector_space(WordSet.basis(2), 2) == Fraction(1, 2)

    def test_identity(self, sample_identity_words):
        """Test only the empty word has delta 0"""
        assert group_service.exact_delta_vector_space(sample_identity_words, 2) == 0

    def test_ternary(self):
        """Test x1 x1 survives over F_3 and vanishes over F_2"""
        A = WordSet(rank=1, words=((1, 1),))
        assert group_service.exact_delta_vector_space(A, 3) == 1
        assert group_service.exact_delta_vector_space(A, 2) == 0

    def test_truncate(self, sample_basis):
        """Test killing all but two generators of the basis of F_2^4"""
        assert group_service.exact_delta_vector_space(sample_basis, 2, truncate=2) == Fraction(1, 4)

    def test_hadamard(self):
        """Test Hadamard rank 5 has delta 1/2 over F_2"""
        assert group_service.exact_delta_vector_space(construction_service.hadamard_code(5), 2) == Fraction(1, 2)


@pytest.mark.unit
class TestQuotients:
    """Test suite for homomorphisms and pushforwards"""

    def test_z4_onto_z2(self):
        """Test the Frattini quotient Z_4 -> Z_2 keeps delta"""
        report = group_service.quotient_pushforward_check([(1,), (2,), (3,)], AbelianGroup([4]), AbelianGroup([2]), [(1,)])
        assert report.is_frattini
        assert report.kernel_order == 2
        assert report.delta_source == report.delta_target == Fraction(2, 3)
        assert report.equality_ok
        assert report.passed

    def test_non_frattini_quotient(self):
        """Test Z_6 -> Z_2 may raise delta but never lowers it"""
        report = group_service.quotient_pushforward_check(
            [(1,), (2,), (3,)], AbelianGroup([6]), AbelianGroup([2]), [(1,)]
        )
        assert not report.is_frattini
        assert report.equality_ok is None
        assert report.delta_target >= report.delta_source
        assert report.passed

    def test_relation_violated(self):
        """Test Z_2 -> Z_3 sending the generator to 1 is not a homomorphism"""
        with pytest.raises(HomomorphismError):
            group_service.homomorphism_map(AbelianGroup([2]), AbelianGroup([3]), [(1,)])

    def test_not_surjective(self):
        """Test the zero map onto Z_3 is refused"""
        with pytest.raises(HomomorphismError):
            group_service.quotient_pushforward_check([(1,)], AbelianGroup([6]), AbelianGroup([3]), [(0,)])

    def test_sign_map(self, sample_s3):
        """Test S_3 -> Z_2 by the sign"""
        mapping = group_service.homomorphism_map(sample_s3, AbelianGroup([2]), [(1,), (0,)])
        assert mapping[(1, 2, 0)] == (0,)
        assert mapping[(0, 2, 1)] == (1,)


@pytest.mark.unit
class TestSolvability:
    """Test suite for derived series and solvable codes"""

    def test_s3_series(self, sample_s3):
        """Test S_3 > A_3 > 1"""
        assert group_service.derived_series(sample_s3) == [6, 3, 1]

    def test_s4_series(self):
        """Test S_4 > A_4 > V_4 > 1"""
        assert group_service.derived_series(PermutationGroup.symmetric(4)) == [24, 12, 4, 1]

    def test_a5_is_perfect(self):
        """Test A_5 equals its commutator subgroup"""
        group = PermutationGroup.alternating(5)
        assert group_service.derived_series(group) == [60]
        assert not group_service.is_solvable(group)

    def test_nilpotent(self, sample_s3):
        """Test D_4 is nilpotent and S_3 is not"""
        d4 = PermutationGroup.from_cycles(4, [[[1, 2, 3, 4]], [[1, 3]]])
        assert group_service.is_nilpotent(d4)
        assert not group_service.is_nilpotent(sample_s3)
        assert group_service.is_nilpotent(AbelianGroup([2, 4]))

    def test_pmsg_size(self):
        """Test k = 10, delta = 1/10 needs 104 elements"""
        report = group_service.pmsg_sample_size(PMSGParams(k=10, delta=Fraction(1, 10)))
        assert report.n == 104
        assert report.within_envelope
        assert report.proof_constant == pytest.approx(19.72, abs=0.01)

    def test_pmsg_ratio_settles(self):
        """Test n / k approaches about 9.86 and stays inside the envelope"""
        report = group_service.pmsg_sample_size(PMSGParams(k=1000, delta=Fraction(1, 10)))
        assert 9.8 <= report.ratio <= 10.5
        assert report.ratio <= report.envelope

    def test_pmsg_delta_range(self):
        """Test delta must lie in (0, 1/3)"""
        with pytest.raises(ValueError):
            PMSGParams(k=4, delta=Fraction(1, 2))

    def test_solvable_code(self, sample_s3):
        """Test a random S_3 code reaches delta 1/10"""
        result = group_service.solvable_random_code(sample_s3, PMSGParams(k=2, delta=Fraction(1, 10)), seed=3)
        assert result.n == 25
        assert len(result.elements) == 25
        assert result.delta >= Fraction(1, 10)
        assert result.delta == group_service.exact_delta([tuple(x) for x in result.elements], sample_s3)

    def test_solvable_code_refuses_a5(self):
        """Test a non-solvable group is refused"""
        with pytest.raises(NotSolvableError):
            group_service.solvable_random_code(PermutationGroup.alternating(5), PMSGParams(k=2, delta=Fraction(1, 10)))


@pytest.mark.unit
class TestTester:
    """Test suite for the one-query tester"""

    def test_rates(self, sample_s3):
        """Test the rejection rate against A_3 tracks the fraction of odd elements"""
        A = [(1, 0, 2), (1, 2, 0), (0, 2, 1), (0, 1, 2)]
        a3 = MaskSubgroup(sample_s3, sample_s3.generated_mask([sample_s3.index_of((1, 2, 0))]))
        report = group_service.simulate_tester(A, sample_s3, a3, trials=4000, seed=1)
        assert report.expected_rate == Fraction(1, 2)
        assert report.empirical_rate == pytest.approx(0.5, abs=0.05)
        assert report.rejections == round(report.empirical_rate * 4000)
