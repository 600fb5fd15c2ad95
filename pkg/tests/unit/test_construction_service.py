"""
Unit tests for construction_service.py
"""
from fractions import Fraction

import pytest

from app.core.exceptions import BudgetExceededError, CertificationError, InvalidInputError
from app.models.graph import BipartiteGraph
from app.models.word import WordSet
from app.schemas.constructions import AmplifyParams, ComposeParams, SpielmanParams, SyndromeParams
from app.services.certify_service import certify_service
from app.services.construction_service import construction_service
from app.services.group_service import group_service
from app.services.word_service import word_service


def _assert_length_bound(A: WordSet, delta_lower: Fraction) -> None:
    """Average reduced length is at least delta k for any certified set"""
    stats = word_service.length_stats(A)
    assert stats.avg_len >= delta_lower * A.rank


@pytest.mark.unit
class TestHadamard:
    """Test suite for Hadamard codes and subset closures"""

    def test_rank_one(self):
        """Test k = 1 gives {1, x1}"""
        assert construction_service.hadamard_code(1).words == ((), (1,))

    def test_rank_two_order(self):
        """Test binary counting order for k = 2"""
        assert construction_service.hadamard_code(2).words == ((), (1,), (2,), (1, 2))

    def test_rank_three(self, sample_hadamard):
        """Test k = 3 has 8 words of length at most 3"""
        assert len(sample_hadamard) == 8
        assert word_service.length_stats(sample_hadamard).max_len == 3
        assert sample_hadamard.closure[0].base == ((1,), (2,), (3,))

    def test_one_word_per_subset(self):
        """Test every subset appears exactly once"""
        A = construction_service.hadamard_code(5)
        assert len(set(A.words)) == 32

    def test_rank_zero_rejected(self):
        """Test k = 0 is an input error"""
        with pytest.raises(InvalidInputError):
            construction_service.hadamard_code(0)

    def test_cap(self, mocker):
        """Test that ranks above the cap raise BudgetExceededError"""
        mocker.patch.object(construction_service, "hadamard_max_k", 4)
        with pytest.raises(BudgetExceededError) as excinfo:
            construction_service.hadamard_code(5)
        assert excinfo.value.budget == 4

    def test_closure_keeps_factor_order(self):
        """Test products follow the position order of the base"""
        A = construction_service.hadamard_closure([(2, 1), (1,)], 2)
        assert A.words == ((), (2, 1), (1,), (2, 1, 1))

    def test_closure_needs_words(self):
        """Test an empty base is rejected"""
        with pytest.raises(InvalidInputError):
            construction_service.hadamard_closure([], 2)


@pytest.mark.unit
class TestRandomSyndrome:
    """Test suite for random syndrome sampling"""

    def test_size_and_levels(self):
        """Test k = 2, c = 1: one level, two words"""
        params = SyndromeParams(k=2, reps_per_level=1, target=Fraction(0), seed=4)
        result = construction_service.random_syndrome_code(params)
        assert params.levels == 1
        assert len(result.code) == 2

    def test_size_formula(self):
        """Test k = 4, c = 3: two levels of 12 words"""
        params = SyndromeParams(k=4, reps_per_level=3, target=Fraction(0))
        result = construction_service.random_syndrome_code(params)
        assert len(result.code) == 3 * 4 * 2

    def test_threshold_default(self):
        """Test the default threshold 1/(12 ceil(log2 k))"""
        assert SyndromeParams(k=16).threshold == Fraction(1, 48)
        assert SyndromeParams(k=5).threshold == Fraction(1, 36)

    def test_deterministic_under_seed(self):
        """Test identical params give identical codes"""
        params = SyndromeParams(k=6, reps_per_level=20, seed=17)
        first = construction_service.random_syndrome_code(params)
        second = construction_service.random_syndrome_code(params)
        assert first.code == second.code
        assert first.attempts == second.attempts

    def test_reaches_threshold(self):
        """Test a moderate c reaches the default threshold with a matching certificate"""
        params = SyndromeParams(k=8, reps_per_level=40, seed=1)
        result = construction_service.random_syndrome_code(params)
        assert result.certificate.delta_lower >= params.threshold
        assert result.certificate.certifying
        _assert_length_bound(result.code, result.certificate.delta_lower)

    def test_failure_carries_best_attempt(self):
        """Test an unreachable target raises with the best attempt attached"""
        params = SyndromeParams(k=4, reps_per_level=1, target=Fraction(1), max_resamples=3)
        with pytest.raises(CertificationError) as excinfo:
            construction_service.random_syndrome_code(params)
        assert isinstance(excinfo.value.best_attempt, WordSet)
        assert excinfo.value.best_value < 1

    def test_rank_one_rejected(self):
        """Test k must be at least 2"""
        with pytest.raises(ValueError):
            SyndromeParams(k=1)


@pytest.mark.unit
class TestAmplify:
    """Test suite for amplification by subset closures"""

    def test_size_formula(self):
        """Test delta = 1/2, k = 2, c = 2 gives 16 words"""
        A = construction_service.hadamard_code(2)
        params = AmplifyParams(delta_in=Fraction(1, 4), groups=2, subset_size=2, max_uncovered=1.0)
        result = construction_service.amplify(A, params)
        assert len(result.code) == 2 * 2 * 4
        assert result.subset_size == 2
        assert len(result.code.closure) == 4

    def test_subset_size_from_delta(self):
        """Test d = ceil(1/delta)"""
        assert AmplifyParams(delta_in=Fraction(1, 3)).d == 3
        assert AmplifyParams(delta_in=Fraction(2, 5)).d == 3

    def test_certificate_reaches_target(self, sample_three_words):
        """Test an amplified set certifies at least the Chernoff target"""
        params = AmplifyParams(delta_in=Fraction(1, 2), groups=8, seed=3)
        result = construction_service.amplify(sample_three_words, params)
        assert result.certificate.certifying
        assert float(result.certificate.delta_lower) >= result.target
        assert result.certificate.delta_lower <= group_service.exact_delta_vector_space(result.code, 2)
        _assert_length_bound(result.code, result.certificate.delta_lower)

    def test_input_below_delta_rejected(self, sample_basis):
        """Test an input certified below delta_in is rejected"""
        with pytest.raises(InvalidInputError):
            construction_service.amplify(sample_basis, AmplifyParams(delta_in=Fraction(1, 2)))

    def test_budget(self, sample_three_words, mocker):
        """Test the output size is checked before sampling"""
        mocker.patch.object(construction_service, "size_budget", 10)
        with pytest.raises(BudgetExceededError):
            construction_service.amplify(sample_three_words, AmplifyParams(delta_in=Fraction(1, 2), groups=2))

    def test_delta_out_of_range(self):
        """Test delta_in must lie in (0, 1]"""
        with pytest.raises(ValueError):
            AmplifyParams(delta_in=Fraction(0))


@pytest.mark.unit
class TestCompose:
    """Test suite for iterative composition"""

    def test_one_level(self):
        """Test t = 1 is a syndrome code followed by closures"""
        params = ComposeParams(reps_per_level=30, groups=2, subset_size=3, max_uncovered=1.0, seed=2)
        result = construction_service.iterative_compose(4, 1, params)
        assert result.t == 1
        assert result.leaves == 2 * 4
        assert result.size == len(result.code) == result.leaves * 2 ** 3
        assert result.levels[0].rank == 4

    def test_two_levels_reuse_maps(self):
        """Test t = 2 reports one level per round and a product structural bound"""
        params = ComposeParams(reps_per_level=30, groups=1, subset_size=2, max_uncovered=1.0, seed=5)
        result = construction_service.iterative_compose(4, 2, params)
        assert len(result.levels) == 2
        assert result.levels[1].rank == 2
        assert result.leaves == 4 * 2
        expected = Fraction(1, 2) * result.levels[0].covered_fraction * result.levels[1].covered_fraction
        assert result.structural_delta == expected
        assert result.target == pytest.approx(0.5 * (1 - 2 / 2.718281828459045) ** 2)

    def test_predicted_size_formula(self):
        """Test the product size formula for one level"""
        assert construction_service.predicted_compose_size(4, 1, 61, 12) == pytest.approx(61 * 4 * 2 ** 24)

    def test_budget(self):
        """Test a composition above the size budget is refused"""
        params = ComposeParams(reps_per_level=30, groups=4, subset_size=3, max_uncovered=1.0, size_budget=16)
        with pytest.raises(BudgetExceededError):
            construction_service.iterative_compose(4, 1, params)

    def test_invalid_arguments(self):
        """Test t and k bounds"""
        params = ComposeParams()
        with pytest.raises(InvalidInputError):
            construction_service.iterative_compose(4, 0, params)
        with pytest.raises(InvalidInputError):
            construction_service.iterative_compose(1, 1, params)


@pytest.mark.unit
class TestSpielman:
    """Test suite for the doubling chain"""

    def test_step_shape(self):
        """Test k = 2 with hand-built graphs: 16 words, basis first"""
        A = WordSet(rank=2, words=WordSet.basis(2).words * 4)
        G2k = BipartiteGraph(n=4, m=2, d=2, adj=((1, 2), (1, 2), (1, 2), (1, 2)))
        G4k = BipartiteGraph(n=8, m=4, d=1, adj=((1,), (2,), (3,), (4,), (1,), (2,), (3,), (4,)))
        result = construction_service.spielman_step(A, G2k, G4k)
        assert result.rank == 4
        assert len(result) == 16
        assert result.words[:4] == WordSet.basis(4).words

    def test_step_middle_block(self):
        """Test E = A(D) with D the neighbourhood products of the basis"""
        A = WordSet(rank=1, words=((1,),) * 4)
        G2k = BipartiteGraph(n=2, m=1, d=1, adj=((1,), (1,)))
        G4k = BipartiteGraph(n=4, m=2, d=1, adj=((1,), (1,), (2,), (2,)))
        result = construction_service.spielman_step(A, G2k, G4k)
        assert result.words[2:6] == ((1, 2),) * 4
        assert result.words[6:] == ((1, 2, 1, 2),) * 2

    def test_step_size_mismatch(self):
        """Test the input must hold 4k words"""
        A = WordSet.basis(2)
        G2k = BipartiteGraph(n=4, m=2, d=1, adj=((1,), (2,), (1,), (2,)))
        G4k = BipartiteGraph(n=8, m=4, d=1, adj=tuple((i % 4 + 1,) for i in range(8)))
        with pytest.raises(InvalidInputError):
            construction_service.spielman_step(A, G2k, G4k)

    def test_step_graph_mismatch(self):
        """Test graph shapes are checked"""
        A = WordSet(rank=2, words=WordSet.basis(2).words * 4)
        wrong = BipartiteGraph(n=3, m=2, d=1, adj=((1,), (2,), (1,)))
        G4k = BipartiteGraph(n=8, m=4, d=1, adj=tuple((i % 4 + 1,) for i in range(8)))
        with pytest.raises(InvalidInputError):
            construction_service.spielman_step(A, wrong, G4k)

    def test_chain_zero_steps(self):
        """Test steps = 0 returns four copies of the basis with F_2 delta 1/k0"""
        result = construction_service.spielman_chain(SpielmanParams(k0=4, steps=0))
        assert len(result.code) == 16
        assert result.base_quotient_delta == Fraction(1, 4)
        assert result.steps == []

    def test_chain_one_step(self):
        """Test k0 = 4, one step: rank 8, size 32, verified graphs"""
        result = construction_service.spielman_chain(SpielmanParams(k0=4, steps=1, seed=3))
        assert result.code.rank == 8
        assert len(result.code) == 32
        assert result.code.words[:8] == WordSet.basis(8).words
        step = result.steps[0]
        assert step.left_graph.passed and step.right_graph.passed
        assert step.quotient_delta is not None
        certify = certify_service.certified_delta(result.code)
        _assert_length_bound(result.code, certify.delta_lower)

    def test_chain_graph_backs_off(self, mocker):
        """Test the chain tries s_max first and settles on the next radius that verifies"""
        graph = BipartiteGraph(n=8, m=4, d=1, adj=tuple((i % 4 + 1,) for i in range(8)))
        sampler = mocker.patch(
            "app.services.construction_service.expander_service.sample_verified",
            side_effect=[CertificationError("radius 4"), (graph, "cert")],
        )
        params = SpielmanParams(k0=4, s_max=4, alpha=Fraction(1, 32))
        assert construction_service._chain_graph(8, 4, params, "test") == (graph, "cert")
        radii = [call.args[3] for call in sampler.call_args_list]
        assert radii == [Fraction(4, 8), Fraction(3, 8)]
        assert sampler.call_args_list[0].kwargs["max_resamples"] == params.radius_resamples

    def test_chain_graph_floor(self, mocker):
        """Test the floor radius max(1, floor(alpha n)) uses the full resample budget"""
        graph = BipartiteGraph(n=64, m=32, d=1, adj=tuple((i % 32 + 1,) for i in range(64)))
        sampler = mocker.patch(
            "app.services.construction_service.expander_service.sample_verified",
            side_effect=[CertificationError("4"), CertificationError("3"), (graph, "cert")],
        )
        params = SpielmanParams(k0=16, s_max=4, alpha=Fraction(1, 32), max_resamples=7)
        construction_service._chain_graph(64, 32, params, "test")
        last = sampler.call_args_list[-1]
        assert last.args[3] == Fraction(2, 64)
        assert last.kwargs["max_resamples"] == 7

    def test_chain_uses_unique_neighbours(self):
        """Test one step verifies both graphs for unique neighbours"""
        result = construction_service.spielman_chain(SpielmanParams(k0=4, steps=1, seed=3))
        step = result.steps[0]
        for cert in (step.left_graph, step.right_graph):
            assert cert.criterion.value == "unique"
            assert 1 <= cert.s_checked <= 4
