"""
Unit tests for random.py
"""
import numpy as np
import pytest

from app.core.random import _label_words, substream


@pytest.mark.unit
class TestSubstream:
    """Test suite for seeded substreams"""

    def test_same_arguments_same_stream(self):
        first = substream(7, "expander.sample").integers(0, 2 ** 32, size=8)
        second = substream(7, "expander.sample").integers(0, 2 ** 32, size=8)
        assert np.array_equal(first, second)

    def test_labels_are_independent(self):
        first = substream(7, "expander.sample").integers(0, 2 ** 32, size=8)
        second = substream(7, "expander.sample2").integers(0, 2 ** 32, size=8)
        assert not np.array_equal(first, second)

    @pytest.mark.parametrize("seed", [1, 2, 12345])
    def test_negative_seed_differs(self, seed):
        positive = substream(seed, "constructions.syndrome").integers(0, 2 ** 32, size=8)
        negative = substream(-seed, "constructions.syndrome").integers(0, 2 ** 32, size=8)
        assert not np.array_equal(positive, negative)

    def test_non_negative_seed_entropy_unchanged(self):
        expected = np.random.default_rng(np.random.SeedSequence([3, *_label_words("x")]))
        assert np.array_equal(
            substream(3, "x").integers(0, 2 ** 32, size=4),
            expected.integers(0, 2 ** 32, size=4),
        )
