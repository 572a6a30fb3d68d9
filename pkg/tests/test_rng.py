"""Named substream determinism and independence."""

import numpy as np
import pytest

from tlspectro.rng import substream


def test_same_path_same_stream():
    a = substream(42, "noise", 3).standard_normal(16)
    b = substream(42, "noise", 3).standard_normal(16)
    np.testing.assert_array_equal(a, b)


def test_different_paths_differ():
    a = substream(42, "noise", 3).standard_normal(16)
    b = substream(42, "noise", 4).standard_normal(16)
    c = substream(42, "jitter", 3).standard_normal(16)
    assert not np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_different_master_seeds_differ():
    a = substream(1, "x").standard_normal(8)
    b = substream(2, "x").standard_normal(8)
    assert not np.array_equal(a, b)


def test_counter_based_bit_generator():
    gen = substream(0, "anything")
    assert type(gen.bit_generator).__name__ == "Philox"


def test_negative_seed_rejected():
    with pytest.raises(ValueError):
        substream(-1, "x")
