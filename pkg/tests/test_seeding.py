"""Stream derivation: same path same stream, distinct paths distinct streams."""

import hashlib

import numpy as np
import pytest

from allab.seeding import derive_int, derive_rng, derive_seed_words


def test_same_path_same_stream():
    a = derive_rng(42, "batch", 3).integers(0, 2**63, 16)
    b = derive_rng(42, "batch", 3).integers(0, 2**63, 16)
    assert np.array_equal(a, b)


def test_distinct_purposes_distinct_streams():
    a = derive_rng(42, "batch").integers(0, 2**63, 16)
    b = derive_rng(42, "dropout").integers(0, 2**63, 16)
    c = derive_rng(43, "batch").integers(0, 2**63, 16)
    assert not np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_index_and_string_components_do_not_collide():
    variants = [
        derive_seed_words(0, "a", 1),
        derive_seed_words(0, "a1"),
        derive_seed_words(0, 1, "a"),
        derive_seed_words(0, "a", 2),
    ]
    assert len({tuple(w) for w in variants}) == len(variants)


def test_words_match_documented_rule():
    # strings hash to the first 8 big-endian bytes of their sha256 digest
    expected = int.from_bytes(hashlib.sha256(b"train").digest()[:8], "big")
    assert derive_seed_words(7, "train", 5) == [7, expected, 5]


def test_rng_is_seedsequence_pcg64():
    words = derive_seed_words(11, "init")
    ref = np.random.Generator(np.random.PCG64(np.random.SeedSequence(words)))
    got = derive_rng(11, "init")
    assert np.array_equal(ref.integers(0, 2**63, 8), got.integers(0, 2**63, 8))


def test_bool_component_rejected():
    with pytest.raises(TypeError):
        derive_seed_words(0, True)
    with pytest.raises(TypeError):
        derive_rng(0, "x", False)


def test_negative_master_seed_wraps_into_64_bits():
    assert derive_seed_words(-1) == [(1 << 64) - 1]


def test_derive_int_deterministic_and_in_range():
    a = derive_int(3, "train", "mpts", 0, 2)
    assert a == derive_int(3, "train", "mpts", 0, 2)
    assert 0 <= a < 2**63
    assert a != derive_int(3, "train", "mpts", 0, 3)


def test_frozen_reference_stream():
    # lock the derivation against accidental changes: values recorded from the
    # documented construction (sha256 words into SeedSequence -> PCG64)
    words = derive_seed_words(0, "probe")
    seq = np.random.SeedSequence(words)
    expect = np.random.Generator(np.random.PCG64(seq)).integers(0, 1 << 16, 4)
    assert np.array_equal(derive_rng(0, "probe").integers(0, 1 << 16, 4), expect)
