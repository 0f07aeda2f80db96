import math

import numpy as np
import pytest

from semcomm.channel import (
    DiscreteChannel,
    FadingProfile,
    bsc,
    db_to_linear,
    identity_channel,
    q_function,
    snr_to_crossover,
    transmit,
)
from semcomm.errors import ConfigError, InputError

from oracles import q_function as q_oracle

Q_SQRT2 = 0.0786496035251426  # Q(sqrt 2), frozen from math.erfc


def test_bsc_matrices():
    np.testing.assert_array_equal(bsc(0.0).transition, np.eye(2))
    np.testing.assert_array_equal(bsc(0.5).transition, np.full((2, 2), 0.5))
    np.testing.assert_allclose(bsc(0.1).transition, [[0.9, 0.1], [0.1, 0.9]])
    for bad in (-0.01, 0.51):
        with pytest.raises(ConfigError):
            bsc(bad)


def test_channel_rows_validated():
    with pytest.raises(ConfigError):
        DiscreteChannel(("a",), ("u", "v"), np.array([[0.5, 0.6]]))


def test_snr_to_crossover_points():
    assert snr_to_crossover(0.0) == 0.5
    assert snr_to_crossover(1e4) <= 1e-300
    assert q_oracle(math.sqrt(2)) == pytest.approx(Q_SQRT2, rel=1e-13)
    assert snr_to_crossover(db_to_linear(0.0)) == pytest.approx(Q_SQRT2, rel=1e-12)


def test_q_function_accuracy():
    xs = np.linspace(0, 8, 41)
    ref = np.array([q_oracle(x) for x in xs])
    np.testing.assert_allclose(q_function(xs), ref, rtol=1e-12)


def test_crossover_strictly_decreasing():
    eps = snr_to_crossover(db_to_linear(np.linspace(-20, 12, 200)))
    assert np.all(np.diff(eps) < 0)


def test_identity_channel_passes_through():
    ch = identity_channel(["a", "b", "c"])
    seq = list("abcabccba")
    assert transmit(ch, seq, 3) == seq


def test_transmit_deterministic_and_validated():
    ch = bsc(0.3)
    bits = [0, 1] * 500
    assert transmit(ch, bits, 11) == transmit(ch, bits, 11)
    with pytest.raises(InputError):
        transmit(ch, [0, 2], 0)


def test_half_crossover_flip_rate():
    n = 10**6
    rng = np.random.default_rng(5)
    bits = rng.integers(0, 2, n)
    y = np.array(transmit(bsc(0.5), bits.tolist(), 17), dtype=int)
    rate = np.mean(y != bits)
    # binomial oracle: sd = 0.0005, so +-0.002 is 4 sigma
    assert abs(rate - 0.5) <= 0.002


def test_empirical_transition_frequencies():
    rng = np.random.default_rng(9)
    t = rng.dirichlet(np.ones(4), size=3)
    ch = DiscreteChannel(("a", "b", "c"), ("w", "x", "y", "z"), t)
    n = 10**6
    xs = rng.integers(0, 3, n)
    ys = np.array(transmit(ch, [ch.inputs[i] for i in xs], 23))
    for i in range(3):
        sel = ys[xs == i]
        for j, out in enumerate(ch.outputs):
            p = t[i, j]
            freq = np.mean(sel == out)
            assert abs(freq - p) <= 3 * math.sqrt(p * (1 - p) / sel.size) + 1e-12


def test_fading_profiles():
    rng = np.random.default_rng(0)
    flat = FadingProfile("none", 2.0)
    np.testing.assert_allclose(flat.crossover_matrix(3, 5, rng), snr_to_crossover(2.0))
    ray = FadingProfile("rayleigh", 2.0, block_length=2)
    eps = ray.crossover_matrix(4, 5, rng)
    assert eps.shape == (4, 5)
    # blocks of two uses share one fade
    np.testing.assert_array_equal(eps[:, 0], eps[:, 1])
    np.testing.assert_array_equal(eps[:, 2], eps[:, 3])
    per_sentence = FadingProfile("rayleigh", 2.0).crossover_matrix(4, 7, rng)
    assert np.all(per_sentence == per_sentence[:, :1])
    draws = FadingProfile("rayleigh", 3.0).snr_blocks(200_000, np.random.default_rng(1))
    assert draws.mean() == pytest.approx(3.0, rel=0.02)
    with pytest.raises(ConfigError):
        FadingProfile("rician", 1.0)
    with pytest.raises(ConfigError):
        FadingProfile("none", 0.0)
    with pytest.raises(ConfigError):
        FadingProfile("rayleigh", 1.0, block_length=0)
