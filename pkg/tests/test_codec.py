import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from semcomm.channel import DiscreteChannel, bsc
from semcomm.codec import (
    HAMMING_G,
    DecodeResult,
    SyntacticCodec,
    hamming74_decode,
    hamming74_encode,
    repetition_decode,
    semantic_error_detect,
    semantic_map_decode,
    syntactic_decode,
)
from semcomm.errors import ConfigError, FramingError, NumericError
from semcomm.language import MessageSpace, StochasticMapping, build_sentence_language

from oracles import bayes_posterior, hamming_distance

DATA = [np.array(d, dtype=np.uint8) for d in itertools.product((0, 1), repeat=4)]
CODEWORDS = [tuple(int(v) for v in (d @ HAMMING_G) % 2) for d in DATA]


def nearest_codeword_data(received):
    dists = [hamming_distance(received, c) for c in CODEWORDS]
    return tuple(DATA[int(np.argmin(dists))])


def test_hamming_minimum_distance_is_three():
    d = min(hamming_distance(a, b) for a, b in itertools.combinations(CODEWORDS, 2))
    assert d == 3


def test_hamming_corrects_every_single_error():
    for data in DATA:
        cw = hamming74_encode(data)
        for pos in range(7):
            r = cw.copy()
            r[pos] ^= 1
            np.testing.assert_array_equal(hamming74_decode(r), data)


def test_hamming_matches_exhaustive_nearest_codeword():
    received = np.array(list(itertools.product((0, 1), repeat=7)), dtype=np.uint8)
    decoded = hamming74_decode(received)
    for r, d in zip(received, decoded):
        assert tuple(d) == nearest_codeword_data(tuple(r))


def test_hamming_double_error_miscorrects():
    for data in DATA:
        cw = hamming74_encode(data)
        for i, j in itertools.combinations(range(7), 2):
            r = cw.copy()
            r[[i, j]] ^= 1
            assert not np.array_equal(hamming74_decode(r), data)


def test_hamming_framing():
    with pytest.raises(FramingError):
        hamming74_decode(np.zeros(8, dtype=np.uint8))


def test_repetition_majority():
    np.testing.assert_array_equal(repetition_decode(np.array([1, 1, 0, 0, 0, 1]), 3), [1, 0])
    with pytest.raises(ConfigError):
        SyntacticCodec(("a", "b"), channel_code="repetition", repetition=2)


@pytest.mark.parametrize("source", ["fixed", "huffman"])
@pytest.mark.parametrize("channel", ["none", "repetition", "hamming74"])
def test_codec_round_trip(source, channel):
    symbols = tuple("abcde")
    codec = SyntacticCodec(symbols, source, channel, symbol_probs=(0.4, 0.2, 0.2, 0.1, 0.1))
    seq = list("abcdeedcba")
    assert syntactic_decode(codec.encode(seq), codec, len(seq)) == seq


def test_fixed_code_rejects_unused_codeword():
    codec = SyntacticCodec(tuple("abc"))  # 2-bit code, "11" unused
    with pytest.raises(FramingError):
        codec.decode(np.array([1, 1], dtype=np.uint8))


def test_huffman_truncated_stream():
    codec = SyntacticCodec(tuple("abcd"), "huffman", symbol_probs=(0.5, 0.25, 0.125, 0.125))
    bits = codec.encode(list("dd"))
    with pytest.raises(FramingError):
        codec.decode(bits[:-1], 2)


def two_codeword_setup():
    space = MessageSpace.uniform(["m00", "m11"])
    return space, StochasticMapping.deterministic(["00", "11"])


def test_map_tie_goes_to_lowest_index():
    space, mapping = two_codeword_setup()
    res = semantic_map_decode("01", space, bsc(0.1), mapping=mapping)
    # enumeration: 0.5 * 0.9 * 0.1 for both messages
    assert res.message_hat == "m00" and res.index == 0
    np.testing.assert_allclose(res.posterior, [0.5, 0.5], atol=1e-12)
    res = semantic_map_decode("10", space, bsc(0.1), mapping=mapping)
    assert res.message_hat == "m00"


def test_map_confident_decode():
    space, mapping = two_codeword_setup()
    res = semantic_map_decode("00", space, bsc(0.1), mapping=mapping)
    assert res.message_hat == "m00"
    assert res.confidence == pytest.approx(0.81 / 0.82, abs=1e-12)
    assert res.syntactic_bits_in_error == 0
    res = semantic_map_decode("11", space, bsc(0.0), mapping=mapping)
    assert res.message_hat == "m11" and res.confidence == 1.0


def test_map_zero_likelihood():
    space, mapping = two_codeword_setup()
    with pytest.raises(NumericError):
        semantic_map_decode("01", space, bsc(0.0), mapping=mapping)


def test_map_requires_mapping_for_bare_space():
    space, _ = two_codeword_setup()
    with pytest.raises(ConfigError):
        semantic_map_decode("00", space, bsc(0.1))


@settings(max_examples=80, deadline=None)
@given(st.integers(1, 8), st.integers(1, 5), st.integers(2, 3), st.integers(0, 2**32 - 1))
def test_posterior_matches_bayes_enumeration(k, nx, n_in, seed):
    rng = np.random.default_rng(seed)
    inputs = tuple(f"i{i}" for i in range(n_in))
    outputs = ("u", "v", "w")
    channel = DiscreteChannel(inputs, outputs, rng.dirichlet(np.ones(3), size=n_in))
    # symbols are length-2 channel input sequences
    alphabet = [tuple(rng.choice(inputs, 2)) for _ in range(nx)]
    alphabet = list(dict.fromkeys(alphabet))
    cond = rng.dirichlet(np.ones(len(alphabet)), size=k)
    space = MessageSpace(tuple(range(k)), rng.dirichlet(np.ones(k)), {i: i for i in range(k)})
    mapping = StochasticMapping(tuple(alphabet), cond)
    y = tuple(rng.choice(outputs, 2))
    t = {(a, b): channel.transition[inputs.index(a), outputs.index(b)] for a in inputs for b in outputs}
    lik = [t[x[0], y[0]] * t[x[1], y[1]] for x in alphabet]
    expected = bayes_posterior(list(space.prior), cond.tolist(), lik)
    res = semantic_map_decode(y, space, channel, mapping=mapping)
    np.testing.assert_allclose(res.posterior, expected, atol=1e-9)
    assert abs(res.posterior.sum() - 1) <= 1e-9
    assert res.confidence == res.posterior.max()
    best = max(expected)
    assert res.index == min(i for i, p in enumerate(expected) if p >= best - 1e-12)


def test_sentence_decode_with_codec():
    lang = build_sentence_language({"slots": [["a", "b"], ["c", "d"]], "vocabulary": list("abcd")})
    codec = SyntacticCodec(lang.vocabulary, channel_code="hamming74")
    cw = codec.encode(("b", "d"))
    res = semantic_map_decode(cw, lang, bsc(0.05), codec)
    assert res.message_hat == ("b", "d") and res.syntactic_valid and res.syntactic_hat == ("b", "d")
    # two flips inside one Hamming block: the syntactic decoder miscorrects
    y = cw.copy()
    y[[0, 1]] ^= 1
    res = semantic_map_decode(y, lang, bsc(0.05), codec)
    assert res.syntactic_hat != ("b", "d")
    assert res.syntactic_bits_in_error == 2


def result(confidence, valid):
    return DecodeResult("m", 0, np.array([confidence, 1 - confidence]), confidence, 0, ("m",), valid)


def test_error_detect_rule():
    assert not semantic_error_detect(result(0.1, True), tau=0.9)
    assert not semantic_error_detect(result(0.99, False), tau=0.9)
    assert semantic_error_detect(result(0.55, False), tau=0.9)
    assert not semantic_error_detect(result(0.55, False), tau=0.0)
    with pytest.raises(ConfigError):
        semantic_error_detect(result(0.5, False), tau=1.5)


def test_error_detect_uses_language_validity():
    lang = build_sentence_language({"slots": [["a"], ["b"]]})
    res = DecodeResult(("a", "b"), 0, np.array([1.0]), 0.2, 0, ("b", "a"), True)
    assert semantic_error_detect(res, lang, 0.9)
