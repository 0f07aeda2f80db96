"""Syntactic source/channel coding and the semantic MAP decoder."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Hashable, Sequence

import numpy as np
from scipy.special import logsumexp

from .channel import DiscreteChannel
from .errors import ConfigError, FramingError, NumericError
from .huffman import huffman_code
from .language import MessageSpace, SentenceLanguage, StochasticMapping

DEFAULT_TAU = 0.9
TIE_RTOL = 1e-12

# Systematic Hamming(7,4): codeword = d1 d2 d3 d4 p1 p2 p3
HAMMING_G = np.array(
    [
        [1, 0, 0, 0, 1, 1, 0],
        [0, 1, 0, 0, 1, 0, 1],
        [0, 0, 1, 0, 0, 1, 1],
        [0, 0, 0, 1, 1, 1, 1],
    ],
    dtype=np.uint8,
)
HAMMING_H = np.array(
    [
        [1, 1, 0, 1, 1, 0, 0],
        [1, 0, 1, 1, 0, 1, 0],
        [0, 1, 1, 1, 0, 0, 1],
    ],
    dtype=np.uint8,
)
_SYNDROME_WEIGHTS = np.array([4, 2, 1])


def _syndrome_table() -> np.ndarray:
    """Syndrome value -> bit position to flip (-1 for the zero syndrome)."""
    table = np.full(8, -1, dtype=np.int64)
    for pos in range(7):
        e = np.zeros(7, dtype=np.uint8)
        e[pos] = 1
        s = int((HAMMING_H @ e % 2) @ _SYNDROME_WEIGHTS)
        table[s] = pos
    return table


SYNDROME_TABLE = _syndrome_table()


def hamming74_encode(info: np.ndarray) -> np.ndarray:
    """Encode a (..., 4k) bit array into (..., 7k)."""
    info = np.asarray(info, dtype=np.uint8)
    blocks = info.reshape(info.shape[:-1] + (-1, 4))
    coded = (blocks.astype(np.int64) @ HAMMING_G) % 2
    return coded.astype(np.uint8).reshape(info.shape[:-1] + (-1,))


def hamming74_decode(coded: np.ndarray) -> np.ndarray:
    """Syndrome decoding of a (..., 7k) bit array; returns (..., 4k) data bits."""
    coded = np.asarray(coded, dtype=np.uint8)
    if coded.shape[-1] % 7:
        raise FramingError(f"{coded.shape[-1]} bits is not a whole number of Hamming blocks")
    blocks = coded.reshape(coded.shape[:-1] + (-1, 7)).copy()
    syndrome = ((blocks.astype(np.int64) @ HAMMING_H.T) % 2) @ _SYNDROME_WEIGHTS
    pos = SYNDROME_TABLE[syndrome]
    hit = pos >= 0
    flat = blocks.reshape(-1, 7)
    rows = np.flatnonzero(hit.ravel())
    flat[rows, pos.ravel()[rows]] ^= 1
    return blocks[..., :4].reshape(coded.shape[:-1] + (-1,))


def repetition_encode(info: np.ndarray, r: int) -> np.ndarray:
    return np.repeat(np.asarray(info, dtype=np.uint8), r, axis=-1)


def repetition_decode(coded: np.ndarray, r: int) -> np.ndarray:
    coded = np.asarray(coded, dtype=np.uint8)
    if coded.shape[-1] % r:
        raise FramingError(f"{coded.shape[-1]} bits is not a multiple of the repetition factor {r}")
    votes = coded.reshape(coded.shape[:-1] + (-1, r)).sum(axis=-1)
    return (2 * votes > r).astype(np.uint8)


@dataclass(frozen=True)
class SyntacticCodec:
    """Source code over ``symbols`` followed by a binary channel code.

    ``source_code`` is ``"fixed"`` (ceil(log2 n)-bit indices in symbol order)
    or ``"huffman"`` (built from ``symbol_probs``). ``channel_code`` is
    ``"none"``, ``"repetition"`` (odd factor ``repetition``) or ``"hamming74"``.
    """

    symbols: tuple[Hashable, ...]
    source_code: str = "fixed"
    channel_code: str = "none"
    repetition: int = 3
    symbol_probs: tuple[float, ...] | None = None
    codebook: dict = field(init=False, repr=False, compare=False)
    width: int = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        symbols = tuple(self.symbols)
        if not symbols or len(set(symbols)) != len(symbols):
            raise ConfigError("codec needs a non-empty list of distinct symbols")
        object.__setattr__(self, "symbols", symbols)
        if self.source_code == "fixed":
            width = math.ceil(math.log2(len(symbols))) if len(symbols) > 1 else 0
            book = {s: format(i, f"0{width}b") if width else "" for i, s in enumerate(symbols)}
        elif self.source_code == "huffman":
            probs = self.symbol_probs
            if probs is None:
                probs = [1.0 / len(symbols)] * len(symbols)
            if len(probs) != len(symbols):
                raise ConfigError("symbol_probs length does not match symbols")
            book = huffman_code(dict(zip(symbols, probs)))
            width = 0
        else:
            raise ConfigError(f"unknown source code {self.source_code!r}")
        if self.channel_code not in ("none", "repetition", "hamming74"):
            raise ConfigError(f"unknown channel code {self.channel_code!r}")
        if self.channel_code == "repetition" and (self.repetition < 1 or self.repetition % 2 == 0):
            raise ConfigError("repetition factor must be a positive odd integer")
        object.__setattr__(self, "codebook", book)
        object.__setattr__(self, "width", width)

    # -- source layer -------------------------------------------------
    def source_encode(self, seq: Sequence[Hashable]) -> np.ndarray:
        try:
            bits = "".join(self.codebook[s] for s in seq)
        except KeyError as exc:
            raise ConfigError(f"symbol {exc.args[0]!r} not in codec alphabet") from None
        return np.frombuffer(bits.encode(), dtype=np.uint8) - ord("0") if bits else np.zeros(0, np.uint8)

    def source_decode(self, bits: np.ndarray, n_symbols: int | None = None) -> list:
        bits = np.asarray(bits, dtype=np.uint8)
        if self.source_code == "fixed":
            return self._fixed_decode(bits, n_symbols)
        return self._prefix_decode(bits, n_symbols)

    def _fixed_decode(self, bits: np.ndarray, n_symbols: int | None) -> list:
        w = self.width
        if w == 0:
            return [self.symbols[0]] * (n_symbols or 0)
        if n_symbols is None:
            if bits.size % w:
                raise FramingError("bit count is not a multiple of the symbol width")
            n_symbols = bits.size // w
        if bits.size < n_symbols * w:
            raise FramingError("bit stream too short for the requested symbol count")
        idx = bits[: n_symbols * w].reshape(n_symbols, w).astype(np.int64) @ (1 << np.arange(w - 1, -1, -1))
        if np.any(idx >= len(self.symbols)):
            raise FramingError("unused fixed-length codeword received")
        return [self.symbols[i] for i in idx]

    def _prefix_decode(self, bits: np.ndarray, n_symbols: int | None) -> list:
        inverse = {c: s for s, c in self.codebook.items()}
        if "" in inverse:
            return [inverse[""]] * (n_symbols or 0)
        out, cur = [], ""
        for b in bits:
            if n_symbols is not None and len(out) == n_symbols:
                break
            cur += "1" if b else "0"
            if cur in inverse:
                out.append(inverse[cur])
                cur = ""
        if n_symbols is not None and len(out) < n_symbols:
            raise FramingError("bit stream ended inside a codeword")
        if n_symbols is None and cur:
            raise FramingError("trailing bits do not form a codeword")
        return out

    # -- channel layer ------------------------------------------------
    @property
    def info_block(self) -> int:
        return {"none": 1, "repetition": 1, "hamming74": 4}[self.channel_code]

    @property
    def code_block(self) -> int:
        return {"none": 1, "repetition": self.repetition, "hamming74": 7}[self.channel_code]

    def channel_encode(self, info: np.ndarray) -> np.ndarray:
        info = np.asarray(info, dtype=np.uint8)
        pad = (-info.shape[-1]) % self.info_block
        if pad:
            info = np.concatenate([info, np.zeros(info.shape[:-1] + (pad,), np.uint8)], axis=-1)
        if self.channel_code == "hamming74":
            return hamming74_encode(info)
        if self.channel_code == "repetition":
            return repetition_encode(info, self.repetition)
        return info

    def channel_decode(self, coded: np.ndarray) -> np.ndarray:
        """Nearest-codeword decoding per block (info bits, padding included)."""
        if self.channel_code == "hamming74":
            return hamming74_decode(coded)
        if self.channel_code == "repetition":
            return repetition_decode(coded, self.repetition)
        return np.asarray(coded, dtype=np.uint8)

    def encode(self, seq: Sequence[Hashable]) -> np.ndarray:
        return self.channel_encode(self.source_encode(seq))

    def decode(self, coded: np.ndarray, n_symbols: int | None = None) -> list:
        return self.source_decode(self.channel_decode(coded), n_symbols)

    def coded_length(self, n_info_bits: int) -> int:
        blocks = -(-n_info_bits // self.info_block)
        return blocks * self.code_block


def syntactic_decode(y_bits, codec: SyntacticCodec, n_symbols: int | None = None) -> list:
    return codec.decode(_as_bits(y_bits), n_symbols)


def _as_bits(y) -> np.ndarray:
    if isinstance(y, str):
        return np.frombuffer(y.encode(), dtype=np.uint8) - ord("0")
    return np.asarray(y, dtype=np.uint8)


@dataclass(frozen=True)
class DecodeResult:
    message_hat: Hashable
    index: int
    posterior: np.ndarray
    confidence: float
    syntactic_bits_in_error: int
    syntactic_hat: tuple | None = None
    syntactic_valid: bool = False


def _resolve(language, mapping) -> tuple[MessageSpace, StochasticMapping]:
    if isinstance(language, SentenceLanguage):
        return language.message_space(), language.mapping() if mapping is None else mapping
    if mapping is None:
        raise ConfigError("a stochastic mapping is required with a bare message space")
    mapping.check_space(language)
    return language, mapping


def argmax_lowest(scores: np.ndarray) -> int:
    """Index of the maximum; near-ties within TIE_RTOL go to the lowest index."""
    best = np.max(scores)
    tol = TIE_RTOL * max(abs(best), 1.0)
    return int(np.flatnonzero(scores >= best - tol)[0])


def semantic_map_decode(
    y,
    language: SentenceLanguage | MessageSpace,
    channel: DiscreteChannel,
    codec: SyntacticCodec | None = None,
    mapping: StochasticMapping | None = None,
) -> DecodeResult:
    """MAP estimate of the message: argmax_m sum_x p(y|x) p(x|m) p(m).

    With a codec, each symbol x is mapped through ``codec.encode`` before the
    channel; otherwise x itself must be a sequence of channel inputs.
    Transmissions of a different length from ``y`` have zero likelihood.
    """
    space, mapping = _resolve(language, mapping)
    y_seq = list(_as_bits(y)) if codec is not None else list(y)
    y_idx = channel.output_indices(y_seq)
    with np.errstate(divide="ignore"):
        log_t = np.log(channel.transition)
        log_cond = np.log(mapping.cond)
        log_prior = np.log(space.prior)

    codewords = [codec.encode(x) if codec is not None else _channel_sequence(x, channel) for x in mapping.alphabet]
    n_in, n_out = log_t.shape
    log_lik = np.full(len(codewords), -np.inf)
    for j, cw in enumerate(codewords):
        if len(cw) != len(y_idx):
            continue
        counts = np.zeros((n_in, n_out))
        np.add.at(counts, (channel.input_indices(cw), y_idx), 1)
        used = counts > 0
        log_lik[j] = np.sum(counts[used] * log_t[used]) if np.all(np.isfinite(log_t[used])) else -np.inf

    joint = log_cond + log_lik[None, :]
    scores = log_prior + logsumexp(joint, axis=1)
    total = logsumexp(scores)
    if not np.isfinite(total):
        raise NumericError("received sequence has zero likelihood under every message")
    posterior = np.exp(scores - total)
    k = argmax_lowest(scores)

    best_x = int(np.argmax(joint[k]))
    cw = codewords[best_x]
    sent = np.asarray(channel.inputs)[channel.input_indices(cw)]
    received = np.asarray(channel.outputs)[y_idx]
    bits_in_error = int(np.sum(sent != received))

    if codec is not None:
        n_symbols = language.length if isinstance(language, SentenceLanguage) else None
        try:
            hat = tuple(codec.decode(_as_bits(y), n_symbols))
        except FramingError:
            hat = None
    else:
        per_use = np.argmax(channel.transition[:, y_idx], axis=0)
        hat = tuple(channel.inputs[i] for i in per_use)
    if isinstance(language, SentenceLanguage):
        valid = hat is not None and language.is_valid(hat)
    else:
        valid = hat is not None and any(
            len(cw) == len(hat) and all(str(a) == str(b) for a, b in zip(cw, hat)) for cw in codewords
        )

    return DecodeResult(
        message_hat=space.messages[k],
        index=k,
        posterior=posterior,
        confidence=float(posterior[k]),
        syntactic_bits_in_error=bits_in_error,
        syntactic_hat=hat,
        syntactic_valid=bool(valid),
    )


def _channel_sequence(x, channel: DiscreteChannel) -> list:
    """A symbol that is itself a channel input is one channel use; otherwise iterate it."""
    if isinstance(x, str) and x in channel.inputs:
        return [x]
    if not isinstance(x, (str, tuple, list, np.ndarray)):
        return [x]
    return list(x)


def semantic_error_detect(
    result: DecodeResult, language: SentenceLanguage | None = None, tau: float = DEFAULT_TAU
) -> bool:
    """Request a retransmission?

    True when the syntactic decode is not a valid sentence and the semantic
    decoder's confidence is below ``tau``.
    """
    if not 0.0 <= tau <= 1.0:
        raise ConfigError(f"tau={tau} outside [0, 1]")
    if language is not None:
        valid = result.syntactic_hat is not None and language.is_valid(result.syntactic_hat)
    else:
        valid = result.syntactic_valid
    return (not valid) and result.confidence < tau
