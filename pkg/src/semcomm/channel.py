"""Discrete memoryless channels and the SNR-to-BSC parameterization."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Hashable, Sequence

import numpy as np
from scipy.special import erfc

from .errors import ConfigError, InputError
from .language import PROB_ATOL


@dataclass(frozen=True)
class DiscreteChannel:
    """Row-stochastic transition table p(y|x).

    Symbols are looked up by ``str(symbol)`` so that bit strings such as
    ``"0110"`` can be fed element by element to a binary channel.
    """

    inputs: tuple[str, ...]
    outputs: tuple[str, ...]
    transition: np.ndarray

    def __post_init__(self) -> None:
        inputs = tuple(str(s) for s in self.inputs)
        outputs = tuple(str(s) for s in self.outputs)
        t = np.array(self.transition, dtype=float)
        if t.shape != (len(inputs), len(outputs)):
            raise ConfigError(f"transition shape {t.shape} does not match alphabets")
        if not np.all(np.isfinite(t)) or np.any(t < 0):
            raise ConfigError("transition entries must be finite and non-negative")
        if np.any(np.abs(t.sum(axis=1) - 1.0) > PROB_ATOL):
            raise ConfigError("transition rows must sum to 1")
        t.setflags(write=False)
        object.__setattr__(self, "inputs", inputs)
        object.__setattr__(self, "outputs", outputs)
        object.__setattr__(self, "transition", t)

    def input_indices(self, seq: Sequence[Hashable]) -> np.ndarray:
        return _lookup(self.inputs, seq, "input")

    def output_indices(self, seq: Sequence[Hashable]) -> np.ndarray:
        return _lookup(self.outputs, seq, "output")

    @property
    def is_binary_symmetric(self) -> bool:
        t = self.transition
        return t.shape == (2, 2) and t[0, 1] == t[1, 0]


def _lookup(alphabet: tuple[str, ...], seq: Sequence[Hashable], kind: str) -> np.ndarray:
    pos = {s: i for i, s in enumerate(alphabet)}
    try:
        return np.fromiter((pos[str(s)] for s in seq), dtype=np.int64)
    except KeyError as exc:
        raise InputError(f"symbol {exc.args[0]!r} not in channel {kind} alphabet") from None


def bsc(epsilon: float) -> DiscreteChannel:
    if not 0.0 <= epsilon <= 0.5:
        raise ConfigError(f"crossover probability {epsilon} outside [0, 0.5]")
    return DiscreteChannel(("0", "1"), ("0", "1"), [[1 - epsilon, epsilon], [epsilon, 1 - epsilon]])


def identity_channel(symbols: Sequence[Hashable]) -> DiscreteChannel:
    return DiscreteChannel(tuple(symbols), tuple(symbols), np.eye(len(symbols)))


def q_function(x):
    """Gaussian tail probability Q(x) = P(N(0,1) > x)."""
    return 0.5 * erfc(np.asarray(x, dtype=float) / np.sqrt(2.0))


def db_to_linear(snr_db):
    return 10.0 ** (np.asarray(snr_db, dtype=float) / 10.0)


def snr_to_crossover(snr_linear):
    """Hard-decision BPSK crossover: Q(sqrt(2 snr)) = erfc(sqrt(snr)) / 2."""
    snr = np.asarray(snr_linear, dtype=float)
    if np.any(snr < 0) or np.any(np.isnan(snr)):
        raise ConfigError("SNR must be non-negative")
    eps = 0.5 * erfc(np.sqrt(snr))
    return float(eps) if eps.ndim == 0 else eps


@dataclass(frozen=True)
class FadingProfile:
    """Per-block SNR model; ``block_length`` counts channel uses per fade.

    ``block_length=None`` means one fade realization per transmitted sentence.
    """

    kind: str = "none"
    mean_snr: float = 1.0
    block_length: int | None = None

    def __post_init__(self) -> None:
        if self.kind not in ("none", "rayleigh"):
            raise ConfigError(f"unknown fading kind {self.kind!r}")
        if not self.mean_snr > 0:
            raise ConfigError("mean_snr must be positive")
        if self.block_length is not None and self.block_length < 1:
            raise ConfigError("block_length must be >= 1")

    def snr_blocks(self, n_blocks: int, rng: np.random.Generator) -> np.ndarray:
        if self.kind == "none":
            return np.full(n_blocks, self.mean_snr)
        return rng.exponential(self.mean_snr, size=n_blocks)

    def crossover_matrix(self, n_frames: int, frame_bits: int, rng: np.random.Generator) -> np.ndarray:
        """Per-bit crossover probabilities for ``n_frames`` frames of ``frame_bits`` uses.

        Blocks restart at every frame boundary.
        """
        if self.kind == "none":
            return np.full((n_frames, frame_bits), snr_to_crossover(self.mean_snr))
        block = frame_bits if self.block_length is None else self.block_length
        per_frame = -(-frame_bits // block)
        snr = self.snr_blocks(n_frames * per_frame, rng).reshape(n_frames, per_frame)
        eps = snr_to_crossover(snr)
        return np.repeat(eps, block, axis=1)[:, :frame_bits]


def transmit(channel: DiscreteChannel, x_sequence: Sequence[Hashable], rng_seed) -> list[str]:
    """Pass a symbol sequence through the channel; deterministic given the seed."""
    idx = channel.input_indices(x_sequence)
    return [channel.outputs[j] for j in transmit_indices(channel.transition, idx, np.random.default_rng(rng_seed))]


def transmit_indices(transition: np.ndarray, idx: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    cdf = np.cumsum(transition, axis=1)
    cdf[:, -1] = 1.0
    u = rng.random(idx.shape)
    return (u[..., None] >= cdf[idx]).sum(axis=-1)


def flip_bits(bits: np.ndarray, crossover, rng: np.random.Generator) -> np.ndarray:
    """Binary symmetric channel on a 0/1 array with scalar or per-bit crossover."""
    flips = rng.random(np.shape(bits)) < crossover
    return np.bitwise_xor(np.asarray(bits, dtype=np.uint8), flips.astype(np.uint8))
