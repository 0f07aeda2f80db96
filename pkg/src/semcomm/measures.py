"""Exact information measures on finite tables (all values in bits)."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ConfigError
from .huffman import average_length, huffman_code
from .language import MessageSpace, StochasticMapping, logical_probability

JOINT_ATOL = 1e-12


def entropy(p: np.ndarray) -> float:
    """Shannon entropy in bits, with 0 log 0 = 0."""
    p = np.asarray(p, dtype=float).ravel()
    nz = p[p > 0]
    return float(-np.sum(nz * np.log2(nz)))


def mutual_information(joint: np.ndarray) -> float:
    """I(A;B) in bits for a 2-D joint table (need not be normalized to exactly 1)."""
    joint = np.asarray(joint, dtype=float)
    pa = joint.sum(axis=1, keepdims=True)
    pb = joint.sum(axis=0, keepdims=True)
    mask = joint > 0
    ratio = joint[mask] / (pa @ pb)[mask]
    return float(max(np.sum(joint[mask] * np.log2(ratio)), 0.0))


def conditional_entropy(joint: np.ndarray) -> float:
    """H(B|A) for a joint table indexed [a, b]."""
    joint = np.asarray(joint, dtype=float)
    return entropy(joint) - entropy(joint.sum(axis=1))


@dataclass(frozen=True)
class JointTable:
    rows: tuple
    cols: tuple
    p: np.ndarray

    def __post_init__(self) -> None:
        p = np.asarray(self.p, dtype=float)
        if p.shape != (len(self.rows), len(self.cols)):
            raise ConfigError(f"joint shape {p.shape} does not match labels")
        if np.any(p < 0) or abs(p.sum() - 1.0) > JOINT_ATOL:
            raise ConfigError("joint table must be non-negative and sum to 1")
        object.__setattr__(self, "p", p)

    @classmethod
    def from_mapping(cls, mapping: StochasticMapping, space: MessageSpace) -> JointTable:
        mapping.check_space(space)
        return cls(space.messages, mapping.alphabet, space.prior[:, None] * mapping.cond)

    def row_marginal(self) -> np.ndarray:
        return self.p.sum(axis=1)

    def col_marginal(self) -> np.ndarray:
        return self.p.sum(axis=0)


def message_entropy(space: MessageSpace) -> float:
    return entropy(space.prior)


def semantic_entropy(mapping: StochasticMapping, space: MessageSpace) -> float:
    return entropy(logical_probability(mapping, space))


def symbol_information(mapping: StochasticMapping, space: MessageSpace) -> np.ndarray:
    """Per-symbol semantic information -log2 p_S(x); +inf for symbols never emitted."""
    ps = logical_probability(mapping, space)
    with np.errstate(divide="ignore"):
        return -np.log2(ps)


@dataclass(frozen=True)
class Decomposition:
    H_M: float
    H_X: float
    H_X_given_M: float  # semantic redundancy
    H_M_given_X: float  # semantic ambiguity
    I_MX: float

    @property
    def identity_residual(self) -> float:
        return self.H_X - (self.H_M + self.H_X_given_M - self.H_M_given_X)


def decomposition(mapping: StochasticMapping, space: MessageSpace) -> Decomposition:
    joint = JointTable.from_mapping(mapping, space).p
    h_joint = entropy(joint)
    h_m = entropy(joint.sum(axis=1))
    h_x = entropy(joint.sum(axis=0))
    # redundancy and ambiguity are exactly zero for deterministic / injective tables
    h_x_m = 0.0 if mapping.is_deterministic else h_joint - h_m
    injective = mapping.is_deterministic and np.all(np.count_nonzero(joint, axis=0) <= 1)
    h_m_x = 0.0 if injective else h_joint - h_x
    return Decomposition(h_m, h_x, h_x_m, h_m_x, max(h_m - h_m_x, 0.0))


@dataclass(frozen=True)
class BlockRate:
    rate_bound: float
    class_entropy: float
    huffman_avg_length: float


def semantic_block_encoder_rate(
    mapping: StochasticMapping, space: MessageSpace, kb: dict | None = None
) -> BlockRate:
    """Mutual-information rate bound next to a Huffman code on meaning classes."""
    dec = decomposition(mapping, space)
    class_prior = space.class_prior(kb)
    code = huffman_code(class_prior)
    return BlockRate(
        rate_bound=dec.I_MX,
        class_entropy=entropy(np.fromiter(class_prior.values(), float)),
        huffman_avg_length=average_length(class_prior, code),
    )


CSV_COLUMNS: Sequence[str] = (
    "H_M", "H_X", "H_X_given_M", "H_M_given_X", "I_MX", "class_entropy", "huffman_len",
)


def measures_row(mapping: StochasticMapping, space: MessageSpace, kb: dict | None = None) -> dict[str, float]:
    dec = decomposition(mapping, space)
    rate = semantic_block_encoder_rate(mapping, space, kb)
    return {
        "H_M": dec.H_M,
        "H_X": dec.H_X,
        "H_X_given_M": dec.H_X_given_M,
        "H_M_given_X": dec.H_M_given_X,
        "I_MX": dec.I_MX,
        "class_entropy": rate.class_entropy,
        "huffman_len": rate.huffman_avg_length,
    }

