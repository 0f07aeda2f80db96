"""Message spaces, knowledge bases and message-to-symbol mappings.

A knowledge base is represented as a partition of the message set into
meaning classes: two messages are semantically equivalent when they fall in
the same class. Source and destination may hold different partitions.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Any, Hashable, Mapping, Sequence

import numpy as np

from .errors import ConfigError

PROB_ATOL = 1e-12
MAX_SENTENCES = 100_000


def _as_distribution(values: Sequence[float], name: str, atol: float = PROB_ATOL) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1 or arr.size == 0:
        raise ConfigError(f"{name} must be a non-empty vector")
    if not np.all(np.isfinite(arr)) or np.any(arr < 0):
        raise ConfigError(f"{name} entries must be finite and non-negative")
    if abs(arr.sum() - 1.0) > atol:
        raise ConfigError(f"{name} must sum to 1 (got {arr.sum():.15g})")
    return arr


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class MessageSpace:
    """Finite message set with a prior and the source knowledge base."""

    messages: tuple[Hashable, ...]
    prior: np.ndarray
    meaning_class: Mapping[Hashable, Hashable]
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        messages = tuple(self.messages)
        if len(set(messages)) != len(messages):
            raise ConfigError("message identifiers must be unique")
        prior = _as_distribution(self.prior, "prior")
        if prior.size != len(messages):
            raise ConfigError(f"prior has {prior.size} entries for {len(messages)} messages")
        missing = [m for m in messages if m not in self.meaning_class]
        if missing:
            raise ConfigError(f"messages without a meaning class: {missing[:5]}")
        object.__setattr__(self, "messages", messages)
        object.__setattr__(self, "prior", _frozen(prior))
        object.__setattr__(self, "meaning_class", dict(self.meaning_class))
        object.__setattr__(self, "_index", {m: i for i, m in enumerate(messages)})

    @classmethod
    def uniform(cls, messages: Sequence[Hashable], meaning_class: Mapping | None = None) -> MessageSpace:
        messages = tuple(messages)
        if meaning_class is None:
            meaning_class = {m: m for m in messages}
        return cls(messages, np.full(len(messages), 1.0 / len(messages)), meaning_class)

    def __len__(self) -> int:
        return len(self.messages)

    def index(self, message: Hashable) -> int:
        try:
            return self._index[message]
        except KeyError:
            raise KeyError(f"unknown message {message!r}") from None

    def class_labels(self, kb: Mapping | None = None) -> list:
        kb = self.meaning_class if kb is None else kb
        return [kb[m] for m in self.messages]

    def class_prior(self, kb: Mapping | None = None) -> dict:
        """Total prior mass of each meaning class, in first-seen order."""
        out: dict = {}
        for label, p in zip(self.class_labels(kb), self.prior):
            out[label] = out.get(label, 0.0) + float(p)
        return out


@dataclass(frozen=True)
class KnowledgeBasePair:
    """Source and destination meaning partitions over the same message set."""

    kb_source: Mapping[Hashable, Hashable]
    kb_destination: Mapping[Hashable, Hashable]

    def check_total(self, messages: Sequence[Hashable]) -> None:
        for name, kb in (("kb_source", self.kb_source), ("kb_destination", self.kb_destination)):
            missing = [m for m in messages if m not in kb]
            if missing:
                raise ConfigError(f"{name} does not cover messages {missing[:5]}")

    def mismatch_mass(self, space: MessageSpace) -> float:
        """Prior mass of messages that the two sides interpret differently."""
        self.check_total(space.messages)
        return float(
            sum(p for m, p in zip(space.messages, space.prior) if self.kb_source[m] != self.kb_destination[m])
        )


@dataclass(frozen=True)
class StochasticMapping:
    """Row-stochastic table p(x|m); rows follow the message order of the space."""

    alphabet: tuple[Hashable, ...]
    cond: np.ndarray

    def __post_init__(self) -> None:
        alphabet = tuple(self.alphabet)
        cond = np.asarray(self.cond, dtype=float)
        if cond.ndim != 2 or cond.shape[1] != len(alphabet):
            raise ConfigError(f"mapping table shape {cond.shape} does not match alphabet size {len(alphabet)}")
        if not np.all(np.isfinite(cond)) or np.any(cond < 0):
            raise ConfigError("mapping entries must be finite and non-negative")
        bad = np.flatnonzero(np.abs(cond.sum(axis=1) - 1.0) > PROB_ATOL)
        if bad.size:
            raise ConfigError(f"mapping rows {bad[:5].tolist()} do not sum to 1")
        object.__setattr__(self, "alphabet", alphabet)
        object.__setattr__(self, "cond", _frozen(cond))

    @classmethod
    def deterministic(cls, symbols: Sequence[Hashable], alphabet: Sequence[Hashable] | None = None) -> StochasticMapping:
        """Mapping x = f(m) given as the list of f(m) in message order."""
        if alphabet is None:
            alphabet = list(dict.fromkeys(symbols))
        pos = {x: j for j, x in enumerate(alphabet)}
        cond = np.zeros((len(symbols), len(alphabet)))
        for i, x in enumerate(symbols):
            if x not in pos:
                raise ConfigError(f"symbol {x!r} not in alphabet")
            cond[i, pos[x]] = 1.0
        return cls(tuple(alphabet), cond)

    @classmethod
    def identity(cls, space: MessageSpace) -> StochasticMapping:
        return cls(space.messages, np.eye(len(space)))

    @property
    def is_deterministic(self) -> bool:
        return bool(np.all((self.cond == 0) | (self.cond == 1)))

    def check_space(self, space: MessageSpace) -> None:
        if self.cond.shape[0] != len(space):
            raise ConfigError(f"mapping has {self.cond.shape[0]} rows for {len(space)} messages")


def logical_probability(mapping: StochasticMapping, space: MessageSpace) -> np.ndarray:
    """Prior mass carried by each symbol: p_S(x) = sum_m p(x|m) p(m)."""
    mapping.check_space(space)
    return space.prior @ mapping.cond


def semantically_equivalent(m: Hashable, m_prime: Hashable, kb: Mapping[Hashable, Hashable]) -> bool:
    for msg in (m, m_prime):
        if msg not in kb:
            raise KeyError(f"message {msg!r} not in knowledge base")
    return kb[m] == kb[m_prime]


@dataclass(frozen=True)
class SentenceLanguage:
    """Explicitly enumerated set of valid fixed-length sentences.

    ``meaning_class`` is the source knowledge base; ``kb_destination`` is
    the receiver's partition and defaults to the same map.
    """

    vocabulary: tuple[str, ...]
    length: int
    sentences: tuple[tuple[str, ...], ...]
    prior: np.ndarray
    meaning_class: Mapping[tuple[str, ...], Hashable]
    kb_destination: Mapping[tuple[str, ...], Hashable] | None = None
    _valid: frozenset = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        vocab = set(self.vocabulary)
        if len(vocab) != len(self.vocabulary):
            raise ConfigError("vocabulary words must be unique")
        if not self.sentences:
            raise ConfigError("language has no valid sentences")
        for s in self.sentences:
            if len(s) != self.length or not set(s) <= vocab:
                raise ConfigError(f"sentence {s} is not in vocabulary^{self.length}")
        if len(set(self.sentences)) != len(self.sentences):
            raise ConfigError("duplicate sentences")
        prior = _as_distribution(self.prior, "sentence prior", atol=1e-9)
        if prior.size != len(self.sentences):
            raise ConfigError("sentence prior length mismatch")
        prior = prior / prior.sum()
        kb_dst = self.meaning_class if self.kb_destination is None else self.kb_destination
        KnowledgeBasePair(self.meaning_class, kb_dst).check_total(self.sentences)
        object.__setattr__(self, "vocabulary", tuple(self.vocabulary))
        object.__setattr__(self, "prior", _frozen(prior))
        object.__setattr__(self, "meaning_class", dict(self.meaning_class))
        object.__setattr__(self, "kb_destination", dict(kb_dst))
        object.__setattr__(self, "_valid", frozenset(self.sentences))

    def __len__(self) -> int:
        return len(self.sentences)

    def is_valid(self, sentence: Sequence[str]) -> bool:
        return tuple(sentence) in self._valid

    @property
    def kb_pair(self) -> KnowledgeBasePair:
        return KnowledgeBasePair(self.meaning_class, self.kb_destination)

    def message_space(self) -> MessageSpace:
        return MessageSpace(self.sentences, self.prior, self.meaning_class)

    def mapping(self) -> StochasticMapping:
        """Each sentence is transmitted as its own word sequence."""
        return StochasticMapping(self.sentences, np.eye(len(self.sentences)))


def build_sentence_language(grammar: Mapping[str, Any]) -> SentenceLanguage:
    """Enumerate the valid sentences described by a slot grammar.

    Recognized keys:

    ``slots``
        list of word lists, one per sentence position.
    ``vocabulary``
        full word list (fixes word order for source coding); defaults to the
        slot words in first-seen order.
    ``forbid``
        list of ``{position: word}`` patterns; a sentence matching every
        entry of any pattern is excluded.
    ``weights``
        optional per-slot word weights; the sentence prior is their product,
        renormalized over valid sentences. Uniform otherwise.
    ``synonyms``
        optional ``word -> canonical word`` map applied before forming the
        meaning class (a tuple of canonical words).
    ``kb_destination_synonyms``
        the same for the receiver's knowledge base.
    """
    slots = grammar.get("slots")
    if not slots or any(not s for s in slots):
        raise ConfigError("grammar needs a non-empty word list for every slot")
    slots = [list(s) for s in slots]
    vocabulary = list(grammar.get("vocabulary") or dict.fromkeys(w for s in slots for w in s))
    unknown = {w for s in slots for w in s} - set(vocabulary)
    if unknown:
        raise ConfigError(f"slot words missing from vocabulary: {sorted(unknown)}")
    total = int(np.prod([len(s) for s in slots], dtype=float))
    if total > MAX_SENTENCES:
        raise ConfigError(f"grammar spans {total} sentences; limit is {MAX_SENTENCES}")

    forbid = []
    for pattern in grammar.get("forbid") or []:
        forbid.append({int(k): v for k, v in dict(pattern).items()})
    weights = grammar.get("weights")
    if weights is not None:
        if len(weights) != len(slots) or any(len(w) != len(s) for w, s in zip(weights, slots)):
            raise ConfigError("weights must mirror the slot structure")

    sentences, prior = [], []
    for combo in itertools.product(*(range(len(s)) for s in slots)):
        sentence = tuple(slots[pos][i] for pos, i in enumerate(combo))
        if any(all(sentence[p] == w for p, w in pat.items()) for pat in forbid):
            continue
        sentences.append(sentence)
        prior.append(1.0 if weights is None else float(np.prod([weights[p][i] for p, i in enumerate(combo)])))
    if not sentences:
        raise ConfigError("grammar admits no valid sentence")
    prior = np.asarray(prior)
    if prior.sum() <= 0:
        raise ConfigError("sentence weights sum to zero")
    prior = prior / prior.sum()

    def classes(syn: Mapping[str, str]) -> dict:
        return {s: tuple(syn.get(w, w) for w in s) for s in sentences}

    synonyms = grammar.get("synonyms") or {}
    kb_src = classes(synonyms)
    dst_syn = grammar.get("kb_destination_synonyms")
    kb_dst = kb_src if dst_syn is None else classes(dst_syn)
    return SentenceLanguage(tuple(vocabulary), len(slots), tuple(sentences), prior, kb_src, kb_dst)
