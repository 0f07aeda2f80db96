"""Binary Huffman codes with deterministic tie-breaking."""
from __future__ import annotations

import heapq
import itertools
from typing import Hashable, Mapping, Sequence


def huffman_code(probs: Mapping[Hashable, float] | Sequence[float]) -> dict:
    """Return ``symbol -> codeword`` (a '0'/'1' string).

    A single symbol gets the empty codeword: there is nothing to transmit.
    Ties in the merge order are broken by insertion order, so the code is a
    pure function of the input.
    """
    if not isinstance(probs, Mapping):
        probs = dict(enumerate(probs))
    if not probs:
        raise ValueError("empty distribution")
    if any(p < 0 for p in probs.values()):
        raise ValueError("negative probability")
    symbols = list(probs)
    if len(symbols) == 1:
        return {symbols[0]: ""}

    counter = itertools.count()
    heap = [(float(probs[s]), next(counter), [s]) for s in symbols]
    heapq.heapify(heap)
    codes = {s: "" for s in symbols}
    while len(heap) > 1:
        p0, _, group0 = heapq.heappop(heap)
        p1, _, group1 = heapq.heappop(heap)
        for s in group0:
            codes[s] = "0" + codes[s]
        for s in group1:
            codes[s] = "1" + codes[s]
        heapq.heappush(heap, (p0 + p1, next(counter), group0 + group1))
    return codes


def average_length(probs: Mapping[Hashable, float], code: Mapping[Hashable, str]) -> float:
    return float(sum(p * len(code[s]) for s, p in probs.items()))
