"""YAML configuration files: schema checks and conversion to module types."""
from __future__ import annotations

from dataclasses import fields
from pathlib import Path
from typing import Any, Iterable, Mapping

import numpy as np
import yaml

from .channel import FadingProfile
from .edgesim import EdgeConfig, FedConfig, LearnerCurve
from .errors import ConfigError
from .language import (
    KnowledgeBasePair,
    MessageSpace,
    SentenceLanguage,
    StochasticMapping,
    build_sentence_language,
)

GRAMMAR_KEYS = {"vocabulary", "slots", "forbid", "weights", "synonyms", "kb_destination_synonyms"}
MESSAGE_KEYS = {"messages", "prior", "mapping", "alphabet", "kb_source", "kb_destination"}
LINK_KEYS = {
    "snr_db", "trials", "seed", "tau", "fading", "block_len", "source_code", "channel_code", "max_retx",
}
EDGE_GRID_KEYS = {"V_grid", "lambda_grid"}
FED_KEYS = {"centers", "curvatures", "counts", "rounds", "step", "local_steps", "w0"}


def load_yaml(path: str | Path) -> dict:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        data = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from None
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return data


def check_keys(data: Mapping, allowed: Iterable[str], where: str) -> None:
    unknown = sorted(set(data) - set(allowed))
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {', '.join(map(str, unknown))}")


# -- message spaces ----------------------------------------------------


def message_model(data: Mapping[str, Any]) -> tuple[MessageSpace, StochasticMapping, KnowledgeBasePair]:
    """Message space, mapping and KB pair from ``messages``-style keys.

    ``mapping`` maps each message to a symbol (deterministic) or to a
    ``{symbol: probability}`` table; omitted means the identity mapping.
    """
    check_keys(data, MESSAGE_KEYS, "message config")
    messages = data.get("messages")
    if not messages:
        raise ConfigError("'messages' must list at least one message")
    messages = [str(m) for m in messages]
    prior = data.get("prior")
    if prior is None:
        prior = [1.0 / len(messages)] * len(messages)
    elif isinstance(prior, Mapping):
        prior = [float(prior[m]) for m in messages]
    kb_src = _kb(data.get("kb_source"), messages, "kb_source")
    kb_dst = _kb(data.get("kb_destination"), messages, "kb_destination") if "kb_destination" in data else kb_src
    space = MessageSpace(tuple(messages), np.asarray(prior, dtype=float), kb_src)

    raw = data.get("mapping")
    if raw is None:
        mapping = StochasticMapping.identity(space)
    else:
        if isinstance(raw, list):
            if len(raw) != len(messages):
                raise ConfigError("mapping list must have one entry per message")
            raw = dict(zip(messages, raw))
        missing = [m for m in messages if m not in {str(k) for k in raw}]
        if missing:
            raise ConfigError(f"mapping misses messages {missing[:5]}")
        raw = {str(k): v for k, v in raw.items()}
        alphabet = data.get("alphabet")
        if alphabet is None:
            seen: dict = {}
            for m in messages:
                row = raw[m]
                for x in (row if isinstance(row, Mapping) else [row]):
                    seen.setdefault(str(x), None)
            alphabet = list(seen)
        alphabet = [str(x) for x in alphabet]
        pos = {x: j for j, x in enumerate(alphabet)}
        cond = np.zeros((len(messages), len(alphabet)))
        for i, m in enumerate(messages):
            row = raw[m] if isinstance(raw[m], Mapping) else {raw[m]: 1.0}
            for x, p in row.items():
                if str(x) not in pos:
                    raise ConfigError(f"symbol {x!r} not in alphabet")
                cond[i, pos[str(x)]] = float(p)
        mapping = StochasticMapping(tuple(alphabet), cond)
    return space, mapping, KnowledgeBasePair(kb_src, kb_dst)


def _kb(raw, messages: list[str], name: str) -> dict:
    if raw is None:
        return {m: m for m in messages}
    if not isinstance(raw, Mapping):
        raise ConfigError(f"{name} must map messages to class labels")
    kb = {str(k): str(v) for k, v in raw.items()}
    missing = [m for m in messages if m not in kb]
    if missing:
        raise ConfigError(f"{name} does not cover messages {missing[:5]}")
    return kb


def sentence_language(data: Mapping[str, Any]) -> SentenceLanguage:
    grammar = {k: v for k, v in data.items() if k in GRAMMAR_KEYS}
    return build_sentence_language(grammar)


def is_grammar(data: Mapping) -> bool:
    return "slots" in data


# -- edge / federated ---------------------------------------------------

_EDGE_FIELDS = {f.name for f in fields(EdgeConfig)}


def edge_config(data: Mapping[str, Any]) -> tuple[EdgeConfig, list[float], list[float]]:
    check_keys(data, _EDGE_FIELDS | EDGE_GRID_KEYS, "edge-sim config")
    kwargs = {k: v for k, v in data.items() if k in _EDGE_FIELDS}
    if "channel" in kwargs:
        ch = kwargs["channel"]
        if not isinstance(ch, Mapping):
            raise ConfigError("channel must be a mapping with kind / mean_snr")
        check_keys(ch, {"kind", "mean_snr", "block_length"}, "channel")
        kind = {"rayleigh-block": "rayleigh"}.get(ch.get("kind", "none"), ch.get("kind", "none"))
        kwargs["channel"] = FadingProfile(kind, float(ch.get("mean_snr", 1.0)), ch.get("block_length"))
    if "learners" in kwargs:
        learners = []
        for item in kwargs["learners"]:
            check_keys(item, {"a_max", "rate"}, "learner")
            learners.append(LearnerCurve(float(item["a_max"]), float(item["rate"])))
        kwargs["learners"] = tuple(learners)
    for key in ("bit_options", "power_options", "cpu_options"):
        if key in kwargs:
            kwargs[key] = tuple(kwargs[key])
    try:
        cfg = EdgeConfig(**kwargs)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None
    v_grid = [float(v) for v in data.get("V_grid", [cfg.V])]
    l_grid = [float(v) for v in data.get("lambda_grid", [cfg.accuracy_weight])]
    return cfg, v_grid, l_grid


def fed_config(data: Mapping[str, Any]) -> tuple[FedConfig, np.ndarray | None]:
    check_keys(data, FED_KEYS, "fed-sim config")
    for key in ("centers", "curvatures", "counts"):
        if key not in data:
            raise ConfigError(f"fed-sim config needs '{key}'")
    cfg = FedConfig(
        centers=np.asarray(data["centers"], dtype=float),
        curvatures=np.asarray(data["curvatures"], dtype=float),
        counts=np.asarray(data["counts"], dtype=float),
        rounds=int(data.get("rounds", 500)),
        step=None if data.get("step") is None else float(data["step"]),
        local_steps=int(data.get("local_steps", 1)),
    )
    w0 = data.get("w0")
    return cfg, None if w0 is None else np.asarray(w0, dtype=float)


def load_matrix(path: str | Path) -> np.ndarray:
    """Numeric table from a CSV / whitespace text file (``#`` comments allowed)."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"table file not found: {path}")
    text = path.read_text()
    delim = "," if "," in text else None
    try:
        arr = np.loadtxt(path, delimiter=delim, ndmin=2)
    except ValueError as exc:
        raise ConfigError(f"cannot parse numeric table {path}: {exc}") from None
    return arr
