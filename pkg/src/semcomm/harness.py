"""Monte Carlo link experiments: semantic MAP vs syntactic decoding, and ARQ.

Trials are simulated in fixed-size chunks; chunk ``c`` of SNR point ``i``
draws from ``SeedSequence([seed, i, c])`` so results do not depend on how
chunks are scheduled across workers. Per-chunk tallies are integers and are
reduced in chunk order.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import erfcinv

from .channel import FadingProfile, db_to_linear, snr_to_crossover
from .codec import DEFAULT_TAU, SyntacticCodec
from .errors import ConfigError, FramingError
from .language import SentenceLanguage, build_sentence_language

CHUNK = 4096
Z95 = 1.959963984540054
EPS_FLOOR = 1e-300
BATCH_TIE_ATOL = 1e-9

# Word order sets each word's 4-bit index. Slot words are chosen so that their
# Hamming(7,4) codewords are pairwise >= 4 apart (and their raw 4-bit indices
# >= 2 apart), which lets the grammar flag most residual bit errors.
DEFAULT_GRAMMAR = {
    "vocabulary": [
        "alice", "eve", "the", "sees", "a", "helps", "bob", "frank",
        "and", "calls", "carol", "grace", "dave", "heidi", "of", "meets",
    ],
    "slots": [
        ["alice", "bob", "carol", "dave"],
        ["sees", "helps", "calls", "meets"],
        ["eve", "frank", "grace", "heidi"],
    ],
}


def default_language() -> SentenceLanguage:
    return build_sentence_language(DEFAULT_GRAMMAR)


def thread_count() -> int:
    try:
        n = int(os.environ.get("SEMCOMM_THREADS", "1"))
    except ValueError:
        raise ConfigError("SEMCOMM_THREADS must be an integer") from None
    return max(1, n)


def crossover_to_snr_db(epsilon: float) -> float:
    """Inverse of the hard-decision BPSK map, in dB."""
    if not 0.0 < epsilon < 0.5:
        raise ConfigError("crossover must lie strictly between 0 and 0.5")
    return float(10.0 * np.log10(erfcinv(2.0 * epsilon) ** 2))


def binomial_ci_half_width(p: float, n: int) -> float:
    """Normal-approximation 95% half-width with continuity correction."""
    return Z95 * math.sqrt(max(p * (1.0 - p), 0.0) / n) + 0.5 / n


@dataclass(frozen=True)
class LinkExperiment:
    language: SentenceLanguage
    codec: SyntacticCodec
    snr_db: tuple[float, ...]
    trials: int = 100_000
    seed: int = 0
    tau: float = DEFAULT_TAU
    fading: str = "none"
    block_length: int | None = None

    def __post_init__(self) -> None:
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if len(self.snr_db) == 0:
            raise ConfigError("SNR grid is empty")
        if not 0.0 <= self.tau <= 1.0:
            raise ConfigError("tau must lie in [0, 1]")
        if set(self.codec.symbols) != set(self.language.vocabulary):
            raise ConfigError("codec symbols must be the language vocabulary")
        object.__setattr__(self, "snr_db", tuple(float(s) for s in self.snr_db))
        FadingProfile(self.fading, 1.0, self.block_length)

    def profile(self, snr_db: float) -> FadingProfile:
        return FadingProfile(self.fading, float(db_to_linear(snr_db)), self.block_length)


def make_experiment(
    language: SentenceLanguage | None = None,
    snr_db: Sequence[float] = (0.0,),
    source_code: str = "fixed",
    channel_code: str = "hamming74",
    **kwargs,
) -> LinkExperiment:
    language = default_language() if language is None else language
    probs = None
    if source_code == "huffman":
        probs = tuple(_word_frequencies(language))
    codec = SyntacticCodec(language.vocabulary, source_code, channel_code, symbol_probs=probs)
    return LinkExperiment(language, codec, tuple(snr_db), **kwargs)


def _word_frequencies(language: SentenceLanguage) -> np.ndarray:
    pos = {w: i for i, w in enumerate(language.vocabulary)}
    freq = np.zeros(len(language.vocabulary))
    for s, p in zip(language.sentences, language.prior):
        for w in s:
            freq[pos[w]] += p
    # unused words keep a small mass so every word stays encodable
    freq = freq + 1e-6
    return freq / freq.sum()


class _Tables:
    """Codebook and label tables precomputed once per experiment."""

    def __init__(self, exp: LinkExperiment):
        lang, codec = exp.language, exp.codec
        self.K = len(lang)
        self.L = lang.length
        self.V = len(lang.vocabulary)
        words = {w: i for i, w in enumerate(codec.symbols)}
        self.word_idx = np.array([[words[w] for w in s] for s in lang.sentences], dtype=np.int64)
        cws = [codec.encode(s) for s in lang.sentences]
        self.lengths = np.array([len(c) for c in cws])
        self.n = int(self.lengths.max())
        self.C = np.zeros((self.K, self.n), dtype=np.uint8)
        for k, c in enumerate(cws):
            self.C[k, : len(c)] = c
        self.Cf = self.C.astype(float)
        self.uniform_length = bool(np.all(self.lengths == self.n))
        with np.errstate(divide="ignore"):
            self.log_prior = np.log(lang.prior)
        self.cdf = np.cumsum(lang.prior)
        self.cdf[-1] = 1.0
        labels = {}
        self.src_class = np.array([labels.setdefault(lang.meaning_class[s], len(labels)) for s in lang.sentences])
        self.dst_class = np.array([labels.setdefault(lang.kb_destination[s], len(labels)) for s in lang.sentences])
        self.radix = self.V ** np.arange(self.L - 1, -1, -1)
        keys = self.word_idx @ self.radix
        self.key_order = np.argsort(keys)
        self.valid_keys = keys[self.key_order]
        self.fixed = codec.source_code == "fixed"


@dataclass
class TrialBatch:
    """Per-trial outcomes for one chunk; the unit the metrics reduce over."""

    msg: np.ndarray
    y: np.ndarray
    crossover: np.ndarray
    m_hat: np.ndarray
    confidence: np.ndarray
    syn_words: np.ndarray  # -1 marks an undecodable word
    syn_valid: np.ndarray
    symbol_errors: np.ndarray
    sem_error: np.ndarray
    channel_uses: np.ndarray

    @property
    def sentence_error(self) -> np.ndarray:
        return self.symbol_errors > 0


def _chunk_rng(seed: int, point: int, chunk: int, attempt: int = 0) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, point, chunk, attempt]))


def _transmit_batch(
    tab: _Tables, exp: LinkExperiment, msg: np.ndarray, profile: FadingProfile, rng: np.random.Generator
) -> TrialBatch:
    T = msg.size
    eps = profile.crossover_matrix(T, tab.n, rng)
    used = np.arange(tab.n)[None, :] < tab.lengths[msg][:, None]
    flips = (rng.random((T, tab.n)) < eps) & used
    y = tab.C[msg] ^ flips.astype(np.uint8)

    # semantic MAP over the valid set, log domain
    eps_c = np.clip(eps, EPS_FLOOR, 0.5)
    llr = (np.log(eps_c) - np.log1p(-eps_c)) * used
    yf = y.astype(float)
    mismatch = (llr * yf).sum(axis=1, keepdims=True) + llr @ tab.Cf.T - 2.0 * (llr * yf) @ tab.Cf.T
    scores = tab.log_prior[None, :] + mismatch
    if not tab.uniform_length:
        scores = np.where(tab.lengths[None, :] == tab.lengths[msg][:, None], scores, -np.inf)
    best = scores.max(axis=1, keepdims=True)
    m_hat = np.argmax(scores >= best - BATCH_TIE_ATOL * np.maximum(np.abs(best), 1.0), axis=1)
    w = np.exp(scores - best)
    confidence = w[np.arange(T), m_hat] / w.sum(axis=1)

    syn_words = _syntactic_words(tab, exp.codec, y, msg)
    symbol_errors = (syn_words != tab.word_idx[msg]).sum(axis=1)
    keys = np.where((syn_words >= 0).all(axis=1), syn_words @ tab.radix, -1)
    pos = np.clip(np.searchsorted(tab.valid_keys, keys), 0, tab.K - 1)
    syn_valid = tab.valid_keys[pos] == keys

    sem_error = tab.dst_class[m_hat] != tab.src_class[msg]
    return TrialBatch(
        msg=msg,
        y=y,
        crossover=eps,
        m_hat=m_hat,
        confidence=confidence,
        syn_words=syn_words,
        syn_valid=syn_valid,
        symbol_errors=symbol_errors,
        sem_error=sem_error,
        channel_uses=tab.lengths[msg],
    )


def _syntactic_words(tab: _Tables, codec: SyntacticCodec, y: np.ndarray, msg: np.ndarray) -> np.ndarray:
    if tab.fixed and tab.uniform_length:
        info = codec.channel_decode(y)
        w = codec.width
        if w == 0:
            return np.zeros((y.shape[0], tab.L), dtype=np.int64)
        idx = info[:, : tab.L * w].reshape(-1, tab.L, w).astype(np.int64) @ (1 << np.arange(w - 1, -1, -1))
        return np.where(idx < tab.V, idx, -1)
    # variable-length framing: decode trial by trial
    words = {s: i for i, s in enumerate(codec.symbols)}
    out = np.full((y.shape[0], tab.L), -1, dtype=np.int64)
    for t in range(y.shape[0]):
        n = tab.lengths[msg[t]]
        try:
            dec = codec.decode(y[t, :n], tab.L)
        except FramingError:
            continue
        out[t] = [words[s] for s in dec]
    return out


def simulate_trials(exp: LinkExperiment, snr_db: float, n: int, point: int = 0, chunk: int = 0) -> TrialBatch:
    """One chunk of ``n`` trials at a given SNR (exposed for spot checks)."""
    tab = _Tables(exp)
    rng = _chunk_rng(exp.seed, point, chunk)
    msg = np.searchsorted(tab.cdf, rng.random(n), side="right")
    return _transmit_batch(tab, exp, msg, exp.profile(snr_db), rng)


@dataclass(frozen=True)
class LinkPoint:
    snr_db: float
    crossover: float
    trials: int
    syn_symbol_err: float
    syn_sentence_err: float
    sem_err: float
    similarity: float
    ci_half_width: float
    syn_sentence_ci: float
    gap_sigma: float  # std. error of the paired (syntactic - semantic) sentence gap

    @property
    def gap_z(self) -> float:
        gap = self.syn_sentence_err - self.sem_err
        if self.gap_sigma == 0.0:
            return math.inf if gap > 0 else 0.0
        return gap / self.gap_sigma


@dataclass(frozen=True)
class LinkMetrics:
    points: tuple[LinkPoint, ...]

    def rows(self) -> list[dict]:
        return [{c: getattr(p, c) for c in LINK_COLUMNS} for p in self.points]


LINK_COLUMNS = ("snr_db", "trials", "syn_symbol_err", "syn_sentence_err", "sem_err", "similarity", "ci_half_width")
ARQ_COLUMNS = ("snr_db", "sem_retx_rate", "syn_retx_rate", "residual_sem_err", "goodput")


def _chunks(trials: int) -> list[int]:
    sizes = [CHUNK] * (trials // CHUNK)
    if trials % CHUNK:
        sizes.append(trials % CHUNK)
    return sizes


def _map_chunks(fn, sizes: list[int]) -> list:
    workers = min(thread_count(), len(sizes))
    if workers <= 1:
        return [fn(c, n) for c, n in enumerate(sizes)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, range(len(sizes)), sizes))


def _point_crossover(exp: LinkExperiment, snr_db: float) -> float:
    return snr_to_crossover(db_to_linear(snr_db))


def simulate_link(exp: LinkExperiment) -> LinkMetrics:
    tab = _Tables(exp)
    sizes = _chunks(exp.trials)
    points = []
    for i, snr in enumerate(exp.snr_db):
        profile = exp.profile(snr)

        def run_chunk(c: int, n: int, i=i, profile=profile):
            rng = _chunk_rng(exp.seed, i, c)
            msg = np.searchsorted(tab.cdf, rng.random(n), side="right")
            b = _transmit_batch(tab, exp, msg, profile, rng)
            d = b.sentence_error.astype(np.int64) - b.sem_error.astype(np.int64)
            return np.array(
                [b.symbol_errors.sum(), b.sentence_error.sum(), b.sem_error.sum(), d.sum(), (d * d).sum()],
                dtype=np.int64,
            )

        tot = np.sum(_map_chunks(run_chunk, sizes), axis=0)
        n = exp.trials
        sym, sent, sem, dsum, dsq = (int(v) for v in tot)
        mean_d = dsum / n
        var_d = max(dsq / n - mean_d**2, 0.0)
        sem_rate = sem / n
        points.append(
            LinkPoint(
                snr_db=snr,
                crossover=_point_crossover(exp, snr),
                trials=n,
                syn_symbol_err=sym / (n * tab.L),
                syn_sentence_err=sent / n,
                sem_err=sem_rate,
                similarity=1.0 - sem_rate,
                ci_half_width=binomial_ci_half_width(sem_rate, n),
                syn_sentence_ci=binomial_ci_half_width(sent / n, n),
                gap_sigma=math.sqrt(var_d / n),
            )
        )
    return LinkMetrics(tuple(points))


def sweep_snr(exp: LinkExperiment) -> list[dict]:
    return simulate_link(exp).rows()


@dataclass(frozen=True)
class ArqPoint:
    snr_db: float
    trials: int
    sem_retx_rate: float
    syn_retx_rate: float
    residual_sem_err: float
    goodput: float
    residual_syn_err: float
    syn_goodput: float
    sem_mean_tx: float
    syn_mean_tx: float
    retx_gap_sigma: float

    @property
    def retx_gap_z(self) -> float:
        gap = self.syn_retx_rate - self.sem_retx_rate
        if self.retx_gap_sigma == 0.0:
            return math.inf if gap > 0 else 0.0
        return gap / self.retx_gap_sigma


def _syn_meaning_error(tab: _Tables, b: TrialBatch) -> np.ndarray:
    """Meaning error of the syntactic decode; an invalid decode counts as one."""
    keys = np.where((b.syn_words >= 0).all(axis=1), b.syn_words @ tab.radix, -1)
    pos = np.clip(np.searchsorted(tab.valid_keys, keys), 0, tab.K - 1)
    hit = tab.valid_keys[pos] == keys
    idx = tab.key_order[pos]
    return ~hit | (tab.dst_class[idx] != tab.src_class[b.msg])


def simulate_arq(exp: LinkExperiment, max_retx: int = 3) -> list[ArqPoint]:
    """Stop-and-wait ARQ: genie syntactic detection vs semantic detection.

    Both schemes see the same channel realization on each attempt. The
    retransmission rate is the probability that a first transmission triggers
    a request; goodput counts meaning-correct accepted sentences per channel
    use. After ``max_retx`` retransmissions the last decode is accepted.
    """
    if max_retx < 0:
        raise ConfigError("max_retx must be >= 0")
    tab = _Tables(exp)
    sizes = _chunks(exp.trials)
    points = []
    for i, snr in enumerate(exp.snr_db):
        profile = exp.profile(snr)

        def run_chunk(c: int, n: int, i=i, profile=profile):
            rng = _chunk_rng(exp.seed, i, c)
            msg = np.searchsorted(tab.cdf, rng.random(n), side="right")
            attempts = [_transmit_batch(tab, exp, msg, profile, rng)]
            for a in range(1, max_retx + 1):
                attempts.append(_transmit_batch(tab, exp, msg, profile, _chunk_rng(exp.seed, i, c, a)))
            out = []
            first = []
            for scheme in ("syn", "sem"):
                pending = np.ones(n, dtype=bool)
                tx = np.zeros(n, dtype=np.int64)
                uses = np.zeros(n, dtype=np.int64)
                wrong = np.zeros(n, dtype=bool)
                for a, b in enumerate(attempts):
                    if scheme == "syn":
                        request, err = b.sentence_error, _syn_meaning_error(tab, b)
                    else:
                        request, err = ~b.syn_valid & (b.confidence < exp.tau), b.sem_error
                    if a == 0:
                        first.append(request.astype(np.int64))
                    tx += pending
                    uses += np.where(pending, b.channel_uses, 0)
                    again = pending & request if a < max_retx else np.zeros(n, dtype=bool)
                    wrong |= pending & ~again & err
                    pending = again
                out += [first[-1].sum(), tx.sum(), wrong.sum(), uses.sum()]
            d = first[0] - first[1]
            return np.array(out + [d.sum(), (d * d).sum()], dtype=np.int64)

        tot = np.sum(_map_chunks(run_chunk, sizes), axis=0)
        n = exp.trials
        syn_req, syn_tx, syn_wrong, syn_uses, sem_req, sem_tx, sem_wrong, sem_uses, dsum, dsq = (
            int(v) for v in tot
        )
        mean_d = dsum / n
        points.append(
            ArqPoint(
                snr_db=snr,
                trials=n,
                sem_retx_rate=sem_req / n,
                syn_retx_rate=syn_req / n,
                residual_sem_err=sem_wrong / n,
                goodput=(n - sem_wrong) / sem_uses,
                residual_syn_err=syn_wrong / n,
                syn_goodput=(n - syn_wrong) / syn_uses,
                sem_mean_tx=sem_tx / n,
                syn_mean_tx=syn_tx / n,
                retx_gap_sigma=math.sqrt(max(dsq / n - mean_d**2, 0.0) / n),
            )
        )
    return points


def arq_rows(points: Sequence[ArqPoint]) -> list[dict]:
    return [{c: getattr(p, c) for c in ARQ_COLUMNS} for p in points]
