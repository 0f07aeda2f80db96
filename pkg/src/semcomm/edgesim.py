"""Edge online learning: energy / delay / accuracy scheduling, and federated averaging.

A sensor quantizes arriving samples with ``b`` bits per feature, pushes them
over a fading link to an edge server (communication queue, in bits) and the
server classifies them (computation queue, in samples). Each slot the
scheduler picks bits, transmit power and CPU clock by minimizing

    Q/u * (A(b) - R(p) tau)/u - Z * f tau / c
        + V * (energy(p, f) + lam * arrivals * (1 - accuracy(b)))

where ``u`` is ``bit_scale``. The three controls separate, so each is chosen
by enumerating its own option list; ties go to the first option listed.
Samples delivered in one slot join the computation queue at the next slot.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .channel import FadingProfile
from .errors import ConfigError, InputError

ENTROPY_TIE_ATOL = 1e-12


@dataclass(frozen=True)
class LearnerCurve:
    """accuracy(b) = a_max * (1 - exp(-rate * b))."""

    a_max: float
    rate: float

    def __post_init__(self) -> None:
        if not 0.0 < self.a_max <= 1.0 or self.rate <= 0:
            raise ConfigError("learner curve needs 0 < a_max <= 1 and rate > 0")

    def accuracy(self, bits: float) -> float:
        return self.a_max * (1.0 - math.exp(-self.rate * bits))


@dataclass(frozen=True)
class EdgeConfig:
    V: float = 1e5
    accuracy_weight: float = 5e-3  # J per misclassified sample
    arrival_rate: float = 2.0  # samples / slot
    slot_duration: float = 0.01  # s
    sample_size: int = 784  # features per sample
    bit_options: tuple[int, ...] = (1, 2, 3, 4, 5, 6, 7, 8)
    power_options: tuple[float, ...] = (0.05, 0.1, 0.2, 0.4, 0.8)  # W
    cpu_options: tuple[float, ...] = (0.5e9, 1.0e9, 1.5e9, 2.0e9)  # cycles / s
    cycles_per_sample: float = 2e6
    kappa: float = 1e-28  # effective switched capacitance
    bandwidth: float = 1e6  # Hz
    channel: FadingProfile = field(default_factory=lambda: FadingProfile("rayleigh", 10.0))
    learners: tuple[LearnerCurve, ...] = (LearnerCurve(0.95, 0.6), LearnerCurve(0.92, 0.9))
    n_classes: int = 10
    confidence_noise: float = 0.3
    entropy_smoothing: float = 0.1
    delay_constraint: float = 20.0  # slots
    horizon: int = 5000
    burn_in: float = 0.1
    bit_scale: float = 1e3

    def __post_init__(self) -> None:
        for name in ("bit_options", "power_options", "cpu_options", "learners"):
            if len(getattr(self, name)) == 0:
                raise ConfigError(f"{name} must be non-empty")
            object.__setattr__(self, name, tuple(getattr(self, name)))
        if self.V < 0 or self.accuracy_weight < 0:
            raise ConfigError("V and accuracy_weight must be non-negative")
        if self.arrival_rate < 0 or self.slot_duration <= 0 or self.bandwidth <= 0:
            raise ConfigError("arrival_rate >= 0, slot_duration > 0 and bandwidth > 0 required")
        if any(b <= 0 for b in self.bit_options) or any(p < 0 for p in self.power_options):
            raise ConfigError("bit options must be positive and powers non-negative")
        if any(f <= 0 for f in self.cpu_options) or self.cycles_per_sample <= 0:
            raise ConfigError("CPU options and cycles_per_sample must be positive")
        if self.n_classes < 2 or not 0 < self.entropy_smoothing <= 1 or not 0 <= self.burn_in < 1:
            raise ConfigError("n_classes >= 2, 0 < entropy_smoothing <= 1, 0 <= burn_in < 1 required")

    def accuracy(self, learner: int, bits: float) -> float:
        return self.learners[learner].accuracy(bits)

    def rate(self, power: float, gain: float) -> float:
        return self.bandwidth * math.log2(1.0 + power * gain)


@dataclass(frozen=True)
class EdgeSimState:
    comm_queue: float = 0.0  # bits
    comm_samples: float = 0.0  # samples represented by comm_queue
    comp_queue: float = 0.0  # samples at the server
    incoming: float = 0.0  # samples delivered last slot, joining comp_queue now
    energy: float = 0.0  # J, cumulative
    active_learner: int = 0
    smoothed: np.ndarray | None = None  # running confidence vector per learner
    slot: int = 0


@dataclass(frozen=True)
class SlotRecord:
    arrivals: int
    gain: float
    bits: int
    power: float
    cpu: float
    airtime: float
    cpu_time: float
    energy: float
    tx_bits: float
    served: float
    comm_queue: float
    comm_samples: float
    comp_queue: float
    learner: int
    accuracy: float


def ensemble_select(confidence_vectors) -> int:
    """Learner whose output distribution has the lowest entropy; ties -> lowest index."""
    try:
        v = np.asarray(confidence_vectors, dtype=float)
    except ValueError:
        raise InputError("confidence vectors must share one class count") from None
    if v.ndim != 2 or v.shape[0] == 0 or v.shape[1] == 0:
        raise InputError("expected one confidence vector per learner")
    if not np.all(np.isfinite(v)) or np.any(v < 0) or np.any(np.abs(v.sum(axis=1) - 1.0) > 1e-9):
        raise InputError("every confidence vector must be a probability distribution")
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(v > 0, v * np.log2(v), 0.0)
    ents = -terms.sum(axis=1)
    return int(np.flatnonzero(ents <= ents.min() + ENTROPY_TIE_ATOL)[0])


def _confidence_vectors(accs: np.ndarray, n_classes: int, noise: np.ndarray, sigma: float) -> np.ndarray:
    """Softmax outputs putting mass ``acc`` on the top class, jittered in logit space."""
    accs = np.clip(accs, 1.0 / n_classes, 1.0 - 1e-9)
    base = np.repeat(((1.0 - accs) / (n_classes - 1))[:, None], n_classes, axis=1)
    base[:, 0] = accs
    logits = np.log(base) + sigma * noise
    logits -= logits.max(axis=1, keepdims=True)
    w = np.exp(logits)
    return w / w.sum(axis=1, keepdims=True)


def _pick(values: Sequence[float]) -> int:
    values = list(values)
    best = min(values)
    return next(i for i, v in enumerate(values) if v <= best)


def bits_objective(state: EdgeSimState, config: EdgeConfig, arrivals: int) -> list[float]:
    u = config.bit_scale
    q = state.comm_queue / u
    out = []
    for b in config.bit_options:
        a_bits = arrivals * config.sample_size * b / u
        miss = arrivals * (1.0 - config.accuracy(state.active_learner, b))
        out.append(q * a_bits + config.V * config.accuracy_weight * miss)
    return out


def power_objective(state: EdgeSimState, config: EdgeConfig, gain: float) -> list[float]:
    u = config.bit_scale
    tau = config.slot_duration
    out = []
    for p in config.power_options:
        r = config.rate(p, gain)
        airtime = min(tau, state.comm_queue / r) if r > 0 else 0.0
        out.append(-(state.comm_queue / u) * (r * tau / u) + config.V * p * airtime)
    return out


def cpu_objective(state: EdgeSimState, config: EdgeConfig) -> list[float]:
    tau, c = config.slot_duration, config.cycles_per_sample
    z = state.comp_queue + state.incoming
    out = []
    for f in config.cpu_options:
        busy = min(tau, z * c / f)
        out.append(-z * (f * tau / c) + config.V * config.kappa * f**3 * busy)
    return out


def _draw(config: EdgeConfig, rng: np.random.Generator) -> tuple[int, float, np.ndarray]:
    """Fixed draw order per slot keeps runs with different controls paired."""
    arrivals = int(rng.poisson(config.arrival_rate))
    gain = float(config.channel.snr_blocks(1, rng)[0])
    noise = rng.standard_normal((len(config.learners), config.n_classes))
    return arrivals, gain, noise


def step(state: EdgeSimState, config: EdgeConfig, rng: np.random.Generator) -> tuple[EdgeSimState, SlotRecord]:
    arrivals, gain, noise = _draw(config, rng)
    tau = config.slot_duration

    b = config.bit_options[_pick(bits_objective(state, config, arrivals))]
    p_idx = _pick(power_objective(state, config, gain))
    p = config.power_options[p_idx]
    f = config.cpu_options[_pick(cpu_objective(state, config))]

    r = config.rate(p, gain)
    tx_bits = min(state.comm_queue, r * tau)
    airtime = tx_bits / r if r > 0 else 0.0
    delivered = state.comm_samples * tx_bits / state.comm_queue if state.comm_queue > 0 else 0.0

    z = state.comp_queue + state.incoming
    served = min(z, f * tau / config.cycles_per_sample)
    cpu_time = served * config.cycles_per_sample / f
    slot_energy = p * airtime + config.kappa * f**3 * cpu_time

    # learner switching on the smoothed output entropy
    accs = np.array([lc.accuracy(b) for lc in config.learners])
    vectors = _confidence_vectors(accs, config.n_classes, noise, config.confidence_noise)
    alpha = config.entropy_smoothing
    smoothed = vectors if state.smoothed is None else (1 - alpha) * state.smoothed + alpha * vectors
    learner = ensemble_select(smoothed)
    acc = config.accuracy(learner, b)

    comm_queue = max(state.comm_queue - tx_bits, 0.0) + arrivals * config.sample_size * b
    comm_samples = max(state.comm_samples - delivered, 0.0) + arrivals
    if comm_queue == 0.0:
        comm_samples = 0.0
    new = replace(
        state,
        comm_queue=comm_queue,
        comm_samples=comm_samples,
        comp_queue=z - served,
        incoming=delivered,
        energy=state.energy + slot_energy,
        active_learner=learner,
        smoothed=smoothed,
        slot=state.slot + 1,
    )
    rec = SlotRecord(
        arrivals=arrivals, gain=gain, bits=b, power=p, cpu=f, airtime=airtime, cpu_time=cpu_time,
        energy=slot_energy, tx_bits=tx_bits, served=served, comm_queue=comm_queue,
        comm_samples=comm_samples, comp_queue=z - served, learner=learner, accuracy=acc,
    )
    return new, rec


@dataclass(frozen=True)
class RunSummary:
    avg_delay: float  # slots, by Little's law on post-burn-in backlog
    avg_energy_per_slot: float  # J
    avg_accuracy: float
    stable: bool
    feasible: bool
    meets_delay: bool


@dataclass(frozen=True)
class RunTrace:
    summary: RunSummary
    records: tuple[SlotRecord, ...]
    final_state: EdgeSimState


def queue_slope_stable(series: np.ndarray, slack: float) -> bool:
    """No sustained growth: the fitted rise over the last half stays within slack + 25% of its mean."""
    half = np.asarray(series[len(series) // 2:], dtype=float)
    if half.size < 2:
        return True
    t = np.arange(half.size, dtype=float)
    slope = np.polyfit(t, half, 1)[0]
    return bool(slope * half.size <= 0.25 * half.mean() + slack)


def feasible(config: EdgeConfig, gains: np.ndarray) -> bool:
    """Can the largest power / CPU keep up with the smallest-bit arrival stream?"""
    if config.arrival_rate == 0:
        return True
    tau = config.slot_duration
    mean_rate = np.mean([config.rate(max(config.power_options), g) for g in gains]) * tau
    need_bits = config.arrival_rate * config.sample_size * min(config.bit_options)
    cpu = max(config.cpu_options) * tau / config.cycles_per_sample
    return bool(mean_rate > need_bits and cpu > config.arrival_rate)


def run(config: EdgeConfig, seed: int) -> RunTrace:
    if config.horizon < 1000:
        raise ConfigError("horizon must be at least 1000 slots")
    rng = np.random.default_rng(seed)
    state = EdgeSimState()
    records = []
    for _ in range(config.horizon):
        state, rec = step(state, config, rng)
        records.append(rec)

    start = int(config.burn_in * config.horizon)
    post = records[start:]
    backlog = np.array([r.comm_samples + r.comp_queue for r in post])
    arrivals = np.array([r.arrivals for r in post], dtype=float)
    mean_arr = arrivals.mean()
    avg_delay = float(backlog.mean() / mean_arr) if mean_arr > 0 else 0.0
    avg_energy = float(np.mean([r.energy for r in post]))
    acc = np.array([r.accuracy for r in post])
    avg_acc = float(np.sum(acc * arrivals) / arrivals.sum()) if arrivals.sum() > 0 else float("nan")

    slack = config.arrival_rate * config.sample_size * max(config.bit_options) + 1.0
    comm = np.array([r.comm_queue for r in records])
    comp = np.array([r.comp_queue for r in records])
    stable = queue_slope_stable(comm, slack) and queue_slope_stable(comp, config.arrival_rate + 1.0)
    gains = np.array([r.gain for r in records])
    summary = RunSummary(
        avg_delay=avg_delay,
        avg_energy_per_slot=avg_energy,
        avg_accuracy=avg_acc,
        stable=stable,
        feasible=feasible(config, gains),
        meets_delay=avg_delay <= config.delay_constraint,
    )
    return RunTrace(summary, tuple(records), state)


def recompute_energy(records: Sequence[SlotRecord], kappa: float) -> float:
    total = 0.0
    for r in records:
        total = total + (r.power * r.airtime + kappa * r.cpu**3 * r.cpu_time)
    return total


@dataclass(frozen=True)
class SweepPoint:
    V: float
    accuracy_weight: float
    avg_delay: float
    avg_energy: float
    avg_accuracy: float
    stable: bool
    delay_se: float = 0.0
    energy_se: float = 0.0


EDGE_COLUMNS = ("V", "lambda", "avg_delay", "avg_energy", "avg_accuracy", "stable")


def sweep(config: EdgeConfig, Vs: Sequence[float], lambdas: Sequence[float], seeds: Sequence[int]) -> list[SweepPoint]:
    """Seed-averaged summaries over a (V, lambda) grid; the same seeds at every point."""
    out = []
    for lam in lambdas:
        for v in Vs:
            cfg = replace(config, V=float(v), accuracy_weight=float(lam))
            sums = [run(cfg, s).summary for s in seeds]
            d = np.array([s.avg_delay for s in sums])
            e = np.array([s.avg_energy_per_slot for s in sums])
            a = np.array([s.avg_accuracy for s in sums])
            n = len(sums)
            out.append(
                SweepPoint(
                    V=float(v),
                    accuracy_weight=float(lam),
                    avg_delay=float(d.mean()),
                    avg_energy=float(e.mean()),
                    avg_accuracy=float(a.mean()),
                    stable=all(s.stable for s in sums),
                    delay_se=float(d.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0,
                    energy_se=float(e.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0,
                )
            )
    return out


def sweep_rows(points: Sequence[SweepPoint]) -> list[dict]:
    return [
        {"V": p.V, "lambda": p.accuracy_weight, "avg_delay": p.avg_delay, "avg_energy": p.avg_energy,
         "avg_accuracy": p.avg_accuracy, "stable": int(p.stable)}
        for p in points
    ]


def pareto_frontier(points: Sequence[tuple[float, float]]) -> list[tuple[float, float]]:
    """Non-dominated (delay, energy) pairs sorted by delay; energy strictly falls along it."""
    front = []
    for d, e in sorted(points):
        if not front or e < front[-1][1]:
            front.append((d, e))
    return front


def energy_at_delay(frontier: Sequence[tuple[float, float]], delay: float) -> float:
    """Piecewise-linear energy on a frontier; nan outside its delay range."""
    ds = np.array([d for d, _ in frontier])
    es = np.array([e for _, e in frontier])
    if delay < ds[0] or delay > ds[-1]:
        return float("nan")
    return float(np.interp(delay, ds, es))


# -- federated averaging ----------------------------------------------


@dataclass(frozen=True)
class FedConfig:
    """Devices with losses f_i(w) = a_i/2 * ||w - c_i||^2 and weights p_i = n_i / sum n."""

    centers: np.ndarray
    curvatures: np.ndarray
    counts: np.ndarray
    rounds: int = 500
    step: float | None = None  # defaults to 1 / (2 max a_i)
    local_steps: int = 1

    def __post_init__(self) -> None:
        c = np.asarray(self.centers, dtype=float)
        if c.ndim == 1:
            c = c[:, None]
        a = np.asarray(self.curvatures, dtype=float).ravel()
        n = np.asarray(self.counts, dtype=float).ravel()
        if not (c.shape[0] == a.size == n.size) or a.size == 0:
            raise ConfigError("centers, curvatures and counts must describe the same devices")
        if np.any(a <= 0):
            raise ConfigError("curvatures must be positive")
        if np.any(n < 0) or n.sum() <= 0:
            raise ConfigError("example counts must be non-negative with a positive total")
        if self.rounds < 1 or self.local_steps < 1:
            raise ConfigError("rounds and local_steps must be >= 1")
        if self.step is not None and self.step <= 0:
            raise ConfigError("step must be positive")
        object.__setattr__(self, "centers", c)
        object.__setattr__(self, "curvatures", a)
        object.__setattr__(self, "counts", n)

    @property
    def weights(self) -> np.ndarray:
        return self.counts / self.counts.sum()

    @property
    def step_size(self) -> float:
        return self.step if self.step is not None else 1.0 / (2.0 * self.curvatures.max())

    def optimum(self) -> np.ndarray:
        pa = self.weights * self.curvatures
        return (pa[:, None] * self.centers).sum(axis=0) / pa.sum()

    def objective(self, w: np.ndarray) -> float:
        d = ((w[None, :] - self.centers) ** 2).sum(axis=1)
        return float(np.sum(self.weights * 0.5 * self.curvatures * d))


@dataclass(frozen=True)
class FedResult:
    w_final: np.ndarray
    w_star: np.ndarray
    objective_trace: tuple[float, ...]
    error_trace: tuple[float, ...]
    converged: bool
    step_stable: bool


def fedavg(config: FedConfig, w0=None, tol: float = 1e-6) -> FedResult:
    """Local gradient steps from the global iterate, then a p-weighted average."""
    d = config.centers.shape[1]
    w = np.zeros(d) if w0 is None else np.asarray(w0, dtype=float).reshape(d)
    w_star = config.optimum()
    eta = config.step_size
    p = config.weights
    obj, err = [config.objective(w)], [float(np.linalg.norm(w - w_star))]
    for _ in range(config.rounds):
        local = np.repeat(w[None, :], len(p), axis=0)
        for _ in range(config.local_steps):
            local = local - eta * config.curvatures[:, None] * (local - config.centers)
        w = (p[:, None] * local).sum(axis=0)
        if not np.all(np.isfinite(w)):
            break
        obj.append(config.objective(w))
        err.append(float(np.linalg.norm(w - w_star)))
    converged = bool(np.all(np.isfinite(w)) and err[-1] <= tol)
    return FedResult(
        w_final=w,
        w_star=w_star,
        objective_trace=tuple(obj),
        error_trace=tuple(err),
        converged=converged,
        step_stable=eta <= 2.0 / config.curvatures.max(),
    )
