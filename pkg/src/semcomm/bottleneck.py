"""Goal-oriented compression: sufficient statistics and the information bottleneck.

The bottleneck solver runs the self-consistent iteration

    p(z|x)   ∝ p(z) exp(-beta * KL(p(theta|x) || p(theta|z)))
    p(z)     = sum_x p(x) p(z|x)
    p(theta|z) = sum_x p(theta|x) p(x|z)

in the log domain. Each sweep is a block-coordinate descent step on
I(X;Z) + beta * E[KL], so the recorded objective I(X;Z) - beta*I(Z;Theta)
never increases.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Hashable, Sequence

import numpy as np
from scipy.special import logsumexp

from .errors import ConfigError, NumericError
from .measures import mutual_information

LN2 = np.log(2.0)


@dataclass(frozen=True)
class RelevanceProblem:
    joint: np.ndarray  # p(x, theta)
    z_cardinality: int
    beta: float

    def __post_init__(self) -> None:
        joint = np.asarray(self.joint, dtype=float)
        if joint.ndim != 2:
            raise ConfigError("joint must be a 2-D table p(x, theta)")
        if not np.all(np.isfinite(joint)) or np.any(joint < 0):
            raise ConfigError("joint entries must be finite and non-negative")
        if abs(joint.sum() - 1.0) > 1e-12:
            raise ConfigError(f"joint must sum to 1 (got {joint.sum():.15g})")
        if int(self.z_cardinality) < 1:
            raise ConfigError("z_cardinality must be >= 1")
        if not self.beta >= 0:
            raise ConfigError("beta must be non-negative")
        object.__setattr__(self, "joint", joint)
        object.__setattr__(self, "z_cardinality", int(self.z_cardinality))
        object.__setattr__(self, "beta", float(self.beta))


@dataclass(frozen=True)
class IBSolution:
    encoder: np.ndarray  # p(z|x), rows indexed by x
    marginal: np.ndarray  # p(z)
    decoder: np.ndarray  # p(theta|z); rows of unused clusters are uniform
    objective_trace: tuple[float, ...]
    converged: bool
    iterations: int
    I_XZ: float
    I_ZTheta: float
    beta: float

    @property
    def objective(self) -> float:
        return self.I_XZ - self.beta * self.I_ZTheta


@dataclass
class _Reduced:
    px: np.ndarray
    log_ptx: np.ndarray  # log p(theta|x)
    ptx: np.ndarray
    rows: np.ndarray  # kept x indices
    cols: np.ndarray  # kept theta indices
    n_x: int
    n_theta: int


def _reduce(joint: np.ndarray) -> _Reduced:
    """Drop outcomes with zero mass; they carry no relevance information."""
    rows = np.flatnonzero(joint.sum(axis=1) > 0)
    cols = np.flatnonzero(joint.sum(axis=0) > 0)
    sub = joint[np.ix_(rows, cols)]
    px = sub.sum(axis=1)
    ptx = sub / px[:, None]
    with np.errstate(divide="ignore"):
        log_ptx = np.log(ptx)
    return _Reduced(px, log_ptx, ptx, rows, cols, joint.shape[0], joint.shape[1])


def _consistent(px: np.ndarray, ptx: np.ndarray, enc: np.ndarray):
    pz = px @ enc
    pxz = px[:, None] * enc  # p(x, z)
    with np.errstate(invalid="ignore", divide="ignore"):
        ptz = (pxz.T @ ptx) / pz[:, None]
    ptz[pz <= 0] = 0.0
    return pz, pxz, ptz


def _objective_bits(px, ptx, enc, beta) -> tuple[float, float]:
    pz, pxz, ptz = _consistent(px, ptx, enc)
    i_xz = mutual_information(pxz)
    i_zt = mutual_information(pz[:, None] * ptz)
    return i_xz, i_zt


def _iterate(red: _Reduced, enc: np.ndarray, beta: float, tol: float, max_iter: int):
    px, ptx, log_ptx = red.px, red.ptx, red.log_ptx
    trace = []
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        pz, _, ptz = _consistent(px, ptx, enc)
        i_xz, i_zt = _objective_bits(px, ptx, enc, beta)
        trace.append(i_xz - beta * i_zt)
        with np.errstate(divide="ignore", invalid="ignore"):
            log_pz = np.log(pz)
            log_ptz = np.log(ptz)
            # KL(p(theta|x) || p(theta|z)) in nats; 0 log 0 terms vanish
            diff = log_ptx[:, None, :] - log_ptz[None, :, :]
            prod = np.where(ptx[:, None, :] > 0, ptx[:, None, :] * diff, 0.0)
            kl = prod.sum(axis=2)
            logits = log_pz[None, :] - beta * kl if beta > 0 else np.broadcast_to(log_pz, kl.shape).copy()
        if beta > 0:
            # beta * inf on clusters that miss support of p(theta|x)
            logits = np.where(np.isnan(logits), -np.inf, logits)
        norm = logsumexp(logits, axis=1, keepdims=True)
        if not np.all(np.isfinite(norm)):
            raise NumericError("encoder update produced a row with no finite weight")
        new = np.exp(logits - norm)
        change = float(np.max(np.abs(new - enc)))
        enc = new
        if change < tol:
            converged = True
            break
    i_xz, i_zt = _objective_bits(px, ptx, enc, beta)
    trace.append(i_xz - beta * i_zt)
    return enc, trace, converged, it


def ib_solve(
    problem: RelevanceProblem,
    restarts: int = 10,
    tol: float = 1e-10,
    max_iter: int = 2000,
    seed: int = 0,
) -> IBSolution:
    """Best (lowest final objective) of ``restarts`` Dirichlet(1) initializations."""
    if restarts < 1:
        raise ConfigError("restarts must be >= 1")
    if max_iter < 1:
        raise ConfigError("max_iter must be >= 1")
    red = _reduce(problem.joint)
    nz = problem.z_cardinality
    children = np.random.SeedSequence(seed).spawn(restarts)
    best = None
    for child in children:
        rng = np.random.default_rng(child)
        enc0 = rng.dirichlet(np.ones(nz), size=red.px.size)
        enc, trace, converged, it = _iterate(red, enc0, problem.beta, tol, max_iter)
        if not np.all(np.isfinite(trace)):
            raise NumericError("non-finite objective in bottleneck iteration")
        if best is None or trace[-1] < best[1][-1] - 1e-12:
            best = (enc, trace, converged, it)

    enc, trace, converged, it = best
    full_enc = np.empty((red.n_x, nz))
    pz, pxz, ptz = _consistent(red.px, red.ptx, enc)
    full_enc[:] = pz  # outcomes with zero mass: any row works, use the marginal
    full_enc[red.rows] = enc
    decoder = np.full((nz, red.n_theta), 0.0)
    decoder[:, red.cols] = ptz
    unused = pz <= 0
    decoder[unused] = 1.0 / red.n_theta
    i_xz = mutual_information(pxz)
    i_zt = mutual_information(pz[:, None] * ptz)
    return IBSolution(
        encoder=full_enc,
        marginal=pz,
        decoder=decoder,
        objective_trace=tuple(float(v) for v in trace),
        converged=converged,
        iterations=it,
        I_XZ=i_xz,
        I_ZTheta=i_zt,
        beta=problem.beta,
    )


def information_plane(
    joint: np.ndarray,
    z_cardinality: int,
    betas: Sequence[float],
    restarts: int = 10,
    tol: float = 1e-10,
    max_iter: int = 2000,
    seed: int = 0,
) -> list[IBSolution]:
    """One solve per beta (sorted ascending); each beta gets its own seed stream."""
    betas = [float(b) for b in betas]
    if betas != sorted(betas):
        raise ConfigError("beta grid must be sorted ascending")
    seeds = np.random.SeedSequence(seed).spawn(len(betas))
    out = []
    for b, ss in zip(betas, seeds):
        problem = RelevanceProblem(joint, z_cardinality, b)
        out.append(ib_solve(problem, restarts, tol, max_iter, int(ss.generate_state(1)[0])))
    return out


# -- sufficient statistics --------------------------------------------


def _statistic_labels(statistic, n_x: int, x_labels: Sequence[Hashable] | None) -> list:
    if callable(statistic):
        if x_labels is None:
            x_labels = range(n_x)
        return [statistic(x) for x in x_labels]
    labels = list(statistic)
    if len(labels) != n_x:
        raise ConfigError(f"statistic has {len(labels)} values for {n_x} outcomes")
    return labels


def pushforward(joint: np.ndarray, labels: Sequence[Hashable]) -> tuple[list, np.ndarray]:
    """p(t, theta) = sum over x with t(x) = t of p(x, theta)."""
    groups: dict = {}
    for i, t in enumerate(labels):
        groups.setdefault(t, []).append(i)
    keys = list(groups)
    table = np.array([joint[groups[k]].sum(axis=0) for k in keys])
    return keys, table


@dataclass(frozen=True)
class SufficiencyReport:
    I_X_Theta: float
    I_T_Theta: float
    gap: float
    tol: float = 1e-10
    n_statistic_values: int = field(default=0)

    @property
    def is_sufficient(self) -> bool:
        return self.gap <= self.tol


def sufficiency_check(
    joint: np.ndarray,
    statistic: Callable | Sequence[Hashable],
    x_labels: Sequence[Hashable] | None = None,
    tol: float = 1e-10,
) -> SufficiencyReport:
    joint = np.asarray(joint, dtype=float)
    if joint.shape[0] > 2**20:
        raise ConfigError("observation space larger than 2^20 outcomes")
    labels = _statistic_labels(statistic, joint.shape[0], x_labels)
    keys, table = pushforward(joint, labels)
    i_x = mutual_information(joint)
    i_t = mutual_information(table)
    # identity statistics lose nothing by construction
    gap = 0.0 if len(keys) == joint.shape[0] else max(i_x - i_t, 0.0)
    return SufficiencyReport(i_x, i_t, gap, tol, len(keys))


def factorization_check(
    likelihood: np.ndarray,
    statistic: Callable | Sequence[Hashable],
    x_labels: Sequence[Hashable] | None = None,
    rtol: float = 1e-10,
) -> bool:
    """Fisher-Neyman test: p(x;θ)/p(x';θ) is θ-free whenever t(x) = t(x').

    Accepts either p(x|θ) or a joint p(x, θ); a θ prior cancels in the ratio.
    Pairs with both entries zero are skipped; a single zero fails the test.
    """
    lik = np.asarray(likelihood, dtype=float)
    labels = _statistic_labels(statistic, lik.shape[0], x_labels)
    if lik.shape[1] <= 1:
        return True
    groups: dict = {}
    for i, t in enumerate(labels):
        groups.setdefault(t, []).append(i)
    for members in groups.values():
        ref = lik[members[0]]
        for i in members[1:]:
            row = lik[i]
            both_zero = (ref == 0) & (row == 0)
            one_zero = (ref == 0) ^ (row == 0)
            if np.any(one_zero):
                return False
            keep = ~both_zero
            if not np.any(keep):
                continue
            ratio = row[keep] / ref[keep]
            if ratio.max() - ratio.min() > rtol * ratio.max():
                return False
    return True


def bernoulli_model(n: int, thetas: Sequence[float], prior: Sequence[float] | None = None):
    """Joint p(x, θ) for n iid Bernoulli(θ) draws; x enumerated as bit tuples."""
    thetas = np.asarray(thetas, dtype=float)
    prior = np.full(thetas.size, 1.0 / thetas.size) if prior is None else np.asarray(prior, float)
    xs = [tuple((i >> (n - 1 - j)) & 1 for j in range(n)) for i in range(2**n)]
    ones = np.array([sum(x) for x in xs])
    lik = thetas[None, :] ** ones[:, None] * (1 - thetas[None, :]) ** (n - ones[:, None])
    return xs, lik * prior[None, :]
