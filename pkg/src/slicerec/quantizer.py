"""Interval partitions of Alice's raw key space maximizing I(T(X); X')."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.optimize import minimize, minimize_scalar
from scipy.special import erf, ndtri

from .channel import (
    ChannelParams,
    IntegrationError,
    entropy_bits,
    log_interval_weights,
    xprime_quadrature,
)

LN2 = math.log(2.0)


class OptimizationError(RuntimeError):
    """The partition optimizer did not converge within its budget."""


@dataclass(frozen=True)
class IntervalPartition:
    thresholds: tuple[float, ...]

    def __post_init__(self):
        th = tuple(float(v) for v in self.thresholds)
        if any(not math.isfinite(v) for v in th):
            raise ValueError("thresholds must be finite")
        if any(b <= a for a, b in zip(th, th[1:])):
            raise ValueError("thresholds must be strictly increasing")
        object.__setattr__(self, "thresholds", th)

    @property
    def t(self) -> int:
        return len(self.thresholds) + 1

    def index(self, x):
        """1-based interval index a with tau_{a-1} <= x < tau_a."""
        a = np.searchsorted(np.asarray(self.thresholds), np.asarray(x, dtype=float), side="right") + 1
        return int(a) if np.ndim(a) == 0 else a

    def is_symmetric(self, tol: float = 1e-12) -> bool:
        th = np.asarray(self.thresholds)
        return bool(np.allclose(th, -th[::-1], atol=tol, rtol=0))

    def scaled(self, factor: float) -> "IntervalPartition":
        return IntervalPartition(tuple(factor * v for v in self.thresholds))


@dataclass(frozen=True)
class MutualInfoReport:
    h_t: float
    h_xprime: float
    h_joint: float
    mi: float


def interval_probabilities(params: ChannelParams, part: IntervalPartition) -> np.ndarray:
    edges = np.concatenate(([-np.inf], part.thresholds, [np.inf]))
    cdf = 0.5 * erf(edges / (math.sqrt(2.0) * params.sigma_source))
    return np.diff(cdf)


def interval_probability(params: ChannelParams, part: IntervalPartition, a: int) -> float:
    if not 1 <= a <= part.t:
        raise IndexError(f"interval index {a} outside 1..{part.t}")
    return float(interval_probabilities(params, part)[a - 1])


def mutual_information(params: ChannelParams, part: IntervalPartition) -> MutualInfoReport:
    if params.sigma_noise == 0:
        raise ValueError("mutual information needs sigma_noise > 0")
    probs = interval_probabilities(params, part)
    h_t = entropy_bits(probs)
    h_xp = params.h_xprime()
    if part.t == 1:
        return MutualInfoReport(0.0, h_xp, h_xp, 0.0)
    th = np.asarray(part.thresholds)
    quad = xprime_quadrature(params, th / params.shrink)
    sd = params.xprime_std
    logp = -0.5 * (quad.nodes / sd) ** 2 - math.log(math.sqrt(2 * math.pi) * sd)
    logf = logp[:, None] + log_interval_weights(params, th, quad.nodes)
    f = np.exp(logf)
    # 0 log 0 = 0
    integrand = np.where(f > 0, -f * logf, 0.0).sum(axis=1)
    if not np.all(np.isfinite(integrand)):
        raise IntegrationError("non-finite entropy integrand")
    h_joint = float(np.dot(quad.weights, integrand)) / LN2
    return MutualInfoReport(h_t, h_xp, h_joint, h_t + h_xp - h_joint)


@dataclass
class OptimizerSettings:
    max_iter: int = 500
    tol: float = 1e-7
    max_rounds: int = 40


def _n_free(t: int) -> int:
    return (t - 1) // 2


def symmetric_partition(positive, t: int) -> IntervalPartition:
    """Build the symmetric partition from its positive thresholds."""
    pos = np.sort(np.asarray(positive, dtype=float))
    mid = [0.0] if t % 2 == 0 else []
    return IntervalPartition(tuple(np.concatenate((-pos[::-1], mid, pos))))


def _positive(part: IntervalPartition) -> np.ndarray:
    th = np.asarray(part.thresholds)
    return th[th > 0]


def equiprobable_partition(params: ChannelParams, t: int) -> IntervalPartition:
    th = params.sigma_source * ndtri(np.arange(1, t) / t)
    if t % 2 == 0:
        th[t // 2 - 1] = 0.0
    return IntervalPartition(tuple(0.5 * (th - th[::-1])))


def equal_width_partition(t: int, width: float) -> IntervalPartition:
    th = (np.arange(1, t) - t / 2) * width
    return IntervalPartition(tuple(th))


def _to_gaps(pos: np.ndarray) -> np.ndarray:
    return np.log(np.diff(np.concatenate(([0.0], pos))))


def _from_gaps(u: np.ndarray) -> np.ndarray:
    return np.cumsum(np.exp(u))


def optimize_partition(params: ChannelParams, t: int, opts: OptimizerSettings | None = None) -> IntervalPartition:
    """Symmetric thresholds maximizing I(T(X); X').

    Nelder-Mead on log-gaps between consecutive positive thresholds, started
    from the equiprobable and from the best equal-width partition.  Each start
    is restarted from its incumbent until a round gains less than ``opts.tol``.
    """
    opts = opts or OptimizerSettings()
    if t < 2:
        raise ValueError(f"t must be >= 2, got {t}")
    k = _n_free(t)
    if k == 0:
        return symmetric_partition([], t)

    def neg_mi(u):
        if np.any(u > 5) or np.any(u < -30):
            return 1.0
        return -mutual_information(params, symmetric_partition(_from_gaps(u), t)).mi

    width = minimize_scalar(
        lambda w: -mutual_information(params, equal_width_partition(t, w)).mi,
        bounds=(1e-3 * params.sigma_source, 8.0 * params.sigma_source / t * 2),
        method="bounded",
        options={"xatol": 1e-6},
    ).x
    starts = [equiprobable_partition(params, t), equal_width_partition(t, width)]

    results = []
    for start in starts:
        u = _to_gaps(_positive(start))
        best = -neg_mi(u)
        for _ in range(opts.max_rounds):
            res = minimize(
                neg_mi,
                u,
                method="Nelder-Mead",
                options={"maxiter": opts.max_iter * k, "xatol": 1e-9, "fatol": 1e-14, "adaptive": k > 4},
            )
            gain = -res.fun - best
            if gain > 0:
                u, best = res.x, -res.fun
            if gain < opts.tol and res.success:
                break
        else:
            raise OptimizationError(f"no convergence for t={t} after {opts.max_rounds} rounds")
        results.append((best, symmetric_partition(_from_gaps(u), t)))

    top = max(mi for mi, _ in results)
    ties = [p for mi, p in results if top - mi <= 1e-12]
    return min(ties, key=lambda p: p.thresholds)


def partition_to_dict(params: ChannelParams, part: IntervalPartition) -> dict:
    report = mutual_information(params, part) if params.sigma_noise > 0 else None
    return {
        "snr": params.snr() if params.sigma_noise > 0 else None,
        "sigma_source": params.sigma_source,
        "sigma_noise": params.sigma_noise,
        "t": part.t,
        "thresholds": list(part.thresholds),
        "mi_report": asdict(report) if report else None,
    }


def partition_from_dict(data: dict) -> tuple[ChannelParams, IntervalPartition]:
    params = ChannelParams(data["sigma_source"], data["sigma_noise"])
    part = IntervalPartition(tuple(data["thresholds"]))
    if part.t != data["t"]:
        raise ValueError("threshold count does not match t")
    return params, part
