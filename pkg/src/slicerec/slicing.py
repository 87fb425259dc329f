"""Slices, maximum-likelihood slice estimators and slice error rates.

Interval ``a`` (1-based) carries the label ``a - 1``; slice ``i`` reads bit
``i - 1`` of the label, so slice 1 is the least significant bit and slice ``m``
the sign of ``x``.  Prior slice bits are packed into an integer pattern with
slice 1 as bit 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq
from scipy.special import logsumexp

from .channel import (
    ChannelParams,
    IntegrationError,
    binary_entropy,
    entropy_bits,
    graded_edges,
    legendre_panels,
    log_interval_weights,
    sample_arrays,
)
from .quantizer import (
    IntervalPartition,
    OptimizerSettings,
    equiprobable_partition,
    interval_probabilities,
    optimize_partition,
    partition_from_dict,
    partition_to_dict,
)


@dataclass(frozen=True)
class SliceDesign:
    partition: IntervalPartition
    m: int

    def __post_init__(self):
        if self.m < 1 or self.partition.t != 2**self.m:
            raise ValueError(f"partition has t={self.partition.t} intervals, expected 2**{self.m}")

    @property
    def t(self) -> int:
        return self.partition.t

    def labels(self, x):
        return np.asarray(self.partition.index(x)) - 1

    def slice_value(self, i: int, x):
        if not 1 <= i <= self.m:
            raise IndexError(f"slice index {i} outside 1..{self.m}")
        out = (self.labels(x) >> (i - 1)) & 1
        return int(out) if np.ndim(out) == 0 else out.astype(np.uint8)

    def slice_bits(self, x) -> np.ndarray:
        """Array of shape ``(m, len(x))`` with row ``i-1`` holding S_i(x)."""
        lab = np.atleast_1d(self.labels(x))
        return ((lab[None, :] >> np.arange(self.m)[:, None]) & 1).astype(np.uint8)

    def class_masks(self, i: int, pattern: int) -> tuple[np.ndarray, np.ndarray]:
        """Intervals whose label has low bits ``pattern`` and bit i-1 equal to 0 / 1."""
        lab = np.arange(self.t)
        low = lab & ((1 << (i - 1)) - 1)
        bit = (lab >> (i - 1)) & 1
        return (low == pattern) & (bit == 0), (low == pattern) & (bit == 1)


def pack_prior(bits) -> np.ndarray:
    """Pack rows of prior slice bits (slice 1 first) into integer patterns."""
    bits = np.asarray(bits)
    if bits.size == 0:
        return np.zeros(bits.shape[-1] if bits.ndim > 1 else 1, dtype=np.int64)
    bits = np.atleast_2d(bits).astype(np.int64)
    return (bits << np.arange(bits.shape[0])[:, None]).sum(axis=0)


@dataclass(frozen=True)
class SliceEstimator:
    """Piecewise-constant ML decision for one slice, per prior-bit pattern.

    For pattern ``p`` the decision is ``first[p]`` left of ``boundaries[p][0]``
    and flips at every boundary.  Points exactly on a boundary decide 1.
    """

    slice_index: int
    boundaries: tuple[tuple[float, ...], ...]
    first: tuple[int, ...]
    flagged: tuple[int, ...] = ()

    def decide(self, x_prime, prior=0):
        xp = np.atleast_1d(np.asarray(x_prime, dtype=float))
        prior = np.broadcast_to(np.asarray(prior, dtype=np.int64), xp.shape)
        out = np.empty(xp.shape, dtype=np.uint8)
        for p in np.unique(prior):
            sel = prior == p
            b = np.asarray(self.boundaries[p])
            right = np.searchsorted(b, xp[sel], side="right")
            left = np.searchsorted(b, xp[sel], side="left")
            dec = (self.first[p] ^ (right & 1)).astype(np.uint8)
            dec[right != left] = 1
            out[sel] = dec
        return out if np.ndim(x_prime) else int(out[0])


def _log_class_ratio(params: ChannelParams, design: SliceDesign, i: int, pattern: int, x_prime):
    """log P^{pattern,0}(x') - log P^{pattern,1}(x'); the X' density cancels."""
    m0, m1 = design.class_masks(i, pattern)
    lw = log_interval_weights(params, design.partition.thresholds, x_prime)
    with np.errstate(invalid="ignore"):
        return logsumexp(lw[:, m0], axis=1) - logsumexp(lw[:, m1], axis=1)


def _search_grid(params: ChannelParams, design: SliceDesign) -> np.ndarray:
    L = 1.25 * params.cutoff
    sx = params.conditional_std / params.shrink
    step = max(sx / 32, 2 * L / 20000)
    parts = [np.arange(-L, L + step, step)]
    dense = np.linspace(-12, 12, 97) * sx
    for tau in design.partition.thresholds:
        parts.append(tau / params.shrink + dense)
    return np.unique(np.concatenate(parts))


def _noiseless_estimator(design: SliceDesign, i: int) -> SliceEstimator:
    th = design.partition.thresholds
    flips = tuple(th[k - 1] for k in range(1, design.t) if k % (1 << (i - 1)) == 0)
    n = 1 << (i - 1)
    return SliceEstimator(i, (flips,) * n, (0,) * n)


def build_estimator(params: ChannelParams, design: SliceDesign, i: int) -> SliceEstimator:
    """ML estimator of slice ``i`` given Bob's x' and Alice's slices 1..i-1."""
    if not 1 <= i <= design.m:
        raise IndexError(f"slice index {i} outside 1..{design.m}")
    if params.sigma_noise == 0:
        return _noiseless_estimator(design, i)
    grid = _search_grid(params, design)
    probs = interval_probabilities(params, design.partition)
    xtol = 1e-13 * max(1.0, params.cutoff)
    boundaries, first, flagged = [], [], []
    for p in range(1 << (i - 1)):
        m0, m1 = design.class_masks(i, p)
        if probs[m0 | m1].sum() == 0:
            flagged.append(p)
            boundaries.append(())
            first.append(1)
            continue
        d = _log_class_ratio(params, design, i, p, grid)
        sign = np.where(d > 0, 1, -1)
        cross = np.nonzero(sign[1:] != sign[:-1])[0]
        f = lambda v: float(_log_class_ratio(params, design, i, p, [v])[0])
        roots = []
        for k in cross:
            a, b = grid[k], grid[k + 1]
            fa, fb = f(a), f(b)
            if not (np.isfinite(fa) and np.isfinite(fb)) or fa * fb > 0:
                roots.append(0.5 * (a + b))
            else:
                roots.append(brentq(f, a, b, xtol=xtol, rtol=4 * np.finfo(float).eps))
        boundaries.append(tuple(roots))
        first.append(0 if sign[0] > 0 else 1)
    return SliceEstimator(i, tuple(boundaries), tuple(first), tuple(flagged))


def build_estimators(params: ChannelParams, design: SliceDesign) -> list[SliceEstimator]:
    return [build_estimator(params, design, i) for i in range(1, design.m + 1)]


@dataclass(frozen=True)
class SliceErrorProfile:
    e: tuple[float, ...]
    h_e: tuple[float, ...]
    i_e: float
    # confusion[i-1][a][b] = P(S_i = a, estimate = b)
    confusion: tuple = field(default=(), compare=False)

    @classmethod
    def from_rates(cls, e, confusion=()) -> "SliceErrorProfile":
        e = tuple(float(v) for v in e)
        h = tuple(float(binary_entropy(v)) for v in e)
        return cls(e, h, float(sum(h)), tuple(confusion))

    def conditional_entropies(self) -> list[float]:
        """H(S_i | estimate_i) for each slice, from the confusion tables."""
        out = []
        for c in self.confusion:
            c = np.asarray(c)
            out.append(entropy_bits(c.ravel()) - entropy_bits(c.sum(axis=0)))
        return out


def _slice_confusion(params: ChannelParams, design: SliceDesign, est: SliceEstimator) -> np.ndarray:
    i = est.slice_index
    th = np.asarray(design.partition.thresholds)
    L = params.cutoff
    s = params.conditional_std
    coarse = min(max(s, L / 64), L / 16)
    sd = params.xprime_std
    conf = np.zeros((2, 2))
    for p in range(1 << (i - 1)):
        bnd = np.asarray(est.boundaries[p])
        edges = graded_edges(-L, L, np.concatenate((bnd, th / params.shrink)), s, coarse)
        quad = legendre_panels(edges, 10)
        logp = -0.5 * (quad.nodes / sd) ** 2 - math.log(math.sqrt(2 * math.pi) * sd)
        w = np.exp(logp[:, None] + log_interval_weights(params, th, quad.nodes))
        if not np.all(np.isfinite(w)):
            raise IntegrationError("non-finite class density")
        m0, m1 = design.class_masks(i, p)
        dec = est.decide(quad.nodes, p)
        for a, mask in ((0, m0), (1, m1)):
            dens = w[:, mask].sum(axis=1) * quad.weights
            conf[a, 0] += dens[dec == 0].sum()
            conf[a, 1] += dens[dec == 1].sum()
    return conf


def slice_error_rates(
    params: ChannelParams, design: SliceDesign, estimators: list[SliceEstimator] | None = None
) -> SliceErrorProfile:
    """e_i = sum over prior patterns of the mass Bob's estimator gets wrong."""
    if params.sigma_noise == 0:
        probs = interval_probabilities(params, design.partition)
        conf = []
        for i in range(1, design.m + 1):
            bit = (np.arange(design.t) >> (i - 1)) & 1
            p1 = probs[bit == 1].sum()
            conf.append(((1 - p1, 0.0), (0.0, p1)))
        return SliceErrorProfile.from_rates([0.0] * design.m, conf)
    estimators = estimators or build_estimators(params, design)
    confs = [_slice_confusion(params, design, est) for est in estimators]
    e = [c[0, 1] + c[1, 0] for c in confs]
    return SliceErrorProfile.from_rates(e, [tuple(map(tuple, c)) for c in confs])


def monte_carlo_error_rates(
    params: ChannelParams,
    design: SliceDesign,
    count: int,
    seed: int,
    estimators: list[SliceEstimator] | None = None,
) -> SliceErrorProfile:
    """Empirical e_i with Bob conditioning on Alice's true prior slice bits."""
    x, xp = sample_arrays(params, count, seed)
    estimators = estimators or build_estimators(params, design)
    bits = design.slice_bits(x)
    e = []
    for i, est in enumerate(estimators, start=1):
        prior = pack_prior(bits[: i - 1]) if i > 1 else 0
        guess = est.decide(xp, prior)
        e.append(float(np.mean(guess != bits[i - 1])))
    return SliceErrorProfile.from_rates(e)


@dataclass(frozen=True)
class SliceSystem:
    """A designed slice system: channel, slices, estimators and their error rates."""

    params: ChannelParams
    design: SliceDesign
    estimators: tuple[SliceEstimator, ...]
    profile: SliceErrorProfile

    @property
    def m(self) -> int:
        return self.design.m

    def h_k(self) -> float:
        """H(S_1..m(X)), equal to H(T(X)) since the labels are invertible."""
        return entropy_bits(interval_probabilities(self.params, self.design.partition))

    def to_dict(self) -> dict:
        return {
            "channel": self.params.to_dict(),
            "partition": partition_to_dict(self.params, self.design.partition),
            "m": self.m,
            "estimators": [
                {
                    "slice": est.slice_index,
                    "patterns": [
                        {"prior": p, "first": est.first[p], "boundaries": list(est.boundaries[p])}
                        for p in range(len(est.boundaries))
                    ],
                    "flagged": list(est.flagged),
                }
                for est in self.estimators
            ],
            "e": list(self.profile.e),
            "h_e": list(self.profile.h_e),
            "i_e": self.profile.i_e,
            "confusion": [[list(r) for r in c] for c in self.profile.confusion],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SliceSystem":
        params, part = partition_from_dict(data["partition"])
        design = SliceDesign(part, int(data["m"]))
        ests = tuple(
            SliceEstimator(
                int(d["slice"]),
                tuple(tuple(float(v) for v in pat["boundaries"]) for pat in d["patterns"]),
                tuple(int(pat["first"]) for pat in d["patterns"]),
                tuple(d.get("flagged", ())),
            )
            for d in data["estimators"]
        )
        conf = tuple(tuple(tuple(r) for r in c) for c in data.get("confusion", ()))
        profile = SliceErrorProfile(tuple(data["e"]), tuple(data["h_e"]), float(data["i_e"]), conf)
        return cls(params, design, ests, profile)


def design_system(
    params: ChannelParams, m: int, opts: OptimizerSettings | None = None, partition: IntervalPartition | None = None
) -> SliceSystem:
    """Optimize a 2**m partition (unless given) and build estimators and error rates.

    Without noise I(T(X);X') = H(T(X)), so the equiprobable partition is optimal.
    """
    if partition is not None:
        part = partition
    elif params.sigma_noise == 0:
        part = equiprobable_partition(params, 2**m)
    else:
        part = optimize_partition(params, 2**m, opts)
    design = SliceDesign(part, m)
    ests = build_estimators(params, design)
    return SliceSystem(params, design, tuple(ests), slice_error_rates(params, design, ests))
