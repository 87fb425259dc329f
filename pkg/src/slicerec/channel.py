"""Gaussian source, additive Gaussian channel and quadrature helpers.

Alice draws ``x ~ N(0, sigma_source)`` and Bob observes ``x' = x + eps`` with
``eps ~ N(0, sigma_noise)``.  Every entropy in the package is expressed in bits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import log_ndtr

# Improper integrals are cut at this many standard deviations of X'.
CUTOFF_STDS = 8.0


class IntegrationError(ArithmeticError):
    """Raised when an integrand is not finite on a quadrature node."""


def make_rng(seed: int, *stream: int) -> np.random.Generator:
    """Counter-based generator (Philox) keyed by ``seed`` and a stream path."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), *map(int, stream)])))


def binary_entropy(p):
    """h(p) in bits with h(0) = h(1) = 0."""
    p = np.asarray(p, dtype=float)
    q = np.clip(p, 0.0, 1.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = -q * np.log2(q) - (1 - q) * np.log2(1 - q)
    out = np.where((q <= 0) | (q >= 1), 0.0, out)
    return float(out) if out.ndim == 0 else out


def entropy_bits(probs) -> float:
    p = np.asarray(probs, dtype=float)
    p = p[p > 0]
    return float(-(p * np.log2(p)).sum())


@dataclass(frozen=True)
class ChannelParams:
    sigma_source: float = 1.0
    sigma_noise: float = 1.0 / math.sqrt(3.0)

    def __post_init__(self):
        if not self.sigma_source > 0 or not math.isfinite(self.sigma_source):
            raise ValueError(f"sigma_source must be positive, got {self.sigma_source}")
        if not self.sigma_noise >= 0 or not math.isfinite(self.sigma_noise):
            raise ValueError(f"sigma_noise must be non-negative, got {self.sigma_noise}")

    @classmethod
    def from_snr(cls, snr: float, sigma_source: float = 1.0) -> "ChannelParams":
        if not snr > 0:
            raise ValueError(f"snr must be positive, got {snr}")
        return cls(sigma_source, sigma_source / math.sqrt(snr))

    def snr(self) -> float:
        if self.sigma_noise == 0:
            return math.inf
        return self.sigma_source**2 / self.sigma_noise**2

    def capacity(self) -> float:
        """I(X;X') = 1/2 log2(1 + SNR)."""
        return 0.5 * math.log2(1.0 + self.snr())

    @property
    def xprime_std(self) -> float:
        return math.hypot(self.sigma_source, self.sigma_noise)

    @property
    def shrink(self) -> float:
        """E[X | X'=x'] = shrink * x'."""
        return self.sigma_source**2 / self.xprime_std**2

    @property
    def conditional_std(self) -> float:
        """Standard deviation of X given X'."""
        return self.sigma_source * self.sigma_noise / self.xprime_std

    @property
    def cutoff(self) -> float:
        return CUTOFF_STDS * self.xprime_std

    def h_xprime(self) -> float:
        return 0.5 * math.log2(2 * math.pi * math.e * self.xprime_std**2)

    def to_dict(self) -> dict:
        return {"sigma_source": self.sigma_source, "sigma_noise": self.sigma_noise}


@dataclass(frozen=True)
class SamplePair:
    x: float
    x_prime: float


def sample_arrays(params: ChannelParams, count: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised draw of ``count`` pairs; returns ``(x, x_prime)`` arrays."""
    if int(count) != count or count < 1:
        raise ValueError(f"count must be a positive integer, got {count}")
    rng = make_rng(seed, 0)
    x = rng.normal(0.0, params.sigma_source, int(count))
    noise = rng.normal(0.0, 1.0, int(count)) * params.sigma_noise
    return x, x + noise


def sample_pairs(params: ChannelParams, count: int, seed: int) -> list[SamplePair]:
    x, xp = sample_arrays(params, count, seed)
    return [SamplePair(float(a), float(b)) for a, b in zip(x, xp)]


def joint_density(params: ChannelParams, x, x_prime):
    """f_{X,X'}(x, x') for the Gaussian source and channel."""
    if params.sigma_noise == 0:
        raise ValueError("joint density is degenerate for sigma_noise = 0")
    S, s = params.sigma_source, params.sigma_noise
    x = np.asarray(x, dtype=float)
    xp = np.asarray(x_prime, dtype=float)
    out = np.exp(-(x**2) / (2 * S**2) - (x - xp) ** 2 / (2 * s**2)) / (2 * math.pi * S * s)
    return float(out) if out.ndim == 0 else out


def xprime_density(params: ChannelParams, x_prime):
    sd = params.xprime_std
    xp = np.asarray(x_prime, dtype=float)
    return np.exp(-0.5 * (xp / sd) ** 2) / (math.sqrt(2 * math.pi) * sd)


def log_interval_weights(params: ChannelParams, thresholds, x_prime) -> np.ndarray:
    """log P(tau_{a-1} <= X < tau_a | X' = x') with shape ``(len(x_prime), t)``."""
    edges = np.concatenate(([-np.inf], np.asarray(thresholds, dtype=float), [np.inf]))
    mu = params.shrink * np.atleast_1d(np.asarray(x_prime, dtype=float))
    z = (edges[None, :] - mu[:, None]) / params.conditional_std
    lower = log_ndtr(z)
    upper = log_ndtr(-z)
    lo_up, hi_up = upper[:, :-1], upper[:, 1:]
    lo_low, hi_low = lower[:, :-1], lower[:, 1:]
    with np.errstate(divide="ignore", invalid="ignore"):
        from_upper = lo_up + np.log1p(-np.exp(hi_up - lo_up))
        from_lower = hi_low + np.log1p(-np.exp(lo_low - hi_low))
    return np.where(z[:, :-1] > 0, from_upper, from_lower)


@dataclass(frozen=True)
class Quadrature:
    nodes: np.ndarray
    weights: np.ndarray
    domain: tuple[float, float]

    def __post_init__(self):
        if len(self.nodes) != len(self.weights):
            raise ValueError("nodes and weights differ in length")

    def __len__(self) -> int:
        return len(self.nodes)


def legendre_panels(edges, order: int = 12) -> Quadrature:
    """Composite Gauss-Legendre rule on consecutive panels given by ``edges``."""
    edges = np.asarray(edges, dtype=float)
    if edges.ndim != 1 or len(edges) < 2 or np.any(np.diff(edges) <= 0):
        raise ValueError("edges must be a strictly increasing sequence of length >= 2")
    t, w = np.polynomial.legendre.leggauss(order)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    nodes = (mid[:, None] + half[:, None] * t[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return Quadrature(nodes, weights, (float(edges[0]), float(edges[-1])))


def uniform_legendre(lo: float, hi: float, panels: int = 64, order: int = 12) -> Quadrature:
    return legendre_panels(np.linspace(lo, hi, panels + 1), order)


def hermite_rule(order: int, std: float = 1.0, mean: float = 0.0) -> Quadrature:
    """Gauss-Hermite rule with the N(mean, std) weight folded into the weights.

    ``integrate_1d(g, hermite_rule(n, s))`` approximates E[g(Y)], Y ~ N(0, s);
    exact for polynomials of degree < 2n.
    """
    t, w = np.polynomial.hermite_e.hermegauss(order)
    return Quadrature(mean + std * t, w / math.sqrt(2 * math.pi), (-math.inf, math.inf))


def graded_edges(lo: float, hi: float, breakpoints, fine: float, coarse: float) -> np.ndarray:
    """Panel edges on [lo, hi] refined geometrically towards each breakpoint.

    Panels next to a breakpoint have width ``fine / 4`` and double outwards until
    they reach ``coarse``; away from breakpoints panels are ``coarse`` wide.
    """
    fine = max(fine, 1e-12 * (hi - lo))
    n = max(1, int(math.ceil((hi - lo) / coarse)))
    parts = [np.linspace(lo, hi, n + 1)]
    steps = [0.0]
    h = fine / 4
    while h < coarse:
        steps.append(h)
        h *= 2
    steps = np.array(steps)
    for b in np.asarray(breakpoints, dtype=float).ravel():
        if lo < b < hi:
            parts.append(b + steps)
            parts.append(b - steps)
    e = np.unique(np.concatenate(parts))
    e = e[(e >= lo) & (e <= hi)]
    keep = np.concatenate(([True], np.diff(e) > 1e-14 * (hi - lo)))
    e = e[keep]
    e[-1] = hi
    return e


def xprime_quadrature(params: ChannelParams, breakpoints=(), order: int = 10) -> Quadrature:
    """Rule for integrals over x' resolving features near ``breakpoints`` (in x')."""
    L = params.cutoff
    s = params.conditional_std
    coarse = min(max(s, L / 64), L / 16)
    if s >= coarse:
        # Integrands vary on the scale s; uniform panels already resolve them.
        breakpoints = ()
    fine = s if s > 0 else coarse
    return legendre_panels(graded_edges(-L, L, breakpoints, fine, coarse), order)


def integrate_1d(f: Callable, quad: Quadrature) -> float:
    vals = np.asarray(f(quad.nodes), dtype=float)
    if not np.all(np.isfinite(vals)):
        raise IntegrationError("integrand is not finite on a quadrature node")
    return float(np.dot(quad.weights, vals))


def integrate_2d(f: Callable, quad_x: Quadrature, quad_y: Quadrature) -> float:
    """Tensor-product rule; ``f`` is called with broadcastable grids ``(x, y)``."""
    X = quad_x.nodes[:, None]
    Y = quad_y.nodes[None, :]
    vals = np.asarray(f(X, Y), dtype=float)
    if not np.all(np.isfinite(vals)):
        raise IntegrationError("integrand is not finite on a quadrature node")
    return float(quad_x.weights @ vals @ quad_y.weights)


def h_xprime_quadrature(params: ChannelParams) -> float:
    """Differential entropy of X' by quadrature (closed form in ``h_xprime``)."""
    quad = xprime_quadrature(params)
    sd = params.xprime_std
    logp = -0.5 * (quad.nodes / sd) ** 2 - math.log(math.sqrt(2 * math.pi) * sd)
    return float(-np.dot(quad.weights, np.exp(logp) * logp)) / math.log(2)
