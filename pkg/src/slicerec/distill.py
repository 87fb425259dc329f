"""Leakage bounds, net key rates, privacy amplification and finite-d checks
of the random-slice identification argument."""

from __future__ import annotations

import itertools
import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.signal import fftconvolve

from .channel import binary_entropy, entropy_bits, make_rng
from .quantizer import mutual_information
from .slicing import SliceSystem


@dataclass(frozen=True)
class RateReport:
    h_k: float
    i0: float
    is_: float
    ie: float
    net_perfect: float
    net_bsc: float
    net_practical: float | None = None

    def to_dict(self) -> dict:
        return asdict(self)


def rate_report(system: SliceSystem, transcript_bits: int | None = None, l: int | None = None) -> RateReport:
    """H(K), the three leakage levels I0 <= Is <= Ie and the net rates.

    ``net_practical`` is filled in only when a measured ``transcript_bits`` for
    ``l`` key elements is supplied.
    """
    h_k = system.h_k()
    if system.params.sigma_noise == 0:
        i0 = 0.0
    else:
        mi = mutual_information(system.params, system.design.partition)
        i0 = mi.h_joint - mi.h_xprime
    is_ = float(sum(system.profile.conditional_entropies()))
    ie = system.profile.i_e
    practical = None
    if transcript_bits is not None:
        if not l:
            raise ValueError("l is required with transcript_bits")
        practical = h_k - transcript_bits / l
    return RateReport(h_k, i0, is_, ie, h_k - i0, h_k - ie, practical)


@dataclass(frozen=True)
class PaParams:
    key_elements: int
    h_k: float
    eve_information: float = 0.0
    transcript_bits: int = 0
    security_margin: float = 30.0

    def final_length(self) -> int:
        raw = self.key_elements * (self.h_k - self.eve_information) - self.transcript_bits - self.security_margin
        return max(0, math.floor(raw + 1e-9))


def toeplitz_hash(key, out_len: int, seed: int) -> np.ndarray:
    """Multiply ``key`` by a seeded random binary Toeplitz matrix over GF(2)."""
    key = np.asarray(key, dtype=np.uint8)
    n = len(key)
    if out_len > n:
        raise ValueError(f"output length {out_len} exceeds input length {n}")
    if out_len == 0:
        return np.zeros(0, dtype=np.uint8)
    diag = make_rng(seed, 2, n, out_len).integers(0, 2, n + out_len - 1, dtype=np.uint8)
    # T[i, j] = diag[i - j + n - 1], i.e. row i of T @ key is conv(diag, key)[i + n - 1].
    conv = fftconvolve(diag.astype(float), key.astype(float))[n - 1 : n - 1 + out_len]
    return (np.rint(conv).astype(np.int64) & 1).astype(np.uint8)


def privacy_amplify(key, pa: PaParams, seed: int) -> np.ndarray:
    return toeplitz_hash(key, pa.final_length(), seed)


def lemma1_probability(N: int, r: int) -> float:
    return (1.0 - 2.0**-r) ** (N - 1)


def lemma1_check(N: int, r: int, trials: int, seed: int) -> dict:
    """Empirical rate at which the first string of N uniform strings is the only
    one starting with its own first r bits."""
    if N < 1 or r < 1 or trials < 1:
        raise ValueError("N, r and trials must be positive")
    rng = make_rng(seed, 3)
    hits = 0
    done = 0
    chunk = max(1, 2_000_000 // N)
    while done < trials:
        n = min(chunk, trials - done)
        if r <= 62:
            prefixes = rng.integers(0, 1 << r, size=(n, N), dtype=np.int64)
            clash = (prefixes[:, 1:] == prefixes[:, :1]).any(axis=1)
        else:
            bits = rng.integers(0, 2, size=(n, N, r), dtype=np.uint8)
            clash = (bits[:, 1:, :] == bits[:, :1, :]).all(axis=2).any(axis=1)
        hits += int(n - clash.sum())
        done += n
    rate = hits / trials
    expected = lemma1_probability(N, r)
    return {
        "N": N,
        "r": r,
        "trials": trials,
        "rate": rate,
        "expected": expected,
        "sigma": math.sqrt(expected * (1 - expected) / trials),
    }


@dataclass(frozen=True)
class TypicalityExperiment:
    d: int
    alphabet: tuple[float, ...]
    channel: tuple[tuple[float, ...], ...]
    epsilon: float
    trials: int
    r: int | None = None

    def __post_init__(self):
        p = np.asarray(self.alphabet, dtype=float)
        w = np.asarray(self.channel, dtype=float)
        if not 1 < len(p) <= 4:
            raise ValueError("alphabet must have 2 to 4 symbols")
        if w.ndim != 2 or w.shape[0] != len(p):
            raise ValueError("channel must be a |X| x |X'| row-stochastic matrix")
        if not np.allclose(p.sum(), 1) or not np.allclose(w.sum(axis=1), 1):
            raise ValueError("distributions must sum to 1")
        if len(p) ** self.d > 1 << 16:
            raise ValueError(f"{len(p)}**{self.d} sequences are too many to enumerate")

    @property
    def joint(self) -> np.ndarray:
        return np.asarray(self.alphabet)[:, None] * np.asarray(self.channel)

    def entropies(self) -> tuple[float, float, float]:
        """H(X), H(X'), H(X, X') per symbol."""
        j = self.joint
        return entropy_bits(j.sum(axis=1)), entropy_bits(j.sum(axis=0)), entropy_bits(j.ravel())

    def conditional_entropy(self) -> float:
        hx, hxp, hj = self.entropies()
        return hj - hxp

    def prefix_length(self) -> int:
        e = self.epsilon
        return math.ceil(self.d * self.conditional_entropy() + 2 * e - math.log2(e) + 1)

    def failure_bound(self, r: int | None = None) -> float:
        """Bound on P_i from the proof: list of at most 2^(dH + 2 eps) guesses,
        r disclosed bits at least dH + 2 eps - log eps + 1."""
        e = self.epsilon
        dh = self.d * self.conditional_entropy()
        expo = dh + 2 * e - math.log2(e) + 1 if r is None else r
        return 1.0 - (1.0 - 2.0**-expo) ** (2.0 ** (dh + 2 * e) - 1)


def _typical(logp: np.ndarray, h: float, d: int, eps: float) -> np.ndarray:
    with np.errstate(invalid="ignore"):
        return np.abs(-logp / d - h) < eps


def asymptotic_experiment(exp: TypicalityExperiment, seed: int, extra: int = 2) -> dict:
    """Random-slice identification over the jointly typical list.

    Bob enumerates every x^(d) jointly typical with his x'^(d); Alice discloses
    the first r bits of a uniformly random label of her x^(d).  Failure means
    another list member shares those bits.  P_i is reported for r, r+1, ..
    r+extra on the same draws, so the failure events are nested.
    """
    d, eps = exp.d, exp.epsilon
    r0 = exp.r if exp.r is not None else exp.prefix_length()
    rs = [r0 + k for k in range(extra + 1)]
    k = len(exp.alphabet)
    hx, hxp, hj = exp.entropies()
    with np.errstate(divide="ignore"):
        lp_x = np.log2(np.asarray(exp.alphabet, dtype=float))
        lp_xp = np.log2(exp.joint.sum(axis=0))
        lp_joint = np.log2(exp.joint)
    seqs = np.array(list(itertools.product(range(k), repeat=d)), dtype=np.int64)
    seq_logp = lp_x[seqs].sum(axis=1)
    seq_typ = _typical(seq_logp, hx, d, eps)
    rng = make_rng(seed, 4)
    cond = np.asarray(exp.channel, dtype=float)
    n_typical = 0
    failures = np.zeros(len(rs), dtype=np.int64)
    max_list = 0
    bound_list = 2.0 ** (d * (exp.conditional_entropy() + 2 * eps))
    list_violations = 0
    for _ in range(exp.trials):
        x = rng.choice(k, size=d, p=exp.alphabet)
        u = rng.random(d)
        xp = (cond[x].cumsum(axis=1) < u[:, None]).sum(axis=1)
        xp = np.minimum(xp, cond.shape[1] - 1)
        typ_xp = _typical(lp_xp[xp].sum(), hxp, d, eps)
        joint_lp = lp_joint[seqs, xp[None, :]].sum(axis=1)
        members = seq_typ & _typical(joint_lp, hj, d, eps)
        size = int(members.sum()) if typ_xp else 0
        max_list = max(max_list, size)
        list_violations += size > bound_list
        own = int((x * k ** np.arange(d - 1, -1, -1)).sum())
        if not (typ_xp and members[own]):
            continue
        n_typical += 1
        others = size - 1
        labels = rng.integers(0, 2, size=(others + 1, rs[-1]), dtype=np.uint8)
        for j, r in enumerate(rs):
            if others and (labels[1:, :r] == labels[0, :r]).all(axis=1).any():
                failures[j] += 1
    p_i = [float(f / n_typical) if n_typical else 0.0 for f in failures]
    return {
        "d": d,
        "epsilon": eps,
        "h_cond": exp.conditional_entropy(),
        "trials": exp.trials,
        "typical_fraction": n_typical / exp.trials,
        "non_typical_fraction": 1 - n_typical / exp.trials,
        "r": rs,
        "p_i": p_i,
        "failure_bound": exp.failure_bound(),
        "max_list_size": max_list,
        "list_size_bound": bound_list,
        "list_bound_violations": int(list_violations),
    }


def bsc_experiment(flip: float, d: int, epsilon: float, trials: int) -> TypicalityExperiment:
    return TypicalityExperiment(d, (0.5, 0.5), ((1 - flip, flip), (flip, 1 - flip)), epsilon, trials)
