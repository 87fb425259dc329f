import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from slicerec.channel import ChannelParams, binary_entropy, joint_density
from slicerec.quantizer import (
    IntervalPartition,
    OptimizationError,
    OptimizerSettings,
    equiprobable_partition,
    interval_probabilities,
    interval_probability,
    mutual_information,
    optimize_partition,
    partition_from_dict,
    partition_to_dict,
    symmetric_partition,
)

from conftest import cached_system

TAU_POSITIVE = (0.0, 0.254, 0.514, 0.768, 1.081, 1.411, 1.808, 2.347)
REF_PARTITION = symmetric_partition(TAU_POSITIVE[1:], 16)

partitions = st.lists(st.floats(-3, 3, allow_nan=False), min_size=1, max_size=9, unique=True).filter(
    lambda v: min(np.diff(sorted(v)), default=1) > 1e-3
).map(lambda v: IntervalPartition(tuple(sorted(v))))
snrs = st.floats(0.2, 30)


def mi_oracle(params, thresholds):
    """I(T;X') with f_a obtained by adaptive quadrature of the joint density."""
    edges = [-np.inf, *thresholds, np.inf]
    L = params.cutoff

    def row(xp):
        f = [integrate.quad(lambda x: joint_density(params, x, xp), a, b, epsabs=1e-13)[0] for a, b in zip(edges, edges[1:])]
        return sum(-v * math.log2(v) for v in f if v > 0)

    h_joint = integrate.quad(row, -L, L, points=[0.0], limit=200, epsabs=1e-11)[0]
    probs = np.diff([0.5 * (1 + math.erf(e / math.sqrt(2))) if np.isfinite(e) else float(e > 0) for e in edges])
    h_t = -sum(p * math.log2(p) for p in probs)
    h_xp = 0.5 * math.log2(2 * math.pi * math.e * params.xprime_std**2)
    return h_t + h_xp - h_joint


class TestPartition:
    def test_index_convention(self):
        part = IntervalPartition((-1.0, 0.0, 1.0))
        assert part.index(-5) == 1
        assert part.index(0.0) == 3
        assert list(part.index([-1.0, -0.5, 1.0, 7])) == [2, 2, 4, 4]

    @pytest.mark.parametrize("th", [(0.0, 0.0), (1.0, 0.5), (math.nan,)])
    def test_rejects_invalid(self, th):
        with pytest.raises(ValueError):
            IntervalPartition(th)

    def test_reference_table_is_symmetric(self):
        assert REF_PARTITION.t == 16
        assert REF_PARTITION.is_symmetric()


class TestIntervalProbability:
    def test_two_halves(self):
        part = IntervalPartition((0.0,))
        p = ChannelParams()
        assert interval_probability(p, part, 1) == pytest.approx(0.5, abs=1e-15)
        assert interval_probability(p, part, 2) == pytest.approx(0.5, abs=1e-15)

    def test_reference_interval(self):
        expected = 0.5 * math.erf(0.254 / math.sqrt(2))
        assert interval_probability(ChannelParams(), REF_PARTITION, 9) == pytest.approx(expected, abs=1e-15)
        assert expected == pytest.approx(0.1003, abs=5e-5)

    @pytest.mark.parametrize("a", [0, 17])
    def test_out_of_range(self, a):
        with pytest.raises(IndexError):
            interval_probability(ChannelParams(), REF_PARTITION, a)

    @given(partitions, st.floats(0.1, 10))
    def test_total_probability(self, part, sigma_source):
        p = ChannelParams(sigma_source, 1.0)
        assert interval_probabilities(p, part).sum() == pytest.approx(1.0, abs=1e-12)


class TestMutualInformation:
    def test_single_interval(self):
        assert mutual_information(ChannelParams(), IntervalPartition(())).mi == 0.0

    def test_requires_noise(self):
        with pytest.raises(ValueError):
            mutual_information(ChannelParams(1, 0), IntervalPartition((0.0,)))

    @settings(max_examples=40, deadline=None)
    @given(partitions, snrs)
    def test_report_invariants(self, part, snr):
        p = ChannelParams.from_snr(snr)
        r = mutual_information(p, part)
        assert r.mi == pytest.approx(r.h_t + r.h_xprime - r.h_joint, abs=1e-9)
        assert -1e-9 <= r.mi <= math.log2(part.t) + 1e-9
        assert r.mi <= p.capacity() + 1e-9

    def test_deterministic(self, snr3):
        assert mutual_information(snr3, REF_PARTITION) == mutual_information(snr3, REF_PARTITION)

    @pytest.mark.parametrize("thresholds", [(0.0,), (-0.6, 0.0, 0.6), (-1.0, 0.4, 1.5)])
    def test_against_adaptive_oracle(self, snr3, thresholds):
        ours = mutual_information(snr3, IntervalPartition(thresholds)).mi
        assert ours == pytest.approx(mi_oracle(snr3, thresholds), abs=1e-7)

    def test_sign_quantizer_at_snr3(self, snr3):
        # The one-threshold quantizer keeps 0.485 bits; only the slice-level
        # bound 1 - h(e1) sits at 0.35, with e1 the sign-estimator error.
        mi = mutual_information(snr3, IntervalPartition((0.0,))).mi
        e1 = math.acos(math.sqrt(0.75)) / math.pi
        assert mi == pytest.approx(0.4850, abs=5e-4)
        assert 1 - binary_entropy(e1) == pytest.approx(0.35, abs=0.01)
        assert mi >= 1 - binary_entropy(e1)

    def test_reference_table_near_optimum(self, snr3):
        best = mutual_information(snr3, cached_system(3.0, 4).design.partition).mi
        ref = mutual_information(snr3, REF_PARTITION).mi
        assert 0.99 * best <= ref <= best
        assert ref <= 1.0
        assert best >= 0.95

    @settings(max_examples=30, deadline=None)
    @given(partitions, st.floats(-3, 3), snrs)
    def test_refinement_never_hurts(self, part, extra, snr):
        if any(abs(extra - v) < 1e-3 for v in part.thresholds):
            return
        p = ChannelParams.from_snr(snr)
        finer = IntervalPartition(tuple(sorted(part.thresholds + (extra,))))
        assert mutual_information(p, finer).mi >= mutual_information(p, part).mi - 1e-9

    @settings(max_examples=20, deadline=None)
    @given(partitions, snrs, st.floats(0.05, 20))
    def test_scale_equivariance(self, part, snr, lam):
        p = ChannelParams.from_snr(snr)
        q = ChannelParams(lam * p.sigma_source, lam * p.sigma_noise)
        np.testing.assert_allclose(interval_probabilities(q, part.scaled(lam)), interval_probabilities(p, part), atol=1e-12)
        assert mutual_information(q, part.scaled(lam)).mi == pytest.approx(mutual_information(p, part).mi, abs=1e-9)


class TestOptimizer:
    @pytest.mark.parametrize("snr", [0.5, 3, 15])
    def test_two_intervals(self, snr):
        part = optimize_partition(ChannelParams.from_snr(snr), 2)
        assert part.thresholds == pytest.approx((0.0,), abs=1e-3)

    def test_reference_table(self):
        part = cached_system(3.0, 4).design.partition
        pos = [v for v in part.thresholds if v >= 0]
        assert part.is_symmetric()
        for got, ref in zip(pos, TAU_POSITIVE):
            assert got == pytest.approx(ref, abs=0.02)

    def test_monotone_in_t(self, snr3):
        mis = [mutual_information(snr3, cached_system(3.0, m).design.partition).mi for m in (1, 2, 3, 4)]
        assert all(b > a for a, b in zip(mis, mis[1:]))

    def test_local_optimality(self, snr3):
        part = cached_system(3.0, 4).design.partition
        best = mutual_information(snr3, part).mi
        pos = np.array([v for v in part.thresholds if v > 0])
        rng = np.random.default_rng(0)
        for _ in range(100):
            trial = pos * (1 + 1e-3 * rng.choice([-1.0, 1.0], size=pos.size) * rng.random(pos.size))
            assert mutual_information(snr3, symmetric_partition(trial, 16)).mi <= best + 1e-12

    def test_odd_t_symmetric(self, snr3):
        part = optimize_partition(snr3, 5)
        assert part.t == 5
        assert part.is_symmetric(1e-12)
        assert mutual_information(snr3, part).mi >= mutual_information(snr3, equiprobable_partition(snr3, 5)).mi

    def test_budget_exhaustion(self, snr3):
        with pytest.raises(OptimizationError):
            optimize_partition(snr3, 16, OptimizerSettings(max_iter=1, max_rounds=1))

    def test_rejects_small_t(self, snr3):
        with pytest.raises(ValueError):
            optimize_partition(snr3, 1)


def test_serialization_round_trip(snr3):
    data = json.loads(json.dumps(partition_to_dict(snr3, REF_PARTITION)))
    assert set(data) == {"snr", "sigma_source", "sigma_noise", "t", "thresholds", "mi_report"}
    params, part = partition_from_dict(data)
    assert part == REF_PARTITION
    assert params == snr3
    data["t"] = 8
    with pytest.raises(ValueError):
        partition_from_dict(data)
