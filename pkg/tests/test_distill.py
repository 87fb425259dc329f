import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from slicerec.channel import ChannelParams, make_rng
from slicerec.distill import (
    PaParams,
    TypicalityExperiment,
    asymptotic_experiment,
    bsc_experiment,
    lemma1_check,
    lemma1_probability,
    privacy_amplify,
    rate_report,
    toeplitz_hash,
)
from slicerec.quantizer import mutual_information

from conftest import cached_system

bitstrings = st.lists(st.integers(0, 1), min_size=1, max_size=300).map(lambda v: np.array(v, dtype=np.uint8))


class TestRates:
    def test_flagship(self, system_m4):
        r = rate_report(system_m4)
        assert r.h_k == pytest.approx(3.78, abs=0.02)
        assert r.ie == pytest.approx(2.95, abs=0.03)
        assert r.net_bsc == pytest.approx(0.83, abs=0.03)
        assert r.net_practical is None

    def test_one_slice(self, system_m1):
        r = rate_report(system_m1)
        assert r.h_k == pytest.approx(1.0, abs=1e-12)
        assert r.ie == pytest.approx(0.65, abs=0.01)
        assert r.net_bsc == pytest.approx(0.35, abs=0.01)

    def test_practical(self, system_m4):
        r = rate_report(system_m4, transcript_bits=25_000, l=10_000)
        assert r.net_practical == pytest.approx(r.h_k - 2.5)
        with pytest.raises(ValueError):
            rate_report(system_m4, transcript_bits=5)

    @pytest.mark.parametrize("snr, m", [(1.0, 2), (3.0, 3), (7.0, 4), (15.0, 4)])
    def test_ordering_and_sanity(self, snr, m):
        system = cached_system(snr, m)
        r = rate_report(system)
        assert r.i0 <= r.is_ + 1e-9 <= r.ie + 2e-9
        assert r.net_perfect >= r.net_bsc
        mi = mutual_information(system.params, system.design.partition).mi
        assert r.net_perfect == pytest.approx(mi, abs=1e-9)
        assert r.net_bsc <= mi + 1e-9 <= system.params.capacity() + 2e-9

    def test_noiseless(self):
        from slicerec.slicing import design_system

        r = rate_report(design_system(ChannelParams(1.0, 0.0), 2))
        assert (r.i0, r.is_, r.ie) == (0.0, 0.0, 0.0)
        assert r.net_bsc == pytest.approx(2.0)

    def test_net_rate_curve_in_m(self):
        nets = [rate_report(cached_system(3.0, m)).net_bsc for m in (1, 2, 3, 4, 5)]
        assert nets[3] > 0.8
        peak = int(np.argmax(nets))
        assert all(b >= a - 1e-9 for a, b in zip(nets[:peak], nets[1 : peak + 1]))
        # After the peak the curve stays flat or falls, by at most a plateau tolerance.
        assert all(b <= a + 0.01 for a, b in zip(nets[peak:], nets[peak + 1 :]))


class TestPrivacyAmplification:
    def test_length_formula(self):
        pa = PaParams(key_elements=4000, h_k=4.0, transcript_bits=12_670, security_margin=30)
        key = make_rng(1, 7).integers(0, 2, 16_000, dtype=np.uint8)
        assert len(privacy_amplify(key, pa, seed=3)) == 3300
        assert PaParams(100, 1.0, transcript_bits=500).final_length() == 0
        assert PaParams(1000, 3.0, eve_information=0.5, transcript_bits=100, security_margin=0).final_length() == 2400

    def test_no_shrink(self):
        key = make_rng(2, 7).integers(0, 2, 512, dtype=np.uint8)
        pa = PaParams(key_elements=128, h_k=4.0, security_margin=0)
        out = privacy_amplify(key, pa, seed=5)
        assert len(out) == 512

    def test_too_long(self):
        with pytest.raises(ValueError):
            toeplitz_hash(np.zeros(10, dtype=np.uint8), 11, 0)

    def test_matches_explicit_matrix(self):
        n, k, seed = 97, 41, 13
        key = make_rng(3, 7).integers(0, 2, n, dtype=np.uint8)
        diag = make_rng(seed, 2, n, k).integers(0, 2, n + k - 1, dtype=np.uint8)
        i, j = np.indices((k, n))
        T = diag[i - j + n - 1].astype(np.int64)
        np.testing.assert_array_equal(toeplitz_hash(key, k, seed), (T @ key) % 2)

    @settings(max_examples=30, deadline=None)
    @given(bitstrings, st.data())
    def test_linear_and_deterministic(self, a, data):
        b = np.array(data.draw(st.lists(st.integers(0, 1), min_size=len(a), max_size=len(a))), dtype=np.uint8)
        k = data.draw(st.integers(0, len(a)))
        seed = data.draw(st.integers(0, 1000))
        ha, hb = toeplitz_hash(a, k, seed), toeplitz_hash(b, k, seed)
        np.testing.assert_array_equal(toeplitz_hash(a ^ b, k, seed), ha ^ hb)
        np.testing.assert_array_equal(toeplitz_hash(a, k, seed), ha)
        assert len(ha) == k


class TestUniquePrefix:
    def test_single_string(self):
        assert lemma1_check(1, 3, 1000, 0)["rate"] == 1.0
        assert lemma1_probability(1, 3) == 1.0

    @pytest.mark.parametrize("N, r", [(2, 1), (9, 3), (100, 7)])
    def test_within_three_sigma(self, N, r):
        res = lemma1_check(N, r, 10**5, seed=N)
        assert abs(res["rate"] - res["expected"]) <= 3 * res["sigma"]

    def test_reference_value(self):
        assert lemma1_probability(9, 3) == pytest.approx(0.3436, abs=1e-4)

    def test_long_prefix(self):
        assert lemma1_check(100, 40, 10**4, 1)["rate"] == pytest.approx(1.0, abs=1e-4)

    def test_rejects_bad_input(self):
        with pytest.raises(ValueError):
            lemma1_check(0, 2, 10, 0)


class TestTypicality:
    def test_noiseless_channel(self):
        exp = TypicalityExperiment(8, (0.5, 0.5), ((1.0, 0.0), (0.0, 1.0)), 0.2, 2000)
        assert exp.conditional_entropy() == 0.0
        res = asymptotic_experiment(exp, seed=1)
        assert res["max_list_size"] == 1
        assert max(res["p_i"]) < exp.epsilon

    def test_prefix_length_formula(self):
        exp = bsc_experiment(0.11, 12, 0.2, 10)
        h = -(0.11 * math.log2(0.11) + 0.89 * math.log2(0.89))
        assert exp.conditional_entropy() == pytest.approx(h, abs=1e-12)
        assert exp.prefix_length() == math.ceil(12 * h + 0.4 - math.log2(0.2) + 1)

    def test_enumeration_limit(self):
        with pytest.raises(ValueError):
            TypicalityExperiment(9, (0.25,) * 4, tuple((0.25,) * 4 for _ in range(4)), 0.1, 10)
        with pytest.raises(ValueError):
            TypicalityExperiment(4, (0.5, 0.6), ((1.0, 0.0), (0.0, 1.0)), 0.1, 10)

    def test_three_symbol_alphabet(self):
        w = ((0.8, 0.1, 0.1), (0.1, 0.8, 0.1), (0.1, 0.1, 0.8))
        exp = TypicalityExperiment(6, (0.5, 0.3, 0.2), w, 0.3, 500)
        res = asymptotic_experiment(exp, seed=2)
        assert res["list_bound_violations"] == 0
        assert res["p_i"] == sorted(res["p_i"], reverse=True)

    def test_deterministic(self):
        exp = bsc_experiment(0.11, 8, 0.2, 300)
        assert asymptotic_experiment(exp, 4) == asymptotic_experiment(exp, 4)
