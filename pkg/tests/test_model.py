import json
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from batchid.model import (ConfigError, DegreeDistribution, DomainError, SystemConfig,
                           activation_prior_pmf, conditional_active_pmf, slot_active_degree_distribution,
                           slot_active_degree_pmf, user_degree_distribution, user_degree_pmf)

from conftest import make_cfg


def exact_binomial(n, N, p: Fraction) -> float:
    return float(math.comb(N, n) * p**n * (1 - p) ** (N - n))


class TestActivationPrior:
    def test_out_of_range(self, cfg1000):
        with pytest.raises(DomainError):
            activation_prior_pmf(-1, cfg1000)
        with pytest.raises(DomainError):
            activation_prior_pmf(1001, cfg1000)

    def test_value_at_mean(self, cfg1000):
        # exact rational evaluation: 0.0315253611732576
        oracle = exact_binomial(200, 1000, Fraction(1, 5))
        assert activation_prior_pmf(200, cfg1000) == pytest.approx(oracle, rel=1e-10)
        assert activation_prior_pmf(200, cfg1000) == pytest.approx(0.0315, abs=5e-4)

    @pytest.mark.parametrize("poisson", [False, True])
    def test_normalised(self, cfg1000, poisson):
        total = math.fsum(activation_prior_pmf(n, cfg1000, poisson) for n in range(1001))
        assert abs(total - 1.0) < 1e-10

    @pytest.mark.parametrize("poisson, var", [(False, 160.0), (True, 200.0)])
    def test_moments(self, cfg1000, poisson, var):
        n = np.arange(1001)
        pmf = np.array([activation_prior_pmf(k, cfg1000, poisson) for k in n])
        mean = np.dot(n, pmf)
        assert mean == pytest.approx(200.0, abs=1e-8)
        assert np.dot((n - mean) ** 2, pmf) == pytest.approx(var, rel=1e-8)


    def test_total_variation_to_poisson(self, cfg1000):
        # independent float evaluation with math.comb / lgamma: 0.05393753768917685
        tv = 0.5 * math.fsum(abs(activation_prior_pmf(n, cfg1000) - activation_prior_pmf(n, cfg1000, True))
                             for n in range(1001))
        assert tv == pytest.approx(0.05393753768917685, abs=1e-9)

    @pytest.mark.xfail(strict=True, reason="Bin(1000, 0.2) and Poisson(200) differ by 0.054 in total variation")
    def test_total_variation_within_two_percent(self, cfg1000):
        tv = 0.5 * math.fsum(abs(activation_prior_pmf(n, cfg1000) - activation_prior_pmf(n, cfg1000, True))
                             for n in range(1001))
        assert tv <= 0.02


class TestConditionalActive:
    def test_zero_when_too_few_active(self):
        assert conditional_active_pmf(3, 5, 2, 20) == 0.0

    def test_hand_computed(self):
        assert conditional_active_pmf(1, 2, 3, 6) == pytest.approx(0.6, rel=1e-12)

    def test_full_slot_is_deterministic(self):
        N, n = 12, 5
        for d_A in range(N + 1):
            assert conditional_active_pmf(d_A, N, n, N) == pytest.approx(1.0 if d_A == n else 0.0)

    def test_domain(self):
        with pytest.raises(DomainError):
            conditional_active_pmf(4, 3, 2, 10)

    @settings(max_examples=60, deadline=None)
    @given(N=st.integers(1, 60), data=st.data())
    def test_normalised(self, N, data):
        d_S = data.draw(st.integers(1, N))
        n = data.draw(st.integers(0, N))
        total = math.fsum(conditional_active_pmf(a, d_S, n, N) for a in range(d_S + 1))
        assert abs(total - 1.0) < 1e-10

    @pytest.mark.parametrize("d_S", [5, 15, 50])
    def test_binomial_thinning_limit(self, d_S):
        N = 10_000
        n = 2_000
        for d_A in range(d_S + 1):
            approx = math.comb(d_S, d_A) * (n / N) ** d_A * (1 - n / N) ** (d_S - d_A)
            assert abs(conditional_active_pmf(d_A, d_S, n, N) - approx) < 0.01


class TestSlotActiveDegree:
    def test_degree_one(self):
        cfg = SystemConfig(50, 0.3, 1, 2, DegreeDistribution.constant(1))
        assert slot_active_degree_pmf(1, cfg) == pytest.approx(0.3, abs=1e-12)
        assert slot_active_degree_pmf(0, cfg) == pytest.approx(0.7, abs=1e-12)

    def test_normalised_and_bounded_support(self):
        omega = DegreeDistribution((3, 7, 12), (0.2, 0.5, 0.3))
        cfg = SystemConfig(200, 0.15, 2, 5, omega)
        psi = slot_active_degree_distribution(cfg)
        assert abs(psi.sum() - 1.0) < 1e-10
        assert slot_active_degree_pmf(13, cfg) == 0.0
        assert slot_active_degree_pmf(150, cfg) == 0.0

    def test_is_binomial_mixture(self):
        # users activate independently, so the active count among d_S scheduled is Bin(d_S, p_A)
        omega = DegreeDistribution((4, 9), (0.4, 0.6))
        cfg = SystemConfig(120, 0.25, 2, 5, omega)
        psi = slot_active_degree_distribution(cfg)
        expect = np.zeros(10)
        for d_S, w in zip(omega.degrees, omega.masses):
            for a in range(d_S + 1):
                expect[a] += w * math.comb(d_S, a) * 0.25**a * 0.75 ** (d_S - a)
        np.testing.assert_allclose(psi, expect, atol=1e-10)


class TestUserDegree:
    def test_zero(self):
        assert user_degree_pmf(0, 300, 15, 1000) == pytest.approx(math.exp(-4.5))

    def test_mean(self):
        lam = user_degree_distribution(300, 15, 1000)
        assert abs(lam.sum() - 1.0) < 1e-10
        assert np.dot(np.arange(lam.size), lam) == pytest.approx(4.5, abs=1e-9)

    def test_no_slots(self):
        assert user_degree_pmf(0, 0, 15, 1000) == 1.0
        assert user_degree_pmf(1, 0, 15, 1000) == 0.0
        assert user_degree_distribution(0, 15, 1000).tolist() == [1.0]


class TestConfig:
    def test_json_round_trip(self, tmp_path):
        doc = {"N": 100, "p_A": 0.1, "K": 2, "K_max": 4, "omega": [[3, 0.5], [5, 0.5]]}
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps(doc))
        cfg = SystemConfig.from_json(path)
        assert cfg.to_dict() == doc
        assert cfg.alpha == pytest.approx(10.0)

    @pytest.mark.parametrize("doc", [
        {"N": 100, "p_A": 0.0, "K": 2, "K_max": 4, "omega": [[3, 1.0]]},
        {"N": 100, "p_A": 0.1, "K": 5, "K_max": 4, "omega": [[3, 1.0]]},
        {"N": 100, "p_A": 0.1, "K": 2, "K_max": 4, "omega": [[3, 0.6]]},
        {"N": 100, "p_A": 0.1, "K": 2, "K_max": 4, "omega": [[300, 1.0]]},
        {"N": 100, "p_A": 0.1, "K": 2, "omega": [[3, 1.0]]},
    ])
    def test_invalid(self, doc):
        with pytest.raises(ConfigError):
            SystemConfig.from_dict(doc)

    def test_degrees_must_increase(self):
        with pytest.raises(ConfigError):
            DegreeDistribution((5, 3), (0.5, 0.5))
        assert DegreeDistribution.from_pairs([[5, 0.5], [3, 0.5]]).degrees == (3, 5)

    def test_mean(self):
        assert DegreeDistribution((2, 4), (0.5, 0.5)).mean == 3.0
        assert make_cfg(beta=7).omega.max_degree == 7
