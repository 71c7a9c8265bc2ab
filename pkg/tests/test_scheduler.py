import numpy as np
import pytest
from scipy import stats

from batchid.model import DegreeDistribution
from batchid.scheduler import (Schedule, draw_slot_degree, extend_schedule, generate_slot, sample_users,
                               slot_rng, user_degrees)

from conftest import make_cfg


def test_slot_is_reproducible_on_its_own():
    omega = DegreeDistribution((3, 8), (0.5, 0.5))
    a = Schedule(seed=7, N=100, omega=omega)
    for _ in range(20):
        a.extend()
    for j, users in a.slots:
        np.testing.assert_array_equal(users, generate_slot(7, j, 100, omega))


def test_different_seeds_differ():
    omega = DegreeDistribution.constant(10)
    assert not np.array_equal(generate_slot(1, 1, 1000, omega), generate_slot(2, 1, 1000, omega))


@pytest.mark.parametrize("N, d", [(10, 10), (1000, 1), (1000, 37), (50, 49)])
def test_sample_users_is_a_subset(N, d):
    users = sample_users(N, d, np.random.default_rng(0))
    assert len(set(users.tolist())) == d
    assert users.min() >= 1 and users.max() <= N


def test_sample_users_uniform():
    rng = np.random.default_rng(3)
    N, d, reps = 20, 4, 20_000
    counts = np.zeros(N)
    for _ in range(reps):
        counts[sample_users(N, d, rng) - 1] += 1
    _, p = stats.chisquare(counts)
    assert p > 1e-3


def test_degree_draw_matches_omega():
    omega = DegreeDistribution((2, 5, 9), (0.2, 0.3, 0.5))
    rng = np.random.default_rng(11)
    n = 100_000
    draws = np.array([draw_slot_degree(omega, rng) for _ in range(n)])
    counts = [(draws == d).sum() for d in omega.degrees]
    _, p = stats.chisquare(counts, np.array(omega.masses) * n)
    assert p > 1e-3
    assert all(draw_slot_degree(DegreeDistribution.constant(1), rng) == 1 for _ in range(10))


def test_user_degrees_are_poisson_like():
    # constant slot degree beta over M slots: each user's degree is Bin(M, beta/N)
    cfg = make_cfg(N=500, beta=10)
    sched = Schedule(seed=0, N=500, omega=cfg.omega)
    for _ in range(200):
        extend_schedule(sched, cfg)
    deg = user_degrees(sched)
    assert deg.sum() == 2000
    assert deg.mean() == pytest.approx(4.0)
    assert deg.var() == pytest.approx(4.0 * (1 - 10 / 500), rel=0.15)


def test_jsonl_round_trip(tmp_path):
    omega = DegreeDistribution.constant(5)
    s = Schedule(seed=4, N=60, omega=omega)
    for _ in range(6):
        s.extend()
    s.to_jsonl(tmp_path / "s.jsonl")
    back = Schedule.from_jsonl(tmp_path / "s.jsonl", 60, omega, seed=4)
    assert [j for j, _ in back.slots] == list(range(1, 7))
    for (_, u), (_, v) in zip(s.slots, back.slots):
        np.testing.assert_array_equal(u, v)


def test_explicit_rng_and_mismatched_config():
    cfg = make_cfg(N=100, beta=5)
    s = Schedule(seed=0, N=100, omega=cfg.omega)
    j, users = extend_schedule(s, cfg, rng=slot_rng(99, 1))
    assert j == 1 and users.size == 5
    with pytest.raises(ValueError):
        extend_schedule(s, make_cfg(N=200, beta=5))
