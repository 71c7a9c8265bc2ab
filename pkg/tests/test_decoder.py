import json

import numpy as np
import pytest

from batchid.channel import ActivationOutcome, observe_slot
from batchid.decoder import ResolutionState

from conftest import make_cfg
from decoder_oracle import brute_force_resolved, random_instance


def outcome(N, active):
    mask = np.zeros(N + 1, dtype=bool)
    mask[list(active)] = True
    return ActivationOutcome(frozenset(active), mask)


def feed(K, N, active, slots, K_max=None, resolve=True):
    K_max = K_max or K + 2
    cfg = make_cfg(N=max(N, K_max), p_A=0.3, K=K, K_max=K_max, beta=1)
    state = ResolutionState(K)
    out = outcome(cfg.N, active)
    for j, s in enumerate(slots, start=1):
        state.ingest(observe_slot(sorted(s), out, cfg, slot_index=j), resolve=resolve)
    return state


def test_chain_resolution():
    # slot 1 holds u1 alone; slot 2 holds u1+u2 with K=1; slot 3 holds u2+u3
    state = feed(1, 5, {1, 2, 3}, [{1}, {1, 2}, {2, 3}], resolve=False)
    events = state.peel()
    assert state.resolved_active == {1, 2, 3}
    assert [e["slot"] for e in events] == [1, 2, 3]
    assert [e["resolved"] for e in events] == [[1], [2], [3]]


def test_stopping_set():
    # two slots both holding the same two actives, K=1: nothing resolves
    state = feed(1, 4, {1, 2}, [{1, 2, 3}, {1, 2, 4}])
    state.peel()
    assert state.n_resolved == 0
    assert state.clipped_lower_bounds() == {}


def test_known_inactive_and_empty_slot():
    state = feed(2, 6, {1}, [{1, 2, 3}, {4, 5}])
    state.peel()
    assert state.resolved_active == {1}
    assert state.known_inactive == {2, 3, 4, 5}


def test_clipped_slot_exact_after_decoding():
    # K_max = 2: slot 2 sees 3 actives and is clipped until they are all cancelled
    state = feed(2, 8, {1, 2, 3}, [{1, 4}, {1, 2, 3, 5}, {2, 3}], K_max=2)
    assert state.slots[2].clipped
    state.peel()
    assert dict(state.exact_multiplicities())[2] == 3
    drained = state.drain_new_exact()
    assert (2, 4, 3) in drained
    assert state.drain_new_exact() == []


def test_clipped_lower_bound():
    state = feed(1, 8, {1, 2, 3, 4}, [{1, 2, 3, 4, 5}], K_max=3)
    assert state.clipped_lower_bounds() == {1: 3}


def test_duplicate_slot_rejected():
    cfg = make_cfg(N=5, K=1, K_max=3, beta=1)
    state = ResolutionState(1)
    obs = observe_slot([1], outcome(5, {1}), cfg, slot_index=1)
    state.ingest(obs)
    with pytest.raises(ValueError):
        state.ingest(obs)


def test_bad_K():
    with pytest.raises(ValueError):
        ResolutionState(0)


def test_events_export(tmp_path):
    state = feed(1, 5, {1, 2}, [{1}, {1, 2}])
    state.peel()
    state.export_events(tmp_path / "ev.jsonl")
    rows = [json.loads(line) for line in (tmp_path / "ev.jsonl").read_text().splitlines()]
    assert sorted(u for r in rows for u in r["resolved"]) == [1, 2]


def test_incremental_matches_batch():
    rng = np.random.default_rng(5)
    for _ in range(100):
        N, K, active, slots = random_instance(rng)
        online = feed(K, N, active, slots)
        online.peel()
        batch = feed(K, N, active, slots, resolve=False)
        batch.peel()
        assert online.resolved_active == batch.resolved_active == brute_force_resolved(K, active, slots)
