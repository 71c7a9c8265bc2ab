"""Batch activation and the noiseless integer-adder slot observation."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import SlotObservation, SystemConfig


@dataclass(frozen=True)
class ActivationOutcome:
    active: frozenset
    mask: np.ndarray  # mask[i] is True when user i is active; mask[0] unused

    @property
    def N_A(self) -> int:
        return len(self.active)


def activate(cfg: SystemConfig, rng: np.random.Generator) -> ActivationOutcome:
    """Each user is active independently with probability p_A."""
    draws = rng.random(cfg.N) < cfg.p_A
    mask = np.zeros(cfg.N + 1, dtype=bool)
    mask[1:] = draws
    return ActivationOutcome(frozenset(np.flatnonzero(mask).tolist()), mask)


def observe_slot(scheduled, outcome: ActivationOutcome, cfg: SystemConfig,
                 slot_index: int = 0) -> SlotObservation:
    """Slot outcome with the multiplicity counter saturating at K_max.

    A count equal to K_max is reported as clipped as well, since the counter
    cannot tell it apart from a larger one.
    """
    users = np.asarray(scheduled, dtype=np.int64)
    if users.size == 0:
        raise ValueError("a slot must schedule at least one user")
    hidden = users[outcome.mask[users]]
    count = int(hidden.size)
    return SlotObservation(
        slot_index=slot_index,
        scheduled=frozenset(users.tolist()),
        reported_multiplicity=min(count, cfg.K_max),
        clipped=count >= cfg.K_max,
        active_hidden=frozenset(hidden.tolist()),
    )


def signature_length_bits(K: int, N: int) -> float:
    """Approximate signature length K*log2(N) of a K-out-of-N signature code."""
    return K * math.log2(N)
