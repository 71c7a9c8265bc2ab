"""Iterative resolution of stored slot sums with interference cancellation.

A slot is decodable once at most ``K`` active signatures remain in its sum
after the replicas of already-resolved users have been cancelled. Decoding a
slot resolves those users, and their replicas are then cancelled from every
other stored slot that scheduled them, which may make further slots decodable.

Ground truth enters only through :meth:`ResolutionState._attempt_decode`,
which plays the part of the signature decoder: it succeeds iff the residual
sum holds at most ``K`` signatures and then reveals exactly those users.
"""

from __future__ import annotations

import json
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .model import SlotObservation


@dataclass(slots=True)
class SlotState:
    index: int
    scheduled: frozenset
    reported: int
    clipped: bool
    residual_active: set = field(repr=False)  # oracle side
    cancelled_count: int = 0
    decoded: bool = False

    @property
    def exact_multiplicity_known(self) -> bool:
        return not self.clipped or self.decoded

    @property
    def degree(self) -> int:
        return len(self.scheduled)


class ResolutionState:
    """Bipartite user/slot graph of one contention period and its peeling state."""

    def __init__(self, K: int):
        if K < 1:
            raise ValueError(f"K must be >= 1, got {K}")
        self.K = K
        self.slots: dict[int, SlotState] = {}
        self.resolved_active: set[int] = set()
        self.known_inactive: set[int] = set()
        self.pending: list[int] = []
        self.events: list[dict] = []
        self._slots_of_user: dict[int, list[int]] = defaultdict(list)
        self._new_exact: list[tuple[int, int, int]] = []
        self._round = 0

    # -- oracle ------------------------------------------------------------

    def _attempt_decode(self, slot: SlotState):
        if len(slot.residual_active) <= self.K:
            return frozenset(slot.residual_active)
        return None

    # -- graph updates -----------------------------------------------------

    def ingest(self, obs: SlotObservation, resolve: bool = True) -> list[dict]:
        """Store a new slot; cancel known users from it and try to decode it.

        With ``resolve=False`` the slot is only queued for the next :meth:`peel`.
        Returns the events produced.
        """
        j = obs.slot_index
        if j in self.slots:
            raise ValueError(f"slot {j} already ingested")
        known = obs.scheduled & self.resolved_active
        slot = SlotState(
            index=j,
            scheduled=obs.scheduled,
            reported=obs.reported_multiplicity,
            clipped=obs.clipped,
            residual_active=set(obs.active_hidden - known),
            cancelled_count=len(known),
        )
        self.slots[j] = slot
        for u in obs.scheduled:
            self._slots_of_user[u].append(j)
        if not obs.clipped:
            self._new_exact.append((j, slot.degree, obs.reported_multiplicity))
        if not resolve:
            self.pending.append(j)
            return []
        return self._try_slot(slot, iteration=0)

    def _try_slot(self, slot: SlotState, iteration: int) -> list[dict]:
        if slot.decoded:
            return []
        users = self._attempt_decode(slot)
        if users is None:
            return []
        slot.decoded = True
        slot.residual_active.clear()
        slot.cancelled_count += len(users)
        if slot.clipped:
            self._new_exact.append((slot.index, slot.degree, slot.cancelled_count))
        new = users - self.resolved_active
        self.resolved_active |= new
        self.known_inactive |= slot.scheduled - self.resolved_active
        for u in new:
            for k in self._slots_of_user[u]:
                other = self.slots[k]
                if other.decoded or u not in other.residual_active:
                    continue
                other.residual_active.discard(u)
                other.cancelled_count += 1
                self.pending.append(k)
        event = {"slot": slot.index, "resolved": sorted(new), "iteration": iteration}
        self.events.append(event)
        return [event]

    def peel(self, rng: np.random.Generator | None = None) -> list[dict]:
        """Decode queued slots round by round until nothing changes.

        ``rng`` shuffles the processing order within each round; the final
        resolved set does not depend on it.
        """
        out = []
        while self.pending:
            self._round += 1
            batch = list(dict.fromkeys(self.pending))
            self.pending = []
            if rng is not None:
                rng.shuffle(batch)
            for j in batch:
                out.extend(self._try_slot(self.slots[j], iteration=self._round))
        return out

    # -- queries -----------------------------------------------------------

    def exact_multiplicities(self) -> list[tuple[int, int]]:
        """(slot, |A_j|) for every slot whose active count is known exactly.

        Unclipped slots report it directly; a clipped slot is known once
        decoded, when all its active users have been cancelled.
        """
        out = []
        for j, s in self.slots.items():
            if not s.clipped:
                out.append((j, s.reported))
            elif s.decoded:
                out.append((j, s.cancelled_count))
        return out

    def drain_new_exact(self) -> list[tuple[int, int, int]]:
        """(slot, degree, |A_j|) learned since the previous call."""
        new, self._new_exact = self._new_exact, []
        return new

    def clipped_lower_bounds(self) -> dict[int, int]:
        """Lower bound on |A_j| for clipped, undecoded slots (not used for estimation)."""
        return {j: max(s.reported, s.cancelled_count + 1)
                for j, s in self.slots.items() if s.clipped and not s.decoded}

    @property
    def n_resolved(self) -> int:
        return len(self.resolved_active)

    def export_events(self, path: str | Path) -> None:
        with open(path, "w") as fh:
            for ev in self.events:
                fh.write(json.dumps(ev) + "\n")
