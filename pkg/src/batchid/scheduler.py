"""AP-side transmission schedules.

Each slot draws its degree from the slot degree distribution and then a
uniformly random subset of that many users. Slot ``j`` uses its own random
stream derived from ``(seed, j)``, so any slot can be regenerated on its own
and a schedule is a pure function of the seed, the config and its length.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .model import DegreeDistribution, SystemConfig


def slot_rng(seed: int, j: int) -> np.random.Generator:
    return np.random.default_rng([int(seed), int(j)])


def draw_slot_degree(omega: DegreeDistribution, rng: np.random.Generator) -> int:
    u = rng.random()
    if len(omega.degrees) == 1:
        return omega.degrees[0]
    idx = int(np.searchsorted(np.cumsum(omega.masses), u, side="right"))
    return omega.degrees[min(idx, len(omega.degrees) - 1)]


def sample_users(N: int, d: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform ``d``-subset of users 1..N, by a sparse partial Fisher-Yates shuffle.

    Costs O(d) regardless of N.
    """
    if d == N:
        return np.arange(1, N + 1)
    picks = rng.integers(np.arange(d), N)
    swapped: dict[int, int] = {}
    out = np.empty(d, dtype=np.int64)
    for k, j in enumerate(picks.tolist()):
        vk = swapped.get(k, k)
        out[k] = swapped.get(j, j)
        swapped[j] = vk
    return out + 1


def generate_slot(seed: int, j: int, N: int, omega: DegreeDistribution) -> np.ndarray:
    rng = slot_rng(seed, j)
    d = draw_slot_degree(omega, rng)
    return sample_users(N, d, rng)


@dataclass
class Schedule:
    seed: int
    N: int
    omega: DegreeDistribution
    slots: list[tuple[int, np.ndarray]] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.slots)

    def extend(self, rng: np.random.Generator | None = None) -> tuple[int, np.ndarray]:
        """Append the next slot. Slots are numbered from 1."""
        j = len(self.slots) + 1
        if rng is None:
            users = generate_slot(self.seed, j, self.N, self.omega)
        else:
            users = sample_users(self.N, draw_slot_degree(self.omega, rng), rng)
        self.slots.append((j, users))
        return j, users

    def to_jsonl(self, path: str | Path) -> None:
        with open(path, "w") as fh:
            for j, users in self.slots:
                fh.write(json.dumps({"j": j, "users": [int(u) for u in users]}) + "\n")

    @classmethod
    def from_jsonl(cls, path: str | Path, N: int, omega: DegreeDistribution, seed: int = 0) -> "Schedule":
        sched = cls(seed=seed, N=N, omega=omega)
        with open(path) as fh:
            for line in fh:
                if line.strip():
                    row = json.loads(line)
                    sched.slots.append((int(row["j"]), np.asarray(row["users"], dtype=np.int64)))
        return sched


def extend_schedule(sched: Schedule, cfg: SystemConfig, rng: np.random.Generator | None = None):
    if sched.N != cfg.N:
        raise ValueError(f"schedule built for N={sched.N}, config has N={cfg.N}")
    return sched.extend(rng)


def user_degrees(sched: Schedule, N: int | None = None) -> np.ndarray:
    """Replica count per user; entry ``i - 1`` belongs to user ``i``."""
    N = sched.N if N is None else N
    counts = np.zeros(N, dtype=np.int64)
    for _, users in sched.slots:
        counts[users - 1] += 1
    return counts
