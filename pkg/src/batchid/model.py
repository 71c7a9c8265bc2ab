"""Shared domain types and the closed-form pmfs of the access model.

Users are numbered 1..N. A slot of degree ``d_S`` schedules ``d_S`` distinct
users; the number of those that are actually active is ``d_A``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy.special import gammaln
from scipy import stats

# tail mass below which infinite supports are truncated
TAIL_MASS = 1e-12


class DomainError(ValueError):
    """Argument outside the support of a distribution or model."""


class ConfigError(ValueError):
    """Invalid or inconsistent configuration."""


def log_comb(n, k):
    """log C(n, k) via log-gamma; -inf where k < 0 or k > n. Vectorised."""
    n = np.asarray(n, dtype=float)
    k = np.asarray(k, dtype=float)
    ok = (k >= 0) & (k <= n)
    with np.errstate(invalid="ignore"):
        val = gammaln(n + 1) - gammaln(k + 1) - gammaln(n - k + 1)
    out = np.where(ok, val, -np.inf)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class DegreeDistribution:
    """Slot degree distribution: ``masses[i]`` is P[d_S = degrees[i]]."""

    degrees: tuple[int, ...]
    masses: tuple[float, ...]

    def __post_init__(self):
        degrees = tuple(int(d) for d in self.degrees)
        masses = tuple(float(m) for m in self.masses)
        object.__setattr__(self, "degrees", degrees)
        object.__setattr__(self, "masses", masses)
        if not degrees or len(degrees) != len(masses):
            raise ConfigError("degree distribution needs matching, nonempty degrees and masses")
        if degrees[0] < 1 or any(b <= a for a, b in zip(degrees, degrees[1:])):
            raise ConfigError(f"degrees must be strictly increasing and >= 1, got {degrees}")
        if any(m < 0 for m in masses):
            raise ConfigError("degree masses must be nonnegative")
        if abs(math.fsum(masses) - 1.0) > 1e-12:
            raise ConfigError(f"degree masses sum to {math.fsum(masses)!r}, not 1")

    @classmethod
    def constant(cls, beta: int) -> "DegreeDistribution":
        return cls((int(beta),), (1.0,))

    @classmethod
    def from_pairs(cls, pairs: Iterable[Sequence[float]]) -> "DegreeDistribution":
        pairs = sorted((int(d), float(m)) for d, m in pairs)
        return cls(tuple(d for d, _ in pairs), tuple(m for _, m in pairs))

    def pairs(self) -> list[list]:
        return [[d, m] for d, m in zip(self.degrees, self.masses)]

    @property
    def mean(self) -> float:
        return float(np.dot(self.degrees, self.masses))

    @property
    def max_degree(self) -> int:
        return self.degrees[-1]

    def pmf(self, d: int) -> float:
        try:
            return self.masses[self.degrees.index(int(d))]
        except ValueError:
            return 0.0


@dataclass(frozen=True)
class SystemConfig:
    N: int
    p_A: float
    K: int
    K_max: int
    omega: DegreeDistribution

    def __post_init__(self):
        if self.N < 1:
            raise ConfigError(f"N must be a positive integer, got {self.N}")
        if not 0.0 < self.p_A < 1.0:
            raise ConfigError(f"p_A must lie in (0, 1), got {self.p_A}")
        if not 1 <= self.K <= self.K_max <= self.N:
            raise ConfigError(f"need 1 <= K <= K_max <= N, got K={self.K}, K_max={self.K_max}, N={self.N}")
        if self.omega.max_degree > self.N:
            raise ConfigError(f"slot degree {self.omega.max_degree} exceeds N={self.N}")

    @property
    def alpha(self) -> float:
        return self.p_A * self.N

    def with_omega(self, omega: DegreeDistribution) -> "SystemConfig":
        return SystemConfig(self.N, self.p_A, self.K, self.K_max, omega)

    def with_beta(self, beta: int) -> "SystemConfig":
        return self.with_omega(DegreeDistribution.constant(beta))

    def to_dict(self) -> dict:
        return {"N": self.N, "p_A": self.p_A, "K": self.K, "K_max": self.K_max,
                "omega": self.omega.pairs()}

    @classmethod
    def from_dict(cls, doc: dict) -> "SystemConfig":
        try:
            return cls(
                N=int(doc["N"]),
                p_A=float(doc["p_A"]),
                K=int(doc["K"]),
                K_max=int(doc["K_max"]),
                omega=DegreeDistribution.from_pairs(doc["omega"]),
            )
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"malformed system config: {exc!r}") from exc

    @classmethod
    def from_json(cls, path: str | Path) -> "SystemConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass(frozen=True)
class SlotObservation:
    """What the AP receives in one slot.

    ``active_hidden`` is ground truth kept for the resolution oracle; decoder
    and estimator logic only use ``scheduled``, ``reported_multiplicity`` and
    ``clipped``.
    """

    slot_index: int
    scheduled: frozenset
    reported_multiplicity: int
    clipped: bool
    active_hidden: frozenset = field(repr=False)

    @property
    def degree(self) -> int:
        return len(self.scheduled)


@dataclass(frozen=True)
class RunRecord:
    M: int
    N_A: int
    N_R: int
    N_E: int
    f_RE: float
    f_RA: float
    T: float
    delta_nE: float
    abs_delta_nE: float
    beta: int
    K: int = 1
    seed: int = 0
    truncated: bool = False


# ---------------------------------------------------------------------------
# pmfs


def _check_n(n, N):
    if not 0 <= n <= N:
        raise DomainError(f"n={n} outside [0, {N}]")


def log_activation_prior(n, N: int, p_A: float, poisson: bool = False):
    """log P[N_A = n], vectorised over ``n`` (no range check)."""
    n = np.asarray(n, dtype=float)
    if poisson:
        # Poisson(alpha) restricted to 0..N, since there are only N users
        alpha = p_A * N
        out = n * math.log(alpha) - alpha - gammaln(n + 1) - stats.poisson.logcdf(N, alpha)
    else:
        out = log_comb(N, n) + n * math.log(p_A) + (N - n) * math.log1p(-p_A)
    return float(out) if np.ndim(out) == 0 else out


def activation_prior_pmf(n: int, cfg: SystemConfig, poisson: bool = False) -> float:
    """Binomial(N, p_A) pmf of the active count, or its Poisson(alpha) limit truncated to 0..N."""
    _check_n(n, cfg.N)
    return math.exp(log_activation_prior(n, cfg.N, cfg.p_A, poisson))


def log_conditional_active(d_A, d_S, n, N):
    """Vectorised log of :func:`conditional_active_pmf`; -inf off-support."""
    d_A, d_S, n = (np.asarray(x, dtype=float) for x in (d_A, d_S, n))
    out = log_comb(n, d_A) + log_comb(N - n, d_S - d_A) - log_comb(N, d_S)
    return float(out) if np.ndim(out) == 0 else out


def conditional_active_pmf(d_A: int, d_S: int, n: int, N: int) -> float:
    """P[d_A active among d_S scheduled | n of N active] (hypergeometric)."""
    if d_A < 0 or d_A > d_S:
        raise DomainError(f"need 0 <= d_A <= d_S, got d_A={d_A}, d_S={d_S}")
    if d_S > N:
        raise DomainError(f"slot degree {d_S} exceeds N={N}")
    _check_n(n, N)
    if d_A > n or d_S - d_A > N - n:
        return 0.0
    return math.exp(log_conditional_active(d_A, d_S, n, N))


def slot_active_degree_distribution(cfg: SystemConfig) -> np.ndarray:
    """Psi as an array over d_A = 0..max slot degree.

    The n = 0 term of the prior is included so the result is normalised.
    """
    N = cfg.N
    ns = np.arange(N + 1)
    log_prior = log_activation_prior(ns, N, cfg.p_A)
    dmax = cfg.omega.max_degree
    psi = np.zeros(dmax + 1)
    for d_S, w in zip(cfg.omega.degrees, cfg.omega.masses):
        if w == 0.0:
            continue
        d_A = np.arange(d_S + 1)[:, None]
        logp = log_conditional_active(d_A, d_S, ns[None, :], N) + log_prior[None, :]
        psi[: d_S + 1] += w * np.exp(logp).sum(axis=1)
    return psi


def slot_active_degree_pmf(d_A: int, cfg: SystemConfig) -> float:
    if not 0 <= d_A <= cfg.N:
        raise DomainError(f"d_A={d_A} outside [0, {cfg.N}]")
    psi = slot_active_degree_distribution(cfg)
    return float(psi[d_A]) if d_A < len(psi) else 0.0


def user_degree_pmf(d_U: int, M: int, beta: float, N: int) -> float:
    """Poisson(M*beta/N) limit of the number of replicas a user sends."""
    if d_U < 0:
        return 0.0
    mean = M * beta / N
    if mean == 0.0:
        return 1.0 if d_U == 0 else 0.0
    return math.exp(d_U * math.log(mean) - mean - math.lgamma(d_U + 1))


def user_degree_distribution(M: int, beta: float, N: int, tail: float = TAIL_MASS) -> np.ndarray:
    """Lambda over d_U = 0..D, truncated once the remaining tail mass is below ``tail``."""
    mean = M * beta / N
    if mean == 0.0:
        return np.array([1.0])
    upper = int(stats.poisson.isf(tail, mean)) + 1
    return stats.poisson.pmf(np.arange(upper + 1), mean)
