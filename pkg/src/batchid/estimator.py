"""MAP estimate of the number of active users from exact slot multiplicities.

The objective is

    F(n) = sum_j log P[a_j | d_j, n] + log P[N_A = n]

with the hypergeometric likelihood of each observed slot (degree ``d_j``,
exactly ``a_j`` active). Both terms are log-concave in ``n``, so ``F`` is
unimodal on its feasible range and the argmax can be bracketed by the sign
of the forward difference ``F(n + 1) - F(n)``.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.special import gammaln

from .model import SystemConfig

EULER_GAMMA = 0.5772156649015329


@dataclass
class MultiplicityEvidence:
    """Exactly-known (degree, active count) pairs, kept as histograms."""

    pairs: list[tuple[int, int]] = field(default_factory=list)
    sum_active: int = 0
    sum_inactive: int = 0

    def __post_init__(self):
        pairs, self.pairs = list(self.pairs), []
        self.sum_active = self.sum_inactive = 0
        self._by_active: Counter = Counter()
        self._by_inactive: Counter = Counter()
        self._by_degree: Counter = Counter()
        self._arrays = None
        for d, a in pairs:
            self.add(d, a)

    def add(self, d_S: int, a: int) -> None:
        if not 0 <= a <= d_S:
            raise ValueError(f"need 0 <= a <= d_S, got a={a}, d_S={d_S}")
        self.pairs.append((int(d_S), int(a)))
        self.sum_active += a
        self.sum_inactive += d_S - a
        self._by_active[a] += 1
        self._by_inactive[d_S - a] += 1
        self._by_degree[d_S] += 1
        self._arrays = None

    def extend(self, pairs) -> None:
        for d, a in pairs:
            self.add(d, a)

    def __len__(self) -> int:
        return len(self.pairs)

    @property
    def max_active(self) -> int:
        return max(self._by_active, default=0)

    @property
    def max_inactive(self) -> int:
        return max(self._by_inactive, default=0)

    def arrays(self):
        if self._arrays is None:
            def split(c):
                keys = np.fromiter(c.keys(), dtype=np.int64, count=len(c))
                vals = np.fromiter(c.values(), dtype=float, count=len(c))
                return keys, vals

            self._arrays = (split(self._by_active), split(self._by_inactive), split(self._by_degree))
        return self._arrays


@dataclass(frozen=True)
class EstimateResult:
    n_hat: int
    score: float
    feasible_range: tuple[int, int]


@lru_cache(maxsize=8)
def _tables(N: int):
    """log k! and log k for k = 0..N+1 (log 0 = -inf), as arrays and as lists."""
    k = np.arange(N + 2, dtype=float)
    with np.errstate(divide="ignore"):
        logfact, log = gammaln(k + 1), np.log(k)
    return logfact, log, logfact.tolist(), log.tolist()


def _log_comb_int(n, k, logfact):
    """log C(n, k) for integer arrays, -inf off-support."""
    nn, kk = np.broadcast_arrays(n, k)
    ok = (kk >= 0) & (kk <= nn)
    out = np.full(nn.shape, -np.inf)
    out[ok] = logfact[nn[ok]] - logfact[kk[ok]] - logfact[nn[ok] - kk[ok]]
    return out


def _scores(ns, ev: MultiplicityEvidence, cfg: SystemConfig, poisson: bool) -> np.ndarray:
    """Vectorised F over an array of n."""
    N = cfg.N
    ns = np.asarray(ns, dtype=np.int64)
    logfact = _tables(N)[0]
    if poisson:
        out = ns * math.log(cfg.alpha) - cfg.alpha - logfact[ns]
    else:
        out = (logfact[N] - logfact[ns] - logfact[N - ns]
               + ns * math.log(cfg.p_A) + (N - ns) * math.log1p(-cfg.p_A))
    if len(ev):
        (a, ca), (b, cb), (d, cd) = ev.arrays()
        # sum_j log C(n, a_j) + log C(N - n, b_j) - log C(N, d_j), grouped by value
        out = out + ca @ _log_comb_int(ns[None, :], a[:, None], logfact)
        out = out + cb @ _log_comb_int(N - ns[None, :], b[:, None], logfact)
        out = out - float(cd @ (logfact[N] - logfact[d] - logfact[N - d]))
    return out


def _score_scalar(n: int, ev: MultiplicityEvidence, cfg: SystemConfig, poisson: bool) -> float:
    """F(n) for a single feasible n; pure Python, used on the hot path."""
    N = cfg.N
    lf = _tables(N)[2]
    if poisson:
        total = n * math.log(cfg.alpha) - cfg.alpha - lf[n]
    else:
        total = lf[N] - lf[n] - lf[N - n] + n * math.log(cfg.p_A) + (N - n) * math.log1p(-cfg.p_A)
    for a, c in ev._by_active.items():
        total += c * (lf[n] - lf[a] - lf[n - a])
    m = N - n
    for b, c in ev._by_inactive.items():
        total += c * (lf[m] - lf[b] - lf[m - b])
    for d, c in ev._by_degree.items():
        total -= c * (lf[N] - lf[d] - lf[N - d])
    return total


def score(n: int, evidence: MultiplicityEvidence, cfg: SystemConfig, poisson: bool = False) -> float:
    """Log-posterior of ``N_A = n`` up to an n-independent constant; -inf if infeasible."""
    if not 0 <= n <= cfg.N:
        raise ValueError(f"n={n} outside [0, {cfg.N}]")
    return float(_scores(np.array([n]), evidence, cfg, poisson)[0])


def _forward_difference(n: int, ev: MultiplicityEvidence, cfg: SystemConfig, poisson: bool) -> float:
    """F(n + 1) - F(n) for n, n + 1 both feasible."""
    N = cfg.N
    log = _tables(N)[3]
    if poisson:
        total = math.log(cfg.alpha) - log[n + 1]
    else:
        total = log[N - n] - log[n + 1] + math.log(cfg.p_A) - math.log1p(-cfg.p_A)
    # C(n+1, a)/C(n, a) = (n+1)/(n+1-a);  C(N-n-1, b)/C(N-n, b) = (N-n-b)/(N-n)
    up, down = log[n + 1], log[N - n]
    for a, c in ev._by_active.items():
        total += c * (up - log[n + 1 - a])
    for b, c in ev._by_inactive.items():
        total += c * (log[N - n - b] - down)
    return total


def feasible_range(evidence: MultiplicityEvidence, cfg: SystemConfig, n_resolved_lower_bound: int = 0):
    lo = max(evidence.max_active, int(n_resolved_lower_bound))
    hi = cfg.N - evidence.max_inactive
    return lo, hi


def map_estimate(evidence: MultiplicityEvidence, cfg: SystemConfig, n_resolved_lower_bound: int = 0,
                 hint: int | None = None, poisson: bool = False) -> EstimateResult:
    """Most probable active count; ties go to the smaller ``n``.

    The candidate is the first ``n`` whose forward difference is <= 0, found
    by bisection (or by galloping from ``hint`` when one is given). It is then
    checked against its +-2 neighbourhood, with a full scan as fallback.
    """
    lo, hi = feasible_range(evidence, cfg, n_resolved_lower_bound)
    if lo > hi:
        # contradictory evidence; nothing feasible
        return EstimateResult(lo, -math.inf, (lo, hi))

    def descending(n):  # F(n+1) <= F(n)
        return n >= hi or _forward_difference(n, evidence, cfg, poisson) <= 0.0

    if hint is not None and lo <= hint <= hi:
        if descending(hint):
            # move left while the previous step still descends
            step, right = 1, hint
            while right - step >= lo and descending(right - step):
                right -= step
                step *= 2
            left = max(lo, right - step)
        else:
            step, left = 1, hint
            while left + step <= hi and not descending(left + step):
                left += step
                step *= 2
            right = min(hi, left + step)
        # invariant: descending(right); first descending point lies in [left, right]
    else:
        left, right = lo, hi
    while left < right:
        mid = (left + right) // 2
        if descending(mid):
            right = mid
        else:
            left = mid + 1
    cand = left

    cand_score = _score_scalar(cand, evidence, cfg, poisson)
    for n in range(max(lo, cand - 2), min(hi, cand + 2) + 1):
        if n != cand and _score_scalar(n, evidence, cfg, poisson) > cand_score:
            break
    else:
        return EstimateResult(cand, cand_score, (lo, hi))
    full = np.arange(lo, hi + 1)
    vals = _scores(full, evidence, cfg, poisson)
    best = int(np.argmax(vals))
    return EstimateResult(int(full[best]), float(vals[best]), (lo, hi))


def stationarity_residual(n: int, evidence: MultiplicityEvidence, cfg: SystemConfig) -> float:
    """Continuous stationarity condition of F with the Poisson prior.

    sum_j [a_j / n - (d_j - a_j) / (N - n)] + log(alpha) - H_n + gamma
    """
    if not 1 <= n <= cfg.N - 1:
        raise ValueError(f"stationarity residual needs 1 <= n <= N-1, got n={n}")
    harmonic = math.fsum(1.0 / h for h in range(1, n + 1))
    return (evidence.sum_active / n - evidence.sum_inactive / (cfg.N - n)
            + math.log(cfg.alpha) - harmonic + EULER_GAMMA)
