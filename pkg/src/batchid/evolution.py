"""And-or tree density evolution of the peeling process for N -> infinity.

``y`` is the probability that an active edge seen from a user is still
present, ``r`` the same seen from a slot. Starting from ``y = 1`` the
iteration alternates

    r = sum_d psi_d * P[Bin(d - 1, y) >= K]        (slot update)
    y = exp(-(M/N) * beta * (1 - r))               (user update)

and the resolution probability is ``1 - lim y``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats
from scipy.special import bdtrc

from .model import TAIL_MASS, DomainError

DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITER = 10_000


def default_load_grid(step: float = 0.005, upper: float = 1.0) -> np.ndarray:
    """M/N grid ``step, 2*step, ..., upper``."""
    n = int(round(upper / step))
    return np.round(np.arange(1, n + 1) * step, 10)


@dataclass
class EvolutionParams:
    p_A: float
    K: int
    beta: int
    epsilon: float  # M/N = 1 + epsilon
    psi: np.ndarray | None = None  # psi[d] for d = 0..D with psi[0] = 0; None -> constant slot degree
    tol: float = DEFAULT_TOL
    max_iter: int = DEFAULT_MAX_ITER
    keep_trajectory: bool = False

    def __post_init__(self):
        if self.beta < 1:
            raise DomainError(f"beta must be >= 1, got {self.beta}")
        if 1 + self.epsilon <= 0:
            raise DomainError(f"M/N = 1 + epsilon must be positive, got {1 + self.epsilon}")
        if self.psi is not None:
            self.psi = np.asarray(self.psi, dtype=float)
            if self.psi[0] != 0.0 or abs(self.psi.sum() - 1.0) > 1e-10:
                raise DomainError("psi must put no mass on d_A = 0 and sum to 1")

    @property
    def load(self) -> float:
        return 1.0 + self.epsilon

    @classmethod
    def at_load(cls, p_A, K, beta, load, **kw) -> "EvolutionParams":
        return cls(p_A=p_A, K=K, beta=beta, epsilon=load - 1.0, **kw)


@dataclass
class EvolutionResult:
    p_R: float
    T: float
    iterations: int
    converged: bool
    trajectory: list[tuple[float, float]] = field(default_factory=list)


def edge_active_distribution(p_A: float, beta: int) -> np.ndarray:
    """Edge-perspective active degree for constant slot degree ``beta``.

    psi[d] = C(beta-1, d-1) p_A^(d-1) (1-p_A)^(beta-d), d = 1..beta; psi[0] = 0.
    """
    if beta < 1:
        raise DomainError(f"beta must be >= 1, got {beta}")
    psi = np.zeros(beta + 1)
    psi[1:] = stats.binom.pmf(np.arange(beta), beta - 1, p_A)
    return psi


def edge_from_node_distribution(Psi) -> np.ndarray:
    """Reweight a slot active-degree pmf Psi[d] by d (edges per slot), d >= 1."""
    Psi = np.asarray(Psi, dtype=float)
    w = np.arange(Psi.size) * Psi
    w[0] = 0.0
    total = w.sum()
    if total <= 0:
        raise DomainError("active-degree distribution has no mass on d_A >= 1")
    return w / total


def slot_update(y: float, psi, K: int) -> float:
    """Probability that an active edge into a slot survives this round."""
    psi = np.asarray(psi, dtype=float)
    d = np.arange(psi.size)
    live = (d - 1 >= K) & (psi > 0)
    if not live.any():
        return 0.0
    # bdtrc can overshoot 1 by an ulp when the tail is essentially certain
    return min(1.0, float(np.dot(psi[live], bdtrc(K - 1, d[live] - 1, y))))


def slot_update_constant_degree(y, p_A: float, beta: int, K: int):
    """:func:`slot_update` for the constant-degree psi, in closed form.

    The other d_A - 1 active edges are Bin(beta-1, p_A) and each survives with
    probability y, so the survivors are Bin(beta-1, p_A*y).
    """
    if beta - 1 < K:
        return np.zeros_like(np.asarray(y, dtype=float)) + 0.0
    return np.minimum(bdtrc(K - 1, beta - 1, p_A * np.asarray(y, dtype=float)), 1.0)


def user_update(r, beta: float, epsilon: float):
    return np.exp(-(1.0 + epsilon) * beta * (1.0 - np.asarray(r, dtype=float)))


def user_update_series(r: float, beta: float, epsilon: float, tail: float = TAIL_MASS) -> float:
    """sum_d lambda_d r^(d-1) with Poisson user degrees of mean (1+eps)*beta."""
    mean = (1.0 + epsilon) * beta
    upper = int(stats.poisson.isf(tail, mean)) + 2
    d = np.arange(1, upper + 1)
    lam = d * stats.poisson.pmf(d, mean) / mean
    return float(np.dot(lam, np.power(r, d - 1)))


def evolve_constant_degree(p_A: float, K: int, betas, load: float,
                           tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER):
    """Run the iteration for several constant slot degrees at once.

    Each chain is iterated exactly as :func:`evolve` would and frozen once it
    converges. Returns (p_R, iterations, converged) arrays.
    """
    betas = np.asarray(betas, dtype=np.int64)
    y = np.ones(betas.size)
    iters = np.zeros(betas.size, dtype=np.int64)
    done = np.zeros(betas.size, dtype=bool)
    trivial = betas - 1 < K  # slot always decodable: r = 0 from the start
    for it in range(1, max_iter + 1):
        idx = np.flatnonzero(~done)
        if idx.size == 0:
            break
        b = betas[idx]
        r = np.where(trivial[idx], 0.0, np.minimum(bdtrc(K - 1, np.maximum(b - 1, K), p_A * y[idx]), 1.0))
        y_new = np.exp(-load * b * (1.0 - r))
        conv = np.abs(y_new - y[idx]) < tol
        y[idx] = y_new
        iters[idx] = it
        done[idx[conv]] = True
    return 1.0 - y, iters, done


def evolve(params: EvolutionParams) -> EvolutionResult:
    psi = params.psi if params.psi is not None else edge_active_distribution(params.p_A, params.beta)
    y = 1.0
    traj = []
    converged = False
    it = 0
    for it in range(1, params.max_iter + 1):
        r = slot_update(y, psi, params.K)
        y_new = float(user_update(r, params.beta, params.epsilon))
        if params.keep_trajectory:
            traj.append((r, y_new))
        step = abs(y_new - y)
        y = y_new
        if step < params.tol:
            converged = True
            break
    p_R = 1.0 - y
    return EvolutionResult(p_R, asymptotic_throughput(p_R, params.p_A, params.epsilon, params.K),
                           it, converged, traj)


def asymptotic_throughput(p_R: float, p_A: float, epsilon: float, K: int) -> float:
    return p_R * p_A / ((1.0 + epsilon) * K)


def resolution_upper_bound(M: float, N: float, beta: float) -> float:
    """1 - P[user never scheduled] = 1 - exp(-M*beta/N)."""
    return -math.expm1(-M * beta / N)


@dataclass(frozen=True)
class SweepPoint:
    beta_star: int
    p_R_star: float
    T_star: float
    converged: bool
    iterations: int


def sweep_beta(p_A: float, K: int, epsilon: float, beta_range, objective: str = "resolution",
               tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER) -> SweepPoint:
    """Best constant slot degree at load M/N = 1 + epsilon; ties go to the smallest beta."""
    betas = np.asarray(list(beta_range), dtype=np.int64)
    if betas.size == 0:
        raise ValueError("beta_range is empty")
    if objective not in ("resolution", "throughput"):
        raise ValueError(f"unknown objective {objective!r}")
    order = np.argsort(betas, kind="stable")
    betas = betas[order]
    p_R, iters, conv = evolve_constant_degree(p_A, K, betas, 1.0 + epsilon, tol, max_iter)
    T = asymptotic_throughput(p_R, p_A, epsilon, K)
    i = int(np.argmax(p_R if objective == "resolution" else T))
    return SweepPoint(int(betas[i]), float(p_R[i]), float(T[i]), bool(conv[i]), int(iters[i]))
