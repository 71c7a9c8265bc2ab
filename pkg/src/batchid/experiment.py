"""Contention-period simulation, Monte Carlo aggregation and sweep drivers."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .channel import activate, observe_slot
from .decoder import ResolutionState
from .estimator import MultiplicityEvidence, map_estimate
from .evolution import (DEFAULT_MAX_ITER, DEFAULT_TOL, default_load_grid, resolution_upper_bound,
                        sweep_beta)
from .model import ConfigError, RunRecord, SystemConfig
from .scheduler import Schedule, slot_rng

# non-asymptotic evaluation setting
TABLE1_N = 1000
TABLE1_P_A = 0.2
TABLE1_K_MAX = 10
TABLE1_H = 0.7
TABLE1_KS = (1, 2, 4, 8)


@dataclass
class ExperimentConfig:
    cfg: SystemConfig
    H: float = 0.7
    M_max: int | None = None  # default 10 * N / K
    runs: int = 500
    seed: int = 0
    beta_grid: list[int] = field(default_factory=list)
    objective: str = "throughput"
    m_min: int = 10

    def __post_init__(self):
        if not 0.0 < self.H <= 1.0:
            raise ConfigError(f"H must lie in (0, 1], got {self.H}")
        if self.M_max is None:
            self.M_max = max(1, (10 * self.cfg.N) // self.cfg.K)
        if self.M_max < 1 or self.runs < 1:
            raise ConfigError("M_max and runs must be >= 1")
        if not self.beta_grid:
            self.beta_grid = list(self.cfg.omega.degrees) if len(self.cfg.omega.degrees) == 1 else []
        if not self.beta_grid:
            raise ConfigError("beta_grid is empty")
        if self.objective not in ("throughput", "resolution"):
            raise ConfigError(f"unknown objective {self.objective!r}")

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        try:
            cfg = SystemConfig.from_dict(doc)
            extra = {k: doc[k] for k in ("H", "M_max", "runs", "seed", "objective", "m_min") if k in doc}
            grid = [int(b) for b in doc.get("beta_grid", [])]
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"malformed experiment config: {exc}") from exc
        return cls(cfg=cfg, beta_grid=grid, **extra)

    def to_dict(self) -> dict:
        doc = self.cfg.to_dict()
        doc.update(H=self.H, M_max=self.M_max, runs=self.runs, seed=self.seed,
                   beta_grid=list(self.beta_grid), objective=self.objective, m_min=self.m_min)
        return doc


def run_seed(master: int, i: int) -> int:
    """Seed of Monte Carlo run ``i``; shared across beta values (common random numbers)."""
    return int(np.random.SeedSequence([int(master), int(i)]).generate_state(1, np.uint64)[0])


class ContentionPeriod:
    """One contention period, advanced one slot at a time.

    Activation uses stream ``(seed, 0)`` and slot ``j`` uses ``(seed, j)``.
    """

    def __init__(self, cfg: SystemConfig, seed: int, estimate: bool = True, trace: list | None = None):
        self.cfg = cfg
        self.seed = seed
        self.outcome = activate(cfg, slot_rng(seed, 0))
        self.schedule = Schedule(seed=seed, N=cfg.N, omega=cfg.omega)
        self.decoder = ResolutionState(cfg.K)
        self.evidence = MultiplicityEvidence()
        self.estimate = estimate
        self.N_E = 0
        self._hint = None
        self.trace = trace

    @property
    def M(self) -> int:
        return len(self.schedule)

    @property
    def N_A(self) -> int:
        return self.outcome.N_A

    @property
    def N_R(self) -> int:
        return self.decoder.n_resolved

    @property
    def f_RE(self) -> float:
        return self.N_R / max(self.N_E, 1)

    def step(self) -> None:
        j, users = self.schedule.extend()
        obs = observe_slot(users, self.outcome, self.cfg, slot_index=j)
        self.decoder.ingest(obs)
        self.decoder.peel()
        new = [(d, a) for _, d, a in self.decoder.drain_new_exact()]
        if self.estimate:
            self.evidence.extend(new)
            est = map_estimate(self.evidence, self.cfg, self.N_R, hint=self._hint)
            self.N_E = self._hint = est.n_hat
        if self.trace is not None:
            self.trace.append({"j": j, "d_S": obs.degree, "reported": obs.reported_multiplicity,
                               "clipped": obs.clipped, "exact": [list(p) for p in new], "N_R": self.N_R})


def _record(cp: ContentionPeriod, beta: int, truncated: bool, f_RE: float) -> RunRecord:
    N_A, N_R, N_E, M = cp.N_A, cp.N_R, cp.N_E, cp.M
    if N_A > 0:
        f_RA = N_R / N_A
        delta = (N_E - N_A) / N_A
    else:
        f_RA = 1.0
        delta = 0.0 if N_E == 0 else math.inf
    return RunRecord(M=M, N_A=N_A, N_R=N_R, N_E=N_E, f_RE=f_RE, f_RA=f_RA,
                     T=N_R / (M * cp.cfg.K), delta_nE=delta, abs_delta_nE=abs(delta),
                     beta=beta, K=cp.cfg.K, seed=cp.seed, truncated=truncated)


def run_contention_period(expcfg: ExperimentConfig, beta: int | None, seed: int,
                          trace: list | None = None) -> RunRecord:
    """Add slots until the estimated resolved fraction reaches H (or M_max).

    If nothing is resolved and the estimate is 0 after ``m_min`` slots the run
    stops with f_RE taken as 1.
    """
    cfg = expcfg.cfg if beta is None else expcfg.cfg.with_beta(beta)
    beta = int(round(cfg.omega.mean)) if beta is None else int(beta)
    cp = ContentionPeriod(cfg, seed, estimate=True, trace=trace)
    while True:
        cp.step()
        if cp.N_E == 0 and cp.N_R == 0 and cp.M >= expcfg.m_min:
            return _record(cp, beta, False, 1.0)
        f = cp.f_RE
        if f >= expcfg.H:
            return _record(cp, beta, False, f)
        if cp.M >= expcfg.M_max:
            return _record(cp, beta, True, f)


def run_fixed_length(cfg: SystemConfig, M: int, seed: int) -> tuple[int, int]:
    """(N_A, N_R) after exactly M slots, without estimation."""
    cp = ContentionPeriod(cfg, seed, estimate=False)
    for _ in range(M):
        cp.step()
    return cp.N_A, cp.N_R


# ---------------------------------------------------------------------------
# aggregation

METRICS = ("f_RE", "f_RA", "T", "delta_nE", "abs_delta_nE", "M")


@dataclass
class AggregateMetrics:
    beta: int
    runs_used: int
    mean: dict[str, float]
    stderr: dict[str, float]
    truncation_count: int
    K: int = 0
    beta_star: int | None = None

    def row(self) -> dict:
        out = {"K": self.K, "beta": self.beta, "runs": self.runs_used}
        for m in METRICS:
            out[m] = self.mean[m]
            out[f"{m}_se"] = self.stderr[m]
        out["truncated"] = self.truncation_count
        out["beta_star"] = self.beta_star
        return out


def aggregate(records: list[RunRecord], beta: int) -> AggregateMetrics:
    if not records:
        raise ValueError("no records to aggregate")
    mean, se = {}, {}
    n = len(records)
    for m in METRICS:
        x = np.array([getattr(r, m) for r in records], dtype=float)
        mean[m] = float(x.mean())
        se[m] = float(x.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return AggregateMetrics(beta, n, mean, se, sum(r.truncated for r in records), K=records[0].K)


@dataclass
class MonteCarloResult:
    per_beta: dict[int, AggregateMetrics]
    beta_star: int
    records: list[RunRecord]

    @property
    def best(self) -> AggregateMetrics:
        return self.per_beta[self.beta_star]


def _runs_for_beta(expcfg: ExperimentConfig, beta: int) -> list[RunRecord]:
    return [run_contention_period(expcfg, beta, run_seed(expcfg.seed, i)) for i in range(expcfg.runs)]


def monte_carlo(expcfg: ExperimentConfig, progress=None, workers: int = 1) -> MonteCarloResult:
    """Run every beta in the grid ``runs`` times; beta* maximises the mean objective.

    Run ``i`` uses the same seed for every beta. Ties go to the smaller beta.
    With ``workers > 1`` each beta is handed to a worker process; records come
    back in run-index order, so the result does not depend on ``workers``.
    """
    key = "T" if expcfg.objective == "throughput" else "f_RA"
    betas = sorted(set(expcfg.beta_grid))
    per_beta, records = {}, []
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            batches = pool.map(_runs_for_beta, [expcfg] * len(betas), betas)
            results = list(zip(betas, batches))
    else:
        results = ((b, _runs_for_beta(expcfg, b)) for b in betas)
    for beta, recs in results:
        records.extend(recs)
        per_beta[beta] = aggregate(recs, beta)
        if progress is not None:
            progress(per_beta[beta])
    beta_star = betas[int(np.argmax([per_beta[b].mean[key] for b in betas]))]
    for agg in per_beta.values():
        agg.beta_star = beta_star
    return MonteCarloResult(per_beta, beta_star, records)


# ---------------------------------------------------------------------------
# asymptotic curves


@dataclass(frozen=True)
class CurvePoint:
    K: int
    M_over_N: float
    beta_star: int
    p_R_star: float
    T_star: float
    p_U: float
    converged: bool
    iterations: int


def figure_sweep(p_A: float, K_list, M_over_N_grid=None, beta_grid=range(1, 101),
                 objective: str = "resolution", tol: float = DEFAULT_TOL,
                 max_iter: int = DEFAULT_MAX_ITER) -> list[CurvePoint]:
    """Best-beta resolution probability, throughput and bound on a load grid, per K."""
    grid = default_load_grid() if M_over_N_grid is None else np.asarray(M_over_N_grid, dtype=float)
    betas = list(beta_grid)
    out = []
    for K in K_list:
        for x in grid:
            pt = sweep_beta(p_A, K, float(x) - 1.0, betas, objective, tol, max_iter)
            out.append(CurvePoint(int(K), float(x), pt.beta_star, pt.p_R_star, pt.T_star,
                                  resolution_upper_bound(float(x), 1.0, pt.beta_star),
                                  pt.converged, pt.iterations))
    return out


def asymptotic_beta_star(p_A: float, K: int, beta_grid=range(1, 101), step: float = 0.005) -> int:
    """beta* at the load on the default grid where the asymptotic throughput peaks."""
    pts = figure_sweep(p_A, [K], default_load_grid(step, upper=min(1.0, 3 * p_A / K)), beta_grid)
    return max(pts, key=lambda p: p.T_star).beta_star


def default_beta_grid(center: int, spread: float = 0.5) -> list[int]:
    lo = max(1, int(math.floor(center * (1 - spread))))
    hi = int(math.ceil(center * (1 + spread)))
    return list(range(lo, hi + 1))


def table1_configs(runs: int = 500, seed: int = 0, Ks=TABLE1_KS, spread: float = 0.5,
                   beta_grids: dict | None = None) -> list[ExperimentConfig]:
    """One experiment per K at N=1000, p_A=0.2, K_max=10, H=0.7."""
    out = []
    for K in Ks:
        grid = (beta_grids or {}).get(K) or default_beta_grid(asymptotic_beta_star(TABLE1_P_A, K), spread)
        cfg = SystemConfig.from_dict({"N": TABLE1_N, "p_A": TABLE1_P_A, "K": K, "K_max": TABLE1_K_MAX,
                                      "omega": [[grid[0], 1.0]]})
        out.append(ExperimentConfig(cfg=cfg, H=TABLE1_H, runs=runs, seed=seed, beta_grid=grid))
    return out
