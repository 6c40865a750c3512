"""Budgeted Nelder-Mead search over measurement settings."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .fisher import SINGULAR_COST, FisherMatrix, SingularFisherError, trace_inverse
from .sampling import make_rng

STEP_KINDS = ("init", "reflect", "expand", "contract", "shrink")


class NonFiniteCostError(RuntimeError):
    pass


class _BudgetExhausted(Exception):
    pass


@dataclass(frozen=True)
class NMConfig:
    max_fev: int = 20
    restarts: int = 3
    reflect: float = 1.0
    expand: float = 2.0
    contract: float = 0.5
    shrink: float = 0.5
    init_spread: float = 1.0
    start: tuple[float, ...] = (math.pi / 2, math.pi / 2, math.pi / 2)

    def __post_init__(self):
        object.__setattr__(self, "start", tuple(float(x) for x in self.start))
        p = len(self.start)
        if p < 1:
            raise ValueError("start point needs at least one coordinate")
        if self.max_fev < p + 2:
            raise ValueError(f"max_fev must be >= p + 2 = {p + 2}, got {self.max_fev}")
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")
        for name in ("reflect", "expand", "contract", "shrink", "init_spread"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if not self.contract < 1:
            raise ValueError("contract must be < 1")
        if not self.shrink < 1:
            raise ValueError("shrink must be < 1")
        if not self.expand > self.reflect:
            raise ValueError("expand must exceed reflect")

    @property
    def dimension(self) -> int:
        return len(self.start)


@dataclass(frozen=True)
class Evaluation:
    point: np.ndarray
    cost: float
    kind: str


@dataclass
class OptimizationTrace:
    records: list[Evaluation] = field(default_factory=list)
    seed: int | None = None

    @property
    def best_index(self) -> int:
        return int(np.argmin([r.cost for r in self.records]))

    @property
    def best_point(self) -> np.ndarray:
        return self.records[self.best_index].point

    @property
    def best_cost(self) -> float:
        return self.records[self.best_index].cost

    @property
    def costs(self) -> np.ndarray:
        return np.array([r.cost for r in self.records])

    def best_so_far(self) -> np.ndarray:
        return np.minimum.accumulate(self.costs)

    def __len__(self):
        return len(self.records)

    def to_csv(self, extra: dict | None = None) -> str:
        """CSV with columns ``step, theta_1..theta_p, cost, kind`` (plus ``extra``)."""
        buf = io.StringIO()
        p = len(self.records[0].point) if self.records else 0
        extra = extra or {}
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(list(extra) + ["step"] + [f"theta_{i + 1}" for i in range(p)] + ["cost", "kind"])
        for k, r in enumerate(self.records):
            w.writerow(
                list(extra.values()) + [k] + [f"{x:.12g}" for x in r.point]
                + [f"{r.cost:.12g}", r.kind]
            )
        return buf.getvalue()


def initial_simplex(start, spread: float, rng: np.random.Generator) -> np.ndarray:
    """``start`` plus ``p`` vertices at ``spread`` along random unit directions."""
    start = np.asarray(start, dtype=float)
    p = start.size
    while True:
        dirs = rng.normal(size=(p, p))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        # reject nearly flat simplices
        if abs(np.linalg.det(dirs)) > 1e-3:
            return np.vstack([start, start + spread * dirs])


def simplex_volume(vertices: np.ndarray) -> float:
    v = np.asarray(vertices, dtype=float)
    edges = v[1:] - v[0]
    return abs(np.linalg.det(edges)) / math.factorial(len(edges))


def nelder_mead(cost_fn: Callable[[np.ndarray], float], config: NMConfig = NMConfig(),
                seed=0, simplex_log: list | None = None) -> OptimizationTrace:
    """Minimize ``cost_fn`` with at most ``config.max_fev`` evaluations.

    The initial-simplex evaluations count against the budget.  If
    ``simplex_log`` is a list, a copy of the simplex is appended after every
    completed step.
    """
    rng = make_rng(seed)
    trace = OptimizationTrace(seed=seed if isinstance(seed, int) else None)
    p = config.dimension

    def evaluate(x, kind):
        if len(trace) >= config.max_fev:
            raise _BudgetExhausted
        value = float(cost_fn(np.array(x, dtype=float)))
        if not math.isfinite(value):
            raise NonFiniteCostError(f"cost function returned {value} at {np.round(x, 6)}")
        trace.records.append(Evaluation(np.array(x, dtype=float), value, kind))
        return value

    sim = initial_simplex(config.start, config.init_spread, rng)
    fsim = np.empty(p + 1)
    try:
        for k in range(p + 1):
            fsim[k] = evaluate(sim[k], "init")
        while True:
            order = np.argsort(fsim, kind="stable")
            sim, fsim = sim[order], fsim[order]
            if simplex_log is not None:
                simplex_log.append(sim.copy())
            centroid = sim[:-1].mean(axis=0)
            worst = sim[-1]

            xr = centroid + config.reflect * (centroid - worst)
            fr = evaluate(xr, "reflect")
            if fr < fsim[0]:
                xe = centroid + config.expand * (centroid - worst)
                fe = evaluate(xe, "expand")
                if fe < fr:
                    sim[-1], fsim[-1] = xe, fe
                else:
                    sim[-1], fsim[-1] = xr, fr
                continue
            if fr < fsim[-2]:
                sim[-1], fsim[-1] = xr, fr
                continue
            if fr < fsim[-1]:
                # outside contraction
                xc = centroid + config.contract * (xr - centroid)
                fc = evaluate(xc, "contract")
                if fc <= fr:
                    sim[-1], fsim[-1] = xc, fc
                    continue
            else:
                xc = centroid + config.contract * (worst - centroid)
                fc = evaluate(xc, "contract")
                if fc < fsim[-1]:
                    sim[-1], fsim[-1] = xc, fc
                    continue
            for k in range(1, p + 1):
                sim[k] = sim[0] + config.shrink * (sim[k] - sim[0])
                fsim[k] = evaluate(sim[k], "shrink")
    except _BudgetExhausted:
        pass
    return trace


def fisher_cost(experiment: Callable[[np.ndarray], FisherMatrix],
                regularization: float = 0.0,
                fallback: float = SINGULAR_COST) -> Callable[[np.ndarray], float]:
    """Wrap ``theta -> FisherMatrix`` into ``theta -> Tr[F^-1]``.

    Singular or non-finite matrices cost ``fallback``; the attribute
    ``singular_events`` collects the settings where that happened.
    """
    singular: list[np.ndarray] = []

    def cost(theta):
        f = experiment(theta)
        entries = getattr(f, "entries", f)
        if not np.all(np.isfinite(entries)):
            singular.append(np.array(theta))
            return fallback
        try:
            return trace_inverse(f, regularization)
        except SingularFisherError:
            singular.append(np.array(theta))
            return fallback

    cost.singular_events = singular
    return cost


def optimize_settings(experiment: Callable[[np.ndarray], FisherMatrix],
                      config: NMConfig = NMConfig(), seed=0,
                      regularization: float = 0.0) -> tuple[np.ndarray, list[OptimizationTrace]]:
    """Run ``config.restarts`` independent searches; keep the lowest-cost setting."""
    cost = fisher_cost(experiment, regularization)
    traces = [nelder_mead(cost, config, make_rng(seed, r)) for r in range(config.restarts)]
    best = select_best(traces)
    return traces[best].best_point.copy(), traces


def select_best(traces: Sequence[OptimizationTrace]) -> int:
    return int(np.argmin([t.best_cost for t in traces]))


def wrap_phases(theta) -> np.ndarray:
    """Map angles to [-pi, pi)."""
    return (np.asarray(theta, dtype=float) + np.pi) % (2 * np.pi) - np.pi
