"""Bi-objective weighted-sum machinery: dominance, Pareto filtering, and the
noninferior-set-estimation loop that traces the frontier between the two
training losses.

The tracing loop solves the two extreme weightings first, then repeatedly
picks the adjacent frontier segment with the largest normalized gap and
solves the weighted problem whose weight vector is the segment's normal.
A candidate point is kept only if it improves the segment's scalarized value
by more than ``gap_tol`` (normalized by the extremes' objective ranges);
otherwise the segment is closed.
"""

from __future__ import annotations

import heapq
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np


class SolverError(RuntimeError):
    """The weighted-problem solver failed at a specific weight vector."""

    def __init__(self, w: tuple[float, float], cause: Exception):
        super().__init__(f"solver failed at w={w}: {cause}")
        self.w = w
        self.cause = cause


@dataclass(frozen=True)
class ObjectivePoint:
    f1: float
    f2: float
    w: tuple[float, float]
    solution_ref: str = ""

    def __post_init__(self):
        if not (math.isfinite(self.f1) and math.isfinite(self.f2)):
            raise ValueError(f"non-finite objective point ({self.f1}, {self.f2})")
        w1, w2 = self.w
        if w1 < -1e-12 or w2 < -1e-12 or abs(w1 + w2 - 1.0) > 1e-9:
            raise ValueError(f"weight vector off the simplex: {self.w}")


@dataclass
class Frontier:
    points: list[ObjectivePoint]        # sorted by f1 ascending
    solver_budget_used: int

    def non_degenerate(self) -> list[ObjectivePoint]:
        """Points excluding the pure rationale-loss extreme w = (0, 1)."""
        return [p for p in self.points if p.w[0] > 0.0]


def dominates(a: ObjectivePoint, b: ObjectivePoint) -> bool:
    """True iff a is at least as good in both objectives and better in one."""
    return (a.f1 <= b.f1 and a.f2 <= b.f2) and (a.f1 < b.f1 or a.f2 < b.f2)


def pareto_filter(points: Sequence[ObjectivePoint]) -> list[ObjectivePoint]:
    """Retain exactly the non-dominated points, sorted by f1 ascending.

    Sweep over points sorted by (f1, f2): a point is non-dominated iff its
    f2 is strictly below every f2 seen so far, except that exact duplicates
    of a retained point are also retained.
    """
    order = sorted(points, key=lambda p: (p.f1, p.f2))
    kept: list[ObjectivePoint] = []
    best_f2 = math.inf
    last_kept: Optional[ObjectivePoint] = None
    for p in order:
        if p.f2 < best_f2:
            kept.append(p)
            best_f2 = p.f2
            last_kept = p
        elif last_kept is not None and p.f1 == last_kept.f1 and p.f2 == last_kept.f2:
            kept.append(p)
    return kept


def nise(
    solve: Callable[[tuple[float, float]], ObjectivePoint],
    budget: int = 30,
    gap_tol: float = 1e-3,
) -> Frontier:
    """Trace the frontier with at most ``budget`` weighted solves."""
    if budget < 2:
        raise ValueError("budget must be >= 2")
    if gap_tol < 0:
        raise ValueError("gap_tol must be >= 0")

    def call(w: tuple[float, float]) -> ObjectivePoint:
        try:
            return solve(w)
        except Exception as exc:
            raise SolverError(w, exc) from exc

    a = call((1.0, 0.0))
    b = call((0.0, 1.0))
    used = 2
    points = [a, b]

    range_f1 = max(abs(b.f1 - a.f1), 1e-12)
    range_f2 = max(abs(a.f2 - b.f2), 1e-12)

    def seg_priority(lo: ObjectivePoint, hi: ObjectivePoint) -> float:
        # normalized segment diagonal as the estimated gap
        return math.hypot(
            (hi.f1 - lo.f1) / range_f1, (lo.f2 - hi.f2) / range_f2
        )

    # max-heap over open segments; counter breaks priority ties deterministically
    heap: list[tuple[float, int, ObjectivePoint, ObjectivePoint]] = []
    counter = 0

    def push(lo: ObjectivePoint, hi: ObjectivePoint):
        nonlocal counter
        if hi.f1 - lo.f1 <= 1e-15 or lo.f2 - hi.f2 <= 1e-15:
            return  # degenerate segment: endpoints coincide in an objective
        heapq.heappush(heap, (-seg_priority(lo, hi), counter, lo, hi))
        counter += 1

    if a.f1 <= b.f1:
        push(a, b)
    else:
        push(b, a)

    while heap and used < budget:
        _, _, lo, hi = heapq.heappop(heap)
        df2 = lo.f2 - hi.f2
        df1 = hi.f1 - lo.f1
        w1 = df2 / (df2 + df1)
        w = (w1, 1.0 - w1)
        p = call(w)
        used += 1
        s_new = w[0] * p.f1 + w[1] * p.f2
        s_seg = min(w[0] * lo.f1 + w[1] * lo.f2, w[0] * hi.f1 + w[1] * hi.f2)
        improvement = (s_seg - s_new) / (w[0] * range_f1 + w[1] * range_f2)
        if improvement > gap_tol:
            points.append(p)
            push(lo, p)
            push(p, hi)
        # else: segment closed

    filtered = pareto_filter(points)
    filtered.sort(key=lambda q: (q.f1, q.f2))
    return Frontier(points=filtered, solver_budget_used=used)


@dataclass
class CertificationReport:
    violations: list[tuple[ObjectivePoint, ObjectivePoint]] = field(
        default_factory=list
    )

    @property
    def ok(self) -> bool:
        return not self.violations


def certify_frontier(frontier: Frontier) -> CertificationReport:
    """Check the observable consequence of weighted-sum necessity.

    Every point obtained with strictly positive weights must be
    non-dominated within the returned set.  Violations are reported, not
    raised.
    """
    report = CertificationReport()
    for p in frontier.points:
        if not (p.w[0] > 0.0 and p.w[1] > 0.0):
            continue
        for q in frontier.points:
            if q is not p and dominates(q, p):
                report.violations.append((p, q))
    return report


def save_frontier(frontier: Frontier, path) -> None:
    records = [
        {
            "w1": p.w[0],
            "w2": p.w[1],
            "train_ce": p.f1,
            "train_crl": p.f2,
            "weights_file": p.solution_ref,
            "degenerate": p.w[0] == 0.0,
        }
        for p in frontier.points
    ]
    with open(path, "w", encoding="utf-8") as f:
        json.dump(records, f, indent=2)


def load_frontier(path) -> Frontier:
    with open(path, encoding="utf-8") as f:
        records = json.load(f)
    points = [
        ObjectivePoint(
            f1=r["train_ce"], f2=r["train_crl"], w=(r["w1"], r["w2"]),
            solution_ref=r["weights_file"],
        )
        for r in records
    ]
    return Frontier(points=points, solver_budget_used=len(points))
