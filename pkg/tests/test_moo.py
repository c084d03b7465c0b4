import numpy as np
import pytest

from rationale_frontier.moo import (
    CertificationReport,
    Frontier,
    ObjectivePoint,
    SolverError,
    certify_frontier,
    dominates,
    load_frontier,
    nise,
    pareto_filter,
    save_frontier,
)


def pt(f1, f2, w=(0.5, 0.5)):
    return ObjectivePoint(f1=f1, f2=f2, w=w)


class TestDominates:
    def test_strict(self):
        assert dominates(pt(1, 1), pt(2, 2))

    def test_incomparable(self):
        assert not dominates(pt(1, 2), pt(2, 1))
        assert not dominates(pt(2, 1), pt(1, 2))

    def test_equal_points(self):
        assert not dominates(pt(1, 1), pt(1, 1))


def brute_force_filter(points):
    return [p for p in points
            if not any(dominates(q, p) for q in points if q is not p)]


class TestParetoFilter:
    def test_simple_case(self):
        points = [pt(1, 2), pt(2, 1), pt(2, 2)]
        kept = pareto_filter(points)
        assert {(p.f1, p.f2) for p in kept} == {(1, 2), (2, 1)}

    def test_idempotent_on_clean_set(self):
        points = [pt(1, 3), pt(2, 2), pt(3, 1)]
        assert pareto_filter(pareto_filter(points)) == pareto_filter(points)
        assert len(pareto_filter(points)) == 3

    def test_matches_brute_force_random(self):
        rng = np.random.default_rng(0)
        points = [pt(float(a), float(b))
                  for a, b in rng.integers(0, 40, size=(1000, 2))]
        kept = pareto_filter(points)
        expected = brute_force_filter(points)
        assert sorted((p.f1, p.f2) for p in kept) == \
            sorted((p.f1, p.f2) for p in expected)


def toy_solver(w):
    """f1=(t-1)^2, f2=(t+1)^2; weighted optimum at t* = w1 - w2."""
    t = w[0] - w[1]
    return ObjectivePoint(f1=(t - 1) ** 2, f2=(t + 1) ** 2, w=w)


class TestNise:
    def test_symmetric_weight(self):
        frontier = nise(toy_solver, budget=3, gap_tol=0.0)
        mid = [p for p in frontier.points if p.w == (0.5, 0.5)]
        assert mid and mid[0].f1 == pytest.approx(1.0) \
            and mid[0].f2 == pytest.approx(1.0)

    def test_extreme_points(self):
        frontier = nise(toy_solver, budget=2)
        coords = {(round(p.f1, 9), round(p.f2, 9)) for p in frontier.points}
        assert coords == {(0.0, 4.0), (4.0, 0.0)}

    def test_budget_respected(self):
        frontier = nise(toy_solver, budget=15, gap_tol=0.0)
        assert frontier.solver_budget_used <= 15

    def test_points_on_parametric_curve(self):
        frontier = nise(toy_solver, budget=15, gap_tol=0.0)
        for p in frontier.points:
            t = p.w[0] - p.w[1]
            assert p.f1 == pytest.approx((t - 1) ** 2, abs=1e-6)
            assert p.f2 == pytest.approx((t + 1) ** 2, abs=1e-6)

    def test_gap_vs_dense_sweep_oracle(self):
        # oracle: dense 1001-weight sweep of the same solver
        dense = [toy_solver((w1, 1.0 - w1)) for w1 in np.linspace(0, 1, 1001)]
        range1 = range2 = 4.0

        def remaining_improvement(a, b):
            # true scalarized improvement available inside segment (a, b),
            # normalized the same way the tracing loop normalizes it
            df2, df1 = a.f2 - b.f2, b.f1 - a.f1
            w1 = df2 / (df2 + df1)
            w = (w1, 1.0 - w1)
            s_seg = min(w[0] * a.f1 + w[1] * a.f2, w[0] * b.f1 + w[1] * b.f2)
            s_best = min(w[0] * p.f1 + w[1] * p.f2 for p in dense)
            return (s_seg - s_best) / (w[0] * range1 + w[1] * range2)

        def segments(frontier):
            pts = sorted(frontier.points, key=lambda p: p.f1)
            return list(zip(pts, pts[1:]))

        def estimate(a, b):
            return np.hypot((b.f1 - a.f1) / range1, (a.f2 - b.f2) / range2)

        frontier = nise(toy_solver, budget=15, gap_tol=0.0)
        for a, b in segments(frontier):
            assert remaining_improvement(a, b) <= estimate(a, b) + 1e-9
        # largest-gap-first refinement: more budget shrinks the worst gap
        coarse = nise(toy_solver, budget=5, gap_tol=0.0)
        worst_fine = max(remaining_improvement(a, b) for a, b in segments(frontier))
        worst_coarse = max(remaining_improvement(a, b) for a, b in segments(coarse))
        assert worst_fine <= worst_coarse + 1e-9

    def test_scalar_optimality_among_returned(self):
        frontier = nise(toy_solver, budget=20, gap_tol=0.0)
        for p in frontier.points:
            s = p.w[0] * p.f1 + p.w[1] * p.f2
            for q in frontier.points:
                assert s <= p.w[0] * q.f1 + p.w[1] * q.f2 + 1e-9

    def test_sorted_and_antitone(self):
        frontier = nise(toy_solver, budget=20, gap_tol=0.0)
        f1s = [p.f1 for p in frontier.points]
        f2s = [p.f2 for p in frontier.points]
        assert f1s == sorted(f1s)
        assert f2s == sorted(f2s, reverse=True)

    def test_deterministic(self):
        a = nise(toy_solver, budget=17, gap_tol=1e-4)
        b = nise(toy_solver, budget=17, gap_tol=1e-4)
        assert a.points == b.points

    def test_solver_failure_propagates_with_weight(self):
        def bad_solver(w):
            if w[0] not in (0.0, 1.0):
                raise RuntimeError("boom")
            return toy_solver(w)

        with pytest.raises(SolverError, match="w="):
            nise(bad_solver, budget=5)

    def test_gap_tol_closes_segments_early(self):
        frontier = nise(toy_solver, budget=30, gap_tol=0.2)
        assert frontier.solver_budget_used < 30


class TestCertifyFrontier:
    def test_toy_frontier_clean(self):
        frontier = nise(toy_solver, budget=10, gap_tol=0.0)
        assert certify_frontier(frontier).ok

    def test_planted_dominated_interior_point(self):
        points = [
            ObjectivePoint(0.0, 4.0, (1.0, 0.0)),
            ObjectivePoint(2.0, 3.0, (0.5, 0.5)),   # dominated by (1.0, 1.0)
            ObjectivePoint(1.0, 1.0, (0.6, 0.4)),
            ObjectivePoint(4.0, 0.0, (0.0, 1.0)),
        ]
        frontier = Frontier(points=sorted(points, key=lambda p: p.f1),
                            solver_budget_used=4)
        report = certify_frontier(frontier)
        assert len(report.violations) == 1
        assert report.violations[0][0].f1 == 2.0


class TestFrontierIO:
    def test_round_trip_and_degenerate_flag(self, tmp_path):
        frontier = nise(toy_solver, budget=8, gap_tol=0.0)
        path = tmp_path / "frontier.json"
        save_frontier(frontier, path)
        loaded = load_frontier(path)
        assert [(p.f1, p.f2, p.w) for p in loaded.points] == \
            [(p.f1, p.f2, p.w) for p in frontier.points]
        import json
        records = json.loads(path.read_text())
        degenerate = [r for r in records if r["degenerate"]]
        assert len(degenerate) == 1 and degenerate[0]["w1"] == 0.0

    def test_non_degenerate_excludes_w1_zero(self):
        frontier = nise(toy_solver, budget=6, gap_tol=0.0)
        assert all(p.w[0] > 0 for p in frontier.non_degenerate())
        assert len(frontier.non_degenerate()) == len(frontier.points) - 1
