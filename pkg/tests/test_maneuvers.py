import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mpa.errors import DomainError, InfeasibleManeuverError
from mpa.maneuvers import (
    Maneuver,
    ManeuverProblem,
    build_maneuver,
    evaluate_objectives,
    nondominated_filter,
    solve_scalarized,
    sweep_pareto,
)
from mpa import solver
from mpa.trims import Trim, standard_trim_table
from mpa.vehicle import GroupElement, Input, State, VehicleParams, integrate_step

PARAMS = VehicleParams()
TABLE = {t.id: t for t in standard_trim_table()}


@pytest.fixture(scope="module")
def accel_maneuver():
    return solve_scalarized(ManeuverProblem(TABLE["pi1"], TABLE["pi7"], PARAMS), 0.0)


@pytest.fixture(scope="module")
def steer_maneuver():
    return solve_scalarized(ManeuverProblem(TABLE["pi7"], TABLE["pi8"], PARAMS), 0.0)


def recursion_residual(m: Maneuver) -> float:
    worst = 0.0
    for k in range(m.N):
        x = integrate_step(State(*m.states[k]), Input(*m.controls[k]), m.dt, PARAMS)
        worst = max(worst, float(np.max(np.abs(np.array(x) - m.states[k + 1]))))
    return worst


class TestEvaluateObjectives:
    def test_zero_everything_for_standstill(self):
        m = solve_scalarized(ManeuverProblem(TABLE["pi1"], TABLE["pi1"], PARAMS), 0.5)
        assert m.costs == pytest.approx((0.0, 0.0, 0.0), abs=1e-12)

    def test_constant_acceleration_effort(self, accel_maneuver):
        # integral of 4^2 over 0.2 s
        assert accel_maneuver.costs[1] == pytest.approx(3.2, rel=1e-6)

    def test_coasting_distance_term(self):
        # straight coasting at 0.8: analytic J1 = -0.64 * 0.2^3 / 3; the
        # trapezoidal value overshoots by its quadrature error only
        n = 20
        dt = 0.2 / n
        states = np.zeros((n + 1, 5))
        states[:, 0] = 0.8 * dt * np.arange(n + 1)
        states[:, 3] = 0.8
        m = Maneuver("pi7", "pi7", "J2", 0.2, np.zeros((n, 2)), states,
                     GroupElement(0.16, 0, 0), (0, 0, 0))
        j1, j2, j3 = evaluate_objectives(m)
        assert j2 == 0.0
        assert j1 == pytest.approx(-0.0017088, abs=1e-12)
        assert j1 == pytest.approx(-0.64 * 0.2 ** 3 / 3, abs=3e-6)
        assert j3 == pytest.approx(0.5 * j1)


class TestNondominatedFilter:
    def test_mutually_nondominated(self):
        pts = [(1, 3), (2, 2), (3, 1)]
        assert nondominated_filter(pts) == [(1, 3), (2, 2), (3, 1)]

    def test_dominated_point_removed(self):
        pts = [(1, 3), (2, 2), (3, 1), (2.5, 2.5)]
        assert nondominated_filter(pts) == [(1, 3), (2, 2), (3, 1)]

    def test_single_point(self):
        assert nondominated_filter([(5.0, -1.0)]) == [(5.0, -1.0)]

    def test_duplicates_collapse(self):
        assert nondominated_filter([(1.0, 1.0), (1.0, 1.0)]) == [(1.0, 1.0)]

    @given(st.lists(st.tuples(st.floats(-10, 10), st.floats(-10, 10)), max_size=30))
    def test_idempotent(self, pts):
        once = nondominated_filter(pts)
        assert nondominated_filter(once) == once

    @given(st.lists(st.tuples(st.floats(-10, 10), st.floats(-10, 10)),
                    min_size=1, max_size=30))
    def test_output_is_mutually_nondominated(self, pts):
        front = nondominated_filter(pts)
        for p in front:
            for q in front:
                if p is q:
                    continue
                assert not (q[0] <= p[0] and q[1] <= p[1] and q != p)


class TestSolver:
    def test_accel_anchor(self, accel_maneuver):
        assert accel_maneuver.costs[1] == pytest.approx(3.2, rel=1e-3)
        assert np.allclose(accel_maneuver.controls[:, 0], 4.0, atol=1e-5)

    def test_steer_anchor(self, steer_maneuver):
        assert steer_maneuver.costs[1] == pytest.approx(0.072, rel=1e-3)
        assert np.allclose(steer_maneuver.controls[:, 1], 0.6, atol=1e-5)

    def test_same_trim_is_zero_effort_for_any_weight(self):
        for w in (0.0, 0.5, 1.0):
            m = solve_scalarized(ManeuverProblem(TABLE["pi7"], TABLE["pi7"], PARAMS), w)
            assert m.costs[1] == pytest.approx(0.0, abs=1e-12)

    def test_distance_weight_orders_objectives(self, accel_maneuver):
        m_dist = solve_scalarized(ManeuverProblem(TABLE["pi1"], TABLE["pi7"], PARAMS), 1.0)
        assert abs(m_dist.costs[0]) >= abs(accel_maneuver.costs[0])

    def test_feasibility_invariants(self, accel_maneuver, steer_maneuver):
        for m in (accel_maneuver, steer_maneuver):
            assert recursion_residual(m) <= 1e-9
            assert m.states[0] == pytest.approx((0, 0, 0, TABLE[m.from_trim].v,
                                                 TABLE[m.from_trim].delta))
            assert abs(m.states[-1, 3] - TABLE[m.to_trim].v) <= 1e-6
            assert abs(m.states[-1, 4] - TABLE[m.to_trim].delta) <= 1e-6
            assert np.all(m.states[:, 3] >= PARAMS.v_min - 1e-9)
            assert np.all(m.states[:, 3] <= PARAMS.v_max + 1e-9)
            assert np.all(np.abs(m.states[:, 4]) <= PARAMS.delta_max + 1e-9)
            assert np.all(np.abs(m.controls[:, 0]) <= PARAMS.a_max + 1e-9)
            assert np.all(np.abs(m.controls[:, 1]) <= PARAMS.ddelta_max + 1e-9)

    def test_displacement_matches_end_state(self, accel_maneuver):
        m = accel_maneuver
        assert m.displacement == pytest.approx(tuple(m.states[-1, :3]))

    def test_state_bound_active_case(self):
        # distance-optimal cruise at the speed cap must not exceed it
        m = solve_scalarized(ManeuverProblem(TABLE["pi6"], TABLE["pi7"], PARAMS), 1.0)
        assert float(np.max(m.states[:, 3])) <= PARAMS.v_max + 1e-9

    def test_infeasible_rate_is_named(self):
        tight = VehicleParams(a_max=1.0)
        prob = ManeuverProblem(TABLE["pi1"], TABLE["pi7"], tight)
        with pytest.raises(InfeasibleManeuverError, match="a_max"):
            solve_scalarized(prob, 0.0)

    def test_weight_domain(self):
        prob = ManeuverProblem(TABLE["pi1"], TABLE["pi7"], PARAMS)
        with pytest.raises(DomainError):
            solve_scalarized(prob, 1.5)

    def test_mirror_symmetry(self):
        left = solve_scalarized(ManeuverProblem(TABLE["pi1"], TABLE["pi2"], PARAMS), 0.0)
        right = solve_scalarized(ManeuverProblem(TABLE["pi1"], TABLE["pi12"], PARAMS), 0.0)
        assert left.costs[0] == pytest.approx(right.costs[0], abs=1e-6)
        assert left.costs[1] == pytest.approx(right.costs[1], abs=1e-6)
        assert np.allclose(left.states[:, 0], right.states[:, 0], atol=1e-6)
        assert np.allclose(left.states[:, 1], -right.states[:, 1], atol=1e-6)
        assert np.allclose(left.states[:, 2], -right.states[:, 2], atol=1e-6)


class TestGradients:
    def test_adjoint_matches_finite_differences(self):
        prob = ManeuverProblem(TABLE["pi1"], TABLE["pi12"], PARAMS)
        al = solver._ALProblem(prob, 0.7, 0.3)
        al.lam = np.array([0.4, -0.9])
        rng = np.random.RandomState(7)
        al.mu = np.abs(rng.standard_normal((prob.N, 4))) * 0.2
        al.rho = 5.0
        for seed in (0, 1, 2):
            z = np.random.RandomState(seed).uniform(-2.0, 2.0, size=2 * prob.N)
            _, grad = al.value_and_grad(z)
            h = 1e-6
            fd = np.empty_like(z)
            for i in range(len(z)):
                zp, zm = z.copy(), z.copy()
                zp[i] += h
                zm[i] -= h
                fd[i] = (al.value_and_grad(zp)[0] - al.value_and_grad(zm)[0]) / (2 * h)
            rel = np.max(np.abs(grad - fd) / (np.abs(fd) + 1e-8))
            assert rel < 1e-4

    def test_terminal_constraint_gradient_is_exact(self):
        # v and delta integrate linearly, so d(v_N)/d(u_vdot_k) = dt for all k
        prob = ManeuverProblem(TABLE["pi1"], TABLE["pi7"], PARAMS)
        controls = np.random.RandomState(3).uniform(-1, 1, size=(prob.N, 2))
        states = solver.rollout(prob.start_state(), controls, prob.dt, PARAMS)
        _, B = solver.step_jacobians(states, controls, prob.dt, PARAMS)
        assert np.allclose(B[:, 3, 0], prob.dt, atol=1e-15)
        assert np.allclose(B[:, 4, 1], prob.dt, atol=1e-15)


class TestSweep:
    def test_identical_trims_single_point(self):
        pts = sweep_pareto(ManeuverProblem(TABLE["pi1"], TABLE["pi1"], PARAMS),
                           [0.0, 0.5, 1.0])
        assert len(pts) == 1
        assert pts[0].objectives == pytest.approx((0.0, 0.0), abs=1e-12)

    def test_front_is_monotone_trade_off(self):
        prob = ManeuverProblem(TABLE["pi1"], TABLE["pi12"], PARAMS)
        pts = sweep_pareto(prob, [0.0, 0.25, 0.5, 0.75, 1.0])
        j1 = [p.objectives[0] for p in pts]
        j2 = [p.objectives[1] for p in pts]
        assert j1 == sorted(j1)
        assert all(j2[i] >= j2[i + 1] - 1e-12 for i in range(len(j2) - 1))

    def test_duplicate_weights_collapse(self):
        prob = ManeuverProblem(TABLE["pi7"], TABLE["pi7"], PARAMS)
        pts = sweep_pareto(prob, [0.0, 0.0, 0.0])
        assert len(pts) == 1

    def test_empty_weights_rejected(self):
        with pytest.raises(DomainError):
            sweep_pareto(ManeuverProblem(TABLE["pi1"], TABLE["pi7"], PARAMS), [])


class TestBuildManeuver:
    def test_labels(self):
        m = build_maneuver(TABLE["pi7"], TABLE["pi8"], "J2", PARAMS)
        assert m.objective == "J2"
        assert m.from_trim == "pi7"
        assert m.to_trim == "pi8"

    def test_unknown_objective(self):
        with pytest.raises(DomainError):
            build_maneuver(TABLE["pi7"], TABLE["pi8"], "J9", PARAMS)

    def test_blend_needs_both_anchors(self):
        m = build_maneuver(TABLE["pi7"], TABLE["pi8"], "J3", PARAMS)
        assert m.costs[2] == pytest.approx(0.5 * m.costs[0] + 0.5 * m.costs[1])
