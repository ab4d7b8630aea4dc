"""Maneuvers: optimized connections between trims, and their Pareto fronts.

A maneuver steers the vehicle from one trim's (v, delta) operating point to
another's over a fixed duration. Costs are evaluated in the maneuver-local
frame (the trajectory starts at the origin), which keeps the distance-based
objective well defined under the symmetry shift: maneuvers are optimized
once and placed anywhere via the group action.

Objectives:
  J1  rewards covered distance (negative integral of squared position norm),
  J2  penalizes control effort (integral of squared input norm),
  J3  is the even blend of the two.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import DomainError, InfeasibleManeuverError
from .trims import Trim
from .vehicle import GroupElement, Input, State, VehicleParams

MANEUVER_DURATION = 0.2  # [s] fixed; equals the primitive step duration
DEFAULT_INTERVALS = 20  # zero-order-hold control intervals per maneuver

OBJECTIVE_IDS = ("J1", "J2", "J3")


@dataclass(frozen=True)
class RunningCost:
    id: str
    evaluate: Callable[[State, Input], float]


def _ell1(x: State, u: Input) -> float:
    return -(x.s_x * x.s_x + x.s_y * x.s_y)


def _ell2(x: State, u: Input) -> float:
    return u.u_vdot * u.u_vdot + u.u_deltadot * u.u_deltadot


def _ell3(x: State, u: Input) -> float:
    return 0.5 * _ell1(x, u) + 0.5 * _ell2(x, u)


RUNNING_COSTS = {
    "J1": RunningCost("J1", _ell1),
    "J2": RunningCost("J2", _ell2),
    "J3": RunningCost("J3", _ell3),
}


def running_cost(objective_id: str) -> RunningCost:
    try:
        return RUNNING_COSTS[objective_id]
    except KeyError:
        raise DomainError(f"unknown objective id {objective_id!r}") from None


@dataclass(frozen=True)
class ManeuverProblem:
    """Fixed-duration two-point problem between trim operating points."""

    from_trim: Trim
    to_trim: Trim
    params: VehicleParams
    T: float = MANEUVER_DURATION
    N: int = DEFAULT_INTERVALS

    def __post_init__(self):
        if not self.T > 0:
            raise DomainError("maneuver duration must be positive")
        if self.N < 2:
            raise DomainError("need at least two control intervals")
        self.from_trim.validate(self.params)
        self.to_trim.validate(self.params)

    @property
    def dt(self) -> float:
        return self.T / self.N

    def start_state(self) -> State:
        return State(0.0, 0.0, 0.0, self.from_trim.v, self.from_trim.delta)

    def check_feasible(self) -> None:
        """Reject boundary pairs that no bounded input can connect in time T."""
        p = self.params
        dv = abs(self.to_trim.v - self.from_trim.v)
        if dv / self.T > p.a_max * (1 + 1e-12):
            raise InfeasibleManeuverError(
                f"{self.from_trim.id}->{self.to_trim.id}: needs |u_vdot| >= "
                f"{dv / self.T:.3f} m/s^2, exceeding a_max={p.a_max}"
            )
        dd = abs(self.to_trim.delta - self.from_trim.delta)
        if dd / self.T > p.ddelta_max * (1 + 1e-12):
            raise InfeasibleManeuverError(
                f"{self.from_trim.id}->{self.to_trim.id}: needs |u_deltadot| >= "
                f"{dd / self.T:.3f} rad/s, exceeding ddelta_max={p.ddelta_max}"
            )


@dataclass
class Maneuver:
    """A solved connection: sampled trajectory, end displacement, and costs."""

    from_trim: str
    to_trim: str
    objective: str
    T: float
    controls: np.ndarray  # (N, 2), zero-order hold
    states: np.ndarray  # (N+1, 5)
    displacement: GroupElement
    costs: tuple  # (J1, J2, J3)

    @property
    def N(self) -> int:
        return self.controls.shape[0]

    @property
    def dt(self) -> float:
        return self.T / self.N

    def state_at(self, k: int) -> State:
        return State(*self.states[k])

    def midpoint_position(self) -> tuple:
        """Local-frame position halfway through, used for collision sampling."""
        mid = self.states[self.N // 2]
        return (float(mid[0]), float(mid[1]))


@dataclass(frozen=True)
class ParetoPoint:
    weight: float
    maneuver: Maneuver
    objectives: tuple  # (J1, J2)


def quadrature(cost: RunningCost, states: np.ndarray, controls: np.ndarray,
               dt: float) -> float:
    """Trapezoidal quadrature of a running cost along a maneuver grid.

    The input is zero-order hold, so each interval is averaged between its
    two state endpoints under that interval's input.
    """
    total = 0.0
    n = controls.shape[0]
    for k in range(n):
        u = Input(controls[k, 0], controls[k, 1])
        a = cost.evaluate(State(*states[k]), u)
        b = cost.evaluate(State(*states[k + 1]), u)
        total += 0.5 * dt * (a + b)
    return total


def evaluate_objectives(m: Maneuver) -> tuple:
    """(J1, J2, J3) of a maneuver, consistent with the solver's quadrature."""
    j1 = quadrature(RUNNING_COSTS["J1"], m.states, m.controls, m.dt)
    j2 = quadrature(RUNNING_COSTS["J2"], m.states, m.controls, m.dt)
    return (j1, j2, 0.5 * j1 + 0.5 * j2)


def nondominated_filter(points: Sequence[tuple]) -> list:
    """Keep the points not dominated by any other; stable sort by first coordinate.

    A point is dominated when another is at most equal in both coordinates
    and strictly better in one. Coordinate-wise duplicates (within 1e-12)
    collapse to the earliest occurrence in the input order.
    """
    kept = []
    for i, p in enumerate(points):
        dominated = False
        duplicate = False
        for j, q in enumerate(points):
            if j == i:
                continue
            if abs(q[0] - p[0]) <= 1e-12 and abs(q[1] - p[1]) <= 1e-12:
                if j < i:
                    duplicate = True
                    break
                continue
            if q[0] <= p[0] and q[1] <= p[1] and (q[0] < p[0] or q[1] < p[1]):
                dominated = True
                break
        if not dominated and not duplicate:
            kept.append(p)
    kept.sort(key=lambda p: p[0])
    return kept


def solve_scalarized(prob: ManeuverProblem, w: float,
                     normalizers: tuple | None = None) -> Maneuver:
    """Minimize the weighted sum of min-max normalized J1 and J2.

    The endpoints w=1 and w=0 reduce to the raw single-objective problems
    and need no normalizers; interior weights compute (or accept) the
    normalization ranges from those two anchor solutions.
    """
    from . import solver

    if not 0.0 <= w <= 1.0:
        raise DomainError(f"weight must be in [0, 1], got {w}")
    prob.check_feasible()
    if w == 1.0:
        return solver.solve_weighted(prob, 1.0, 0.0, label="w=1.00")
    if w == 0.0:
        return solver.solve_weighted(prob, 0.0, 1.0, label="w=0.00")
    if normalizers is None:
        normalizers = compute_normalizers(prob)
    (lo1, hi1), (lo2, hi2) = normalizers
    # A collapsed range means the anchors agree on that objective: it carries
    # no trade-off information, so it drops out instead of being divided by.
    a = w / (hi1 - lo1) if hi1 - lo1 > 1e-12 else 0.0
    b = (1.0 - w) / (hi2 - lo2) if hi2 - lo2 > 1e-12 else 0.0
    if a == 0.0 and b == 0.0:
        b = 1.0  # fully degenerate pair; minimum effort is the canonical pick
    return solver.solve_weighted(prob, a, b, label=f"w={w:.2f}")


def compute_normalizers(prob: ManeuverProblem) -> tuple:
    """Min-max ranges of (J1, J2) from the two single-objective anchors."""
    m1 = solve_scalarized(prob, 1.0)
    m2 = solve_scalarized(prob, 0.0)
    j1_vals = (m1.costs[0], m2.costs[0])
    j2_vals = (m1.costs[1], m2.costs[1])
    return ((min(j1_vals), max(j1_vals)), (min(j2_vals), max(j2_vals)))


def sweep_pareto(prob: ManeuverProblem, weights: Sequence[float]) -> list:
    """Solve one scalarization per weight and keep the nondominated results."""
    if len(weights) == 0:
        raise DomainError("weights must be nonempty")
    normalizers = None
    if any(0.0 < w < 1.0 for w in weights):
        normalizers = compute_normalizers(prob)
    candidates = []
    failures = []
    for w in weights:
        try:
            m = solve_scalarized(prob, w, normalizers=normalizers)
        except (InfeasibleManeuverError, RuntimeError) as exc:
            failures.append((w, exc))
            continue
        candidates.append((w, m, m.costs[0], m.costs[1]))
    if not candidates:
        raise InfeasibleManeuverError(
            f"all {len(weights)} scalarizations failed; first: {failures[0][1]}"
        )
    front = nondominated_filter([(c[2], c[3]) for c in candidates])
    points = []
    seen = set()
    for j1, j2 in front:
        for w, m, c1, c2 in candidates:
            if (c1, c2) == (j1, j2) and id(m) not in seen:
                seen.add(id(m))
                points.append(ParetoPoint(w, m, (j1, j2)))
                break
    points.sort(key=lambda p: p.objectives[0])
    return points


def build_maneuver(from_trim: Trim, to_trim: Trim, objective: str,
                   params: VehicleParams, N: int = DEFAULT_INTERVALS) -> Maneuver:
    """Solve the single-objective problem named by `objective` and label it."""
    if objective not in OBJECTIVE_IDS:
        raise DomainError(f"unknown objective id {objective!r}")
    prob = ManeuverProblem(from_trim, to_trim, params, N=N)
    if objective == "J1":
        m = solve_scalarized(prob, 1.0)
    elif objective == "J2":
        m = solve_scalarized(prob, 0.0)
    else:
        m = solve_scalarized(prob, 0.5)
    m.objective = objective
    return m
