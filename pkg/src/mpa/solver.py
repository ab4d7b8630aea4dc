"""Direct single-shooting solver for the fixed-duration maneuver problem.

Decision variables are the N zero-order-hold inputs. Input bounds are
handled by the bound-constrained quasi-Newton inner solver; the terminal
(v, delta) equalities and the per-node state box constraints enter through
an augmented Lagrangian whose multipliers are updated in an outer loop.
Gradients are exact discrete adjoints of the RK4 recursion.

Because speed and steering integrate linearly in the inputs, a final repair
pass projects the solution onto the exactly-feasible set channel by channel,
so returned maneuvers satisfy bounds to round-off rather than solver
tolerance.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.optimize import minimize

from .errors import ConvergenceError
from .maneuvers import Maneuver, ManeuverProblem, evaluate_objectives
from .vehicle import GroupElement, Input, State, integrate_step

# Outer augmented-Lagrangian loop
MAX_OUTER = 40
RHO_INIT = 10.0
RHO_GROWTH = 10.0
RHO_MAX = 1e8
VIOLATION_TARGET = 1e-10  # outer stop; repair still polishes to round-off
VIOLATION_ACCEPT = 1e-6  # worst violation the repair pass may clean up

# Inner bound-constrained quasi-Newton solve
INNER_ITERATION_CAP = 500
INNER_PGTOL = 1e-11


def rollout(x0: State, controls: np.ndarray, dt: float, params) -> np.ndarray:
    """Integrate the ZOH control sequence; one RK4 step per interval."""
    n = controls.shape[0]
    states = np.empty((n + 1, 5))
    states[0] = x0
    x = x0
    for k in range(n):
        x = integrate_step(x, Input(controls[k, 0], controls[k, 1]), dt, params)
        states[k + 1] = x
    return states


def _rhs_batch(x: np.ndarray, u: np.ndarray, L: float, c: float) -> np.ndarray:
    """Vectorized dynamics over rows of states x (n,5) and inputs u (n,2)."""
    td = np.tan(x[:, 4])
    beta = np.arctan(c * td)
    heading = x[:, 2] + beta
    out = np.empty_like(x)
    out[:, 0] = x[:, 3] * np.cos(heading)
    out[:, 1] = x[:, 3] * np.sin(heading)
    out[:, 2] = x[:, 3] / L * td * np.cos(beta)
    out[:, 3] = u[:, 0]
    out[:, 4] = u[:, 1]
    return out


def _jac_batch(x: np.ndarray, L: float, c: float) -> np.ndarray:
    """Vectorized state Jacobian of the dynamics, shape (n, 5, 5)."""
    n = x.shape[0]
    td = np.tan(x[:, 4])
    sec2 = 1.0 + td * td
    beta = np.arctan(c * td)
    cb = np.cos(beta)
    sb = np.sin(beta)
    dbeta = c * sec2 / (1.0 + (c * td) ** 2)
    heading = x[:, 2] + beta
    ch = np.cos(heading)
    sh = np.sin(heading)
    v = x[:, 3]
    J = np.zeros((n, 5, 5))
    J[:, 0, 2] = -v * sh
    J[:, 0, 3] = ch
    J[:, 0, 4] = -v * sh * dbeta
    J[:, 1, 2] = v * ch
    J[:, 1, 3] = sh
    J[:, 1, 4] = v * ch * dbeta
    J[:, 2, 3] = td * cb / L
    J[:, 2, 4] = v / L * (sec2 * cb - td * sb * dbeta)
    return J


def step_jacobians(states: np.ndarray, controls: np.ndarray, dt: float,
                   params) -> tuple:
    """Per-interval RK4 transition Jacobians A (N,5,5) and B (N,5,2).

    The stage states are recomputed in batch from the stored grid, which is
    cheap and keeps the forward rollout scalar and simple.
    """
    L, c = params.L, params.l_r / params.L
    x0 = states[:-1]
    h2 = 0.5 * dt
    k1 = _rhs_batch(x0, controls, L, c)
    x2 = x0 + h2 * k1
    k2 = _rhs_batch(x2, controls, L, c)
    x3 = x0 + h2 * k2
    k3 = _rhs_batch(x3, controls, L, c)
    x4 = x0 + dt * k3

    J1 = _jac_batch(x0, L, c)
    J2 = _jac_batch(x2, L, c)
    J3 = _jac_batch(x3, L, c)
    J4 = _jac_batch(x4, L, c)

    n = controls.shape[0]
    eye = np.broadcast_to(np.eye(5), (n, 5, 5))
    dk1x = J1
    dk2x = J2 @ (eye + h2 * dk1x)
    dk3x = J3 @ (eye + h2 * dk2x)
    dk4x = J4 @ (eye + dt * dk3x)
    A = eye + dt / 6.0 * (dk1x + 2 * dk2x + 2 * dk3x + dk4x)

    Ju = np.zeros((n, 5, 2))
    Ju[:, 3, 0] = 1.0
    Ju[:, 4, 1] = 1.0
    dk1u = Ju
    dk2u = J2 @ (h2 * dk1u) + Ju
    dk3u = J3 @ (h2 * dk2u) + Ju
    dk4u = J4 @ (dt * dk3u) + Ju
    B = dt / 6.0 * (dk1u + 2 * dk2u + 2 * dk3u + dk4u)
    return A, B


def objective_terms(states: np.ndarray, controls: np.ndarray, dt: float) -> tuple:
    """Raw (J1, J2) under the solver's trapezoidal quadrature."""
    q = states[:, 0] ** 2 + states[:, 1] ** 2
    j1 = -float(np.sum(0.5 * dt * (q[:-1] + q[1:])))
    j2 = float(dt * np.sum(controls[:, 0] ** 2 + controls[:, 1] ** 2))
    return j1, j2


class _ALProblem:
    """Augmented Lagrangian value/gradient for one scalarized solve."""

    def __init__(self, prob: ManeuverProblem, a: float, b: float):
        self.prob = prob
        self.a = a  # multiplier on raw J1
        self.b = b  # multiplier on raw J2
        p = prob.params
        self.dt = prob.dt
        self.N = prob.N
        self.x0 = prob.start_state()
        self.v_target = prob.to_trim.v
        self.d_target = prob.to_trim.delta
        self.v_lo, self.v_hi = p.v_min, p.v_max
        self.d_hi = p.delta_max
        # AL state
        self.lam = np.zeros(2)  # terminal equality multipliers
        self.mu = np.zeros((self.N, 4))  # node box multipliers: v_hi, v_lo, d_hi, d_lo
        self.rho = RHO_INIT

    def constraints(self, states: np.ndarray) -> tuple:
        """Equality residuals (2,) and inequality residuals (N,4), g <= 0 feasible."""
        ceq = np.array([
            states[-1, 3] - self.v_target,
            states[-1, 4] - self.d_target,
        ])
        v = states[1:, 3]
        d = states[1:, 4]
        g = np.stack([
            v - self.v_hi,
            self.v_lo - v,
            d - self.d_hi,
            -self.d_hi - d,
        ], axis=1)
        return ceq, g

    def violation(self, states: np.ndarray) -> float:
        ceq, g = self.constraints(states)
        return max(float(np.max(np.abs(ceq))), float(np.max(g)), 0.0)

    def value_and_grad(self, z: np.ndarray) -> tuple:
        N, dt = self.N, self.dt
        controls = z.reshape(N, 2)
        states = rollout(self.x0, controls, dt, self.prob.params)
        j1, j2 = objective_terms(states, controls, dt)
        ceq, g = self.constraints(states)

        rho = self.rho
        act = np.maximum(0.0, self.mu + rho * g)
        value = (
            self.a * j1 + self.b * j2
            + float(self.lam @ ceq) + 0.5 * rho * float(ceq @ ceq)
            + float(np.sum(act * act - self.mu * self.mu)) / (2.0 * rho)
        )

        # Adjoint sources: objective position term at every node, box terms at
        # nodes 1..N, terminal equality terms at node N.
        w_node = np.full(N + 1, dt)
        w_node[0] = w_node[-1] = 0.5 * dt
        src = np.zeros((N + 1, 5))
        src[:, 0] = -2.0 * self.a * w_node * states[:, 0]
        src[:, 1] = -2.0 * self.a * w_node * states[:, 1]
        src[1:, 3] += act[:, 0] - act[:, 1]
        src[1:, 4] += act[:, 2] - act[:, 3]
        src[N, 3] += self.lam[0] + rho * ceq[0]
        src[N, 4] += self.lam[1] + rho * ceq[1]

        A, B = step_jacobians(states, controls, dt, self.prob.params)
        grad = np.empty((N, 2))
        p = src[N].copy()
        for k in range(N - 1, -1, -1):
            grad[k] = B[k].T @ p
            p = A[k].T @ p + src[k]
        grad[:, 0] += 2.0 * self.b * dt * controls[:, 0]
        grad[:, 1] += 2.0 * self.b * dt * controls[:, 1]
        return value, grad.ravel()


def _repair_channel(path: np.ndarray, lo: float, hi: float, rate_dt: float,
                    start: float, end: float) -> np.ndarray:
    """Project a node path onto {box, slope-limited, fixed endpoints}, exactly.

    Interval propagation from both fixed endpoints gives the feasible band
    per node; a greedy forward pass then clips the input path into it. The
    result is feasible to round-off and stays within the propagation band of
    the input.
    """
    n = len(path) - 1
    f_lo = np.empty(n + 1)
    f_hi = np.empty(n + 1)
    f_lo[0] = f_hi[0] = start
    for k in range(1, n + 1):
        f_lo[k] = max(lo, f_lo[k - 1] - rate_dt)
        f_hi[k] = min(hi, f_hi[k - 1] + rate_dt)
    b_lo = np.empty(n + 1)
    b_hi = np.empty(n + 1)
    b_lo[n] = b_hi[n] = end
    for k in range(n - 1, -1, -1):
        b_lo[k] = max(lo, b_lo[k + 1] - rate_dt)
        b_hi[k] = min(hi, b_hi[k + 1] + rate_dt)
    out = np.empty(n + 1)
    out[0] = start
    out[n] = end
    prev = start
    for k in range(1, n):
        lo_k = max(f_lo[k], b_lo[k], prev - rate_dt)
        hi_k = min(f_hi[k], b_hi[k], prev + rate_dt)
        if lo_k > hi_k:
            # Touching intervals can cross by round-off on exact-ramp problems.
            mid = 0.5 * (lo_k + hi_k)
            lo_k = hi_k = mid
        prev = min(max(path[k], lo_k), hi_k)
        out[k] = prev
    return out


def repair_feasibility(prob: ManeuverProblem, controls: np.ndarray) -> np.ndarray:
    """Make the speed and steering channels exactly feasible."""
    p = prob.params
    dt = prob.dt
    v_path = prob.from_trim.v + dt * np.concatenate(([0.0], np.cumsum(controls[:, 0])))
    d_path = prob.from_trim.delta + dt * np.concatenate(([0.0], np.cumsum(controls[:, 1])))
    v_rep = _repair_channel(v_path, p.v_min, p.v_max, p.a_max * dt,
                            prob.from_trim.v, prob.to_trim.v)
    d_rep = _repair_channel(d_path, -p.delta_max, p.delta_max, p.ddelta_max * dt,
                            prob.from_trim.delta, prob.to_trim.delta)
    out = np.empty_like(controls)
    out[:, 0] = np.diff(v_rep) / dt
    out[:, 1] = np.diff(d_rep) / dt
    return out


def solve_weighted(prob: ManeuverProblem, a: float, b: float,
                   label: str = "") -> Maneuver:
    """Minimize a*J1 + b*J2 subject to the maneuver constraints.

    Deterministic: the initial guess is the constant-rate connection and
    every inner solve is a bounded quasi-Newton run from the previous outer
    iterate.
    """
    p = prob.params
    N, dt, T = prob.N, prob.dt, prob.T
    al = _ALProblem(prob, a, b)

    u0 = np.empty((N, 2))
    u0[:, 0] = (prob.to_trim.v - prob.from_trim.v) / T
    u0[:, 1] = (prob.to_trim.delta - prob.from_trim.delta) / T
    u0[:, 0] = np.clip(u0[:, 0], -p.a_max, p.a_max)
    u0[:, 1] = np.clip(u0[:, 1], -p.ddelta_max, p.ddelta_max)
    z = u0.ravel()
    bounds = [(-p.a_max, p.a_max), (-p.ddelta_max, p.ddelta_max)] * N

    best_z = z.copy()
    best_viol = math.inf
    prev_viol = math.inf
    for _ in range(MAX_OUTER):
        res = minimize(
            al.value_and_grad, z, jac=True, method="L-BFGS-B", bounds=bounds,
            options={"maxiter": INNER_ITERATION_CAP, "gtol": INNER_PGTOL,
                     "ftol": 1e-16, "maxls": 60},
        )
        z = res.x
        states = rollout(al.x0, z.reshape(N, 2), dt, p)
        ceq, g = al.constraints(states)
        viol = al.violation(states)
        if viol < best_viol:
            best_viol = viol
            best_z = z.copy()
        if viol <= VIOLATION_TARGET:
            break
        al.lam = al.lam + al.rho * ceq
        al.mu = np.maximum(0.0, al.mu + al.rho * g)
        if viol > 0.25 * prev_viol:
            al.rho = min(al.rho * RHO_GROWTH, RHO_MAX)
        prev_viol = viol
    else:
        if best_viol > VIOLATION_ACCEPT:
            raise ConvergenceError(
                f"maneuver {prob.from_trim.id}->{prob.to_trim.id} ({label}): "
                f"constraint violation {best_viol:.2e} after {MAX_OUTER} "
                "multiplier updates",
                best=best_z.reshape(N, 2),
            )
        z = best_z

    controls = repair_feasibility(prob, z.reshape(N, 2))
    states = rollout(al.x0, controls, dt, p)
    final_viol = al.violation(states)
    if final_viol > 1e-9:
        raise ConvergenceError(
            f"maneuver {prob.from_trim.id}->{prob.to_trim.id} ({label}): "
            f"residual violation {final_viol:.2e} after repair",
            best=controls,
        )
    m = Maneuver(
        from_trim=prob.from_trim.id,
        to_trim=prob.to_trim.id,
        objective=label or "custom",
        T=T,
        controls=controls,
        states=states,
        displacement=GroupElement(states[-1, 0], states[-1, 1], states[-1, 2]),
        costs=(0.0, 0.0, 0.0),
    )
    m.costs = evaluate_objectives(m)
    return m
