"""Kinematic single-track vehicle model and its planar symmetry group.

The model has five states (rear-frame position, heading, speed, steering
angle) and two inputs (acceleration, steering rate).  All motions are
equivariant under planar rotation plus translation, which is what makes
motion primitives reusable anywhere on the map: the group action moves a
trajectory without re-integrating it.

Everything here is a pure function over immutable values; headings are kept
unnormalized so the group action stays exact under composition.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

from .errors import DomainError


class State(NamedTuple):
    s_x: float  # position x [m]
    s_y: float  # position y [m]
    psi: float  # heading [rad], unnormalized
    v: float  # longitudinal velocity [m/s]
    delta: float  # steering angle [rad]


class Input(NamedTuple):
    u_vdot: float  # longitudinal acceleration [m/s^2]
    u_deltadot: float  # steering angle rate [rad/s]


ZERO_INPUT = Input(0.0, 0.0)


class GroupElement(NamedTuple):
    """A planar translation plus rotation acting on vehicle states."""

    dx: float
    dy: float
    dpsi: float


IDENTITY = GroupElement(0.0, 0.0, 0.0)


@dataclass(frozen=True)
class VehicleParams:
    """Geometry and actuation bounds of the model-scale vehicle.

    The defaults are configuration values chosen for a 1:18-scale car; they
    are not taken from any published parameter sheet.
    """

    L: float = 0.15  # wheelbase [m]
    l_r: float = 0.075  # rear axle to reference point [m]
    v_min: float = 0.0  # [m/s]
    v_max: float = 0.8  # [m/s]
    delta_max: float = 0.62  # [rad]
    a_max: float = 8.0  # |u_vdot| bound [m/s^2]
    ddelta_max: float = 10.0  # |u_deltadot| bound [rad/s]
    footprint_radius: float = 0.06  # collision disc radius [m]

    def __post_init__(self):
        if not self.L > 0:
            raise DomainError(f"wheelbase must be positive, got {self.L}")
        if not 0 <= self.l_r <= self.L:
            raise DomainError(f"l_r must lie in [0, L], got {self.l_r}")
        if self.v_min > self.v_max:
            raise DomainError("v_min must not exceed v_max")
        for name in ("delta_max", "a_max", "ddelta_max", "footprint_radius"):
            if not getattr(self, name) > 0:
                raise DomainError(f"{name} must be positive")


def normalize_angle(angle: float) -> float:
    """Map an angle to (-pi, pi] for comparisons; storage stays unnormalized."""
    a = math.fmod(angle, 2.0 * math.pi)
    if a <= -math.pi:
        a += 2.0 * math.pi
    elif a > math.pi:
        a -= 2.0 * math.pi
    return a


def sideslip_beta(delta: float, params: VehicleParams) -> float:
    """Kinematic sideslip angle for a given steering angle.

    Odd in delta; requires |delta| < pi/2 where tan is defined.
    """
    if not math.isfinite(delta):
        raise DomainError(f"steering angle must be finite, got {delta}")
    if abs(delta) >= math.pi / 2:
        raise DomainError(f"|delta| must be below pi/2, got {delta}")
    return math.atan(params.l_r / params.L * math.tan(delta))


def eval_dynamics(x: State, u: Input, params: VehicleParams) -> tuple:
    """Right-hand side of the single-track ODE at (x, u).

    Returns the five state derivatives. Rows four and five are exactly the
    input components.
    """
    for value in (*x, *u):
        if not math.isfinite(value):
            raise DomainError("state and input components must be finite")
    beta = sideslip_beta(x.delta, params)
    heading = x.psi + beta
    return (
        x.v * math.cos(heading),
        x.v * math.sin(heading),
        x.v / params.L * math.tan(x.delta) * math.cos(beta),
        u.u_vdot,
        u.u_deltadot,
    )


def _rhs(sx, sy, psi, v, delta, u0, u1, L, c):
    # unchecked hot-path version of eval_dynamics; c = l_r / L
    td = math.tan(delta)
    beta = math.atan(c * td)
    heading = psi + beta
    return (
        v * math.cos(heading),
        v * math.sin(heading),
        v / L * td * math.cos(beta),
        u0,
        u1,
    )


def integrate_step(x: State, u: Input, dt: float, params: VehicleParams) -> State:
    """One classical fourth-order Runge-Kutta step under zero-order-hold input."""
    if not dt > 0:
        raise DomainError(f"dt must be positive, got {dt}")
    for value in (*x, *u):
        if not math.isfinite(value):
            raise DomainError("state and input components must be finite")
    L, c = params.L, params.l_r / params.L
    u0, u1 = u
    a1, b1, c1, d1, e1 = _rhs(*x, u0, u1, L, c)
    h2 = 0.5 * dt
    a2, b2, c2, d2, e2 = _rhs(
        x[0] + h2 * a1, x[1] + h2 * b1, x[2] + h2 * c1,
        x[3] + h2 * d1, x[4] + h2 * e1, u0, u1, L, c,
    )
    a3, b3, c3, d3, e3 = _rhs(
        x[0] + h2 * a2, x[1] + h2 * b2, x[2] + h2 * c2,
        x[3] + h2 * d2, x[4] + h2 * e2, u0, u1, L, c,
    )
    a4, b4, c4, d4, e4 = _rhs(
        x[0] + dt * a3, x[1] + dt * b3, x[2] + dt * c3,
        x[3] + dt * d3, x[4] + dt * e3, u0, u1, L, c,
    )
    w = dt / 6.0
    return State(
        x[0] + w * (a1 + 2 * a2 + 2 * a3 + a4),
        x[1] + w * (b1 + 2 * b2 + 2 * b3 + b4),
        x[2] + w * (c1 + 2 * c2 + 2 * c3 + c4),
        x[3] + w * (d1 + 2 * d2 + 2 * d3 + d4),
        x[4] + w * (e1 + 2 * e2 + 2 * e3 + e4),
    )


def integrate(x: State, u: Input, duration: float, params: VehicleParams,
              substeps: int = 10) -> State:
    """Integrate a zero-order-hold input over a duration with fixed RK4 substeps."""
    if not duration > 0:
        raise DomainError(f"duration must be positive, got {duration}")
    if substeps < 1:
        raise DomainError("substeps must be at least 1")
    h = duration / substeps
    for _ in range(substeps):
        x = integrate_step(x, u, h, params)
    return x


def apply_group(g: GroupElement, x: State) -> State:
    """Rotate the position by dpsi, translate by (dx, dy), shift the heading.

    Velocity and steering are untouched; they are invariant under the action.
    """
    cos_a = math.cos(g.dpsi)
    sin_a = math.sin(g.dpsi)
    return State(
        cos_a * x.s_x - sin_a * x.s_y + g.dx,
        sin_a * x.s_x + cos_a * x.s_y + g.dy,
        x.psi + g.dpsi,
        x.v,
        x.delta,
    )


def compose_group(g1: GroupElement, g2: GroupElement) -> GroupElement:
    """Group composition: applying the result equals applying g2 then g1."""
    cos_a = math.cos(g1.dpsi)
    sin_a = math.sin(g1.dpsi)
    return GroupElement(
        g1.dx + cos_a * g2.dx - sin_a * g2.dy,
        g1.dy + sin_a * g2.dx + cos_a * g2.dy,
        g1.dpsi + g2.dpsi,
    )


def invert_group(g: GroupElement) -> GroupElement:
    cos_a = math.cos(g.dpsi)
    sin_a = math.sin(g.dpsi)
    return GroupElement(
        -(cos_a * g.dx + sin_a * g.dy),
        -(-sin_a * g.dx + cos_a * g.dy),
        -g.dpsi,
    )
