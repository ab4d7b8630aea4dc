"""Trim primitives: steady motions with identically zero input.

A trim holds speed and steering constant, so the vehicle either drives
straight or follows a circular arc. Both cases have closed-form flows,
which makes trims exact graph vertices: one time step of a trim is a fixed
rigid-body displacement.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DomainError
from .vehicle import GroupElement, State, VehicleParams, sideslip_beta

STEP_DURATION = 0.2  # [s] global primitive step; trims run in whole steps

STANDSTILL_ID = "pi1"

# (id, v [m/s], delta [rad]) for the twelve-entry evaluation table: standstill,
# then a fan from hard left-steer at low speed through straight at top speed
# and back down on the right-steer side.
_STANDARD_ROWS = (
    ("pi1", 0.0, 0.0),
    ("pi2", 0.4, -0.60),
    ("pi3", 0.5, -0.48),
    ("pi4", 0.6, -0.36),
    ("pi5", 0.7, -0.24),
    ("pi6", 0.8, -0.12),
    ("pi7", 0.8, 0.0),
    ("pi8", 0.8, 0.12),
    ("pi9", 0.7, 0.24),
    ("pi10", 0.6, 0.36),
    ("pi11", 0.5, 0.48),
    ("pi12", 0.4, 0.60),
)


@dataclass(frozen=True)
class Trim:
    id: str
    v: float  # trim velocity [m/s]
    delta: float  # trim steering [rad]
    step_duration: float = STEP_DURATION

    def start_state(self) -> State:
        """The trim's state in its own frame: origin pose at (v, delta)."""
        return State(0.0, 0.0, 0.0, self.v, self.delta)

    def validate(self, params: VehicleParams) -> None:
        if not params.v_min <= self.v <= params.v_max:
            raise DomainError(
                f"trim {self.id}: v={self.v} outside [{params.v_min}, {params.v_max}]"
            )
        if abs(self.delta) > params.delta_max:
            raise DomainError(
                f"trim {self.id}: |delta|={abs(self.delta)} exceeds {params.delta_max}"
            )


def standard_trim_table(step_duration: float = STEP_DURATION) -> list[Trim]:
    """The twelve-trim table used in the evaluation."""
    return [Trim(i, v, d, step_duration) for i, v, d in _STANDARD_ROWS]


def yaw_rate(trim: Trim, params: VehicleParams) -> float:
    """Constant heading rate of the trim's arc (zero for straight motion)."""
    beta = sideslip_beta(trim.delta, params)
    return trim.v / params.L * math.tan(trim.delta) * math.cos(beta)


def trim_flow(trim: Trim, t: float, params: VehicleParams) -> State:
    """Closed-form state of the trim at time t, starting from the frame origin.

    Straight trims translate along the sideslip-corrected heading; steering
    trims follow a circular arc with constant yaw rate.
    """
    if t < 0:
        raise DomainError(f"time must be nonnegative, got {t}")
    beta = sideslip_beta(trim.delta, params)
    omega = yaw_rate(trim, params)
    if trim.v == 0.0:
        return State(0.0, 0.0, 0.0, trim.v, trim.delta)
    if omega == 0.0:
        return State(
            trim.v * math.cos(beta) * t,
            trim.v * math.sin(beta) * t,
            0.0,
            trim.v,
            trim.delta,
        )
    r = trim.v / omega
    return State(
        r * (math.sin(omega * t + beta) - math.sin(beta)),
        r * (math.cos(beta) - math.cos(omega * t + beta)),
        omega * t,
        trim.v,
        trim.delta,
    )


def trim_displacement(trim: Trim, params: VehicleParams) -> GroupElement:
    """Rigid displacement of one whole step of the trim; the automaton self-loop."""
    end = trim_flow(trim, trim.step_duration, params)
    return GroupElement(end.s_x, end.s_y, end.psi)


def unit_cost(trim: Trim, running_cost, duration: float) -> float:
    """Total cost of holding the trim for `duration`.

    Because the running cost is invariant under the symmetry shift and the
    trim's input is identically zero, the integral collapses to duration
    times a single evaluation at the trim's frame-origin start state.
    """
    from .vehicle import ZERO_INPUT

    return duration * running_cost.evaluate(trim.start_state(), ZERO_INPUT)
