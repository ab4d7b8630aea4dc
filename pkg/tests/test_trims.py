import math

import pytest

from mpa.errors import DomainError
from mpa.maneuvers import RunningCost, running_cost
from mpa.trims import (
    Trim,
    standard_trim_table,
    trim_displacement,
    trim_flow,
    unit_cost,
    yaw_rate,
)
from mpa.vehicle import Input, State, VehicleParams, integrate

PARAMS = VehicleParams()


class TestStandardTable:
    def test_shape_and_ids(self):
        table = standard_trim_table()
        assert len(table) == 12
        assert [t.id for t in table] == [f"pi{i}" for i in range(1, 13)]

    def test_velocity_fan(self):
        vs = [t.v for t in standard_trim_table()]
        assert vs == [0, 0.4, 0.5, 0.6, 0.7, 0.8, 0.8, 0.8, 0.7, 0.6, 0.5, 0.4]

    def test_steering_fan(self):
        ds = [t.delta for t in standard_trim_table()]
        assert ds == [0, -0.60, -0.48, -0.36, -0.24, -0.12, 0, 0.12, 0.24, 0.36, 0.48, 0.60]

    def test_named_rows(self):
        table = {t.id: t for t in standard_trim_table()}
        assert (table["pi1"].v, table["pi1"].delta) == (0.0, 0.0)
        assert (table["pi7"].v, table["pi7"].delta) == (0.8, 0.0)
        assert (table["pi12"].v, table["pi12"].delta) == (0.4, 0.60)

    def test_all_within_default_bounds(self):
        for t in standard_trim_table():
            t.validate(PARAMS)


class TestTrimFlow:
    def test_standstill(self):
        tr = Trim("pi1", 0.0, 0.0)
        assert trim_flow(tr, 1.7, PARAMS) == (0, 0, 0, 0, 0)

    def test_straight(self):
        tr = Trim("pi7", 0.8, 0.0)
        assert trim_flow(tr, 0.2, PARAMS) == pytest.approx((0.16, 0, 0, 0.8, 0), abs=1e-15)

    def test_arc_yaw_rate_and_heading(self):
        tr = Trim("pi12", 0.4, 0.60)
        assert yaw_rate(tr, PARAMS) == pytest.approx(1.7261677751171105, abs=1e-12)
        end = trim_flow(tr, 0.2, PARAMS)
        assert end.psi == pytest.approx(0.3452335550234221, abs=1e-12)

    def test_negative_time_rejected(self):
        with pytest.raises(DomainError):
            trim_flow(Trim("pi7", 0.8, 0.0), -0.1, PARAMS)

    @pytest.mark.parametrize("trim", standard_trim_table(), ids=lambda t: t.id)
    def test_closed_form_matches_integrator(self, trim):
        closed = trim_flow(trim, 0.2, PARAMS)
        x = State(0, 0, 0, trim.v, trim.delta)
        numeric = integrate(x, Input(0, 0), 0.2, PARAMS, substeps=10)
        assert max(abs(a - b) for a, b in zip(closed, numeric)) < 1e-6


class TestDisplacement:
    def test_standstill(self):
        g = trim_displacement(Trim("pi1", 0.0, 0.0), PARAMS)
        assert g == (0, 0, 0)

    def test_straight(self):
        g = trim_displacement(Trim("pi7", 0.8, 0.0), PARAMS)
        assert g == pytest.approx((0.16, 0, 0), abs=1e-15)

    def test_mirrored_pairs(self):
        table = {t.id: t for t in standard_trim_table()}
        for left, right in [("pi2", "pi12"), ("pi3", "pi11"), ("pi4", "pi10"),
                            ("pi5", "pi9"), ("pi6", "pi8")]:
            gl = trim_displacement(table[left], PARAMS)
            gr = trim_displacement(table[right], PARAMS)
            assert gl.dx == pytest.approx(gr.dx, abs=1e-9)
            assert gl.dy == pytest.approx(-gr.dy, abs=1e-9)
            assert gl.dpsi == pytest.approx(-gr.dpsi, abs=1e-9)


class TestUnitCost:
    def test_effort_cost_is_zero_on_trims(self):
        ell2 = running_cost("J2")
        for t in standard_trim_table():
            assert unit_cost(t, ell2, 0.2) == 0.0

    def test_speed_squared_cost(self):
        speed_sq = RunningCost("v2", lambda x, u: x.v ** 2)
        assert unit_cost(Trim("pi7", 0.8, 0.0), speed_sq, 0.2) == pytest.approx(0.128)

    def test_distance_cost_zero_at_frame_origin(self):
        ell1 = running_cost("J1")
        for t in standard_trim_table():
            assert unit_cost(t, ell1, 0.2) == 0.0

    def test_linear_in_duration(self):
        speed_sq = RunningCost("v2", lambda x, u: x.v ** 2)
        tr = Trim("pi5", 0.7, -0.24)
        c1 = unit_cost(tr, speed_sq, 0.1)
        c5 = unit_cost(tr, speed_sq, 0.5)
        assert c5 == pytest.approx(5 * c1)
