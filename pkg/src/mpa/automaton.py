"""The motion primitive automaton: trims as vertices, maneuvers as edges.

One universal automaton is built once, with every connected trim pair solved
for every objective. Planning then runs on a subgraph: a subset of trims and
the edges of a single objective. Presets A-D name the four evaluated
configurations.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    AutomatonFormatError,
    AutomatonIntegrityError,
    ConfigError,
    ConvergenceError,
    InfeasibleManeuverError,
)
from .maneuvers import (
    DEFAULT_INTERVALS,
    OBJECTIVE_IDS,
    Maneuver,
    ManeuverProblem,
    compute_normalizers,
    solve_scalarized,
)
from .trims import STANDSTILL_ID, Trim, standard_trim_table, trim_displacement
from .vehicle import GroupElement, Input, State, VehicleParams, integrate_step

log = logging.getLogger(__name__)

FILE_FORMAT = "mpa-automaton"
FILE_VERSION = 1

DYNAMICS_RESIDUAL_TOL = 1e-9
BOUNDARY_TOL = 1e-6


@dataclass
class MotionPrimitiveAutomaton:
    trims: list  # of Trim
    self_loops: dict  # trim id -> GroupElement
    maneuvers: dict  # (from, to, objective) -> Maneuver
    params: VehicleParams
    step_duration: float
    objectives: tuple

    def trim_by_id(self, trim_id: str) -> Trim:
        for t in self.trims:
            if t.id == trim_id:
                return t
        raise KeyError(trim_id)

    def trim_ids(self) -> list:
        return [t.id for t in self.trims]

    def edges_from(self, trim_id: str, objective: str | None = None) -> list:
        out = []
        for (src, _dst, obj), m in self.maneuvers.items():
            if src == trim_id and (objective is None or obj == objective):
                out.append(m)
        return out

    def equals(self, other: "MotionPrimitiveAutomaton") -> bool:
        """Exact equality of every numeric field; used by the round-trip tests."""
        if self.trims != other.trims or self.objectives != other.objectives:
            return False
        if self.params != other.params or self.step_duration != other.step_duration:
            return False
        if self.self_loops != other.self_loops:
            return False
        if set(self.maneuvers) != set(other.maneuvers):
            return False
        for key, m in self.maneuvers.items():
            o = other.maneuvers[key]
            if m.T != o.T or m.displacement != o.displacement or m.costs != o.costs:
                return False
            if not (np.array_equal(m.controls, o.controls)
                    and np.array_equal(m.states, o.states)):
                return False
        return True


def neighbor_connectivity(trim_ids: list) -> list:
    """Directed pairs linking each trim to the next one in table order."""
    pairs = []
    for a, b in zip(trim_ids[:-1], trim_ids[1:]):
        pairs.append((a, b))
        pairs.append((b, a))
    return pairs


def default_connectivity(trim_ids: list | None = None) -> list:
    """Connectivity used for the evaluation automaton.

    Moving trims link to their first and second neighbors in the table fan;
    standstill links to the three entry trims (slowest left, straight-fast,
    slowest right). Everything is bidirectional. The second-neighbor links
    keep the reduced preset D connected, which the planner's standstill
    fallback requires.
    """
    if trim_ids is None:
        trim_ids = [t.id for t in standard_trim_table()]
    n = len(trim_ids)
    undirected = set()
    for i in range(1, n - 1):
        undirected.add((trim_ids[i], trim_ids[i + 1]))
    for i in range(1, n - 2):
        undirected.add((trim_ids[i], trim_ids[i + 2]))
    if n > 1:
        undirected.add((trim_ids[0], trim_ids[1]))
    for j in (6, n - 1):
        if 0 < j < n:
            undirected.add((trim_ids[0], trim_ids[j]))
    pairs = []
    for a, b in sorted(undirected):
        pairs.append((a, b))
        pairs.append((b, a))
    return pairs


def _solve_pair(from_trim: Trim, to_trim: Trim, objectives, params, N) -> dict:
    """Solve every requested objective for one directed pair, sharing anchors."""
    prob = ManeuverProblem(from_trim, to_trim, params, N=N)
    out = {}
    normalizers = None
    if "J1" in objectives or "J3" in objectives:
        m = solve_scalarized(prob, 1.0)
        if "J1" in objectives:
            m.objective = "J1"
            out["J1"] = m
    if "J2" in objectives or "J3" in objectives:
        m = solve_scalarized(prob, 0.0)
        if "J2" in objectives:
            m.objective = "J2"
            out["J2"] = m
    if "J3" in objectives:
        j1 = out.get("J1") or solve_scalarized(prob, 1.0)
        j2 = out.get("J2") or solve_scalarized(prob, 0.0)
        normalizers = (
            (min(j1.costs[0], j2.costs[0]), max(j1.costs[0], j2.costs[0])),
            (min(j1.costs[1], j2.costs[1]), max(j1.costs[1], j2.costs[1])),
        )
        m = solve_scalarized(prob, 0.5, normalizers=normalizers)
        m.objective = "J3"
        out["J3"] = m
    return out


def build_universal_automaton(
    trims: list | None = None,
    objectives: tuple = OBJECTIVE_IDS,
    connectivity: list | None = None,
    params: VehicleParams | None = None,
    N: int = DEFAULT_INTERVALS,
    pair_solver=None,
) -> MotionPrimitiveAutomaton:
    """Compute optimal maneuvers for each connected pair and each objective.

    Infeasible pairs are dropped with a logged reason; solver non-convergence
    on any pair aborts the build with the full list of failures.
    """
    if trims is None:
        trims = standard_trim_table()
    if params is None:
        params = VehicleParams()
    for obj in objectives:
        if obj not in OBJECTIVE_IDS:
            raise ConfigError(f"unknown objective {obj!r}")
    ids = [t.id for t in trims]
    if len(set(ids)) != len(ids):
        raise ConfigError("trim ids must be unique")
    if connectivity is None:
        connectivity = default_connectivity(ids)
    by_id = {t.id: t for t in trims}
    for a, b in connectivity:
        if a not in by_id or b not in by_id:
            raise ConfigError(f"connectivity pair ({a}, {b}) names an unknown trim")
    solve = pair_solver or _solve_pair

    self_loops = {t.id: trim_displacement(t, params) for t in trims}
    maneuvers = {}
    failures = []
    for a, b in connectivity:
        if a == b:
            continue
        try:
            solved = solve(by_id[a], by_id[b], objectives, params, N)
        except InfeasibleManeuverError as exc:
            log.warning("omitting infeasible pair (%s, %s): %s", a, b, exc)
            continue
        except ConvergenceError as exc:
            failures.append(((a, b), str(exc)))
            continue
        for obj, m in solved.items():
            maneuvers[(a, b, obj)] = m
    if failures:
        listing = "; ".join(f"{pair}: {msg}" for pair, msg in failures)
        raise RuntimeError(f"maneuver optimization failed for pairs: {listing}")
    step = trims[0].step_duration if trims else 0.2
    return MotionPrimitiveAutomaton(
        trims=list(trims),
        self_loops=self_loops,
        maneuvers=maneuvers,
        params=params,
        step_duration=step,
        objectives=tuple(objectives),
    )


@dataclass(frozen=True)
class SubgraphConfig:
    enabled_trims: frozenset
    objective: str

    def __post_init__(self):
        if isinstance(self.objective, (list, tuple, set)) or "," in self.objective:
            raise ConfigError("a subgraph carries exactly one objective")
        if self.objective not in OBJECTIVE_IDS:
            raise ConfigError(f"unknown objective {self.objective!r}")
        object.__setattr__(self, "enabled_trims", frozenset(self.enabled_trims))
        if not self.enabled_trims:
            raise ConfigError("enabled trim set must be nonempty")
        if STANDSTILL_ID not in self.enabled_trims:
            raise ConfigError("the standstill trim must stay enabled")


PRESET_D_TRIMS = ("pi1", "pi2", "pi4", "pi6", "pi7", "pi8", "pi10", "pi12")


def preset_config(name: str, automaton: MotionPrimitiveAutomaton) -> SubgraphConfig:
    """The four evaluation presets: all trims with J1/J2/J3, or the 8-trim cut."""
    all_ids = frozenset(automaton.trim_ids())
    presets = {
        "A": SubgraphConfig(all_ids, "J1"),
        "B": SubgraphConfig(all_ids, "J2"),
        "C": SubgraphConfig(all_ids, "J3"),
        "D": SubgraphConfig(frozenset(PRESET_D_TRIMS) & all_ids, "J3"),
    }
    try:
        return presets[name]
    except KeyError:
        raise ConfigError(f"unknown preset {name!r}; expected one of A, B, C, D") from None


def configure_subgraph(ua: MotionPrimitiveAutomaton,
                       cfg: SubgraphConfig) -> MotionPrimitiveAutomaton:
    """Restrict to the enabled trims and to edges of the configured objective."""
    missing = cfg.enabled_trims - set(ua.trim_ids())
    if missing:
        raise ConfigError(f"enabled trims absent from the automaton: {sorted(missing)}")
    if cfg.objective not in ua.objectives:
        raise ConfigError(f"automaton has no {cfg.objective} edges")
    trims = [t for t in ua.trims if t.id in cfg.enabled_trims]
    maneuvers = {
        key: m for key, m in ua.maneuvers.items()
        if key[2] == cfg.objective
        and key[0] in cfg.enabled_trims and key[1] in cfg.enabled_trims
    }
    return MotionPrimitiveAutomaton(
        trims=trims,
        self_loops={t.id: ua.self_loops[t.id] for t in trims},
        maneuvers=maneuvers,
        params=ua.params,
        step_duration=ua.step_duration,
        objectives=(cfg.objective,),
    )


def standstill_routes(a: MotionPrimitiveAutomaton) -> dict:
    """Next edge on a shortest route from each trim to standstill.

    Breadth-first search from the standstill trim over reversed edges; ties
    break on sorted edge keys, so routes are deterministic. Trims that
    cannot reach standstill are absent from the result.
    """
    routes = {STANDSTILL_ID: None}
    frontier = [STANDSTILL_ID]
    incoming = {}
    for key in sorted(a.maneuvers):
        incoming.setdefault(key[1], []).append(key)
    while frontier:
        nxt = []
        for dst in frontier:
            for key in incoming.get(dst, ()):
                src = key[0]
                if src not in routes:
                    routes[src] = a.maneuvers[key]
                    nxt.append(src)
        frontier = nxt
    return routes


@dataclass
class ValidationReport:
    ok: bool
    issues: list = field(default_factory=list)
    edge_residuals: dict = field(default_factory=dict)
    unreachable: list = field(default_factory=list)


def validate_automaton(a: MotionPrimitiveAutomaton) -> ValidationReport:
    """Re-check every structural and numerical invariant of an automaton."""
    report = ValidationReport(ok=True)
    ids = set(a.trim_ids())
    for t in a.trims:
        if t.id not in a.self_loops:
            report.issues.append(f"trim {t.id} lacks a self-loop displacement")
        else:
            expect = trim_displacement(t, a.params)
            err = max(abs(x - y) for x, y in zip(a.self_loops[t.id], expect))
            if err > 1e-9:
                report.issues.append(f"trim {t.id}: self-loop deviates by {err:.2e}")
    for key, m in a.maneuvers.items():
        src, dst, obj = key
        if src not in ids or dst not in ids:
            report.issues.append(f"edge {key}: endpoint trim missing")
            continue
        residual = _edge_residual(m, a)
        report.edge_residuals[key] = residual
        if residual > DYNAMICS_RESIDUAL_TOL:
            report.issues.append(f"edge {key}: dynamics residual {residual:.2e}")
        to_trim = a.trim_by_id(dst)
        if (abs(m.states[-1, 3] - to_trim.v) > BOUNDARY_TOL
                or abs(m.states[-1, 4] - to_trim.delta) > BOUNDARY_TOL):
            report.issues.append(f"edge {key}: endpoint misses trim {dst}")
        from_trim = a.trim_by_id(src)
        start = (0.0, 0.0, 0.0, from_trim.v, from_trim.delta)
        if max(abs(x - y) for x, y in zip(m.states[0], start)) > 1e-12:
            report.issues.append(f"edge {key}: does not start at the trim frame origin")
        disp = (m.states[-1, 0], m.states[-1, 1], m.states[-1, 2])
        if max(abs(x - y) for x, y in zip(m.displacement, disp)) > 1e-12:
            report.issues.append(f"edge {key}: displacement mismatch")
    routes = standstill_routes(a)
    report.unreachable = sorted(ids - set(routes))
    for trim_id in report.unreachable:
        report.issues.append(f"trim {trim_id} cannot reach standstill")
    report.ok = not report.issues
    return report


def _edge_residual(m: Maneuver, a: MotionPrimitiveAutomaton) -> float:
    worst = 0.0
    for k in range(m.N):
        x = integrate_step(State(*m.states[k]), Input(*m.controls[k]), m.dt, a.params)
        worst = max(worst, float(np.max(np.abs(np.asarray(x) - m.states[k + 1]))))
    return worst


def save_automaton(a: MotionPrimitiveAutomaton, path) -> None:
    doc = {
        "format": FILE_FORMAT,
        "version": FILE_VERSION,
        "step_duration": a.step_duration,
        "objectives": list(a.objectives),
        "params": {
            "L": a.params.L, "l_r": a.params.l_r,
            "v_min": a.params.v_min, "v_max": a.params.v_max,
            "delta_max": a.params.delta_max, "a_max": a.params.a_max,
            "ddelta_max": a.params.ddelta_max,
            "footprint_radius": a.params.footprint_radius,
        },
        "trims": [
            {
                "id": t.id, "v": t.v, "delta": t.delta,
                "step_duration": t.step_duration,
                "self_loop": list(a.self_loops[t.id]),
            }
            for t in a.trims
        ],
        "maneuvers": [
            {
                "from": key[0], "to": key[1], "objective": key[2],
                "T": m.T,
                "controls": m.controls.tolist(),
                "states": m.states.tolist(),
                "displacement": list(m.displacement),
                "costs": list(m.costs),
            }
            for key, m in sorted(a.maneuvers.items())
        ],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def load_automaton(path, validate: bool = True) -> MotionPrimitiveAutomaton:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise AutomatonFormatError(f"{path}: not valid JSON: {exc}") from exc
    if not isinstance(doc, dict) or doc.get("format") != FILE_FORMAT:
        raise AutomatonFormatError(f"{path}: not a {FILE_FORMAT} file")
    if doc.get("version") != FILE_VERSION:
        raise AutomatonFormatError(
            f"{path}: file version {doc.get('version')!r} does not match "
            f"supported version {FILE_VERSION}"
        )
    try:
        params = VehicleParams(**doc["params"])
        trims = []
        self_loops = {}
        for row in doc["trims"]:
            trims.append(Trim(row["id"], row["v"], row["delta"], row["step_duration"]))
            self_loops[row["id"]] = GroupElement(*row["self_loop"])
        maneuvers = {}
        for row in doc["maneuvers"]:
            obj = row["objective"]
            if obj not in OBJECTIVE_IDS:
                raise AutomatonFormatError(
                    f"{path}: maneuver {row['from']}->{row['to']}: "
                    f"unknown objective label {obj!r}"
                )
            m = Maneuver(
                from_trim=row["from"], to_trim=row["to"], objective=obj,
                T=row["T"],
                controls=np.asarray(row["controls"], dtype=float),
                states=np.asarray(row["states"], dtype=float),
                displacement=GroupElement(*row["displacement"]),
                costs=tuple(row["costs"]),
            )
            if m.controls.shape != (m.states.shape[0] - 1, 2) or m.states.shape[1] != 5:
                raise AutomatonFormatError(
                    f"{path}: maneuver {row['from']}->{row['to']}: "
                    "trajectory arrays have inconsistent shapes"
                )
            maneuvers[(row["from"], row["to"], obj)] = m
    except AutomatonFormatError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise AutomatonFormatError(f"{path}: malformed field: {exc!r}") from exc
    a = MotionPrimitiveAutomaton(
        trims=trims,
        self_loops=self_loops,
        maneuvers=maneuvers,
        params=params,
        step_duration=doc["step_duration"],
        objectives=tuple(doc["objectives"]),
    )
    if validate:
        report = validate_automaton(a)
        if not report.ok:
            raise AutomatonIntegrityError(
                f"{path}: failed validation: " + "; ".join(report.issues[:5])
            )
    return a
