"""Scenario files, trajectory CSV and metrics JSON."""

from __future__ import annotations

import json
import math
from pathlib import Path

import jsonschema
import numpy as np

from .simulator import Metrics, Trajectory
from .world import Obstacle, PlannerParams, RobotState, Scenario, WorldError

_VEC3 = {"type": "array", "items": {"type": "number"}, "minItems": 3, "maxItems": 3}
_POS = {"type": "number", "exclusiveMinimum": 0}

SCENARIO_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["start", "goal", "obstacles", "params"],
    "properties": {
        "start": {"type": "object", "additionalProperties": False,
                  "required": ["position", "velocity"],
                  "properties": {"position": _VEC3, "velocity": _VEC3}},
        "goal": _VEC3,
        "obstacles": {"type": "array", "items": {
            "type": "object", "additionalProperties": False, "required": ["points", "b"],
            "properties": {"id": {"type": "integer"},
                           "points": {"type": "array", "items": _VEC3, "minItems": 1},
                           "b": _VEC3}}},
        "params": {"type": "object", "additionalProperties": False,
                   "required": ["k_cf", "k_p", "k_v", "v_min", "v_max", "d_max", "d_min",
                                "eps_min", "xi"],
                   "properties": {k: {"type": "number"} for k in
                                  ("k_cf", "k_p", "k_v", "v_min", "v_max", "d_max", "d_min",
                                   "eps_min", "xi", "k_vlc_scale")}},
        "dt": _POS,
        "horizon": _POS,
        "planar": {"type": "boolean"},
        "seed": {"type": "integer", "minimum": 0},
        "disturbance": {"type": "object", "additionalProperties": False,
                        "required": ["z_max"],
                        "properties": {"kind": {"enum": ["random", "random_mag", "adversarial"]},
                                       "z_max": {"type": "number", "minimum": 0},
                                       "hold_steps": {"type": "integer", "minimum": 1},
                                       "speed_band": {"type": "array", "items": {"type": "number"},
                                                      "minItems": 2, "maxItems": 2},
                                       "seed": {"type": "integer", "minimum": 0}}},
        "apf": {"type": "object", "additionalProperties": False,
                "properties": {"eta": _POS, "rho0": _POS}},
    },
}


class ScenarioError(WorldError):
    """Scenario document failed schema or world validation."""


def scenario_from_dict(doc: dict) -> Scenario:
    try:
        jsonschema.validate(doc, SCENARIO_SCHEMA)
    except jsonschema.ValidationError as e:
        where = "/".join(str(p) for p in e.absolute_path) or "<root>"
        raise ScenarioError(f"{where}: {e.message}") from None
    try:
        obstacles = tuple(Obstacle(o.get("id", i), o["points"], o["b"])
                          for i, o in enumerate(doc["obstacles"]))
        return Scenario(RobotState(doc["start"]["position"], doc["start"]["velocity"]),
                        doc["goal"], obstacles, PlannerParams(**doc["params"]),
                        dt=doc.get("dt", 1e-3), horizon=doc.get("horizon", 10.0),
                        planar=doc.get("planar", True), seed=doc.get("seed", 0),
                        disturbance=doc.get("disturbance"), apf=doc.get("apf"))
    except WorldError as e:
        raise ScenarioError(str(e)) from None


def scenario_to_dict(sc: Scenario) -> dict:
    p = sc.params
    doc = {"start": {"position": sc.start.position.tolist(), "velocity": sc.start.velocity.tolist()},
           "goal": np.asarray(sc.goal).tolist(),
           "obstacles": [{"id": o.id, "points": o.points.tolist(), "b": o.b.tolist()}
                         for o in sc.obstacles],
           "params": {k: getattr(p, k) for k in ("k_cf", "k_p", "k_v", "v_min", "v_max", "d_max",
                                                 "d_min", "eps_min", "xi", "k_vlc_scale")},
           "dt": sc.dt, "horizon": sc.horizon, "planar": sc.planar, "seed": sc.seed}
    if sc.disturbance:
        doc["disturbance"] = dict(sc.disturbance)
    if sc.apf:
        doc["apf"] = dict(sc.apf)
    return doc


def load_scenario(path) -> Scenario:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as e:
        raise ScenarioError(f"{path}: not valid JSON ({e})") from None
    return scenario_from_dict(doc)


def save_scenario(sc: Scenario, path) -> None:
    Path(path).write_text(json.dumps(scenario_to_dict(sc), indent=2) + "\n")


CSV_COLUMNS = ["t", "x", "y", "z", "vx", "vy", "vz", "R", "S", "eps", "Vb",
               "fcf_x", "fcf_y", "fcf_z", "fvlc_x", "fvlc_y", "fvlc_z", "gate"]


def fmt_float(a: float) -> str:
    # 17 significant digits round-trip every double; + 0.0 folds -0 into 0
    return "nan" if math.isnan(a) else format(a + 0.0, ".17g")


def trajectory_table(traj: Trajectory) -> np.ndarray:
    return np.column_stack([traj.t, traj.position, traj.velocity, traj.R, traj.S, traj.eps,
                            traj.v_b, traj.f_cf, traj.f_vlc, traj.gate])


def write_trajectory_csv(traj: Trajectory, path) -> None:
    rows = trajectory_table(traj)
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(CSV_COLUMNS) + "\n")
        for r in rows:
            fh.write(",".join(fmt_float(float(a)) for a in r) + "\n")


def read_trajectory_csv(path) -> np.ndarray:
    return np.genfromtxt(path, delimiter=",", skip_header=1, ndmin=2)


def metrics_dict(m: Metrics, deterministic: bool = False) -> dict:
    row = m.table_row()
    if deterministic:
        row["comp_time_us"] = None     # wall-clock: the one field that varies run to run
    return row


def write_json(doc, path) -> None:
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
