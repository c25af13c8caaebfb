"""Virtual agents: forward rollouts under different field-direction choices.

Each agent fixes one field vector b per obstacle it has met. A rollout runs
until it comes within d_max of an obstacle it has no b for, then forks into
one child per choice (+b, -b). Children share the parent's trajectory
prefix. Leaves are scored and the cheapest safe one is selected.
"""

from __future__ import annotations

import concurrent.futures as cf
import enum
import json
import logging
import math
import threading
import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import _kernels as K
from .simulator import Rollout, Termination, Trajectory
from .world import RobotState, Scenario

log = logging.getLogger(__name__)

AGENT_CAP = 64
DT_PRED = 1e-2
REPLAN_STEPS = 100

Z = np.array([0.0, 0.0, 1.0])
MZ = np.array([0.0, 0.0, -1.0])


class AgentStatus(enum.Enum):
    Running = "running"
    Finished = "finished"
    Collided = "collided"
    Pruned = "pruned"
    Split = "split"        # internal node: forked into children


class NoFeasibleAgent(RuntimeError):
    """No leaf finished without collision; keep the current field vectors."""


@dataclass(frozen=True)
class CostWeights:
    w_len: float = 1.0
    w_dist: float = 1.0
    d_safe: float | None = None    # defaults to params.d_min


@dataclass
class Agent:
    id: int
    b_assignment: dict
    parent: int | None = None
    depth: int = 0
    status: AgentStatus = AgentStatus.Running
    cost: float = math.inf
    split_time: float = 0.0
    prediction_time: float = 0.0   # wall seconds of this agent's own segments
    children: list = field(default_factory=list)
    seed: np.random.SeedSequence | None = field(default=None, repr=False)
    rollout: Rollout | None = field(default=None, repr=False)

    @property
    def trajectory(self) -> Trajectory:
        return self.rollout.trajectory()

    @property
    def is_leaf(self) -> bool:
        return not self.children


def cost(traj: Trajectory, weights: CostWeights, d_safe: float) -> float:
    """w_len * path length + w_dist * clearance shortfall below d_safe; inf on collision."""
    if traj.terminated_by in (Termination.Collision, Termination.NonFinite):
        return math.inf
    d_min = traj.stat("mindist")
    short = max(0.0, d_safe - d_min) if math.isfinite(d_min) else 0.0
    return weights.w_len * traj.stat("pathlen") + weights.w_dist * short


def select_best(agents) -> Agent:
    """Cheapest Finished agent, ties to the lowest id."""
    done = [a for a in agents if a.status is AgentStatus.Finished]
    if not done:
        raise NoFeasibleAgent("no agent finished without collision")
    return min(done, key=lambda a: (a.cost, a.id))


def split_directions(x, v, p, planar: bool):
    """The two field vectors offered at a new obstacle.

    Planar: +z and -z. In 3D: +/- the unit normal of the plane spanned by
    the line of sight and the velocity, so that the field circulates in it.
    """
    if planar:
        return Z.copy(), MZ.copy()
    n = np.cross(np.asarray(p) - np.asarray(x), np.asarray(v))
    nn = np.linalg.norm(n)
    if nn < 1e-12:
        # line of sight parallel to v: any normal of v will do
        a = np.asarray(v, dtype=float)
        e = np.eye(3)[int(np.argmin(np.abs(a)))]
        n = np.cross(a, e)
        nn = np.linalg.norm(n)
        if nn < 1e-12:
            return Z.copy(), MZ.copy()
    n = n / nn
    return n, -n


def rollout(agent_or_assignment, scenario: Scenario, dt_pred: float = DT_PRED,
            horizon: float | None = None, **kw) -> Trajectory:
    """Full-mode run under a fixed b assignment (obstacles not in it keep their own b)."""
    assignment = getattr(agent_or_assignment, "b_assignment", agent_or_assignment)
    sc = scenario.with_b(assignment) if assignment else scenario
    ro = Rollout(sc, "full", dt=dt_pred, horizon=horizon, **kw)
    ro.advance()
    return ro.trajectory()


class AgentTree:
    """Grows the agent tree for one world snapshot.

    Rollouts of the current frontier are independent tasks; with an
    executor they run concurrently, and results are applied in agent-id
    order so the outcome equals a sequential run.
    """

    def __init__(self, scenario: Scenario, dt_pred: float = DT_PRED, horizon: float | None = None,
                 weights: CostWeights = CostWeights(), cap: int = AGENT_CAP, seed: int | None = None,
                 stride: int = 1, **rollout_kw):
        if cap < 2:
            raise ValueError("agent cap must admit at least one split")
        self.scenario = scenario
        self.dt_pred = dt_pred
        self.horizon = horizon
        self.weights = weights
        self.d_safe = weights.d_safe if weights.d_safe is not None else scenario.params.d_min
        self.cap = cap
        self.stride = stride
        self.rollout_kw = rollout_kw
        self.seed = scenario.seed if seed is None else seed
        self.agents: list[Agent] = []
        self.events: list[dict] = []
        self.max_live = 0
        self._lock = threading.Lock()

    # ---------------------------------------------------------------- tree ops

    def _new_agent(self, assignment, rollout_, parent=None, seed=None, t=0.0) -> Agent:
        a = Agent(len(self.agents), dict(assignment), parent.id if parent else None,
                  parent.depth + 1 if parent else 0, seed=seed, rollout=rollout_, split_time=t)
        self.agents.append(a)
        return a

    def spawn_initial(self) -> list[Agent]:
        """Root rollout up to the first obstacle it meets, then one agent per b choice."""
        ro = Rollout(self.scenario, "full", dt=self.dt_pred, horizon=self.horizon, assigned={},
                     **self.rollout_kw)
        root = self._new_agent({}, ro, seed=np.random.SeedSequence(self.seed))
        self._set_seed(root)
        if not self.scenario.obstacles:
            return [root]
        self._advance(root)
        if root.rollout.code is Termination.Encounter:
            return self.split_on_encounter(root, self._encountered(root))
        self._finish(root)
        return [root]

    def _encountered(self, agent) -> int:
        slot = int(agent.rollout.summary[K.S_ENCSLOT])
        return agent.rollout.packed.ids[slot]

    def split_on_encounter(self, agent: Agent, obstacle_id: int) -> list[Agent]:
        """Fork `agent` at its current state into one child per b choice for the obstacle."""
        if obstacle_id in agent.b_assignment:
            return [agent]      # assignment already fixed: never split twice
        ro = agent.rollout
        ro.resume_after_encounter()
        pk = ro.packed
        slot = pk.ids.index(obstacle_id)
        pts = pk.points[pk.obstacle_slot == slot]
        near = pts[int(np.argmin(np.linalg.norm(pts - ro.x, axis=1)))]
        t = ro.step * ro.dt
        seeds = agent.seed.spawn(2)
        kids = []
        for b, sq in zip(split_directions(ro.x, ro.v, near, self.scenario.planar), seeds):
            child_ro = ro.copy()
            child_ro.set_b(obstacle_id, b)
            assign = dict(agent.b_assignment)
            assign[obstacle_id] = b
            kid = self._new_agent(assign, child_ro, parent=agent, seed=sq, t=t)
            self._set_seed(kid)
            kids.append(kid)
        agent.children = [k.id for k in kids]
        agent.status = AgentStatus.Split
        agent.rollout = ro
        self._event("split", agent=agent.id, obstacle=obstacle_id, t=t,
                    children=agent.children)
        self._apply_cap()
        return kids

    def _set_seed(self, agent):
        agent.rollout.ip[K.F_SEED] = int(agent.seed.generate_state(1)[0] & 0x7FFFFFFF)

    def _event(self, kind, **info):
        info["event"] = kind
        self.events.append(info)
        log.info("agents: %s", info)

    def _live(self):
        return [a for a in self.agents if a.is_leaf and a.status in
                (AgentStatus.Running, AgentStatus.Finished)]

    def _partial_cost(self, a: Agent) -> float:
        if a.status is AgentStatus.Finished:
            return a.cost
        return cost(a.trajectory, self.weights, self.d_safe)

    def _apply_cap(self):
        live = self._live()
        while len(live) > self.cap:
            worst = max(live, key=lambda a: (self._partial_cost(a), a.id))
            worst.status = AgentStatus.Pruned
            self._event("pruned", agent=worst.id, cost=self._partial_cost(worst))
            live.remove(worst)
        self.max_live = max(self.max_live, len(live))

    def _advance(self, agent: Agent) -> Termination:
        t0 = time.perf_counter()
        code = agent.rollout.advance(self.stride)
        agent.prediction_time += time.perf_counter() - t0
        return code

    def _finish(self, agent: Agent):
        traj = agent.trajectory
        if traj.terminated_by in (Termination.Collision, Termination.NonFinite):
            agent.status = AgentStatus.Collided
            agent.cost = math.inf
        else:
            agent.status = AgentStatus.Finished
            agent.cost = cost(traj, self.weights, self.d_safe)

    # ---------------------------------------------------------------- driver

    def run(self, executor: cf.Executor | None = None) -> list[Agent]:
        """Grow the tree until every leaf is finished, collided or pruned."""
        frontier = [a for a in self.spawn_initial() if a.status is AgentStatus.Running]
        while frontier:
            if executor is None:
                codes = [self._advance(a) for a in frontier]
            else:
                codes = list(executor.map(self._advance, frontier))
            nxt = []
            for a, code in zip(frontier, codes):
                if a.status is AgentStatus.Pruned:
                    continue
                if code is Termination.Encounter:
                    nxt.extend(self.split_on_encounter(a, self._encountered(a)))
                else:
                    self._finish(a)
            frontier = [a for a in nxt if a.status is AgentStatus.Running]
        return self.leaves()

    def leaves(self) -> list[Agent]:
        return [a for a in self.agents if a.is_leaf]

    def best(self) -> Agent:
        return select_best(self.leaves())

    def to_json(self, deterministic: bool = False) -> str:
        """Tree dump: one record per agent plus the split/prune events."""
        def rec(a: Agent):
            tr = a.trajectory
            r = {"id": a.id, "parent": a.parent, "children": a.children, "depth": a.depth,
                 "status": a.status.value, "cost": a.cost if math.isfinite(a.cost) else None,
                 "split_time": a.split_time,
                 "b_assignment": {str(k): [float(c) for c in v] for k, v in a.b_assignment.items()},
                 "termination": tr.terminated_by.name if a.is_leaf else None,
                 "path_length": tr.stat("pathlen"),
                 "min_dist": tr.stat("mindist") if math.isfinite(tr.stat("mindist")) else None}
            if not deterministic:
                r["prediction_time_ms"] = a.prediction_time * 1e3
            return r
        try:
            sel = self.best().id
        except NoFeasibleAgent:
            sel = None
        doc = {"agents": [rec(a) for a in self.agents], "events": self.events, "selected": sel,
               "cap": self.cap, "max_live": self.max_live, "dt_pred": self.dt_pred,
               "weights": {"w_len": self.weights.w_len, "w_dist": self.weights.w_dist,
                           "d_safe": self.d_safe}}
        if not deterministic:
            times = [a.prediction_time * 1e3 for a in self.agents]
            doc["mean_prediction_time_ms"] = float(np.mean(times)) if times else 0.0
        return json.dumps(doc, indent=2, sort_keys=True)


def spawn_initial(scenario: Scenario, **kw) -> list[Agent]:
    return AgentTree(scenario, **kw).spawn_initial()


def plan(scenario: Scenario, executor: cf.Executor | None = None, **kw) -> AgentTree:
    tree = AgentTree(scenario, **kw)
    tree.run(executor)
    return tree


@dataclass(frozen=True)
class Selection:
    time: float
    agent_id: int | None
    b_assignment: dict
    cost: float
    feasible: bool


def _select(scenario: Scenario, executor, kw) -> Selection:
    tree = plan(scenario, executor, **kw)
    try:
        a = tree.best()
        return Selection(scenario.start.time, a.id, a.b_assignment, a.cost, True)
    except NoFeasibleAgent:
        return Selection(scenario.start.time, None, {}, math.inf, False)


class AsyncPlanner:
    """Runs planning jobs in the background and hands out the latest result.

    `submit` snapshots the world and returns at once; `latest` never blocks
    and returns the most recently completed selection (or None).
    """

    def __init__(self, max_workers: int = 2, **plan_kw):
        self.pool = cf.ThreadPoolExecutor(max_workers=max_workers)
        self.plan_kw = plan_kw
        self._latest: Selection | None = None
        self._pending: cf.Future | None = None
        self._lock = threading.Lock()

    def submit(self, scenario: Scenario) -> cf.Future:
        fut = self.pool.submit(_select, scenario, None, self.plan_kw)
        fut.add_done_callback(self._done)
        self._pending = fut
        return fut

    def _done(self, fut: cf.Future):
        if fut.exception() is None:
            sel = fut.result()
            with self._lock:
                if self._latest is None or sel.time >= self._latest.time:
                    self._latest = sel

    def busy(self) -> bool:
        return self._pending is not None and not self._pending.done()

    def latest(self) -> Selection | None:
        with self._lock:
            return self._latest

    def close(self):
        self.pool.shutdown(wait=True)

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def drive(scenario: Scenario, cycle_steps: int = REPLAN_STEPS, planner: AsyncPlanner | None = None,
          wait: bool = True, **plan_kw):
    """Control loop with periodic replanning.

    The robot is simulated at the scenario step; every `cycle_steps` steps a
    planning job is submitted from the current state, and the field vectors
    of the most recent completed selection are applied. With wait=True each
    job is awaited (a sequential schedule); otherwise the loop never blocks
    and keeps the current b until a result arrives. Returns
    (trajectory, selections applied).
    """
    own = planner is None
    planner = planner or AsyncPlanner(**plan_kw)
    ro = Rollout(scenario, "full")
    total = ro.n_steps
    applied: list[Selection] = []
    last = None
    try:
        while True:
            state = RobotState(ro.x.copy(), ro.v.copy(), ro.step * ro.dt)
            assign = {oid: ro.packed.b[ro.packed.obstacle_id == oid][0] for oid in ro.packed.ids}
            snap = replace(scenario.with_b(assign), start=state)
            if not planner.busy():
                fut = planner.submit(snap)
                if wait:
                    fut.result()
            sel = planner.latest()
            if sel is not None and sel is not last and sel.feasible:
                for oid, b in sel.b_assignment.items():
                    ro.set_b(oid, b)
                applied.append(sel)
                last = sel
            ro.n_steps = min(ro.step + cycle_steps, total)
            code = ro.advance()
            if code is not Termination.Horizon or ro.step >= total:
                break
            ro.resume_after_encounter()
    finally:
        if own:
            planner.close()
    ro.n_steps = total
    return ro.trajectory(), applied
