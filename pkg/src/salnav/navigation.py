"""All-pairs planning and the localize -> position -> orient -> move loop."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import (
    DegenerateDirection,
    EmptyGraph,
    EmptyScene,
    InsufficientCorrespondences,
    InvalidHop,
    NavigationFailed,
    NoCandidates,
)
from .localization import DEFAULT_MATCH, MatchConfig, localize
from .positioning import PoseEstimate, estimate_pose
from .scene import graph_from_observation, wrap_2pi, wrap_pi
from .topomap import FloorGrid, MapNode, TopoMap, segment_visible
from .world import apply_perturbations

TWO_PI = 2.0 * math.pi


# ---------------------------------------------------------------------------
# planning


def floyd_warshall(topo: TopoMap) -> tuple[np.ndarray, np.ndarray]:
    """All-pairs shortest distances and successor table.

    ``next_hop[i, j]`` is the node after ``i`` on the shortest path to ``j``
    (-1 when unreachable). Relaxation is strict and runs over intermediates
    in ascending index order, so among equal-length routes the one found
    through the lowest intermediate is kept. Reported distances are the
    left-to-right sums of edge lengths along the reconstructed paths.
    """
    A = topo.adjacency
    L = topo.edge_length
    n = len(topo)
    D = np.where(A, L, np.inf)
    np.fill_diagonal(D, 0.0)
    nxt = np.where(A, np.arange(n)[None, :], -1)
    np.fill_diagonal(nxt, np.arange(n))
    for k in range(n):
        cand = D[:, k, None] + D[None, k, :]
        better = cand < D
        D = np.where(better, cand, D)
        nxt = np.where(better, nxt[:, k, None], nxt)
    return _path_sums(L, nxt), nxt


def _path_sums(L: np.ndarray, nxt: np.ndarray) -> np.ndarray:
    n = len(L)
    dist = np.full((n, n), np.inf)
    src, dst = np.nonzero(nxt >= 0)
    cur = src.copy()
    acc = np.zeros(len(src))
    live = cur != dst
    while live.any():
        step = nxt[cur[live], dst[live]]
        acc[live] = acc[live] + L[cur[live], step]
        cur[live] = step
        live = cur != dst
    dist[src, dst] = acc
    return dist


def reconstruct_path(next_hop: np.ndarray, i: int, j: int) -> list[int]:
    if next_hop[i, j] < 0:
        return []
    path = [i]
    while i != j:
        i = int(next_hop[i, j])
        path.append(i)
    return path


@dataclass(frozen=True, eq=False)
class PlanResult:
    path: tuple[str, ...]
    total_length: float
    dist_matrix: np.ndarray = field(repr=False)
    next_hop: np.ndarray = field(repr=False)


def plan(topo: TopoMap, start: str, goal: str, tables=None) -> PlanResult:
    dist, nxt = tables if tables is not None else floyd_warshall(topo)
    i, j = topo.index_of(start), topo.index_of(goal)
    idx = reconstruct_path(nxt, i, j)
    return PlanResult(tuple(topo.nodes[k].id for k in idx), float(dist[i, j]), dist, nxt)


# ---------------------------------------------------------------------------
# heading control


@dataclass(frozen=True)
class AgentState:
    position: tuple[float, float]
    heading: float
    current_node: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, "position", (float(self.position[0]), float(self.position[1])))
        object.__setattr__(self, "heading", wrap_2pi(float(self.heading)))


def heading_command(agent: AgentState, next_node: MapNode, pose: PoseEstimate, topo: TopoMap) -> float:
    """Rotation that turns the pose-corrected agent towards ``next_node``.

    ``agent.position`` / ``agent.heading`` are the reference point and axis
    direction of the matched scene; ``pose`` corrects them. When the
    corrected position coincides with the current node the map's relative
    azimuth is used, otherwise the bearing from the corrected position.
    Returns an angle in (-pi, pi].
    """
    vp = topo.index_of(agent.current_node)
    nq = topo.index_of(next_node.id)
    if nq != vp and not topo.adjacency[vp, nq]:
        raise InvalidHop(f"{next_node.id} is not adjacent to {agent.current_node}")
    cx = agent.position[0] + pose.shift[0]
    cy = agent.position[1] + pose.shift[1]
    theta_c = wrap_2pi(agent.heading + pose.orientation)
    here = topo.nodes[vp].position
    if nq != vp and math.hypot(cx - here[0], cy - here[1]) <= 1e-9:
        phi = topo.rel_azimuth[vp, nq]
    else:
        phi = math.atan2(next_node.position[1] - cy, next_node.position[0] - cx)
    return wrap_pi(phi - theta_c)


# ---------------------------------------------------------------------------
# episodes


@dataclass(frozen=True)
class NavConfig:
    step_length: float = 0.1
    arrival_radius: float = 0.25
    budget_per_hop: int = 50
    # floor on the budget in units of the shortest path length
    budget_length_factor: float = 3.0
    fov: float = TWO_PI
    perturbations: tuple = ()
    match: MatchConfig = DEFAULT_MATCH


@dataclass(frozen=True)
class TraceRecord:
    step: int
    x: float
    y: float
    heading: float
    node_est: str
    theta_r: float
    event: str


@dataclass
class NavigationTrace:
    start: str
    goal: str
    records: list[TraceRecord] = field(default_factory=list)
    planned_path: tuple[str, ...] = ()
    shortest_length: float = math.inf
    actual_length: float = 0.0
    success: bool = False
    oracle_success: bool = False
    localization_correct: list[bool] = field(default_factory=list)
    arrivals: list[str] = field(default_factory=list)

    def dump(self) -> str:
        out = [f"# trace {self.start} -> {self.goal}",
               f"# shortest {self.shortest_length!r} actual {self.actual_length!r} "
               f"success {int(self.success)} oracle {int(self.oracle_success)}",
               "# step x y heading node_est theta_r event"]
        for r in self.records:
            out.append(f"{r.step} {r.x:.6f} {r.y:.6f} {r.heading:.6f} {r.node_est} {r.theta_r:.6f} {r.event}")
        return "\n".join(out) + "\n"

    def save(self, path) -> None:
        Path(path).write_text(self.dump())


def parse_trace(text: str) -> list[TraceRecord]:
    recs = []
    for ln in text.splitlines():
        if not ln.strip() or ln.startswith("#"):
            continue
        f = ln.split()
        recs.append(TraceRecord(int(f[0]), float(f[1]), float(f[2]), float(f[3]), f[4], float(f[5]), f[6]))
    return recs


def nearest_visible_node(topo: TopoMap, point, grid: Optional[FloorGrid]) -> str:
    """Closest map node in line of sight of ``point``; closest overall if none is."""
    d = np.hypot(*(topo.positions() - np.asarray(point, dtype=float)).T)
    order = np.argsort(d, kind="stable")
    if grid is not None and grid.is_free(point):
        for i in order:
            if segment_visible(point, topo.nodes[i].position, grid):
                return topo.nodes[i].id
    return topo.nodes[int(order[0])].id


_LOCALIZATION_ERRORS = (NoCandidates, EmptyScene, EmptyGraph, InsufficientCorrespondences, DegenerateDirection)


def navigate(topo: TopoMap, start: str, goal: str, simulator, config: NavConfig = NavConfig(),
             seed: int = 0, tables=None) -> NavigationTrace:
    """Drive an agent from ``start`` to ``goal`` through ``simulator``.

    ``simulator`` provides ``render(pose, fov)`` (an Observation with
    viewer-frame objects and ground-truth ``room_id``) and a ``grid``.
    The agent re-localizes on every believed node arrival and after bumping
    into an obstructed cell, and dead-reckons in between.
    Raises NavigationFailed with the partial trace attached.
    """
    if start == goal:
        raise ValueError("start and goal must differ")
    dist, nxt = tables if tables is not None else floyd_warshall(topo)
    si, gi = topo.index_of(start), topo.index_of(goal)
    grid = simulator.grid
    trace = NavigationTrace(start, goal)
    if not np.isfinite(dist[si, gi]):
        raise NavigationFailed(f"{goal} is unreachable from {start}", trace)
    trace.planned_path = tuple(topo.nodes[k].id for k in reconstruct_path(nxt, si, gi))
    trace.shortest_length = float(dist[si, gi])
    hops = len(trace.planned_path) - 1
    budget = max(config.budget_per_hop * hops,
                 math.ceil(config.budget_length_factor * trace.shortest_length / config.step_length))
    rng = np.random.default_rng([seed, 5])
    goal_pos = np.array(topo.nodes[gi].position)
    radius = config.arrival_radius
    step_len = config.step_length
    pos = np.array(topo.nodes[si].position, dtype=float)
    heading = float(rng.uniform(0.0, TWO_PI))
    steps = 0
    n_loc = 0

    def record(node_est, theta_r, event):
        trace.records.append(TraceRecord(steps, float(pos[0]), float(pos[1]), heading, node_est, theta_r, event))
        if math.hypot(*(pos - goal_pos)) <= radius:
            trace.oracle_success = True

    while True:
        n_loc += 1
        if n_loc > budget:
            record("-", 0.0, "fail")
            raise NavigationFailed("localization budget exhausted", trace)
        obs = simulator.render((float(pos[0]), float(pos[1]), heading), config.fov)
        obs = apply_perturbations(obs, config.perturbations, seed * 7919 + n_loc)
        try:
            query = graph_from_observation("query", obs.objects)
            loc = localize(query, topo, config.match)
            pose = estimate_pose(loc, query, topo)
        except _LOCALIZATION_ERRORS as exc:
            record("-", 0.0, "fail")
            raise NavigationFailed(f"localization failed: {exc}", trace) from exc
        correct = loc.matched_scene_id == obs.room_id
        trace.localization_correct.append(correct)
        ref = topo.node(loc.matched_scene_id)
        est = np.array(ref.position) + np.array(pose.shift[:2])
        vp_id = nearest_visible_node(topo, est, grid)
        vp = topo.index_of(vp_id)
        at_vp = math.hypot(*(est - np.array(topo.nodes[vp].position))) <= radius
        if at_vp:
            trace.arrivals.append(vp_id)
        if at_vp and vp == gi:
            trace.success = math.hypot(*(pos - goal_pos)) <= radius
            record(vp_id, 0.0, "goal")
            if not trace.success:
                raise NavigationFailed("stopped away from the goal", trace)
            return trace
        target = int(nxt[vp, gi]) if at_vp else vp
        agent = AgentState(ref.position, 0.0, vp_id)
        theta_r = heading_command(agent, topo.nodes[target], pose, topo)
        record(vp_id, theta_r, "localize" if correct else "mislocalized")
        heading = wrap_2pi(heading + theta_r)
        belief_heading = pose.orientation + theta_r
        bdir = np.array([math.cos(belief_heading), math.sin(belief_heading)])
        tgt = np.array(topo.nodes[target].position)
        belief = est.copy()
        while math.hypot(*(belief - tgt)) > radius:
            if steps >= budget:
                record(vp_id, 0.0, "fail")
                raise NavigationFailed(f"step budget {budget} exhausted", trace)
            move = step_len * np.array([math.cos(heading), math.sin(heading)])
            new = pos + move
            steps += 1
            if simulator.grid.is_free(new):
                pos = new
                trace.actual_length += step_len
                event = "move"
            else:
                # contact ends the leg; the agent re-localizes where it stands
                record(topo.nodes[target].id, 0.0, "bump")
                break
            belief = belief + step_len * bdir
            record(topo.nodes[target].id, 0.0, event)


@dataclass(frozen=True)
class EpisodeRecord:
    success: bool
    oracle_success: bool
    shortest_length: float
    actual_length: float
    localization_correct_per_hop: tuple[bool, ...] = ()

    def __post_init__(self):
        if self.actual_length < 0:
            raise ValueError("actual_length must be nonnegative")
        if not self.shortest_length > 0:
            raise ValueError("shortest_length must be positive")


def run_episode(topo, start, goal, simulator, config=NavConfig(), seed=0, tables=None) -> tuple[EpisodeRecord, NavigationTrace]:
    """``navigate`` with failures folded into the episode record."""
    try:
        trace = navigate(topo, start, goal, simulator, config, seed, tables)
    except NavigationFailed as exc:
        trace = exc.trace
    return EpisodeRecord(trace.success, trace.oracle_success or trace.success, trace.shortest_length,
                         trace.actual_length, tuple(trace.localization_correct)), trace
