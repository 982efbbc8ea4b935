"""Experiment drivers producing the localization, positioning and navigation tables.

Every experiment is a deterministic function of an ``ExperimentConfig``.
Items (queries, trials, episodes) carry their own seeds, so results do not
depend on evaluation order or on the number of worker processes.
"""
from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import (
    DegenerateDirection,
    EmptyGraph,
    EmptyScene,
    InsufficientCorrespondences,
    NoCandidates,
    UnderdeterminedRotation,
    UnknownExperiment,
)
from .localization import localize
from .metrics import MetricsReport, PositioningTrial, compute_metrics, format_table
from .navigation import NavConfig, floyd_warshall, run_episode
from .positioning import (
    CorrespondenceSet,
    estimate_pose,
    estimate_rotation_3d,
    estimate_shift,
    rotation_xyz,
)
from .scene import graph_from_observation
from .world import (
    Perturbation,
    WorldSpec,
    apply_perturbations,
    build_map,
    generate_world,
    render_observation,
    sample_query_poses,
)

TWO_PI = 2.0 * math.pi

_PIPELINE_ERRORS = (NoCandidates, EmptyScene, EmptyGraph, InsufficientCorrespondences, DegenerateDirection)


def _default_conditions() -> dict:
    return {
        "none": [],
        "spatial": ["spatial:0.1"],
        "orientation": ["orientation:10deg"],
        "drop50": ["drop:0.5"],
        "drop66": ["drop:0.66"],
    }


@dataclass
class ExperimentConfig:
    seed: int = 0
    queries: int = 200
    # corpus for the perturbation and positioning experiments
    rooms: int = 42
    fov_rooms: int = 82
    fovs_deg: tuple = (60.0, 120.0, 180.0, 360.0)
    scale_rooms: tuple = (6, 12, 42, 106)
    conditions: dict = field(default_factory=_default_conditions)
    positioning_trials: int = 105
    # std of centroid noise in the positioning experiment, metres
    positioning_noise: float = 0.0
    nav_rooms: int = 12
    episodes: int = 50
    # run navigation episodes as part of the perturbation experiment
    perturbation_navigation: bool = True
    # WorldSpec overrides shared by every generated world
    world: dict = field(default_factory=dict)
    workers: int = 1

    def __post_init__(self):
        self.fovs_deg = tuple(float(f) for f in self.fovs_deg)
        self.scale_rooms = tuple(int(n) for n in self.scale_rooms)
        if self.queries < 1 or self.episodes < 1 or self.positioning_trials < 1:
            raise ValueError("queries, episodes and positioning_trials must be positive")
        if self.workers < 1:
            raise ValueError("workers must be at least 1")

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def to_json(self) -> str:
        return json.dumps(asdict(self))

    def world_spec(self, rooms: int) -> WorldSpec:
        return WorldSpec.from_dict({**self.world, "seed": self.seed, "rooms": rooms})

    def perturbations(self, name: str) -> tuple:
        return tuple(Perturbation.parse(p) for p in self.conditions[name])


@dataclass
class ExperimentResult:
    name: str
    report: MetricsReport
    table: str
    rows: list = field(default_factory=list)

    def save(self, path) -> Path:
        """Write the text table and a JSON-lines file of rows next to it."""
        path = Path(path)
        path.write_text(self.table)
        rows_path = path.with_suffix(path.suffix + ".jsonl")
        rows_path.write_text("".join(json.dumps(r, sort_keys=True) + "\n" for r in self.rows))
        return rows_path


# ---------------------------------------------------------------------------
# worlds shared between items (one copy per process)

_WORLDS: dict = {}


def _world_and_map(spec: WorldSpec):
    key = spec.to_json()
    if key not in _WORLDS:
        world = generate_world(spec)
        topo = build_map(world)
        _WORLDS.clear()
        _WORLDS[key] = (world, topo, floyd_warshall(topo))
    return _WORLDS[key]


def _run_items(fn: Callable, spec: WorldSpec, items: Sequence, workers: int) -> list:
    if workers <= 1 or len(items) < 2:
        return [fn(spec, it) for it in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, [spec] * len(items), items, chunksize=max(1, len(items) // (4 * workers))))


def _item_seed(seed: int, i: int) -> int:
    return seed * 1_000_003 + i


# ---------------------------------------------------------------------------
# per-item work


def _localize_item(spec: WorldSpec, item) -> tuple[str, Optional[str]]:
    """(true room, predicted room or None) for one query."""
    q, fov, perts, seed = item
    world, topo, _ = _world_and_map(spec)
    try:
        obs = render_observation(world, q.pose, fov)
        obs = apply_perturbations(obs, perts, seed)
        res = localize(graph_from_observation("query", obs.objects), topo)
    except _PIPELINE_ERRORS:
        return q.room_id, None
    return q.room_id, res.matched_scene_id


def _positioning_item(spec: WorldSpec, item) -> Optional[PositioningTrial]:
    q, noise, seed = item
    world, topo, _ = _world_and_map(spec)
    obs = render_observation(world, q.pose, TWO_PI)
    if noise > 0:
        obs = apply_perturbations(obs, (Perturbation.parse(f"spatial:{noise!r}"),), seed)
    try:
        query = graph_from_observation("query", obs.objects)
        loc = localize(query, topo)
        pose = estimate_pose(loc, query, topo)
    except _PIPELINE_ERRORS:
        return None
    if loc.matched_scene_id != q.room_id:
        return None
    ref = np.asarray(topo.node(loc.matched_scene_id).position)
    est = tuple(float(v) for v in ref + np.asarray(pose.shift[:2]))
    return PositioningTrial(est, (q.x, q.y), pose.orientation, q.heading)


def _se3_item(spec: WorldSpec, item) -> Optional[PositioningTrial]:
    """Random rigid motion of a stored scene, recovered from its 3D centroids."""
    room_idx, noise, seed = item
    world, topo, _ = _world_and_map(spec)
    g = topo.node(world.rooms[room_idx].id).graph
    u = g.positions(3)
    if len(u) < 3:
        return None
    rng = np.random.default_rng([seed, 3])
    R = rotation_xyz(*rng.uniform(-0.3, 0.3, 2), rng.uniform(-math.pi, math.pi))
    shift = np.append(rng.uniform(-1.5, 1.5, 2), rng.uniform(-0.2, 0.2))
    v = (u - shift) @ R
    if noise > 0:
        v = v + rng.normal(0.0, noise, v.shape)
    corr = CorrespondenceSet(u, v, g.saliencies)
    try:
        est_shift, _ = estimate_shift(corr)
        R_hat = estimate_rotation_3d(corr.shifted(est_shift))
    except (InsufficientCorrespondences, UnderdeterminedRotation):
        return None
    # geodesic angle between the true and recovered rotations
    # |R1 - R2|_F = 2 sqrt(2) sin(angle / 2); better conditioned near zero than acos
    gap = min(1.0, float(np.linalg.norm(R_hat - R)) / (2.0 * math.sqrt(2.0)))
    return PositioningTrial(tuple(est_shift), tuple(shift), 2.0 * math.asin(gap), 0.0)


def _episode_item(spec: WorldSpec, item):
    start, goal, perts, seed = item
    world, topo, tables = _world_and_map(spec)
    rec, _ = run_episode(topo, start, goal, world, NavConfig(perturbations=perts), seed=seed, tables=tables)
    return rec


# ---------------------------------------------------------------------------
# experiments


def _precision_recall(outcomes) -> tuple[float, float]:
    """Macro-averaged precision and recall over scene ids."""
    truth = sorted({t for t, _ in outcomes})
    prec, rec = [], []
    for sid in truth:
        tp = sum(1 for t, p in outcomes if t == sid and p == sid)
        pred = sum(1 for _, p in outcomes if p == sid)
        actual = sum(1 for t, _ in outcomes if t == sid)
        rec.append(tp / actual)
        if pred:
            prec.append(tp / pred)
    return (float(np.mean(prec)) if prec else 0.0), float(np.mean(rec))


def localization_outcomes(cfg: ExperimentConfig, rooms: int, fov: float = TWO_PI, perts=()) -> list:
    spec = cfg.world_spec(rooms)
    world, _, _ = _world_and_map(spec)
    poses = sample_query_poses(world, cfg.queries, cfg.seed + 1)
    items = [(q, fov, tuple(perts), _item_seed(cfg.seed, i)) for i, q in enumerate(poses)]
    return _run_items(_localize_item, spec, items, cfg.workers)


def _acc(outcomes) -> list[bool]:
    return [p == t for t, p in outcomes]


def _fov_ablation(cfg: ExperimentConfig) -> ExperimentResult:
    rows, breakdown = [], {}
    for f in cfg.fovs_deg:
        out = localization_outcomes(cfg, cfg.fov_rooms, math.radians(f))
        rep = compute_metrics(localizations=_acc(out))
        p, r = _precision_recall(out)
        rows.append({"fov_deg": f, "acc": rep.acc, "precision": p, "recall": r, "queries": len(out)})
        breakdown[f"{f:g}deg"] = rep
    table = format_table(["FOV"] + [f"{r['fov_deg']:g}deg" for r in rows],
                         [["Acc"] + [r["acc"] for r in rows],
                          ["Precision"] + [r["precision"] for r in rows],
                          ["Recall"] + [r["recall"] for r in rows]],
                         title=f"Effect of FOV ({cfg.fov_rooms} scenes, {cfg.queries} queries)")
    head = breakdown[f"{max(cfg.fovs_deg):g}deg"]
    return ExperimentResult("fov-ablation", _with_breakdown(head, breakdown), table, rows)


def _scale(cfg: ExperimentConfig) -> ExperimentResult:
    rows, breakdown = [], {}
    for n in cfg.scale_rooms:
        rep = compute_metrics(localizations=_acc(localization_outcomes(cfg, n)))
        rows.append({"scenes": n, "acc": rep.acc, "queries": cfg.queries})
        breakdown[str(n)] = rep
    table = format_table(["scenes", "Acc"], [[r["scenes"], r["acc"]] for r in rows],
                         title=f"Localization vs. number of scenes ({cfg.queries} queries each)")
    head = breakdown[str(max(cfg.scale_rooms))]
    return ExperimentResult("scale", _with_breakdown(head, breakdown), table, rows)


def navigation_episodes(cfg: ExperimentConfig, perts=()) -> list:
    spec = cfg.world_spec(cfg.nav_rooms)
    _, topo, _ = _world_and_map(spec)
    rng = np.random.default_rng([cfg.seed, 11])
    ids = topo.ids
    items = []
    for e in range(cfg.episodes):
        s, g = rng.choice(len(ids), 2, replace=False)
        items.append((ids[s], ids[g], tuple(perts), _item_seed(cfg.seed, e)))
    return _run_items(_episode_item, spec, items, cfg.workers)


def _perturbation(cfg: ExperimentConfig) -> ExperimentResult:
    rows, breakdown = [], {}
    for name in cfg.conditions:
        perts = cfg.perturbations(name)
        locs = _acc(localization_outcomes(cfg, cfg.rooms, TWO_PI, perts))
        eps = navigation_episodes(cfg, perts) if cfg.perturbation_navigation else ()
        rep = compute_metrics(episodes=eps, localizations=locs)
        rows.append({"condition": name, **rep.as_row()})
        breakdown[name] = rep
    table = format_table(["condition", "Acc", "SR", "OSR", "SPL"],
                         [[r["condition"], r["acc"], r["sr"], r["osr"], r["spl"]] for r in rows],
                         title=f"Perturbation analysis ({cfg.rooms} scenes for Acc, "
                               f"{cfg.nav_rooms} rooms / {cfg.episodes} episodes for navigation)")
    head = breakdown.get("none", next(iter(breakdown.values())))
    return ExperimentResult("perturbation", _with_breakdown(head, breakdown), table, rows)


def _positioning(cfg: ExperimentConfig) -> ExperimentResult:
    spec = cfg.world_spec(cfg.rooms)
    world, _, _ = _world_and_map(spec)
    n = cfg.positioning_trials
    poses = sample_query_poses(world, n, cfg.seed + 2)
    se2 = _run_items(_positioning_item, spec,
                     [(q, cfg.positioning_noise, _item_seed(cfg.seed, i)) for i, q in enumerate(poses)],
                     cfg.workers)
    rooms = np.random.default_rng([cfg.seed, 13]).integers(len(world.rooms), size=n)
    se3 = _run_items(_se3_item, spec,
                     [(int(r), cfg.positioning_noise, _item_seed(cfg.seed, i)) for i, r in enumerate(rooms)],
                     cfg.workers)
    rows, breakdown = [], {}
    for name, trials in (("se2-pipeline", se2), ("se3-centroids", se3)):
        ok = [t for t in trials if t is not None]
        rep = compute_metrics(positioning=ok) if ok else MetricsReport()
        rows.append({"setting": name, "instances": n, "used": len(ok),
                     "e_p": rep.e_p, "e_theta_deg": math.degrees(rep.e_theta)})
        breakdown[name] = rep
    table = format_table(["setting", "instances", "used", "E_p (m)", "E_theta (deg)"],
                         [[r["setting"], r["instances"], r["used"], r["e_p"], r["e_theta_deg"]] for r in rows],
                         title=f"Positioning recovery (noise {cfg.positioning_noise:g} m)")
    return ExperimentResult("positioning-recovery", _with_breakdown(breakdown["se2-pipeline"], breakdown),
                            table, rows)


def _navigation(cfg: ExperimentConfig) -> ExperimentResult:
    rows, breakdown = [], {}
    for name in cfg.conditions:
        rep = compute_metrics(episodes=navigation_episodes(cfg, cfg.perturbations(name)))
        rows.append({"condition": name, "sr": rep.sr, "osr": rep.osr, "spl": rep.spl, "episodes": cfg.episodes})
        breakdown[name] = rep
    table = format_table(["condition", "SR", "OSR", "SPL"],
                         [[r["condition"], r["sr"], r["osr"], r["spl"]] for r in rows],
                         title=f"Navigation ({cfg.nav_rooms} rooms, {cfg.episodes} episodes)")
    head = breakdown.get("none", next(iter(breakdown.values())))
    return ExperimentResult("navigation", _with_breakdown(head, breakdown), table, rows)


def _with_breakdown(head: MetricsReport, breakdown: dict) -> MetricsReport:
    rep = MetricsReport(**{k: v for k, v in asdict(head).items() if k != "breakdown"})
    rep.breakdown = breakdown
    return rep


EXPERIMENTS = {
    "fov-ablation": _fov_ablation,
    "scale": _scale,
    "perturbation": _perturbation,
    "positioning-recovery": _positioning,
    "navigation": _navigation,
}


def run_experiment(name: str, config: ExperimentConfig | None = None, out=None) -> ExperimentResult:
    """Run a named experiment; the headline condition fills the top-level report.

    Headline conditions: the widest FOV, the largest scene count, the
    unperturbed condition and the 2D pipeline for positioning.
    """
    if name not in EXPERIMENTS:
        raise UnknownExperiment(f"unknown experiment {name!r}; choose from {sorted(EXPERIMENTS)}")
    result = EXPERIMENTS[name](config or ExperimentConfig())
    if out is not None:
        result.save(out)
    return result
