"""Command-line entry point: ``salnav <subcommand> ...``.

Exit codes: 0 on success, 2 when the pipeline itself fails on valid input
(no candidate scene, navigation failure, ...), 1 on usage and I/O errors.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

from .errors import CorruptMap, SalnavError, UnknownExperiment, UnsupportedVersion
from .experiments import ExperimentConfig, run_experiment
from .localization import localize
from .navigation import NavConfig, navigate
from .positioning import estimate_pose
from .scene import graph_from_observation, read_observation, write_observation
from .topomap import load_map, map_world_ref, save_map
from .world import (
    Perturbation,
    WorldSpec,
    build_map,
    generate_world,
    load_world,
    render_observation,
    sample_query_poses,
    save_world,
)

# failures of the inputs rather than of the method
_IO_ERRORS = (CorruptMap, UnsupportedVersion, UnknownExperiment)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def parse_noise(text: str) -> tuple[Perturbation, ...]:
    """``none`` or a comma list such as ``orientation:10deg,drop:0.5``."""
    text = text.strip()
    if text.lower() in ("", "none"):
        return ()
    try:
        return tuple(Perturbation.parse(p) for p in text.split(",") if p.strip())
    except ValueError as exc:
        raise UsageError(f"bad --noise spec {text!r}: {exc}") from exc


def _query_graph(path):
    return graph_from_observation(Path(path).stem, read_observation(path))


def cmd_gen_world(args) -> int:
    d = json.loads(Path(args.spec).read_text()) if args.spec else {}
    d["seed"] = args.seed
    world = generate_world(WorldSpec.from_dict(d))
    poses = sample_query_poses(world, args.queries, args.seed + 1) if args.queries else []
    out = Path(args.out)
    save_world(world, out, poses)
    if poses:
        (out / "queries").mkdir(exist_ok=True)
    for i, q in enumerate(poses):
        obs = render_observation(world, q.pose, math.radians(args.fov))
        write_observation(out / "queries" / f"q{i:03d}.obs", obs.objects,
                          header=f"query in {q.room_id} at x={q.x:.6f} y={q.y:.6f} heading={q.heading:.6f}")
    print(f"world: {len(world.rooms)} rooms, {len(world.doors)} doors, "
          f"grid {world.grid.width}x{world.grid.height} -> {out}")
    return 0


def cmd_build_map(args) -> int:
    world, _ = load_world(args.world)
    topo = build_map(world)
    save_map(topo, args.out, world_ref=str(Path(args.world).resolve()))
    n_scene = len(topo.scene_nodes())
    print(f"map: {n_scene} scene nodes, {len(topo.nodes) - n_scene} transition nodes, "
          f"{int(topo.adjacency.sum()) // 2} edges -> {args.out}")
    return 0


def cmd_localize(args) -> int:
    topo = load_map(args.map)
    res = localize(_query_graph(args.obs), topo)
    print(f"scene {res.matched_scene_id}")
    print(f"score {res.triplet_score:.6f}")
    print("candidates " + " ".join(f"{sid}:{s:.6f}" for sid, s in res.candidate_scores))
    return 0


def cmd_pose(args) -> int:
    topo = load_map(args.map)
    query = _query_graph(args.obs)
    res = localize(query, topo)
    pose = estimate_pose(res, query, topo)
    print(f"scene {res.matched_scene_id}")
    print("shift " + " ".join(f"{v:.6f}" for v in pose.shift))
    print(f"orientation {pose.orientation:.6f} rad ({math.degrees(pose.orientation):.3f} deg)")
    print(f"determinate {'yes' if pose.shift_determinate else 'no'} (rank {pose.rank})")
    return 0


def cmd_navigate(args) -> int:
    topo = load_map(args.map)
    world_dir = args.world or map_world_ref(args.map)
    if world_dir is None:
        raise UsageError("no --world given and the map records no world directory")
    world, _ = load_world(world_dir)
    cfg = NavConfig(perturbations=parse_noise(args.noise), fov=math.radians(args.fov))
    trace = navigate(topo, args.start, args.goal, world, cfg, seed=args.seed)
    _emit_trace(trace, args.trace)
    print(f"success path {' '.join(trace.planned_path)} shortest {trace.shortest_length:.3f} "
          f"actual {trace.actual_length:.3f}")
    return 0


def _emit_trace(trace, path):
    if path:
        trace.save(path)
    else:
        sys.stdout.write(trace.dump())


def cmd_evaluate(args) -> int:
    d = json.loads(Path(args.config).read_text()) if args.config else {}
    d["seed"] = args.seed
    if args.workers:
        d["workers"] = args.workers
    result = run_experiment(args.experiment, ExperimentConfig.from_dict(d), out=args.out)
    sys.stdout.write(result.table)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="salnav", description="Saliency-graph localization and topological navigation.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("gen-world", help="generate a synthetic building")
    s.add_argument("--spec", help="JSON file of WorldSpec fields (defaults if omitted)")
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--queries", type=int, default=0, help="also write this many query observations")
    s.add_argument("--fov", type=float, default=360.0, help="query field of view in degrees")
    s.set_defaults(func=cmd_gen_world)

    s = sub.add_parser("build-map", help="build the topological map of a world")
    s.add_argument("--world", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_build_map)

    for name, fn, text in (("localize", cmd_localize, "match an observation against the map"),
                           ("pose", cmd_pose, "estimate the shift and orientation of an observation")):
        s = sub.add_parser(name, help=text)
        s.add_argument("--map", required=True)
        s.add_argument("--obs", required=True)
        s.set_defaults(func=fn)

    s = sub.add_parser("navigate", help="run one navigation episode")
    s.add_argument("--map", required=True)
    s.add_argument("--start", required=True)
    s.add_argument("--goal", required=True)
    s.add_argument("--noise", default="none", help="none, or e.g. orientation:10deg,drop:0.5")
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--world", help="world directory (default: the one recorded in the map)")
    s.add_argument("--fov", type=float, default=360.0)
    s.add_argument("--trace", help="write the trace here instead of stdout")
    s.set_defaults(func=cmd_navigate)

    s = sub.add_parser("evaluate", help="run a named experiment")
    s.add_argument("--experiment", required=True)
    s.add_argument("--config", help="JSON file of ExperimentConfig fields")
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--out", help="write the table here (rows go to <out>.jsonl)")
    s.add_argument("--workers", type=int, default=0)
    s.set_defaults(func=cmd_evaluate)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except _IO_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except SalnavError as exc:
        trace = getattr(exc, "trace", None)
        if trace is not None and getattr(args, "trace", None):
            trace.save(args.trace)
        print(f"failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
