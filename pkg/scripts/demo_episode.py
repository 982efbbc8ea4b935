"""Generate a world, build its map and drive one episode, printing the trace.

    python scripts/demo_episode.py --seed 0 [--rooms 12] [--noise orientation:10deg]
"""
import argparse

import numpy as np

from salnav.cli import parse_noise
from salnav.navigation import NavConfig, floyd_warshall, run_episode
from salnav.world import WorldSpec, build_map, generate_world


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, required=True)
    ap.add_argument("--rooms", type=int, default=12)
    ap.add_argument("--noise", default="none")
    args = ap.parse_args()

    world = generate_world(WorldSpec(seed=args.seed, rooms=args.rooms))
    topo = build_map(world)
    tables = floyd_warshall(topo)
    ids = [nd.id for nd in topo.scene_nodes()]
    a, b = np.random.default_rng(args.seed).choice(len(ids), 2, replace=False)
    rec, trace = run_episode(topo, ids[a], ids[b], world, NavConfig(perturbations=parse_noise(args.noise)),
                             seed=args.seed, tables=tables)
    print(trace.dump(), end="")
    print(f"planned {' '.join(trace.planned_path)}")
    print(f"success {rec.success} oracle {rec.oracle_success} "
          f"shortest {rec.shortest_length:.3f} actual {rec.actual_length:.3f}")


if __name__ == "__main__":
    main()
