"""Run every named experiment and write its table and rows under results/.

    python scripts/run_all.py --seed 0 --out results [--config configs/default.json] [--workers 4]
"""
import argparse
import json
import time
from pathlib import Path

from salnav.experiments import EXPERIMENTS, ExperimentConfig, run_experiment


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, required=True)
    ap.add_argument("--out", default="results")
    ap.add_argument("--config", help="JSON file of ExperimentConfig fields")
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--only", nargs="*", choices=sorted(EXPERIMENTS), help="subset of experiments")
    args = ap.parse_args()

    d = json.loads(Path(args.config).read_text()) if args.config else {}
    d.update(seed=args.seed, workers=args.workers)
    cfg = ExperimentConfig.from_dict(d)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.json").write_text(cfg.to_json() + "\n")
    for name in args.only or EXPERIMENTS:
        t0 = time.perf_counter()
        res = run_experiment(name, cfg, out=out / f"{name}.txt")
        print(res.table)
        print(f"[{name}: {time.perf_counter() - t0:.1f}s]\n")


if __name__ == "__main__":
    main()
