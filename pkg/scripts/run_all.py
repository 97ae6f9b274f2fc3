"""Run every checked-in config and collect the summaries.

    python3 scripts/run_all.py --out runs [--n 200] [--only dense_kuramoto controlled]

``--n`` overrides numerics.n for single-size experiments (desk-scale runs).
Writes runs/<config>/... per config plus runs/index.json.
"""
import argparse
import json
import sys
import time
from pathlib import Path

from graphon_kuramoto.cli import load_config, write_result
from graphon_kuramoto.experiments import run_experiment

ROOT = Path(__file__).resolve().parent.parent


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--configs", default=str(ROOT / "configs"))
    p.add_argument("--out", default="runs")
    p.add_argument("--n", type=int, default=None, help="override numerics.n where present")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--only", nargs="*", default=None, help="config stems to run")
    args = p.parse_args(argv)

    out = Path(args.out)
    index = {}
    for path in sorted(Path(args.configs).glob("*.yaml")):
        if args.only and path.stem not in args.only:
            continue
        cfg = load_config(path)
        if args.n is not None and "n" in (cfg.get("numerics") or {}):
            cfg["numerics"]["n"] = args.n
        t = time.perf_counter()
        res = run_experiment(cfg, threads=args.threads)
        files = write_result(res, out / path.stem)
        index[path.stem] = {"seconds": round(time.perf_counter() - t, 2), "files": files}
        print(f"{path.stem}: {index[path.stem]['seconds']} s", file=sys.stderr)
    out.mkdir(parents=True, exist_ok=True)
    (out / "index.json").write_text(json.dumps(index, indent=2, sort_keys=True) + "\n")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
