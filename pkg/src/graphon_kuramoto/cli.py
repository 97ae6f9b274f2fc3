"""Command-line experiment runner.

    graphon-kuramoto simulate --config configs/dense_kuramoto.yaml --out runs/dense
    graphon-kuramoto sweep --config configs/sweep_boundary.yaml --out runs/boundary

Every run writes ``summary.json`` plus the experiment's CSV/PGM artifacts into
the output directory. Failures exit nonzero with an error JSON on stderr.
"""
from __future__ import annotations

import argparse
import json
import sys
from importlib import resources
from pathlib import Path
from typing import Optional

import jsonschema
import yaml

from .analysis import to_json
from .errors import ConfigError
from .experiments import ExperimentResult, build_layers, derive_seed, run_experiment  # noqa: F401
from .network import realize, write_binary, write_edge_csv, write_pgm

SUBCOMMANDS = {
    "simulate": ("simulate", "averaged-compare"),
    "sync": ("sync-solve",),
    "stability": ("stability",),
    "design": ("design",),
    "sweep": ("sweep-delta", "sweep-boundary"),
    "matrix": None,
    "run": None,
}


def load_schema() -> dict:
    text = resources.files(__package__).joinpath("config_schema.json").read_text()
    return json.loads(text)


def _node_line(root, path) -> Optional[int]:
    """1-based line of the YAML node at ``path`` (falls back to the nearest parent)."""
    node, line = root, None
    for key in path:
        if node is None:
            break
        line = node.start_mark.line + 1
        if isinstance(node, yaml.MappingNode):
            node = next((v for k, v in node.value if k.value == key), None)
        elif isinstance(node, yaml.SequenceNode) and isinstance(key, int) and key < len(node.value):
            node = node.value[key]
        else:
            node = None
    return node.start_mark.line + 1 if node is not None else line


def parse_config(text: str, source: str = "<config>") -> dict:
    """Parse YAML and validate against the packaged schema."""
    try:
        cfg = yaml.safe_load(text)
        root = yaml.compose(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        line = mark.line + 1 if mark is not None else None
        raise ConfigError(f"{source}: YAML parse error: {exc}", line=line) from exc
    if not isinstance(cfg, dict):
        raise ConfigError(f"{source}: top level must be a mapping", line=1)
    validator = jsonschema.Draft202012Validator(load_schema())
    errors = sorted(validator.iter_errors(cfg), key=lambda e: list(map(str, e.absolute_path)))
    if errors:
        err = errors[0]
        path = list(err.absolute_path)
        field = ".".join(str(p) for p in path) or "<root>"
        raise ConfigError(f"{source}: {field}: {err.message}", field=field,
                          line=_node_line(root, path))
    return cfg


def load_config(path) -> dict:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {p}: {exc}") from exc
    return parse_config(text, str(p))


def write_result(res: ExperimentResult, out: Path) -> list[str]:
    out.mkdir(parents=True, exist_ok=True)
    to_json(res.summary, out / "summary.json")
    names = ["summary.json"]
    for name, fn in res.writers:
        fn(out / name)
        names.append(name)
    return names


def _matrix_command(cfg: dict, seed: int, threads: int, out: Path) -> ExperimentResult:
    num = cfg.get("numerics") or {}
    if "n" not in num:
        raise ConfigError("matrix export needs numerics.n", field="numerics.n")
    n = int(num["n"])
    layers = build_layers(cfg.get("system") or {})
    res = ExperimentResult({"experiment": "matrix", "n": n, "seed": seed, "layers": []})
    for k, layer in enumerate(layers):
        m = realize(layer, n, seed, threads=threads)
        res.summary["layers"].append({"layer": k, "construction": m.construction, "alpha": m.alpha,
                                      "nnz": m.nnz(), "density": m.density()})
        res.add(f"matrix_{k}.pgm", lambda p, m=m: write_pgm(m, p))
        res.add(f"matrix_{k}.csv", lambda p, m=m: write_edge_csv(m, p))
        res.add(f"matrix_{k}.bin", lambda p, m=m: write_binary(m, p))
    return res


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="graphon-kuramoto",
                                     description="Run oscillator-network experiments from YAML configs.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="YAML experiment config")
        p.add_argument("--seed", type=int, default=None, help="overrides the config seed (u64)")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--threads", type=int, default=1, help="worker threads for graph sampling")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))
        if not 0 <= seed < 2 ** 64:
            raise ConfigError("seed must be an unsigned 64-bit integer", field="seed")
        if args.threads < 1:
            raise ConfigError("--threads must be >= 1", field="threads")
        out = Path(args.out or cfg.get("output") or "out")
        allowed = SUBCOMMANDS[args.command]
        if args.command == "matrix":
            res = _matrix_command(cfg, seed, args.threads, out)
        else:
            if allowed is not None and cfg["experiment"] not in allowed:
                raise ConfigError(f"subcommand {args.command!r} cannot run experiment "
                                  f"{cfg['experiment']!r}", field="experiment")
            res = run_experiment(cfg, seed, args.threads)
        files = write_result(res, out)
    except Exception as exc:  # reported as machine-readable JSON
        err = {"error": type(exc).__name__, "message": str(exc)}
        for attr in ("field", "line", "t", "window", "condition", "witness"):
            if getattr(exc, attr, None) is not None:
                err[attr] = getattr(exc, attr)
        sys.stderr.write(json.dumps(err, sort_keys=True) + "\n")
        return 2 if isinstance(exc, ConfigError) else 1
    sys.stdout.write(json.dumps({"out": str(out), "files": files}) + "\n")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
