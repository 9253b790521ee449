"""Batch command-line front-end.

Subcommands: train | solve | evaluate | check-isaacs | report.  Every run
writes its artifacts under an output root (``--output`` or the DGRL_OUTPUT
environment variable, default ./runs) in a directory named by a hash of the
resolved configuration plus the seed, together with a manifest that makes the
run reproducible bit-for-bit.

Exit codes: 0 success, 2 usage/configuration errors, 1 runtime failures.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from . import grid_solver, qlearn
from .envs import CATALOG, get_env
from .eval_harness import EvalError, evaluate_pair, report_table
from .matrix_games import MatrixGameError
from .mesh import MeshError, default_samples, isaacs_gap, parse_mesh
from .nn import save_checkpoint
from .qlearn import TrainConfig, TrainError, build_discretized, train

USAGE_EXIT = 2
RUNTIME_EXIT = 1


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# Config handling
# ---------------------------------------------------------------------------


def load_config(path: str | None, overrides: list[str]) -> dict:
    """YAML mapping file plus dot-path ``key.sub=value`` overrides."""
    config: dict = {}
    if path is not None:
        try:
            with open(path) as fh:
                loaded = yaml.safe_load(fh)
        except FileNotFoundError:
            raise UsageError(f"config file not found: {path}")
        except yaml.YAMLError as exc:
            raise UsageError(f"config file {path} does not parse: {exc}")
        if loaded is not None:
            if not isinstance(loaded, dict):
                raise UsageError(f"config file {path} must be a mapping")
            config = loaded
    for item in overrides:
        if "=" not in item:
            raise UsageError(f"override {item!r} is not of the form key=value")
        key, raw = item.split("=", 1)
        node = config
        parts = key.split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise UsageError(f"override {key!r} descends into a scalar")
        value = yaml.safe_load(raw)
        if isinstance(value, str):
            # YAML 1.1 reads "1e-4" as a string; overrides mean numbers
            try:
                value = float(value)
            except ValueError:
                pass
        node[parts[-1]] = value
    return config


def config_hash(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:12]


def output_root(args) -> Path:
    root = args.output or os.environ.get("DGRL_OUTPUT", "runs")
    return Path(root)


def write_manifest(run_dir: Path, config: dict, seeds: list[int],
                   artifacts: dict[str, str], started: float) -> Path:
    manifest = {
        "version": __version__,
        "config": config,
        "config_hash": config_hash(config),
        "seeds": seeds,
        "artifacts": artifacts,
        "wall_clock_seconds": round(time.time() - started, 3),
    }
    path = run_dir / "manifest.json"
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def _write_episode_log(path: Path, log: list[dict]) -> None:
    with open(path, "w") as fh:
        for record in log:
            fh.write(json.dumps(record, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_train(args) -> int:
    config = load_config(args.config, args.set)
    config.setdefault("algorithm", args.algorithm)
    config.setdefault("env", args.env)
    if args.seed is not None:
        config["seed"] = args.seed
    if args.steps is not None:
        config["total_steps"] = args.steps
    if args.dt is not None:
        config["dt"] = args.dt
    if config.get("algorithm") is None or config.get("env") is None:
        raise UsageError("train needs an algorithm and an environment "
                         "(positional arguments or config keys)")
    known = {f.name for f in TrainConfig.__dataclass_fields__.values()}
    unknown = sorted(set(config) - known)
    if unknown:
        raise UsageError(f"unknown config keys: {unknown}")
    if config["algorithm"] not in qlearn.ALGORITHMS:
        raise UsageError(f"unknown algorithm {config['algorithm']!r}; known: "
                         f"{list(qlearn.ALGORITHMS)}")
    if config["env"] not in CATALOG:
        raise UsageError(f"unknown environment {config['env']!r}; known: "
                         f"{sorted(CATALOG)}")
    if "hidden" in config and config["hidden"] is not None:
        config["hidden"] = tuple(config["hidden"])

    started = time.time()
    cfg = TrainConfig(**config).resolved()
    resolved = cfg.to_dict()
    run_dir = output_root(args) / f"train-{config_hash(resolved)}-s{cfg.seed}"
    run_dir.mkdir(parents=True, exist_ok=True)

    result = train(cfg)
    artifacts = {}
    for head_name, head in result.heads.items():
        nets = getattr(head, "networks", None)
        if nets is None:
            continue
        for net_name, net in nets().items():
            fname = f"checkpoint-{head_name}-{net_name}.json"
            save_checkpoint(net, run_dir / fname)
            artifacts[f"{head_name}/{net_name}"] = fname
    _write_episode_log(run_dir / "episodes.jsonl", result.log)
    artifacts["episode_log"] = "episodes.jsonl"
    manifest = write_manifest(run_dir, resolved, [cfg.seed], artifacts,
                              started)
    final = [r["J"] for r in result.log[-20:]]
    print(f"run directory: {run_dir}")
    print(f"episodes: {len(result.log)}  "
          f"mean J (last 20): {np.mean(final):.4f}" if final else
          "no completed episodes")
    print(f"manifest: {manifest}")
    return 0


def cmd_solve(args) -> int:
    spec = get_env(args.env) if args.env in CATALOG else None
    if spec is None:
        raise UsageError(f"unknown environment {args.env!r}; known: "
                         f"{sorted(CATALOG)}")
    game = spec.make()
    if game.state_dim > grid_solver.MAX_GRID_DIM:
        raise UsageError(
            f"the grid solver supports at most {grid_solver.MAX_GRID_DIM} "
            f"state dimensions; {args.env} has {game.state_dim}")
    dt = args.dt if args.dt is not None else (spec.solve_dt or spec.dt)
    dg = qlearn.build_discretized(
        TrainConfig(algorithm="idqn", env=args.env, dt=dt))
    if args.grid is not None:
        nodes = tuple(int(n) for n in args.grid.split(","))
        if len(nodes) != game.state_dim:
            raise UsageError(f"--grid needs {game.state_dim} node counts")
        if spec.grid_ranges is not None:
            grid = grid_solver.default_grid(spec.grid_ranges, nodes)
        else:
            r = min(game.reach_radius(game.horizon) * 1.05, 1e3)
            grid = grid_solver.default_grid(((-r, r),) * game.state_dim, nodes)
    elif spec.grid_ranges is not None:
        grid = grid_solver.default_grid(spec.grid_ranges, spec.grid_nodes)
    else:
        grid = grid_solver.grid_for_game(dg)

    started = time.time()
    result = grid_solver.solve(dg, grid)
    x0 = game.initial_state
    upper0 = float(result.upper.at(0, x0))
    lower0 = float(result.lower.at(0, x0))
    run_dir = output_root(args) / f"solve-{args.env}-dt{dt:g}"
    run_dir.mkdir(parents=True, exist_ok=True)
    out = run_dir / "values.npz"
    grid_solver.save_values(out, result)
    summary = {
        "env": args.env, "dt": dt, "grid_shape": list(grid.shape),
        "upper_at_x0": upper0, "lower_at_x0": lower0,
        "gap_at_x0": upper0 - lower0,
        "max_node_gap": result.max_node_gap(0),
        "clamped_interpolations": result.clamp_count,
    }
    with open(run_dir / "summary.json", "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    write_manifest(run_dir, summary, [], {"values": "values.npz",
                                          "summary": "summary.json"}, started)
    print(f"upper(0, x0) = {upper0:.6f}")
    print(f"lower(0, x0) = {lower0:.6f}")
    print(f"gap at x0    = {upper0 - lower0:.6f}  "
          f"(max over grid: {result.max_node_gap(0):.6f})")
    print(f"values: {out}")
    return 0


def cmd_evaluate(args) -> int:
    if not args.methods:
        raise UsageError("at least one adversary method is required")
    spec = CATALOG.get(args.env)
    if spec is None:
        raise UsageError(f"unknown environment {args.env!r}; known: "
                         f"{sorted(CATALOG)}")
    dt = args.dt if args.dt is not None else (spec.solve_dt or spec.dt)
    dg = qlearn.build_discretized(
        TrainConfig(algorithm="idqn", env=args.env, dt=dt))
    # Grid-greedy policies are the built-in reference pair; checkpointed
    # network policies can be evaluated through the library API.
    if dg.game.state_dim > grid_solver.MAX_GRID_DIM:
        raise UsageError(
            "the built-in reference evaluation needs the grid solver, which "
            f"supports at most {grid_solver.MAX_GRID_DIM} state dimensions")
    if spec.grid_ranges is not None:
        grid = grid_solver.default_grid(spec.grid_ranges, spec.grid_nodes)
    else:
        grid = grid_solver.grid_for_game(dg)
    started = time.time()
    solved = grid_solver.solve(dg, grid)
    policy_u = grid_solver.GridPolicy(dg, grid, solved.upper, "u")
    policy_v = grid_solver.GridPolicy(dg, grid, solved.lower, "v")
    report = evaluate_pair((policy_u, policy_v), dg,
                           adversary_methods=tuple(args.methods),
                           repeats=args.repeats, seed=args.seed or 0,
                           dqn_budget=args.steps or 50000)
    run_dir = output_root(args) / f"evaluate-{args.env}"
    run_dir.mkdir(parents=True, exist_ok=True)
    with open(run_dir / "report.json", "w") as fh:
        json.dump(report.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    with open(run_dir / "report.csv", "w") as fh:
        fh.write(report_table({"grid_greedy": report}))
    write_manifest(run_dir, {"env": args.env, "dt": dt,
                             "methods": list(args.methods),
                             "repeats": args.repeats,
                             "seed": args.seed or 0},
                   [args.seed or 0],
                   {"report": "report.json", "table": "report.csv"}, started)
    agg = report.aggregates()
    print(f"V_u_approx per run: {[round(v, 4) for v in report.v_u_runs]}")
    print(f"V_v_approx per run: {[round(v, 4) for v in report.v_v_runs]}")
    print(f"interval (means): [{agg['v']['mean']:.4f}, {agg['u']['mean']:.4f}]")
    print(f"report: {run_dir / 'report.json'}")
    return 0


def cmd_check_isaacs(args) -> int:
    spec = CATALOG.get(args.env)
    if spec is None:
        raise UsageError(f"unknown environment {args.env!r}; known: "
                         f"{sorted(CATALOG)}")
    game = spec.make()
    u_mesh = parse_mesh(args.u_mesh or spec.u_mesh_spec, game.u_set)
    v_mesh = parse_mesh(args.v_mesh or spec.v_mesh_spec, game.v_set)
    if args.samples is not None and args.samples < 1:
        raise UsageError("--samples must be positive")
    samples = default_samples(game, count=args.samples or 200,
                              rng=np.random.default_rng(args.seed or 0))
    gap, witness = isaacs_gap(game, u_mesh, v_mesh, samples)
    print(f"max minmax-maximin gap over {len(samples)} samples: {gap:.6e}")
    if gap > 0:
        t, x, s = witness
        print(f"witness: t={t:.4f} x={np.array2string(x, precision=4)} "
              f"s={np.array2string(s, precision=4)}")
    print("saddle point exists on the sampled small games" if gap == 0.0
          else "Isaacs's condition fails on the sampled small games")
    return 0


def cmd_report(args) -> int:
    rows = []
    header = None
    for result_dir in args.dirs:
        path = Path(result_dir)
        if not path.is_dir():
            raise UsageError(f"result directory not found: {path}")
        csv_path = path / "report.csv"
        if not csv_path.exists():
            raise UsageError(f"no report.csv under {path}")
        lines = csv_path.read_text().strip().splitlines()
        if header is None:
            header = lines[0]
        rows.extend(lines[1:])
    table = (header or "") + "\n" + "\n".join(rows) + "\n"
    if args.out:
        Path(args.out).write_text(table)
        print(f"wrote {args.out} ({len(rows)} rows)")
    else:
        sys.stdout.write(table)
    return 0


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dgrl",
        description="Deep Q-learning and exact grid solving for zero-sum "
                    "positional differential games.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--output", help="output root (default $DGRL_OUTPUT "
                                        "or ./runs)")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--dt", type=float, default=None)

    p = sub.add_parser("train", help="train a Q-learning algorithm")
    p.add_argument("algorithm", nargs="?", default=None,
                   choices=list(qlearn.ALGORITHMS) + [None])
    p.add_argument("env", nargs="?", default=None)
    p.add_argument("--config", help="YAML config file")
    p.add_argument("--set", action="append", default=[],
                   metavar="KEY=VALUE", help="dot-path config override")
    p.add_argument("--steps", type=int, default=None)
    common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("solve", help="exact backward-induction value grids")
    p.add_argument("env")
    p.add_argument("--grid", help="comma-separated node counts per dimension")
    common(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("evaluate",
                       help="adversarial evaluation of grid-greedy policies")
    p.add_argument("env")
    p.add_argument("--methods", nargs="+", default=["grid_best_response"],
                   help="adversary methods")
    p.add_argument("--repeats", type=int, default=5)
    p.add_argument("--steps", type=int, default=None,
                   help="DQN best-response budget")
    common(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("check-isaacs",
                       help="minmax/maximin gap of sampled small games")
    p.add_argument("env")
    p.add_argument("--u-mesh", dest="u_mesh", default=None)
    p.add_argument("--v-mesh", dest="v_mesh", default=None)
    p.add_argument("--samples", type=int, default=None)
    common(p)
    p.set_defaults(func=cmd_check_isaacs)

    p = sub.add_parser("report", help="aggregate evaluation tables")
    p.add_argument("dirs", nargs="+")
    p.add_argument("--out", help="write the merged table here")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse uses exit code 2 for usage errors already
        return int(exc.code or 0)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_EXIT
    except (TrainError, MeshError, MatrixGameError, EvalError,
            grid_solver.GridError, KeyError, ValueError) as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return RUNTIME_EXIT


if __name__ == "__main__":
    sys.exit(main())
