"""Adversarial robustness evaluation of trained policy pairs.

Protocol: freeze one agent's policy, attack it with a set of adversary
construction methods (exact grid best response on low-dimensional games,
single-agent DQN best responses over several hyperparameter draws, random
open-loop search), and record the extreme quality index achieved.  Repeating
both directions over several seeds yields the interval

    [V_v_approx, V_u_approx]

whose width upper-bounds how far the pair is from a saddle point; the per-run
difference V_u_approx - V_v_approx is reported as the exploitability.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from . import grid_solver
from .envs import CATALOG
from .games import DiscretizedGame, rollout
from .qlearn import train_best_response

Array = np.ndarray

METHODS = ("grid_best_response", "dqn_best_response", "random_search")

DQN_HYPER_GRID = tuple(itertools.product((1e-3, 1e-4),
                                         ((256, 128), (128, 64))))


class EvalError(Exception):
    pass


@dataclass
class EvalReport:
    """Per-run adversarial extremes and their aggregates.

    ``v_u_runs[r]`` is the maximum J any adversary achieved against the
    frozen first (minimizing) agent in run r; ``v_v_runs[r]`` the minimum J
    achieved against the frozen second agent.  For the minimizer smaller is
    better, so best_u = min over runs; the v-side ordering is mirrored.
    """

    env: str
    methods: tuple[str, ...]
    v_u_runs: list[float]
    v_v_runs: list[float]
    per_method_u: dict[str, list[float]] = field(default_factory=dict)
    per_method_v: dict[str, list[float]] = field(default_factory=dict)

    @property
    def exploitability(self) -> list[float]:
        return [vu - vv for vu, vv in zip(self.v_u_runs, self.v_v_runs)]

    def _agg(self, runs, better):
        return {"best": better(runs), "mean": float(np.mean(runs)),
                "worst": max(runs) if better is min else min(runs)}

    def aggregates(self) -> dict[str, dict[str, float]]:
        return {"u": self._agg(self.v_u_runs, min),
                "v": self._agg(self.v_v_runs, max)}

    def to_dict(self) -> dict:
        return {"env": self.env, "methods": list(self.methods),
                "v_u_runs": self.v_u_runs, "v_v_runs": self.v_v_runs,
                "exploitability": self.exploitability,
                "aggregates": self.aggregates(),
                "per_method_u": self.per_method_u,
                "per_method_v": self.per_method_v}


def _rollout_j(dg: DiscretizedGame, policy_u, policy_v) -> float:
    _, j = rollout(dg, policy_u, policy_v)
    return float(j)


def _paired(dg, frozen, frozen_side, adversary):
    if frozen_side == "u":
        return _rollout_j(dg, frozen, adversary)
    return _rollout_j(dg, adversary, frozen)


def _state_grid_for(dg: DiscretizedGame) -> grid_solver.StateGrid:
    spec = CATALOG.get(dg.game.name)
    if spec is not None and spec.grid_ranges is not None:
        lows = [lo for lo, _ in spec.grid_ranges]
        highs = [hi for _, hi in spec.grid_ranges]
        return grid_solver.StateGrid(tuple(lows), tuple(highs),
                                     tuple(spec.grid_nodes))
    return grid_solver.grid_for_game(dg)


def grid_best_response(frozen, dg: DiscretizedGame, frozen_side: str,
                       grid: grid_solver.StateGrid | None = None) -> float:
    """Exact (up to interpolation) best response via backward induction."""
    if dg.game.state_dim > grid_solver.MAX_GRID_DIM:
        raise EvalError(
            f"grid_best_response supports at most {grid_solver.MAX_GRID_DIM} "
            f"state dimensions; {dg.game.name} has {dg.game.state_dim}")
    if grid is None:
        grid = _state_grid_for(dg)
    values, _ = grid_solver.best_response_value(dg, grid, frozen, frozen_side)
    adversary = grid_solver.BestResponsePolicy(dg, grid, values, frozen,
                                               frozen_side)
    return _paired(dg, frozen, frozen_side, adversary)


def dqn_best_response(frozen, dg: DiscretizedGame, frozen_side: str,
                      hyper_draws: int = 2, budget: int = 50000,
                      seed: int = 0) -> float:
    """Extreme J over several single-agent DQN best-response draws.

    Draws cycle through a small lr x hidden-width grid; each trains a
    double-DQN against the frozen policy and is scored by one deterministic
    greedy rollout.
    """
    if hyper_draws < 1:
        raise EvalError("hyper_draws must be >= 1")
    results = []
    for draw in range(hyper_draws):
        lr, hidden = DQN_HYPER_GRID[draw % len(DQN_HYPER_GRID)]
        adversary, _ = train_best_response(
            dg, frozen, frozen_side, hidden=hidden, lr=lr,
            total_steps=budget, seed=seed + draw)
        results.append(_paired(dg, frozen, frozen_side, adversary))
    return max(results) if frozen_side == "u" else min(results)


def random_search(frozen, dg: DiscretizedGame, frozen_side: str,
                  trials: int = 200, seed: int = 0) -> float:
    """Extreme J over uniformly random open-loop adversary index sequences."""
    if trials < 1:
        raise EvalError("trials must be >= 1")
    rng = np.random.default_rng(seed)
    mesh = dg.v_mesh if frozen_side == "u" else dg.u_mesh
    extreme = None
    for _ in range(trials):
        seq = rng.integers(len(mesh), size=dg.m + 1)
        adversary = lambda i, x, _seq=seq: int(_seq[i])
        j = _paired(dg, frozen, frozen_side, adversary)
        if extreme is None:
            extreme = j
        elif frozen_side == "u":
            extreme = max(extreme, j)
        else:
            extreme = min(extreme, j)
    return extreme


_ATTACKS = {
    "grid_best_response": lambda frozen, dg, side, seed, budget:
        grid_best_response(frozen, dg, side),
    "dqn_best_response": lambda frozen, dg, side, seed, budget:
        dqn_best_response(frozen, dg, side, budget=budget, seed=seed),
    "random_search": lambda frozen, dg, side, seed, budget:
        random_search(frozen, dg, side, seed=seed),
}


def evaluate_pair(policies, dg: DiscretizedGame,
                  adversary_methods=("grid_best_response",),
                  repeats: int = 5, seed: int = 0,
                  dqn_budget: int = 50000) -> EvalReport:
    """Attack both frozen policies with every requested method, repeated.

    ``policies`` is the (policy_u, policy_v) pair; each run uses a distinct
    seed for the stochastic methods.  V_u_approx per run is the maximum J
    over all adversary attempts against policy_u; V_v_approx the symmetric
    minimum against policy_v.
    """
    policy_u, policy_v = policies
    methods = tuple(adversary_methods)
    if not methods:
        raise EvalError("at least one adversary method is required")
    unknown = [m for m in methods if m not in _ATTACKS]
    if unknown:
        raise EvalError(f"unknown adversary methods {unknown}; known: "
                        f"{sorted(_ATTACKS)}")
    if ("grid_best_response" in methods
            and dg.game.state_dim > grid_solver.MAX_GRID_DIM):
        raise EvalError(
            f"grid_best_response supports at most {grid_solver.MAX_GRID_DIM} "
            f"state dimensions; {dg.game.name} has {dg.game.state_dim}")

    per_u = {m: [] for m in methods}
    per_v = {m: [] for m in methods}
    v_u_runs, v_v_runs = [], []
    for run in range(repeats):
        run_seed = seed + 1000 * run
        attempts_u, attempts_v = [], []
        for method in methods:
            attack = _ATTACKS[method]
            ju = attack(policy_u, dg, "u", run_seed, dqn_budget)
            jv = attack(policy_v, dg, "v", run_seed, dqn_budget)
            per_u[method].append(ju)
            per_v[method].append(jv)
            attempts_u.append(ju)
            attempts_v.append(jv)
        v_u_runs.append(max(attempts_u))
        v_v_runs.append(min(attempts_v))
    return EvalReport(dg.game.name, methods, v_u_runs, v_v_runs, per_u, per_v)


def report_table(reports: dict[str, EvalReport]) -> str:
    """Flat comma-separated table (one row per labelled report) with the
    best/mean/worst aggregates of both sides."""
    lines = ["label,env,best_u,mean_u,worst_u,best_v,mean_v,worst_v,"
             "mean_exploitability"]
    for label, rep in reports.items():
        agg = rep.aggregates()
        lines.append(",".join([
            label, rep.env,
            *(f"{agg['u'][k]:.6g}" for k in ("best", "mean", "worst")),
            *(f"{agg['v'][k]:.6g}" for k in ("best", "mean", "worst")),
            f"{float(np.mean(rep.exploitability)):.6g}",
        ]))
    return "\n".join(lines) + "\n"
