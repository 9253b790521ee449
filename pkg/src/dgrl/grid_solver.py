"""Exact backward induction for the discretized game on interpolated state
grids: upper (minimax) and lower (maximin) value tables, Q-matrices, greedy
policy extraction, and best-response evaluation against a frozen policy.

Only practical for state_dim <= 3; higher-dimensional games are evaluated by
learned best responses instead.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.ndimage import map_coordinates

from .games import DiscretizedGame, GameError

Array = np.ndarray

MAX_GRID_DIM = 3


class GridError(Exception):
    pass


@dataclass(frozen=True)
class StateGrid:
    """Uniform rectangular grid with multilinear interpolation.

    Out-of-range queries are clamped to the boundary; callers receive clamp
    counts and should treat nonzero counts as a sign the ranges are too small.
    """

    lows: tuple[float, ...]
    highs: tuple[float, ...]
    shape: tuple[int, ...]

    def __post_init__(self):
        if not (len(self.lows) == len(self.highs) == len(self.shape)):
            raise GridError("grid dims mismatch")
        if len(self.shape) > MAX_GRID_DIM:
            raise GridError(
                f"state grids support at most {MAX_GRID_DIM} dimensions")
        if any(n < 2 for n in self.shape):
            raise GridError("need at least 2 nodes per dimension")
        if any(lo >= hi for lo, hi in zip(self.lows, self.highs)):
            raise GridError("empty grid range")

    @property
    def ndim(self) -> int:
        return len(self.shape)

    @property
    def spacing(self) -> Array:
        return (np.asarray(self.highs) - np.asarray(self.lows)) / (
            np.asarray(self.shape) - 1)

    @property
    def num_nodes(self) -> int:
        return int(np.prod(self.shape))

    def axes(self) -> list[Array]:
        return [np.linspace(lo, hi, n)
                for lo, hi, n in zip(self.lows, self.highs, self.shape)]

    def nodes(self) -> Array:
        """All grid nodes as an (N, n) array in C order."""
        mesh = np.meshgrid(*self.axes(), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def _index_coords(self, points: Array) -> Array:
        pts = np.asarray(points, dtype=float)
        return ((pts - np.asarray(self.lows)) / self.spacing).T

    def interpolate(self, table: Array, points: Array) -> tuple[Array, int]:
        """Multilinear interpolation of node values at query points.

        Returns (values, number of clamped query points).
        """
        coords = self._index_coords(points)
        upper = np.asarray(self.shape) - 1
        clamped = int(np.count_nonzero(
            np.any((coords.T < -1e-12) | (coords.T > upper + 1e-12), axis=-1)))
        values = map_coordinates(table, coords, order=1, mode="nearest")
        return values, clamped


@dataclass
class ValueGrid:
    """Per-partition-time value tables over a state grid."""

    kind: str  # "upper", "lower", or "best_response_{u,v}"
    grid: StateGrid
    times: Array
    tables: list[Array]

    def at(self, i: int, x) -> float:
        value, _ = self.grid.interpolate(self.tables[i], np.atleast_2d(x))
        return float(value[0])


@dataclass
class SolveResult:
    upper: ValueGrid
    lower: ValueGrid
    clamp_count: int

    def gap_at(self, i: int, x) -> float:
        return self.upper.at(i, x) - self.lower.at(i, x)

    def max_node_gap(self, i: int = 0) -> float:
        return float(np.max(self.upper.tables[i] - self.lower.tables[i]))


def _dynamics_step(dg: DiscretizedGame, i: int, states: Array, u, v
                   ) -> tuple[Array, Array]:
    """Euler next states and per-node rewards for all grid nodes at once."""
    t = float(dg.partition.times[i])
    dt = float(dg.partition.deltas[i])
    f = np.asarray(dg.game.dynamics(t, states, u, v), dtype=float)
    f0 = np.asarray(dg.game.running_cost(t, states, u, v), dtype=float)
    nxt = states + dt * f
    reward = dt * np.broadcast_to(f0, states.shape[:-1])
    return nxt, reward


def solve(dg: DiscretizedGame, grid: StateGrid) -> SolveResult:
    """Backward induction of upper (minmax) and lower (maximin) values.

    V(t_{m+1}, node) = sigma(node); one Euler step plus interpolation of the
    next slice everywhere else.
    """
    nodes = grid.nodes()
    nu, nv = len(dg.u_mesh), len(dg.v_mesh)
    sigma = np.asarray(dg.game.terminal_cost(nodes), dtype=float)
    upper_tables = [None] * (dg.m + 2)
    lower_tables = [None] * (dg.m + 2)
    upper_tables[dg.m + 1] = sigma.reshape(grid.shape)
    lower_tables[dg.m + 1] = sigma.reshape(grid.shape)
    clamps = 0

    q_upper = np.empty((nu, nv, nodes.shape[0]))
    q_lower = np.empty((nu, nv, nodes.shape[0]))
    for i in range(dg.m, -1, -1):
        for iu in range(nu):
            u = dg.u_action(iu)
            for iv in range(nv):
                v = dg.v_action(iv)
                nxt, reward = _dynamics_step(dg, i, nodes, u, v)
                vals_u, c1 = grid.interpolate(upper_tables[i + 1], nxt)
                vals_l, c2 = grid.interpolate(lower_tables[i + 1], nxt)
                clamps += c1 + c2
                q_upper[iu, iv] = reward + vals_u
                q_lower[iu, iv] = reward + vals_l
        upper_tables[i] = q_upper.max(axis=1).min(axis=0).reshape(grid.shape)
        lower_tables[i] = q_lower.min(axis=0).max(axis=0).reshape(grid.shape)

    times = dg.partition.times
    return SolveResult(ValueGrid("upper", grid, times, upper_tables),
                       ValueGrid("lower", grid, times, lower_tables),
                       clamps)


def q_values(dg: DiscretizedGame, grid: StateGrid, values: ValueGrid,
             i: int, x) -> Array:
    """Q(t_i, x, u, v) = dt f0 + values(t_{i+1}, x + dt f) on the meshes."""
    if not 0 <= i <= dg.m:
        raise GridError(f"time index {i} out of range")
    x = np.asarray(x, dtype=float)
    nu, nv = len(dg.u_mesh), len(dg.v_mesh)
    q = np.empty((nu, nv))
    for iu in range(nu):
        for iv in range(nv):
            nxt, reward = _dynamics_step(
                dg, i, x[None, :], dg.u_action(iu), dg.v_action(iv))
            vals, _ = grid.interpolate(values.tables[i + 1], nxt)
            q[iu, iv] = reward[0] + vals[0]
    return q


def _batch_q(dg: DiscretizedGame, grid: StateGrid, table: Array, i: int,
             states: Array) -> Array:
    """(Nu, Nv, N) one-step Q-values against a single next-value table."""
    nu, nv = len(dg.u_mesh), len(dg.v_mesh)
    q = np.empty((nu, nv, states.shape[0]))
    for iu in range(nu):
        for iv in range(nv):
            nxt, reward = _dynamics_step(
                dg, i, states, dg.u_action(iu), dg.v_action(iv))
            vals, _ = grid.interpolate(table, nxt)
            q[iu, iv] = reward + vals
    return q


class GridPolicy:
    """Greedy pure policy extracted from solved value tables.

    The u side plays argmin_u max_v of the upper-value Q-matrix, the v side
    argmax_v min_u of the lower-value one; ties break to the lowest index.
    """

    def __init__(self, dg: DiscretizedGame, grid: StateGrid,
                 values: ValueGrid, side: str):
        if side not in ("u", "v"):
            raise GridError("side must be 'u' or 'v'")
        self.dg = dg
        self.grid = grid
        self.values = values
        self.side = side

    def actions(self, i: int, states: Array) -> Array:
        q = _batch_q(self.dg, self.grid, self.values.tables[i + 1], i,
                     np.atleast_2d(states))
        if self.side == "u":
            return np.argmin(q.max(axis=1), axis=0)
        return np.argmax(q.min(axis=0), axis=0)

    def __call__(self, i: int, x) -> int:
        return int(self.actions(i, np.atleast_2d(x))[0])


def best_response_value(dg: DiscretizedGame, grid: StateGrid, frozen,
                        frozen_side: str) -> tuple[ValueGrid, int]:
    """Backward induction with one agent frozen to a given policy.

    ``frozen`` maps (i, states (N, n)) -> action indices via ``actions`` (or
    is called pointwise).  With frozen_side "u" the free v agent maximizes and
    the value at (0, x0) approximates the guaranteed result of the frozen u
    policy; symmetric for "v".
    """
    if frozen_side not in ("u", "v"):
        raise GridError("frozen_side must be 'u' or 'v'")
    nodes = grid.nodes()
    free_mesh = dg.v_mesh if frozen_side == "u" else dg.u_mesh
    sigma = np.asarray(dg.game.terminal_cost(nodes), dtype=float)
    tables = [None] * (dg.m + 2)
    tables[dg.m + 1] = sigma.reshape(grid.shape)
    clamps = 0

    for i in range(dg.m, -1, -1):
        frozen_idx = _policy_actions(frozen, i, nodes)
        vals = np.empty((len(free_mesh), nodes.shape[0]))
        for a in range(len(free_mesh)):
            if frozen_side == "u":
                u = dg.u_mesh.points[frozen_idx]
                v = dg.v_action(a)
            else:
                u = dg.u_action(a)
                v = dg.v_mesh.points[frozen_idx]
            nxt, reward = _dynamics_step(dg, i, nodes, u, v)
            interp, c = grid.interpolate(tables[i + 1], nxt)
            clamps += c
            vals[a] = reward + interp
        best = vals.max(axis=0) if frozen_side == "u" else vals.min(axis=0)
        tables[i] = best.reshape(grid.shape)

    kind = "best_response_v" if frozen_side == "u" else "best_response_u"
    return ValueGrid(kind, grid, dg.partition.times, tables), clamps


class BestResponsePolicy:
    """Greedy free-agent policy from best_response_value tables, playable at
    arbitrary (off-grid) states."""

    def __init__(self, dg: DiscretizedGame, grid: StateGrid,
                 response: ValueGrid, frozen, frozen_side: str):
        self.dg = dg
        self.grid = grid
        self.response = response
        self.frozen = frozen
        self.frozen_side = frozen_side

    def actions(self, i: int, states: Array) -> Array:
        states = np.atleast_2d(states)
        frozen_idx = _policy_actions(self.frozen, i, states)
        free_mesh = self.dg.v_mesh if self.frozen_side == "u" else self.dg.u_mesh
        vals = np.empty((len(free_mesh), states.shape[0]))
        for a in range(len(free_mesh)):
            if self.frozen_side == "u":
                u = self.dg.u_mesh.points[frozen_idx]
                v = self.dg.v_action(a)
            else:
                u = self.dg.u_action(a)
                v = self.dg.v_mesh.points[frozen_idx]
            nxt, reward = _dynamics_step(self.dg, i, states, u, v)
            interp, _ = self.grid.interpolate(self.response.tables[i + 1], nxt)
            vals[a] = reward + interp
        if self.frozen_side == "u":
            return np.argmax(vals, axis=0)
        return np.argmin(vals, axis=0)

    def __call__(self, i: int, x) -> int:
        return int(self.actions(i, np.atleast_2d(x))[0])


def _policy_actions(policy, i: int, states: Array) -> Array:
    if hasattr(policy, "actions"):
        return np.asarray(policy.actions(i, states), dtype=int)
    return np.array([int(policy(i, x)) for x in states], dtype=int)


def default_grid(ranges: Sequence[tuple[float, float]],
                 nodes: Sequence[int]) -> StateGrid:
    return StateGrid(tuple(lo for lo, _ in ranges),
                     tuple(hi for _, hi in ranges),
                     tuple(int(n) for n in nodes))


def grid_for_game(dg: DiscretizedGame, nodes_per_dim: int = 81) -> StateGrid:
    """Fallback grid from the growth-bound reach radius (capped at 1e3)."""
    n = dg.game.state_dim
    if n > MAX_GRID_DIM:
        raise GridError(
            f"state grids support at most {MAX_GRID_DIM} dimensions")
    r = min(dg.game.reach_radius(dg.game.horizon) * 1.05, 1e3)
    return StateGrid((-r,) * n, (r,) * n, (nodes_per_dim,) * n)


def save_values(path, result: SolveResult) -> None:
    """Export solved grids to a structured binary table (.npz)."""
    grid = result.upper.grid
    payload = {
        "lows": np.asarray(grid.lows),
        "highs": np.asarray(grid.highs),
        "shape": np.asarray(grid.shape),
        "times": result.upper.times,
        "clamp_count": np.asarray(result.clamp_count),
        "upper": np.stack(result.upper.tables),
        "lower": np.stack(result.lower.tables),
    }
    np.savez(path, **payload)


def load_values(path) -> SolveResult:
    with np.load(path) as data:
        grid = StateGrid(tuple(data["lows"]), tuple(data["highs"]),
                         tuple(int(n) for n in data["shape"]))
        times = data["times"]
        upper = ValueGrid("upper", grid, times, list(data["upper"]))
        lower = ValueGrid("lower", grid, times, list(data["lower"]))
        return SolveResult(upper, lower, int(data["clamp_count"]))
