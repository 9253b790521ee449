"""Finite-horizon zero-sum differential games and their explicit-Euler discretizations.

A continuous game is the tuple (f, f0, sigma, U, V, x0, T): dynamics f, running
cost f0, terminal cost sigma, compact control sets for the two agents, initial
state and horizon.  The first agent (u) minimizes the quality index

    J = sigma(x(T)) + integral of f0,

the second agent (v) maximizes it.  Discretization fixes a time partition and
finite action meshes and steps the state with explicit Euler; the resulting
discrete game is a deterministic Markov game with gamma = 1 where the terminal
cost is folded into the reward of the last transition.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

Array = np.ndarray

MEMBERSHIP_TOL = 1e-9


class GameError(Exception):
    """Raised for invalid game construction or invalid step inputs."""


# ---------------------------------------------------------------------------
# Control-set descriptors
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Box:
    """Axis-aligned interval box.  Scalar sets use dim 1."""

    lows: tuple[float, ...]
    highs: tuple[float, ...]

    def __post_init__(self):
        if len(self.lows) != len(self.highs):
            raise GameError("box bounds length mismatch")
        if any(lo > hi for lo, hi in zip(self.lows, self.highs)):
            raise GameError("box has empty side")

    @property
    def dim(self) -> int:
        return len(self.lows)

    def contains(self, p, tol: float = MEMBERSHIP_TOL) -> bool:
        p = np.atleast_1d(np.asarray(p, dtype=float))
        lo = np.asarray(self.lows)
        hi = np.asarray(self.highs)
        return bool(np.all(p >= lo - tol) and np.all(p <= hi + tol))

    def project(self, p):
        p = np.atleast_1d(np.asarray(p, dtype=float))
        return np.clip(p, self.lows, self.highs)


@dataclass(frozen=True)
class Ball:
    """Euclidean ball of given radius centered at the origin."""

    radius: float
    dim: int = 2

    def contains(self, p, tol: float = MEMBERSHIP_TOL) -> bool:
        p = np.atleast_1d(np.asarray(p, dtype=float))
        return bool(np.linalg.norm(p) <= self.radius + tol)

    def project(self, p):
        p = np.atleast_1d(np.asarray(p, dtype=float))
        norm = np.linalg.norm(p)
        if norm <= self.radius:
            return p
        return p * (self.radius / norm)


@dataclass(frozen=True)
class Ellipse:
    """Axis-aligned ellipse {p : sum (p_d / a_d)^2 <= 1} centered at the origin."""

    semi_axes: tuple[float, ...]

    @property
    def dim(self) -> int:
        return len(self.semi_axes)

    def contains(self, p, tol: float = MEMBERSHIP_TOL) -> bool:
        p = np.atleast_1d(np.asarray(p, dtype=float))
        q = float(np.sum((p / np.asarray(self.semi_axes)) ** 2))
        return q <= 1.0 + tol

    def project(self, p):
        # Radial (not metric) projection; identity on members, which is all
        # the meshes need.
        p = np.atleast_1d(np.asarray(p, dtype=float))
        q = math.sqrt(float(np.sum((p / np.asarray(self.semi_axes)) ** 2)))
        if q <= 1.0:
            return p
        return p / q


ControlSet = Box | Ball | Ellipse


# ---------------------------------------------------------------------------
# Continuous game
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ContinuousGame:
    """The data (f, f0, sigma, U, V, x0, T) of a zero-sum differential game.

    ``dynamics``, ``running_cost`` and ``terminal_cost`` must accept
    numpy-broadcastable arguments: state batches of shape (..., n) and action
    batches with matching leading dimensions.  ``growth_constant`` is a c_f
    with ||f|| + |f0| <= c_f (1 + ||x||) everywhere; it drives reach-set
    bounds.
    """

    name: str
    state_dim: int
    control_dims: tuple[int, int]
    horizon: float
    initial_state: Array
    dynamics: Callable[..., Array]
    running_cost: Callable[..., Array]
    terminal_cost: Callable[[Array], Array]
    u_set: ControlSet
    v_set: ControlSet
    growth_constant: float

    def __post_init__(self):
        if self.horizon <= 0:
            raise GameError("horizon must be positive")
        x0 = np.asarray(self.initial_state, dtype=float)
        if x0.shape != (self.state_dim,):
            raise GameError("initial state has wrong shape")
        object.__setattr__(self, "initial_state", x0)

    def reach_radius(self, t: float) -> float:
        """Growth-bound radius R(t) = (||x0|| + 1) e^{c_f t} - 1."""
        r0 = float(np.linalg.norm(self.initial_state))
        return (r0 + 1.0) * math.exp(self.growth_constant * t) - 1.0


def check_growth_bound(game: ContinuousGame, rng: np.random.Generator,
                       samples: int = 200) -> float:
    """Spot-check ||f|| + |f0| <= c_f (1 + ||x||) on random points.

    Returns the largest observed ratio (||f|| + |f0|) / (c_f (1 + ||x||));
    raises if it exceeds 1 beyond rounding slack.
    """
    radius = min(game.reach_radius(game.horizon), 1e3)
    worst = 0.0
    for _ in range(samples):
        t = float(rng.uniform(0.0, game.horizon))
        x = rng.uniform(-radius, radius, size=game.state_dim)
        u = game.u_set.project(rng.normal(size=game.u_set.dim) * 2)
        v = game.v_set.project(rng.normal(size=game.v_set.dim) * 2)
        u_arg = u if game.u_set.dim > 1 else float(u[0])
        v_arg = v if game.v_set.dim > 1 else float(v[0])
        f = np.asarray(game.dynamics(t, x, u_arg, v_arg), dtype=float)
        f0 = float(game.running_cost(t, x, u_arg, v_arg))
        lhs = float(np.linalg.norm(f)) + abs(f0)
        ratio = lhs / (game.growth_constant * (1.0 + float(np.linalg.norm(x))))
        worst = max(worst, ratio)
    if worst > 1.0 + 1e-9:
        raise GameError(f"growth bound violated: ratio {worst:.6f} > 1")
    return worst


# ---------------------------------------------------------------------------
# Partition and discretized game
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Partition:
    """Strictly increasing times t_0 < ... < t_{m+1} = T."""

    times: Array

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        if times.ndim != 1 or times.size < 2:
            raise GameError("partition needs at least two times")
        if np.any(np.diff(times) <= 0):
            raise GameError("partition times must strictly increase")
        object.__setattr__(self, "times", times)

    @classmethod
    def uniform(cls, horizon: float, dt: float, start: float = 0.0) -> "Partition":
        steps = round((horizon - start) / dt)
        if steps < 1 or abs(steps * dt + start - horizon) > 1e-9 * max(1.0, horizon):
            raise GameError(f"dt {dt} does not divide horizon {horizon}")
        return cls(np.linspace(start, horizon, steps + 1))

    @property
    def m(self) -> int:
        """Index of the last non-terminal time; times has m + 2 entries."""
        return self.times.size - 2

    @property
    def deltas(self) -> Array:
        return np.diff(self.times)

    @property
    def width(self) -> float:
        return float(np.max(self.deltas))


def _mesh_action(points: Array, idx) -> float | Array:
    """Mesh point(s) as passed to dynamics: scalars for 1-D meshes."""
    p = points[idx]
    return p


@dataclass(frozen=True)
class DiscretizedGame:
    """A continuous game plus a time partition and finite action meshes."""

    game: ContinuousGame
    partition: Partition
    u_mesh: "ActionMesh"
    v_mesh: "ActionMesh"
    gamma: float = 1.0

    def __post_init__(self):
        if self.gamma != 1.0:
            raise GameError("discount factor is fixed to 1")
        for mesh, cset, label in ((self.u_mesh, self.game.u_set, "u"),
                                  (self.v_mesh, self.game.v_set, "v")):
            for p in mesh.points:
                if not cset.contains(p, MEMBERSHIP_TOL):
                    raise GameError(f"{label}-mesh point {p} outside control set")

    @property
    def m(self) -> int:
        return self.partition.m

    def u_action(self, idx):
        return _mesh_action(self.u_mesh.points, idx)

    def v_action(self, idx):
        return _mesh_action(self.v_mesh.points, idx)


@dataclass(frozen=True)
class Transition:
    """One replay-buffer record of the discrete game."""

    t_index: int
    x: Array
    u_index: int
    v_index: int
    reward: float
    next_t_index: int
    x_next: Array
    terminal: bool


def step(dg: DiscretizedGame, i: int, x: Array, u_idx: int, v_idx: int
         ) -> tuple[Array, float, bool]:
    """One Euler step: x' = x + dt f, r = dt f0 (+ sigma(x') at the last step)."""
    if not 0 <= i <= dg.m:
        raise GameError(f"time index {i} out of range [0, {dg.m}]")
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise GameError("non-finite state")
    t = float(dg.partition.times[i])
    dt = float(dg.partition.deltas[i])
    u = dg.u_action(u_idx)
    v = dg.v_action(v_idx)
    f = np.asarray(dg.game.dynamics(t, x, u, v), dtype=float)
    f0 = float(dg.game.running_cost(t, x, u, v))
    if not (np.all(np.isfinite(f)) and math.isfinite(f0)):
        raise GameError(f"non-finite dynamics output at t={t}, x={x}")
    x_next = x + dt * f
    r = dt * f0
    terminal = i == dg.m
    if terminal:
        r += float(dg.game.terminal_cost(x_next))
    return x_next, r, terminal


def rollout(dg: DiscretizedGame, policy_u, policy_v, x0: Array | None = None
            ) -> tuple[list[Transition], float]:
    """Play both policies from x0 (default: the game's initial state).

    Returns the m + 1 transitions and J, the sum of transition rewards
    (terminal cost folded into the last one).
    """
    x = np.asarray(dg.game.initial_state if x0 is None else x0, dtype=float)
    trajectory: list[Transition] = []
    total = 0.0
    for i in range(dg.m + 1):
        u_idx = int(policy_u(i, x))
        v_idx = int(policy_v(i, x))
        x_next, r, terminal = step(dg, i, x, u_idx, v_idx)
        trajectory.append(Transition(i, x, u_idx, v_idx, r, i + 1, x_next, terminal))
        total += r
        x = x_next
    return trajectory, total
