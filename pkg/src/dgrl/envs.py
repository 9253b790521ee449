"""Concrete differential games: five analytic benchmarks plus a non-Isaacs
counterexample with a known minimax/maximin Q-gap.

All dynamics broadcast over leading batch dimensions: states have shape
(..., n), scalar controls shape (...,) and vector controls shape (..., d).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .games import Ball, Box, ContinuousGame, Ellipse
from .mesh import ActionMesh, parse_mesh

Array = np.ndarray


def _zero_cost(t, x, u, v):
    return np.zeros(np.broadcast_shapes(np.shape(x)[:-1], np.shape(t)))


def make_escape_from_zero() -> ContinuousGame:
    """Point on the plane pushed by two unit balls; the second agent's ball
    shrinks linearly toward the terminal time.  The first agent can escape
    zero by exactly 0.5."""

    def dyn(t, x, u, v):
        return np.asarray(u) + (2.0 - t) * np.asarray(v)

    def terminal(x):
        return -np.linalg.norm(x, axis=-1)

    return ContinuousGame(
        name="escape_from_zero",
        state_dim=2,
        control_dims=(2, 2),
        horizon=2.0,
        initial_state=np.zeros(2),
        dynamics=dyn,
        running_cost=_zero_cost,
        terminal_cost=terminal,
        u_set=Ball(1.0),
        v_set=Ball(1.0),
        growth_constant=3.0,  # ||u + (2 - t) v|| <= 3
    )


def make_get_into_circle() -> ContinuousGame:
    """The second agent moves the point horizontally, the first vertically;
    the first can only reach the border of a radius-4 circle (value 0)."""

    def dyn(t, x, u, v):
        f1, f2 = np.broadcast_arrays(np.asarray(v, dtype=float),
                                     np.asarray(u, dtype=float))
        return np.stack([f1, f2], axis=-1)

    def terminal(x):
        return np.linalg.norm(x, axis=-1) - 4.0

    return ContinuousGame(
        name="get_into_circle",
        state_dim=2,
        control_dims=(1, 1),
        horizon=4.0,
        initial_state=np.array([0.0, 0.5]),
        dynamics=dyn,
        running_cost=_zero_cost,
        terminal_cost=terminal,
        u_set=Box((-0.5,), (0.5,)),
        v_set=Box((-1.0,), (1.0,)),
        growth_constant=math.sqrt(1.25),
    )


def make_get_into_square() -> ContinuousGame:
    """Rotating drift plus box controls; the first agent can only reach the
    border of the unit square (value 1)."""

    def dyn(t, x, u, v):
        f1 = x[..., 1] + np.asarray(v, dtype=float)
        f2 = -x[..., 0] + np.asarray(u, dtype=float)
        f1, f2 = np.broadcast_arrays(f1, f2)
        return np.stack([f1, f2], axis=-1)

    def terminal(x):
        return np.max(np.abs(x), axis=-1)

    return ContinuousGame(
        name="get_into_square",
        state_dim=2,
        control_dims=(1, 1),
        horizon=4.0,
        initial_state=np.array([0.2, 0.0]),
        dynamics=dyn,
        running_cost=_zero_cost,
        terminal_cost=terminal,
        u_set=Box((-1.0,), (1.0,)),
        v_set=Box((-1.0,), (1.0,)),
        growth_constant=math.sqrt(2.0),
    )


def make_homicidal_chauffeur() -> ContinuousGame:
    """Finite-horizon pursuit: a speed-3 car with bounded turn rate chases a
    unit-speed pedestrian; terminal cost is the final distance."""

    def dyn(t, x, u, v):
        v = np.asarray(v, dtype=float)
        f1 = 3.0 * np.cos(x[..., 2])
        f2 = 3.0 * np.sin(x[..., 2])
        f3 = np.asarray(u, dtype=float)
        f4 = v[..., 0]
        f5 = v[..., 1]
        parts = np.broadcast_arrays(f1, f2, f3, f4, f5)
        return np.stack(parts, axis=-1)

    def terminal(x):
        return np.linalg.norm(x[..., :2] - x[..., 3:5], axis=-1)

    return ContinuousGame(
        name="homicidal_chauffeur",
        state_dim=5,
        control_dims=(1, 2),
        horizon=3.0,
        initial_state=np.array([0.0, 0.0, 0.0, 2.5, 7.5]),
        dynamics=dyn,
        running_cost=_zero_cost,
        terminal_cost=terminal,
        u_set=Box((-1.0,), (1.0,)),
        v_set=Ball(1.0),
        growth_constant=math.sqrt(11.0),  # ||f||^2 <= 9 + 1 + 1
    )


def make_interception() -> ContinuousGame:
    """Air interception: second-order pursuer with first-order control lag
    versus a second-order evader; elliptical control sets.

    State order: (y1, y2, dy1, dy2, F1, F2, z1, z2, dz1, dz2).
    """

    def dyn(t, x, u, v):
        u = np.asarray(u, dtype=float)
        v = np.asarray(v, dtype=float)
        parts = np.broadcast_arrays(
            x[..., 2], x[..., 3],                       # dy
            x[..., 4], x[..., 5],                       # ddy = F
            -x[..., 4] + u[..., 0], -x[..., 5] + u[..., 1],  # dF = -F + u
            x[..., 8], x[..., 9],                       # dz
            v[..., 0], v[..., 1],                       # ddz = v
        )
        return np.stack(parts, axis=-1)

    def terminal(x):
        return np.linalg.norm(x[..., 0:2] - x[..., 6:8], axis=-1)

    return ContinuousGame(
        name="interception",
        state_dim=10,
        control_dims=(2, 2),
        horizon=3.0,
        initial_state=np.array([1.0, 1.1, 0.0, 1.0, 1.0, -2.0, 0.0, 0.0, 1.0, 0.0]),
        dynamics=dyn,
        running_cost=_zero_cost,
        terminal_cost=terminal,
        u_set=Ellipse((0.67 * 1.3, 1.3)),
        v_set=Ellipse((0.71, 1.0)),
        growth_constant=3.0,
    )


def make_counterexample() -> ContinuousGame:
    """One-dimensional game with dx/dt = cos(u + v) violating Isaacs's
    condition: minmax cos = 1 while maximin cos = -1, so the discrete-game
    minimax and maximin Q-functions stay 2 (1 - t_{i+1}) apart."""

    def dyn(t, x, u, v):
        f = np.cos(np.asarray(u, dtype=float) + np.asarray(v, dtype=float))
        return np.broadcast_to(np.asarray(f)[..., None],
                               np.broadcast_shapes(np.shape(f), x.shape[:-1]) + (1,))

    def terminal(x):
        return x[..., 0]

    return ContinuousGame(
        name="counterexample",
        state_dim=1,
        control_dims=(1, 1),
        horizon=1.0,
        initial_state=np.zeros(1),
        dynamics=dyn,
        running_cost=_zero_cost,
        terminal_cost=terminal,
        u_set=Box((-math.pi,), (math.pi,)),
        v_set=Box((-math.pi,), (math.pi,)),
        growth_constant=1.0,  # |cos| <= 1
    )


@dataclass(frozen=True)
class EnvSpec:
    """Catalog entry: constructor plus benchmark defaults.

    ``known_value`` is the exact game value at (0, x0) when the literature
    provides one; ``known_lower_bound`` the published bound otherwise.
    ``grid_ranges``/``grid_nodes``/``solve_dt`` are defaults for the exact
    grid solver (low-dimensional games only).
    """

    name: str
    make: Callable[[], ContinuousGame]
    u_mesh_spec: str
    v_mesh_spec: str
    dt: float
    hidden: tuple[int, ...]
    known_value: float | None = None
    known_lower_bound: float | None = None
    grid_ranges: tuple[tuple[float, float], ...] | None = None
    grid_nodes: tuple[int, ...] | None = None
    solve_dt: float | None = None


CATALOG: dict[str, EnvSpec] = {
    "escape_from_zero": EnvSpec(
        "escape_from_zero", make_escape_from_zero,
        "BM(0,6.283185307179586,10)", "BM(0,6.283185307179586,10)",
        dt=0.2, hidden=(256, 128), known_value=-0.5,
        grid_ranges=((-4.8, 4.8), (-4.8, 4.8)), grid_nodes=(193, 193),
        solve_dt=0.05,
    ),
    "get_into_circle": EnvSpec(
        "get_into_circle", make_get_into_circle,
        "LM(-0.5,0.5,10)", "LM(-1,1,10)",
        dt=0.2, hidden=(256, 128), known_value=0.0,
        grid_ranges=((-6.0, 6.0), (-6.0, 6.0)), grid_nodes=(121, 121),
        solve_dt=0.2,
    ),
    "get_into_square": EnvSpec(
        "get_into_square", make_get_into_square,
        "LM(-1,1,10)", "LM(-1,1,10)",
        dt=0.2, hidden=(256, 128), known_value=1.0,
        grid_ranges=((-8.0, 8.0), (-8.0, 8.0)), grid_nodes=(161, 161),
        solve_dt=0.05,
    ),
    "homicidal_chauffeur": EnvSpec(
        "homicidal_chauffeur", make_homicidal_chauffeur,
        "LM(-1,1,10)", "BM(0,6.283185307179586,10)",
        dt=0.2, hidden=(256, 128),
    ),
    "interception": EnvSpec(
        "interception", make_interception,
        "BM(0,6.283185307179586,10)", "BM(0,6.283185307179586,10)",
        dt=0.2, hidden=(512, 256, 128), known_lower_bound=1.5,
    ),
    "counterexample": EnvSpec(
        "counterexample", make_counterexample,
        "LM(-3.141592653589793,3.141592653589793,10)",
        "LM(-3.141592653589793,3.141592653589793,10)",
        dt=0.2, hidden=(256, 128),
        grid_ranges=((-2.0, 2.0),), grid_nodes=(81,),
        solve_dt=0.2,
    ),
}


def get_env(name: str) -> EnvSpec:
    try:
        return CATALOG[name]
    except KeyError:
        raise KeyError(f"unknown environment {name!r}; known: {sorted(CATALOG)}")


def default_meshes(spec: EnvSpec) -> tuple[ActionMesh, ActionMesh]:
    game = spec.make()
    return (parse_mesh(spec.u_mesh_spec, game.u_set),
            parse_mesh(spec.v_mesh_spec, game.v_set))
