"""Finite action meshes and the numerical Isaacs-condition checker.

Mesh constructors:

    linear_mesh(a, b, k)     -- k + 1 evenly spaced scalars, endpoints included
    square_mesh(a, b, k, n)  -- the n-fold Cartesian power of the linear mesh
    ball_mesh(a, b, k)       -- unit vectors (sin a_i, cos a_i) over a linear
                               angle mesh; the duplicate endpoint of a full
                               circle is retained by default

The Isaacs gap of a game on given meshes is max over sampled (t, x, s) of
minmax - maximin of the Hamiltonian <f, s> + f0; it is zero for dynamics that
separate additively in the controls and strictly positive otherwise.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .games import Ball, Box, ContinuousGame, ControlSet, Ellipse, GameError

Array = np.ndarray

MAX_MESH_SIZE = 10 ** 6


class MeshError(Exception):
    """Raised for invalid mesh parameters or unparsable mesh specs."""


@dataclass(frozen=True)
class ActionMesh:
    """An ordered, immutable list of actions discretizing a compact set.

    ``points`` has shape (N,) for scalar actions and (N, d) otherwise; the
    construction order is deterministic so mesh indices are stable.
    """

    points: Array
    source: ControlSet | None = None
    spec: str = ""

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    def __len__(self) -> int:
        return self.points.shape[0]

    @property
    def action_dim(self) -> int:
        return 1 if self.points.ndim == 1 else self.points.shape[1]


def linear_mesh(a: float, b: float, k: int, source: ControlSet | None = None
                ) -> ActionMesh:
    """LM(a, b, k): the k + 1 points a + i (b - a) / k."""
    if k < 1:
        raise MeshError("linear mesh needs k >= 1")
    if not a < b:
        raise MeshError("linear mesh needs a < b")
    pts = a + (b - a) * np.arange(k + 1) / k
    return ActionMesh(pts, source, f"LM({a},{b},{k})")


def square_mesh(a: float, b: float, k: int, n: int,
                source: ControlSet | None = None) -> ActionMesh:
    """SM(a, b, k, n) = LM(a, b, k)^n in lexicographic order."""
    if n < 1:
        raise MeshError("square mesh needs n >= 1")
    if (k + 1) ** n > MAX_MESH_SIZE:
        raise MeshError(f"square mesh size {(k + 1) ** n} exceeds {MAX_MESH_SIZE}")
    line = linear_mesh(a, b, k).points
    pts = np.array(list(itertools.product(line, repeat=n)))
    return ActionMesh(pts, source, f"SM({a},{b},{k},{n})")


def ball_mesh(a: float, b: float, k: int, source: ControlSet | None = None,
              dedup: bool = False) -> ActionMesh:
    """BM(a, b, k): unit vectors (sin alpha, cos alpha) for alpha in LM(a, b, k).

    With ``dedup`` the duplicate point of a closed angle range is dropped;
    off by default to keep the constructor literal.
    """
    angles = linear_mesh(a, b, k).points
    pts = np.stack([np.sin(angles), np.cos(angles)], axis=-1)
    if dedup and np.linalg.norm(pts[0] - pts[-1]) < 1e-9:
        pts = pts[:-1]
    return ActionMesh(pts, source, f"BM({a},{b},{k})")


def scale_mesh(mesh: ActionMesh, factors: Sequence[float],
               source: ControlSet | None = None) -> ActionMesh:
    """Per-axis scaling, e.g. a ball mesh mapped onto an ellipse boundary."""
    pts = mesh.points * np.asarray(factors, dtype=float)
    return ActionMesh(pts, source, f"scaled({mesh.spec})")


_MESH_RE = re.compile(r"^\s*([A-Za-z]+)\s*\(([^()]*)\)\s*$")


def parse_mesh(spec: str, source: ControlSet | None = None) -> ActionMesh:
    """Parse a mesh spec string like ``LM(-1,1,10)`` or ``BM(0,6.2832,10)``.

    Ball meshes attached to an Ellipse control set are scaled per-axis onto
    the ellipse boundary.
    """
    m = _MESH_RE.match(spec)
    if not m:
        raise MeshError(f"unparsable mesh spec {spec!r}")
    name = m.group(1).upper()
    try:
        args = [float(s) for s in m.group(2).split(",") if s.strip()]
    except ValueError as exc:
        raise MeshError(f"bad numerals in mesh spec {spec!r}") from exc
    if name == "LM" and len(args) == 3:
        return linear_mesh(args[0], args[1], int(args[2]), source)
    if name == "SM" and len(args) == 4:
        return square_mesh(args[0], args[1], int(args[2]), int(args[3]), source)
    if name == "BM" and len(args) == 3:
        mesh = ball_mesh(args[0], args[1], int(args[2]))
        if isinstance(source, Ellipse):
            return scale_mesh(mesh, source.semi_axes, source)
        if isinstance(source, Ball):
            return scale_mesh(mesh, [source.radius] * 2, source)
        return ActionMesh(mesh.points, source, mesh.spec)
    raise MeshError(f"unknown mesh constructor or arity in {spec!r}")


# ---------------------------------------------------------------------------
# Isaacs-condition checking
# ---------------------------------------------------------------------------


def _action_grids(u_mesh: ActionMesh, v_mesh: ActionMesh):
    """Mesh points broadcast to a (Nu, Nv) action grid."""
    up = u_mesh.points
    vp = v_mesh.points
    u = up[:, None] if up.ndim == 1 else up[:, None, :]
    v = vp[None, :] if vp.ndim == 1 else vp[None, :, :]
    return u, v


def hamiltonian_matrix(game: ContinuousGame, u_mesh: ActionMesh,
                       v_mesh: ActionMesh, t: float, x: Array, s: Array) -> Array:
    """chi(t, x, u, v, s) = <f, s> + f0 on the (Nu, Nv) action grid."""
    u, v = _action_grids(u_mesh, v_mesh)
    f = np.asarray(game.dynamics(t, x, u, v), dtype=float)
    f0 = np.asarray(game.running_cost(t, x, u, v), dtype=float)
    chi = f @ np.asarray(s, dtype=float) + f0
    return np.broadcast_to(chi, (len(u_mesh), len(v_mesh))).copy()


def isaacs_gap(game: ContinuousGame, u_mesh: ActionMesh, v_mesh: ActionMesh,
               samples: Sequence[tuple[float, Array, Array]]
               ) -> tuple[float, tuple[float, Array, Array]]:
    """Max over samples of minmax chi - maximin chi on the meshes.

    Returns the largest gap and the sample attaining it.  Each per-sample gap
    is nonnegative (weak duality), which is asserted.
    """
    if len(samples) == 0:
        raise MeshError("isaacs_gap needs at least one sample")
    best_gap = -np.inf
    best_sample = None
    for t, x, s in samples:
        chi = hamiltonian_matrix(game, u_mesh, v_mesh, t, x, s)
        minmax = chi.max(axis=1).min()
        maximin = chi.min(axis=0).max()
        gap = float(minmax - maximin)
        assert gap >= 0.0, "weak duality violated"
        if gap > best_gap:
            best_gap = gap
            best_sample = (t, x, s)
    return best_gap, best_sample


def default_samples(game: ContinuousGame, count: int = 256,
                    rng: np.random.Generator | None = None,
                    s_scales: Sequence[float] = (0.1, 1.0, 10.0)
                    ) -> list[tuple[float, Array, Array]]:
    """Uniform (t, x) draws from the reach-set box with sphere-scaled s."""
    rng = rng or np.random.default_rng(0)
    radius = min(game.reach_radius(game.horizon), 1e3)
    samples = []
    for _ in range(count):
        t = float(rng.uniform(0.0, game.horizon))
        x = rng.uniform(-radius, radius, size=game.state_dim)
        direction = rng.normal(size=game.state_dim)
        direction /= np.linalg.norm(direction)
        scale = s_scales[int(rng.integers(len(s_scales)))]
        samples.append((t, x, direction * scale))
    return samples


def unit_sphere_samples(game: ContinuousGame, count: int = 64,
                        rng: np.random.Generator | None = None
                        ) -> list[tuple[float, Array, Array]]:
    """Samples with ||s|| = 1 exactly, for scale-normalized gap reporting."""
    return default_samples(game, count, rng, s_scales=(1.0,))


@dataclass(frozen=True)
class AdequacyReport:
    minmax_deviations: Array
    maximin_deviations: Array

    @property
    def max_minmax(self) -> float:
        return float(self.minmax_deviations.max())

    @property
    def max_maximin(self) -> float:
        return float(self.maximin_deviations.max())


def mesh_adequacy(game: ContinuousGame, u_mesh: ActionMesh, v_mesh: ActionMesh,
                  refined_u: ActionMesh, refined_v: ActionMesh,
                  samples: Sequence[tuple[float, Array, Array]]) -> AdequacyReport:
    """Per-sample |extremum on mesh - extremum on refined mesh| for both orders.

    Small deviations are evidence that the coarse meshes already attain the
    Hamiltonian extrema, the premise under which finite meshes preserve the
    shared-Q guarantees.
    """
    minmax_dev = []
    maximin_dev = []
    for t, x, s in samples:
        coarse = hamiltonian_matrix(game, u_mesh, v_mesh, t, x, s)
        fine = hamiltonian_matrix(game, refined_u, refined_v, t, x, s)
        minmax_dev.append(abs(coarse.max(axis=1).min() - fine.max(axis=1).min()))
        maximin_dev.append(abs(coarse.min(axis=0).max() - fine.min(axis=0).max()))
    return AdequacyReport(np.asarray(minmax_dev), np.asarray(maximin_dev))
