import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from dgrl.games import Ball, Box, Ellipse
from dgrl.envs import make_counterexample, make_get_into_circle
from dgrl.mesh import (MeshError, ball_mesh, default_samples,
                       hamiltonian_matrix, isaacs_gap, linear_mesh,
                       mesh_adequacy, parse_mesh, scale_mesh, square_mesh,
                       unit_sphere_samples)


# ---------------------------------------------------------------------------
# Constructors
# ---------------------------------------------------------------------------


def test_linear_mesh_points():
    m = linear_mesh(-1.0, 1.0, 4)
    np.testing.assert_allclose(m.points, [-1.0, -0.5, 0.0, 0.5, 1.0])
    assert len(m) == 5
    assert m.action_dim == 1


@given(st.floats(-10, 0, exclude_max=True, allow_subnormal=False),
       st.floats(0, 10, allow_subnormal=False),
       st.integers(1, 50))
def test_linear_mesh_endpoints_and_spacing(a, b, k):
    m = linear_mesh(a, b, k)
    assert len(m) == k + 1
    assert m.points[0] == pytest.approx(a)
    assert m.points[-1] == pytest.approx(b)
    # atol covers ranges so narrow that the step underflows to zero
    np.testing.assert_allclose(np.diff(m.points), (b - a) / k,
                               rtol=1e-9, atol=1e-300)


def test_linear_mesh_validation():
    with pytest.raises(MeshError):
        linear_mesh(1.0, -1.0, 3)
    with pytest.raises(MeshError):
        linear_mesh(0.0, 1.0, 0)


def test_square_mesh_lexicographic():
    m = square_mesh(0.0, 1.0, 1, 2)
    np.testing.assert_allclose(
        m.points, [[0, 0], [0, 1], [1, 0], [1, 1]])
    assert m.action_dim == 2


def test_square_mesh_size_guard():
    with pytest.raises(MeshError):
        square_mesh(0.0, 1.0, 100, 4)


def test_ball_mesh_unit_vectors_and_duplicate_endpoint():
    m = ball_mesh(0.0, 2 * math.pi, 10)
    assert len(m) == 11
    np.testing.assert_allclose(np.linalg.norm(m.points, axis=1), 1.0)
    np.testing.assert_allclose(m.points[0], m.points[-1], atol=1e-12)
    # (sin 0, cos 0) = (0, 1)
    np.testing.assert_allclose(m.points[0], [0.0, 1.0], atol=1e-12)


def test_ball_mesh_dedup_drops_closure_point():
    m = ball_mesh(0.0, 2 * math.pi, 10, dedup=True)
    assert len(m) == 10


def test_mesh_points_immutable():
    m = linear_mesh(0.0, 1.0, 2)
    with pytest.raises(ValueError):
        m.points[0] = 5.0


# ---------------------------------------------------------------------------
# Spec parsing
# ---------------------------------------------------------------------------


def test_parse_lm_sm_bm():
    assert len(parse_mesh("LM(-1,1,10)")) == 11
    assert parse_mesh("SM(0,1,2,3)").points.shape == (27, 3)
    assert parse_mesh("BM(0,6.283185307179586,10)").points.shape == (11, 2)


def test_parse_mesh_scales_onto_ellipse():
    ell = Ellipse((0.871, 1.3))
    m = parse_mesh("BM(0,6.283185307179586,10)", ell)
    for p in m.points:
        assert ell.contains(p, tol=1e-9)
    # extreme axis points survive scaling
    assert np.max(np.abs(m.points[:, 1])) == pytest.approx(1.3)


def test_parse_mesh_scales_onto_ball():
    ball = Ball(2.0)
    m = parse_mesh("BM(0,6.283185307179586,4)", ball)
    np.testing.assert_allclose(np.linalg.norm(m.points, axis=1), 2.0)


@pytest.mark.parametrize("bad", ["LM(1,2)", "XY(0,1,2)", "LM(a,b,c)",
                                 "LM(0,1,2", ""])
def test_parse_mesh_rejects_garbage(bad):
    with pytest.raises(MeshError):
        parse_mesh(bad)


def test_scale_mesh():
    m = scale_mesh(ball_mesh(0.0, 2 * math.pi, 4), (2.0, 0.5))
    assert np.max(np.abs(m.points[:, 0])) == pytest.approx(2.0)
    assert np.max(np.abs(m.points[:, 1])) == pytest.approx(0.5)


# ---------------------------------------------------------------------------
# Hamiltonian / Isaacs checking
# ---------------------------------------------------------------------------


def test_hamiltonian_matrix_counterexample():
    game = make_counterexample()
    um = parse_mesh("LM(-3.141592653589793,3.141592653589793,2)")
    vm = parse_mesh("LM(-3.141592653589793,3.141592653589793,2)")
    chi = hamiltonian_matrix(game, um, vm, 0.0, np.zeros(1), np.ones(1))
    expected = np.cos(um.points[:, None] + vm.points[None, :])
    np.testing.assert_allclose(chi, expected, atol=1e-12)


def test_isaacs_gap_zero_on_separable_game():
    game = make_get_into_circle()
    um = parse_mesh("LM(-0.5,0.5,10)", game.u_set)
    vm = parse_mesh("LM(-1,1,10)", game.v_set)
    samples = default_samples(game, 128, np.random.default_rng(1))
    gap, _ = isaacs_gap(game, um, vm, samples)
    assert gap == 0.0


def test_isaacs_gap_positive_on_counterexample():
    game = make_counterexample()
    um = parse_mesh("LM(-3.141592653589793,3.141592653589793,10)")
    samples = unit_sphere_samples(game, 32, np.random.default_rng(2))
    gap, witness = isaacs_gap(game, um, um, samples)
    assert gap == pytest.approx(2.0)
    assert witness is not None


def test_isaacs_gap_scales_with_s():
    game = make_counterexample()
    um = parse_mesh("LM(-3.141592653589793,3.141592653589793,10)")
    samples = [(0.0, np.zeros(1), np.array([10.0]))]
    gap, _ = isaacs_gap(game, um, um, samples)
    assert gap == pytest.approx(20.0)


def test_isaacs_gap_empty_samples():
    game = make_counterexample()
    um = parse_mesh("LM(-1,1,2)")
    with pytest.raises(MeshError):
        isaacs_gap(game, um, um, [])


def test_mesh_adequacy_refinement_small_for_separable():
    game = make_get_into_circle()
    um = parse_mesh("LM(-0.5,0.5,10)", game.u_set)
    vm = parse_mesh("LM(-1,1,10)", game.v_set)
    uf = parse_mesh("LM(-0.5,0.5,40)", game.u_set)
    vf = parse_mesh("LM(-1,1,40)", game.v_set)
    samples = default_samples(game, 64, np.random.default_rng(3))
    report = mesh_adequacy(game, um, vm, uf, vf, samples)
    # extrema are attained at interval endpoints, present in both meshes
    assert report.max_minmax == pytest.approx(0.0, abs=1e-12)
    assert report.max_maximin == pytest.approx(0.0, abs=1e-12)
