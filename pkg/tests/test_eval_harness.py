import numpy as np
import pytest

from dgrl import grid_solver
from dgrl.envs import CATALOG
from dgrl.eval_harness import (EvalError, EvalReport, dqn_best_response,
                               evaluate_pair, grid_best_response,
                               random_search, report_table)
from dgrl.games import Box, ContinuousGame, DiscretizedGame, Partition
from dgrl.mesh import linear_mesh
from dgrl.qlearn import TrainConfig, build_discretized


def _static_dg(c=1.25):
    """f = 0, sigma = x: every policy pair scores exactly sigma(x0) = c."""

    def dyn(t, x, u, v):
        return np.zeros(np.broadcast_shapes(
            np.shape(u), np.shape(v), np.shape(x)[:-1]) + (1,))

    game = ContinuousGame(
        name="static", state_dim=1, control_dims=(1, 1), horizon=1.0,
        initial_state=np.array([c]), dynamics=dyn,
        running_cost=lambda t, x, u, v: np.zeros(
            np.broadcast_shapes(np.shape(u), np.shape(v), np.shape(x)[:-1])),
        terminal_cost=lambda x: x[..., 0],
        u_set=Box((-1.0,), (1.0,)), v_set=Box((-1.0,), (1.0,)),
        growth_constant=1.0)
    mesh = linear_mesh(-1.0, 1.0, 2, game.u_set)
    return DiscretizedGame(game, Partition.uniform(1.0, 0.25), mesh, mesh)


CONST = lambda i, x: 0


def test_every_method_exact_on_static_game():
    dg = _static_dg(1.25)
    assert grid_best_response(CONST, dg, "u") == pytest.approx(1.25)
    assert grid_best_response(CONST, dg, "v") == pytest.approx(1.25)
    assert random_search(CONST, dg, "u", trials=5, seed=0) == pytest.approx(1.25)
    j = dqn_best_response(CONST, dg, "v", hyper_draws=1, budget=300, seed=0)
    assert j == pytest.approx(1.25)


def test_evaluate_pair_static_report():
    dg = _static_dg(-0.5)
    rep = evaluate_pair((CONST, CONST), dg,
                        ("grid_best_response", "random_search"),
                        repeats=3, seed=0)
    assert rep.v_u_runs == pytest.approx([-0.5] * 3)
    assert rep.v_v_runs == pytest.approx([-0.5] * 3)
    assert rep.exploitability == pytest.approx([0.0] * 3)
    agg = rep.aggregates()
    assert agg["u"]["best"] <= agg["u"]["mean"] <= agg["u"]["worst"]
    assert agg["v"]["best"] >= agg["v"]["mean"] >= agg["v"]["worst"]


def test_interval_contains_grid_value_for_greedy_policies():
    spec = CATALOG["counterexample"]
    dg = build_discretized(TrainConfig("idqn", "counterexample"))
    grid = grid_solver.default_grid(spec.grid_ranges, spec.grid_nodes)
    res = grid_solver.solve(dg, grid)
    pu = grid_solver.GridPolicy(dg, grid, res.upper, "u")
    pv = grid_solver.GridPolicy(dg, grid, res.lower, "v")
    rep = evaluate_pair((pu, pv), dg, ("grid_best_response",), repeats=1)
    x0 = np.zeros(1)
    # upper/lower grid values bound what exact best responses can achieve
    assert rep.v_u_runs[0] == pytest.approx(res.upper.at(0, x0), abs=1e-9)
    assert rep.v_v_runs[0] == pytest.approx(res.lower.at(0, x0), abs=1e-9)
    assert rep.v_u_runs[0] >= rep.v_v_runs[0]


def test_adding_methods_never_narrows_interval():
    dg = _static_dg(0.0)
    few = evaluate_pair((CONST, CONST), dg, ("random_search",), repeats=2)
    more = evaluate_pair((CONST, CONST), dg,
                         ("random_search", "grid_best_response"), repeats=2)
    for a, b in zip(more.v_u_runs, few.v_u_runs):
        assert a >= b - 1e-12
    for a, b in zip(more.v_v_runs, few.v_v_runs):
        assert a <= b + 1e-12


def test_random_search_deterministic_per_seed():
    dg = _static_dg()
    a = random_search(CONST, dg, "u", trials=7, seed=42)
    b = random_search(CONST, dg, "u", trials=7, seed=42)
    assert a == b


def test_errors():
    dg = _static_dg()
    with pytest.raises(EvalError):
        evaluate_pair((CONST, CONST), dg, (), repeats=1)
    with pytest.raises(EvalError):
        evaluate_pair((CONST, CONST), dg, ("psychic_adversary",), repeats=1)
    with pytest.raises(EvalError):
        random_search(CONST, dg, "u", trials=0)
    with pytest.raises(EvalError):
        dqn_best_response(CONST, dg, "u", hyper_draws=0)
    big = build_discretized(TrainConfig("idqn", "interception"))
    with pytest.raises(EvalError):
        grid_best_response(CONST, big, "u")
    with pytest.raises(EvalError):
        evaluate_pair((CONST, CONST), big, ("grid_best_response",), repeats=1)


def test_report_table_layout():
    rep = EvalReport("static", ("random_search",), [0.1, 0.2], [-0.1, 0.0])
    table = report_table({"runA": rep})
    lines = table.strip().splitlines()
    assert lines[0].startswith("label,env,best_u")
    assert lines[1].startswith("runA,static,")
    assert len(lines) == 2
