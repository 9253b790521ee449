"""Deep Q-learning and exact grid solving for finite-horizon zero-sum
positional differential games."""

__version__ = "0.1.0"

from .games import (
    Ball,
    Box,
    ContinuousGame,
    DiscretizedGame,
    Ellipse,
    GameError,
    Partition,
    Transition,
    rollout,
    step,
)
from .mesh import (
    ActionMesh,
    MeshError,
    ball_mesh,
    hamiltonian_matrix,
    isaacs_gap,
    linear_mesh,
    parse_mesh,
    square_mesh,
)
from .envs import CATALOG, EnvSpec, get_env
from .matrix_games import (
    MatrixGameError,
    NashSolution,
    nash_mixed,
    pure_maximin,
    pure_minimax,
)
from .grid_solver import (
    BestResponsePolicy,
    GridError,
    GridPolicy,
    SolveResult,
    StateGrid,
    ValueGrid,
    best_response_value,
    q_values,
    solve,
)
from .qlearn import (
    ALGORITHMS,
    ReplayBuffer,
    TrainConfig,
    TrainError,
    TrainResult,
    build_discretized,
    train,
    train_best_response,
)
from .eval_harness import EvalError, EvalReport, evaluate_pair

__all__ = [
    "__version__",
    "Ball", "Box", "Ellipse", "ContinuousGame", "DiscretizedGame",
    "Partition", "Transition", "GameError", "rollout", "step",
    "ActionMesh", "MeshError", "linear_mesh", "square_mesh", "ball_mesh",
    "parse_mesh", "hamiltonian_matrix", "isaacs_gap",
    "CATALOG", "EnvSpec", "get_env",
    "MatrixGameError", "NashSolution", "nash_mixed", "pure_minimax",
    "pure_maximin",
    "GridError", "StateGrid", "ValueGrid", "SolveResult", "GridPolicy",
    "BestResponsePolicy", "solve", "q_values", "best_response_value",
    "ALGORITHMS", "ReplayBuffer", "TrainConfig", "TrainError", "TrainResult",
    "build_discretized", "train", "train_best_response",
    "EvalError", "EvalReport", "evaluate_pair",
]
