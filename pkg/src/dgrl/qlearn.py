"""Two-agent deep Q-learning for discretized zero-sum differential games.

Implemented algorithms:

    idqn        shared Q-matrix net, symmetric minmax/maximin targets
    didqn       decomposed shared Q: Q(t,x,u,v) = Q1(t,x)[u] + Q2(t,x)[v]
    madqn       per-agent Q-matrix nets with minimax / maximin targets
    counterdqn  one agent learns vs. an opponent that sees its action;
                the step budget is split between two symmetric runs
    nashdqn     shared Q-matrix net with mixed-equilibrium value targets
    2xddqn      decentralized double-DQN, opponent treated as environment

Networks take (t / T, x) and are trained with one Adam step per environment
step once the buffer holds a minibatch, plus a Polyak target update.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict
from typing import Sequence

import numpy as np

from . import nn
from .envs import get_env
from .games import DiscretizedGame, Partition, Transition, rollout, step
from .matrix_games import nash_mixed
from .mesh import parse_mesh

Array = np.ndarray

ALGORITHMS = ("idqn", "didqn", "madqn", "counterdqn", "nashdqn", "2xddqn")


class TrainError(Exception):
    pass


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------


@dataclass
class TrainConfig:
    algorithm: str
    env: str
    seed: int = 0
    dt: float | None = None          # default: catalog value
    u_mesh: str | None = None
    v_mesh: str | None = None
    hidden: tuple[int, ...] | None = None
    lr: float = 1e-3
    tau: float = 0.01
    batch_size: int = 64
    total_steps: int = 50000
    buffer_capacity: int = 100000
    gamma: float = 1.0

    def resolved(self) -> "TrainConfig":
        spec = get_env(self.env)
        return TrainConfig(
            algorithm=self.algorithm, env=self.env, seed=self.seed,
            dt=self.dt if self.dt is not None else spec.dt,
            u_mesh=self.u_mesh or spec.u_mesh_spec,
            v_mesh=self.v_mesh or spec.v_mesh_spec,
            hidden=tuple(self.hidden) if self.hidden else spec.hidden,
            lr=self.lr, tau=self.tau, batch_size=self.batch_size,
            total_steps=self.total_steps,
            buffer_capacity=self.buffer_capacity, gamma=self.gamma)

    def to_dict(self) -> dict:
        d = asdict(self)
        if d["hidden"] is not None:
            d["hidden"] = list(d["hidden"])
        return d


def build_discretized(config: TrainConfig) -> DiscretizedGame:
    cfg = config.resolved()
    game = get_env(cfg.env).make()
    partition = Partition.uniform(game.horizon, cfg.dt)
    u_mesh = parse_mesh(cfg.u_mesh, game.u_set)
    v_mesh = parse_mesh(cfg.v_mesh, game.v_set)
    return DiscretizedGame(game, partition, u_mesh, v_mesh)


# ---------------------------------------------------------------------------
# Replay buffer and exploration
# ---------------------------------------------------------------------------


class ReplayBuffer:
    """Fixed-capacity ring buffer with a uniform sampler and owned RNG."""

    def __init__(self, capacity: int = 100000, seed: int = 0):
        self.capacity = capacity
        self._store: list[Transition] = []
        self._next = 0
        self._rng = np.random.default_rng(seed)

    def __len__(self) -> int:
        return len(self._store)

    def add(self, tr: Transition) -> None:
        if len(self._store) < self.capacity:
            self._store.append(tr)
        else:
            self._store[self._next] = tr
        self._next = (self._next + 1) % self.capacity

    def sample(self, k: int) -> list[Transition]:
        if k > len(self._store):
            raise TrainError("not enough transitions to sample")
        idx = self._rng.integers(len(self._store), size=k)
        return [self._store[j] for j in idx]


def zeta_schedule(step_num: int, total_steps: int) -> float:
    """Linear exploration decay from 1 to 0 over the training budget."""
    return max(0.0, 1.0 - step_num / total_steps)


def epsilon_greedy(greedy_idx: int, zeta: float, mesh_size: int,
                   rng: np.random.Generator) -> int:
    """Greedy index with probability 1 - zeta, else uniform over the mesh."""
    if rng.random() < zeta:
        return int(rng.integers(mesh_size))
    return int(greedy_idx)


def greedy_pair(matrix: Array) -> tuple[int, int]:
    """(argmin_u max_v, argmax_v min_u) with lowest-index tie-breaks."""
    m = np.asarray(matrix, dtype=float)
    u_idx = int(np.argmin(m.max(axis=1)))
    v_idx = int(np.argmax(m.min(axis=0)))
    return u_idx, v_idx


# ---------------------------------------------------------------------------
# Q-heads
# ---------------------------------------------------------------------------


def features(dg: DiscretizedGame, i, x) -> Array:
    """Network input (t_i / T, x); batched when x is (B, n)."""
    x = np.asarray(x, dtype=float)
    t = np.asarray(dg.partition.times[i], dtype=float) / dg.game.horizon
    if x.ndim == 1:
        return np.concatenate([[float(t)], x])
    t = np.broadcast_to(t, x.shape[:1])
    return np.concatenate([t[:, None], x], axis=1)


class SharedMatrixHead:
    """One net whose output reshapes to the |U*| x |V*| Q-matrix."""

    variant = "shared_matrix"

    def __init__(self, input_dim: int, nu: int, nv: int,
                 hidden: Sequence[int], lr: float, rng: np.random.Generator):
        self.nu, self.nv = nu, nv
        self.online = nn.Mlp.create((input_dim, *hidden, nu * nv), rng)
        self.target = self.online.copy()
        self.adam = nn.AdamState.for_net(self.online, lr)

    def matrices(self, feats: Array, use_target: bool = False) -> Array:
        net = self.target if use_target else self.online
        out = net.forward(np.atleast_2d(feats))
        return out.reshape(-1, self.nu, self.nv)

    def update(self, feats, u_idx, v_idx, targets) -> float:
        sel = np.asarray(u_idx, dtype=int) * self.nv + np.asarray(v_idx, dtype=int)
        grads, loss = nn.mse_grad(self.online, feats, sel, targets)
        nn.adam_step(self.online, self.adam, grads)
        return loss

    def polyak(self, tau: float) -> None:
        nn.polyak_update(self.target, self.online, tau)

    def networks(self) -> dict[str, nn.Mlp]:
        return {"online": self.online}


class DecomposedHead:
    """Two nets with outputs |U*| and |V*| summed by broadcast.

    The induced Q-matrix is exactly additive by construction, so its
    double-centered residual is zero.
    """

    variant = "decomposed"

    def __init__(self, input_dim: int, nu: int, nv: int,
                 hidden: Sequence[int], lr: float, rng: np.random.Generator):
        self.nu, self.nv = nu, nv
        self.net_u = nn.Mlp.create((input_dim, *hidden, nu), rng)
        self.net_v = nn.Mlp.create((input_dim, *hidden, nv), rng)
        self.target_u = self.net_u.copy()
        self.target_v = self.net_v.copy()
        self.adam_u = nn.AdamState.for_net(self.net_u, lr)
        self.adam_v = nn.AdamState.for_net(self.net_v, lr)

    def components(self, feats: Array, use_target: bool = False
                   ) -> tuple[Array, Array]:
        feats = np.atleast_2d(feats)
        if use_target:
            return self.target_u.forward(feats), self.target_v.forward(feats)
        return self.net_u.forward(feats), self.net_v.forward(feats)

    def matrices(self, feats: Array, use_target: bool = False) -> Array:
        qu, qv = self.components(feats, use_target)
        return qu[:, :, None] + qv[:, None, :]

    def update(self, feats, u_idx, v_idx, targets) -> float:
        feats = np.atleast_2d(feats)
        u_idx = np.asarray(u_idx, dtype=int)
        v_idx = np.asarray(v_idx, dtype=int)
        qu, qv = self.components(feats)
        k = feats.shape[0]
        residuals = (qu[np.arange(k), u_idx] + qv[np.arange(k), v_idx]
                     - np.asarray(targets, dtype=float))
        nn.adam_step(self.net_u, self.adam_u,
                     nn.residual_grad(self.net_u, feats, u_idx, residuals))
        nn.adam_step(self.net_v, self.adam_v,
                     nn.residual_grad(self.net_v, feats, v_idx, residuals))
        return float(np.mean(residuals ** 2))

    def polyak(self, tau: float) -> None:
        nn.polyak_update(self.target_u, self.net_u, tau)
        nn.polyak_update(self.target_v, self.net_v, tau)

    def networks(self) -> dict[str, nn.Mlp]:
        return {"online_u": self.net_u, "online_v": self.net_v}


class SingleAgentHead:
    """Plain DQN head over one agent's own mesh (decentralized learning)."""

    variant = "single"

    def __init__(self, input_dim: int, n_actions: int,
                 hidden: Sequence[int], lr: float, rng: np.random.Generator):
        self.n_actions = n_actions
        self.online = nn.Mlp.create((input_dim, *hidden, n_actions), rng)
        self.target = self.online.copy()
        self.adam = nn.AdamState.for_net(self.online, lr)

    def values(self, feats: Array, use_target: bool = False) -> Array:
        net = self.target if use_target else self.online
        return net.forward(np.atleast_2d(feats))

    def update(self, feats, a_idx, targets) -> float:
        grads, loss = nn.mse_grad(self.online, feats,
                                  np.asarray(a_idx, dtype=int), targets)
        nn.adam_step(self.online, self.adam, grads)
        return loss

    def polyak(self, tau: float) -> None:
        nn.polyak_update(self.target, self.online, tau)

    def networks(self) -> dict[str, nn.Mlp]:
        return {"online": self.online}


def q_matrix(head, dg: DiscretizedGame, i: int, x) -> Array:
    """The |U*| x |V*| Q-matrix of a head at (t_i, x)."""
    return head.matrices(features(dg, i, x))[0]


def centered_residual(matrix: Array) -> float:
    """Max |Q - row means - col means + grand mean|; zero iff Q is additive."""
    m = np.asarray(matrix, dtype=float)
    centered = (m - m.mean(axis=1, keepdims=True)
                - m.mean(axis=0, keepdims=True) + m.mean())
    return float(np.max(np.abs(centered)))


# ---------------------------------------------------------------------------
# Target computation
# ---------------------------------------------------------------------------


def _batch_arrays(dg: DiscretizedGame, batch: Sequence[Transition]):
    feats = np.stack([features(dg, tr.t_index, tr.x) for tr in batch])
    rewards = np.array([tr.reward for tr in batch])
    terminal = np.array([tr.terminal for tr in batch])
    u_idx = np.array([tr.u_index for tr in batch], dtype=int)
    v_idx = np.array([tr.v_index for tr in batch], dtype=int)
    nt = ~terminal
    if np.any(nt):
        next_feats = np.stack([features(dg, tr.next_t_index, tr.x_next)
                               for tr in batch if not tr.terminal])
    else:
        next_feats = np.zeros((0, feats.shape[1]))
    return feats, rewards, terminal, u_idx, v_idx, next_feats


def idqn_target(head, dg: DiscretizedGame, batch: Sequence[Transition],
                gamma: float = 1.0) -> Array:
    """y = r + (gamma / 2)(minmax + maximin) of the target net at the next
    state; terminal rows never query the network."""
    _, rewards, terminal, _, _, next_feats = _batch_arrays(dg, batch)
    y = rewards.copy()
    if next_feats.shape[0]:
        mats = head.matrices(next_feats, use_target=True)
        minmax = mats.max(axis=2).min(axis=1)
        maximin = mats.min(axis=1).max(axis=1)
        y[~terminal] += 0.5 * gamma * (minmax + maximin)
    return y


def madqn_targets(head_u, head_v, dg: DiscretizedGame,
                  batch: Sequence[Transition], gamma: float = 1.0
                  ) -> tuple[Array, Array]:
    """y_u = r + gamma minmax Q_u(next); y_v = r + gamma maximin Q_v(next)."""
    _, rewards, terminal, _, _, next_feats = _batch_arrays(dg, batch)
    y_u = rewards.copy()
    y_v = rewards.copy()
    if next_feats.shape[0]:
        mats_u = head_u.matrices(next_feats, use_target=True)
        mats_v = head_v.matrices(next_feats, use_target=True)
        y_u[~terminal] += gamma * mats_u.max(axis=2).min(axis=1)
        y_v[~terminal] += gamma * mats_v.min(axis=1).max(axis=1)
    return y_u, y_v


def nashdqn_targets(head, dg: DiscretizedGame, batch: Sequence[Transition],
                    gamma: float = 1.0) -> Array:
    """y = r + gamma * mixed-equilibrium value of the target-net matrix."""
    _, rewards, terminal, _, _, next_feats = _batch_arrays(dg, batch)
    y = rewards.copy()
    if next_feats.shape[0]:
        mats = head.matrices(next_feats, use_target=True)
        values = np.array([nash_mixed(m).value for m in mats])
        y[~terminal] += gamma * values
    return y


def counterdqn_policy(head, dg: DiscretizedGame, i: int, x, u_idx: int) -> int:
    """Second agent's counter action: argmax over the row of the chosen u."""
    row = q_matrix(head, dg, i, x)[u_idx]
    return int(np.argmax(row))


# ---------------------------------------------------------------------------
# Policies
# ---------------------------------------------------------------------------


class MatrixNetPolicy:
    """Greedy pure policy from a Q-matrix head (either side)."""

    def __init__(self, head, dg: DiscretizedGame, side: str):
        self.head = head
        self.dg = dg
        self.side = side

    def actions(self, i: int, states: Array) -> Array:
        mats = self.head.matrices(features(self.dg, i, np.atleast_2d(states)))
        if self.side == "u":
            return np.argmin(mats.max(axis=2), axis=1)
        return np.argmax(mats.min(axis=1), axis=1)

    def __call__(self, i: int, x) -> int:
        return int(self.actions(i, np.atleast_2d(x))[0])


class SingleNetPolicy:
    """Greedy policy of a decentralized single-agent head."""

    def __init__(self, head: SingleAgentHead, dg: DiscretizedGame, side: str):
        self.head = head
        self.dg = dg
        self.side = side

    def actions(self, i: int, states: Array) -> Array:
        q = self.head.values(features(self.dg, i, np.atleast_2d(states)))
        return np.argmin(q, axis=1) if self.side == "u" else np.argmax(q, axis=1)

    def __call__(self, i: int, x) -> int:
        return int(self.actions(i, np.atleast_2d(x))[0])


class MixedNetPolicy:
    """Sampled mixed policy from equilibrium distributions (NashDQN)."""

    def __init__(self, head, dg: DiscretizedGame, side: str, seed: int = 0):
        self.head = head
        self.dg = dg
        self.side = side
        self._rng = np.random.default_rng(seed)

    def distribution(self, i: int, x) -> Array:
        sol = nash_mixed(q_matrix(self.head, self.dg, i, x))
        return sol.row_dist if self.side == "u" else sol.col_dist

    def actions(self, i: int, states: Array) -> Array:
        states = np.atleast_2d(states)
        return np.array([self(i, x) for x in states], dtype=int)

    def __call__(self, i: int, x) -> int:
        dist = self.distribution(i, x)
        return int(self._rng.choice(len(dist), p=dist))


class CounterNetPolicy:
    """Action-conditioned counter policy (CounterDQN's informed agent)."""

    def __init__(self, head, dg: DiscretizedGame, side: str):
        self.head = head
        self.dg = dg
        self.side = side  # side of the counter agent

    def __call__(self, i: int, x, opponent_idx: int) -> int:
        mat = q_matrix(self.head, self.dg, i, x)
        if self.side == "v":
            return int(np.argmax(mat[opponent_idx]))
        return int(np.argmin(mat[:, opponent_idx]))


# ---------------------------------------------------------------------------
# Training loop
# ---------------------------------------------------------------------------


@dataclass
class TrainResult:
    config: TrainConfig
    dg: DiscretizedGame
    policy_u: object
    policy_v: object
    log: list[dict]
    heads: dict[str, object]


class _LoopState:
    def __init__(self, dg: DiscretizedGame):
        self.dg = dg
        self.x = dg.game.initial_state.copy()
        self.i = 0
        self.episode = 0
        self.episode_return = 0.0
        self.losses: list[float] = []


def _interact_and_learn(dg, cfg: TrainConfig, select_actions, learn,
                        polyak, log: list[dict], total_steps: int,
                        buffer: ReplayBuffer, track_decomp=None) -> None:
    state = _LoopState(dg)
    for step_num in range(total_steps):
        zeta = zeta_schedule(step_num, total_steps)
        u_idx, v_idx = select_actions(state.i, state.x, zeta)
        x_next, r, terminal = step(dg, state.i, state.x, u_idx, v_idx)
        buffer.add(Transition(state.i, state.x, u_idx, v_idx, r,
                              state.i + 1, x_next, terminal))
        state.episode_return += r
        if len(buffer) >= cfg.batch_size:
            loss = learn(buffer.sample(cfg.batch_size))
            if not math.isfinite(loss):
                raise TrainError(
                    f"non-finite loss at step {step_num}; last batch kept in buffer")
            state.losses.append(loss)
            polyak(cfg.tau)
        if terminal:
            record = {
                "episode": state.episode,
                "steps": step_num + 1,
                "J": state.episode_return,
                "zeta": zeta,
                "mean_loss": (float(np.mean(state.losses))
                              if state.losses else None),
            }
            if track_decomp is not None:
                record["decomp_residual"] = track_decomp()
            log.append(record)
            state.episode += 1
            state.x = dg.game.initial_state.copy()
            state.i = 0
            state.episode_return = 0.0
            state.losses = []
        else:
            state.x = x_next
            state.i += 1


def train(config: TrainConfig) -> TrainResult:
    """Run one training job; dispatches on the algorithm name."""
    cfg = config.resolved()
    if cfg.algorithm not in ALGORITHMS:
        raise TrainError(f"unknown algorithm {cfg.algorithm!r}; "
                         f"known: {ALGORITHMS}")
    if cfg.algorithm == "2xddqn":
        return train_decentralized(cfg)
    dg = build_discretized(cfg)
    nu, nv = len(dg.u_mesh), len(dg.v_mesh)
    input_dim = 1 + dg.game.state_dim
    seeds = np.random.SeedSequence(cfg.seed).spawn(4)
    net_rng = np.random.default_rng(seeds[0])
    explore_rng = np.random.default_rng(seeds[1])
    buffer = ReplayBuffer(cfg.buffer_capacity,
                          seed=int(seeds[2].generate_state(1)[0]))
    log: list[dict] = []

    if cfg.algorithm in ("idqn", "nashdqn"):
        head = SharedMatrixHead(input_dim, nu, nv, cfg.hidden, cfg.lr, net_rng)

        if cfg.algorithm == "idqn":
            def select(i, x, zeta):
                gu, gv = greedy_pair(q_matrix(head, dg, i, x))
                return (epsilon_greedy(gu, zeta, nu, explore_rng),
                        epsilon_greedy(gv, zeta, nv, explore_rng))

            def learn(batch):
                y = idqn_target(head, dg, batch, cfg.gamma)
                feats, _, _, u_idx, v_idx, _ = _batch_arrays(dg, batch)
                return head.update(feats, u_idx, v_idx, y)
        else:
            def select(i, x, zeta):
                sol = nash_mixed(q_matrix(head, dg, i, x))
                pu = (1 - zeta) * sol.row_dist + zeta / nu
                pv = (1 - zeta) * sol.col_dist + zeta / nv
                return (int(explore_rng.choice(nu, p=pu)),
                        int(explore_rng.choice(nv, p=pv)))

            def learn(batch):
                y = nashdqn_targets(head, dg, batch, cfg.gamma)
                feats, _, _, u_idx, v_idx, _ = _batch_arrays(dg, batch)
                return head.update(feats, u_idx, v_idx, y)

        _interact_and_learn(dg, cfg, select, learn, head.polyak, log,
                            cfg.total_steps, buffer)
        if cfg.algorithm == "idqn":
            policy_u = MatrixNetPolicy(head, dg, "u")
            policy_v = MatrixNetPolicy(head, dg, "v")
        else:
            policy_u = MixedNetPolicy(head, dg, "u",
                                      seed=int(seeds[3].generate_state(1)[0]))
            policy_v = MixedNetPolicy(head, dg, "v",
                                      seed=int(seeds[3].generate_state(1)[0]) + 1)
        return TrainResult(cfg, dg, policy_u, policy_v, log, {"shared": head})

    if cfg.algorithm == "didqn":
        head = DecomposedHead(input_dim, nu, nv, cfg.hidden, cfg.lr, net_rng)

        def select(i, x, zeta):
            qu, qv = head.components(features(dg, i, x))
            return (epsilon_greedy(int(np.argmin(qu[0])), zeta, nu, explore_rng),
                    epsilon_greedy(int(np.argmax(qv[0])), zeta, nv, explore_rng))

        def learn(batch):
            # minmax == maximin == min Q1 + max Q2 for additive matrices
            feats, rewards, terminal, u_idx, v_idx, next_feats = \
                _batch_arrays(dg, batch)
            y = rewards.copy()
            if next_feats.shape[0]:
                qu, qv = head.components(next_feats, use_target=True)
                y[~terminal] += cfg.gamma * (qu.min(axis=1) + qv.max(axis=1))
            return head.update(feats, u_idx, v_idx, y)

        def decomp_residual():
            return centered_residual(q_matrix(head, dg, 0,
                                              dg.game.initial_state))

        _interact_and_learn(dg, cfg, select, learn, head.polyak, log,
                            cfg.total_steps, buffer,
                            track_decomp=decomp_residual)
        return TrainResult(cfg, dg,
                           DecomposedNetPolicy(head, dg, "u"),
                           DecomposedNetPolicy(head, dg, "v"),
                           log, {"decomposed": head})

    if cfg.algorithm == "madqn":
        head_u = SharedMatrixHead(input_dim, nu, nv, cfg.hidden, cfg.lr, net_rng)
        head_v = SharedMatrixHead(input_dim, nu, nv, cfg.hidden, cfg.lr, net_rng)

        def select(i, x, zeta):
            gu = int(np.argmin(q_matrix(head_u, dg, i, x).max(axis=1)))
            gv = int(np.argmax(q_matrix(head_v, dg, i, x).min(axis=0)))
            return (epsilon_greedy(gu, zeta, nu, explore_rng),
                    epsilon_greedy(gv, zeta, nv, explore_rng))

        def learn(batch):
            y_u, y_v = madqn_targets(head_u, head_v, dg, batch, cfg.gamma)
            feats, _, _, u_idx, v_idx, _ = _batch_arrays(dg, batch)
            loss_u = head_u.update(feats, u_idx, v_idx, y_u)
            loss_v = head_v.update(feats, u_idx, v_idx, y_v)
            return 0.5 * (loss_u + loss_v)

        def polyak(tau):
            head_u.polyak(tau)
            head_v.polyak(tau)

        _interact_and_learn(dg, cfg, select, learn, polyak, log,
                            cfg.total_steps, buffer)
        return TrainResult(cfg, dg,
                           MatrixNetPolicy(head_u, dg, "u"),
                           MatrixNetPolicy(head_v, dg, "v"),
                           log, {"u": head_u, "v": head_v})

    # counterdqn: two symmetric half-budget runs
    half = cfg.total_steps // 2
    head_u = SharedMatrixHead(input_dim, nu, nv, cfg.hidden, cfg.lr, net_rng)

    def select_phase1(i, x, zeta):
        mat = q_matrix(head_u, dg, i, x)
        u_idx = epsilon_greedy(int(np.argmin(mat.max(axis=1))), zeta, nu,
                               explore_rng)
        v_idx = epsilon_greedy(int(np.argmax(mat[u_idx])), zeta, nv,
                               explore_rng)
        return u_idx, v_idx

    def learn_phase1(batch):
        _, rewards, terminal, u_idx, v_idx, next_feats = _batch_arrays(dg, batch)
        y = rewards.copy()
        if next_feats.shape[0]:
            mats = head_u.matrices(next_feats, use_target=True)
            y[~terminal] += cfg.gamma * mats.max(axis=2).min(axis=1)
        feats, *_ = _batch_arrays(dg, batch)
        return head_u.update(feats, u_idx, v_idx, y)

    _interact_and_learn(dg, cfg, select_phase1, learn_phase1, head_u.polyak,
                        log, half, buffer)

    head_v = SharedMatrixHead(input_dim, nu, nv, cfg.hidden, cfg.lr, net_rng)
    buffer2 = ReplayBuffer(cfg.buffer_capacity,
                           seed=int(seeds[3].generate_state(1)[0]))

    def select_phase2(i, x, zeta):
        mat = q_matrix(head_v, dg, i, x)
        v_idx = epsilon_greedy(int(np.argmax(mat.min(axis=0))), zeta, nv,
                               explore_rng)
        u_idx = epsilon_greedy(int(np.argmin(mat[:, v_idx])), zeta, nu,
                               explore_rng)
        return u_idx, v_idx

    def learn_phase2(batch):
        _, rewards, terminal, u_idx, v_idx, next_feats = _batch_arrays(dg, batch)
        y = rewards.copy()
        if next_feats.shape[0]:
            mats = head_v.matrices(next_feats, use_target=True)
            y[~terminal] += cfg.gamma * mats.min(axis=1).max(axis=1)
        feats, *_ = _batch_arrays(dg, batch)
        return head_v.update(feats, u_idx, v_idx, y)

    _interact_and_learn(dg, cfg, select_phase2, learn_phase2, head_v.polyak,
                        log, half, buffer2)
    return TrainResult(cfg, dg,
                       MatrixNetPolicy(head_u, dg, "u"),
                       MatrixNetPolicy(head_v, dg, "v"),
                       log, {"u": head_u, "v": head_v,
                             "counter_v": CounterNetPolicy(head_u, dg, "v"),
                             "counter_u": CounterNetPolicy(head_v, dg, "u")})


class DecomposedNetPolicy:
    """Greedy policy of one component of a decomposed head."""

    def __init__(self, head: DecomposedHead, dg: DiscretizedGame, side: str):
        self.head = head
        self.dg = dg
        self.side = side

    def actions(self, i: int, states: Array) -> Array:
        qu, qv = self.head.components(
            features(self.dg, i, np.atleast_2d(states)))
        return np.argmin(qu, axis=1) if self.side == "u" else np.argmax(qv, axis=1)

    def __call__(self, i: int, x) -> int:
        return int(self.actions(i, np.atleast_2d(x))[0])


def train_decentralized(config: TrainConfig) -> TrainResult:
    """2xDDQN: each agent owns a single-agent double-DQN over its own mesh;
    the opponent is just part of the environment."""
    cfg = config.resolved()
    dg = build_discretized(cfg)
    nu, nv = len(dg.u_mesh), len(dg.v_mesh)
    input_dim = 1 + dg.game.state_dim
    seeds = np.random.SeedSequence(cfg.seed).spawn(4)
    net_rng = np.random.default_rng(seeds[0])
    explore_rng = np.random.default_rng(seeds[1])
    buffer = ReplayBuffer(cfg.buffer_capacity,
                          seed=int(seeds[2].generate_state(1)[0]))
    head_u = SingleAgentHead(input_dim, nu, cfg.hidden, cfg.lr, net_rng)
    head_v = SingleAgentHead(input_dim, nv, cfg.hidden, cfg.lr, net_rng)
    log: list[dict] = []

    def select(i, x, zeta):
        feats = features(dg, i, x)
        gu = int(np.argmin(head_u.values(feats)[0]))
        gv = int(np.argmax(head_v.values(feats)[0]))
        return (epsilon_greedy(gu, zeta, nu, explore_rng),
                epsilon_greedy(gv, zeta, nv, explore_rng))

    def learn(batch):
        feats, rewards, terminal, u_idx, v_idx, next_feats = \
            _batch_arrays(dg, batch)
        y_u = rewards.copy()
        y_v = rewards.copy()
        if next_feats.shape[0]:
            # double-Q: online selects, target evaluates
            qu_on = head_u.values(next_feats)
            qv_on = head_v.values(next_feats)
            qu_tg = head_u.values(next_feats, use_target=True)
            qv_tg = head_v.values(next_feats, use_target=True)
            rows = np.arange(next_feats.shape[0])
            y_u[~terminal] += cfg.gamma * qu_tg[rows, np.argmin(qu_on, axis=1)]
            y_v[~terminal] += cfg.gamma * qv_tg[rows, np.argmax(qv_on, axis=1)]
        loss_u = head_u.update(feats, u_idx, y_u)
        loss_v = head_v.update(feats, v_idx, y_v)
        return 0.5 * (loss_u + loss_v)

    def polyak(tau):
        head_u.polyak(tau)
        head_v.polyak(tau)

    _interact_and_learn(dg, cfg, select, learn, polyak, log,
                        cfg.total_steps, buffer)
    return TrainResult(cfg, dg,
                       SingleNetPolicy(head_u, dg, "u"),
                       SingleNetPolicy(head_v, dg, "v"),
                       log, {"u": head_u, "v": head_v})


def train_best_response(dg: DiscretizedGame, frozen, frozen_side: str,
                        hidden: Sequence[int], lr: float, total_steps: int,
                        seed: int, tau: float = 0.01, batch_size: int = 64,
                        buffer_capacity: int = 100000):
    """Single-agent double-DQN best response to a frozen opponent policy.

    Returns the greedy policy of the free agent (maximizer when frozen_side
    is "u", minimizer when "v").
    """
    if frozen_side not in ("u", "v"):
        raise TrainError("frozen_side must be 'u' or 'v'")
    free_side = "v" if frozen_side == "u" else "u"
    mesh = dg.v_mesh if free_side == "v" else dg.u_mesh
    n_actions = len(mesh)
    input_dim = 1 + dg.game.state_dim
    seeds = np.random.SeedSequence(seed).spawn(3)
    net_rng = np.random.default_rng(seeds[0])
    explore_rng = np.random.default_rng(seeds[1])
    buffer = ReplayBuffer(buffer_capacity,
                          seed=int(seeds[2].generate_state(1)[0]))
    head = SingleAgentHead(input_dim, n_actions, hidden, lr, net_rng)
    cfg = TrainConfig(algorithm="2xddqn", env=dg.game.name,
                      batch_size=batch_size, tau=tau,
                      total_steps=total_steps)
    log: list[dict] = []

    def select(i, x, zeta):
        q = head.values(features(dg, i, x))[0]
        greedy = int(np.argmax(q)) if free_side == "v" else int(np.argmin(q))
        free_idx = epsilon_greedy(greedy, zeta, n_actions, explore_rng)
        frozen_idx = int(frozen(i, x))
        if free_side == "v":
            return frozen_idx, free_idx
        return free_idx, frozen_idx

    def learn(batch):
        feats, rewards, terminal, u_idx, v_idx, next_feats = \
            _batch_arrays(dg, batch)
        a_idx = v_idx if free_side == "v" else u_idx
        y = rewards.copy()
        if next_feats.shape[0]:
            q_on = head.values(next_feats)
            q_tg = head.values(next_feats, use_target=True)
            rows = np.arange(next_feats.shape[0])
            pick = (np.argmax(q_on, axis=1) if free_side == "v"
                    else np.argmin(q_on, axis=1))
            y[~terminal] += q_tg[rows, pick]
        return head.update(feats, a_idx, y)

    _interact_and_learn(dg, cfg, select, learn, head.polyak, log,
                        total_steps, buffer)
    return SingleNetPolicy(head, dg, free_side), log
