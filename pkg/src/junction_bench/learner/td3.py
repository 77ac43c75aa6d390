"""TD3: twin critics, clipped target smoothing, delayed actor updates."""
from __future__ import annotations

import csv
import logging
import struct
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..road_network import Movement, Turn
from ..scenario import training_scenario
from .network import ACTION_DIM, OBS_DIM, Adam, Network

log = logging.getLogger(__name__)

MAGIC = b"JBA1"
FORMAT_VERSION = 1


@dataclass(frozen=True)
class TD3Config:
    gamma: float = 0.99
    tau: float = 0.005
    policy_delay: int = 2
    expl_noise: float = 0.1
    target_noise: float = 0.2
    noise_clip: float = 0.5
    batch_size: int = 256
    actor_lr: float = 3e-4
    critic_lr: float = 3e-4
    buffer_size: int = 100_000
    warmup_steps: int = 1000
    hidden: int = 64
    moving_window: int = 100
    dtype: str = "float64"
    # L2 weight on the part of the actor's pre-sigmoid outputs beyond +-preact_margin;
    # keeps them out of the flat sigmoid tails where the policy gradient vanishes
    preact_penalty: float = 0.0
    preact_margin: float = 4.0

    def __post_init__(self):
        if not 0 < self.gamma < 1:
            raise ValueError("gamma must lie in (0, 1)")
        if not 0 < self.tau <= 1:
            raise ValueError("tau must lie in (0, 1]")
        if self.policy_delay < 1:
            raise ValueError("policy_delay must be >= 1")
        if self.preact_penalty < 0 or self.preact_margin < 0:
            raise ValueError("preact_penalty and preact_margin must be >= 0")


class ReplayBuffer:
    """Fixed-capacity FIFO ring of transitions."""

    def __init__(self, capacity: int, obs_dim: int = OBS_DIM, act_dim: int = ACTION_DIM,
                 dtype=np.float64):
        self.capacity = int(capacity)
        self.obs = np.zeros((self.capacity, obs_dim), dtype)
        self.act = np.zeros((self.capacity, act_dim), dtype)
        self.rew = np.zeros(self.capacity, dtype)
        self.next_obs = np.zeros((self.capacity, obs_dim), dtype)
        self.done = np.zeros(self.capacity, dtype)
        self.ptr = 0
        self.size = 0

    def __len__(self):
        return self.size

    def add(self, obs, act, rew, next_obs, done):
        i = self.ptr
        self.obs[i], self.act[i], self.rew[i] = obs, act, rew
        self.next_obs[i], self.done[i] = next_obs, float(done)
        self.ptr = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, batch_size: int, rng: np.random.Generator):
        idx = rng.integers(0, self.size, size=batch_size)
        return self.obs[idx], self.act[idx], self.rew[idx], self.next_obs[idx], self.done[idx]


class TD3Agent:
    def __init__(self, cfg: TD3Config = TD3Config(), seed=0):
        rng = np.random.default_rng(seed)
        self.cfg = cfg
        self.actor = Network("actor", cfg.hidden, rng, dtype=cfg.dtype)
        self.critic1 = Network("critic", cfg.hidden, rng, dtype=cfg.dtype)
        self.critic2 = Network("critic", cfg.hidden, rng, dtype=cfg.dtype)
        self.actor_target = self.actor.copy()
        self.critic1_target = self.critic1.copy()
        self.critic2_target = self.critic2.copy()
        self.actor_opt = Adam(self.actor.params, cfg.actor_lr)
        self.critic1_opt = Adam(self.critic1.params, cfg.critic_lr)
        self.critic2_opt = Adam(self.critic2.params, cfg.critic_lr)
        self.updates = 0

    def act(self, obs, noise: float = 0.0, rng=None) -> np.ndarray:
        a = self.actor.forward(obs)
        if noise > 0:
            a = a + noise * rng.standard_normal(a.shape)
        return np.clip(a, 0.0, 1.0)

    def pairs(self):
        return [(self.actor, self.actor_target), (self.critic1, self.critic1_target),
                (self.critic2, self.critic2_target)]


def polyak(online: Network, target: Network, tau: float):
    for p, tp in zip(online.params, target.params):
        tp *= 1 - tau
        tp += tau * p


def td3_update(agent: TD3Agent, buffer: ReplayBuffer, cfg: TD3Config, rng) -> dict:
    """One TD3 gradient step on a minibatch; returns diagnostics."""
    if len(buffer) < cfg.batch_size:
        raise ValueError(f"buffer holds {len(buffer)} < batch {cfg.batch_size} transitions")
    obs, act, rew, nxt, done = buffer.sample(cfg.batch_size, rng)
    n = cfg.batch_size

    noise = np.clip(cfg.target_noise * rng.standard_normal((n, ACTION_DIM)),
                    -cfg.noise_clip, cfg.noise_clip).astype(obs.dtype)
    next_act = np.clip(agent.actor_target.forward(nxt) + noise, 0.0, 1.0)
    q1_t = agent.critic1_target.forward(nxt, next_act)[:, 0]
    q2_t = agent.critic2_target.forward(nxt, next_act)[:, 0]
    target = rew + cfg.gamma * (1.0 - done) * np.minimum(q1_t, q2_t)

    diag = {"target_mean": float(target.mean())}
    for name, critic, opt in (("q1", agent.critic1, agent.critic1_opt),
                              ("q2", agent.critic2, agent.critic2_opt)):
        q = critic.forward(obs, act)[:, 0]
        err = q - target
        grads, _, _ = critic.backward((2.0 / n) * err[:, None])
        opt.step(grads)
        diag[f"{name}_loss"] = float(np.mean(err ** 2))

    agent.updates += 1
    if agent.updates % cfg.policy_delay == 0:
        a = agent.actor.forward(obs)
        q = agent.critic1.forward(obs, a)[:, 0]
        _, _, dq_da = agent.critic1.backward(np.full((n, 1), -1.0 / n))
        loss = -q.mean()
        grad_pre = None
        if cfg.preact_penalty > 0:
            pre = agent.actor.preactivation
            excess = np.sign(pre) * np.maximum(np.abs(pre) - cfg.preact_margin, 0.0)
            loss += cfg.preact_penalty * float(np.mean(np.sum(excess ** 2, axis=1)))
            grad_pre = (2.0 * cfg.preact_penalty / n) * excess
        grads, _, _ = agent.actor.backward(dq_da, grad_pre)
        agent.actor_opt.step(grads)
        diag["actor_loss"] = float(loss)
        for online, tgt in agent.pairs():
            polyak(online, tgt, cfg.tau)
    return diag


# persistence -----------------------------------------------------------------

def save_actor(net: Network, path) -> Path:
    """Write actor parameters: magic, version, shapes, then little-endian float64 data."""
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", FORMAT_VERSION, len(net.params)))
        for p in net.params:
            fh.write(struct.pack("<I", p.ndim))
            fh.write(struct.pack(f"<{p.ndim}I", *p.shape))
        for p in net.params:
            fh.write(np.ascontiguousarray(p, dtype="<f8").tobytes())
    return path


def load_actor(path) -> Network:
    data = Path(path).read_bytes()
    if data[:4] != MAGIC:
        raise ValueError(f"{path}: not an actor parameter file")
    version, count = struct.unpack_from("<II", data, 4)
    if version != FORMAT_VERSION:
        raise ValueError(f"{path}: unsupported format version {version}")
    off = 12
    shapes = []
    for _ in range(count):
        (ndim,) = struct.unpack_from("<I", data, off)
        off += 4
        shapes.append(struct.unpack_from(f"<{ndim}I", data, off))
        off += 4 * ndim
    hidden = shapes[0][1]
    net = Network("actor", hidden, rng=0)
    if [tuple(s) for s in shapes] != [p.shape for p in net.params]:
        raise ValueError(f"{path}: layer shapes {shapes} do not match the actor layout")
    params = []
    for shape in shapes:
        size = int(np.prod(shape))
        params.append(np.frombuffer(data, "<f8", size, off).reshape(shape).astype(float))
        off += 8 * size
    net.params = params
    return net


# training ----------------------------------------------------------------------

@dataclass
class LearningCurve:
    window: int = 100
    rows: list = field(default_factory=list)
    _ret: deque = field(default=None, repr=False)
    _succ: deque = field(default=None, repr=False)

    def __post_init__(self):
        self._ret = deque(maxlen=self.window)
        self._succ = deque(maxlen=self.window)

    def log(self, ret: float, success: bool):
        self._ret.append(ret)
        self._succ.append(1.0 if success else 0.0)
        self.rows.append((len(self.rows), ret, bool(success),
                          float(np.mean(self._ret)), float(np.mean(self._succ))))

    @property
    def moving_success(self) -> float:
        return self.rows[-1][4] if self.rows else 0.0

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["episode", "return", "success", "moving_return", "moving_success"])
            for ep, ret, succ, mret, msucc in self.rows:
                w.writerow([ep, repr(ret), int(succ), repr(mret), repr(msucc)])


def train(env_factory, scenario, cfg: TD3Config = TD3Config(), episodes: int = 1000,
          seed: int = 0, stop_when=None, out_dir=None, agent: TD3Agent | None = None,
          progress_every: int = 0, checkpoint_every: int = 0):
    """Train a TD3 agent against ``scenario``.

    ``scenario`` is anything ``env.reset`` accepts; a bare task (``Turn`` or
    ``Movement``) selects the default training scenario for that task.

    During the first ``cfg.warmup_steps`` environment steps, each episode holds
    one uniformly drawn action (plus exploration noise) instead of querying the
    actor, so warm-up data covers sustained speeds. ``stop_when(curve)`` may end
    training early. Returns ``(curve, agent)``; with ``out_dir`` set, the actor
    and curve CSV are written there (also every ``checkpoint_every`` episodes).
    """
    if episodes < 1:
        raise ValueError("episodes must be >= 1")
    if isinstance(scenario, (Turn, Movement)):
        turn = scenario if isinstance(scenario, Turn) else scenario.turn
        scenario = training_scenario(turn)
    env = env_factory()
    seq = np.random.SeedSequence(seed)
    agent_seq, rng_seq, env_seq = seq.spawn(3)
    agent = agent or TD3Agent(cfg, np.random.default_rng(agent_seq))
    rng = np.random.default_rng(rng_seq)
    env_seeds = np.random.default_rng(env_seq)
    buffer = ReplayBuffer(cfg.buffer_size, dtype=cfg.dtype)
    curve = LearningCurve(cfg.moving_window)
    total_steps = 0
    for ep in range(episodes):
        obs = env.reset(scenario, seed=int(env_seeds.integers(2**31)))
        held = _warmup_action(rng) if total_steps < cfg.warmup_steps else None
        ret = 0.0
        while True:
            if held is not None:
                action = np.clip(held + cfg.expl_noise * rng.standard_normal(ACTION_DIM), 0, 1)
            else:
                action = agent.act(obs, cfg.expl_noise, rng)
            out = env.step(action)
            buffer.add(obs, action, out.reward, out.observation, out.done)
            obs = out.observation
            ret += out.reward
            total_steps += 1
            if total_steps >= cfg.warmup_steps and len(buffer) >= cfg.batch_size:
                td3_update(agent, buffer, cfg, rng)
            if out.done:
                break
        curve.log(ret, out.outcome.value == "success")
        if progress_every and (ep + 1) % progress_every == 0:
            r = curve.rows[-1]
            log.info("episode %d return %.1f moving_return %.1f moving_success %.2f",
                     ep, r[1], r[3], r[4])
        if out_dir is not None and checkpoint_every and (ep + 1) % checkpoint_every == 0:
            _write_artifacts(out_dir, agent, curve)
        if stop_when is not None and stop_when(curve):
            break
    if out_dir is not None:
        _write_artifacts(out_dir, agent, curve)
    return curve, agent


def _warmup_action(rng) -> np.ndarray:
    """Held warm-up action, uniform over the decoded target speed ``(a0 - a1 + 1) / 2``.

    Drawing both components independently would pile the speeds up around
    the middle of the range and rarely show the critic a sustained fast run.
    """
    u = rng.uniform(-1.0, 1.0)
    return np.array([max(u, 0.0), max(-u, 0.0)])


def _write_artifacts(out_dir, agent, curve):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_actor(agent.actor, out / "actor.bin")
    curve.to_csv(out / "learning_curve.csv")
