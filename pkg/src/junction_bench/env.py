"""Reset/step environment around the intersection simulator.

Observation layout (34 floats, ego first):

    [v_e, g_before, g_inside, g_after,
     5 x (v_x, v_y, x, y, cos(theta), sin(theta))]

Social blocks are expressed in the ego frame (x forward, y left), sorted by
distance; missing vehicles are padded with ``(0, 0, 100, 100, 0, 0)``.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .behavior import AEBParams, policy_step
from .road_network import IntersectionMap, build_default_intersection, region_of
from .scenario import (ConcreteScenario, ScenarioInstance, StochasticConfig, TrainingScenario,
                       instantiate, instantiate_stochastic, instantiate_training)
from .traffic_gen import maybe_spawn
from .vehicle_sim import (DEFAULT_DIMS, Role, SimConfig, VehicleState, WorldState,
                          advance_world, boxes_overlap, footprint, track_speed)

N_SOCIAL = 5
SOCIAL_BLOCK = 6
OBS_DIM = 4 + N_SOCIAL * SOCIAL_BLOCK
PAD_BLOCK = (0.0, 0.0, 100.0, 100.0, 0.0, 0.0)
MAX_TARGET_SPEED = 9.0


class Outcome(enum.Enum):
    RUNNING = "running"
    SUCCESS = "success"
    COLLISION = "collision"
    TIMEOUT = "timeout"


class LifecycleError(RuntimeError):
    """Stepping an environment that has no active episode."""


@dataclass(frozen=True)
class RewardConfig:
    step_penalty: float = -0.1
    success: float = 150.0
    collision: float = -350.0
    timeout: float = -150.0
    t_max: float = 30.0
    late_step_reward: float = 0.0

    def __post_init__(self):
        if self.t_max <= 0:
            raise ValueError("t_max must be positive")


@dataclass
class StepOutput:
    observation: np.ndarray
    reward: float
    done: bool
    outcome: Outcome


@dataclass
class EpisodeResult:
    outcome: Outcome
    duration: float
    total_reward: float
    seed: int | None = None
    steps: int = 0


def clamp_action(a) -> tuple[float, float]:
    a0, a1 = (float(x) for x in a)
    return min(max(a0, 0.0), 1.0), min(max(a1, 0.0), 1.0)


def decode_action(a) -> float:
    """Map ``(a0, a1)`` in [0, 1]^2 to a target speed in [0, 9] m/s."""
    a0, a1 = clamp_action(a)
    return (a0 - a1 + 1.0) / 2.0 * MAX_TARGET_SPEED


def encode_target_speed(v_target: float) -> tuple[float, float]:
    """An action whose decoded target speed is ``v_target`` (clamped to [0, 9])."""
    a_hat = 2.0 * min(max(v_target, 0.0), MAX_TARGET_SPEED) / MAX_TARGET_SPEED - 1.0
    return (max(a_hat, 0.0), max(-a_hat, 0.0))


def compute_reward(prev_time: float, outcome: Outcome, cfg: RewardConfig) -> float:
    if outcome is Outcome.SUCCESS:
        return cfg.success
    if outcome is Outcome.COLLISION:
        return cfg.collision
    if outcome is Outcome.TIMEOUT:
        return cfg.timeout
    return cfg.step_penalty if prev_time <= 0.5 * cfg.t_max + 1e-9 else cfg.late_step_reward


def observe(world: WorldState, imap: IntersectionMap, ego: VehicleState) -> np.ndarray:
    obs = np.empty(OBS_DIM)
    obs[0] = ego.v
    obs[1:4] = 0.0
    obs[1 + int(region_of(imap, ego.route, ego.s))] = 1.0
    (ex, ey), eh = world.pose(ego)
    c, s = math.cos(eh), math.sin(eh)
    rows = []
    for veh in world.vehicles:
        if veh.id == ego.id:
            continue
        (px, py), h = world.pose(veh)
        dx, dy = px - ex, py - ey
        x = c * dx + s * dy
        y = -s * dx + c * dy
        rel = h - eh
        cr, sr = math.cos(rel), math.sin(rel)
        rows.append((x * x + y * y, veh.id, (veh.v * cr, veh.v * sr, x, y, cr, sr)))
    rows.sort(key=lambda r: (r[0], r[1]))
    blocks = [r[2] for r in rows[:N_SOCIAL]]
    blocks += [PAD_BLOCK] * (N_SOCIAL - len(blocks))
    obs[4:] = np.asarray(blocks, dtype=float).ravel()
    return obs


def _ego_collides(world: WorldState, ego: VehicleState) -> bool:
    box = footprint(ego, world)
    (ex, ey), _ = world.pose(ego)
    reach = math.hypot(*ego.dims[:2])
    for veh in world.vehicles:
        if veh.id == ego.id:
            continue
        (px, py), _ = world.pose(veh)
        if math.hypot(px - ex, py - ey) > (reach + math.hypot(*veh.dims[:2])) / 2:
            continue
        if boxes_overlap(box, footprint(veh, world)):
            return True
    return False


@dataclass
class IntersectionEnv:
    """Single-episode-at-a-time environment.

    ``reset`` accepts a :class:`ConcreteScenario` (deterministic test), a
    :class:`TrainingScenario` or a :class:`StochasticConfig`. All randomness
    derives from the seed passed to ``reset``. ``social_aeb`` parameterizes
    the flow vehicles of grid-cell scenarios.
    """

    map: IntersectionMap = field(default_factory=build_default_intersection)
    sim: SimConfig = field(default_factory=SimConfig)
    reward_cfg: RewardConfig = field(default_factory=RewardConfig)
    warmup: float = 5.0
    ego_dims: tuple[float, float, float] = DEFAULT_DIMS
    social_aeb: AEBParams = field(default_factory=AEBParams)

    def __post_init__(self):
        self.world: WorldState | None = None
        self.instance: ScenarioInstance | None = None
        self.done = True
        self.steps = 0
        self.rewards: list[float] = []
        self.outcome = Outcome.RUNNING
        self.seed = None
        self._rngs = []
        self.ego_id = None
        self.last_observation = None

    # lifecycle ----------------------------------------------------------

    def reset(self, scenario, seed: int = 0) -> np.ndarray:
        self.seed = seed
        root = np.random.SeedSequence(seed)
        scen_seq, flow_seq = root.spawn(2)
        if isinstance(scenario, ConcreteScenario):
            inst = instantiate(scenario, self.map, self.social_aeb)
        elif isinstance(scenario, TrainingScenario):
            inst = instantiate_training(scenario, self.map, np.random.default_rng(scen_seq))
        elif isinstance(scenario, StochasticConfig):
            inst = instantiate_stochastic(scenario, self.map)
        elif isinstance(scenario, ScenarioInstance):
            inst = scenario
        else:
            raise TypeError(f"unsupported scenario {scenario!r}")
        self.instance = inst
        self._rngs = [np.random.default_rng(s) for s in flow_seq.spawn(len(inst.flows))]
        world = self._spawn(inst.world)
        for _ in range(int(round(self.warmup / self.sim.dt))):
            world = self._spawn(advance_world(world, self._social_commands(world), self.sim))
        ego = VehicleState(id=world.next_id, route=self.map.route(inst.ego.movement),
                           s=inst.ego.s, v=inst.ego.v, dims=self.ego_dims, role=Role.EGO,
                           v_target=inst.ego.v)
        self.ego_id = ego.id
        self.world = world.add(ego)
        self.steps = 0
        self.rewards = []
        self.done = False
        self.outcome = Outcome.RUNNING
        self.last_observation = observe(self.world, self.map, ego)
        return self.last_observation

    def step(self, action) -> StepOutput:
        if self.done:
            raise LifecycleError("episode finished; call reset()")
        world = self.world
        ego = world.get(self.ego_id)
        v_target = decode_action(action)
        commands = self._social_commands(world)
        commands[ego.id] = track_speed(ego.v, v_target, self.sim)
        prev_time = self.steps * self.sim.dt
        world = self._spawn(advance_world(world, commands, self.sim))
        self.steps += 1
        self.world = world
        ego = world.get(self.ego_id)
        if _ego_collides(world, ego):
            outcome = Outcome.COLLISION
        elif ego.at_route_end:
            outcome = Outcome.SUCCESS
        elif self.steps * self.sim.dt >= self.reward_cfg.t_max - 1e-9:
            outcome = Outcome.TIMEOUT
        else:
            outcome = Outcome.RUNNING
        reward = compute_reward(prev_time, outcome, self.reward_cfg)
        self.rewards.append(reward)
        self.outcome = outcome
        self.done = outcome is not Outcome.RUNNING
        self.last_observation = observe(world, self.map, ego)
        return StepOutput(self.last_observation, reward, self.done, outcome)

    # helpers ------------------------------------------------------------

    @property
    def ego(self) -> VehicleState:
        return self.world.get(self.ego_id)

    @property
    def elapsed(self) -> float:
        """Time since ego release."""
        return self.steps * self.sim.dt

    def result(self) -> EpisodeResult:
        return EpisodeResult(self.outcome, self.elapsed, math.fsum(self.rewards),
                             self.seed, self.steps)

    def _social_commands(self, world: WorldState) -> dict:
        cmds = {}
        for veh in world.vehicles:
            if veh.role is Role.SOCIAL:
                cmds[veh.id] = policy_step(world, veh, veh.profile, veh.v_target, self.sim)
        return cmds

    def _spawn(self, world: WorldState) -> WorldState:
        inst = self.instance
        for flow, spawner, rng in zip(inst.flows, inst.spawners, self._rngs):
            veh = maybe_spawn(spawner, flow, world, rng)
            if veh is not None:
                world = world.add(veh)
        return world
