"""Functional, logical and concrete scenarios for the cross-intersection.

Five functional scenarios pair an ego task with a single conflicting flow.
A logical scenario spans the target-speed and gap ranges; discretizing it
with step 2 gives the 16 x 18 concrete grid used by the deterministic test.
Training scenarios activate every flow that shares the ego task, with OU
speeds and truncated-normal gaps; the stochastic test uses autopilot flows
with uniform parameters and random turns.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .behavior import AEBParams, BehaviorProfile
from .road_network import Arm, IntersectionMap, Movement, Turn
from .traffic_gen import (GapSamplerParams, OUParams, ParameterRange, SpawnerState,
                          TrafficFlowSpec)
from .vehicle_sim import WorldState

EGO_ARM = Arm.SOUTH


@dataclass(frozen=True)
class FunctionalScenario:
    id: str
    ego_task: Movement
    flow_route: Movement
    description: str


def _catalog(ego_arm: Arm = EGO_ARM):
    opp, left = ego_arm.opposite, ego_arm.left
    rows = [
        ("A", Turn.LEFT, Movement(opp, Turn.STRAIGHT), "turning left facing a going straight flow"),
        ("B", Turn.LEFT, Movement(opp, Turn.RIGHT), "turning left facing a right turning flow"),
        ("C", Turn.RIGHT, Movement(left, Turn.STRAIGHT), "turning right facing a going straight flow"),
        ("D", Turn.STRAIGHT, Movement(left, Turn.STRAIGHT), "going straight facing a going straight flow"),
        ("E", Turn.STRAIGHT, Movement(opp, Turn.LEFT), "going straight facing a left turning flow"),
    ]
    return {sid: FunctionalScenario(sid, Movement(ego_arm, turn), flow, text)
            for sid, turn, flow, text in rows}


FUNCTIONAL_SCENARIOS = _catalog()

# result-table grouping of functional scenarios by ego task
TASK_GROUPS = {Turn.LEFT: ("A", "B"), Turn.RIGHT: ("C",), Turn.STRAIGHT: ("D", "E")}


@dataclass(frozen=True)
class LogicalScenario:
    functional: FunctionalScenario
    speed_range: tuple[float, float] = (10.0, 40.0)
    gap_range: tuple[float, float] = (16.0, 50.0)
    step: float = 2.0


@dataclass(frozen=True)
class ConcreteScenario:
    functional: FunctionalScenario
    V: float
    d: float

    @property
    def label(self) -> str:
        return f"{self.functional.id}@{self.V:g},{self.d:g}"


@dataclass(frozen=True)
class StochasticConfig:
    ego_task: Movement
    n_social_flows: int = 3
    speed_range: tuple[float, float] = (10.0, 40.0)
    gap_range: tuple[float, float] = (16.0, 50.0)
    ignore_ego: bool = True
    aeb: AEBParams = AEBParams()

    def __post_init__(self):
        if not 1 <= self.n_social_flows <= 3:
            raise ValueError("n_social_flows must be 1..3 (one flow per non-ego arm)")


@dataclass(frozen=True)
class TrainingScenario:
    ego_task: Movement
    active_flows: tuple[TrafficFlowSpec, ...] = ()


@dataclass(frozen=True)
class EgoSpawn:
    movement: Movement
    s: float = 0.0
    v: float = 0.0


@dataclass
class ScenarioInstance:
    """Everything an episode needs: initial world, flows and their spawner states."""

    world: WorldState
    flows: list
    spawners: list
    ego: EgoSpawn
    label: str = ""
    meta: dict = field(default_factory=dict)


def _lattice(lo, hi, step):
    n = int(round((hi - lo) / step))
    return [lo + i * step for i in range(n + 1)]


def enumerate_grid(logical: LogicalScenario) -> list[ConcreteScenario]:
    """Row-major (speed, then gap) enumeration of the discretized logical scenario."""
    speeds = _lattice(*logical.speed_range, logical.step)
    gaps = _lattice(*logical.gap_range, logical.step)
    return [ConcreteScenario(logical.functional, v, d) for v in speeds for d in gaps]


def instantiate(c: ConcreteScenario, imap: IntersectionMap,
                aeb: AEBParams = AEBParams()) -> ScenarioInstance:
    flow = TrafficFlowSpec(
        route=c.functional.flow_route,
        speed_range=ParameterRange(10.0, 40.0),
        behavior=BehaviorProfile.speed_track_aeb(aeb),
        fixed=(float(c.V), float(c.d)),
    )
    return ScenarioInstance(WorldState(0.0, (), imap), [flow], [SpawnerState.for_flow(flow)],
                            EgoSpawn(c.functional.ego_task), c.label)


def training_scenario(task: Turn, ego_arm: Arm = EGO_ARM,
                      speed_range=(10.0, 40.0), gap: GapSamplerParams = GapSamplerParams(),
                      theta: float = 0.5, aeb: AEBParams = AEBParams(),
                      with_traffic: bool = True) -> TrainingScenario:
    """Training setup for one ego task: every functional scenario sharing it is active."""
    r = ParameterRange(*speed_range)
    flows = []
    if with_traffic:
        for fs in _catalog(ego_arm).values():
            if fs.ego_task.turn is task:
                flows.append(TrafficFlowSpec(
                    route=fs.flow_route, speed_range=r, gap=gap,
                    behavior=BehaviorProfile.speed_track_aeb(aeb),
                    speed_process=OUParams.for_range(r, theta=theta)))
    return TrainingScenario(Movement(ego_arm, task), tuple(flows))


def instantiate_training(t: TrainingScenario, imap: IntersectionMap,
                         rng: np.random.Generator | None = None) -> ScenarioInstance:
    """Training instance; only the flows listed in ``t`` are activated.

    The OU chains start from a stationary draw so episodes do not all open
    with the same first target speed.
    """
    spawners = []
    for flow in t.active_flows:
        sp = SpawnerState.for_flow(flow)
        if rng is not None and flow.speed_process is not None:
            p, r = flow.speed_process, flow.speed_range
            sp.last_ou_value = float(np.clip(p.mu + p.stationary_std * rng.standard_normal(),
                                             r.lower, r.upper))
        spawners.append(sp)
    return ScenarioInstance(WorldState(0.0, (), imap), list(t.active_flows), spawners,
                            EgoSpawn(t.ego_task), f"train-{t.ego_task}")


def instantiate_stochastic(s: StochasticConfig, imap: IntersectionMap) -> ScenarioInstance:
    """Autopilot flows on the non-ego arms; turns and parameters are drawn at spawn time."""
    ego_arm = s.ego_task.entry
    arms = [ego_arm.left, ego_arm.opposite, ego_arm.right][: s.n_social_flows]
    profile = BehaviorProfile.autopilot(s.aeb, ignore_ego=s.ignore_ego)
    d_l, d_u = s.gap_range
    flows = [TrafficFlowSpec(route=Movement(arm, Turn.STRAIGHT),
                             speed_range=ParameterRange(*s.speed_range),
                             gap=GapSamplerParams(d_l, d_u), behavior=profile)
             for arm in arms]
    return ScenarioInstance(WorldState(0.0, (), imap), flows,
                            [SpawnerState.for_flow(f) for f in flows],
                            EgoSpawn(s.ego_task), f"sto-{s.ego_task}")
