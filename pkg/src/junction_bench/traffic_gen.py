"""Per-vehicle kinetic parameters for traffic flows.

Target speeds come from an Ornstein-Uhlenbeck process stepped with its exact
Gaussian transition, kept inside ``[v_l, v_u]`` by rejection. Gaps between
consecutive vehicles are drawn from a truncated normal whose mean is a linear
map of the vehicle's target speed. Speeds are in km/h throughout this module;
conversion to m/s happens when a vehicle is created.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .behavior import choose_autopilot_route
from .road_network import Movement
from .vehicle_sim import Role, VehicleState, WorldState

MAX_REJECTIONS = 10_000
KMH = 1 / 3.6


class ConfigurationError(ValueError):
    """A sampler configuration that cannot produce in-range values."""


@dataclass(frozen=True)
class OUParams:
    theta: float
    mu: float
    sigma: float
    tau: float = 1.0

    def __post_init__(self):
        if self.theta <= 0 or self.sigma < 0 or self.tau <= 0:
            raise ValueError("need theta > 0, sigma >= 0, tau > 0")

    @property
    def stationary_std(self) -> float:
        return self.sigma / math.sqrt(2 * self.theta)

    @classmethod
    def for_range(cls, r: "ParameterRange", theta: float = 0.5, tau: float = 1.0):
        """Mean at the range center, stationary std a quarter of the range width."""
        std = (r.upper - r.lower) / 4
        return cls(theta=theta, mu=(r.lower + r.upper) / 2,
                   sigma=std * math.sqrt(2 * theta), tau=tau)


@dataclass(frozen=True)
class ParameterRange:
    lower: float
    upper: float

    def __post_init__(self):
        if not self.lower < self.upper:
            raise ValueError(f"empty range [{self.lower}, {self.upper}]")

    def __contains__(self, x):
        return self.lower <= x <= self.upper


@dataclass(frozen=True)
class GapSamplerParams:
    d_l: float = 16.0
    d_u: float = 50.0
    n: float = 4.0

    def __post_init__(self):
        if not self.d_l < self.d_u or self.n <= 0:
            raise ValueError("need d_l < d_u and n > 0")

    @property
    def sigma(self) -> float:
        return (self.d_u - self.d_l) / self.n


@dataclass(frozen=True)
class TrafficFlowSpec:
    """One traffic flow.

    The sampling mode follows from which fields are set: ``fixed`` gives the
    deterministic ``(V km/h, d m)`` pair, ``speed_process`` the OU/truncated
    normal training mode, and neither the uniform stochastic-test mode. Flows
    with an autopilot behavior pick a random turn from ``route.entry`` per
    vehicle.
    """

    route: Movement
    speed_range: ParameterRange = ParameterRange(10.0, 40.0)
    gap: GapSamplerParams = GapSamplerParams()
    behavior: object = None
    speed_process: OUParams | None = None
    fixed: tuple[float, float] | None = None

    @property
    def mode(self) -> str:
        if self.fixed is not None:
            return "fixed"
        return "ou" if self.speed_process is not None else "uniform"


@dataclass
class SpawnerState:
    last_ou_value: float
    pending_gap: float = 0.0
    last_spawned_id: int | None = None
    spawned: int = 0

    @classmethod
    def for_flow(cls, flow: TrafficFlowSpec) -> "SpawnerState":
        start = flow.speed_process.mu if flow.speed_process is not None else flow.speed_range.lower
        return cls(last_ou_value=start)


def ou_step(prev, p: OUParams, rng: np.random.Generator):
    """One exact OU transition over ``p.tau``; ``prev`` may be a scalar or array."""
    decay = math.exp(-p.theta * p.tau)
    std = p.sigma * math.sqrt((1 - decay * decay) / (2 * p.theta))
    if np.ndim(prev) == 0:
        return (1 - decay) * p.mu + prev * decay + std * rng.standard_normal()
    prev = np.asarray(prev, dtype=float)
    return (1 - decay) * p.mu + prev * decay + std * rng.standard_normal(prev.shape)


def clipped_ou_step(prev, p: OUParams, r: ParameterRange, rng: np.random.Generator):
    """Redraw the OU transition from ``prev`` until it lands in ``r``.

    Works elementwise for arrays; only out-of-range entries are redrawn.
    """
    cand = ou_step(prev, p, rng)
    if np.ndim(cand) == 0:
        for _ in range(MAX_REJECTIONS):
            if r.lower <= cand <= r.upper:
                return cand
            cand = ou_step(prev, p, rng)
        raise ConfigurationError(f"OU process {p} cannot reach {r}")
    prev = np.asarray(prev, dtype=float)
    cand = np.array(cand)
    for _ in range(MAX_REJECTIONS):
        bad = (cand < r.lower) | (cand > r.upper)
        if not bad.any():
            return cand
        cand[bad] = ou_step(prev[bad], p, rng)
    raise ConfigurationError(f"OU process {p} cannot reach {r}")


def gap_mean(speed, speed_range: ParameterRange, g: GapSamplerParams):
    frac = (speed - speed_range.lower) / (speed_range.upper - speed_range.lower)
    return g.d_l + frac * (g.d_u - g.d_l)


def sample_gap(speed, speed_range: ParameterRange, g: GapSamplerParams,
               rng: np.random.Generator):
    """Truncated-normal gap by rejection; vectorized over array ``speed``."""
    mean = gap_mean(speed, speed_range, g)
    sd = g.sigma
    if np.ndim(mean) == 0:
        for _ in range(MAX_REJECTIONS):
            d = mean + sd * rng.standard_normal()
            if g.d_l <= d <= g.d_u:
                return d
        raise ConfigurationError(f"gap sampler {g} rejected {MAX_REJECTIONS} draws")
    mean = np.asarray(mean, dtype=float)
    out = mean + sd * rng.standard_normal(mean.shape)
    for _ in range(MAX_REJECTIONS):
        bad = (out < g.d_l) | (out > g.d_u)
        if not bad.any():
            return out
        out[bad] = mean[bad] + sd * rng.standard_normal(int(bad.sum()))
    raise ConfigurationError(f"gap sampler {g} rejected {MAX_REJECTIONS} draws")


def draw_parameters(spawner: SpawnerState, flow: TrafficFlowSpec, rng) -> tuple[float, float]:
    """Target speed (km/h) for the next vehicle and the gap the one after must keep."""
    if flow.mode == "fixed":
        return flow.fixed
    if flow.mode == "ou":
        speed = float(clipped_ou_step(spawner.last_ou_value, flow.speed_process,
                                      flow.speed_range, rng))
        spawner.last_ou_value = speed
        return speed, float(sample_gap(speed, flow.speed_range, flow.gap, rng))
    speed = float(rng.uniform(flow.speed_range.lower, flow.speed_range.upper))
    return speed, float(rng.uniform(flow.gap.d_l, flow.gap.d_u))


def _lane_tail(world: WorldState, flow: TrafficFlowSpec):
    # the most upstream social vehicle sharing this flow's entry lane
    tail = None
    for veh in world.vehicles:
        mv = veh.route.movement
        if veh.role is Role.SOCIAL and mv is not None and mv.entry is flow.route.entry:
            if tail is None or veh.s < tail.s:
                tail = veh
    return tail


def maybe_spawn(spawner: SpawnerState, flow: TrafficFlowSpec, world: WorldState,
                rng: np.random.Generator, route_for=None) -> VehicleState | None:
    """Spawn the next vehicle of ``flow`` once the lane tail has opened the gap.

    Flows that share an entry lane gate on the same tail vehicle. The newcomer
    is placed exactly ``pending_gap`` behind the tail (never behind s = 0),
    so spawn-time spacing is exact instead of quantized to one time step.
    ``route_for`` maps a movement to its route polyline (defaults to the
    world's map); autopilot flows ask the behavior module for a random turn.
    """
    tail = _lane_tail(world, flow)
    if tail is not None and tail.s < spawner.pending_gap:
        return None
    s0 = 0.0 if tail is None else max(0.0, tail.s - spawner.pending_gap)
    speed_kmh, gap = draw_parameters(spawner, flow, rng)
    movement = flow.route
    profile = flow.behavior
    if profile is not None and getattr(profile, "random_route", False):
        movement = choose_autopilot_route(flow.route.entry, rng)
    route = (route_for or world.map.route)(movement)
    veh = VehicleState(id=world.next_id, route=route, s=s0, v=speed_kmh * KMH,
                       role=Role.SOCIAL, v_target=speed_kmh * KMH, profile=profile)
    spawner.pending_gap = gap
    spawner.last_spawned_id = veh.id
    spawner.spawned += 1
    return veh
