"""Rule-based drivers: IDM car following, AEB speed tracking and the autopilot."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .road_network import Arm, Movement, Turn, pose_at, project
from .vehicle_sim import (OrientedBox, Role, SimConfig, VehicleState, WorldState,
                          boxes_overlap, footprint, track_speed)

LATERAL_THRESHOLD = 2.0
TURNS = (Turn.LEFT, Turn.STRAIGHT, Turn.RIGHT)


@dataclass(frozen=True)
class IDMParams:
    """Intelligent Driver Model parameters.

    Attributes
    ----------
    v0 : float
        desired speed in free traffic, m/s
    s0 : float
        minimum net distance to the leader, m
    T : float
        time headway, s
    a : float
        maximum acceleration, m/s^2
    b : float
        comfortable deceleration, m/s^2
    delta : float
        acceleration exponent
    horizon : float
        look-ahead distance along the route for leader detection, m
    b_max : float
        full-brake magnitude used when the net gap closes to zero, m/s^2
    """

    v0: float = 9.0
    s0: float = 2.0
    T: float = 1.5
    a: float = 1.5
    b: float = 2.0
    delta: float = 4.0
    horizon: float = 50.0
    b_max: float = 8.0

    def __post_init__(self):
        if min(self.v0, self.s0, self.T, self.a, self.b, self.delta, self.horizon) <= 0:
            raise ValueError("IDM parameters must be positive")


@dataclass(frozen=True)
class AEBParams:
    detect_length: float = 12.0
    eta: float = 1.2
    brake: float = 8.0

    def __post_init__(self):
        if self.detect_length <= 0 or self.eta < 1 or self.brake <= 0:
            raise ValueError("need L > 0, eta >= 1, brake > 0")


@dataclass(frozen=True)
class LeadInfo:
    gap: float
    dv: float
    leader_id: int


class BehaviorKind(enum.Enum):
    SPEED_TRACK_AEB = "speed_track_aeb"
    IDM = "idm"
    AUTOPILOT = "autopilot"


@dataclass(frozen=True)
class BehaviorProfile:
    kind: BehaviorKind
    params: IDMParams | AEBParams
    ignore_ego: bool = False

    def __post_init__(self):
        want = IDMParams if self.kind is BehaviorKind.IDM else AEBParams
        if not isinstance(self.params, want):
            raise TypeError(f"{self.kind.value} profile needs {want.__name__}")

    @property
    def random_route(self) -> bool:
        return self.kind is BehaviorKind.AUTOPILOT

    @classmethod
    def speed_track_aeb(cls, params=None, ignore_ego=False):
        return cls(BehaviorKind.SPEED_TRACK_AEB, params or AEBParams(), ignore_ego)

    @classmethod
    def autopilot(cls, params=None, ignore_ego=True):
        return cls(BehaviorKind.AUTOPILOT, params or AEBParams(), ignore_ego)


def _star_gap(v, dv, p: IDMParams) -> float:
    return max(p.s0, p.s0 + v * p.T + v * dv / (2 * math.sqrt(p.a * p.b)))


def idm_decompose(v: float, lead: LeadInfo | None, p: IDMParams):
    """Free-road and interaction terms; their sum is the IDM acceleration."""
    free = p.a * (1 - (v / p.v0) ** p.delta)
    if lead is None:
        return free, 0.0
    if lead.gap <= 0:
        return free, -p.b_max - free
    return free, -p.a * (_star_gap(v, lead.dv, p) / lead.gap) ** 2


def idm_accel(v: float, lead: LeadInfo | None, p: IDMParams) -> float:
    free, interaction = idm_decompose(v, lead, p)
    return free + interaction


def find_lead(world: WorldState, vehicle: VehicleState, horizon: float) -> LeadInfo | None:
    """Nearest vehicle ahead whose center projects onto ``vehicle``'s route.

    A candidate qualifies when it lies within ``LATERAL_THRESHOLD`` of the
    route and its projected arc position is ahead by at most ``horizon``.
    """
    route = vehicle.route
    pos, _ = world.pose(vehicle)
    best = None
    for other in world.vehicles:
        if other.id == vehicle.id:
            continue
        if other.route is route:
            s_o, lat, h_route = other.s, 0.0, None
        else:
            opos, _ = world.pose(other)
            if math.hypot(opos[0] - pos[0], opos[1] - pos[1]) > horizon + LATERAL_THRESHOLD:
                continue
            s_o = project(route, opos)
            rpos, h_route = pose_at(route, s_o)
            lat = math.hypot(opos[0] - rpos[0], opos[1] - rpos[1])
        ahead = s_o - vehicle.s
        if lat > LATERAL_THRESHOLD or ahead <= 0 or ahead > horizon:
            continue
        if best is None or ahead < best[0]:
            best = (ahead, other, h_route)
    if best is None:
        return None
    ahead, other, h_route = best
    v_lead = other.v
    if h_route is not None:
        v_lead *= math.cos(world.pose(other)[1] - h_route)
    gap = max(0.0, ahead - vehicle.dims[0] / 2 - other.dims[0] / 2)
    return LeadInfo(gap=gap, dv=vehicle.v - v_lead, leader_id=other.id)


def detection_box(world: WorldState, vehicle: VehicleState, length: float) -> OrientedBox:
    """Rectangle reaching ``length`` ahead of the front bumper, as wide as the vehicle."""
    pos, heading = world.pose(vehicle)
    lx, ly, _ = vehicle.dims
    c, s = math.cos(heading), math.sin(heading)
    reach = lx / 2 + length / 2
    return OrientedBox((float(pos[0]) + reach * c, float(pos[1]) + reach * s),
                       float(heading), (length / 2, ly / 2))


def aeb_detect(world: WorldState, vehicle: VehicleState, p: AEBParams,
               ignore_ego: bool = False) -> bool:
    box = detection_box(world, vehicle, p.detect_length)
    cx, cy = box.center
    reach = math.hypot(*box.half_extents)
    for other in world.vehicles:
        if other.id == vehicle.id or (ignore_ego and other.role is Role.EGO):
            continue
        opos, _ = world.pose(other)
        if math.hypot(opos[0] - cx, opos[1] - cy) > reach + p.eta * math.hypot(*other.dims[:2]) / 2:
            continue
        if boxes_overlap(box, footprint(other, world, p.eta)):
            return True
    return False


def choose_autopilot_route(entry: Arm, rng: np.random.Generator) -> Movement:
    return Movement(entry, TURNS[int(rng.integers(3))])


def policy_step(world: WorldState, vehicle: VehicleState, profile: BehaviorProfile,
                v_target: float, cfg: SimConfig) -> float:
    """Acceleration command of a rule-based driver, clamped to the actuator range."""
    if profile.kind is BehaviorKind.IDM:
        lead = find_lead(world, vehicle, profile.params.horizon)
        accel = idm_accel(vehicle.v, lead, profile.params)
    elif aeb_detect(world, vehicle, profile.params, profile.ignore_ego):
        accel = -profile.params.brake
    else:
        accel = track_speed(vehicle.v, v_target, cfg)
    return min(max(accel, -cfg.b_max), cfg.a_max)
