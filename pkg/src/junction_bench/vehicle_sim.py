"""Route-constrained longitudinal dynamics, oriented footprints and collisions.

Vehicles never steer: each one rides its route polyline and only its arc
position ``s`` and speed ``v`` evolve. World advancement is a pure function
of ``(world, commands, cfg)`` so episodes are bit-reproducible.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .road_network import IntersectionMap, RoutePolyline, pose_at

DEFAULT_DIMS = (4.5, 2.0, 1.6)


class Role(enum.Enum):
    EGO = "ego"
    SOCIAL = "social"


@dataclass(frozen=True)
class SimConfig:
    dt: float = 0.1
    a_max: float = 3.0
    b_max: float = 8.0
    speed_gain: float = 1.0

    def __post_init__(self):
        if self.dt <= 0 or self.a_max <= 0 or self.b_max <= 0:
            raise ValueError("dt, a_max and b_max must be positive")


@dataclass(frozen=True)
class VehicleState:
    """Longitudinal state of one vehicle on its route.

    ``v_target`` and ``profile`` drive social vehicles; the ego ignores them.
    """

    id: int
    route: RoutePolyline
    s: float
    v: float
    dims: tuple[float, float, float] = DEFAULT_DIMS
    role: Role = Role.SOCIAL
    v_target: float = 0.0
    profile: object = None

    def __post_init__(self):
        if self.v < 0:
            raise ValueError(f"vehicle {self.id}: negative speed {self.v}")
        if not (0.0 <= self.s <= self.route.length):
            raise ValueError(f"vehicle {self.id}: s={self.s} off route")
        if min(self.dims) <= 0:
            raise ValueError(f"vehicle {self.id}: non-positive dimensions")

    @property
    def at_route_end(self) -> bool:
        return self.s >= self.route.length

    def pose(self):
        return pose_at(self.route, self.s)


@dataclass(frozen=True)
class OrientedBox:
    center: tuple[float, float]
    heading: float
    half_extents: tuple[float, float]

    def axes(self):
        c, s = math.cos(self.heading), math.sin(self.heading)
        return (c, s), (-s, c)

    def corners(self) -> np.ndarray:
        (ux, uy), (wx, wy) = self.axes()
        hx, hy = self.half_extents
        cx, cy = self.center
        return np.array([[cx + sx * hx * ux + sy * hy * wx, cy + sx * hx * uy + sy * hy * wy]
                         for sx, sy in ((1, 1), (-1, 1), (-1, -1), (1, -1))])


@dataclass(frozen=True, eq=False)
class WorldState:
    time: float
    vehicles: tuple[VehicleState, ...]
    map: IntersectionMap | None = None
    next_id: int = 0
    _poses: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self):
        ids = [v.id for v in self.vehicles]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate vehicle ids")
        if ids and self.next_id <= max(ids):
            object.__setattr__(self, "next_id", max(ids) + 1)

    def get(self, vid: int) -> VehicleState | None:
        for veh in self.vehicles:
            if veh.id == vid:
                return veh
        return None

    @property
    def ego(self) -> VehicleState | None:
        for veh in self.vehicles:
            if veh.role is Role.EGO:
                return veh
        return None

    def pose(self, veh: VehicleState):
        """Cached ``(position, heading)`` of a vehicle in this snapshot."""
        p = self._poses.get(veh.id)
        if p is None:
            p = self._poses[veh.id] = veh.pose()
        return p

    def add(self, veh: VehicleState) -> "WorldState":
        return WorldState(self.time, self.vehicles + (veh,), self.map,
                          max(self.next_id, veh.id + 1))


def track_speed(v: float, v_target: float, cfg: SimConfig) -> float:
    """Proportional speed tracking clamped to the actuator limits."""
    return min(max(cfg.speed_gain * (v_target - v), -cfg.b_max), cfg.a_max)


def step_vehicle(state: VehicleState, accel: float, cfg: SimConfig) -> VehicleState:
    """Semi-implicit Euler: speed first, then position with the new speed."""
    v = max(0.0, state.v + accel * cfg.dt)
    s = min(state.route.length, state.s + v * cfg.dt)
    return replace(state, s=s, v=v)


def footprint(state: VehicleState, world_or_map=None, eta: float = 1.0) -> OrientedBox:
    """Planar bounding box scaled by ``eta`` about the vehicle center.

    The height is scaled too in principle but plays no part in planar overlap.
    """
    if eta < 1:
        raise ValueError("expansion factor must be >= 1")
    if isinstance(world_or_map, WorldState):
        pos, heading = world_or_map.pose(state)
    else:
        pos, heading = state.pose()
    lx, ly, _ = state.dims
    return OrientedBox((float(pos[0]), float(pos[1])), float(heading),
                       (eta * lx / 2, eta * ly / 2))


def boxes_overlap(a: OrientedBox, b: OrientedBox) -> bool:
    """Separating-axis test on the four edge normals; touching counts as overlap."""
    dx = b.center[0] - a.center[0]
    dy = b.center[1] - a.center[1]
    a_axes = a.axes()
    b_axes = b.axes()
    for nx, ny in a_axes + b_axes:
        ra = (a.half_extents[0] * abs(a_axes[0][0] * nx + a_axes[0][1] * ny)
              + a.half_extents[1] * abs(a_axes[1][0] * nx + a_axes[1][1] * ny))
        rb = (b.half_extents[0] * abs(b_axes[0][0] * nx + b_axes[0][1] * ny)
              + b.half_extents[1] * abs(b_axes[1][0] * nx + b_axes[1][1] * ny))
        if abs(dx * nx + dy * ny) > ra + rb:
            return False
    return True


def advance_world(world: WorldState, commands: dict, cfg: SimConfig) -> WorldState:
    """Step every vehicle with its commanded acceleration and advance time.

    Social vehicles that reach the end of their route are removed; the ego is
    kept so that callers can register the arrival.
    """
    moved = []
    for veh in world.vehicles:
        try:
            accel = commands[veh.id]
        except KeyError:
            raise ValueError(f"no command for vehicle {veh.id}") from None
        nxt = step_vehicle(veh, accel, cfg)
        if nxt.role is Role.SOCIAL and nxt.at_route_end:
            continue
        moved.append(nxt)
    return WorldState(world.time + cfg.dt, tuple(moved), world.map, world.next_id)
