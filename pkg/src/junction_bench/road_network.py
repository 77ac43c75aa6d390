"""Cross-intersection geometry and arc-length parameterized routes.

The default map is a four-arm orthogonal junction with one entry and one exit
lane per arm and right-hand traffic. Every route is pre-sampled as a polyline
with at most 0.5 m between consecutive points so that straight legs and turn
arcs share the same query code.

Coordinates are in meters, headings in radians measured counter-clockwise
from the +x axis.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

MAX_SPACING = 0.5


class Arm(enum.Enum):
    """Junction arms listed in counter-clockwise order starting from South."""

    SOUTH = 0
    EAST = 1
    NORTH = 2
    WEST = 3

    @property
    def approach_heading(self) -> float:
        # heading of a vehicle driving from this arm toward the junction center
        return wrap_angle(math.pi / 2 + self.value * math.pi / 2)

    @property
    def opposite(self) -> "Arm":
        return Arm((self.value + 2) % 4)

    @property
    def left(self) -> "Arm":
        """Arm on the left-hand side of a driver entering from this arm."""
        return Arm((self.value + 3) % 4)

    @property
    def right(self) -> "Arm":
        return Arm((self.value + 1) % 4)


class Turn(enum.Enum):
    LEFT = "left"
    STRAIGHT = "straight"
    RIGHT = "right"


class Region(enum.IntEnum):
    BEFORE_JUNCTION = 0
    INSIDE_JUNCTION = 1
    AFTER_JUNCTION = 2


@dataclass(frozen=True)
class Movement:
    entry: Arm
    turn: Turn

    @property
    def exit(self) -> Arm:
        if self.turn is Turn.STRAIGHT:
            return self.entry.opposite
        if self.turn is Turn.LEFT:
            return self.entry.left
        return self.entry.right

    def __str__(self):
        return f"{self.entry.name.lower()}-{self.turn.value}"


ALL_MOVEMENTS = tuple(Movement(arm, turn) for arm in Arm for turn in Turn)


def wrap_angle(a):
    """Wrap an angle (or array of angles) into [-pi, pi)."""
    return (np.asarray(a) + np.pi) % (2 * np.pi) - np.pi if isinstance(a, np.ndarray) \
        else (a + math.pi) % (2 * math.pi) - math.pi


@dataclass(frozen=True, eq=False)
class RoutePolyline:
    """Sampled path through the junction for a single movement.

    Attributes
    ----------
    movement : Movement or None
        The movement this route serves; ``None`` for free-standing test routes.
    points : ndarray, shape (n, 2)
        Ordered sample positions.
    cumulative_length : ndarray, shape (n,)
        Arc length at each point, starting at 0.
    headings : ndarray, shape (n,)
        Tangent heading at each point.
    junction_span : (float, float)
        Arc positions where the route enters and leaves the junction box.
    """

    movement: Movement | None
    points: np.ndarray
    cumulative_length: np.ndarray
    headings: np.ndarray
    junction_span: tuple[float, float] = (math.inf, math.inf)
    _seg_vec: np.ndarray = field(init=False, repr=False)
    _seg_len2: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        for arr in (self.points, self.cumulative_length, self.headings):
            arr.setflags(write=False)
        seg = np.diff(self.points, axis=0)
        object.__setattr__(self, "_seg_vec", seg)
        object.__setattr__(self, "_seg_len2", np.einsum("ij,ij->i", seg, seg))

    @property
    def length(self) -> float:
        return float(self.cumulative_length[-1])

    def __repr__(self):
        return f"RoutePolyline({self.movement}, length={self.length:.2f})"


def _polyline(movement, pieces, junction_piece=None) -> RoutePolyline:
    """Assemble a route from analytic pieces.

    Each piece is ``(kind, args)`` where kind is ``"line"`` with args
    ``(start, end)`` or ``"arc"`` with args ``(center, radius, a0, a1)``
    (polar angles; the sign of ``a1 - a0`` selects the turning direction).
    ``junction_piece`` indexes the piece lying inside the junction box.
    """
    pts, hdg, ends = [], [], []
    count = 0
    for kind, args in pieces:
        if kind == "line":
            (x0, y0), (x1, y1) = args
            seg_len = math.hypot(x1 - x0, y1 - y0)
            n = max(1, math.ceil(seg_len / MAX_SPACING))
            t = np.linspace(0.0, 1.0, n + 1)
            p = np.column_stack([x0 + t * (x1 - x0), y0 + t * (y1 - y0)])
            h = np.full(n + 1, math.atan2(y1 - y0, x1 - x0))
        else:
            (cx, cy), r, a0, a1 = args
            n = max(1, math.ceil(abs(a1 - a0) * r / MAX_SPACING))
            a = np.linspace(a0, a1, n + 1)
            p = np.column_stack([cx + r * np.cos(a), cy + r * np.sin(a)])
            h = a + math.copysign(math.pi / 2, a1 - a0)
        if pts:
            p, h = p[1:], h[1:]
        pts.append(p)
        hdg.append(h)
        count += len(p)
        ends.append(count - 1)
    points = np.vstack(pts)
    headings = wrap_angle(np.concatenate(hdg))
    cum = np.concatenate([[0.0], np.cumsum(np.hypot(*np.diff(points, axis=0).T))])
    span = (math.inf, math.inf)
    if junction_piece is not None:
        first = ends[junction_piece - 1] if junction_piece > 0 else 0
        span = (float(cum[first]), float(cum[ends[junction_piece]]))
    return RoutePolyline(movement, points, cum, headings, span)


def straight_route(length: float, start=(0.0, 0.0), heading: float = 0.0) -> RoutePolyline:
    """A free-standing straight route with no junction, handy for car-following setups."""
    x0, y0 = start
    end = (x0 + length * math.cos(heading), y0 + length * math.sin(heading))
    return _polyline(None, [("line", ((x0, y0), end))])


def _rotate(points, angle, offset=(0.0, 0.0)):
    c, s = math.cos(angle), math.sin(angle)
    rot = np.array([[c, -s], [s, c]])
    return points @ rot.T + np.asarray(offset, dtype=float)


def _south_routes(lane_width, approach, half):
    """Analytic pieces of the routes entering from the South arm (heading +pi/2)."""
    o = lane_width / 2
    start = (o, -half - approach)
    enter = (o, -half)
    return {
        Turn.STRAIGHT: [("line", (start, enter)),
                        ("line", (enter, (o, half))),
                        ("line", ((o, half), (o, half + approach)))],
        Turn.RIGHT: [("line", (start, enter)),
                     ("arc", ((half, -half), half - o, math.pi, math.pi / 2)),
                     ("line", ((half, -o), (half + approach, -o)))],
        Turn.LEFT: [("line", (start, enter)),
                    ("arc", ((-half, -half), half + o, 0.0, math.pi / 2)),
                    ("line", ((-half, o), (-half - approach, o)))],
    }


@dataclass(frozen=True, eq=False)
class IntersectionMap:
    """Immutable junction description shared by all episodes.

    ``junction_box`` is ``(xmin, ymin, xmax, ymax)`` in the map's local frame;
    ``frame`` is the ``(angle, offset)`` rigid transform from the local frame
    to world coordinates (identity for the default map).
    """

    routes: dict
    junction_box: tuple[float, float, float, float]
    lane_width: float
    approach_length: float
    frame: tuple[float, tuple[float, float]] = (0.0, (0.0, 0.0))

    @property
    def arms(self):
        return tuple(Arm)

    def route(self, movement: Movement) -> RoutePolyline:
        return self.routes[movement]

    def contains(self, position) -> bool:
        """Whether a world position lies inside the junction box."""
        angle, offset = self.frame
        local = _rotate(np.asarray(position, float)[None, :] - np.asarray(offset), -angle)[0]
        xmin, ymin, xmax, ymax = self.junction_box
        eps = 1e-9
        return bool(xmin - eps <= local[0] <= xmax + eps and ymin - eps <= local[1] <= ymax + eps)

    def transformed(self, angle: float, offset=(0.0, 0.0)) -> "IntersectionMap":
        """Apply a global rigid transform (rotation about the origin, then translation)."""
        routes = {}
        for mv, r in self.routes.items():
            routes[mv] = RoutePolyline(
                mv, _rotate(r.points, angle, offset), r.cumulative_length.copy(),
                wrap_angle(r.headings + angle), r.junction_span)
        a0, (ox, oy) = self.frame
        new_offset = _rotate(np.array([[ox, oy]]), angle, offset)[0]
        return IntersectionMap(routes, self.junction_box, self.lane_width,
                               self.approach_length,
                               (a0 + angle, (float(new_offset[0]), float(new_offset[1]))))


def build_default_intersection(lane_width: float = 3.5, approach_length: float = 80.0,
                               junction_half_width: float = 10.0) -> IntersectionMap:
    """Build the four-arm orthogonal junction.

    ``junction_half_width`` sets the square conflict area (curb-return corners
    included); right turns use radius ``half - lane_width/2`` and left turns
    ``half + lane_width/2``, each tangent to its entry and exit lane.
    """
    if junction_half_width <= lane_width:
        raise ValueError("junction must be wider than a lane")
    south = _south_routes(lane_width, approach_length, junction_half_width)
    routes = {}
    for arm in Arm:
        rot = arm.value * math.pi / 2
        for turn, pieces in south.items():
            base = _polyline(Movement(arm, turn), pieces, junction_piece=1)
            routes[Movement(arm, turn)] = RoutePolyline(
                base.movement, _rotate(base.points, rot), base.cumulative_length,
                wrap_angle(base.headings + rot), base.junction_span)
    h = junction_half_width
    return IntersectionMap(routes, (-h, -h, h, h), lane_width, approach_length)


def pose_at(route: RoutePolyline, s: float):
    """Position and heading at arc position ``s``.

    Raises
    ------
    ValueError
        If ``s`` lies outside ``[0, route.length]``.
    """
    cum = route.cumulative_length
    if not (0.0 <= s <= cum[-1]):
        raise ValueError(f"arc position {s!r} outside [0, {cum[-1]}]")
    i = int(np.searchsorted(cum, s, side="right")) - 1
    i = min(max(i, 0), len(cum) - 2)
    seg = cum[i + 1] - cum[i]
    t = (s - cum[i]) / seg if seg > 0 else 0.0
    p0, p1 = route.points[i], route.points[i + 1]
    pos = p0 + t * (p1 - p0)
    h0, h1 = route.headings[i], route.headings[i + 1]
    dh = (h1 - h0 + math.pi) % (2 * math.pi) - math.pi
    heading = wrap_angle(float(h0) + t * dh)
    return pos, heading


def project(route: RoutePolyline, position) -> float:
    """Arc position of the closest point on the polyline; ties go to smaller s."""
    p = np.asarray(position, dtype=float)
    a = route.points[:-1]
    d = p - a
    t = np.einsum("ij,ij->i", d, route._seg_vec)
    with np.errstate(invalid="ignore", divide="ignore"):
        t = np.where(route._seg_len2 > 0, t / route._seg_len2, 0.0)
    t = np.clip(t, 0.0, 1.0)
    diff = d - t[:, None] * route._seg_vec
    dist2 = np.einsum("ij,ij->i", diff, diff)
    best = dist2.min()
    i = int(np.flatnonzero(dist2 <= best + 1e-12)[0])
    seg = route.cumulative_length[i + 1] - route.cumulative_length[i]
    return float(route.cumulative_length[i] + t[i] * seg)


def region_of(imap: IntersectionMap, route: RoutePolyline, s: float) -> Region:
    if not (0.0 <= s <= route.length):
        raise ValueError(f"arc position {s!r} outside [0, {route.length}]")
    s_in, s_out = route.junction_span
    if s < s_in:
        return Region.BEFORE_JUNCTION
    if s <= s_out:
        return Region.INSIDE_JUNCTION
    return Region.AFTER_JUNCTION
