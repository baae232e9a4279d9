"""Vehicle and pedestrian mobility: flow simulation and trace ingestion.

Produces time-ordered snapshots of actor states, either by stepping
configured flows along the road network or by parsing an external trace
CSV (header ``time,id,kind,x,y,heading,speed``). Traces are immutable
after construction.

The flow model is deliberately small: actors follow road centerlines,
accelerate at a constant rate toward the lower of their target speed and
the road speed limit, and never approach their same-route leader closer
than ``gap_min`` meters of arc length (matching the leader's speed
instead). Integration is exact per step, so constant-acceleration
positions carry no time-discretization error.
"""

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .constants import DEFAULT_GAP_MIN
from .errors import ConfigError, TraceFormatError
from .geometry import KINDS, Vec3

TRACE_HEADER = ["time", "id", "kind", "x", "y", "heading", "speed"]

#: Two road endpoints within this distance are treated as connected, m.
ENDPOINT_TOL = 1e-6


@dataclass(frozen=True)
class Road:
    """Polyline road segment with a speed limit."""

    road_id: str
    polyline: np.ndarray  # (n, 2)
    speed_limit: float

    def __post_init__(self):
        poly = np.asarray(self.polyline, dtype=float)
        if poly.ndim != 2 or poly.shape[1] != 2 or poly.shape[0] < 2:
            raise ConfigError(f"road {self.road_id!r}: polyline must be an (n >= 2, 2) point list")
        if self.speed_limit <= 0:
            raise ConfigError(f"road {self.road_id!r}: speed_limit must be > 0")
        object.__setattr__(self, "polyline", poly)


class RoadNetwork:
    """Lookup table of roads plus route assembly."""

    def __init__(self, roads: list[Road]):
        self.roads = {}
        for road in roads:
            if road.road_id in self.roads:
                raise ConfigError(f"duplicate road id {road.road_id!r}")
            self.roads[road.road_id] = road

    def route_geometry(self, route: list[str]) -> "RouteGeometry":
        """Chain the route's road polylines into one continuous geometry.

        Consecutive roads must share an endpoint; each polyline is flipped
        as needed so traversal is continuous from the start of the first
        road.
        """
        if not route:
            raise ConfigError("route is empty")
        for rid in route:
            if rid not in self.roads:
                raise ConfigError(f"route references unknown road {rid!r}")
        polys = [self.roads[rid].polyline for rid in route]
        limits = [self.roads[rid].speed_limit for rid in route]
        oriented = _orient_chain(polys, route)
        points = [oriented[0]]
        seg_limits = [np.full(len(oriented[0]) - 1, limits[0])]
        for poly, limit in zip(oriented[1:], limits[1:]):
            points.append(poly[1:])  # shared endpoint already present
            seg_limits.append(np.full(len(poly) - 1, limit))
        pts = np.concatenate(points, axis=0)
        seg_vec = np.diff(pts, axis=0)
        seg_len = np.linalg.norm(seg_vec, axis=1)
        keep = seg_len > 0
        if not np.any(keep):
            raise ConfigError(f"route {route} has zero length")
        starts = pts[:-1][keep]
        seg_vec = seg_vec[keep]
        seg_len = seg_len[keep]
        cum = np.concatenate([[0.0], np.cumsum(seg_len)])
        return RouteGeometry(tuple(route), starts, seg_vec, seg_len, cum,
                             np.concatenate(seg_limits)[keep])


def _orient_chain(polys: list[np.ndarray], route: list[str]) -> list[np.ndarray]:
    if len(polys) == 1:
        return [polys[0]]
    oriented = []
    first, second = polys[0], polys[1]
    ends = [first[0], first[-1]]
    # The first road ends where the second road attaches.
    if _touches(ends[1], second):
        oriented.append(first)
    elif _touches(ends[0], second):
        oriented.append(first[::-1])
    else:
        raise ConfigError(f"route roads {route[0]!r} and {route[1]!r} are not connected")
    for i in range(1, len(polys)):
        tail = oriented[-1][-1]
        poly = polys[i]
        if np.linalg.norm(poly[0] - tail) <= ENDPOINT_TOL:
            oriented.append(poly)
        elif np.linalg.norm(poly[-1] - tail) <= ENDPOINT_TOL:
            oriented.append(poly[::-1])
        else:
            raise ConfigError(f"route roads {route[i - 1]!r} and {route[i]!r} are not connected")
    return oriented


def _touches(point: np.ndarray, poly: np.ndarray) -> bool:
    return bool(
        np.linalg.norm(poly[0] - point) <= ENDPOINT_TOL
        or np.linalg.norm(poly[-1] - point) <= ENDPOINT_TOL
    )


@dataclass(frozen=True)
class RouteGeometry:
    """Arc-length parameterized route polyline."""

    route_key: tuple
    seg_start: np.ndarray   # (s, 2)
    seg_vec: np.ndarray     # (s, 2)
    seg_len: np.ndarray     # (s,)
    cum_len: np.ndarray     # (s + 1,)
    seg_limit: np.ndarray   # (s,)

    @property
    def length(self) -> float:
        return float(self.cum_len[-1])

    def _segment_at(self, s: float) -> int:
        idx = int(np.searchsorted(self.cum_len, s, side="right") - 1)
        return min(max(idx, 0), len(self.seg_len) - 1)

    def state_at(self, s: float) -> tuple[np.ndarray, float, float]:
        """Return (xy position, heading, speed limit) at arc length ``s``."""
        i = self._segment_at(s)
        frac = (s - self.cum_len[i]) / self.seg_len[i]
        xy = self.seg_start[i] + frac * self.seg_vec[i]
        heading = math.atan2(self.seg_vec[i][1], self.seg_vec[i][0]) % (2.0 * math.pi)
        return xy, heading, float(self.seg_limit[i])

    def limit_at(self, s: float) -> float:
        return float(self.seg_limit[self._segment_at(s)])


@dataclass(frozen=True)
class FlowSpec:
    """One stream of identical actors departing periodically on a route."""

    route: list[str]
    kind: str
    target_speed: float
    acceleration: float
    insertion_period: float
    count: int
    start_time: float = 0.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown actor kind {self.kind!r}")
        if self.target_speed <= 0:
            raise ConfigError("target_speed must be > 0")
        if self.acceleration <= 0:
            raise ConfigError("acceleration must be > 0")
        if self.insertion_period <= 0:
            raise ConfigError("insertion_period must be > 0")
        if self.count < 1:
            raise ConfigError("count must be >= 1")
        if not self.route:
            raise ConfigError("route must be non-empty")


@dataclass(frozen=True)
class ActorState:
    """State of one actor at one snapshot time."""

    actor_id: str
    kind: str
    position: Vec3
    heading: float
    speed: float

    def __post_init__(self):
        object.__setattr__(self, "heading", float(self.heading))
        object.__setattr__(self, "speed", float(self.speed))
        if self.speed < 0:
            raise TraceFormatError(f"actor {self.actor_id!r}: negative speed {self.speed}")


@dataclass(frozen=True)
class Snapshot:
    time: float
    actors: list[ActorState]

    def __post_init__(self):
        ids = [a.actor_id for a in self.actors]
        if len(ids) != len(set(ids)):
            raise TraceFormatError(f"duplicate actor_id within snapshot at t={self.time}")


@dataclass(frozen=True)
class Trace:
    """Time-ordered snapshots; times strictly increase and actor kinds are
    constant per actor id."""

    snapshots: list[Snapshot]

    def __post_init__(self):
        kinds: dict[str, str] = {}
        prev = -math.inf
        for snap in self.snapshots:
            if snap.time <= prev:
                raise TraceFormatError(f"snapshot times not strictly increasing at t={snap.time}")
            prev = snap.time
            for actor in snap.actors:
                seen = kinds.setdefault(actor.actor_id, actor.kind)
                if seen != actor.kind:
                    raise TraceFormatError(
                        f"actor {actor.actor_id!r} changes kind from {seen!r} to {actor.kind!r}"
                    )

    def __len__(self) -> int:
        return len(self.snapshots)


@dataclass
class _Vehicle:
    actor_id: str
    kind: str
    geometry: RouteGeometry
    target_speed: float
    acceleration: float
    arc_s: float = 0.0
    speed: float = 0.0
    done: bool = False
    partial_dt: float | None = None  # shortened first step after mid-step insertion


def _advance(veh: _Vehicle, dt: float) -> tuple[float, float]:
    """Exact constant-acceleration advance over ``dt`` with speed capping.

    Returns the unconstrained (new_arc_s, new_speed); car-following is
    applied by the caller.
    """
    cap = min(veh.target_speed, veh.geometry.limit_at(veh.arc_s))
    v, s = veh.speed, veh.arc_s
    if v >= cap:
        # Above the local cap (e.g. after entering a slower road): clamp.
        return s + cap * dt, cap
    t_cap = (cap - v) / veh.acceleration
    if t_cap >= dt:
        return s + v * dt + 0.5 * veh.acceleration * dt * dt, v + veh.acceleration * dt
    s_new = s + v * t_cap + 0.5 * veh.acceleration * t_cap * t_cap + cap * (dt - t_cap)
    return s_new, cap


def simulate_flows(network: RoadNetwork, flows: list[FlowSpec], t_end: float, dt: float,
                   seed: int = 0, gap_min: float = DEFAULT_GAP_MIN) -> Trace:
    """Step the configured flows and emit snapshots at t = dt, 2 dt, ..., t_end.

    Deterministic given identical inputs; the seed is recorded for
    forward compatibility with stochastic variants but the present
    kinematics draw no random numbers. Actors are inserted at
    ``start_time + k * insertion_period`` (postponed while the route entry
    is blocked), removed when they reach the route end, and never pass or
    tailgate their same-route leader.
    """
    if dt <= 0:
        raise ValueError(f"dt must be > 0, got {dt}")
    if t_end < dt:
        raise ValueError(f"t_end must be >= dt, got {t_end}")
    del seed  # reserved; current model is deterministic

    geometries: dict[tuple, RouteGeometry] = {}
    pending: list[tuple[float, int, int, FlowSpec]] = []
    for f_idx, flow in enumerate(flows):
        key = tuple(flow.route)
        if key not in geometries:
            geometries[key] = network.route_geometry(flow.route)
        for k in range(flow.count):
            pending.append((flow.start_time + k * flow.insertion_period, f_idx, k, flow))
    pending.sort(key=lambda item: (item[0], item[1], item[2]))

    active: list[_Vehicle] = []
    snapshots: list[Snapshot] = []
    n_steps = int(round(t_end / dt))
    if abs(n_steps * dt - t_end) > 1e-9:
        n_steps = int(math.floor(t_end / dt + 1e-9))

    def entry_blocked(geometry: RouteGeometry) -> bool:
        return any(
            v.geometry.route_key == geometry.route_key and v.arc_s < gap_min
            for v in active if not v.done
        )

    for step in range(1, n_steps + 1):
        t0, t1 = (step - 1) * dt, step * dt

        # Insertions due in (or before) this step, earliest first. A blocked
        # insertion stays pending and is retried next step.
        still_pending = []
        for t_ins, f_idx, k, flow in pending:
            if t_ins >= t1 - 1e-12:
                still_pending.append((t_ins, f_idx, k, flow))
                continue
            geometry = geometries[tuple(flow.route)]
            if entry_blocked(geometry):
                still_pending.append((max(t_ins, t1), f_idx, k, flow))
                continue
            veh = _Vehicle(
                actor_id=f"{flow.kind}_{f_idx}_{k}",
                kind=flow.kind,
                geometry=geometry,
                target_speed=flow.target_speed,
                acceleration=flow.acceleration,
            )
            veh.partial_dt = t1 - max(t_ins, t0)  # integrate from the insertion time
            active.append(veh)
        pending = still_pending

        # Advance leaders first so followers clamp against updated state.
        by_route: dict[tuple, list[_Vehicle]] = {}
        for veh in active:
            by_route.setdefault(veh.geometry.route_key, []).append(veh)
        for route_key, vehicles in by_route.items():
            vehicles.sort(key=lambda v: -v.arc_s)
            leader: _Vehicle | None = None
            for veh in vehicles:
                step_dt = veh.partial_dt if veh.partial_dt is not None else dt
                veh.partial_dt = None
                s_new, v_new = _advance(veh, step_dt)
                if leader is not None and s_new > leader.arc_s - gap_min:
                    s_new = max(veh.arc_s, leader.arc_s - gap_min)
                    v_new = min(v_new, leader.speed)
                veh.arc_s, veh.speed = s_new, v_new
                veh.speed = min(veh.speed, veh.target_speed, veh.geometry.limit_at(min(s_new, veh.geometry.length)))
                if veh.arc_s >= veh.geometry.length:
                    veh.done = True
                else:
                    leader = veh
        active = [v for v in active if not v.done]

        states = []
        for veh in active:
            xy, heading, _ = veh.geometry.state_at(veh.arc_s)
            states.append(ActorState(veh.actor_id, veh.kind, Vec3(xy[0], xy[1], 0.0), heading, veh.speed))
        snapshots.append(Snapshot(time=step * dt, actors=states))

    return Trace(snapshots)


def write_trace(trace: Trace, stream) -> None:
    """Serialize a trace to CSV with round-trip-exact float formatting."""
    stream.write(",".join(TRACE_HEADER) + "\n")
    for snap in trace.snapshots:
        for a in snap.actors:
            stream.write(
                f"{snap.time!r},{a.actor_id},{a.kind},{a.position.x!r},{a.position.y!r},"
                f"{a.heading!r},{a.speed!r}\n"
            )


def parse_trace(stream) -> Trace:
    """Parse the trace CSV format into a validated Trace.

    Raises TraceFormatError with the offending line number for malformed
    rows, and for non-monotonic times or duplicate (time, id) pairs.
    """
    if isinstance(stream, (str, bytes)):
        stream = io.StringIO(stream if isinstance(stream, str) else stream.decode("utf-8"))
    reader = csv.reader(stream)
    rows = list(reader)
    if not rows:
        return Trace(snapshots=[])
    start = 0
    if [c.strip() for c in rows[0]] == TRACE_HEADER:
        start = 1
    snapshots: list[Snapshot] = []
    current_time: float | None = None
    current: list[ActorState] = []
    seen_ids: set[str] = set()

    def flush():
        if current_time is not None:
            snapshots.append(Snapshot(current_time, list(current)))

    for line_no, row in enumerate(rows[start:], start=start + 1):
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        if len(row) != 7:
            raise TraceFormatError(f"expected 7 columns, got {len(row)}", line=line_no)
        try:
            t = float(row[0])
            actor_id = row[1].strip()
            kind = row[2].strip()
            x, y, heading, speed = (float(v) for v in row[3:7])
        except ValueError as exc:
            raise TraceFormatError(f"malformed row: {exc}", line=line_no) from None
        if kind not in KINDS:
            raise TraceFormatError(f"unknown kind {kind!r}", line=line_no)
        if speed < 0:
            raise TraceFormatError(f"negative speed {speed}", line=line_no)
        if current_time is None or t != current_time:
            if current_time is not None and t < current_time:
                raise TraceFormatError(
                    f"time {t!r} goes backward (previous snapshot at {current_time!r})", line=line_no
                )
            flush()
            current_time = t
            current = []
            seen_ids = set()
        if actor_id in seen_ids:
            raise TraceFormatError(f"duplicate actor {actor_id!r} at time {t!r}", line=line_no)
        seen_ids.add(actor_id)
        current.append(ActorState(actor_id, kind, Vec3(x, y, 0.0), heading % (2.0 * math.pi), speed))
    flush()
    return Trace(snapshots)


def snapshot_at(trace: Trace, t: float) -> Snapshot:
    """Sample the trace at time ``t``, interpolating between snapshots.

    Stored times (within 1e-9 s) return the stored snapshot. Otherwise
    position and speed are interpolated linearly for actors present in
    both bracketing snapshots; actors present in only one are included
    only when ``t`` is strictly nearer to that snapshot, at that
    snapshot's state. Heading is held from the earlier snapshot.
    """
    if not trace.snapshots:
        raise ValueError("trace is empty")
    times = np.array([s.time for s in trace.snapshots])
    if t < times[0] - 1e-9 or t > times[-1] + 1e-9:
        raise ValueError(f"t={t} outside trace range [{times[0]}, {times[-1]}]")
    exact = np.nonzero(np.abs(times - t) <= 1e-9)[0]
    if exact.size:
        return trace.snapshots[int(exact[0])]
    hi = int(np.searchsorted(times, t))
    lo = hi - 1
    s0, s1 = trace.snapshots[lo], trace.snapshots[hi]
    w = (t - s0.time) / (s1.time - s0.time)
    a0 = {a.actor_id: a for a in s0.actors}
    a1 = {a.actor_id: a for a in s1.actors}
    actors: list[ActorState] = []
    for actor_id, a in a0.items():
        b = a1.get(actor_id)
        if b is not None:
            pos = Vec3(
                a.position.x + w * (b.position.x - a.position.x),
                a.position.y + w * (b.position.y - a.position.y),
                a.position.z + w * (b.position.z - a.position.z),
            )
            actors.append(ActorState(actor_id, a.kind, pos, a.heading, a.speed + w * (b.speed - a.speed)))
        elif t - s0.time < s1.time - t:
            actors.append(a)
    for actor_id, b in a1.items():
        if actor_id not in a0 and s1.time - t < t - s0.time:
            actors.append(b)
    return Snapshot(time=t, actors=actors)
