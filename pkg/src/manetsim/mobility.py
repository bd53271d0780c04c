"""Random waypoint mobility and link expiration time prediction."""

import csv
import math
from dataclasses import dataclass

from .config import ConfigError


@dataclass
class NodeState:
    id: int
    pos: tuple          # (x, y) meters
    speed: float        # m/s
    heading: float      # radians in [0, 2*pi)
    waypoint: tuple     # (x, y) meters
    battery: float      # residual Joules
    activity: int = 0   # live routes using this node as intermediate forwarder

    @property
    def velocity(self):
        return (self.speed * math.cos(self.heading),
                self.speed * math.sin(self.heading))


def _heading_to(pos, waypoint):
    theta = math.atan2(waypoint[1] - pos[1], waypoint[0] - pos[0])
    return theta % (2.0 * math.pi)


def _draw_leg(node, rng, area, min_speed, v_max):
    """Assign a fresh waypoint and speed, recomputing heading from geometry."""
    w, h = area
    node.waypoint = (rng.uniform(0.0, w), rng.uniform(0.0, h))
    # uniform in (min_speed, v_max]; zero speed would strand the node forever
    node.speed = v_max - rng.uniform(0.0, v_max - min_speed)
    node.heading = _heading_to(node.pos, node.waypoint)


def init_mobility(config, rng):
    """Place nodes uniformly in the area, each with a waypoint and speed."""
    config.validate()
    w, h = config.area
    states = []
    for i in range(config.node_count):
        node = NodeState(id=i, pos=(rng.uniform(0.0, w), rng.uniform(0.0, h)),
                         speed=0.0, heading=0.0, waypoint=(0.0, 0.0),
                         battery=config.initial_battery)
        _draw_leg(node, rng, config.area, config.min_speed, config.v_max)
        states.append(node)
    return states


def advance(states, dt, config, rng):
    """Move every node speed*dt toward its waypoint.

    A node reaching its waypoint within the step immediately draws a new
    waypoint and speed (zero pause) and spends the leftover time on the new
    heading. Mutates the states in place and returns them.
    """
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    for node in states:
        remaining = dt
        while remaining > 0.0:
            x, y = node.pos
            wx, wy = node.waypoint
            dist_wp = math.hypot(wx - x, wy - y)
            step = node.speed * remaining
            if step < dist_wp:
                frac = step / dist_wp
                node.pos = (x + (wx - x) * frac, y + (wy - y) * frac)
                break
            node.pos = node.waypoint
            remaining -= dist_wp / node.speed if node.speed > 0 else remaining
            _draw_leg(node, rng, config.area, config.min_speed, config.v_max)
    return states


def link_expiration_time(i: NodeState, j: NodeState, r: float) -> float:
    """Predicted time until nodes i and j move out of range r.

    Assumes both keep their current velocity. Returns math.inf when the
    relative velocity is zero. The pair must currently be within range.
    """
    b = i.pos[0] - j.pos[0]
    d = i.pos[1] - j.pos[1]
    if b * b + d * d > r * r * (1.0 + 1e-12):
        raise ValueError(f"nodes {i.id} and {j.id} are not neighbors")
    vxi, vyi = i.velocity
    vxj, vyj = j.velocity
    a = vxi - vxj
    c = vyi - vyj
    k = a * a + c * c
    if k == 0.0:
        return math.inf
    radicand = k * r * r - (a * d - b * c) ** 2
    if radicand < 0.0:
        # cannot happen while dist <= r except for rounding noise
        assert radicand > -1e-9, f"negative radicand {radicand}"
        radicand = 0.0
    return (-(a * b + c * d) + math.sqrt(radicand)) / k


# --- mobility trace files -----------------------------------------------------

TRACE_HEADER = ("time_s", "node_id", "x_m", "y_m", "speed_mps", "heading_rad")


class TraceWriter:
    """Streams per-tick node rows to a mobility trace CSV."""

    def __init__(self, path):
        self._file = open(path, "w", newline="")
        self._writer = csv.writer(self._file)
        self._writer.writerow(TRACE_HEADER)

    def record(self, t, states):
        for node in states:
            self._writer.writerow((repr(t), node.id, repr(node.pos[0]),
                                   repr(node.pos[1]), repr(node.speed),
                                   repr(node.heading)))

    def close(self):
        self._file.close()


class Trace:
    """In-memory mobility trace: per-tick positions and velocities."""

    def __init__(self, times, rows):
        self.times = times          # list of tick times
        self.rows = rows            # rows[k][i] = (x, y, speed, heading)
        self.node_count = len(rows[0]) if rows else 0

    @classmethod
    def load(cls, path):
        times, rows = [], []
        with open(path, newline="") as f:
            reader = csv.reader(f)
            header = next(reader, None)
            if tuple(header or ()) != TRACE_HEADER:
                raise ConfigError(f"{path}: not a mobility trace file")
            current_t = None
            for t_s, node_id, x, y, speed, heading in reader:
                t = float(t_s)
                if t != current_t:
                    times.append(t)
                    rows.append([])
                    current_t = t
                if int(node_id) != len(rows[-1]):
                    raise ConfigError(f"{path}: node rows out of order at t={t}")
                rows[-1].append((float(x), float(y), float(speed), float(heading)))
        return cls(times, rows)

    def apply(self, k, states):
        """Overwrite node kinematics from trace tick k."""
        for node, (x, y, speed, heading) in zip(states, self.rows[k]):
            node.pos = (x, y)
            node.speed = speed
            node.heading = heading
        return states
