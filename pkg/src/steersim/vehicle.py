"""Constant-speed kinematic bicycle on a track, plus the scripted expert.

Steering commands are normalized to [-1, 1]; command 1 maps to the full
steering angle (30 deg by default), positive commands turn left
(counter-clockwise). One control step advances the pose along an exact
constant-curvature arc, so a held command traces a true circle of radius
wheelbase / tan(steer_angle).
"""

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class ExpertConfig:
    lookahead: float = 12.0            # pure-pursuit aim distance (m)
    wheelbase: float = 2.5             # m
    max_steer: float = math.radians(30.0)
    speed: float = 16.667              # m/s (60 km/h)


DEFAULT_CONFIG = ExpertConfig()
DT = 0.1  # control period (s); one rendered frame per step


@dataclass(frozen=True)
class VehicleState:
    position: tuple                    # (x, y) meters
    heading: float                     # radians, ccw from +x
    arc_coordinate: float              # meters along centerline
    lateral_offset: float              # signed meters, + left of track
    elapsed: float = 0.0               # seconds


def initial_state(track, arc=0.0, lateral=0.0, heading_error=0.0):
    """Pose on (or laterally offset from) the centerline at a given arc."""
    geom = track.geometry()
    pt = geom.point_at(arc)
    tan = geom.tangent_at(arc)
    normal = (-tan[1], tan[0])  # left of driving direction
    pos = (float(pt[0] + lateral * normal[0]), float(pt[1] + lateral * normal[1]))
    heading = math.atan2(tan[1], tan[0]) + heading_error
    arc_actual, lat_actual = geom.locate(pos, hint_arc=arc)
    return VehicleState(position=pos, heading=heading,
                        arc_coordinate=arc_actual, lateral_offset=lat_actual)


def step_vehicle(track, state, steering_cmd, dt=DT, config=DEFAULT_CONFIG):
    """Advance one control period under a held steering command."""
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    cmd = min(1.0, max(-1.0, float(steering_cmd)))
    delta = cmd * config.max_steer
    v = config.speed
    omega = v * math.tan(delta) / config.wheelbase
    x, y = state.position
    h = state.heading
    if abs(omega) < 1e-12:
        x += v * dt * math.cos(h)
        y += v * dt * math.sin(h)
        h2 = h
    else:
        r = v / omega
        h2 = h + omega * dt
        x += r * (math.sin(h2) - math.sin(h))
        y += r * (-math.cos(h2) + math.cos(h))
    arc, lateral = track.geometry().locate((x, y), hint_arc=state.arc_coordinate)
    return VehicleState(position=(x, y), heading=h2, arc_coordinate=arc,
                        lateral_offset=lateral, elapsed=state.elapsed + dt)


def _wrap_angle(a):
    return (a + math.pi) % (2 * math.pi) - math.pi


def expert_steering(track, state, config=DEFAULT_CONFIG):
    """Pure pursuit toward the centerline point `lookahead` meters ahead."""
    geom = track.geometry()
    aim = geom.point_at(state.arc_coordinate + config.lookahead)
    x, y = state.position
    alpha = _wrap_angle(math.atan2(aim[1] - y, aim[0] - x) - state.heading)
    steer = math.atan2(2.0 * config.wheelbase * math.sin(alpha), config.lookahead)
    return min(1.0, max(-1.0, steer / config.max_steer))


def is_off_track(track, state):
    """Off when strictly beyond half the road width (boundary is on-track)."""
    return abs(state.lateral_offset) > track.width / 2.0


def arc_delta(track, new_arc, old_arc):
    """Signed forward progress between two arc coordinates (wrap-aware)."""
    total = track.geometry().total_length
    d = (new_arc - old_arc) % total
    if d > total / 2:
        d -= total
    return d
