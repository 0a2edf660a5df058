"""Procedural closed tracks.

A track is a closed Catmull-Rom spline through radially perturbed circle
points. The spline is resampled into a dense, nearly arc-uniform
polyline which acts as the operational centerline: localization, arc
lookup, curvature scans and rendering all run against it.

Styles shape the curvature envelope and the roadside texture sequence:

* ``motorway``        wide gentle arcs, mixed calm roadside
* ``curvy``           medium radii, winding
* ``sharp-turn``      winding plus one or two near-limit hairpin corners
* ``mixed-roadside``  gentle geometry, roadside alternating grass/sand
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

STYLES = ("motorway", "curvy", "sharp-turn", "mixed-roadside")
ROADSIDE_CLASSES = ("grass", "sand", "trees", "wall")

DEFAULT_WIDTH = 8.0

# Tightest kinematically feasible turn: wheelbase 2.5 m at 30 deg steer.
TIGHTEST_RADIUS = 2.5 / math.tan(math.radians(30.0))

# Sampled polyline spacing (m) and samples per spline segment before
# arc-resampling.
_ARC_STEP = 0.5
_T_SAMPLES = 64

_STYLE_TAGS = {style: 0x74726b00 + i for i, style in enumerate(STYLES)}


class TrackGenerationError(RuntimeError):
    """Rejection sampling exhausted its attempt budget."""


@dataclass(frozen=True)
class TrackSpec:
    style: str
    width: float
    seed: int
    control_points: tuple          # ((x, y), ...) in meters
    roadside_palette: tuple        # one class name per control segment
    length: float                  # polyline arc length

    def __post_init__(self):
        if self.style not in STYLES:
            raise ValueError(f"unknown style {self.style!r}")
        if len(self.control_points) < 8:
            raise ValueError("a closed centerline needs at least 8 control points")
        if len(self.roadside_palette) != len(self.control_points):
            raise ValueError("palette must assign one class per control segment")
        for cls in self.roadside_palette:
            if cls not in ROADSIDE_CLASSES:
                raise ValueError(f"unknown roadside class {cls!r}")

    def geometry(self):
        geom = _GEOMETRY_CACHE.get(id(self))
        if geom is None or geom[0] is not self:
            geom = (self, TrackGeometry(self))
            _GEOMETRY_CACHE[id(self)] = geom
        return geom[1]


_GEOMETRY_CACHE = {}


# ------------------------------------------------------------- spline

def _catmull_rom_coeffs(pts):
    """Per-segment cubic coefficients for the closed uniform CR spline."""
    p = np.asarray(pts, dtype=np.float64)
    p0 = np.roll(p, 1, axis=0)
    p1 = p
    p2 = np.roll(p, -1, axis=0)
    p3 = np.roll(p, -2, axis=0)
    a = p1
    b = 0.5 * (p2 - p0)
    c = 0.5 * (2 * p0 - 5 * p1 + 4 * p2 - p3)
    d = 0.5 * (-p0 + 3 * p1 - 3 * p2 + p3)
    return a, b, c, d


def _spline_samples(pts, t_samples=_T_SAMPLES):
    """Positions and analytic curvature on a dense parameter grid."""
    a, b, c, d = _catmull_rom_coeffs(pts)
    k = len(pts)
    t = np.linspace(0.0, 1.0, t_samples, endpoint=False)
    # broadcast: (k, t_samples, 2)
    tt = t[None, :, None]
    pos = a[:, None, :] + b[:, None, :] * tt + c[:, None, :] * tt**2 + d[:, None, :] * tt**3
    vel = b[:, None, :] + 2 * c[:, None, :] * tt + 3 * d[:, None, :] * tt**2
    acc = 2 * c[:, None, :] + 6 * d[:, None, :] * tt
    cross = vel[..., 0] * acc[..., 1] - vel[..., 1] * acc[..., 0]
    speed = np.linalg.norm(vel, axis=-1)
    curvature = np.abs(cross) / np.maximum(speed, 1e-12) ** 3
    seg_index = np.repeat(np.arange(k), t_samples)
    return pos.reshape(-1, 2), curvature.reshape(-1), seg_index


def min_turn_radius(pts):
    """Smallest curvature radius of the closed spline through pts."""
    _, curvature, _ = _spline_samples(pts)
    return 1.0 / max(float(curvature.max()), 1e-12)


def _resample_arc_uniform(pos):
    closed = np.vstack([pos, pos[:1]])
    seg = np.diff(closed, axis=0)
    seg_len = np.linalg.norm(seg, axis=1)
    cum = np.concatenate([[0.0], np.cumsum(seg_len)])
    total = float(cum[-1])
    n = max(int(round(total / _ARC_STEP)), 64)
    arcs = np.linspace(0.0, total, n, endpoint=False)
    idx = np.searchsorted(cum, arcs, side="right") - 1
    frac = (arcs - cum[idx]) / np.maximum(seg_len[idx], 1e-12)
    return closed[idx] + seg[idx] * frac[:, None]


def _polyline_length(points):
    closed = np.vstack([points, points[:1]])
    return float(np.linalg.norm(np.diff(closed, axis=0), axis=1).sum())


def _segments_intersect(p, q):
    """Vectorized proper-intersection test between all segment pairs."""
    # p, q: (M, 2, 2) arrays of segment endpoints
    def orient(a, b, c):
        return (b[..., 0] - a[..., 0]) * (c[..., 1] - a[..., 1]) - \
               (b[..., 1] - a[..., 1]) * (c[..., 0] - a[..., 0])

    a1, a2 = p[:, None, 0], p[:, None, 1]
    b1, b2 = q[None, :, 0], q[None, :, 1]
    d1 = orient(a1, a2, b1)
    d2 = orient(a1, a2, b2)
    d3 = orient(b1, b2, a1)
    d4 = orient(b1, b2, a2)
    return (d1 * d2 < 0) & (d3 * d4 < 0)


def _self_intersects(points):
    """Segment-pair test on a coarsened copy of the closed polyline."""
    step = max(len(points) // 256, 1)
    pts = points[::step]
    closed = np.vstack([pts, pts[:1]])
    segs = np.stack([closed[:-1], closed[1:]], axis=1)
    m = len(segs)
    hits = _segments_intersect(segs, segs)
    # adjacent segments legitimately share endpoints
    idx = np.arange(m)
    adjacent = (np.abs(idx[:, None] - idx[None, :]) <= 1) | \
               (np.abs(idx[:, None] - idx[None, :]) == m - 1)
    return bool(np.any(hits & ~adjacent))


def _pinched(points, cum_arc, total, width):
    """True when arc-distant parts of the track come too close in space."""
    step = max(len(points) // 512, 1)
    pts = points[::step]
    arcs = cum_arc[::step]
    d_euclid = np.linalg.norm(pts[:, None] - pts[None, :], axis=-1)
    d_arc = np.abs(arcs[:, None] - arcs[None, :])
    d_arc = np.minimum(d_arc, total - d_arc)
    rogue = (d_arc > 3.0 * width) & (d_euclid < width + 1.0)
    return bool(np.any(rogue))


# --------------------------------------------------------- generation

_STYLE_PARAMS = {
    "motorway":       dict(n=10, r0=(110.0, 140.0), amp=0.05, jitter=0.15,
                           min_r=55.0, max_r=None, pool=("grass", "trees", "wall")),
    "curvy":          dict(n=10, r0=(55.0, 75.0), amp=0.08, jitter=0.25,
                           min_r=14.0, max_r=45.0, pool=("grass", "trees")),
    "sharp-turn":     dict(n=10, r0=(45.0, 60.0), amp=0.08, jitter=0.20,
                           min_r=0.9 * TIGHTEST_RADIUS, max_r=None,
                           pool=("trees", "wall", "grass", "sand")),
    "mixed-roadside": dict(n=10, r0=(80.0, 100.0), amp=0.05, jitter=0.15,
                           min_r=40.0, max_r=None, pool=("grass", "sand")),
}

# hairpin corner radius window for sharp-turn tracks (meters)
_HAIRPIN_RADIUS = (0.9 * TIGHTEST_RADIUS, 8.0)


def _circle_points(rng, params):
    n = params["n"]
    r0 = rng.uniform(*params["r0"])
    angles = (np.arange(n) + rng.uniform(-params["jitter"], params["jitter"], n)) * (2 * np.pi / n)
    radii = r0 * (1.0 + rng.uniform(-params["amp"], params["amp"], n))
    pts = np.stack([radii * np.cos(angles), radii * np.sin(angles)], axis=1)
    return pts, r0


def _insert_hairpin(pts, rng):
    """Replace one control point with a tight inward V."""
    n = len(pts)
    i = int(rng.integers(n))
    center = pts.mean(axis=0)
    p = pts[i]
    radial = p - center
    radial /= np.linalg.norm(radial)
    tangent = np.array([-radial[1], radial[0]])
    half_gap = rng.uniform(12.0, 15.0)
    depth = rng.uniform(4.0, 6.0)
    v = [p - half_gap * tangent, p - depth * radial, p + half_gap * tangent]
    return np.vstack([pts[:i], v, pts[i + 1:]])


def _palette_for(style, rng, n_segments):
    if style == "mixed-roadside":
        return tuple(("grass", "sand")[i % 2] for i in range(n_segments))
    pool = _STYLE_PARAMS[style]["pool"]
    return tuple(pool[i] for i in rng.integers(0, len(pool), n_segments))


def _radius_ok(style, pts):
    params = _STYLE_PARAMS[style]
    r = min_turn_radius(pts)
    if style == "sharp-turn":
        return _HAIRPIN_RADIUS[0] <= r < _HAIRPIN_RADIUS[1]
    if r < params["min_r"]:
        return False
    if params["max_r"] is not None and r > params["max_r"]:
        return False
    return True


def generate_track(seed, style, width=DEFAULT_WIDTH, max_attempts=100):
    """Deterministic rejection-sampled track for (seed, style)."""
    if style not in STYLES:
        raise ValueError(f"unknown style {style!r}; expected one of {STYLES}")
    params = _STYLE_PARAMS[style]
    rng = np.random.Generator(np.random.Philox(
        key=np.array([seed, _STYLE_TAGS[style]], dtype=np.uint64)))
    for _ in range(max_attempts):
        pts, r0 = _circle_points(rng, params)
        if style == "sharp-turn":
            for _ in range(int(rng.integers(1, 3))):
                pts = _insert_hairpin(pts, rng)
        if bool(rng.integers(2)):
            pts = pts[::-1].copy()  # mix driving orientations across seeds
        if not _radius_ok(style, pts):
            continue
        samples, _, _ = _spline_samples(pts)
        points = _resample_arc_uniform(samples)
        total = _polyline_length(points)
        arcs = np.arange(len(points)) * (total / len(points))
        if _self_intersects(points) or _pinched(points, arcs, total, width):
            continue
        palette = _palette_for(style, rng, len(pts))
        return TrackSpec(style=style, width=width, seed=seed,
                         control_points=tuple(map(tuple, pts.tolist())),
                         roadside_palette=palette, length=total)
    raise TrackGenerationError(f"no valid {style} track for seed {seed} in {max_attempts} attempts")


# ----------------------------------------------------------- geometry

class TrackGeometry:
    """Dense polyline view of a TrackSpec with nearest-point queries."""

    def __init__(self, spec):
        self.spec = spec
        pts = np.asarray(spec.control_points, dtype=np.float64)
        samples, _, seg_index = _spline_samples(pts)
        self.points = _resample_arc_uniform(samples)
        closed = np.vstack([self.points, self.points[:1]])
        self.seg_vec = np.diff(closed, axis=0)
        self.seg_len = np.linalg.norm(self.seg_vec, axis=1)
        self.total_length = float(self.seg_len.sum())
        self.cum_arc = np.concatenate([[0.0], np.cumsum(self.seg_len)])[:-1]
        self.tangents = self.seg_vec / np.maximum(self.seg_len, 1e-12)[:, None]
        self._tree = cKDTree(self.points)
        # arc position of each control point (palette segment boundaries)
        arcs_dense = np.concatenate([[0.0], np.cumsum(
            np.linalg.norm(np.diff(np.vstack([samples, samples[:1]]), axis=0), axis=1))])
        k = len(pts)
        self.control_arcs = arcs_dense[np.arange(k) * _T_SAMPLES]

    def point_at(self, arc):
        arc = np.asarray(arc, dtype=np.float64) % self.total_length
        idx = np.minimum(np.searchsorted(self.cum_arc, arc, side="right") - 1,
                         len(self.points) - 1)
        frac = (arc - self.cum_arc[idx]) / np.maximum(self.seg_len[idx], 1e-12)
        return self.points[idx] + self.seg_vec[idx] * np.asarray(frac)[..., None]

    def tangent_at(self, arc):
        arc = np.asarray(arc, dtype=np.float64) % self.total_length
        idx = np.minimum(np.searchsorted(self.cum_arc, arc, side="right") - 1,
                         len(self.points) - 1)
        return self.tangents[idx]

    def palette_class_at(self, arc):
        arc = np.asarray(arc, dtype=np.float64) % self.total_length
        idx = np.searchsorted(self.control_arcs, arc, side="right") - 1
        idx = np.clip(idx, 0, len(self.spec.roadside_palette) - 1)
        return idx

    def _project_segments(self, pos, seg_idx):
        a = self.points[seg_idx]
        v = self.seg_vec[seg_idx]
        ll = np.maximum(self.seg_len[seg_idx] ** 2, 1e-18)
        t = np.clip(((pos - a) * v).sum(-1) / ll, 0.0, 1.0)
        proj = a + v * t[..., None]
        delta = pos - proj
        dist = np.linalg.norm(delta, axis=-1)
        cross = v[..., 0] * delta[..., 1] - v[..., 1] * delta[..., 0]
        arc = self.cum_arc[seg_idx] + t * self.seg_len[seg_idx]
        return dist, np.sign(cross), arc

    def locate(self, pos, hint_arc=None):
        """(arc, signed lateral offset) of the nearest centerline point.

        Positive offsets are to the left of the driving direction. The
        optional hint narrows the search to segments near a known arc,
        but global candidates are always included so the result is the
        true nearest point.
        """
        pos = np.asarray(pos, dtype=np.float64)
        m = len(self.points)
        _, vert_idx = self._tree.query(pos, k=min(6, m))
        cand = set()
        for vi in np.atleast_1d(vert_idx):
            cand.add(int(vi) % m)
            cand.add((int(vi) - 1) % m)
        if hint_arc is not None:
            i0 = int((hint_arc % self.total_length) / self.total_length * m)
            for di in range(-8, 9):
                cand.add((i0 + di) % m)
        seg_idx = np.fromiter(cand, dtype=np.int64)
        dist, sign, arc = self._project_segments(pos[None, :], seg_idx)
        best = int(np.argmin(dist))
        return float(arc[best]), float(sign[best] * dist[best])

    def locate_many(self, pos):
        """Vectorized locate for (P, 2) query points (unsigned queries use sign too)."""
        pos = np.asarray(pos, dtype=np.float64)
        m = len(self.points)
        _, vert_idx = self._tree.query(pos, k=2)
        best_dist = np.full(len(pos), np.inf)
        best_sign = np.zeros(len(pos))
        best_arc = np.zeros(len(pos))
        for k in range(vert_idx.shape[1]):
            for off in (-1, 0):
                seg_idx = (vert_idx[:, k] + off) % m
                dist, sign, arc = self._project_segments(pos, seg_idx)
                better = dist < best_dist
                best_dist = np.where(better, dist, best_dist)
                best_sign = np.where(better, sign, best_sign)
                best_arc = np.where(better, arc, best_arc)
        return best_arc, best_sign * best_dist


# ------------------------------------------------------- serialization

def write_track(spec, path):
    lines = [f"{spec.style} {spec.width!r} {spec.length!r} {spec.seed}",
             str(len(spec.control_points))]
    for x, y in spec.control_points:
        lines.append(f"{x!r} {y!r}")
    lines.append(" ".join(spec.roadside_palette))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_track(path):
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    try:
        style, width, length, seed = lines[0].split()
        n = int(lines[1])
        pts = tuple(tuple(float(v) for v in lines[2 + i].split()) for i in range(n))
        palette = tuple(lines[2 + n].split())
    except (IndexError, ValueError) as exc:
        raise ValueError(f"malformed track file {path}: {exc}") from exc
    return TrackSpec(style=style, width=float(width), seed=int(seed),
                     control_points=pts, roadside_palette=palette, length=float(length))
