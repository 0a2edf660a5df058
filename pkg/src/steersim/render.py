"""Ground-plane scanline renderer.

Frames are (H, W, 3) uint8. The camera sits 1.2 m above the vehicle
looking along its heading with a unit focal length normalized by image
height; the horizon is fixed at 35% of the height so the sky painter's
pixels coincide exactly with the sky mask region (ground rows start at
ceil(0.35*H - 0.5), matching the pixel-center rule of the masks).

Every pixel below the horizon is projected onto the ground plane,
located against the track centerline, and painted as road (asphalt,
optional lane markings) or roadside (palette class of the nearest arc
segment). Ground texture noise is hashed from world coordinates, so a
spot on the ground keeps its color from any viewpoint. Rendering is a
pure function of (track, state, style, dims).
"""

from dataclasses import dataclass

import numpy as np

HORIZON_FRACTION = 0.35
CAMERA_HEIGHT = 1.2       # m above the ground plane
FAR_CLIP = 60.0           # m; rows beyond it repeat the far strip

SKY_VARIANTS = ("clear", "clouds", "gradient")

# per-class (base RGB, noise amplitude); means are mutually >= 40 apart
_PALETTE = {
    "grass": ((60.0, 140.0, 60.0), 14.0),
    "sand":  ((200.0, 180.0, 120.0), 10.0),
    "trees": ((30.0, 90.0, 40.0), 18.0),
    "wall":  ((150.0, 150.0, 150.0), 6.0),
}

# lane marking geometry (m) and paint level
_CENTER_HALF_WIDTH = 0.12
_DASH_PERIOD = 4.0
_DASH_ON = 2.2
_EDGE_INNER = 0.35
_EDGE_OUTER = 0.10
_MARKING_LEVEL = 235.0

_ASPHALT_NOISE = 6.0


@dataclass(frozen=True)
class SceneStyle:
    sky_variant: str = "gradient"
    road_darkness: float = 0.5     # 0 light asphalt .. 1 dark
    lane_marking: bool = True
    detail_seed: int = 0           # cloud placement

    def __post_init__(self):
        if self.sky_variant not in SKY_VARIANTS:
            raise ValueError(f"unknown sky variant {self.sky_variant!r}")
        if not 0.0 <= self.road_darkness <= 1.0:
            raise ValueError(f"road darkness must be in [0, 1], got {self.road_darkness}")


def texture_palette(cls):
    """(base RGB, noise amplitude) of a roadside class."""
    try:
        return _PALETTE[cls]
    except KeyError:
        raise ValueError(f"unknown roadside class {cls!r}") from None


def asphalt_level(darkness):
    """Mean asphalt gray level; darkness 0 vs 1 differ by 65 levels."""
    return 115.0 - 65.0 * darkness


def ground_row_start(height):
    """First image row painted as ground (pixel-center rule)."""
    return int(np.ceil(HORIZON_FRACTION * height - 0.5))


def _hash_noise(ix, iy, salt):
    """Deterministic [-1, 1] value noise from integer grid coordinates."""
    h = ix.astype(np.uint64) * np.uint64(0x9E3779B97F4A7C15)
    h ^= iy.astype(np.uint64) * np.uint64(0xC2B2AE3D27D4EB4F)
    h ^= np.uint64((salt * 0xD6E8FEB86659FD93) & 0xFFFFFFFFFFFFFFFF)
    h ^= h >> np.uint64(33)
    h *= np.uint64(0xFF51AFD7ED558CCD)
    h ^= h >> np.uint64(33)
    return (h & np.uint64(0xFFFF)).astype(np.float64) / 32767.5 - 1.0


def _world_noise(points, salt=0):
    grid = np.floor(points / 0.5).astype(np.int64)
    return _hash_noise(grid[:, 0], grid[:, 1], salt)


def _paint_sky(frame, rows, style):
    h, w, _ = frame.shape
    if style.sky_variant == "clear":
        frame[:rows] = 255.0
        return
    # pale vertical gradient; clouds add hashed white blobs
    t = (np.arange(rows, dtype=np.float64) / max(rows - 1, 1))[:, None]
    top = np.array([158.0, 196.0, 236.0])
    bottom = np.array([226.0, 240.0, 250.0])
    grad = top + (bottom - top) * t
    frame[:rows] = grad[:, None, :]
    if style.sky_variant == "clouds":
        jj, ii = np.meshgrid(np.arange(w), np.arange(rows))
        coarse = _hash_noise((jj // 7).astype(np.uint64), (ii // 3).astype(np.uint64),
                             1000 + style.detail_seed)
        fine = _hash_noise((jj // 3).astype(np.uint64), (ii // 2).astype(np.uint64),
                           2000 + style.detail_seed)
        cloud = (coarse + 0.5 * fine) > 0.55
        frame[:rows][cloud] = 252.0


def render_frame(track, state, style, dims=(190, 100)):
    """Rasterize the world from the vehicle's viewpoint. Returns uint8 (H, W, 3)."""
    w, h = dims
    geom = track.geometry()
    frame = np.empty((h, w, 3), dtype=np.float64)
    gy0 = ground_row_start(h)
    _paint_sky(frame, gy0, style)

    heading = state.heading
    fwd = np.array([np.cos(heading), np.sin(heading)])
    right = np.array([np.sin(heading), -np.cos(heading)])
    pos = np.asarray(state.position, dtype=np.float64)

    rows = np.arange(gy0, h, dtype=np.float64)
    nv = (rows + 0.5 - HORIZON_FRACTION * h) / h
    dist = np.minimum(CAMERA_HEIGHT / nv, FAR_CLIP)
    nu = (np.arange(w, dtype=np.float64) + 0.5 - w / 2.0) / h

    d_grid = np.repeat(dist, w)
    lat_grid = np.tile(nu, len(rows)) * d_grid
    points = pos[None, :] + d_grid[:, None] * fwd[None, :] + lat_grid[:, None] * right[None, :]

    arc, offset = geom.locate_many(points)
    on_road = np.abs(offset) <= track.width / 2.0

    color = np.empty((len(points), 3), dtype=np.float64)

    # roadside: palette class of the nearest arc segment
    off_road = ~on_road
    if off_road.any():
        cls_idx = geom.palette_class_at(arc[off_road])
        noise = _world_noise(points[off_road])
        sub = np.empty((int(off_road.sum()), 3))
        palette = track.roadside_palette
        for ci in np.unique(cls_idx):
            base, amp = texture_palette(palette[int(ci)])
            m = cls_idx == ci
            sub[m] = np.asarray(base)[None, :] + (amp * noise[m])[:, None]
        color[off_road] = sub

    if on_road.any():
        gray = asphalt_level(style.road_darkness)
        noise = _world_noise(points[on_road], salt=7)
        shade = gray + _ASPHALT_NOISE * noise
        road_rgb = np.repeat(shade[:, None], 3, axis=1)
        if style.lane_marking:
            lat = np.abs(offset[on_road])
            center = (lat < _CENTER_HALF_WIDTH) & ((arc[on_road] % _DASH_PERIOD) < _DASH_ON)
            half = track.width / 2.0
            edge = (lat > half - _EDGE_INNER) & (lat < half - _EDGE_OUTER)
            road_rgb[center | edge] = _MARKING_LEVEL
        color[on_road] = road_rgb

    frame[gy0:] = color.reshape(len(rows), w, 3)
    return np.clip(np.rint(frame), 0, 255).astype(np.uint8)


def write_ppm(frame, path):
    """Binary PPM (P6) export."""
    h, w, c = frame.shape
    if c != 3 or frame.dtype != np.uint8:
        raise ValueError(f"expected uint8 (H, W, 3) frame, got {frame.dtype} {frame.shape}")
    with open(path, "wb") as fh:
        fh.write(f"P6\n{w} {h}\n255\n".encode())
        fh.write(frame.tobytes())


def read_ppm(path):
    with open(path, "rb") as fh:
        data = fh.read()
    parts = data.split(b"\n", 3)
    if parts[0] != b"P6" or len(parts) < 4:
        raise ValueError(f"{path} is not a binary PPM file")
    w, h = map(int, parts[1].split())
    raw = parts[3][: w * h * 3]
    return np.frombuffer(raw, dtype=np.uint8).reshape(h, w, 3).copy()
