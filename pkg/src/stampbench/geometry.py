"""Panel design space sampling and analytic height-map rasterization.

The nine panel parameters are sampled with one-point-per-stratum Latin
Hypercube Sampling. Rasterization evaluates an analytic U-channel surface
(a synthetic stand-in for a CAD kernel): draft-angle walls with die/punch
fillets (r1/r2), rounded channel end caps (r3), a rounded blank outline (r4),
a flange-edge groove whose radius varies linearly from r5_start to r5_end
along the part length, and two Gaussian draw-bead ridges offset by
bead_d1/bead_d2 from the channel wall. Heights are in mm, zero-padded outside
the valid mask.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataError

# Sampling ranges for the nine panel parameters (mm, degrees).
PARAM_RANGES: dict[str, tuple[float, float]] = {
    "r1_mm": (5.0, 10.0),
    "r2_mm": (5.0, 10.0),
    "r3_mm": (5.0, 10.0),
    "r4_mm": (30.0, 60.0),
    "r5_start_mm": (5.0, 15.0),
    "r5_end_mm": (10.0, 25.0),
    "bead_d1_mm": (30.0, 60.0),
    "bead_d2_mm": (100.0, 130.0),
    "draft_angle_deg": (35.0, 60.0),
}

PARAM_NAMES = list(PARAM_RANGES)

# Reference physical domain: a 64-px desk grid maps to the same ~608 mm blank
# as the full-resolution grid, so feature offsets stay physically plausible.
REF_DOMAIN_MM = 608.0
REF_DEPTH_MM = 36.0

# H and W must divide by patch_size * 2**num_stages of the default model.
GRID_ALIGN = 32


@dataclass
class GeometryParams:
    r1_mm: float
    r2_mm: float
    r3_mm: float
    r4_mm: float
    r5_start_mm: float
    r5_end_mm: float
    bead_d1_mm: float
    bead_d2_mm: float
    draft_angle_deg: float
    geometry_id: int = 0

    def values(self) -> dict[str, float]:
        d = asdict(self)
        d.pop("geometry_id")
        return d

    def out_of_range(self) -> list[str]:
        """Names of parameters outside their sampling range (warning, not error)."""
        vals = self.values()
        return [k for k, (lo, hi) in PARAM_RANGES.items() if not lo <= vals[k] <= hi]


@dataclass
class HeightMap:
    heights: np.ndarray  # (H, W) mm
    valid_mask: np.ndarray  # (H, W) bool
    pixel_pitch_mm: float
    geometry_id: int = 0

    def __post_init__(self):
        self.heights = np.asarray(self.heights, dtype=np.float64)
        self.valid_mask = np.asarray(self.valid_mask, dtype=bool)
        if self.heights.shape != self.valid_mask.shape:
            raise DataError("heights and valid_mask shapes differ")
        if not np.all(np.isfinite(self.heights)):
            raise DataError("heights must be finite")
        if np.any(self.heights[~self.valid_mask] != 0.0):
            raise DataError("heights must be zero outside the valid mask")

    @property
    def shape(self) -> tuple[int, int]:
        return self.heights.shape


def default_pitch(h: int) -> float:
    """Pitch that maps a grid of height h onto the reference blank size."""
    return REF_DOMAIN_MM / h


def lhs_sample(
    n: int,
    ranges: dict[str, tuple[float, float]] | None = None,
    rng_seed: int = 0,
) -> list[GeometryParams]:
    """Latin Hypercube Sampling: each parameter hits each of n strata exactly once."""
    if n < 1:
        raise ConfigError("n must be >= 1")
    ranges = dict(PARAM_RANGES if ranges is None else ranges)
    for name in PARAM_NAMES:
        lo, hi = ranges[name]
        if not lo < hi:
            raise ConfigError(f"empty range for {name}: [{lo}, {hi}]")
    rng = np.random.default_rng(rng_seed)
    columns = {}
    for name in PARAM_NAMES:
        lo, hi = ranges[name]
        strata = rng.permutation(n)
        u = rng.uniform(0.0, 1.0, size=n)
        columns[name] = lo + (strata + u) * (hi - lo) / n
    return [
        GeometryParams(**{name: float(columns[name][i]) for name in PARAM_NAMES}, geometry_id=i)
        for i in range(n)
    ]


def _rounded_rect_sdf(x, y, cx, cy, half_x, half_y, radius):
    """Signed distance to a rounded rectangle; negative inside."""
    radius = min(radius, 0.9 * half_x, 0.9 * half_y)
    qx = np.abs(x - cx) - (half_x - radius)
    qy = np.abs(y - cy) - (half_y - radius)
    outside = np.hypot(np.maximum(qx, 0.0), np.maximum(qy, 0.0))
    inside = np.minimum(np.maximum(qx, qy), 0.0)
    return outside + inside - radius


def _channel_profile(t: np.ndarray, depth: float, r1: float, r2: float, alpha_rad: float) -> np.ndarray:
    """Depth below flange level as a function of inward distance t from the channel edge.

    Arc of radius r1 (die side), straight wall at the draft angle, arc of
    radius r2 (punch side), then flat floor at `depth`. C1 in t.
    """
    if depth <= 0.0:
        return np.zeros_like(t)
    sa, ca, ta = math.sin(alpha_rad), math.cos(alpha_rad), math.tan(alpha_rad)
    h1, h2 = r1 * (1.0 - ca), r2 * (1.0 - ca)
    if h1 + h2 > depth:  # shallow channel: shrink both fillets proportionally
        s = depth / (h1 + h2)
        r1, r2, h1, h2 = r1 * s, r2 * s, h1 * s, h2 * s
    run1 = r1 * sa
    run_s = (depth - h1 - h2) / ta
    run2 = r2 * sa
    total = run1 + run_s + run2

    t = np.maximum(t, 0.0)
    top_arc = r1 - np.sqrt(np.maximum(r1**2 - np.minimum(t, run1) ** 2, 0.0))
    wall = h1 + (np.clip(t, run1, run1 + run_s) - run1) * ta
    rem = np.clip(total - t, 0.0, run2)
    bottom_arc = depth - (r2 - np.sqrt(np.maximum(r2**2 - rem**2, 0.0)))
    return np.select(
        [t < run1, t < run1 + run_s, t < total],
        [top_arc, wall, bottom_arc],
        default=depth,
    )


def _smoothstep(u: np.ndarray) -> np.ndarray:
    u = np.clip(u, 0.0, 1.0)
    return u * u * (3.0 - 2.0 * u)


def rasterize_panel(
    p: GeometryParams,
    h: int = 64,
    w: int = 64,
    pitch: float | None = None,
    depth_mm: float = REF_DEPTH_MM,
    align: int = GRID_ALIGN,
    warn: bool = True,
) -> HeightMap:
    """Evaluate the analytic panel surface on an h x w grid (node spacing `pitch` mm).

    depth_mm=0 is the degenerate flat override: heights are identically zero.
    Out-of-range parameters only warn so a UI may explore slightly outside the
    sampling box.
    """
    if h % align or w % align:
        raise ConfigError(f"grid {h}x{w} must be divisible by {align}")
    if pitch is None:
        pitch = default_pitch(h)
    if warn:
        bad = p.out_of_range()
        if bad:
            import warnings

            warnings.warn(f"geometry {p.geometry_id}: parameters out of sampling range: {bad}")

    ys = np.arange(h)[:, None] * pitch
    xs = np.arange(w)[None, :] * pitch
    cx, cy = (w - 1) * pitch / 2.0, (h - 1) * pitch / 2.0
    lx, ly = (w - 1) * pitch / 2.0, (h - 1) * pitch / 2.0

    # valid blank outline: rounded rectangle with corner radius r4
    mask_hx, mask_hy = 0.94 * lx, 0.94 * ly
    sd_mask = _rounded_rect_sdf(xs, ys, cx, cy, mask_hx, mask_hy, p.r4_mm)
    mask = sd_mask <= 0.0

    amp = depth_mm / REF_DEPTH_MM  # every feature amplitude scales with channel depth

    # U-channel: footprint rounded by r3, cross-section from the draft profile
    ch_hx, ch_hy = 0.30 * 2 * lx, 0.11 * 2 * ly
    sd_ch = _rounded_rect_sdf(xs, ys, cx, cy, ch_hx, ch_hy, p.r3_mm)
    depth = _channel_profile(-sd_ch, depth_mm, p.r1_mm, p.r2_mm, math.radians(p.draft_angle_deg))

    # flange-edge groove: width and depth follow r5, varying linearly along x.
    # sin^2 bump tapers to zero at the rim so padding stays C0; max slope
    # 0.09*pi < tan(35 deg), keeping the draft walls the steepest feature.
    x_hat = np.clip((xs - (cx - mask_hx)) / (2 * mask_hx), 0.0, 1.0)
    r5 = p.r5_start_mm + (p.r5_end_mm - p.r5_start_mm) * x_hat
    u_edge = np.clip(np.maximum(-sd_mask, 0.0) / (2 * r5), 0.0, 1.0)
    skirt = 0.18 * r5 * amp * np.sin(np.pi * u_edge) ** 2

    # two draw-bead ridges on the flange, parallel to the channel wall
    sigma_b = max(8.0, pitch)
    dist_wall = np.abs(ys - cy) - ch_hy
    x_window = np.exp(-np.maximum(np.abs(xs - cx) - ch_hx, 0.0) ** 2 / (2 * sigma_b**2))
    beads = np.zeros((h, w))
    for d_off in (p.bead_d1_mm, p.bead_d2_mm):
        beads += 3.0 * amp * np.exp(-((dist_wall - d_off) ** 2) / (2 * sigma_b**2)) * x_window

    heights = (-depth - skirt + beads) * mask
    return HeightMap(heights=heights, valid_mask=mask, pixel_pitch_mm=pitch, geometry_id=p.geometry_id)


# ---------------------------------------------------------------------------
# On-disk format: raw little-endian float32 heights, packed uint8 mask,
# sidecar JSON with grid info and the generating parameters.
# ---------------------------------------------------------------------------

def save_heightmap(hm: HeightMap, out_dir: str | Path, params: GeometryParams | None = None) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    stem = f"geometry_{hm.geometry_id:05d}"
    hh, ww = hm.shape
    hm.heights.astype("<f4").tofile(out / f"{stem}.f32")
    np.packbits(hm.valid_mask.astype(np.uint8)).tofile(out / f"{stem}.mask.u8")
    sidecar = {
        "geometry_id": hm.geometry_id,
        "H": hh,
        "W": ww,
        "pitch_mm": hm.pixel_pitch_mm,
        "params": asdict(params) if params is not None else None,
    }
    with open(out / f"{stem}.json", "w") as f:
        json.dump(sidecar, f, indent=2)
    return out / f"{stem}.json"


def load_heightmap(geo_dir: str | Path, geometry_id: int) -> tuple[HeightMap, GeometryParams | None]:
    geo_dir = Path(geo_dir)
    stem = f"geometry_{geometry_id:05d}"
    sidecar_path = geo_dir / f"{stem}.json"
    if not sidecar_path.exists():
        raise DataError(f"missing heightmap sidecar for geometry_id={geometry_id}: {sidecar_path}")
    with open(sidecar_path) as f:
        sidecar = json.load(f)
    hh, ww = sidecar["H"], sidecar["W"]
    heights = np.fromfile(geo_dir / f"{stem}.f32", dtype="<f4").reshape(hh, ww).astype(np.float64)
    bits = np.fromfile(geo_dir / f"{stem}.mask.u8", dtype=np.uint8)
    mask = np.unpackbits(bits)[: hh * ww].reshape(hh, ww).astype(bool)
    hm = HeightMap(heights, mask, sidecar["pitch_mm"], geometry_id)
    params = GeometryParams(**sidecar["params"]) if sidecar.get("params") else None
    return hm, params


def save_geometry_manifest(params_list: list[GeometryParams], out_dir: str | Path, h: int, w: int, pitch: float) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = {
        "H": h,
        "W": w,
        "pitch_mm": pitch,
        "geometry_ids": [p.geometry_id for p in params_list],
    }
    path = out / "geometries.json"
    with open(path, "w") as f:
        json.dump(manifest, f, indent=2)
    return path


def load_geometry_manifest(geo_dir: str | Path) -> dict:
    path = Path(geo_dir) / "geometries.json"
    if not path.exists():
        raise DataError(f"missing geometry manifest {path}")
    with open(path) as f:
        return json.load(f)
