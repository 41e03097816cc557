"""Scattered 3D point data <-> uniform 2D grid conversion.

Two directions:

* forward Z-plane projection (`project_heightmap`): record the out-of-plane
  height of a point cloud on a regular (x, y) grid, used to ingest external
  part surfaces as height maps;
* displacement back-mapping (`backmap_to_blank`): relocate each node of a
  deformed mesh to its undeformed blank position and transfer its field
  value(s) onto the grid, producing the image-like targets the surrogate
  trains on.

Interpolation is linear with a nearest-neighbour fallback at the fringes;
cells farther than ``MASK_RADIUS_PITCHES`` pitches from any source point are
masked invalid and filled with zero (the same zero-padding convention used
at training time).
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.interpolate import griddata
from scipy.spatial import QhullError, cKDTree

from .errors import DataError
from .geometry import HeightMap

MASK_RADIUS_PITCHES = 2.0


@dataclass
class PointField:
    """Scattered points with per-point field values and optional displacements.

    values may be scalar (N,) or vector (N, 3); displacements, when present,
    are (N, 3) in mm and describe deformed = undeformed + displacement.
    """

    points: np.ndarray
    values: np.ndarray
    displacements: np.ndarray | None = None

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=np.float64)
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.points.ndim != 2 or self.points.shape[1] != 3:
            raise DataError(f"points must be (N, 3), got {self.points.shape}")
        if self.values.shape[0] != self.points.shape[0]:
            raise DataError("values and points length mismatch")
        if self.values.ndim not in (1, 2):
            raise DataError(f"values must be (N,) or (N, C), got {self.values.shape}")
        if self.displacements is not None:
            self.displacements = np.asarray(self.displacements, dtype=np.float64)
            if self.displacements.shape != self.points.shape:
                raise DataError("displacements must be (N, 3) matching points")
            if not np.all(np.isfinite(self.displacements)):
                raise DataError("non-finite displacement")
        if not np.all(np.isfinite(self.points)):
            raise DataError("non-finite point coordinate")
        if not np.all(np.isfinite(self.values)):
            raise DataError("non-finite field value")

    def __len__(self) -> int:
        return self.points.shape[0]

    @property
    def channels(self) -> int:
        return 1 if self.values.ndim == 1 else self.values.shape[1]


def _grid_xy(h: int, w: int, pitch: float):
    # cell (i, j) sits at x = j*pitch, y = i*pitch, same as rasterize_panel
    gy, gx = np.meshgrid(np.arange(h) * pitch, np.arange(w) * pitch, indexing="ij")
    return gx, gy


def _interp_to_grid(xy: np.ndarray, values: np.ndarray, h: int, w: int, pitch: float):
    """Shared interpolation path: (N, 2) sites + (N,) or (N, C) values -> grid.

    Returns (grid[h, w] or grid[h, w, C], mask[h, w]). Keeping one code path
    makes zero-displacement back-mapping bitwise equal to direct projection.
    """
    gx, gy = _grid_xy(h, w, pitch)
    vals2d = values[:, None] if values.ndim == 1 else values
    chans = []
    for c in range(vals2d.shape[1]):
        try:
            lin = griddata(xy, vals2d[:, c], (gx, gy), method="linear")
        except QhullError as e:
            raise DataError(f"degenerate point cloud (collinear or too few points): {e}") from e
        near = griddata(xy, vals2d[:, c], (gx, gy), method="nearest")
        chans.append(np.where(np.isnan(lin), near, lin))
    dist, _ = cKDTree(xy).query(np.stack([gx.ravel(), gy.ravel()], axis=1))
    mask = dist.reshape(h, w) <= MASK_RADIUS_PITCHES * pitch
    out = np.stack(chans, axis=-1)
    out = np.where(mask[..., None], out, 0.0)
    if values.ndim == 1:
        out = out[..., 0]
    return out, mask


def project_heightmap(
    cloud: PointField, h: int, w: int, pitch: float, geometry_id: int = 0
) -> HeightMap:
    """Project point z-coordinates onto the (x, y) grid as a height map."""
    if len(cloud) == 0:
        raise DataError("empty point cloud")
    heights, mask = _interp_to_grid(cloud.points[:, :2], cloud.points[:, 2], h, w, pitch)
    return HeightMap(heights=heights, valid_mask=mask, pixel_pitch_mm=pitch, geometry_id=geometry_id)


def backmap_to_blank(deformed: PointField, h: int, w: int, pitch: float):
    """Map field values from deformed-mesh nodes back to the undeformed blank.

    Each node is relocated to (x - dx, y - dy) and its value interpolated on
    the blank grid. Returns (grid[h, w, C], mask[h, w]); C is 1 for scalar
    values, 3 for vector values.
    """
    if len(deformed) == 0:
        raise DataError("empty point cloud")
    if deformed.displacements is None:
        raise DataError("back-mapping requires displacements")
    xy = deformed.points[:, :2] - deformed.displacements[:, :2]
    out, mask = _interp_to_grid(xy, deformed.values, h, w, pitch)
    if not mask.any():
        raise DataError("all relocated points fall outside the grid")
    if out.ndim == 2:
        out = out[..., None]
    return out, mask


# ---------------------------------------------------------------------------
# CSV interchange: header row, columns x,y,z then value columns, then an
# optional dx,dy,dz triple. Lets externally computed (e.g. FEA) clouds plug in.
# ---------------------------------------------------------------------------

def save_point_csv(pf: PointField, path: str | Path) -> Path:
    path = Path(path)
    vals2d = pf.values[:, None] if pf.values.ndim == 1 else pf.values
    header = ["x", "y", "z"] + [f"v{c}" for c in range(vals2d.shape[1])]
    cols = [pf.points, vals2d]
    if pf.displacements is not None:
        header += ["dx", "dy", "dz"]
        cols.append(pf.displacements)
    data = np.hstack(cols)
    with open(path, "w", newline="") as f:
        wtr = csv.writer(f)
        wtr.writerow(header)
        wtr.writerows(data.tolist())
    return path


def load_point_csv(path: str | Path) -> PointField:
    path = Path(path)
    if not path.exists():
        raise DataError(f"point cloud file not found: {path}")
    with open(path, newline="") as f:
        rdr = csv.reader(f)
        try:
            header = [c.strip() for c in next(rdr)]
        except StopIteration:
            raise DataError(f"empty point cloud file: {path}") from None
        rows = [row for row in rdr if row]
    if header[:3] != ["x", "y", "z"]:
        raise DataError(f"{path}: header must start with x,y,z (got {header[:3]})")
    has_disp = header[-3:] == ["dx", "dy", "dz"]
    n_val = len(header) - 3 - (3 if has_disp else 0)
    if n_val < 1:
        raise DataError(f"{path}: no value columns")
    if not rows:
        raise DataError(f"{path}: no data rows")
    try:
        data = np.array([[float(v) for v in row] for row in rows], dtype=np.float64)
    except ValueError as e:
        raise DataError(f"{path}: non-numeric entry: {e}") from e
    if data.ndim != 2 or data.shape[1] != len(header):
        raise DataError(f"{path}: ragged rows or column count mismatch")
    values = data[:, 3 : 3 + n_val]
    if n_val == 1:
        values = values[:, 0]
    disp = data[:, -3:] if has_disp else None
    return PointField(points=data[:, :3], values=values, displacements=disp)
