"""Visualization-side post-processing for predicted fields.

Fringe denoising zeroes a thin rim of cells at the mask boundary and Gaussian
smooths only a narrow band just inside it; everything deeper in the interior
passes through bit-for-bit. It is never applied before metric computation.
Surface reconstruction displaces the initially flat blank grid by the
predicted displacement vectors and triangulates valid quads into an ASCII PLY
mesh with a per-vertex scalar (typically plastic strain) for coloring.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

from .errors import DataError

ERODE_RADIUS = 2
BAND_WIDTH = 3
SMOOTH_SIGMA = 1.0

_CROSS = ndimage.generate_binary_structure(2, 1)


def erode_mask(mask: np.ndarray, radius: int = ERODE_RADIUS) -> np.ndarray:
    mask = np.asarray(mask, dtype=bool)
    if radius < 0:
        raise DataError(f"erosion radius must be >= 0, got {radius}")
    if radius == 0:
        return mask.copy()
    eroded = ndimage.binary_erosion(mask, structure=_CROSS, iterations=radius)
    if not eroded.any():
        raise DataError(f"mask has no cells left after erosion by {radius} px")
    return eroded


def denoise_displacement(
    pd: np.ndarray,
    mask: np.ndarray,
    radius: int = ERODE_RADIUS,
    sigma: float = SMOOTH_SIGMA,
    band: int = BAND_WIDTH,
) -> np.ndarray:
    """Zero outside the eroded mask and smooth only the boundary band."""
    pd = np.asarray(pd)
    mask = np.asarray(mask, dtype=bool)
    if pd.shape[:2] != mask.shape:
        raise DataError(f"field shape {pd.shape} does not match mask {mask.shape}")
    if not mask.any():
        raise DataError("denoise_displacement: mask has no valid cells")
    squeeze = pd.ndim == 2
    field = pd[..., None] if squeeze else pd

    eroded = erode_mask(mask, radius)
    out = np.where(eroded[..., None], field, 0.0).astype(field.dtype, copy=True)

    if band > 0 and sigma > 0:
        interior = ndimage.binary_erosion(eroded, structure=_CROSS, iterations=band)
        band_cells = eroded & ~interior
        if band_cells.any():
            for c in range(out.shape[-1]):
                smoothed = ndimage.gaussian_filter(
                    out[..., c].astype(np.float64), sigma=sigma, mode="constant", cval=0.0
                )
                channel = out[..., c]
                channel[band_cells] = smoothed[band_cells].astype(channel.dtype)
    return out[..., 0] if squeeze else out


@dataclass
class SurfaceMesh:
    vertices: np.ndarray  # (V, 3) displaced positions, mm
    colors: np.ndarray  # (V,) per-vertex scalar
    faces: np.ndarray  # (F, 3) vertex indices

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=np.float64)
        self.colors = np.asarray(self.colors, dtype=np.float64)
        self.faces = np.asarray(self.faces, dtype=np.int64)
        if self.vertices.ndim != 2 or self.vertices.shape[1] != 3:
            raise DataError(f"vertices must be (V, 3), got {self.vertices.shape}")
        if self.colors.shape != (self.vertices.shape[0],):
            raise DataError("one color per vertex required")
        if self.faces.size and (self.faces.min() < 0 or self.faces.max() >= len(self.vertices)):
            raise DataError("face indices out of range")


def reconstruct_surface(
    displacement: np.ndarray, color_field: np.ndarray, mask: np.ndarray, pitch: float
) -> SurfaceMesh:
    """Displace the flat blank grid and triangulate valid quads."""
    displacement = np.asarray(displacement, dtype=np.float64)
    color_field = np.asarray(color_field, dtype=np.float64)
    mask = np.asarray(mask, dtype=bool)
    h, w = mask.shape
    if displacement.shape != (h, w, 3):
        raise DataError(f"displacement must be {(h, w, 3)}, got {displacement.shape}")
    if color_field.shape != (h, w):
        raise DataError(f"color field must be {(h, w)}, got {color_field.shape}")
    if not mask.any():
        raise DataError("reconstruct_surface: mask has no valid cells")

    index = -np.ones((h, w), dtype=np.int64)
    rows, cols = np.nonzero(mask)
    index[rows, cols] = np.arange(rows.size)
    xs = cols * pitch + displacement[rows, cols, 0]
    ys = rows * pitch + displacement[rows, cols, 1]
    zs = displacement[rows, cols, 2]
    vertices = np.stack([xs, ys, zs], axis=1)
    colors = color_field[rows, cols]

    faces = []
    for i in range(h - 1):
        for j in range(w - 1):
            v00, v01 = index[i, j], index[i, j + 1]
            v10, v11 = index[i + 1, j], index[i + 1, j + 1]
            # fixed diagonal split; each triangle kept only if all corners are valid
            if v00 >= 0 and v01 >= 0 and v11 >= 0:
                faces.append((v00, v01, v11))
            if v00 >= 0 and v11 >= 0 and v10 >= 0:
                faces.append((v00, v11, v10))
    return SurfaceMesh(
        vertices=vertices, colors=colors, faces=np.asarray(faces, dtype=np.int64).reshape(-1, 3)
    )


def write_ply(mesh: SurfaceMesh, path: str | Path) -> Path:
    """ASCII PLY with a per-vertex `quality` scalar."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [
        "ply",
        "format ascii 1.0",
        f"element vertex {len(mesh.vertices)}",
        "property float x",
        "property float y",
        "property float z",
        "property float quality",
        f"element face {len(mesh.faces)}",
        "property list uchar int vertex_indices",
        "end_header",
    ]
    for (x, y, z), q in zip(mesh.vertices, mesh.colors):
        lines.append(f"{float(x)!r} {float(y)!r} {float(z)!r} {float(q)!r}")
    for a, b, c in mesh.faces:
        lines.append(f"3 {int(a)} {int(b)} {int(c)}")
    path.write_text("\n".join(lines) + "\n")
    return path


def load_ply(path: str | Path) -> SurfaceMesh:
    """Read back the ASCII PLY produced by write_ply."""
    text = Path(path).read_text().splitlines()
    if not text or text[0] != "ply":
        raise DataError(f"{path}: not a PLY file")
    n_vertex = n_face = 0
    body_at = 0
    for k, line in enumerate(text):
        if line.startswith("element vertex"):
            n_vertex = int(line.split()[-1])
        elif line.startswith("element face"):
            n_face = int(line.split()[-1])
        elif line == "end_header":
            body_at = k + 1
            break
    else:
        raise DataError(f"{path}: missing end_header")
    vert_rows = [list(map(float, ln.split())) for ln in text[body_at : body_at + n_vertex]]
    face_rows = [list(map(int, ln.split())) for ln in text[body_at + n_vertex : body_at + n_vertex + n_face]]
    if len(vert_rows) != n_vertex or len(face_rows) != n_face:
        raise DataError(f"{path}: truncated body")
    verts = np.asarray([r[:3] for r in vert_rows], dtype=np.float64).reshape(n_vertex, 3)
    colors = np.asarray([r[3] for r in vert_rows], dtype=np.float64)
    faces = np.asarray([r[1:4] for r in face_rows], dtype=np.int64).reshape(n_face, 3)
    return SurfaceMesh(vertices=verts, colors=colors, faces=faces)


def render_mesh_png(mesh: SurfaceMesh, path: str | Path, title: str = "") -> Path:
    """Orthographic top-down render colored by the vertex scalar."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    import matplotlib.tri as mtri

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig, ax = plt.subplots(figsize=(5, 5))
    if len(mesh.faces):
        tri = mtri.Triangulation(mesh.vertices[:, 0], mesh.vertices[:, 1], mesh.faces)
        m = ax.tripcolor(tri, mesh.colors, shading="gouraud", cmap="viridis")
        fig.colorbar(m, ax=ax, shrink=0.8)
    else:
        ax.scatter(mesh.vertices[:, 0], mesh.vertices[:, 1], c=mesh.colors, s=4)
    ax.set_aspect("equal")
    ax.set_xlabel("x [mm]")
    ax.set_ylabel("y [mm]")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)
    return path
