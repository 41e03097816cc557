"""Synthetic forming-field generator.

Stands in for a finite-element stamping solver: maps a panel height map plus
a material stress-strain curve to five target fields (thinning, major strain,
minor strain, plastic strain, 3-channel displacement). The formulas are
smooth, cheap, deterministic, and monotone in interpretable drivers (surface
slope, curvature, hardening exponent). They claim no physical fidelity; their
job is to couple both input modalities so a surrogate must use the material
branch as well as the geometry branch.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataError
from .geometry import HeightMap
from .materials import StressStrainCurve

N_HAT_CLIP = (0.05, 0.5)
N_HAT_FIT_POINTS = 80
STRAIN_EPS = 1e-4
THINNING_LIMIT = 1.0 - 1e-6

TARGET_FIELDS = ("thinning", "major_strain", "minor_strain", "plastic_strain", "displacement")


@dataclass
class OracleConfig:
    """Tuning constants for the synthetic forming map.

    blank_thickness_mm and friction are bookkeeping constants recorded with
    every dataset; the dimensionless coefficients shape the field formulas.
    """

    blank_thickness_mm: float = 1.6
    friction: float = 0.12
    alpha_t: float = 0.3
    beta_m: float = 1.0
    nu_eff: float = 0.5
    draw_coeff: float = 0.02

    def __post_init__(self):
        for name in ("blank_thickness_mm", "friction", "alpha_t", "beta_m", "nu_eff", "draw_coeff"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        if not 0.0 < self.nu_eff <= 0.5:
            raise ConfigError(f"nu_eff must be in (0, 0.5], got {self.nu_eff}")


@dataclass
class FieldSample:
    heightmap: HeightMap
    curve: StressStrainCurve
    thinning: np.ndarray
    major_strain: np.ndarray
    minor_strain: np.ndarray
    plastic_strain: np.ndarray
    displacement: np.ndarray  # (H, W, 3) mm
    valid_mask: np.ndarray
    sample_id: int = 0

    def __post_init__(self):
        hw = self.valid_mask.shape
        for name in ("thinning", "major_strain", "minor_strain", "plastic_strain"):
            arr = getattr(self, name)
            if arr.shape != hw:
                raise DataError(f"{name} shape {arr.shape} != mask shape {hw}")
            if np.any(arr[~self.valid_mask] != 0.0):
                raise DataError(f"{name} non-zero outside valid mask")
        if self.displacement.shape != (*hw, 3):
            raise DataError(f"displacement shape {self.displacement.shape} != {(*hw, 3)}")
        if np.any(self.displacement[~self.valid_mask] != 0.0):
            raise DataError("displacement non-zero outside valid mask")
        if np.any(np.abs(self.thinning) >= 1.0):
            raise DataError("thinning outside (-1, 1)")
        if np.any(self.plastic_strain < 0.0):
            raise DataError("negative plastic strain")
        if np.any(self.major_strain < self.minor_strain):
            raise DataError("major strain below minor strain")


def material_features(curve: StressStrainCurve) -> tuple[float, float, float]:
    """Summarize a curve as (sigma_y, sigma_u, n_hat).

    n_hat is the log-log hardening slope fitted over the tail of the curve,
    clipped to a plausible range.
    """
    sigma_y = float(curve.stresses[0])
    sigma_u = float(curve.stresses.max())
    tail = slice(len(curve.strains) - N_HAT_FIT_POINTS, None)
    lx = np.log(curve.strains[tail] + STRAIN_EPS)
    ly = np.log(curve.stresses[tail])
    slope = np.polyfit(lx, ly, 1)[0]
    n_hat = float(np.clip(slope, *N_HAT_CLIP))
    return sigma_y, sigma_u, n_hat


def generate_fields(
    hm: HeightMap,
    curve: StressStrainCurve,
    cfg: OracleConfig | None = None,
    sample_id: int = 0,
) -> FieldSample:
    """Evaluate the synthetic forming map on one (geometry, material) pair."""
    cfg = cfg or OracleConfig()
    mask = hm.valid_mask
    if not mask.any():
        raise DataError("height map has an empty valid mask")
    h = hm.heights
    pitch = hm.pixel_pitch_mm

    gy, gx = np.gradient(h, pitch)
    s = np.hypot(gx, gy)
    lap = np.gradient(gx, pitch, axis=1) + np.gradient(gy, pitch, axis=0)
    kappa = np.abs(lap)

    sigma_y, sigma_u, n_hat = material_features(curve)

    thinning = cfg.alpha_t * (s / (1.0 + s)) * (1.0 - n_hat) * (1.0 + kappa / (1.0 + kappa)) / 2.0
    thinning = np.clip(thinning, -THINNING_LIMIT, THINNING_LIMIT)
    major = cfg.beta_m * thinning / (1.0 - thinning)
    minor = -cfg.nu_eff * major
    plastic = np.sqrt((2.0 / 3.0) * (major**2 + minor**2 + (major + minor) ** 2))

    hh, ww = h.shape
    ys = np.arange(hh)[:, None] * pitch
    xs = np.arange(ww)[None, :] * pitch
    x_c = float(np.mean((xs * np.ones_like(ys))[mask]))
    y_c = float(np.mean((ys * np.ones_like(xs))[mask]))
    s_bar = float(np.mean(s[mask]))
    pull = cfg.draw_coeff * s_bar * (sigma_y / sigma_u)
    disp = np.stack(
        [
            -pull * (xs - x_c) * np.ones_like(ys),
            -pull * (ys - y_c) * np.ones_like(xs),
            -h,
        ],
        axis=-1,
    )

    m = mask.astype(np.float64)
    return FieldSample(
        heightmap=hm,
        curve=curve,
        thinning=thinning * m,
        major_strain=major * m,
        minor_strain=minor * m,
        plastic_strain=plastic * m,
        displacement=disp * m[..., None],
        valid_mask=mask,
        sample_id=sample_id,
    )


# ---------------------------------------------------------------------------
# On-disk format: one little-endian float32 binary per target field plus a
# JSON manifest carrying the ids needed to re-associate geometry and material.
# ---------------------------------------------------------------------------

def save_field_sample(fs: FieldSample, out_dir: str | Path, meta: dict | None = None) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    stem = f"sample_{fs.sample_id:06d}"
    for name in TARGET_FIELDS:
        getattr(fs, name).astype("<f4").tofile(out / f"{stem}.{name}.f32")
    np.packbits(fs.valid_mask.astype(np.uint8)).tofile(out / f"{stem}.mask.u8")
    hh, ww = fs.valid_mask.shape
    manifest = {
        "sample_id": fs.sample_id,
        "H": hh,
        "W": ww,
        "pitch_mm": fs.heightmap.pixel_pitch_mm,
        "geometry_id": fs.heightmap.geometry_id,
        "material_id": fs.curve.material_id,
        "cluster": fs.curve.cluster,
    }
    if meta:
        manifest.update(meta)
    with open(out / f"{stem}.json", "w") as f:
        json.dump(manifest, f, indent=2)
    return out / f"{stem}.json"


def load_field_sample(
    samples_dir: str | Path,
    sample_id: int,
    heightmap: HeightMap,
    curve: StressStrainCurve,
) -> tuple[FieldSample, dict]:
    """Load a stored sample; heightmap and curve are supplied by the caller."""
    samples_dir = Path(samples_dir)
    stem = f"sample_{sample_id:06d}"
    man_path = samples_dir / f"{stem}.json"
    if not man_path.exists():
        raise DataError(f"sample manifest not found: {man_path}")
    with open(man_path) as f:
        manifest = json.load(f)
    hh, ww = manifest["H"], manifest["W"]
    mask = np.unpackbits(
        np.fromfile(samples_dir / f"{stem}.mask.u8", dtype=np.uint8), count=hh * ww
    ).reshape(hh, ww).astype(bool)
    arrays = {}
    for name in TARGET_FIELDS:
        raw = np.fromfile(samples_dir / f"{stem}.{name}.f32", dtype="<f4").astype(np.float64)
        shape = (hh, ww, 3) if name == "displacement" else (hh, ww)
        if raw.size != int(np.prod(shape)):
            raise DataError(f"{stem}.{name}.f32 has {raw.size} values, expected {np.prod(shape)}")
        arrays[name] = raw.reshape(shape)
    fs = FieldSample(
        heightmap=heightmap, curve=curve, valid_mask=mask, sample_id=sample_id, **arrays
    )
    return fs, manifest
