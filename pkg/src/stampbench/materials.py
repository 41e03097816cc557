"""Synthetic stress-strain curve generation, resampling, augmentation and clustering.

Every curve that leaves this module has exactly CURVE_POINTS samples with
strictly increasing strains starting at 0 and strictly positive stresses.
The seed curves are synthetic Hollomon-type responses (sigma = K * eps^n + sigma_y);
the coefficient ranges below are invented stand-ins for a real material database.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataError

CURVE_POINTS = 100

# Hollomon coefficient ranges per family: (sigma_y, K, n_h), all synthetic.
FAMILY_RANGES = {
    "steel": {"sigma_y": (200.0, 900.0), "K": (400.0, 1500.0), "n_h": (0.05, 0.35)},
    "aluminium": {"sigma_y": (80.0, 350.0), "K": (150.0, 600.0), "n_h": (0.05, 0.30)},
}


@dataclass
class StressStrainCurve:
    """Fixed-length 1D material response: true strain vs. true stress in MPa."""

    strains: np.ndarray
    stresses: np.ndarray
    material_id: int
    cluster: int = 0
    provenance: str = "seed"  # seed | scaled | upsampled

    def __post_init__(self):
        self.strains = np.asarray(self.strains, dtype=np.float64)
        self.stresses = np.asarray(self.stresses, dtype=np.float64)
        if self.strains.shape != (CURVE_POINTS,) or self.stresses.shape != (CURVE_POINTS,):
            raise DataError(
                f"curve {self.material_id}: expected {CURVE_POINTS} points, "
                f"got {self.strains.shape[0]}/{self.stresses.shape[0]}"
            )
        if self.strains[0] != 0.0:
            raise DataError(f"curve {self.material_id}: strains must start at 0")
        if not np.all(np.diff(self.strains) > 0):
            raise DataError(f"curve {self.material_id}: strains must be strictly increasing")
        if not np.all(self.stresses > 0):
            raise DataError(f"curve {self.material_id}: stresses must be positive")


@dataclass
class CurveFamilyConfig:
    """Knobs for the gen-materials pipeline."""

    family: str = "steel"
    n_seed_curves: int = 101
    scale_min: float = -0.10
    scale_max: float = 0.10
    scale_step: float = 0.02
    n_clusters: int = 5
    target_per_cluster: int | None = 120
    rng_seed: int = 0

    def __post_init__(self):
        if self.n_clusters < 1:
            raise ConfigError("n_clusters must be >= 1")
        span = self.scale_max - self.scale_min
        n = span / self.scale_step
        if abs(n - round(n)) > 1e-9:
            raise ConfigError("scale_step must divide (scale_max - scale_min) evenly")


def synthesize_seed_curves(family: str, n: int, rng_seed: int) -> list[StressStrainCurve]:
    """Draw n Hollomon-type seed curves for the given family, deterministically."""
    if family not in FAMILY_RANGES:
        raise ConfigError(f"unknown material family {family!r}; expected one of {sorted(FAMILY_RANGES)}")
    if n < 1:
        raise ConfigError("n must be >= 1")
    rng = np.random.default_rng(rng_seed)
    ranges = FAMILY_RANGES[family]
    curves = []
    for i in range(n):
        sigma_y = rng.uniform(*ranges["sigma_y"])
        k_coeff = rng.uniform(*ranges["K"])
        n_h = rng.uniform(*ranges["n_h"])
        eps_max = rng.uniform(0.25, 0.55)
        strains = np.linspace(0.0, eps_max, CURVE_POINTS)
        stresses = k_coeff * strains**n_h + sigma_y
        curves.append(StressStrainCurve(strains, stresses, material_id=i, provenance="seed"))
    return curves


def resample_curve(raw: list[tuple[float, float]], material_id: int = 0) -> StressStrainCurve:
    """Piecewise-linear resampling onto CURVE_POINTS uniform strains over the raw range.

    The strain axis is shifted so it starts at 0; the span and the endpoint
    stresses are preserved exactly.
    """
    if len(raw) < 2:
        raise DataError("need at least 2 raw points to resample")
    pts = np.asarray(raw, dtype=np.float64)
    raw_strains, raw_stresses = pts[:, 0], pts[:, 1]
    if not np.all(np.diff(raw_strains) > 0):
        raise DataError("raw strains must be strictly increasing")
    strains = np.linspace(raw_strains[0], raw_strains[-1], CURVE_POINTS)
    stresses = np.interp(strains, raw_strains, raw_stresses)
    # endpoints exactly, regardless of interpolation rounding
    stresses[0] = raw_stresses[0]
    stresses[-1] = raw_stresses[-1]
    shifted = strains - strains[0]
    shifted[0] = 0.0
    return StressStrainCurve(shifted, stresses, material_id=material_id)


def scale_factors(scale_min: float, scale_max: float, step: float) -> list[float]:
    """Multiplicative factor grid {1+scale_min .. 1+scale_max} with 1.0 removed."""
    if step <= 0:
        raise ConfigError("scale step must be positive")
    n = int(round((scale_max - scale_min) / step))
    factors = [round(1.0 + scale_min + i * step, 12) for i in range(n + 1)]
    return [f for f in factors if abs(f - 1.0) > 1e-9]


def scale_augment(
    seeds: list[StressStrainCurve],
    scale_min: float = -0.10,
    scale_max: float = 0.10,
    step: float = 0.02,
) -> list[StressStrainCurve]:
    """Emit one stress-scaled copy of every seed per factor; originals excluded."""
    if not seeds:
        raise ConfigError("seeds must be non-empty")
    factors = scale_factors(scale_min, scale_max, step)
    next_id = max(c.material_id for c in seeds) + 1
    out = []
    for seed in seeds:
        for f in factors:
            out.append(
                StressStrainCurve(
                    seed.strains.copy(),
                    seed.stresses * f,
                    material_id=next_id,
                    cluster=seed.cluster,
                    provenance="scaled",
                )
            )
            next_id += 1
    return out


def _kmeans(x: np.ndarray, k: int, rng: np.random.Generator, iters: int = 200) -> tuple[np.ndarray, np.ndarray]:
    """Seeded Lloyd's k-means with k-means++ init. Returns (labels, centroids)."""
    n = x.shape[0]
    centroids = np.empty((k, x.shape[1]))
    centroids[0] = x[rng.integers(n)]
    d2 = np.sum((x - centroids[0]) ** 2, axis=1)
    for j in range(1, k):
        probs = d2 / d2.sum() if d2.sum() > 0 else np.full(n, 1.0 / n)
        centroids[j] = x[rng.choice(n, p=probs)]
        d2 = np.minimum(d2, np.sum((x - centroids[j]) ** 2, axis=1))
    labels = np.zeros(n, dtype=int)
    for _ in range(iters):
        dists = np.sum((x[:, None, :] - centroids[None, :, :]) ** 2, axis=2)
        new_labels = np.argmin(dists, axis=1)
        for j in range(k):
            members = x[new_labels == j]
            if len(members) == 0:
                # re-seed an empty cluster at the point farthest from its centroid
                far = np.argmax(np.min(dists, axis=1))
                centroids[j] = x[far]
                new_labels[far] = j
            else:
                centroids[j] = members.mean(axis=0)
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels
    return labels, centroids


def cluster_and_balance(
    curves: list[StressStrainCurve],
    k: int,
    target_per_cluster: int,
    rng_seed: int,
) -> list[StressStrainCurve]:
    """K-means on the stress vectors, then upsample every cluster to target size.

    Cluster labels (1..k) are ordered by ascending centroid mean stress so that
    label 1 is always the softest group. Upsampled copies carry +/-1%
    multiplicative stress jitter, small enough to stay within their cluster.
    """
    if k < 1:
        raise ConfigError("k must be >= 1")
    if len(curves) < k:
        raise ConfigError(f"need at least k={k} curves, got {len(curves)}")
    rng = np.random.default_rng(rng_seed)
    x = np.stack([c.stresses for c in curves])
    labels, centroids = _kmeans(x, k, rng)
    order = np.argsort(centroids.mean(axis=1))  # softest centroid -> cluster 1
    rank = np.empty(k, dtype=int)
    rank[order] = np.arange(1, k + 1)

    by_cluster: dict[int, list[StressStrainCurve]] = {j: [] for j in range(1, k + 1)}
    for curve, lab in zip(curves, labels):
        c = StressStrainCurve(
            curve.strains.copy(), curve.stresses.copy(), curve.material_id,
            cluster=int(rank[lab]), provenance=curve.provenance,
        )
        by_cluster[c.cluster].append(c)

    largest = max(len(v) for v in by_cluster.values())
    if target_per_cluster < largest:
        raise ConfigError(
            f"target_per_cluster={target_per_cluster} is smaller than the largest cluster ({largest})"
        )

    next_id = max(c.material_id for c in curves) + 1
    out = []
    for j in range(1, k + 1):
        members = by_cluster[j]
        out.extend(members)
        n_extra = target_per_cluster - len(members)
        for _ in range(n_extra):
            src = members[rng.integers(len(members))]
            jitter = 1.0 + rng.uniform(-0.01, 0.01)
            out.append(
                StressStrainCurve(
                    src.strains.copy(), src.stresses * jitter,
                    material_id=next_id, cluster=j, provenance="upsampled",
                )
            )
            next_id += 1
    return out


# ---------------------------------------------------------------------------
# On-disk format: one CSV per curve plus a materials.json manifest.
# ---------------------------------------------------------------------------

def save_curves(curves: list[StressStrainCurve], out_dir: str | Path, family: str = "") -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    entries = []
    for c in curves:
        name = f"material_{c.material_id:05d}.csv"
        with open(out / name, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["strain", "stress"])
            for eps, sig in zip(c.strains, c.stresses):
                w.writerow([repr(float(eps)), repr(float(sig))])
        entries.append(
            {"material_id": c.material_id, "cluster": c.cluster, "provenance": c.provenance, "path": name}
        )
    manifest = {"family": family, "n_curves": len(curves), "curves": entries}
    with open(out / "materials.json", "w") as f:
        json.dump(manifest, f, indent=2)
    return out / "materials.json"


def load_curve_csv(path: str | Path) -> list[tuple[float, float]]:
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader)
        if header[:2] != ["strain", "stress"]:
            raise DataError(f"{path}: expected 'strain,stress' header, got {header}")
        return [(float(row[0]), float(row[1])) for row in reader]


def load_materials(mat_dir: str | Path) -> list[StressStrainCurve]:
    mat_dir = Path(mat_dir)
    manifest_path = mat_dir / "materials.json"
    if not manifest_path.exists():
        raise DataError(f"missing materials manifest {manifest_path}")
    with open(manifest_path) as f:
        manifest = json.load(f)
    curves = []
    for entry in manifest["curves"]:
        path = mat_dir / entry["path"]
        if not path.exists():
            raise DataError(f"missing curve file for material_id={entry['material_id']}: {path}")
        raw = load_curve_csv(path)
        c = resample_curve(raw, material_id=entry["material_id"])
        c.cluster = entry["cluster"]
        c.provenance = entry["provenance"]
        curves.append(c)
    return curves


def generate_material_set(cfg: CurveFamilyConfig) -> list[StressStrainCurve]:
    """Full gen-materials pipeline for one family.

    steel: seeds -> balance to 40/cluster (200 total) -> upsample to the final
    per-cluster target. aluminium: seeds -> +/-10% @ 2% scaling -> cluster;
    balancing target defaults to the largest cluster when not set.
    """
    seeds = synthesize_seed_curves(cfg.family, cfg.n_seed_curves, cfg.rng_seed)
    if cfg.family == "aluminium":
        # scaled copies only: 11 seeds x 10 factors -> 110-curve pool
        pool = scale_augment(seeds, cfg.scale_min, cfg.scale_max, cfg.scale_step)
    else:
        # intermediate balanced set, ~2x the seed count (101 seeds -> 200 total)
        labels, _ = _kmeans(
            np.stack([c.stresses for c in seeds]), cfg.n_clusters,
            np.random.default_rng(cfg.rng_seed + 1),
        )
        largest = int(np.bincount(labels, minlength=cfg.n_clusters).max())
        inter_target = max(largest, int(round(0.4 * len(seeds))))
        pool = cluster_and_balance(seeds, cfg.n_clusters, inter_target, cfg.rng_seed + 1)
    target = cfg.target_per_cluster
    if target is None:
        labels, centroids = _kmeans(
            np.stack([c.stresses for c in pool]), cfg.n_clusters, np.random.default_rng(cfg.rng_seed + 2)
        )
        target = int(np.bincount(labels, minlength=cfg.n_clusters).max())
    return cluster_and_balance(pool, cfg.n_clusters, target, cfg.rng_seed + 2)
