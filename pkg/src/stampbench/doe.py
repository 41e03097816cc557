"""Design-of-experiments construction and dataset materialization.

Pairs every geometry with one material from each cluster, assigns each
geometry to exactly one of train/val/test (splitting geometries, not samples,
so no geometry leaks across splits), and drives ground-truth field generation
over the resulting matrix.
"""
from __future__ import annotations

import csv
import hashlib
import json
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataError
from .geometry import load_geometry_manifest, load_heightmap
from .materials import StressStrainCurve, load_materials
from .oracle import OracleConfig, TARGET_FIELDS, generate_fields, save_field_sample

SPLITS = ("train", "val", "test")
DEFAULT_SPLIT_RATIO = (0.8, 0.1, 0.1)


@dataclass
class DoEEntry:
    id: int
    geometry_id: int
    material_id: int
    cluster: int
    split: str

    def __post_init__(self):
        if self.split not in SPLITS:
            raise ConfigError(f"unknown split {self.split!r}")


def split_counts(n: int, ratios=DEFAULT_SPLIT_RATIO) -> dict[str, int]:
    """Largest-remainder apportionment of n items over the split ratios."""
    if len(ratios) != len(SPLITS):
        raise ConfigError(f"need {len(SPLITS)} split ratios")
    if any(r < 0 for r in ratios) or abs(sum(ratios) - 1.0) > 1e-9:
        raise ConfigError(f"split ratios must be non-negative and sum to 1, got {ratios}")
    floors = [int(n * r) for r in ratios]
    remainders = [n * r - f for r, f in zip(ratios, floors)]
    for _ in range(n - sum(floors)):
        i = int(np.argmax(remainders))
        floors[i] += 1
        remainders[i] = -1.0
    return dict(zip(SPLITS, floors))


def build_doe(
    geometry_ids: list[int],
    materials: list[StressStrainCurve],
    split_ratio=DEFAULT_SPLIT_RATIO,
    rng_seed: int = 0,
    n_clusters: int | None = None,
) -> list[DoEEntry]:
    """One entry per (geometry, cluster); material drawn uniformly within cluster."""
    if n_clusters is None:
        n_clusters = max((c.cluster for c in materials), default=0)
    by_cluster: dict[int, list[int]] = {k: [] for k in range(1, n_clusters + 1)}
    for c in materials:
        if c.cluster in by_cluster:
            by_cluster[c.cluster].append(c.material_id)
    for k, ids in by_cluster.items():
        if not ids:
            raise ConfigError(f"cluster {k} has no materials")

    counts = split_counts(len(geometry_ids), split_ratio)
    rng = np.random.default_rng(rng_seed)
    order = rng.permutation(len(geometry_ids))
    split_of: dict[int, str] = {}
    pos = 0
    for split in SPLITS:
        for idx in order[pos : pos + counts[split]]:
            split_of[geometry_ids[idx]] = split
        pos += counts[split]

    entries = []
    for gid in geometry_ids:
        for k in range(1, n_clusters + 1):
            mid = int(rng.choice(by_cluster[k]))
            entries.append(
                DoEEntry(
                    id=len(entries),
                    geometry_id=gid,
                    material_id=mid,
                    cluster=k,
                    split=split_of[gid],
                )
            )
    return entries


def save_doe_csv(entries: list[DoEEntry], path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["id", "geometry_id", "material_id", "cluster", "split"])
        for e in entries:
            w.writerow([e.id, e.geometry_id, e.material_id, e.cluster, e.split])
    return path


def load_doe_csv(path: str | Path) -> list[DoEEntry]:
    path = Path(path)
    if not path.exists():
        raise DataError(f"DoE file not found: {path}")
    with open(path, newline="") as f:
        rdr = csv.reader(f)
        header = next(rdr)
        if header != ["id", "geometry_id", "material_id", "cluster", "split"]:
            raise DataError(f"{path}: unexpected DoE header {header}")
        return [
            DoEEntry(int(r[0]), int(r[1]), int(r[2]), int(r[3]), r[4]) for r in rdr if r
        ]


def materialize_dataset(
    entries: list[DoEEntry],
    out_dir: str | Path,
    geometries_dir: str | Path,
    materials_dir: str | Path,
    oracle_cfg: OracleConfig | None = None,
) -> dict:
    """Generate and store one FieldSample per DoE entry.

    Heightmaps are read pre-rasterized from geometries_dir; curves from
    materials_dir. Returns the dataset manifest (also written as
    dataset.json, atomically, after all samples are on disk).
    """
    if not entries:
        raise ConfigError("no DoE entries to materialize")
    out = Path(out_dir)
    samples_dir = out / "samples"
    oracle_cfg = oracle_cfg or OracleConfig()

    curves = {c.material_id: c for c in load_materials(materials_dir)}
    geo_manifest = load_geometry_manifest(geometries_dir)
    known_geoms = set(geo_manifest["geometry_ids"])

    hasher = hashlib.sha256()
    heightmaps = {}
    split_totals = {s: 0 for s in SPLITS}
    for e in entries:
        if e.geometry_id not in known_geoms:
            raise DataError(f"entry {e.id}: geometry_id {e.geometry_id} not found in {geometries_dir}")
        if e.material_id not in curves:
            raise DataError(f"entry {e.id}: material_id {e.material_id} not found in {materials_dir}")
        if e.geometry_id not in heightmaps:
            heightmaps[e.geometry_id], _ = load_heightmap(geometries_dir, e.geometry_id)
        fs = generate_fields(heightmaps[e.geometry_id], curves[e.material_id], oracle_cfg, sample_id=e.id)
        save_field_sample(fs, samples_dir, meta={"split": e.split, "doe_id": e.id})
        for name in TARGET_FIELDS:
            hasher.update(getattr(fs, name).astype("<f4").tobytes())
        split_totals[e.split] += 1

    any_hm = next(iter(heightmaps.values()))
    manifest = {
        "n_samples": len(entries),
        "splits": split_totals,
        "H": any_hm.shape[0],
        "W": any_hm.shape[1],
        "pitch_mm": any_hm.pixel_pitch_mm,
        "oracle": vars(oracle_cfg),
        "content_hash": hasher.hexdigest(),
    }
    out.mkdir(parents=True, exist_ok=True)
    tmp = out / "dataset.json.tmp"
    with open(tmp, "w") as f:
        json.dump(manifest, f, indent=2)
    os.replace(tmp, out / "dataset.json")
    return manifest


def load_dataset_manifest(dataset_dir: str | Path) -> dict:
    path = Path(dataset_dir) / "dataset.json"
    if not path.exists():
        raise DataError(f"missing dataset manifest {path}")
    with open(path) as f:
        return json.load(f)
