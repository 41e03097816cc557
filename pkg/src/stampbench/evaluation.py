"""Metrics and report builder for trained field surrogates.

The headline accuracy number is the representative maximum: the mean of the
top 0.1% of valid cells, compared between ground truth and prediction as a
relative-error percentage. Field MSE follows the training loss exactly
(unmasked, background included); a masked variant is reported alongside.
Overlap maps classify the hottest 0.3% of cells of each grid into shared,
truth-only, and prediction-only regions.
"""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field as dataclass_field
from pathlib import Path

import numpy as np
import torch

from .errors import ConfigError, DataError
from .model import load_checkpoint
from .training import FIELD_CHANNELS, FieldDataset, load_field_dataset, mse_loss

TOP_FRACTION = 0.001
OVERLAP_FRACTION = 0.003

PERCENTILES = (90, 95)


def _masked_values(grid, mask) -> np.ndarray:
    grid = np.asarray(grid, dtype=np.float64)
    mask = np.asarray(mask, dtype=bool)
    if grid.shape != mask.shape:
        raise DataError(f"grid shape {grid.shape} does not match mask shape {mask.shape}")
    return grid[mask]


def representative_max(field_grid, mask) -> float:
    """Mean of the top 0.1% of valid cells (at least one cell)."""
    vals = _masked_values(field_grid, mask)
    if vals.size == 0:
        raise DataError("representative_max: mask has no valid cells")
    k = max(1, math.floor(TOP_FRACTION * vals.size))
    # ascending order so the mean is bit-identical to a full-sort oracle
    top = np.sort(np.partition(vals, vals.size - k)[vals.size - k :])
    return float(top.mean())


def relative_error(gt, pd, mask) -> float | None:
    """Percent error between representative maxima; None for zero ground truth."""
    m_gt = representative_max(gt, mask)
    m_pd = representative_max(pd, mask)
    if m_gt == 0.0:
        warnings.warn("relative_error: ground-truth representative max is zero, sample excluded")
        return None
    return 100.0 * abs(m_gt - m_pd) / abs(m_gt)


@dataclass
class OverlapResult:
    overlap: set
    gt_only: set
    pd_only: set
    iou: float

    @property
    def counts(self) -> dict:
        return {
            "overlap": len(self.overlap),
            "gt_only": len(self.gt_only),
            "pd_only": len(self.pd_only),
        }


def _top_cells(grid, mask, k: int) -> set:
    # stable descending order: ties resolved by row-major cell index
    vals = _masked_values(grid, mask)
    idx = np.nonzero(np.asarray(mask, dtype=bool))
    order = np.argsort(-vals, kind="stable")
    if k < vals.size and vals[order[k - 1]] == vals[order[k]]:
        warnings.warn("top_value_overlap: tied values at the selection boundary, using stable index order")
    chosen = order[:k]
    return {(int(idx[0][c]), int(idx[1][c])) for c in chosen}


def top_value_overlap(gt, pd, mask, fraction: float = OVERLAP_FRACTION) -> OverlapResult:
    """Classify each grid's hottest cells into overlap / gt-only / pd-only sets."""
    if not 0.0 < fraction < 1.0:
        raise ConfigError(f"fraction must be in (0, 1), got {fraction}")
    n_valid = int(np.asarray(mask, dtype=bool).sum())
    if n_valid < 1.0 / fraction:
        raise DataError(f"top_value_overlap: need at least {math.ceil(1.0 / fraction)} valid cells, got {n_valid}")
    k = max(1, math.floor(fraction * n_valid))
    gt_set = _top_cells(gt, mask, k)
    pd_set = _top_cells(pd, mask, k)
    overlap = gt_set & pd_set
    union = gt_set | pd_set
    return OverlapResult(
        overlap=overlap,
        gt_only=gt_set - overlap,
        pd_only=pd_set - overlap,
        iou=len(overlap) / len(union),
    )


def fld_points(major, minor, mask) -> list:
    """One (minor, major) strain pair per valid cell, row-major order."""
    major = np.asarray(major)
    minor = np.asarray(minor)
    mask = np.asarray(mask, dtype=bool)
    if major.shape != minor.shape or major.shape != mask.shape:
        raise DataError(f"shape mismatch: major {major.shape}, minor {minor.shape}, mask {mask.shape}")
    rows, cols = np.nonzero(mask)
    return [(float(minor[i, j]), float(major[i, j])) for i, j in zip(rows, cols)]


def displacement_mse(gt, pd) -> float:
    """Unmasked MSE over all H*W*3 entries, identical to the training loss."""
    gt = np.asarray(gt)
    pd = np.asarray(pd)
    if gt.ndim != 3 or gt.shape[-1] != 3:
        raise DataError(f"expected (H, W, 3) displacement grids, got {gt.shape}")
    return float(mse_loss(torch.from_numpy(np.ascontiguousarray(pd)), torch.from_numpy(np.ascontiguousarray(gt))).item())


def masked_mse(gt, pd, mask) -> float:
    """MSE restricted to valid cells (all channels)."""
    gt = np.asarray(gt, dtype=np.float64)
    pd = np.asarray(pd, dtype=np.float64)
    mask = np.asarray(mask, dtype=bool)
    if gt.shape != pd.shape:
        raise DataError(f"shape mismatch {gt.shape} vs {pd.shape}")
    if mask.sum() == 0:
        raise DataError("masked_mse: mask has no valid cells")
    diff2 = (gt - pd) ** 2
    if gt.ndim == 3:
        diff2 = diff2.reshape(mask.shape + (-1,)).mean(axis=-1)
    return float(diff2[mask].mean())


@dataclass
class EvalReport:
    field: str
    family: str
    per_sample: list
    aggregate: dict
    excluded: list = dataclass_field(default_factory=list)

    def __post_init__(self):
        for row in self.per_sample:
            rel = row.get("rel_err_pct")
            if rel is not None and rel < 0:
                raise DataError(f"sample {row.get('sample_id')}: negative relative error {rel}")
        med = self.aggregate.get("rel_err_median")
        p90 = self.aggregate.get("rel_err_p90")
        p95 = self.aggregate.get("rel_err_p95")
        if med is not None and p90 is not None and p95 is not None:
            if not (med <= p90 + 1e-12 and p90 <= p95 + 1e-12):
                raise DataError(f"percentiles not monotone: median={med} p90={p90} p95={p95}")


def _magnitude(grid_chw: np.ndarray) -> np.ndarray:
    # scalar fields pass through; vector fields reduce to per-cell L2 norm
    if grid_chw.shape[0] == 1:
        return grid_chw[0]
    return np.sqrt((grid_chw.astype(np.float64) ** 2).sum(axis=0))


def _aggregate(rel_errs: list, mses: list, masked: list) -> dict:
    agg: dict = {
        "mse_mean": float(np.mean(mses)),
        "mse_median": float(np.median(mses)),
        "masked_mse_mean": float(np.mean(masked)),
        "masked_mse_median": float(np.median(masked)),
    }
    if rel_errs:
        arr = np.asarray(rel_errs, dtype=np.float64)
        agg.update(
            rel_err_mean=float(arr.mean()),
            rel_err_median=float(np.median(arr)),
            rel_err_p90=float(np.percentile(arr, 90)),
            rel_err_p95=float(np.percentile(arr, 95)),
        )
    else:
        agg.update(rel_err_mean=None, rel_err_median=None, rel_err_p90=None, rel_err_p95=None)
    return agg


def _histogram_png(values, title: str, xlabel: str, out_path: Path, agg_prefix: str, aggregate: dict):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 4))
    ax.hist(values, bins=30, color="#4878d0", edgecolor="white")
    markers = [
        ("mean", aggregate.get(f"{agg_prefix}_mean"), "#d65f5f", "-"),
        ("median", aggregate.get(f"{agg_prefix}_median"), "#ee854a", "--"),
        ("p90", aggregate.get(f"{agg_prefix}_p90"), "#6acc64", ":"),
        ("p95", aggregate.get(f"{agg_prefix}_p95"), "#956cb4", ":"),
    ]
    for name, val, color, style in markers:
        if val is not None:
            ax.axvline(val, color=color, linestyle=style, linewidth=1.2, label=f"{name}={val:.3g}")
    ax.set_title(title)
    ax.set_xlabel(xlabel)
    ax.set_ylabel("samples")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(out_path, dpi=110)
    plt.close(fig)


def evaluate_dataset(model, ds: FieldDataset, batch_size: int = 8):
    """Forward every sample and collect per-sample metric rows."""
    model.eval()
    rows, excluded = [], []
    rel_errs, mses, masked_list = [], [], []
    with torch.no_grad():
        for start in range(0, len(ds), batch_size):
            sl = slice(start, start + batch_size)
            pred = model(ds.geo[sl], ds.stress[sl])
            for b in range(pred.shape[0]):
                i = start + b
                sid = ds.sample_ids[i]
                pd_chw = pred[b].numpy()
                gt_chw = ds.target[i].numpy()
                mask = ds.mask[i].numpy().astype(bool)
                mse = float(mse_loss(pred[b], ds.target[i]).item())
                mmse = masked_mse(
                    np.moveaxis(gt_chw, 0, -1), np.moveaxis(pd_chw, 0, -1), mask
                )
                m_gt = representative_max(_magnitude(gt_chw), mask)
                m_pd = representative_max(_magnitude(pd_chw), mask)
                rel = relative_error(_magnitude(gt_chw), _magnitude(pd_chw), mask)
                rows.append(
                    {
                        "sample_id": sid,
                        "mse": mse,
                        "masked_mse": mmse,
                        "rel_err_pct": rel,
                        "m_gt": m_gt,
                        "m_pd": m_pd,
                    }
                )
                mses.append(mse)
                masked_list.append(mmse)
                if rel is None:
                    excluded.append(sid)
                else:
                    rel_errs.append(rel)
    return rows, _aggregate(rel_errs, mses, masked_list), excluded, (rel_errs, mses)


def build_report(
    checkpoint_path: str | Path,
    dataset_dir: str | Path,
    geometries_dir: str | Path,
    materials_dir: str | Path,
    out_dir: str | Path,
    split: str = "test",
    batch_size: int = 8,
    family: str | None = None,
) -> EvalReport:
    """Run a checkpoint over a stored split and emit report.json plus histograms."""
    model, manifest = load_checkpoint(checkpoint_path)
    field = manifest.get("meta", {}).get("field")
    if field is None:
        raise DataError(f"checkpoint {checkpoint_path} does not record its target field")
    if model.cfg.out_channels != FIELD_CHANNELS[field]:
        raise ConfigError(f"checkpoint field {field!r} does not match {model.cfg.out_channels} output channels")
    ds = load_field_dataset(dataset_dir, geometries_dir, materials_dir, field, split=split)
    if len(ds) == 0:
        raise DataError(f"no samples in split {split!r}")
    if family is None:
        manifest_path = Path(materials_dir) / "materials.json"
        if manifest_path.exists():
            with open(manifest_path) as f:
                family = json.load(f).get("family") or "unknown"
        else:
            family = "unknown"

    rows, aggregate, excluded, (rel_errs, mses) = evaluate_dataset(model, ds, batch_size)
    report = EvalReport(field=field, family=family, per_sample=rows, aggregate=aggregate, excluded=excluded)

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if rel_errs:
        _histogram_png(
            rel_errs,
            f"{field} ({family}): representative-max relative error",
            "relative error [%]",
            out / f"{field}_rel_err_hist.png",
            "rel_err",
            aggregate,
        )
    mse_agg = {
        "mse_mean": aggregate["mse_mean"],
        "mse_median": aggregate["mse_median"],
        "mse_p90": float(np.percentile(mses, 90)),
        "mse_p95": float(np.percentile(mses, 95)),
    }
    _histogram_png(
        mses,
        f"{field} ({family}): per-sample MSE",
        "MSE (physical units squared)",
        out / f"{field}_mse_hist.png",
        "mse",
        mse_agg,
    )
    payload = {
        "field": field,
        "family": family,
        "split": split,
        "n_samples": len(rows),
        "excluded": excluded,
        "aggregate": aggregate,
        "per_sample": rows,
    }
    with open(out / "report.json", "w") as f:
        json.dump(payload, f, indent=2)
    return report
