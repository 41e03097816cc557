"""Training loop for the field surrogate.

One model per target field. Loss is plain MSE over every grid entry in
physical units, zero-padded background included; no input or target
normalization is applied. Adam with a step learning-rate schedule; the best
validation snapshot is exported in the inference checkpoint format and a
full optimizer/epoch state file supports exact resumption.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from .errors import ConfigError, DataError
from .geometry import load_heightmap
from .materials import load_materials
from .model import FormingSurrogate, curve_to_tensor, heightmap_to_tensor, save_checkpoint
from .oracle import load_field_sample

FIELDS = ("thinning", "major", "minor", "plastic", "displacement")
FIELD_ATTRS = {
    "thinning": "thinning",
    "major": "major_strain",
    "minor": "minor_strain",
    "plastic": "plastic_strain",
    "displacement": "displacement",
}
FIELD_CHANNELS = {f: (3 if f == "displacement" else 1) for f in FIELDS}


@dataclass
class TrainConfig:
    field: str = "thinning"
    lr0: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    gamma: float = 0.4
    step_epochs: int = 100
    max_epochs: int = 200
    batch_size: int = 4
    rng_seed: int = 0
    grad_clip: float | None = None

    def __post_init__(self):
        if self.field not in FIELDS:
            raise ConfigError(f"unknown field {self.field!r}, expected one of {FIELDS}")
        if self.lr0 <= 0:
            raise ConfigError("lr0 must be positive")
        if not 0.0 < self.gamma < 1.0:
            raise ConfigError(f"gamma must be in (0, 1), got {self.gamma}")
        if self.step_epochs < 1 or self.max_epochs < 1 or self.batch_size < 1:
            raise ConfigError("step_epochs, max_epochs and batch_size must be >= 1")


def mse_loss(y_hat: torch.Tensor, y: torch.Tensor) -> torch.Tensor:
    """Mean squared difference over every entry (H*W*C), background included."""
    if y_hat.shape != y.shape:
        raise DataError(f"shape mismatch {tuple(y_hat.shape)} vs {tuple(y.shape)}")
    return ((y_hat - y) ** 2).mean()


def lr_schedule(epoch: int, cfg: TrainConfig) -> float:
    if epoch < 0:
        raise ConfigError("epoch must be >= 0")
    return cfg.lr0 * cfg.gamma ** (epoch // cfg.step_epochs)


@dataclass
class FieldDataset:
    """In-memory tensors for one split of one target field."""

    geo: torch.Tensor  # (N, 1, H, W)
    stress: torch.Tensor  # (N, T)
    target: torch.Tensor  # (N, C, H, W)
    mask: torch.Tensor  # (N, H, W) bool
    sample_ids: list

    def __len__(self):
        return self.geo.shape[0]


def load_field_dataset(
    dataset_dir: str | Path,
    geometries_dir: str | Path,
    materials_dir: str | Path,
    field: str,
    split: str | None = None,
) -> FieldDataset:
    """Assemble tensors for a stored dataset split."""
    if field not in FIELDS:
        raise ConfigError(f"unknown field {field!r}")
    samples_dir = Path(dataset_dir) / "samples"
    manifests = []
    for p in sorted(samples_dir.glob("sample_*.json")):
        with open(p) as f:
            manifests.append(json.load(f))
    if split is not None:
        manifests = [m for m in manifests if m.get("split") == split]
    if not manifests:
        raise DataError(f"no samples for split {split!r} in {samples_dir}")

    curves = {c.material_id: c for c in load_materials(materials_dir)}
    heightmaps = {}
    geos, stresses, targets, masks, ids = [], [], [], [], []
    for m in manifests:
        gid = m["geometry_id"]
        if gid not in heightmaps:
            heightmaps[gid], _ = load_heightmap(geometries_dir, gid)
        hm = heightmaps[gid]
        curve = curves.get(m["material_id"])
        if curve is None:
            raise DataError(f"sample {m['sample_id']}: material_id {m['material_id']} not found")
        fs, _ = load_field_sample(samples_dir, m["sample_id"], hm, curve)
        arr = getattr(fs, FIELD_ATTRS[field])
        t = torch.from_numpy(np.asarray(arr, dtype=np.float32))
        if field == "displacement":
            t = t.permute(2, 0, 1)
        else:
            t = t.unsqueeze(0)
        geos.append(heightmap_to_tensor(hm))
        stresses.append(curve_to_tensor(curve))
        targets.append(t)
        masks.append(torch.from_numpy(fs.valid_mask))
        ids.append(m["sample_id"])
    return FieldDataset(
        geo=torch.stack(geos),
        stress=torch.stack(stresses),
        target=torch.stack(targets),
        mask=torch.stack(masks),
        sample_ids=ids,
    )


def save_train_state(path: str | Path, model, optimizer, epoch: int, history: list, best_val: float):
    torch.save(
        {
            "model": model.state_dict(),
            "optimizer": optimizer.state_dict(),
            "epoch": epoch,
            "history": history,
            "best_val": best_val,
        },
        path,
    )


def write_history_csv(history: list, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["epoch", "lr", "train_loss", "val_loss"])
        for row in history:
            w.writerow([row["epoch"], repr(row["lr"]), repr(row["train_loss"]), repr(row["val_loss"])])
    return path


@torch.no_grad()
def evaluate_loss(model, ds: FieldDataset, batch_size: int = 8) -> float:
    """Unmasked MSE over a dataset, batched, same code path as training."""
    model.eval()
    total, count = 0.0, 0
    for i in range(0, len(ds), batch_size):
        sl = slice(i, i + batch_size)
        pred = model(ds.geo[sl], ds.stress[sl])
        n = pred.shape[0]
        total += mse_loss(pred, ds.target[sl]).item() * n
        count += n
    return total / count


def train(
    model: FormingSurrogate,
    train_ds: FieldDataset,
    val_ds: FieldDataset | None,
    cfg: TrainConfig,
    out_dir: str | Path,
    resume_from: str | Path | None = None,
) -> tuple[Path, list]:
    """Optimize the model; returns (best checkpoint path, history rows).

    Shuffling is reseeded per epoch from rng_seed + epoch, so resuming from
    the saved state reproduces the remaining epochs exactly.
    """
    if len(train_ds) == 0:
        raise DataError("empty training dataset")
    if FIELD_CHANNELS[cfg.field] != model.cfg.out_channels:
        raise ConfigError(
            f"field {cfg.field} needs {FIELD_CHANNELS[cfg.field]} output channels, "
            f"model has {model.cfg.out_channels}"
        )
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    torch.manual_seed(cfg.rng_seed)
    optimizer = torch.optim.Adam(
        model.parameters(), lr=cfg.lr0, betas=(cfg.beta1, cfg.beta2), eps=cfg.epsilon
    )
    start_epoch = 0
    history: list = []
    best_val = float("inf")
    if resume_from is not None:
        state = torch.load(resume_from, weights_only=False)
        model.load_state_dict(state["model"])
        optimizer.load_state_dict(state["optimizer"])
        start_epoch = state["epoch"] + 1
        history = state["history"]
        best_val = state["best_val"]

    best_path = out / f"{cfg.field}_best.ckpt"
    n = len(train_ds)
    for epoch in range(start_epoch, cfg.max_epochs):
        lr = lr_schedule(epoch, cfg)
        for group in optimizer.param_groups:
            group["lr"] = lr
        model.train()
        order = np.random.default_rng(cfg.rng_seed + epoch).permutation(n)
        total, seen = 0.0, 0
        for bi, lo in enumerate(range(0, n, cfg.batch_size)):
            idx = torch.from_numpy(order[lo : lo + cfg.batch_size].copy())
            pred = model(train_ds.geo[idx], train_ds.stress[idx])
            loss = mse_loss(pred, train_ds.target[idx])
            if not torch.isfinite(loss):
                raise DataError(f"non-finite loss at epoch {epoch}, batch {bi}")
            optimizer.zero_grad()
            loss.backward()
            if cfg.grad_clip is not None:
                torch.nn.utils.clip_grad_norm_(model.parameters(), cfg.grad_clip)
            optimizer.step()
            total += loss.item() * len(idx)
            seen += len(idx)
        train_loss = total / seen
        val_loss = evaluate_loss(model, val_ds) if val_ds is not None and len(val_ds) else train_loss
        history.append({"epoch": epoch, "lr": lr, "train_loss": train_loss, "val_loss": val_loss})
        if val_loss < best_val:
            best_val = val_loss
            save_checkpoint(
                best_path,
                model,
                meta={"field": cfg.field, "epoch": epoch, "val_loss": val_loss},
            )
        save_train_state(out / f"{cfg.field}_last.pt", model, optimizer, epoch, history, best_val)

    write_history_csv(history, out / f"{cfg.field}_history.csv")
    if not best_path.exists():
        save_checkpoint(best_path, model, meta={"field": cfg.field, "epoch": -1, "val_loss": best_val})
    return best_path, history
