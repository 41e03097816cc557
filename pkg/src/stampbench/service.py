"""HTTP inference service for the forming surrogate.

One process hosts every loaded field checkpoint over immutable state; requests
are stateless and deterministic, so identical requests return byte-identical
payloads. Grids travel as base64 little-endian float32 (or as a PNG heatmap
with a fixed colormap); masks as base64 uint8. Unloaded fields answer 503
rather than lazy-loading so latency stays predictable.
"""
from __future__ import annotations

import base64
import io
import time
from dataclasses import dataclass, field as dataclass_field
from pathlib import Path

import numpy as np
import torch
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .errors import DataError
from .evaluation import representative_max
from .geometry import PARAM_NAMES, PARAM_RANGES, GeometryParams, rasterize_panel
from .materials import StressStrainCurve, load_materials, resample_curve
from .model import FormingSurrogate, curve_to_tensor, heightmap_to_tensor, load_checkpoint
from .postproc import denoise_displacement
from .training import FIELDS

HEATMAP_CMAP = "viridis"
RETURN_FORMATS = ("float_grid", "png_heatmap")
CURVE_PREVIEW_POINTS = 12


@dataclass
class ServiceState:
    models: dict  # field -> (FormingSurrogate, checkpoint manifest)
    materials: list
    family: str = "unknown"
    grid_h: int = 0
    grid_w: int = 0
    pitch_mm: float = 0.0
    material_index: dict = dataclass_field(default_factory=dict)

    def __post_init__(self):
        self.material_index = {c.material_id: c for c in self.materials}


def load_service_state(checkpoints_dir: str | Path, materials_dir: str | Path | None = None) -> ServiceState:
    """Load every {field}_best.ckpt found plus the material catalog."""
    ckpt_dir = Path(checkpoints_dir)
    models = {}
    for field_name in FIELDS:
        path = ckpt_dir / f"{field_name}_best.ckpt"
        if path.exists():
            model, manifest = load_checkpoint(path)
            recorded = manifest.get("meta", {}).get("field")
            if recorded != field_name:
                raise DataError(f"{path}: checkpoint records field {recorded!r}, expected {field_name!r}")
            models[field_name] = (model, manifest)
    materials, family = [], "unknown"
    if materials_dir is not None and (Path(materials_dir) / "materials.json").exists():
        import json

        materials = load_materials(materials_dir)
        with open(Path(materials_dir) / "materials.json") as f:
            family = json.load(f).get("family") or "unknown"
    grid_h = grid_w = 0
    pitch = 0.0
    if models:
        any_model = next(iter(models.values()))[0]
        grid_h, grid_w = any_model.cfg.grid_h, any_model.cfg.grid_w
        for m, _ in models.values():
            if (m.cfg.grid_h, m.cfg.grid_w) != (grid_h, grid_w):
                raise DataError("loaded checkpoints disagree on grid resolution")
        pitch = 608.0 / grid_h
    return ServiceState(
        models=models, materials=materials, family=family, grid_h=grid_h, grid_w=grid_w, pitch_mm=pitch
    )


def _b64(arr: np.ndarray) -> str:
    return base64.b64encode(np.ascontiguousarray(arr).tobytes()).decode("ascii")


def _png_heatmap(grid: np.ndarray) -> bytes:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    buf = io.BytesIO()
    plt.imsave(buf, grid, cmap=HEATMAP_CMAP, format="png", origin="upper")
    return buf.getvalue()


def _validate_predict(body: dict, state: ServiceState):
    """Returns (params, curve, field, options) or raises _RequestError."""
    problems = {}
    field_name = body.get("field")
    if field_name not in FIELDS:
        problems["field"] = f"expected one of {list(FIELDS)}, got {field_name!r}"

    geometry = body.get("geometry")
    params = None
    if not isinstance(geometry, dict):
        problems["geometry"] = "object with the nine panel parameters required"
    else:
        missing = [k for k in PARAM_NAMES if k not in geometry]
        extra = [k for k in geometry if k not in PARAM_NAMES]
        if missing:
            problems["geometry"] = f"missing parameters: {missing}"
        elif extra:
            problems["geometry"] = f"unknown parameters: {extra}"
        else:
            try:
                params = GeometryParams(**{k: float(geometry[k]) for k in PARAM_NAMES}, geometry_id=0)
            except (TypeError, ValueError):
                problems["geometry"] = "parameters must be numbers"
            else:
                bad = params.out_of_range()
                for name in bad:
                    lo, hi = PARAM_RANGES[name]
                    problems[f"geometry.{name}"] = f"value {geometry[name]} outside [{lo}, {hi}]"

    material_id = body.get("material_id")
    curve_points = body.get("curve")
    curve = None
    unknown_material = None
    if (material_id is None) == (curve_points is None):
        problems["material"] = "exactly one of material_id or curve is required"
    elif curve_points is not None:
        try:
            curve = resample_curve([(float(e), float(s)) for e, s in curve_points], material_id=-1)
        except (DataError, TypeError, ValueError) as exc:
            problems["curve"] = f"invalid curve: {exc}"
    elif material_id is not None:
        if not isinstance(material_id, int):
            problems["material_id"] = "must be an integer id"
        elif material_id not in state.material_index:
            unknown_material = material_id
        else:
            curve = state.material_index[material_id]

    options = body.get("options") or {}
    denoise = bool(options.get("denoise", False))
    return_format = options.get("return_format", "float_grid")
    if return_format not in RETURN_FORMATS:
        problems["options.return_format"] = f"expected one of {list(RETURN_FORMATS)}"

    if problems:
        raise _RequestError(400, problems)
    if unknown_material is not None:
        raise _RequestError(404, {"material_id": f"unknown material {unknown_material}"})
    if field_name not in state.models:
        raise _RequestError(503, {"field": f"no checkpoint loaded for field {field_name!r}"})
    return params, curve, field_name, {"denoise": denoise, "return_format": return_format}


class _RequestError(Exception):
    def __init__(self, status: int, problems: dict):
        self.status = status
        self.problems = problems


def run_prediction(state: ServiceState, params: GeometryParams, curve: StressStrainCurve, field_name: str, options: dict) -> dict:
    t0 = time.perf_counter()
    hm = rasterize_panel(params, state.grid_h, state.grid_w, align=1, warn=False)
    model, manifest = state.models[field_name]
    geo = heightmap_to_tensor(hm).unsqueeze(0)
    stress = curve_to_tensor(curve).unsqueeze(0)
    with torch.no_grad():
        pred = model(geo, stress)[0].numpy()  # (C, H, W)
    grid = np.moveaxis(pred, 0, -1)  # (H, W, C)
    mask = hm.valid_mask
    if options["denoise"]:
        grid = denoise_displacement(grid, mask)
    scalar = grid[..., 0] if grid.shape[-1] == 1 else np.sqrt((grid.astype(np.float64) ** 2).sum(axis=-1))
    elapsed_ms = (time.perf_counter() - t0) * 1000.0

    vals = scalar[mask]
    summary = {
        "representative_max": representative_max(scalar, mask),
        "min": float(vals.min()),
        "max": float(vals.max()),
        "inference_ms": elapsed_ms,
    }
    shape = [state.grid_h, state.grid_w] if grid.shape[-1] == 1 else [state.grid_h, state.grid_w, 3]
    payload = {
        "field": field_name,
        "shape": shape,
        "format": options["return_format"],
        "mask_b64": _b64(mask.astype(np.uint8)),
        "summary": summary,
        "model_version": manifest["content_hash"],
    }
    if options["return_format"] == "float_grid":
        out = grid[..., 0] if grid.shape[-1] == 1 else grid
        payload["grid_b64"] = _b64(out.astype("<f4"))
    else:
        payload["png_b64"] = base64.b64encode(_png_heatmap(scalar)).decode("ascii")
    return payload


def create_app(state: ServiceState) -> FastAPI:
    app = FastAPI(title="forming surrogate service")
    app.state.service = state

    @app.post("/predict")
    async def predict(request: Request):
        try:
            body = await request.json()
        except Exception:
            return JSONResponse(status_code=400, content={"errors": {"body": "invalid JSON"}})
        if not isinstance(body, dict):
            return JSONResponse(status_code=400, content={"errors": {"body": "JSON object required"}})
        try:
            params, curve, field_name, options = _validate_predict(body, state)
        except _RequestError as exc:
            return JSONResponse(status_code=exc.status, content={"errors": exc.problems})
        return JSONResponse(run_prediction(state, params, curve, field_name, options))

    @app.get("/materials")
    def materials():
        catalog = []
        for c in state.materials:
            step = max(1, len(c.strains) // CURVE_PREVIEW_POINTS)
            idx = list(range(0, len(c.strains), step))
            if idx[-1] != len(c.strains) - 1:
                idx.append(len(c.strains) - 1)
            catalog.append(
                {
                    "id": c.material_id,
                    "cluster": c.cluster,
                    "preview": [[float(c.strains[i]), float(c.stresses[i])] for i in idx],
                }
            )
        return {"family": state.family, "count": len(catalog), "materials": catalog}

    @app.get("/fields")
    def fields():
        return {
            "fields": list(FIELDS),
            "loaded": sorted(state.models),
            "parameter_ranges": {k: [lo, hi] for k, (lo, hi) in PARAM_RANGES.items()},
            "grid": {"H": state.grid_h, "W": state.grid_w, "pitch_mm": state.pitch_mm},
        }

    @app.get("/health")
    def health():
        if not state.models:
            return JSONResponse(status_code=503, content={"status": "no checkpoints loaded"})
        return {"status": "ok", "loaded_fields": sorted(state.models)}

    @app.get("/model-info")
    def model_info():
        if not state.models:
            return JSONResponse(status_code=503, content={"status": "no checkpoints loaded"})
        info = {}
        for name, (model, manifest) in state.models.items():
            info[name] = {
                "content_hash": manifest["content_hash"],
                "n_params": int(sum(p.numel() for p in model.parameters())),
                "meta": manifest.get("meta", {}),
            }
        return {"models": info, "grid": {"H": state.grid_h, "W": state.grid_w}}

    return app


def decode_grid(payload: dict) -> tuple[np.ndarray, np.ndarray]:
    """Client-side helper: base64 payload back to (grid, mask)."""
    shape = tuple(payload["shape"])
    grid = np.frombuffer(base64.b64decode(payload["grid_b64"]), dtype="<f4").reshape(shape)
    mask = (
        np.frombuffer(base64.b64decode(payload["mask_b64"]), dtype=np.uint8)
        .reshape(shape[0], shape[1])
        .astype(bool)
    )
    return grid, mask
