"""Record HTTP fixtures for the frontend tests from a live toy service.

Spins up the inference service in-process (tiny deterministic model + five
hand-rolled materials), replays the requests the UI makes, and writes the
raw response bodies to test/fixtures/. Rerun after any service contract
change:

    python3 scripts/record_fixtures.py
"""

import json
import sys
import tempfile
from pathlib import Path

import numpy as np
import torch
from fastapi.testclient import TestClient

sys.path.insert(0, str(Path(__file__).resolve().parents[2] / "src"))

from stampbench.geometry import PARAM_RANGES
from stampbench.materials import CURVE_POINTS, StressStrainCurve, save_curves
from stampbench.model import FormingSurrogate, ModelConfig, save_checkpoint
from stampbench.service import create_app, load_service_state

FIXTURES = Path(__file__).resolve().parents[1] / "test" / "fixtures"


def build_client() -> TestClient:
    root = Path(tempfile.mkdtemp(prefix="fixtures_"))
    ckpt_dir, mat_dir = root / "ckpts", root / "mats"
    ckpt_dir.mkdir()
    strains = np.linspace(0.0, 0.5, CURVE_POINTS)
    curves = [
        StressStrainCurve(
            strains=strains,
            stresses=250.0 + 60.0 * m + 500.0 * strains ** (0.1 + 0.05 * m),
            material_id=m,
            cluster=m + 1,
        )
        for m in range(5)
    ]
    save_curves(curves, mat_dir, family="steel")
    torch.manual_seed(0)
    save_checkpoint(
        ckpt_dir / "thinning_best.ckpt",
        FormingSurrogate(ModelConfig.toy16()),
        meta={"field": "thinning"},
    )
    return TestClient(create_app(load_service_state(ckpt_dir, mat_dir)))


def geometry_at(t: float) -> dict:
    return {k: lo + t * (hi - lo) for k, (lo, hi) in PARAM_RANGES.items()}


def record(client: TestClient, name: str, resp) -> None:
    FIXTURES.mkdir(parents=True, exist_ok=True)
    out = FIXTURES / f"{name}.json"
    out.write_text(resp.text)
    print(f"{name}.json  status={resp.status_code}  bytes={len(resp.text)}")


def main() -> None:
    client = build_client()
    record(client, "fields", client.get("/fields"))
    record(client, "materials", client.get("/materials"))
    record(
        client,
        "predict_a",
        client.post("/predict", json={"geometry": geometry_at(0.5), "material_id": 0, "field": "thinning"}),
    )
    record(
        client,
        "predict_b",
        client.post("/predict", json={"geometry": geometry_at(0.25), "material_id": 2, "field": "thinning"}),
    )
    bad = {"geometry": geometry_at(0.5), "material_id": 0, "field": "vorticity"}
    record(client, "predict_error", client.post("/predict", json=bad))
    meta = {
        "predict_a": {"geometry_t": 0.5, "material_id": 0},
        "predict_b": {"geometry_t": 0.25, "material_id": 2},
        "predict_error": {"note": "unknown field name, expect 400", "status": 400},
    }
    (FIXTURES / "requests.json").write_text(json.dumps(meta, indent=2))


if __name__ == "__main__":
    main()
