"""Command-line entry point wiring the full pipeline.

Subcommands: gen-materials, gen-geometries, gen-doe, gen-dataset, train,
eval, predict, export-mesh, serve. Every run writes a resolved-config
snapshot next to its outputs. Exit codes: 0 success, 1 data error,
2 config/usage error.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import os
import subprocess
import sys
from pathlib import Path

from .errors import ConfigError, DataError


def _git_hash() -> str:
    for cwd in (Path(__file__).resolve().parent, Path.cwd()):
        try:
            out = subprocess.run(
                ["git", "rev-parse", "--short", "HEAD"],
                cwd=cwd,
                capture_output=True,
                text=True,
                timeout=5,
            )
        except (OSError, subprocess.TimeoutExpired):
            continue
        if out.returncode == 0:
            return out.stdout.strip()
    return "unknown"


def version_string() -> str:
    try:
        from importlib.metadata import version

        pkg_version = version("stampbench")
    except Exception:
        pkg_version = "0.1.0"
    return json.dumps({"name": "stampbench", "version": pkg_version, "git_hash": _git_hash()})


def _write_snapshot(out_dir: Path, command: str, resolved: dict):
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / f"{command.replace('-', '_')}_config.json"
    with open(path, "w") as f:
        json.dump({"command": command, "resolved": resolved}, f, indent=2, default=str)
    return path


def _args_dict(args: argparse.Namespace) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "command")}


def _auto_align(h: int, w: int) -> int:
    for a in (32, 16, 8, 4, 2, 1):
        if h % a == 0 and w % a == 0:
            return a
    return 1


def cmd_gen_materials(args) -> int:
    from .materials import CurveFamilyConfig, generate_material_set, save_curves

    n_seeds = args.n_seeds
    if n_seeds is None:
        n_seeds = 11 if args.family == "aluminium" else 101
    kwargs = {}
    if args.target_per_cluster is not None:
        # 0 selects the adaptive target (largest cluster wins)
        kwargs["target_per_cluster"] = args.target_per_cluster or None
    cfg = CurveFamilyConfig(
        family=args.family,
        n_seed_curves=n_seeds,
        rng_seed=args.seed,
        **kwargs,
    )
    curves = generate_material_set(cfg)
    out = Path(args.out)
    save_curves(curves, out, family=args.family)
    _write_snapshot(out, "gen-materials", {**_args_dict(args), "config": dataclasses.asdict(cfg)})
    print(f"wrote {len(curves)} curves to {out}")
    return 0


def cmd_gen_geometries(args) -> int:
    from .geometry import default_pitch, lhs_sample, rasterize_panel, save_geometry_manifest, save_heightmap

    h = args.grid
    w = args.grid_w or h
    align = _auto_align(h, w)
    params = lhs_sample(args.n, rng_seed=args.seed)
    out = Path(args.out)
    for p in params:
        save_heightmap(rasterize_panel(p, h, w, align=align), out, p)
    save_geometry_manifest(params, out, h, w, default_pitch(h))
    _write_snapshot(out, "gen-geometries", {**_args_dict(args), "align": align})
    print(f"wrote {len(params)} heightmaps at {h}x{w} to {out}")
    return 0


def cmd_gen_doe(args) -> int:
    from .doe import build_doe, save_doe_csv
    from .geometry import load_geometry_manifest
    from .materials import load_materials

    manifest = load_geometry_manifest(args.geometries)
    curves = load_materials(args.materials)
    ratios = tuple(float(x) for x in args.split_ratio.split(","))
    entries = build_doe(manifest["geometry_ids"], curves, split_ratio=ratios, rng_seed=args.seed)
    out_csv = Path(args.out)
    save_doe_csv(entries, out_csv)
    _write_snapshot(out_csv.parent, "gen-doe", _args_dict(args))
    print(f"wrote {len(entries)} DoE entries to {out_csv}")
    return 0


def cmd_gen_dataset(args) -> int:
    from .doe import load_doe_csv, materialize_dataset

    entries = load_doe_csv(args.doe)
    manifest = materialize_dataset(entries, args.out, args.geometries, args.materials)
    _write_snapshot(Path(args.out), "gen-dataset", _args_dict(args))
    print(f"materialized {manifest['n_samples']} samples, content_hash={manifest['content_hash']}")
    return 0


def _model_config(args, field: str, grid_h: int, grid_w: int):
    from .model import ModelConfig
    from .training import FIELD_CHANNELS

    if args.model_json:
        with open(args.model_json) as f:
            cfg = ModelConfig(**json.load(f))
    else:
        presets = {"desk": ModelConfig.desk, "small32": ModelConfig.small32, "toy16": ModelConfig.toy16}
        if args.model_preset not in presets:
            raise ConfigError(f"unknown model preset {args.model_preset!r}")
        cfg = presets[args.model_preset]()
    cfg = dataclasses.replace(cfg, out_channels=FIELD_CHANNELS[field])
    if (cfg.grid_h, cfg.grid_w) != (grid_h, grid_w):
        raise ConfigError(
            f"model grid {cfg.grid_h}x{cfg.grid_w} does not match geometry grid {grid_h}x{grid_w}"
        )
    return cfg


def cmd_train(args) -> int:
    import torch

    from .geometry import load_geometry_manifest
    from .model import FormingSurrogate
    from .training import TrainConfig, load_field_dataset, train

    tcfg = TrainConfig(
        field=args.field,
        lr0=args.lr,
        max_epochs=args.epochs,
        batch_size=args.batch_size,
        rng_seed=args.seed,
    )
    geo_manifest = load_geometry_manifest(args.geometries)
    mcfg = _model_config(args, args.field, geo_manifest["H"], geo_manifest["W"])
    torch.manual_seed(args.seed)
    model = FormingSurrogate(mcfg)
    train_ds = load_field_dataset(args.data, args.geometries, args.materials, args.field, "train")
    val_ds = load_field_dataset(args.data, args.geometries, args.materials, args.field, "val")
    out = Path(args.out)
    best_path, history = train(model, train_ds, val_ds, tcfg, out, resume_from=args.resume)
    _write_snapshot(
        out,
        "train",
        {**_args_dict(args), "model_config": dataclasses.asdict(mcfg), "train_config": dataclasses.asdict(tcfg)},
    )
    last = history[-1]
    print(
        f"trained {args.field}: best checkpoint {best_path}, "
        f"final train_loss={last['train_loss']:.6g} val_loss={last['val_loss']:.6g}"
    )
    return 0


def cmd_eval(args) -> int:
    from .evaluation import build_report

    report = build_report(
        args.checkpoint, args.data, args.geometries, args.materials, args.out, split=args.split
    )
    _write_snapshot(Path(args.out), "eval", _args_dict(args))
    agg = report.aggregate
    rel = agg.get("rel_err_mean")
    rel_txt = f"{rel:.3f}%" if rel is not None else "n/a"
    print(
        f"evaluated {len(report.per_sample)} samples: mean rel_err={rel_txt}, "
        f"mean mse={agg['mse_mean']:.6g}"
    )
    return 0


def cmd_predict(args) -> int:
    import numpy as np

    from .materials import load_curve_csv, load_materials, resample_curve
    from .model import load_checkpoint
    from .service import ServiceState, decode_grid, run_prediction

    model, manifest = load_checkpoint(args.checkpoint)
    field = manifest.get("meta", {}).get("field")
    if field is None:
        raise DataError(f"checkpoint {args.checkpoint} does not record its target field")

    with open(args.geometry) as f:
        geometry = json.load(f)
    from .geometry import PARAM_NAMES, GeometryParams

    missing = [k for k in PARAM_NAMES if k not in geometry]
    if missing:
        raise ConfigError(f"geometry file missing parameters: {missing}")
    params = GeometryParams(**{k: float(geometry[k]) for k in PARAM_NAMES}, geometry_id=0)

    if (args.material_id is None) == (args.curve is None):
        raise ConfigError("exactly one of --material-id (with --materials) or --curve is required")
    if args.curve is not None:
        curve = resample_curve(load_curve_csv(args.curve), material_id=-1)
    else:
        if args.materials is None:
            raise ConfigError("--material-id requires --materials DIR")
        match = [c for c in load_materials(args.materials) if c.material_id == args.material_id]
        if not match:
            raise DataError(f"unknown material_id {args.material_id}")
        curve = match[0]

    state = ServiceState(
        models={field: (model, manifest)},
        materials=[],
        grid_h=model.cfg.grid_h,
        grid_w=model.cfg.grid_w,
        pitch_mm=608.0 / model.cfg.grid_h,
    )
    payload = run_prediction(
        state, params, curve, field, {"denoise": args.denoise, "return_format": "float_grid"}
    )
    grid, mask = decode_grid(payload)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    grid.astype("<f4").tofile(out / f"{field}.f32")
    mask.astype(np.uint8).tofile(out / "mask.u8")
    with open(out / "summary.json", "w") as f:
        json.dump(
            {"field": field, "shape": payload["shape"], "summary": payload["summary"], "model_version": payload["model_version"]},
            f,
            indent=2,
        )
    _write_snapshot(out, "predict", _args_dict(args))
    print(f"predicted {field}: representative_max={payload['summary']['representative_max']:.6g}")
    return 0


def cmd_export_mesh(args) -> int:
    from .geometry import load_heightmap
    from .materials import load_materials
    from .oracle import load_field_sample
    from .postproc import denoise_displacement, reconstruct_surface, render_mesh_png, write_ply

    samples_dir = Path(args.data) / "samples"
    sample_json = samples_dir / f"sample_{args.sample_id:06d}.json"
    if not sample_json.exists():
        raise DataError(f"no stored sample {args.sample_id} under {samples_dir}")
    with open(sample_json) as f:
        meta = json.load(f)
    hm, _ = load_heightmap(args.geometries, meta["geometry_id"])
    match = [c for c in load_materials(args.materials) if c.material_id == meta["material_id"]]
    if not match:
        raise DataError(f"material {meta['material_id']} for sample {args.sample_id} not found")
    sample, _ = load_field_sample(samples_dir, args.sample_id, hm, match[0])

    disp = sample.displacement
    mask = sample.valid_mask
    if args.denoise:
        disp = denoise_displacement(disp, mask)
    mesh = reconstruct_surface(disp, sample.plastic_strain, mask, meta["pitch_mm"])
    out = Path(args.out)
    write_ply(mesh, out)
    if args.png:
        render_mesh_png(mesh, args.png, title=f"sample {args.sample_id}")
    _write_snapshot(out.parent, "export-mesh", _args_dict(args))
    print(f"wrote mesh with {len(mesh.vertices)} vertices / {len(mesh.faces)} faces to {out}")
    return 0


def resolve_serve_settings(args, env: dict) -> tuple[str, str | None, int]:
    """CLI flags with environment overrides for deployment."""
    checkpoints = env.get("STAMPBENCH_CHECKPOINTS", args.checkpoints)
    materials = env.get("STAMPBENCH_MATERIALS", args.materials)
    port = int(env.get("STAMPBENCH_PORT", args.port))
    if checkpoints is None:
        raise ConfigError("--checkpoints (or STAMPBENCH_CHECKPOINTS) is required")
    return checkpoints, materials, port


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app, load_service_state

    checkpoints, materials, port = resolve_serve_settings(args, dict(os.environ))
    state = load_service_state(checkpoints, materials)
    app = create_app(state)
    print(f"serving fields {sorted(state.models)} on port {port}")
    uvicorn.run(app, host=args.host, port=port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stampbench",
        description="Sheet-metal stamping surrogate workbench: data synthesis, training, evaluation, serving.",
    )
    parser.add_argument("--version", action="version", version=version_string())
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-materials", help="synthesize a material curve set")
    p.add_argument("--family", choices=["steel", "aluminium"], required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n-seeds", type=int, default=None)
    p.add_argument(
        "--target-per-cluster",
        type=int,
        default=None,
        help="final curves per cluster; 0 = adaptive (largest cluster); omit for the family default",
    )
    p.set_defaults(func=cmd_gen_materials)

    p = sub.add_parser("gen-geometries", help="sample and rasterize panel geometries")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--grid", type=int, default=64)
    p.add_argument("--grid-w", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_gen_geometries)

    p = sub.add_parser("gen-doe", help="pair geometries with materials into splits")
    p.add_argument("--geometries", required=True)
    p.add_argument("--materials", required=True)
    p.add_argument("--out", required=True, help="output doe.csv path")
    p.add_argument("--split-ratio", default="0.8,0.1,0.1")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_gen_doe)

    p = sub.add_parser("gen-dataset", help="run the forming oracle over a DoE table")
    p.add_argument("--doe", required=True)
    p.add_argument("--geometries", required=True)
    p.add_argument("--materials", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_dataset)

    p = sub.add_parser("train", help="train one field surrogate")
    p.add_argument("--field", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--geometries", required=True)
    p.add_argument("--materials", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--model-preset", default="desk")
    p.add_argument("--model-json", default=None)
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--batch-size", type=int, default=4)
    p.add_argument("--lr", type=float, default=1e-4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--resume", default=None)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a stored split")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--geometries", required=True)
    p.add_argument("--materials", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--split", default="test")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("predict", help="one-off prediction from a geometry JSON")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--geometry", required=True, help="JSON file with the nine panel parameters")
    p.add_argument("--materials", default=None)
    p.add_argument("--material-id", type=int, default=None)
    p.add_argument("--curve", default=None, help="strain,stress CSV file")
    p.add_argument("--denoise", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("export-mesh", help="reconstruct a stored sample's formed surface as PLY")
    p.add_argument("--data", required=True)
    p.add_argument("--geometries", required=True)
    p.add_argument("--materials", required=True)
    p.add_argument("--sample-id", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--png", default=None)
    p.add_argument("--denoise", action="store_true")
    p.set_defaults(func=cmd_export_mesh)

    p = sub.add_parser("serve", help="run the HTTP inference service")
    p.add_argument("--checkpoints", default=None)
    p.add_argument("--materials", default=None)
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--host", default="127.0.0.1")
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
