import numpy as np
import pytest
import torch

from helpers import brute_force_block, gradient_check
from stampbench.errors import ConfigError, DataError
from stampbench.model import (
    EncoderStage,
    FormingSurrogate,
    MaterialEncoder,
    MaterialGeometryFusion,
    MaterialTowerLevel,
    ModelConfig,
    SwinBlock,
    load_checkpoint,
    save_checkpoint,
)


def zero_(p):
    with torch.no_grad():
        p.zero_()


@pytest.fixture(autouse=True)
def _seed():
    torch.manual_seed(0)


def rand_inputs(cfg, batch=2, dtype=torch.float32):
    geo = torch.randn(batch, 1, cfg.grid_h, cfg.grid_w, dtype=dtype) * 10.0
    stress = torch.rand(batch, cfg.t_points, dtype=dtype) * 800.0 + 200.0
    return geo, stress


# ---------------------------------------------------------------- config


def test_config_validation():
    with pytest.raises(ConfigError, match="out_channels"):
        ModelConfig(out_channels=2)
    with pytest.raises(ConfigError, match="double"):
        ModelConfig(stage_channels=(32, 48, 96, 192))
    with pytest.raises(ConfigError, match="divisible"):
        ModelConfig(grid_h=60)
    with pytest.raises(ConfigError, match="num_heads"):
        ModelConfig(num_heads=(2, 4))
    with pytest.raises(ConfigError, match="heads"):
        ModelConfig.toy16(out_channels=1).__class__(
            **{**ModelConfig.toy16().__dict__, "num_heads": (3, 2)}
        )


def test_shape_schedule_three_configs():
    # stage-by-stage (H_l, W_l, C_l) must follow the config-derived schedule
    for cfg in [ModelConfig.toy16(), ModelConfig.small32(), ModelConfig.desk()]:
        model = FormingSurrogate(cfg)
        geo, stress = rand_inputs(cfg, batch=1)
        e_mat, tokens = model.material_encoder(stress)
        assert e_mat.shape == (1, cfg.d_mat)
        assert tokens.shape == (1, cfg.t_points, cfg.d_mat)
        x0 = model.fusion(geo, e_mat)
        assert x0.shape == (1, cfg.magn_channels, cfg.grid_h, cfg.grid_w)
        x, (h, w) = model.patch_embed(x0)
        assert (h, w) == cfg.stage_resolution(0)
        assert x.shape == (1, h * w, cfg.embed_dim)
        for l, (level, stage) in enumerate(zip(model.tower, model.stages)):
            e_l, tokens = level(tokens)
            assert e_l.shape == (1, cfg.stage_channels[l])
            x = stage(x, e_l)
            rh, rw = cfg.stage_resolution(l)
            assert x.shape == (1, (rh // 2) * (rw // 2), cfg.stage_channels[l])
        out = model(geo, stress)
        assert out.shape == (1, cfg.out_channels, cfg.grid_h, cfg.grid_w)


# ---------------------------------------------------------------- material


def test_material_encoder_constant_curve_pooling():
    cfg = ModelConfig.toy16()
    enc = MaterialEncoder(cfg)
    with torch.no_grad():
        enc.w_s.weight.fill_(1.0)
        enc.e_pos.zero_()
        zero_(enc.layer.attn.proj.weight)
        zero_(enc.layer.attn.proj.bias)
        zero_(enc.layer.mlp.fc2.weight)
        zero_(enc.layer.mlp.fc2.bias)
    c = 123.0
    e_mat, _ = enc(torch.full((1, cfg.t_points), c))
    np.testing.assert_allclose(e_mat.detach().numpy(), c, rtol=1e-6)


def test_material_encoder_position_sensitivity():
    # with positions the pooled embedding must move under permutation; the
    # control (zero positions) is permutation-invariant because attention is
    # permutation-equivariant and pooling averages tokens
    cfg = ModelConfig.toy16()
    enc = MaterialEncoder(cfg).double()
    with torch.no_grad():
        enc.w_s.weight.normal_(std=0.003)
        enc.e_pos.normal_(std=1.0)
    stress = (torch.rand(1, cfg.t_points) * 500 + 100).double()
    perm = torch.randperm(cfg.t_points)
    e1, _ = enc(stress)
    e2, _ = enc(stress[:, perm])
    assert (e1 - e2).abs().max().item() > 1e-6
    with torch.no_grad():
        enc.e_pos.zero_()
    c1, _ = enc(stress)
    c2, _ = enc(stress[:, perm])
    assert (c1 - c2).abs().max().item() < 1e-10


def test_material_encoder_curve_length_error():
    enc = MaterialEncoder(ModelConfig.toy16())
    with pytest.raises(DataError):
        enc(torch.rand(1, 50))


# ---------------------------------------------------------------- fusion


def test_fusion_zeroed_mlp_ignores_material():
    cfg = ModelConfig.toy16()
    fus = MaterialGeometryFusion(cfg)
    for layer in fus.mlp:
        if isinstance(layer, torch.nn.Linear):
            zero_(layer.weight)
            zero_(layer.bias)
    geo = torch.randn(1, 1, cfg.grid_h, cfg.grid_w)
    a = fus(geo, torch.randn(1, cfg.d_mat))
    b = fus(geo, torch.randn(1, cfg.d_mat) * 50)
    torch.testing.assert_close(a, b, rtol=0, atol=0)


def test_fusion_material_changes_output():
    cfg = ModelConfig.toy16()
    fus = MaterialGeometryFusion(cfg)
    geo = torch.randn(1, 1, cfg.grid_h, cfg.grid_w)
    a = fus(geo, torch.randn(1, cfg.d_mat))
    b = fus(geo, torch.randn(1, cfg.d_mat) + 3.0)
    assert not torch.allclose(a, b)
    assert a.shape[-2:] == geo.shape[-2:]


# ---------------------------------------------------------------- blocks


def test_swin_block_residual_identity():
    blk = SwinBlock(dim=8, heads=2, resolution=(8, 8), window=4, shifted=False, mlp_ratio=2.0)
    zero_(blk.attn.proj.weight)
    zero_(blk.attn.proj.bias)
    zero_(blk.mlp.fc2.weight)
    zero_(blk.mlp.fc2.bias)
    x = torch.randn(2, 64, 8)
    torch.testing.assert_close(blk(x), x, rtol=0, atol=0)


def test_swin_block_shifted_residual_identity():
    blk = SwinBlock(dim=8, heads=2, resolution=(8, 8), window=4, shifted=True, mlp_ratio=2.0)
    assert blk.shift == 2
    zero_(blk.attn.proj.weight)
    zero_(blk.attn.proj.bias)
    zero_(blk.mlp.fc2.weight)
    zero_(blk.mlp.fc2.bias)
    x = torch.randn(2, 64, 8)
    torch.testing.assert_close(blk(x), x, rtol=0, atol=0)


def test_window_equals_global_attention_oracle():
    # one window covering a 4x4 grid must equal longhand global attention
    blk = SwinBlock(dim=8, heads=2, resolution=(4, 4), window=4, shifted=False, mlp_ratio=2.0).double()
    x = torch.randn(2, 16, 8, dtype=torch.float64)
    got = blk(x).detach()
    want = brute_force_block(blk, x)
    torch.testing.assert_close(got, want, rtol=0, atol=1e-5)


def test_cyclic_shift_is_permutation():
    x = torch.randn(1, 8, 8, 4)
    rolled = torch.roll(x, shifts=(-2, -2), dims=(1, 2))
    assert torch.equal(torch.roll(rolled, shifts=(2, 2), dims=(1, 2)), x)
    assert torch.equal(
        rolled.reshape(-1, 4).sort(dim=0).values, x.reshape(-1, 4).sort(dim=0).values
    )


def test_window_clamps_to_small_grid():
    blk = SwinBlock(dim=8, heads=2, resolution=(2, 2), window=4, shifted=True, mlp_ratio=2.0)
    assert blk.window == 2
    assert blk.shift == 0  # single window covers the grid, no shift needed
    out = blk(torch.randn(1, 4, 8))
    assert out.shape == (1, 4, 8)


# ---------------------------------------------------------------- injection


def test_injection_rank_one_exact():
    cfg = ModelConfig.toy16()
    stage = EncoderStage(cfg, 0)
    x = torch.randn(2, 16 * 16, cfg.embed_dim)
    captured = {}
    stage.merge.register_forward_hook(lambda m, i, o: captured.update(f=o.detach().clone()))
    e = torch.randn(2, cfg.stage_channels[0])
    out_e = stage(x, e)
    out_0 = stage(x, torch.zeros_like(e))
    # Eq-style structure: the injected output IS merge-output + broadcast e,
    # and zero injection returns the merge output untouched
    torch.testing.assert_close(out_0, captured["f"], rtol=0, atol=0)
    torch.testing.assert_close(out_e, captured["f"] + e.unsqueeze(1), rtol=0, atol=0)
    # every spatial token receives the same vector
    diff = out_e - out_0
    torch.testing.assert_close(diff, e.unsqueeze(1).expand_as(diff), atol=1e-6, rtol=0)


def test_stage_downsamples_by_four():
    cfg = ModelConfig.small32()
    stage = EncoderStage(cfg, 0)
    x = torch.randn(1, 16 * 16, cfg.embed_dim)
    out = stage(x, torch.zeros(1, cfg.stage_channels[0]))
    assert out.shape[1] == x.shape[1] // 4


# ---------------------------------------------------------------- tower


def test_tower_level_shapes_and_tiling():
    cfg = ModelConfig.small32()
    widths = [cfg.d_mat] + list(cfg.stage_channels[:-1])
    tokens = torch.randn(1, cfg.t_points, cfg.d_mat)
    for l in range(cfg.n_stages):
        level = MaterialTowerLevel(widths[l], cfg.stage_channels[l], cfg.num_heads[l], 2.0)
        e_l, tokens_out = level(tokens if l == 0 else tokens_out)
        assert e_l.shape == (1, cfg.stage_channels[l])
        assert tokens_out.shape == (1, cfg.t_points, cfg.stage_channels[l])
    # residuals zeroed + uniform-averaging projection -> grand mean tiled
    level = MaterialTowerLevel(cfg.d_mat, cfg.stage_channels[0], cfg.num_heads[0], 2.0)
    with torch.no_grad():
        level.proj.weight.fill_(1.0 / cfg.d_mat)
        level.proj.bias.zero_()
        zero_(level.layer.attn.proj.weight)
        zero_(level.layer.attn.proj.bias)
        zero_(level.layer.mlp.fc2.weight)
        zero_(level.layer.mlp.fc2.bias)
    t = torch.randn(1, cfg.t_points, cfg.d_mat)
    e_l, _ = level(t)
    expect = t.mean().expand_as(e_l)
    torch.testing.assert_close(e_l, expect, rtol=0, atol=1e-6)


def test_tower_differs_between_curves():
    cfg = ModelConfig.toy16()
    model = FormingSurrogate(cfg)
    s1 = torch.rand(1, cfg.t_points) * 300 + 100
    s2 = torch.rand(1, cfg.t_points) * 900 + 300
    _, t1 = model.material_encoder(s1)
    _, t2 = model.material_encoder(s2)
    for level in model.tower:
        e1, t1 = level(t1)
        e2, t2 = level(t2)
        assert not torch.allclose(e1, e2)


# ---------------------------------------------------------------- forward


def test_forward_finite_and_batch_consistent():
    cfg = ModelConfig.toy16()
    model = FormingSurrogate(cfg).eval()
    geo, stress = rand_inputs(cfg, batch=1)
    batch_geo = geo.repeat(3, 1, 1, 1)
    batch_stress = stress.repeat(3, 1)
    with torch.no_grad():
        out = model(batch_geo, batch_stress)
    assert torch.isfinite(out).all()
    torch.testing.assert_close(out[1], out[0], rtol=0, atol=0)
    torch.testing.assert_close(out[2], out[0], rtol=0, atol=0)


def test_forward_material_ablation_differs():
    cfg = ModelConfig.toy16()
    model = FormingSurrogate(cfg).eval()
    geo, stress = rand_inputs(cfg, batch=1)
    with torch.no_grad():
        assert not torch.allclose(model(geo, stress), model(geo, stress, ablate_material=True))


def test_forward_zero_head_zero_field():
    cfg = ModelConfig.toy16(out_channels=3)
    model = FormingSurrogate(cfg).eval()
    zero_(model.head.weight)
    zero_(model.head.bias)
    geo, stress = rand_inputs(cfg, batch=1)
    with torch.no_grad():
        out = model(geo, stress)
    assert out.shape == (1, 3, 16, 16)
    assert torch.equal(out, torch.zeros_like(out))


def test_forward_wrong_grid_errors():
    model = FormingSurrogate(ModelConfig.toy16())
    with pytest.raises(DataError):
        model(torch.randn(1, 1, 8, 8), torch.rand(1, 100) * 500)


# ---------------------------------------------------------------- gradients


def test_gradient_check_toy():
    cfg = ModelConfig.toy16()
    model = FormingSurrogate(cfg).double()
    geo, stress = rand_inputs(cfg, batch=1, dtype=torch.float64)
    target = torch.randn(1, 1, 16, 16, dtype=torch.float64) * 0.1

    def loss_fn():
        # constant scaling lifts gradients well clear of the rel-err floor
        return 1e4 * ((model(geo, stress) - target) ** 2).mean()

    report = gradient_check(model, loss_fn, n_per_group=6, step=1e-4, seed=1)
    for group, (rel, used) in report.items():
        assert used == 6, f"group {group}: only {used} smooth samples"
        assert rel < 1e-3, f"group {group}: rel err {rel}"


# ---------------------------------------------------------------- checkpoint


def test_checkpoint_roundtrip(tmp_path):
    cfg = ModelConfig.toy16()
    model = FormingSurrogate(cfg).eval()
    p = save_checkpoint(tmp_path / "m.ckpt", model, meta={"field": "thinning"})
    loaded, manifest = load_checkpoint(p)
    assert manifest["meta"]["field"] == "thinning"
    assert len(manifest["content_hash"]) == 64
    geo, stress = rand_inputs(cfg, batch=1)
    with torch.no_grad():
        torch.testing.assert_close(loaded(geo, stress), model(geo, stress), rtol=0, atol=0)


def test_checkpoint_corruption_detected(tmp_path):
    import zipfile

    cfg = ModelConfig.toy16()
    p = save_checkpoint(tmp_path / "m.ckpt", FormingSurrogate(cfg))
    with zipfile.ZipFile(p) as z:
        names = {n: z.read(n) for n in z.namelist()}
    blob = bytearray(names["params.bin"])
    blob[100] ^= 0xFF
    names["params.bin"] = bytes(blob)
    with zipfile.ZipFile(p, "w") as z:
        for n, data in names.items():
            z.writestr(n, data)
    with pytest.raises(DataError, match="hash"):
        load_checkpoint(p)


def test_checkpoint_missing(tmp_path):
    with pytest.raises(DataError):
        load_checkpoint(tmp_path / "absent.ckpt")
