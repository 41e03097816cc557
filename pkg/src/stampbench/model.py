"""Multimodal forming-field surrogate network.

Three cooperating parts:

* a material encoder turning a stress-strain curve into a pooled embedding
  plus a token sequence (one token per curve sample);
* a fusion front-end conditioning the height-map image on the material
  embedding (1x1 conv + broadcast-added MLP features, refinement convs, and
  a concat skip with the raw geometry channel);
* a windowed-attention encoder-decoder over patch tokens. Each encoder stage
  runs a pair of attention blocks (plain then shifted windows), merges 2x2
  patches, and adds a stage-width material embedding identically to every
  spatial token (a rank-1 broadcast). The decoder mirrors the encoder with
  patch expansion and channel-concat skips, ending in a linear head that
  emits 1- or 3-channel fields at input resolution.

Tensors flow as (B, L, C) token grids with explicit (H_l, W_l) bookkeeping;
input resolution is fixed per instantiated model.
"""
from __future__ import annotations

import hashlib
import json
import zipfile
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
import torch
import torch.nn as nn

from .errors import ConfigError, DataError

CHECKPOINT_FORMAT_VERSION = 1


@dataclass
class ModelConfig:
    grid_h: int = 64
    grid_w: int = 64
    t_points: int = 100
    d_mat: int = 32
    mat_heads: int = 4
    magn_channels: int = 16
    stage_channels: tuple = (32, 64, 128, 256)
    num_heads: tuple = (2, 4, 8, 16)
    window_size: int = 4
    patch_size: int = 2
    mlp_ratio: float = 4.0
    out_channels: int = 1
    shifted_windows: bool = True

    def __post_init__(self):
        self.stage_channels = tuple(int(c) for c in self.stage_channels)
        self.num_heads = tuple(int(h) for h in self.num_heads)
        if self.out_channels not in (1, 3):
            raise ConfigError(f"out_channels must be 1 or 3, got {self.out_channels}")
        if self.patch_size not in (1, 2):
            raise ConfigError(f"patch_size must be 1 or 2, got {self.patch_size}")
        if len(self.stage_channels) < 1:
            raise ConfigError("need at least one stage")
        if len(self.num_heads) != len(self.stage_channels):
            raise ConfigError("num_heads must match stage_channels in length")
        for a, b in zip(self.stage_channels, self.stage_channels[1:]):
            if b != 2 * a:
                raise ConfigError(f"stage channels must double each stage, got {self.stage_channels}")
        if self.stage_channels[0] % 2:
            raise ConfigError("stage_channels[0] must be even")
        if self.d_mat % self.mat_heads:
            raise ConfigError("d_mat must be divisible by mat_heads")
        align = self.patch_size * 2 ** (len(self.stage_channels) - 1) * self.window_size
        if self.grid_h % align or self.grid_w % align:
            raise ConfigError(
                f"grid {self.grid_h}x{self.grid_w} must be divisible by "
                f"patch_size*2^(stages-1)*window_size = {align}"
            )
        for l, (c, h) in enumerate(zip(self.stage_channels, self.num_heads)):
            if (c // 2) % h or c % h:
                raise ConfigError(f"stage {l}: channels {c} not divisible by {h} heads")
            rh, rw = self.stage_resolution(l)
            if rh < 1 or rw < 1 or rh % 2 or rw % 2:
                raise ConfigError(f"stage {l}: resolution {rh}x{rw} cannot be merged 2x2")

    @property
    def n_stages(self) -> int:
        return len(self.stage_channels)

    @property
    def embed_dim(self) -> int:
        return self.stage_channels[0] // 2

    def stage_resolution(self, l: int) -> tuple[int, int]:
        """Token grid the stage-l attention blocks run on (l = 0-based)."""
        f = self.patch_size * 2**l
        return self.grid_h // f, self.grid_w // f

    @property
    def bottleneck_resolution(self) -> tuple[int, int]:
        f = self.patch_size * 2 ** self.n_stages
        return self.grid_h // f, self.grid_w // f

    @classmethod
    def desk(cls, out_channels: int = 1) -> "ModelConfig":
        return cls(out_channels=out_channels)

    @classmethod
    def toy16(cls, out_channels: int = 1) -> "ModelConfig":
        """Smallest config for gradient checks and fast unit tests."""
        return cls(
            grid_h=16,
            grid_w=16,
            d_mat=16,
            mat_heads=2,
            magn_channels=4,
            stage_channels=(8, 16),
            num_heads=(1, 2),
            window_size=2,
            patch_size=1,
            mlp_ratio=2.0,
            out_channels=out_channels,
        )

    @classmethod
    def small32(cls, out_channels: int = 1) -> "ModelConfig":
        return cls(
            grid_h=32,
            grid_w=32,
            d_mat=16,
            mat_heads=2,
            magn_channels=8,
            stage_channels=(16, 32, 64),
            num_heads=(2, 4, 8),
            window_size=4,
            patch_size=2,
            mlp_ratio=2.0,
            out_channels=out_channels,
        )


def _trunc_normal_init(module: nn.Module):
    if isinstance(module, (nn.Linear, nn.Conv2d)):
        nn.init.trunc_normal_(module.weight, std=0.02)
        if module.bias is not None:
            nn.init.zeros_(module.bias)
    elif isinstance(module, nn.LayerNorm):
        nn.init.ones_(module.weight)
        nn.init.zeros_(module.bias)


class SelfAttention(nn.Module):
    """Plain multi-head self-attention over a full token sequence."""

    def __init__(self, dim: int, heads: int):
        super().__init__()
        if dim % heads:
            raise ConfigError(f"dim {dim} not divisible by {heads} heads")
        self.heads = heads
        self.scale = (dim // heads) ** -0.5
        self.qkv = nn.Linear(dim, 3 * dim)
        self.proj = nn.Linear(dim, dim)

    def forward(self, x):
        b, n, c = x.shape
        qkv = self.qkv(x).reshape(b, n, 3, self.heads, c // self.heads).permute(2, 0, 3, 1, 4)
        q, k, v = qkv[0], qkv[1], qkv[2]
        attn = (q @ k.transpose(-2, -1)) * self.scale
        attn = attn.softmax(dim=-1)
        out = (attn @ v).transpose(1, 2).reshape(b, n, c)
        return self.proj(out)


class Mlp(nn.Module):
    def __init__(self, dim: int, hidden: int, act: str = "gelu"):
        super().__init__()
        self.fc1 = nn.Linear(dim, hidden)
        self.act = nn.GELU() if act == "gelu" else nn.ReLU()
        self.fc2 = nn.Linear(hidden, dim)

    def forward(self, x):
        return self.fc2(self.act(self.fc1(x)))


class TransformerLayer(nn.Module):
    """Pre-norm encoder layer: x + attn(LN(x)), then x + mlp(LN(x))."""

    def __init__(self, dim: int, heads: int, mlp_ratio: float):
        super().__init__()
        self.norm1 = nn.LayerNorm(dim)
        self.attn = SelfAttention(dim, heads)
        self.norm2 = nn.LayerNorm(dim)
        self.mlp = Mlp(dim, int(dim * mlp_ratio))

    def forward(self, x):
        x = x + self.attn(self.norm1(x))
        x = x + self.mlp(self.norm2(x))
        return x


class MaterialEncoder(nn.Module):
    """Stress-strain curve -> (pooled embedding, token sequence).

    Each of the T stress samples becomes a token via a learned 1 -> d_mat
    projection plus a learned positional embedding; one transformer layer
    mixes the sequence and average pooling over tokens gives the embedding.
    """

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.t_points = cfg.t_points
        self.w_s = nn.Linear(1, cfg.d_mat, bias=False)
        self.e_pos = nn.Parameter(torch.zeros(cfg.t_points, cfg.d_mat))
        self.layer = TransformerLayer(cfg.d_mat, cfg.mat_heads, cfg.mlp_ratio)

    def forward(self, stress):
        if stress.shape[-1] != self.t_points:
            raise DataError(f"curve length {stress.shape[-1]} != {self.t_points}")
        tokens = self.w_s(stress.unsqueeze(-1)) + self.e_pos
        tokens = self.layer(tokens)
        return tokens.mean(dim=1), tokens


class MaterialGeometryFusion(nn.Module):
    """Condition the geometry image on the material embedding.

    fused = ConvLayers(Conv1x1(geo) + broadcast(MLP(e_mat))); the raw
    geometry channel is then concatenated back and refined to C channels.
    """

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        c = cfg.magn_channels
        self.conv_in = nn.Conv2d(1, c, kernel_size=1)
        self.mlp = nn.Sequential(nn.Linear(cfg.d_mat, c), nn.ReLU(), nn.Linear(c, c))
        self.conv_layers = nn.Sequential(
            nn.Conv2d(c, c, 3, padding=1), nn.ReLU(), nn.Conv2d(c, c, 3, padding=1), nn.ReLU()
        )
        self.conv_int = nn.Sequential(
            nn.Conv2d(c + 1, c, 3, padding=1), nn.ReLU(), nn.Conv2d(c, c, 3, padding=1), nn.ReLU()
        )

    def forward(self, geo, e_mat):
        fused = self.conv_layers(self.conv_in(geo) + self.mlp(e_mat)[:, :, None, None])
        return self.conv_int(torch.cat([geo, fused], dim=1))


class MaterialTowerLevel(nn.Module):
    """Project the running material tokens to the stage width and mix them."""

    def __init__(self, in_dim: int, out_dim: int, heads: int, mlp_ratio: float):
        super().__init__()
        self.proj = nn.Linear(in_dim, out_dim)
        self.layer = TransformerLayer(out_dim, heads, mlp_ratio)

    def forward(self, tokens):
        tokens = self.layer(self.proj(tokens))
        return tokens.mean(dim=1), tokens


def window_partition(x, ws: int):
    """(B, H, W, C) -> (num_windows*B, ws*ws, C)."""
    b, h, w, c = x.shape
    x = x.view(b, h // ws, ws, w // ws, ws, c)
    return x.permute(0, 1, 3, 2, 4, 5).reshape(-1, ws * ws, c)


def window_reverse(windows, ws: int, h: int, w: int):
    b = windows.shape[0] // (h * w // ws // ws)
    x = windows.view(b, h // ws, w // ws, ws, ws, -1)
    return x.permute(0, 1, 3, 2, 4, 5).reshape(b, h, w, -1)


class WindowAttention(nn.Module):
    """Multi-head self-attention within a window, with relative position bias."""

    def __init__(self, dim: int, heads: int, window: int):
        super().__init__()
        self.heads = heads
        self.window = window
        self.scale = (dim // heads) ** -0.5
        self.qkv = nn.Linear(dim, 3 * dim)
        self.proj = nn.Linear(dim, dim)
        self.rel_bias = nn.Parameter(torch.zeros((2 * window - 1) ** 2, heads))
        coords = torch.stack(
            torch.meshgrid(torch.arange(window), torch.arange(window), indexing="ij")
        ).flatten(1)
        rel = coords[:, :, None] - coords[:, None, :]
        rel = rel.permute(1, 2, 0) + (window - 1)
        index = rel[..., 0] * (2 * window - 1) + rel[..., 1]
        self.register_buffer("rel_index", index, persistent=False)
        nn.init.trunc_normal_(self.rel_bias, std=0.02)

    def forward(self, x, mask=None):
        bw, n, c = x.shape
        qkv = self.qkv(x).reshape(bw, n, 3, self.heads, c // self.heads).permute(2, 0, 3, 1, 4)
        q, k, v = qkv[0], qkv[1], qkv[2]
        attn = (q @ k.transpose(-2, -1)) * self.scale
        bias = self.rel_bias[self.rel_index.reshape(-1)].reshape(n, n, self.heads)
        attn = attn + bias.permute(2, 0, 1).unsqueeze(0)
        if mask is not None:
            nw = mask.shape[0]
            attn = attn.view(bw // nw, nw, self.heads, n, n) + mask[None, :, None]
            attn = attn.view(bw, self.heads, n, n)
        attn = attn.softmax(dim=-1)
        out = (attn @ v).transpose(1, 2).reshape(bw, n, c)
        return self.proj(out)


def _shift_mask(h: int, w: int, ws: int, shift: int) -> torch.Tensor:
    """Standard cross-window attention mask for cyclically shifted grids."""
    img = torch.zeros(1, h, w, 1)
    cnt = 0
    for hs in (slice(0, -ws), slice(-ws, -shift), slice(-shift, None)):
        for wsl in (slice(0, -ws), slice(-ws, -shift), slice(-shift, None)):
            img[:, hs, wsl, :] = cnt
            cnt += 1
    windows = window_partition(img, ws).squeeze(-1)
    diff = windows.unsqueeze(1) - windows.unsqueeze(2)
    return torch.where(diff != 0, torch.full_like(diff, -100.0), torch.zeros_like(diff))


class SwinBlock(nn.Module):
    """Windowed-attention block at a fixed token-grid resolution.

    Pre-norm double residual: z' = attn(LN(z)) + z; z'' = MLP(LN(z')) + z'.
    With shift > 0 the grid is cyclically rolled before windowing and rolled
    back after, with the standard mask keeping attention within original
    neighbourhoods. The window is clamped to the grid when the grid is small;
    shift is disabled when one window covers the whole grid.
    """

    def __init__(self, dim: int, heads: int, resolution: tuple[int, int], window: int,
                 shifted: bool, mlp_ratio: float):
        super().__init__()
        h, w = resolution
        self.res = resolution
        self.window = min(window, h, w)
        if h % self.window or w % self.window:
            raise ConfigError(f"resolution {h}x{w} not divisible by window {self.window}")
        self.shift = self.window // 2 if (shifted and (h > self.window or w > self.window)) else 0
        self.norm1 = nn.LayerNorm(dim)
        self.attn = WindowAttention(dim, heads, self.window)
        self.norm2 = nn.LayerNorm(dim)
        self.mlp = Mlp(dim, int(dim * mlp_ratio))
        if self.shift > 0:
            self.register_buffer("attn_mask", _shift_mask(h, w, self.window, self.shift), persistent=False)
        else:
            self.attn_mask = None

    def forward(self, x):
        h, w = self.res
        b, n, c = x.shape
        if n != h * w:
            raise DataError(f"token count {n} != {h}x{w}")
        shortcut = x
        z = self.norm1(x).view(b, h, w, c)
        if self.shift > 0:
            z = torch.roll(z, shifts=(-self.shift, -self.shift), dims=(1, 2))
        windows = window_partition(z, self.window)
        mask = self.attn_mask.to(x.dtype) if self.attn_mask is not None else None
        windows = self.attn(windows, mask)
        z = window_reverse(windows, self.window, h, w)
        if self.shift > 0:
            z = torch.roll(z, shifts=(self.shift, self.shift), dims=(1, 2))
        x = shortcut + z.reshape(b, n, c)
        return x + self.mlp(self.norm2(x))


class PatchEmbed(nn.Module):
    def __init__(self, in_ch: int, dim: int, patch: int):
        super().__init__()
        self.proj = nn.Conv2d(in_ch, dim, kernel_size=patch, stride=patch)
        self.norm = nn.LayerNorm(dim)

    def forward(self, x):
        x = self.proj(x)
        b, c, h, w = x.shape
        return self.norm(x.flatten(2).transpose(1, 2)), (h, w)


class PatchMerging(nn.Module):
    """2x2 neighbour concat -> LN -> linear 4C -> 2C, halving the grid."""

    def __init__(self, dim: int, resolution: tuple[int, int]):
        super().__init__()
        self.res = resolution
        self.norm = nn.LayerNorm(4 * dim)
        self.reduce = nn.Linear(4 * dim, 2 * dim, bias=False)

    def forward(self, x):
        h, w = self.res
        b, n, c = x.shape
        z = x.view(b, h, w, c)
        z = torch.cat([z[:, 0::2, 0::2], z[:, 1::2, 0::2], z[:, 0::2, 1::2], z[:, 1::2, 1::2]], dim=-1)
        z = z.view(b, (h // 2) * (w // 2), 4 * c)
        return self.reduce(self.norm(z))


class PatchExpanding(nn.Module):
    """Linear C -> 2C then pixel rearrangement to (2H, 2W, C/2), then LN."""

    def __init__(self, dim: int, resolution: tuple[int, int]):
        super().__init__()
        self.res = resolution
        self.expand = nn.Linear(dim, 2 * dim, bias=False)
        self.norm = nn.LayerNorm(dim // 2)

    def forward(self, x):
        h, w = self.res
        b, n, c = x.shape
        z = self.expand(x).view(b, h, w, 2, 2, c // 2)
        z = z.permute(0, 1, 3, 2, 4, 5).reshape(b, 4 * n, c // 2)
        return self.norm(z)


class EncoderStage(nn.Module):
    """Two attention blocks, 2x2 patch merge, then material injection.

    The injection adds the stage-width material embedding to every spatial
    token identically: X = F + 1 e^T.
    """

    def __init__(self, cfg: ModelConfig, l: int):
        super().__init__()
        dim = cfg.stage_channels[l] // 2
        res = cfg.stage_resolution(l)
        heads = cfg.num_heads[l]
        self.blocks = nn.ModuleList(
            [
                SwinBlock(dim, heads, res, cfg.window_size, False, cfg.mlp_ratio),
                SwinBlock(dim, heads, res, cfg.window_size, cfg.shifted_windows, cfg.mlp_ratio),
            ]
        )
        self.merge = PatchMerging(dim, res)

    def forward(self, x, e_mat_l):
        for blk in self.blocks:
            x = blk(x)
        f = self.merge(x)
        return f + e_mat_l.unsqueeze(1)


class DecoderStage(nn.Module):
    """Patch-expand 2x, concat the encoder skip, reduce, two attention blocks."""

    def __init__(self, cfg: ModelConfig, l: int):
        super().__init__()
        # l indexes the encoder stage whose block resolution this step restores
        dim_in = cfg.stage_channels[l]
        dim_out = dim_in // 2
        res_in = tuple(r // 2 for r in cfg.stage_resolution(l))
        res_out = cfg.stage_resolution(l)
        heads = cfg.num_heads[l]
        self.expand = PatchExpanding(dim_in, res_in)
        self.reduce = nn.Linear(2 * dim_out, dim_out)
        self.blocks = nn.ModuleList(
            [
                SwinBlock(dim_out, heads, res_out, cfg.window_size, False, cfg.mlp_ratio),
                SwinBlock(dim_out, heads, res_out, cfg.window_size, cfg.shifted_windows, cfg.mlp_ratio),
            ]
        )

    def forward(self, x, skip):
        x = self.expand(x)
        x = self.reduce(torch.cat([x, skip], dim=-1))
        for blk in self.blocks:
            x = blk(x)
        return x


class FormingSurrogate(nn.Module):
    """Full surrogate: curve + height map in, field grid out."""

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.cfg = cfg
        self.material_encoder = MaterialEncoder(cfg)
        self.fusion = MaterialGeometryFusion(cfg)
        self.patch_embed = PatchEmbed(cfg.magn_channels, cfg.embed_dim, cfg.patch_size)
        self.stages = nn.ModuleList([EncoderStage(cfg, l) for l in range(cfg.n_stages)])
        widths = [cfg.d_mat] + list(cfg.stage_channels[:-1])
        self.tower = nn.ModuleList(
            [
                MaterialTowerLevel(widths[l], cfg.stage_channels[l], cfg.num_heads[l], cfg.mlp_ratio)
                for l in range(cfg.n_stages)
            ]
        )
        bres = cfg.bottleneck_resolution
        bdim = cfg.stage_channels[-1]
        bheads = cfg.num_heads[-1]
        self.bottleneck = nn.ModuleList(
            [
                SwinBlock(bdim, bheads, bres, cfg.window_size, False, cfg.mlp_ratio),
                SwinBlock(bdim, bheads, bres, cfg.window_size, cfg.shifted_windows, cfg.mlp_ratio),
            ]
        )
        self.decoder = nn.ModuleList([DecoderStage(cfg, l) for l in reversed(range(cfg.n_stages))])
        if cfg.patch_size == 2:
            hp, wp = cfg.grid_h // 2, cfg.grid_w // 2
            self.final_expand = PatchExpanding(cfg.embed_dim, (hp, wp))
            head_dim = cfg.embed_dim // 2
        else:
            self.final_expand = None
            head_dim = cfg.embed_dim
        self.head = nn.Linear(head_dim, cfg.out_channels)
        self.apply(_trunc_normal_init)
        nn.init.zeros_(self.material_encoder.e_pos)

    def forward(self, geo, stress, ablate_material: bool = False):
        """geo: (B, 1, H, W) heights in mm; stress: (B, T) stresses in MPa."""
        cfg = self.cfg
        if geo.shape[-2:] != (cfg.grid_h, cfg.grid_w):
            raise DataError(f"geometry grid {tuple(geo.shape[-2:])} != {(cfg.grid_h, cfg.grid_w)}")
        e_mat, tokens = self.material_encoder(stress)
        if ablate_material:
            e_mat = torch.zeros_like(e_mat)
        x0 = self.fusion(geo, e_mat)
        x, _ = self.patch_embed(x0)
        skips = [x]
        for level, stage in zip(self.tower, self.stages):
            e_l, tokens = level(tokens)
            if ablate_material:
                e_l = torch.zeros_like(e_l)
            x = stage(x, e_l)
            skips.append(x)
        for blk in self.bottleneck:
            x = blk(x)
        for i, dec in enumerate(self.decoder):
            x = dec(x, skips[-(i + 2)])
        if self.final_expand is not None:
            x = self.final_expand(x)
        out = self.head(x)
        b = out.shape[0]
        return out.view(b, cfg.grid_h, cfg.grid_w, cfg.out_channels).permute(0, 3, 1, 2)


# ---------------------------------------------------------------------------
# Checkpoint container: a zip holding config JSON, an ordered parameter
# manifest, raw little-endian float32 parameter bytes, and a content hash.
# ---------------------------------------------------------------------------

def _param_blob(model: nn.Module) -> tuple[bytes, list]:
    names, chunks = [], []
    for name, p in model.state_dict().items():
        arr = p.detach().cpu().numpy().astype("<f4")
        names.append({"name": name, "shape": list(arr.shape)})
        chunks.append(arr.tobytes())
    return b"".join(chunks), names


def save_checkpoint(path: str | Path, model: FormingSurrogate, meta: dict | None = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    blob, names = _param_blob(model)
    config_bytes = json.dumps(asdict(model.cfg), sort_keys=True).encode()
    digest = hashlib.sha256(config_bytes + blob).hexdigest()
    manifest = {
        "format_version": CHECKPOINT_FORMAT_VERSION,
        "content_hash": digest,
        "params": names,
        "meta": meta or {},
    }
    with zipfile.ZipFile(path, "w", compression=zipfile.ZIP_DEFLATED) as z:
        z.writestr("config.json", config_bytes)
        z.writestr("manifest.json", json.dumps(manifest, indent=2))
        z.writestr("params.bin", blob)
    return path


def load_checkpoint(path: str | Path) -> tuple[FormingSurrogate, dict]:
    path = Path(path)
    if not path.exists():
        raise DataError(f"checkpoint not found: {path}")
    with zipfile.ZipFile(path) as z:
        config_bytes = z.read("config.json")
        manifest = json.loads(z.read("manifest.json"))
        blob = z.read("params.bin")
    if manifest.get("format_version") != CHECKPOINT_FORMAT_VERSION:
        raise DataError(f"unsupported checkpoint format {manifest.get('format_version')}")
    digest = hashlib.sha256(config_bytes + blob).hexdigest()
    if digest != manifest["content_hash"]:
        raise DataError(f"checkpoint {path} is corrupt: content hash mismatch")
    cfg = ModelConfig(**json.loads(config_bytes))
    model = FormingSurrogate(cfg)
    state, offset = {}, 0
    for entry in manifest["params"]:
        count = int(np.prod(entry["shape"])) if entry["shape"] else 1
        arr = np.frombuffer(blob, dtype="<f4", count=count, offset=offset).reshape(entry["shape"])
        offset += count * 4
        state[entry["name"]] = torch.from_numpy(arr.astype(np.float32))
    model.load_state_dict(state)
    model.eval()
    return model, manifest


def checkpoint_hash(path: str | Path) -> str:
    with zipfile.ZipFile(Path(path)) as z:
        return json.loads(z.read("manifest.json"))["content_hash"]


def curve_to_tensor(curve, dtype=torch.float32) -> torch.Tensor:
    """Stress sequence of a resampled curve as a (T,) tensor (MPa)."""
    return torch.as_tensor(np.asarray(curve.stresses), dtype=dtype)


def heightmap_to_tensor(hm, dtype=torch.float32) -> torch.Tensor:
    """Height map as a (1, H, W) tensor (mm, zero outside the valid mask)."""
    return torch.as_tensor(hm.heights, dtype=dtype).unsqueeze(0)
