"""Shared test oracles: finite-difference gradients and brute-force attention."""
import numpy as np
import torch

PARAM_GROUPS = {
    "w_s": lambda n: n == "material_encoder.w_s.weight",
    "e_pos": lambda n: n == "material_encoder.e_pos",
    "mlp": lambda n: ".mlp." in n or n.startswith("fusion.mlp."),
    "conv": lambda n: n.startswith(("fusion.conv", "patch_embed.proj")),
    "attention": lambda n: ".attn." in n or n.startswith("material_encoder.layer.attn"),
    "merge_expand": lambda n: ".merge." in n or ".expand" in n or ".reduce" in n or n.startswith("head."),
}


def group_parameters(model):
    """Assign every trainable parameter to exactly one named group."""
    groups = {g: [] for g in PARAM_GROUPS}
    leftovers = []
    for name, p in model.named_parameters():
        for g, pred in PARAM_GROUPS.items():
            if pred(name):
                groups[g].append((name, p))
                break
        else:
            leftovers.append((name, p))
    # norms and tower projections ride along with mlp for coverage purposes
    groups["mlp"].extend(leftovers)
    return groups


def sample_param_indices(groups, n_per_group, seed=0):
    """Pick up to n_per_group (param, flat_index) pairs from each group."""
    rng = np.random.default_rng(seed)
    picks = {}
    for g, params in groups.items():
        sizes = [p.numel() for _, p in params]
        total = sum(sizes)
        take = min(n_per_group, total)
        flat = rng.choice(total, size=take, replace=False)
        out = []
        for fi in sorted(flat):
            acc = 0
            for (name, p), sz in zip(params, sizes):
                if fi < acc + sz:
                    out.append((name, p, int(fi - acc)))
                    break
                acc += sz
        picks[g] = out
    return picks


def central_difference(param, flat_idx, loss_fn, step):
    """Two-sided finite difference of loss_fn w.r.t. one scalar parameter."""
    flat = param.data.view(-1)
    orig = flat[flat_idx].item()
    with torch.no_grad():
        flat[flat_idx] = orig + step
        lp = loss_fn().item()
        flat[flat_idx] = orig - step
        lm = loss_fn().item()
        flat[flat_idx] = orig
    return (lp - lm) / (2.0 * step)


def gradient_check(model, loss_fn, n_per_group=8, step=1e-4, seed=0, floor=1e-9):
    """Compare autograd with central differences; returns per-group stats.

    The model must be in double precision; loss_fn() evaluates the loss from
    the model's current parameters. The network contains ReLUs, so a central
    difference straddling a kink is not an estimate of the derivative at all;
    candidates are screened by requiring the FD value to be stable under a
    10x smaller step (a test that uses no autograd information, so a wrong
    analytic gradient cannot pass it). Oversampling keeps n_per_group valid
    comparisons per group.

    Returns {group: (max_rel_err, n_compared)}.
    """
    model.zero_grad()
    loss_fn().backward()
    groups = group_parameters(model)
    picks = sample_param_indices(groups, 4 * n_per_group, seed=seed)
    report = {}
    for g, entries in picks.items():
        worst, used = 0.0, 0
        for name, p, fi in entries:
            if used >= n_per_group:
                break
            numeric = central_difference(p, fi, loss_fn, step)
            refined = central_difference(p, fi, loss_fn, step / 10.0)
            if abs(numeric - refined) / max(abs(numeric), abs(refined), floor) > 1e-3:
                continue  # non-smooth point for this step: FD estimate invalid
            analytic = p.grad.view(-1)[fi].item() if p.grad is not None else 0.0
            rel = abs(analytic - numeric) / max(abs(analytic), abs(numeric), floor)
            worst = max(worst, rel)
            used += 1
        report[g] = (worst, used)
    return report


def brute_force_block(block, x):
    """Re-derive a windowed-attention block's output with plain global
    attention written out longhand (numpy, per head), valid when one window
    covers the whole grid and shift is zero."""
    assert block.shift == 0
    w = block.window
    res_h, res_w = block.res
    assert (res_h, res_w) == (w, w), "oracle assumes a single window"
    xs = x.detach().double().numpy()
    heads = block.attn.heads

    def ln(z, layer):
        g = layer.weight.detach().double().numpy()
        b = layer.bias.detach().double().numpy()
        mu = z.mean(-1, keepdims=True)
        var = z.var(-1, keepdims=True)
        return (z - mu) / np.sqrt(var + layer.eps) * g + b

    out = np.empty_like(xs)
    wq = block.attn.qkv.weight.detach().double().numpy()
    bq = block.attn.qkv.bias.detach().double().numpy()
    wp = block.attn.proj.weight.detach().double().numpy()
    bp = block.attn.proj.bias.detach().double().numpy()
    bias_tab = block.attn.rel_bias.detach().double().numpy()
    idx = block.attn.rel_index.numpy()
    for bi in range(xs.shape[0]):
        z = ln(xs[bi], block.norm1)
        qkv = z @ wq.T + bq
        c = z.shape[-1]
        hd = c // heads
        attn_out = np.zeros_like(z)
        for h in range(heads):
            q = qkv[:, h * hd : (h + 1) * hd]
            k = qkv[:, c + h * hd : c + (h + 1) * hd]
            v = qkv[:, 2 * c + h * hd : 2 * c + (h + 1) * hd]
            scores = q @ k.T / np.sqrt(hd) + bias_tab[idx, h]
            scores = scores - scores.max(axis=-1, keepdims=True)
            p = np.exp(scores)
            p /= p.sum(axis=-1, keepdims=True)
            attn_out[:, h * hd : (h + 1) * hd] = p @ v
        z = attn_out @ wp.T + bp
        z = xs[bi] + z
        # mlp branch
        y = ln(z, block.norm2)
        w1 = block.mlp.fc1.weight.detach().double().numpy()
        b1 = block.mlp.fc1.bias.detach().double().numpy()
        w2 = block.mlp.fc2.weight.detach().double().numpy()
        b2 = block.mlp.fc2.bias.detach().double().numpy()
        hdn = y @ w1.T + b1
        # GELU, exact erf form
        from scipy.special import erf

        hdn = hdn * 0.5 * (1.0 + erf(hdn / np.sqrt(2.0)))
        out[bi] = z + (hdn @ w2.T + b2)
    return torch.from_numpy(out)
