"""Four-stage shifted-window video transformer, forward pass only.

Pipeline: patch embedding -> stage 0..3, each a run of transformer blocks
alternating regular and shifted windows (starting regular), with spatial
patch merging between stages -> final layer norm -> mean pool over all
tokens.  Stage s runs at width ``embed_dim * 2**s``; the pooled feature
vector has length ``8 * embed_dim``.  Inference only: stochastic depth and
dropout are identity here.

Parameter path convention (normative for checkpoint producers; weights are
row-major with inputs on the left, i.e. ``y = x @ W + b``):

    patch_embed.proj.weight              [96, C]
    patch_embed.proj.bias                [C]
    patch_embed.norm.{gamma,beta}        [C]
    stages.{s}.blocks.{b}.norm1.{gamma,beta}      [D]
    stages.{s}.blocks.{b}.attn.{q,k,v,out}.weight [D, D]
    stages.{s}.blocks.{b}.attn.{q,k,v,out}.bias   [D]
    stages.{s}.blocks.{b}.attn.bias_table         [(2P-1)(2M-1)^2, heads_s]
    stages.{s}.blocks.{b}.norm2.{gamma,beta}      [D]
    stages.{s}.blocks.{b}.mlp.fc1.weight          [D, ratio*D]
    stages.{s}.blocks.{b}.mlp.fc1.bias            [ratio*D]
    stages.{s}.blocks.{b}.mlp.fc2.weight          [ratio*D, D]
    stages.{s}.blocks.{b}.mlp.fc2.bias            [D]
    stages.{s}.merge.norm.{gamma,beta}   [4D]      (s = 0, 1, 2 only)
    stages.{s}.merge.reduction.weight    [4D, 2D]
    norm.{gamma,beta}                    [8C]
    head.weight                          [8C, K]
    head.bias                            [K]

where D = C * 2**s.  Grids whose extents do not divide the window are
zero-padded on the high side for attention (padded tokens masked out,
cropped after); odd spatial extents are likewise padded to even before a
merge, so small grids stay mergeable.
"""

from dataclasses import dataclass

import numpy as np

from .patches import PATCH_DIM, embed_patches, merge_patches, validate_clip
from .tensor import gelu, layer_norm, matmul
from .weights_io import NamedWeights
from .windows import (
    AttentionWeights,
    RelativeBiasTable,
    WindowSpec,
    build_shift_mask,
    crop_grid,
    cyclic_shift,
    pad_to_windows,
    partition_windows,
    reverse_windows,
    shift_offsets,
    window_attention,
)

__all__ = [
    "ModelConfig",
    "VARIANTS",
    "variant_config",
    "parameter_paths",
    "init_weights",
    "count_parameters",
    "forward_features",
    "classify",
]

NUM_STAGES = 4


@dataclass(frozen=True)
class ModelConfig:
    """Architecture description: base width, per-stage depths/heads, window."""

    embed_dim: int
    depths: tuple[int, int, int, int]
    heads: tuple[int, int, int, int]
    window: WindowSpec = WindowSpec(8, 7)
    mlp_ratio: float = 4.0
    num_classes: int = 400
    drop_path: float = 0.0  # identity at inference; kept for completeness

    def __post_init__(self) -> None:
        if len(self.depths) != NUM_STAGES or len(self.heads) != NUM_STAGES:
            raise ValueError("depths and heads must list exactly 4 stages")
        if any(d < 1 for d in self.depths):
            raise ValueError(f"stage depths must be >= 1, got {self.depths}")
        for s in range(NUM_STAGES):
            if self.stage_width(s) % self.heads[s]:
                raise ValueError(
                    f"stage {s} width {self.stage_width(s)} not divisible by "
                    f"{self.heads[s]} heads"
                )
        if self.num_classes < 1:
            raise ValueError("num_classes must be >= 1")

    def stage_width(self, stage: int) -> int:
        return self.embed_dim * (1 << stage)

    @property
    def feature_dim(self) -> int:
        return 8 * self.embed_dim

    def mlp_hidden(self, stage: int) -> int:
        return int(round(self.stage_width(stage) * self.mlp_ratio))

    @property
    def bias_table_rows(self) -> int:
        p, m = self.window.p, self.window.m
        return (2 * p - 1) * (2 * m - 1) * (2 * m - 1)


VARIANTS: dict[str, ModelConfig] = {
    "swin-t": ModelConfig(embed_dim=96, depths=(2, 2, 6, 2), heads=(3, 6, 12, 24)),
    "swin-s": ModelConfig(embed_dim=96, depths=(2, 2, 18, 2), heads=(3, 6, 12, 24)),
    "swin-b": ModelConfig(embed_dim=128, depths=(2, 2, 18, 2), heads=(4, 8, 16, 32)),
    "swin-l": ModelConfig(embed_dim=192, depths=(2, 2, 18, 2), heads=(6, 12, 24, 48)),
}


def variant_config(name: str, num_classes: int | None = None) -> ModelConfig:
    try:
        cfg = VARIANTS[name.lower()]
    except KeyError:
        raise ValueError(
            f"unknown variant {name!r}; expected one of {sorted(VARIANTS)}"
        ) from None
    if num_classes is not None and num_classes != cfg.num_classes:
        cfg = ModelConfig(
            embed_dim=cfg.embed_dim,
            depths=cfg.depths,
            heads=cfg.heads,
            window=cfg.window,
            mlp_ratio=cfg.mlp_ratio,
            num_classes=num_classes,
        )
    return cfg


def parameter_paths(
    cfg: ModelConfig, include_head: bool = True
) -> list[tuple[str, tuple[int, ...]]]:
    """Every (path, shape) pair implied by the config, in canonical order."""
    c = cfg.embed_dim
    out: list[tuple[str, tuple[int, ...]]] = [
        ("patch_embed.proj.weight", (PATCH_DIM, c)),
        ("patch_embed.proj.bias", (c,)),
        ("patch_embed.norm.gamma", (c,)),
        ("patch_embed.norm.beta", (c,)),
    ]
    rows = cfg.bias_table_rows
    for s in range(NUM_STAGES):
        d = cfg.stage_width(s)
        hidden = cfg.mlp_hidden(s)
        for b in range(cfg.depths[s]):
            pre = f"stages.{s}.blocks.{b}"
            out += [
                (f"{pre}.norm1.gamma", (d,)),
                (f"{pre}.norm1.beta", (d,)),
            ]
            for proj in ("q", "k", "v", "out"):
                out += [
                    (f"{pre}.attn.{proj}.weight", (d, d)),
                    (f"{pre}.attn.{proj}.bias", (d,)),
                ]
            out += [
                (f"{pre}.attn.bias_table", (rows, cfg.heads[s])),
                (f"{pre}.norm2.gamma", (d,)),
                (f"{pre}.norm2.beta", (d,)),
                (f"{pre}.mlp.fc1.weight", (d, hidden)),
                (f"{pre}.mlp.fc1.bias", (hidden,)),
                (f"{pre}.mlp.fc2.weight", (hidden, d)),
                (f"{pre}.mlp.fc2.bias", (d,)),
            ]
        if s < NUM_STAGES - 1:
            out += [
                (f"stages.{s}.merge.norm.gamma", (4 * d,)),
                (f"stages.{s}.merge.norm.beta", (4 * d,)),
                (f"stages.{s}.merge.reduction.weight", (4 * d, 2 * d)),
            ]
    out += [
        ("norm.gamma", (cfg.feature_dim,)),
        ("norm.beta", (cfg.feature_dim,)),
    ]
    if include_head:
        out += [
            ("head.weight", (cfg.feature_dim, cfg.num_classes)),
            ("head.bias", (cfg.num_classes,)),
        ]
    return out


def init_weights(
    cfg: ModelConfig, seed: int, include_head: bool = True
) -> NamedWeights:
    """Random weights for the full path set: N(0, 0.02) matrices and bias
    tables, ones for norm gains, zeros for biases and norm shifts."""
    rng = np.random.default_rng(seed)
    weights = NamedWeights()
    for path, shape in parameter_paths(cfg, include_head=include_head):
        leaf = path.rsplit(".", 1)[-1]
        if leaf in ("bias", "beta"):
            value = np.zeros(shape, dtype=np.float32)
        elif leaf == "gamma":
            value = np.ones(shape, dtype=np.float32)
        else:
            value = rng.normal(0.0, 0.02, size=shape).astype(np.float32)
        weights.add(path, value)
    return weights


def count_parameters(cfg: ModelConfig, include_head: bool = True) -> int:
    """Exact scalar parameter count implied by the config, with no allocation."""
    c = cfg.embed_dim
    total = PATCH_DIM * c + c + 2 * c
    rows = cfg.bias_table_rows
    for s in range(NUM_STAGES):
        d = cfg.stage_width(s)
        hidden = cfg.mlp_hidden(s)
        per_block = (
            2 * d  # norm1
            + 4 * (d * d + d)  # q, k, v, out projections
            + rows * cfg.heads[s]  # bias table
            + 2 * d  # norm2
            + d * hidden + hidden  # fc1
            + hidden * d + d  # fc2
        )
        total += cfg.depths[s] * per_block
        if s < NUM_STAGES - 1:
            total += 8 * d + (4 * d) * (2 * d)  # merge norm + reduction
    total += 2 * cfg.feature_dim
    if include_head:
        total += cfg.feature_dim * cfg.num_classes + cfg.num_classes
    return total


def _param(weights: NamedWeights, path: str, shape: tuple[int, ...]) -> np.ndarray:
    value = weights[path]
    if value.shape != shape:
        raise ValueError(
            f"parameter {path!r}: expected shape {shape}, checkpoint has "
            f"{value.shape}"
        )
    return value


def _block_forward(
    grid: np.ndarray,
    weights: NamedWeights,
    prefix: str,
    cfg: ModelConfig,
    stage: int,
    shifted: bool,
) -> np.ndarray:
    d = cfg.stage_width(stage)
    heads = cfg.heads[stage]
    spec = cfg.window
    hidden = cfg.mlp_hidden(stage)

    attn = AttentionWeights(
        wq=_param(weights, f"{prefix}.attn.q.weight", (d, d)),
        bq=_param(weights, f"{prefix}.attn.q.bias", (d,)),
        wk=_param(weights, f"{prefix}.attn.k.weight", (d, d)),
        bk=_param(weights, f"{prefix}.attn.k.bias", (d,)),
        wv=_param(weights, f"{prefix}.attn.v.weight", (d, d)),
        bv=_param(weights, f"{prefix}.attn.v.bias", (d,)),
        wo=_param(weights, f"{prefix}.attn.out.weight", (d, d)),
        bo=_param(weights, f"{prefix}.attn.out.bias", (d,)),
    )
    bias = RelativeBiasTable.for_window(
        _param(weights, f"{prefix}.attn.bias_table", (cfg.bias_table_rows, heads)),
        spec,
    )

    normed = layer_norm(
        grid,
        _param(weights, f"{prefix}.norm1.gamma", (d,)),
        _param(weights, f"{prefix}.norm1.beta", (d,)),
    )
    offsets = shift_offsets(spec) if shifted else (0, 0, 0)
    padded, orig = pad_to_windows(normed, spec)
    padded_extents = padded.shape[:3]
    if any(offsets) or padded_extents != orig:
        masks = build_shift_mask(padded_extents, spec, offsets, valid_extents=orig)
    else:
        masks = None
    if any(offsets):
        padded = cyclic_shift(padded, offsets)
    blocks = partition_windows(padded, spec)
    attended = np.empty_like(blocks)
    for i in range(len(blocks)):
        attended[i] = window_attention(
            blocks[i], attn, bias, None if masks is None else masks[i], heads
        )
    merged = reverse_windows(attended, spec, padded_extents)
    if any(offsets):
        merged = cyclic_shift(merged, tuple(-o for o in offsets))
    grid = grid + crop_grid(merged, orig)

    normed = layer_norm(
        grid,
        _param(weights, f"{prefix}.norm2.gamma", (d,)),
        _param(weights, f"{prefix}.norm2.beta", (d,)),
    )
    flat = normed.reshape(-1, d)
    h1 = gelu(
        matmul(flat, _param(weights, f"{prefix}.mlp.fc1.weight", (d, hidden)))
        + _param(weights, f"{prefix}.mlp.fc1.bias", (hidden,))
    )
    h2 = (
        matmul(h1, _param(weights, f"{prefix}.mlp.fc2.weight", (hidden, d)))
        + _param(weights, f"{prefix}.mlp.fc2.bias", (d,))
    )
    return grid + h2.reshape(grid.shape)


def forward_features(
    clip: np.ndarray, weights: NamedWeights, cfg: ModelConfig
) -> np.ndarray:
    """Pooled feature vector [8 * embed_dim] for one clip [T, H, W, 3].

    Pure and deterministic: identical (clip, weights, cfg) always produce
    bit-identical output; ``weights`` is never mutated.
    """
    clip = validate_clip(clip)
    c = cfg.embed_dim
    grid = embed_patches(
        clip,
        _param(weights, "patch_embed.proj.weight", (PATCH_DIM, c)),
        _param(weights, "patch_embed.proj.bias", (c,)),
        gamma=_param(weights, "patch_embed.norm.gamma", (c,)),
        beta=_param(weights, "patch_embed.norm.beta", (c,)),
    )
    for s in range(NUM_STAGES):
        for b in range(cfg.depths[s]):
            grid = _block_forward(
                grid, weights, f"stages.{s}.blocks.{b}", cfg, s, shifted=bool(b % 2)
            )
        if s < NUM_STAGES - 1:
            d = cfg.stage_width(s)
            t, h, w, _ = grid.shape
            if h % 2 or w % 2:
                grid = np.pad(grid, ((0, 0), (0, h % 2), (0, w % 2), (0, 0)))
            grid = merge_patches(
                grid,
                _param(weights, f"stages.{s}.merge.reduction.weight", (4 * d, 2 * d)),
                gamma=_param(weights, f"stages.{s}.merge.norm.gamma", (4 * d,)),
                beta=_param(weights, f"stages.{s}.merge.norm.beta", (4 * d,)),
            )
    feat_dim = cfg.feature_dim
    tokens = layer_norm(
        grid,
        _param(weights, "norm.gamma", (feat_dim,)),
        _param(weights, "norm.beta", (feat_dim,)),
    ).reshape(-1, feat_dim)
    return tokens.astype(np.float64).mean(axis=0).astype(np.float32)


def classify(features: np.ndarray, weight: np.ndarray, bias: np.ndarray) -> np.ndarray:
    """Head logits ``W^T f + b`` for a pooled feature vector.

    ``weight`` is [feature_dim, K]; the argmax of the result is the
    predicted class index.
    """
    features = np.asarray(features)
    weight = np.asarray(weight)
    bias = np.asarray(bias)
    if features.ndim != 1 or weight.ndim != 2 or weight.shape[0] != features.shape[0]:
        raise ValueError(
            f"classify shape mismatch: features {features.shape}, weight {weight.shape}"
        )
    if bias.shape != (weight.shape[1],):
        raise ValueError(
            f"classify bias shape {bias.shape} does not match K={weight.shape[1]}"
        )
    return (matmul(features[None, :], weight)[0] + bias).astype(np.float32)
