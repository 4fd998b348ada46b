"""3-d window partitioning, cyclic shifting, shift masks and windowed attention.

A token grid [T', H', W', C] is cut into non-overlapping windows of
P x M x M tokens (P temporal, M spatial).  Shifted blocks roll the grid by
the negated offsets before partitioning; tokens that wrap around the grid
seam then share a window with tokens they should not attend to, so a
per-window additive mask assigns -1e4 to every cross-region pair.  -1e4 is
large enough to zero the pair's softmax weight in float32 yet small enough
never to produce NaN under max-subtraction.

Tokens are flattened inside a window in (t, h, w) order; the relative
position bias index follows the same order, so a bias table row is addressed
purely by the (dt, dh, dw) offset of a token pair.
"""

from dataclasses import dataclass

import numpy as np

from .tensor import matmul, softmax_rows

__all__ = [
    "WindowSpec",
    "AttentionWeights",
    "RelativeBiasTable",
    "MASK_NEG",
    "partition_windows",
    "reverse_windows",
    "cyclic_shift",
    "shift_offsets",
    "pad_to_windows",
    "crop_grid",
    "build_shift_mask",
    "window_attention",
]

MASK_NEG = -1.0e4  # additive stand-in for -inf in float32 logits


@dataclass(frozen=True)
class WindowSpec:
    """Window extents: ``p`` tokens along time, ``m`` along height and width."""

    p: int
    m: int

    def __post_init__(self) -> None:
        if self.p < 1 or self.m < 1:
            raise ValueError(f"window extents must be >= 1, got ({self.p}, {self.m})")

    @property
    def tokens(self) -> int:
        return self.p * self.m * self.m

    def as_tuple(self) -> tuple[int, int, int]:
        return (self.p, self.m, self.m)


def shift_offsets(spec: WindowSpec) -> tuple[int, int, int]:
    """Cyclic shift offsets for shifted blocks: floor of half the window."""
    return (spec.p // 2, spec.m // 2, spec.m // 2)


def partition_windows(grid: np.ndarray, spec: WindowSpec) -> np.ndarray:
    """Cut [T', H', W', C] into [num_windows, P*M*M, C] blocks.

    Extents must already be multiples of the window (pad first if not);
    every token lands in exactly one block.
    """
    t, h, w, c = grid.shape
    p, m = spec.p, spec.m
    if t % p or h % m or w % m:
        raise ValueError(
            f"grid extents {(t, h, w)} not divisible by window {(p, m, m)}"
        )
    x = grid.reshape(t // p, p, h // m, m, w // m, m, c)
    x = x.transpose(0, 2, 4, 1, 3, 5, 6)
    return np.ascontiguousarray(x).reshape(-1, spec.tokens, c)


def reverse_windows(
    blocks: np.ndarray, spec: WindowSpec, extents: tuple[int, int, int]
) -> np.ndarray:
    """Exact inverse of :func:`partition_windows` for the given grid extents."""
    t, h, w = extents
    p, m = spec.p, spec.m
    if t % p or h % m or w % m:
        raise ValueError(f"extents {extents} not divisible by window {(p, m, m)}")
    expected = (t // p) * (h // m) * (w // m)
    if len(blocks) != expected:
        raise ValueError(
            f"block count {len(blocks)} does not match extents {extents} "
            f"with window {(p, m, m)} (expected {expected})"
        )
    c = blocks.shape[-1]
    x = np.asarray(blocks).reshape(t // p, h // m, w // m, p, m, m, c)
    x = x.transpose(0, 3, 1, 4, 2, 5, 6)
    return np.ascontiguousarray(x).reshape(t, h, w, c)


def cyclic_shift(grid: np.ndarray, offsets: tuple[int, int, int]) -> np.ndarray:
    """Toroidal roll of token positions by the negated offsets.

    ``cyclic_shift(g, o)`` followed by ``cyclic_shift(_, tuple(-x for x in o))``
    restores the grid.
    """
    return np.roll(grid, shift=tuple(-o for o in offsets), axis=(0, 1, 2))


def pad_to_windows(
    grid: np.ndarray, spec: WindowSpec
) -> tuple[np.ndarray, tuple[int, int, int]]:
    """Zero-pad the high side of each axis up to a window multiple.

    Returns the padded grid and the original extents (for cropping after).
    """
    t, h, w, _ = grid.shape
    pt = (-t) % spec.p
    ph = (-h) % spec.m
    pw = (-w) % spec.m
    if not (pt or ph or pw):
        return grid, (t, h, w)
    padded = np.pad(grid, ((0, pt), (0, ph), (0, pw), (0, 0)))
    return padded, (t, h, w)


def crop_grid(grid: np.ndarray, extents: tuple[int, int, int]) -> np.ndarray:
    t, h, w = extents
    return grid[:t, :h, :w, :]


def _axis_regions(extent: int, window: int, shift: int) -> np.ndarray:
    """Region label per position along one axis of the shifted canvas.

    Positions in [0, extent-window) never mix with wrapped tokens; the last
    window splits into a contiguous part [extent-window, extent-shift) and
    the wrapped tail [extent-shift, extent).
    """
    labels = np.zeros(extent, dtype=np.int64)
    if shift:
        labels[extent - window :] = 1
        labels[extent - shift :] = 2
    return labels


def build_shift_mask(
    extents: tuple[int, int, int],
    spec: WindowSpec,
    offsets: tuple[int, int, int],
    valid_extents: tuple[int, int, int] | None = None,
) -> np.ndarray:
    """Per-window additive masks [num_windows, N, N] for a shifted grid.

    ``extents`` are the (already padded) grid extents; ``valid_extents``, when
    given, marks the unpadded region so padded tokens are masked out of every
    real token's attention row.  Offsets must be strictly smaller than the
    window extents.  Token pairs from the same pre-shift region get 0,
    cross-region pairs get ``MASK_NEG``.
    """
    t, h, w = extents
    p, m = spec.p, spec.m
    ot, oh, ow = offsets
    if ot >= p or oh >= m or ow >= m:
        raise ValueError(f"offsets {offsets} must be < window {(p, m, m)}")

    rt = _axis_regions(t, p, ot)
    rh = _axis_regions(h, m, oh)
    rw = _axis_regions(w, m, ow)
    region = (rt[:, None, None] * 9 + rh[None, :, None] * 3 + rw[None, None, :]).astype(
        np.float64
    )

    if valid_extents is not None:
        vt, vh, vw = valid_extents
        pad = np.ones((t, h, w), dtype=bool)
        pad[:vt, :vh, :vw] = False
        # padding happens before the shift, so the pad canvas rolls with the grid
        pad = np.roll(pad, shift=tuple(-o for o in offsets), axis=(0, 1, 2))
        region[pad] = -1.0

    ids = partition_windows(region[..., None], spec)[..., 0]
    same = ids[:, :, None] == ids[:, None, :]
    return np.where(same, 0.0, MASK_NEG).astype(np.float32)


@dataclass(frozen=True)
class AttentionWeights:
    """Projection weights for one attention layer; all [C, C] / [C] float32."""

    wq: np.ndarray
    bq: np.ndarray
    wk: np.ndarray
    bk: np.ndarray
    wv: np.ndarray
    bv: np.ndarray
    wo: np.ndarray
    bo: np.ndarray


@dataclass(frozen=True)
class RelativeBiasTable:
    """Learned per-head bias addressed by relative (dt, dh, dw) token offsets.

    ``table`` is [(2P-1)(2M-1)(2M-1), heads]; ``index`` maps each token pair of
    a window to its table row and depends only on the pair's offset, never on
    absolute position.
    """

    table: np.ndarray
    index: np.ndarray

    @classmethod
    def for_window(cls, table: np.ndarray, spec: WindowSpec) -> "RelativeBiasTable":
        rows = (2 * spec.p - 1) * (2 * spec.m - 1) * (2 * spec.m - 1)
        table = np.asarray(table)
        if table.ndim != 2 or table.shape[0] != rows:
            raise ValueError(
                f"bias table must be [{rows}, heads] for window "
                f"{(spec.p, spec.m, spec.m)}, got shape {table.shape}"
            )
        return cls(table=table, index=build_bias_index(spec))

    def gather(self) -> np.ndarray:
        """Bias matrices per head: [heads, N, N]."""
        return self.table[self.index].transpose(2, 0, 1)


def build_bias_index(spec: WindowSpec) -> np.ndarray:
    """Map each window token pair (i, j) to its relative-offset table row."""
    p, m = spec.p, spec.m
    tt, hh, ww = np.meshgrid(np.arange(p), np.arange(m), np.arange(m), indexing="ij")
    coords = np.stack([tt.ravel(), hh.ravel(), ww.ravel()])  # [3, N] in (t,h,w) order
    rel = coords[:, :, None] - coords[:, None, :]
    rel_t = rel[0] + (p - 1)
    rel_h = rel[1] + (m - 1)
    rel_w = rel[2] + (m - 1)
    return rel_t * (2 * m - 1) * (2 * m - 1) + rel_h * (2 * m - 1) + rel_w


def window_attention(
    block: np.ndarray,
    weights: AttentionWeights,
    bias: RelativeBiasTable,
    mask: np.ndarray | None,
    heads: int,
    return_weights: bool = False,
) -> np.ndarray | tuple[np.ndarray, np.ndarray]:
    """Biased multi-head self-attention over one window block [N, C].

    Per head: softmax(q k^T / sqrt(d) + B_head + mask) v with d = C // heads;
    head outputs are concatenated and projected by ``wo``.  ``mask`` is an
    additive [N, N] array or None.  With ``return_weights`` the per-head
    attention probabilities [heads, N, N] are returned alongside the output.
    """
    n, c = block.shape
    if c % heads:
        raise ValueError(f"width {c} not divisible by head count {heads}")
    d = c // heads
    scale = 1.0 / np.sqrt(float(d))

    q = (matmul(block, weights.wq) + weights.bq).reshape(n, heads, d)
    k = (matmul(block, weights.wk) + weights.bk).reshape(n, heads, d)
    v = (matmul(block, weights.wv) + weights.bv).reshape(n, heads, d)

    bias_matrices = bias.gather()
    out = np.empty((heads, n, d), dtype=np.float32)
    probs = np.empty((heads, n, n), dtype=np.float32) if return_weights else None
    for hd in range(heads):
        logits = matmul(q[:, hd, :], k[:, hd, :].T.copy()) * np.float32(scale)
        logits = logits + bias_matrices[hd].astype(np.float32)
        if mask is not None:
            logits = logits + mask
        attn = softmax_rows(logits)
        if probs is not None:
            probs[hd] = attn
        out[hd] = matmul(attn, v[:, hd, :])

    merged = out.transpose(1, 0, 2).reshape(n, c)
    result = matmul(merged, weights.wo) + weights.bo
    if return_weights:
        return result, probs
    return result
