"""3-d patch embedding of video clips and between-stage patch merging.

A video clip is a float32 array [T, H, W, 3] with T even and H, W divisible
by 4; a token grid is a float32 array [T', H', W', C].  Embedding cuts the
clip into non-overlapping 2x4x4 voxel blocks, flattens each block in
(t, h, w, channel) order to a 96-vector, projects it to C channels and layer
normalizes.  Merging concatenates each spatial 2x2 token neighborhood in
(top-left, bottom-left, top-right, bottom-right) order to 4C channels, layer
normalizes and projects down to 2C; the time axis is untouched.

Both flattening orders are normative: any weight producer must match them.
"""

import numpy as np

from .tensor import as_tensor, layer_norm, matmul

__all__ = [
    "PATCH_T",
    "PATCH_S",
    "PATCH_DIM",
    "validate_clip",
    "embed_patches",
    "merge_patches",
]

PATCH_T = 2  # temporal patch extent
PATCH_S = 4  # spatial patch extent
PATCH_DIM = PATCH_T * PATCH_S * PATCH_S * 3  # flattened voxel block length


def validate_clip(clip: np.ndarray) -> np.ndarray:
    """Check the clip invariants: [T, H, W, 3], T even, H and W divisible by 4."""
    clip = as_tensor(clip, name="clip")
    if clip.ndim != 4 or clip.shape[-1] != 3:
        raise ValueError(f"clip must be [T, H, W, 3], got shape {clip.shape}")
    t, h, w, _ = clip.shape
    if t % PATCH_T or h % PATCH_S or w % PATCH_S:
        raise ValueError(
            f"clip extents {clip.shape[:3]} must be divisible by "
            f"({PATCH_T}, {PATCH_S}, {PATCH_S})"
        )
    return clip


def embed_patches(
    clip: np.ndarray,
    projection: np.ndarray,
    bias: np.ndarray,
    gamma: np.ndarray | None = None,
    beta: np.ndarray | None = None,
    eps: float = 1e-5,
) -> np.ndarray:
    """Embed a clip [T, H, W, 3] into a token grid [T/2, H/4, W/4, C].

    ``projection`` is [96, C]; ``bias`` is [C].  The trailing normalization
    uses ``gamma``/``beta`` when given and is affine-free otherwise.
    """
    clip = validate_clip(clip)
    projection = np.asarray(projection)
    bias = np.asarray(bias)
    if projection.ndim != 2 or projection.shape[0] != PATCH_DIM:
        raise ValueError(
            f"projection must be [{PATCH_DIM}, C], got shape {projection.shape}"
        )
    c = projection.shape[1]
    if bias.shape != (c,):
        raise ValueError(f"bias shape {bias.shape} does not match width {c}")

    t, h, w, _ = clip.shape
    tp, hp, wp = t // PATCH_T, h // PATCH_S, w // PATCH_S
    blocks = clip.reshape(tp, PATCH_T, hp, PATCH_S, wp, PATCH_S, 3)
    flat = np.ascontiguousarray(blocks.transpose(0, 2, 4, 1, 3, 5, 6)).reshape(
        tp * hp * wp, PATCH_DIM
    )
    tokens = matmul(flat, projection) + bias.astype(np.float32)
    if gamma is None:
        gamma = np.ones(c, dtype=np.float32)
    if beta is None:
        beta = np.zeros(c, dtype=np.float32)
    tokens = layer_norm(tokens, gamma, beta, eps)
    return tokens.reshape(tp, hp, wp, c)


def merge_patches(
    grid: np.ndarray,
    reduction: np.ndarray,
    gamma: np.ndarray | None = None,
    beta: np.ndarray | None = None,
    eps: float = 1e-5,
) -> np.ndarray:
    """Merge 2x2 spatial token neighborhoods: [T', H', W', C] -> [T', H'/2, W'/2, 2C].

    Requires even H' and W'.  ``reduction`` is [4C, 2C]; normalization of the
    concatenated 4C features precedes the projection.
    """
    grid = as_tensor(grid, name="grid")
    if grid.ndim != 4:
        raise ValueError(f"grid must be [T', H', W', C], got shape {grid.shape}")
    t, h, w, c = grid.shape
    if h % 2 or w % 2:
        raise ValueError(f"merge requires even spatial extents, got H'={h}, W'={w}")
    reduction = np.asarray(reduction)
    if reduction.shape != (4 * c, 2 * c):
        raise ValueError(
            f"reduction must be [{4 * c}, {2 * c}], got shape {reduction.shape}"
        )

    quads = (
        grid[:, 0::2, 0::2, :],  # top-left
        grid[:, 1::2, 0::2, :],  # bottom-left
        grid[:, 0::2, 1::2, :],  # top-right
        grid[:, 1::2, 1::2, :],  # bottom-right
    )
    cat = np.concatenate(quads, axis=-1)
    if gamma is None:
        gamma = np.ones(4 * c, dtype=np.float32)
    if beta is None:
        beta = np.zeros(4 * c, dtype=np.float32)
    cat = layer_norm(cat, gamma, beta, eps)
    merged = matmul(cat.reshape(-1, 4 * c), reduction)
    return merged.reshape(t, h // 2, w // 2, 2 * c)
