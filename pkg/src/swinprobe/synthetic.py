"""Synthetic micro-dataset generator for demos and end-to-end tests.

Writes a small multi-class video corpus of uint8 ``.npy`` frames plus a
JSON-lines manifest.  Each class carries a strong, distinct spatial pattern
so a linear probe on top of any reasonable feature extractor separates the
classes; durations, frame rates and native resolutions vary so the duration
and resolution binning analyses have several occupied bins to chew on.

Everything is deterministic in the seed; regenerating into the same
directory reproduces byte-identical files.
"""

from pathlib import Path

import numpy as np

from .sampling import VideoAsset, write_manifest

__all__ = ["CLASS_NAMES", "make_micro_dataset"]

CLASS_NAMES = ("gradientEast", "gradientSouth", "checkerboard", "centerBlob")

# (frame_count, fps) pairs cycled across videos; durations span 2 s .. 160 s
_TIMING = [(8, 4.0), (12, 1.0), (16, 0.5), (24, 0.25), (32, 0.2), (20, 2.0)]
# native (width, height) cycled across videos; pixel counts span 3 bins of 10k
_SIZES = [(16, 16), (16, 16), (16, 16), (120, 90), (16, 16), (160, 140)]


def _pattern(class_idx: int, width: int, height: int, phase: float) -> np.ndarray:
    xs = np.linspace(0.0, 1.0, width, dtype=np.float64)[None, :]
    ys = np.linspace(0.0, 1.0, height, dtype=np.float64)[:, None]
    if class_idx == 0:
        base = np.broadcast_to((xs + phase) % 1.0, (height, width))
    elif class_idx == 1:
        base = np.broadcast_to((ys + phase) % 1.0, (height, width))
    elif class_idx == 2:
        base = ((np.floor(xs * 4) + np.floor(ys * 4) + np.floor(phase * 4)) % 2.0)
        base = np.broadcast_to(base, (height, width))
    else:
        r = np.sqrt((xs - 0.5) ** 2 + (ys - 0.5) ** 2)
        base = np.clip(1.0 - 2.0 * r + 0.3 * np.sin(2 * np.pi * phase), 0.0, 1.0)
    tint = np.zeros((height, width, 3), dtype=np.float64)
    tint[..., class_idx % 3] = base
    tint[..., (class_idx + 1) % 3] = 0.5 * base
    return tint


def make_micro_dataset(
    root, n_videos: int = 24, n_classes: int = 4, seed: int = 7
) -> Path:
    """Write ``n_videos`` synthetic videos under ``root``; returns the manifest path."""
    if not 1 <= n_classes <= len(CLASS_NAMES):
        raise ValueError(f"n_classes must be in [1, {len(CLASS_NAMES)}]")
    root = Path(root)
    rng = np.random.default_rng(seed)
    assets = []
    for i in range(n_videos):
        cls = i % n_classes
        frame_count, fps = _TIMING[i % len(_TIMING)]
        width, height = _SIZES[i % len(_SIZES)]
        vid = f"vid{i:03d}"
        frame_dir = root / "frames" / vid
        frame_dir.mkdir(parents=True, exist_ok=True)
        for f in range(frame_count):
            phase = (f / frame_count + 0.1 * i) % 1.0
            img = _pattern(cls, width, height, phase)
            img = img + rng.normal(0.0, 0.02, size=img.shape)
            img = np.clip(img, 0.0, 1.0)
            np.save(frame_dir / f"frame_{f:05d}.npy", (img * 255).astype(np.uint8))
        assets.append(
            VideoAsset(
                id=vid,
                frame_dir=Path("frames") / vid,
                fps=fps,
                frame_count=frame_count,
                native_width=width,
                native_height=height,
                labels=(CLASS_NAMES[cls],),
            )
        )
    manifest = root / "manifest.jsonl"
    write_manifest(assets, manifest)
    return manifest
