"""Turns stored full-length videos (pre-decoded frames) into model input clips.

A video asset is a directory of numbered frame files described by one line of
a JSON-lines manifest:

    {"id", "frame_dir", "fps", "frame_count", "width", "height",
     "labels": ["...", ...]}

Frames may be ``.npy`` arrays (uint8 or float32 [H, W, 3]) or common image
files (PNG/JPEG/BMP, decoded through Pillow when installed).  Sorted file
names define frame order.

Sampling is deterministic: a span of ``frames * stride`` source frames is
anchored at the temporal center of the video (at the start, wrapping
modulo the frame count, when the video is shorter), every ``stride``-th
frame is taken, and each frame is resized so its shorter side matches the
target, then center-cropped.  Pixels live in [0, 1].
"""

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = [
    "VideoAsset",
    "read_manifest",
    "write_manifest",
    "sample_clip",
    "resize_bilinear",
]

_FRAME_SUFFIXES = (".npy", ".png", ".jpg", ".jpeg", ".bmp")


@dataclass(frozen=True)
class VideoAsset:
    """One stored video: frame directory plus native metadata and labels."""

    id: str
    frame_dir: Path
    fps: float
    frame_count: int
    native_width: int
    native_height: int
    labels: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.frame_count < 1:
            raise ValueError(f"asset {self.id!r}: frame_count must be >= 1")
        if self.fps <= 0:
            raise ValueError(f"asset {self.id!r}: fps must be > 0")

    @property
    def duration_s(self) -> float:
        return self.frame_count / self.fps


def read_manifest(path) -> list[VideoAsset]:
    """Parse a JSON-lines manifest; relative frame_dir resolves against it."""
    path = Path(path)
    assets = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                row = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}:{lineno}: invalid JSON ({exc})") from None
            frame_dir = Path(row["frame_dir"])
            if not frame_dir.is_absolute():
                frame_dir = path.parent / frame_dir
            assets.append(
                VideoAsset(
                    id=str(row["id"]),
                    frame_dir=frame_dir,
                    fps=float(row["fps"]),
                    frame_count=int(row["frame_count"]),
                    native_width=int(row["width"]),
                    native_height=int(row["height"]),
                    labels=tuple(str(l) for l in row.get("labels", [])),
                )
            )
    return assets


def write_manifest(assets: list[VideoAsset], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for a in assets:
            fh.write(
                json.dumps(
                    {
                        "id": a.id,
                        "frame_dir": str(a.frame_dir),
                        "fps": a.fps,
                        "frame_count": a.frame_count,
                        "width": a.native_width,
                        "height": a.native_height,
                        "labels": list(a.labels),
                    }
                )
                + "\n"
            )


def _load_frame(file: Path) -> np.ndarray:
    if file.suffix == ".npy":
        try:
            raw = np.load(file)
        except Exception as exc:
            raise ValueError(f"unreadable frame {file}: {exc}") from None
    else:
        try:
            from PIL import Image
        except ImportError:
            raise ImportError(
                f"frame {file} needs Pillow; install the 'images' extra"
            ) from None
        try:
            with Image.open(file) as img:
                raw = np.asarray(img.convert("RGB"))
        except Exception as exc:
            raise ValueError(f"unreadable frame {file}: {exc}") from None
    if raw.ndim != 3 or raw.shape[-1] != 3:
        raise ValueError(f"frame {file} must be [H, W, 3], got shape {raw.shape}")
    if raw.dtype == np.uint8:
        return raw.astype(np.float32) / np.float32(255.0)
    frame = raw.astype(np.float32)
    if frame.min() < -1e-6 or frame.max() > 1.0 + 1e-6:
        raise ValueError(f"frame {file}: float pixels must lie in [0, 1]")
    return np.clip(frame, 0.0, 1.0)


def sample_clip(
    asset: VideoAsset, frames: int = 32, stride: int = 2, size: int = 224
) -> np.ndarray:
    """Fixed-size clip [frames, size, size, 3] sampled from the asset.

    The sampled span covers ``frames * stride`` source frames centered in
    the video; shorter videos loop (indices wrap modulo the frame count).
    """
    files = sorted(
        f for f in asset.frame_dir.iterdir() if f.suffix.lower() in _FRAME_SUFFIXES
    ) if asset.frame_dir.is_dir() else []
    if not files:
        raise FileNotFoundError(f"asset {asset.id!r}: no frames in {asset.frame_dir}")
    if len(files) != asset.frame_count:
        raise ValueError(
            f"asset {asset.id!r}: {asset.frame_dir} holds {len(files)} frames, "
            f"manifest declares {asset.frame_count}"
        )
    count = len(files)
    span = frames * stride
    start = max(0, (count - span) // 2)
    out = np.empty((frames, size, size, 3), dtype=np.float32)
    cache: dict[int, np.ndarray] = {}
    for i in range(frames):
        idx = (start + i * stride) % count
        if idx not in cache:
            cache[idx] = resize_bilinear(_load_frame(files[idx]), size, size)
        out[i] = cache[idx]
    return out


def resize_bilinear(frame: np.ndarray, out_h: int = 224, out_w: int = 224) -> np.ndarray:
    """Scale the shorter side to the target, bilinear, then center-crop.

    Half-pixel-center sampling: an exact 2x downscale equals 2x2 box
    averaging, constants map to constants, and outputs never overshoot the
    input range.
    """
    frame = np.asarray(frame, dtype=np.float32)
    h, w, _ = frame.shape
    if (h, w) == (out_h, out_w):
        return frame.copy()
    scale = max(out_h / h, out_w / w)  # shorter side lands exactly on target
    new_h = max(out_h, int(round(h * scale)))
    new_w = max(out_w, int(round(w * scale)))
    resized = _interp_axis(frame.astype(np.float64), new_h, axis=0)
    resized = _interp_axis(resized, new_w, axis=1)
    top = (new_h - out_h) // 2
    left = (new_w - out_w) // 2
    return resized[top : top + out_h, left : left + out_w].astype(np.float32)


def _interp_axis(arr: np.ndarray, new_len: int, axis: int) -> np.ndarray:
    old_len = arr.shape[axis]
    if new_len == old_len:
        return arr
    src = (np.arange(new_len) + 0.5) * (old_len / new_len) - 0.5
    src = np.clip(src, 0.0, old_len - 1.0)
    i0 = np.floor(src).astype(np.int64)
    i1 = np.minimum(i0 + 1, old_len - 1)
    frac = src - i0
    lo = np.take(arr, i0, axis=axis)
    hi = np.take(arr, i1, axis=axis)
    shape = [1] * arr.ndim
    shape[axis] = new_len
    frac = frac.reshape(shape)
    return lo * (1.0 - frac) + hi * frac
