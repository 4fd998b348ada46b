"""Frozen-backbone transfer protocol: cache features, train only a new head.

The backbone never trains; pooled feature vectors are extracted once per
video and cached (an SWPT file with one ``feat/<video-id>`` entry per video
plus a JSON-lines ``{"id", "labels"}`` sidecar), so the optimizer loop never
touches the backbone again.  The replaced dense head is trained with AdamW
(decoupled weight decay on the weight matrix only, never the bias) under a
linear-warmup + cosine-decay schedule.

Head training runs in float64 so the optimizer closed forms and the
finite-difference gradient check hold tightly; the persisted head is float32.
Multi-label videos train on their first listed label; evaluation against the
full label set is the analysis module's job.
"""

import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import weights_io
from .backbone import ModelConfig, forward_features
from .sampling import VideoAsset, sample_clip
from .weights_io import NamedWeights

__all__ = [
    "FeatureStore",
    "TrainConfig",
    "HeadParams",
    "EpochStats",
    "extract_features",
    "save_store",
    "load_store",
    "ce_loss_and_grad",
    "adamw_step",
    "lr_at",
    "train_probe",
    "head_to_weights",
    "head_from_weights",
    "write_metrics_csv",
]

logger = logging.getLogger(__name__)

FEATURE_PREFIX = "feat/"
MAX_SKIP_FRACTION = 0.01


@dataclass(frozen=True)
class FeatureStore:
    """Cached per-video features: ids, [n, D] float32 matrix, label tuples."""

    ids: tuple[str, ...]
    features: np.ndarray
    labels: tuple[tuple[str, ...], ...]

    def __post_init__(self) -> None:
        if len(set(self.ids)) != len(self.ids):
            raise ValueError("feature store ids must be unique")
        if self.features.ndim != 2 or len(self.ids) != len(self.features):
            raise ValueError(
                f"feature matrix {self.features.shape} does not match "
                f"{len(self.ids)} ids"
            )
        if len(self.labels) != len(self.ids):
            raise ValueError("labels must align with ids")

    @property
    def feature_dim(self) -> int:
        return self.features.shape[1]

    def __len__(self) -> int:
        return len(self.ids)


@dataclass(frozen=True)
class TrainConfig:
    """Head-training hyperparameters; the seed is mandatory."""

    seed: int
    epochs: int = 30
    batch_size: int = 64
    warmup_epochs: float = 2.5
    peak_lr: float = 1e-3
    weight_decay: float = 0.05
    betas: tuple[float, float] = (0.9, 0.999)
    eps: float = 1e-8

    def __post_init__(self) -> None:
        if self.warmup_epochs >= self.epochs:
            raise ValueError("warmup_epochs must be < epochs")
        if self.peak_lr <= 0:
            raise ValueError("peak_lr must be > 0")
        if self.batch_size < 1 or self.epochs < 1:
            raise ValueError("batch_size and epochs must be >= 1")


@dataclass(frozen=True)
class HeadParams:
    """Dense head [D, K] plus AdamW moment accumulators and step counter."""

    w: np.ndarray
    b: np.ndarray
    m_w: np.ndarray
    v_w: np.ndarray
    m_b: np.ndarray
    v_b: np.ndarray
    t: int = 0

    @classmethod
    def zeros(cls, feature_dim: int, num_classes: int) -> "HeadParams":
        w = np.zeros((feature_dim, num_classes), dtype=np.float64)
        b = np.zeros(num_classes, dtype=np.float64)
        return cls(
            w=w,
            b=b,
            m_w=np.zeros_like(w),
            v_w=np.zeros_like(w),
            m_b=np.zeros_like(b),
            v_b=np.zeros_like(b),
        )


@dataclass(frozen=True)
class EpochStats:
    epoch: int
    loss: float
    train_acc: float
    lr: float


def extract_features(
    assets: list[VideoAsset],
    weights: NamedWeights,
    cfg: ModelConfig,
    frames: int = 32,
    stride: int = 2,
    size: int = 224,
    workers: int = 1,
) -> FeatureStore:
    """One pooled feature vector per asset, extracted under the frozen backbone.

    Per-video failures are logged and skipped; more than 1% skipped aborts
    with a summary error.  Duplicate ids are rejected up front.
    """
    seen: set[str] = set()
    for a in assets:
        if a.id in seen:
            raise ValueError(f"duplicate video id in manifest: {a.id!r}")
        seen.add(a.id)

    def one(asset: VideoAsset) -> np.ndarray:
        clip = sample_clip(asset, frames=frames, stride=stride, size=size)
        return forward_features(clip, weights, cfg)

    results: list[np.ndarray | None] = [None] * len(assets)
    failures: list[tuple[str, str]] = []
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = {pool.submit(one, a): i for i, a in enumerate(assets)}
            for fut, i in futures.items():
                try:
                    results[i] = fut.result()
                except Exception as exc:
                    failures.append((assets[i].id, str(exc)))
                    logger.warning("skipping video %r: %s", assets[i].id, exc)
    else:
        for i, a in enumerate(assets):
            try:
                results[i] = one(a)
            except Exception as exc:
                failures.append((a.id, str(exc)))
                logger.warning("skipping video %r: %s", a.id, exc)

    if assets and len(failures) / len(assets) > MAX_SKIP_FRACTION:
        detail = "; ".join(f"{vid}: {msg}" for vid, msg in failures[:5])
        raise RuntimeError(
            f"extraction skipped {len(failures)} of {len(assets)} videos "
            f"(> {MAX_SKIP_FRACTION:.0%} allowed): {detail}"
        )

    kept = [(a, r) for a, r in zip(assets, results) if r is not None]
    if kept:
        features = np.stack([r for _, r in kept]).astype(np.float32)
    else:
        features = np.zeros((0, cfg.feature_dim), dtype=np.float32)
    return FeatureStore(
        ids=tuple(a.id for a, _ in kept),
        features=features,
        labels=tuple(a.labels for a, _ in kept),
    )


def save_store(store: FeatureStore, swpt_path, sidecar_path) -> None:
    """Persist the cache: SWPT with ``feat/<id>`` entries + id/label sidecar."""
    weights = NamedWeights()
    for vid, vec in zip(store.ids, store.features):
        weights.add(FEATURE_PREFIX + vid, vec)
    weights_io.save_file(weights, swpt_path)
    with open(sidecar_path, "w", encoding="utf-8") as fh:
        for vid, labels in zip(store.ids, store.labels):
            fh.write(json.dumps({"id": vid, "labels": list(labels)}) + "\n")


def load_store(swpt_path, sidecar_path) -> FeatureStore:
    weights = weights_io.load_file(swpt_path)
    labels_by_id: dict[str, tuple[str, ...]] = {}
    order: list[str] = []
    with open(sidecar_path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            row = json.loads(line)
            labels_by_id[row["id"]] = tuple(row["labels"])
            order.append(row["id"])
    vectors = []
    for vid in order:
        path = FEATURE_PREFIX + vid
        vectors.append(weights[path])
    features = (
        np.stack(vectors).astype(np.float32)
        if vectors
        else np.zeros((0, 0), dtype=np.float32)
    )
    return FeatureStore(
        ids=tuple(order),
        features=features,
        labels=tuple(labels_by_id[v] for v in order),
    )


def ce_loss_and_grad(
    w: np.ndarray, b: np.ndarray, x: np.ndarray, y: np.ndarray
) -> tuple[float, np.ndarray, np.ndarray]:
    """Mean softmax cross-entropy and its closed-form gradients, in float64.

    ``w`` [D, K], ``b`` [K], ``x`` [n, D], ``y`` [n] integer labels < K.
    Returns (loss, dW, db) with dW = X^T (p - Y) / n and db = mean(p - Y).
    """
    x = np.asarray(x, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    y = np.asarray(y)
    n, k = len(x), w.shape[1]
    if n < 1:
        raise ValueError("batch must be non-empty")
    if len(y) != n:
        raise ValueError(f"labels length {len(y)} does not match batch size {n}")
    if y.min() < 0 or y.max() >= k:
        raise ValueError(f"label out of range [0, {k}): {y.min()}..{y.max()}")
    logits = x @ w + b
    logits -= logits.max(axis=1, keepdims=True)
    log_z = np.log(np.exp(logits).sum(axis=1, keepdims=True))
    log_p = logits - log_z
    loss = float(-log_p[np.arange(n), y].mean())
    p = np.exp(log_p)
    p[np.arange(n), y] -= 1.0
    dw = x.T @ p / n
    db = p.mean(axis=0)
    return loss, dw, db


def adamw_step(
    head: HeadParams,
    dw: np.ndarray,
    db: np.ndarray,
    lr: float,
    cfg: TrainConfig,
) -> HeadParams:
    """One decoupled-weight-decay Adam update; decay applies to W only."""
    if not (np.isfinite(dw).all() and np.isfinite(db).all()):
        raise RuntimeError(f"non-finite gradients at optimizer step {head.t}")
    b1, b2 = cfg.betas
    t = head.t + 1
    m_w = b1 * head.m_w + (1 - b1) * dw
    v_w = b2 * head.v_w + (1 - b2) * dw * dw
    m_b = b1 * head.m_b + (1 - b1) * db
    v_b = b2 * head.v_b + (1 - b2) * db * db
    mc = 1 - b1**t
    vc = 1 - b2**t
    w = head.w - lr * ((m_w / mc) / (np.sqrt(v_w / vc) + cfg.eps) + cfg.weight_decay * head.w)
    b = head.b - lr * (m_b / mc) / (np.sqrt(v_b / vc) + cfg.eps)
    return HeadParams(w=w, b=b, m_w=m_w, v_w=v_w, m_b=m_b, v_b=v_b, t=t)


def lr_at(step: int, steps_per_epoch: int, cfg: TrainConfig) -> float:
    """Learning rate at a 0-based optimizer step.

    Linear 0 -> peak over ``warmup_epochs`` worth of steps, then cosine decay
    from peak to exactly 0 at ``epochs * steps_per_epoch``.
    """
    if step < 0:
        raise ValueError("step must be >= 0")
    total = cfg.epochs * steps_per_epoch
    warmup = cfg.warmup_epochs * steps_per_epoch
    if step < warmup:
        return cfg.peak_lr * step / warmup
    if step >= total:
        return 0.0
    progress = (step - warmup) / (total - warmup)
    return cfg.peak_lr * 0.5 * (1.0 + math.cos(math.pi * progress))


def train_probe(
    store: FeatureStore,
    cfg: TrainConfig,
    classes: list[str] | None = None,
) -> tuple[HeadParams, list[EpochStats], list[str]]:
    """Train the replaced head on cached features; backbone never touched.

    Deterministic given the seed (fixed shuffle sequence).  Targets are the
    first listed label of each video.  Returns the final head, the per-epoch
    log and the class vocabulary (sorted label names when not supplied).
    """
    if len(store) == 0:
        raise ValueError("feature store is empty")
    if classes is None:
        classes = sorted({l for labels in store.labels for l in labels})
    index = {name: i for i, name in enumerate(classes)}
    try:
        y = np.array([index[labels[0]] for labels in store.labels], dtype=np.int64)
    except KeyError as exc:
        raise ValueError(f"label {exc.args[0]!r} not in class vocabulary") from None

    x = store.features.astype(np.float64)
    n = len(store)
    head = HeadParams.zeros(store.feature_dim, len(classes))
    steps_per_epoch = math.ceil(n / cfg.batch_size)
    rng = np.random.default_rng(cfg.seed)

    stats: list[EpochStats] = []
    step = 0
    lr = 0.0
    for epoch in range(cfg.epochs):
        perm = rng.permutation(n)
        for lo in range(0, n, cfg.batch_size):
            batch = perm[lo : lo + cfg.batch_size]
            lr = lr_at(step, steps_per_epoch, cfg)
            _, dw, db = ce_loss_and_grad(head.w, head.b, x[batch], y[batch])
            head = adamw_step(head, dw, db, lr, cfg)
            step += 1
        loss, _, _ = ce_loss_and_grad(head.w, head.b, x, y)
        pred = (x @ head.w + head.b).argmax(axis=1)
        stats.append(
            EpochStats(
                epoch=epoch,
                loss=loss,
                train_acc=float((pred == y).mean()),
                lr=lr,
            )
        )
    return head, stats, classes


def head_to_weights(head: HeadParams) -> NamedWeights:
    """Float32 head checkpoint: entries ``head.weight`` and ``head.bias``."""
    out = NamedWeights()
    out.add("head.weight", head.w.astype(np.float32))
    out.add("head.bias", head.b.astype(np.float32))
    return out


def head_from_weights(weights: NamedWeights) -> tuple[np.ndarray, np.ndarray]:
    return weights["head.weight"], weights["head.bias"]


def write_metrics_csv(stats: list[EpochStats], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("epoch,loss,train_acc,lr\n")
        for s in stats:
            fh.write(f"{s.epoch},{s.loss!r},{s.train_acc!r},{s.lr!r}\n")
