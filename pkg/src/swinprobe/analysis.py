"""Post-hoc analyses over prediction logs: per-class accuracy, accuracy decay,
duration/resolution binning with rank correlation, class-frequency
correlation, confusion submatrices and class-merge what-ifs.

A prediction record is one evaluated video; it is *correct* when the
predicted class is a member of its (possibly multi-label) ground-truth set.
Binning uses half-open intervals with floor indexing: duration d lands in
bin floor(d / width), i.e. [k*w, (k+1)*w).  Rank correlation uses average
ranks for ties and is reported as ``None`` ("not computable") for
degenerate series: fewer than two points, or a constant side.

Prediction logs are JSON-lines:
    {"id", "true_labels": [...], "predicted", "duration_s", "width", "height"}
"""

import json
from dataclasses import dataclass
from typing import Callable, Iterable, NamedTuple

import numpy as np

__all__ = [
    "PredictionRecord",
    "ClassStats",
    "DecayPoint",
    "Bin",
    "BinReport",
    "MergeResult",
    "read_predictions",
    "write_predictions",
    "is_correct",
    "overall_accuracy",
    "per_class_accuracy",
    "accuracy_decay_curve",
    "spearman",
    "bin_by_duration",
    "bin_by_resolution",
    "class_frequency_correlation",
    "confusion_submatrix",
    "merge_whatif",
    "class_filtered_view",
]


@dataclass(frozen=True)
class PredictionRecord:
    """One evaluated video: truth set, prediction and native metadata."""

    video_id: str
    true_labels: tuple[str, ...]
    predicted: str
    duration_s: float
    width: int
    height: int

    def __post_init__(self) -> None:
        if not self.true_labels:
            raise ValueError(f"record {self.video_id!r}: true_labels is empty")
        if self.duration_s <= 0:
            raise ValueError(f"record {self.video_id!r}: duration_s must be > 0")
        if self.width < 1 or self.height < 1:
            raise ValueError(f"record {self.video_id!r}: frame extents must be >= 1")

    @property
    def pixels(self) -> int:
        return self.width * self.height


class ClassStats(NamedTuple):
    accuracy: float
    support: int


class DecayPoint(NamedTuple):
    rank: int
    class_name: str
    accuracy: float


@dataclass(frozen=True)
class Bin:
    index: int
    lo: float
    hi: float
    count: int
    accuracy: float | None


@dataclass(frozen=True)
class BinReport:
    """Per-bin aggregates plus rank correlation of bin index vs. accuracy."""

    bins: tuple[Bin, ...]
    spearman: float | None


class MergeResult(NamedTuple):
    before: float
    after: float
    delta: float


def read_predictions(path) -> list[PredictionRecord]:
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            row = json.loads(line)
            records.append(
                PredictionRecord(
                    video_id=str(row["id"]),
                    true_labels=tuple(str(l) for l in row["true_labels"]),
                    predicted=str(row["predicted"]),
                    duration_s=float(row["duration_s"]),
                    width=int(row["width"]),
                    height=int(row["height"]),
                )
            )
    return records


def write_predictions(records: Iterable[PredictionRecord], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for r in records:
            fh.write(
                json.dumps(
                    {
                        "id": r.video_id,
                        "true_labels": list(r.true_labels),
                        "predicted": r.predicted,
                        "duration_s": r.duration_s,
                        "width": r.width,
                        "height": r.height,
                    }
                )
                + "\n"
            )


def is_correct(record: PredictionRecord) -> bool:
    return record.predicted in record.true_labels


def overall_accuracy(records: list[PredictionRecord]) -> float:
    if not records:
        raise ValueError("no records")
    return sum(is_correct(r) for r in records) / len(records)


def per_class_accuracy(records: list[PredictionRecord]) -> dict[str, ClassStats]:
    """Accuracy and support per class.

    A record counts toward every class in its truth set; it counts as
    correct for each of them when the prediction hits any true label.
    """
    if not records:
        raise ValueError("no records")
    support: dict[str, int] = {}
    hits: dict[str, int] = {}
    for r in records:
        correct = is_correct(r)
        for cls in r.true_labels:
            support[cls] = support.get(cls, 0) + 1
            hits[cls] = hits.get(cls, 0) + int(correct)
    return {
        cls: ClassStats(accuracy=hits[cls] / support[cls], support=support[cls])
        for cls in support
    }


def accuracy_decay_curve(per_class: dict[str, ClassStats]) -> list[DecayPoint]:
    """Classes sorted by accuracy descending (ties: name ascending), ranked from 1."""
    if not per_class:
        raise ValueError("no classes")
    ordered = sorted(per_class.items(), key=lambda kv: (-kv[1].accuracy, kv[0]))
    return [
        DecayPoint(rank=i + 1, class_name=cls, accuracy=stats.accuracy)
        for i, (cls, stats) in enumerate(ordered)
    ]


def _average_ranks(values: np.ndarray) -> np.ndarray:
    """1-based ranks with tied values sharing the average of their positions."""
    order = np.argsort(values, kind="stable")
    ranks = np.empty(len(values), dtype=np.float64)
    i = 0
    while i < len(values):
        j = i
        while j < len(values) and values[order[j]] == values[order[i]]:
            j += 1
        ranks[order[i:j]] = (i + j + 1) / 2.0  # positions i+1 .. j averaged
        i = j
    return ranks


def spearman(xs, ys) -> float | None:
    """Rank correlation: Pearson correlation of average-ranked series.

    Raises on length mismatch; returns ``None`` ("not computable") for
    series shorter than 2 or constant on either side.
    """
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    if xs.shape != ys.shape or xs.ndim != 1:
        raise ValueError(f"series length mismatch: {xs.shape} vs {ys.shape}")
    if len(xs) < 2 or np.all(xs == xs[0]) or np.all(ys == ys[0]):
        return None
    rx = _average_ranks(xs)
    ry = _average_ranks(ys)
    rx -= rx.mean()
    ry -= ry.mean()
    return float((rx * ry).sum() / np.sqrt((rx * rx).sum() * (ry * ry).sum()))


def _bin_report(
    records: list[PredictionRecord], width: float, key: Callable[[PredictionRecord], float]
) -> BinReport:
    if width <= 0:
        raise ValueError("bin width must be > 0")
    counts: dict[int, int] = {}
    hits: dict[int, int] = {}
    for r in records:
        idx = int(np.floor(key(r) / width))
        counts[idx] = counts.get(idx, 0) + 1
        hits[idx] = hits.get(idx, 0) + int(is_correct(r))
    bins: list[Bin] = []
    if counts:
        lo_idx, hi_idx = min(counts), max(counts)
        for idx in range(lo_idx, hi_idx + 1):
            n = counts.get(idx, 0)
            bins.append(
                Bin(
                    index=idx,
                    lo=idx * width,
                    hi=(idx + 1) * width,
                    count=n,
                    accuracy=(hits[idx] / n) if n else None,
                )
            )
    occupied = [b for b in bins if b.count]
    coeff = spearman(
        [b.index for b in occupied], [b.accuracy for b in occupied]
    ) if len(occupied) >= 2 else None
    return BinReport(bins=tuple(bins), spearman=coeff)


def bin_by_duration(
    records: list[PredictionRecord], bin_width_s: float = 15.0
) -> BinReport:
    """Group records into half-open duration bins of ``bin_width_s`` seconds."""
    return _bin_report(records, bin_width_s, lambda r: r.duration_s)


def bin_by_resolution(
    records: list[PredictionRecord], bin_width_px: int = 10_000
) -> BinReport:
    """Group records by frame pixel count (width x height) bins."""
    return _bin_report(records, float(bin_width_px), lambda r: float(r.pixels))


def class_frequency_correlation(per_class: dict[str, ClassStats]) -> float | None:
    """Rank correlation between per-class support and per-class accuracy."""
    if len(per_class) < 2:
        raise ValueError("need at least 2 classes")
    names = sorted(per_class)
    supports = [per_class[c].support for c in names]
    accuracies = [per_class[c].accuracy for c in names]
    return spearman(supports, accuracies)


def confusion_submatrix(
    records: list[PredictionRecord], classes: list[str]
) -> np.ndarray:
    """Count matrix restricted to ``classes``: rows are true classes (a record's
    first truth label found in the list), columns are the same classes plus a
    trailing "other" column for predictions outside the list.
    """
    if not classes:
        raise ValueError("classes must be non-empty")
    if len(set(classes)) != len(classes):
        raise ValueError("classes must be distinct")
    universe = {l for r in records for l in r.true_labels} | {
        r.predicted for r in records
    }
    unknown = [c for c in classes if c not in universe]
    if unknown:
        raise ValueError(f"unknown class name(s): {unknown}")
    col = {c: i for i, c in enumerate(classes)}
    matrix = np.zeros((len(classes), len(classes) + 1), dtype=np.int64)
    for r in records:
        row = next((col[l] for l in r.true_labels if l in col), None)
        if row is None:
            continue
        matrix[row, col.get(r.predicted, len(classes))] += 1
    return matrix


def merge_whatif(
    records: list[PredictionRecord], groups: list[set[str]]
) -> MergeResult:
    """Top-1 accuracy before/after mapping each group of classes to one class.

    Groups must be disjoint; merging applies to truths and predictions alike.
    """
    seen: set[str] = set()
    for g in groups:
        overlap = seen & set(g)
        if overlap:
            raise ValueError(f"groups overlap on {sorted(overlap)}")
        seen |= set(g)
    if not records:
        raise ValueError("no records")
    mapping = {cls: "+".join(sorted(g)) for g in groups for cls in g}

    def canon(name: str) -> str:
        return mapping.get(name, name)

    before = overall_accuracy(records)
    after = (
        sum(canon(r.predicted) in {canon(l) for l in r.true_labels} for r in records)
        / len(records)
    )
    return MergeResult(before=before, after=after, delta=after - before)


def class_filtered_view(
    records: list[PredictionRecord], predicate: Callable[[str], bool]
) -> list[PredictionRecord]:
    """Records whose truth set contains a class matching ``predicate``, in order."""
    return [r for r in records if any(predicate(l) for l in r.true_labels)]
