"""CSV and SVG report writers for the analysis results.

SVG output is deterministic: a fixed hash salt and no embedded creation
date, so identical inputs produce bit-identical files.
"""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .analysis import BinReport, ClassStats, DecayPoint

__all__ = [
    "write_per_class_csv",
    "write_decay_csv",
    "write_bin_csv",
    "write_confusion_csv",
    "decay_chart",
    "bin_count_chart",
    "bin_accuracy_chart",
]

_SVG_RC = {"svg.hashsalt": "swinprobe", "svg.fonttype": "none"}
_SVG_META = {"Date": None}


def write_per_class_csv(per_class: dict[str, ClassStats], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("class,accuracy,support\n")
        for cls in sorted(per_class):
            s = per_class[cls]
            fh.write(f"{cls},{s.accuracy!r},{s.support}\n")


def write_decay_csv(points: list[DecayPoint], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("rank,class,accuracy\n")
        for p in points:
            fh.write(f"{p.rank},{p.class_name},{p.accuracy!r}\n")


def write_bin_csv(report: BinReport, path, key_name: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"bin_index,{key_name}_lo,{key_name}_hi,count,accuracy\n")
        for b in report.bins:
            acc = "" if b.accuracy is None else repr(b.accuracy)
            fh.write(f"{b.index},{b.lo!r},{b.hi!r},{b.count},{acc}\n")
        coeff = "" if report.spearman is None else repr(report.spearman)
        fh.write(f"# spearman,{coeff}\n")


def write_confusion_csv(matrix, classes: list[str], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("true\\pred," + ",".join(classes) + ",other\n")
        for i, cls in enumerate(classes):
            fh.write(cls + "," + ",".join(str(v) for v in matrix[i]) + "\n")


def _save(fig, path) -> None:
    with matplotlib.rc_context(_SVG_RC):
        fig.savefig(path, format="svg", metadata=_SVG_META)
    plt.close(fig)


def decay_chart(points: list[DecayPoint], path, title: str = "Accuracy decay") -> None:
    """Line chart of per-class accuracy sorted from best to worst class."""
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot([p.rank for p in points], [p.accuracy for p in points], lw=1.5)
    ax.set_xlabel("class rank (best to worst)")
    ax.set_ylabel("accuracy")
    ax.set_ylim(-0.02, 1.02)
    ax.set_title(title)
    _save(fig, path)


def bin_count_chart(report: BinReport, path, xlabel: str, log_y: bool = False) -> None:
    """Bar chart of the number of videos per bin."""
    fig, ax = plt.subplots(figsize=(6, 4))
    xs = [b.index for b in report.bins]
    ax.bar(xs, [b.count for b in report.bins], width=0.9)
    if log_y and any(b.count for b in report.bins):
        ax.set_yscale("log")
    ax.set_xlabel(xlabel)
    ax.set_ylabel("videos")
    ax.set_title("Videos per bin")
    _save(fig, path)


def bin_accuracy_chart(report: BinReport, path, xlabel: str) -> None:
    """Bar chart of per-bin accuracy; empty bins are omitted."""
    fig, ax = plt.subplots(figsize=(6, 4))
    occupied = [b for b in report.bins if b.accuracy is not None]
    ax.bar([b.index for b in occupied], [b.accuracy for b in occupied], width=0.9)
    ax.set_xlabel(xlabel)
    ax.set_ylabel("accuracy")
    ax.set_ylim(0, 1.02)
    label = "n/a" if report.spearman is None else f"{report.spearman:.3f}"
    ax.set_title(f"Accuracy per bin (rank corr = {label})")
    _save(fig, path)
