"""Shifted-window video transformer inference, frozen-backbone linear probing,
and prediction error analysis, built on NumPy.

Layout:

- :mod:`swinprobe.tensor` — float32 kernels (matmul, softmax, layer norm, GELU)
- :mod:`swinprobe.weights_io` — ordered named-tensor checkpoints (SWPT format)
- :mod:`swinprobe.patches` — 3-d patch embedding and patch merging
- :mod:`swinprobe.windows` — window partitioning, cyclic shift, masks, attention
- :mod:`swinprobe.backbone` — the four-stage model, forward pass only
- :mod:`swinprobe.sampling` — manifest-driven clip sampling and resizing
- :mod:`swinprobe.probe` — feature caching and AdamW head training
- :mod:`swinprobe.analysis` — prediction-log analyses and rank correlation
- :mod:`swinprobe.cli` — the pipeline entry point
"""

from .backbone import (
    VARIANTS,
    ModelConfig,
    classify,
    count_parameters,
    forward_features,
    init_weights,
    variant_config,
)
from .weights_io import NamedWeights, load_file, save_file
from .windows import WindowSpec

__version__ = "0.1.0"

__all__ = [
    "ModelConfig",
    "WindowSpec",
    "NamedWeights",
    "VARIANTS",
    "variant_config",
    "count_parameters",
    "forward_features",
    "classify",
    "init_weights",
    "load_file",
    "save_file",
    "__version__",
]
