import numpy as np
import pytest

from swinprobe.backbone import ModelConfig
from swinprobe.windows import WindowSpec


@pytest.fixture
def rng():
    return np.random.default_rng(42)


@pytest.fixture
def micro_config():
    """Smallest config that exercises all four stages and the merges."""
    return ModelConfig(
        embed_dim=8,
        depths=(1, 1, 1, 1),
        heads=(1, 1, 1, 1),
        window=WindowSpec(2, 2),
        num_classes=4,
    )
