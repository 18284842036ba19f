import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from gmic3d.config import GlobalBackboneConfig, ModelConfig, TrainConfig
from gmic3d.phantom import PhantomSpec, generate_dataset

ACCEPTANCE_RESULTS = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_RESULTS:
            terminalreporter.write_line(line)


def mini_model_config(**overrides):
    """Miniature geometry: 32x32 images, downsample 4, 8-pixel patches."""
    defaults = dict(
        global_backbone=GlobalBackboneConfig(widths=(8, 8), strides=(2, 2)),
        local_widths=(8, 16),
        patch_size=8,
        attention_dim=8,
        embed_dim=16,
        n_patches=2,
        pool_percent=10.0,
        zeta=1.0,
        init_weight=0.01,
    )
    defaults.update(overrides)
    return ModelConfig(**defaults)


def mini_phantom_spec(**overrides):
    defaults = dict(
        height=32,
        width=32,
        depth_range=(4, 6),
        radius_range=(3.0, 5.0),
        malignant_contrast=0.5,
        benign_contrast=0.25,
        seed=11,
    )
    defaults.update(overrides)
    return PhantomSpec(**defaults)


@pytest.fixture
def mini_cfg():
    return mini_model_config()


@pytest.fixture
def mini_train_cfg():
    return TrainConfig(
        max_epochs=2,
        batch_size=4,
        learning_rate=3e-4,
        shift_limit=2,
        resize_limit=0.05,
        seed=3,
    )


@pytest.fixture(scope="session")
def mini_dataset():
    return generate_dataset(mini_phantom_spec(), 16)
