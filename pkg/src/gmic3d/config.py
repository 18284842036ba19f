"""Architecture and training knobs, plus named constant profiles.

Two profiles are shipped: ``desk`` (small geometry that preserves the
ratios that matter: patch << image, lesions span few slices) and ``full``
(the full-scale constants, kept for cost-model accounting and documentation;
not meant to be trained here).
"""

import math
from dataclasses import dataclass, field, asdict, replace


class ConfigurationError(ValueError):
    pass


@dataclass
class GlobalBackboneConfig:
    widths: tuple = (16, 32, 64)
    strides: tuple = (2, 2, 2)
    norm_groups: int = 8

    @property
    def downsample(self):
        return math.prod(self.strides)

    def validate(self):
        if len(self.widths) != len(self.strides):
            raise ConfigurationError("widths and strides must have equal length")
        for w in self.widths:
            if w % self.norm_groups != 0:
                raise ConfigurationError(
                    f"width {w} not divisible by {self.norm_groups} norm groups"
                )


@dataclass
class ModelConfig:
    global_backbone: GlobalBackboneConfig = field(default_factory=GlobalBackboneConfig)
    local_widths: tuple = (32, 64, 128)
    patch_size: int = 32
    attention_dim: int = 64       # L
    embed_dim: int = 128          # S
    n_patches: int = 3            # K
    pool_percent: float = 30.0    # t, per slice
    zeta: float = 10.0            # suppression / jitter half-width in slices
    init_weight: float = 0.01     # omega, constant seg-layer init

    def validate(self):
        self.global_backbone.validate()
        if self.patch_size % self.global_backbone.downsample != 0:
            raise ConfigurationError(
                f"patch size {self.patch_size} must be a multiple of the "
                f"downsample factor {self.global_backbone.downsample}"
            )
        if self.pool_percent <= 0:
            raise ConfigurationError("pool percentage must be positive")
        if self.n_patches < 1:
            raise ConfigurationError("need at least one patch")
        if self.zeta < 0:
            raise ConfigurationError("zeta must be >= 0")
        if self.init_weight <= 0:
            raise ConfigurationError("seg-layer init constant must be positive")


@dataclass
class TrainConfig:
    learning_rate: float = 2e-3
    beta: float = 1e-5            # saliency L1 weight
    batch_size: int = 8
    max_epochs: int = 8
    patience: int = 15
    seed: int = 0
    tta_count: int = 10
    shift_limit: int = 6          # max |shift| in pixels, xy only
    resize_limit: float = 0.06    # max relative resize
    val_fraction: float = 0.2

    def validate(self):
        if self.learning_rate <= 0 or self.beta < 0:
            raise ConfigurationError("learning rate must be > 0 and beta >= 0")
        if self.patience >= self.max_epochs and self.patience != 0:
            # patience 0 is a legal degenerate setting (stop at first plateau)
            pass
        if self.max_epochs < 1:
            raise ConfigurationError("max_epochs must be >= 1")


def desk_profile():
    return ModelConfig()


def full_profile():
    """Full-scale constants; for cost accounting, not desk training.

    Input images are 2116 x 1339 with up to 96 slices; patches are 256 x 256
    at overall downsample 16.
    """
    return ModelConfig(
        global_backbone=GlobalBackboneConfig(
            widths=(16, 32, 64, 128), strides=(2, 2, 2, 2), norm_groups=8
        ),
        local_widths=(64, 128, 256, 512),
        patch_size=256,
        attention_dim=128,
        embed_dim=512,
        n_patches=8,
        pool_percent=100.0,
        zeta=10.0,
        init_weight=0.01,
    )


PROFILES = {"desk": desk_profile, "full": full_profile}

# Documented full-resolution crop sizes of the source imaging pipeline; used
# only by the cost model and docs, never for phantom data.
FULL_IMAGE_2D = (2866, 1814)
FULL_IMAGE_3D = (2116, 1339)
FULL_MAX_SLICES = 96


def read_kv_config(path):
    """Parse a flat key=value config file.

    Values are comma-split into tuples when they contain commas; scalars are
    left as strings for the caller to coerce.
    """
    out = {}
    with open(path) as f:
        for lineno, line in enumerate(f, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ConfigurationError(f"{path}:{lineno}: expected key=value")
            key, _, value = line.partition("=")
            key, value = key.strip(), value.strip()
            if "," in value:
                out[key] = tuple(v.strip() for v in value.split(","))
            else:
                out[key] = value
    return out


def _coerce_like(template, value):
    if isinstance(template, tuple):
        if not isinstance(value, tuple):
            value = (value,)
        elem = type(template[0]) if template else float
        return tuple(elem(v) for v in value)
    if isinstance(template, bool):
        return str(value).lower() in ("1", "true", "yes")
    if isinstance(template, float) and str(value).lower() in ("inf", "infinity"):
        return math.inf
    return type(template)(value)


def apply_kv(cfg, kv):
    """Override dataclass fields from a flat mapping; unknown keys error.

    Keys for the nested backbone use a ``global_`` prefix
    (e.g. ``global_widths``, ``global_strides``, ``global_norm_groups``).
    """
    updates, backbone_updates = {}, {}
    for key, value in kv.items():
        if key.startswith("global_") and hasattr(cfg, "global_backbone"):
            name = key[len("global_"):]
            if not hasattr(cfg.global_backbone, name):
                raise ConfigurationError(f"unknown config key '{key}'")
            backbone_updates[name] = _coerce_like(
                getattr(cfg.global_backbone, name), value
            )
        elif hasattr(cfg, key):
            updates[key] = _coerce_like(getattr(cfg, key), value)
        else:
            raise ConfigurationError(f"unknown config key '{key}'")
    if backbone_updates:
        updates["global_backbone"] = replace(cfg.global_backbone, **backbone_updates)
    return replace(cfg, **updates)


def config_to_dict(cfg):
    return asdict(cfg)
