"""Synthetic volumetric dataset with injected lesions.

Volumes are grayscale H x W x D grids in [0, 1] with textured background and
zero or more ellipsoidal lesions per class. Benign lesions have smooth
boundaries; malignant lesions get higher contrast and an irregular boundary
modulated by a smooth radial noise field, so the classes are separable by
shape/contrast rather than mean intensity alone. Each group carries two
independently rendered views with identical labels.
"""

from dataclasses import dataclass, replace

import numpy as np
from scipy import ndimage

from .config import ConfigurationError
from .container import save_arrays, load_arrays, FormatError


@dataclass
class PhantomSpec:
    height: int = 96
    width: int = 96
    depth_range: tuple = (8, 24)
    radius_range: tuple = (5.0, 9.0)
    lesions_range: tuple = (1, 2)       # lesions per positive class
    benign_prevalence: float = 0.35
    malignant_prevalence: float = 0.35
    benign_contrast: float = 0.25
    malignant_contrast: float = 0.45
    malignant_irregularity: float = 0.35
    background_noise: float = 0.08
    depth_squash: float = 3.0           # z-extent of lesions ~ radius / squash
    seed: int = 0

    def validate(self):
        if not (0.0 <= self.benign_prevalence < 1.0) or not (
            0.0 <= self.malignant_prevalence < 1.0
        ):
            raise ConfigurationError("prevalence must lie in [0, 1)")
        if self.depth_range[0] < 1 or self.depth_range[0] > self.depth_range[1]:
            raise ConfigurationError(f"bad depth range {self.depth_range}")
        if self.radius_range[0] <= 0 or self.radius_range[0] > self.radius_range[1]:
            raise ConfigurationError(f"bad radius range {self.radius_range}")
        if self.radius_range[1] * 4 > min(self.height, self.width):
            raise ConfigurationError("lesion radius too large for the image plane")
        if self.lesions_range[0] < 1 or self.lesions_range[0] > self.lesions_range[1]:
            raise ConfigurationError(f"bad lesion count range {self.lesions_range}")


@dataclass
class Volume:
    """One 3D grayscale image with labels and optional per-class truth mask.

    The mask is evaluation-only ground truth; training code never receives it.
    """

    voxels: np.ndarray            # (H, W, D) float32 in [0, 1]
    y_benign: int
    y_malignant: int
    group_id: int
    view_id: int
    mask: np.ndarray = None       # (H, W, D, 2) uint8, classes [benign, malignant]

    def validate(self):
        if self.voxels.ndim != 3 or self.voxels.shape[2] < 1:
            raise ValueError(f"voxels must be H x W x D, got {self.voxels.shape}")
        if self.voxels.min() < 0.0 or self.voxels.max() > 1.0:
            raise ValueError("voxel intensities must lie in [0, 1]")
        if self.mask is not None:
            for c, y in enumerate((self.y_benign, self.y_malignant)):
                has = bool(self.mask[..., c].any())
                if has != bool(y):
                    raise ValueError(
                        f"mask channel {c} inconsistent with label {y}"
                    )


def _smooth_noise(rng, shape, sigma):
    """Zero-mean, unit-ish-scale smooth random field."""
    n = ndimage.gaussian_filter(rng.standard_normal(shape), sigma=sigma)
    s = n.std()
    return n / s if s > 0 else n


def _render_lesion(voxels, mask_c, rng, spec, malignant):
    h, w, d = voxels.shape
    r = rng.uniform(*spec.radius_range)
    margin = int(np.ceil(r)) + 1
    cy = rng.uniform(margin, h - margin)
    cx = rng.uniform(margin, w - margin)
    cz = rng.uniform(0, d - 1) if d > 1 else 0.0
    # anisotropic axes; depth axis squashed so lesions span few slices
    ay, ax = rng.uniform(0.75, 1.3, size=2)
    az = spec.depth_squash

    yy, xx, zz = np.meshgrid(
        np.arange(h, dtype=np.float64),
        np.arange(w, dtype=np.float64),
        np.arange(d, dtype=np.float64),
        indexing="ij",
    )
    rho = np.sqrt(
        ((yy - cy) / ay) ** 2 + ((xx - cx) / ax) ** 2 + ((zz - cz) * az) ** 2
    )
    if malignant and spec.malignant_irregularity > 0:
        bump = _smooth_noise(rng, voxels.shape, sigma=2.0)
        rho = rho / np.clip(1.0 + spec.malignant_irregularity * bump, 0.4, None)
    inside = rho <= r
    contrast = spec.malignant_contrast if malignant else spec.benign_contrast
    profile = np.clip(1.0 - (rho / r) ** 2, 0.0, None)
    voxels += contrast * profile
    mask_c |= inside
    return inside.sum()


def _render_volume(rng, spec, y_benign, y_malignant):
    h, w = spec.height, spec.width
    d = int(rng.integers(spec.depth_range[0], spec.depth_range[1] + 1))
    voxels = 0.35 + spec.background_noise * _smooth_noise(rng, (h, w, d), sigma=4.0)
    mask = np.zeros((h, w, d, 2), dtype=bool)
    for c, y in enumerate((y_benign, y_malignant)):
        if not y:
            continue
        n_lesions = int(rng.integers(spec.lesions_range[0], spec.lesions_range[1] + 1))
        for _ in range(n_lesions):
            _render_lesion(voxels, mask[..., c], rng, spec, malignant=(c == 1))
    voxels = np.clip(voxels, 0.0, 1.0).astype(np.float32)
    return voxels, mask.astype(np.uint8)


def generate_dataset(spec, n_groups):
    """Generate ``2 * n_groups`` volumes (two views per group).

    Deterministic given ``spec.seed``: every view gets its own RNG stream
    derived from (seed, group, view), so any parallel schedule reproduces
    the sequential output.
    """
    spec.validate()
    if n_groups < 1:
        raise ConfigurationError("n_groups must be >= 1")
    label_rng = np.random.default_rng([spec.seed, 0xBEEF])
    volumes = []
    for g in range(n_groups):
        y_b = int(label_rng.random() < spec.benign_prevalence)
        y_m = int(label_rng.random() < spec.malignant_prevalence)
        for v in range(2):
            rng = np.random.default_rng([spec.seed, g, v])
            voxels, mask = _render_volume(rng, spec, y_b, y_m)
            volumes.append(
                Volume(
                    voxels=voxels,
                    y_benign=y_b,
                    y_malignant=y_m,
                    group_id=g,
                    view_id=v,
                    mask=mask if (y_b or y_m) else None,
                )
            )
    return volumes


def save_dataset(path, volumes, spec=None):
    arrays = {}
    entries = []
    for i, vol in enumerate(volumes):
        key = f"vol{i:05d}"
        arrays[f"{key}/voxels"] = vol.voxels.astype(np.float32)
        if vol.mask is not None:
            arrays[f"{key}/mask"] = vol.mask.astype(np.uint8)
        entries.append(
            {
                "y_benign": int(vol.y_benign),
                "y_malignant": int(vol.y_malignant),
                "group_id": int(vol.group_id),
                "view_id": int(vol.view_id),
                "has_mask": vol.mask is not None,
            }
        )
    meta = {"kind": "phantom-dataset", "volumes": entries}
    if spec is not None:
        meta["spec"] = {
            k: (list(v) if isinstance(v, tuple) else v)
            for k, v in vars(spec).items()
        }
    save_arrays(path, arrays, meta)


def load_dataset(path):
    meta, arrays = load_arrays(path)
    if meta.get("kind") != "phantom-dataset":
        raise FormatError(f"{path}: not a phantom dataset container")
    volumes = []
    for i, ent in enumerate(meta["volumes"]):
        key = f"vol{i:05d}"
        if f"{key}/voxels" not in arrays:
            raise FormatError(f"{path}: missing voxel record for '{key}'")
        volumes.append(
            Volume(
                voxels=arrays[f"{key}/voxels"],
                y_benign=ent["y_benign"],
                y_malignant=ent["y_malignant"],
                group_id=ent["group_id"],
                view_id=ent["view_id"],
                mask=arrays.get(f"{key}/mask") if ent["has_mask"] else None,
            )
        )
    return volumes


def spec_from_dict(d):
    """Build a PhantomSpec from a flat key/value mapping (config file)."""
    base = PhantomSpec()
    kwargs = {}
    for k, v in d.items():
        if not hasattr(base, k):
            raise ConfigurationError(f"unknown phantom spec key '{k}'")
        cur = getattr(base, k)
        if isinstance(cur, tuple):
            kwargs[k] = tuple(type(cur[0])(x) for x in v)
        else:
            kwargs[k] = type(cur)(v)
    return replace(base, **kwargs)
