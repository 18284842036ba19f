"""Greedy 3D region-of-interest retrieval.

Per-class saliency maps are min-max normalized over the whole 3D map and
summed into a single criterion map. K square windows are then selected
greedily, each maximizing the windowed sum on a single slice; every pick
zeroes its footprint across +-zeta neighboring slices so later picks cannot
re-crop near-duplicate content. During training the slice index of each
returned patch is resampled uniformly within the same +-zeta neighborhood
as augmentation (the suppression itself always uses the deterministic pick).
"""

import math
from dataclasses import dataclass

import numpy as np

from ..config import ConfigurationError
from .kernel import greedy_select


@dataclass(frozen=True)
class PatchLocation:
    """Top-left corner (x, y) in full-resolution pixels, slice d, square side."""

    x: int
    y: int
    d: int
    size: int

    def validate(self, height, width, depth):
        if not (0 <= self.x <= width - self.size):
            raise ValueError(f"patch x={self.x} outside [0, {width - self.size}]")
        if not (0 <= self.y <= height - self.size):
            raise ValueError(f"patch y={self.y} outside [0, {height - self.size}]")
        if not (0 <= self.d < depth):
            raise ValueError(f"patch slice {self.d} outside [0, {depth})")


@dataclass
class PatchSet:
    """Ordered patch locations plus cropped 2D sub-images.

    `grid_picks` holds the deterministic (d, i, j) saliency-grid picks before
    slice jitter; the exclusion invariant is stated on these.
    """

    locations: list
    patches: list
    grid_picks: np.ndarray
    scores: np.ndarray


def combine_class_maps(saliency):
    """(h, w, D, 2) saliency -> (h, w, D) criterion map in [0, 2].

    Each class map is min-max normalized over the full 3D map, then the two
    are summed. A constant class map normalizes to all zeros (it carries no
    localization signal).
    """
    a = np.asarray(saliency, dtype=np.float64)
    combined = np.zeros(a.shape[:3], dtype=np.float64)
    for c in range(a.shape[3]):
        amin, amax = a[..., c].min(), a[..., c].max()
        if amax > amin:
            combined += (a[..., c] - amin) / (amax - amin)
    return combined


def _grid_window(patch_size, downsample):
    if patch_size % downsample != 0:
        raise ConfigurationError(
            f"patch size {patch_size} must be a multiple of downsample {downsample}"
        )
    return patch_size // downsample


def retrieve_roi(
    saliency, k, zeta, patch_size, downsample, image_hw, training=False, rng=None
):
    """Run the greedy retrieval on a (h, w, D, 2) saliency map.

    Returns a :class:`PatchSet` without cropped patches (use
    :func:`extract_patches` for the full pipeline). `zeta` may be
    ``math.inf`` to suppress across all slices.
    """
    if k < 1:
        raise ConfigurationError("k must be >= 1")
    if zeta < 0:
        raise ConfigurationError("zeta must be >= 0")
    a_star = combine_class_maps(saliency)
    h, w, depth = a_star.shape
    win = _grid_window(patch_size, downsample)
    if win > h or win > w:
        raise ConfigurationError(
            f"window {win}x{win} does not fit inside a {h}x{w} saliency slice"
        )
    zeta_i = depth if math.isinf(zeta) else int(zeta)
    picks, scores = greedy_select(
        a_star.transpose(2, 0, 1), win, win, int(k), zeta_i
    )

    height, width = image_hw
    locations = []
    for d, i, j in picks:
        d_out = int(d)
        if training and depth > 1:
            if rng is None:
                raise ValueError("training retrieval requires an rng for jitter")
            lo = max(0, d_out - zeta_i)
            hi = min(depth - 1, d_out + zeta_i)
            d_out = int(rng.integers(lo, hi + 1))
        x = min(int(j) * downsample, width - patch_size)
        y = min(int(i) * downsample, height - patch_size)
        loc = PatchLocation(x=x, y=y, d=d_out, size=patch_size)
        loc.validate(height, width, depth)
        locations.append(loc)
    return PatchSet(locations=locations, patches=[], grid_picks=picks, scores=scores)


def crop_patch(voxels, loc):
    """Exact pixel copy of the square patch at `loc` from an (H, W, D) volume."""
    loc.validate(*voxels.shape)
    return voxels[loc.y : loc.y + loc.size, loc.x : loc.x + loc.size, loc.d].copy()


def extract_patches(voxels, saliency, cfg, training=False, rng=None):
    """Saliency-driven patch retrieval + cropping for one volume."""
    patch_set = retrieve_roi(
        saliency,
        k=cfg.n_patches,
        zeta=cfg.zeta,
        patch_size=cfg.patch_size,
        downsample=cfg.global_backbone.downsample,
        image_hw=voxels.shape[:2],
        training=training,
        rng=rng,
    )
    patch_set.patches = [crop_patch(voxels, loc) for loc in patch_set.locations]
    return patch_set
