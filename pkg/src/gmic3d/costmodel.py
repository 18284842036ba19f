"""Analytic multiply-accumulate and activation-memory accounting.

Counts are architecture-determined: convolution MACs are
C_in * C_out * k_h * k_w * H_out * W_out (per slice, summed over slices for
slice-wise networks), linear maps contribute fan_in * fan_out. The memory
model covers activations only (4-byte elements by default); parameters and
framework overheads are out of scope, so the estimate is a lower bound on
measured training peaks. Dense 2D and dense 3D baseline profiles mirror the
structure of standard residual networks.
"""

import math
from dataclasses import dataclass, field

import numpy as np

REFERENCE_COSTS = {
    # reference single-image costs at 96 slices (memory MB, GMACs), used to
    # reproduce the headline savings arithmetic
    "resnet18_2d": (171_031, 9_932),
    "resnet34_2d": (223_235, 20_056),
    "resnet18_3d": (100_903, 9_104),
    "resnet34_3d": (111_650, 12_192),
    "gmic3d": (22_219, 798),
}


@dataclass
class CostReport:
    model: str
    input_shape: tuple                 # (H, W, D)
    module_macs: dict                  # name -> MACs
    peak_memory_bytes: int
    config: dict = field(default_factory=dict)

    @property
    def total_macs(self):
        return sum(self.module_macs.values())

    def validate(self):
        if any(v < 0 for v in self.module_macs.values()):
            raise ValueError("negative MAC count")
        if self.peak_memory_bytes < 0:
            raise ValueError("negative memory estimate")


def conv2d_macs(c_in, c_out, k, h_out, w_out):
    return c_in * c_out * k * k * h_out * w_out


def conv3d_macs(c_in, c_out, k, h_out, w_out, d_out):
    return c_in * c_out * k * k * k * h_out * w_out * d_out


def linear_macs(fan_in, fan_out):
    return fan_in * fan_out


def _conv_out(size, k, stride, padding):
    return (size + 2 * padding - k) // stride + 1


def _stack_2d(h, w, c_in, stages):
    """Walk (width, k, stride, padding) conv stages; returns
    (macs, activation_sizes, out_shape)."""
    macs = 0
    activations = [h * w * c_in]
    for c_out, k, stride, padding in stages:
        h = _conv_out(h, k, stride, padding)
        w = _conv_out(w, k, stride, padding)
        macs += conv2d_macs(c_in, c_out, k, h, w)
        activations.append(h * w * c_out)
        c_in = c_out
    return macs, activations, (h, w, c_in)


def _peak_pairwise(activations, elem_bytes):
    """Peak bytes when layer input and output are simultaneously live."""
    return max(
        (a + b) * elem_bytes for a, b in zip(activations, activations[1:])
    )


def count_macs(cfg, input_shape, model="gmic3d", elem_bytes=4):
    """Analytic cost of one forward pass on an (H, W, D) input.

    `cfg` is a :class:`~gmic3d.config.ModelConfig`; for the dense baselines
    only the input shape matters.
    """
    height, width, depth = input_shape
    if model == "gmic3d":
        return _count_gmic3d(cfg, height, width, depth, elem_bytes)
    if model == "dense2d":
        return _count_dense(height, width, depth, elem_bytes, three_d=False)
    if model == "dense3d":
        return _count_dense(height, width, depth, elem_bytes, three_d=True)
    raise ValueError(f"unknown model kind '{model}'")


def _count_gmic3d(cfg, height, width, depth, elem_bytes):
    gb = cfg.global_backbone
    stages = [(wd, 3, st, 1) for wd, st in zip(gb.widths, gb.strides)]
    per_slice_macs, per_slice_act, (h, w, c) = _stack_2d(height, width, 1, stages)
    seg_macs_per_slice = conv2d_macs(c, 2, 1, h, w)
    global_macs = (per_slice_macs + seg_macs_per_slice) * depth

    local_stages = [(wd, 3, 2, 1) for wd in cfg.local_widths]
    local_stages.append((cfg.embed_dim, 3, 1, 1))
    per_patch_macs, per_patch_act, _ = _stack_2d(
        cfg.patch_size, cfg.patch_size, 1, local_stages
    )
    local_macs = per_patch_macs * cfg.n_patches

    attention_macs = cfg.n_patches * (
        2 * linear_macs(cfg.embed_dim, cfg.attention_dim)  # V and U
        + linear_macs(cfg.attention_dim, 1)                # w
        + cfg.embed_dim                                    # weighted sum term
    )
    head_macs = linear_macs(cfg.embed_dim, 2)

    saliency_elems = h * w * depth * 2
    # slice-sequential schedule: one slice's activations live at a time,
    # plus the accumulated 3D saliency map
    global_peak = _peak_pairwise(per_slice_act + [h * w * 2], elem_bytes)
    global_peak += saliency_elems * elem_bytes
    local_peak = (
        _peak_pairwise(per_patch_act, elem_bytes)
        + cfg.n_patches * cfg.embed_dim * elem_bytes
    )
    report = CostReport(
        model="gmic3d",
        input_shape=(height, width, depth),
        module_macs={
            "global": global_macs,
            "local": local_macs,
            "attention": attention_macs,
            "heads": head_macs,
        },
        peak_memory_bytes=max(global_peak, local_peak),
        config={"patch_size": cfg.patch_size, "n_patches": cfg.n_patches},
    )
    report.validate()
    return report


RESNET18_BLOCKS = ((64, 2), (128, 2), (256, 2), (512, 2))


def _count_dense(height, width, depth, elem_bytes, three_d):
    """Residual-network-shaped dense baseline (structural, not weight-exact)."""
    stages = [(64, 7, 2, 3)]
    c_in = 64
    for c_out, n_blocks in RESNET18_BLOCKS:
        for b in range(n_blocks):
            stride = 2 if (b == 0 and c_out != 64) else 1
            stages.append((c_out, 3, stride, 1))
            stages.append((c_out, 3, 1, 1))
            c_in = c_out
    if three_d:
        macs = 0
        h, w, d, c_in = height, width, depth, 1
        activations = [h * w * d * c_in]
        for c_out, k, stride, padding in stages:
            h = _conv_out(h, k, stride, padding)
            w = _conv_out(w, k, stride, padding)
            d = max(1, _conv_out(d, k, stride, padding))
            macs += conv3d_macs(c_in, c_out, k, h, w, d)
            activations.append(h * w * d * c_out)
            c_in = c_out
        macs += linear_macs(c_in, 2)
        peak = _peak_pairwise(activations, elem_bytes)
        name = "dense3d"
    else:
        per_slice, per_slice_act, (_, _, c) = _stack_2d(height, width, 1, stages)
        macs = per_slice * depth + linear_macs(c, 2)
        # all slices processed in one batch: activations scale with depth
        peak = _peak_pairwise([a * depth for a in per_slice_act], elem_bytes)
        name = "dense2d"
    report = CostReport(
        model=name,
        input_shape=(height, width, depth),
        module_macs={"backbone": macs},
        peak_memory_bytes=peak,
    )
    report.validate()
    return report


def extrapolate_linear(measurements, target_slices):
    """Least-squares line through (slices, value) points, evaluated at
    `target_slices`."""
    pts = list(measurements)
    slices = np.array([p[0] for p in pts], dtype=np.float64)
    values = np.array([p[1] for p in pts], dtype=np.float64)
    if len(np.unique(slices)) < 2:
        raise ValueError("need measurements at >= 2 distinct slice counts")
    slope, intercept = np.polyfit(slices, values, 1)
    return float(slope * target_slices + intercept)


def savings_percent(a, b):
    """100 * (1 - a/b): how much cheaper `a` is relative to `b`."""
    return 100.0 * (1.0 - a / b)


def compare(cost_a, cost_b):
    """Savings of `cost_a` relative to `cost_b` per metric."""
    if cost_a.input_shape != cost_b.input_shape:
        raise ValueError("cost reports must share an input shape")
    return {
        "macs_savings_percent": savings_percent(
            cost_a.total_macs, cost_b.total_macs
        ),
        "memory_savings_percent": savings_percent(
            cost_a.peak_memory_bytes, cost_b.peak_memory_bytes
        ),
    }


def local_pixel_fraction(patch_size, n_patches, image_hw, depth):
    """Fraction of input pixels the local module actually reads."""
    height, width = image_hw
    return patch_size * patch_size * n_patches / (height * width * depth)
