"""Low-capacity slice-wise network producing per-class 3D saliency maps.

The backbone is a small strided conv stack with group normalization, applied
to every slice independently (slices go through as a batch, so there is no
cross-slice mixing by construction). A 1x1-conv segmentation layer with
ReLU(tanh(x)) nonlinearity turns the hidden grid into a two-class saliency
map; its weights start at a shared positive constant so that, at
initialization, any channel reacting to a salient structure raises the map
regardless of which channel it is.
"""

import math

import torch
import torch.nn as nn

from ..config import ConfigurationError


def relu_tanh(x):
    """max(0, tanh(x)) — maps reals into [0, 1), steepest near 0+."""
    if isinstance(x, torch.Tensor):
        return torch.relu(torch.tanh(x))
    return max(0.0, float(torch.tanh(torch.as_tensor(float(x)))))


class GlobalNetwork(nn.Module):
    """Strided conv stages (conv + group norm + ReLU), shared across slices."""

    def __init__(self, cfg):
        super().__init__()
        cfg.validate()
        self.cfg = cfg
        layers = []
        c_in = 1
        for width, stride in zip(cfg.widths, cfg.strides):
            layers += [
                nn.Conv2d(c_in, width, kernel_size=3, stride=stride, padding=1),
                nn.GroupNorm(cfg.norm_groups, width),
                nn.ReLU(inplace=True),
            ]
            c_in = width
        self.stages = nn.Sequential(*layers)
        self.out_channels = c_in

    def forward(self, volume):
        """(H, W, D) volume -> (h, w, D, c) hidden grid."""
        if not torch.isfinite(volume).all():
            raise ValueError("global backbone input contains non-finite values")
        slices = volume.permute(2, 0, 1).unsqueeze(1)  # (D, 1, H, W)
        hidden = self.stages(slices)                   # (D, c, h, w)
        return hidden.permute(2, 3, 0, 1)              # (h, w, D, c)


class SegmentationLayer(nn.Module):
    """1x1 conv from hidden channels to 2 class logits, then ReLU(tanh)."""

    def __init__(self, in_channels, init_weight):
        super().__init__()
        if init_weight <= 0:
            raise ConfigurationError("seg-layer init constant must be positive")
        self.proj = nn.Linear(in_channels, 2, bias=True)
        self.init_weight = init_weight
        self.reset_parameters()

    def reset_parameters(self):
        with torch.no_grad():
            self.proj.weight.fill_(self.init_weight)
            self.proj.bias.zero_()

    def forward(self, hidden):
        """(h, w, D, c) hidden grid -> (h, w, D, 2) saliency in [0, 1)."""
        if hidden.shape[-1] != self.proj.in_features:
            raise ValueError(
                f"hidden has {hidden.shape[-1]} channels, "
                f"segmentation layer expects {self.proj.in_features}"
            )
        return relu_tanh(self.proj(hidden))


def pooled_count(t, h, w):
    """Number of saliency values pooled for percentage `t` per slice.

    Round-half-up of t/100 * h * w, floored at 1; independent of depth by
    construction. Callers clamp at the total map size.
    """
    if t <= 0:
        raise ConfigurationError("pooling percentage must be positive")
    return max(1, math.floor(t / 100.0 * h * w + 0.5))


def aggregate(saliency, t):
    """Mean of the top t%-per-slice values of each class map.

    `saliency` is (h, w, D, 2); returns a length-2 tensor in [0, 1). Ties at
    the cutoff are resolved by lexicographic (d, i, j) order, matching the
    sort-based oracle used in tests.
    """
    h, w, d = saliency.shape[:3]
    n = min(pooled_count(t, h, w), h * w * d)
    # (d, i, j) lexicographic flattening; stable sort keeps first occurrences
    flat = saliency.permute(2, 0, 1, 3).reshape(-1, 2)
    order = torch.argsort(flat, dim=0, descending=True, stable=True)
    top = torch.gather(flat, 0, order[:n])
    return top.mean(dim=0)
