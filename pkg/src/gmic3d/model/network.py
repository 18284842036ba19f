"""End-to-end model: saliency, patch retrieval, attention, fused prediction."""

import torch
import torch.nn as nn

from ..roi.retrieval import extract_patches
from .global_net import GlobalNetwork, SegmentationLayer, aggregate
from .local_net import LocalNetwork, GatedAttention, LocalHead, fuse_predictions


class Gmic3d(nn.Module):
    def __init__(self, cfg):
        super().__init__()
        cfg.validate()
        self.cfg = cfg
        self.global_net = GlobalNetwork(cfg.global_backbone)
        self.seg_layer = SegmentationLayer(
            self.global_net.out_channels, cfg.init_weight
        )
        self.local_net = LocalNetwork(cfg.local_widths, cfg.embed_dim)
        self.attention = GatedAttention(cfg.embed_dim, cfg.attention_dim)
        self.local_head = LocalHead(cfg.embed_dim)

    def forward(self, voxels, rng=None):
        """(H, W, D) tensor -> dict of predictions and intermediates.

        Patch locations are recomputed from the current saliency map on every
        call and treated as non-differentiable indices; slice jitter applies
        only in training mode (requires `rng`).
        """
        hidden = self.global_net(voxels)             # (h, w, D, c)
        saliency = self.seg_layer(hidden)            # (h, w, D, 2)
        p_global = aggregate(saliency, self.cfg.pool_percent)

        patch_set = extract_patches(
            voxels.detach().cpu().numpy(),
            saliency.detach().cpu().numpy(),
            self.cfg,
            training=self.training,
            rng=rng,
        )
        patches = torch.stack(
            [
                voxels[loc.y : loc.y + loc.size, loc.x : loc.x + loc.size, loc.d]
                for loc in patch_set.locations
            ]
        )
        encodings = self.local_net(patches)
        alpha, z = self.attention(encodings)
        p_local = self.local_head(z)
        p_final = fuse_predictions(p_global, p_local)
        return {
            "saliency": saliency,
            "p_global": p_global,
            "p_local": p_local,
            "p_final": p_final,
            "alpha": alpha,
            "patch_set": patch_set,
        }
