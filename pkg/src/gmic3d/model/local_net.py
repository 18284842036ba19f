"""High-capacity patch encoder with gated attention pooling.

Patches selected by the ROI retrieval stage are encoded independently into
S-vectors, weighted by a gated attention head, and mapped to per-class
probabilities with a logistic layer. The final model prediction is the
arithmetic mean of the global and local probabilities.
"""

import torch
import torch.nn as nn


class LocalNetwork(nn.Module):
    """Strided conv encoder (conv + batch norm + ReLU) ending in global
    average pooling to an S-vector.

    Batch statistics are only used in training mode; evaluation relies on
    running statistics so each patch encodes deterministically. When training
    is parallelized across workers the batch statistics must be synchronized
    (contract; single-process training satisfies it trivially).
    """

    def __init__(self, widths, embed_dim):
        super().__init__()
        layers = []
        c_in = 1
        for width in widths:
            layers += [
                nn.Conv2d(c_in, width, kernel_size=3, stride=2, padding=1),
                nn.BatchNorm2d(width),
                nn.ReLU(inplace=True),
            ]
            c_in = width
        layers += [
            nn.Conv2d(c_in, embed_dim, kernel_size=3, stride=1, padding=1),
            nn.BatchNorm2d(embed_dim),
            nn.ReLU(inplace=True),
            nn.AdaptiveAvgPool2d(1),
        ]
        self.encoder = nn.Sequential(*layers)
        self.embed_dim = embed_dim

    def forward(self, patches):
        """(K, h_c, w_c) patches -> (K, S) encodings."""
        if patches.ndim != 3:
            raise ValueError(f"expected (K, h_c, w_c) patches, got {patches.shape}")
        out = self.encoder(patches.unsqueeze(1))
        return out.flatten(1)


class GatedAttention(nn.Module):
    """Softmax weights over patch encodings via w^T(tanh(V h) * sigm(U h))."""

    def __init__(self, embed_dim, attention_dim):
        super().__init__()
        self.V = nn.Linear(embed_dim, attention_dim, bias=False)
        self.U = nn.Linear(embed_dim, attention_dim, bias=False)
        self.w = nn.Linear(attention_dim, 1, bias=False)

    def forward(self, encodings):
        """(K, S) encodings -> (alpha: (K,), z: (S,))."""
        gate = torch.tanh(self.V(encodings)) * torch.sigmoid(self.U(encodings))
        logits = self.w(gate).squeeze(-1)
        alpha = torch.softmax(logits, dim=0)  # max-subtracted internally
        z = alpha @ encodings
        return alpha, z


class LocalHead(nn.Module):
    """Per-class logistic readout of the attention-weighted representation."""

    def __init__(self, embed_dim):
        super().__init__()
        self.linear = nn.Linear(embed_dim, 2, bias=False)

    def forward(self, z):
        return torch.sigmoid(self.linear(z))


def fuse_predictions(p_global, p_local):
    """Elementwise arithmetic mean of the two module predictions."""
    return (p_global + p_local) / 2
