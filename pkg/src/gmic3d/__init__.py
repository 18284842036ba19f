"""Saliency-guided two-stage classifier for large 3D volumes.

The package is organized around the stages of the pipeline:

- :mod:`gmic3d.phantom` — synthetic volumetric dataset with injected lesions
- :mod:`gmic3d.model` — global (slice-wise saliency) and local (patch) networks
- :mod:`gmic3d.roi` — greedy 3D region-of-interest retrieval
- :mod:`gmic3d.training` — loss, augmentation, optimization, TTA
- :mod:`gmic3d.metrics` — classification and segmentation metrics with bootstrap CIs
- :mod:`gmic3d.costmodel` — analytic MAC / activation-memory accounting
"""

__version__ = "0.1.0"
