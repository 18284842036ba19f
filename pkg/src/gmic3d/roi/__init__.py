from .kernel import greedy_select, HAVE_COMPILED_KERNEL
from .retrieval import (
    PatchLocation,
    PatchSet,
    combine_class_maps,
    retrieve_roi,
    crop_patch,
    extract_patches,
)

__all__ = [
    "greedy_select",
    "HAVE_COMPILED_KERNEL",
    "PatchLocation",
    "PatchSet",
    "combine_class_maps",
    "retrieve_roi",
    "crop_patch",
    "extract_patches",
]
