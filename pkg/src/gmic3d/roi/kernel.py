"""Kernel selection: compiled extension when built, NumPy fallback otherwise."""

try:
    from ._greedy import greedy_select

    HAVE_COMPILED_KERNEL = True
except ImportError:  # pragma: no cover - depends on the build
    from ._greedy_py import greedy_select

    HAVE_COMPILED_KERNEL = False

__all__ = ["greedy_select", "HAVE_COMPILED_KERNEL"]
