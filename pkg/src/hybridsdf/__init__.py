"""Hybrid jump-flooded / ray-traced signed distance fields for soft shadows."""
import os

# TBB on this platform is too old for numba; omp keeps parallel kernels quiet and deterministic.
os.environ.setdefault("NUMBA_THREADING_LAYER", "omp")

__version__ = "0.1.0"
