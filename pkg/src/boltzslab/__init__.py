"""Deterministic discrete-velocity solver and verification harness for slab
kinetic flows with truncated long-range collision kernels."""

__version__ = "0.1.0"
