"""Planar clutter-reaching simulator with burrow/excavate primitives and
tactile-triggered hybrid strategies."""

__version__ = "0.1.0"
