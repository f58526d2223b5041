"""Morphology-aware caption corpora and evaluation for blood-cell imagery."""

__version__ = "0.1.0"
