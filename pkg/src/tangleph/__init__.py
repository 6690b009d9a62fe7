"""Degree-1 persistent homology toolkit for open entangled curves.

Pipeline stages: backbone ingestion and interpolation (`geometry`), VR
filtrations and H1 diagrams with cycle representatives (`persistence`),
diagram Wasserstein metrics (`metrics`), persistence landscapes and
randomization tests (`landscapes`), embeddings / clustering / silhouettes
(`analysis`), and the orchestrating CLI (`cli`).
"""

__version__ = "0.1.0"

from . import errors  # noqa: F401
