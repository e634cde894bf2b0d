"""Few-exemplar voxel detailization: learn from textured exemplar shapes to
upsample coarse occupancy grids 8x per axis into detailed, textured models."""

__version__ = "0.1.0"
