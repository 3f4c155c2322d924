"""Tensor grids on the unit cube."""
import itertools

import numpy as np


def axis_points(resolution, extra=None):
    pts = np.linspace(0.0, 1.0, int(resolution))
    if extra is not None and len(extra):
        extra = np.clip(np.asarray(extra, dtype=float).ravel(), 0.0, 1.0)
        pts = np.union1d(pts, extra)
    return pts


def tensor_grid(d, resolution, axis_extra=None):
    """All points of the product grid; ``axis_extra[i]`` is merged into axis ``i``."""
    axes = [axis_points(resolution, None if axis_extra is None else axis_extra[i]) for i in range(d)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def dyadic_grid(d, level):
    """Points with every coordinate in {k 2^-level : k = 0..2^level}."""
    ax = np.arange(2**level + 1) / 2.0**level
    return np.array(list(itertools.product(ax, repeat=d)), dtype=float)


def iter_chunks(X, size=1 << 16):
    for start in range(0, X.shape[0], size):
        yield X[start:start + size]
