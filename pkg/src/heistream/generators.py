"""Synthetic inputs for desk-scale experiments."""
from __future__ import annotations

import math

import numpy as np
from scipy.spatial import cKDTree

from .core import Graph

RGG_RADIUS_FACTOR = 0.55


def rgg_radius(n: int) -> float:
    return RGG_RADIUS_FACTOR * math.sqrt(math.log(n) / n)


def random_geometric(n: int, seed: int = 0, radius: float | None = None) -> Graph:
    """Random points in the unit square joined when closer than ``0.55 sqrt(ln n / n)``.

    Node ids follow a row-by-row sweep over radius-sized strips, so consecutive
    ids are spatially close.
    """
    r = rgg_radius(n) if radius is None else radius
    pts = np.random.default_rng(seed).random((n, 2))
    order = np.lexsort((pts[:, 0], np.floor(pts[:, 1] / r)))
    pts = pts[order]
    pairs = cKDTree(pts).query_pairs(r, output_type="ndarray")
    return Graph.from_edges(n, pairs)


def erdos_renyi(n: int, p: float, seed: int = 0) -> Graph:
    rng = np.random.default_rng(seed)
    chunks = []
    for u in range(n - 1):
        hits = np.flatnonzero(rng.random(n - u - 1) < p)
        if len(hits):
            chunks.append(np.stack([np.full(len(hits), u), hits + u + 1], axis=1))
    edges = np.concatenate(chunks) if chunks else np.empty((0, 2), dtype=np.int64)
    return Graph.from_edges(n, edges)


def grid(rows: int, cols: int) -> Graph:
    """4-neighbour lattice, row-major ids."""
    ids = np.arange(rows * cols).reshape(rows, cols)
    horiz = np.stack([ids[:, :-1].ravel(), ids[:, 1:].ravel()], axis=1)
    vert = np.stack([ids[:-1, :].ravel(), ids[1:, :].ravel()], axis=1)
    return Graph.from_edges(rows * cols, np.concatenate([horiz, vert]))
