"""Partition quality (streamed) and aggregate statistics across runs."""
from __future__ import annotations

import logging
import math
from collections import defaultdict
from dataclasses import dataclass

import numpy as np

from .core import PartitionState

log = logging.getLogger(__name__)


@dataclass
class QuotientGraph:
    node_weights: np.ndarray
    edges: dict  # (i, j) with i < j -> total crossing weight

    @property
    def total_edge_weight(self) -> int:
        return sum(self.edges.values())


def _check(stream, assignment):
    if len(assignment) != stream.n:
        raise ValueError(f"assignment has {len(assignment)} entries for a graph with {stream.n} nodes")
    if stream.cursor:
        stream.rewind()


def edge_cut(stream, assignment) -> tuple[int, float]:
    """Stream the graph once; return (cut weight, cut / total edge weight)."""
    assignment = np.asarray(assignment, dtype=np.int64)
    _check(stream, assignment)
    cut = total = 0
    for batch in stream.batches():
        src = np.repeat(np.arange(batch.first, batch.end), np.diff(batch.xadj))
        # count each undirected edge from its lower endpoint
        lower = src < batch.adjncy
        w = batch.adjwgt[lower]
        total += int(w.sum())
        cut += int(w[assignment[src[lower]] != assignment[batch.adjncy[lower]]].sum())
    return cut, (cut / total if total else 0.0)


def quotient_graph(stream, assignment, k: int, node_weights=None) -> QuotientGraph:
    assignment = np.asarray(assignment, dtype=np.int64)
    _check(stream, assignment)
    bw = np.zeros(k, dtype=np.int64)
    edges: dict = defaultdict(int)
    for batch in stream.batches():
        np.add.at(bw, assignment[batch.first:batch.end], batch.vwgt)
        src = np.repeat(np.arange(batch.first, batch.end), np.diff(batch.xadj))
        a, b = assignment[src], assignment[batch.adjncy]
        sel = (src < batch.adjncy) & (a != b)
        for i, j, w in zip(a[sel].tolist(), b[sel].tolist(), batch.adjwgt[sel].tolist()):
            edges[(min(i, j), max(i, j))] += w
    return QuotientGraph(bw, dict(edges))


def balance(state: PartitionState) -> float:
    """Heaviest block over the average block weight."""
    total = int(state.block_weights.sum())
    if total == 0:
        return 1.0
    return float(state.block_weights.max()) * state.k / total


def geometric_mean(values) -> float:
    vals = np.asarray(list(values), dtype=np.float64)
    if len(vals) == 0:
        raise ValueError("geometric mean of no values")
    if np.any(vals <= 0):
        raise ValueError("geometric mean needs strictly positive values")
    return float(np.exp(np.mean(np.log(vals))))


def improvement(sigma_a: float, sigma_b: float) -> float:
    """Improvement of A over B in percent: (sigma_B / sigma_A - 1) * 100."""
    return (sigma_b / sigma_a - 1.0) * 100.0


def ratio(sigma_a: float, sigma_max: float) -> float:
    return sigma_a / sigma_max


def relative(sigma_a: float, sigma_b: float) -> float:
    return sigma_a / sigma_b


def performance_profile(table: dict, taus) -> dict:
    """Fraction of instances on which each algorithm is within ``tau`` times the best.

    ``table`` maps algorithm -> list of per-instance values (lower is better),
    all lists aligned by instance.
    """
    algos = list(table)
    vals = np.array([table[a] for a in algos], dtype=np.float64)
    if vals.size == 0:
        return {a: [] for a in algos}
    best = vals.min(axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        rel = np.where(best > 0, vals / np.where(best > 0, best, 1.0), np.where(vals == 0, 1.0, np.inf))
    return {a: [float(np.mean(rel[i] <= tau)) for tau in taus] for i, a in enumerate(algos)}


def profile_taus(table: dict, points: int = 50) -> list:
    """A tau grid from 1 up to the largest finite ratio in ``table``."""
    vals = np.array(list(table.values()), dtype=np.float64)
    best = vals.min(axis=0)
    ok = best > 0
    top = float((vals[:, ok] / best[ok]).max()) if ok.any() else 1.0
    return list(np.linspace(1.0, max(top, 1.0), points))


def aggregate(results: dict, baseline: str | None = None) -> dict:
    """Per-algorithm geometric means plus comparisons.

    ``results`` maps algorithm -> list of per-instance values aligned by
    instance. Instances where any algorithm scored 0 are left out of the
    geometric means (noted under ``"excluded"``).
    """
    algos = list(results)
    vals = np.array([results[a] for a in algos], dtype=np.float64)
    keep = np.all(vals > 0, axis=0)
    excluded = int((~keep).sum())
    if excluded:
        log.warning("excluding %d instance(s) with a zero value from the geometric mean", excluded)
    out: dict = {"excluded": excluded, "geometric_mean": {}, "arithmetic_mean": {}}
    for i, a in enumerate(algos):
        out["arithmetic_mean"][a] = float(vals[i].mean()) if vals.shape[1] else math.nan
        out["geometric_mean"][a] = geometric_mean(vals[i, keep]) if keep.any() else math.nan
    gm = out["geometric_mean"]
    worst = max(gm.values())
    out["ratio_vs_max"] = {a: ratio(gm[a], worst) for a in algos}
    if baseline is not None:
        out["improvement_vs"] = {"baseline": baseline,
                                 **{a: improvement(gm[a], gm[baseline]) for a in algos}}
    taus = profile_taus(results) if vals.shape[1] else []
    out["profile"] = {"tau": taus, **performance_profile(results, taus)}
    return out
