"""Multilevel partitioning of a model graph with fixed trailing nodes.

Every graph handled here keeps the model layout: the first ``n_movable`` ids
are free nodes, the remaining ``k`` ids are fixed nodes, fixed node ``j``
belonging to block ``j``. Contraction preserves that layout on every level.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numba
import numpy as np

from .core import Config, Graph, csr_from_coo
from .model import ModelGraph
from .objective import FennelParams, penalty, select_block

_NO_BLOCKS = np.empty(0, dtype=np.int64)


@dataclass
class Clustering:
    labels: np.ndarray  # cluster id per node; movable clusters first, fixed nodes last
    weights: np.ndarray
    count: int
    movable_count: int


@dataclass
class Hierarchy:
    graphs: list[Graph] = field(default_factory=list)
    movable: list[int] = field(default_factory=list)
    mappings: list[np.ndarray] = field(default_factory=list)  # mappings[l][v] = coarse id of v on level l+1
    blocks: list[np.ndarray] = field(default_factory=list)  # restream only: block per node per level

    @property
    def depth(self) -> int:
        return len(self.graphs)


@numba.njit(cache=True)
def _lp_cluster(xadj, adjncy, adjwgt, vwgt, n_mov, max_w, rounds, block, rng):
    n = xadj.shape[0] - 1
    labels = np.arange(n)
    cw = vwgt.copy()
    conn = np.zeros(n, dtype=np.int64)
    touched = np.empty(n, dtype=np.int64)
    constrained = block.shape[0] > 0
    for _ in range(rounds):
        moved = 0
        for v in rng.permutation(n_mov):
            own = labels[v]
            nt = 0
            for e in range(xadj[v], xadj[v + 1]):
                u = adjncy[e]
                if u >= n_mov:
                    continue
                c = labels[u]
                if conn[c] == 0:
                    touched[nt] = c
                    nt += 1
                conn[c] += adjwgt[e]
            best = own
            best_val = conn[own]
            ties = 0
            cv = vwgt[v]
            for i in range(nt):
                c = touched[i]
                if c == own:
                    continue
                if constrained and block[c] != block[v]:
                    continue
                if cw[c] + cv > max_w:
                    continue
                val = conn[c]
                if val > best_val:
                    best = c
                    best_val = val
                    ties = 1
                elif val == best_val and best != own:
                    ties += 1
                    if rng.integers(0, ties) == 0:
                        best = c
            for i in range(nt):
                conn[touched[i]] = 0
            if best != own:
                cw[own] -= cv
                cw[best] += cv
                labels[v] = best
                moved += 1
        if moved == 0:
            break
    return labels


@numba.njit(cache=True)
def _relabel(labels, n_mov):
    n = labels.shape[0]
    new = np.full(n, -1, dtype=np.int64)
    out = np.empty(n, dtype=np.int64)
    c = 0
    for v in range(n_mov):
        lab = labels[v]
        if new[lab] < 0:
            new[lab] = c
            c += 1
        out[v] = new[lab]
    for v in range(n_mov, n):
        out[v] = c + v - n_mov
    return out, c


@numba.njit(cache=True)
def _contract(xadj, adjncy, adjwgt, vwgt, labels, count):
    n = xadj.shape[0] - 1
    nnz = adjncy.shape[0]
    src = np.empty(nnz, dtype=np.int64)
    dst = np.empty(nnz, dtype=np.int64)
    wgt = np.empty(nnz, dtype=np.int64)
    cvw = np.zeros(count, dtype=np.int64)
    ne = 0
    for v in range(n):
        cv = labels[v]
        cvw[cv] += vwgt[v]
        for e in range(xadj[v], xadj[v + 1]):
            cu = labels[adjncy[e]]
            if cu != cv:
                src[ne] = cv
                dst[ne] = cu
                wgt[ne] = adjwgt[e]
                ne += 1
    cx, ca, cw = csr_from_coo(count, src[:ne], dst[:ne], wgt[:ne])
    return cx, ca, cw, cvw


@numba.njit(cache=True)
def _initial_partition(xadj, adjncy, adjwgt, vwgt, n_mov, k, l_max, coef, expo, approx, scale, rng):
    n = xadj.shape[0] - 1
    part = np.full(n, -1, dtype=np.int64)
    bw = np.zeros(k, dtype=np.int64)
    for j in range(k):
        part[n_mov + j] = j
        bw[j] = vwgt[n_mov + j]
    conn = np.zeros(k, dtype=np.int64)
    scores = np.empty(k, dtype=np.float64)
    feasible = np.empty(k, dtype=np.bool_)
    fallbacks = 0
    for v in range(n_mov):
        for e in range(xadj[v], xadj[v + 1]):
            p = part[adjncy[e]]
            if p >= 0:
                conn[p] += adjwgt[e]
        cv = vwgt[v]
        for j in range(k):
            scores[j] = conn[j] / scale - cv * penalty(bw[j], coef, expo, approx)
            feasible[j] = bw[j] + cv <= l_max
            conn[j] = 0
        blk, fell = select_block(scores, feasible, bw, rng)
        if fell:
            fallbacks += 1
        part[v] = blk
        bw[blk] += cv
    return part, bw, fallbacks


@numba.njit(cache=True)
def _local_search(xadj, adjncy, adjwgt, vwgt, n_mov, part, bw, l_max, coef, expo, approx, scale, rounds, rng):
    k = bw.shape[0]
    conn = np.zeros(k, dtype=np.int64)
    seen = np.zeros(k, dtype=np.bool_)
    touched = np.empty(k, dtype=np.int64)
    moves = 0
    min_gain = np.inf
    for _ in range(rounds):
        moved = 0
        for v in rng.permutation(n_mov):
            own = part[v]
            nt = 0
            for e in range(xadj[v], xadj[v + 1]):
                p = part[adjncy[e]]
                if not seen[p]:
                    seen[p] = True
                    touched[nt] = p
                    nt += 1
                conn[p] += adjwgt[e]
            cv = vwgt[v]
            # the node's own weight is taken out of its current block
            stay = conn[own] / scale - cv * penalty(bw[own] - cv, coef, expo, approx)
            best = -1
            best_val = stay
            ties = 0
            for i in range(nt):
                t = touched[i]
                if t == own or bw[t] + cv > l_max:
                    continue
                val = conn[t] / scale - cv * penalty(bw[t], coef, expo, approx)
                if val > best_val:
                    best = t
                    best_val = val
                    ties = 1
                elif best >= 0 and val == best_val:
                    ties += 1
                    if rng.integers(0, ties) == 0:
                        best = t
            for i in range(nt):
                conn[touched[i]] = 0
                seen[touched[i]] = False
            if best >= 0:
                gain = best_val - stay
                if gain < min_gain:
                    min_gain = gain
                bw[own] -= cv
                bw[best] += cv
                part[v] = best
                moved += 1
        moves += moved
        if moved == 0:
            break
    return moves, min_gain


def label_propagation_clustering(graph: Graph, n_movable: int, max_cluster_weight: int, rounds: int, rng,
                                 block: np.ndarray | None = None) -> Clustering:
    """Size-constrained label propagation over the free nodes.

    Fixed nodes (ids >= ``n_movable``) stay singletons and their edges are
    ignored. A node leaves its cluster only for a strictly stronger connection;
    ties among other clusters are broken at random. With ``block`` given,
    clusters never span two blocks.
    """
    blk = _NO_BLOCKS if block is None else block
    raw = _lp_cluster(graph.xadj, graph.adjncy, graph.adjwgt, graph.vwgt, n_movable, max_cluster_weight,
                      rounds, blk, rng)
    labels, c = _relabel(raw, n_movable)
    count = c + graph.n - n_movable
    weights = np.bincount(labels, weights=graph.vwgt, minlength=count).astype(np.int64)
    return Clustering(labels, weights, count, c)


def contract(graph: Graph, clustering: Clustering) -> tuple[Graph, np.ndarray]:
    """One coarse node per cluster; parallel edges merge by weight sum, internal edges vanish."""
    cx, ca, cw, cvw = _contract(graph.xadj, graph.adjncy, graph.adjwgt, graph.vwgt, clustering.labels,
                                clustering.count)
    return Graph(cx, ca, cw, cvw), clustering.labels


def is_small_enough(nodes: int, model_nodes: int, k: int, x: int) -> bool:
    """nodes <= floor(max(|B| / (2xk), xk)), in integer arithmetic."""
    return 2 * x * k * nodes <= model_nodes or nodes <= x * k


def coarsen(model: ModelGraph, cfg: Config, rng, max_cluster_weight: int, restream: bool = False) -> Hierarchy:
    graph = model.graph
    k = model.k
    h = Hierarchy([graph], [model.batch_node_count], [], [model.init_block] if restream else [])
    while not is_small_enough(graph.n, model.n, k, cfg.x):
        nm = h.movable[-1]
        block = h.blocks[-1] if restream else None
        cl = label_propagation_clustering(graph, nm, max_cluster_weight, cfg.coarsening_rounds, rng, block)
        if cl.count >= graph.n:
            break
        graph, mapping = contract(graph, cl)
        h.graphs.append(graph)
        h.movable.append(cl.movable_count)
        h.mappings.append(mapping)
        if restream:
            cblock = np.empty(cl.count, dtype=np.int64)
            cblock[mapping] = block
            h.blocks.append(cblock)
    return h


def initial_partition(graph: Graph, n_movable: int, params: FennelParams, rng, weight_scale: int = 1):
    """Greedy generalized-Fennel assignment of free nodes in ascending id order.

    Returns ``(assignment, block_weights, fallback_count)``.
    """
    k = graph.n - n_movable
    return _initial_partition(graph.xadj, graph.adjncy, graph.adjwgt, graph.vwgt, n_movable, k, params.l_max,
                              params.coef, params.exponent, params.use_approx_pow, float(weight_scale), rng)


def local_search(graph: Graph, assignment: np.ndarray, block_weights: np.ndarray, n_movable: int,
                 params: FennelParams, rounds: int, rng, weight_scale: int = 1):
    """Label propagation refinement toward neighboring blocks; updates arrays in place.

    Returns ``(moves, smallest accepted gain)``.
    """
    return _local_search(graph.xadj, graph.adjncy, graph.adjwgt, graph.vwgt, n_movable, assignment,
                         block_weights, params.l_max, params.coef, params.exponent, params.use_approx_pow,
                         float(weight_scale), rounds, rng)


def greedy_fits(total: int, weight: int, k: int, l_max: int) -> bool:
    """Whether a node of ``weight`` always finds room when ``total`` model weight is spread over k blocks.

    Before the node is placed at most ``total - weight`` is assigned, so the
    lightest block holds at most ``(total - weight) // k``.
    """
    return (total - weight) // k + weight <= l_max


def cluster_weight_bound(model: ModelGraph, l_max: int) -> int:
    """Largest cluster weight for which greedy assignment can never run out of room."""
    total = model.graph.total_node_weight
    lo, hi = 1, max(1, l_max)
    while lo < hi:
        mid = (lo + hi + 1) // 2
        if greedy_fits(total, mid, model.k, l_max):
            lo = mid
        else:
            hi = mid - 1
    return lo


def partition_model(model: ModelGraph, cfg: Config, params: FennelParams, rng_assign, rng_refine,
                    restream: bool = False, max_cluster_weight: int | None = None):
    """Coarsen, partition the coarsest level, refine on the way back up.

    Returns ``(block per batch node, fallback_count)``.
    """
    cap = cluster_weight_bound(model, params.l_max) if max_cluster_weight is None else max_cluster_weight
    h = coarsen(model, cfg, rng_refine, cap, restream)
    top = h.graphs[-1]
    k = model.k
    fallbacks = 0
    if restream:
        part = h.blocks[-1].copy()
        bw = np.bincount(part, weights=top.vwgt, minlength=k).astype(np.int64)
    else:
        part, bw, fallbacks = initial_partition(top, h.movable[-1], params, rng_assign, model.weight_scale)
    for lvl in range(h.depth - 1, -1, -1):
        if lvl < h.depth - 1:
            part = part[h.mappings[lvl]]
        local_search(h.graphs[lvl], part, bw, h.movable[lvl], params, cfg.local_search_rounds, rng_refine,
                     model.weight_scale)
    return part[:model.batch_node_count], fallbacks
