"""Per-batch model graph: batch nodes first, then one fixed node per block.

Layout for batch i (1-based) of b nodes: local ids 0..b-1 are the batch nodes in
stream order (global id = local + (i-1)*delta), local ids b..b+k-1 stand for
blocks 0..k-1.
"""
from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

from .core import Config, Graph, PartitionState, csr_from_coo
from .graph_io import Batch

BASIC, EXTENDED, RESTREAM = 0, 1, 2


# placeholder generator for modes that never draw
_NO_DRAWS = np.random.default_rng(0)


class NotAStreamNodeError(ValueError):
    pass


class ModelBuildError(RuntimeError):
    pass


@dataclass
class ModelGraph:
    graph: Graph
    batch_node_count: int
    k: int
    batch_index: int
    delta: int
    ghost_mass: np.ndarray
    weight_scale: int
    init_block: np.ndarray  # -1 for free batch nodes; block id for artificial / restreamed nodes
    kind: int = BASIC

    @property
    def first(self) -> int:
        return (self.batch_index - 1) * self.delta

    @property
    def n(self) -> int:
        return self.graph.n

    def is_artificial(self, local_id: int) -> bool:
        return local_id >= self.batch_node_count

    def local_to_global(self, local_id: int) -> int:
        if not 0 <= local_id < self.batch_node_count:
            raise NotAStreamNodeError(f"local id {local_id} is not a batch node")
        return local_to_global(self.batch_index, local_id, self.delta)


def local_to_global(batch_index: int, local_id: int, delta: int) -> int:
    return local_id + (batch_index - 1) * delta


def global_to_local(batch_index: int, global_id: int, delta: int) -> int:
    local = global_id - (batch_index - 1) * delta
    if not 0 <= local < delta:
        raise NotAStreamNodeError(f"global id {global_id} is not in batch {batch_index}")
    return local


@numba.njit(cache=True)
def _build(first, k, bxadj, badjncy, badjwgt, bvwgt, assignment, block_weights, l_max, mode, rng):
    b = bvwgt.shape[0]
    end = first + b
    scale = 2 if mode == EXTENDED else 1
    nnz = bxadj[b]
    src = np.empty(2 * nnz, dtype=np.int64)
    dst = np.empty(2 * nnz, dtype=np.int64)
    wgt = np.empty(2 * nnz, dtype=np.int64)
    ne = 0
    g_id = np.empty(nnz, dtype=np.int64)
    g_u = np.empty(nnz, dtype=np.int64)
    g_w = np.empty(nnz, dtype=np.int64)
    ng = 0
    bad = -1
    for lu in range(b):
        for e in range(bxadj[lu], bxadj[lu + 1]):
            g = badjncy[e]
            w = badjwgt[e]
            if first <= g < end:
                src[ne] = lu
                dst[ne] = g - first
                wgt[ne] = w * scale
                ne += 1
            elif g < first or mode == RESTREAM:
                blk = assignment[g]
                if blk < 0:
                    bad = g
                    continue
                a = b + blk
                src[ne] = lu
                dst[ne] = a
                wgt[ne] = w * scale
                src[ne + 1] = a
                dst[ne + 1] = lu
                wgt[ne + 1] = w * scale
                ne += 2
            elif mode == EXTENDED:
                g_id[ng] = g
                g_u[ng] = lu
                g_w[ng] = w
                ng += 1

    ghost_mass = np.zeros(b, dtype=np.int64)
    total = bvwgt.sum() + block_weights.sum()
    wmax = bvwgt.max() if b > 0 else 0
    if ng > 0:
        order = np.argsort(g_id[:ng], kind="mergesort")
        i = 0
        while i < ng:
            gid = g_id[order[i]]
            j = i
            while j < ng and g_id[order[j]] == gid:
                j += 1
            h = i
            if j - i > 1:
                h = i + rng.integers(0, j - i)
            host = g_u[order[h]]
            # ghost mass only while every free node still fits greedily (see greedy_fits)
            hw = bvwgt[host] + ghost_mass[host] + 1
            w2 = max(wmax, hw)
            if (total + 1 - w2) // k + w2 <= l_max:
                ghost_mass[host] += 1
                total += 1
                wmax = w2
            for t in range(i, j):
                if t == h:
                    continue
                u = g_u[order[t]]
                src[ne] = u
                dst[ne] = host
                wgt[ne] = g_w[order[t]]
                src[ne + 1] = host
                dst[ne + 1] = u
                wgt[ne + 1] = g_w[order[t]]
                ne += 2
            i = j

    xadj, adjncy, adjwgt = csr_from_coo(b + k, src[:ne], dst[:ne], wgt[:ne])
    vwgt = np.empty(b + k, dtype=np.int64)
    init = np.full(b + k, -1, dtype=np.int64)
    for j in range(k):
        vwgt[b + j] = block_weights[j]
        init[b + j] = j
    for lu in range(b):
        vwgt[lu] = bvwgt[lu] + ghost_mass[lu]
        if mode == RESTREAM:
            blk = assignment[first + lu]
            if blk < 0:
                bad = first + lu
                continue
            init[lu] = blk
            vwgt[b + blk] -= bvwgt[lu]
    return xadj, adjncy, adjwgt, vwgt, ghost_mass, init, scale, bad


def _make(batch: Batch, state: PartitionState, cfg: Config, mode: int, rng) -> ModelGraph:
    if rng is None:
        rng = _NO_DRAWS
    xadj, adjncy, adjwgt, vwgt, ghost, init, scale, bad = _build(
        batch.first, state.k, batch.xadj, batch.adjncy, batch.adjwgt, batch.vwgt,
        state.assignment, state.block_weights, state.l_max, mode, rng)
    if bad >= 0:
        if mode == RESTREAM:
            raise ModelBuildError(f"restream model needs every node assigned; node {bad} is not")
        raise ModelBuildError(f"node {bad} precedes batch starting at {batch.first} but is unassigned")
    delta = cfg.buffer_size
    if batch.first % delta:
        raise ModelBuildError("batch does not start on a multiple of the buffer size")
    return ModelGraph(Graph(xadj, adjncy, adjwgt, vwgt), len(batch), state.k, batch.first // delta + 1, delta,
                      ghost, int(scale), init, mode)


def build_basic_model(batch: Batch, state: PartitionState, cfg: Config) -> ModelGraph:
    """Batch-induced subgraph plus block nodes; edges to future nodes are dropped."""
    return _make(batch, state, cfg, BASIC, None)


def build_extended_model(batch: Batch, state: PartitionState, cfg: Config, rng) -> ModelGraph:
    """Basic model with every future neighbor contracted into a random batch neighbor.

    Ghost-derived edges carry half the weight of regular edges, realised by
    doubling all regular edge weights (``weight_scale == 2``). Each ghost adds
    weight 1 to its host unless that would leave the model too heavy for a
    greedy assignment to fit under L_max; such ghosts keep their edges but
    add no weight.
    """
    return _make(batch, state, cfg, EXTENDED, rng)


def build_restream_model(batch: Batch, state: PartitionState, cfg: Config) -> ModelGraph:
    """Model for passes >= 2: block nodes stand for every node outside this batch."""
    return _make(batch, state, cfg, RESTREAM, None)
