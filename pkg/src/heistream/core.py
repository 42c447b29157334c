"""Shared data types: CSR graphs, partition bookkeeping, run configuration, RNG streams."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numba
import numpy as np

ALGORITHMS = ("heistream", "fennel", "refennel", "ldg", "hashing")
MODEL_KINDS = ("basic", "extended")

# epsilon is stored as an integer count of 1/EPS_SCALE units
EPS_SCALE = 10_000

# named RNG streams; fixed ids so that adding a stream never shifts the others
_STREAM_IDS = {"assign": 1, "refine": 2, "ghost": 3, "hash": 4}


class ConfigError(ValueError):
    pass


class InvalidBlockError(ValueError):
    pass


def epsilon_units(epsilon: float) -> int:
    units = round(epsilon * EPS_SCALE)
    if epsilon < 0 or abs(units - epsilon * EPS_SCALE) > 1e-6:
        raise ConfigError(f"epsilon must be a non-negative multiple of 1/{EPS_SCALE}, got {epsilon!r}")
    return units


def compute_lmax(total_weight: int, k: int, epsilon: float) -> int:
    """Return ceil((1 + epsilon) * total_weight / k) in exact integer arithmetic."""
    if k < 1:
        raise ConfigError(f"k must be >= 1, got {k}")
    if total_weight < 0:
        raise ConfigError("total weight must be non-negative")
    num = (EPS_SCALE + epsilon_units(epsilon)) * int(total_weight)
    den = EPS_SCALE * k
    return -(-num // den)


def make_rng(seed: int, stream: str) -> np.random.Generator:
    """Independent PCG64 stream for one purpose (tie-breaking, label propagation, ...).

    Keeping purposes on separate streams means a component that draws more or
    fewer numbers cannot shift the draws seen by another.
    """
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), _STREAM_IDS[stream]])))


@numba.njit(cache=True)
def csr_from_coo(n, src, dst, wgt):
    """Build symmetric-as-given CSR arrays, merging duplicate (src, dst) pairs by weight sum.

    Self-loops are dropped. Neighbors keep first-occurrence order within a row.
    """
    m = src.shape[0]
    count = np.zeros(n + 1, dtype=np.int64)
    for e in range(m):
        count[src[e] + 1] += 1
    for v in range(n):
        count[v + 1] += count[v]
    pos = count[:-1].copy()
    tmp_dst = np.empty(m, dtype=np.int64)
    tmp_w = np.empty(m, dtype=np.int64)
    for e in range(m):
        s = src[e]
        tmp_dst[pos[s]] = dst[e]
        tmp_w[pos[s]] = wgt[e]
        pos[s] += 1

    xadj = np.zeros(n + 1, dtype=np.int64)
    adjncy = np.empty(m, dtype=np.int64)
    adjwgt = np.empty(m, dtype=np.int64)
    slot = np.full(n, -1, dtype=np.int64)
    out = 0
    for v in range(n):
        start = out
        for e in range(count[v], count[v + 1]):
            u = tmp_dst[e]
            if u == v:
                continue
            if slot[u] >= start:
                adjwgt[slot[u]] += tmp_w[e]
            else:
                slot[u] = out
                adjncy[out] = u
                adjwgt[out] = tmp_w[e]
                out += 1
        xadj[v + 1] = out
    return xadj, adjncy[:out].copy(), adjwgt[:out].copy()


@dataclass
class Graph:
    """Weighted undirected graph in compressed adjacency form.

    Every edge {u, v} is stored in both rows. ``adjwgt`` holds edge weights and
    ``vwgt`` node weights, all int64.
    """

    xadj: np.ndarray
    adjncy: np.ndarray
    adjwgt: np.ndarray
    vwgt: np.ndarray

    @property
    def n(self) -> int:
        return len(self.xadj) - 1

    @property
    def m(self) -> int:
        return len(self.adjncy) // 2

    @property
    def total_node_weight(self) -> int:
        return int(self.vwgt.sum())

    @property
    def total_edge_weight(self) -> int:
        return int(self.adjwgt.sum()) // 2

    def neighbors(self, v: int) -> tuple[np.ndarray, np.ndarray]:
        lo, hi = self.xadj[v], self.xadj[v + 1]
        return self.adjncy[lo:hi], self.adjwgt[lo:hi]

    def degree(self, v: int) -> int:
        return int(self.xadj[v + 1] - self.xadj[v])

    @classmethod
    def from_edges(cls, n, edges, weights=None, node_weights=None) -> "Graph":
        """Build from an undirected edge list; parallel edges merge, self-loops vanish."""
        edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        w = np.ones(len(edges), dtype=np.int64) if weights is None else np.asarray(weights, dtype=np.int64)
        if len(w) and w.min() <= 0:
            raise ValueError("edge weights must be positive")
        if len(edges) and (edges.min() < 0 or edges.max() >= n):
            raise ValueError("edge endpoint out of range")
        src = np.concatenate([edges[:, 0], edges[:, 1]])
        dst = np.concatenate([edges[:, 1], edges[:, 0]])
        xadj, adjncy, adjwgt = csr_from_coo(n, src, dst, np.concatenate([w, w]))
        vw = np.ones(n, dtype=np.int64) if node_weights is None else np.asarray(node_weights, dtype=np.int64).copy()
        if len(vw) != n or (n and vw.min() < 0):
            raise ValueError("node weights must be n non-negative integers")
        return cls(xadj, adjncy, adjwgt, vw)

    def edge_list(self) -> tuple[np.ndarray, np.ndarray]:
        """Each undirected edge once as (pairs with u < v, weights)."""
        src = np.repeat(np.arange(self.n, dtype=np.int64), np.diff(self.xadj))
        keep = src < self.adjncy
        return np.stack([src[keep], self.adjncy[keep]], axis=1), self.adjwgt[keep]

    def is_consistent(self) -> bool:
        """Full scan: symmetry with equal weights, no self-loops, no parallel edges."""
        src = np.repeat(np.arange(self.n, dtype=np.int64), np.diff(self.xadj))
        if np.any(src == self.adjncy) or np.any(self.adjwgt <= 0):
            return False
        fwd = np.stack([src, self.adjncy, self.adjwgt], axis=1)
        bwd = np.stack([self.adjncy, src, self.adjwgt], axis=1)
        fwd = fwd[np.lexsort((fwd[:, 1], fwd[:, 0]))]
        bwd = bwd[np.lexsort((bwd[:, 1], bwd[:, 0]))]
        if not np.array_equal(fwd, bwd):
            return False
        if len(fwd) > 1:
            dup = (fwd[1:, 0] == fwd[:-1, 0]) & (fwd[1:, 1] == fwd[:-1, 1])
            if dup.any():
                return False
        return True


@dataclass
class PartitionState:
    """Block assignment for all n stream nodes plus running block weights.

    ``assignment[v] == -1`` marks a node that has not been streamed yet.
    """

    k: int
    l_max: int
    assignment: np.ndarray
    block_weights: np.ndarray

    @classmethod
    def empty(cls, n: int, k: int, l_max: int) -> "PartitionState":
        return cls(k, l_max, np.full(n, -1, dtype=np.int64), np.zeros(k, dtype=np.int64))

    @property
    def n(self) -> int:
        return len(self.assignment)

    def assign_node(self, node: int, block: int, weight: int) -> None:
        if not 0 <= block < self.k:
            raise InvalidBlockError(f"block {block} outside [0, {self.k})")
        old = self.assignment[node]
        if old >= 0:
            self.block_weights[old] -= weight
        self.block_weights[block] += weight
        self.assignment[node] = block

    def assign_batch(self, first: int, blocks: np.ndarray, weights: np.ndarray) -> None:
        """Vectorised ``assign_node`` for a consecutive id range."""
        if len(blocks) and (blocks.min() < 0 or blocks.max() >= self.k):
            raise InvalidBlockError("batch assignment outside [0, k)")
        sl = slice(first, first + len(blocks))
        old = self.assignment[sl]
        prev = old >= 0
        np.subtract.at(self.block_weights, old[prev], weights[prev])
        np.add.at(self.block_weights, blocks, weights)
        self.assignment[sl] = blocks

    def is_complete(self) -> bool:
        return bool(np.all(self.assignment >= 0))


@dataclass(frozen=True)
class Config:
    k: int
    epsilon: float = 0.03
    buffer_size: int = 32768
    model_kind: str = "extended"
    passes: int = 1
    coarsening_rounds: int = 5
    local_search_rounds: int = 5
    x: int = 4
    alpha_tuning: float = 0.5
    gamma: float = 1.5
    use_approx_pow: bool = False
    seed: int = 0
    algorithm: str = "heistream"

    def __post_init__(self):
        if self.k < 1:
            raise ConfigError(f"k must be >= 1, got {self.k}")
        epsilon_units(self.epsilon)
        if self.buffer_size < 1:
            raise ConfigError("buffer size must be >= 1")
        if self.passes < 1:
            raise ConfigError("passes must be >= 1")
        if self.x < 1:
            raise ConfigError("x must be >= 1")
        if self.coarsening_rounds < 1 or self.local_search_rounds < 0:
            raise ConfigError("label propagation round counts out of range")
        if self.gamma <= 1 or self.alpha_tuning <= 0:
            raise ConfigError("gamma must exceed 1 and alpha tuning must be positive")
        if self.model_kind not in MODEL_KINDS:
            raise ConfigError(f"unknown model kind {self.model_kind!r}")
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(f"unknown algorithm {self.algorithm!r}")

    def replace(self, **changes) -> "Config":
        return dataclasses.replace(self, **changes)
