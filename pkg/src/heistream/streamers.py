"""Stream drivers: HeiStream (buffered, multilevel) and the one-pass baselines."""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numba
import numpy as np

from .core import Config, PartitionState, compute_lmax, make_rng
from .graph_io import GraphStream, RestreamUnsupportedError
from .metrics import balance
from .model import build_basic_model, build_extended_model, build_restream_model
from .multilevel import partition_model
from .objective import FennelParams, alpha, penalty, select_block

log = logging.getLogger(__name__)


@dataclass
class RunResult:
    algorithm: str
    partition: PartitionState
    edge_cut: int
    cut_fraction: float
    balance: float
    runtime_ms: dict
    fallback_count: int
    pass_cuts: list = field(default_factory=list)
    total_edge_weight: int = 0

    def record(self, graph: str, cfg: Config, delta: int) -> dict:
        """Flat results record (the JSON schema emitted by the CLI)."""
        return {
            "graph": graph,
            "algorithm": self.algorithm,
            "k": cfg.k,
            "seed": cfg.seed,
            "delta": delta,
            "passes": len(self.pass_cuts),
            "edge_cut": self.edge_cut,
            "cut_fraction": self.cut_fraction,
            "balance": self.balance,
            "runtime_ms": dict(self.runtime_ms),
            "fallback_count": self.fallback_count,
            "pass_cuts": list(self.pass_cuts),
        }


class _Clock:
    def __init__(self):
        self.ms = {"io": 0.0, "model": 0.0, "partition": 0.0}
        self._t0 = time.perf_counter()

    def add(self, phase, since):
        now = time.perf_counter()
        self.ms[phase] += (now - since) * 1e3
        return now

    def done(self):
        out = dict(self.ms)
        out["total"] = (time.perf_counter() - self._t0) * 1e3
        return out


@numba.njit(cache=True)
def _backward_cut(first, bxadj, badjncy, badjwgt, assignment):
    """Weight of cut edges from batch nodes to lower ids; each edge counted once per pass."""
    cut = 0
    half = 0
    for i in range(bxadj.shape[0] - 1):
        v = first + i
        bv = assignment[v]
        for e in range(bxadj[i], bxadj[i + 1]):
            u = badjncy[e]
            half += badjwgt[e]
            if u < v and assignment[u] != bv:
                cut += badjwgt[e]
    return cut, half


@numba.njit(cache=True)
def _greedy_batch(first, bxadj, badjncy, badjwgt, bvwgt, assignment, bw, l_max, coef, expo, approx, ldg,
                  restream, rng):
    k = bw.shape[0]
    conn = np.zeros(k, dtype=np.int64)
    scores = np.empty(k, dtype=np.float64)
    feasible = np.empty(k, dtype=np.bool_)
    fallbacks = 0
    for i in range(bvwgt.shape[0]):
        v = first + i
        cv = bvwgt[i]
        if restream:
            bw[assignment[v]] -= cv
            assignment[v] = -1
        for e in range(bxadj[i], bxadj[i + 1]):
            p = assignment[badjncy[e]]
            if p >= 0:
                conn[p] += badjwgt[e]
        for j in range(k):
            if ldg:
                scores[j] = conn[j] * (1.0 - bw[j] / l_max)
            else:
                scores[j] = conn[j] - cv * penalty(bw[j], coef, expo, approx)
            feasible[j] = bw[j] + cv <= l_max
            conn[j] = 0
        blk, fell = select_block(scores, feasible, bw, rng, ldg)
        if fell:
            fallbacks += 1
        assignment[v] = blk
        bw[blk] += cv
    return fallbacks


@numba.njit(cache=True)
def _mix64(x):
    x = (x ^ (x >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    x = (x ^ (x >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return x ^ (x >> np.uint64(31))


@numba.njit(cache=True)
def _hash_batch(first, bvwgt, assignment, bw, l_max, salt):
    k = bw.shape[0]
    fallbacks = 0
    for i in range(bvwgt.shape[0]):
        v = first + i
        cv = bvwgt[i]
        blk = np.int64(_mix64(np.uint64(v) ^ salt) % np.uint64(k))
        if bw[blk] + cv > l_max:
            blk = np.argmin(bw)
            if bw[blk] + cv > l_max:
                fallbacks += 1
        assignment[v] = blk
        bw[blk] += cv
    return fallbacks


def _setup(stream: GraphStream, cfg: Config):
    l_max = compute_lmax(stream.total_node_weight, cfg.k, cfg.epsilon)
    return PartitionState.empty(stream.n, cfg.k, l_max)


def _finish(name, state, clock, cuts, fallbacks, half_weight):
    total_w = half_weight // 2
    cut = cuts[-1] if cuts else 0
    if fallbacks:
        log.warning("%s: %d node(s) admitted to an overloaded block", name, fallbacks)
    return RunResult(name, state, int(cut), cut / total_w if total_w else 0.0, balance(state), clock.done(),
                     int(fallbacks), [int(c) for c in cuts], int(total_w))


def _passes(stream: GraphStream, passes: int):
    for p in range(passes):
        if p:
            stream.rewind()
        yield p


def run_heistream(stream: GraphStream, cfg: Config) -> RunResult:
    if cfg.passes > 1 and not stream.seekable:
        raise RestreamUnsupportedError("restreaming needs a seekable graph source")
    if stream.delta != cfg.buffer_size:
        cfg = cfg.replace(buffer_size=stream.delta)
    clock = _Clock()
    state = _setup(stream, cfg)
    params = FennelParams(alpha(max(stream.n, 1), stream.m, cfg.k, cfg.gamma), state.l_max, cfg.gamma,
                          cfg.alpha_tuning, cfg.use_approx_pow)
    rng_assign = make_rng(cfg.seed, "assign")
    rng_refine = make_rng(cfg.seed, "refine")
    rng_ghost = make_rng(cfg.seed, "ghost")
    cuts, fallbacks, half = [], 0, 0
    for p in _passes(stream, cfg.passes):
        cut = 0
        t = time.perf_counter()
        for batch in stream.batches():
            t = clock.add("io", t)
            if p > 0:
                model = build_restream_model(batch, state, cfg)
            elif cfg.model_kind == "extended":
                model = build_extended_model(batch, state, cfg, rng_ghost)
            else:
                model = build_basic_model(batch, state, cfg)
            t = clock.add("model", t)
            blocks, fb = partition_model(model, cfg, params, rng_assign, rng_refine, restream=p > 0)
            fallbacks += fb
            state.assign_batch(batch.first, blocks, batch.vwgt)
            c, h = _backward_cut(batch.first, batch.xadj, batch.adjncy, batch.adjwgt, state.assignment)
            cut += c
            if p == 0:
                half += h
            t = clock.add("partition", t)
        clock.add("io", t)
        cuts.append(cut)
    return _finish("heistream", state, clock, cuts, fallbacks, half)


def _run_greedy(name, stream: GraphStream, cfg: Config, passes: int, ldg: bool) -> RunResult:
    if passes > 1 and not stream.seekable:
        raise RestreamUnsupportedError("restreaming needs a seekable graph source")
    clock = _Clock()
    state = _setup(stream, cfg)
    # one-pass Fennel uses the untuned alpha
    params = FennelParams(alpha(max(stream.n, 1), stream.m, cfg.k, cfg.gamma), state.l_max, cfg.gamma, 1.0,
                          cfg.use_approx_pow)
    rng = make_rng(cfg.seed, "assign")
    cuts, fallbacks, half = [], 0, 0
    for p in _passes(stream, passes):
        cut = 0
        t = time.perf_counter()
        for batch in stream.batches():
            t = clock.add("io", t)
            fallbacks += _greedy_batch(batch.first, batch.xadj, batch.adjncy, batch.adjwgt, batch.vwgt,
                                       state.assignment, state.block_weights, state.l_max, params.coef,
                                       params.exponent, params.use_approx_pow, ldg, p > 0, rng)
            c, h = _backward_cut(batch.first, batch.xadj, batch.adjncy, batch.adjwgt, state.assignment)
            cut += c
            if p == 0:
                half += h
            t = clock.add("partition", t)
        clock.add("io", t)
        cuts.append(cut)
    return _finish(name, state, clock, cuts, fallbacks, half)


def run_fennel(stream: GraphStream, cfg: Config) -> RunResult:
    return _run_greedy("fennel", stream, cfg, 1, ldg=False)


def run_refennel(stream: GraphStream, cfg: Config) -> RunResult:
    """Fennel, then ``cfg.passes - 1`` restreams that rescore every node against the current block weights."""
    return _run_greedy("refennel", stream, cfg, cfg.passes, ldg=False)


def run_ldg(stream: GraphStream, cfg: Config) -> RunResult:
    return _run_greedy("ldg", stream, cfg, 1, ldg=True)


def run_hashing(stream: GraphStream, cfg: Config) -> RunResult:
    clock = _Clock()
    state = _setup(stream, cfg)
    salt = np.uint64(make_rng(cfg.seed, "hash").integers(0, 2**63))
    cut = fallbacks = half = 0
    t = time.perf_counter()
    for batch in stream.batches():
        t = clock.add("io", t)
        fallbacks += _hash_batch(batch.first, batch.vwgt, state.assignment, state.block_weights, state.l_max, salt)
        c, h = _backward_cut(batch.first, batch.xadj, batch.adjncy, batch.adjwgt, state.assignment)
        cut += c
        half += h
        t = clock.add("partition", t)
    clock.add("io", t)
    return _finish("hashing", state, clock, [cut], fallbacks, half)


RUNNERS = {
    "heistream": run_heistream,
    "fennel": run_fennel,
    "refennel": run_refennel,
    "ldg": run_ldg,
    "hashing": run_hashing,
}


def run(stream: GraphStream, cfg: Config) -> RunResult:
    if cfg.passes > 1 and cfg.algorithm in ("fennel", "ldg", "hashing"):
        log.warning("%s is a one-pass algorithm; ignoring passes=%d", cfg.algorithm, cfg.passes)
    return RUNNERS[cfg.algorithm](stream, cfg)
