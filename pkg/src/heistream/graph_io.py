"""METIS graph streaming, whole-graph reading/writing, and partition files.

Node ids are 1-based in files and 0-based everywhere else.
"""
from __future__ import annotations

import io
import logging
import os
import sys
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .core import Graph, PartitionState, csr_from_coo

log = logging.getLogger(__name__)

_FORMATS = {"": (False, False), "0": (False, False), "1": (True, False), "10": (False, True), "11": (True, True)}


class GraphFormatError(ValueError):
    def __init__(self, msg, lineno=None):
        self.lineno = lineno
        super().__init__(f"line {lineno}: {msg}" if lineno is not None else msg)


class TruncatedStreamError(GraphFormatError):
    pass


class RestreamUnsupportedError(RuntimeError):
    pass


@dataclass
class Batch:
    """``delta`` consecutive stream nodes with their full adjacency (global ids)."""

    first: int
    xadj: np.ndarray
    adjncy: np.ndarray
    adjwgt: np.ndarray
    vwgt: np.ndarray

    def __len__(self) -> int:
        return len(self.vwgt)

    @property
    def end(self) -> int:
        return self.first + len(self.vwgt)

    def __iter__(self) -> Iterator[tuple[int, int, list[tuple[int, int]]]]:
        for i in range(len(self)):
            lo, hi = self.xadj[i], self.xadj[i + 1]
            adj = list(zip(self.adjncy[lo:hi].tolist(), self.adjwgt[lo:hi].tolist()))
            yield self.first + i, int(self.vwgt[i]), adj


def _parse_header(tokens, lineno):
    if len(tokens) < 2 or len(tokens) > 4:
        raise GraphFormatError("header must be 'n m [fmt [ncon]]'", lineno)
    try:
        n, m = int(tokens[0]), int(tokens[1])
    except ValueError:
        raise GraphFormatError("non-integer n or m in header", lineno) from None
    if n < 0 or m < 0:
        raise GraphFormatError("negative n or m in header", lineno)
    fmt = tokens[2].lstrip("0") if len(tokens) > 2 else ""
    fmt = fmt or ("0" if len(tokens) > 2 else "")
    if fmt not in _FORMATS:
        raise GraphFormatError(f"unsupported fmt {tokens[2]!r}", lineno)
    if len(tokens) == 4 and tokens[3] != "1":
        raise GraphFormatError("multi-constraint node weights are not supported", lineno)
    return n, m, _FORMATS[fmt]


class GraphStream:
    """Sequential reader yielding batches of ``delta`` nodes in file order.

    Holds one batch of adjacency at a time. Seekable sources can be rewound
    after a complete pass for restreaming.
    """

    def __init__(self, fh, delta: int, name: str = "<stream>", total_node_weight: int | None = None):
        if delta < 1:
            raise ValueError("delta must be >= 1")
        self._fh = fh
        self.name = name
        self.delta = delta
        self.lineno = 0
        header = self._next_content_line()
        if header is None:
            raise GraphFormatError("missing header", self.lineno)
        self.n, self.m, (self.has_edge_weights, self.has_node_weights) = _parse_header(header.split(), self.lineno)
        self._data_offset = fh.tell() if self.seekable else None
        self._data_lineno = self.lineno
        self.cursor = 0
        self.pass_index = 1
        self._halfedges = 0
        if self.has_node_weights:
            self.total_node_weight = total_node_weight if total_node_weight is not None else self._scan_weights()
        else:
            self.total_node_weight = self.n

    @property
    def seekable(self) -> bool:
        try:
            return self._fh.seekable()
        except (AttributeError, ValueError):
            return False

    @property
    def num_batches(self) -> int:
        return -(-self.n // self.delta) if self.n else 0

    @property
    def at_end_of_pass(self) -> bool:
        return self.cursor >= self.n

    def _next_content_line(self):
        while True:
            line = self._fh.readline()
            if not line:
                return None
            self.lineno += 1
            if not line.startswith("%"):
                return line

    def _scan_weights(self) -> int:
        if not self.seekable:
            raise RestreamUnsupportedError("node-weighted input needs a seekable source or an explicit total weight")
        total = 0
        for _ in range(self.n):
            line = self._next_content_line()
            if line is None:
                raise TruncatedStreamError(f"expected {self.n} adjacency lines", self.lineno)
            tok = line.split()
            total += int(tok[0]) if tok else 0
        self._reset()
        return total

    def _reset(self):
        self._fh.seek(self._data_offset)
        self.lineno = self._data_lineno
        self.cursor = 0
        self._halfedges = 0

    def next_batch(self) -> Batch | None:
        """Next ``min(delta, remaining)`` nodes, or ``None`` at end of pass."""
        if self.cursor >= self.n:
            return None
        first = self.cursor
        count = min(self.delta, self.n - first)
        n = self.n
        ew, nw = self.has_edge_weights, self.has_node_weights
        step = 2 if ew else 1
        xadj = [0] * (count + 1)
        adjncy: list[int] = []
        adjwgt: list[int] = []
        vwgt = [1] * count
        for i in range(count):
            line = self._next_content_line()
            if line is None:
                raise TruncatedStreamError(f"expected {n} adjacency lines, stream ended after {first + i}", self.lineno)
            try:
                tok = list(map(int, line.split()))
            except ValueError:
                raise GraphFormatError("non-integer token", self.lineno) from None
            if nw:
                if not tok:
                    raise GraphFormatError("missing node weight", self.lineno)
                vwgt[i] = tok[0]
                tok = tok[1:]
            if ew and len(tok) % 2:
                raise GraphFormatError("neighbor without edge weight", self.lineno)
            nbrs = tok[::step]
            wts = tok[1::2] if ew else [1] * len(nbrs)
            v1 = first + i + 1
            if nbrs and (min(nbrs) < 1 or max(nbrs) > n):
                raise GraphFormatError(f"neighbor id out of range [1, {n}]", self.lineno)
            if v1 in nbrs or len(set(nbrs)) != len(nbrs):
                nbrs, wts = self._clean(v1, nbrs, wts)
            adjncy.extend(nbrs)
            adjwgt.extend(wts)
            xadj[i + 1] = len(adjncy)
        self.cursor += count
        self._halfedges += len(adjncy)
        if self.cursor == n and self._halfedges != 2 * self.m:
            log.warning("%s: header announces %d edges, adjacency holds %d half-edges", self.name, self.m, self._halfedges)
        ids = np.asarray(adjncy, dtype=np.int64)
        ids -= 1
        return Batch(first, np.asarray(xadj, dtype=np.int64), ids,
                     np.asarray(adjwgt, dtype=np.int64), np.asarray(vwgt, dtype=np.int64))

    def _clean(self, v1, nbrs, wts):
        merged: dict[int, int] = {}
        for u, w in zip(nbrs, wts):
            if u == v1:
                log.warning("%s line %d: dropping self-loop on node %d", self.name, self.lineno, v1)
                continue
            merged[u] = merged.get(u, 0) + w
        return list(merged), list(merged.values())

    def batches(self) -> Iterator[Batch]:
        while (b := self.next_batch()) is not None:
            yield b

    def rewind(self) -> "GraphStream":
        if self.cursor < self.n:
            raise RestreamUnsupportedError("rewind before the end of the pass")
        if not self.seekable:
            raise RestreamUnsupportedError(f"{self.name} is not seekable")
        self._reset()
        self.pass_index += 1
        return self

    def close(self):
        if self._fh is not sys.stdin:
            self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def open_stream(path, delta: int, total_node_weight: int | None = None) -> GraphStream:
    """Open a METIS file (``"-"`` reads stdin, which cannot be restreamed)."""
    if isinstance(path, io.IOBase):
        return GraphStream(path, delta, getattr(path, "name", "<stream>"), total_node_weight)
    if str(path) == "-":
        return GraphStream(sys.stdin, delta, "<stdin>", total_node_weight)
    return GraphStream(open(path, "r"), delta, os.fspath(path), total_node_weight)


def read_metis(path) -> Graph:
    """Parse a whole METIS file into memory (no batching)."""
    with open(path) as fh:
        lines = fh.read().split("\n")
    content = [(i + 1, ln) for i, ln in enumerate(lines) if not ln.startswith("%")]
    if not content:
        raise GraphFormatError("missing header")
    hl, header = content[0]
    n, m, (ew, nw) = _parse_header(header.split(), hl)
    body = content[1:1 + n]
    if len(body) < n:
        raise TruncatedStreamError(f"expected {n} adjacency lines, found {len(body)}")
    src, dst, wts, vw = [], [], [], []
    for v, (lineno, ln) in enumerate(body):
        tok = [int(t) for t in ln.split()]
        if nw:
            vw.append(tok.pop(0))
        if ew:
            pairs = list(zip(tok[::2], tok[1::2]))
        else:
            pairs = [(u, 1) for u in tok]
        for u, w in pairs:
            if not 1 <= u <= n:
                raise GraphFormatError("neighbor id out of range", lineno)
            src.append(v)
            dst.append(u - 1)
            wts.append(w)
    xadj, adjncy, adjwgt = csr_from_coo(n, np.array(src, dtype=np.int64), np.array(dst, dtype=np.int64),
                                        np.array(wts, dtype=np.int64))
    vwgt = np.array(vw, dtype=np.int64) if nw else np.ones(n, dtype=np.int64)
    return Graph(xadj, adjncy, adjwgt, vwgt)


def write_metis(graph: Graph, path) -> None:
    ew = bool(np.any(graph.adjwgt != 1))
    nw = bool(np.any(graph.vwgt != 1))
    fmt = {(False, False): "", (True, False): " 1", (False, True): " 10", (True, True): " 11"}[(ew, nw)]
    ids = (graph.adjncy + 1).tolist()
    wts = graph.adjwgt.tolist()
    xadj = graph.xadj.tolist()
    with open(path, "w") as fh:
        fh.write(f"{graph.n} {graph.m}{fmt}\n")
        buf = []
        for v in range(graph.n):
            lo, hi = xadj[v], xadj[v + 1]
            if ew:
                toks = [f"{u} {w}" for u, w in zip(ids[lo:hi], wts[lo:hi])]
            else:
                toks = map(str, ids[lo:hi])
            row = " ".join(toks)
            if nw:
                row = f"{graph.vwgt[v]} {row}".rstrip()
            buf.append(row)
            if len(buf) >= 65536:
                fh.write("\n".join(buf) + "\n")
                buf.clear()
        if buf:
            fh.write("\n".join(buf) + "\n")


def write_partition(state: PartitionState, path) -> None:
    if not state.is_complete():
        missing = int(np.argmin(state.assignment >= 0))
        raise ValueError(f"node {missing} is unassigned")
    with open(path, "w") as fh:
        fh.write("\n".join(map(str, state.assignment.tolist())))
        if state.n:
            fh.write("\n")


def load_partition(path, n: int, k: int | None = None) -> np.ndarray:
    with open(path) as fh:
        lines = fh.read().split()
    if len(lines) != n:
        raise TruncatedStreamError(f"partition file has {len(lines)} entries, expected {n}")
    try:
        part = np.array([int(t) for t in lines], dtype=np.int64)
    except ValueError:
        raise GraphFormatError("non-integer block id in partition file") from None
    if n and (part.min() < 0 or (k is not None and part.max() >= k)):
        raise GraphFormatError(f"block id outside [0, {k})")
    return part
