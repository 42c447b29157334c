import io

import numpy as np
import pytest

from heistream.core import Config, PartitionState, make_rng
from heistream.graph_io import GraphStream, RestreamUnsupportedError
from heistream.metrics import edge_cut
from heistream.streamers import _greedy_batch, run, run_fennel, run_hashing, run_heistream, run_refennel

from conftest import CORPUS, naive_cut, stream_of


def _one_node(nbrs, assignment, bw, l_max, coef=1.5, ldg=False, restream=False, seed=0, first=None):
    """Score a single node against the given state with the greedy kernel."""
    first = len(assignment) - 1 if first is None else first
    bxadj = np.array([0, len(nbrs)], dtype=np.int64)
    adj = np.array(nbrs, dtype=np.int64)
    a = np.array(assignment, dtype=np.int64)
    w = np.array(bw, dtype=np.int64)
    fb = _greedy_batch(first, bxadj, adj, np.ones(len(nbrs), dtype=np.int64), np.ones(1, dtype=np.int64), a, w,
                       l_max, coef, 0.5, False, ldg, restream, make_rng(seed, "assign"))
    return int(a[first]), fb, w


def test_fennel_first_node_is_uniform():
    picks = [_one_node([], [-1], [0, 0, 0, 0], 10, seed=s)[0] for s in range(800)]
    counts = np.bincount(picks, minlength=4)
    assert counts.min() > 150


def test_fennel_hand_example():
    # two neighbours in block 0 (weight 4): 2 - 1.5*2 = -1 < 0 for the empty block 1
    blk, fb, _ = _one_node([0, 1], [0, 0, -1], [4, 0], 100)
    assert (blk, fb) == (1, 0)


def test_ldg_hand_example():
    # neighbour counts (3, 1), block weights (10, 2), L_max 26
    blk, _, _ = _one_node([0, 1, 2, 3], [0, 0, 0, 1, -1], [10, 2], 26, ldg=True)
    assert blk == 0


def test_ldg_isolated_node_goes_to_lightest():
    for s in range(20):
        assert _one_node([], [-1], [5, 2, 7], 26, ldg=True, seed=s)[0] == 1


def test_ldg_no_feasible_block_falls_back():
    # both blocks at L_max - c(v) + 1; the lightest (lowest id on ties) takes the node
    blk, fb, _ = _one_node([], [-1], [26, 26], 26, ldg=True)
    assert (blk, fb) == (0, 1)
    blk, fb, _ = _one_node([], [-1], [30, 27], 26, ldg=True)
    assert (blk, fb) == (1, 1)


def test_refennel_follows_moved_neighbours():
    # node 4 sat in block 0; all its neighbours are now in block 1
    assignment = [1, 1, 1, 0, 0]
    blk, fb, w = _one_node([0, 1, 2], assignment, [2, 3], 4, coef=0.1, restream=True, first=4)
    assert (blk, fb) == (1, 0)
    assert w.tolist() == [1, 4]


@pytest.mark.parametrize("algo", ["heistream", "fennel", "ldg", "hashing", "refennel"])
def test_k1_puts_everything_in_block0(algo):
    g = CORPUS["rgg_0"]
    r = run(stream_of(g, 128), Config(k=1, buffer_size=128, algorithm=algo, passes=2 if algo == "refennel" else 1))
    assert r.partition.assignment.max() == 0 and r.edge_cut == 0


@pytest.mark.parametrize("algo", ["heistream", "fennel", "ldg", "hashing", "refennel"])
@pytest.mark.parametrize("name", ["rgg_large", "weighted_900", "star_150", "clique_40"])
def test_runs_are_complete_balanced_and_self_consistent(algo, name):
    g = CORPUS[name]
    cfg = Config(k=8, buffer_size=256, algorithm=algo, seed=2, passes=2 if algo in ("heistream", "refennel") else 1)
    r = run(stream_of(g, 256), cfg)
    st = r.partition
    assert st.is_complete()
    assert st.block_weights.sum() == g.total_node_weight
    assert np.array_equal(np.bincount(st.assignment, weights=g.vwgt, minlength=8), st.block_weights)
    assert st.block_weights.max() <= st.l_max and r.fallback_count == 0
    assert r.edge_cut == naive_cut(g, st.assignment) == r.pass_cuts[-1]
    assert len(r.pass_cuts) == cfg.passes
    assert set(r.runtime_ms) == {"io", "model", "partition", "total"}


@pytest.mark.parametrize("algo", ["heistream", "fennel", "ldg", "hashing", "refennel"])
def test_determinism(algo):
    g = CORPUS["rgg_4"]
    cfg = Config(k=16, buffer_size=200, algorithm=algo, seed=9, passes=2 if algo == "refennel" else 1)
    a = run(stream_of(g, 200), cfg).partition.assignment
    b = run(stream_of(g, 200), cfg).partition.assignment
    c = run(stream_of(g, 200), cfg.replace(seed=10)).partition.assignment
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_hashing_ignores_structure_and_seed_fixes_blocks():
    g = CORPUS["er_2"]
    a = run_hashing(stream_of(g, 50), Config(k=8, buffer_size=50, seed=4)).partition.assignment
    b = run_hashing(stream_of(g, 500), Config(k=8, buffer_size=500, seed=4)).partition.assignment
    assert np.array_equal(a, b)


def test_refennel_single_pass_is_fennel():
    g = CORPUS["grid_20x30"]
    cfg = Config(k=4, buffer_size=100, seed=1)
    a = run_fennel(stream_of(g, 100), cfg)
    b = run_refennel(stream_of(g, 100), cfg)
    assert np.array_equal(a.partition.assignment, b.partition.assignment)


@pytest.mark.parametrize("name", ["rgg_1", "grid_7x50", "weighted_400"])
def test_delta_one_is_fennel(name):
    g = CORPUS[name]
    cfg = Config(k=8, buffer_size=1, model_kind="basic", alpha_tuning=1.0, seed=5)
    h = run_heistream(stream_of(g, 1), cfg)
    f = run_fennel(stream_of(g, 1), cfg.replace(algorithm="fennel"))
    assert np.array_equal(h.partition.assignment, f.partition.assignment)


def test_whole_graph_in_one_batch():
    g = CORPUS["rgg_large"]
    r = run_heistream(stream_of(g, g.n), Config(k=16, buffer_size=g.n))
    f = run_fennel(stream_of(g, g.n), Config(k=16, algorithm="fennel"))
    assert r.partition.block_weights.max() <= r.partition.l_max
    assert r.edge_cut < f.edge_cut


def test_buffer_size_follows_the_stream():
    g = CORPUS["grid_10x10"]
    r = run_heistream(stream_of(g, 30), Config(k=4, buffer_size=999))
    assert r.partition.is_complete()


def test_edge_cut_matches_streaming_metric():
    g = CORPUS["weighted_900"]
    s = stream_of(g, 100)
    r = run_heistream(s, Config(k=4, buffer_size=100, passes=2))
    assert edge_cut(s, r.partition.assignment)[0] == r.edge_cut
    assert r.cut_fraction == pytest.approx(r.edge_cut / g.total_edge_weight)


class _Pipe(io.StringIO):
    def seekable(self):
        return False


@pytest.mark.parametrize("algo", ["heistream", "refennel"])
def test_restream_needs_seekable_source(algo, tmp_path):
    from heistream.graph_io import write_metis
    write_metis(CORPUS["grid_10x10"], tmp_path / "g")
    s = GraphStream(_Pipe((tmp_path / "g").read_text()), 10)
    with pytest.raises(RestreamUnsupportedError):
        run(s, Config(k=2, buffer_size=10, passes=2, algorithm=algo))


def test_record_schema():
    g = CORPUS["grid_10x10"]
    cfg = Config(k=4, buffer_size=25, seed=3)
    rec = run(stream_of(g, 25), cfg).record("g.metis", cfg, 25)
    assert list(rec) == ["graph", "algorithm", "k", "seed", "delta", "passes", "edge_cut", "cut_fraction",
                         "balance", "runtime_ms", "fallback_count", "pass_cuts"]
