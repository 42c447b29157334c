"""Buffered streaming graph partitioning (HeiStream) with one-pass baselines."""
from .core import Config, ConfigError, Graph, PartitionState, compute_lmax, make_rng
from .graph_io import Batch, GraphStream, load_partition, open_stream, read_metis, write_metis, write_partition
from .metrics import balance, edge_cut, geometric_mean, improvement, performance_profile, quotient_graph
from .streamers import RunResult, run, run_fennel, run_hashing, run_heistream, run_ldg, run_refennel

__version__ = "0.1.0"
