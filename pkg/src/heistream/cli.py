"""Command line: partition, verify, bench, gen."""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import generators
from .core import ALGORITHMS, Config, ConfigError, compute_lmax
from .graph_io import GraphFormatError, load_partition, open_stream, write_metis, write_partition
from .metrics import aggregate, edge_cut
from .streamers import run

log = logging.getLogger("heistream")

EXIT_OK, EXIT_VERIFY_FAILED, EXIT_USAGE = 0, 1, 2

CSV_FIELDS = ["graph", "algorithm", "k", "seed", "delta", "passes", "edge_cut", "cut_fraction", "balance",
              "fallback_count", "pass_cuts"]
TIMING_FIELDS = ["runtime_io_ms", "runtime_model_ms", "runtime_partition_ms", "runtime_total_ms"]


@dataclass
class ExperimentSpec:
    graphs: list
    algorithms: list
    ks: list
    seeds: list = field(default_factory=lambda: list(range(10)))
    epsilon: float = 0.03
    delta: int = 32768
    passes: int = 1
    model_kind: str = "extended"

    def __post_init__(self):
        if not self.graphs:
            raise ConfigError("experiment needs at least one graph")
        if any(k < 1 for k in self.ks):
            raise ConfigError("all k must be >= 1")

    def runs(self):
        for g in self.graphs:
            for a in self.algorithms:
                for k in self.ks:
                    for s in self.seeds:
                        yield g, a, k, s


def _add_algo_flags(p):
    p.add_argument("--algorithm", choices=ALGORITHMS, default="heistream")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--buffer-size", type=int, default=32768)
    p.add_argument("--epsilon", type=float, default=0.03)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--passes", type=int, default=1)
    p.add_argument("--model", choices=("basic", "extended"), default="extended")
    p.add_argument("--x", type=int, default=4, help="coarsest model size factor")
    p.add_argument("--alpha-tuning", type=float, default=0.5)
    p.add_argument("--coarsening-rounds", type=int, default=5)
    p.add_argument("--local-search-rounds", type=int, default=5)
    p.add_argument("--approx-pow", action="store_true", help="approximate powering in the Fennel penalty")


def _config(a, **over) -> Config:
    kw = dict(k=a.k, epsilon=a.epsilon, buffer_size=a.buffer_size, model_kind=a.model, passes=a.passes,
              coarsening_rounds=a.coarsening_rounds, local_search_rounds=a.local_search_rounds, x=a.x,
              alpha_tuning=a.alpha_tuning, use_approx_pow=a.approx_pow, seed=a.seed, algorithm=a.algorithm)
    kw.update(over)
    return Config(**kw)


def _partition_one(graph, cfg: Config):
    with open_stream(graph, cfg.buffer_size) as stream:
        if cfg.k > stream.n:
            log.warning("k=%d exceeds the node count %d", cfg.k, stream.n)
        result = run(stream, cfg)
        delta = min(cfg.buffer_size, stream.n) if stream.n else cfg.buffer_size
    return result, delta


def cmd_partition(a) -> int:
    cfg = _config(a)
    result, delta = _partition_one(a.graph, cfg)
    if a.output:
        write_partition(result.partition, a.output)
    rec = result.record(os.fspath(a.graph), cfg, delta)
    text = json.dumps(rec, indent=2)
    if a.json:
        Path(a.json).write_text(text + "\n")
    else:
        print(text)
    return EXIT_OK


def cmd_verify(a) -> int:
    with open_stream(a.graph, 1 << 16) as stream:
        part = load_partition(a.partition, stream.n, a.k)
        cut, frac = edge_cut(stream, part)
        stream.rewind()
        bw = np.zeros(a.k, dtype=np.int64)
        for batch in stream.batches():
            np.add.at(bw, part[batch.first:batch.end], batch.vwgt)
        l_max = compute_lmax(stream.total_node_weight, a.k, a.epsilon)
    total = int(bw.sum())
    report = {"edge_cut": cut, "cut_fraction": frac, "l_max": l_max, "max_block_weight": int(bw.max()),
              "balance": float(bw.max()) * a.k / total if total else 1.0, "balanced": bool(bw.max() <= l_max)}
    ok = report["balanced"]
    if a.claimed:
        claimed = json.loads(Path(a.claimed).read_text())
        report["claimed_edge_cut"] = claimed.get("edge_cut")
        report["cut_matches"] = claimed.get("edge_cut") == cut
        ok = ok and report["cut_matches"]
    report["ok"] = ok
    print(json.dumps(report, indent=2))
    return EXIT_OK if ok else EXIT_VERIFY_FAILED


def _bench_task(task):
    graph, algo, k, seed, eps, delta, passes, model = task
    cfg = Config(k=k, epsilon=eps, buffer_size=delta, passes=passes, model_kind=model, seed=seed, algorithm=algo)
    result, d = _partition_one(graph, cfg)
    return result.record(os.fspath(graph), cfg, d)


def run_experiment(spec: ExperimentSpec, jobs: int = 1) -> list[dict]:
    tasks = [(g, a, k, s, spec.epsilon, spec.delta, spec.passes, spec.model_kind) for g, a, k, s in spec.runs()]
    if jobs > 1:
        with ProcessPoolExecutor(jobs) as pool:
            return list(pool.map(_bench_task, tasks))
    return [_bench_task(t) for t in tasks]


def summarize(records: list[dict], baseline: str | None = "fennel") -> list[dict]:
    """Per (algorithm, k): seed-averaged cut per graph, then geometric means across graphs."""
    by = {}
    for r in records:
        by.setdefault((r["k"], r["algorithm"]), {}).setdefault(r["graph"], []).append(r)
    rows = []
    for k in sorted({key[0] for key in by}):
        algos = [a for (kk, a) in by if kk == k]
        graphs = sorted(set.intersection(*(set(by[(k, a)]) for a in algos)))
        cuts = {a: [float(np.mean([r["edge_cut"] for r in by[(k, a)][g]])) for g in graphs] for a in algos}
        times = {a: [float(np.mean([r["runtime_ms"]["total"] for r in by[(k, a)][g]])) for g in graphs]
                 for a in algos}
        base = baseline if baseline in algos else None
        q = aggregate(cuts, base)
        t = aggregate(times, base)
        for a in algos:
            rows.append({
                "k": k, "algorithm": a, "instances": len(graphs),
                "gmean_edge_cut": q["geometric_mean"][a], "gmean_runtime_ms": t["geometric_mean"][a],
                "cut_ratio_vs_max": q["ratio_vs_max"][a],
                "cut_improvement_vs_" + (base or "none"): q["improvement_vs"][a] if base else math.nan,
                "excluded_zero_cut": q["excluded"],
            })
    return rows


def _write_runs(records, path, timings=True):
    fields = CSV_FIELDS + (TIMING_FIELDS if timings else [])
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=fields)
        w.writeheader()
        for r in records:
            row = {f: r[f] for f in CSV_FIELDS}
            row["pass_cuts"] = ";".join(map(str, r["pass_cuts"]))
            if timings:
                for f in TIMING_FIELDS:
                    row[f] = r["runtime_ms"][f[len("runtime_"):-len("_ms")]]
            w.writerow(row)


def cmd_bench(a) -> int:
    seeds = a.seed_list if a.seed_list else list(range(a.seeds))
    spec = ExperimentSpec(a.graphs, a.algorithms, a.k, seeds, a.epsilon, a.buffer_size, a.passes, a.model)
    records = run_experiment(spec, a.jobs)
    _write_runs(records, a.output, timings=not a.no_timings)
    summary = summarize(records)
    summary_path = a.summary or str(Path(a.output).with_suffix("")) + "_summary.csv"
    if summary:
        with open(summary_path, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=list(summary[0]))
            w.writeheader()
            w.writerows(summary)
    for row in summary:
        print(" ".join(f"{key}={val:.4g}" if isinstance(val, float) else f"{key}={val}" for key, val in row.items()))
    return EXIT_OK


def cmd_gen(a) -> int:
    if a.kind == "rgg":
        g = generators.random_geometric(1 << a.log_n, seed=a.seed)
        default = f"rgg{a.log_n}_s{a.seed}.metis"
    elif a.kind == "er":
        g = generators.erdos_renyi(a.n, a.p, seed=a.seed)
        default = f"er{a.n}_p{a.p}_s{a.seed}.metis"
    else:
        g = generators.grid(a.rows, a.cols)
        default = f"grid{a.rows}x{a.cols}.metis"
    out = a.output or default
    write_metis(g, out)
    print(f"{out}: n={g.n} m={g.m}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="heistream", description="Buffered streaming graph partitioning")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("partition", help="partition one graph")
    p.add_argument("--graph", required=True)
    p.add_argument("--output", help="partition file (one block id per line)")
    p.add_argument("--json", help="write the results record here instead of stdout")
    _add_algo_flags(p)
    p.set_defaults(func=cmd_partition)

    p = sub.add_parser("verify", help="recompute edge-cut and balance of a partition file")
    p.add_argument("--graph", required=True)
    p.add_argument("--partition", required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--epsilon", type=float, default=0.03)
    p.add_argument("--claimed", help="results JSON whose edge_cut must match")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("bench", help="run an (algorithm x k x seed) grid")
    p.add_argument("--graphs", nargs="+", required=True)
    p.add_argument("--algorithms", nargs="+", choices=ALGORITHMS, default=["heistream", "fennel"])
    p.add_argument("--k", type=int, nargs="+", required=True)
    p.add_argument("--seeds", type=int, default=10, help="use seeds 0..N-1")
    p.add_argument("--seed-list", type=int, nargs="+")
    p.add_argument("--buffer-size", type=int, default=32768)
    p.add_argument("--epsilon", type=float, default=0.03)
    p.add_argument("--passes", type=int, default=1)
    p.add_argument("--model", choices=("basic", "extended"), default="extended")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--output", required=True, help="per-run CSV")
    p.add_argument("--summary", help="aggregate CSV (default: <output>_summary.csv)")
    p.add_argument("--no-timings", action="store_true", help="omit runtime columns")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("gen", help="write a synthetic METIS graph")
    gsub = p.add_subparsers(dest="kind", required=True)
    g = gsub.add_parser("rgg")
    g.add_argument("--log-n", type=int, required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--output")
    g = gsub.add_parser("er")
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--p", type=float, required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--output")
    g = gsub.add_parser("grid")
    g.add_argument("--rows", type=int, required=True)
    g.add_argument("--cols", type=int, required=True)
    g.add_argument("--output")
    p.set_defaults(func=cmd_gen)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    a = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if a.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return a.func(a)
    except (OSError, GraphFormatError, ConfigError) as exc:
        print(f"heistream: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
