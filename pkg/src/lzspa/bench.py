"""Throughput and latency benchmarks.  Assertions elsewhere use ratios; raw seconds are only reported."""

from __future__ import annotations

import gc
import math
import os
import platform
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from functools import partial
from typing import Sequence

import numpy as np

from .generation import GenConfig, generate
from .transform import LZTransformSPA


def hardware_fingerprint() -> dict:
    return {
        "machine": platform.machine(),
        "processor": platform.processor() or platform.machine(),
        "system": platform.system(),
        "python": sys.version.split()[0],
        "numpy": np.__version__,
        "cpus": os.cpu_count(),
    }


def tree_memory_bytes(model: LZTransformSPA) -> int:
    """Shallow size of the tree's containers (the dominant allocation)."""
    t = model.tree
    table = t.kids if t.flat else t.child
    return sum(sys.getsizeof(x) for x in (t.parent, t.edge, t.depth, t.visits, t.hits, table))


def _timed(fn) -> float:
    enabled = gc.isenabled()
    gc.collect()
    gc.disable()
    try:
        start = time.perf_counter()
        fn()
        return time.perf_counter() - start
    finally:
        if enabled:
            gc.enable()


def bench_train_throughput(sizes: Sequence[int] = (10**5, 10**6, 10**7), alphabet_size: int = 2,
                           seed: int = 0, repeats: int = 1) -> dict:
    """Time one-epoch training on iid uniform data at each size (best of ``repeats``)."""
    rng = np.random.default_rng(seed)
    data = rng.integers(0, alphabet_size, max(sizes)).tolist()
    rows = []
    for n in sizes:
        chunk = data[:n]
        best = math.inf
        for _ in range(repeats):
            model = LZTransformSPA(alphabet_size, gamma=0.5)
            best = min(best, _timed(partial(model.train, [chunk])))
        nodes = model.tree.phrase_count()
        mem = tree_memory_bytes(model)
        rows.append({
            "n": n,
            "seconds": best,
            "symbols_per_sec": n / best,
            "nodes": nodes,
            "nodes_over_n_log_n": nodes / (n / math.log2(n)),
            "memory_bytes": mem,
            "bytes_per_node": mem / nodes,
        })
        del model
    ratios = [b["seconds"] / a["seconds"] for a, b in zip(rows, rows[1:])]
    return {
        "hardware": hardware_fingerprint(),
        "alphabet_size": alphabet_size,
        "rows": rows,
        "decade_time_ratios": ratios,
    }


def _zipf_bytes(n: int, rng: np.random.Generator, a: float = 1.2) -> list[int]:
    w = 1.0 / np.arange(1, 257) ** a
    return rng.choice(256, size=n, p=w / w.sum()).tolist()


def bench_generation_latency(train_sizes: Sequence[int] = (10**4, 2 * 10**6), sample_length: int = 256,
                             samples: int = 20, seed: int = 0) -> dict:
    """Seconds per generated sample and per symbol for byte models of very different size."""
    rng = np.random.default_rng(seed)
    rows = []
    for n in train_sizes:
        model = LZTransformSPA(256, gamma=0.5).train([_zipf_bytes(n, rng)]).freeze()
        timings = {}
        for label, k in (("top_k_1", 1), ("top_k_all", 256)):
            cfgs = [GenConfig(sample_length, temperature=1.0, top_k=k, rng_seed=seed + i) for i in range(samples)]
            generate(model, cfgs[0])  # warm-up
            timings[label] = _timed(lambda: [generate(model, c) for c in cfgs]) / samples
        rows.append({
            "train_symbols": n,
            "nodes": model.tree.phrase_count(),
            "seconds_per_sample": timings["top_k_all"],
            "seconds_per_symbol": timings["top_k_all"] / sample_length,
            "seconds_per_sample_k1": timings["top_k_1"],
            "k1_over_kall": timings["top_k_1"] / timings["top_k_all"],
        })
    per_sym = [r["seconds_per_symbol"] for r in rows]
    return {
        "hardware": hardware_fingerprint(),
        "sample_length": sample_length,
        "rows": rows,
        "latency_spread": max(per_sym) / min(per_sym),
        "node_spread": rows[-1]["nodes"] / rows[0]["nodes"],
    }


def bench_parallel_classify(classes: int = 4, train_symbols: int = 2 * 10**5, queries: int = 16,
                            query_length: int = 2000, workers: Sequence[int] = (1, 2, 4), seed: int = 0) -> dict:
    """Wall time of scoring ``queries`` sequences against every class with 1..k reader threads.

    The interpreter lock limits speed-up for pure-Python scoring; the point
    is that results are identical at every thread count.
    """
    rng = np.random.default_rng(seed)
    models = []
    for c in range(classes):
        p = 0.05 + 0.1 * c
        flips = rng.random(train_symbols) < p
        seq = (np.cumsum(flips) % 2).tolist()
        models.append(LZTransformSPA(2, gamma=0.5).train([seq]).freeze())
    qs = [rng.integers(0, 2, query_length).tolist() for _ in range(queries)]

    def score_all(k):
        jobs = [(m, q) for q in qs for m in models]
        if k == 1:
            return [m.evaluate_log_loss(q).total_bits for m, q in jobs]
        with ThreadPoolExecutor(max_workers=k) as pool:
            return list(pool.map(lambda mq: mq[0].evaluate_log_loss(mq[1]).total_bits, jobs))

    reference = score_all(1)
    rows = []
    for k in workers:
        out = []
        secs = _timed(lambda: out.append(score_all(k)))
        rows.append({"workers": k, "seconds": secs, "identical": out[0] == reference})
    return {"hardware": hardware_fingerprint(), "rows": rows}
