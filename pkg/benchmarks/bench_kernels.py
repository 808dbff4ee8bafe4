#!/usr/bin/env python3
"""Compare the numba and pure-numpy scoring kernel backends.

The backend is fixed at import time from ``BLUEMED_PURE_NUMPY``, so this
script launches one worker subprocess per backend and merges their numbers.
Both workers build identical seeded inputs; the parent also cross-checks a
score digest from each side to confirm the backends agree on the results
they are being timed on.

Usage:
    python3 benchmarks/bench_kernels.py [--repeat N] [--number N] [--quick]
"""

from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys
import timeit

import numpy as np

SEED = 1729

FULL_CASES = [
    ("cosine 2000x384", "cosine", {"n": 2_000, "dim": 384}),
    ("cosine 20000x384", "cosine", {"n": 20_000, "dim": 384}),
    ("bm25 5k docs / 8 terms", "bm25", {"n_docs": 5_000, "vocab": 2_000, "q_terms": 8}),
    ("bm25 50k docs / 12 terms", "bm25", {"n_docs": 50_000, "vocab": 8_000, "q_terms": 12}),
]
QUICK_CASES = [
    ("cosine 2000x384", "cosine", {"n": 2_000, "dim": 384}),
    ("bm25 5k docs / 8 terms", "bm25", {"n_docs": 5_000, "vocab": 2_000, "q_terms": 8}),
]


def _build_cosine(rng, n, dim):
    matrix = rng.normal(size=(n, dim))
    matrix /= np.linalg.norm(matrix, axis=1, keepdims=True)
    query = rng.normal(size=dim)
    query /= np.linalg.norm(query)
    return np.ascontiguousarray(matrix), np.ascontiguousarray(query)


def _build_bm25(rng, n_docs, vocab, q_terms):
    # Approximate per-term document frequencies; duplicates dropped by unique.
    indptr = [0]
    docs, tfs = [], []
    for _ in range(vocab):
        df = int(rng.integers(5, 120))
        hit = np.unique(rng.integers(0, n_docs, size=df))
        docs.append(hit)
        tfs.append(rng.integers(1, 5, size=hit.size).astype(np.float64))
        indptr.append(indptr[-1] + hit.size)
    return {
        "term_ids": rng.integers(0, vocab, size=q_terms).astype(np.int64),
        "indptr": np.array(indptr, dtype=np.int64),
        "posting_docs": np.concatenate(docs),
        "posting_tfs": np.concatenate(tfs),
        "idf": rng.uniform(0.1, 3.0, size=vocab),
        "len_norm": rng.uniform(0.5, 3.0, size=n_docs),
        "k1": 1.5,
        "n_docs": n_docs,
    }


def run_worker(cases, repeat, number):
    from bluemed.retrieval.kernels import active_backend, bm25_scores, cosine_scores

    rng = np.random.default_rng(SEED)
    results = []
    for name, kind, params in cases:
        if kind == "cosine":
            matrix, query = _build_cosine(rng, **params)
            call = lambda: cosine_scores(matrix, query)  # noqa: E731
        else:
            kw = _build_bm25(rng, **params)
            call = lambda: bm25_scores(**kw)  # noqa: E731
        scores = call()  # warmup; for numba this also pays the JIT cost
        timings = timeit.repeat(call, number=number, repeat=repeat)
        results.append(
            {
                "case": name,
                "best_ms": min(timings) / number * 1e3,
                "digest": [float(scores.sum()), *map(float, scores[:3])],
            }
        )
    print(json.dumps({"backend": active_backend(), "results": results}))


def launch(backend, args):
    env = dict(os.environ)
    env["BLUEMED_PURE_NUMPY"] = "1" if backend == "numpy" else ""
    cmd = [
        sys.executable, os.path.abspath(__file__), "--worker",
        "--repeat", str(args.repeat), "--number", str(args.number),
    ]
    if args.quick:
        cmd.append("--quick")
    out = subprocess.run(cmd, env=env, capture_output=True, text=True)
    if out.returncode != 0:
        sys.stderr.write(out.stderr)
        raise SystemExit(f"{backend} worker failed with exit code {out.returncode}")
    return json.loads(out.stdout.strip().splitlines()[-1])


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5, help="timeit repeat count")
    parser.add_argument("--number", type=int, default=20, help="calls per timing sample")
    parser.add_argument("--quick", action="store_true", help="small cases only")
    parser.add_argument("--worker", action="store_true", help=argparse.SUPPRESS)
    args = parser.parse_args(argv)

    cases = QUICK_CASES if args.quick else FULL_CASES
    if args.worker:
        run_worker(cases, args.repeat, args.number)
        return 0

    numba_run = launch("numba", args)
    numpy_run = launch("numpy", args)
    if numba_run["backend"] != "numba":
        print("numba unavailable; both workers ran the numpy path.\n")

    print(f"{'case':<28}{'numba ms':>10}{'numpy ms':>10}{'speedup':>9}")
    deviation = 0.0
    for nb, np_ in zip(numba_run["results"], numpy_run["results"]):
        assert nb["case"] == np_["case"]
        speedup = np_["best_ms"] / nb["best_ms"]
        print(f"{nb['case']:<28}{nb['best_ms']:>10.3f}{np_['best_ms']:>10.3f}{speedup:>8.1f}x")
        for a, b in zip(nb["digest"], np_["digest"]):
            scale = max(1.0, abs(a), abs(b))
            deviation = max(deviation, abs(a - b) / scale)
    print(f"\nmax cross-backend score deviation: {deviation:.2e}")
    if deviation > 1e-9:
        raise SystemExit("backends disagree beyond tolerance")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
