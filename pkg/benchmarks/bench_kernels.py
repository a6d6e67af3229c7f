"""Compiled vs interpreted timings for the graph kernels.

Runs each case in a fresh interpreter, once with numba and once with
KGPATH_NO_NUMBA=1, and prints a table.  The compiled column excludes the
first (compiling) call.

    python3 benchmarks/bench_kernels.py [--entities 2000] [--triples 12000] [--repeat 3]
"""
import argparse
import json
import os
import subprocess
import sys
import time

import numpy as np


def random_graph(n_entities, n_relations, n_triples, seed):
    from kgpath.kg import KnowledgeGraph, augment_inverses

    rng = np.random.default_rng(seed)
    rows = np.unique(np.column_stack([rng.integers(n_entities, size=n_triples),
                                      rng.integers(n_relations, size=n_triples),
                                      rng.integers(n_entities, size=n_triples)]), axis=0)
    kg = KnowledgeGraph(tuple(f"e{i}" for i in range(n_entities)),
                        tuple(f"r{i}" for i in range(n_relations)),
                        rows, rows[:0], rows[:0])
    return augment_inverses(kg)


def child(args):
    from kgpath import _jit
    from kgpath.grounding import multiplicities
    from kgpath.ree import MiningConfig, mine_candidate_rules

    kg = random_graph(args.entities, args.relations, args.triples, args.seed)
    rng = np.random.default_rng(args.seed + 1)
    paths = [tuple(int(x) for x in rng.integers(0, kg.n_relations, k)) for k in (1, 2, 3) for _ in range(20)]
    heads = np.arange(min(kg.n_entities, 500))
    cases = {
        "mine L<=2": lambda: mine_candidate_rules(kg, MiningConfig(max_len=2)),
        "mine L<=3": lambda: mine_candidate_rules(kg, MiningConfig(max_len=3)),
        "ground 60 paths x 500 heads": lambda: multiplicities(kg, heads, paths),
    }
    out = {}
    for name, fn in cases.items():
        if _jit.USE_NUMBA:
            fn()  # compile
        times = []
        for _ in range(args.repeat):
            t = time.perf_counter()
            fn()
            times.append(time.perf_counter() - t)
        out[name] = min(times)
    print(json.dumps(out))


def run_mode(no_numba, argv):
    env = dict(os.environ, KGPATH_NO_NUMBA="1" if no_numba else "0")
    res = subprocess.run([sys.executable, __file__, "--child", *argv], env=env,
                         capture_output=True, text=True, check=True)
    return json.loads(res.stdout.strip().splitlines()[-1])


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--entities", type=int, default=2000)
    p.add_argument("--relations", type=int, default=10)
    p.add_argument("--triples", type=int, default=12000)
    p.add_argument("--repeat", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--child", action="store_true", help=argparse.SUPPRESS)
    args = p.parse_args()
    if args.child:
        return child(args)

    argv = [a for a in sys.argv[1:] if a != "--child"]
    jit = run_mode(False, argv)
    py = run_mode(True, argv)
    print(f"graph: {args.entities} entities, {args.relations} relations, {args.triples} triples (+ inverses)")
    print(f"{'case':32s} {'numba s':>10s} {'python s':>10s} {'speedup':>9s}")
    for name in jit:
        print(f"{name:32s} {jit[name]:10.4f} {py[name]:10.4f} {py[name] / max(jit[name], 1e-9):8.1f}x")


if __name__ == "__main__":
    main()
