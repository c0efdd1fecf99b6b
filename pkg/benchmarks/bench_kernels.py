"""Time the compiled and Python kernels on the same inputs.

    python benchmarks/bench_kernels.py [--repeat N] [--edges M]
"""

import argparse
import random
import timeit

from archview import kernels


def rule_rows(rng, n):
    rows = []
    for _ in range(n):
        prefix = rng.randrange(8, 33)
        mask = (0xFFFFFFFF << (32 - prefix)) & 0xFFFFFFFF
        net = rng.getrandbits(32) & mask
        rows.append((rng.randrange(2), 0, net, mask, 1, 0, 0, rng.randrange(-1, 4), 0, 65535))
    return rows


def polytree(rng, m):
    src, dst = [], []
    for i in range(1, m + 1):
        j = rng.randrange(i)
        a, b = (j, i) if rng.random() < 0.7 else (i, j)
        src.append(a)
        dst.append(b)
    prob = [rng.random() for _ in range(m)]
    return m + 1, src, dst, prob, [v == 0 for v in range(m + 1)]


def best_of(fn, number, repeat):
    return min(timeit.repeat(fn, number=number, repeat=repeat)) / number


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--rules", type=int, default=200)
    ap.add_argument("--edges", type=int, default=16)
    args = ap.parse_args()
    rng = random.Random(0)
    rows = rule_rows(rng, args.rules)
    flows = [(rng.getrandbits(32), rng.getrandbits(32), rng.randrange(4), rng.randrange(65536)) for _ in range(500)]
    graph = polytree(rng, args.edges)

    backends = kernels.available_backends()
    results = {}
    for name, mod in sorted(backends.items()):
        table = mod.prepare_rules(rows)

        def match():
            for f in flows:
                mod.first_match(table, *f)

        results[name] = (
            best_of(match, 5, args.repeat) / len(flows),
            best_of(lambda: mod.reach_mass(*graph), 1, args.repeat),
        )

    print(f"first_match: {args.rules} rules, per flow | reach_mass: {args.edges}-edge polytree, per call")
    for name, (fm, rm) in results.items():
        print(f"{name:>9}  first_match {fm * 1e6:10.2f} us   reach_mass {rm * 1e3:10.3f} ms")
    if len(results) == 2:
        (cf, cr), (pf, pr) = results["compiled"], results["python"]
        print(f"  speedup  first_match {pf / cf:9.1f}x     reach_mass {pr / cr:9.1f}x")
    else:
        print("compiled extension not available; only the fallback was timed")


if __name__ == "__main__":
    main()
