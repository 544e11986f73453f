"""Compare how often SCF and DMCF relaxations land on integral points.

Draws random connected graphs and optimizes each relaxation along random
directions, with and without the alpha <= beta coupling.
"""
import argparse

import numpy as np

from gridforest.graph import make_network
from gridforest.radiality import random_objective_lp_test


def random_graph(rng, n, m):
    order = rng.permutation(n) + 1
    edges = {tuple(sorted((int(order[k]), int(order[rng.integers(0, k)])))) for k in range(1, n)}
    while len(edges) < m:
        a, b = sorted(rng.choice(n, 2, replace=False) + 1)
        edges.add((int(a), int(b)))
    return make_network(n, sorted(edges))


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--graphs", type=int, default=10)
    ap.add_argument("--trials", type=int, default=100)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    rng = np.random.Generator(np.random.PCG64(args.seed))
    print(f"{'graph':>6}{'|N|':>5}{'|L|':>5}  {'formulation':<12}{'coupled':<9}{'fractional':>11}{'worst':>8}")
    for g in range(args.graphs):
        n = int(rng.integers(5, 9))
        net = random_graph(rng, n, int(rng.integers(n, min(n * (n - 1) // 2, 12) + 1)))
        for f in ("scf", "dmcf"):
            for coupled in (False, True):
                rep = random_objective_lp_test(net, 1, f, args.trials, seed=g, coupled=coupled)
                print(
                    f"{g:>6}{net.n_nodes:>5}{net.n_branches:>5}  {f:<12}{str(coupled):<9}"
                    f"{len(rep.failures):>11}{rep.max_fractionality:>8.3f}"
                )


if __name__ == "__main__":
    main()
