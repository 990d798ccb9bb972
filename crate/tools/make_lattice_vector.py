"""Builds the embedded rank-1 lattice generating vector shipped in
crates/core/data/lattice_vector.txt.

Randomised component-by-component search: for every coordinate k a fixed
number of odd candidates in [1, 2^19) is drawn from a seeded generator and
the candidate minimising the summed, N^2-normalised, shift-averaged squared
worst-case error over the embedded point counts N = 2^10 .. 2^16 is kept.
Unanchored Sobolev space, product weights gamma_k = 1 / k^2.

    python3 tools/make_lattice_vector.py > crates/core/data/lattice_vector.txt
"""
import sys

import numpy as np

DIM = 256
LEVELS = range(10, 17)
CANDIDATES = 128
SEED = 20220427


def b2(x):
    return x * x - x + 1.0 / 6.0


def main():
    rng = np.random.default_rng(SEED)
    prods = {m: np.ones(2**m) for m in LEVELS}
    idx = {m: np.arange(2**m, dtype=np.int64) for m in LEVELS}
    mean_prod = 1.0
    z = []
    for k in range(1, DIM + 1):
        gamma = 1.0 / k**2
        if k == 1:
            cands = np.array([1], dtype=np.int64)
        else:
            cands = 2 * rng.integers(0, 2**18, size=CANDIDATES, dtype=np.int64) + 1
        score = np.zeros(len(cands))
        for m in LEVELS:
            n = 2**m
            x = ((idx[m][None, :] * (cands[:, None] % n)) % n) / n
            e2 = (prods[m][None, :] * (1.0 + gamma * b2(x))).mean(axis=1)
            e2 -= mean_prod * (1.0 + gamma / 3.0)
            score += e2 * n * n
        best = int(cands[np.argmin(score)])
        z.append(best)
        mean_prod *= 1.0 + gamma / 3.0
        for m in LEVELS:
            n = 2**m
            prods[m] *= 1.0 + gamma * b2(((idx[m] * (best % n)) % n) / n)
        print(f"dim {k}: z = {best}", file=sys.stderr)
    for k, zk in enumerate(z, start=1):
        print(f"{k} {zk}")


if __name__ == "__main__":
    main()
