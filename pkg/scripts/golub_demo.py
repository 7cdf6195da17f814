"""Three nested analyses of a wide continuous matrix, in the style of a
gene-expression study.

    python scripts/golub_demo.py expression.csv [reference_labels.csv] [--criterion micl]

``expression.csv`` has a header row and one row per sample; every column is
treated as continuous. The optional reference file holds one label per row
(no header) and is only used to report ARI after fitting.

For each G1 in 1..gmax the script fits
  * a single-block Gaussian mixture,
  * a two-block model whose second block has one component (variable selection),
  * a three-block model with a free second block and a one-component third block,
and prints the best of each family. No data ships with the package and nothing
here is checked by the test suite.
"""

from __future__ import annotations

import argparse
import csv
import itertools

import numpy as np

from mpmix import CONTINUOUS, DataSet, MiclConfig, adjusted_rand_index, optimize_micl
from mpmix.bic import fit_penalized_em
from mpmix.em import EMConfig


def read_matrix(path) -> DataSet:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    names, body = rows[0], np.array(rows[1:], dtype=float)
    return DataSet(tuple(body.T), (CONTINUOUS,) * len(names), tuple(names))


def families(gmax: int):
    yield "B=1", [(1, (g,)) for g in range(1, gmax + 1)]
    yield "B=2, G2=1", [(2, (g, 1)) for g in range(1, gmax + 1)]
    yield "B=3, G3=1", [(3, (g1, g2, 1)) for g1, g2 in itertools.product(range(1, gmax + 1), repeat=2)]


def fit_one(data, B, G, criterion, restarts, seed):
    if criterion == "bic":
        fit = fit_penalized_em(data, B, G, EMConfig(restarts=restarts, seed=seed))
        return fit.value, fit.spec, fit.map_z
    res = optimize_micl(data, B, G, MiclConfig(restarts=restarts, seed=seed))
    return res.value, res.spec, res.z_star


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("matrix")
    ap.add_argument("reference", nargs="?")
    ap.add_argument("--criterion", choices=["bic", "micl"], default="bic")
    ap.add_argument("--gmax", type=int, default=6)
    ap.add_argument("--restarts", type=int, default=10)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    data = read_matrix(args.matrix)
    ref = None
    if args.reference:
        with open(args.reference, encoding="utf-8") as fh:
            ref = [line.strip() for line in fh if line.strip()]

    for label, grid in families(args.gmax):
        best = max((fit_one(data, B, G, args.criterion, args.restarts, args.seed) for B, G in grid), key=lambda t: t[0])
        value, spec, z = best
        print(f"{label}: {args.criterion} = {value:.2f}")
        for b in range(spec.B):
            share = 100 * np.mean(np.asarray(spec.omega) == b)
            ari = "" if ref is None else f"  ARI {adjusted_rand_index(ref, z.labels[b]):.2f}"
            print(f"  block {b + 1}: G={spec.G[b]}  {share:.0f}% of variables{ari}")


if __name__ == "__main__":
    main()
