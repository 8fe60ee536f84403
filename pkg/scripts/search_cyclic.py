"""Search for [[7,1,3]] codes whose stabilizer group is generated by the
cyclic shifts of a single Pauli string.

Prints every distinct code (up to shifts of the seed string) with its
distance, and writes the chosen definition as JSON when ``--out`` is given.
"""

import argparse
import json

import numpy as np

from qecdiag import pauli as pl
from qecdiag.codes import (CodeValidationError, StabilizerCode, gf2_rank,
                           _symp_vec)
from qecdiag.pauli import PauliOperator, commutes

N = 7


def shifts(p: PauliOperator):
    letters = p.letters
    return [PauliOperator.from_string(letters[-j:] + letters[:-j]) for j in range(N)]


def independent_subset(ops):
    chosen = []
    for op in ops:
        if gf2_rank([_symp_vec(o) for o in chosen + [op]]) > len(chosen):
            chosen.append(op)
    return chosen


def logicals(gens):
    """Lowest-weight anticommuting pair from the normalizer minus the group."""
    x, z = pl.index_xz(N)
    ok = np.ones(4**N, dtype=bool)
    for g in gens:
        ok &= pl.symplectic_parity(x, z, g.x, g.z) == 0
    base = [_symp_vec(g) for g in gens]
    cands = []
    for i in np.flatnonzero(ok)[1:]:
        op = PauliOperator.from_index(int(i), N)
        if gf2_rank(base + [_symp_vec(op)]) > len(base):
            cands.append(op)
    cands.sort(key=lambda o: (pl.weights(N)[o.index], o.index))
    for a in cands:
        for b in cands:
            if not commutes(a, b):
                return a, b
    return None


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--seed-string")
    ap.add_argument("--out")
    args = ap.parse_args()
    seen, found = set(), []
    seeds = [args.seed_string] if args.seed_string else [
        PauliOperator.from_index(i, N).letters for i in range(1, 4**N)]
    for s in seeds:
        p = PauliOperator.from_string(s)
        sh = shifts(p)
        key = min(o.letters for o in sh)
        if key in seen:
            continue
        seen.add(key)
        if not all(commutes(a, b) for a in sh for b in sh):
            continue
        gens = independent_subset(sh)
        if len(gens) != N - 1:
            continue
        pair = logicals(gens)
        if pair is None:
            continue
        try:
            code = StabilizerCode(N, 1, 3, gens, [pair[0]], [pair[1]], "cyclic")
        except CodeValidationError:
            continue
        d = code.distance()
        if d == 3:
            found.append((key, code))
            print(key, [g.letters for g in gens], pair[0].letters, pair[1].letters)
    if args.out and found:
        code = found[0][1]
        with open(args.out, "w") as fh:
            json.dump(code.to_dict(), fh, indent=2)


if __name__ == "__main__":
    main()
