"""Writes description-length reference values computed with mpmath.

Each case is a rule-length list, a literal universe size and the four
coverage counts. The value is evaluated at 60 significant digits and
rounded to 17.
"""

import random
import sys

import mpmath

mpmath.mp.dps = 60


def log2(x):
    return mpmath.log(x) / mpmath.log(2)


def log2_binomial(n, k):
    return log2(mpmath.binomial(n, k))


def dl(lengths, universe, covered, fp, uncovered, fn):
    lu = log2(universe) if universe > 1 else mpmath.mpf(0)
    model = sum(mpmath.mpf("0.5") * (mpmath.ceil(log2(k + 1)) + k * lu) for k in lengths)
    header = mpmath.ceil(log2(covered + uncovered + 1))
    return model + log2_binomial(covered, fp) + log2_binomial(uncovered, fn) + header


def main(out):
    rng = random.Random(20240611)
    rows = []
    for i in range(50):
        scale = [10, 100, 1000, 5000][i % 4]
        lengths = [rng.randint(0, 12) for _ in range(rng.randint(0, 8))]
        universe = rng.randint(1, 4000)
        covered = rng.randint(0, scale)
        uncovered = rng.randint(0, scale)
        fp = rng.randint(0, covered)
        fn = rng.randint(0, uncovered)
        value = dl(lengths, universe, covered, fp, uncovered, fn)
        rows.append((";".join(map(str, lengths)), universe, covered, fp, uncovered, fn, mpmath.nstr(value, 17)))
    with open(out, "w") as f:
        f.write("lengths,universe,covered,fp,uncovered,fn,bits\n")
        for r in rows:
            f.write(",".join(map(str, r)) + "\n")


if __name__ == "__main__":
    main(sys.argv[1])
