"""Regenerates tests/fixtures/logistic_reference.json with mpmath at 50 digits."""
import json
import random
import sys

import mpmath

mpmath.mp.dps = 50
Z = mpmath.mpf("1.959963984540054")


def wilson(p, n):
    z2 = Z * Z
    denom = 1 + z2 / n
    centre = (p + z2 / (2 * n)) / denom
    half = Z * mpmath.sqrt(p * (1 - p) / n + z2 / (4 * n * n)) / denom
    return max(mpmath.mpf(0), centre - half), min(mpmath.mpf(1), centre + half)


def main(path):
    rng = random.Random(7)
    zs = [0.0, 1e-300, -1e-12, 0.5, -0.5, 3.0, -3.0, 20.0, -20.0, 36.5, -36.5, -200.0, -700.0, 700.0, 745.0]
    zs += [rng.uniform(-40, 40) for _ in range(40)]
    rows = []
    for z in zs:
        p = 1 / (1 + mpmath.exp(-mpmath.mpf(z)))
        rows.append({"z": z, "p": mpmath.nstr(p, 30)})
    ws = []
    for p in [0.0, 1e-9, 0.01, 0.2, 0.5, 0.93, 1.0]:
        for n in [1.0, 10.0, 250.0, 1e6]:
            lo, hi = wilson(mpmath.mpf(p), mpmath.mpf(n))
            ws.append({"p": p, "n": n, "lo": mpmath.nstr(lo, 30), "hi": mpmath.nstr(hi, 30)})
    with open(path, "w") as f:
        json.dump({"logistic": rows, "wilson": ws}, f, indent=1)
        f.write("\n")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "crates/core/tests/fixtures/logistic_reference.json")
