#!/usr/bin/env python3
"""Regenerates tests/stats_oracle.hpp.

All reference values are evaluated with mpmath at 50 significant digits,
starting from the exact binary64 inputs the C++ tests use. Output is
deterministic; run from the repository root:

    python3 tests/tools/make_stats_oracle.py > tests/stats_oracle.hpp
"""

import mpmath as mp
import scipy.special

mp.mp.dps = 50


def ibeta(a, b, x):
    """Regularized incomplete beta by adaptive quadrature of the density.

    Deliberately avoids continued fractions so the oracle is an independent
    route from the implementation under test. mp.betainc stalls for large
    (a, b), hence the direct integral.
    """
    a, b, x = mp.mpf(a), mp.mpf(b), mp.mpf(x)
    if x == 0:
        return mp.mpf(0)
    if x == 1:
        return mp.mpf(1)
    log_beta = mp.loggamma(a) + mp.loggamma(b) - mp.loggamma(a + b)

    def density(t):
        return mp.e ** ((a - 1) * mp.log(t) + (b - 1) * mp.log(1 - t) - log_beta)

    points = [mp.mpf(0), x]
    if a + b > 2:
        mode = (a - 1) / (a + b - 2)
        if 0 < mode < x:
            points = [mp.mpf(0), mode, x]
    value = mp.quad(density, points)
    check = scipy.special.betainc(float(a), float(b), float(x))
    assert abs(float(value) - check) < 1e-9, (a, b, x, value, check)
    return value


def fmt(v):
    return mp.nstr(v, 20, strip_zeros=False)


# (a, b, x) grid spanning the supported parameter range, weighted toward
# the region where the regularized value is not vanishingly small.
BETA_GRID = [
    (0.5, 0.5, 0.1), (0.5, 0.5, 0.5), (0.5, 0.5, 0.9),
    (1.0, 1.0, 0.25), (1.0, 1.0, 0.75),
    (1.0, 3.0, 0.3), (2.0, 2.0, 0.5), (2.0, 3.0, 1e-4),
    (3.5, 2.25, 0.5), (3.5, 2.25, 0.2), (2.25, 3.5, 0.8),
    (5.0, 1.0, 0.9), (0.5, 8.0, 0.2), (8.0, 0.5, 0.8),
    (10.0, 10.0, 0.05), (10.0, 10.0, 0.4), (10.0, 10.0, 0.5),
    (25.0, 3.0, 0.8), (3.0, 25.0, 0.2),
    (50.0, 50.0, 0.45), (50.0, 50.0, 0.5), (50.0, 50.0, 0.55),
    (100.0, 100.0, 0.5), (100.0, 100.0, 0.47),
    (100.0, 3.5, 0.95), (3.5, 100.0, 0.05),
    (200.0, 300.0, 0.4), (200.0, 300.0, 0.42),
    (500.0, 500.0, 0.48), (500.0, 500.0, 0.5),
    (1000.0, 1000.0, 0.49), (1000.0, 1000.0, 0.5),
    (1000.0, 2.0, 0.995), (2.0, 1000.0, 0.005),
    (2000.0, 4000.0, 0.33), (2000.0, 4000.0, 0.335),
    (5000.0, 5000.0, 0.5), (5000.0, 5000.0, 0.495),
    (10000.0, 10000.0, 0.49), (10000.0, 10000.0, 0.497),
    (10000.0, 10000.0, 0.5), (10000.0, 10000.0, 0.503),
    (10000.0, 30.0, 0.997), (30.0, 10000.0, 0.003),
    (7.0, 0.75, 0.6), (0.75, 7.0, 0.4),
    (1.5, 1.5, 0.3), (4.0, 6.0, 0.35),
    (60.0, 40.0, 0.6), (40.0, 60.0, 0.4),
]
assert len(BETA_GRID) == 50

PEARSON_SETS = [
    # MDS row / best merging loss row of the 8-way GLUE merge.
    ([1.56, 1.47, 1.78, 1.68, 2.51, 1.73, 1.72, 4.89],
     [-1.9, -0.7, -6.6, -8.1, -24.9, -5.2, -1.8, -30.8]),
    ([1.0, 2.0, 3.0], [3.0, 5.0, 7.0]),            # exact line, r = 1
    ([-1.0, 0.0, 1.0], [1.0, 0.0, 1.0]),           # r = 0
    ([0.1, 0.4, 0.2, 0.9, 0.7], [1.2, 0.8, 1.1, 0.3, 0.4]),
    ([2.0, 4.0, 6.0, 8.0, 10.0, 12.0, 14.0], [1.1, 0.9, 3.2, 2.8, 5.1, 4.7, 7.0]),
    ([5.0, 3.0, 8.0, 1.0, 9.0, 2.0, 7.0, 4.0, 6.0, 0.0],
     [2.1, 4.4, 1.0, 6.3, 0.2, 5.5, 1.9, 3.8, 2.7, 7.1]),
    ([0.5, 1.5, 2.5, 3.5, 4.5, 5.5, 6.5, 7.5, 8.5, 9.5, 10.5, 11.5],
     [0.2, 0.1, 0.5, 0.4, 0.9, 0.3, 1.1, 0.8, 1.0, 0.6, 1.4, 1.2]),
    ([3.2, 1.1, 4.8, 2.9, 5.5, 0.7, 3.9, 2.2, 4.1, 1.8,
      5.0, 0.9, 3.5, 2.6, 4.6, 1.4, 5.2, 0.8, 3.1, 2.4],
     [1.0, 2.2, 0.4, 1.5, 0.1, 2.9, 0.8, 1.9, 0.6, 2.1,
      0.3, 2.7, 0.9, 1.6, 0.5, 2.4, 0.2, 2.8, 1.1, 1.7]),
    ([float(i) for i in range(30)],
     [0.0, 2.0, 1.0, 4.0, 3.0, 6.0, 5.0, 8.0, 7.0, 10.0,
      9.0, 12.0, 11.0, 14.0, 13.0, 16.0, 15.0, 18.0, 17.0, 20.0,
      19.0, 22.0, 21.0, 24.0, 23.0, 26.0, 25.0, 28.0, 27.0, 30.0]),
    ([float((7 * i) % 50) for i in range(50)],
     [float((13 * i) % 50) for i in range(50)]),
]

ANOVA_SETS = [
    [[1.0, 2.0, 3.0], [1.0, 2.0, 3.0]],
    [[1.0, 2.0, 3.0, 4.0], [2.0, 3.0, 4.0, 5.0], [5.0, 6.0, 7.0, 8.0]],
    [[10.1, 9.8, 10.3], [10.0, 10.2], [9.9, 10.1, 10.0, 10.2]],
    [[1.0, 1.1, 0.9, 1.2], [3.0, 3.1, 2.9], [5.0, 5.2, 4.8, 5.1], [7.0, 6.9]],
    [[-2.1, -2.4, -15.6, -8.2, -25.7], [-1.9, -2.5, -15.6, -8.1, -25.7],
     [-4.3, -0.7, -6.6, -26.9, -24.9]],
    [[0.5, 0.6, 0.4, 0.7, 0.3, 0.8], [0.6, 0.5, 0.7, 0.4]],
    [[12.0, 15.0, 11.0, 14.0], [13.0, 16.0, 12.0], [11.0, 14.0, 13.0, 15.0, 12.0]],
    [[100.0, 101.0, 99.0], [102.0, 103.0, 101.0], [98.0, 97.0, 99.0],
     [100.5, 101.5], [99.5, 98.5, 100.5]],
    [[1.0, 4.0], [2.0, 5.0], [3.0, 6.0]],
    [[0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0],
     [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0],
     [0.5, 1.5, 2.5, 3.5, 4.5, 5.5, 6.5, 7.5]],
]


def pearson_oracle(x, y):
    n = len(x)
    xs = [mp.mpf(v) for v in x]
    ys = [mp.mpf(v) for v in y]
    mx = mp.fsum(xs) / n
    my = mp.fsum(ys) / n
    sxy = mp.fsum((a - mx) * (b - my) for a, b in zip(xs, ys))
    sxx = mp.fsum((a - mx) ** 2 for a in xs)
    syy = mp.fsum((b - my) ** 2 for b in ys)
    r = sxy / mp.sqrt(sxx * syy)
    df = n - 2
    if abs(r) >= 1:
        return r, mp.mpf(0)
    t2 = r * r * df / (1 - r * r)
    p = ibeta(mp.mpf(df) / 2, mp.mpf('0.5'), df / (df + t2))
    return r, p


def anova_oracle(groups):
    gs = [[mp.mpf(v) for v in g] for g in groups]
    k = len(gs)
    n = sum(len(g) for g in gs)
    grand = mp.fsum(v for g in gs for v in g) / n
    ssb = mp.fsum(len(g) * (mp.fsum(g) / len(g) - grand) ** 2 for g in gs)
    ssw = mp.fsum((v - mp.fsum(g) / len(g)) ** 2 for g in gs for v in g)
    dfb = k - 1
    dfw = n - k
    f = (ssb / dfb) / (ssw / dfw)
    p = ibeta(mp.mpf(dfw) / 2, mp.mpf(dfb) / 2, dfw / (dfw + dfb * f))
    return f, p


def emit():
    print("// Generated by tests/tools/make_stats_oracle.py -- do not edit by hand.")
    print("#pragma once")
    print()
    print("#include <cstddef>")
    print("#include <vector>")
    print()
    print("namespace oracle {")
    print()
    print("struct BetaPoint { double a, b, x, value; };")
    print()
    print("inline const std::vector<BetaPoint> kBetaGrid = {")
    for a, b, x in BETA_GRID:
        v = ibeta(a, b, x)
        print(f"    {{{a!r}, {b!r}, {x!r}, {fmt(v)}}},")
    print("};")
    print()
    print("struct PearsonCase { std::vector<double> x, y; double r, p; };")
    print()
    print("inline const std::vector<PearsonCase> kPearsonCases = {")
    for x, y in PEARSON_SETS:
        r, p = pearson_oracle(x, y)
        xs = ", ".join(repr(v) for v in x)
        ys = ", ".join(repr(v) for v in y)
        print(f"    {{{{{xs}}},")
        print(f"     {{{ys}}},")
        print(f"     {fmt(r)}, {fmt(p)}}},")
    print("};")
    print()
    print("struct AnovaCase { std::vector<std::vector<double>> groups; double f, p; };")
    print()
    print("inline const std::vector<AnovaCase> kAnovaCases = {")
    for groups in ANOVA_SETS:
        f, p = anova_oracle(groups)
        gs = ", ".join("{" + ", ".join(repr(v) for v in g) + "}" for g in groups)
        print(f"    {{{{{gs}}},")
        print(f"     {fmt(f)}, {fmt(p)}}},")
    print("};")
    print()
    print("}  // namespace oracle")


if __name__ == "__main__":
    emit()
