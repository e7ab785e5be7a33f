#!/usr/bin/env python3
"""Term-by-term divergence values frozen into tests/test_numerics.cpp.

Uses exact rational arithmetic for the distributions and mpmath for the logs,
so nothing here shares code or rounding paths with the C++ implementation.

Run: python3 tests/oracles/divergence_oracle.py
"""
from fractions import Fraction as F

import mpmath

mpmath.mp.dps = 40


def mp(x):
    return mpmath.mpf(x.numerator) / x.denominator


def kl(p, q):
    return sum(mp(a) * mpmath.log(mp(a / b)) for a, b in zip(p, q) if a > 0)


def js(p, q):
    m = [(a + b) / 2 for a, b in zip(p, q)]
    return (kl(p, m) + kl(q, m)) / 2


print("JS([1/2,1/2] || [1,0]) =", mpmath.nstr(js([F(1, 2), F(1, 2)], [F(1), F(0)]), 17))
print("KL([3/4,1/4] || [1/2,1/2]) =", mpmath.nstr(kl([F(3, 4), F(1, 4)], [F(1, 2), F(1, 2)]), 17))
print("JS([1,0] || [0,1]) = ln 2 =", mpmath.nstr(js([F(1), F(0)], [F(0), F(1)]), 17))
