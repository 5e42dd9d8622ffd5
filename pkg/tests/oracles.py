"""Shared independent oracles for the tests.

Everything here recomputes expected values by a different route than the
library (direct enumeration, exact integer polynomial arithmetic) so the
tests compare two independent implementations.
"""

import itertools

import numpy as np

from delpop.core import BitString, SparseDistribution


def random_bitstring(rng, n):
    return BitString(tuple(int(b) for b in rng.integers(0, 2, n)))


def random_support(rng, n, size):
    seen = set()
    while len(seen) < size:
        seen.add(tuple(int(b) for b in rng.integers(0, 2, n)))
    return tuple(BitString(b) for b in sorted(seen))


def random_distribution(rng, n, ell, min_weight=0.2):
    support = random_support(rng, n, ell)
    w = rng.uniform(min_weight, 1.0, ell)
    w = w / w.sum()
    w = list(float(a) for a in w)
    w[-1] = 1.0 - sum(w[:-1])
    return SparseDistribution(support, tuple(w))


def poly_mul(a, b):
    """Exact integer polynomial product, ascending coefficients."""
    out = [0] * (len(a) + len(b) - 1)
    for i, ai in enumerate(a):
        if ai:
            for j, bj in enumerate(b):
                out[i + j] += ai * bj
    return out


def poly_add(a, b):
    m = max(len(a), len(b))
    return [
        (a[i] if i < len(a) else 0) + (b[i] if i < len(b) else 0) for i in range(m)
    ]


def bit_poly(x):
    """P(z; x) as an ascending integer coefficient list (constant term 0)."""
    return [0] + [int(b) for b in x.bits]


def exact_sigma_coeffs(support, k, n):
    """Coefficients of sigma_k over the support, exact, padded to k*n + 1."""
    polys = [bit_poly(x) for x in support]
    total = [0]
    for comb in itertools.combinations(range(len(polys)), k):
        term = [1]
        for t in comb:
            term = poly_mul(term, polys[t])
        total = poly_add(total, term)
    total = total + [0] * (k * n + 1 - len(total))
    return tuple(total[: k * n + 1])


def f_sum_naive(bits, w):
    """Direct enumeration of the gap-weighted chain sum over index tuples."""
    n = len(bits)
    k = len(w)
    total = 0.0 + 0.0j
    for idx in itertools.combinations(range(1, n + 1), k):
        if any(bits[i - 1] == 0 for i in idx):
            continue
        term = 1.0 + 0.0j
        prev = 0
        for r, i in enumerate(idx):
            term *= w[r] ** (i - prev)
            prev = i
        total += term
    return total


def elementary_symmetric(values, k):
    return sum(
        np.prod(c) for c in itertools.combinations([complex(v) for v in values], k)
    )
