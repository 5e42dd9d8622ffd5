"""Unbiased moment estimators for deletion-channel traces.

For a trace x~ (zero-padded) and complex z, g_m(x~, z) averages to
P(z; x)^m over the channel.  It is a sum over ordered compositions
B = (b_1..b_k) of m:

    g_m = sum_B multinom(m; B) * p^(-k) * z^(b_1 + 2 b_2 + ... + k b_k)
              / (w_{B,1} ... w_{B,k}) * f(x~, w_B),

with w_{B,r} = (z^(b_r + ... + b_k) - q) / p and f the gap-weighted chain
sum over increasing index tuples.  f is computed by an O(n k) prefix
recurrence rather than enumerating chains; the recurrence uses only a
multiplicative running accumulator, so zero weights need no special case.

A grid point where some |w_{B,r}| < 1e-12 is singular for the estimator
(the composition coefficient divides by it) and is reported as such.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .core import ParameterError, ProblemParams
from .channel import Trace
from .zgrid import GridPoint

SINGULAR_TOL = 1e-12
_CHUNK = 1 << 16
_JACKKNIFE_GROUPS = 10


class SingularGridPointError(ParameterError):
    """Some composition weight w_{B,r} vanishes at this z."""

    def __init__(self, z, composition, r):
        super().__init__(
            f"w vanishes at z={z} for composition {composition} (position {r + 1})"
        )
        self.z = z
        self.composition = composition
        self.r = r


def compositions(m: int):
    """All 2^(m-1) ordered compositions of m, lexicographic by parts."""
    if m < 1:
        raise ParameterError("m must be >= 1")

    def gen(rem):
        if rem == 0:
            yield ()
            return
        for first in range(1, rem + 1):
            for rest in gen(rem - first):
                yield (first,) + rest

    return list(gen(m))


def multinomial(m: int, parts) -> int:
    """Exact multinomial coefficient m! / (b_1! ... b_k!)."""
    if sum(parts) != m:
        raise ParameterError("parts must sum to m")
    out = math.factorial(m)
    for b in parts:
        out //= math.factorial(b)
    return out


def composition_weights(z: complex, parts, p: float):
    """w_{B,r} = (z^(b_r + ... + b_k) - q) / p for r = 1..k.

    Raises SingularGridPointError when any weight is (near) zero."""
    q = 1.0 - p
    suffix = 0
    w = [0j] * len(parts)
    for r in range(len(parts) - 1, -1, -1):
        suffix += parts[r]
        w[r] = (z ** suffix - q) / p
        if abs(w[r]) < SINGULAR_TOL:
            raise SingularGridPointError(z, tuple(parts), r)
    return w


def f_sum_batch(X: np.ndarray, w) -> np.ndarray:
    """f(x~, w) for each trace row of X (shape (N, n), entries 0/1).

    Prefix recurrence over chain length r: S_r(j) holds the weighted sum of
    all r-chains ending at index j; the accumulator carries
    sum_{j' < j} S_{r-1}(j') * w_r^(j - j'), updated multiplicatively.
    """
    N, n = X.shape
    k = len(w)
    if k < 1:
        raise ParameterError("weight vector must be nonempty")
    if k > n:
        return np.zeros(N, dtype=complex)
    powers = np.empty(n, dtype=complex)
    acc_pow = w[0]
    for j in range(n):
        powers[j] = acc_pow
        acc_pow *= w[0]
    S = X * powers[None, :]
    for r in range(1, k):
        acc = np.zeros(N, dtype=complex)
        S_next = np.empty((N, n), dtype=complex)
        for j in range(n):
            S_next[:, j] = X[:, j] * acc
            acc = (acc + S[:, j]) * w[r]
        S = S_next
    return S.sum(axis=1)


def f_sum(trace: Trace, w) -> complex:
    """f(x~, w) = sum over 1 <= i_1 < ... < i_k <= n of
    x~_{i_1} ... x~_{i_k} w_1^{i_1} w_2^{i_2-i_1} ... w_k^{i_k-i_{k-1}}."""
    X = np.array([trace.bits], dtype=np.int8)
    return complex(f_sum_batch(X, list(w))[0])


def g_batch(X: np.ndarray, z: complex, m: int, params: ProblemParams) -> np.ndarray:
    """g_m(x~, z) for each trace row of X."""
    if m < 1:
        raise ParameterError("m must be >= 1")
    p = params.p
    total = np.zeros(X.shape[0], dtype=complex)
    for parts in compositions(m):
        k = len(parts)
        w = composition_weights(z, parts, p)
        expo = sum((r + 1) * b for r, b in enumerate(parts))
        denom = 1.0 + 0.0j
        for wr in w:
            denom *= wr
        coef = multinomial(m, parts) * p ** (-k) * z ** expo / denom
        total += coef * f_sum_batch(X, w)
    return total


def g_estimate(trace: Trace, z: complex, m: int, params: ProblemParams) -> complex:
    """Single-trace unbiased estimate of P(z; x)^m."""
    X = np.array([trace.bits], dtype=np.int8)
    return complex(g_batch(X, z, m, params)[0])


@dataclass
class MomentEstimates:
    """Sample means of g_k per (grid point, k), with counts and standard
    errors for diagnostics.  Points where the estimator is singular are
    dropped and recorded in `dropped` with the offending composition."""

    grid: tuple
    k_max: int
    means: dict = field(default_factory=dict)  # (point index, k) -> complex
    counts: dict = field(default_factory=dict)  # (point index, k) -> int
    stderrs: dict = field(default_factory=dict)  # (point index, k) -> float
    dropped: dict = field(default_factory=dict)  # point index -> reason string
    # per-group partial sums for jackknife error estimates downstream:
    # (point index, k) -> list of (complex sum, count) over sample groups
    group_sums: dict = field(default_factory=dict)

    def usable_points(self):
        return [gp for gp in self.grid if gp.index not in self.dropped]

    def point(self, index: int) -> GridPoint:
        for gp in self.grid:
            if gp.index == index:
                return gp
        raise ParameterError(f"no grid point with index {index}")

    def to_json(self) -> str:
        recs = []
        for (i, k), mean in sorted(self.means.items()):
            gp = self.point(i)
            recs.append(
                {
                    "z": [gp.z.real, gp.z.imag],
                    "grid_kind": gp.kind,
                    "k": k,
                    "mean": [mean.real, mean.imag],
                    "count": self.counts[(i, k)],
                }
            )
        return json.dumps(recs)


def moments_from_values(grid, k_max: int, value_fn) -> MomentEstimates:
    """Build MomentEstimates from a callable (z, k) -> complex (e.g. exact
    power sums, or a noisy wrapper in tests); counts are set to 1."""
    est = MomentEstimates(grid=tuple(grid), k_max=k_max)
    for gp in grid:
        for k in range(k_max + 1):
            est.means[(gp.index, k)] = 1.0 + 0j if k == 0 else complex(value_fn(gp.z, k))
            est.counts[(gp.index, k)] = 1
            est.stderrs[(gp.index, k)] = 0.0
    return est


def accumulate_moments(
    trace_source,
    grid,
    k_max: int,
    params: ProblemParams,
    sample_count: int,
) -> MomentEstimates:
    """Mean of g_k over the same sample_count traces, per grid point and
    0 <= k <= k_max (g_0 := 1).

    trace_source is an iterable of 0/1 arrays of shape (batch, n); the same
    traces feed every (z, k).  Chunks are reduced in a fixed order, so
    results are reproducible.  A singular grid point is dropped and flagged,
    never silently skipped.
    """
    if sample_count < 1:
        raise ParameterError("sample_count must be >= 1")
    if k_max < 1:
        raise ParameterError("k_max must be >= 1")
    chunks = []
    total = 0
    for batch in trace_source:
        batch = np.asarray(batch, dtype=np.int8)
        if batch.ndim != 2 or batch.shape[1] != params.n:
            raise ParameterError("trace batch must have shape (count, n)")
        if total + len(batch) > sample_count:
            batch = batch[: sample_count - total]
        for lo in range(0, len(batch), _CHUNK):
            chunks.append(batch[lo : lo + _CHUNK])
        total += len(batch)
        if total >= sample_count:
            break
    if total < sample_count:
        raise ParameterError(
            f"trace source exhausted after {total} of {sample_count} traces"
        )

    n_groups = min(len(chunks), _JACKKNIFE_GROUPS)
    est = MomentEstimates(grid=tuple(grid), k_max=k_max)
    # traces and channel parameters are real, so g_k(x~, conj(z)) is the
    # conjugate of g_k(x~, z); conjugate grid points reuse earlier work
    done = {}
    for gp in grid:
        conj_key = (round(gp.z.real, 15), round(-gp.z.imag, 15))
        if conj_key in done:
            src = done[conj_key]
            if src in est.dropped:
                est.dropped[gp.index] = est.dropped[src]
                continue
            for k in range(k_max + 1):
                est.means[(gp.index, k)] = est.means[(src, k)].conjugate()
                est.counts[(gp.index, k)] = est.counts[(src, k)]
                est.stderrs[(gp.index, k)] = est.stderrs[(src, k)]
                if (src, k) in est.group_sums:
                    est.group_sums[(gp.index, k)] = [
                        (s.conjugate(), c) for s, c in est.group_sums[(src, k)]
                    ]
            continue
        done[(round(gp.z.real, 15), round(gp.z.imag, 15))] = gp.index
        try:
            for k in range(1, k_max + 1):
                s = 0.0 + 0.0j
                s2 = 0.0
                groups = [[0.0 + 0.0j, 0] for _ in range(n_groups)]
                for ci, chunk in enumerate(chunks):
                    vals = g_batch(chunk, gp.z, k, params)
                    part = vals.sum()
                    s += part
                    s2 += float((np.abs(vals) ** 2).sum())
                    g = groups[ci % n_groups]
                    g[0] += part
                    g[1] += len(chunk)
                mean = s / sample_count
                var = max(s2 / sample_count - abs(mean) ** 2, 0.0)
                est.means[(gp.index, k)] = mean
                est.counts[(gp.index, k)] = sample_count
                est.stderrs[(gp.index, k)] = math.sqrt(var / sample_count)
                est.group_sums[(gp.index, k)] = [(g[0], g[1]) for g in groups]
        except SingularGridPointError as exc:
            for k in range(1, k_max + 1):
                est.means.pop((gp.index, k), None)
                est.counts.pop((gp.index, k), None)
                est.stderrs.pop((gp.index, k), None)
                est.group_sums.pop((gp.index, k), None)
            est.dropped[gp.index] = str(exc)
            continue
        est.means[(gp.index, 0)] = 1.0 + 0.0j
        est.counts[(gp.index, 0)] = sample_count
        est.stderrs[(gp.index, 0)] = 0.0
    return est
