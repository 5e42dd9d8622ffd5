"""From symmetric polynomials to support strings, exactly.

Each string x maps to the integer y = P(2; x) = sum_i x_i 2^i — its own
binary expansion shifted up one bit.  The recovered sigma_k evaluated at
z = 2 are the elementary symmetric functions of the y's, so

    prod_i (z - y_i) = z^l - Q_1(2) z^(l-1) + ... + (-1)^l Q_l(2)

is a monic integer polynomial with distinct nonnegative integer roots.
Roots are recovered with exact big-integer arithmetic: high-precision
approximations supply brackets, each bracket is bisected on exact sign
changes down to its unique integer, and the polynomial is deflated exactly
after every root.  Any inexactness (non-root, nonzero deflation remainder)
means upstream recovery was wrong and is reported as corrupt input.
"""

from __future__ import annotations

from dataclasses import dataclass

import mpmath

from .core import BitString, CorruptInputError, ParameterError
from .coeffs import SymmetricPolynomial


@dataclass(frozen=True)
class EncodedSupport:
    """Distinct integers y_i = P(2; x^(i)); bit 0 of each is always 0."""

    encodings: tuple

    def __post_init__(self):
        ys = tuple(int(y) for y in self.encodings)
        if len(set(ys)) != len(ys):
            raise CorruptInputError("encodings must be pairwise distinct")
        if any(y < 0 for y in ys):
            raise CorruptInputError("encodings must be nonnegative")
        object.__setattr__(self, "encodings", ys)


@dataclass(frozen=True)
class MonicIntegerPolynomial:
    """coeffs[i] is the z^i coefficient; leading coefficient must be 1."""

    coeffs: tuple

    def __post_init__(self):
        cs = tuple(int(c) for c in self.coeffs)
        if not cs or cs[-1] != 1:
            raise ParameterError("polynomial must be monic")
        object.__setattr__(self, "coeffs", cs)

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def eval_int(self, x: int) -> int:
        acc = 0
        for c in reversed(self.coeffs):
            acc = acc * x + c
        return acc


def encode_string(x: BitString) -> int:
    """y = P(2; x) = sum_i x_i 2^i, exactly."""
    y = 0
    for i, b in enumerate(x.bits, start=1):
        if b:
            y += 1 << i
    return y


def decode_string(y: int, n: int) -> BitString:
    """Read bits 1..n of y; bit 0 must be 0 and y must fit in n bits."""
    y = int(y)
    if y < 0 or y > (1 << (n + 1)) - 2:
        raise CorruptInputError(f"encoding {y} out of range for n={n}")
    if y & 1:
        raise CorruptInputError(f"encoding {y} has bit 0 set")
    return BitString(tuple((y >> i) & 1 for i in range(1, n + 1)))


def assemble_char_poly(sigmas) -> MonicIntegerPolynomial:
    """z^l - Q_1(2) z^(l-1) + ... + (-1)^l Q_l(2), with each Q_k = sigma_k
    evaluated at 2 in exact integer arithmetic."""
    sigmas = list(sigmas)
    lp = len(sigmas)
    for k, s in enumerate(sigmas, start=1):
        if not isinstance(s, SymmetricPolynomial) or s.k != k:
            raise ParameterError("sigmas must be sigma_1..sigma_l in order")
    coeffs = [0] * (lp + 1)
    coeffs[lp] = 1
    for k, s in enumerate(sigmas, start=1):
        coeffs[lp - k] = (-1) ** k * s.eval_int(2)
    return MonicIntegerPolynomial(tuple(coeffs))


def _synthetic_division(coeffs, root):
    """Divide by (z - root) exactly: coeffs ascending; returns
    (quotient ascending, remainder)."""
    d = len(coeffs) - 1
    quot = [0] * d
    quot[d - 1] = coeffs[d]
    for i in range(d - 1, 0, -1):
        quot[i - 1] = coeffs[i] + root * quot[i]
    remainder = coeffs[0] + root * quot[0]
    return tuple(quot), remainder


def _approx_roots(coeffs):
    """Nearest-integer root approximations used only to locate brackets."""
    bits = max(int(c).bit_length() for c in coeffs)
    with mpmath.workdps(40 + bits):
        roots = mpmath.polyroots(
            [mpmath.mpf(c) for c in reversed(coeffs)], maxsteps=500, extraprec=200
        )
        return sorted(int(mpmath.nint(mpmath.re(r))) for r in roots)


def _bisect_integer_root(coeffs, lo, hi, poly_eval):
    """Exact bisection on a sign-changing integer bracket [lo, hi]."""
    flo = poly_eval(coeffs, lo)
    fhi = poly_eval(coeffs, hi)
    if flo == 0:
        return lo
    if fhi == 0:
        return hi
    if (flo > 0) == (fhi > 0):
        return None
    while hi - lo > 1:
        mid = (lo + hi) // 2
        fmid = poly_eval(coeffs, mid)
        if fmid == 0:
            return mid
        if (fmid > 0) == (flo > 0):
            lo, flo = mid, fmid
        else:
            hi, fhi = mid, fmid
    return None


def _eval_ascending(coeffs, x):
    acc = 0
    for c in reversed(coeffs):
        acc = acc * x + c
    return acc


def integer_roots(poly: MonicIntegerPolynomial, n: int) -> EncodedSupport:
    """All roots of a monic polynomial promised to split into distinct
    linear factors over the nonnegative integers (each root <= 2^(n+1))."""
    coeffs = list(poly.coeffs)
    cauchy = 1 + max(abs(c) for c in coeffs)
    limit = min(cauchy, (1 << (n + 1)) - 1)
    roots = []
    while len(coeffs) > 1:
        found = None
        for cand in _approx_roots(coeffs):
            for y in range(max(0, cand - 2), min(limit, cand + 2) + 1):
                if _eval_ascending(coeffs, y) == 0:
                    found = y
                    break
            if found is None:
                # widen to an exact sign-change bracket and bisect
                lo = max(0, cand - 2)
                hi = min(limit, cand + 2)
                width = 4
                while hi - lo >= 1:
                    y = _bisect_integer_root(coeffs, lo, hi, _eval_ascending)
                    if y is not None:
                        found = y
                        break
                    if lo == 0 and hi == limit:
                        break
                    width *= 4
                    lo = max(0, cand - width)
                    hi = min(limit, cand + width)
            if found is not None:
                break
        if found is None:
            raise CorruptInputError("no exact integer root located; upstream recovery wrong")
        quot, rem = _synthetic_division(coeffs, found)
        if rem != 0:
            raise CorruptInputError("deflation left a nonzero remainder")
        if found in roots:
            raise CorruptInputError("repeated root; support strings must be distinct")
        roots.append(found)
        coeffs = list(quot)
    return EncodedSupport(tuple(sorted(roots)))


def decode_support(enc: EncodedSupport, n: int):
    """Decode all encodings; output sorted lexicographically by string."""
    return tuple(sorted(decode_string(y, n) for y in enc.encodings))
