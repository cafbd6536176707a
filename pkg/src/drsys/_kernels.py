"""Convolution kernels shared by the numeric and the symbolic engines.

Exact kernels work on sequences of nonnegative Python integers.  Small
inputs go through a schoolbook loop; large ones become FLINT integer
polynomials, whose multiplication packs coefficients into one big
integer (Kronecker substitution) or splits them over word-size primes,
whichever is cheaper.
"""
from __future__ import annotations

from typing import Sequence

import numpy as np
from flint import fmpz_poly

# below this many coefficient products the direct loop wins
_DIRECT_LIMIT = 2048


def _direct(a: Sequence[int], b: Sequence[int]) -> list[int]:
    out = [0] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        if x:
            for j, y in enumerate(b):
                out[i + j] += x * y
    return out


def _coeffs(poly: fmpz_poly, length: int) -> list[int]:
    c = [int(x) for x in poly.coeffs()]
    return c + [0] * (length - len(c))


def int_convolve(a: Sequence[int], b: Sequence[int]) -> list[int]:
    """Exact convolution of two nonnegative integer sequences."""
    if not a or not b:
        return []
    if len(a) * len(b) <= _DIRECT_LIMIT:
        return _direct(a, b)
    return _coeffs(fmpz_poly(list(a)) * fmpz_poly(list(b)), len(a) + len(b) - 1)


def int_convolve_power(a: Sequence[int], m: int) -> list[int]:
    """m-fold self-convolution of a nonnegative integer sequence."""
    if m < 1:
        raise ValueError("m must be >= 1")
    if not a:
        return []
    if len(a) ** 2 <= _DIRECT_LIMIT and m <= 3:
        out = list(a)
        for _ in range(m - 1):
            out = _direct(out, a)
        return out
    return _coeffs(fmpz_poly(list(a)) ** m, (len(a) - 1) * m + 1)


def float_convolve_power(
    a: np.ndarray, m: int, method: str = "direct"
) -> tuple[np.ndarray, float]:
    """m-fold self-convolution of a float mass vector.

    Returns the result and the total negative mass clamped to zero, which
    is always 0.0 for ``method="direct"``.  The FFT route is faster for
    long vectors but only accurate to ~1e-16 in absolute terms, so masses
    far below that level are noise.
    """
    if method not in ("direct", "fft"):
        raise ValueError(f"unknown convolution method {method!r}")
    if method == "direct":
        # repeated squaring keeps the number of long convolutions at O(log m)
        acc = None
        base = a
        e = m
        while e:
            if e & 1:
                acc = base if acc is None else np.convolve(acc, base)
            e >>= 1
            if e:
                base = np.convolve(base, base)
        return acc, 0.0

    from scipy.signal import fftconvolve

    out = a
    for _ in range(m - 1):
        out = fftconvolve(out, a)
    neg = out < 0
    clamped = float(-out[neg].sum())
    out = np.where(neg, 0.0, out)
    return out, clamped
