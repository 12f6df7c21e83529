"""Exact rank of integer/rational matrices by sparse fraction-free elimination.

Rows are held as ``{column: int}`` dictionaries and reduced against a growing
set of pivot rows.  Rational input is cleared of denominators row by row, so
all arithmetic is on Python integers (no overflow) and every row stays
primitive (content 1), which keeps entries small on incidence-type matrices.
"""

from __future__ import annotations

from fractions import Fraction
from math import gcd

import numpy as np
import scipy.sparse as sp


def _primitive(row: dict[int, int]) -> dict[int, int]:
    g = 0
    for v in row.values():
        g = gcd(g, v)
        if g == 1:
            return row
    if g > 1:
        return {c: v // g for c, v in row.items()}
    return row


def _as_int_rows(matrix) -> list[dict[int, int]]:
    if sp.issparse(matrix):
        m = sp.csr_matrix(matrix)
        rows = []
        for i in range(m.shape[0]):
            cols = m.indices[m.indptr[i]:m.indptr[i + 1]]
            vals = m.data[m.indptr[i]:m.indptr[i + 1]]
            rows.append({int(c): _to_int_check(v) for c, v in zip(cols, vals) if v != 0})
        return rows
    if isinstance(matrix, np.ndarray):
        return [{int(c): _to_int_check(v) for c, v in enumerate(r) if v != 0} for r in matrix]
    rows = []
    for r in matrix:
        items = r.items() if isinstance(r, dict) else enumerate(r)
        frac = {int(c): Fraction(v) for c, v in items if v != 0}
        den = 1
        for v in frac.values():
            den = den * v.denominator // gcd(den, v.denominator)
        rows.append({c: int(v * den) for c, v in frac.items()})
    return rows


def _to_int_check(v) -> int:
    iv = int(v)
    if iv != v:
        raise TypeError("floating-point entries are not exact; pass Fractions or integers")
    return iv


def rank(matrix) -> int:
    """Rank over the rationals.

    ``matrix`` may be a scipy sparse or numpy integer matrix, or a sequence of
    rows, each a dict ``{column: value}`` or a dense sequence of
    ints/Fractions.
    """
    rows = _as_int_rows(matrix)
    pivots: dict[int, dict[int, int]] = {}
    # short rows first: they make sparse pivots
    for row in sorted(rows, key=len):
        row = dict(row)
        while row:
            c = min(row)
            piv = pivots.get(c)
            if piv is None:
                pivots[c] = _primitive(row)
                break
            a, b = piv[c], row[c]
            g = gcd(a, b)
            fa, fb = a // g, b // g
            # row <- fa * row - fb * piv, which cancels column c
            new = {k: fa * v for k, v in row.items()} if fa != 1 else row
            for k, v in piv.items():
                val = new.get(k, 0) - fb * v
                if val:
                    new[k] = val
                else:
                    new.pop(k, None)
            row = _primitive(new) if new else new
    return len(pivots)


def nullity(matrix, ncols: int) -> int:
    return ncols - rank(matrix)
