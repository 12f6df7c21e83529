"""Closed-form spectra of Lambda, L and the Hodge Laplacian on the round sphere.

The sphere S^n bounds the unit ball in R^{n+1}.  Eigenspaces are traces of
homogeneous harmonic polynomial forms:

* ``Hprime`` (traces of H'_{k-1,p}, closed):  Lambda = 0,
  L = (k+p-1)(n+2k+1)/(n+2k-1),  Delta = (k+p-1)(n+k-p);
* ``Hdoubleprime`` (traces of H''_{k,p}, i_x omega = 0):  Lambda = L = k+p,
  Delta = (k+p)(n+k-p-1).

Multiplicities are not taken from formulas: they are dimensions computed by
exact rational rank on monomial bases of polynomial forms.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from math import comb

import numpy as np
import scipy.sparse as sp

from . import exact

FAMILIES = ("Hprime", "Hdoubleprime")
SPACES = ("P", "H", "Hprime", "Hdoubleprime")
MAX_N = 4
MAX_K = 5


def fraction_str(x: Fraction | int) -> str:
    x = Fraction(x)
    return f"{x.numerator}/{x.denominator}"


@lru_cache(maxsize=None)
def _monomials(nvar: int, k: int) -> tuple[tuple[tuple[int, ...], ...], dict]:
    if k < 0:
        return (), {}
    mons = []
    for combo in itertools.combinations_with_replacement(range(nvar), k):
        e = [0] * nvar
        for c in combo:
            e[c] += 1
        mons.append(tuple(e))
    mons.sort(reverse=True)
    return tuple(mons), {m: i for i, m in enumerate(mons)}


@lru_cache(maxsize=None)
def _subsets(nvar: int, p: int) -> tuple[tuple[tuple[int, ...], ...], dict]:
    if p < 0 or p > nvar:
        return (), {}
    subs = tuple(itertools.combinations(range(nvar), p))
    return subs, {s: i for i, s in enumerate(subs)}


def space_dim(nvar: int, k: int, p: int) -> int:
    """dim P_{k,p} on R^nvar."""
    if k < 0 or p < 0 or p > nvar:
        return 0
    return comb(k + nvar - 1, nvar - 1) * comb(nvar, p)


class _Builder:
    """Sparse integer matrix from (row, col, value) triples with a fixed shape."""

    def __init__(self, nrow: int, ncol: int):
        self.shape = (nrow, ncol)
        self.r, self.c, self.v = [], [], []

    def add(self, i: int, j: int, v: int) -> None:
        if v:
            self.r.append(i)
            self.c.append(j)
            self.v.append(v)

    def build(self) -> sp.csr_matrix:
        m = sp.coo_matrix((np.array(self.v, dtype=np.int64), (self.r, self.c)), shape=self.shape)
        return m.tocsr()


def _index(nvar: int, k: int, p: int, mono, sub) -> int:
    _, mi = _monomials(nvar, k)
    _, si = _subsets(nvar, p)
    return mi[mono] * len(_subsets(nvar, p)[0]) + si[sub]


def _basis(nvar: int, k: int, p: int):
    mons, _ = _monomials(nvar, k)
    subs, _ = _subsets(nvar, p)
    for mono in mons:
        for sub in subs:
            yield _index(nvar, k, p, mono, sub), mono, sub


def _shift(mono, j: int, by: int):
    e = list(mono)
    e[j] += by
    return tuple(e)


def laplacian(nvar: int, k: int, p: int) -> sp.csr_matrix:
    """Componentwise sum of second derivatives, P_{k,p} -> P_{k-2,p}."""
    b = _Builder(space_dim(nvar, k - 2, p), space_dim(nvar, k, p))
    if k >= 2:
        for col, mono, sub in _basis(nvar, k, p):
            for j in range(nvar):
                a = mono[j]
                if a >= 2:
                    b.add(_index(nvar, k - 2, p, _shift(mono, j, -2), sub), col, a * (a - 1))
    return b.build()


def _contract_sign(sub, j):
    """i_{e_j} dx_sub = sign * dx_{sub without j}; sign 0 if j not in sub."""
    if j not in sub:
        return 0, None
    pos = sub.index(j)
    return (-1) ** pos, sub[:pos] + sub[pos + 1:]


def _wedge_sign(sub, j):
    """dx_j ^ dx_sub = sign * dx_{sub with j}; sign 0 if j in sub."""
    if j in sub:
        return 0, None
    pos = sum(1 for s in sub if s < j)
    return (-1) ** pos, tuple(sorted(sub + (j,)))


def codifferential(nvar: int, k: int, p: int) -> sp.csr_matrix:
    """Euclidean delta = -sum_j i_{e_j} d/dx_j, P_{k,p} -> P_{k-1,p-1}."""
    b = _Builder(space_dim(nvar, k - 1, p - 1), space_dim(nvar, k, p))
    if k >= 1 and p >= 1:
        for col, mono, sub in _basis(nvar, k, p):
            for j in range(nvar):
                if mono[j] == 0:
                    continue
                s, rest = _contract_sign(sub, j)
                if s:
                    b.add(_index(nvar, k - 1, p - 1, _shift(mono, j, -1), rest), col, -s * mono[j])
    return b.build()


def exterior(nvar: int, k: int, p: int) -> sp.csr_matrix:
    """Exterior derivative, P_{k,p} -> P_{k-1,p+1}."""
    b = _Builder(space_dim(nvar, k - 1, p + 1), space_dim(nvar, k, p))
    if k >= 1 and p < nvar:
        for col, mono, sub in _basis(nvar, k, p):
            for j in range(nvar):
                if mono[j] == 0:
                    continue
                s, up = _wedge_sign(sub, j)
                if s:
                    b.add(_index(nvar, k - 1, p + 1, _shift(mono, j, -1), up), col, s * mono[j])
    return b.build()


def radial_contraction(nvar: int, k: int, p: int) -> sp.csr_matrix:
    """i_x with x the position field, P_{k,p} -> P_{k+1,p-1}."""
    b = _Builder(space_dim(nvar, k + 1, p - 1), space_dim(nvar, k, p))
    if p >= 1:
        for col, mono, sub in _basis(nvar, k, p):
            for j in sub:
                s, rest = _contract_sign(sub, j)
                b.add(_index(nvar, k + 1, p - 1, _shift(mono, j, 1), rest), col, s)
    return b.build()


def radial_wedge(nvar: int, k: int, p: int) -> sp.csr_matrix:
    """omega -> (sum_j x_j dx_j) ^ omega, P_{k,p} -> P_{k+1,p+1}.

    Its kernel is exactly the set of forms whose pullback to the unit sphere
    vanishes (homogeneity extends vanishing on the sphere to all of R^nvar).
    """
    b = _Builder(space_dim(nvar, k + 1, p + 1), space_dim(nvar, k, p))
    if p < nvar:
        for col, mono, sub in _basis(nvar, k, p):
            for j in range(nvar):
                s, up = _wedge_sign(sub, j)
                if s:
                    b.add(_index(nvar, k + 1, p + 1, _shift(mono, j, 1), up), col, s)
    return b.build()


def _constraints(nvar: int, k: int, p: int, space: str) -> list[sp.csr_matrix]:
    if space == "P":
        return []
    out = [laplacian(nvar, k, p), codifferential(nvar, k, p)]
    if space == "Hprime":
        out.append(exterior(nvar, k, p))
    elif space == "Hdoubleprime":
        out.append(radial_contraction(nvar, k, p))
    return out


def _stacked_rank(mats: list[sp.csr_matrix], ncol: int) -> int:
    mats = [m for m in mats if m.shape[0]]
    if not mats or ncol == 0:
        return 0
    return exact.rank(sp.vstack(mats).tocsr())


def _check_range(n: int, p: int, k: int) -> None:
    if not 1 <= n <= MAX_N:
        raise ValueError(f"sphere dimension n={n} outside the exact oracle range 1..{MAX_N}")
    if not 0 <= k <= MAX_K:
        raise ValueError(f"polynomial degree k={k} outside the exact oracle range 0..{MAX_K}")
    if p < 0:
        raise ValueError("form degree must be nonnegative")


@lru_cache(maxsize=None)
def dimension_oracle(n: int, p: int, k: int, space: str, restricted: bool = False) -> int:
    """Dimension of a space of homogeneous polynomial p-forms of degree k on R^{n+1}.

    Parameters
    ----------
    n : sphere dimension (the forms live on R^{n+1})
    space : one of ``P``, ``H``, ``Hprime``, ``Hdoubleprime``
    restricted : if True, the dimension of the traces of that space on S^n

    Notes
    -----
    Kernels are computed by exact rank of stacked integer operator matrices.
    The trace dimension is rank([C; x^]) - rank(C), where C are the defining
    constraints and x^ is the wedge with the radial 1-form.
    """
    if space not in SPACES:
        raise ValueError(f"unknown space {space!r}; expected one of {SPACES}")
    _check_range(n, p, k)
    nvar = n + 1
    ncol = space_dim(nvar, k, p)
    if ncol == 0:
        return 0
    cons = _constraints(nvar, k, p, space)
    rc = _stacked_rank(cons, ncol)
    if not restricted:
        return ncol - rc
    return _stacked_rank(cons + [radial_wedge(nvar, k, p)], ncol) - rc


@dataclass(frozen=True)
class BallSpectrumEntry:
    n: int
    p: int
    k: int
    family: str
    lambda_eigenvalue: Fraction
    L_eigenvalue: Fraction
    delta_eigenvalue: Fraction
    multiplicity: int

    def to_dict(self) -> dict:
        return {
            "n": self.n, "p": self.p, "k": self.k, "family": self.family,
            "lambda": fraction_str(self.lambda_eigenvalue),
            "L": fraction_str(self.L_eigenvalue),
            "delta": fraction_str(self.delta_eigenvalue),
            "multiplicity": self.multiplicity,
        }


def ball_entry(n: int, p: int, k: int, family: str) -> BallSpectrumEntry:
    """Eigenvalues of Lambda, L and Delta on the traces of one polynomial family on S^n."""
    if family not in FAMILIES:
        raise ValueError(f"unknown family {family!r}; expected one of {FAMILIES}")
    if k < 1:
        raise ValueError("k must be at least 1")
    lo = 1 if family == "Hprime" else 0
    if not lo <= p <= n - 1:
        raise ValueError(f"degree p={p} outside {lo}..{n - 1} for family {family}")
    if family == "Hdoubleprime":
        lam = Fraction(k + p)
        big_l = lam
        delta = Fraction((k + p) * (n + k - p - 1))
        mult = dimension_oracle(n, p, k, "Hdoubleprime", restricted=True)
    else:
        lam = Fraction(0)
        big_l = Fraction((k + p - 1) * (n + 2 * k + 1), n + 2 * k - 1)
        delta = Fraction((k + p - 1) * (n + k - p))
        mult = dimension_oracle(n, p, k - 1, "Hprime", restricted=True)
    return BallSpectrumEntry(n, p, k, family, lam, big_l, delta, mult)


def ball_table(n: int, p: int, kmax: int) -> list[BallSpectrumEntry]:
    rows = []
    for k in range(1, kmax + 1):
        for fam in FAMILIES:
            if fam == "Hprime" and p == 0:
                continue
            rows.append(ball_entry(n, p, k, fam))
    return rows


def coclosed_spectra(n: int, p: int, kmax: int) -> tuple[list[Fraction], list[Fraction]]:
    """Sorted Lambda and boundary Hodge eigenvalues (with multiplicity) on coclosed p-forms of S^n.

    Coclosed forms are the traces of the H'' families; for p = 0 the constants
    (traces of H'_{0,0}, eigenvalue 0 for both operators) are added.
    """
    lam, hodge = [], []
    if p == 0:
        lam.append(Fraction(0))
        hodge.append(Fraction(0))
    for k in range(1, kmax + 1):
        e = ball_entry(n, p, k, "Hdoubleprime")
        lam += [e.lambda_eigenvalue] * e.multiplicity
        hodge += [e.delta_eigenvalue] * e.multiplicity
    return sorted(lam), sorted(hodge)


def ball_topology(dim: int) -> tuple[list[int], list[int]]:
    """(b_p, I_p) of a ball of the given dimension, computed on a single simplex."""
    from .hodge import betti_numbers
    from .mesh import build_mesh

    verts = np.vstack([np.zeros(dim), np.eye(dim)])
    mesh = build_mesh(verts, [list(range(dim + 1))], name=f"simplex{dim}")
    inv = betti_numbers(mesh, numeric=False)
    return inv.betti, inv.boundary_image_dim


@dataclass(frozen=True)
class SharpnessRow:
    m: int
    lhs_index: int
    rhs_index: int
    lhs: Fraction
    rhs: Fraction

    @property
    def holds(self) -> bool:
        return self.lhs <= self.rhs

    @property
    def equality(self) -> bool:
        return self.lhs == self.rhs

    def to_dict(self) -> dict:
        return {"m": self.m, "lhs_index": self.lhs_index, "rhs_index": self.rhs_index,
                "lhs": fraction_str(self.lhs), "rhs": fraction_str(self.rhs),
                "holds": self.holds, "equality": self.equality}


def hps_sharpness_table(p: int, m_max: int) -> list[SharpnessRow]:
    """Both sides of (sigma_{m+I_p})^2 <= lambda'_{I_p + b_{p+1} + 2m - 1} on B^{2p+2}, exactly."""
    if p < 0 or m_max < 1:
        raise ValueError("need p >= 0 and m_max >= 1")
    n = 2 * p + 1
    if n > MAX_N:
        raise ValueError(f"B^{2 * p + 2} exceeds the exact oracle range")
    betti, image = ball_topology(2 * p + 2)
    ip, bnext = image[p], betti[p + 1]
    need = ip + bnext + 2 * m_max - 1
    for kmax in range(1, MAX_K + 1):
        lam, hodge = coclosed_spectra(n, p, kmax)
        if len(lam) >= ip + m_max and len(hodge) >= need:
            break
    else:
        raise ValueError("m_max exceeds the exact oracle range")
    rows = []
    for m in range(1, m_max + 1):
        li, ri = m + ip, ip + bnext + 2 * m - 1
        rows.append(SharpnessRow(m, li, ri, lam[li - 1] ** 2, hodge[ri - 1]))
    return rows
