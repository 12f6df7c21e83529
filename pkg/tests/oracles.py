"""Reference computations that share no code with the package.

Each oracle here is written from first principles: Whitney forms are
evaluated pointwise and integrated by quadrature, ranks use Fraction
elimination, and eigenvalue counts use Sylvester inertia.
"""

from __future__ import annotations

import itertools
from fractions import Fraction
from math import factorial

import numpy as np
import scipy.linalg as sla


def fraction_rank(rows) -> int:
    """Rank over Q by Gauss-Jordan elimination on Fractions."""
    m = [[Fraction(x) for x in r] for r in rows]
    if not m:
        return 0
    ncol = len(m[0])
    r = 0
    for c in range(ncol):
        piv = next((i for i in range(r, len(m)) if m[i][c] != 0), None)
        if piv is None:
            continue
        m[r], m[piv] = m[piv], m[r]
        for i in range(len(m)):
            if i != r and m[i][c] != 0:
                f = m[i][c] / m[r][c]
                m[i] = [a - f * b for a, b in zip(m[i], m[r])]
        r += 1
        if r == len(m):
            break
    return r


def inertia_count(a: np.ndarray, b: np.ndarray, t: float) -> int:
    """Number of eigenvalues of (A, B) strictly below t, from the inertia of A - tB."""
    _, d, _ = sla.ldl(a - t * b)
    return int(np.sum(np.linalg.eigvalsh(d) < 0))


def simplex_quadrature(verts: np.ndarray):
    """Degree-2 exact rule on an n-simplex: points and weights (sum of weights = volume).

    Exactness is checked against barycentric moments in the tests.
    """
    n = verts.shape[0] - 1
    e = (verts[1:] - verts[0]).T
    vol = np.sqrt(abs(np.linalg.det(e.T @ e))) / factorial(n)
    # n+1 points, alpha at one vertex and beta at the others, equal weights
    beta = (n + 2 - np.sqrt(n + 2)) / ((n + 1) * (n + 2))
    alpha = 1 - n * beta
    bary = np.full((n + 1, n + 1), beta)
    np.fill_diagonal(bary, alpha)
    pts = bary @ verts
    w = np.full(n + 1, vol / (n + 1))
    return bary, pts, w


def barycentric_gradients(verts: np.ndarray) -> np.ndarray:
    """Gradients (rows) of the barycentric coordinates in ambient coordinates."""
    e = (verts[1:] - verts[0]).T  # ambient x n
    pinv = np.linalg.pinv(e)  # n x ambient
    g = np.vstack([-pinv.sum(axis=0), pinv])
    return g


def whitney_value(face_local, bary_point, grads) -> np.ndarray:
    """Whitney p-form of a local face evaluated at a point, as an antisymmetric tensor.

    Returned as the vector of components on increasing ambient index tuples.
    """
    p = len(face_local) - 1
    amb = grads.shape[1]
    comps = list(itertools.combinations(range(amb), p))
    out = np.zeros(len(comps))
    for i, vi in enumerate(face_local):
        rest = [v for j, v in enumerate(face_local) if j != i]
        coef = factorial(p) * (-1) ** i * bary_point[vi]
        for ci, c in enumerate(comps):
            if p == 0:
                out[ci] += coef
            else:
                mat = np.array([[grads[r][k] for k in c] for r in rest])
                out[ci] += coef * np.linalg.det(mat)
    return out


def whitney_mass_oracle(vertices: np.ndarray, top: list[tuple[int, ...]], faces: list[tuple[int, ...]]) -> np.ndarray:
    """Mass matrix of Whitney forms on the listed (sorted) faces, by quadrature.

    Each top simplex contributes the integral of pointwise inner products of
    its local Whitney forms.  Faces are indexed in the order given.
    """
    index = {f: i for i, f in enumerate(faces)}
    p = len(faces[0]) - 1
    mat = np.zeros((len(faces), len(faces)))
    for simp in top:
        simp = tuple(sorted(simp))
        verts = vertices[list(simp)]
        grads = barycentric_gradients(verts)
        bary, _, w = simplex_quadrature(verts)
        local = list(itertools.combinations(range(len(simp)), p + 1))
        glob = [index[tuple(simp[i] for i in f)] for f in local]
        for q in range(len(w)):
            vals = [whitney_value(f, bary[q], grads) for f in local]
            for a, ga in enumerate(glob):
                for b, gb in enumerate(glob):
                    mat[ga, gb] += w[q] * vals[a] @ vals[b]
    return mat


def laplace_steklov_disk(kmax: int) -> list[float]:
    """Steklov eigenvalues of the unit disk with multiplicity: 0, 1, 1, 2, 2, ..."""
    out = [0.0]
    for k in range(1, kmax + 1):
        out += [float(k), float(k)]
    return out
