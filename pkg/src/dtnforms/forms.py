"""Lowest-order Whitney discretization of differential forms.

A p-cochain holds one value per canonically oriented p-simplex and stands for
its Whitney interpolant.  The exterior derivative is the transposed incidence
matrix; L2 inner products of Whitney forms are integrated exactly on affine
simplices, so the mass matrices are exact Galerkin Gram matrices.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from math import factorial
from os import PathLike
from pathlib import Path

import numpy as np
import scipy.io
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .mesh import BoundaryMesh, SimplicialMesh, _perm_sign, boundary_operator

DENSE_LIMIT = 2000


@dataclass(eq=False)
class Cochain:
    degree: int
    values: np.ndarray
    home: SimplicialMesh

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        expected = self.home.count(self.degree)
        if self.values.shape != (expected,):
            raise ValueError(f"{self.degree}-cochain needs {expected} values, got shape {self.values.shape}")

    def __add__(self, other: Cochain) -> Cochain:
        self._compatible(other)
        return Cochain(self.degree, self.values + other.values, self.home)

    def __sub__(self, other: Cochain) -> Cochain:
        self._compatible(other)
        return Cochain(self.degree, self.values - other.values, self.home)

    def __mul__(self, scalar: float) -> Cochain:
        return Cochain(self.degree, scalar * self.values, self.home)

    __rmul__ = __mul__

    def _compatible(self, other: Cochain) -> None:
        if other.degree != self.degree or other.home is not self.home:
            raise ValueError("cochains live in different spaces")

    def inner(self, other: Cochain) -> float:
        """Integrated L2 inner product of the Whitney interpolants."""
        self._compatible(other)
        return float(self.values @ (mass_matrix(self.home, self.degree).matrix @ other.values))

    def norm(self) -> float:
        return float(np.sqrt(max(self.inner(self), 0.0)))


@dataclass(eq=False)
class LinearMap:
    """A matrix between cochain spaces labelled ``(complex name, degree)``."""

    matrix: object
    domain: tuple[str, int]
    codomain: tuple[str, int]

    def __post_init__(self):
        if not hasattr(self.matrix, "shape") or len(self.matrix.shape) != 2:
            raise ValueError("LinearMap needs a two-dimensional matrix")

    @property
    def shape(self):
        return self.matrix.shape

    def toarray(self) -> np.ndarray:
        m = self.matrix
        if sp.issparse(m):
            return m.toarray()
        if isinstance(m, spla.LinearOperator):
            return m @ np.eye(m.shape[1])
        return np.asarray(m)

    def __matmul__(self, other):
        if isinstance(other, LinearMap):
            if other.codomain != self.domain:
                raise ValueError(f"cannot compose {self.domain} with {other.codomain}")
            return LinearMap(self.matrix @ other.matrix, other.domain, self.codomain)
        if isinstance(other, Cochain):
            raise TypeError("apply LinearMap to cochains with .apply(cochain, home)")
        return self.matrix @ other

    def apply(self, cochain: Cochain, home: SimplicialMesh | None = None) -> Cochain:
        if cochain.values.shape[0] != self.shape[1]:
            raise ValueError("cochain does not match the map's domain")
        return Cochain(self.codomain[1], self.matrix @ cochain.values, home or cochain.home)

    def export(self, path: str | PathLike) -> None:
        """Write the matrix in Matrix Market format."""
        m = self.matrix
        if isinstance(m, spla.LinearOperator):
            m = self.toarray()
        scipy.io.mmwrite(str(path), sp.coo_matrix(m) if sp.issparse(m) else np.asarray(m))


def _label(mesh: SimplicialMesh) -> str:
    return mesh.name or "mesh"


def _check_degree(p: int, lo: int, hi: int, what: str) -> None:
    if not lo <= p <= hi:
        raise ValueError(f"{what} degree {p} outside {lo}..{hi}")


def coboundary(mesh: SimplicialMesh, p: int) -> sp.csr_matrix:
    """Raw sparse D_p; shape (N_{p+1}, N_p)."""
    key = ("d", p)
    if key not in mesh._cache:
        mesh._cache[key] = boundary_operator(mesh, p + 1).T.tocsr().astype(float)
    return mesh._cache[key]


def exterior_derivative(mesh: SimplicialMesh, p: int) -> LinearMap:
    _check_degree(p, 0, mesh.dim - 1, "exterior derivative")
    return LinearMap(coboundary(mesh, p), (_label(mesh), p), (_label(mesh), p + 1))


def _gradient_gram(mesh: SimplicialMesh):
    """Per top simplex: Gram matrix of barycentric gradients and volume."""
    if "grad_gram" in mesh._cache:
        return mesh._cache["grad_gram"]
    n = mesh.dim
    e = mesh.edge_vectors(n)
    g = np.einsum("kai,kaj->kij", e, e)
    ginv = np.linalg.inv(g)
    ntop = len(g)
    gram = np.empty((ntop, n + 1, n + 1))
    gram[:, 1:, 1:] = ginv
    gram[:, 0, 1:] = -ginv.sum(axis=1)
    gram[:, 1:, 0] = -ginv.sum(axis=2)
    gram[:, 0, 0] = ginv.sum(axis=(1, 2))
    vol = np.sqrt(np.linalg.det(g)) / factorial(n)
    mesh._cache["grad_gram"] = (gram, vol)
    return gram, vol


def _local_faces(mesh: SimplicialMesh, p: int):
    """Local vertex tuples of p-faces of top simplices and their global indices."""
    n = mesh.dim
    local = list(itertools.combinations(range(n + 1), p + 1))
    top = mesh.simplices[n]
    idx = mesh._index[p]
    glob = np.empty((len(top), len(local)), dtype=np.int64)
    for j, loc in enumerate(local):
        sub = top[:, list(loc)]
        glob[:, j] = [idx[tuple(r)] for r in sub.tolist()]
    return local, glob


def mass_matrix(mesh: SimplicialMesh, p: int) -> LinearMap:
    """Exact Galerkin Gram matrix of Whitney p-forms (sparse, SPD)."""
    _check_degree(p, 0, mesh.dim, "mass matrix")
    key = ("mass", p)
    if key not in mesh._cache:
        mesh._cache[key] = _assemble_mass(mesh, p)
    return LinearMap(mesh._cache[key], (_label(mesh), p), (_label(mesh), p))


def _assemble_mass(mesh: SimplicialMesh, p: int) -> sp.csr_matrix:
    n = mesh.dim
    gram, vol = _gradient_gram(mesh)
    local, glob = _local_faces(mesh, p)
    c = factorial(p) ** 2 / ((n + 1) * (n + 2))
    rows, cols, vals = [], [], []
    for a, fa in enumerate(local):
        for b, fb in enumerate(local):
            acc = np.zeros(len(vol))
            for i, ai in enumerate(fa):
                ra = [v for v in fa if v != ai]
                for j, bj in enumerate(fb):
                    rb = [v for v in fb if v != bj]
                    # integral of lambda_ai * lambda_bj over the simplex, over volume
                    w = (2.0 if ai == bj else 1.0) * (-1) ** (i + j)
                    if p == 0:
                        acc += w
                    else:
                        acc += w * np.linalg.det(gram[:, ra][:, :, rb])
            rows.append(glob[:, a])
            cols.append(glob[:, b])
            vals.append(c * vol * acc)
    mat = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                        shape=(mesh.count(p), mesh.count(p)))
    return ((mat + mat.T) * 0.5).tocsr()


def wedge_pairing(mesh: SimplicialMesh, k: int) -> sp.csr_matrix:
    """Matrix of the oriented pairing (u, v) -> integral of W u ^ W v.

    Shape (N_k, N_{n-k}).  Metric-free; uses ``top_orientation``.
    """
    n = mesh.dim
    _check_degree(k, 0, n, "wedge pairing")
    key = ("wedge", k)
    if key in mesh._cache:
        return mesh._cache[key]
    la, ga = _local_faces(mesh, k)
    lb, gb = _local_faces(mesh, n - k)
    orient = mesh.top_orientation.astype(float)
    base = factorial(k) * factorial(n - k) / ((n + 1) * (n + 2) * factorial(n))
    rows, cols, vals = [], [], []
    for a, fa in enumerate(la):
        for b, fb in enumerate(lb):
            coef = 0.0
            for i, ai in enumerate(fa):
                ra = [v for v in fa if v != ai]
                for j, bj in enumerate(fb):
                    rb = [v for v in fb if v != bj]
                    merged = ra + rb
                    if len(set(merged)) != len(merged):
                        continue
                    missing = next(v for v in range(n + 1) if v not in merged)
                    sign = _perm_sign(merged) * (-1) ** missing * (-1) ** (i + j)
                    coef += sign * (2.0 if ai == bj else 1.0)
            if coef:
                rows.append(ga[:, a])
                cols.append(gb[:, b])
                vals.append(base * coef * orient)
    if rows:
        mat = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                            shape=(mesh.count(k), mesh.count(n - k)))
    else:
        mat = sp.csr_matrix((mesh.count(k), mesh.count(n - k)))
    mesh._cache[key] = mat
    return mat


def trace_matrix(boundary: BoundaryMesh, p: int) -> sp.csr_matrix:
    """Raw sparse restriction to boundary p-simplices; shape (N_p^bd, N_p)."""
    parent = boundary.parent
    key = ("trace", p)
    if key not in parent._cache:
        inc = boundary.inclusion[p]
        parent._cache[key] = sp.csr_matrix(
            (np.ones(len(inc)), (np.arange(len(inc)), inc)), shape=(len(inc), parent.count(p)))
    return parent._cache[key]


def trace_map(mesh: SimplicialMesh, boundary: BoundaryMesh, p: int) -> LinearMap:
    if boundary.parent is not mesh:
        raise ValueError("boundary does not belong to this mesh")
    _check_degree(p, 0, mesh.dim - 1, "trace")
    return LinearMap(trace_matrix(boundary, p), (_label(mesh), p), (_label(boundary.mesh), p))


def interior_mask(boundary: BoundaryMesh, p: int) -> np.ndarray:
    """True for parent p-simplices that are not on the boundary."""
    mask = np.ones(boundary.parent.count(p), dtype=bool)
    if p < len(boundary.inclusion):
        mask[boundary.inclusion[p]] = False
    return mask


class Factorized:
    """Cached sparse LU of a square matrix with residual-checked solves."""

    def __init__(self, matrix, rtol: float = 1e-12):
        self.matrix = sp.csc_matrix(matrix)
        self._lu = spla.splu(self.matrix)
        self.rtol = rtol

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        x = self._lu.solve(np.asarray(rhs, dtype=float))
        r = rhs - self.matrix @ x
        scale = np.linalg.norm(rhs)
        if scale > 0 and np.linalg.norm(r) > self.rtol * scale:
            x = x + self._lu.solve(r)  # one step of iterative refinement
        return x


def factorized_mass(mesh: SimplicialMesh, p: int) -> Factorized:
    key = ("mass_lu", p)
    if key not in mesh._cache:
        mesh._cache[key] = Factorized(mass_matrix(mesh, p).matrix)
    return mesh._cache[key]


def weak_codifferential(mesh: SimplicialMesh, p: int) -> LinearMap:
    """delta_h = M_{p-1}^{-1} D_{p-1}^T M_p, the mass-adjoint of d.

    No boundary term is added, so the natural condition i_n v = 0 is imposed
    weakly.  Formed densely only for small spaces; otherwise returned as a
    LinearOperator backed by a cached factorization of M_{p-1}.
    """
    _check_degree(p, 1, mesh.dim, "codifferential")
    d = coboundary(mesh, p - 1)
    m = mass_matrix(mesh, p).matrix
    lu = factorized_mass(mesh, p - 1)
    op = spla.LinearOperator((mesh.count(p - 1), mesh.count(p)), matvec=lambda v: lu.solve(d.T @ (m @ v)),
                             matmat=lambda v: lu.solve(d.T @ (m @ v)), dtype=float)
    if max(op.shape) < DENSE_LIMIT:
        mat = lu.solve((d.T @ m).toarray())
        return LinearMap(mat, (_label(mesh), p), (_label(mesh), p - 1))
    return LinearMap(op, (_label(mesh), p), (_label(mesh), p - 1))


def green_residual(mesh: SimplicialMesh, p: int, u: np.ndarray, v: np.ndarray) -> float:
    """<<D u, v>> - <<u, delta_h v>> for a (p-1)-cochain u and p-cochain v."""
    d = coboundary(mesh, p - 1)
    lhs = (d @ u) @ (mass_matrix(mesh, p).matrix @ v)
    dv = weak_codifferential(mesh, p).matrix @ v
    rhs = u @ (mass_matrix(mesh, p - 1).matrix @ dv)
    return float(lhs - rhs)


def write_cochain_csv(cochain: Cochain | np.ndarray, path: str | PathLike) -> None:
    values = cochain.values if isinstance(cochain, Cochain) else np.asarray(cochain)
    Path(path).write_text("".join(f"{i},{float(v)!r}\n" for i, v in enumerate(values)), encoding="utf-8")


def read_cochain_csv(path: str | PathLike, size: int | None = None) -> np.ndarray:
    """Read ``simplex_index,value`` lines; missing indices are zero."""
    pairs = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split(",")
        if len(parts) != 2:
            raise ValueError(f"{path}: line {lineno}: expected 'simplex_index,value'")
        try:
            pairs.append((int(parts[0]), float(parts[1])))
        except ValueError:
            raise ValueError(f"{path}: line {lineno}: malformed number") from None
    n = size if size is not None else (max(i for i, _ in pairs) + 1 if pairs else 0)
    out = np.zeros(n)
    for i, v in pairs:
        if not 0 <= i < n:
            raise ValueError(f"{path}: simplex index {i} outside 0..{n - 1}")
        out[i] = v
    return out


def mass_condition(mesh: SimplicialMesh, p: int) -> tuple[float, float]:
    """(smallest, largest) eigenvalue of M_p; dense below DENSE_LIMIT, Lanczos above."""
    m = mass_matrix(mesh, p).matrix
    if m.shape[0] < DENSE_LIMIT:
        w = np.linalg.eigvalsh(m.toarray())
        return float(w[0]), float(w[-1])
    hi = spla.eigsh(m, k=1, which="LA", return_eigenvectors=False)[0]
    lo = spla.eigsh(m, k=1, sigma=0.0, which="LM", return_eigenvectors=False)[0]
    return float(lo), float(hi)
