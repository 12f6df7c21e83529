"""Harmonic fields, Betti numbers and the Hodge-Morrey-Friedrichs splitting.

Betti numbers come from exact rational ranks of incidence matrices and are
authoritative.  Harmonic fields are the numerically zero eigenspace of the
Hodge energy; its dimension must agree with the exact count.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import exact
from .forms import Cochain, coboundary, factorized_mass, interior_mask, mass_matrix, trace_matrix
from .mesh import BoundaryMesh, SimplicialMesh, boundary_operator, extract_boundary

ZERO_TOL = 1e-6
GAP_TOL = 1e-6
SV_TOL = 1e-8
DENSE_EIG_LIMIT = 2500
CONDITIONS = ("Neumann", "Dirichlet")


class RankAmbiguityError(RuntimeError):
    """The numerical kernel does not separate cleanly, or disagrees with exact topology."""


@dataclass(eq=False)
class HarmonicBasis:
    degree: int
    condition: str
    basis: list[Cochain]
    eigenvalues: np.ndarray = field(default_factory=lambda: np.zeros(0))
    gap: float = np.inf
    d_residual: float = 0.0
    delta_residual: float = 0.0

    @property
    def dim(self) -> int:
        return len(self.basis)

    def matrix(self, size: int | None = None) -> np.ndarray:
        """Basis vectors as columns."""
        if not self.basis:
            return np.zeros((size or 0, 0))
        return np.column_stack([c.values for c in self.basis])


@dataclass
class TopologyInvariants:
    betti: list[int]
    relative_betti: list[int]
    boundary_betti: list[int]
    boundary_image_dim: list[int]
    boundary_image_dim_numeric: list[int] | None = None
    boundary_components: int = 0

    def to_dict(self) -> dict:
        return {
            "betti": self.betti,
            "relative_betti": self.relative_betti,
            "boundary_betti": self.boundary_betti,
            "I": self.boundary_image_dim,
            "I_numeric": self.boundary_image_dim_numeric,
            "boundary_components": self.boundary_components,
        }


def _normalize_condition(condition: str) -> str:
    for c in CONDITIONS:
        if condition.lower() == c.lower():
            return c
    raise ValueError(f"unknown boundary condition {condition!r}; expected one of {CONDITIONS}")


def _interior(mesh: SimplicialMesh, p: int) -> np.ndarray:
    if mesh.is_closed():
        return np.arange(mesh.count(p))
    return np.flatnonzero(interior_mask(extract_boundary(mesh), p))


def homology_ranks(mesh: SimplicialMesh, relative: bool = False) -> list[int]:
    """Exact ranks of the boundary maps, index q = 0..n+1 (zero at both ends)."""
    n = mesh.dim
    ranks = [0] * (n + 2)
    for q in range(1, n + 1):
        b = boundary_operator(mesh, q)
        if relative:
            b = b[_interior(mesh, q - 1)][:, _interior(mesh, q)]
        ranks[q] = exact.rank(b)
    return ranks


def _betti_from_ranks(counts, ranks) -> list[int]:
    return [counts[p] - ranks[p] - ranks[p + 1] for p in range(len(counts))]


def exact_betti(mesh: SimplicialMesh, relative: bool = False) -> list[int]:
    key = ("betti", relative)
    if key not in mesh._cache:
        if relative:
            counts = [len(_interior(mesh, p)) for p in range(mesh.dim + 1)]
        else:
            counts = mesh.counts
        mesh._cache[key] = _betti_from_ranks(counts, homology_ranks(mesh, relative))
    return mesh._cache[key]


def image_dims_from_sequence(betti, relative_betti, boundary_betti) -> list[int]:
    """dim im(H^p(M) -> H^p(bd M)) from the long exact sequence of the pair.

    ... -> H^p(M,bd) -> H^p(M) -> H^p(bd) -> H^{p+1}(M,bd) -> ...
    """
    n = len(betti) - 1
    out = []
    a = relative_betti[0]  # image of H^0(M,bd) in H^0(M); the first map is injective
    for p in range(n):
        c = betti[p] - a
        e = boundary_betti[p] - c
        out.append(c)
        a = relative_betti[p + 1] - e
    return out


def _energy_pencil(mesh: SimplicialMesh, p: int, rows: np.ndarray, dirichlet: bool):
    """Hodge energy ||Du||^2 + ||delta u||^2 on cochains supported on `rows`.

    The (p-1)-mass inverse in the codifferential term is replaced by the inverse
    diagonal of M_{p-1}: any SPD weight gives the same kernel and keeps the
    matrix sparse.  The codifferential is tested against (p-1)-cochains on the
    same side of the boundary condition as `rows`.
    """
    n = mesh.dim
    m = mass_matrix(mesh, p).matrix
    msub = m[rows][:, rows]
    a = sp.csr_matrix((len(rows), len(rows)))
    if p < n:
        d = coboundary(mesh, p)[:, rows]
        a = a + d.T @ mass_matrix(mesh, p + 1).matrix @ d
    b = None
    if p > 0:
        low = _interior(mesh, p - 1) if dirichlet else np.arange(mesh.count(p - 1))
        dm = coboundary(mesh, p - 1)[:, low]
        b = (dm.T @ m[:, rows]).tocsr()
        w = 1.0 / mass_matrix(mesh, p - 1).matrix.diagonal()[low]
        a = a + b.T @ sp.diags(w) @ b
    return sp.csr_matrix(a), sp.csr_matrix(msub), b, low if p > 0 else None


def _lowest_eigenpairs(a, mmat, k: int):
    nrow = a.shape[0]
    k = min(k, nrow)
    if k == 0:
        return np.zeros(0), np.zeros((nrow, 0))
    if nrow <= DENSE_EIG_LIMIT or k >= nrow - 1:
        w, v = sla.eigh(a.toarray(), mmat.toarray(), subset_by_index=[0, k - 1])
        return w, v
    w, v = spla.eigsh(a, k=k, M=mmat, sigma=-1.0, which="LM", tol=1e-14)
    order = np.argsort(w)
    return w[order], v[:, order]


def harmonic_fields(mesh: SimplicialMesh, p: int, condition: str = "Neumann") -> HarmonicBasis:
    """M-orthonormal basis of discrete harmonic fields of degree p.

    Neumann fields minimize ||Du||^2 + ||delta_h u||^2 with the natural
    boundary condition; Dirichlet fields have zero trace and a codifferential
    tested only against trace-zero cochains.  On a closed complex both agree.

    Raises
    ------
    RankAmbiguityError
        If the zero cluster is not separated by at least ``GAP_TOL`` or its size
        differs from the Betti number computed by exact integer ranks.
    """
    condition = _normalize_condition(condition)
    n = mesh.dim
    if not 0 <= p <= n:
        raise ValueError(f"degree {p} outside 0..{n}")
    key = ("harmonic", p, condition)
    if key in mesh._cache:
        return mesh._cache[key]
    closed = mesh.is_closed()
    dirichlet = condition == "Dirichlet" and not closed
    expected = exact_betti(mesh, relative=dirichlet)[p]
    rows = _interior(mesh, p) if dirichlet else np.arange(mesh.count(p))
    a, msub, _, _ = _energy_pencil(mesh, p, rows, dirichlet)
    w, v = _lowest_eigenpairs(a, msub, expected + 3)
    nzero = int(np.sum(w < ZERO_TOL))
    last_zero = w[expected - 1] if expected > 0 else 0.0
    first_nonzero = w[expected] if len(w) > expected else np.inf
    gap = first_nonzero - last_zero
    if nzero != expected or gap < GAP_TOL:
        raise RankAmbiguityError(
            f"{condition} harmonic {p}-fields: exact Betti number {expected}, numerical zero count {nzero}, "
            f"lowest eigenvalues {np.array2string(w[:expected + 3], precision=3)}, gap {gap:.3g}")
    vz = v[:, :expected]
    if expected:
        g = vz.T @ (msub @ vz)
        vz = vz @ np.linalg.inv(np.linalg.cholesky(g)).T
    full = np.zeros((mesh.count(p), expected))
    full[rows] = vz
    basis = [Cochain(p, full[:, j], mesh) for j in range(expected)]
    dres, sres = _residuals(mesh, p, full, rows, dirichlet)
    hb = HarmonicBasis(p, condition, basis, eigenvalues=w, gap=float(gap), d_residual=dres, delta_residual=sres)
    mesh._cache[key] = hb
    return hb


def _residuals(mesh: SimplicialMesh, p: int, vecs: np.ndarray, rows, dirichlet: bool):
    """Largest ||Du|| and ||delta u|| (true mass inverse) over the columns."""
    if vecs.shape[1] == 0:
        return 0.0, 0.0
    dres = sres = 0.0
    if p < mesh.dim:
        dv = coboundary(mesh, p) @ vecs
        dres = float(np.sqrt(max(np.max(np.einsum("ij,ij->j", dv, mass_matrix(mesh, p + 1).matrix @ dv)), 0.0)))
    if p > 0:
        y = coboundary(mesh, p - 1).T @ (mass_matrix(mesh, p).matrix @ vecs)
        if dirichlet:
            low = _interior(mesh, p - 1)
            mlow = mass_matrix(mesh, p - 1).matrix[low][:, low]
            z = spla.splu(sp.csc_matrix(mlow)).solve(y[low])
            vals = np.einsum("ij,ij->j", y[low], z)
        else:
            z = factorized_mass(mesh, p - 1).solve(y)
            vals = np.einsum("ij,ij->j", y, z)
        sres = float(np.sqrt(max(np.max(vals), 0.0)))
    return dres, sres


def betti_numbers(mesh: SimplicialMesh, numeric: bool = True) -> TopologyInvariants:
    """Betti numbers of M, (M, bd M) and bd M, and the trace image dimensions I_p.

    I_p is taken from the long exact sequence (exact).  With ``numeric`` it is
    also computed as the rank of the projection of traced Neumann fields onto
    boundary harmonic fields; a disagreement raises ``RankAmbiguityError``.
    """
    bnd = extract_boundary(mesh)
    betti = exact_betti(mesh)
    rel = exact_betti(mesh, relative=True)
    bb = exact_betti(bnd.mesh)
    image = image_dims_from_sequence(betti, rel, bb)
    inv = TopologyInvariants(list(betti), list(rel), list(bb), image, boundary_components=bnd.components())
    if numeric:
        inv.boundary_image_dim_numeric = [trace_image_rank(mesh, bnd, p) for p in range(mesh.dim)]
        if inv.boundary_image_dim_numeric != image:
            raise RankAmbiguityError(
                f"trace image ranks {inv.boundary_image_dim_numeric} disagree with exact sequence {image}")
    return inv


def trace_image_rank(mesh: SimplicialMesh, bnd: BoundaryMesh, p: int) -> int:
    """Numerical rank of H^p_N(M) -> harmonic fields of bd M (singular values > SV_TOL)."""
    if exact_betti(mesh)[p] == 0 or exact_betti(bnd.mesh)[p] == 0:
        return 0
    hn = harmonic_fields(mesh, p, "Neumann").matrix()
    hb = harmonic_fields(bnd.mesh, p, "Neumann").matrix()
    t = trace_matrix(bnd, p) @ hn
    coeff = hb.T @ (mass_matrix(bnd.mesh, p).matrix @ t)
    s = np.linalg.svd(coeff, compute_uv=False)
    return int(np.sum(s > SV_TOL))


@dataclass(eq=False)
class HMFDecomposition:
    exact_D: Cochain
    coexact_N: Cochain
    field: Cochain

    def __iter__(self):
        return iter((self.exact_D, self.coexact_N, self.field))


def _m_project(basis: np.ndarray, m, u: np.ndarray) -> np.ndarray:
    """M-orthogonal projection of u onto range(basis); basis may be rank deficient."""
    if basis.shape[1] == 0:
        return np.zeros_like(u)
    mb = m @ basis
    g = basis.T @ mb
    w, q = np.linalg.eigh(0.5 * (g + g.T))
    keep = w > 1e-12 * max(w.max(), 1e-300)
    coef = q[:, keep] @ ((q[:, keep].T @ (mb.T @ u)) / w[keep])
    return basis @ coef


def hmf_decompose(u: Cochain) -> HMFDecomposition:
    """Split a p-cochain into d(trace-zero) + (coexact, natural condition) + harmonic field.

    Dense linear algebra; meant for meshes with a few thousand simplices.  The
    field is closed and weakly coclosed against trace-zero test cochains.
    """
    mesh, p = u.home, u.degree
    n = mesh.dim
    m = mass_matrix(mesh, p).matrix
    if p > 0:
        a = coboundary(mesh, p - 1)[:, _interior(mesh, p - 1)].toarray()
        ex = _m_project(a, m, u.values)
    else:
        ex = np.zeros(mesh.count(p))
    if p < n:
        d = coboundary(mesh, p)
        basis = factorized_mass(mesh, p).solve(d.T.toarray())
        co = _m_project(basis, m, u.values)
    else:
        co = np.zeros(mesh.count(p))
    rest = u.values - ex - co
    return HMFDecomposition(Cochain(p, ex, mesh), Cochain(p, co, mesh), Cochain(p, rest, mesh))


def field_residuals(c: Cochain) -> tuple[float, float]:
    """||Du|| and the interior part of ||delta_h u|| for a harmonic-field candidate."""
    mesh, p = c.home, c.degree
    dres = sres = 0.0
    if p < mesh.dim:
        dv = coboundary(mesh, p) @ c.values
        dres = float(np.sqrt(max(dv @ (mass_matrix(mesh, p + 1).matrix @ dv), 0.0)))
    if p > 0:
        low = _interior(mesh, p - 1)
        y = (coboundary(mesh, p - 1).T @ (mass_matrix(mesh, p).matrix @ c.values))[low]
        mlow = mass_matrix(mesh, p - 1).matrix[low][:, low]
        z = spla.splu(sp.csc_matrix(mlow)).solve(y)
        sres = float(np.sqrt(max(y @ z, 0.0)))
    return dres, sres
