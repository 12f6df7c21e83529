"""Dirichlet-to-Neumann operators on boundary cochains.

Both operators are represented weakly, as a pair (schur, boundary_mass) on a
basis of boundary cochains.  ``schur`` is the minimal interior energy of the
extension of each basis element:

* ``Lambda``: minimal ||Du||^2 over interior cochains with the given trace,
  restricted to coclosed boundary cochains;
* ``RaulotSavo``: minimal ||Du||^2 + ||delta_h u||^2, on all boundary cochains.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from os import PathLike
from pathlib import Path

import numpy as np
import scipy.io
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import exact
from .forms import (Cochain, coboundary, factorized_mass, interior_mask, mass_matrix, trace_matrix,
                    wedge_pairing, write_cochain_csv)
from .hodge import exact_betti, harmonic_fields
from .mesh import BoundaryMesh, SimplicialMesh, extract_boundary

KINDS = ("Lambda", "RaulotSavo")
_JOBS = 1


def set_jobs(jobs: int) -> None:
    """Worker threads for independent column solves (results do not depend on it)."""
    global _JOBS
    if jobs < 1:
        raise ValueError("jobs must be at least 1")
    _JOBS = int(jobs)


class ExtensionError(RuntimeError):
    """Interior minimization failed (singular beyond the known kernel, or inaccurate)."""


class ConjugateError(ValueError):
    """The conjugate (dual) form does not exist for the given boundary data."""


def normalize_kind(kind: str) -> str:
    aliases = {"lambda": "Lambda", "dtn": "Lambda", "raulotsavo": "RaulotSavo", "rs": "RaulotSavo",
               "l": "RaulotSavo"}
    key = kind.replace("-", "").replace("_", "").lower()
    if key not in aliases:
        raise ValueError(f"unknown operator kind {kind!r}; expected one of {KINDS}")
    return aliases[key]


@dataclass(eq=False)
class Extension:
    boundary_trace: Cochain
    interior: Cochain
    energy: float
    residual: float = 0.0


@dataclass(eq=False)
class DtNOperator:
    kind: str
    degree: int
    schur: np.ndarray
    boundary_mass: np.ndarray
    subspace: np.ndarray
    boundary: BoundaryMesh
    extensions: np.ndarray = field(repr=False, default=None)

    @property
    def dim(self) -> int:
        return self.schur.shape[0]

    @property
    def subspace_basis(self) -> list[Cochain]:
        return [Cochain(self.degree, self.subspace[:, j], self.boundary.mesh) for j in range(self.dim)]

    def coefficients(self, phi: np.ndarray) -> np.ndarray:
        """Coordinates of boundary cochain(s) in the subspace basis (mass projection)."""
        mb = mass_matrix(self.boundary.mesh, self.degree).matrix
        rhs = self.subspace.T @ (mb @ phi)
        return np.linalg.solve(self.boundary_mass, rhs)

    def energy(self, phi: np.ndarray) -> np.ndarray | float:
        """Quadratic form of the operator on boundary cochain(s) in the subspace."""
        c = self.coefficients(phi)
        return np.einsum("i...,i...->...", c, self.schur @ c)

    def symmetry_error(self) -> float:
        return float(np.max(np.abs(self.schur - self.schur.T), initial=0.0))

    def export(self, directory: str | PathLike) -> Path:
        """Write schur/boundary_mass (Matrix Market), the basis (CSV) and a manifest."""
        out = Path(directory)
        out.mkdir(parents=True, exist_ok=True)
        scipy.io.mmwrite(str(out / "schur.mtx"), self.schur)
        scipy.io.mmwrite(str(out / "boundary_mass.mtx"), self.boundary_mass)
        names = []
        for j in range(self.dim):
            name = f"basis_{j:05d}.csv"
            write_cochain_csv(self.subspace[:, j], out / name)
            names.append(name)
        manifest = {
            "kind": self.kind,
            "degree": self.degree,
            "subspace_dim": self.dim,
            "boundary_cochain_dim": int(self.subspace.shape[0]),
            "mesh": self.boundary.parent.name,
            "files": {"schur": "schur.mtx", "boundary_mass": "boundary_mass.mtx", "basis": names},
        }
        (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
        return out


def _boundary_of(c: Cochain) -> BoundaryMesh:
    bnd = c.home._cache.get("boundary_of")
    if bnd is None:
        raise ValueError("cochain does not live on a boundary complex produced by extract_boundary")
    return bnd


def coclosed_subspace(boundary: BoundaryMesh | SimplicialMesh, p: int) -> np.ndarray:
    """Mass-orthonormal basis (columns) of ker(D_{p-1}^T M_p) on the boundary.

    ``boundary`` may also be any closed complex.  For p = 0 every cochain is
    coclosed.  The dimension is fixed by the exact rank of the incidence
    matrix, not by a floating threshold.
    """
    bm = boundary.mesh if isinstance(boundary, BoundaryMesh) else boundary
    if not 0 <= p <= bm.dim:
        raise ValueError(f"degree {p} outside 0..{bm.dim}")
    key = ("coclosed", p)
    if key in bm._cache:
        return bm._cache[key]
    m = mass_matrix(bm, p).matrix.toarray()
    chol = sla.cholesky(m, lower=True)
    npc = m.shape[0]
    if p == 0:
        y = np.eye(npc)
    else:
        e = coboundary(bm, p - 1)
        r = exact.rank(e)
        q, s, _ = sla.svd(chol.T @ e.toarray(), full_matrices=True)
        if r < len(s) and s[r] > 1e-8 * s[0]:
            raise ExtensionError(f"coclosed subspace: singular value {s[r]:.3g} past exact rank {r} is not small")
        y = q[:, r:]
    z = sla.solve_triangular(chol.T, y, lower=False)
    bm._cache[key] = z
    return z


def coclosed_basis(boundary: BoundaryMesh | SimplicialMesh, p: int) -> list[Cochain]:
    bm = boundary.mesh if isinstance(boundary, BoundaryMesh) else boundary
    z = coclosed_subspace(bm, p)
    return [Cochain(p, z[:, j], bm) for j in range(z.shape[1])]


class _ExtensionSolver:
    """Minimizer of ||Du||^2 (optionally + ||delta_h u||^2) with prescribed trace.

    For the plain energy the trace-zero block K_II is singular when p >= 1:
    its kernel holds the closed trace-zero cochains.  It is regularized by
    s * G G^T with G = D_{p-1} on trace-zero simplices, which vanishes on
    consistent right-hand sides and leaves Du unchanged.  The remaining kernel
    (relative harmonic fields) is removed with a bordered system.
    """

    def __init__(self, mesh: SimplicialMesh, bnd: BoundaryMesh, p: int, kind: str):
        self.mesh, self.bnd, self.p, self.kind = mesh, bnd, p, kind
        self.I = np.flatnonzero(interior_mask(bnd, p))
        self.B = bnd.inclusion[p]
        d = coboundary(mesh, p)
        k = (d.T @ mass_matrix(mesh, p + 1).matrix @ d).tocsr()
        self.K = k
        kii = k[self.I][:, self.I]
        self.kib = k[self.I][:, self.B]
        self.ni = len(self.I)
        if kind == "RaulotSavo" and p > 0:
            bmat = (coboundary(mesh, p - 1).T @ mass_matrix(mesh, p).matrix).tocsr()
            self.bi = bmat[:, self.I]
            self.bb = bmat[:, self.B]
            mlow = mass_matrix(mesh, p - 1).matrix
            sysm = sp.bmat([[kii, self.bi.T], [self.bi, -mlow]], format="csc")
            self.n_extra = mlow.shape[0]
        else:
            self.bi = None
            sysm = kii
            self.n_extra = 0
            if p > 0 and self.ni:
                g = coboundary(mesh, p - 1)[self.I][:, np.flatnonzero(interior_mask(bnd, p - 1))]
                ggt = (g @ g.T).tocsr()
                s = kii.diagonal().mean() / max(ggt.diagonal().mean(), 1e-300)
                sysm = kii + s * ggt
                nrel = exact_betti(mesh, relative=True)[p]
                if nrel:
                    hd = harmonic_fields(mesh, p, "Dirichlet").matrix()[self.I]
                    c = mass_matrix(mesh, p).matrix[self.I][:, self.I] @ hd
                    sysm = sp.bmat([[sysm, sp.csr_matrix(c)], [sp.csr_matrix(c.T), None]], format="csc")
                    self.n_extra = nrel
        self.system = sp.csc_matrix(sysm)
        self.lu = spla.splu(self.system) if self.system.shape[0] else None

    def _solve(self, rhs: np.ndarray) -> np.ndarray:
        ncol = rhs.shape[1]
        if _JOBS == 1 or ncol < 2 * _JOBS:
            return self.lu.solve(rhs)
        blocks = np.array_split(np.arange(ncol), _JOBS)
        with ThreadPoolExecutor(max_workers=_JOBS) as pool:
            parts = list(pool.map(lambda b: self.lu.solve(np.ascontiguousarray(rhs[:, b])), blocks))
        return np.hstack(parts)

    def extend(self, phi: np.ndarray) -> tuple[np.ndarray, np.ndarray | None, float]:
        """Full cochains (columns) extending boundary data, auxiliary solution, rel. residual."""
        phi = np.asarray(phi, dtype=float)
        single = phi.ndim == 1
        phi2 = phi.reshape(len(phi), -1)
        ncol = phi2.shape[1]
        rhs = np.zeros((self.system.shape[0], ncol))
        rhs[:self.ni] = -(self.kib @ phi2)
        if self.bi is not None:
            rhs[self.ni:] = -(self.bb @ phi2)
        sol = self._solve(rhs) if self.lu is not None else rhs
        res = self.system @ sol - rhs
        scale = max(np.linalg.norm(rhs), 1e-300)
        if np.linalg.norm(res) > 1e-12 * scale:
            sol = sol + self._solve(-res)
            res = self.system @ sol - rhs
        rel = float(np.linalg.norm(res) / scale) if np.linalg.norm(rhs) else 0.0
        if rel > 1e-8:
            raise ExtensionError(f"interior solve for degree {self.p} has relative residual {rel:.3g}")
        u = np.zeros((self.mesh.count(self.p), ncol))
        u[self.B] = phi2
        u[self.I] = sol[:self.ni]
        aux = sol[self.ni:] if self.bi is not None else None
        if single:
            return u[:, 0], (aux[:, 0] if aux is not None else None), rel
        return u, aux, rel


def _solver(mesh: SimplicialMesh, bnd: BoundaryMesh, p: int, kind: str) -> _ExtensionSolver:
    key = ("extension_solver", p, kind)
    if key not in mesh._cache:
        mesh._cache[key] = _ExtensionSolver(mesh, bnd, p, kind)
    return mesh._cache[key]


def _check_degree(mesh: SimplicialMesh, p: int) -> None:
    if not 0 <= p <= mesh.dim - 1:
        raise ValueError(f"degree {p} outside 0..{mesh.dim - 1}")


def optimality_residual(mesh: SimplicialMesh, bnd: BoundaryMesh, p: int, u: np.ndarray) -> float:
    """Relative size of D_I^T M D u: the gradient against trace-zero variations."""
    s = _solver(mesh, bnd, p, "Lambda")
    g = s.K[s.I] @ u
    scale = abs(s.K).sum(axis=1).max() * max(np.abs(u).max(), 1e-300)
    return float(np.abs(g).max() / scale) if s.ni else 0.0


def min_energy_extension(boundary_trace: Cochain, p: int | None = None) -> Extension:
    """Interior cochain with the given trace minimizing ||Du||^2."""
    bnd = _boundary_of(boundary_trace)
    mesh = bnd.parent
    p = boundary_trace.degree if p is None else p
    if p != boundary_trace.degree:
        raise ValueError("degree does not match the boundary cochain")
    _check_degree(mesh, p)
    u, _, _ = _solver(mesh, bnd, p, "Lambda").extend(boundary_trace.values)
    du = coboundary(mesh, p) @ u
    energy = float(du @ (mass_matrix(mesh, p + 1).matrix @ du))
    return Extension(boundary_trace, Cochain(p, u, mesh), max(energy, 0.0),
                     optimality_residual(mesh, bnd, p, u))


def energy(mesh: SimplicialMesh, p: int, u: np.ndarray) -> float:
    """||Du||^2 for a full p-cochain."""
    du = coboundary(mesh, p) @ u
    return float(du @ (mass_matrix(mesh, p + 1).matrix @ du))


def assemble_dtn(mesh: SimplicialMesh, boundary: BoundaryMesh | None, p: int, kind: str = "Lambda") -> DtNOperator:
    """Assemble Lambda or the Raulot-Savo operator in degree p as a matrix pair."""
    kind = normalize_kind(kind)
    _check_degree(mesh, p)
    bnd = boundary if boundary is not None else extract_boundary(mesh)
    key = ("dtn", p, kind)
    if key in mesh._cache:
        return mesh._cache[key]
    mb = mass_matrix(bnd.mesh, p).matrix
    if kind == "Lambda":
        z = coclosed_subspace(bnd, p)
        bmass = z.T @ (mb @ z)
    else:
        z = np.eye(bnd.mesh.count(p))
        bmass = mb.toarray()
    solver = _solver(mesh, bnd, p, kind)
    u, aux, _ = solver.extend(z)
    du = coboundary(mesh, p) @ u
    schur = du.T @ (mass_matrix(mesh, p + 1).matrix @ du)
    if kind == "RaulotSavo" and p > 0:
        # aux holds delta_h u for each column
        schur = schur + aux.T @ (mass_matrix(mesh, p - 1).matrix @ aux)
    op = DtNOperator(kind, p, schur, bmass, z, bnd, extensions=u)
    mesh._cache[key] = op
    return op


def weak_star(mesh: SimplicialMesh, q: int, a: np.ndarray) -> np.ndarray:
    """Galerkin Hodge star of a q-cochain: s with <<w, s>> = integral a ^ w."""
    rhs = wedge_pairing(mesh, q).T @ a
    return factorized_mass(mesh, mesh.dim - q).solve(rhs)


@dataclass(eq=False)
class Conjugate:
    psi: Cochain
    residual: float
    obstruction: float
    energy_phi: float
    energy_psi: float
    coefficients: np.ndarray = field(repr=False, default=None)


def conjugate_form(phi: Cochain, dtn: DtNOperator, dual: DtNOperator | None = None,
                   kernel_tol: float = 1e-8) -> Conjugate:
    """Boundary (n-p-2)-cochain psi with D lambda(psi) closest to *D lambda(phi).

    psi is the minimum-norm least-squares solution over the Lambda subspace of
    degree n-p-2, hence orthogonal to the discrete kernel of Lambda there.
    The residual is ||*D lambda(phi) - D lambda(psi)|| / ||D lambda(phi)||.

    Raises
    ------
    ConjugateError
        If D lambda(phi) vanishes, or *D lambda(phi) has a component along
        Neumann harmonic fields larger than ``kernel_tol`` (relative).
    """
    if dtn.kind != "Lambda":
        raise ValueError("conjugate forms are defined for the Lambda operator")
    bnd = dtn.boundary
    mesh = bnd.parent
    n, p = mesh.dim, dtn.degree
    q = n - p - 2
    if q < 0:
        raise ValueError(f"no conjugate degree for p = {p} on a {n}-manifold")
    if dual is None:
        dual = assemble_dtn(mesh, bnd, q, "Lambda")
    c = dtn.coefficients(phi.values)
    u = dtn.extensions @ c
    du = coboundary(mesh, p) @ u
    m1 = mass_matrix(mesh, p + 1).matrix
    e_phi = float(du @ (m1 @ du))
    if e_phi <= 1e-24 * max(1.0, float(np.abs(dtn.schur).max()) * float(c @ c)):
        raise ConjugateError("dual of zero field: phi lies in the kernel of Lambda")
    s = weak_star(mesh, p + 1, du)
    mq = mass_matrix(mesh, n - p - 1).matrix
    hn = harmonic_fields(mesh, n - p - 1, "Neumann").matrix()
    obstruction = 0.0
    if hn.shape[1]:
        obstruction = float(np.linalg.norm(hn.T @ (mq @ s)) / np.sqrt(e_phi))
        if obstruction > kernel_tol:
            raise ConjugateError(f"obstruction {obstruction:.3g}: *D lambda(phi) is not orthogonal to "
                                 f"Neumann harmonic {n - p - 1}-fields")
    dq = coboundary(mesh, q) @ dual.extensions
    rhs = dq.T @ (mq @ s)
    coef, *_ = sla.lstsq(dual.schur, rhs, cond=1e-10)
    dpsi = dq @ coef
    r = s - dpsi
    residual = float(np.sqrt(max(r @ (mq @ r), 0.0) / e_phi))
    psi = Cochain(q, dual.subspace @ coef, bnd.mesh)
    return Conjugate(psi, residual, obstruction, e_phi, float(dpsi @ (mq @ dpsi)), coef)
