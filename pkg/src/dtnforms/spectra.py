"""Generalized symmetric eigenproblems and spectra of the boundary operators."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from os import PathLike
from pathlib import Path

import numpy as np
import scipy.linalg as sla

from .dtn import DtNOperator, coclosed_subspace
from .forms import coboundary, mass_matrix
from .hodge import betti_numbers
from .mesh import BoundaryMesh, SimplicialMesh

SPECTRUM_KINDS = ("Lambda", "RaulotSavo", "BoundaryHodge", "generic")
ZERO_REL = 1e-6
GROUP_REL = 1e-6


class NotPositiveDefiniteError(ValueError):
    def __init__(self, smallest_pivot: float):
        super().__init__(f"mass matrix is not SPD: smallest pivot {smallest_pivot:.3e}")
        self.smallest_pivot = smallest_pivot


@dataclass(eq=False)
class Spectrum:
    kind: str
    degree: int | None
    eigenvalues: np.ndarray
    vectors: np.ndarray = field(repr=False)
    zero_count: int
    zero_tol: float
    residual: float = 0.0
    orthonormality_error: float = 0.0
    basis: np.ndarray | None = field(default=None, repr=False)
    expected_zero_count: int | None = None
    dim: int = 0

    @property
    def groups(self) -> np.ndarray:
        """Multiplicity group id per eigenvalue (consecutive, relative gap GROUP_REL)."""
        return group_eigenvalues(self.eigenvalues)

    @property
    def eigencochains(self) -> np.ndarray:
        """Eigenvectors as boundary cochains (columns); mass-orthonormal."""
        return self.vectors if self.basis is None else self.basis @ self.vectors

    @property
    def nonzero(self) -> np.ndarray:
        return self.eigenvalues[self.zero_count:]

    def sigma(self, k: int) -> float:
        """k-th eigenvalue, 1-based, counting the kernel."""
        if not 1 <= k <= len(self.eigenvalues):
            raise IndexError(f"eigenvalue index {k} outside computed range 1..{len(self.eigenvalues)}")
        return float(self.eigenvalues[k - 1])

    def sigma_tilde(self, k: int) -> float:
        """k-th nonzero eigenvalue, 1-based."""
        if not 1 <= k <= len(self.nonzero):
            raise IndexError(f"nonzero eigenvalue index {k} outside computed range 1..{len(self.nonzero)}")
        return float(self.nonzero[k - 1])

    def clusters(self, rel_tol: float) -> list[tuple[float, int]]:
        """(mean, size) of nonzero eigenvalue clusters with consecutive relative gaps <= rel_tol."""
        out = []
        vals = self.nonzero
        i = 0
        while i < len(vals):
            j = i + 1
            while j < len(vals) and vals[j] - vals[j - 1] <= rel_tol * max(1.0, abs(vals[j - 1])):
                j += 1
            out.append((float(vals[i:j].mean()), j - i))
            i = j
        return out

    def to_csv(self, count: int | None = None, digits: int = 12) -> str:
        """``index,eigenvalue,multiplicity_group`` rows, fixed-point with ``digits`` decimals."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        rows = zip(self.eigenvalues[:count], self.groups[:count])
        for i, (val, g) in enumerate(rows, start=1):
            w.writerow([i, format_value(val, digits), int(g)])
        return buf.getvalue()

    def write_csv(self, path: str | PathLike) -> None:
        Path(path).write_text(self.to_csv(), encoding="utf-8")

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "degree": self.degree,
            "dim": self.dim,
            "eigenvalues": [float(v) for v in self.eigenvalues],
            "multiplicity_group": [int(g) for g in self.groups],
            "zero_count": self.zero_count,
            "expected_zero_count": self.expected_zero_count,
            "zero_tol": self.zero_tol,
            "residual": self.residual,
            "orthonormality_error": self.orthonormality_error,
        }


def format_value(v: float, digits: int = 12) -> str:
    """Fixed-point text; values that round to zero print without a sign."""
    s = f"{float(v):.{digits}f}"
    return s[1:] if s.startswith("-") and float(s) == 0 else s


def group_eigenvalues(vals: np.ndarray, rel: float = GROUP_REL) -> np.ndarray:
    groups = np.zeros(len(vals), dtype=int)
    g = 0
    for i in range(1, len(vals)):
        if vals[i] - vals[i - 1] > rel * max(1.0, abs(vals[i - 1])):
            g += 1
        groups[i] = g
    return groups


def smallest_pivot(b: np.ndarray) -> float:
    _, d, _ = sla.ldl(b)
    return float(np.min(np.linalg.eigvalsh(d)))


def solve_generalized(a, b, count: int | None = None, kind: str = "generic", degree: int | None = None,
                      zero_tol: float | None = None) -> Spectrum:
    """Lowest ``count`` eigenpairs of A v = sigma B v (dense).

    Parameters
    ----------
    a : symmetric matrix
    b : symmetric positive definite matrix
    count : number of eigenpairs, all by default
    zero_tol : eigenvalues at most this are counted as kernel; defaults to
        ``ZERO_REL * max(1, bound on |sigma|)``

    Raises
    ------
    NotPositiveDefiniteError
        If B fails its Cholesky factorization.
    """
    a = np.asarray(a.toarray() if hasattr(a, "toarray") else a, dtype=float)
    b = np.asarray(b.toarray() if hasattr(b, "toarray") else b, dtype=float)
    if a.shape != b.shape or a.shape[0] != a.shape[1]:
        raise ValueError("A and B must be square with equal shape")
    nrm = np.linalg.norm(a, 2) if a.size else 0.0
    if np.max(np.abs(a - a.T), initial=0.0) > 1e-9 * max(1.0, nrm):
        raise ValueError("A is not symmetric within 1e-9")
    dim = a.shape[0]
    count = dim if count is None else count
    if not 0 <= count <= dim:
        raise ValueError(f"count {count} outside 0..{dim}")
    if count == 0:
        return Spectrum(kind, degree, np.zeros(0), np.zeros((dim, 0)), 0, 0.0, dim=dim)
    try:
        chol = sla.cholesky(b, lower=True)
    except np.linalg.LinAlgError:
        raise NotPositiveDefiniteError(smallest_pivot(b)) from None
    a = 0.5 * (a + a.T)
    # reduce to a standard problem through the Cholesky factor of B
    c = sla.solve_triangular(chol, sla.solve_triangular(chol, a, lower=True).T, lower=True)
    c = 0.5 * (c + c.T)
    w, y = sla.eigh(c, subset_by_index=[0, count - 1])
    v = sla.solve_triangular(chol.T, y, lower=False)
    bound = np.linalg.norm(c, 2)
    if zero_tol is None:
        zero_tol = ZERO_REL * max(1.0, bound)
    r = a @ v - (b @ v) * w
    residual = float(np.max(np.linalg.norm(r, axis=0))) if count else 0.0
    ortho = float(np.max(np.abs(v.T @ b @ v - np.eye(count))))
    zc = int(np.sum(w <= zero_tol))
    return Spectrum(kind, degree, w, v, zc, float(zero_tol), residual, ortho, dim=dim)


def steklov_spectrum(dtn: DtNOperator, count: int | None = None, check_kernel: bool = True) -> Spectrum:
    """Spectrum of the operator pair; for Lambda the kernel size is compared with I_p."""
    spec = solve_generalized(dtn.schur, dtn.boundary_mass, count, kind=dtn.kind, degree=dtn.degree)
    spec.basis = dtn.subspace
    if dtn.kind == "Lambda" and check_kernel:
        inv = betti_numbers(dtn.boundary.parent, numeric=False)
        spec.expected_zero_count = inv.boundary_image_dim[dtn.degree]
    return spec


def boundary_hodge_spectrum(boundary: BoundaryMesh | SimplicialMesh, p: int, count: int | None = None) -> Spectrum:
    """Eigenvalues of ||D u||^2 / ||u||^2 over coclosed p-cochains of a closed complex."""
    bm = boundary.mesh if isinstance(boundary, BoundaryMesh) else boundary
    if not bm.is_closed():
        raise ValueError("boundary Hodge spectrum requires a closed complex")
    z = coclosed_subspace(bm, p)
    if p < bm.dim:
        dz = coboundary(bm, p) @ z
        a = dz.T @ (mass_matrix(bm, p + 1).matrix @ dz)
    else:
        a = np.zeros((z.shape[1], z.shape[1]))
    bmass = z.T @ (mass_matrix(bm, p).matrix @ z)
    spec = solve_generalized(a, bmass, count, kind="BoundaryHodge", degree=p)
    spec.basis = z
    return spec


@dataclass
class ProbeReport:
    trials: int
    kmax: int
    violations: int
    worst_margin: float
    equality_error: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def minmax_probe(spectrum: Spectrum, dtn: DtNOperator, trials: int = 200, seed: int = 42,
                 kmax: int = 10, tol: float = 1e-9) -> ProbeReport:
    """Rayleigh quotients of random cochains orthogonal to the first k-1 eigenvectors.

    Each quotient must be at least sigma_k - tol * max(1, sigma_k).  The
    margin is quotient - sigma_k; the worst (smallest) one is returned, along
    with the largest deviation of eigenvector quotients from sigma_k.
    """
    rng = np.random.default_rng(seed)
    s, b = dtn.schur, dtn.boundary_mass
    v = spectrum.vectors
    kmax = min(kmax, len(spectrum.eigenvalues))
    worst = np.inf
    violations = 0
    eq_err = 0.0
    for k in range(1, kmax + 1):
        sig = spectrum.eigenvalues[k - 1]
        vk = v[:, k - 1]
        eq_err = max(eq_err, abs(vk @ s @ vk / (vk @ b @ vk) - sig))
        prev = v[:, :k - 1]
        for _ in range(trials):
            c = rng.standard_normal(s.shape[0])
            c = c - prev @ (prev.T @ (b @ c))
            c = c - prev @ (prev.T @ (b @ c))
            q = (c @ s @ c) / (c @ b @ c)
            margin = q - sig
            worst = min(worst, margin)
            if margin < -tol * max(1.0, abs(sig)):
                violations += 1
    return ProbeReport(trials, kmax, violations, float(worst), float(eq_err))
