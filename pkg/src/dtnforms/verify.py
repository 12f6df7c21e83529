"""Theorem-level checks producing machine-readable pass/fail reports.

Every check records both sides, its tolerance and a margin (positive when
passing).  Eigenvalue index arithmetic lives here: ``sigma(k)`` counts the
kernel and ``sigma_tilde(k)`` skips it; the I_p and b_p offsets always come
from the exact topology of the mesh at hand.
"""

from __future__ import annotations

import platform
from dataclasses import dataclass, field
from fractions import Fraction
from math import comb

import numpy as np
import scipy

from . import __version__
from .ball import fraction_str, hps_sharpness_table
from .dtn import ConjugateError, assemble_dtn, conjugate_form
from .forms import Cochain, coboundary, mass_matrix
from .hodge import TopologyInvariants, betti_numbers
from .mesh import SimplicialMesh, extract_boundary
from .spectra import Spectrum, boundary_hodge_spectrum, steklov_spectrum

COMPARISON_TOL = 0.02
HPS_TOL = 0.05
DUALITY_TOL = 1e-7
SUITES = ("kernel", "comparison", "hps", "hps2", "duality")

REF_KERNEL = "main theorem: the kernel of Lambda on coclosed forms has dimension I_p"
REF_COMPARISON = "comparison theorem: mu~_k <= sigma~_k for 0 <= p <= n-2"
REF_BALL_EQUAL = "ball eigenbasis theorem: Lambda = L = k+p on traces of H''_{k,p}"
REF_HPS = "HPS theorem: sigma^(p)_{m+I_p} sigma^(n-2-p)_{r+I_{n-2-p}} <= lambda'^(p)_{I_p+m+r+b_{n-p-1}-1}"
REF_HPS2 = "HPS2 theorem: (sigma^(p)_{m+I_p})^2 <= lambda'^(p)_{I_p+b_{p+1}+2m-1}, dim M = 2p+2"
REF_HPS2_BALL = "HPS2 on the unit ball B^{2p+2}, exact ball spectra"
REF_DUAL = "conjugate forms: *d lambda(phi) = d lambda(psi)"
REF_DUAL_ENERGY = "conjugate forms: Hodge star isometry, ||d lambda(psi)|| = ||d lambda(phi)||"
REF_DUAL_CHAIN = "conjugate forms: ||d lambda(psi)||^4 <= ||psi||^2 ||i_n d lambda(psi)||^2 = ||psi||^2 ||d phi||^2"


def _num(x):
    if isinstance(x, Fraction):
        return fraction_str(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    return float(x)


@dataclass
class Check:
    name: str
    paper_ref: str
    lhs: object
    rhs: object
    tol: float
    passed: bool
    margin: float
    relation: str = "<="
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"name": self.name, "paper_ref": self.paper_ref, "lhs": _num(self.lhs), "rhs": _num(self.rhs),
                "tol": self.tol, "pass": bool(self.passed), "margin": float(self.margin),
                "relation": self.relation, "details": self.details}


def inequality(name: str, ref: str, lhs, rhs, tol: float, **details) -> Check:
    """lhs <= rhs * (1 + tol) + tol."""
    bound = rhs * (1 + tol) + tol if tol else rhs
    margin = bound - lhs
    return Check(name, ref, lhs, rhs, tol, bool(lhs <= bound), float(margin), "<=", details)


def equality(name: str, ref: str, lhs, rhs, tol: float, **details) -> Check:
    """|lhs - rhs| <= tol * max(1, |rhs|); exact when tol is 0."""
    err = abs(lhs - rhs)
    bound = tol * max(1.0, abs(float(rhs)))
    return Check(name, ref, lhs, rhs, tol, bool(err <= bound), float(bound - err), "==", details)


@dataclass
class Report:
    fixture: str
    checks: list[Check] = field(default_factory=list)
    topology: dict | None = None

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def failures(self) -> list[Check]:
        return [c for c in self.checks if not c.passed]

    def extend(self, checks) -> Report:
        self.checks.extend(checks)
        return self

    def to_dict(self) -> dict:
        return {
            "fixture": self.fixture,
            "checks": [c.to_dict() for c in sorted(self.checks, key=lambda c: c.name)],
            "environment": environment(),
            "topology": self.topology,
        }


def environment() -> dict:
    return {
        "tool": "dtnforms",
        "version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "tolerances": {"comparison": COMPARISON_TOL, "hps": HPS_TOL, "duality": DUALITY_TOL,
                       "zero_eigenvalue_rel": 1e-6, "multiplicity_rel": 1e-6, "harmonic_gap": 1e-6,
                       "trace_image_sv": 1e-8},
    }


def topology(mesh: SimplicialMesh) -> TopologyInvariants:
    key = "verify_topology"
    if key not in mesh._cache:
        mesh._cache[key] = betti_numbers(mesh, numeric=True)
    return mesh._cache[key]


def spectrum(mesh: SimplicialMesh, p: int, kind: str) -> Spectrum:
    """Full spectrum of Lambda/RaulotSavo (degree p) or the boundary Hodge Laplacian, cached."""
    key = ("verify_spectrum", p, kind)
    if key not in mesh._cache:
        bnd = extract_boundary(mesh)
        if kind == "BoundaryHodge":
            mesh._cache[key] = boundary_hodge_spectrum(bnd, p)
        else:
            mesh._cache[key] = steklov_spectrum(assemble_dtn(mesh, bnd, p, kind))
    return mesh._cache[key]


def is_topological_ball(inv: TopologyInvariants) -> bool:
    n = len(inv.betti) - 1
    sphere = [1] + [0] * (n - 2) + [1] if n >= 2 else [2]
    return inv.betti == [1] + [0] * n and inv.boundary_betti == sphere


def check_kernel(mesh: SimplicialMesh, p: int) -> Check:
    inv = topology(mesh)
    spec = spectrum(mesh, p, "Lambda")
    ip = inv.boundary_image_dim[p]
    return equality(f"kernel/p={p}", REF_KERNEL, spec.zero_count, ip, 0.0,
                    subspace_dim=spec.dim, rank=spec.dim - spec.zero_count, I_p=ip,
                    first_nonzero=float(spec.nonzero[0]) if len(spec.nonzero) else None)


def comparison_indices(k: int, inv: TopologyInvariants, p: int) -> tuple[int, int]:
    """Kernel-counting indices (mu index, sigma index) equivalent to mu~_k <= sigma~_k."""
    return k + inv.betti[p], k + inv.boundary_image_dim[p]


def check_comparison(mesh: SimplicialMesh, p: int, k_max: int = 10, tol: float = COMPARISON_TOL,
                     ball_equality: bool | None = None) -> list[Check]:
    n = mesh.dim
    if not 0 <= p <= n - 2:
        raise ValueError(f"comparison needs 0 <= p <= n-2, got p={p}, n={n}")
    inv = topology(mesh)
    lam = spectrum(mesh, p, "Lambda")
    rs = spectrum(mesh, p, "RaulotSavo")
    if ball_equality is None:
        ball_equality = p == 0 and is_topological_ball(inv)
    out = []
    for k in range(1, k_max + 1):
        mu, sig = rs.sigma_tilde(k), lam.sigma_tilde(k)
        mi, si = comparison_indices(k, inv, p)
        out.append(inequality(f"comparison/p={p}/k={k:02d}", REF_COMPARISON, mu, sig, tol,
                              mu_with_kernel=rs.sigma(mi), sigma_with_kernel=lam.sigma(si),
                              mu_index=mi, sigma_index=si, rs_zero_count=rs.zero_count, b_p=inv.betti[p]))
        if ball_equality:
            out.append(equality(f"comparison-equality/p={p}/k={k:02d}", REF_BALL_EQUAL, mu, sig, tol))
    return out


def check_hps(mesh: SimplicialMesh, p: int, m: int, r: int, tol: float = HPS_TOL) -> Check:
    n = mesh.dim
    if not 0 <= p <= n - 2:
        raise ValueError(f"HPS needs 0 <= p <= n-2, got p={p}, n={n}")
    q = n - 2 - p
    inv = topology(mesh)
    ip, iq, b = inv.boundary_image_dim[p], inv.boundary_image_dim[q], inv.betti[n - p - 1]
    s1 = spectrum(mesh, p, "Lambda").sigma(m + ip)
    s2 = spectrum(mesh, q, "Lambda").sigma(r + iq)
    ri = ip + m + r + b - 1
    lam = spectrum(mesh, p, "BoundaryHodge").sigma(ri)
    return inequality(f"hps/p={p}/m={m}/r={r}", REF_HPS, s1 * s2, lam, tol, sigma_p=s1, sigma_q=s2,
                      I_p=ip, I_q=iq, b=b, lhs_indices=[m + ip, r + iq], rhs_index=ri)


def check_hps2(mesh: SimplicialMesh, p: int, m: int, tol: float = HPS_TOL) -> Check:
    if mesh.dim != 2 * p + 2:
        raise ValueError(f"HPS2 needs dim M = 2p+2 = {2 * p + 2}, got {mesh.dim}")
    inv = topology(mesh)
    ip, b = inv.boundary_image_dim[p], inv.betti[p + 1]
    s = spectrum(mesh, p, "Lambda").sigma(m + ip)
    ri = ip + b + 2 * m - 1
    lam = spectrum(mesh, p, "BoundaryHodge").sigma(ri)
    return inequality(f"hps2/p={p}/m={m}", REF_HPS2, s * s, lam, tol, sigma=s, I_p=ip, b=b,
                      lhs_index=m + ip, rhs_index=ri)


def check_hps2_ball(p: int, m_max: int, strict: bool = False) -> list[Check]:
    """Analytic rows on B^{2p+2}; with ``strict`` exact rational comparison (tol 0)."""
    tol = 0.0 if strict else HPS_TOL
    sharp_upto = Fraction(comb(2 * p + 2, p + 1), 2)
    out = []
    for row in hps_sharpness_table(p, m_max):
        if strict:
            c = Check(f"hps2-ball/p={p}/m={row.m}", REF_HPS2_BALL, row.lhs, row.rhs, 0.0, row.holds,
                      float(row.rhs - row.lhs), "<=", {"equality": row.equality})
        else:
            c = inequality(f"hps2-ball/p={p}/m={row.m}", REF_HPS2_BALL, float(row.lhs), float(row.rhs), tol,
                           equality=row.equality)
        c.details.update(lhs_index=row.lhs_index, rhs_index=row.rhs_index)
        c.details["sharp_expected"] = bool(row.m <= sharp_upto)
        out.append(c)
    return out


def check_duality(mesh: SimplicialMesh, p: int, count: int = 3, tol: float = DUALITY_TOL,
                  scan_limit: int = 30) -> list[Check]:
    """Conjugate forms of the first ``count`` admissible Lambda eigencochains.

    Admissible: orthogonal to ker Lambda and with *D lambda(phi) orthogonal to
    Neumann harmonic fields.  Obstructed eigencochains are skipped, not
    failed; an informational entry records how many were skipped among the
    first ``scan_limit`` nonzero modes.
    """
    n = mesh.dim
    if not 0 <= p <= n - 2:
        raise ValueError(f"duality needs 0 <= p <= n-2, got p={p}, n={n}")
    bnd = extract_boundary(mesh)
    op = assemble_dtn(mesh, bnd, p, "Lambda")
    dual = assemble_dtn(mesh, bnd, n - p - 2, "Lambda")
    spec = spectrum(mesh, p, "Lambda")
    cochains = spec.eigencochains
    out, skipped, used = [], [], 0
    scan = range(spec.zero_count, min(len(spec.eigenvalues), spec.zero_count + scan_limit))
    scanned = 0
    for j in scan:
        if used == count:
            break
        scanned += 1
        phi = Cochain(p, cochains[:, j], bnd.mesh)
        try:
            conj = conjugate_form(phi, op, dual)
        except ConjugateError as exc:
            skipped.append({"index": j + 1, "reason": str(exc)})
            continue
        used += 1
        idx = j + 1
        psi = conj.psi.values
        mq = mass_matrix(bnd.mesh, n - p - 2).matrix
        cpsi = dual.coefficients(psi)
        e_psi = float(cpsi @ dual.schur @ cpsi)
        norm_psi = float(psi @ (mq @ psi))
        lam_psi = np.linalg.solve(dual.boundary_mass, dual.schur @ cpsi)
        norm_lam_psi = float(lam_psi @ dual.boundary_mass @ lam_psi)
        if p < bnd.mesh.dim:
            dphi = coboundary(bnd.mesh, p) @ phi.values
            norm_dphi = float(dphi @ (mass_matrix(bnd.mesh, p + 1).matrix @ dphi))
        else:
            norm_dphi = 0.0
        base = dict(eigen_index=idx, sigma=float(spec.eigenvalues[j]), skipped=list(skipped))
        out.append(inequality(f"duality/p={p}/i={idx:03d}/residual", REF_DUAL, conj.residual, 0.0, tol,
                              obstruction=conj.obstruction, **base))
        rel = abs(conj.energy_psi - conj.energy_phi) / conj.energy_phi
        out.append(inequality(f"duality/p={p}/i={idx:03d}/energy", REF_DUAL_ENERGY, rel, 0.0, tol,
                              energy_phi=conj.energy_phi, energy_psi=conj.energy_psi, **base))
        out.append(inequality(f"duality/p={p}/i={idx:03d}/cauchy-schwarz", REF_DUAL_CHAIN, e_psi ** 2,
                              norm_psi * norm_lam_psi, tol, **base))
        out.append(inequality(f"duality/p={p}/i={idx:03d}/chain", REF_DUAL_CHAIN, e_psi ** 2,
                              norm_psi * norm_dphi, tol, **base))
    info = Check(f"duality/p={p}/admissible", REF_DUAL, used, count, 0.0, True, 0.0, "info",
                 {"obstructed": skipped, "scanned": scanned})
    return out + [info]


def run_suite(mesh: SimplicialMesh, suite: str = "all", strict: bool = False, k_max: int = 10,
              duality_count: int = 3) -> Report:
    """Run one suite (or all) with fixture-appropriate degrees and indices."""
    suites = SUITES if suite == "all" else (suite,)
    for s in suites:
        if s not in SUITES:
            raise ValueError(f"unknown suite {s!r}; expected one of {SUITES + ('all',)}")
    n = mesh.dim
    inv = topology(mesh)
    report = Report(mesh.name, topology=inv.to_dict())
    if "kernel" in suites:
        report.extend(check_kernel(mesh, p) for p in range(n))
    if "comparison" in suites:
        for p in range(n - 1):
            report.extend(check_comparison(mesh, p, k_max))
    if "hps" in suites:
        for p in range(n - 1):
            for m in (1, 2):
                for r in (1, 2):
                    report.checks.append(check_hps(mesh, p, m, r))
    if "hps2" in suites:
        if n % 2 == 0:
            for m in (1, 2):
                report.checks.append(check_hps2(mesh, n // 2 - 1, m))
        report.extend(check_hps2_ball(1, 4, strict=strict))
    if "duality" in suites:
        for p in range(n - 1):
            report.extend(check_duality(mesh, p, duality_count))
    return report
