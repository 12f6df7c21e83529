import itertools
from math import factorial

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import BOUNDED, CLOSED
from dtnforms.data import load_fixture
from dtnforms.forms import (Cochain, coboundary, exterior_derivative, green_residual, mass_matrix,
                            read_cochain_csv, trace_map, trace_matrix, weak_codifferential,
                            write_cochain_csv)
from dtnforms.mesh import build_mesh, extract_boundary
from oracles import simplex_quadrature, whitney_mass_oracle


def _submesh(mesh, count):
    top = mesh.simplices[-1][:count]
    used = np.unique(top)
    remap = {int(v): i for i, v in enumerate(used)}
    return build_mesh(mesh.vertices[used], [[remap[int(v)] for v in s] for s in top])


@pytest.mark.parametrize("n", [1, 2, 3])
def test_quadrature_rule_is_degree_two_exact(n):
    rng = np.random.default_rng(n)
    verts = rng.standard_normal((n + 1, n))
    bary, _, w = simplex_quadrature(verts)
    vol = w.sum()
    assert vol == pytest.approx(abs(np.linalg.det(verts[1:] - verts[0])) / factorial(n))
    # Dirichlet moments: int lambda_i lambda_j = vol * (1 + [i=j]) / ((n+1)(n+2))
    for i, j in itertools.product(range(n + 1), repeat=2):
        exact = vol * (1 + (i == j)) / ((n + 1) * (n + 2))
        assert w @ (bary[:, i] * bary[:, j]) == pytest.approx(exact, rel=1e-12)


def test_unit_triangle_masses(triangle):
    m0 = mass_matrix(triangle, 0).toarray()
    assert np.allclose(m0, (0.5 / 12) * np.array([[2, 1, 1], [1, 2, 1], [1, 1, 2]]), atol=1e-15)
    assert mass_matrix(triangle, 2).toarray() == pytest.approx(np.array([[2.0]]))


def test_single_tet_top_mass():
    verts = np.array([[0, 0, 0], [2, 0, 0], [0, 1, 0], [0, 0, 3.0]])
    mesh = build_mesh(verts, [(0, 1, 2, 3)])
    assert mass_matrix(mesh, 3).toarray()[0, 0] == pytest.approx(1.0)  # volume 1


@pytest.mark.parametrize("name, count", [("disk_h0.1", None), ("ball3_h0.2", 60), ("annulus_h0.1", 80)])
def test_mass_matches_quadrature_oracle(name, count):
    mesh = load_fixture(name)
    if count is not None:
        mesh = _submesh(mesh, count)
    top = [tuple(int(v) for v in s) for s in mesh.simplices[-1]]
    for p in range(mesh.dim + 1):
        faces = [tuple(int(v) for v in s) for s in mesh.simplices[p]]
        oracle = whitney_mass_oracle(mesh.vertices, top, faces)
        got = mass_matrix(mesh, p).toarray()
        if p == mesh.dim:
            # sorted top simplices versus oriented basis: signs cancel on the diagonal
            assert np.allclose(np.diag(got), np.diag(oracle), rtol=1e-12)
            assert np.count_nonzero(got - np.diag(np.diag(got))) == 0
        else:
            assert np.allclose(got, oracle, atol=1e-12 * np.abs(oracle).max())


def test_mass_on_closed_surface_matches_oracle(sphere):
    mesh = _submesh(sphere, 50)
    top = [tuple(int(v) for v in s) for s in mesh.simplices[-1]]
    for p in range(2):
        faces = [tuple(int(v) for v in s) for s in mesh.simplices[p]]
        got = mass_matrix(mesh, p).toarray()
        assert np.allclose(got, whitney_mass_oracle(mesh.vertices, top, faces), atol=1e-13)


@pytest.mark.parametrize("name", BOUNDED + CLOSED)
def test_mass_is_spd(name):
    mesh = load_fixture(name)
    for p in range(mesh.dim + 1):
        m = mass_matrix(mesh, p).toarray() if mesh.count(p) < 3000 else None
        if m is None:
            continue
        assert np.allclose(m, m.T)
        assert np.linalg.eigvalsh(m)[0] > 0


@pytest.mark.parametrize("name", BOUNDED + CLOSED)
def test_dd_is_exactly_zero(name):
    mesh = load_fixture(name)
    for p in range(mesh.dim - 1):
        prod = coboundary(mesh, p + 1) @ coboundary(mesh, p)
        assert prod.count_nonzero() == 0 or np.abs(prod.data).max() == 0


def test_d_of_constant(disk):
    c = np.ones(disk.count(0))
    assert np.all(coboundary(disk, 0) @ c == 0)


def test_linear_function_energy(disk, ball):
    # ||d x||^2 equals the volume of the domain
    for mesh in (disk, ball):
        x = mesh.vertices[:, 0]
        dx = coboundary(mesh, 0) @ x
        vol = mesh.volumes(mesh.dim).sum()
        assert dx @ (mass_matrix(mesh, 1).matrix @ dx) == pytest.approx(vol, rel=1e-12)
        assert mass_matrix(mesh, 0).matrix.sum() == pytest.approx(vol, rel=1e-12)


@pytest.mark.parametrize("name", BOUNDED)
def test_trace_commutes_with_d(name):
    mesh = load_fixture(name)
    bnd = extract_boundary(mesh)
    for p in range(mesh.dim - 1):
        lhs = trace_matrix(bnd, p + 1) @ coboundary(mesh, p)
        rhs = coboundary(bnd.mesh, p) @ trace_matrix(bnd, p)
        assert abs(lhs - rhs).max() == 0


def test_trace_rows_are_unit(ball):
    bnd = extract_boundary(ball)
    for p in range(ball.dim):
        t = trace_map(ball, bnd, p).matrix
        assert np.all(np.diff(t.indptr) == 1)
        assert np.all(np.abs(t.data) == 1)


@pytest.mark.parametrize("name, p", [("disk_h0.05", 1), ("disk_h0.05", 2), ("annulus_h0.1", 1),
                                     ("ball3_h0.2", 1), ("ball3_h0.2", 3), ("sphere2_h0.15", 2)])
def test_green_residual(name, p):
    mesh = load_fixture(name)
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(100):
        u = rng.standard_normal(mesh.count(p - 1))
        v = rng.standard_normal(mesh.count(p))
        du = coboundary(mesh, p - 1) @ u
        scale = np.sqrt(du @ (mass_matrix(mesh, p).matrix @ du)) * np.sqrt(v @ (mass_matrix(mesh, p).matrix @ v))
        worst = max(worst, abs(green_residual(mesh, p, u, v)) / scale)
    assert worst <= 1e-10


def test_weak_codifferential_of_exact_function_gradient(disk):
    # delta_h d of a constant vanishes; delta_h is the mass adjoint of d
    delta = weak_codifferential(disk, 1).toarray()
    assert delta.shape == (disk.count(0), disk.count(1))
    assert np.abs(delta @ (coboundary(disk, 0) @ np.ones(disk.count(0)))).max() == 0


def test_degree_errors(disk):
    with pytest.raises(ValueError):
        exterior_derivative(disk, 2)
    with pytest.raises(ValueError):
        weak_codifferential(disk, 0)
    with pytest.raises(ValueError):
        Cochain(1, np.zeros(3), disk)


def test_linear_map_composition(disk):
    d0, d1 = exterior_derivative(disk, 0), exterior_derivative(disk, 1)
    assert (d1 @ d0).shape == (disk.count(2), disk.count(0))
    with pytest.raises(ValueError):
        d0 @ d1


@given(st.lists(st.floats(-1e6, 1e6, allow_nan=False), min_size=1, max_size=30))
def test_cochain_csv_round_trip(tmp_path_factory, values):
    path = tmp_path_factory.mktemp("c") / "c.csv"
    write_cochain_csv(np.array(values), path)
    assert np.array_equal(read_cochain_csv(path, size=len(values)), np.array(values))


def test_cochain_csv_errors(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("# header\n0,1.0\n1;2\n")
    with pytest.raises(ValueError, match="line 3"):
        read_cochain_csv(bad)
    bad.write_text("7,1.0\n")
    with pytest.raises(ValueError, match="outside"):
        read_cochain_csv(bad, size=3)


def test_cochain_algebra(annulus):
    rng = np.random.default_rng(0)
    a = Cochain(1, rng.standard_normal(annulus.count(1)), annulus)
    b = Cochain(1, rng.standard_normal(annulus.count(1)), annulus)
    assert (a + b).inner(a) == pytest.approx(a.inner(a) + b.inner(a))
    assert (2 * a).norm() == pytest.approx(2 * a.norm())
    assert (a - a).norm() == 0
