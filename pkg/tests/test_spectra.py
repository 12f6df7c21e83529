import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dtnforms.dtn import assemble_dtn
from dtnforms.mesh import extract_boundary
from dtnforms.spectra import (NotPositiveDefiniteError, boundary_hodge_spectrum, group_eigenvalues,
                              minmax_probe, solve_generalized, steklov_spectrum)
from oracles import inertia_count, laplace_steklov_disk


def _random_pair(rng, n=50):
    a = rng.standard_normal((n, n))
    a = a + a.T
    g = rng.standard_normal((n, n))
    b = g @ g.T + n * np.eye(n)
    return a, b


@pytest.mark.parametrize("seed", range(5))
def test_eigensolver_matches_inertia_oracle(seed):
    rng = np.random.default_rng(seed)
    a, b = _random_pair(rng)
    spec = solve_generalized(a, b)
    w = spec.eigenvalues
    probes = np.sort(rng.uniform(w[0] - 1, w[-1] + 1, 10))
    for t in probes:
        assert int(np.sum(w < t)) == inertia_count(a, b, t)
    # each eigenvalue is bracketed by the inertia count to 1e-9
    for k in rng.choice(len(w), 10, replace=False):
        assert inertia_count(a, b, w[k] - 1e-9 * max(1, abs(w[k]))) <= k
        assert inertia_count(a, b, w[k] + 1e-9 * max(1, abs(w[k]))) >= k + 1
    assert spec.residual < 1e-9 * np.linalg.norm(a, 2)
    assert spec.orthonormality_error < 1e-10


@settings(max_examples=25)
@given(st.integers(2, 12), st.integers(0, 2 ** 31))
def test_eigenvectors_are_b_orthonormal(n, seed):
    rng = np.random.default_rng(seed)
    a, b = _random_pair(rng, n)
    spec = solve_generalized(a, b)
    v = spec.vectors
    assert np.allclose(v.T @ b @ v, np.eye(n), atol=1e-9)
    assert np.allclose(a @ v, b @ v * spec.eigenvalues, atol=1e-8 * np.linalg.norm(a, 2))
    assert np.all(np.diff(spec.eigenvalues) >= 0)


def test_diagonal_example():
    spec = solve_generalized(np.diag([0.0, 4.0, 2.0]), np.diag([1.0, 2.0, 1.0]))
    assert np.allclose(spec.eigenvalues, [0, 2, 2])
    assert spec.zero_count == 1
    assert list(spec.groups) == [0, 1, 1]
    assert spec.sigma(1) == 0 and spec.sigma_tilde(1) == pytest.approx(2.0)
    with pytest.raises(IndexError):
        spec.sigma(4)
    with pytest.raises(IndexError):
        spec.sigma_tilde(3)
    assert spec.to_csv().splitlines()[0] == "1,0.000000000000,0"


def test_partial_count():
    rng = np.random.default_rng(1)
    a, b = _random_pair(rng, 20)
    full = solve_generalized(a, b)
    part = solve_generalized(a, b, count=4)
    assert np.allclose(part.eigenvalues, full.eigenvalues[:4])


def test_not_positive_definite():
    with pytest.raises(NotPositiveDefiniteError) as err:
        solve_generalized(np.eye(2), np.diag([1.0, -1.0]))
    assert err.value.smallest_pivot < 0


def test_asymmetric_rejected():
    with pytest.raises(ValueError, match="symmetric"):
        solve_generalized(np.array([[1.0, 2.0], [0.0, 1.0]]), np.eye(2))


def test_grouping():
    assert list(group_eigenvalues(np.array([0, 1, 1 + 1e-9, 2]))) == [0, 1, 1, 2]


def test_circle_hodge_spectrum(circle):
    spec = boundary_hodge_spectrum(circle, 0, count=5)
    assert np.allclose(spec.eigenvalues, [0, 1, 1, 4, 4], rtol=0.03, atol=1e-9)
    assert spec.zero_count == 1


def test_sphere_hodge_spectrum(sphere):
    spec = boundary_hodge_spectrum(sphere, 0, count=4)
    assert spec.zero_count == 1
    assert np.allclose(spec.eigenvalues[1:], 2.0, rtol=0.10)
    one = boundary_hodge_spectrum(sphere, 1, count=3)
    # coclosed 1-forms on S^2 are co-exact: first eigenvalue 2, multiplicity 3
    assert one.zero_count == 0
    assert np.allclose(one.eigenvalues, 2.0, rtol=0.10)


def test_disk_steklov(disk):
    spec = steklov_spectrum(assemble_dtn(disk, None, 0))
    expected = laplace_steklov_disk(3)
    assert np.allclose(spec.eigenvalues[:7], expected, rtol=0.05, atol=1e-9)
    assert spec.zero_count == spec.expected_zero_count == 1
    assert [c[1] for c in spec.clusters(0.01)[:3]] == [2, 2, 2]


def test_disk_one_forms(disk):
    spec = steklov_spectrum(assemble_dtn(disk, None, 1))
    # coclosed 1-forms on the circle are the harmonic ones; the disk kills their class
    assert spec.dim == 1
    assert spec.zero_count == spec.expected_zero_count == 0
    assert spec.eigenvalues[0] == pytest.approx(2.0, rel=0.02)


def test_annulus_kernel(annulus):
    for p in (0, 1):
        spec = steklov_spectrum(assemble_dtn(annulus, None, p))
        assert spec.zero_count == spec.expected_zero_count == 1


@pytest.mark.parametrize("kind, p", [("Lambda", 0), ("Lambda", 1), ("RaulotSavo", 1)])
def test_minmax_probe(annulus, kind, p):
    op = assemble_dtn(annulus, None, p, kind)
    spec = steklov_spectrum(op)
    rep = minmax_probe(spec, op, trials=200, seed=42)
    assert rep.violations == 0
    assert rep.worst_margin >= -1e-9 * max(1.0, spec.eigenvalues[-1])
    assert rep.equality_error < 1e-9


def test_eigencochains_live_on_boundary(ball):
    op = assemble_dtn(ball, None, 0)
    spec = steklov_spectrum(op, count=5)
    bnd = extract_boundary(ball)
    assert spec.eigencochains.shape == (bnd.mesh.count(0), 5)
    assert spec.zero_count == 1
    assert np.allclose(spec.eigenvalues[1:4], 1.0, rtol=0.05)
