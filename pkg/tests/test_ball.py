from fractions import Fraction
from math import comb

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dtnforms.ball import (ball_entry, ball_table, ball_topology, codifferential, coclosed_spectra,
                           dimension_oracle, exterior, fraction_str, hps_sharpness_table, laplacian,
                           radial_contraction, radial_wedge, space_dim)

forms = st.tuples(st.integers(2, 4), st.integers(1, 3), st.integers(0, 4)).filter(lambda t: t[2] <= t[0])


def _dense(m):
    return m.toarray().astype(np.int64)


@given(forms)
def test_d_squared_and_delta_squared(t):
    nvar, k, p = t
    if k >= 2 and p + 2 <= nvar:
        assert not (_dense(exterior(nvar, k - 1, p + 1)) @ _dense(exterior(nvar, k, p))).any()
    if k >= 2 and p >= 2:
        assert not (_dense(codifferential(nvar, k - 1, p - 1)) @ _dense(codifferential(nvar, k, p))).any()


@given(forms)
def test_cartan_formula(t):
    # i_x d + d i_x is the Lie derivative along x: multiplication by k + p on P_{k,p}
    nvar, k, p = t
    n = space_dim(nvar, k, p)
    total = np.zeros((n, n), dtype=np.int64)
    if p < nvar and k >= 1:
        total += _dense(radial_contraction(nvar, k - 1, p + 1)) @ _dense(exterior(nvar, k, p))
    if p >= 1:
        total += _dense(exterior(nvar, k + 1, p - 1)) @ _dense(radial_contraction(nvar, k, p))
    assert np.array_equal(total, (k + p) * np.eye(n, dtype=np.int64))


@given(forms)
def test_hodge_laplacian_is_minus_componentwise(t):
    nvar, k, p = t
    if k < 2:
        return
    n = space_dim(nvar, k, p)
    hodge = np.zeros((space_dim(nvar, k - 2, p), n), dtype=np.int64)
    if p >= 1:
        hodge += _dense(exterior(nvar, k - 1, p - 1)) @ _dense(codifferential(nvar, k, p))
    if p < nvar:
        hodge += _dense(codifferential(nvar, k - 1, p + 1)) @ _dense(exterior(nvar, k, p))
    assert np.array_equal(hodge, -_dense(laplacian(nvar, k, p)))


@given(forms)
def test_radial_wedge_squares_to_zero(t):
    nvar, k, p = t
    if p + 2 <= nvar:
        assert not (_dense(radial_wedge(nvar, k + 1, p + 1)) @ _dense(radial_wedge(nvar, k, p))).any()


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_constant_coefficient_traces(n):
    for p in range(n):
        assert dimension_oracle(n, p, 1, "Hdoubleprime", restricted=True) == comb(n + 1, p + 1)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_spherical_harmonic_counts(n):
    for k in range(5):
        expected = comb(n + k, n) - (comb(n + k - 2, n) if k >= 2 else 0)
        assert dimension_oracle(n, 0, k, "H") == expected
    assert [dimension_oracle(2, 0, k, "H") for k in range(5)] == [1, 3, 5, 7, 9]


def test_polynomial_space_dimension():
    assert dimension_oracle(2, 1, 2, "P") == comb(4, 2) * 3
    assert dimension_oracle(2, 4, 1, "P") == 0  # p > n + 1


@pytest.mark.parametrize("n", [2, 3, 4])
def test_delta_isomorphism_dimensions(n):
    for p in range(1, n):
        for k in range(1, 4):
            assert dimension_oracle(n, p, k, "Hprime", restricted=True) == \
                dimension_oracle(n, p - 1, k + 1, "Hdoubleprime", restricted=True)


def test_entries():
    e = ball_entry(3, 1, 1, "Hdoubleprime")
    assert (e.lambda_eigenvalue, e.L_eigenvalue, e.delta_eigenvalue, e.multiplicity) == (2, 2, 4, 6)
    e = ball_entry(3, 1, 1, "Hprime")
    assert (e.lambda_eigenvalue, e.L_eigenvalue, e.delta_eigenvalue) == (0, Fraction(3, 2), 3)
    assert e.multiplicity == 4
    assert ball_entry(2, 0, 1, "Hdoubleprime").lambda_eigenvalue == 1
    assert ball_entry(2, 1, 1, "Hprime").L_eigenvalue == Fraction(5, 3)


@pytest.mark.parametrize("args", [(3, 1, 0, "Hprime"), (3, 0, 1, "Hprime"), (3, 3, 1, "Hdoubleprime"),
                                  (3, 1, 1, "other")])
def test_entry_errors(args):
    with pytest.raises(ValueError):
        ball_entry(*args)


def test_oracle_range_errors():
    with pytest.raises(ValueError):
        dimension_oracle(5, 1, 1, "H")
    with pytest.raises(ValueError):
        dimension_oracle(2, 1, 9, "H")
    with pytest.raises(ValueError):
        dimension_oracle(2, 1, 1, "Q")


def test_table_invariants():
    for e in ball_table(3, 1, 3):
        assert e.lambda_eigenvalue >= 0 and e.L_eigenvalue >= 0 and e.delta_eigenvalue >= 0
        if e.family == "Hdoubleprime":
            assert e.lambda_eigenvalue == e.L_eigenvalue
        else:
            assert e.lambda_eigenvalue == 0
    assert all(r.family == "Hdoubleprime" for r in ball_table(2, 0, 3))
    assert ball_table(3, 1, 1)[0].to_dict()["L"] == "3/2"
    assert fraction_str(Fraction(4)) == "4/1"


def test_scalar_steklov_multiplicities():
    lam, delta = coclosed_spectra(2, 0, 3)
    assert lam[:10] == [0, 1, 1, 1, 2, 2, 2, 2, 2, 3]
    assert delta[:4] == [0, 2, 2, 2]


def test_ball_topology():
    assert ball_topology(3) == ([1, 0, 0, 0], [1, 0, 0])
    assert ball_topology(4)[1] == [1, 0, 0, 0]


def test_sharpness_p1():
    rows = hps_sharpness_table(1, 4)
    assert [(r.lhs, r.rhs) for r in rows] == [(4, 4), (4, 4), (4, 4), (4, 9)]
    assert [r.equality for r in rows] == [True, True, True, False]
    assert all(r.holds for r in rows)


def test_sharpness_p0():
    rows = hps_sharpness_table(0, 2)
    assert rows[0].lhs == rows[0].rhs == 1
    assert rows[0].lhs_index == 2 and rows[0].rhs_index == 2
