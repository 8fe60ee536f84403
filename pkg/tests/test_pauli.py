import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qecdiag import pauli as pl
from qecdiag.errors import UsageError
from qecdiag.pauli import PauliOperator as P


def paulis(n):
    return st.builds(lambda i, ph: P.from_index(i, n) * P(0, 0, n, ph),
                     st.integers(0, 4**n - 1), st.integers(0, 3))


def test_x_times_z_is_minus_i_y():
    assert P.from_string("X") * P.from_string("Z") == P.from_string("-iY")


def test_identity_is_neutral():
    p = P.from_string("-iXY")
    assert P.identity(2) * p == p
    assert p * P.identity(2) == p


def test_two_qubit_product_matches_dense():
    a, b = P.from_string("XZ"), P.from_string("ZZ")
    prod = a * b
    assert prod == P.from_string("-iYI")
    assert np.allclose(prod.to_matrix(), a.to_matrix() @ b.to_matrix())


@pytest.mark.parametrize("a,b,expected", [("X", "Z", False), ("X", "X", True), ("XX", "ZZ", True)])
def test_commutes(a, b, expected):
    assert pl.commutes(P.from_string(a), P.from_string(b)) is expected


@pytest.mark.parametrize("s,w", [("III", 0), ("IXYZ", 3), ("XXXXXXX", 7)])
def test_weight(s, w):
    assert pl.weight(P.from_string(s)) == w


def test_size_mismatch_is_usage_error():
    with pytest.raises(UsageError):
        pl.multiply(P.from_string("X"), P.from_string("XX"))
    with pytest.raises(UsageError):
        pl.commutes(P.from_string("X"), P.from_string("XX"))


@pytest.mark.parametrize("text", ["IXYZ", "ZZYI", "Y", "XXXXXXX"])
def test_string_round_trip(text):
    assert str(P.from_string(text)) == text


def test_phase_prefixes():
    assert P.from_string("-1XZ").phase == 2
    assert P.from_string("+iY").phase == 1
    assert P.from_string("-iY").phase == 3
    with pytest.raises(UsageError):
        P.from_string("XQ")


def test_canonical_index_qubit0_most_significant():
    assert P.from_string("XI").index == 4
    assert P.from_string("IX").index == 1
    assert P.from_string("ZY").index == 14


@pytest.mark.parametrize("n", [1, 2, 3])
def test_enumeration_is_bijective(n):
    seen = {(p.x, p.z) for p in pl.iter_paulis(n)}
    assert len(seen) == 4**n
    assert [p.index for p in pl.iter_paulis(n)] == list(range(4**n))


def test_enumeration_bijective_seven_qubits_vectorised():
    x, z = pl.index_xz(7)
    assert len(set(zip(x.tolist(), z.tolist()))) == 4**7
    assert np.array_equal(pl.xz_to_index(x, z, 7), np.arange(4**7))


@settings(max_examples=200, deadline=None)
@given(paulis(3), paulis(3), paulis(3))
def test_associative(a, b, c):
    assert (a * b) * c == a * (b * c)


@settings(max_examples=200, deadline=None)
@given(paulis(3))
def test_inverse(a):
    prod = a * a.inverse()
    assert prod.is_identity() and prod.phase == 0


@settings(max_examples=200, deadline=None)
@given(paulis(3), paulis(3))
def test_commutes_symmetric_and_matches_dense(a, b):
    assert pl.commutes(a, b) == pl.commutes(b, a)
    ma, mb = a.to_matrix(), b.to_matrix()
    assert pl.commutes(a, b) == np.allclose(ma @ mb, mb @ ma)


@settings(max_examples=200, deadline=None)
@given(paulis(3), paulis(3))
def test_product_matches_dense_and_weight_subadditive(a, b):
    assert np.allclose((a * b).to_matrix(), a.to_matrix() @ b.to_matrix())
    assert pl.weight(a * b) <= pl.weight(a) + pl.weight(b)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.integers(0, 4**4 - 1), min_size=2, max_size=2))
def test_vectorised_product_agrees(ij):
    a, b = P.from_index(ij[0], 4), P.from_index(ij[1], 4)
    x, z, r = pl.raw_multiply(a.x, a.z, a.raw_phase, b.x, b.z, b.raw_phase)
    prod = a * b
    assert (int(x), int(z), int(r)) == (prod.x, prod.z, prod.raw_phase)
    assert int(pl.symplectic_parity(a.x, a.z, b.x, b.z)) == (not pl.commutes(a, b))
