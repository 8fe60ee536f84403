import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qecdiag import channels as ch
from qecdiag import pauli as pl
from qecdiag.errors import UsageError, ValidationError

IDENTITY_CHI = np.diag([1.0, 0, 0, 0]).astype(complex)


def dense_twirl(chi):
    """Average of P E(P rho P) P over the four Paulis, as a chi diagonal."""
    basis = [np.outer(a, b.conj()) for a in np.eye(2) for b in np.eye(2)]
    out = np.zeros((4, 4), dtype=complex)
    for s in ch.SIGMA:
        for b in basis:
            out += np.kron(b, s @ ch.ChiMatrix(chi).apply(s @ b @ s) @ s) / 8
    bell = np.array([1, 0, 0, 1]) / math.sqrt(2)
    probs = []
    for s in ch.SIGMA:
        v = np.kron(np.eye(2), s) @ bell
        probs.append((v.conj() @ out @ v).real)
    return np.array(probs)


def test_infidelity_examples():
    assert ch.infidelity(ch.ChiMatrix(IDENTITY_CHI)) == 0
    assert ch.infidelity(ch.depolarizing(1, 0.03)) == pytest.approx(0.03)
    theta = 0.2
    u = np.cos(theta) * np.eye(2) - 1j * np.sin(theta) * ch.SIGMA[3]
    assert ch.infidelity(ch.chi_from_unitary(u)) == pytest.approx(math.sin(theta) ** 2)


def test_twirl_of_z_rotation_matches_dense():
    theta = 0.3
    u = np.cos(theta) * np.eye(2) - 1j * np.sin(theta) * ch.SIGMA[3]
    chi = ch.chi_from_unitary(u)
    tw = ch.pauli_twirl(chi).probs[0]
    assert np.allclose(tw, [math.cos(theta) ** 2, 0, 0, math.sin(theta) ** 2])
    assert np.allclose(tw, dense_twirl(chi))


def test_twirl_fixed_point_and_idempotent():
    d = ch.PauliDist.single([0.9, 0.05, 0.03, 0.02])
    assert np.array_equal(ch.pauli_twirl(np.diag(d.probs[0])).probs, d.probs)
    assert ch.pauli_twirl(d) is d


def test_twirl_rejects_bad_diagonal():
    with pytest.raises(ValidationError):
        ch.pauli_twirl(np.diag([0.5, 0.1, 0.1, 0.1]))


def test_random_cptp_ensemble_valid_and_twirl_keeps_infidelity():
    rng = np.random.default_rng(0)
    for seed in range(1000):
        t = 10 ** rng.uniform(-3, -1)
        c = ch.random_cptp(t, seed)
        c.validate()
        assert ch.infidelity(ch.pauli_twirl(c)) == pytest.approx(ch.infidelity(c), abs=1e-12)


def test_random_cptp_deterministic_and_t0_identity():
    a = ch.random_cptp(0.05, 17).matrix
    b = ch.random_cptp(0.05, 17).matrix
    assert np.array_equal(a, b)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        zero = ch.random_cptp(0.0, 3).matrix
    assert np.allclose(zero, IDENTITY_CHI, atol=1e-14)


def test_random_cptp_warns_outside_range():
    with pytest.warns(UserWarning):
        ch.random_cptp(0.5, 1)


def test_random_cptp_matches_dense_stinespring():
    t, seed = 0.07, 4
    c = ch.random_cptp(t, seed)
    rng = np.random.default_rng(seed)
    from scipy.linalg import expm
    u = expm(-1j * ch.gaussian_hermitian(8, rng) * t)
    rho = np.array([[0.6, 0.2 - 0.1j], [0.2 + 0.1j, 0.4]])
    env = np.zeros((4, 4))
    env[0, 0] = 1
    big = u @ np.kron(rho, env) @ u.conj().T
    out = np.einsum("ajbj->ab", big.reshape(2, 4, 2, 4))
    assert np.allclose(c.apply(rho), out)


def test_coherent_channel():
    assert np.allclose(ch.coherent_channel([0, 0, 1], 0).matrix, IDENTITY_CHI)
    delta = 0.13
    c = ch.coherent_channel([0, 0, 1], delta)
    assert ch.infidelity(c) == pytest.approx(math.sin(math.pi * delta / 2) ** 2)
    u = np.cos(math.pi * delta / 2) * np.eye(2) - 1j * np.sin(math.pi * delta / 2) * ch.SIGMA[3]
    assert np.allclose(c.matrix, ch.chi_from_unitary(u))
    evals = np.linalg.eigvalsh(ch.coherent_channel([0.6, 0, 0.8], 0.3).matrix)
    assert np.sum(evals > 1e-12) == 1 and evals.max() == pytest.approx(1)
    with pytest.raises(UsageError):
        ch.coherent_channel([1, 1, 0], 0.1)


def test_correlated_pauli():
    n = 3
    dep = ch.depolarizing(n, 1 - (1 - 0.02) ** (1 / n)).explicit()
    q1 = ch.correlated_pauli(n, 0.02, 1.0, [5, 9], seed=0)
    assert np.allclose(q1.probs, dep, atol=1e-15)
    d = ch.correlated_pauli(n, 0.02, 0.3, [5, 9, 33], seed=1)
    assert d.probs.sum() == pytest.approx(1, abs=1e-12)
    assert d.probs[0] == pytest.approx(0.98, abs=1e-12)
    d.validate()
    with pytest.raises(UsageError):
        ch.correlated_pauli(n, 0.02, 0.5, [], seed=0)
    with pytest.raises(UsageError):
        ch.correlated_pauli(n, 0.02, 0.5, [0, 3], seed=0)


def test_biased_model():
    d = ch.biased_model(1e-3, 10).probs[0]
    assert np.allclose(d, [1 - 1.101e-2, 1e-3, 1e-5, 1e-2])
    e = ch.biased_model(0.01, 1).probs[0]
    assert e[1] == e[3] and e[2] == pytest.approx(e[1] ** 2)
    f = ch.biased_model(0.01, 5, math.pi / 4).probs[0]
    assert f.sum() == pytest.approx(1)
    with pytest.raises(UsageError):
        ch.biased_model(0.5, 3)
    px = ch.biased_px_for_infidelity(1e-2, 30)
    assert ch.infidelity(ch.biased_model(px, 30)) == pytest.approx(1e-2)


def test_depolarizing():
    assert np.array_equal(ch.depolarizing(3, 0).explicit(), np.eye(64)[0])
    p = 1e-3
    d = ch.depolarizing(7, p).explicit()
    idx = pl.PauliOperator.from_string("IXIIZII").index
    assert d[idx] == pytest.approx((1 - p) ** 5 * (p / 3) ** 2, rel=1e-12)
    assert d.sum() == pytest.approx(1, abs=1e-12)
    for n in (1, 2, 3):
        ex = ch.depolarizing(n, 0.1).explicit()
        w = pl.weights(n)
        assert np.allclose(ex, 0.9 ** (n - w) * (0.1 / 3) ** w, rtol=1e-14, atol=0)


def test_diamond_estimate():
    assert ch.diamond_distance_est(IDENTITY_CHI, restarts=2) == pytest.approx(0, abs=1e-9)
    p = 0.02
    pauli = np.diag([1 - p, p, 0, 0]).astype(complex)
    assert ch.diamond_distance_est(pauli, restarts=3) == pytest.approx(2 * p, rel=1e-6)
    c = ch.random_cptp(0.05, 9).matrix
    bell = np.array([1, 0, 0, 1]) / math.sqrt(2)
    rho = np.outer(bell, bell)
    on_bell = ch._trace_norm(ch._extended_action(c, rho) - rho)
    vals = [ch.diamond_distance_est(c, restarts=r, seed=1) for r in (0, 2, 5)]
    assert vals[0] >= on_bell - 1e-12
    assert vals[0] <= vals[1] + 1e-12 <= vals[2] + 2e-12


def test_ptm_round_trip():
    c = ch.random_cptp(0.08, 2).matrix
    assert np.allclose(ch.ptm_to_chi(ch.chi_to_ptm(c)), c)
    rho = np.array([[0.7, 0.1j], [-0.1j, 0.3]])
    r = ch.chi_to_ptm(c)
    vec = np.array([np.trace(s @ rho).real for s in ch.SIGMA])
    out = ch.ChiMatrix(c).apply(rho)
    assert np.allclose(r @ vec, [np.trace(s @ out).real for s in ch.SIGMA])


def test_chi_validation_errors():
    with pytest.raises(ValidationError):
        ch.check_chi(np.diag([1.1, -0.1, 0, 0]))
    with pytest.raises(ValidationError):
        ch.check_chi(np.diag([0.5, 0.1, 0, 0]))
    bad = IDENTITY_CHI.copy()
    bad[0, 1] = 0.3
    with pytest.raises(ValidationError):
        ch.check_chi(bad)


def test_member_seed_deterministic():
    assert ch.member_seed(5, 3) == ch.member_seed(5, 3)
    assert ch.member_seed(5, 3) != ch.member_seed(5, 4)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**31), st.floats(1e-3, 0.1))
def test_generated_channels_cptp(seed, t):
    ch.random_cptp(t, seed).validate()
    rng = np.random.default_rng(seed)
    axis = rng.normal(size=3)
    ch.coherent_channel(axis / np.linalg.norm(axis), rng.uniform(0, 0.2)).validate()


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0, 1), min_size=4, max_size=4).filter(lambda v: sum(v) > 0.1))
def test_twirl_idempotent_property(v):
    vec = np.array(v) / sum(v)
    once = ch.pauli_twirl(np.diag(vec))
    twice = ch.pauli_twirl(np.diag(once.probs[0]))
    assert np.array_equal(once.probs, twice.probs)
