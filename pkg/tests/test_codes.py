import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qecdiag import codes as cr
from qecdiag import pauli as pl
from qecdiag.codes import CodeValidationError
from qecdiag.errors import UsageError
from qecdiag.pauli import PauliOperator as P


@pytest.fixture(scope="module")
def steane():
    return cr.builtin_code("steane")


@pytest.fixture(scope="module")
def dec(steane):
    return cr.build_decoder(steane)


def _code_dict(**over):
    base = {"name": "t", "n": 2, "k": 1, "d": 1, "stabilizers": ["ZZ"],
            "logical_x": ["XX"], "logical_z": ["ZI"]}
    base.update(over)
    return base


def test_steane_shape(steane):
    assert (steane.n, steane.k, steane.d) == (7, 1, 3)
    assert len(steane.stabilizer_gens) == 6
    assert steane.num_syndromes == 64
    assert steane.distance() == 3


def test_shipped_cyclic_code_is_cyclic():
    code = cr.builtin_code("cyclic_search")
    assert code.distance() == 3
    first = str(code.stabilizer_gens[0])
    shifts = {first[-j:] + first[:-j] for j in range(7)}
    assert {str(g) for g in code.stabilizer_gens} <= shifts


def test_cyclic_template_is_rejected_until_filled():
    path = cr.resources.files("qecdiag") / "data" / "cyclic.json"
    with pytest.raises(CodeValidationError):
        cr.load_code(json.loads(path.read_text()))


def test_anticommuting_generators_rejected():
    with pytest.raises(CodeValidationError) as err:
        cr.load_code(_code_dict(n=3, k=1, stabilizers=["XII", "ZII"],
                                logical_x=["IXI"], logical_z=["IZI"]))
    assert err.value.kind == "noncommuting"
    assert "XII" in str(err.value)


def test_dependent_generators_rejected():
    with pytest.raises(CodeValidationError) as err:
        cr.load_code(_code_dict(n=3, stabilizers=["ZZI", "ZZI"],
                                logical_x=["XXX"], logical_z=["ZII"]))
    assert err.value.kind == "dependent"


def test_logical_equal_to_stabilizer_rejected():
    with pytest.raises(CodeValidationError) as err:
        cr.load_code(_code_dict(logical_x=["ZZ"]))
    assert err.value.kind == "logical"


def test_count_mismatch_and_distance_mismatch():
    with pytest.raises(CodeValidationError) as err:
        cr.load_code(_code_dict(stabilizers=[]))
    assert err.value.kind == "count"
    with pytest.raises(CodeValidationError) as err:
        cr.load_code(_code_dict(d=2))
    assert err.value.kind == "distance"


def test_generators_commute_and_logicals_valid(steane):
    gens = steane.stabilizer_gens
    for a in gens:
        for b in gens:
            assert pl.commutes(a, b)
        assert pl.commutes(a, steane.logical_x[0])
        assert pl.commutes(a, steane.logical_z[0])
    assert not pl.commutes(steane.logical_x[0], steane.logical_z[0])


def test_syndrome_basics(steane):
    assert cr.syndrome_of(steane, P.identity(7)) == (0,) * 6
    for g in steane.stabilizer_gens:
        assert cr.syndrome_of(steane, g) == (0,) * 6
    with pytest.raises(UsageError):
        cr.syndrome_of(steane, P.identity(3))


def test_syndrome_of_x0_matches_dense_commutators(steane):
    e = P.from_string("XIIIIII")
    want = []
    for g in steane.stabilizer_gens:
        m1, m2 = e.to_matrix(), g.to_matrix()
        want.append(int(not np.allclose(m1 @ m2, m2 @ m1)))
    assert cr.syndrome_of(steane, e) == tuple(want)
    assert any(want)


def test_syndrome_cosets_equal_size(steane):
    counts = np.bincount(steane.tables.syndromes, minlength=64)
    assert np.all(counts == 4**7 // 64)


def test_decompose_examples(steane):
    assert cr.decompose(steane, P.identity(7)) == ("I", 0, P.identity(7))
    g = steane.stabilizer_gens[2]
    letter, bits, pe = cr.decompose(steane, g)
    assert letter == "I" and pe.is_identity()
    assert cr.stabilizer_element(steane, bits).phase_free() == g.phase_free()
    assert cr.decompose(steane, steane.logical_x[0]) == ("X", 0, P.identity(7))


def test_decompose_reassembles_full_sweep(steane):
    t = steane.tables
    for idx in range(0, 4**7, 1):
        p = P.from_index(idx, 7)
        letter, bits, pe = cr.decompose(steane, p)
        back = (cr.logical_representative(steane, "IXYZ".index(letter))
                * cr.stabilizer_element(steane, bits) * pe)
        assert back.phase_free() == p
        assert "IXYZ"[t.logical_class[idx]] == letter


def test_pure_error_depends_only_on_syndrome(steane):
    rng = np.random.default_rng(3)
    for idx in rng.integers(0, 4**7, 50):
        p = P.from_index(int(idx), 7)
        q = p * cr.stabilizer_element(steane, int(rng.integers(64))) * steane.logical_z[0]
        assert cr.decompose(steane, p)[2] == cr.decompose(steane, q)[2]
        assert cr.syndrome_index(steane, cr.decompose(steane, p)[2]) == cr.syndrome_index(steane, p)


def test_pure_error_generators_are_destabilizers(steane):
    ts = steane.pure_error_gens
    for i, t in enumerate(ts):
        for j, g in enumerate(steane.stabilizer_gens):
            assert pl.commutes(t, g) == (i != j)
        for u in ts:
            assert pl.commutes(t, u)
        assert pl.commutes(t, steane.logical_x[0]) and pl.commutes(t, steane.logical_z[0])


def test_decoder_basics(steane, dec):
    assert dec.recoveries[0].is_identity()
    for s, r in enumerate(dec.recoveries):
        assert cr.syndrome_index(steane, r) == s


def test_unit_decoder_corrects_all_single_errors(steane, dec):
    for q in range(7):
        for letter in "XYZ":
            e = P.from_string("I" * q + letter + "I" * (6 - q))
            r = dec.recoveries[cr.syndrome_index(steane, e)]
            assert cr.decompose(steane, r * e)[0] == "I"


def test_biased_decoder_prefers_z(steane):
    eta = 100.0
    dec = cr.build_decoder(steane, (eta, eta, 1.0))
    w = np.array([0.0, eta, eta, 1.0])
    digits = pl.index_digits(7)
    cost = w[digits].sum(axis=1)
    z_only = ~np.isin(digits, (1, 2)).any(axis=1)
    syn = steane.tables.syndromes
    for q in range(7):
        x = P.from_string("I" * q + "X" + "I" * (6 - q))
        s = cr.syndrome_index(steane, x)
        zs = np.flatnonzero((syn == s) & z_only & (cost < eta))
        if len(zs):
            assert dec.recoveries[s].letters.replace("I", "").replace("Z", "") == ""


def test_negative_weight_rejected(steane):
    with pytest.raises(UsageError):
        cr.build_decoder(steane, (1, -1, 1))
    with pytest.raises(UsageError):
        cr.build_decoder(steane, (0, 0, 0))


@settings(max_examples=25, deadline=None)
@given(st.tuples(*[st.floats(0.05, 20) for _ in range(3)]), st.lists(st.integers(0, 63), min_size=4, max_size=4))
def test_decoder_is_minimum_cost(weights, syndromes):
    code = cr.builtin_code("steane")
    dec = cr.build_decoder(code, weights)
    w = np.array([0.0, *weights])
    cost = w[pl.index_digits(7)].sum(axis=1)
    syn = code.tables.syndromes
    for s in syndromes:
        coset = np.flatnonzero(syn == s)
        best = cost[coset].min()
        chosen = dec.recovery_index[s]
        assert cost[chosen] <= best + 1e-12
        ties = coset[np.isclose(cost[coset], cost[chosen], rtol=0, atol=1e-12)]
        assert chosen == ties.min()


def test_correctable_set(steane, dec):
    s = 37
    cs = cr.correctable_set(steane, dec, s)
    assert len(cs) == 64
    assert dec.recoveries[s] in cs
    union = set()
    for s in range(64):
        union |= {p.index for p in cr.correctable_set(steane, dec, s)}
    assert len(union) == 4096
    assert union == set(cr.correctable_indices(dec).tolist())
    assert np.all(dec.residual_class[sorted(union)] == 0)


def test_recovery_phases_consistent(steane, dec):
    rng = np.random.default_rng(5)
    t = steane.tables
    for idx in rng.integers(0, 4**7, 40):
        p = P.from_index(int(idx), 7)
        r = dec.recoveries[t.syndromes[idx]]
        cls = int(dec.residual_class[idx])
        lbar = cr.logical_representative(steane, cls)
        _, bits, _ = cr.decompose(steane, r * p)
        rhs = lbar * cr.stabilizer_element(steane, bits)
        e = int(dec.recovery_phases[idx])
        assert np.allclose((r * p).to_matrix(), (1j**e) * rhs.to_matrix())


def test_concat_spec_checks(steane, dec):
    spec = cr.ConcatSpec.uniform(steane, dec, 3)
    assert spec.levels == 3
    with pytest.raises(UsageError):
        cr.ConcatSpec(2, (steane,), (dec,))
    other = cr.build_decoder(cr.builtin_code("cyclic_search"))
    with pytest.raises(UsageError):
        cr.ConcatSpec(1, (steane,), (other,))


def test_to_dict_round_trip(steane):
    again = cr.load_code(steane.to_dict())
    assert again.to_dict() == steane.to_dict()
