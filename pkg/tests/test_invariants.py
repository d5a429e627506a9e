import pytest
from hypothesis import given, strategies as st

from smalekit.acceptance import dh_sweep
from smalekit.errors import NotDivisible, OddH, ParityError, UsageError
from smalekit.invariants import (
    FramingData, SeifertData, SmaleInvariant, StemClass, hirzebruch_from_seifert, is_generator,
    omega_gn, smale5_from_H, smale_from_DH, smale_from_filling, stabilize, stem_class,
)


def test_filling_examples():
    assert smale_from_filling(1, 0) == SmaleInvariant(0, 0)
    assert smale_from_filling(23, 16) == SmaleInvariant(22, 1)
    with pytest.raises(NotDivisible):
        smale_from_filling(2, 0)


def test_hirzebruch():
    assert hirzebruch_from_seifert(SeifertData(2, 1, 4 * 4 - 1)) == -18
    assert hirzebruch_from_seifert(SeifertData(1, 0, 0)) == 0
    assert hirzebruch_from_seifert(SeifertData(23, 16, 0)) == -48


@pytest.mark.parametrize("n", range(1, 8))
def test_smale_from_dh_family(n):
    assert smale_from_DH(4 * n, -4 * n * n - 2) == SmaleInvariant(4 * n - 1, (n - 1) ** 2)
    assert stabilize(SmaleInvariant(4 * n - 1, (n - 1) ** 2)) == 2 * n * n + 1
    assert smale5_from_H(-4 * n * n - 2) == 2 * n * n + 1


def test_small_cases():
    assert smale_from_DH(4, -6) == SmaleInvariant(3, 0)
    assert smale_from_DH(1, 0) == SmaleInvariant(0, 0)
    assert stabilize(SmaleInvariant(0, 0)) == 0
    assert stabilize(SmaleInvariant(22, 1)) == 24
    assert smale5_from_H(0) == 0 and smale5_from_H(-48) == 24
    with pytest.raises(OddH):
        smale5_from_H(3)
    with pytest.raises(NotDivisible):
        smale_from_DH(2, 0)


def test_stem_classes():
    c = stem_class(-38)
    assert (c.value, c.z8_part, c.z3_part) == (19, 3, 1)
    assert is_generator(c)
    assert stem_class(0) == StemClass(0, 0, 0)
    assert not is_generator(stem_class(-6))
    assert is_generator(StemClass.from_value(1))
    assert stem_class(-6, mu=2).value == 0
    with pytest.raises(ParityError):
        stem_class(1)
    with pytest.raises(ValueError):
        StemClass(5, 4, 2)


@pytest.mark.parametrize("n, D, sharp, H, omega, stem, gen", [
    (1, 4, 3, -6, (3, 0), 3, False),
    (2, 8, 15, -18, (7, 1), 9, False),
    (3, 12, 35, -38, (11, 4), 19, True),
])
def test_omega_gn_formula(n, D, sharp, H, omega, stem, gen):
    r = omega_gn(n, formula=True)
    assert (r.D, r.sharp_sigma2, r.H, r.omega.as_tuple(), r.stem.value, r.generator) == \
        (D, sharp, H, omega, stem, gen)
    assert r.sharp_sigma2_source == "closed-form"


def test_omega_gn_computed():
    r = omega_gn(2, 0.1)
    assert r.sharp_sigma2_source == "computed"
    assert r.omega.as_tuple() == (7, 1)


def test_omega_gn_rejects_n0():
    with pytest.raises(UsageError):
        omega_gn(0)


@pytest.mark.parametrize("n", range(1, 13))
def test_generator_law(n):
    assert omega_gn(n, formula=True).generator == (n % 3 == 0)


@given(st.integers(-200, 200), st.integers(-200, 200))
def test_filling_matches_dh(chi, sigma):
    if (3 * sigma - 2 * chi + 2) % 4:
        with pytest.raises(NotDivisible):
            smale_from_filling(chi, sigma)
    else:
        assert smale_from_filling(chi, sigma) == smale_from_DH(chi, -3 * sigma)


def test_stabilization_sweep():
    pairs = dh_sweep(100)
    assert len(set(pairs)) == 100
    for D, H in pairs:
        assert stabilize(smale_from_DH(D, H)) == smale5_from_H(H)


@given(st.integers(-500, 500), st.integers(-500, 500))
def test_stabilization_identity(D, j):
    H = 2 - 2 * D + 4 * j
    FramingData(D, H)
    assert stabilize(smale_from_DH(D, H)) == smale5_from_H(H)


@given(st.integers(-1000, 1000), st.integers(0, 15))
def test_stem_crt(H, mu):
    if (H + 3 * mu) % 2:
        return
    c = stem_class(H, mu)
    assert c.value % 8 == c.z8_part and c.value % 3 == c.z3_part
    assert 0 <= c.value < 24


def test_framing_divisibility():
    with pytest.raises(NotDivisible):
        FramingData(1, 2)
    assert FramingData(4, -6, mu=18).mu == 2
