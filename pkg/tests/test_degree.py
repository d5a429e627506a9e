import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from smalekit.acceptance import random_degree_corpus
from smalekit.degree import (
    DegreeRequest, _freudenthal_template, compute_degree, degree_consensus, degree_holomorphic,
    degree_pl_sphere, degree_preimage,
)
from smalekit.errors import EngineDisagreement, NotHolomorphic, NotIsolatedZero, ZeroOnSphere
from smalekit.rank2 import kappa_model
from smalekit.wirtinger import WirtingerGerm, parse_germ, real_linear_components

GHAT = np.zeros((4, 4))
GHAT[0, 3], GHAT[1, 0], GHAT[2, 2], GHAT[3, 1] = 1, -1, 1, 1


def linear(m):
    m = np.asarray(m, dtype=float)
    return WirtingerGerm(real_linear_components(m), m.shape[1] // 2)


def req(g, r=0.5, **kw):
    return DegreeRequest(g, r, **kw)


@pytest.mark.parametrize("engine", [degree_preimage, degree_pl_sphere])
def test_linear_map_sign_of_det(engine):
    assert engine(req(linear(GHAT))).degree == -1


@pytest.mark.parametrize("ell, m", [(2, 1), (4, 1), (3, 2), (4, 4)])
def test_kappa_degree(ell, m):
    g = kappa_model(ell, m)
    assert degree_preimage(req(g, 1.0)).degree == m * (ell - 1)
    assert degree_pl_sphere(req(g, 0.5)).degree == m * (ell - 1)


@pytest.mark.parametrize("k", [1, 2, 3, 5])
def test_power_map_degree(k):
    g = parse_germ(f"z1^{k}")
    res = degree_preimage(req(g))
    assert res.degree == k
    assert res.diagnostics["signs"] == [1] * k  # k-th roots of the regular value, all orientation preserving


def test_identity_pl():
    for r in (0.1, 1.0, 3.0):
        assert degree_pl_sphere(req(WirtingerGerm.identity(2), r)).degree == 1


def test_holomorphic_engine():
    assert degree_holomorphic(parse_germ("z1^3; z2^2")).degree == 6
    assert degree_holomorphic(parse_germ("z1^2")).degree == 2
    assert degree_holomorphic(WirtingerGerm.identity(2)).degree == 1
    # counted preimages; intersection multiplicity I(f, z2) + I(f, z1 + z2) = 2 + 2
    assert degree_holomorphic(parse_germ("z1^2 + z2^3; z1*z2 + z2^2")).degree == 4
    with pytest.raises(NotHolomorphic):
        degree_holomorphic(parse_germ("z1; conj(z2)"))


def test_consensus_confidence():
    res = degree_consensus(req(kappa_model(2, 1)))
    assert (res.degree, res.confidence) == (1, "consensus")
    res = compute_degree(req(linear(GHAT), engine="consensus"))
    assert (res.degree, res.confidence) == (-1, "consensus")
    assert compute_degree(req(parse_germ("z1^2; z2"), engine="holo")).degree == 2


def test_zero_circle_rejected():
    g = parse_germ("z1*(z1*conj(z1) - 0.04); z2")
    with pytest.raises(NotIsolatedZero):
        degree_consensus(req(g))


def test_zero_plane_rejected():
    with pytest.raises(NotIsolatedZero):
        degree_preimage(req(parse_germ("z1^2; z1*z2")))


def test_zero_on_sphere():
    g = parse_germ("z1*z1*conj(z1) - 0.25*z1; z2")
    with pytest.raises(ZeroOnSphere):
        degree_pl_sphere(req(g, 0.5, depth=2, max_depth=3))


def test_disagreement_is_an_error(monkeypatch):
    from smalekit import degree as mod
    real = mod.degree_pl_sphere

    def off_by_one(r):
        res = real(r)
        res.degree += 1
        return res

    monkeypatch.setattr(mod, "degree_pl_sphere", off_by_one)
    with pytest.raises(EngineDisagreement) as err:
        mod.degree_consensus(req(kappa_model(2, 1)))
    assert set(err.value.results) >= {"preimage", "pl"}


def test_seeded_runs_are_reproducible():
    a = degree_preimage(req(kappa_model(3, 2), seed=5)).diagnostics
    b = degree_preimage(req(kappa_model(3, 2), seed=5)).diagnostics
    assert a == b


@pytest.mark.parametrize("k", [1, 2, 3, 4])
def test_subdivision_template(k):
    tmpl = np.array(_freudenthal_template(k), dtype=float)
    assert len(tmpl) == 2**k
    # children in barycentric midpoint coordinates tile the simplex with equal volume
    corners = np.vstack([np.zeros(k), np.eye(k)])
    vols = []
    for child in tmpl:
        pts = np.array([(corners[i] + corners[j]) / 2 for i, j in child.astype(int)])
        vols.append(np.linalg.det(pts[1:] - pts[0]))
    assert np.allclose(vols, vols[0]) and vols[0] > 0


# properties ------------------------------------------------------------------

@pytest.mark.slow
def test_engine_agreement_on_random_corpus():
    corpus = random_degree_corpus(50, seed=7)
    for g, r, oracle in corpus:
        assert degree_preimage(req(g, r)).degree == oracle
        assert degree_pl_sphere(req(g, r)).degree == oracle


@pytest.mark.parametrize("d", [2, 4, 6])
def test_antipodal_degree(d):
    g = linear(-np.eye(d))
    assert degree_preimage(req(g)).degree == (-1) ** d
    if d <= 4:
        assert degree_pl_sphere(req(g)).degree == (-1) ** d


def test_antipodal_odd_dimension_via_real_map():
    class Neg:
        dim = 3

        def value(self, x):
            return -np.asarray(x)

        def jacobian(self, x):
            return np.broadcast_to(-np.eye(3), (len(x), 3, 3)).copy()

    assert degree_preimage(DegreeRequest(Neg(), 0.5)).degree == -1
    assert degree_pl_sphere(DegreeRequest(Neg(), 0.5)).degree == -1


@settings(max_examples=6, deadline=None)
@given(st.integers(1, 3), st.integers(1, 3), st.booleans(), st.booleans())
def test_multiplicativity(a, b, conj_a, conj_b):
    # z1^a (or its conjugate) times z2^b on C x C
    f1 = f"conj(z1)^{a}" if conj_a else f"z1^{a}"
    f2 = f"conj(z2)^{b}" if conj_b else f"z2^{b}"
    expected = (-a if conj_a else a) * (-b if conj_b else b)
    deg1 = degree_preimage(req(parse_germ(f1))).degree
    deg2 = degree_preimage(req(parse_germ(f2.replace("z2", "z1")))).degree
    prod = parse_germ(f"{f1}; {f2}")
    assert deg1 * deg2 == expected
    assert degree_preimage(req(prod)).degree == expected
    assert degree_pl_sphere(req(prod)).degree == expected


@settings(max_examples=8, deadline=None)
@given(st.integers(0, 10_000))
def test_linear_target_change_sign(seed):
    r = np.random.default_rng(seed)
    m = r.standard_normal((4, 4))
    while abs(np.linalg.det(m)) < 0.1:
        m = r.standard_normal((4, 4))
    base = kappa_model(3, 1)
    changed = WirtingerGerm(base.compose_target_real(m).components, 2)
    expected = 2 * int(np.sign(np.linalg.det(m)))
    assert degree_preimage(req(changed)).degree == expected
    assert degree_pl_sphere(req(changed)).degree == expected
