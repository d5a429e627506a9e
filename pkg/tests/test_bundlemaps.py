import numpy as np
import pytest

from smalekit.bundlemaps import (
    BundleMap, DiskBundle, clutch, containment_max, export_germs, fibered, h_c_analysis, pi_eps,
    pi_k, rank2_locus, sharp_sigma2, transition_check,
)
from smalekit.errors import (
    EpsilonOutOfRange, NonFiberedMap, NonIsolatedLocus, NotOnBoundary, Unsupported, UsageError,
)
from smalekit.wirtinger import WirtingerGerm, parse_germ, z, zbar


def test_clutch_examples():
    assert clutch(3, "S->N", (1, 0.3 + 0.2j)) == pytest.approx((1, 0.3 + 0.2j))
    w, zz = clutch(2, "S->N", (1j, 1))
    assert w == pytest.approx(-1j) and zz == pytest.approx(-1)


def test_clutch_round_trip(rng):
    bundle = DiskBundle(5)
    for t, r, phi in rng.uniform(0, 1, (100, 3)):
        p = (np.exp(2j * np.pi * t), r * np.exp(2j * np.pi * phi))
        back = bundle.clutch("N->S", bundle.clutch("S->N", p))
        assert back == pytest.approx(p, abs=1e-14)


def test_clutch_rejects_interior_points():
    with pytest.raises(NotOnBoundary):
        clutch(2, "S->N", (0.5, 0))
    with pytest.raises(UsageError):
        clutch(2, "sideways", (1, 0))


def test_unperturbed_charts_agree():
    b = pi_eps(3, 0)
    pts = np.array([[0.3 + 0.1j, 0.5j], [-0.2, 0.7]])
    assert np.allclose(b.south.values(pts), b.north.values(pts))
    assert np.allclose(b.south.values(pts)[:, 1], pts[:, 1] ** 3)


def test_epsilon_range():
    with pytest.raises(EpsilonOutOfRange):
        pi_eps(2, -0.1)
    with pytest.raises(EpsilonOutOfRange):
        pi_eps(2, 1.0)


@pytest.mark.parametrize("k", range(1, 7))
def test_transition_unperturbed(k):
    assert transition_check(pi_k(k)).passed


@pytest.mark.parametrize("k", [2, 4, 6])
def test_transition_perturbed(k):
    rep = transition_check(pi_eps(k, 0.1), samples=200)
    assert rep.residual < 1e-10


def test_transition_detects_wrong_north_chart():
    good = pi_eps(4, 0.1)
    bad_north = fibered(0.9 * z(2) ** 4 + 0.1 * z(1) ** 3 * zbar(2))
    bad = BundleMap(good.source, good.target, good.south, bad_north)
    assert not transition_check(bad).passed


def test_containment():
    assert containment_max(pi_eps(3, 0.3)) <= 1 + 1e-12


def test_fiber_radius_k2():
    fa = h_c_analysis(2, 1.0)
    assert fa.radius == pytest.approx(0.5, abs=1e-12)
    assert set(fa.circle_ranks) == {1} and set(fa.off_circle_ranks) == {2}
    assert fa.cusp_count == 3


def test_fiber_c_zero():
    fa = h_c_analysis(3, 0)
    assert fa.radius == 0 and fa.circle_ranks == [0] and fa.cusp_count is None


def test_fiber_cusps_k3():
    assert h_c_analysis(3, 0.1).cusp_count == 4


@pytest.mark.parametrize("k", [2, 3, 4, 5])
def test_fiber_cusps_complex_c(k):
    assert h_c_analysis(k, 0.3 * np.exp(0.7j)).cusp_count == k + 1


def test_fiber_small_c_unsupported():
    with pytest.raises(Unsupported):
        h_c_analysis(3, 1e-4)


@pytest.mark.parametrize("k, eps", [(2, 0.05), (4, 0.2), (6, 0.1)])
def test_locus(k, eps):
    pts = rank2_locus(pi_eps(k, eps))
    by_chart = {p.chart: p for p in pts}
    assert len(pts) == 2 and set(by_chart) == {"S", "N"}
    assert all(max(abs(c) for c in p.location) < 1e-8 for p in pts)
    assert (by_chart["S"].index, by_chart["N"].index) == (k - 1, k * (k - 1))


@pytest.mark.slow
def test_locus_k8():
    pts = {p.chart: p.index for p in rank2_locus(pi_eps(8, 0.05))}
    assert pts == {"S": 7, "N": 56}


def test_unperturbed_locus_is_not_isolated():
    with pytest.raises(NonIsolatedLocus):
        rank2_locus(pi_k(2))


def test_identity_bundle_map_has_no_rank_two_points():
    # K_z = 1 - eps never vanishes, so the locus is empty and the count is 0
    assert rank2_locus(pi_eps(1, 0.1)) == []
    assert sharp_sigma2(pi_eps(1, 0.1)) == 0


def test_non_fibered_map():
    g = WirtingerGerm.from_components([z(1) + z(2) ** 2, z(2) ** 2], p=2)
    with pytest.raises(NonFiberedMap):
        rank2_locus(BundleMap(DiskBundle(1), DiskBundle(2), g, g))


@pytest.mark.parametrize("n", [1, 2, 3])
def test_sharp_sigma2(n):
    assert sharp_sigma2(pi_eps(2 * n, 0.1)) == 4 * n * n - 1


def test_export_round_trip():
    b = pi_eps(4, 0.1)
    texts = export_germs(b)
    pts = np.array([[0.3 + 0.1j, -0.2 + 0.5j]])
    for name, text in texts.items():
        assert np.allclose(parse_germ(text).values(pts), b.chart(name).values(pts))
