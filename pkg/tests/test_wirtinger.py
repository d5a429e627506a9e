import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from smalekit.errors import ArityError, DenominatorVanishes, ParseError
from smalekit.wirtinger import (
    Const, WirtingerGerm, add, canonical, conj, diff, evaluate, matrix_rank, mul, parse_expr,
    parse_germ, rank_at, real_jacobian, real_linear_components, serialize_germ, to_complex,
    wirtinger_derivatives, z, zbar,
)


def pi_south(k=4, eps=0.1):
    return WirtingerGerm.from_components([z(1), (1 - eps) * z(2) ** k + eps * z(1) * zbar(2)], p=2)


# evaluation ------------------------------------------------------------------

def test_identity_evaluates_to_point(rng):
    pt = rng.standard_normal(3) + 1j * rng.standard_normal(3)
    assert np.allclose(evaluate(WirtingerGerm.identity(3), pt), pt)


def test_cube_at_two():
    assert evaluate(parse_germ("z1^3"), [2]) == pytest.approx(8)


def test_south_chart_stays_in_disk():
    g = pi_south(4, 0.2)
    theta = np.linspace(0, 2 * np.pi, 64)
    pts = np.stack([np.ones_like(theta), np.exp(1j * theta)], axis=1)
    assert np.all(np.abs(g.values(pts)[:, 1]) <= 1 + 1e-12)


def test_denominator_vanishes_reports_component():
    g = parse_germ("z1; 1/(z1 - 1)")
    with pytest.raises(DenominatorVanishes) as err:
        evaluate(g, [1])
    assert err.value.component == 1


def test_absolute_coordinates_with_base_point():
    g = parse_germ("@ (1+i)\nz1^2")
    assert g.base == (1 + 1j,)
    assert evaluate(g, [1 + 1j]) == pytest.approx((1 + 1j) ** 2)
    local = g.local()
    assert evaluate(local, [0]) == pytest.approx((1 + 1j) ** 2)


# derivatives -----------------------------------------------------------------

def test_h_c_wirtinger_derivatives():
    k, c = 3, 0.4 - 0.2j
    g = WirtingerGerm.from_components([z(1) ** k + c * zbar(1)], p=1)
    z0 = 0.3 + 0.7j
    d = wirtinger_derivatives(g, [z0])
    assert d[0, 0] == pytest.approx(k * z0 ** (k - 1))
    assert d[0, 1] == pytest.approx(c)


def test_identity_derivatives():
    d = wirtinger_derivatives(WirtingerGerm.identity(2), [0.1, 0.2j])
    assert np.allclose(d, [[1, 0, 0, 0], [0, 1, 0, 0]])


def test_modulus_squared_derivatives(rng):
    g = parse_germ("z1*conj(z1)")
    for z0 in rng.standard_normal(10) + 1j * rng.standard_normal(10):
        d = wirtinger_derivatives(g, [z0])[0]
        assert d == pytest.approx([np.conj(z0), z0])


def test_real_jacobian_identity():
    assert np.allclose(real_jacobian(WirtingerGerm.identity(2), [0.3, -1j]), np.eye(4))


def test_real_linear_ghat_jacobian():
    m = np.zeros((4, 4))
    m[0, 3], m[1, 0], m[2, 2], m[3, 1] = 1, -1, 1, 1
    g = WirtingerGerm(real_linear_components(m), 2)
    jac = real_jacobian(g, [0.2 + 0.1j, -0.4j])
    assert np.allclose(jac, m)
    assert np.linalg.det(jac) == pytest.approx(-1)


def test_h_c_rank_one_on_singular_circle():
    k, c = 3, 0.5
    g = WirtingerGerm.from_components([z(1) ** k + c * zbar(1)], p=1)
    r = (c / k) ** (1 / (k - 1))
    for t in np.linspace(0, 2 * np.pi, 7):
        assert rank_at(g, [r * np.exp(1j * t)]) == 1


def test_rank_examples():
    assert rank_at(WirtingerGerm.identity(2), [0.5, 0.5], 0.5) == 4
    assert rank_at(pi_south(), [0, 0]) == 2
    assert rank_at(pi_south(4, 0.1), [0.5, 0.5]) == 4  # finite-difference SVD: 1.0017, 1.0015, 0.4992, 0.3994
    assert matrix_rank(np.zeros((4, 4))) == 0
    with pytest.raises(ValueError):
        rank_at(pi_south(), [0, 0], -1.0)


# random expressions ----------------------------------------------------------

def _leaf():
    return st.one_of(
        st.integers(0, 1).map(lambda i: z(i + 1)),
        st.integers(0, 1).map(lambda i: zbar(i + 1)),
        st.complex_numbers(max_magnitude=2, allow_nan=False, allow_infinity=False).map(Const),
    )


def _expr():
    return st.recursive(
        _leaf(),
        lambda kids: st.one_of(
            st.tuples(kids, kids).map(lambda t: add(*t)),
            st.tuples(kids, kids).map(lambda t: mul(*t)),
            st.tuples(kids, st.integers(0, 3)).map(lambda t: t[0] ** t[1]),
            kids.map(conj),
            kids.map(lambda e: e / (2 + mul(z(1), zbar(1)))),
        ),
        max_leaves=8,
    )


POINT = np.array([0.31 - 0.22j, -0.17 + 0.41j])


def _fd(e, k, h=1e-6):
    g = WirtingerGerm((e,), 2)
    dx = np.zeros(4)
    dx[k] = h
    plus, minus = POINT + to_complex(dx), POINT - to_complex(dx)
    return (g.evaluate(plus)[0] - g.evaluate(minus)[0]) / (2 * h)


@settings(max_examples=60, deadline=None)
@given(_expr())
def test_derivatives_match_finite_differences(e):
    g = WirtingerGerm((e,), 2)
    d = g.wirtinger_matrix(POINT[None])[0, 0]
    for i in range(2):
        fx, fy = _fd(e, 2 * i), _fd(e, 2 * i + 1)
        dz, dzb = (fx - 1j * fy) / 2, (fx + 1j * fy) / 2
        scale = max(1.0, abs(dz), abs(dzb))
        assert abs(d[i] - dz) <= 1e-6 * scale
        assert abs(d[2 + i] - dzb) <= 1e-6 * scale


@settings(max_examples=60, deadline=None)
@given(_expr())
def test_conjugation_symmetry(e):
    # conj(d f / d z) == d conj(f) / d conj(z)
    for i in range(2):
        lhs = WirtingerGerm((conj(diff(e, i, False)),), 2).evaluate(POINT)[0]
        rhs = WirtingerGerm((diff(conj(e), i, True),), 2).evaluate(POINT)[0]
        assert abs(lhs - rhs) <= 1e-9 * max(1.0, abs(lhs))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000))
def test_rank_invariant_under_linear_changes(seed):
    r = np.random.default_rng(seed)
    src, tgt = r.standard_normal((2, 4, 4)) + 3 * np.eye(4)
    g = pi_south(3, 0.1)
    pt = np.array([0.0, 0.0]) if seed % 2 else np.array([0.4 + 0.1j, -0.3j])
    changed = g.compose_source(real_linear_components(src)).compose_target_real(tgt)
    pre = to_complex(np.linalg.solve(src, np.concatenate([[c.real, c.imag] for c in pt])))
    assert rank_at(changed, pre) == rank_at(g, pt)


# parsing ---------------------------------------------------------------------

CORPUS = [
    "z1",
    "conj(z1)",
    "z1^2 + conj(z1)*z2",
    "(1+2i)*z1 - 3*conj(z2)^2",
    "2i*z2 - i",
    "z1^-2 + 1",
    "1/(z1*conj(z1) + 1)",
    "0.9*z2^4 + 0.1*z1*conj(z2)",
    "-z1 + -z2",
    "(z1 + z2)^3 / (2 - z1)",
    "re(z1)*im(z2)",
    "conj(z1*z2 + 1i)",
    "1.5e-1*z1 - 2.5e+0*conj(z1)",
    "z1*z2*z3",
    "((z1))",
    "z1 - (z2 - z1)",
    "3*z1^2*conj(z1)^3",
    "(2-3i)*z1/(1+i)",
    "z9 + conj(z9)",
    "z1^0 + 4",
]


@pytest.mark.parametrize("text", CORPUS)
def test_round_trip(text, rng):
    g = parse_germ(text)
    back = parse_germ(serialize_germ(g))
    assert back.p == g.p and back.q == g.q
    pts = 0.5 * (rng.standard_normal((5, g.p)) + 1j * rng.standard_normal((5, g.p)))
    assert np.allclose(back.values(pts), g.values(pts), rtol=1e-12, atol=1e-12)
    assert canonical(serialize_germ(g)) == serialize_germ(g)


def test_multi_component_file_with_comments():
    g = parse_germ("# T model\n@ (0, 0)\nz1;  # base coordinate\nz2^2 + conj(z2)*z1\n")
    assert (g.p, g.q) == (2, 2)


@pytest.mark.parametrize("text, line, col", [
    ("z1 +", 1, 5),
    ("z1 ^ z2", 1, 6),
    ("z1;\nz2 * * z1", 2, 6),
    ("cos(z1)", 1, 1),
    ("z0", 1, 1),
])
def test_parse_errors_carry_position(text, line, col):
    with pytest.raises(ParseError) as err:
        parse_germ(text)
    assert (err.value.line, err.value.column) == (line, col)


def test_arity_errors():
    with pytest.raises(ArityError):
        parse_germ("@ (1, 2)\nz3")
    with pytest.raises(ArityError):
        parse_germ("z1; z2", components=3)


def test_parse_expr_literals():
    assert complex(parse_expr("2i").value) == 2j
    assert complex(parse_expr("1+2i").value) == 1 + 2j
