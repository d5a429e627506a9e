"""Rational expressions in complex variables and their conjugates.

A map germ between even-dimensional real spaces is written as a tuple of
:class:`Expr` trees in the formal variables ``z1..zp`` and ``conj(z1)..conj(zp)``.
Both Wirtinger derivatives of a tree are again trees, so every derivative the
downstream engines need (real Jacobians, real Hessians, prenormal partials) is
exact up to floating-point evaluation.

Real coordinates are interleaved: a point ``z`` in C^p corresponds to
``x = (Re z1, Im z1, Re z2, Im z2, ...)`` in R^{2p}; target components are
treated the same way.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from .errors import ArityError, DenominatorVanishes, ParseError

DENOMINATOR_EPS = 1e-14
RANK_TOL = 1e-8


# ---------------------------------------------------------------------------
# expression nodes


class Expr:
    """Immutable node of a rational Wirtinger expression tree."""

    __slots__ = ("_dcache", "__weakref__")

    def __init__(self):
        self._dcache = {}

    # operator sugar -------------------------------------------------------
    def __add__(self, other):
        return add(self, as_expr(other))

    def __radd__(self, other):
        return add(as_expr(other), self)

    def __sub__(self, other):
        return add(self, neg(as_expr(other)))

    def __rsub__(self, other):
        return add(as_expr(other), neg(self))

    def __mul__(self, other):
        return mul(self, as_expr(other))

    def __rmul__(self, other):
        return mul(as_expr(other), self)

    def __truediv__(self, other):
        return div(self, as_expr(other))

    def __rtruediv__(self, other):
        return div(as_expr(other), self)

    def __pow__(self, n):
        if not isinstance(n, (int, np.integer)):
            raise TypeError("only integer exponents are supported")
        return power(self, int(n))

    def __neg__(self):
        return neg(self)

    def __repr__(self):
        return f"Expr({to_text(self)!r})"

    # structure ------------------------------------------------------------
    def children(self) -> tuple[Expr, ...]:
        return ()


class Const(Expr):
    __slots__ = ("value",)

    def __init__(self, value):
        super().__init__()
        self.value = complex(value)


class Var(Expr):
    """The formal variable ``z_{index+1}``."""

    __slots__ = ("index",)

    def __init__(self, index: int):
        super().__init__()
        self.index = index


class ConjVar(Expr):
    """The formal conjugate ``conj(z_{index+1})``."""

    __slots__ = ("index",)

    def __init__(self, index: int):
        super().__init__()
        self.index = index


class Add(Expr):
    __slots__ = ("terms",)

    def __init__(self, terms: tuple[Expr, ...]):
        super().__init__()
        self.terms = terms

    def children(self):
        return self.terms


class Mul(Expr):
    __slots__ = ("factors",)

    def __init__(self, factors: tuple[Expr, ...]):
        super().__init__()
        self.factors = factors

    def children(self):
        return self.factors


class Div(Expr):
    __slots__ = ("num", "den")

    def __init__(self, num: Expr, den: Expr):
        super().__init__()
        self.num = num
        self.den = den

    def children(self):
        return (self.num, self.den)


class Pow(Expr):
    __slots__ = ("base", "exp")

    def __init__(self, base: Expr, exp: int):
        super().__init__()
        self.base = base
        self.exp = exp

    def children(self):
        return (self.base,)


ZERO = Const(0)
ONE = Const(1)


def as_expr(value) -> Expr:
    if isinstance(value, Expr):
        return value
    if isinstance(value, (int, float, complex, np.number)):
        return Const(value)
    raise TypeError(f"cannot convert {type(value).__name__} to Expr")


def _is_const(e: Expr, value=None) -> bool:
    return isinstance(e, Const) and (value is None or e.value == value)


# smart constructors: flattening and constant folding only


def add(*terms: Expr) -> Expr:
    flat: list[Expr] = []
    const = 0j
    for t in terms:
        parts = t.terms if isinstance(t, Add) else (t,)
        for s in parts:
            if isinstance(s, Const):
                const += s.value
            else:
                flat.append(s)
    if const != 0:
        flat.append(Const(const))
    if not flat:
        return ZERO
    if len(flat) == 1:
        return flat[0]
    return Add(tuple(flat))


def mul(*factors: Expr) -> Expr:
    flat: list[Expr] = []
    const = 1 + 0j
    for f in factors:
        parts = f.factors if isinstance(f, Mul) else (f,)
        for s in parts:
            if isinstance(s, Const):
                const *= s.value
            else:
                flat.append(s)
    if const == 0:
        return ZERO
    if const != 1:
        flat.insert(0, Const(const))
    if not flat:
        return ONE
    if len(flat) == 1:
        return flat[0]
    return Mul(tuple(flat))


def neg(e: Expr) -> Expr:
    return mul(Const(-1), e)


def div(num: Expr, den: Expr) -> Expr:
    if isinstance(den, Const):
        if den.value == 0:
            raise ZeroDivisionError("division by the constant 0")
        return mul(num, Const(1 / den.value))
    if _is_const(num, 0):
        return ZERO
    return Div(num, den)


def power(base: Expr, n: int) -> Expr:
    if n == 0:
        return ONE
    if n == 1:
        return base
    if isinstance(base, Const):
        return Const(base.value**n)
    if isinstance(base, Pow):
        return power(base.base, base.exp * n)
    return Pow(base, n)


# public helpers ------------------------------------------------------------


def z(i: int) -> Expr:
    """Variable ``z_i`` (1-based, as in the text grammar)."""
    return Var(i - 1)


def zbar(i: int) -> Expr:
    return ConjVar(i - 1)


def conj(e: Expr, _memo=None) -> Expr:
    """Formal complex conjugate of a tree."""
    memo = {} if _memo is None else _memo
    hit = memo.get(id(e))
    if hit is not None:
        return hit
    if isinstance(e, Const):
        out = Const(e.value.conjugate())
    elif isinstance(e, Var):
        out = ConjVar(e.index)
    elif isinstance(e, ConjVar):
        out = Var(e.index)
    elif isinstance(e, Add):
        out = add(*(conj(t, memo) for t in e.terms))
    elif isinstance(e, Mul):
        out = mul(*(conj(f, memo) for f in e.factors))
    elif isinstance(e, Div):
        out = div(conj(e.num, memo), conj(e.den, memo))
    elif isinstance(e, Pow):
        out = power(conj(e.base, memo), e.exp)
    else:
        raise TypeError(type(e))
    memo[id(e)] = out
    return out


def re_part(e: Expr) -> Expr:
    return mul(Const(0.5), add(e, conj(e)))


def im_part(e: Expr) -> Expr:
    return mul(Const(-0.5j), add(e, neg(conj(e))))


def real_coord(k: int) -> Expr:
    """The k-th real coordinate (0-based, interleaved) as a Wirtinger tree."""
    i, imag = divmod(k, 2)
    return im_part(Var(i)) if imag else re_part(Var(i))


def real_linear_components(matrix) -> tuple[Expr, ...]:
    """Components of the real-linear map ``x -> M x`` in Wirtinger form."""
    m = np.asarray(matrix, dtype=float)
    rows, cols = m.shape
    if rows % 2 or cols % 2:
        raise ArityError("real-linear germs need even source and target dimension")
    coords = [real_coord(k) for k in range(cols)]
    reals = [add(*(mul(Const(m[a, b]), coords[b]) for b in range(cols) if m[a, b] != 0))
             for a in range(rows)]
    return tuple(add(reals[2 * j], mul(Const(1j), reals[2 * j + 1])) for j in range(rows // 2))


def substitute(e: Expr, mapping: dict, _memo=None) -> Expr:
    """Replace leaves. ``mapping`` keys are ``('z', i)`` or ``('zbar', i)`` (0-based)."""
    memo = {} if _memo is None else _memo
    key = id(e)
    if key in memo:
        return memo[key]
    if isinstance(e, Const):
        out = e
    elif isinstance(e, Var):
        out = mapping.get(("z", e.index), e)
    elif isinstance(e, ConjVar):
        out = mapping.get(("zbar", e.index), e)
    elif isinstance(e, Add):
        out = add(*(substitute(t, mapping, memo) for t in e.terms))
    elif isinstance(e, Mul):
        out = mul(*(substitute(f, mapping, memo) for f in e.factors))
    elif isinstance(e, Div):
        out = div(substitute(e.num, mapping, memo), substitute(e.den, mapping, memo))
    elif isinstance(e, Pow):
        out = power(substitute(e.base, mapping, memo), e.exp)
    else:
        raise TypeError(type(e))
    memo[key] = out
    return out


def free_indices(e: Expr) -> tuple[set[int], set[int]]:
    """Indices of variables and of conjugate variables occurring in ``e``."""
    zs: set[int] = set()
    zbs: set[int] = set()
    seen: set[int] = set()
    stack = [e]
    while stack:
        node = stack.pop()
        if id(node) in seen:
            continue
        seen.add(id(node))
        if isinstance(node, Var):
            zs.add(node.index)
        elif isinstance(node, ConjVar):
            zbs.add(node.index)
        else:
            stack.extend(node.children())
    return zs, zbs


# ---------------------------------------------------------------------------
# differentiation


def diff(e: Expr, index: int, conjugate: bool = False) -> Expr:
    """Wirtinger derivative d/dz_index (or d/dconj(z_index) if ``conjugate``)."""
    key = (index, conjugate)
    cached = e._dcache.get(key)
    if cached is not None:
        return cached
    if isinstance(e, Const):
        out = ZERO
    elif isinstance(e, Var):
        out = ONE if (e.index == index and not conjugate) else ZERO
    elif isinstance(e, ConjVar):
        out = ONE if (e.index == index and conjugate) else ZERO
    elif isinstance(e, Add):
        out = add(*(diff(t, index, conjugate) for t in e.terms))
    elif isinstance(e, Mul):
        terms = []
        fs = e.factors
        for k, f in enumerate(fs):
            df = diff(f, index, conjugate)
            if _is_const(df, 0):
                continue
            terms.append(mul(*fs[:k], df, *fs[k + 1:]))
        out = add(*terms)
    elif isinstance(e, Div):
        dn = diff(e.num, index, conjugate)
        dd = diff(e.den, index, conjugate)
        if _is_const(dd, 0):
            out = div(dn, e.den)
        else:
            out = div(add(mul(dn, e.den), neg(mul(e.num, dd))), power(e.den, 2))
    elif isinstance(e, Pow):
        db = diff(e.base, index, conjugate)
        out = mul(Const(e.exp), power(e.base, e.exp - 1), db)
    else:
        raise TypeError(type(e))
    e._dcache[key] = out
    return out


def real_partial(e: Expr, k: int) -> Expr:
    """Partial derivative along the k-th interleaved real coordinate."""
    i, imag = divmod(k, 2)
    dz = diff(e, i, False)
    dzb = diff(e, i, True)
    if imag:
        return mul(Const(1j), add(dz, neg(dzb)))
    return add(dz, dzb)


# ---------------------------------------------------------------------------
# numeric evaluation


def _eval(e: Expr, zs, zbs, memo):
    key = id(e)
    hit = memo.get(key)
    if hit is not None:
        return hit
    if isinstance(e, Const):
        out = e.value
    elif isinstance(e, Var):
        out = zs[e.index]
    elif isinstance(e, ConjVar):
        out = zbs[e.index]
    elif isinstance(e, Add):
        it = iter(e.terms)
        out = _eval(next(it), zs, zbs, memo)
        for t in it:
            out = out + _eval(t, zs, zbs, memo)
    elif isinstance(e, Mul):
        it = iter(e.factors)
        out = _eval(next(it), zs, zbs, memo)
        for f in it:
            out = out * _eval(f, zs, zbs, memo)
    elif isinstance(e, Div):
        den = _eval(e.den, zs, zbs, memo)
        if np.any(np.abs(den) < DENOMINATOR_EPS):
            raise DenominatorVanishes(-1)
        out = _eval(e.num, zs, zbs, memo) / den
    elif isinstance(e, Pow):
        base = _eval(e.base, zs, zbs, memo)
        if e.exp < 0 and np.any(np.abs(base) < DENOMINATOR_EPS):
            raise DenominatorVanishes(-1)
        out = base**e.exp
    else:
        raise TypeError(type(e))
    memo[key] = out
    return out


def evaluate_exprs(exprs: Sequence[Expr], points: np.ndarray) -> np.ndarray:
    """Evaluate trees at complex points of shape (N, p); returns (N, len(exprs))."""
    pts = np.asarray(points, dtype=complex)
    n = pts.shape[0]
    zs = [pts[:, i] for i in range(pts.shape[1])]
    zbs = [np.conj(c) for c in zs]
    memo: dict = {}
    out = np.empty((n, len(exprs)), dtype=complex)
    for j, e in enumerate(exprs):
        try:
            out[:, j] = _eval(e, zs, zbs, memo)
        except DenominatorVanishes:
            raise DenominatorVanishes(j) from None
    return out


def to_real(points: np.ndarray) -> np.ndarray:
    """(N, p) complex -> (N, 2p) interleaved real."""
    pts = np.asarray(points, dtype=complex)
    out = np.empty(pts.shape[:-1] + (2 * pts.shape[-1],))
    out[..., 0::2] = pts.real
    out[..., 1::2] = pts.imag
    return out


def to_complex(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return x[..., 0::2] + 1j * x[..., 1::2]


# ---------------------------------------------------------------------------
# germs


@dataclass(frozen=True, eq=False)
class WirtingerGerm:
    """A map germ C^p -> C^q (R^{2p} -> R^{2q}) centred at ``base``.

    Components are trees in absolute coordinates; :meth:`local` gives the
    same germ with the base point translated to the origin.
    """

    components: tuple[Expr, ...]
    p: int
    base: tuple[complex, ...] = ()
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if self.p < 1 or len(self.components) < 1:
            raise ArityError("a germ needs at least one variable and one component")
        base = tuple(complex(c) for c in self.base) or (0j,) * self.p
        if len(base) != self.p:
            raise ArityError(f"base point has {len(base)} coordinates, germ has {self.p} variables")
        object.__setattr__(self, "base", base)
        object.__setattr__(self, "components", tuple(as_expr(c) for c in self.components))
        for e in self.components:
            zs, zbs = free_indices(e)
            if zs | zbs and max(zs | zbs) >= self.p:
                raise ArityError(f"component uses z{max(zs | zbs) + 1} but germ has {self.p} variables")

    @property
    def q(self) -> int:
        return len(self.components)

    @property
    def source_dim(self) -> int:
        return 2 * self.p

    @property
    def target_dim(self) -> int:
        return 2 * self.q

    # construction -------------------------------------------------------
    @classmethod
    def from_components(cls, components: Iterable, p: int | None = None, base=()) -> WirtingerGerm:
        comps = tuple(as_expr(c) for c in components)
        if p is None:
            if base:
                p = len(tuple(base))
            else:
                used = set()
                for e in comps:
                    zs, zbs = free_indices(e)
                    used |= zs | zbs
                p = max(used) + 1 if used else 1
        return cls(comps, p, tuple(base))

    @classmethod
    def real_linear(cls, matrix, base=()) -> WirtingerGerm:
        m = np.asarray(matrix, dtype=float)
        return cls(real_linear_components(m), m.shape[1] // 2, tuple(base))

    @classmethod
    def identity(cls, p: int) -> WirtingerGerm:
        return cls(tuple(Var(i) for i in range(p)), p)

    def recentered(self, base) -> WirtingerGerm:
        return WirtingerGerm(self.components, self.p, tuple(base))

    def local(self) -> WirtingerGerm:
        """Same germ with coordinates translated so the base point is 0."""
        if all(c == 0 for c in self.base):
            return self
        mapping = {}
        for i, c in enumerate(self.base):
            mapping[("z", i)] = add(Var(i), Const(c))
            mapping[("zbar", i)] = add(ConjVar(i), Const(c.conjugate()))
        memo: dict = {}
        return WirtingerGerm(tuple(substitute(e, mapping, memo) for e in self.components), self.p)

    def compose_source(self, inner: Sequence[Expr]) -> WirtingerGerm:
        """Precompose with a map given by p trees (inner maps into this source)."""
        if len(inner) != self.p:
            raise ArityError("inner map must have one component per source variable")
        mapping = {}
        for i, e in enumerate(inner):
            mapping[("z", i)] = e
            mapping[("zbar", i)] = conj(e)
        memo: dict = {}
        used = set()
        for e in inner:
            zs, zbs = free_indices(e)
            used |= zs | zbs
        p = max(used) + 1 if used else 1
        return WirtingerGerm(tuple(substitute(e, mapping, memo) for e in self.components), p)

    def compose_target_real(self, matrix) -> WirtingerGerm:
        """Postcompose with the real-linear target map ``y -> M y``."""
        m = np.asarray(matrix, dtype=float)
        if m.shape[1] != self.target_dim:
            raise ArityError("matrix does not match target dimension")
        reals = []
        for e in self.components:
            reals.extend([re_part(e), im_part(e)])
        rows = [add(*(mul(Const(m[a, b]), reals[b]) for b in range(m.shape[1]) if m[a, b] != 0))
                for a in range(m.shape[0])]
        comps = tuple(add(rows[2 * j], mul(Const(1j), rows[2 * j + 1])) for j in range(m.shape[0] // 2))
        return WirtingerGerm(comps, self.p, self.base)

    # analysis -------------------------------------------------------------
    def is_holomorphic(self) -> bool:
        """True when no conjugate variable survives polynomial expansion."""
        for e in self.components:
            poly = polynomial_monomials(e, self.p)
            if poly is None:
                if free_indices(e)[1]:
                    return False
            elif any(any(mono[self.p:]) for mono in poly):
                return False
        return True

    @cached_property
    def wirtinger_exprs(self) -> tuple[tuple[Expr, ...], ...]:
        """Row j: (dg_j/dz_1..dz_p, dg_j/dconj(z_1)..dconj(z_p))."""
        return tuple(
            tuple(diff(e, i, False) for i in range(self.p)) + tuple(diff(e, i, True) for i in range(self.p))
            for e in self.components
        )

    @cached_property
    def real_partial_exprs(self) -> tuple[tuple[Expr, ...], ...]:
        """Complex trees d g_j / d x_k for every interleaved real coordinate k."""
        return tuple(tuple(real_partial(e, k) for k in range(2 * self.p)) for e in self.components)

    @cached_property
    def real_second_exprs(self) -> tuple:
        """Complex trees d^2 g_j / dx_k dx_l (indexed [j][k][l])."""
        return tuple(
            tuple(tuple(real_partial(dk, l) for l in range(2 * self.p)) for dk in row)
            for row in self.real_partial_exprs
        )

    def values(self, points) -> np.ndarray:
        """Vectorised evaluation at absolute points of shape (N, p)."""
        return evaluate_exprs(self.components, _as_points(points, self.p))

    def evaluate(self, point) -> np.ndarray:
        pts = np.asarray(point, dtype=complex)
        if pts.ndim == 1:
            return self.values(pts[None, :])[0]
        return self.values(pts)

    def wirtinger_matrix(self, points) -> np.ndarray:
        pts = _as_points(points, self.p)
        flat = [e for row in self.wirtinger_exprs for e in row]
        vals = evaluate_exprs(flat, pts)
        return vals.reshape(pts.shape[0], self.q, 2 * self.p)

    def real_jacobians(self, points) -> np.ndarray:
        """Real (N, 2q, 2p) Jacobians at absolute points."""
        pts = _as_points(points, self.p)
        w = self.wirtinger_matrix(pts)
        dz, dzb = w[:, :, : self.p], w[:, :, self.p:]
        dx = dz + dzb
        dy = 1j * (dz - dzb)
        n = pts.shape[0]
        jac = np.empty((n, 2 * self.q, 2 * self.p))
        jac[:, 0::2, 0::2] = dx.real
        jac[:, 1::2, 0::2] = dx.imag
        jac[:, 0::2, 1::2] = dy.real
        jac[:, 1::2, 1::2] = dy.imag
        return jac

    def real_hessians(self, points) -> np.ndarray:
        """Real (N, 2q, 2p, 2p) second derivatives at absolute points."""
        pts = _as_points(points, self.p)
        d = 2 * self.p
        flat = [e for row in self.real_second_exprs for rk in row for e in rk]
        vals = evaluate_exprs(flat, pts).reshape(pts.shape[0], self.q, d, d)
        out = np.empty((pts.shape[0], 2 * self.q, d, d))
        out[:, 0::2] = vals.real
        out[:, 1::2] = vals.imag
        return out

    def as_real_map(self) -> RealGermMap:
        return RealGermMap(self)

    def to_text(self) -> str:
        return serialize_germ(self)


def _as_points(points, p: int) -> np.ndarray:
    pts = np.asarray(points, dtype=complex)
    if pts.ndim == 1:
        pts = pts[None, :]
    if pts.shape[-1] != p:
        raise ArityError(f"expected points with {p} complex coordinates, got {pts.shape[-1]}")
    return pts


class RealGermMap:
    """View of a germ as a map R^{2p} -> R^{2q} in local coordinates.

    Points are real (N, 2p) arrays measured from the base point.
    """

    def __init__(self, germ: WirtingerGerm):
        self.germ = germ
        self.dim = germ.source_dim
        self.target_dim = germ.target_dim
        self._base = np.asarray(germ.base, dtype=complex)

    def _abs(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return to_complex(x) + self._base

    def value(self, x) -> np.ndarray:
        return to_real(self.germ.values(self._abs(x)))

    def jacobian(self, x) -> np.ndarray:
        return self.germ.real_jacobians(self._abs(x))

    def hessian(self, x) -> np.ndarray:
        return self.germ.real_hessians(self._abs(x))


# module-level operations ----------------------------------------------------


def evaluate(germ: WirtingerGerm, point) -> np.ndarray:
    return germ.evaluate(point)


def wirtinger_derivatives(germ: WirtingerGerm, point) -> np.ndarray:
    """(q, 2p) matrix: column i is dg/dz_i, column p+i is dg/dconj(z_i)."""
    return germ.wirtinger_matrix(np.asarray(point, dtype=complex))[0]


def real_jacobian(germ: WirtingerGerm, point) -> np.ndarray:
    return germ.real_jacobians(np.asarray(point, dtype=complex))[0]


def matrix_rank(jac: np.ndarray, tol: float = RANK_TOL) -> int:
    s = np.linalg.svd(np.asarray(jac, dtype=float), compute_uv=False)
    if s.size == 0 or s[0] == 0:
        return 0
    return int(np.sum(s > tol * s[0]))


def rank_at(germ: WirtingerGerm, point, tol: float = RANK_TOL) -> int:
    if tol < 0:
        raise ValueError("tol must be nonnegative")
    return matrix_rank(real_jacobian(germ, point), tol)


# ---------------------------------------------------------------------------
# polynomial expansion (used for holomorphy tests and the monomial shortcut)


def to_polynomial(e: Expr, _memo=None) -> dict | None:
    """Expand to a sparse {monomial: coeff} dict, or None if not polynomial.

    Monomials are sorted tuples of (index, is_conjugate, power).
    """
    memo = {} if _memo is None else _memo
    key = id(e)
    if key in memo:
        return memo[key]
    if isinstance(e, Const):
        out = {(): e.value} if e.value != 0 else {}
    elif isinstance(e, Var):
        out = {((e.index, False, 1),): 1 + 0j}
    elif isinstance(e, ConjVar):
        out = {((e.index, True, 1),): 1 + 0j}
    elif isinstance(e, Add):
        out = {}
        for t in e.terms:
            pt = to_polynomial(t, memo)
            if pt is None:
                out = None
                break
            for mono, c in pt.items():
                out[mono] = out.get(mono, 0) + c
    elif isinstance(e, Mul):
        out = {(): 1 + 0j}
        for f in e.factors:
            pf = to_polynomial(f, memo)
            if pf is None:
                out = None
                break
            out = _poly_mul(out, pf)
    elif isinstance(e, Pow):
        if e.exp < 0:
            out = None
        else:
            pb = to_polynomial(e.base, memo)
            out = None
            if pb is not None:
                out = {(): 1 + 0j}
                for _ in range(e.exp):
                    out = _poly_mul(out, pb)
    else:
        out = None
    if out is not None:
        out = {m: c for m, c in out.items() if abs(c) > 1e-15}
    memo[key] = out
    return out


def _poly_mul(a: dict, b: dict) -> dict:
    out: dict = {}
    for ma, ca in a.items():
        for mb, cb in b.items():
            powers: dict = {}
            for slot_i, slot_c, k in ma + mb:
                powers[(slot_i, slot_c)] = powers.get((slot_i, slot_c), 0) + k
            mono = tuple(sorted((i, c, k) for (i, c), k in powers.items()))
            out[mono] = out.get(mono, 0) + ca * cb
    return out


def polynomial_monomials(e: Expr, p: int) -> dict | None:
    """Dense form of :func:`to_polynomial`: keys are length-2p exponent tuples."""
    sparse = to_polynomial(e)
    if sparse is None:
        return None
    out = {}
    for mono, c in sparse.items():
        exps = [0] * (2 * p)
        for i, is_conj, k in mono:
            exps[p * is_conj + i] += k
        out[tuple(exps)] = c
    return out


# ---------------------------------------------------------------------------
# text form


def _fmt_real(x: float) -> str:
    if x == int(x) and abs(x) < 1e15:
        return str(int(x))
    return repr(float(x))


def _fmt_const(c: complex) -> str:
    if c.imag == 0:
        return _fmt_real(c.real)
    if c.real == 0:
        if c.imag == 1:
            return "i"
        return f"{_fmt_real(c.imag)}i"
    sign = "-" if c.imag < 0 else "+"
    im = abs(c.imag)
    im_txt = "i" if im == 1 else f"{_fmt_real(im)}i"
    return f"({_fmt_real(c.real)}{sign}{im_txt})"


def _is_negative(e: Expr) -> bool:
    c = None
    if isinstance(e, Const):
        c = e.value
    elif isinstance(e, Mul) and isinstance(e.factors[0], Const):
        c = e.factors[0].value
    if c is None:
        return False
    return c.real < 0 or (c.real == 0 and c.imag < 0)


_PREC_ADD, _PREC_MUL, _PREC_NEG, _PREC_POW, _PREC_ATOM = 1, 2, 3, 4, 5


def _prec(e: Expr) -> int:
    if isinstance(e, Add):
        return _PREC_ADD
    if isinstance(e, (Mul, Div)):
        if isinstance(e, Mul) and _is_negative(e):
            return _PREC_NEG
        return _PREC_MUL
    if isinstance(e, Pow):
        return _PREC_POW
    if isinstance(e, Const):
        c = e.value
        if c.imag == 0 and c.real < 0:
            return _PREC_NEG
        if c.real == 0 and c.imag < 0:
            return _PREC_NEG
        return _PREC_ATOM
    return _PREC_ATOM


def _wrap(e: Expr, min_prec: int) -> str:
    txt = to_text(e)
    return f"({txt})" if _prec(e) < min_prec else txt


def to_text(e: Expr) -> str:
    if isinstance(e, Const):
        return _fmt_const(e.value)
    if isinstance(e, Var):
        return f"z{e.index + 1}"
    if isinstance(e, ConjVar):
        return f"conj(z{e.index + 1})"
    if isinstance(e, Add):
        parts = [to_text(e.terms[0])]
        for t in e.terms[1:]:
            if _is_negative(t):
                parts.append(" - " + _wrap(neg(t), _PREC_MUL))
            else:
                parts.append(" + " + _wrap(t, _PREC_MUL))
        return "".join(parts)
    if isinstance(e, Mul):
        fs = list(e.factors)
        prefix = ""
        if isinstance(fs[0], Const) and fs[0].value == -1:
            prefix = "-"
            fs = fs[1:]
        elif _is_negative(e):
            prefix = "-"
            fs[0] = Const(-fs[0].value)
        body = "*".join(_wrap(f, _PREC_POW) for f in fs)
        return prefix + body
    if isinstance(e, Div):
        return f"{_wrap(e.num, _PREC_MUL)} / {_wrap(e.den, _PREC_POW)}"
    if isinstance(e, Pow):
        return f"{_wrap(e.base, _PREC_ATOM)}^{e.exp}"
    raise TypeError(type(e))


def serialize_germ(germ: WirtingerGerm) -> str:
    comps = [to_text(e) for e in germ.components]
    used = set()
    for e in germ.components:
        zs, zbs = free_indices(e)
        used |= zs | zbs
    implied_p = max(used) + 1 if used else 1
    lines = []
    if any(c != 0 for c in germ.base) or implied_p != germ.p:
        lines.append("@ (" + ", ".join(_fmt_const(c) for c in germ.base) + ")")
    lines.append(";\n".join(comps))
    return "\n".join(lines) + "\n"


_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+|\#[^\n]*)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?i?)
  | (?P<name>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>[-+*/^();,@])
    """,
    re.VERBOSE,
)


@dataclass
class _Tok:
    kind: str
    text: str
    line: int
    col: int


def _tokenize(text: str) -> list[_Tok]:
    toks = []
    pos, line, col = 0, 1, 1
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, col)
        kind = m.lastgroup
        chunk = m.group()
        if kind != "ws":
            toks.append(_Tok(kind, chunk, line, col))
        nl = chunk.count("\n")
        if nl:
            line += nl
            col = len(chunk) - chunk.rfind("\n")
        else:
            col += len(chunk)
        pos = m.end()
    toks.append(_Tok("eof", "", line, col))
    return toks


_VAR_RE = re.compile(r"z([1-9])$")


class _Parser:
    def __init__(self, text: str):
        self.toks = _tokenize(text)
        self.i = 0

    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def error(self, msg: str):
        t = self.tok
        raise ParseError(msg, t.line, t.col)

    def accept(self, text: str) -> bool:
        if self.tok.kind == "op" and self.tok.text == text:
            self.i += 1
            return True
        return False

    def expect(self, text: str):
        if not self.accept(text):
            found = self.tok.text or "end of input"
            self.error(f"expected {text!r}, found {found!r}")

    def germ(self):
        base = None
        if self.accept("@"):
            self.expect("(")
            base = [self.constant()]
            while self.accept(","):
                base.append(self.constant())
            self.expect(")")
            self.accept(";")
        comps = []
        while self.tok.kind != "eof":
            comps.append(self.expr())
            if not self.accept(";"):
                break
        if self.tok.kind != "eof":
            self.error(f"unexpected {self.tok.text!r}")
        if not comps:
            self.error("germ has no components")
        return base, comps

    def constant(self) -> complex:
        t = self.tok
        e = self.expr()
        if free_indices(e) != (set(), set()) or not isinstance(e, Const):
            raise ParseError("base point coordinates must be constants", t.line, t.col)
        return e.value

    def expr(self) -> Expr:
        out = self.term()
        while True:
            if self.accept("+"):
                out = add(out, self.term())
            elif self.accept("-"):
                out = add(out, neg(self.term()))
            else:
                return out

    def term(self) -> Expr:
        out = self.unary()
        while True:
            if self.accept("*"):
                out = mul(out, self.unary())
            elif self.accept("/"):
                t = self.tok
                den = self.unary()
                if _is_const(den, 0):
                    raise ParseError("division by zero", t.line, t.col)
                out = div(out, den)
            else:
                return out

    def unary(self) -> Expr:
        if self.accept("-"):
            return neg(self.unary())
        if self.accept("+"):
            return self.unary()
        return self.pow()

    def pow(self) -> Expr:
        base = self.atom()
        if self.accept("^"):
            paren = self.accept("(")
            sign = -1 if self.accept("-") else 1
            t = self.tok
            if t.kind != "num" or not t.text.isdigit():
                self.error("exponent must be an integer")
            self.i += 1
            if paren:
                self.expect(")")
            return power(base, sign * int(t.text))
        return base

    def atom(self) -> Expr:
        t = self.tok
        if t.kind == "num":
            self.i += 1
            if t.text.endswith("i"):
                return Const(1j * float(t.text[:-1]))
            return Const(float(t.text))
        if t.kind == "name":
            self.i += 1
            if t.text == "i":
                return Const(1j)
            m = _VAR_RE.match(t.text)
            if m:
                return Var(int(m.group(1)) - 1)
            if t.text in ("conj", "re", "im"):
                self.expect("(")
                inner = self.expr()
                self.expect(")")
                return {"conj": conj, "re": re_part, "im": im_part}[t.text](inner)
            raise ParseError(f"unknown name {t.text!r}", t.line, t.col)
        if self.accept("("):
            e = self.expr()
            self.expect(")")
            return e
        found = t.text or "end of input"
        raise ParseError(f"unexpected {found!r}", t.line, t.col)


def parse_expr(text: str) -> Expr:
    p = _Parser(text)
    e = p.expr()
    if p.tok.kind != "eof":
        p.error(f"unexpected {p.tok.text!r}")
    return e


def parse_germ(text: str, components: int | None = None) -> WirtingerGerm:
    """Parse the germ text grammar.

    ``components`` (optional) is the expected target complex dimension.
    """
    base, comps = _Parser(text).germ()
    if components is not None and len(comps) != components:
        raise ArityError(f"expected {components} components, found {len(comps)}")
    return WirtingerGerm.from_components(comps, base=tuple(base) if base else ())


def canonical(text: str) -> str:
    return serialize_germ(parse_germ(text))


def same_values(a: WirtingerGerm, b: WirtingerGerm, points) -> float:
    """Largest absolute difference of two germs on the given points."""
    return float(np.max(np.abs(a.values(points) - b.values(points))))


__all__ = [
    "Expr", "Const", "Var", "ConjVar", "Add", "Mul", "Div", "Pow",
    "WirtingerGerm", "RealGermMap", "z", "zbar", "conj", "re_part", "im_part",
    "real_coord", "diff", "real_partial", "substitute", "evaluate", "wirtinger_derivatives",
    "real_jacobian", "rank_at", "matrix_rank", "parse_germ", "parse_expr",
    "serialize_germ", "to_text", "to_real", "to_complex", "to_polynomial",
    "polynomial_monomials", "canonical",
]
