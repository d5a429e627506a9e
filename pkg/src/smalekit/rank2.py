"""Isolated rank-2 points of germs R^4 -> R^4 and their Stingley index.

A germ with a rank-2 differential at its base point is brought to the form
``(x1, x2, A(x), B(x))`` in oriented coordinates: a linear change of source
and target (both of positive determinant) makes the differential
``diag(I2, 0)``, then the shear ``x -> (G1(x), G2(x), x3, x4)`` is inverted
pointwise by Newton iteration. The index is the local degree of

    x -> (dA/dx3, dB/dx3, dA/dx4, dB/dx4).
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ._parallel import worker_count
from .degree import DegreeRequest, DegreeResult, compute_degree
from .errors import NotRankTwo, ShearNotInvertible, SymmetryViolation
from .wirtinger import (
    Const, Expr, WirtingerGerm, add, conj, matrix_rank, mul, re_part, real_coord,
    real_linear_components, to_complex, z, zbar,
)

CP2_RADIUS = 0.2
ISOLATION_TOL = 1e-13
SHEAR_TOL = 1e-13


# ---------------------------------------------------------------------------
# model germs


def t_model(ell: int, m: int) -> WirtingerGerm:
    """(w, z) -> (w, z^ell + conj(z) w^m), with w = z1 and z = z2."""
    w, zz = z(1), z(2)
    return WirtingerGerm.from_components([w, zz**ell + zbar(2) * w**m], p=2)


def kappa_model(ell: int, m: int) -> WirtingerGerm:
    w, zz = z(1), z(2)
    return WirtingerGerm.from_components(
        [ell * zz ** (ell - 1) + w**m, 1j * (ell * zz ** (ell - 1) - w**m)], p=2)


def real_quadratic(q) -> Expr:
    """x^T Q x in the four interleaved real coordinates."""
    q = np.asarray(q, dtype=float)
    xs = [real_coord(k) for k in range(q.shape[0])]
    return add(*(mul(Const(q[a, b]), xs[a], xs[b])
                 for a in range(q.shape[0]) for b in range(q.shape[0]) if q[a, b] != 0))


def prenormal_model(qa, qb) -> WirtingerGerm:
    """The germ (x1, x2, A, B) with quadratic A = x^T QA x and B = x^T QB x."""
    a, b = real_quadratic(qa), real_quadratic(qb)
    return WirtingerGerm.from_components([z(1), add(a, mul(Const(1j), b))], p=2)


# ---------------------------------------------------------------------------
# prenormal form


def _best_pair(mat: np.ndarray) -> tuple[int, int]:
    """Pair of rows with the largest smallest singular value; ties -> lowest index."""
    best, best_val = None, -1.0
    for i, j in itertools.combinations(range(mat.shape[0]), 2):
        val = np.linalg.svd(mat[[i, j]], compute_uv=False)[-1]
        if val > best_val * (1 + 1e-9) + 1e-15:
            best, best_val = (i, j), val
    return best


def adapted_linear_changes(jac: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Target L and source S, det > 0, with L @ jac @ S = diag(1, 1, 0, 0)."""
    i, j = _best_pair(jac)
    order = [i, j] + [k for k in range(4) if k not in (i, j)]
    perm = np.eye(4)[order]
    if np.linalg.det(perm) < 0:
        perm[3] *= -1
    jp = perm @ jac
    top = jp[:2]
    elim = np.eye(4)
    elim[2:, :2] = -jp[2:] @ np.linalg.pinv(top)
    target = elim @ perm

    p, q = _best_pair(top.T)
    block_inv = np.linalg.inv(top[:, [p, q]])
    source = np.zeros((4, 4))
    source[[p, q], 0:2] = block_inv
    rest = [c for c in range(4) if c not in (p, q)]
    for col, c in enumerate(rest, start=2):
        source[c, col] = 1.0
        source[[p, q], col] = -block_inv @ top[:, c]
    if np.linalg.det(source) < 0:
        source[:, 3] *= -1
    return target, source


@dataclass(frozen=True, eq=False)
class PrenormalGerm:
    """A germ G = L o g o S (centred, G(0) = 0) with dG(0) = diag(I2, 0).

    ``A`` and ``B`` are G3, G4 read in the sheared coordinates
    ``xt = (G1(x), G2(x), x3, x4)``.
    """

    germ: WirtingerGerm
    radius: float
    source_change: np.ndarray
    target_change: np.ndarray
    straight: bool
    _rm: object = field(default=None, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "_rm", self.germ.as_real_map())

    def shear_inverse(self, xt) -> np.ndarray:
        """Solve (G1, G2)(x1, x2, xt3, xt4) = (xt1, xt2); returns x."""
        xt = np.atleast_2d(np.asarray(xt, dtype=float))
        if self.straight:
            return xt.copy()
        x = xt.copy()
        for _ in range(60):
            val = self._rm.value(x)[:, :2]
            res = val - xt[:, :2]
            if np.max(np.abs(res), initial=0.0) < SHEAR_TOL * max(1.0, self.radius):
                break
            jac = self._rm.jacobian(x)[:, :2, :2]
            x[:, :2] -= np.linalg.solve(jac, res[..., None])[..., 0]
            if not np.all(np.isfinite(x)) or np.any(np.linalg.norm(x, axis=1) > 4 * self.radius + 1):
                raise ShearNotInvertible("shear inversion left the chart; shrink the ball")
        else:
            raise ShearNotInvertible("shear inversion did not converge; shrink the ball")
        return x

    def ab_values(self, xt) -> np.ndarray:
        """(N, 2) values of (A, B)."""
        return self._rm.value(self.shear_inverse(xt))[:, 2:]

    def _partials(self, x):
        jac = self._rm.jacobian(x)
        dphi = np.zeros_like(jac)
        dphi[:, :2] = jac[:, :2]
        dphi[:, 2, 2] = dphi[:, 3, 3] = 1.0
        phi_inv = np.linalg.inv(dphi)
        return jac, phi_inv, jac[:, 2:] @ phi_inv

    def ab_jacobian(self, xt) -> np.ndarray:
        """(N, 2, 4) partials of (A, B) in the sheared coordinates."""
        return self._partials(self.shear_inverse(xt))[2]

    def g_hat_values(self, xt) -> np.ndarray:
        p = self.ab_jacobian(xt)
        return np.stack([p[:, 0, 2], p[:, 1, 2], p[:, 0, 3], p[:, 1, 3]], axis=1)

    def g_hat_jacobians(self, xt) -> np.ndarray:
        """Tangent propagation through the shear inverse (implicit-function rule)."""
        x = self.shear_inverse(xt)
        jac, phi_inv, p = self._partials(x)
        hess = self._rm.hessian(x)  # (N, 4, 4, 4), [a, m, k] = d_k d_m G_a
        d_dphi = np.zeros_like(hess)
        d_dphi[:, :2] = hess[:, :2]
        # dP[a, l]/dx_k
        dp = np.einsum("namk,nml->nalk", hess[:, 2:], phi_inv) \
            - np.einsum("nab,nbmk,nml->nalk", p, d_dphi, phi_inv)
        rows = np.stack([dp[:, 0, 2], dp[:, 1, 2], dp[:, 0, 3], dp[:, 1, 3]], axis=1)  # (N, 4, k)
        return rows @ phi_inv


class GHatMap:
    """Numeric x -> g_hat(x) as a RealMap for the degree engines."""

    dim = 4

    def __init__(self, pre: PrenormalGerm):
        self.pre = pre

    def value(self, x):
        return self.pre.g_hat_values(x)

    def jacobian(self, x):
        return self.pre.g_hat_jacobians(x)


def _centred(germ: WirtingerGerm) -> WirtingerGerm:
    local = germ.local()
    g0 = local.evaluate(np.zeros(local.p))
    return WirtingerGerm(tuple(add(e, Const(-complex(v))) for e, v in zip(local.components, g0)), local.p)


def prenormalize(germ: WirtingerGerm, radius: float, tol: float = 1e-8, samples: int = 32,
                 seed: int = 0) -> PrenormalGerm:
    """Adapted coordinates for an isolated rank-2 point at the germ's base point."""
    if germ.p != 2 or germ.q != 2:
        raise NotRankTwo("rank-2 analysis needs a germ between 4-dimensional spaces")
    g = _centred(germ)
    jac0 = g.real_jacobians(np.zeros((1, 2)))[0]
    rank = matrix_rank(jac0, tol)
    if rank != 2:
        raise NotRankTwo(f"differential has rank {rank} at the base point")
    jac0 = np.where(np.abs(jac0) < 1e-12 * np.abs(jac0).max(), 0.0, jac0)
    target, source = adapted_linear_changes(jac0)

    inner = real_linear_components(source)
    is_identity = np.allclose(source, np.eye(4), atol=0) and np.allclose(target, np.eye(4), atol=0)
    big = g if is_identity else g.compose_source(inner).compose_target_real(target)
    big = WirtingerGerm(big.components, 2)

    rng = np.random.default_rng([seed, 11])
    probe = rng.standard_normal((8, 4)) * radius
    straight = bool(np.max(np.abs(big.values(to_complex(probe))[:, 0] - to_complex(probe)[:, 0])) < 1e-13)

    # spot-check isolation in the ball
    dirs = rng.standard_normal((samples, 4))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    pts = dirs * rng.uniform(0.1, 1.0, (samples, 1)) * radius
    jacs = big.real_jacobians(to_complex(pts))
    low = [matrix_rank(j, ISOLATION_TOL) for j in jacs]
    if min(low) <= 2:
        raise NotRankTwo("another rank <= 2 point was found inside the isolation ball")
    return PrenormalGerm(big, radius, source, target, straight)


def g_hat(pre: PrenormalGerm):
    """The map (dA/dx3, dB/dx3, dA/dx4, dB/dx4).

    For straight germs (G1 + i G2 == z1) this is an exact Wirtinger germ,
    otherwise a numeric map evaluated through the shear inverse.
    """
    if pre.straight:
        k = pre.germ.components[1]
        from .wirtinger import diff
        kz, kzb = diff(k, 1, False), diff(k, 1, True)
        return WirtingerGerm((add(kz, kzb), mul(Const(1j), add(kz, mul(Const(-1), kzb)))), 2)
    return GHatMap(pre)


def index_from_2jet(pre: PrenormalGerm) -> int | None:
    """Sign of the linear part of g_hat (umbilic points); None if degenerate."""
    hess = pre.germ.real_hessians(np.zeros((1, 2)))[0]
    ha, hb = hess[2], hess[3]
    lin = np.array([ha[2], hb[2], ha[3], hb[3]])
    det = np.linalg.det(lin)
    if abs(det) < 1e-10 * max(np.abs(lin).max(), 1e-300) ** 4:
        return None
    return int(np.sign(det))


@dataclass
class IndexResult:
    index: int
    degree: DegreeResult
    prenormal: PrenormalGerm

    def to_dict(self) -> dict:
        return {"index": self.index, "degree": self.degree.to_dict(),
                "straight": self.prenormal.straight}


def index_result(germ: WirtingerGerm, radius: float = 0.5, engine: str = "consensus",
                 seed: int = 0, **kw) -> IndexResult:
    pre = prenormalize(germ, radius, seed=seed)
    res = compute_degree(DegreeRequest(g_hat(pre), radius, engine=engine, seed=seed, **kw))
    return IndexResult(res.degree, res, pre)


def stingley_index(germ: WirtingerGerm, radius: float = 0.5, engine: str = "consensus",
                   seed: int = 0, jet2: bool = False) -> int:
    """Index of the isolated rank-2 point at the germ's base point."""
    if jet2:
        quick = index_from_2jet(prenormalize(germ, radius, seed=seed))
        if quick is not None:
            return quick
    return index_result(germ, radius, engine, seed).index


# ---------------------------------------------------------------------------
# the CP^2 calibration map f[z1, z2, z3] = (z1 conj z2, Re z1 conj z3, Re z2 conj z3)

_S = 1 / math.sqrt(2)
CP2_POINTS = {
    "p0": (0, 0, 1),
    "p+1": (0, _S, _S),
    "p-1": (0, _S, -_S),
    "p+2": (_S, 0, _S),
    "p-2": (_S, 0, -_S),
    "p+3": (_S, _S, 0),
    "p-3": (_S, -_S, 0),
}


def orthonormal_completion(v) -> np.ndarray:
    """Rows (v, e1, e2): Hermitian Gram-Schmidt against the standard basis in order."""
    basis = [np.asarray(v, dtype=complex) / np.linalg.norm(v)]
    for e in np.eye(3, dtype=complex):
        w = e.copy()
        for b in basis:
            w = w - np.vdot(b, w) * b
        if np.linalg.norm(w) > 1e-8:
            basis.append(w / np.linalg.norm(w))
        if len(basis) == 3:
            break
    return np.array(basis)


def cp2_chart_germ(point) -> WirtingerGerm:
    """f in the chart (a, b) -> [p + a e1 + b e2] centred at ``point``."""
    p, e1, e2 = orthonormal_completion(point)
    a, b = z(1), z(2)
    lines = [add(Const(p[i]), mul(Const(e1[i]), a), mul(Const(e2[i]), b)) for i in range(3)]
    norm = add(Const(1), mul(a, zbar(1)), mul(b, zbar(2)))
    c1 = mul(lines[0], conj(lines[1]))
    c2 = add(re_part(mul(lines[0], conj(lines[2]))),
             mul(Const(1j), re_part(mul(lines[1], conj(lines[2])))))
    return WirtingerGerm.from_components([c1 / norm, c2 / norm], p=2)


def cp2_germs() -> list[tuple[str, WirtingerGerm]]:
    return [(label, cp2_chart_germ(pt)) for label, pt in CP2_POINTS.items()]


@dataclass
class CP2Result:
    indices: dict
    total: int
    relations: dict
    details: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return all(self.relations.values())


def cp2_total_index(radius: float = CP2_RADIUS, seed: int = 0, strict: bool = True) -> CP2Result:
    germs = cp2_germs()

    def one(item):
        label, g = item
        return label, index_result(g, radius, seed=seed)

    with ThreadPoolExecutor(max_workers=worker_count()) as pool:
        results = dict(pool.map(one, germs))
    ind = {label: r.index for label, r in results.items()}
    relations = {
        "p+1 = p-1 = p+2 = p-2": len({ind["p+1"], ind["p-1"], ind["p+2"], ind["p-2"]}) == 1,
        "p+3 = p-3": ind["p+3"] == ind["p-3"],
        "p-1 = -p-3": ind["p-1"] == -ind["p-3"],
    }
    out = CP2Result(ind, sum(ind.values()), relations,
                    {label: r.to_dict() for label, r in results.items()})
    if strict and not out.ok:
        raise SymmetryViolation(f"CP2 index relations violated: {relations}")
    return out
