"""Local Brouwer degree of a map R^d -> R^d at an isolated zero.

Three routes are provided:

* :func:`degree_preimage` counts signed solutions of ``g(x) = eps`` for a
  small random regular value, found by multi-start Newton.
* :func:`degree_pl_sphere` computes the degree of ``g/|g|`` on a sphere by a
  simplicial approximation of that sphere map.
* :func:`degree_holomorphic` uses that holomorphic maps preserve orientation.

:func:`degree_consensus` runs every applicable engine and refuses to answer
unless they agree.

Maps are either :class:`~smalekit.wirtinger.WirtingerGerm` objects or any
object with ``dim``, ``value(x)`` and ``jacobian(x)`` acting on real (N, d)
arrays measured from the zero (see :class:`RealMap`).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Protocol, Union

import numpy as np
from scipy.stats import qmc

from .errors import (
    EngineDisagreement,
    NoConvergence,
    NonRegularValueExhausted,
    NoStabilization,
    NotHolomorphic,
    NotIsolatedZero,
    UsageError,
    ZeroOnSphere,
)
from .wirtinger import WirtingerGerm, polynomial_monomials

ZERO_TOL = 1e-12
CLUSTER_RADIUS = 1e-7
DET_TOL = 1e-10
MAX_RETRIES = 5
MAX_DIM = 8
SPHERE_ZERO_TOL = 1e-10


class RealMap(Protocol):
    dim: int

    def value(self, x: np.ndarray) -> np.ndarray: ...

    def jacobian(self, x: np.ndarray) -> np.ndarray: ...


MapLike = Union[WirtingerGerm, RealMap]


def as_real_map(germ: MapLike) -> RealMap:
    if isinstance(germ, WirtingerGerm):
        if germ.p != germ.q:
            raise UsageError("degree needs equal source and target dimension")
        return germ.as_real_map()
    return germ


@dataclass
class DegreeRequest:
    """Everything an engine needs; ``seed`` drives all random choices."""

    germ: MapLike
    radius: float
    engine: str = "consensus"
    seeds: int | None = None
    depth: int = 6
    max_depth: int = 10
    rho: float | None = None
    seed: int = 0

    def __post_init__(self):
        if not self.radius > 0:
            raise UsageError("radius must be positive")
        d = as_real_map(self.germ).dim
        if d > MAX_DIM:
            raise UsageError(f"degrees are only supported for d <= {MAX_DIM}")


@dataclass
class DegreeResult:
    degree: int
    engine: str
    diagnostics: dict = field(default_factory=dict)
    confidence: str = "single-engine"

    def __post_init__(self):
        self.degree = int(self.degree)

    def to_dict(self) -> dict:
        return {
            "degree": self.degree,
            "engine": self.engine,
            "confidence": self.confidence,
            "diagnostics": self.diagnostics,
        }


def _rng(seed: int, stream: int) -> np.random.Generator:
    return np.random.default_rng([int(seed), stream])


def _unit_vectors(rng, n: int, d: int) -> np.ndarray:
    v = rng.standard_normal((n, d))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def _check_zero(f: RealMap):
    g0 = f.value(np.zeros((1, f.dim)))[0]
    if np.max(np.abs(g0)) > ZERO_TOL:
        raise UsageError(f"germ does not vanish at its base point (|g(0)| = {np.max(np.abs(g0)):.3g})")


def _solve(jac: np.ndarray, rhs: np.ndarray, det_rel: float = 1e-13) -> np.ndarray:
    """Batched J^{-1} b with a pseudo-inverse fallback for singular J."""
    out = np.empty_like(rhs)
    det = np.linalg.det(jac)
    scale = np.max(np.abs(jac), axis=(1, 2)) ** jac.shape[-1]
    good = np.abs(det) > det_rel * np.maximum(scale, 1e-300)
    if np.any(good):
        out[good] = np.linalg.solve(jac[good], rhs[good][..., None])[..., 0]
    bad = ~good
    if np.any(bad):
        out[bad] = np.einsum("nij,nj->ni", np.linalg.pinv(jac[bad]), rhs[bad])
    return out


def newton(f: RealMap, x0: np.ndarray, target: np.ndarray, radius: float,
           max_iter: int = 100, tol: float = 1e-12, det_rel: float = 1e-13):
    """Vectorised Newton iteration for ``f(x) = target`` from rows of ``x0``.

    Returns final iterates, residual norms and the last step lengths.
    Iterates leaving the ball of radius ``2 * radius`` are abandoned.
    Jacobians with relative determinant below ``det_rel`` use a pseudo-inverse.
    """
    x = np.array(x0, dtype=float)
    n = x.shape[0]
    active = np.ones(n, dtype=bool)
    step_len = np.full(n, np.inf)
    max_step = 0.5 * radius
    for _ in range(max_iter):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        xa = x[idx]
        res = f.value(xa) - target
        step = _solve(f.jacobian(xa), res, det_rel)
        norms = np.linalg.norm(step, axis=1)
        clip = norms > max_step
        step[clip] *= (max_step / norms[clip])[:, None]
        xa = xa - step
        x[idx] = xa
        step_len[idx] = np.minimum(norms, max_step)
        done = norms < tol * max(radius, 1.0)
        lost = np.linalg.norm(xa, axis=1) > 2 * radius
        active[idx[done | lost]] = False
    res = np.linalg.norm(f.value(x) - target, axis=1)
    return x, res, step_len


def ball_seeds(d: int, n: int, radius: float, rng) -> np.ndarray:
    """Scrambled Halton points in the ball of the given radius."""
    sampler = qmc.Halton(d, scramble=True, seed=rng)
    frac = math.pi ** (d / 2) / math.gamma(d / 2 + 1) / 2**d
    out = []
    while sum(len(o) for o in out) < n:
        m = int(1.3 * (n - sum(len(o) for o in out)) / frac) + 8
        pts = (2 * sampler.random(m) - 1) * radius
        out.append(pts[np.linalg.norm(pts, axis=1) < radius])
    return np.concatenate(out)[:n]


def sphere_scale(f: RealMap, radius: float, rng, n: int = 512) -> tuple[float, float]:
    x = radius * _unit_vectors(rng, n, f.dim)
    mags = np.linalg.norm(f.value(x), axis=1)
    return float(mags.max()), float(mags.min())


def _other_zeros(f: RealMap, seeds: np.ndarray, radius: float, scale: float) -> np.ndarray:
    """Stalled Newton limits of ``f = 0`` away from the origin (non-isolation witnesses)."""
    x, res, step = newton(f, seeds, np.zeros(f.dim), radius, max_iter=300, tol=1e-14, det_rel=0.0)
    norms = np.linalg.norm(x, axis=1)
    hit = (res < 1e-10 * max(scale, 1e-300)) & (step < 1e-12 * radius) \
        & (norms > 1e-3 * radius) & (norms < radius)
    return x[hit]


def _sphere_minima(f: RealMap, radius: float, rng, n: int = 48, iters: int = 25) -> list[float]:
    """min |f| / max |f| on spheres of radius r, r/2, r/4, r/8.

    A zero set through the origin meets every small sphere, so a
    vanishing ratio witnesses non-isolation. Minimisation is
    Gauss-Newton on the sphere from ``n`` random starts per sphere.
    """
    d = f.dim
    radii = np.repeat(radius / 2.0 ** np.arange(4), n)[:, None]
    x = radii * _unit_vectors(rng, len(radii), d)
    top = np.linalg.norm(f.value(x), axis=1).reshape(4, n).max(axis=1)
    for _ in range(iters):
        u = x / np.linalg.norm(x, axis=1, keepdims=True)
        proj = np.eye(d)[None] - u[:, :, None] * u[:, None, :]
        step = np.einsum("nij,nj->ni", np.linalg.pinv(f.jacobian(x) @ proj), f.value(x))
        x = x - step
        x = radii * x / np.linalg.norm(x, axis=1, keepdims=True)
        if np.max(np.linalg.norm(step, axis=1) / radii[:, 0]) < 1e-13:
            break
    vals = np.linalg.norm(f.value(x), axis=1).reshape(4, n)
    return [float(v.min() / max(t, v.max(), 1e-300)) for v, t in zip(vals, top)]


def find_preimages(f: RealMap, eps: np.ndarray, radius: float, seeds: int, rng,
                   max_batches: int = 12) -> tuple[list[np.ndarray], int]:
    """Distinct solutions of ``f(x) = eps`` inside the ball, batch by batch.

    Fresh seed batches are drawn until two consecutive batches add no new root.
    """
    roots: list[np.ndarray] = []
    tol_res = 1e-9 * max(np.linalg.norm(eps), 1e-300)
    quiet = 0
    used = 0
    for _ in range(max_batches):
        x0 = ball_seeds(f.dim, seeds, radius, rng)
        used += len(x0)
        x, res, _ = newton(f, x0, eps, radius)
        good = x[(res < tol_res) & (np.linalg.norm(x, axis=1) < radius)]
        before = len(roots)
        for p in good:
            if all(np.linalg.norm(p - r) > CLUSTER_RADIUS for r in roots):
                roots.append(p)
        quiet = quiet + 1 if len(roots) == before else 0
        if quiet >= 2:
            break
    return roots, used


def _relative_det(jac: np.ndarray) -> np.ndarray:
    det = np.linalg.det(jac)
    norm = np.linalg.norm(jac, axis=(1, 2), ord=2) ** jac.shape[-1]
    return np.abs(det) / np.maximum(norm, 1e-300), np.sign(det)


def degree_preimage(req: DegreeRequest) -> DegreeResult:
    """Signed count of preimages of a small random regular value."""
    f = as_real_map(req.germ)
    _check_zero(f)
    d = f.dim
    rng = _rng(req.seed, 1)
    n_seeds = req.seeds or 4**d
    smax, smin = sphere_scale(f, req.radius, rng)
    if smin < ZERO_TOL:
        raise NotIsolatedZero("germ vanishes on the isolation sphere")
    rho = req.rho if req.rho is not None else 1e-3 * smax

    ratios = _sphere_minima(f, req.radius, rng)
    if min(ratios) < SPHERE_ZERO_TOL:
        raise NotIsolatedZero(f"zeros on spheres around the base point (min |g|/max |g| = {min(ratios):.2g})")
    witnesses = _other_zeros(f, ball_seeds(d, n_seeds, req.radius, rng), req.radius, smax)
    if len(witnesses):
        raise NotIsolatedZero(
            f"zero at distance {np.linalg.norm(witnesses[0]):.3g} from the base point inside the ball")

    retries = []
    for attempt in range(MAX_RETRIES):
        eps = rho * _unit_vectors(rng, 1, d)[0]
        roots, used = find_preimages(f, eps, req.radius, n_seeds, rng)
        if not roots:
            raise NoConvergence("Newton did not converge from any seed")
        pts = np.array(roots)
        if np.any(np.linalg.norm(pts, axis=1) > 0.95 * req.radius):
            raise NotIsolatedZero("preimages accumulate at the boundary sphere")
        rel, signs = _relative_det(f.jacobian(pts))
        if np.all(rel >= DET_TOL):
            diag = {
                "regular_value": eps.tolist(),
                "rho": rho,
                "seeds_used": used,
                "roots": [[float(v) for v in r] for r in pts],
                "signs": [int(s) for s in signs],
                "attempts": attempt + 1,
            }
            if retries:
                diag["retried_non_regular"] = retries
            return DegreeResult(int(np.sum(signs)), "preimage", diag)
        retries.append(float(rel.min()))
    raise NonRegularValueExhausted(f"no regular value found after {MAX_RETRIES} attempts")


# ---------------------------------------------------------------------------
# simplicial sphere approximation


def _freudenthal_template(k: int) -> list[tuple[tuple[int, int], ...]]:
    """Children of the edgewise (Freudenthal) 2-subdivision of a k-simplex.

    Each child is a tuple of k+1 vertex pairs (i, j): the child vertex is the
    midpoint of parent vertices i and j (i == j for a parent vertex).
    Children are ordered so that each has the parent's orientation.
    """
    children = []
    for corner in itertools.product((0, 1), repeat=k):
        for perm in itertools.permutations(range(k)):
            pts = [np.array(corner)]
            for axis in perm:
                nxt = pts[-1].copy()
                nxt[axis] += 1
                pts.append(nxt)
            # inside 2*S, S = {1 >= t1 >= ... >= tk >= 0}
            if all(p[0] <= 2 and all(p[i] >= p[i + 1] for i in range(k - 1)) and p[-1] >= 0
                   for p in pts):
                children.append(pts)
    template = []
    for pts in children:
        verts = []
        bary_rows = []
        for p in pts:
            t = np.concatenate(([2], p, [0]))
            lam = t[:-1] - t[1:]  # weights of Kuhn vertices, sums to 2
            nz = [int(i) for i in np.flatnonzero(lam)]
            pair = (nz[0], nz[0]) if len(nz) == 1 else (nz[0], nz[1])
            verts.append(tuple(sorted(pair)))
            bary_rows.append(lam / 2)
        # barycentric determinant = orientation relative to the parent
        if np.linalg.det(np.array(bary_rows)) < 0:
            verts[0], verts[1] = verts[1], verts[0]
        template.append(tuple(verts))
    return template


def cross_polytope_facets(d: int) -> np.ndarray:
    """Positively oriented facets of the boundary of the d-dimensional cross-polytope."""
    facets = []
    for signs in itertools.product((1, -1), repeat=d):
        verts = [s * np.eye(d)[i] for i, s in enumerate(signs)]
        if np.prod(signs) < 0:
            verts[0], verts[1] = verts[1], verts[0]
        facets.append(verts)
    return np.array(facets, dtype=float)


def _subdivide(simplices: np.ndarray, template) -> np.ndarray:
    n, kp1, d = simplices.shape
    out = np.empty((n, len(template), kp1, d))
    for c, child in enumerate(template):
        for v, (i, j) in enumerate(child):
            out[:, c, v] = simplices[:, i] if i == j else 0.5 * (simplices[:, i] + simplices[:, j])
    return out.reshape(n * len(template), kp1, d)


def _images(f: RealMap, simplices: np.ndarray, radius: float) -> np.ndarray:
    n, kp1, d = simplices.shape
    flat = simplices.reshape(-1, d)
    uniq, inv = np.unique(flat, axis=0, return_inverse=True)
    pts = radius * uniq / np.linalg.norm(uniq, axis=1, keepdims=True)
    vals = f.value(pts)
    mags = np.linalg.norm(vals, axis=1)
    if np.any(mags < ZERO_TOL):
        raise ZeroOnSphere("germ vanishes at a sample point of the sphere")
    u = vals / mags[:, None]
    return u[inv.reshape(-1)].reshape(n, kp1, d)


def _signed_cover(images: np.ndarray, target: np.ndarray) -> int:
    """Signed number of image simplices whose cone contains ``target``."""
    if len(images) == 0:
        return 0
    cols = np.transpose(images, (0, 2, 1))
    det = np.linalg.det(cols)
    ok = np.abs(det) > 1e-300
    lam = np.zeros((len(images), images.shape[1]))
    lam[ok] = np.linalg.solve(cols[ok], np.broadcast_to(target, (ok.sum(), target.size))[..., None])[..., 0]
    cover = ok & np.all(lam > 0, axis=1)
    return int(np.sum(np.sign(det[cover])))


def _keep(images: np.ndarray, target: np.ndarray, margin: float = 0.05) -> np.ndarray:
    """Mask of simplices whose image cap may still reach ``target``."""
    center = images.sum(axis=1)
    center /= np.maximum(np.linalg.norm(center, axis=1, keepdims=True), 1e-300)
    cosines = np.clip(np.einsum("nvd,nd->nv", images, center), -1, 1)
    spread = np.arccos(cosines).max(axis=1)
    dist = np.arccos(np.clip(center @ target, -1, 1))
    return dist <= 2 * spread + margin


def degree_pl_sphere(req: DegreeRequest) -> DegreeResult:
    """Degree of ``g/|g|`` on the sphere of radius ``req.radius``.

    Refinement starts from the cross-polytope boundary; below the pruning
    level every simplex is kept, above it only simplices whose image cap can
    still reach the target direction are refined. Counting starts at
    ``req.depth`` and stops once two consecutive levels agree.
    """
    f = as_real_map(req.germ)
    _check_zero(f)
    d = f.dim
    if d < 2:
        raise UsageError("sphere degree needs d >= 2")
    rng = _rng(req.seed, 2)
    target = _unit_vectors(rng, 1, d)[0]
    template = _freudenthal_template(d - 1)
    branching = len(template)
    simplices = cross_polytope_facets(d)
    prune_from = 0
    while len(simplices) * branching ** (prune_from + 1) <= 120_000:
        prune_from += 1

    counts: dict[int, int] = {}
    sizes: dict[int, int] = {}
    level = 0
    previous = None
    while True:
        images = _images(f, simplices, req.radius)
        if level >= prune_from:
            mask = _keep(images, target)
            simplices, images = simplices[mask], images[mask]
        sizes[level] = len(simplices)
        if level >= req.depth:
            counts[level] = _signed_cover(images, target)
            if previous is not None and counts[level] == previous:
                return DegreeResult(counts[level], "pl", {
                    "levels": counts, "simplices_kept": sizes, "target": target.tolist(),
                    "prune_from": prune_from})
            previous = counts[level]
        if level >= req.max_depth:
            raise NoStabilization(f"PL degree did not stabilise by depth {req.max_depth}: {counts}")
        simplices = _subdivide(simplices, template)
        level += 1


# ---------------------------------------------------------------------------
# holomorphic shortcut


def _monomial_degree(germ: WirtingerGerm) -> int | None:
    """Degree for germs complex-linearly equivalent to (z_s1^n1, ..., z_sp^np)."""
    p = germ.p
    polys = [polynomial_monomials(e, p) for e in germ.components]
    if any(poly is None for poly in polys):
        return None
    monos = sorted({m for poly in polys for m in poly})
    if len(monos) != p:
        return None
    var_of = []
    for m in monos:
        nz = [i for i, k in enumerate(m) if k]
        if len(nz) != 1 or nz[0] >= p:
            return None
        var_of.append(nz[0])
    if len(set(var_of)) != p:
        return None
    coeffs = np.array([[poly.get(m, 0) for m in monos] for poly in polys])
    if abs(np.linalg.det(coeffs)) < 1e-12:
        return None
    return int(np.prod([m[i] for m, i in zip(monos, var_of)]))


def degree_holomorphic(germ: WirtingerGerm, radius: float = 0.5, seed: int = 0,
                       seeds: int | None = None) -> DegreeResult:
    """Degree of a holomorphic germ: every preimage counts +1."""
    if not isinstance(germ, WirtingerGerm):
        raise NotHolomorphic("holomorphic engine needs a Wirtinger germ")
    if not germ.is_holomorphic():
        raise NotHolomorphic("germ depends on conjugate variables")
    local = germ.local()
    shifted = WirtingerGerm(tuple(e - complex(v) for e, v in
                                  zip(local.components, local.evaluate(np.zeros(local.p)))), local.p)
    deg = _monomial_degree(shifted)
    if deg is not None:
        return DegreeResult(deg, "holomorphic", {"method": "monomial"})
    f = as_real_map(germ)
    _check_zero(f)
    rng = _rng(seed, 3)
    smax, _ = sphere_scale(f, radius, rng)
    eps = 1e-3 * smax * _unit_vectors(rng, 1, f.dim)[0]
    roots, used = find_preimages(f, eps, radius, seeds or 4**f.dim, rng)
    if not roots:
        raise NoConvergence("Newton did not converge from any seed")
    return DegreeResult(len(roots), "holomorphic", {"method": "preimage-count", "seeds_used": used})


def degree_consensus(req: DegreeRequest) -> DegreeResult:
    """Run every applicable engine; any disagreement raises."""
    results = {
        "preimage": degree_preimage(req),
        "pl": degree_pl_sphere(req),
    }
    g = req.germ
    if isinstance(g, WirtingerGerm) and g.is_holomorphic():
        results["holomorphic"] = degree_holomorphic(g, req.radius, req.seed, req.seeds)
    values = {r.degree for r in results.values()}
    if len(values) != 1:
        raise EngineDisagreement(results)
    return DegreeResult(values.pop(), "consensus",
                        {name: r.to_dict() for name, r in results.items()}, "consensus")


ENGINES = {
    "preimage": degree_preimage,
    "pl": degree_pl_sphere,
    "consensus": degree_consensus,
}


def compute_degree(req: DegreeRequest) -> DegreeResult:
    if req.engine == "holo":
        return degree_holomorphic(req.germ, req.radius, req.seed, req.seeds)
    try:
        engine = ENGINES[req.engine]
    except KeyError:
        raise UsageError(f"unknown engine {req.engine!r}") from None
    return engine(req)
