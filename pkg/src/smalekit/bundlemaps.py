"""Two-chart disk bundles E(xi_k) over S^2 and fibered maps between them.

A point of E(xi_k) lives in the south chart D_S x D or the north chart
D_N x D (closed unit bidisks). Boundary points are glued by

    psi_k(e^{it}, z) = (e^{-it}, e^{-ikt} z),

which is its own inverse, so the same rule serves both directions.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from ._parallel import worker_count
from .degree import newton
from .errors import (
    EpsilonOutOfRange, NonFiberedMap, NonIsolatedLocus, NotOnBoundary, Unsupported, UsageError,
)
from .rank2 import index_result
from .wirtinger import Const, WirtingerGerm, add, diff, mul, rank_at, to_complex, z, zbar

BOUNDARY_TOL = 1e-12
LOCUS_CLUSTER = 1e-7
CUSP_MIN_C = 1e-3
INDEX_RADIUS = 0.5
DEFAULT_EPS = 0.1

SOUTH, NORTH = "S", "N"


@dataclass(frozen=True)
class DiskBundle:
    """E(xi_k): Euler number k, charts D_S x D and D_N x D."""

    k: int

    def clutch(self, direction: str, point) -> tuple[complex, complex]:
        return clutch(self.k, direction, point)


def _clutch_arrays(k: int, w: np.ndarray, zz: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    wb = np.conj(w)
    return wb, wb**k * zz


def clutch(k: int, direction: str, point) -> tuple[complex, complex]:
    """Identify a boundary point of one chart with a point of the other."""
    if direction not in ("S->N", "N->S"):
        raise UsageError(f"direction must be 'S->N' or 'N->S', got {direction!r}")
    w, zz = (complex(c) for c in point)
    if abs(abs(w) - 1) > BOUNDARY_TOL:
        raise NotOnBoundary(f"|w| = {abs(w)!r} is not 1")
    w2, z2 = _clutch_arrays(k, np.array([w]), np.array([zz]))
    return complex(w2[0]), complex(z2[0])


@dataclass(frozen=True, eq=False)
class BundleMap:
    """A map E(xi_source) -> E(xi_target) given chartwise as (w, K(w, z))."""

    source: DiskBundle
    target: DiskBundle
    south: WirtingerGerm
    north: WirtingerGerm
    label: str = ""

    def chart(self, name: str) -> WirtingerGerm:
        return self.south if name == SOUTH else self.north

    def charts(self) -> tuple[tuple[str, WirtingerGerm], ...]:
        return ((SOUTH, self.south), (NORTH, self.north))


def fibered(k_expr) -> WirtingerGerm:
    return WirtingerGerm.from_components([z(1), k_expr], p=2)


def pi_eps(k: int, eps: float = DEFAULT_EPS) -> BundleMap:
    """(w, (1-eps) z^k + eps w conj z) south, (w, (1-eps) z^k + eps w^k conj z) north."""
    if k < 1:
        raise UsageError("k must be at least 1")
    eps = float(eps)
    if not 0 <= eps < 1:
        raise EpsilonOutOfRange(f"eps must lie in [0, 1), got {eps}")
    w, zz = z(1), z(2)
    lead = mul(Const(1 - eps), zz**k)
    south = fibered(add(lead, mul(Const(eps), w, zbar(2))))
    north = fibered(add(lead, mul(Const(eps), w**k, zbar(2))))
    return BundleMap(DiskBundle(1), DiskBundle(k), south, north, f"pi_eps(k={k}, eps={eps})")


def pi_k(k: int) -> BundleMap:
    return pi_eps(k, 0.0)


# ---------------------------------------------------------------------------
# checks


def _boundary_samples(n: int, rng) -> tuple[np.ndarray, np.ndarray]:
    w = np.exp(1j * rng.uniform(0, 2 * np.pi, n))
    zz = np.sqrt(rng.uniform(0, 1, n)) * np.exp(1j * rng.uniform(0, 2 * np.pi, n))
    return w, zz


@dataclass
class TransitionReport:
    residual: float
    samples: int
    tol: float

    @property
    def passed(self) -> bool:
        return self.residual < self.tol

    def to_dict(self) -> dict:
        return {"residual": self.residual, "samples": self.samples, "tol": self.tol, "passed": self.passed}


def transition_check(bmap: BundleMap, samples: int = 200, tol: float = 1e-10, seed: int = 0) -> TransitionReport:
    """Max discrepancy between map-then-clutch and clutch-then-map, both directions."""
    rng = np.random.default_rng([seed, 21])
    ks, kt = bmap.source.k, bmap.target.k
    worst = 0.0
    for start, other in ((bmap.south, bmap.north), (bmap.north, bmap.south)):
        w, zz = _boundary_samples(samples, rng)
        img = start.values(np.stack([w, zz], axis=1))
        lhs = np.stack(_clutch_arrays(kt, img[:, 0], img[:, 1]), axis=1)
        rhs = other.values(np.stack(_clutch_arrays(ks, w, zz), axis=1))
        worst = max(worst, float(np.max(np.abs(lhs - rhs))))
    return TransitionReport(worst, 2 * samples, tol)


def containment_max(bmap: BundleMap, grid: int = 50) -> float:
    """Largest |K| over a polar grid of the closed bidisk in both charts."""
    rad = np.linspace(0, 1, grid)
    ang = np.linspace(0, 2 * np.pi, grid, endpoint=False)
    disk = (rad[:, None] * np.exp(1j * ang)[None, :]).ravel()
    pts = np.stack(np.meshgrid(disk, disk, indexing="ij"), axis=-1).reshape(-1, 2)
    return max(float(np.max(np.abs(g.values(pts)[:, 1]))) for g in (bmap.south, bmap.north))


# ---------------------------------------------------------------------------
# fiber maps h_c(z) = z^k + c conj z


@dataclass
class FiberAnalysis:
    k: int
    c: complex
    radius: float
    closed_form_radius: float
    cusp_count: int | None
    circle_ranks: list = field(default_factory=list)
    off_circle_ranks: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "k": self.k, "c": [self.c.real, self.c.imag], "radius": self.radius,
            "closed_form_radius": self.closed_form_radius, "cusp_count": self.cusp_count,
            "circle_ranks": self.circle_ranks, "off_circle_ranks": self.off_circle_ranks,
        }


def h_c(k: int, c: complex) -> WirtingerGerm:
    return WirtingerGerm.from_components([add(z(1) ** k, mul(Const(c), zbar(1)))], p=1)


def _real_rank(jac: np.ndarray, rel: float = 1e-8) -> int:
    s = np.linalg.svd(jac, compute_uv=False)
    if s[0] == 0:
        return 0
    return int(np.sum(s > rel * s[0]))


def singular_radius(germ: WirtingerGerm, guess: float, angle: float = 0.3) -> float:
    """Root of det dh along a ray, bracketed around ``guess``."""
    ray = np.exp(1j * angle)

    def det(r):
        return float(np.linalg.det(germ.real_jacobians(np.array([[r * ray]]))[0]))

    lo, hi = 0.5 * guess, 2.0 * guess
    return brentq(det, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)


def count_cusps(germ: WirtingerGerm, radius: float, samples: int = 4096) -> int:
    """Simple tangencies of the kernel line field with the circle |z| = radius.

    With xi spanning the kernel and tau = i z the circle tangent,
    q = (xi/|xi|)^2 / (tau/|tau|)^2 equals 1 exactly at tangencies; each
    simple tangency is a sign change of Im q on the arc where Re q > 0.
    """
    theta = (np.arange(samples) + 0.5) * (2 * np.pi / samples)
    pts = radius * np.exp(1j * theta)
    _, _, vt = np.linalg.svd(germ.real_jacobians(pts[:, None]))
    ker = vt[:, -1, 0] + 1j * vt[:, -1, 1]
    tau = 1j * pts
    q = (ker / np.abs(ker)) ** 2 / (tau / np.abs(tau)) ** 2
    im = np.sign(q.imag)
    nxt = np.roll(np.arange(samples), -1)
    crossing = (im != im[nxt]) & (q.real > 0) & (q[nxt].real > 0)
    return int(np.sum(crossing))


def h_c_analysis(k: int, c: complex, samples: int = 20) -> FiberAnalysis:
    if k < 2:
        raise UsageError("h_c analysis needs k >= 2")
    c = complex(c)
    germ = h_c(k, c)
    if c == 0:
        rank0 = _real_rank(germ.real_jacobians(np.zeros((1, 1)))[0])
        return FiberAnalysis(k, c, 0.0, 0.0, None, [rank0], [])
    if abs(c) < CUSP_MIN_C:
        raise Unsupported(f"cusp counting needs |c| >= {CUSP_MIN_C}")
    closed = (abs(c) / k) ** (1 / (k - 1))
    radius = singular_radius(germ, closed)
    theta = np.linspace(0, 2 * np.pi, samples, endpoint=False)
    on = radius * np.exp(1j * theta)
    circle_ranks = [_real_rank(j) for j in germ.real_jacobians(on[:, None])]
    off = np.concatenate([0.5 * on, 1.5 * on])
    off_ranks = [_real_rank(j) for j in germ.real_jacobians(off[:, None])]
    return FiberAnalysis(k, c, radius, closed, count_cusps(germ, radius), circle_ranks, off_ranks)


# ---------------------------------------------------------------------------
# rank-2 locus


@dataclass
class RankTwoPoint:
    chart: str
    location: tuple[complex, complex]
    index: int
    diagnostics: dict = field(default_factory=dict, repr=False)

    def to_dict(self) -> dict:
        return {
            "chart": self.chart,
            "location": [[c.real, c.imag] for c in self.location],
            "index": self.index,
            "diagnostics": self.diagnostics,
        }


def _fiber_part(germ: WirtingerGerm, rng) -> object:
    probe = rng.uniform(-0.7, 0.7, (16, 4))
    pts = to_complex(probe)
    if np.max(np.abs(germ.values(pts)[:, 0] - pts[:, 0])) > 1e-12:
        raise NonFiberedMap("first component is not the base coordinate w")
    return germ.components[1]


def _grid(per_axis: int = 5) -> np.ndarray:
    ax = np.linspace(-0.9, 0.9, per_axis)
    g = np.stack(np.meshgrid(ax, ax, ax, ax, indexing="ij"), axis=-1).reshape(-1, 4)
    return g[(np.hypot(g[:, 0], g[:, 1]) <= 1) & (np.hypot(g[:, 2], g[:, 3]) <= 1)]


def _dedupe(points: np.ndarray) -> list[np.ndarray]:
    reps: list[np.ndarray] = []
    for p in points:
        if all(np.linalg.norm(p - r) > LOCUS_CLUSTER for r in reps):
            reps.append(p)
    return reps


def chart_rank2_points(germ: WirtingerGerm, chart: str, seed: int = 0,
                       max_points: int = 16) -> list[np.ndarray]:
    """Real (4,) solutions of K_z = K_zbar = 0 inside the chart bidisk."""
    rng = np.random.default_rng([seed, 31])
    k_expr = _fiber_part(germ, rng)
    system = WirtingerGerm.from_components([diff(k_expr, 1, False), diff(k_expr, 1, True)], p=2)
    f = system.as_real_map()
    seeds = _grid()
    x, res, _ = newton(f, seeds, np.zeros(4), radius=1.5, max_iter=400, tol=1e-13, det_rel=0.0)
    ok = np.all(np.isfinite(x), axis=1) & (res < 1e-11)
    w_abs, z_abs = np.hypot(x[:, 0], x[:, 1]), np.hypot(x[:, 2], x[:, 3])
    ok &= (w_abs <= 1 + 1e-9) & (z_abs <= 1 + 1e-9)
    if chart == NORTH:
        ok &= w_abs < 1 - 1e-9  # overlap points belong to the south chart
    sols = _dedupe(x[ok])
    if len(sols) > max_points:
        raise NonIsolatedLocus(f"{len(sols)} distinct rank-2 solutions in chart {chart}")
    for a, b in zip(sols, sols[1:]):
        mid = 0.5 * (a + b)
        if np.linalg.norm(f.value(mid[None, :])[0]) < 1e-11:
            raise NonIsolatedLocus(f"rank-2 solutions in chart {chart} are joined by a curve")
    return sols


def rank2_locus(bmap: BundleMap, radius: float = INDEX_RADIUS, seed: int = 0) -> list[RankTwoPoint]:
    found = [(name, germ, p) for name, germ in bmap.charts()
             for p in chart_rank2_points(germ, name, seed)]

    def one(item):
        name, germ, p = item
        loc = tuple(complex(c) for c in to_complex(p))
        centred = germ.recentered(loc)
        if rank_at(germ, np.array(loc)) != 2:
            raise NonIsolatedLocus(f"solution at {loc} in chart {name} is not a rank-2 point")
        res = index_result(centred, radius, seed=seed)
        return RankTwoPoint(name, loc, res.index, res.to_dict())

    with ThreadPoolExecutor(max_workers=worker_count()) as pool:
        return list(pool.map(one, found))


def sharp_sigma2(bmap: BundleMap, radius: float = INDEX_RADIUS, seed: int = 0) -> int:
    return sum(p.index for p in rank2_locus(bmap, radius, seed))


def export_germs(bmap: BundleMap) -> dict[str, str]:
    """Germ-file text for each chart map, centred at the chart origin."""
    return {name: germ.to_text() for name, germ in bmap.charts()}
