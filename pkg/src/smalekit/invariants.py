"""Integer invariants of immersions S^3 -> R^4.

Smale invariants live in pi_3(SO_4) = Z[sigma] + Z[rho]; an immersion is
described by its normal degree D and Hirzebruch defect H, and its image in
the stable 3-stem Z_24 = Z_8 + Z_3 by -(H + 3 mu)/2. Everything here is
exact integer arithmetic.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

from .errors import NotDivisible, OddH, ParityError, UsageError

STEM_ORDER = 24


@dataclass(frozen=True)
class SmaleInvariant:
    a: int  # coefficient of [sigma]
    b: int  # coefficient of [rho]

    def as_tuple(self) -> tuple[int, int]:
        return (self.a, self.b)


@dataclass(frozen=True)
class SeifertData:
    chi: int
    sigma: int
    sharp_sigma2: int = 0


@dataclass(frozen=True)
class FramingData:
    D: int
    H: int
    mu: int = 0

    def __post_init__(self):
        if (self.H + 2 * self.D - 2) % 4:
            raise NotDivisible(f"H + 2D - 2 = {self.H + 2 * self.D - 2} is not divisible by 4")
        object.__setattr__(self, "mu", self.mu % 16)


@dataclass(frozen=True)
class StemClass:
    value: int
    z8_part: int
    z3_part: int

    @classmethod
    def from_value(cls, value: int) -> StemClass:
        v = value % STEM_ORDER
        return cls(v, v % 8, v % 3)

    def __post_init__(self):
        if self.value % 8 != self.z8_part or self.value % 3 != self.z3_part:
            raise ValueError("stem class parts disagree with its value")


def _exact_div4(num: int, what: str) -> int:
    if num % 4:
        raise NotDivisible(f"{what} = {num} is not divisible by 4")
    return num // 4


def smale_from_filling(chi: int, sigma: int) -> SmaleInvariant:
    """Invariant of the boundary of an immersed filling V with chi(V), sigma(V)."""
    return SmaleInvariant(chi - 1, _exact_div4(3 * sigma - 2 * chi + 2, "3 sigma - 2 chi + 2"))


def hirzebruch_from_seifert(data: SeifertData) -> int:
    return -3 * data.sigma - data.sharp_sigma2


def smale_from_DH(D: int, H: int) -> SmaleInvariant:  # noqa: N802
    return SmaleInvariant(D - 1, _exact_div4(-H - 2 * (D - 1), "-H - 2(D - 1)"))


def stabilize(s: SmaleInvariant) -> int:
    """Image in pi_3(SO_5) = Z under (a, b) -> a + 2b."""
    return s.a + 2 * s.b


def smale5_from_H(H: int) -> int:  # noqa: N802
    if H % 2:
        raise OddH(f"H = {H} is odd")
    return -H // 2


def stem_class(H: int, mu: int = 0) -> StemClass:  # noqa: N803
    total = H + 3 * mu
    if total % 2:
        raise ParityError(f"H + 3 mu = {total} is odd")
    return StemClass.from_value(-total // 2)


def is_generator(c: StemClass) -> bool:
    return math.gcd(c.value, STEM_ORDER) == 1


def normal_degree_gn(n: int) -> int:
    """chi(E(xi_{2n})) = 2 times the covering degree 2n."""
    return 2 * (2 * n)


@dataclass
class GnReport:
    n: int
    eps: float
    D: int
    sharp_sigma2: int
    sigma: int
    H: int
    omega: SmaleInvariant
    stabilized: int
    stem: StemClass
    generator: bool
    sharp_sigma2_source: str

    def to_dict(self) -> dict:
        out = asdict(self)
        out["omega"] = list(self.omega.as_tuple())
        return out


def omega_gn(n: int, eps: float = 0.1, formula: bool = False, seed: int = 0) -> GnReport:
    """The full invariant pipeline for g_n: S^3 -> L(2n, 1) -> R^4."""
    if n < 1:
        raise UsageError("n must be at least 1")
    if formula:
        sharp, source = 4 * n * n - 1, "closed-form"
    else:
        from .bundlemaps import pi_eps, sharp_sigma2
        sharp, source = sharp_sigma2(pi_eps(2 * n, eps), seed=seed), "computed"
    D = normal_degree_gn(n)  # noqa: N806
    H = hirzebruch_from_seifert(SeifertData(chi=2, sigma=1, sharp_sigma2=sharp))  # noqa: N806
    omega = smale_from_DH(D, H)
    stab = stabilize(omega)
    if stab != smale5_from_H(H):
        raise AssertionError("stabilized invariant disagrees with -H/2")
    FramingData(D, H)
    stem = stem_class(H)
    return GnReport(n, eps, D, sharp, 1, H, omega, stab, stem, is_generator(stem), source)
