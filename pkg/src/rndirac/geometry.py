"""Reissner-Nordstrom background: horizons, Delta, and the tortoise coordinate.

Both regularity regions use the same orientation du/dr = r^2 / Delta, so that
u -> -inf at the event horizon (from either side) and u -> +inf at the Cauchy
horizon (interior) or at spatial infinity (exterior).  The additive constant
is fixed per region by u(r0) = r0 with r0 = 2 r+ (exterior) and
r0 = (r+ + r-)/2 (interior).

Near the horizons r itself carries too little information (r - r+ can be far
below the spacing of doubles around r+), so the inversion works in a log
offset variable and :func:`offsets_from_tortoise` hands back the offsets to
both horizons directly.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

from scipy.optimize import brentq


class ExtremalError(ValueError):
    """Raised for |Q| >= M, where the two horizons merge or disappear."""


class Region(enum.Enum):
    EXTERIOR = "exterior"
    INTERIOR = "interior"

    @property
    def eps(self) -> int:
        """Sign of Delta inside the region."""
        return 1 if self is Region.EXTERIOR else -1


def horizons(M: float, Q: float) -> tuple[float, float]:
    if not M > 0:
        raise ValueError(f"mass must be positive, got M={M}")
    if abs(Q) >= M:
        raise ExtremalError(f"|Q|={abs(Q)} >= M={M}: extremal or naked singularity")
    root = math.sqrt((M - Q) * (M + Q))
    r_plus = M + root
    # Vieta form avoids cancellation in M - root for small Q
    r_minus = Q * Q / r_plus
    return r_plus, r_minus


@dataclass(frozen=True)
class BlackHole:
    M: float = 1.0
    Q: float = 0.0
    r_plus: float = field(init=False)
    r_minus: float = field(init=False)

    def __post_init__(self):
        rp, rm = horizons(self.M, self.Q)
        object.__setattr__(self, "r_plus", rp)
        object.__setattr__(self, "r_minus", rm)

    @property
    def width(self) -> float:
        return self.r_plus - self.r_minus

    @property
    def kappa_plus(self) -> float:
        """Surface gravity of the event horizon, Delta'(r+) / (2 r+^2)."""
        return self.width / (2.0 * self.r_plus**2)

    @property
    def kappa_minus(self) -> float:
        return self.width / (2.0 * self.r_minus**2)

    def delta(self, r):
        return (r - self.r_plus) * (r - self.r_minus)

    def eps(self, r) -> int:
        d = self.delta(r)
        return 1 if d > 0 else (-1 if d < 0 else 0)

    def region_of(self, r: float) -> Region:
        if r > self.r_plus:
            return Region.EXTERIOR
        if self.r_minus < r < self.r_plus:
            return Region.INTERIOR
        raise ValueError(f"r={r} is on a horizon or inside r-={self.r_minus}")

    def has_cauchy_horizon(self) -> bool:
        return self.r_minus > 0.0


def _coefficients(bh: BlackHole) -> tuple[float, float]:
    return bh.r_plus**2 / bh.width, bh.r_minus**2 / bh.width


def _raw_tortoise(bh: BlackHole, r: float, dp: float, dm: float) -> float:
    """r + A ln|r - r+| - B ln|r - r-| from precomputed offsets."""
    A, B = _coefficients(bh)
    val = r + A * math.log(abs(dp))
    if B:
        val -= B * math.log(abs(dm))
    return val


def _reference_radius(bh: BlackHole, region: Region) -> float:
    if region is Region.EXTERIOR:
        return 2.0 * bh.r_plus
    return 0.5 * (bh.r_plus + bh.r_minus)


def _region_constant(bh: BlackHole, region: Region) -> float:
    r0 = _reference_radius(bh, region)
    return r0 - _raw_tortoise(bh, r0, r0 - bh.r_plus, r0 - bh.r_minus)


def _check_inside(bh: BlackHole, r: float, region: Region):
    if region is Region.EXTERIOR:
        ok = r > bh.r_plus
    else:
        ok = bh.r_minus < r < bh.r_plus
        if not bh.has_cauchy_horizon():
            raise ValueError("interior region needs Q != 0 (no Cauchy horizon otherwise)")
    if not ok:
        raise ValueError(f"r={r} is not strictly inside the {region.value} region")


def tortoise(bh: BlackHole, r: float, region: Region) -> float:
    _check_inside(bh, r, region)
    return _raw_tortoise(bh, r, r - bh.r_plus, r - bh.r_minus) + _region_constant(bh, region)


def tortoise_from_offset(bh: BlackHole, x: float, region: Region) -> float:
    """Tortoise coordinate at signed offset x = r - r+ (x < 0 for interior).

    Keeps full relative precision in x, which plain ``tortoise`` loses once
    |x| drops below ~1e-16 r+.
    """
    r = bh.r_plus + x
    return _raw_tortoise(bh, r, x, bh.width + x) + _region_constant(bh, region)


def tortoise_from_cauchy_offset(bh: BlackHole, y: float) -> float:
    """Interior tortoise coordinate at offset y = r - r- > 0."""
    r = bh.r_minus + y
    return _raw_tortoise(bh, r, y - bh.width, y) + _region_constant(bh, Region.INTERIOR)


def dtortoise_dr(bh: BlackHole, r: float) -> float:
    return r * r / bh.delta(r)


# --- inversion -----------------------------------------------------------------
#
# Exterior: t = ln(r - r+) is a monotone increasing chart of (r+, inf).
# Interior: z = ln((r - r-) / (r+ - r)) is a monotone chart of (r-, r+).


def _softplus(x: float) -> float:
    return max(x, 0.0) + math.log1p(math.exp(-abs(x)))


def exterior_chart(bh: BlackHole, t: float) -> tuple[float, float, float]:
    """(r, r - r+, r - r-) for exterior log offset t."""
    x = math.exp(t)
    return bh.r_plus + x, x, bh.width + x


def interior_chart(bh: BlackHole, z: float) -> tuple[float, float, float]:
    """(r, r - r+, r - r-) for interior logit z."""
    L = bh.width
    dm = L * math.exp(-_softplus(-z))  # L * sigmoid(z)
    dp = -L * math.exp(-_softplus(z))  # -L * sigmoid(-z)
    r = bh.r_minus + dm if z < 0 else bh.r_plus + dp
    return r, dp, dm


def _u_of_chart(bh: BlackHole, s: float, region: Region) -> float:
    if region is Region.EXTERIOR:
        r, dp, dm = exterior_chart(bh, s)
        A, B = _coefficients(bh)
        # ln|dp| = t exactly
        val = r + A * s - (B * math.log(dm) if B else 0.0)
        return val + _region_constant(bh, region)
    r, dp, dm = interior_chart(bh, s)
    A, B = _coefficients(bh)
    val = r - A * _softplus(s) + A * math.log(bh.width)
    val -= B * (math.log(bh.width) - _softplus(-s))
    return val + _region_constant(bh, region)


def chart_from_tortoise(bh: BlackHole, u: float, region: Region, maxiter: int = 200) -> float:
    """Chart coordinate (t for exterior, z for interior) with u(chart) = u."""
    if region is Region.INTERIOR and not bh.has_cauchy_horizon():
        raise ValueError("interior region needs Q != 0")
    # u is increasing in t (exterior) and decreasing in z (interior)
    sign = 1.0 if region is Region.EXTERIOR else -1.0

    def g(s):
        return sign * (_u_of_chart(bh, s, region) - u)

    lo, hi = -1.0, 1.0
    step = 1.0
    while g(lo) > 0:
        step *= 2.0
        lo -= step
        if step > 1e6:
            raise RuntimeError(f"no bracket for u={u} ({region.value})")
    step = 1.0
    while g(hi) < 0:
        step *= 2.0
        hi += step
        if region is Region.EXTERIOR and hi > 700:
            raise RuntimeError(f"u={u} too large to invert")
        if step > 1e6:
            raise RuntimeError(f"no bracket for u={u} ({region.value})")
    try:
        return brentq(g, lo, hi, xtol=1e-15, rtol=8.9e-16, maxiter=maxiter)
    except RuntimeError as exc:  # pragma: no cover - brentq raises on maxiter
        raise RuntimeError(f"tortoise inversion did not converge for u={u}") from exc


def offsets_from_tortoise(bh: BlackHole, u: float, region: Region) -> tuple[float, float, float]:
    """(r, r - r+, r - r-) at tortoise coordinate u, offsets to full precision."""
    s = chart_from_tortoise(bh, u, region)
    if region is Region.EXTERIOR:
        return exterior_chart(bh, s)
    return interior_chart(bh, s)


def radius_from_tortoise(bh: BlackHole, u: float, region: Region) -> float:
    return offsets_from_tortoise(bh, u, region)[0]
