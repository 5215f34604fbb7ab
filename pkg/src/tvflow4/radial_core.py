"""Radial Cahn-Hoffman profiles z(r) solving the third-order calibration ODE.

A radial field Z(x) = z(|x|) x/|x| with -Laplace(div Z) = lam constant has

    z(r) = c0 r^3 + c1 r^(3-n) + c2 r + c3 r^(1-n)        (n != 2)
    z(r) = c0 r^3 + c1 r log r  + c2 r + c3 r^(-1)        (n == 2)

and lam = -2n(n+2) c0 (lam = -16 c0 when n == 2).  Everything here is
evaluated from these monomials directly; no numerical differentiation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DomainError, SingularityError

POWER = "power"
LOG = "log"


def check_dimension(n: int) -> int:
    if isinstance(n, bool) or int(n) != n or n < 1:
        raise DomainError(f"dimension must be a positive integer, got {n!r}")
    return int(n)


def basis_exponents(n: int) -> tuple[float, float, float, float]:
    """Exponents of the power basis; index 1 is r log r when n == 2."""
    return (3.0, 3.0 - n, 1.0, 1.0 - n)


def lambda_from_c0(n: int, c0: float) -> float:
    return -2.0 * n * (n + 2) * c0


def c0_from_lambda(n: int, lam: float) -> float:
    return -lam / (2.0 * n * (n + 2))


@dataclass(frozen=True)
class RadialProfile:
    """Coefficients of z over the solution basis, restricted to [r_min, r_max].

    ``r_max`` may be ``math.inf`` (complements of balls).  When ``r_min`` is 0
    the singular coefficients c1 and c3 must vanish.
    """

    n: int
    coeffs: tuple[float, float, float, float]
    r_min: float = 0.0
    r_max: float = math.inf

    def __post_init__(self):
        object.__setattr__(self, "n", check_dimension(self.n))
        c = tuple(float(v) for v in self.coeffs)
        if len(c) != 4:
            raise DomainError("a radial profile has exactly four coefficients")
        object.__setattr__(self, "coeffs", c)
        if not (0.0 <= self.r_min < self.r_max):
            raise DomainError(f"invalid profile domain [{self.r_min}, {self.r_max}]")
        if self.r_min == 0.0 and (c[1] != 0.0 or c[3] != 0.0):
            raise SingularityError("profile touching the origin needs c1 = c3 = 0")

    @property
    def basis(self) -> str:
        return LOG if self.n == 2 else POWER

    @property
    def lam(self) -> float:
        return lambda_from_c0(self.n, self.coeffs[0])

    def scaled(self, factor: float) -> "RadialProfile":
        return RadialProfile(self.n, tuple(factor * c for c in self.coeffs), self.r_min, self.r_max)

    def __call__(self, r):
        return evaluate(self, r).z


@dataclass(frozen=True)
class FieldSample:
    r: float
    z: float
    z_prime: float
    z_second: float
    z_third: float
    div_value: float
    grad_div_value: float


def _monomial_derivs(p: float, c: float, r):
    """c r^p and its first three derivatives."""
    if c == 0.0:
        zero = np.zeros_like(r)
        return zero, zero, zero, zero
    return (
        c * r**p,
        c * p * r ** (p - 1),
        c * p * (p - 1) * r ** (p - 2),
        c * p * (p - 1) * (p - 2) * r ** (p - 3),
    )


def _rlogr_derivs(c: float, r):
    if c == 0.0:
        zero = np.zeros_like(r)
        return zero, zero, zero, zero
    lr = np.log(r)
    return c * r * lr, c * (lr + 1.0), c / r, -c / r**2


def derivatives(profile: RadialProfile, r):
    """Return (z, z', z'', z''') at r > 0 (scalar or array).

    np.longdouble input stays in extended precision.
    """
    r = np.asarray(r)
    if r.dtype.kind != "f":
        r = r.astype(float)
    n = profile.n
    c0, c1, c2, c3 = profile.coeffs
    exps = basis_exponents(n)
    parts = [_monomial_derivs(exps[0], c0, r)]
    parts.append(_rlogr_derivs(c1, r) if n == 2 else _monomial_derivs(exps[1], c1, r))
    parts.append(_monomial_derivs(exps[2], c2, r))
    parts.append(_monomial_derivs(exps[3], c3, r))
    return tuple(sum(p[i] for p in parts) for i in range(4))


def rounding_bound(profile: RadialProfile, radii) -> float:
    """Bound on the float64 rounding error of z at the given radii.

    Thin domains need large cancelling coefficients, so z itself is only
    known to about eps * sum |c_i phi_i(r)|.
    """
    r = np.atleast_1d(np.asarray(radii, dtype=float))
    r = r[np.isfinite(r) & (r > 0)]
    if r.size == 0:
        return 0.0
    n = profile.n
    total = np.zeros_like(r)
    for i, (c, p) in enumerate(zip(profile.coeffs, basis_exponents(n))):
        if c == 0.0:
            continue
        if n == 2 and i == 1:
            total += abs(c) * r * (np.abs(np.log(r)) + 1.0)
        else:
            total += abs(c) * r**p
    return float(16 * np.finfo(float).eps * np.max(total))


def _check_radius(profile: RadialProfile, r) -> None:
    r = np.asarray(r, dtype=float)
    if np.any(~np.isfinite(r)) or np.any(r < 0):
        raise DomainError("radius must be finite and non-negative")
    tol = 1e-12 * max(1.0, profile.r_min)
    if np.any(r < profile.r_min - tol) or np.any(r > profile.r_max * (1 + 1e-12)):
        raise DomainError(f"radius outside profile domain [{profile.r_min}, {profile.r_max}]")
    if np.any(r == 0.0) and (profile.coeffs[1] != 0.0 or profile.coeffs[3] != 0.0):
        raise SingularityError("profile is singular at the origin")


def evaluate(profile: RadialProfile, r) -> FieldSample:
    """Evaluate z, its derivatives, div Z and d/dr div Z at radius r.

    Accepts scalars or arrays.  At r = 0 (regular profiles only) div Z and its
    gradient are the limits c2 n and 0.
    """
    _check_radius(profile, r)
    n = profile.n
    r_arr = np.asarray(r, dtype=float)
    safe = np.where(r_arr == 0.0, 1.0, r_arr)
    z, z1, z2, z3 = derivatives(profile, safe)
    div = z1 + (n - 1) * z / safe
    grad = z2 + (n - 1) * (z1 / safe - z / safe**2)
    if np.any(r_arr == 0.0):
        c0, _, c2, _ = profile.coeffs
        at0 = r_arr == 0.0
        z = np.where(at0, 0.0, z)
        z1 = np.where(at0, c2, z1)
        z2 = np.where(at0, 0.0, z2)
        z3 = np.where(at0, 6.0 * c0, z3)
        div = np.where(at0, n * c2, div)
        grad = np.where(at0, 0.0, grad)
    if r_arr.ndim == 0:
        return FieldSample(float(r_arr), float(z), float(z1), float(z2), float(z3), float(div), float(grad))
    return FieldSample(r_arr, z, z1, z2, z3, div, grad)


def _rz1_minus_z(profile: RadialProfile, r):
    """r z' - z term by term; the linear term drops out exactly."""
    c0, c1, _, c3 = profile.coeffs
    n = profile.n
    out = 2.0 * c0 * r**3 - n * c3 * r ** (1 - n)
    if n == 2:
        return out + c1 * r
    return out + (2 - n) * c1 * r ** (3 - n)


def ode_residual(profile: RadialProfile, r):
    """-r^(1-n) (r^(n-1) (r^(1-n) (r^(n-1) z)')')' - lam, from exact derivatives.

    Expanded as z''' + 2(n-1) z''/r + (n-1)(n-3) (r z' - z)/r^3 so the r^-3
    factor never multiplies a cancelling difference near the origin.
    """
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise DomainError("ode_residual needs r > 0")
    n = profile.n
    _, _, z2, z3 = derivatives(profile, r)
    w = _rz1_minus_z(profile, r)
    res = -(z3 + 2.0 * (n - 1) * z2 / r + (n - 1) * (n - 3) * w / r**3) - profile.lam
    return float(res) if res.ndim == 0 else res


# --- sup |z| ---------------------------------------------------------------

def _stationary_points(profile: RadialProfile, lo: float, hi: float) -> list[float]:
    """Zeros of z' in (lo, hi).

    For n != 2, r^n z'(r) = 3c0 r^(n+2) + (3-n)c1 r^2 + c2 r^n + (1-n)c3 is a
    polynomial.  For n == 2 sign changes of z' on a dense grid are refined with
    brentq.
    """
    n = profile.n
    c0, c1, c2, c3 = profile.coeffs
    pts: list[float] = []
    if n != 2:
        poly = np.zeros(n + 3)
        # poly[k] is the coefficient of r^k
        poly[n + 2] += 3 * c0
        poly[2] += (3 - n) * c1
        poly[n] += c2
        poly[0] += (1 - n) * c3
        poly = np.trim_zeros(poly, "b")
        if len(poly) > 1:
            for root in np.roots(poly[::-1]):
                if abs(root.imag) <= 1e-9 * max(1.0, abs(root.real)) and lo < root.real < hi:
                    pts.append(float(root.real))
        return pts
    from scipy.optimize import brentq

    top = hi if math.isfinite(hi) else 1e3 * max(lo, 1.0)
    grid = _grid(max(lo, 1e-12 * top), top, 4096)
    dz = derivatives(profile, grid)[1]
    for i in np.nonzero(np.sign(dz[:-1]) * np.sign(dz[1:]) < 0)[0]:
        pts.append(brentq(lambda s: float(derivatives(profile, s)[1]), grid[i], grid[i + 1], xtol=1e-14))
    return pts


def _grid(lo: float, hi: float, samples: int) -> np.ndarray:
    if lo <= 0.0:
        return np.linspace(0.0, hi, samples)
    return np.geomspace(lo, hi, samples)


def _escapes_at_infinity(profile: RadialProfile) -> bool:
    n = profile.n
    c0, c1, c2, _ = profile.coeffs
    exps = basis_exponents(n)
    growing = [c0 != 0.0, (c1 != 0.0) and (n == 2 or exps[1] > 0), c2 != 0.0]
    return any(growing)


def sup_abs_z(profile: RadialProfile, samples: int = 4096) -> tuple[float, float]:
    """Supremum of |z| over the profile domain and a radius where it is attained.

    Unbounded domains: if a growing basis term survives the sup is reported as
    ``inf`` at ``r = inf``.  Otherwise the profile is monotone past its last
    stationary point, so sampling up to 1e3 times the inner radius plus the
    limit value at infinity is enough.
    """
    lo, hi = profile.r_min, profile.r_max
    limit_val = None
    if not math.isfinite(hi):
        if _escapes_at_infinity(profile):
            return math.inf, math.inf
        # only r^(3-n) with n = 3 (the constant) or decaying terms remain
        limit_val = abs(profile.coeffs[1]) if profile.n == 3 else (abs(profile.coeffs[3]) if profile.n == 1 else 0.0)
        hi_s = 1e3 * max(lo, 1e-300)
    else:
        hi_s = hi
    cand = list(_grid(lo, hi_s, samples))
    cand += [p for p in _stationary_points(profile, lo, hi) if p <= hi_s]
    cand += [lo, hi_s]
    cand = np.asarray(cand)
    vals = np.abs(evaluate(profile, cand).z)
    i = int(np.argmax(vals))
    best, arg = float(vals[i]), float(cand[i])
    if limit_val is not None and limit_val > best:
        return limit_val, math.inf
    return best, arg


def inflection_radii(profile: RadialProfile, lo: float | None = None, hi: float | None = None) -> list[float]:
    """Radii in (lo, hi) where z'' changes sign.

    z''(r) = r^(-n-1) w(r) with w(r) = 6c0 r^(n+2) + (n-3)(n-2)c1 r^2 + n(n-1)c3
    (n != 2), and w(r) = 6c0 r^4 + c1 r^2 + 2c3 for n == 2; roots of w are
    found with numpy.roots and only odd-multiplicity crossings are kept.
    """
    n = profile.n
    c0, c1, c2, c3 = profile.coeffs
    lo = profile.r_min if lo is None else lo
    hi = profile.r_max if hi is None else hi
    if n == 2:
        w = {4: 6 * c0, 2: c1, 0: 2 * c3}
    else:
        w = {n + 2: 6 * c0, 2: (n - 3) * (n - 2) * c1, 0: n * (n - 1) * c3}
    deg = max(k for k, v in w.items() if v != 0.0) if any(v != 0.0 for v in w.values()) else 0
    if deg == 0:
        return []
    poly = np.zeros(deg + 1)
    for k, v in w.items():
        if k <= deg:
            poly[k] += v
    out = []
    for root in np.roots(poly[::-1]):
        x = root.real
        if abs(root.imag) <= 1e-9 * max(1.0, abs(x)) and lo < x < hi:
            h = 1e-7 * x
            a = float(derivatives(profile, x - h)[2])
            b = float(derivatives(profile, x + h)[2])
            if a * b < 0:
                out.append(float(x))
    return sorted(out)


def geometric_grid(profile: RadialProfile, points: int = 100, interior: bool = True) -> np.ndarray:
    """Log-spaced radii across the profile domain (unbounded ends cut at 1e3 r_min)."""
    lo = profile.r_min if profile.r_min > 0 else 1e-3 * (profile.r_max if math.isfinite(profile.r_max) else 1.0)
    hi = profile.r_max if math.isfinite(profile.r_max) else 1e3 * lo
    g = np.geomspace(lo, hi, points + 2 if interior else points)
    return g[1:-1] if interior else g


def sample(profile: RadialProfile, radii: Sequence[float]) -> np.ndarray:
    return np.asarray(evaluate(profile, np.asarray(radii, dtype=float)).z)
