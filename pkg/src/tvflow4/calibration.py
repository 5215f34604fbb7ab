"""Calibrations of generalized annuli and the calibrability verdicts.

Signature convention: ``chi`` is +1 on a boundary sphere where the function
is larger just outside the facet and -1 otherwise.  For radial fields the
boundary conditions nu.Z = chi, div Z = chi*kappa become

    z(R1) = chi_outer,   z(R0) = -chi_inner,   z'(R0) = z'(R1) = 0,

because the exterior normal points inward on the inner sphere.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np

from .errors import DomainError, RangeError, UnsupportedDomainError
from .radial_core import (
    RadialProfile,
    check_dimension,
    evaluate,
    inflection_radii,
    lambda_from_c0,
    rounding_bound,
    sup_abs_z,
)

MAX_DIMENSION = 10
SUP_TOL = 1e-10
BC_TOL = 1e-12
# dimensionless R0^2 z''(R0) threshold for the n = 2 constant-signature test
CURVATURE_TOL = 1e-9


class DomainKind(str, enum.Enum):
    BALL = "ball"
    ANNULUS = "annulus"
    COMPLEMENT = "complement"
    WHOLE_SPACE = "whole_space"


@dataclass(frozen=True)
class GeneralizedAnnulus:
    """{R0 < |x| < R1} in R^n; R0 = 0 is a ball, R1 = inf a complement."""

    R0: float
    R1: float
    n: int

    def __post_init__(self):
        object.__setattr__(self, "n", check_dimension(self.n))
        if not (self.R0 >= 0 and self.R0 < self.R1) or math.isnan(self.R1):
            raise DomainError(f"need 0 <= R0 < R1, got R0={self.R0}, R1={self.R1}")

    @property
    def kind(self) -> DomainKind:
        if self.R0 == 0:
            return DomainKind.WHOLE_SPACE if math.isinf(self.R1) else DomainKind.BALL
        return DomainKind.COMPLEMENT if math.isinf(self.R1) else DomainKind.ANNULUS

    @property
    def bounded(self) -> bool:
        return math.isfinite(self.R1)

    @property
    def ratio(self) -> float:
        return self.R1 / self.R0 if self.R0 > 0 else math.inf


@dataclass(frozen=True)
class Signature:
    chi_inner: Optional[int] = None
    chi_outer: Optional[int] = None

    def __post_init__(self):
        for v in (self.chi_inner, self.chi_outer):
            if v is not None and v not in (-1, 1):
                raise DomainError(f"signature values must be +1 or -1, got {v!r}")

    @classmethod
    def constant(cls, value: int = -1) -> "Signature":
        return cls(value, value)

    @classmethod
    def nonconstant(cls) -> "Signature":
        """+1 on the inner sphere, -1 on the outer one."""
        return cls(1, -1)

    @property
    def is_constant(self) -> bool:
        return self.chi_inner == self.chi_outer


class Reason(str, enum.Enum):
    ADMISSIBLE = "Admissible"
    VIOLATES_UNIT_BOUND = "ViolatesUnitBound"
    NO_BOUNDED_SOLUTION = "NoBoundedSolution"


@dataclass(frozen=True)
class Calibration:
    profile: RadialProfile
    lam: float
    sup_abs_z: float
    argmax: float
    bc_residuals: tuple[float, float, float, float]
    sup_tol: float = SUP_TOL

    @property
    def admissible(self) -> bool:
        return self.sup_abs_z <= 1.0 + self.sup_tol


@dataclass(frozen=True)
class CalibrabilityVerdict:
    calibrable: bool
    reason: Reason
    witness: Optional[Calibration] = None
    violation_radius: Optional[float] = None

    def __bool__(self) -> bool:
        return self.calibrable


# --- linear boundary-value solve ---------------------------------------------

def _check_range(n: int) -> None:
    if n > MAX_DIMENSION:
        raise RangeError(f"dimensions above {MAX_DIMENSION} are not supported")


def _scaled_basis(n: int, s: float, q: float):
    """Values and s-derivatives of the column-scaled basis at s = r/R1 in [q, 1].

    Negative powers are referenced to the inner radius (s/q)^p so that every
    column stays O(1) on the interval.
    """
    vals, ders = [], []
    for i, p in enumerate((3.0, 3.0 - n, 1.0, 1.0 - n)):
        if n == 2 and i == 1:
            vals.append(s * math.log(s))
            ders.append(math.log(s) + 1.0)
            continue
        ref = q if p < 0 else 1.0
        vals.append((s / ref) ** p)
        ders.append(p * (s / ref) ** (p - 1) / ref)
    return vals, ders


def _unscale(n: int, chat, R0: float, R1: float) -> tuple[float, float, float, float]:
    q = R0 / R1
    c = [0.0, 0.0, 0.0, 0.0]
    for i, p in enumerate((3.0, 3.0 - n, 1.0, 1.0 - n)):
        if n == 2 and i == 1:
            # (r/R1) log(r/R1) = r log r / R1 - (log R1 / R1) r
            c[1] += chat[1] / R1
            c[2] -= chat[1] * math.log(R1) / R1
            continue
        ref = q * R1 if p < 0 else R1
        c[i] += chat[i] * ref ** (-p)
    return tuple(c)


def annulus_coefficients(n: int, R0: float, R1: float, z_inner: float, z_outer: float):
    """Solve z(R0)=z_inner, z(R1)=z_outer, z'(R0)=z'(R1)=0 for (c0, c1, c2, c3).

    Works in the homogeneous variable s = r/R1 with partial-pivot elimination
    (LAPACK gesv); the result is mapped back to the raw basis.
    """
    n = check_dimension(n)
    _check_range(n)
    if not (0 < R0 < R1 < math.inf):
        raise DomainError(f"annulus needs 0 < R0 < R1 < inf, got {R0}, {R1}")
    q = R0 / R1
    v0, d0 = _scaled_basis(n, q, q)
    v1, d1 = _scaled_basis(n, 1.0, q)
    A = np.array([v0, d0, v1, d1])
    b = np.array([z_inner, 0.0, z_outer, 0.0])
    chat = np.linalg.solve(A, b)
    return _unscale(n, chat, R0, R1)


THIN = 0.05  # half relative width below which the midpoint expansion is used
_TAYLOR_TERMS = 24


@lru_cache(maxsize=None)
def _basis_taylor(n: int):
    """phi_i^(k)(1) / k! for the four basis functions, k = 0.._TAYLOR_TERMS."""
    K = _TAYLOR_TERMS
    out = np.zeros((4, K + 1))
    for i, p in enumerate((3.0, 3.0 - n, 1.0, 1.0 - n)):
        if n == 2 and i == 1:
            # r log r at r = 1: 0, 1, 1/2, then (-1)^k / (k (k-1))
            out[i, 1] = 1.0
            for k in range(2, K + 1):
                out[i, k] = (-1.0) ** k / (k * (k - 1))
            continue
        c = 1.0
        for k in range(K + 1):
            out[i, k] = c
            c *= (p - k) / (k + 1)
    out.setflags(write=False)
    return out


@lru_cache(maxsize=None)
def _thin_tables(n: int):
    tay = _basis_taylor(n)
    Tinv = np.linalg.inv(tay[:, :4])
    k = np.arange(_TAYLOR_TERMS + 1)
    rem = Tinv @ np.where(k >= 4, tay, 0.0)
    # power series of the remainder of psi = Tinv phi and its first two derivatives
    d1 = (rem * k)[:, 1:]
    d2 = (rem * k * (k - 1))[:, 2:]
    return Tinv.tolist(), rem.T.copy(), np.vstack([d1.T, np.zeros((1, 4))]), np.vstack([d2.T, np.zeros((2, 4))]), k


def _thin_scalar(n: int, R0: float, R1: float, z_inner: float, z_outer: float):
    Tinv, P0, P1, P2, k = _thin_tables(n)
    m = 0.5 * (R0 + R1)
    delta = 0.5 * (R1 - R0) / m
    X = np.array([[-delta], [delta]]) ** k
    v = X @ P0
    d = X @ P1
    s = X @ P2
    v, d, s = v.tolist(), d.tolist(), s.tolist()
    rows = []
    for j, xj in enumerate((-delta, delta)):
        mono = (1.0, xj, xj * xj, xj**3)
        dmono = (0.0, 1.0, 2 * xj, 3 * xj * xj)
        rows.append([(mono[i] + v[j][i]) / delta**i for i in range(4)])
        rows.append([(dmono[i] + d[j][i]) * delta / delta**i for i in range(4)])
    c = _solve4(rows, [z_inner, 0.0, z_outer, 0.0])
    c = [ci / delta**i for i, ci in enumerate(c)]
    zpp = []
    for j, xj in enumerate((-delta, delta)):
        dd = (0.0, 0.0, 2.0, 6 * xj)
        zpp.append(sum(c[i] * (dd[i] + s[j][i]) for i in range(4)) / (m * m))
    c0 = sum(c[i] * Tinv[i][0] for i in range(4))
    return -2.0 * n * (n + 2) * c0 / m**3, zpp[0], zpp[1]


def _thin_data(n: int, R0, R1, z_inner, z_outer):
    """Midpoint expansion for thin annuli.

    In x = r/m - 1 (m the midpoint) the basis is phi = T (1, x, x^2, x^3) + rem
    with T the scaled Wronskian at m.  psi = T^-1 phi equals x^j plus an
    analytic O(x^4) remainder, which keeps the boundary system well
    conditioned however close R0 and R1 are.
    """
    tay = _basis_taylor(n)
    T = tay[:, :4]
    Tinv = np.linalg.inv(T)
    m = 0.5 * (R0 + R1)
    delta = 0.5 * (R1 - R0) / m
    k = np.arange(_TAYLOR_TERMS + 1)

    def psi(x):
        xs = x[..., None] ** np.maximum(k - 2, 0)
        # remainders of phi_i and their first two x-derivatives
        rem = np.where(k >= 4, tay, 0.0)
        v = np.einsum("ik,...k->...i", rem, xs * x[..., None] ** 2)
        d1 = np.einsum("ik,...k->...i", rem * k, xs * x[..., None])
        d2 = np.einsum("ik,...k->...i", rem * k * (k - 1), xs)
        mono = np.stack([np.ones_like(x), x, x**2, x**3], -1)
        dmono = np.stack([np.zeros_like(x), np.ones_like(x), 2 * x, 3 * x**2], -1)
        ddmono = np.stack([np.zeros_like(x), np.zeros_like(x), 2 * np.ones_like(x), 6 * x], -1)
        return (mono + v @ Tinv.T, dmono + d1 @ Tinv.T, ddmono + d2 @ Tinv.T)

    v0, d0, s0 = psi(-delta)
    v1, d1, s1 = psi(delta)
    scale = np.stack([np.ones_like(delta), delta, delta**2, delta**3], -1)
    A = np.stack([v0 / scale, d0 * delta[..., None] / scale, v1 / scale, d1 * delta[..., None] / scale], -2)
    b = np.stack([z_inner, np.zeros_like(delta), z_outer, np.zeros_like(delta)], -1)
    c = np.linalg.solve(A, b[..., None])[..., 0] / scale
    zpp0 = np.sum(c * s0, -1) / m**2
    zpp1 = np.sum(c * s1, -1) / m**2
    c0 = (c @ Tinv)[..., 0]
    lam = -2.0 * n * (n + 2) * c0 / m**3
    return lam, zpp0, zpp1


def annulus_boundary_data(n: int, R0, R1, z_inner, z_outer):
    """Vectorized (lam, z''(R0), z''(R1)) over arrays of annuli.

    Same scaled system as :func:`annulus_coefficients`, solved as one batch;
    this is the kernel behind the facet speeds of a stack.  Thin annuli go
    through a midpoint expansion instead.
    """
    n = check_dimension(n)
    R0, R1, z_inner, z_outer = np.broadcast_arrays(
        *(np.asarray(v, dtype=float) for v in (R0, R1, z_inner, z_outer))
    )
    thin = (R1 - R0) < 2 * THIN * (R0 + R1) / 2
    if thin.any():
        lam = np.empty(R0.shape)
        zpp0 = np.empty(R0.shape)
        zpp1 = np.empty(R0.shape)
        parts = ((thin, _thin_data), (~thin, _wide_data))
        for mask, fn in parts:
            if mask.any():
                lam[mask], zpp0[mask], zpp1[mask] = fn(n, R0[mask], R1[mask], z_inner[mask], z_outer[mask])
        return lam, zpp0, zpp1
    return _wide_data(n, R0, R1, z_inner, z_outer)


def _solve4(A, b):
    """Gaussian elimination with partial pivoting on Python floats (4x4)."""
    M = [row[:] + [bi] for row, bi in zip(A, b)]
    for c in range(4):
        piv = max(range(c, 4), key=lambda r: abs(M[r][c]))
        if M[piv][c] == 0.0:
            raise np.linalg.LinAlgError("singular boundary system")
        M[c], M[piv] = M[piv], M[c]
        inv = 1.0 / M[c][c]
        for r in range(c + 1, 4):
            f = M[r][c] * inv
            if f:
                Mr, Mc = M[r], M[c]
                for j in range(c, 5):
                    Mr[j] -= f * Mc[j]
    x = [0.0] * 4
    for r in range(3, -1, -1):
        acc = M[r][4]
        for j in range(r + 1, 4):
            acc -= M[r][j] * x[j]
        x[r] = acc / M[r][r]
    return x


def annulus_boundary_scalar(n: int, R0: float, R1: float, z_inner: float, z_outer: float):
    """Scalar version of :func:`annulus_boundary_data` for wide annuli."""
    q = R0 / R1
    iq = 1.0 / q
    rows_v0, rows_d0, rows_v1, rows_d1, s0, s1 = [], [], [], [], [], []
    for i, P in enumerate((3.0, 3.0 - n, 1.0, 1.0 - n)):
        if n == 2 and i == 1:
            lq = math.log(q)
            rows_v0.append(q * lq), rows_d0.append(lq + 1.0), s0.append(iq)
            rows_v1.append(0.0), rows_d1.append(1.0), s1.append(1.0)
            continue
        PP = P * (P - 1.0)
        if P < 0:
            w = q ** (-P)
            rows_v0.append(1.0), rows_d0.append(P * iq), s0.append(PP * iq * iq)
            rows_v1.append(w), rows_d1.append(P * w), s1.append(PP * w)
        else:
            w = q**P
            rows_v0.append(w), rows_d0.append(P * w * iq), s0.append(PP * w * iq * iq)
            rows_v1.append(1.0), rows_d1.append(P), s1.append(PP)
    c = _solve4([rows_v0, rows_d0, rows_v1, rows_d1], [z_inner, 0.0, z_outer, 0.0])
    R1sq = R1 * R1
    zpp0 = sum(ci * si for ci, si in zip(c, s0)) / R1sq
    zpp1 = sum(ci * si for ci, si in zip(c, s1)) / R1sq
    return -2.0 * n * (n + 2) * c[0] / (R1sq * R1), zpp0, zpp1


def _wide_data(n: int, R0, R1, z_inner, z_outer):
    q = (R0 / R1)[..., None]
    P = np.array([3.0, 3.0 - n, 1.0, 1.0 - n])
    PP = P * (P - 1)
    neg = P < 0
    qP = q**P
    iq = 1.0 / q
    # columns with P >= 0 use (r/R1)^P, the others (r/R0)^P
    v0 = np.where(neg, 1.0, qP)
    d0 = P * np.where(neg, 1.0, qP) * iq
    s0 = PP * np.where(neg, 1.0, qP) * iq * iq
    w1 = np.where(neg, 1.0 / qP, 1.0)
    v1, d1, s1 = w1, P * w1, PP * w1
    if n == 2:
        lq = np.log(q[..., 0])
        v0[..., 1], d0[..., 1], s0[..., 1] = q[..., 0] * lq, lq + 1.0, iq[..., 0]
        v1[..., 1], d1[..., 1], s1[..., 1] = 0.0, 1.0, 1.0
    A = np.stack([v0, d0, v1, d1], -2)
    zero = np.zeros_like(R0)
    b = np.stack([z_inner, zero, z_outer, zero], -1)
    chat = np.linalg.solve(A, b[..., None])[..., 0]
    zpp0 = np.einsum("...i,...i->...", chat, s0) / R1**2
    zpp1 = np.einsum("...i,...i->...", chat, s1) / R1**2
    lam = -2.0 * n * (n + 2) * chat[..., 0] / R1**3
    return lam, zpp0, zpp1


def _bc_residuals(profile: RadialProfile, R0: float, R1: Optional[float], z_in, z_out):
    res = []
    if R0 > 0:
        s = evaluate(profile, R0)
        res += [abs(s.z - z_in), abs(R0 * s.z_prime)]
    else:
        res += [0.0, 0.0]
    if R1 is not None and math.isfinite(R1):
        s = evaluate(profile, R1)
        res += [abs(s.z - z_out), abs(R1 * s.z_prime)]
    else:
        res += [0.0, 0.0]
    return tuple(float(x) for x in res)


def _make_calibration(profile: RadialProfile, R0, R1, z_in, z_out) -> Calibration:
    sup, arg = sup_abs_z(profile)
    # below SUP_TOL unless the domain is so thin that z is dominated by rounding
    tol = max(SUP_TOL, rounding_bound(profile, [R0, R1, arg]))
    return Calibration(profile, profile.lam, sup, arg, _bc_residuals(profile, R0, R1, z_in, z_out), tol)


# --- balls and complements ---------------------------------------------------

def ball_profile(n: int, R: float, chi_outer: int = -1) -> RadialProfile:
    n = check_dimension(n)
    if not (R > 0 and math.isfinite(R)):
        raise DomainError(f"ball radius must be positive, got {R}")
    # z = -chi (1/2 (r/R)^3 - 3/2 r/R)
    s = -chi_outer
    return RadialProfile(n, (0.5 * s / R**3, 0.0, -1.5 * s / R, 0.0), 0.0, R)


def solve_ball(n: int, R: float, chi_outer: int = -1) -> Calibration:
    """Calibration of B_R: z = 1/2 (r/R)^3 - 3/2 (r/R), lam = -n(n+2)/R^3 for chi = -1."""
    prof = ball_profile(n, R, chi_outer)
    return _make_calibration(prof, 0.0, R, None, chi_outer)


def complement_profile(n: int, R: float, chi_inner: int = 1) -> RadialProfile:
    n = check_dimension(n)
    if n == 2:
        raise DomainError("the complement of a disk has no bounded radial calibration")
    # z = -chi_in * ( (n-1)/2 (r/R)^(3-n) - (n-3)/2 (r/R)^(1-n) )
    s = chi_inner
    c1 = -s * 0.5 * (n - 1) * R ** (n - 3)
    c3 = s * 0.5 * (n - 3) * R ** (n - 1)
    return RadialProfile(n, (0.0, c1, 0.0, c3), R, math.inf)


def solve_complement(n: int, R: float, chi_inner: int = 1) -> CalibrabilityVerdict:
    """Calibrability of R^n minus B_R.

    The bounded solution must have lam = c2 = 0; for n = 2 only c3/r remains
    and z(R) = -1, z'(R) = 0 cannot both hold.
    """
    n = check_dimension(n)
    if not (R > 0 and math.isfinite(R)):
        raise DomainError(f"ball radius must be positive, got {R}")
    if n == 2:
        return CalibrabilityVerdict(False, Reason.NO_BOUNDED_SOLUTION)
    prof = complement_profile(n, R, chi_inner)
    cal = _make_calibration(prof, R, math.inf, -chi_inner, None)
    if cal.admissible:
        return CalibrabilityVerdict(True, Reason.ADMISSIBLE, cal)
    return CalibrabilityVerdict(False, Reason.VIOLATES_UNIT_BOUND, cal, cal.argmax)


# --- the critical ratio in two dimensions ------------------------------------

def m_function(Q):
    """m(Q) = log Q - (Q^2-1)(2Q-1) / (Q(Q^2-2Q+3)); z''(R0) <= 0 iff m(Q) <= 0."""
    Q = np.asarray(Q, dtype=float)
    if np.any(Q < 1):
        raise DomainError("m(Q) is defined for Q >= 1")
    out = np.log(Q) - (Q * Q - 1) * (2 * Q - 1) / (Q * (Q * Q - 2 * Q + 3))
    return float(out) if out.ndim == 0 else out


def m_derivative(Q):
    Q = np.asarray(Q, dtype=float)
    out = (Q - 3) * (Q - 1) * (Q + 1) ** 3 / (Q**2 * (Q * Q - 2 * Q + 3) ** 2)
    return float(out) if out.ndim == 0 else out


@lru_cache(maxsize=None)
def compute_qstar(lo: float = 3.0, hi: float = 20.0, tol: float = 1e-10) -> float:
    """Unique zero of m on ]1, inf[ by bisection on [lo, hi]."""
    f_lo, f_hi = m_function(lo), m_function(hi)
    if f_lo * f_hi > 0:
        raise DomainError("bracket does not enclose the zero of m")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        f_mid = m_function(mid)
        if f_mid == 0.0:
            return mid
        if (f_mid < 0) == (f_lo < 0):
            lo, f_lo = mid, f_mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


# --- annuli -------------------------------------------------------------------

def annulus_profile(n: int, R0: float, R1: float, sig: Signature) -> RadialProfile:
    if sig.chi_inner is None or sig.chi_outer is None:
        raise DomainError("an annulus needs both inner and outer signature values")
    c = annulus_coefficients(n, R0, R1, -sig.chi_inner, sig.chi_outer)
    return RadialProfile(n, c, R0, R1)


def solve_annulus(n: int, R0: float, R1: float, sig: Signature) -> CalibrabilityVerdict:
    """Calibrability of the annulus R0 < |x| < R1 with the given signature.

    The sup |z| <= 1 check is authoritative.  For n = 2 with constant
    signature the curvature test z(R0) z''(R0) <= 0, equivalent to Q <= Q*,
    is applied as well so that ratios just above Q* are rejected even when the
    overshoot above 1 is below floating resolution.
    """
    n = check_dimension(n)
    if not (0 < R0 < R1 < math.inf):
        raise DomainError(f"annulus needs 0 < R0 < R1 < inf, got {R0}, {R1}")
    prof = annulus_profile(n, R0, R1, sig)
    cal = _make_calibration(prof, R0, R1, -sig.chi_inner, sig.chi_outer)
    ok = cal.admissible
    violation = None if ok else cal.argmax
    if n == 2 and sig.is_constant and ok:
        s = evaluate(prof, R0)
        if s.z * s.z_second * R0**2 > CURVATURE_TOL:
            ok = False
            violation = R0
    if ok:
        return CalibrabilityVerdict(True, Reason.ADMISSIBLE, cal)
    return CalibrabilityVerdict(False, Reason.VIOLATES_UNIT_BOUND, cal, violation)


def classify(domain: GeneralizedAnnulus, sig: Optional[Signature] = None) -> CalibrabilityVerdict:
    kind = domain.kind
    if kind is DomainKind.WHOLE_SPACE:
        raise UnsupportedDomainError("the whole space is not a treated generalized annulus")
    if kind is DomainKind.BALL:
        chi = -1 if sig is None or sig.chi_outer is None else sig.chi_outer
        cal = solve_ball(domain.n, domain.R1, chi)
        if cal.admissible:
            return CalibrabilityVerdict(True, Reason.ADMISSIBLE, cal)
        return CalibrabilityVerdict(False, Reason.VIOLATES_UNIT_BOUND, cal, cal.argmax)
    if kind is DomainKind.COMPLEMENT:
        chi = 1 if sig is None or sig.chi_inner is None else sig.chi_inner
        return solve_complement(domain.n, domain.R0, chi)
    return solve_annulus(domain.n, domain.R0, domain.R1, sig or Signature.constant())


def predicted_calibrable(n: int, kind: DomainKind, constant_signature: bool = True, ratio: float = math.nan) -> bool:
    """The classification table of balls, complements and annuli, as a predicate."""
    if kind is DomainKind.BALL:
        return True
    if kind is DomainKind.COMPLEMENT:
        return n != 2
    if kind is DomainKind.ANNULUS:
        if n != 2:
            return True
        return constant_signature and ratio <= compute_qstar()
    raise UnsupportedDomainError(kind)


# --- printed closed forms (homogeneous in Q = R1/R0) --------------------------

def closed_form_constant(n: int, R0: float, R1: float) -> tuple[float, float, float, float]:
    """Coefficients for signature chi = -1 on both spheres (z(R0)=1, z(R1)=-1)."""
    Q = R1 / R0
    if n == 2:
        L = math.log(Q)
        D = -Q * Q + 1 + (Q * Q + 1) * L
        c0 = Q**2 * (Q**2 - 1 + 2 * Q * L) / (4 * (Q - 1) * D) / R1**3
        c1 = -((Q + 1) ** 3) / (2 * D) / R1
        # the printed c2 lacks the term -c1 R1 inside the Q-part
        c2 = ((-3 * (Q**4 - 1) - 2 * (3 * Q**3 - Q**2 + Q - 1) * L) / (4 * (Q - 1) * D) + (Q + 1) ** 3 / (2 * D)) / R1
        c2 += (Q + 1) ** 3 / (2 * D) * math.log(R1) / R1
        c3 = (-3 * Q**2 + 3 + 2 * (Q**2 - Q + 1) * L) / (4 * (Q - 1) * D) * R1
        return c0, c1, c2, c3
    D = 4 * (Q**n - 1) ** 2 - n**2 * (Q**2 - 1) ** 2 * Q ** (n - 2)
    c0 = (2 * Q**3 * (Q ** (2 * n - 3) - 1) + (Q - 1) * Q**n * ((n - 1) * (n - 2) * (Q + 1) ** 2 - 2 * Q)) / D / R1**3
    c1 = (Q + 1) * (2 * (n - 1) * (Q ** (n + 2) - 1) + (n + 2) * Q * (Q - 1) * (Q ** (n - 1) + 1)) / D * R1 ** (n - 3)
    c2 = -(6 * Q * (Q ** (2 * n - 1) - 1) + (Q - 1) * Q ** (n - 2) * (6 * Q**2 + n * (n - 1) * (1 + Q) * (1 + Q**3))) / D / R1
    c3 = -(Q + 1) * (2 * (n - 3) * (Q**n - 1) + n * Q * (Q - 1) * (Q ** (n - 3) + 1)) / D * R1 ** (n - 1)
    return c0, c1, c2, c3


def closed_form_nonconstant(n: int, R0: float, R1: float) -> tuple[float, float, float, float]:
    """Coefficients for chi = +1 on |x| = R0 and -1 on |x| = R1 (z = -1 on both)."""
    Q = R1 / R0
    if n == 2:
        L = math.log(Q)
        D = -1 + Q * Q - (1 + Q * Q) * L
        c0 = Q**2 * (-1 - 2 * Q * L + Q**2) / (4 * (1 + Q) * D) / R1**3
        c1 = (1 - Q) ** 3 / (2 * D) / R1
        c2 = ((1 - Q) * (1 + Q) * (1 + 4 * Q + Q**2) + 2 * (1 + Q + Q**2 + 3 * Q**3) * L) / (4 * (1 + Q) * D) / R1
        c2 += (Q - 1) ** 3 / (2 * D) * math.log(R1) / R1
        c3 = (2 * (1 + Q + Q**2) * L + 3 * (1 - Q) * (1 + Q)) / (4 * (1 + Q) * D) * R1
        return c0, c1, c2, c3
    c0 = (
        (-2 * Q**3 - 2 * Q ** (2 * n) + Q**n * (1 + Q) * ((n - 2) * (n - 1) - 2 * ((n - 3) * n + 1) * Q + (n - 2) * (n - 1) * Q**2))
        / (Q ** (n - 2) * (n**2 * (1 - Q**2) ** 2 + 8 * Q**2) - 4 - 4 * Q ** (2 * n))
        / R1**3
    )
    c1 = -(
        (-3 * n * Q + 2 * (n - 1) + (n + 2) * Q**3 + (n + 2) * Q**n - 3 * n * Q ** (n + 2) + 2 * (n - 1) * Q ** (n + 3))
        / (4 * (1 - Q**n) ** 2 - n**2 * Q ** (n - 2) * (1 - Q**2) ** 2)
        * R1 ** (n - 3)
    )
    c2 = (
        (6 * Q**3 + 6 * Q ** (2 * n + 2) - Q**n * (1 + Q) * ((n - 1) * n - (n - 1) * n * Q - (n - 1) * n * Q**3 + (n - 1) * n * Q**4 + 6 * Q**2))
        / (Q**n * (n**2 * (1 - Q**2) ** 2 + 8 * Q**2) - 4 * Q**2 - 4 * Q ** (2 * n + 2))
        / R1
    )
    c3 = (
        (1 - Q) * (Q**n * (n * (1 - Q) * (1 + 2 * Q) + 6 * Q**2) - Q**2 * (-2 * (n - 3) + n * Q + n * Q**2))
        / (4 * Q**2 * (1 - Q**n) ** 2 - n**2 * Q**n * (1 - Q**2) ** 2)
        * R1 ** (n - 1)
    )
    return c0, c1, c2, c3


# --- Saint-Venant cross-check -------------------------------------------------

def sphere_area(n: int, R: float = 1.0) -> float:
    """H^(n-1) of the sphere of radius R in R^n (two points when n = 1)."""
    return 2.0 * math.pi ** (n / 2) / math.gamma(n / 2) * R ** (n - 1)


def ball_volume(n: int, R: float = 1.0) -> float:
    return math.pi ** (n / 2) / math.gamma(n / 2 + 1) * R**n


def saint_venant_solution(n: int, R0: float, R1: float):
    """(A, B) with w(r) = -r^2/(2n) + A + B phi(r) vanishing at R0 and R1.

    phi(r) = r^(2-n) for n != 2 and log r for n == 2; B = 0 for balls.
    """
    if R0 == 0:
        return R1**2 / (2 * n), 0.0
    phi = (lambda r: math.log(r)) if n == 2 else (lambda r: r ** (2 - n))
    M = np.array([[1.0, phi(R0)], [1.0, phi(R1)]])
    rhs = np.array([R0**2 / (2 * n), R1**2 / (2 * n)])
    A, B = np.linalg.solve(M, rhs)
    return float(A), float(B)


def _sv_antiderivative(n: int, A: float, B: float, r: float) -> float:
    """Antiderivative of w(r) r^(n-1)."""
    val = -(r ** (n + 2)) / (2 * n * (n + 2)) + A * r**n / n
    if B != 0.0:
        val += B * (r * r / 2 * math.log(r) - r * r / 4) if n == 2 else B * r * r / 2
    return val


def _sv_slope(n: int, B: float, r: float) -> float:
    dphi = 1.0 / r if n == 2 else (2 - n) * r ** (1 - n)
    return -r / n + B * dphi


def saint_venant_lambda(domain: GeneralizedAnnulus, sig: Optional[Signature] = None) -> float:
    """Facet speed from lam * int w_sv = int chi kappa nu.grad w_sv + int chi over the boundary."""
    if not domain.bounded:
        raise DomainError("the Saint-Venant identity needs a bounded domain")
    n, R0, R1 = domain.n, domain.R0, domain.R1
    if sig is None:
        sig = Signature(None if R0 == 0 else -1, -1)
    A, B = saint_venant_solution(n, R0, R1)
    unit = sphere_area(n)
    volume_int = unit * (_sv_antiderivative(n, A, B, R1) - (_sv_antiderivative(n, A, B, R0) if R0 > 0 else 0.0))
    chi_o = sig.chi_outer
    rhs = chi_o * (n - 1) / R1 * _sv_slope(n, B, R1) * unit * R1 ** (n - 1) + chi_o * unit * R1 ** (n - 1)
    if R0 > 0:
        chi_i = sig.chi_inner
        # nu = -e_r and kappa = -(n-1)/R0 on the inner sphere
        rhs += chi_i * (-(n - 1) / R0) * (-_sv_slope(n, B, R0)) * unit * R0 ** (n - 1)
        rhs += chi_i * unit * R0 ** (n - 1)
    return rhs / volume_int


def divergence_mass(cal: Calibration, R0: float, R1: float) -> float:
    """int_U div Z in closed form: |S^(n-1)| [r^(n-1) z(r)] between the radii."""
    prof = cal.profile
    n = prof.n
    top = R1 ** (n - 1) * evaluate(prof, R1).z
    bottom = R0 ** (n - 1) * evaluate(prof, R0).z if R0 > 0 else 0.0
    return sphere_area(n) * (top - bottom)


def signed_boundary_measure(n: int, R0: float, R1: float, sig: Signature) -> float:
    total = sig.chi_outer * sphere_area(n, R1)
    if R0 > 0:
        total += sig.chi_inner * sphere_area(n, R0)
    return total


def inflection_count(cal: Calibration) -> int:
    p = cal.profile
    return len(inflection_radii(p, p.r_min, p.r_max))


__all__ = [
    "Calibration",
    "CalibrabilityVerdict",
    "DomainKind",
    "GeneralizedAnnulus",
    "Reason",
    "Signature",
    "annulus_coefficients",
    "classify",
    "closed_form_constant",
    "closed_form_nonconstant",
    "compute_qstar",
    "lambda_from_c0",
    "m_function",
    "saint_venant_lambda",
    "solve_annulus",
    "solve_ball",
    "solve_complement",
]
