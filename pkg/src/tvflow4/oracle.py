"""Independent numerical checks for the closed forms elsewhere in the package.

Nothing here imports the profile evaluation or the calibration solvers: the
basis is rebuilt from symbolic differentiation of r^p (log r)^k terms, the
ODE operator is applied term by term, and integrals/derivatives are
approximated by plain quadrature, finite differences and Runge-Kutta.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import DomainError, IntegrationError


# --- symbolic terms c r^p (log r)^k -------------------------------------------

@dataclass(frozen=True)
class Term:
    coef: float
    power: float
    logs: int = 0

    def derivative(self) -> list["Term"]:
        out = []
        if self.power != 0.0:
            out.append(Term(self.coef * self.power, self.power - 1, self.logs))
        if self.logs > 0:
            out.append(Term(self.coef * self.logs, self.power - 1, self.logs - 1))
        return out

    def times_power(self, q: float) -> "Term":
        return Term(self.coef, self.power + q, self.logs)

    def __call__(self, r):
        val = self.coef * np.power(r, self.power)
        if self.logs:
            val = val * np.log(r) ** self.logs
        return val


def _d(terms: list[Term]) -> list[Term]:
    return [t2 for t in terms for t2 in t.derivative()]


def _shift(terms: list[Term], q: float) -> list[Term]:
    return [t.times_power(q) for t in terms]


def _value(terms: list[Term], r):
    return sum((t(r) for t in terms), np.zeros_like(np.asarray(r, dtype=float)))


def basis_terms(n: int) -> list[list[Term]]:
    """The four solutions of the homogeneous part plus the particular r^3."""
    second = [Term(1.0, 1.0, 1)] if n == 2 else [Term(1.0, 3.0 - n)]
    return [[Term(1.0, 3.0)], second, [Term(1.0, 1.0)], [Term(1.0, 1.0 - n)]]


def apply_operator(terms: list[Term], n: int) -> list[Term]:
    """-r^(1-n) (r^(n-1) (r^(1-n) (r^(n-1) z)')')' as a list of terms."""
    div = _shift(_d(_shift(terms, n - 1)), 1 - n)
    return [Term(-t.coef, t.power, t.logs) for t in _shift(_d(_shift(_d(div), n - 1)), 1 - n)]


def operator_constant(terms: list[Term], n: int, r_probe: float = 1.7) -> float:
    return float(_value(apply_operator(terms, n), r_probe))


# --- boundary-value solve -----------------------------------------------------

@dataclass(frozen=True)
class LinearSystem4:
    matrix: np.ndarray
    rhs: np.ndarray


def assemble(n: int, R0: float, R1: float, bc: Sequence[float]) -> LinearSystem4:
    """Rows: z(R0), z'(R0), z(R1), z'(R1) of each raw basis function."""
    basis = basis_terms(n)
    rows = []
    for R in (R0, R1):
        rows.append([float(_value(b, R)) for b in basis])
        rows.append([float(_value(_d(b), R)) for b in basis])
    return LinearSystem4(np.array(rows), np.asarray(bc, dtype=float))


def bvp_solve(n: int, R0: float, R1: float, bc: Sequence[float], regular_origin: bool = False):
    """Coefficients (c0..c3) and lam of the calibration ODE with boundary data.

    ``bc`` is (z(R0), z'(R0), z(R1), z'(R1)).  With ``regular_origin`` only the
    outer pair of conditions is used and c1 = c3 = 0 are imposed instead.
    """
    if not (0 < R0 < R1 < math.inf):
        raise DomainError("bvp_solve needs 0 < R0 < R1 < inf")
    sys4 = assemble(n, R0, R1, bc)
    if regular_origin:
        A = sys4.matrix[2:][:, [0, 2]]
        sol2 = np.linalg.solve(A, sys4.rhs[2:])
        c = np.array([sol2[0], 0.0, sol2[1], 0.0])
    else:
        if abs(np.linalg.det(sys4.matrix)) == 0.0:
            raise np.linalg.LinAlgError("singular boundary system")
        c = np.linalg.solve(sys4.matrix, sys4.rhs)
    terms = [Term(ci * t.coef, t.power, t.logs) for ci, b in zip(c, basis_terms(n)) for t in b]
    lam = operator_constant(terms, n)
    return tuple(float(x) for x in c), lam


# --- finite differences ---------------------------------------------------------

@dataclass(frozen=True)
class GridFunction:
    radii: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.radii)
        if r.ndim != 1 or np.any(np.diff(r) <= 0):
            raise DomainError("grid must be strictly increasing")


def fd_ode_residual(samples: GridFunction, n: int, lam: float) -> float:
    """Max interior |L z - lam| with L applied by nested central differences.

    Three nested second-order differences; the three outermost points on
    each side are dropped since they mix in one-sided stencils.
    """
    r = np.asarray(samples.radii)
    z = np.asarray(samples.values)
    if r.size < 7:
        raise DomainError("fd_ode_residual needs at least 7 grid points")
    if np.any(r <= 0):
        raise DomainError("grid must lie in r > 0")
    f = np.gradient(r ** (n - 1) * z, r, edge_order=2)
    div = r ** (1 - n) * f
    g = np.gradient(r ** (n - 1) * np.gradient(div, r, edge_order=2), r, edge_order=2)
    res = -(r ** (1 - n)) * g - lam
    return float(np.max(np.abs(res[3:-3])))


# --- Runge-Kutta ----------------------------------------------------------------

def rk4(f: Callable, y0, t_span: tuple[float, float], dt: float):
    """Classical RK4 with fixed step; the last step is shortened to hit t_end."""
    if dt <= 0:
        raise DomainError("dt must be positive")
    t0, t1 = t_span
    y = np.array(y0, dtype=float)
    ts, ys = [t0], [y.copy()]
    t = t0
    nsteps = max(1, int(math.ceil((t1 - t0) / dt - 1e-12)))
    for i in range(nsteps):
        h = min(dt, t1 - t)
        k1 = np.asarray(f(t, y))
        k2 = np.asarray(f(t + h / 2, y + h / 2 * k1))
        k3 = np.asarray(f(t + h / 2, y + h / 2 * k2))
        k4 = np.asarray(f(t + h, y + h * k3))
        y = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        t = t0 + (i + 1) * dt if i + 1 < nsteps else t1
        if not np.all(np.isfinite(y)):
            raise IntegrationError(f"non-finite state at t={t}", state=(t, y))
        ts.append(t)
        ys.append(y.copy())
    return np.array(ts), np.array(ys)


def observed_order(errors: Sequence[float], steps: Sequence[float]) -> float:
    """Least-squares slope of log(error) against log(step)."""
    return float(np.polyfit(np.log(steps), np.log(errors), 1)[0])


# --- quadrature ---------------------------------------------------------------

def unit_sphere_area(n: int) -> float:
    return 2.0 * math.pi ** (n / 2) / math.gamma(n / 2)


def adaptive_simpson(f: Callable[[float], float], a: float, b: float, tol: float = 1e-10, max_depth: int = 60) -> float:
    def simpson(fa, fm, fb, a, b):
        return (b - a) / 6 * (fa + 4 * fm + fb)

    fa, fb, fm = f(a), f(b), f(0.5 * (a + b))
    total = 0.0
    stack = [(a, b, fa, fm, fb, simpson(fa, fm, fb, a, b), tol, 0)]
    while stack:
        a, b, fa, fm, fb, whole, eps, depth = stack.pop()
        m = 0.5 * (a + b)
        lm, rm = 0.5 * (a + m), 0.5 * (m + b)
        flm, frm = f(lm), f(rm)
        left = simpson(fa, flm, fm, a, m)
        right = simpson(fm, frm, fb, m, b)
        if depth >= max_depth or abs(left + right - whole) <= 15 * eps:
            total += left + right + (left + right - whole) / 15
        else:
            stack.append((a, m, fa, flm, fm, left, eps / 2, depth + 1))
            stack.append((m, b, fm, frm, fb, right, eps / 2, depth + 1))
    return total


def radial_integral(f: Callable[[float], float], R0: float, R1: float, n: int, tol: float = 1e-10) -> float:
    """int_{R0<|x|<R1} f(|x|) dx = |S^(n-1)| int f(r) r^(n-1) dr, by adaptive Simpson.

    An infinite R1 is mapped to (0, 1] through r = R0/u.
    """
    area = unit_sphere_area(n)
    if math.isinf(R1):
        if R0 <= 0:
            raise DomainError("integral over the whole space is not supported")

        def g(u):
            if u == 0.0:
                return 0.0
            r = R0 / u
            return f(r) * r ** (n - 1) * R0 / (u * u)

        probe = [abs(g(u)) for u in (1e-6, 1e-8)]
        if probe[1] > 10 * probe[0] + 1e-300 or probe[0] > 1e3 * max(abs(g(0.5)), 1e-300):
            raise DomainError("radial integral diverges at infinity")
        return area * adaptive_simpson(g, 0.0, 1.0, tol)
    return area * adaptive_simpson(lambda r: f(r) * r ** (n - 1), R0, R1, tol)


def monomial_radial_integral(terms: Sequence[tuple[float, float]], R0: float, R1: float, n: int) -> float:
    """Closed form of int f over the shell for f = sum c r^p."""
    area = unit_sphere_area(n)
    total = 0.0
    for c, p in terms:
        e = p + n
        if math.isinf(R1):
            if e >= 0:
                raise DomainError("radial integral diverges at infinity")
            total += c * (0.0 - R0**e) / e
        elif e == 0:
            total += c * (math.log(R1) - math.log(R0))
        else:
            total += c * (R1**e - R0**e) / e
    return area * total
