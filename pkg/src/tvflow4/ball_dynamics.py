"""Closed-form evolution of u0 = a0 * 1_{B_R0}.

For n != 2 the solution stays a multiple of the indicator of a ball.  In the
plane the ball facet is surrounded by a bending tail t/|x|^3 and there is no
extinction.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .calibration import ball_volume, sphere_area
from .errors import DomainError, SingularityError
from .radial_core import check_dimension


@dataclass(frozen=True)
class BallState:
    n: int
    a: float
    R: float
    t: float

    def gap(self) -> float:
        """a - t/R^3 (the jump at R for n = 2; equals a otherwise)."""
        if self.n == 2:
            return self.a - self.t / self.R**3
        return self.a


@dataclass(frozen=True)
class Extinct:
    n: int
    t: float
    t_star: float
    a: float = 0.0


def _check(n: int, a0: float, R0: float, t: float) -> None:
    check_dimension(n)
    if not R0 > 0 or not math.isfinite(R0):
        raise DomainError(f"initial radius must be positive, got {R0}")
    if a0 == 0 or not math.isfinite(a0):
        raise DomainError("initial height must be finite and nonzero")
    if t < 0:
        raise DomainError("time must be non-negative")


def extinction_time(n: int, a0: float, R0: float) -> float:
    check_dimension(n)
    if R0 <= 0:
        raise DomainError("R0 must be positive")
    if n <= 2:
        return math.inf
    return abs(a0) * R0**3 / (n * (4 * n - 10))


def _n2(A: float, R0: float, t: float) -> tuple[float, float]:
    # A = a0 R0^3 > 0
    S = math.hypot(A, 3.0 * t)
    R = R0 * math.sqrt(1.0 + 6.0 * t * (3.0 * t + S) / (A * A))
    return (S + t) / R**3, R


def evolve_ball(n: int, a0: float, R0: float, t: float) -> Union[BallState, Extinct]:
    _check(n, a0, R0, t)
    sign = 1.0 if a0 > 0 else -1.0
    a0 = abs(a0)
    A = a0 * R0**3
    if n == 2:
        a, R = _n2(A, R0, t)
        return BallState(n, sign * a, R, t)
    k = 4 * n - 10
    base = 1.0 - n * k * t / A
    if base <= 0.0:
        return Extinct(n, t, extinction_time(n, a0, R0))
    a = a0 * base ** ((n + 2) / k)
    R = R0 * base ** ((n - 4) / k)
    return BallState(n, sign * a, R, t)


def expected_first_integral(n: int, a0: float, R0: float, t: float) -> float:
    A = abs(a0) * R0**3
    if n == 2:
        return math.hypot(A, 3.0 * t) + t
    return A - n * (4 * n - 10) * t


def first_integral(n: int, state: BallState, a0: float, R0: float) -> float:
    """|a| R^3 minus its predicted value at state.t (zero on exact trajectories)."""
    return abs(state.a) * state.R**3 - expected_first_integral(n, a0, R0, state.t)


def profile_at(n: int, a0: float, R0: float, t: float, r):
    """u(t, r) for the ball datum, vectorized in r."""
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise DomainError("profile radii must be positive")
    st = evolve_ball(n, a0, R0, t)
    if isinstance(st, Extinct):
        return np.zeros_like(r)
    sign = 1.0 if a0 > 0 else -1.0
    outside = sign * t / r**3 if n == 2 else np.zeros_like(r)
    return np.where(r < st.R, st.a, outside)


def boundary_jump_speed(n: int, a: float, R: float, t: float = 0.0) -> float:
    """dR/dt of the ball facet with height a and radius R."""
    check_dimension(n)
    if a == 0:
        raise SingularityError("zero facet height")
    if R <= 0:
        raise DomainError("radius must be positive")
    if n == 2:
        return 3.0 * R / (abs(a) * R**3 - t)
    return -n * (n - 4) / (R * R * abs(a))


def height_speed(n: int, a: float, R: float) -> float:
    s = 1.0 if a > 0 else -1.0
    return -s * n * (n + 2) / R**3


def vector_field(n: int):
    """(a, R)' as a function of (t, y) for RK integration, a > 0."""
    def f(t, y):
        a, R = y
        return np.array([height_speed(n, a, R), boundary_jump_speed(n, a, R, t)])
    return f


def mass(n: int, state: Union[BallState, Extinct]) -> float:
    if isinstance(state, Extinct):
        return 0.0
    m = state.a * ball_volume(n, state.R)
    if n == 2:
        sign = 1.0 if state.a > 0 else -1.0
        m += sign * 2.0 * math.pi * state.t / state.R
    return m


def tv_energy(n: int, state: Union[BallState, Extinct]) -> float:
    """Total variation; in the plane it includes the jump gap and the tail."""
    if isinstance(state, Extinct):
        return 0.0
    if n == 2:
        return abs(state.gap()) * sphere_area(2, state.R) + 3.0 * math.pi * state.t / state.R**2
    return abs(state.a) * sphere_area(n, state.R)
