import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tvflow4 import DomainError, SingularityError
from tvflow4 import ball_dynamics as B
from tvflow4 import oracle as O


@pytest.mark.parametrize("n", [3, 4, 5, 6])
def test_extinction_time(n):
    assert B.extinction_time(n, 1.0, 1.0) == pytest.approx(1 / (n * (4 * n - 10)))
    st = B.evolve_ball(n, 1.0, 1.0, 2 * B.extinction_time(n, 1.0, 1.0))
    assert isinstance(st, B.Extinct) and st.a == 0


@pytest.mark.parametrize("n", [1, 2])
def test_no_extinction_low_dimension(n):
    assert B.extinction_time(n, 1.0, 1.0) == math.inf


def test_line_closed_form():
    st = B.evolve_ball(1, 1.0, 1.0, 4.0)
    assert st.a == pytest.approx(0.2) and st.R == pytest.approx(5.0)


def test_radius_trends():
    t3 = B.extinction_time(3, 1.0, 1.0)
    assert B.evolve_ball(3, 1.0, 1.0, 0.9 * t3).R == pytest.approx(0.1 ** -0.5)
    assert B.evolve_ball(4, 1.0, 1.0, 0.03).R == 1.0
    assert B.evolve_ball(5, 1.0, 1.0, 0.01).R < 1.0


def test_negative_height_is_mirrored():
    p, m = B.evolve_ball(3, 1.0, 1.0, 0.05), B.evolve_ball(3, -1.0, 1.0, 0.05)
    assert m.a == -p.a and m.R == p.R


def test_invalid_inputs():
    with pytest.raises(DomainError):
        B.evolve_ball(3, 1.0, -1.0, 0.1)
    with pytest.raises(DomainError):
        B.evolve_ball(3, 1.0, 1.0, -0.1)
    with pytest.raises(SingularityError):
        B.boundary_jump_speed(3, 0.0, 1.0)


heights = st.floats(0.1, 5.0)
radii = st.floats(0.2, 3.0)


@settings(max_examples=50, deadline=None)
@given(st.sampled_from([1, 3, 4, 5, 6, 7]), heights, radii, st.floats(0.0, 0.95))
def test_first_integral_constant(n, a0, R0, frac):
    T = B.extinction_time(n, a0, R0)
    t = frac * (T if math.isfinite(T) else 3.0)
    st = B.evolve_ball(n, a0, R0, t)
    assert abs(B.first_integral(n, st, a0, R0)) <= 1e-10 * max(1.0, a0 * R0**3)
    if n != 4:
        lhs = (st.a / a0) ** (n - 4)
        rhs = (st.R / R0) ** (n + 2)
        assert lhs == pytest.approx(rhs, rel=1e-9)


@settings(max_examples=30, deadline=None)
@given(heights, radii, st.floats(0.0, 10.0))
def test_planar_gap_and_mass(a0, R0, t):
    st = B.evolve_ball(2, a0, R0, t)
    assert st.gap() > 0
    m0 = B.mass(2, B.evolve_ball(2, a0, R0, 0.0))
    assert B.mass(2, st) == pytest.approx(m0, rel=1e-10)


@pytest.mark.parametrize("n", [1, 2, 3, 4, 5, 6])
def test_closed_form_solves_ode(n):
    T = min(0.5, 0.8 * B.extinction_time(n, 1.0, 1.0))
    ts, ys = O.rk4(B.vector_field(n), (1.0, 1.0), (0.0, T), T / 2000)
    st = B.evolve_ball(n, 1.0, 1.0, T)
    assert ys[-1, 0] == pytest.approx(st.a, rel=1e-9)
    assert ys[-1, 1] == pytest.approx(st.R, rel=1e-9)


@pytest.mark.parametrize("n", [1, 2, 3, 5])
def test_tv_decreases(n):
    T = min(1.0, 0.9 * B.extinction_time(n, 1.0, 1.0))
    tv = [B.tv_energy(n, B.evolve_ball(n, 1.0, 1.0, t)) for t in np.linspace(0, T, 30)]
    assert np.all(np.diff(tv) <= 1e-12)


def test_profile_has_planar_tail():
    t = 0.2
    st = B.evolve_ball(2, 1.0, 1.0, t)
    r = np.array([0.5 * st.R, 2 * st.R, 4 * st.R])
    u = B.profile_at(2, 1.0, 1.0, t, r)
    assert u[0] == st.a and u[1:] == pytest.approx(t / r[1:] ** 3)
    assert np.all(B.profile_at(3, 1.0, 1.0, t, r[1:]) == 0)


def test_mass_conserved_on_line():
    m = [B.mass(1, B.evolve_ball(1, 1.0, 1.0, t)) for t in np.linspace(0, 10, 11)]
    assert np.ptp(m) <= 1e-12
