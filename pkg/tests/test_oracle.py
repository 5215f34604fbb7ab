import math

import numpy as np
import pytest

from tvflow4 import DomainError, IntegrationError
from tvflow4 import calibration as C
from tvflow4 import oracle as O
from tvflow4.radial_core import evaluate


@pytest.mark.parametrize("n", range(1, 8))
def test_basis_is_homogeneous_except_cubic(n):
    basis = O.basis_terms(n)
    assert O.operator_constant(basis[0], n) == pytest.approx(-2 * n * (n + 2))
    for b in basis[1:]:
        assert O.operator_constant(b, n) == pytest.approx(0.0, abs=1e-9)


def test_line_nonconstant_case():
    c, lam = O.bvp_solve(1, 1.0, 4.0, (-1.0, 0.0, -1.0, 0.0))
    assert c == pytest.approx((0.0, 0.0, 0.0, -1.0), abs=1e-12) and lam == pytest.approx(0.0, abs=1e-12)


def test_regular_origin_ball():
    c, lam = O.bvp_solve(3, 0.5, 1.0, (0.0, 0.0, -1.0, 0.0), regular_origin=True)
    assert lam == pytest.approx(-15.0)
    assert c[1] == 0.0 and c[3] == 0.0


@pytest.mark.parametrize("n", [1, 2, 3, 4, 5, 6, 7])
def test_bvp_matches_calibration_solver(n):
    for Q in (1.5, 3.0, 11.0):
        ref = C.annulus_coefficients(n, 0.8, 0.8 * Q, 1.0, -1.0)
        c, lam = O.bvp_solve(n, 0.8, 0.8 * Q, (1.0, 0.0, -1.0, 0.0))
        scale = max(map(abs, ref))
        assert max(abs(a - b) for a, b in zip(c, ref)) <= 1e-9 * scale
        assert lam == pytest.approx(-2 * n * (n + 2) * ref[0], rel=1e-9)


def test_bvp_rejects_bad_radii():
    with pytest.raises(DomainError):
        O.bvp_solve(3, 2.0, 1.0, (1, 0, -1, 0))


def test_grid_must_increase():
    with pytest.raises(DomainError):
        O.GridFunction(np.array([1.0, 0.5, 2.0]), np.zeros(3))


@pytest.mark.parametrize("n,R1", [(1, 3.0), (2, 5.0), (3, 4.0), (5, 3.0)])
def test_fd_residual_second_order(n, R1):
    prof = C.annulus_profile(n, 1.0, R1, C.Signature.constant())
    errs, hs = [], []
    for m in (50, 100, 200, 400):
        r = np.geomspace(1.0, R1, m).astype(np.longdouble)
        errs.append(O.fd_ode_residual(O.GridFunction(r, np.asarray(evaluate(prof, r).z)), n, prof.lam))
        hs.append(math.log(R1) / (m - 1))
    assert O.observed_order(errs, hs) >= 1.9


def test_fd_needs_points():
    with pytest.raises(DomainError):
        O.fd_ode_residual(O.GridFunction(np.arange(1.0, 6.0), np.zeros(5)), 3, 0.0)


def test_rk4_fourth_order():
    f = lambda t, y: np.array([-y[0] * y[0]])
    errs, hs = [], []
    for dt in (0.1, 0.05, 0.025, 0.0125):
        _, ys = O.rk4(f, [1.0], (0.0, 1.0), dt)
        errs.append(abs(ys[-1, 0] - 0.5))
        hs.append(dt)
    assert O.observed_order(errs, hs) >= 3.9


def test_rk4_hits_end_time_and_detects_blowup():
    ts, _ = O.rk4(lambda t, y: -y, [1.0], (0.0, 1.0), 0.3)
    assert ts[-1] == 1.0
    with pytest.raises(IntegrationError), np.errstate(over="ignore", invalid="ignore"):
        O.rk4(lambda t, y: y * y, [1.0], (0.0, 2.0), 0.01)


def test_quadrature():
    assert O.adaptive_simpson(math.sin, 0.0, math.pi) == pytest.approx(2.0, rel=1e-10)
    # volume of the unit ball in R^3
    assert O.radial_integral(lambda r: 1.0, 0.0, 1.0, 3) == pytest.approx(4 * math.pi / 3, rel=1e-10)
    tail = O.radial_integral(lambda r: r**-5, 1.0, math.inf, 3)
    assert tail == pytest.approx(O.monomial_radial_integral([(1.0, -5.0)], 1.0, math.inf, 3), rel=1e-8)
    with pytest.raises(DomainError):
        O.radial_integral(lambda r: 1.0, 1.0, math.inf, 2)
    with pytest.raises(DomainError):
        O.monomial_radial_integral([(1.0, 0.0)], 1.0, math.inf, 2)


def test_monomial_log_case():
    assert O.monomial_radial_integral([(1.0, -2.0)], 1.0, math.e, 2) == pytest.approx(2 * math.pi)


def test_unit_sphere_area():
    assert O.unit_sphere_area(2) == pytest.approx(2 * math.pi)
    assert O.unit_sphere_area(3) == pytest.approx(4 * math.pi)
