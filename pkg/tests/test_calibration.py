import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tvflow4 import DomainError, RangeError, UnsupportedDomainError
from tvflow4 import calibration as C
from tvflow4.radial_core import evaluate, geometric_grid, ode_residual

CONST = C.Signature.constant()
NONCONST = C.Signature.nonconstant()


# --- Q* -----------------------------------------------------------------------

def test_qstar_value_and_root():
    q = C.compute_qstar()
    assert 9.6 <= q <= 9.8 and q > 3
    assert abs(C.m_function(q)) <= 1e-10
    assert q == pytest.approx(9.7063113864, abs=1e-9)


def test_m_is_negative_then_positive():
    Q = np.linspace(1.001, 30, 2000)
    m = C.m_function(Q)
    q = C.compute_qstar()
    assert np.all(m[Q < q - 1e-6] < 0) and np.all(m[Q > q + 1e-6] > 0)


def test_m_derivative_matches_differences():
    Q = np.array([1.5, 3.0, 7.0, 12.0])
    h = 1e-6
    fd = (C.m_function(Q + h) - C.m_function(Q - h)) / (2 * h)
    assert np.allclose(C.m_derivative(Q), fd, rtol=1e-6, atol=1e-9)


def test_m_domain():
    with pytest.raises(DomainError):
        C.m_function(0.5)


def test_bad_bracket():
    with pytest.raises(DomainError):
        C.compute_qstar(11.0, 20.0)


# --- balls and complements ----------------------------------------------------

@pytest.mark.parametrize("n", range(1, 8))
def test_ball_calibration(n):
    R = 1.7
    cal = C.solve_ball(n, R)
    assert cal.lam == pytest.approx(-n * (n + 2) / R**3)
    assert cal.admissible and max(cal.bc_residuals) <= 1e-12
    assert evaluate(cal.profile, R).z == pytest.approx(-1.0)
    assert C.classify(C.GeneralizedAnnulus(0.0, R, n)).calibrable


@pytest.mark.parametrize("n", [1, 3, 4, 5, 6])
def test_complement_calibrable_except_plane(n):
    v = C.solve_complement(n, 0.8)
    assert v.calibrable and v.witness.lam == 0.0
    assert max(v.witness.bc_residuals) <= 1e-12
    assert v.witness.sup_abs_z <= 1 + 1e-10


def test_planar_complement_not_calibrable():
    v = C.classify(C.GeneralizedAnnulus(1.0, math.inf, 2))
    assert not v and v.reason is C.Reason.NO_BOUNDED_SOLUTION
    with pytest.raises(DomainError):
        C.complement_profile(2, 1.0)


def test_whole_space_unsupported():
    with pytest.raises(UnsupportedDomainError):
        C.classify(C.GeneralizedAnnulus(0.0, math.inf, 3))


def test_bad_geometry():
    with pytest.raises(DomainError):
        C.GeneralizedAnnulus(2.0, 1.0, 3)
    with pytest.raises(DomainError):
        C.solve_annulus(3, 1.0, 1.0, CONST)
    with pytest.raises(DomainError):
        C.Signature(2, 1)


def test_dimension_range():
    with pytest.raises(RangeError):
        C.annulus_coefficients(C.MAX_DIMENSION + 1, 1.0, 2.0, 1.0, -1.0)


# --- annuli -------------------------------------------------------------------

def test_nonconstant_line_reduces_to_minus_one():
    c = C.annulus_profile(1, 1.0, 3.0, NONCONST).coeffs
    assert c == pytest.approx((0.0, 0.0, 0.0, -1.0), abs=1e-12)


annulus = st.tuples(st.integers(1, 7), st.floats(0.2, 3.0), st.floats(1.2, 25.0))


@settings(max_examples=50, deadline=None)
@given(annulus, st.sampled_from([CONST, NONCONST]))
def test_annulus_solution_properties(case, sig):
    n, R0, Q = case
    R1 = Q * R0
    prof = C.annulus_profile(n, R0, R1, sig)
    s0, s1 = evaluate(prof, R0), evaluate(prof, R1)
    assert s0.z == pytest.approx(-sig.chi_inner, abs=1e-12)
    assert s1.z == pytest.approx(sig.chi_outer, abs=1e-12)
    assert abs(s0.z_prime) * R0 <= 1e-11 and abs(s1.z_prime) * R1 <= 1e-11
    res = ode_residual(prof, geometric_grid(prof, 100))
    assert np.max(np.abs(res)) <= 1e-9 * max(1.0, abs(prof.lam))


@settings(max_examples=50, deadline=None)
@given(annulus)
def test_closed_forms_match_linear_solve(case):
    n, R0, Q = case
    R1 = Q * R0
    for form, zi, zo in ((C.closed_form_constant, 1.0, -1.0), (C.closed_form_nonconstant, -1.0, -1.0)):
        ref = C.annulus_coefficients(n, R0, R1, zi, zo)
        got = form(n, R0, R1)
        scale = max(abs(x) for x in ref)
        assert max(abs(a - b) for a, b in zip(got, ref)) <= 1e-8 * scale


def test_planar_closed_form_c2_needs_log_term():
    # the coefficient of r depends on log R1 once the basis uses r log r
    a = C.closed_form_constant(2, 2.0, 6.0)
    b = C.annulus_coefficients(2, 2.0, 6.0, 1.0, -1.0)
    assert a[2] == pytest.approx(b[2], rel=1e-10)


@pytest.mark.parametrize("n", [1, 3, 4, 5, 6, 7])
@pytest.mark.parametrize("Q", [1.05, 2.0, 9.0, 50.0])
def test_nonconstant_calibrable_off_plane(n, Q):
    assert C.solve_annulus(n, 1.0, Q, NONCONST)


@pytest.mark.parametrize("Q", [1.5, 5.0, 30.0])
def test_nonconstant_not_calibrable_in_plane(Q):
    v = C.solve_annulus(2, 1.0, Q, NONCONST)
    assert not v and v.witness.sup_abs_z > 1


def test_constant_signature_plane_threshold():
    q = C.compute_qstar()
    assert C.solve_annulus(2, 1.0, q * (1 - 1e-4), CONST)
    v = C.solve_annulus(2, 1.0, q * (1 + 1e-4), CONST)
    assert not v and v.violation_radius == pytest.approx(1.0)
    assert not C.solve_annulus(2, 1.0, 20.0, CONST)


def test_thin_planar_annulus_is_calibrable():
    assert C.solve_annulus(2, 1.0, 1.001, CONST)
    assert C.solve_annulus(2, 1.0, 1.01, CONST)


@pytest.mark.parametrize("n", [1, 2, 3, 4, 5])
def test_predicted_table_matches_solver(n):
    for Q in (1.5, 4.0, 15.0):
        got = bool(C.solve_annulus(n, 1.0, Q, CONST))
        assert got == C.predicted_calibrable(n, C.DomainKind.ANNULUS, True, Q)
    assert C.predicted_calibrable(n, C.DomainKind.COMPLEMENT) == (n != 2)


# --- identities -------------------------------------------------------------------

@settings(max_examples=30, deadline=None)
@given(annulus)
def test_saint_venant_speed_matches(case):
    n, R0, Q = case
    dom = C.GeneralizedAnnulus(R0, Q * R0, n)
    lam = C.annulus_profile(n, R0, Q * R0, CONST).lam
    assert C.saint_venant_lambda(dom, CONST) == pytest.approx(lam, rel=1e-8, abs=1e-12)


@pytest.mark.parametrize("n", [1, 2, 3, 5])
def test_divergence_mass_equals_boundary_measure(n):
    for sig in (CONST, NONCONST):
        v = C.solve_annulus(n, 0.7, 2.3, sig)
        assert C.divergence_mass(v.witness, 0.7, 2.3) == pytest.approx(
            C.signed_boundary_measure(n, 0.7, 2.3, sig), rel=1e-10)


def test_ball_volume_and_sphere():
    assert C.ball_volume(3, 2.0) == pytest.approx(4 / 3 * math.pi * 8)
    assert C.sphere_area(2, 1.5) == pytest.approx(3 * math.pi)
    assert C.sphere_area(1) == 2.0


def test_inflection_count_ball():
    assert C.inflection_count(C.solve_ball(3, 1.0)) == 0


# --- batched boundary data ------------------------------------------------------

def _reference(n, R0, R1, zi, zo):
    c = C.annulus_coefficients(n, R0, R1, zi, zo)
    from tvflow4.radial_core import RadialProfile
    p = RadialProfile(n, c, R0, R1)
    return p.lam, evaluate(p, R0).z_second, evaluate(p, R1).z_second


@pytest.mark.parametrize("n", [1, 2, 3, 4, 6])
def test_boundary_data_paths_agree(n, rng):
    for _ in range(20):
        R0 = rng.uniform(0.3, 2.0)
        R1 = R0 * rng.uniform(1.15, 8.0)
        zi, zo = rng.choice([-1.0, 1.0], 2)
        ref = _reference(n, R0, R1, zi, zo)
        vec = C.annulus_boundary_data(n, R0, R1, zi, zo)
        sca = C.annulus_boundary_scalar(n, R0, R1, zi, zo)
        for a, b, c in zip(ref, vec, sca):
            assert float(b) == pytest.approx(a, rel=1e-9, abs=1e-9)
            assert c == pytest.approx(a, rel=1e-9, abs=1e-9)


@pytest.mark.parametrize("n", [1, 2, 3, 5])
def test_thin_expansion_continuous_at_switch(n):
    R0 = 1.3
    w = 2 * C.THIN * R0 / (1 - C.THIN)  # relative half-width exactly THIN
    below = C.annulus_boundary_data(n, R0, R0 + w * (1 - 1e-9), 1.0, -1.0)
    above = C.annulus_boundary_data(n, R0, R0 + w * (1 + 1e-9), 1.0, -1.0)
    for a, b in zip(below, above):
        assert float(a) == pytest.approx(float(b), rel=1e-6)


def test_thin_scalar_matches_batch(rng):
    for _ in range(100):
        n = int(rng.integers(1, 7))
        R0 = rng.uniform(0.2, 3)
        w = R0 * 10 ** rng.uniform(-8, -1.1)
        zi, zo = rng.choice([-1.0, 1.0], 2)
        a = C._thin_scalar(n, R0, R0 + w, zi, zo)
        b = C._thin_data(n, np.array(R0), np.array(R0 + w), np.array(zi), np.array(zo))
        for x, y in zip(a, b):
            assert x == pytest.approx(float(y), rel=1e-12, abs=1e-12)
