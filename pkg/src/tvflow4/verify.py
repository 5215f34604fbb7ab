"""Self-check suites run by ``tvflow4 verify``.

Each check is a small function returning a :class:`CheckResult`; a suite is
a list of them.  The suites cross the closed forms against the independent
oracle module, so a pass means two unrelated code paths agree.
"""
from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass
from typing import Callable

import numpy as np

from . import ball_dynamics as B
from . import calibration as C
from . import oracle as O
from . import stack_dynamics as S
from .radial_core import evaluate, geometric_grid, ode_residual


@dataclass
class CheckResult:
    name: str
    passed: bool
    value: float
    tolerance: float
    seconds: float = 0.0

    def to_dict(self) -> dict:
        d = asdict(self)
        for k in ("value", "tolerance"):
            if not math.isfinite(d[k]):
                d[k] = str(d[k])
        return d


def _check(name: str, value: float, tol: float, ok: bool | None = None) -> CheckResult:
    return CheckResult(name, bool(value <= tol) if ok is None else bool(ok), float(value), float(tol))


# --- calibration --------------------------------------------------------------

def check_qstar() -> CheckResult:
    q = C.compute_qstar()
    return _check("qstar", abs(C.m_function(q)), 1e-10, 9.6 <= q <= 9.8 and abs(C.m_function(q)) <= 1e-10)


def random_annuli(count: int = 50, seed: int = 12345):
    """(n, R0, R1) triples shared by the calibration checks."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        n = int(rng.integers(1, 8))
        R0 = float(rng.uniform(0.3, 3.0))
        Q = float(rng.uniform(1.2, 30.0 if n != 2 else 9.0))
        out.append((n, R0, Q * R0))
    return out


def check_closed_forms(count: int = 50) -> CheckResult:
    """Printed coefficient formulas against the oracle's independent linear solve."""
    worst = 0.0
    for n, R0, R1 in random_annuli(count):
        for form, bc in ((C.closed_form_constant, (1.0, 0.0, -1.0, 0.0)),
                         (C.closed_form_nonconstant, (-1.0, 0.0, -1.0, 0.0))):
            c_ref, _ = O.bvp_solve(n, R0, R1, bc)
            c = form(n, R0, R1)
            scale = max(abs(x) for x in c_ref)
            worst = max(worst, max(abs(x - y) for x, y in zip(c, c_ref)) / scale)
    return _check("closed_forms_vs_oracle", worst, 1e-8)


def check_calibration_residuals(count: int = 50) -> CheckResult:
    worst_bc = worst_ode = 0.0
    cases = []
    for n in range(1, 8):
        cases.append(C.solve_ball(n, 1.3).profile)
    for n in (1, 3, 4, 5, 6):
        cases.append(C.solve_complement(n, 0.7).witness.profile)
    for n, R0, R1 in random_annuli(count):
        for sig in (C.Signature.constant(), C.Signature.nonconstant()):
            cases.append(C.annulus_profile(n, R0, R1, sig))
    for prof in cases:
        grid = geometric_grid(prof, 100)
        worst_ode = max(worst_ode, float(np.max(np.abs(ode_residual(prof, grid)))))
    for n, R0, R1 in random_annuli(count):
        for sig in (C.Signature.constant(), C.Signature.nonconstant()):
            v = C.solve_annulus(n, R0, R1, sig)
            worst_bc = max(worst_bc, max(abs(x) for x in v.witness.bc_residuals))
    ok = worst_bc <= 1e-12 and worst_ode <= 1e-9
    return _check("calibration_residuals", max(worst_bc, worst_ode), 1e-9, ok)


def check_classification() -> CheckResult:
    mismatches = 0
    for n in range(1, 8):
        mismatches += not C.classify(C.GeneralizedAnnulus(0.0, 1.0, n))
    for n in (1, 2, 3, 4, 5, 6):
        got = bool(C.classify(C.GeneralizedAnnulus(1.0, math.inf, n)))
        mismatches += got != (n != 2)
    for n in range(1, 8):
        for Q in (1.5, 4.0, 15.0):
            got = bool(C.solve_annulus(n, 1.0, Q, C.Signature.nonconstant()))
            mismatches += got != (n != 2)
    q = C.compute_qstar()
    grid = np.linspace(1.01, 20.0, 1000)
    verdicts = np.array([bool(C.solve_annulus(2, 1.0, Q, C.Signature.constant())) for Q in grid])
    flips = np.flatnonzero(verdicts[:-1] != verdicts[1:])
    cell = grid[1] - grid[0]
    good_flip = len(flips) == 1 and abs(grid[flips[0]] - q) <= cell and verdicts[0] and not verdicts[-1]
    mismatches += not good_flip
    return _check("classification_table", mismatches, 0)


# --- oracle -------------------------------------------------------------------

def check_fd_order() -> CheckResult:
    """Nested finite differences of a calibration converge at second order."""
    prof = C.annulus_profile(3, 1.0, 4.0, C.Signature.constant())
    errs, hs = [], []
    for m in (50, 100, 200, 400):
        r = np.geomspace(1.0, 4.0, m).astype(np.longdouble)
        z = np.asarray(evaluate(prof, r).z)
        errs.append(O.fd_ode_residual(O.GridFunction(r, z), 3, prof.lam))
        hs.append(math.log(4.0) / (m - 1))
    order = O.observed_order(errs, hs)
    return _check("fd_residual_order", -order, -1.9)


def check_rk4_order() -> CheckResult:
    n, T = 3, 0.05
    exact = B.evolve_ball(n, 1.0, 1.0, T)
    errs, hs = [], []
    for dt in (T / 10, T / 20, T / 40, T / 80):
        _, ys = O.rk4(B.vector_field(n), (1.0, 1.0), (0.0, T), dt)
        errs.append(abs(ys[-1, 0] - exact.a) + abs(ys[-1, 1] - exact.R))
        hs.append(dt)
    order = O.observed_order(errs, hs)
    return _check("rk4_order", -order, -3.9)


def check_saint_venant() -> CheckResult:
    worst = 0.0
    for n, R0, R1 in random_annuli(20, seed=7):
        lam_sv = C.saint_venant_lambda(C.GeneralizedAnnulus(R0, R1, n), C.Signature.constant())
        lam = C.annulus_profile(n, R0, R1, C.Signature.constant()).lam
        worst = max(worst, abs(lam_sv - lam) / max(1.0, abs(lam)))
    return _check("saint_venant_lambda", worst, 1e-8)


# --- dynamics -------------------------------------------------------------------

def _horizon(n: int, T: float) -> float:
    """T, cut to half the extinction time where there is one."""
    return min(T, 0.5 * B.extinction_time(n, 1.0, 1.0))


def check_ball_oracle(dt: float = 1e-4, T: float = 0.1) -> CheckResult:
    """RK4 of the ball ODE matches the closed form (every dimension tried)."""
    worst = 0.0
    for n in (1, 2, 3, 4, 5, 6):
        ts, ys = O.rk4(B.vector_field(n), (1.0, 1.0), (0.0, _horizon(n, T)), dt)
        for t, (a, R) in zip(ts[:: max(1, len(ts) // 10)], ys[:: max(1, len(ts) // 10)]):
            st = B.evolve_ball(n, 1.0, 1.0, float(t))
            worst = max(worst, abs(a - st.a) / abs(st.a), abs(R - st.R) / st.R)
    return _check("ball_rk4_vs_closed_form", worst, 1e-7)


def check_stack_ball(T: float = 0.02) -> CheckResult:
    """The stack integrator on a single facet reproduces the ball closed form."""
    worst = 0.0
    for n in (1, 2, 3, 4, 5):
        h = _horizon(n, T)
        tr = S.evolve_any(S.Stack.ball(n, 1.0, 1.0), h, S.EvolveOptions(dt=h / 200, record_states=False))
        st = B.evolve_ball(n, 1.0, 1.0, h)
        fin = tr.final.stack
        worst = max(worst, abs(fin.values[0] - st.a) / st.a, abs(fin.radii[0] - st.R) / st.R)
    return _check("stack_vs_ball_closed_form", worst, 1e-8)


def check_extinction() -> CheckResult:
    worst = 0.0
    for n in (3, 4, 5, 6):
        ts = B.extinction_time(n, 1.0, 1.0)
        tr = S.evolve(S.Stack.ball(n, 1.0, 1.0), 1.5 * ts, S.EvolveOptions(dt=1.5 * ts / 1000, record_states=False))
        worst = max(worst, abs(tr.extinction_time() - ts) / ts)
    return _check("extinction_time", worst, 1e-4)


def check_mass_low_dim() -> CheckResult:
    worst = 0.0
    for n in (1, 2):
        m0 = B.mass(n, B.evolve_ball(n, 1.0, 1.0, 0.0))
        for t in np.linspace(0.0, 10.0, 41):
            worst = max(worst, abs(B.mass(n, B.evolve_ball(n, 1.0, 1.0, float(t))) - m0) / abs(m0))
    return _check("ball_mass_n_le_2", worst, 1e-6)


SUITES: dict[str, list[Callable[[], CheckResult]]] = {
    "calibration": [check_qstar, check_closed_forms, check_calibration_residuals, check_classification],
    "oracle": [check_fd_order, check_rk4_order, check_saint_venant, check_ball_oracle],
    "dynamics": [check_stack_ball, check_extinction, check_mass_low_dim],
}


def run_suite(name: str = "all") -> list[CheckResult]:
    names = list(SUITES) if name == "all" else [name]
    out = []
    for s in names:
        for fn in SUITES[s]:
            t0 = time.perf_counter()
            try:
                res = fn()
            except Exception as exc:  # a crash is a failed check, not a crashed suite
                res = CheckResult(f"{fn.__name__}: {type(exc).__name__}: {exc}", False, math.nan, math.nan)
            res.seconds = time.perf_counter() - t0
            out.append(res)
    return out
