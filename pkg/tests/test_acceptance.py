"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line."""
import csv
import json
import math
import time
from pathlib import Path

import numpy as np

from conftest import random_stack, record
from tvflow4 import ball_dynamics as B
from tvflow4 import calibration as C
from tvflow4 import cli
from tvflow4 import oracle as O
from tvflow4 import stack_dynamics as S
from tvflow4 import verify as V
from tvflow4.radial_core import geometric_grid, ode_residual

SCENARIOS = Path(__file__).resolve().parents[1] / "scenarios"


def _read(path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return {k: np.array([float(r[k]) for r in rows]) for k in rows[0]}


def test_criterion_1_qstar():
    t0 = time.perf_counter()
    q = C.compute_qstar.__wrapped__()
    dt = time.perf_counter() - t0
    m = abs(C.m_function(q))
    ok = 9.6 <= q <= 9.8 and q > 3 and m <= 1e-10 and dt < 0.1
    record(1, "Q* reproduction", ok, f"Q*={q:.10f} |m(Q*)|={m:.1e} time={dt:.3f}s")
    assert ok


def test_criterion_2_calibration_correctness():
    t0 = time.perf_counter()
    worst_bc = worst_ode = worst_sup = worst_coef = 0.0
    verdicts = []
    for n in range(1, 8):
        verdicts.append(C.solve_ball(n, 1.3))
    for n in (1, 3, 4, 5, 6):
        verdicts.append(C.solve_complement(n, 0.7))
    annuli = V.random_annuli(50)
    for n, R0, R1 in annuli:
        for sig in (C.Signature.constant(), C.Signature.nonconstant()):
            verdicts.append(C.solve_annulus(n, R0, R1, sig))
        for form, bc in ((C.closed_form_constant, (1.0, 0.0, -1.0, 0.0)),
                         (C.closed_form_nonconstant, (-1.0, 0.0, -1.0, 0.0))):
            c_ref, _ = O.bvp_solve(n, R0, R1, bc)
            c = form(n, R0, R1)
            scale = max(abs(x) for x in c_ref)
            worst_coef = max(worst_coef, max(abs(x - y) for x, y in zip(c, c_ref)) / scale)
    for v in verdicts:
        w = getattr(v, "witness", v)
        prof = w.profile
        worst_bc = max(worst_bc, max(abs(x) for x in w.bc_residuals))
        worst_ode = max(worst_ode, float(np.max(np.abs(ode_residual(prof, geometric_grid(prof, 100))))))
        if w.admissible:
            worst_sup = max(worst_sup, w.sup_abs_z - 1.0)
    dt = time.perf_counter() - t0
    ok = (worst_bc <= 1e-12 and worst_ode <= 1e-9 and worst_sup <= 1e-10
          and worst_coef <= 1e-8 and dt < 5.0)
    record(2, "calibration correctness", ok,
           f"{len(verdicts)} cases bc={worst_bc:.1e} ode={worst_ode:.1e} "
           f"sup-1={worst_sup:.1e} coef={worst_coef:.1e} time={dt:.2f}s")
    assert ok


def test_criterion_3_classification_table():
    res = V.check_classification()
    record(3, "classification table", res.passed, f"mismatches={int(res.value)}")
    assert res.passed


def test_criterion_4_ball_dynamics():
    t0 = time.perf_counter()
    worst_ext = 0.0
    for n in (3, 4, 5, 6):
        ts = B.extinction_time(n, 1.0, 1.0)
        tr = S.evolve(S.Stack.ball(n, 1.0, 1.0), 1.5 * ts,
                      S.EvolveOptions(dt=1.5 * ts / 1000, record_states=False))
        worst_ext = max(worst_ext, abs(tr.extinction_time() - ts) / ts)
    ts4 = B.extinction_time(4, 1.0, 1.0)
    tr4 = S.evolve(S.Stack.ball(4, 1.0, 1.0), 0.9 * ts4, S.EvolveOptions(dt=0.9 * ts4 / 500))
    drift4 = max(abs(s.stack.radii[0] - 1.0) for s in tr4.states)
    closed4 = max(abs(B.evolve_ball(4, 1.0, 1.0, t).R - 1.0) for t in np.linspace(0, 0.9 * ts4, 50))
    growth3 = B.evolve_ball(3, 1.0, 1.0, 0.9 * B.extinction_time(3, 1.0, 1.0)).R
    worst_fi = 0.0
    for n in range(1, 8):
        T = min(10.0, 0.99 * B.extinction_time(n, 1.0, 1.0))
        for t in np.linspace(0.0, T, 101):
            st = B.evolve_ball(n, 1.0, 1.0, float(t))
            worst_fi = max(worst_fi, abs(B.first_integral(n, st, 1.0, 1.0)))
    dt = time.perf_counter() - t0
    ok = (worst_ext <= 1e-4 and max(drift4, closed4) <= 1e-10 and growth3 > 3.0
          and worst_fi <= 1e-10 and dt < 10.0)
    record(4, "ball dynamics", ok,
           f"extinction rel={worst_ext:.1e} n=4 drift={max(drift4, closed4):.1e} "
           f"n=3 R(0.9t*)={growth3:.4f} first-integral={worst_fi:.1e} time={dt:.2f}s")
    assert ok


def test_criterion_5_low_dimension_mass_and_gap():
    worst = 0.0
    min_gap = math.inf
    times = np.linspace(0.0, 10.0, 101)
    for n in (1, 2):
        m0 = B.mass(n, B.evolve_ball(n, 1.0, 1.0, 0.0))
        for t in times:
            st = B.evolve_ball(n, 1.0, 1.0, float(t))
            worst = max(worst, abs(B.mass(n, st) - m0) / abs(m0))
            if n == 2:
                min_gap = min(min_gap, st.gap())
    outs = [float(t) for t in times[::10]]
    tr1 = S.evolve(S.Stack.ball(1, 1.0, 1.0), 10.0, S.EvolveOptions(outputs=outs))
    tr2 = S.evolve_n2(S.Stack.ball(2, 1.0, 1.0), 10.0, S.EvolveOptions(outputs=outs))
    for n, tr in ((1, tr1), (2, tr2)):
        m = [S.mass_and_energy(s)[0] for s in tr.snapshots.values()]
        worst = max(worst, float(np.ptp(m)) / abs(m[0]))
    for t, s in tr2.snapshots.items():
        R = s.stack.radii[0]
        min_gap = min(min_gap, s.stack.values[0] - t / R**3)
    ok = worst <= 1e-6 and min_gap > 0
    record(5, "n<=2 mass and gap", ok, f"mass rel={worst:.1e} min gap={min_gap:.4f}")
    assert ok


def test_criterion_6_oracle_equivalence():
    worst = 0.0
    for n in range(1, 7):
        T = min(1.0, 0.9 * B.extinction_time(n, 1.0, 1.0))
        ts, ys = O.rk4(B.vector_field(n), (1.0, 1.0), (0.0, T), 1e-5)
        idx = np.linspace(0, len(ts) - 1, 101).astype(int)
        for i in idx:
            ex = B.evolve_ball(n, 1.0, 1.0, float(ts[i]))
            worst = max(worst, abs(ys[i, 0] - ex.a) / abs(ex.a), abs(ys[i, 1] - ex.R) / ex.R)
    rk = V.check_rk4_order()
    fd = V.check_fd_order()
    ok = worst <= 1e-7 and rk.passed and fd.passed
    record(6, "oracle equivalence", ok,
           f"rk4 vs closed form={worst:.1e} rk4 order={-rk.value:.2f} fd order={-fd.value:.2f}")
    assert ok


def _evolve(path, out):
    prefix = out / path.stem
    assert cli.main(["evolve", str(path), "--out", str(prefix)]) == 0
    traj = _read(f"{prefix}_trajectory.csv")
    profiles = sorted(out.glob(f"{path.stem}_profile_*.csv"))
    return traj, [_read(p) for p in profiles], json.loads(Path(f"{prefix}_restart.json").read_text())


def _series(traj, k):
    mask = traj["k"] == k
    return traj["t"][mask], traj["a"][mask], traj["R"][mask]


def test_criterion_7_scenario_reproduction(tmp_path, capsys):
    facts = {}
    for n in range(1, 7):
        traj, profiles, _ = _evolve(SCENARIOS / f"ball_n{n}.json", tmp_path)
        _, a, R = _series(traj, 0)
        dR = np.diff(R)
        facts[f"ball n={n} a decreasing"] = bool(np.all(np.diff(a) < 0))
        if n <= 3:
            facts[f"ball n={n} R increasing"] = bool(np.all(dR > 0))
        elif n == 4:
            facts[f"ball n={n} R constant"] = bool(np.max(np.abs(R - R[0])) <= 1e-10)
        else:
            facts[f"ball n={n} R decreasing"] = bool(np.all(dR < 0))
        assert len(profiles) == 4
        if n == 2:
            last = profiles[-1]
            t = last["t"][0]
            outer = last["r"] > 1.5 * R[-1]
            tail = last["u"][outer] * last["r"][outer] ** 3 / t
            facts["ball n=2 t/r^3 tail"] = bool(t > 0 and np.allclose(tail, 1.0, rtol=1e-9))
    for n in range(1, 7):
        traj, profiles, _ = _evolve(SCENARIOS / f"annulus_n{n}.json", tmp_path)
        _, a0, R0 = _series(traj, 0)
        _, a1, R1 = _series(traj, 1)
        # the inner radius starts shrinking in every dimension; for n=1 it later turns back
        facts[f"annulus n={n} inner R initially decreasing"] = bool(R0[1] < R0[0])
        if n == 3:
            facts["annulus n=3 inner R decreasing"] = bool(np.all(np.diff(R0) < 0))
        facts[f"annulus n={n} inner height increasing"] = bool(np.all(np.diff(a0) > 0))
        facts[f"annulus n={n} annulus height decreasing"] = bool(np.all(np.diff(a1) < 0))
        if n == 3:
            facts["annulus n=3 outer R increasing"] = bool(np.all(np.diff(R1) > 0))
        assert len(profiles) == 4
    traj, profiles, restart = _evolve(SCENARIOS / "thick_annulus_n2.json", tmp_path)
    last = profiles[-1]
    t_last = last["t"][0]
    fin = traj["t"] == traj["t"].max()
    radii, values = traj["R"][fin], traj["a"][fin]
    idx = np.searchsorted(radii, last["r"], side="right")
    step_u = np.where(idx < len(values), values[np.minimum(idx, len(values) - 1)], 0.0)
    dev = float(np.max(np.abs(last["u"] - step_u)))
    facts["thick annulus bending gone at t=6"] = bool(
        t_last == 6.0 and dev <= 1e-3 and all(k == "facet" for k in restart["kinds"]))
    capsys.readouterr()
    failed = [k for k, v in facts.items() if not v]
    ok = not failed
    record(7, "scenario reproduction", ok,
           f"{len(facts) - len(failed)}/{len(facts)} facts hold, thick annulus deviation={dev:.1e}"
           + (f" failed: {failed}" if failed else ""))
    assert ok


def test_criterion_8_property_suite():
    rng = np.random.default_rng(20240611)
    t0 = time.perf_counter()
    worst_tv = worst_jump = 0.0
    runs = events = 0
    T = 0.02
    for n in (1, 3, 4, 5):
        for _ in range(20):
            st = random_stack(rng, n)
            tr = S.evolve(st, T, S.EvolveOptions(dt=T / 300))
            tv = np.array([S.mass_and_energy(s)[1] for s in tr.states])
            worst_tv = max(worst_tv, float(np.max(np.diff(tv), initial=0.0)) / max(1.0, tv[0]))
            zero = S.Stack(n, (), (0.0,), validate=False)
            for a, b in zip(tr.states, tr.states[1:]):
                if a.t == b.t:
                    events += 1
                    norm = S.l1_distance(a, S.EvolutionState(a.t, zero))
                    worst_jump = max(worst_jump, S.l1_distance(a, b) / max(norm, 1.0))
            runs += 1
    dt = time.perf_counter() - t0
    ok = worst_tv <= 1e-10 and worst_jump <= 1e-6 and dt < 60.0
    record(8, "property suite", ok,
           f"{runs} runs {events} events TV rise={worst_tv:.1e} L1 jump={worst_jump:.1e} time={dt:.1f}s")
    assert ok
