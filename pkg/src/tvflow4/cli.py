"""Command-line entry point: ``tvflow4 {calibrate,qstar,evolve,verify}``."""
from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import ball_dynamics as B
from . import calibration as C
from . import stack_dynamics as S
from .errors import DomainError, IntegrationError, TVFlowError
from .radial_core import geometric_grid, sample

EXIT_OK = 0
EXIT_VERIFY = 1
EXIT_INPUT = 2
EXIT_NOT_CALIBRABLE = 3
EXIT_INTEGRATION = 4

EXIT_CODES = """exit codes:
  0  success
  1  verification failure (verify)
  2  invalid input: bad flags, geometry or scenario file
  3  not calibrable (calibrate; the inadmissible profile is still written)
  4  integration failure (evolve)
"""


def fmt(x: float) -> str:
    """17 significant digits: enough to round-trip a double."""
    return f"{float(x):.17g}"


def write_csv(path: Path, header: Sequence[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([v if isinstance(v, str) else (str(v) if isinstance(v, (int, np.integer)) else fmt(v)) for v in row])


def read_csv(path) -> tuple[list[str], np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], np.array(rows[1:], dtype=float)


# --- calibrate ------------------------------------------------------------------

def cmd_calibrate(args) -> int:
    n, r0, r1 = args.n, args.r0, args.r1
    sig = C.Signature.constant() if args.signature == "const" else C.Signature.nonconstant()
    dom = C.GeneralizedAnnulus(r0, r1, n)
    verdict = C.classify(dom, sig if dom.kind is C.DomainKind.ANNULUS else None)
    cal = verdict.witness if isinstance(verdict, C.CalibrabilityVerdict) else None
    print(f"domain      {dom.kind.value}  n={n}  R0={fmt(r0)}  R1={fmt(r1)}")
    if cal is None:
        print(f"verdict     NOT CALIBRABLE ({verdict.reason.value}): no bounded radial solution")
        return EXIT_NOT_CALIBRABLE
    c = cal.profile.coeffs
    print("coeffs      " + "  ".join(f"c{i}={fmt(v)}" for i, v in enumerate(c)))
    print(f"lambda      {fmt(cal.lam)}")
    print(f"sup|z|      {fmt(cal.sup_abs_z)}  at r={fmt(cal.argmax)}")
    if verdict:
        print("verdict     CALIBRABLE")
    else:
        where = verdict.violation_radius
        print(f"verdict     NOT CALIBRABLE ({verdict.reason.value}) near r={fmt(where if where is not None else math.nan)}")
    if args.csv:
        r = geometric_grid(cal.profile, args.samples, interior=False)
        if r0 == 0:
            r = np.linspace(0.0, r1, args.samples)
            r[0] = 1e-12 * r1
        z = sample(cal.profile, r)
        flag = np.abs(z) > 1.0 + cal.sup_tol
        write_csv(Path(args.csv), ["r", "z", "exceeds_unit_bound"], zip(r, z, flag.astype(int)))
        print(f"wrote       {args.csv}")
    return EXIT_OK if verdict else EXIT_NOT_CALIBRABLE


# --- qstar ----------------------------------------------------------------------

def cmd_qstar(args) -> int:
    q = C.compute_qstar()
    print(f"Q* = {q:.10f}")
    print(f"m(Q*) = {C.m_function(q):.3e}")
    if args.table:
        print("Q,m(Q)")
        for Q in np.linspace(args.table_min, args.table_max, args.table_points):
            print(f"{fmt(Q)},{fmt(C.m_function(Q))}")
    return EXIT_OK


# --- evolve ---------------------------------------------------------------------

@dataclass
class Scenario:
    n: int
    kind: str
    radii: list
    values: list
    t_end: float
    dt: Optional[float] = None
    outputs: list = field(default_factory=list)
    t0: float = 0.0
    bending: list = field(default_factory=list)
    kinds: list = field(default_factory=list)

    @property
    def extinct(self) -> bool:
        return not self.radii

    def stack(self) -> S.Stack:
        return S.Stack(self.n, tuple(self.radii), tuple(self.values), validate=not self.kinds)

    def to_dict(self) -> dict:
        return {
            "n": self.n, "kind": self.kind, "radii": self.radii, "values": self.values,
            "t_end": self.t_end, "dt": self.dt, "outputs": self.outputs, "t0": self.t0,
            "bending": self.bending, "kinds": self.kinds,
        }


def read_scenario(path) -> dict:
    try:
        d = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise DomainError(f"cannot read scenario: {exc}") from exc
    if not isinstance(d, dict):
        raise DomainError("a scenario is a JSON object")
    return d


def load_scenario(source) -> Scenario:
    """Parse and validate a scenario (path or dict); raises DomainError."""
    d = source if isinstance(source, dict) else read_scenario(source)
    try:
        sc = Scenario(
            n=int(d["n"]),
            kind=str(d["kind"]),
            radii=[float(x) for x in d["radii"]],
            values=[float(x) for x in d["values"]],
            t_end=float(d["t_end"]),
            dt=None if d.get("dt") is None else float(d["dt"]),
            outputs=[float(x) for x in d.get("outputs", [])],
            t0=float(d.get("t0", 0.0)),
            bending=list(d.get("bending", [])),
            kinds=list(d.get("kinds", [])),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise DomainError(f"malformed scenario: {exc}") from exc
    if sc.kind not in ("ball", "stack"):
        raise DomainError(f"kind must be 'ball' or 'stack', got {sc.kind!r}")
    if sc.kind == "ball" and (len(sc.radii) != 1 or len(sc.values) not in (1, 2)):
        raise DomainError("a ball scenario has one radius and one value")
    if not sc.t_end > sc.t0:
        raise DomainError("t_end must exceed the start time")
    if sc.dt is not None and not sc.dt > 0:
        raise DomainError("dt must be positive")
    if any(not (sc.t0 <= o <= sc.t_end) for o in sc.outputs):
        raise DomainError("output times must lie in [t0, t_end]")
    if sc.kinds and sc.n != 2:
        raise DomainError("region kinds only apply to n = 2")
    if not sc.extinct:
        sc.stack()
    return sc


def run_scenario(sc: Scenario) -> S.Trajectory:
    opts = S.EvolveOptions(dt=sc.dt, outputs=sorted(set(sc.outputs)))
    if sc.extinct:
        traj = S.Trajectory(sc.n)
        ext = S.EvolutionState(sc.t0, S.Stack(sc.n, (), (0.0,), validate=False))
        traj.states.append(ext)
        for o in opts.outputs:
            traj.snapshots[o] = S.EvolutionState(o, ext.stack)
        return traj
    st = sc.stack()
    if sc.n == 2:
        bending = [S.BendingProfile.from_dict(b) for b in sc.bending]
        kinds = [S.RegionKind(k) for k in sc.kinds]
        return S.evolve_n2(st, sc.t_end, opts, sc.t0, bending, kinds)
    return S.evolve(st, sc.t_end, opts, sc.t0)


def restart_scenario(sc: Scenario, traj: S.Trajectory) -> Scenario:
    fin = traj.final
    return Scenario(
        n=sc.n, kind="stack", radii=list(fin.stack.radii), values=list(fin.stack.values),
        t_end=sc.t_end, dt=sc.dt, outputs=[], t0=fin.t,
        bending=[b.to_dict() for b in fin.bending], kinds=[k.value for k in fin.kinds],
    )


def profile_radii(states, samples: int, r_max: Optional[float]) -> np.ndarray:
    radii = [r for s in states for r in s.stack.radii]
    top = r_max if r_max else 2.0 * max(radii, default=1.0)
    r = np.linspace(top / samples, top, samples)
    near = [x for R in radii for x in (R * (1 - 1e-12), R * (1 + 1e-12)) if x < top]
    return np.unique(np.concatenate([r, near]))


def write_outputs(sc: Scenario, traj: S.Trajectory, prefix: str, samples: int = 400, r_max=None) -> list[Path]:
    prefix_path = Path(prefix)
    if prefix_path.parent and not prefix_path.parent.exists():
        prefix_path.parent.mkdir(parents=True)
    written = []
    ball = sc.kind == "ball" and not sc.kinds
    header = ["t", "k", "a", "R"] + (["a_exact", "R_exact"] if ball else [])
    rows = []
    for s in traj.states:
        if ball:
            ex = B.evolve_ball(sc.n, sc.values[0], sc.radii[0], s.t - sc.t0)
            ex_cols = [ex.a, getattr(ex, "R", 0.0)]
        for k, R in enumerate(s.stack.radii):
            rows.append([s.t, k, s.stack.values[k], R] + (ex_cols if ball else []))
        if s.stack.N == 0:
            rows.append([s.t, -1, 0.0, 0.0] + (ex_cols if ball else []))
    path = Path(f"{prefix}_trajectory.csv")
    write_csv(path, header, rows)
    written.append(path)

    snaps = sorted(traj.snapshots.items())
    r = profile_radii([s for _, s in snaps] or [traj.final], samples, r_max)
    for i, (t, s) in enumerate(snaps):
        path = Path(f"{prefix}_profile_{i:02d}.csv")
        u = s.profile(r)
        cols = [np.full_like(r, t), r, u]
        header = ["t", "r", "u"]
        if ball:
            header.append("u_exact")
            cols.append(B.profile_at(sc.n, sc.values[0], sc.radii[0], t - sc.t0, r))
        write_csv(path, header, zip(*cols))
        written.append(path)

    path = Path(f"{prefix}_events.json")
    path.write_text(json.dumps([e.to_dict() for e in traj.events], indent=2))
    written.append(path)
    path = Path(f"{prefix}_restart.json")
    path.write_text(json.dumps(restart_scenario(sc, traj).to_dict(), indent=2))
    written.append(path)
    return written


def cmd_evolve(args) -> int:
    raw = read_scenario(args.scenario)
    if args.t_end is not None:
        raw["t_end"] = args.t_end
    sc = load_scenario(raw)
    traj = run_scenario(sc)
    for p in write_outputs(sc, traj, args.out, args.samples, args.r_max):
        print(f"wrote {p}")
    fin = traj.final
    print(f"final t={fmt(fin.t)} radii={[fmt(x) for x in fin.stack.radii]} values={[fmt(x) for x in fin.stack.values]}")
    print(f"events {len(traj.events)}")
    return EXIT_OK


# --- verify ---------------------------------------------------------------------

def cmd_verify(args) -> int:
    from .verify import run_suite

    results = run_suite(args.suite)
    ok = all(r.passed for r in results)
    print(json.dumps({"suite": args.suite, "passed": ok, "checks": [r.to_dict() for r in results]}, indent=2))
    return EXIT_OK if ok else EXIT_VERIFY


# --- parser ---------------------------------------------------------------------

def _positive_int(s: str) -> int:
    v = int(s)
    if v < 2:
        raise argparse.ArgumentTypeError("need at least 2 samples")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="tvflow4",
        description="Radial solutions of the fourth-order total variation flow.",
        epilog=EXIT_CODES,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("calibrate", help="solve for the calibration of a ball, annulus or complement",
                       epilog=EXIT_CODES, formatter_class=argparse.RawDescriptionHelpFormatter)
    c.add_argument("--n", type=int, required=True, help="space dimension")
    c.add_argument("--r0", type=float, default=0.0, help="inner radius (0 for a ball)")
    c.add_argument("--r1", type=float, default=math.inf, help="outer radius (inf for a complement)")
    c.add_argument("--signature", choices=("const", "nonconst"), default="const")
    c.add_argument("--samples", type=_positive_int, default=200, help="CSV sample count")
    c.add_argument("--csv", help="write (r, z) samples to this file")
    c.set_defaults(func=cmd_calibrate)

    q = sub.add_parser("qstar", help="critical annulus ratio in the plane")
    q.add_argument("--table", action="store_true", help="also print m(Q) on a grid")
    q.add_argument("--table-min", type=float, default=1.0)
    q.add_argument("--table-max", type=float, default=20.0)
    q.add_argument("--table-points", type=_positive_int, default=39)
    q.set_defaults(func=cmd_qstar)

    e = sub.add_parser("evolve", help="evolve a ball or stack scenario",
                       epilog=EXIT_CODES, formatter_class=argparse.RawDescriptionHelpFormatter)
    e.add_argument("scenario", help="scenario JSON (a restart file written by evolve also works)")
    e.add_argument("--out", required=True, help="output prefix")
    e.add_argument("--t-end", type=float, help="override the scenario end time")
    e.add_argument("--samples", type=_positive_int, default=400, help="radii per profile snapshot")
    e.add_argument("--r-max", type=float, help="outer radius of profile snapshots")
    e.set_defaults(func=cmd_evolve)

    v = sub.add_parser("verify", help="run self-check suites", epilog=EXIT_CODES,
                       formatter_class=argparse.RawDescriptionHelpFormatter)
    v.add_argument("--suite", choices=("all", "calibration", "dynamics", "oracle"), default="all")
    v.set_defaults(func=cmd_verify)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code not in (0, None) else EXIT_OK
    try:
        return args.func(args)
    except IntegrationError as exc:
        print(f"error: integration failed: {exc}", file=sys.stderr)
        return EXIT_INTEGRATION
    except (DomainError, TVFlowError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
