"""Evolution of radial stacks (piecewise constant data) under the facet ODEs.

Between events every facet height a^k moves with the speed lam^k of its
calibration and every jump radius R^k moves with d^k / (a^k - a^(k+1)),
where d^k is the jump of z'' across R^k.  Events (two heights meeting, an
annulus collapsing, the central ball vanishing) shrink the stack and the
integration restarts.

In the plane the complement of a disk, monotone annuli and annuli thicker
than Q* cannot be calibrated.  Those parts bend instead: u_t = sigma / r^3
with sigma = +-1, which is tracked through records (r, u_entry, t_entry)
of when each radius left a facet.
"""
from __future__ import annotations

import dataclasses
import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .calibration import (
    THIN,
    annulus_boundary_data,
    annulus_boundary_scalar,
    _thin_scalar,
    ball_volume,
    compute_qstar,
    sphere_area,
)
from .errors import BendingError, DomainError, IntegrationError
from .radial_core import check_dimension

DEFAULT_STEPS = 2_000
ETA = 0.05  # max relative change of any gap (height or radius) per step
GAP_TOL = 1e-10  # relative size below which a closing gap counts as closed
CLOSE_TOL = 1e-10  # relative mass below which a gap about to close may be declared closed
HYSTERESIS = 1e-6  # relative margin before an absorbed facet may split again


def _sgn(x: float) -> float:
    return 1.0 if x > 0 else -1.0


# --- data types -----------------------------------------------------------------

@dataclass(frozen=True)
class Stack:
    """sum_k a^k 1_{R^(k-1) < |x| < R^k} with R^(-1) = 0 and a^N = 0."""

    n: int
    radii: tuple
    values: tuple
    validate: dataclasses.InitVar[bool] = True

    def __post_init__(self, validate):
        object.__setattr__(self, "n", check_dimension(self.n))
        radii = tuple(float(r) for r in self.radii)
        values = tuple(float(v) for v in self.values)
        if len(values) == len(radii):
            values = values + (0.0,)
        object.__setattr__(self, "radii", radii)
        object.__setattr__(self, "values", values)
        if not validate:
            return
        if len(radii) < 1:
            raise DomainError("a stack needs at least one jump radius")
        if len(values) != len(radii) + 1 or values[-1] != 0.0:
            raise DomainError("values must be a^0..a^(N-1), optionally followed by a^N = 0")
        if not all(math.isfinite(v) for v in values + radii):
            raise DomainError("stack entries must be finite")
        if radii[0] <= 0 or any(b <= a for a, b in zip(radii, radii[1:])):
            raise DomainError("radii must be positive and strictly increasing")
        if any(a == b for a, b in zip(values, values[1:])):
            raise DomainError("adjacent stack values must differ")

    @classmethod
    def ball(cls, n: int, a: float, R: float) -> "Stack":
        return cls(n, (R,), (a, 0.0))

    @property
    def N(self) -> int:
        return len(self.radii)

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        idx = np.searchsorted(np.asarray(self.radii), r, side="right")
        return np.asarray(self.values)[idx]


@dataclass(frozen=True)
class FacetSpeeds:
    lambdas: tuple
    jumps: tuple


class EventKind(str, enum.Enum):
    FACET_MERGE = "FacetMerge"
    ANNULUS_COLLAPSE = "AnnulusCollapse"
    INNER_COLLAPSE = "InnerCollapse"
    EXTINCTION = "Extinction"
    BENDING_TRANSITION = "BendingTransition"


@dataclass(frozen=True)
class TrajectoryEvent:
    kind: EventKind
    time: float
    index: Optional[int] = None
    detail: str = ""

    def to_dict(self) -> dict:
        return {"kind": self.kind.value, "time": self.time, "index": self.index, "detail": self.detail}


@dataclass(frozen=True, eq=False)
class BendingProfile:
    """Bent part of region ``region``: u = u_entry(r) + sigma (t - t_entry(r)) / r^3.

    u_entry and t_entry are linear between records and constant beyond them.
    """

    region: int
    sigma: int
    r: np.ndarray
    u_entry: np.ndarray
    t_entry: np.ndarray

    def __call__(self, t: float, r):
        r = np.asarray(r, dtype=float)
        ue = np.interp(r, self.r, self.u_entry)
        te = np.interp(r, self.r, self.t_entry)
        return ue + self.sigma * (t - te) / r**3

    def to_dict(self) -> dict:
        return {
            "region": self.region,
            "sigma": self.sigma,
            "r": self.r.tolist(),
            "u_entry": self.u_entry.tolist(),
            "t_entry": self.t_entry.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "BendingProfile":
        return cls(int(d["region"]), int(d["sigma"]), np.asarray(d["r"], float),
                   np.asarray(d["u_entry"], float), np.asarray(d["t_entry"], float))


class RegionKind(str, enum.Enum):
    FACET = "facet"
    SPLIT = "split"  # bending on [R^(k-1), rho], facet on [rho, R^k]
    BENDING = "bending"


@dataclass(frozen=True, eq=False)
class EvolutionState:
    t: float
    stack: Stack
    bending: tuple = ()
    kinds: tuple = ()

    @property
    def n(self) -> int:
        return self.stack.n

    @property
    def extinct(self) -> bool:
        return self.stack.N == 0

    def _bend(self, k: int) -> Optional[BendingProfile]:
        for b in self.bending:
            if b.region == k:
                return b
        return None

    def split_radius(self, k: int) -> float:
        """Inner edge of the facet part of region k (its inner radius unless split)."""
        R = self.stack.radii
        lo = R[k - 1] if k > 0 else 0.0
        if self.kinds and self.kinds[k] == RegionKind.SPLIT:
            return max(lo, R[k] / compute_qstar())
        return lo

    def profile(self, r):
        """u(t, r) at radii r > 0."""
        r = np.atleast_1d(np.asarray(r, dtype=float))
        st = self.stack
        if st.N == 0:
            return np.zeros_like(r)
        if not self.kinds:
            return st(r)
        out = np.empty_like(r)
        idx = np.searchsorted(np.asarray(st.radii), r, side="right")
        for k in range(st.N + 1):
            mask = idx == k
            if not mask.any():
                continue
            rk = r[mask]
            kind = self.kinds[k] if k < st.N else RegionKind.BENDING
            if kind == RegionKind.FACET:
                out[mask] = st.values[k]
            elif kind == RegionKind.BENDING:
                b = self._bend(k)
                out[mask] = b(self.t, rk) if b is not None else st.values[k]
            else:
                rho = self.split_radius(k)
                vals = np.full_like(rk, st.values[k])
                inner = rk < rho
                if inner.any():
                    vals[inner] = self._bend(k)(self.t, rk[inner])
                out[mask] = vals
        return out

    def is_stack(self, tol: float = 1e-3) -> bool:
        """No bent part left except an exterior tail of height <= tol."""
        if not self.kinds or self.stack.N == 0:
            return True
        N = self.stack.N
        for k in range(N):
            if self.kinds[k] != RegionKind.FACET:
                return False
        tail = self._bend(N)
        if tail is None:
            return True
        return float(np.max(np.abs(tail(self.t, np.geomspace(self.stack.radii[-1], 1e3 * self.stack.radii[-1], 64))))) <= tol


@dataclass
class EvolveOptions:
    dt: Optional[float] = None
    outputs: Sequence[float] = ()
    max_events: Optional[int] = None
    eta: float = ETA
    event_tol: float = 1e-10
    record_states: bool = True


@dataclass
class Trajectory:
    n: int
    states: list = field(default_factory=list)
    events: list = field(default_factory=list)
    snapshots: dict = field(default_factory=dict)

    @property
    def final(self) -> EvolutionState:
        return self.states[-1]

    @property
    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.states])

    def extinction_time(self) -> float:
        for e in self.events:
            if e.kind == EventKind.EXTINCTION:
                return e.time
        return math.inf


# --- speeds for n != 2 ------------------------------------------------------------

def _annulus(n, r0, r1, z_in, z_out):
    if r1 - r0 >= THIN * (r0 + r1):
        return annulus_boundary_scalar(n, r0, r1, z_in, z_out)
    return _thin_scalar(n, r0, r1, z_in, z_out)


def _speeds(n: int, a_full, R):
    """(lam^0..lam^N, d^0..d^(N-1)) for the facet system, n != 2."""
    N = len(R)
    chi = [1.0 if a_full[k + 1] > a_full[k] else -1.0 for k in range(N)]  # z at R^k
    lam = [0.0] * (N + 1)
    zpp_in = [0.0] * N
    zpp_out = [0.0] * N
    lam[0] = n * (n + 2) * chi[0] / R[0] ** 3
    zpp_in[0] = -3.0 * chi[0] / R[0] ** 2
    for k in range(1, N):
        lam[k], zpp_out[k - 1], zpp_in[k] = _annulus(n, R[k - 1], R[k], chi[k - 1], chi[k])
    zpp_out[-1] = -chi[-1] * (n - 1) * (n - 3) / R[-1] ** 2
    return np.array(lam), np.array(zpp_in) - np.array(zpp_out)


def facet_speeds(stack: Stack) -> FacetSpeeds:
    if stack.n == 2:
        raise DomainError("planar stacks bend; use evolve_n2")
    if stack.N < 1:
        raise DomainError("degenerate stack")
    lam, d = _speeds(stack.n, list(stack.values), list(stack.radii))
    return FacetSpeeds(tuple(lam.tolist()), tuple(d.tolist()))


# --- models ----------------------------------------------------------------------

class _FacetModel:
    """State vector (a^0..a^(N-1), R^0..R^(N-1)) for n != 2."""

    def __init__(self, stack: Stack):
        self.n = stack.n
        self.N = stack.N
        N = self.N
        rows, tags = [], []
        for k in range(N):
            w = np.zeros(2 * N)
            w[k] = 1.0
            if k + 1 < N:
                w[k + 1] = -1.0
            rows.append(w)
            tags.append((k, 1, EventKind.FACET_MERGE))
        for k in range(N - 1):
            w = np.zeros(2 * N)
            w[N + k + 1], w[N + k] = 1.0, -1.0
            rows.append(w)
            tags.append((k, 0, EventKind.ANNULUS_COLLAPSE))
        w = np.zeros(2 * N)
        w[N] = 1.0
        rows.append(w)
        tags.append((-1, 0, EventKind.INNER_COLLAPSE))
        self.W = np.array(rows)
        self.tags = tags
        self.heights = np.array([tg[1] == 1 for tg in tags])
        self.ref = max(abs(v) for v in stack.values) * stack.radii[-1] ** self.n

    @staticmethod
    def pack(stack: Stack) -> np.ndarray:
        return np.concatenate([stack.values[:-1], stack.radii])

    def rhs(self, t: float, y: np.ndarray) -> np.ndarray:
        N = self.N
        a_full = y[:N].tolist() + [0.0]
        R = y[N:].tolist()
        _check_geometry(R)
        lam, d = _speeds(self.n, a_full, R)
        jumps = [a_full[k] - a_full[k + 1] for k in range(N)]
        return np.concatenate([lam[:N], d / np.array(jumps)])

    def accept(self, t, y):
        pass

    def rel_gaps(self, y, g):
        """Bound on the L1 mass each event removes, relative to the mass scale at build time."""
        N, n = self.N, self.n
        a, R = np.abs(y[:N]), y[N:]
        amax = float(np.max(a))
        out = np.empty(len(self.tags))
        out[:N] = np.abs(g[:N]) * R**n
        out[N:-1] = np.abs(g[N:-1]) * R[1:] ** (n - 1) * amax
        out[-1] = R[0] ** n * amax
        return out / self.ref

    def state(self, t, y) -> EvolutionState:
        N = self.N
        return EvolutionState(t, Stack(self.n, tuple(y[N:]), tuple(y[:N]) + (0.0,), validate=False))

    def handle(self, tag, t, y):
        """Apply one event; returns (new model or None, y, events)."""
        k, _, kind = tag
        N = self.N
        a = list(y[:N]) + [0.0]
        R = list(y[N:])
        if kind == EventKind.FACET_MERGE:
            # keep the outer value: the inner jump sits on a smaller sphere, so TV cannot grow
            del a[k]
            del R[k]
        elif kind == EventKind.ANNULUS_COLLAPSE:
            del a[k + 1]
            del R[k + 1]
        else:
            del a[0]
            del R[0]
        events = [TrajectoryEvent(kind, t, k if k >= 0 else None)]
        a, R = _normalize(a, R)
        if not R:
            events.append(TrajectoryEvent(EventKind.EXTINCTION, t))
            return None, None, events
        st = Stack(self.n, tuple(R), tuple(a), validate=False)
        return _FacetModel(st), _FacetModel.pack(st), events


def _normalize(a: list, R: list):
    """Merge neighbours with equal values after an event."""
    changed = True
    while changed and R:
        changed = False
        for k in range(len(R)):
            if a[k] == a[k + 1]:
                del a[k + 1]
                del R[k]
                changed = True
                break
    return a, R


# --- RK4 with events -------------------------------------------------------------

def _rk4_step(f, t, y, h):
    k1 = f(t, y)
    k2 = f(t + h / 2, y + h / 2 * k1)
    k3 = f(t + h / 2, y + h / 2 * k2)
    k4 = f(t + h, y + h * k3)
    return y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


class _StageFailure(Exception):
    """An RK stage left the admissible geometry; the step is retried shorter."""


def _check_geometry(R) -> None:
    prev = 0.0
    for r in R:
        if not r > prev:
            raise _StageFailure
        prev = r


def _attempt(model, t, y, h):
    try:
        with np.errstate(all="ignore"):
            y1 = _rk4_step(model.rhs, t, y, h)
    except (np.linalg.LinAlgError, OverflowError, ZeroDivisionError) as exc:
        raise _StageFailure from exc
    if not np.all(np.isfinite(y1)):
        raise _StageFailure
    return y1


def _safe_step(model, t, y, h, retries: int = 60):
    """RK4 step of length h; returns (h_taken, y1), halving h on stage failure."""
    for _ in range(retries):
        try:
            return h, _attempt(model, t, y, h)
        except _StageFailure:
            h *= 0.5
    raise IntegrationError(f"step failure at t={t}", state=(t, y.tolist()))


def _order(model, due):
    """Innermost event first: sort by the radius index the event sits at."""
    return sorted(due, key=lambda i: (model.tags[i][0], model.tags[i][1]))


def _run(model, y, t0: float, t_end: float, opts: EvolveOptions, n: int) -> Trajectory:
    dt = opts.dt if opts.dt else (t_end - t0) / DEFAULT_STEPS
    if dt <= 0 or t_end <= t0:
        raise DomainError("need dt > 0 and t_end > t0")
    tol_t = opts.event_tol * t_end
    outs = sorted(float(o) for o in opts.outputs if t0 - 1e-15 <= o <= t_end)
    max_events = opts.max_events if opts.max_events is not None else 10 * max(model.N, 1)
    traj = Trajectory(n)
    t = t0
    st = model.state(t, y)
    traj.states.append(st)
    oi = 0
    while oi < len(outs) and outs[oi] <= t + 1e-15:
        traj.snapshots[outs[oi]] = st
        oi += 1
    n_events = 0
    max_steps = 50 * int(math.ceil((t_end - t0) / dt)) + 10_000
    n_steps = 0

    def fire(idx_list):
        nonlocal model, y, n_events
        new_model, new_y, evs = model.handle(model.tags[idx_list[0]], t, y)
        traj.events.extend(evs)
        n_events += 1
        if n_events > max_events:
            raise IntegrationError(f"more than {max_events} events by t={t}", state=(t, None))
        model, y = new_model, new_y
        if model is None:
            return False
        traj.states.append(model.state(t, y))
        return True

    while t < t_end:
        f = model.rhs(t, y)
        g = model.W @ y
        gp = model.W @ f
        with np.errstate(divide="ignore", invalid="ignore"):
            tau = np.where(g * gp < 0, -g / gp, np.inf)
            rate = np.where(gp != 0, np.abs(g / gp), np.inf)
        tau = np.where(g == 0, 0.0, tau)
        rel = model.rel_gaps(y, g)
        tiny = (rel <= GAP_TOL) & (g * gp <= 0)
        # a short time to close is not enough when the closing speed blows up
        due = [i for i in np.flatnonzero(((tau < tol_t) & (rel <= CLOSE_TOL)) | tiny)]
        if due:
            if not fire(_order(model, due)):
                break
            continue
        k = math.floor(t / dt * (1 + 1e-12) + 1e-9)
        stop = min((k + 1) * dt, t_end)
        if oi < len(outs):
            stop = min(stop, outs[oi])
        h = min(stop - t, opts.eta * float(np.min(rate)))
        n_steps += 1
        if n_steps > max_steps:
            raise IntegrationError(f"step budget exhausted at t={t}", state=(t, y.tolist()))
        h, y1 = _safe_step(model, t, y, h)
        crossed = np.flatnonzero(g * (model.W @ y1) < 0)
        if crossed.size:
            lo, hi = 0.0, h
            y_lo, y_hi, h_hi = y, y1, h
            t_res = 4 * np.finfo(float).eps * max(abs(t), t_end)
            while hi - lo > tol_t or (
                hi - lo > t_res and np.max(model.rel_gaps(y_lo, model.W @ y_lo)[crossed]) > CLOSE_TOL
            ):
                mid = 0.5 * (lo + hi)
                try:
                    y_mid = _attempt(model, t, y, mid)
                except _StageFailure:
                    hi = mid
                    continue
                if np.any(g * (model.W @ y_mid) < 0):
                    hi, y_hi, h_hi = mid, y_mid, mid
                else:
                    lo, y_lo = mid, y_mid
            if h_hi != hi:
                try:
                    y_hi, h_hi = _attempt(model, t, y, hi), hi
                except _StageFailure:
                    y_hi, h_hi = y_lo, lo
            t = t + h_hi
            y = y_hi
            model.accept(t, y)
            crossed = list(np.flatnonzero(g * (model.W @ y) <= 0))
            if not crossed:
                f = model.rhs(t, y)
                with np.errstate(divide="ignore", invalid="ignore"):
                    tau = np.where(g * (model.W @ f) < 0, -(model.W @ y) / (model.W @ f), np.inf)
                crossed = [int(np.argmin(tau))]
            if not fire(_order(model, crossed)):
                break
            continue
        t = stop if h == stop - t else t + h
        y = y1
        model.accept(t, y)
        st = model.state(t, y)
        if opts.record_states:
            traj.states.append(st)
        while oi < len(outs) and outs[oi] <= t + 1e-15:
            traj.snapshots[outs[oi]] = st
            oi += 1
    if model is None:
        ext = EvolutionState(t, Stack(n, (), (0.0,), validate=False))
        traj.states.append(ext)
        for o in outs[oi:]:
            traj.snapshots[o] = EvolutionState(o, ext.stack)
    elif not opts.record_states:
        traj.states.append(model.state(t, y))
    return traj


def step(state: EvolutionState, dt: float) -> EvolutionState:
    """One classical RK4 step of the facet system (n != 2, no event inside)."""
    if dt <= 0:
        raise DomainError("dt must be positive")
    if state.n == 2:
        raise DomainError("planar stacks bend; use evolve_n2")
    if state.stack.N < 1 or any(v == 0 for v in state.stack.values[:-1]) and state.stack.N == 1:
        raise DomainError("the zero stack cannot be stepped")
    Stack(state.n, state.stack.radii, state.stack.values)  # validates
    model = _FacetModel(state.stack)
    try:
        y = _attempt(model, state.t, _FacetModel.pack(state.stack), dt)
    except _StageFailure as exc:
        raise IntegrationError(f"step failure at t={state.t}", state=state) from exc
    return model.state(state.t + dt, y)


def evolve(stack: Stack, t_end: float, opts: Optional[EvolveOptions] = None, t0: float = 0.0) -> Trajectory:
    """Integrate the facet system from ``stack`` at time t0 up to t_end (n != 2)."""
    if stack.n == 2:
        raise DomainError("use evolve_n2 in the plane")
    if t_end <= t0:
        raise DomainError("t_end must exceed the start time")
    Stack(stack.n, stack.radii, stack.values)
    opts = opts or EvolveOptions()
    model = _FacetModel(stack)
    return _run(model, _FacetModel.pack(stack), t0, t_end, opts, stack.n)


# --- the plane ---------------------------------------------------------------------

class _Records:
    """Append-only (r, u_entry, t_entry) buffer; snapshots are cheap views."""

    def __init__(self, sigma: int, r, u, t):
        self.sigma = int(sigma)
        m = len(r)
        cap = max(16, 2 * m)
        self.buf = np.zeros((3, cap))
        self.buf[0, :m], self.buf[1, :m], self.buf[2, :m] = r, u, t
        self.m = m

    def append(self, r, u, t):
        if self.m == self.buf.shape[1]:
            new = np.zeros((3, 2 * self.m))
            new[:, : self.m] = self.buf[:, : self.m]
            self.buf = new
        self.buf[:, self.m] = (r, u, t)
        self.m += 1

    @property
    def last_r(self) -> float:
        return self.buf[0, self.m - 1]

    def value(self, t: float, r: float) -> float:
        b = self.buf
        m = self.m
        ue = np.interp(r, b[0, :m], b[1, :m])
        te = np.interp(r, b[0, :m], b[2, :m])
        return ue + self.sigma * (t - te) / r**3

    def snapshot(self, region: int) -> BendingProfile:
        m = self.m
        return BendingProfile(region, self.sigma, self.buf[0, :m], self.buf[1, :m], self.buf[2, :m])


@dataclass
class _Region:
    kind: RegionKind
    rec: Optional[_Records] = None


class _PlanarModel:
    """n = 2 facets plus bending regions; y = (a^0..a^(N-1), R^0..R^(N-1)).

    Heights of bending regions are nominal (their entry value) and do not move.
    """

    n = 2

    def __init__(self, a: list, R: list, regions: list, t: float):
        self.a = list(a)
        self.N = len(R)
        self.regions = regions  # N + 1 entries, last is the exterior
        self.qstar = compute_qstar()
        self._build_events()

    # layout -------------------------------------------------------------------
    @classmethod
    def from_stack(cls, stack: Stack, t: float, bending: Sequence[BendingProfile] = (), kinds: Sequence = ()):
        N = stack.N
        a = list(stack.values[:-1])
        R = list(stack.radii)
        if kinds:
            regions = [_Region(RegionKind(k)) for k in kinds] + [_Region(RegionKind.BENDING)]
            for b in bending:
                rec = _Records(b.sigma, b.r, b.u_entry, b.t_entry)
                regions[b.region].rec = rec
            for k, reg in enumerate(regions):
                if reg.kind != RegionKind.FACET and reg.rec is None:
                    raise DomainError(f"region {k} bends but carries no records")
            return cls(a, R, regions, t)
        regions = [_Region(RegionKind.FACET) for _ in range(N)]
        sigma_ext = int(_sgn(a[-1]))
        regions.append(_Region(RegionKind.BENDING, _Records(sigma_ext, [R[-1]], [0.0], [t])))
        model = cls(a, R, regions, t)
        y = model.pack(R)
        for k in range(1, N):
            model._relayout(k, t, y)
        model._build_events()
        return model

    def pack(self, R) -> np.ndarray:
        return np.concatenate([self.a, R])

    def _relayout(self, k: int, t: float, y: np.ndarray):
        """Re-apply the initial ansatz to facet region k (1 <= k < N)."""
        reg = self.regions[k]
        if reg.kind != RegionKind.FACET or k == 0 or k >= self.N:
            return
        N = self.N
        a, R = y[:N], y[N:]
        u_in = self._inside(k - 1, t, y, R[k - 1])
        u_out = self._outside(k, t, y, R[k])
        chi_in, chi_out = _sgn(u_in - a[k]), _sgn(u_out - a[k])
        if chi_in != chi_out:
            reg.kind = RegionKind.BENDING
            reg.rec = _Records(int(chi_in), [R[k - 1], R[k]], [a[k], a[k]], [t, t])
        elif R[k] > self.qstar * R[k - 1]:
            reg.kind = RegionKind.SPLIT
            rho = R[k] / self.qstar
            reg.rec = _Records(int(chi_in), [R[k - 1], rho], [a[k], a[k]], [t, t])

    def _build_events(self):
        N = self.N
        rows, tags = [], []

        def row():
            return np.zeros(2 * N)

        facet = [r.kind != RegionKind.BENDING for r in self.regions]
        for k in range(N - 1):
            if facet[k] and self.regions[k + 1].kind == RegionKind.FACET:
                w = row()
                w[k], w[k + 1] = 1.0, -1.0
                rows.append(w)
                tags.append((k, 1, EventKind.FACET_MERGE))
        for k in range(N - 1):
            if self.regions[k + 1].kind != RegionKind.SPLIT:
                w = row()
                w[N + k + 1], w[N + k] = 1.0, -1.0
                rows.append(w)
                tags.append((k, 0, EventKind.ANNULUS_COLLAPSE))
        for k in range(1, N):
            kind = self.regions[k].kind
            if kind == RegionKind.SPLIT:
                w = row()
                w[N + k], w[N + k - 1] = 1.0 / self.qstar, -1.0
                rows.append(w)
                tags.append((k - 1, 2, EventKind.BENDING_TRANSITION))
            elif kind == RegionKind.FACET:
                w = row()
                w[N + k - 1], w[N + k] = self.qstar * (1 + HYSTERESIS), -1.0
                rows.append(w)
                tags.append((k - 1, 3, EventKind.BENDING_TRANSITION))
        w = row()
        w[N] = 1.0
        rows.append(w)
        tags.append((-1, 0, EventKind.INNER_COLLAPSE))
        self.W = np.array(rows)
        self.tags = tags
        self.heights = np.array([tg[1] == 1 for tg in tags], dtype=bool)

    # values -------------------------------------------------------------------
    def _rho(self, k: int, R) -> float:
        return max(R[k - 1], R[k] / self.qstar)

    def _inside(self, j: int, t, y, r) -> float:
        """Value of region j just inside its outer radius."""
        reg = self.regions[j]
        if reg.kind == RegionKind.BENDING:
            return float(reg.rec.value(t, r))
        return y[j]

    def _outside(self, j: int, t, y, r) -> float:
        """Value of region j + 1 just outside R^j."""
        reg = self.regions[j + 1]
        if reg.kind == RegionKind.FACET:
            return y[j + 1]
        return float(reg.rec.value(t, r))

    def rhs(self, t: float, y: np.ndarray) -> np.ndarray:
        N = self.N
        a, R = y[:N], y[N:]
        _check_geometry(R.tolist())
        out = np.zeros(2 * N)
        u_in = [self._inside(j, t, y, R[j]) for j in range(N)]
        u_out = [self._outside(j, t, y, R[j]) for j in range(N)]
        zpp_in = np.zeros(N)   # z'' of region j at R^j (facet side only)
        zpp_out = np.zeros(N)  # z'' of region j+1 at R^j
        for k, reg in enumerate(self.regions[:N]):
            if reg.kind == RegionKind.BENDING:
                continue
            chi_out = _sgn(u_out[k] - a[k])
            if k == 0:
                out[0] = 8.0 * chi_out / R[0] ** 3
                zpp_in[0] = -3.0 * chi_out / R[0] ** 2
                continue
            if reg.kind == RegionKind.SPLIT:
                r0, z_in = R[k] / self.qstar, -chi_out
            else:
                r0 = R[k - 1]
                z_in = _sgn(a[k] - u_in[k - 1])
            lam, z0, z1 = annulus_boundary_data(2, r0, R[k], z_in, chi_out)
            out[k] = float(lam)
            zpp_in[k] = float(z1)
            if reg.kind == RegionKind.FACET:
                zpp_out[k - 1] = float(z0)
        for j in range(N):
            inner_bends = self.regions[j].kind == RegionKind.BENDING
            outer_bends = self.regions[j + 1].kind != RegionKind.FACET
            if inner_bends and outer_bends:
                continue
            gap = u_in[j] - u_out[j]
            out[N + j] = (zpp_in[j] - zpp_out[j]) / gap
        return out

    def accept(self, t, y):
        N = self.N
        R = y[N:]
        for k in range(1, N):
            reg = self.regions[k]
            if reg.kind != RegionKind.SPLIT:
                continue
            rho = R[k] / self.qstar
            last = reg.rec.last_r
            if rho > last:
                reg.rec.append(rho, y[k], t)
            elif rho < last * (1 - 1e-9):
                raise BendingError(
                    f"facet edge of region {k} moves into its bending part at t={t}", state=(t, y.tolist())
                )
        for j in range(N):
            inner_bends = self.regions[j].kind == RegionKind.BENDING
            outer_bends = self.regions[j + 1].kind != RegionKind.FACET
            if inner_bends and outer_bends:
                continue
            if not inner_bends and not outer_bends:
                continue
            gap = self._inside(j, t, y, R[j]) - self._outside(j, t, y, R[j])
            if _sgn(gap) != _sgn(self._nominal_gap(j)):
                raise BendingError(f"facet/bending jump at R^{j} changed sign at t={t}", state=(t, y.tolist()))

    def rel_gaps(self, y, g):
        N = self.N
        scale = np.where(self.heights, np.max(np.abs(y[:N])), y[-1])
        return np.abs(g) / scale

    def _nominal_gap(self, j):
        return self.a[j] - (self.a[j + 1] if j + 1 < self.N else 0.0)

    def state(self, t, y) -> EvolutionState:
        N = self.N
        a = list(y[:N])
        st = Stack(2, tuple(y[N:]), tuple(a) + (0.0,), validate=False)
        bends = tuple(reg.rec.snapshot(k) for k, reg in enumerate(self.regions) if reg.rec is not None
                      and reg.kind != RegionKind.FACET)
        return EvolutionState(t, st, bends, tuple(r.kind for r in self.regions[:N]))

    def handle(self, tag, t, y):
        k, sub, kind = tag
        N = self.N
        a = list(y[:N])
        R = list(y[N:])
        regions = self.regions
        events = []
        if kind == EventKind.BENDING_TRANSITION:
            reg = regions[k + 1]
            if sub == 2:
                reg.kind, reg.rec = RegionKind.FACET, None
                events.append(TrajectoryEvent(kind, t, k + 1, "bending part absorbed"))
            else:
                reg.kind = RegionKind.SPLIT
                rho = R[k + 1] / self.qstar
                reg.rec = _Records(int(_sgn(self._inside(k, t, y, R[k]) - a[k + 1])),
                                   [R[k], max(rho, R[k])], [a[k + 1]] * 2, [t, t])
                events.append(TrajectoryEvent(kind, t, k + 1, "ratio above critical"))
            self.a = a
            self._build_events()
            return self, self.pack(R), events
        if kind == EventKind.FACET_MERGE:
            if regions[k].kind != RegionKind.FACET:
                raise BendingError("merge of a split facet is not supported", state=(t, y.tolist()))
            del a[k]
            del R[k]
            del regions[k]
            events.append(TrajectoryEvent(kind, t, k))
            touched = [k]
        elif kind == EventKind.ANNULUS_COLLAPSE:
            del a[k + 1]
            del R[k + 1]
            del regions[k + 1]
            events.append(TrajectoryEvent(kind, t, k + 1))
            touched = [k, k + 1]
        else:
            if regions[1].kind != RegionKind.FACET:
                raise BendingError("the central disk vanished next to a bending region", state=(t, y.tolist()))
            del a[0]
            del R[0]
            del regions[0]
            events.append(TrajectoryEvent(kind, t))
            touched = [0]
        model = _PlanarModel(a, R, regions, t)
        y2 = model.pack(R)
        for j in touched:
            if 0 < j < model.N:
                model._relayout(j, t, y2)
        if model.N >= 1:
            model.regions[-1].rec.sigma = int(_sgn(model._inside(model.N - 1, t, y2, R[-1])))
        model._build_events()
        return model, y2, events


def evolve_n2(stack: Stack, t_end: float, opts: Optional[EvolveOptions] = None, t0: float = 0.0,
              bending: Sequence[BendingProfile] = (), kinds: Sequence = ()) -> Trajectory:
    """Planar evolution with bending regions.

    ``bending``/``kinds`` resume from a saved state; otherwise the layout is
    built from ``stack`` at t0.
    """
    if stack.n != 2:
        raise DomainError("evolve_n2 is for n = 2")
    if t_end <= t0:
        raise DomainError("t_end must exceed the start time")
    if not kinds:
        Stack(2, stack.radii, stack.values)
    opts = opts or EvolveOptions()
    model = _PlanarModel.from_stack(stack, t0, bending, kinds)
    return _run(model, model.pack(list(stack.radii)), t0, t_end, opts, 2)


def evolve_any(stack: Stack, t_end: float, opts: Optional[EvolveOptions] = None, t0: float = 0.0) -> Trajectory:
    return evolve_n2(stack, t_end, opts, t0) if stack.n == 2 else evolve(stack, t_end, opts, t0)


# --- diagnostics -----------------------------------------------------------------

def _shell_volume(n: int, r0: float, r1: float) -> float:
    return ball_volume(n, 1.0) * (r1**n - r0**n)


def _bent_integrals(n: int, b: BendingProfile, t: float, lo: float, hi: float, points: int = 2049):
    """(int u, int |u_r|) over lo < |x| < hi for a bent part, hi finite."""
    if hi <= lo:
        return 0.0, 0.0
    r = np.unique(np.concatenate([np.geomspace(lo, hi, points), b.r[(b.r > lo) & (b.r < hi)]]))
    u = b(t, r)
    w = sphere_area(n, 1.0) * r ** (n - 1)
    mass = float(np.trapezoid(u * w, r))
    rm = 0.5 * (r[1:] + r[:-1])
    tv = float(np.sum(np.abs(np.diff(u)) * sphere_area(n, 1.0) * rm ** (n - 1)))
    return mass, tv


def mass_and_energy(state: EvolutionState) -> tuple[float, float]:
    st = state.stack
    n = st.n
    if st.N == 0:
        return 0.0, 0.0
    R = (0.0,) + st.radii
    if not state.kinds:
        mass = sum(st.values[k] * _shell_volume(n, R[k], R[k + 1]) for k in range(st.N))
        tv = sum(abs(st.values[k] - st.values[k + 1]) * sphere_area(n, st.radii[k]) for k in range(st.N))
        return float(mass), float(tv)
    t = state.t
    mass = tv = 0.0
    N = st.N
    for k in range(N):
        kind = state.kinds[k]
        lo, hi = R[k], R[k + 1]
        if kind == RegionKind.FACET:
            mass += st.values[k] * _shell_volume(n, lo, hi)
        elif kind == RegionKind.BENDING:
            m, v = _bent_integrals(n, state._bend(k), t, lo, hi)
            mass += m
            tv += v
        else:
            rho = state.split_radius(k)
            m, v = _bent_integrals(n, state._bend(k), t, lo, rho)
            mass += m + st.values[k] * _shell_volume(n, rho, hi)
            tv += v + abs(float(state._bend(k)(t, rho)) - st.values[k]) * sphere_area(n, rho)
    ext = state._bend(N)
    Rl = st.radii[-1]
    if ext is not None:
        # exterior: u_entry = 0 and a single entry time, so the tail is exact
        te = float(ext.t_entry[0])
        mass += ext.sigma * (t - te) * 2.0 * math.pi / Rl
        tv += 3.0 * math.pi * abs(t - te) / Rl**2
    u = state.profile
    for j in range(N):
        r = st.radii[j]
        eps = 1e-12 * r
        tv += abs(float(u(r - eps)[0]) - float(u(r + eps)[0])) * sphere_area(n, r)
    return float(mass), float(tv)


def l1_distance(s1: EvolutionState, s2: EvolutionState, r_max: Optional[float] = None, points: int = 4097) -> float:
    """int |u1 - u2| dx over |x| < r_max (exact for two plain stacks)."""
    n = s1.n
    if not s1.kinds and not s2.kinds:
        br = sorted(set(s1.stack.radii) | set(s2.stack.radii))
        edges = [0.0] + br
        total = 0.0
        for lo, hi in zip(edges, edges[1:]):
            mid = 0.5 * (lo + hi)
            diff = abs(float(s1.profile(mid)[0]) - float(s2.profile(mid)[0]))
            total += diff * _shell_volume(n, lo, hi)
        return total
    radii = list(s1.stack.radii) + list(s2.stack.radii)
    if r_max is None:
        r_max = 10.0 * max(radii) if radii else 1.0
    r_min = 1e-3 * min(radii) if radii else 1e-3
    r = np.unique(np.concatenate([np.geomspace(r_min, r_max, points), radii]))
    rm = 0.5 * (r[1:] + r[:-1])
    diff = np.abs(s1.profile(rm) - s2.profile(rm))
    shells = ball_volume(n, 1.0) * (r[1:] ** n - r[:-1] ** n)
    inner = abs(float(s1.profile(r_min)[0]) - float(s2.profile(r_min)[0])) * ball_volume(n, r_min)
    return float(np.sum(diff * shells) + inner)


def run_to(stack: Stack, t_end: float, dt: Optional[float] = None, outputs: Sequence[float] = ()) -> Trajectory:
    return evolve_any(stack, t_end, EvolveOptions(dt=dt, outputs=outputs))
