"""Forward-Euler integration of u_t = lap(u^m) + u^p with adaptive steps.

The scheme is explicit and monotone under its CFL bound, so the comparison
principle holds discretely; that is what makes the bisection experiments
trustworthy.  Blow-up shows up either as the L-infinity threshold tripping
or as the reaction-limited step collapsing below dt_min; both are reported,
and both count as "no solution up to the horizon" downstream.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import beta as beta_fn

from . import kernels
from .errors import GridError, NumericalInstability, SolverError
from .grids import BoxGeometry, GridField, RadialGeometry, sphere_area, unit_ball_volume
from .norms import NormSpec, evaluate_norm
from .params import ProblemParams

STATUS_COMPLETED = "completed"
STATUS_BLOWUP = "blow_up"
STATUS_UNDERFLOW = "step_underflow"


def regularize_initial(mu: GridField, i: float, j: int) -> GridField:
    """Bounded strictly positive start: cap the values at i, then lift by 1/j."""
    if not (math.isfinite(i) and i > 0):
        raise SolverError(f"cap must be positive, got {i}")
    if j < 1:
        raise SolverError(f"lift denominator must be >= 1, got {j}")
    return mu.with_values(np.minimum(mu.values, float(i)) + 1.0 / float(j))


# ---------------------------------------------------------------------------
# spatial operator (reference path; the jitted kernels carry their own copy)

def _radial_face_coeffs(g: RadialGeometry):
    faces = g.faces()
    area = sphere_area(g.N) * faces ** (g.N - 1)
    vols = g.shell_volumes()
    c_lo = area[:-1] / (vols * g.h)        # c_lo[0] = 0: zero flux at r = 0
    c_hi = area[1:] / (vols * g.h)
    return c_lo, c_hi, vols


def discrete_porous_laplacian(u: GridField, m: float) -> np.ndarray:
    """Second-order discrete lap(u^m) as a plain array (it changes sign, so
    it is not a field); zero-flux mirrors or periodic wrap on boxes,
    conservative shell fluxes on radial grids."""
    g = u.geometry
    v = u.values if m == 1.0 else u.values ** m
    if isinstance(g, RadialGeometry):
        c_lo, c_hi, _ = _radial_face_coeffs(g)
        out = np.zeros_like(v)
        diff = v[1:] - v[:-1]
        out[:-1] += c_hi[:-1] * diff
        out[1:] -= c_lo[1:] * diff      # c_lo[0] unused: no flux through r=0
        return out
    mode = "wrap" if g.boundary == "periodic" else "edge"
    vp = np.pad(v, 1, mode=mode)
    if g.N == 1:
        return (vp[:-2] - 2.0 * v + vp[2:]) / g.h ** 2
    return (vp[:-2, 1:-1] + vp[2:, 1:-1] + vp[1:-1, :-2] + vp[1:-1, 2:]
            - 4.0 * v) / g.h ** 2


def step(u: GridField, dt: float, params: ProblemParams,
         source_on: bool = True) -> GridField:
    """One explicit Euler step (reference numpy path, used by property tests
    to cross-check the jitted kernels)."""
    inc = discrete_porous_laplacian(u, params.m)
    new = u.values + dt * inc
    if source_on:
        new = new + dt * u.values ** params.p
    bad = new < 0
    if np.any(bad):
        tol = 1e-14 * float(np.max(u.values))
        if np.any(new < -tol):
            raise NumericalInstability(
                f"negative value {float(np.min(new))} beyond roundoff at dt={dt}")
        new = np.where(bad, 0.0, new)
    if not np.all(np.isfinite(new)):
        raise NumericalInstability(f"non-finite value at dt={dt}")
    return u.with_values(new)


# ---------------------------------------------------------------------------
# configuration / report

@dataclass
class SolverConfig:
    params: ProblemParams
    initial: GridField
    horizon: float
    safety: float = 0.5
    u_max: float = 1e8
    dt_min: float = 1e-10
    source_on: bool = True
    snapshots: tuple = ()
    monitors: tuple = ()                 # (name, NormSpec) pairs
    record_stride: int = 16
    max_steps: int = 50_000_000
    forced_dt: np.ndarray = None

    def __post_init__(self):
        if not (0.0 < self.safety < 1.0):
            raise SolverError(f"safety factor must be in (0,1), got {self.safety}")
        if not (math.isfinite(self.horizon) and self.horizon > 0):
            raise SolverError(f"horizon must be positive, got {self.horizon}")
        if self.u_max <= self.initial.linf():
            raise SolverError(
                f"blow-up threshold {self.u_max} not above initial max "
                f"{self.initial.linf()}")
        if self.dt_min <= 0:
            raise SolverError(f"dt_min must be positive, got {self.dt_min}")
        if self.record_stride < 1:
            raise SolverError("record_stride must be >= 1")
        snaps = tuple(float(s) for s in self.snapshots)
        if any(s <= 0 or s > self.horizon * (1 + 1e-12) for s in snaps):
            raise SolverError("snapshot times must lie in (0, horizon]")
        if list(snaps) != sorted(set(snaps)):
            raise SolverError("snapshot times must be strictly increasing")
        self.snapshots = snaps
        for name, spec in self.monitors:
            if not isinstance(spec, NormSpec):
                raise SolverError(f"monitor {name!r} is not a NormSpec")
        if self.forced_dt is not None:
            fd = np.asarray(self.forced_dt, dtype=float)
            if fd.ndim != 1 or np.any(fd <= 0) or not np.all(np.isfinite(fd)):
                raise SolverError("forced_dt must be a 1-D array of positive steps")
            self.forced_dt = fd


@dataclass
class SolveReport:
    status: str
    t_final: float
    blow_time: float = None
    blow_bracket: tuple = None           # (last stable t, detection t)
    steps: int = 0
    series: dict = field(default_factory=dict)
    snapshots: list = field(default_factory=list)
    monitors: dict = field(default_factory=dict)
    event_steps: list = field(default_factory=list)
    params: ProblemParams = None
    source_on: bool = True

    @property
    def completed(self) -> bool:
        return self.status == STATUS_COMPLETED


def stable_dt(u: GridField, config: SolverConfig, t: float = 0.0) -> float:
    """The kernel's step bound at the current state, clamped to the next
    event time."""
    p = config.params
    g = u.geometry
    umax = u.linf()
    tiny = 1e-300
    dt = config.safety * g.h ** 2 / (2.0 * p.N * p.m * umax ** (p.m - 1.0) + tiny)
    if config.source_on:
        dt = min(dt, config.safety / (p.p * umax ** (p.p - 1.0) + tiny))
    events = [s for s in config.snapshots if s > t] + [config.horizon]
    return min(dt, min(events) - t)


def _kernel_for(g):
    if isinstance(g, RadialGeometry):
        return "radial"
    return "box1" if g.N == 1 else "box2"


def solve(config: SolverConfig) -> SolveReport:
    prm = config.params
    g = config.initial.geometry
    if g.N != prm.N:
        raise SolverError(f"geometry dimension {g.N} != params N={prm.N}")

    u = config.initial.values.copy()
    kind = _kernel_for(g)
    if kind == "radial":
        c_lo, c_hi, vols = _radial_face_coeffs(g)
        mass0 = float(np.sum(u * vols))
    else:
        mass0 = float(np.sum(u)) * g.cell_volume
    periodic = getattr(g, "boundary", "neumann") == "periodic"

    events = list(config.snapshots)
    if not events or events[-1] < config.horizon * (1 - 1e-12):
        events.append(config.horizon)
    forced = (config.forced_dt if config.forced_dt is not None
              else np.empty(0, dtype=float))

    stride = int(config.record_stride)
    seg_cap = 2_000_000
    rec_n = seg_cap // stride + 4
    rec_t = np.empty(rec_n)
    rec_dt = np.empty(rec_n)
    rec_linf = np.empty(rec_n)
    rec_mass = np.empty(rec_n)

    ts = [0.0]
    dts = [0.0]
    linfs = [config.initial.linf()]
    masses = [mass0]

    def snapshot_field():
        return GridField(g, u.copy())

    snaps = [(0.0, config.initial.with_values(config.initial.values.copy()))]
    monitors = {name: [] for name, _ in config.monitors}

    def run_monitors(t_now, f_now):
        for name, spec in config.monitors:
            monitors[name].append((t_now, evaluate_norm(f_now, spec, prm)))

    run_monitors(0.0, snaps[0][1])

    t = 0.0
    fpos = 0
    total_steps = 0
    status = STATUS_COMPLETED
    blow_time = None
    blow_bracket = None
    event_steps = []

    for t_event in events:
        while t < t_event:
            budget = min(seg_cap, config.max_steps - total_steps)
            if budget <= 0:
                raise SolverError(
                    f"step budget {config.max_steps} exhausted at t={t}")
            if kind == "box1":
                out = kernels.integrate_box1(
                    u, g.h, prm.m, prm.p, config.source_on, periodic, t,
                    t_event, config.safety, config.u_max, config.dt_min,
                    forced, fpos, budget, rec_t, rec_dt, rec_linf, rec_mass,
                    stride)
            elif kind == "box2":
                out = kernels.integrate_box2(
                    u, g.h, prm.m, prm.p, config.source_on, periodic, t,
                    t_event, config.safety, config.u_max, config.dt_min,
                    forced, fpos, budget, rec_t, rec_dt, rec_linf, rec_mass,
                    stride)
            else:
                out = kernels.integrate_radial(
                    u, g.h, float(prm.N), prm.m, prm.p, config.source_on,
                    c_lo, c_hi, vols, t, t_event, config.safety, config.u_max,
                    config.dt_min, forced, fpos, budget, rec_t, rec_dt,
                    rec_linf, rec_mass, stride)
            code, t, seg_steps, fpos, nrec = out
            total_steps += seg_steps
            ts.extend(rec_t[:nrec])
            dts.extend(rec_dt[:nrec])
            linfs.extend(rec_linf[:nrec])
            masses.extend(rec_mass[:nrec])
            if code == kernels.REACHED:
                break
            if code == kernels.STEP_CAP:
                continue
            if code == kernels.BLOWUP:
                status = STATUS_BLOWUP
                blow_time = t
                blow_bracket = (t - rec_dt[nrec - 1], t)
                break
            if code == kernels.UNDERFLOW:
                status = STATUS_UNDERFLOW
                blow_time = t
                blow_bracket = (t, t)
                break
            if code == kernels.FORCED_EXHAUSTED:
                raise SolverError(
                    f"forced step schedule ran out at t={t} (pos {fpos})")
            raise NumericalInstability(
                f"non-finite or negative state at t={t} (L_inf "
                f"{float(np.max(u)) if np.all(np.isfinite(u)) else float('nan')})")
        if status != STATUS_COMPLETED:
            break
        event_steps.append((t, total_steps))
        f_now = snapshot_field()
        snaps.append((t, f_now))
        run_monitors(t, f_now)

    if status != STATUS_COMPLETED:
        # keep the terminal state for post-mortems (masked by status)
        snaps.append((t, snapshot_field()))

    series = {
        "t": np.asarray(ts),
        "dt": np.asarray(dts),
        "linf": np.asarray(linfs),
        "mass": np.asarray(masses),
    }
    return SolveReport(status=status, t_final=t, blow_time=blow_time,
                       blow_bracket=blow_bracket, steps=total_steps,
                       series=series, snapshots=snaps, monitors=monitors,
                       event_steps=event_steps, params=prm,
                       source_on=config.source_on)


# ---------------------------------------------------------------------------
# closed-form oracles

def barenblatt_mass_constant(M: float, N: int, m: float) -> float:
    """Peak constant of the source-type self-similar profile with total mass M."""
    if m <= 1.0:
        raise SolverError("self-similar profile needs m > 1")
    if M <= 0:
        raise SolverError("mass must be positive")
    k = N / (N * (m - 1.0) + 2.0)
    b = k * (m - 1.0) / (2.0 * m * N)
    geom = 0.5 * sphere_area(N) * b ** (-N / 2.0) * beta_fn(N / 2.0, m / (m - 1.0))
    return (M / geom) ** (1.0 / (1.0 / (m - 1.0) + N / 2.0))


def barenblatt(x, t: float, M: float, N: int, m: float):
    """Source-type self-similar solution of the source-free equation."""
    if t <= 0:
        raise SolverError("self-similar profile needs t > 0")
    k = N / (N * (m - 1.0) + 2.0)
    b = k * (m - 1.0) / (2.0 * m * N)
    C = barenblatt_mass_constant(M, N, m)
    x = np.asarray(x, dtype=float)
    r2 = x * x if x.ndim == 0 else np.sum(x * x, axis=-1)
    core = C - b * r2 / t ** (2.0 * k / N)
    out = t ** (-k) * np.maximum(core, 0.0) ** (1.0 / (m - 1.0))
    return float(out) if out.ndim == 0 else out


def barenblatt_field(geometry, t: float, M: float, params: ProblemParams) -> GridField:
    if isinstance(geometry, RadialGeometry):
        r = geometry.centers()
        vals = barenblatt(r[:, None], t, M, geometry.N, params.m)
        return GridField(geometry, vals)
    mesh = geometry.center_mesh()
    pts = np.stack([ax.ravel() for ax in mesh], axis=-1)
    vals = barenblatt(pts, t, M, geometry.N, params.m).reshape(geometry.shape)
    return GridField(geometry, vals)


# ---------------------------------------------------------------------------
# weak-form residual

@dataclass(frozen=True)
class BumpTestFunction:
    """Compactly supported space-time test function phi = B(x) w(t) with
    B = (1 - |x-x0|^2/rho^2)_+^3 and w = ((t_end - t)/(t_end - t_start))^2,
    so phi vanishes at t_end and outside B(x0, rho); both derivatives are
    closed-form."""

    center: tuple
    radius: float
    t_start: float
    t_end: float

    def __post_init__(self):
        if self.radius <= 0:
            raise SolverError("bump radius must be positive")
        if not (0.0 <= self.t_start < self.t_end):
            raise SolverError("need 0 <= t_start < t_end")
        object.__setattr__(self, "center",
                           tuple(float(c) for c in np.atleast_1d(self.center)))

    def _s(self, pts):
        d2 = np.zeros(pts.shape[:-1])
        for ax in range(pts.shape[-1]):
            d2 = d2 + (pts[..., ax] - self.center[ax]) ** 2
        return d2 / self.radius ** 2

    def _w(self, t):
        return ((self.t_end - t) / (self.t_end - self.t_start)) ** 2

    def _dw(self, t):
        return -2.0 * (self.t_end - t) / (self.t_end - self.t_start) ** 2

    def space(self, pts):
        s = self._s(pts)
        return np.where(s < 1.0, np.maximum(1.0 - s, 0.0) ** 3, 0.0)

    def space_laplacian(self, pts, N: int):
        s = self._s(pts)
        body = (6.0 / self.radius ** 2) * (1.0 - s) * (4.0 * s - N * (1.0 - s))
        return np.where(s < 1.0, body, 0.0)

    def phi(self, pts, t):
        return self.space(pts) * self._w(t)

    def dphi_dt(self, pts, t):
        return self.space(pts) * self._dw(t)

    def lap_phi(self, pts, t, N: int):
        return self.space_laplacian(pts, N) * self._w(t)

    def check_domain(self, geometry):
        if isinstance(geometry, RadialGeometry):
            if any(c != 0.0 for c in self.center) or \
                    self.radius > geometry.r_max * (1 + 1e-12):
                raise GridError("bump support must sit inside the radial domain")
            return
        lo = np.asarray(geometry.lo)
        hi = np.asarray(geometry.hi)
        c = np.asarray(self.center)
        if c.size != geometry.N:
            raise GridError(f"bump center has {c.size} coordinates on an "
                            f"N={geometry.N} grid")
        if np.any(c - self.radius < lo - 1e-12) or \
                np.any(c + self.radius > hi + 1e-12):
            raise GridError("bump support exceeds the domain")


@dataclass(frozen=True)
class ConstantBump:
    """Spatially constant window phi = w(t); usable when the solution itself
    stays compactly supported (or the box is periodic), since there is no
    spatial cutoff to kill boundary terms."""

    t_start: float
    t_end: float

    def __post_init__(self):
        if not (0.0 <= self.t_start < self.t_end):
            raise SolverError("need 0 <= t_start < t_end")

    def _w(self, t):
        return ((self.t_end - t) / (self.t_end - self.t_start)) ** 2

    def phi(self, pts, t):
        return np.full(pts.shape[0], self._w(t))

    def dphi_dt(self, pts, t):
        dw = -2.0 * (self.t_end - t) / (self.t_end - self.t_start) ** 2
        return np.full(pts.shape[0], dw)

    def lap_phi(self, pts, t, N: int):
        return np.zeros(pts.shape[0])

    def check_domain(self, geometry):
        pass


def _grid_points(geometry):
    if isinstance(geometry, RadialGeometry):
        return geometry.centers()[:, None]
    mesh = geometry.center_mesh()
    return np.stack([ax.ravel() for ax in mesh], axis=-1)


def _cell_weights(geometry):
    if isinstance(geometry, RadialGeometry):
        return geometry.shell_volumes()
    return np.full(int(np.prod(geometry.shape)), geometry.cell_volume)


def weak_residual(report: SolveReport, bump,
                  params: ProblemParams = None) -> float:
    """Defect of the integral identity the solution should satisfy against
    the analytic test bump, normalized by the largest single term.

    Needs snapshots covering [t_start, t_end]; time integrals by trapezoid
    over the snapshot times inside the window.
    """
    prm = params if params is not None else report.params
    g = report.snapshots[0][1].geometry
    bump.check_domain(g)

    window = [(t, f) for t, f in report.snapshots
              if bump.t_start - 1e-12 <= t <= bump.t_end + 1e-12]
    if len(window) < 3:
        raise SolverError(
            f"need >= 3 snapshots in [{bump.t_start}, {bump.t_end}], "
            f"got {len(window)}")

    pts = _grid_points(g)
    wts = _cell_weights(g)
    N = g.N
    times = np.array([t for t, _ in window])
    integrand = np.empty(times.size)
    for k, (t, fld) in enumerate(window):
        uu = fld.values.ravel()
        term = -uu * bump.dphi_dt(pts, t).ravel()
        term -= (uu ** prm.m) * bump.lap_phi(pts, t, N).ravel()
        if report.source_on:
            term -= (uu ** prm.p) * bump.phi(pts, t).ravel()
        integrand[k] = float(np.sum(term * wts))
    space_time = float(np.trapezoid(integrand, times))

    u0 = window[0][1].values.ravel()
    uT = window[-1][1].values.ravel()
    start_term = float(np.sum(u0 * bump.phi(pts, times[0]).ravel() * wts))
    end_term = float(np.sum(uT * bump.phi(pts, times[-1]).ravel() * wts))

    residual = space_time + end_term - start_term
    scale = max(abs(space_time), abs(start_term), abs(end_term), 1e-300)
    return abs(residual) / scale
