"""Experiment drivers built on the solver: bisection of the existence
threshold in the data amplitude, discrete self-similarity checks,
small-data blow-up probes, sup-norm decay measurement, and localized
energy audits.

Every driver is a pure function of its arguments; rerunning one
reproduces the same floats bit for bit (the kernels reduce in fixed
order and nothing here consults a clock or an RNG).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import GridError, SolverError
from .grids import (BoxGeometry, GridField, RadialGeometry, constant_field,
                    gaussian_field, mu_c_field)
from .norms import morrey_norm, orlicz_eta_norm, window_averages
from .params import ProblemParams, Regime
from .solver import (STATUS_COMPLETED, STATUS_BLOWUP, STATUS_UNDERFLOW,
                     SolverConfig, SolveReport, regularize_initial, solve)
from .special import PsiSpec, psi, psi_second

# step collapse and threshold crossing both mean "no solution this far"
BLOWUP_STATUSES = (STATUS_BLOWUP, STATUS_UNDERFLOW)

TREND_BAND = 0.05


# ---------------------------------------------------------------------------
# existence/blow-up dichotomy

@dataclass(frozen=True)
class DichotomyConfig:
    """Shared trial setup for the threshold bisection; the data amplitude
    c is the only thing that varies between trials."""

    geometry: object
    horizon: float = 10.0
    safety: float = 0.5
    u_max: float = 1e8
    dt_min: float = 1e-10
    cap_factor: float = 10.0       # initial cap = cap_factor * grid max
    lift_denominator: int = 100    # additive floor 1/j keeps the start positive
    snapshots: tuple = ()
    record_stride: int = 4096
    max_steps: int = 50_000_000

    def __post_init__(self):
        if not (math.isfinite(self.horizon) and self.horizon > 0):
            raise SolverError(f"horizon must be positive, got {self.horizon}")
        if not (math.isfinite(self.cap_factor) and self.cap_factor > 0):
            raise SolverError(f"cap factor must be positive, got {self.cap_factor}")
        if self.lift_denominator < 1:
            raise SolverError("lift denominator must be >= 1")


def dichotomy_trial(params: ProblemParams, c: float,
                    config: DichotomyConfig) -> SolveReport:
    """One bisection trial: cell-averaged singular data of amplitude c,
    capped and lifted into a bounded positive start, integrated to the
    horizon."""
    if not (math.isfinite(c) and c >= 0):
        raise SolverError(f"amplitude must be nonnegative, got {c}")
    mu = constant_field(config.geometry, 0.0) if c == 0 \
        else mu_c_field(config.geometry, c, params)
    peak = float(np.max(mu.values))
    cap = config.cap_factor * peak if peak > 0 else 1.0
    start = regularize_initial(mu, cap, config.lift_denominator)
    cfg = SolverConfig(params=params, initial=start, horizon=config.horizon,
                       safety=config.safety, u_max=config.u_max,
                       dt_min=config.dt_min, snapshots=config.snapshots,
                       record_stride=config.record_stride,
                       max_steps=config.max_steps)
    return solve(cfg)


@dataclass
class DichotomyResult:
    """Bracket (c_exist, c_blow) around the existence threshold plus every
    trial that produced it.

    Construction enforces that the outcome is monotone in c (existence
    below, blow-up above) and that the bracket ends agree with the trial
    list; a violation raises with the full outcome list attached, since it
    signals an under-resolved grid rather than a property of the equation.
    """

    params: ProblemParams
    family: str
    c_exist: float
    c_blow: float
    outcomes: tuple                    # ((c, status), ...) sorted by c
    meta: dict = field(default_factory=dict)
    reports: dict = field(default_factory=dict)

    def __post_init__(self):
        out = tuple(sorted((float(c), str(s)) for c, s in self.outcomes))
        self.outcomes = out
        blows = [s in BLOWUP_STATUSES for _, s in out]
        if any(b and not later for b, later in zip(blows, blows[1:])):
            err = SolverError(
                "trial outcomes are not monotone in the amplitude; "
                "refine the grid or shorten the step")
            err.outcomes = out
            raise err
        existing = [c for (c, s), b in zip(out, blows) if not b]
        blowing = [c for (c, s), b in zip(out, blows) if b]
        if not existing or not blowing:
            raise SolverError("bracket needs an outcome on each side")
        if self.c_exist != max(existing) or self.c_blow != min(blowing):
            raise SolverError("bracket ends disagree with the outcome list")


def dichotomy_midpoint(result: DichotomyResult) -> float:
    """Geometric center of the bracket: the one-number threshold estimate."""
    return math.sqrt(result.c_exist * result.c_blow)


def run_dichotomy(params: ProblemParams, c_lo: float, c_hi: float,
                  steps: int, config: DichotomyConfig) -> DichotomyResult:
    """Geometric bisection of the existence/blow-up threshold in c.

    Seeds must straddle the threshold: the run at c_lo completes and the
    run at c_hi blows up.  A wrong seed is widened by decades (three
    attempts per side) and the widening recorded in the metadata.  Each
    bisection step halves the bracket width in log c exactly; trials are
    sequential because each midpoint depends on the prior outcomes.
    """
    if params.regime() is Regime.SUBCRITICAL:
        raise SolverError("the dichotomy needs p >= m + 2/N")
    if not (0 < c_lo < c_hi and math.isfinite(c_hi)):
        raise SolverError(f"need 0 < c_lo < c_hi, got ({c_lo}, {c_hi})")
    if steps < 1:
        raise SolverError(f"need at least one bisection step, got {steps}")

    outcomes = {}
    reports = {}

    def blows(c):
        rep = dichotomy_trial(params, c, config)
        outcomes[c] = rep.status
        reports[c] = rep
        return rep.status in BLOWUP_STATUSES

    widened = []
    lo, hi = float(c_lo), float(c_hi)
    lo_blows = blows(lo)
    while lo_blows and sum(side == "lo" for side, _, _ in widened) < 3:
        widened.append(("lo", lo, lo / 10.0))
        lo /= 10.0
        lo_blows = blows(lo)
    if lo_blows:
        err = SolverError(f"found no existence end down to c = {lo}")
        err.outcomes = tuple(sorted(outcomes.items()))
        raise err
    hi_blows = blows(hi)
    while not hi_blows and sum(side == "hi" for side, _, _ in widened) < 3:
        widened.append(("hi", hi, hi * 10.0))
        hi *= 10.0
        hi_blows = blows(hi)
    if not hi_blows:
        err = SolverError(f"found no blow-up end up to c = {hi}")
        err.outcomes = tuple(sorted(outcomes.items()))
        raise err

    for _ in range(int(steps)):
        mid = math.sqrt(lo * hi)
        if not lo < mid < hi:          # bracket already at float resolution
            break
        if blows(mid):
            hi = mid
        else:
            lo = mid

    g = config.geometry
    meta = {
        "geometry": g,
        "h": g.h,
        "horizon": config.horizon,
        "safety": config.safety,
        "u_max": config.u_max,
        "dt_min": config.dt_min,
        "cap_factor": config.cap_factor,
        "lift_denominator": config.lift_denominator,
        "bisection_steps": int(steps),
        "seed": (float(c_lo), float(c_hi)),
        "widened": tuple(widened),
    }
    return DichotomyResult(params=params, family="mu_c", c_exist=lo,
                           c_blow=hi, outcomes=tuple(outcomes.items()),
                           meta=meta, reports=reports)


def dichotomy_sensitivity(params: ProblemParams, c_lo: float, c_hi: float,
                          steps: int, config: DichotomyConfig) -> dict:
    """Regularization bias of the threshold: rerun the bisection with the
    cap and the lift each doubled and report the relative midpoint shifts.

    The cap sits above the grid max by default, so doubling it is inert
    and its shift is typically exactly zero; the additive lift is the
    live knob."""
    base = run_dichotomy(params, c_lo, c_hi, steps, config)
    mid = dichotomy_midpoint(base)
    capped = run_dichotomy(params, c_lo, c_hi, steps,
                           replace(config, cap_factor=2.0 * config.cap_factor))
    lifted = run_dichotomy(
        params, c_lo, c_hi, steps,
        replace(config, lift_denominator=2 * config.lift_denominator))
    return {
        "base": base,
        "cap_doubled": capped,
        "lift_doubled": lifted,
        "cap_shift": abs(dichotomy_midpoint(capped) - mid) / mid,
        "lift_shift": abs(dichotomy_midpoint(lifted) - mid) / mid,
    }


# ---------------------------------------------------------------------------
# discrete self-similarity

def _scaled_geometry(g, lam: float):
    # the mapped grid must land on exactly representable coordinates,
    # otherwise the discrete covariance silently degrades
    def exact(v):
        return (v / lam) * lam == v

    if isinstance(g, RadialGeometry):
        if not exact(g.h):
            raise GridError(f"spacing {g.h} does not divide exactly by {lam}")
        return RadialGeometry(g.N, g.n_cells, g.h / lam)
    if not exact(g.h) or not all(exact(v) for v in g.lo):
        raise GridError(f"grid does not divide exactly by {lam}")
    return BoxGeometry(g.N, tuple(v / lam for v in g.lo), g.shape,
                       g.h / lam, g.boundary)


def run_scaling_check(config: SolverConfig, lam: float,
                      lockstep: bool = True) -> float:
    """Deviation from the rescaling relation
    v(x, t) = lam^(2/(p-m)) u(lam x, lam^theta' t).

    The base problem runs adaptively.  The rescaled problem either replays
    the base schedule divided by lam^theta' (lockstep: the explicit update
    then commutes with the rescaling down to rounding), or picks its own
    steps (independent: time-discretization differences of a couple of
    percent are expected).  Returns the largest relative sup-norm
    deviation over the common snapshot times.
    """
    if not (math.isfinite(lam) and lam >= 1.0):
        raise SolverError(f"scale factor must be >= 1, got {lam}")
    if config.forced_dt is not None:
        raise SolverError("the base run must use the adaptive schedule")
    prm = config.params
    base = solve(replace(config, record_stride=1, monitors=()))
    if not base.completed:
        raise SolverError(f"base run ended with status {base.status!r}")
    dts = np.asarray(base.series["dt"][1:], dtype=float)

    amp = lam ** prm.scaling_amplitude
    speed = lam ** prm.theta_prime
    g2 = _scaled_geometry(config.initial.geometry, lam)
    start = GridField(g2, amp * config.initial.values)

    if lockstep:
        dts2 = dts / speed
        bounds = []
        t = 0.0
        k = 0
        for _, cum in base.event_steps:
            while k < cum:
                t += dts2[k]       # mirrors the kernel's accumulation exactly
                k += 1
            bounds.append(t)
        cfg2 = replace(config, initial=start, horizon=bounds[-1],
                       snapshots=tuple(bounds[:-1]), forced_dt=dts2,
                       monitors=())
    else:
        bounds = [t_ev / speed for t_ev, _ in base.event_steps]
        cfg2 = replace(config, initial=start, horizon=bounds[-1],
                       snapshots=tuple(bounds[:-1]), monitors=())
    scaled = solve(cfg2)
    if not scaled.completed:
        raise SolverError(f"rescaled run ended with status {scaled.status!r}")
    if lockstep and scaled.steps != base.steps:
        raise SolverError(
            f"lockstep lost sync: {scaled.steps} vs {base.steps} steps")

    worst = 0.0
    for (_, fb), (_, fv) in zip(base.snapshots, scaled.snapshots):
        ref = amp * fb.values
        gap = float(np.max(np.abs(fv.values - ref)))
        den = max(float(np.max(ref)), 1e-300)
        worst = max(worst, gap / den)
    return worst


# ---------------------------------------------------------------------------
# small-data blow-up probe

def run_fujita_probe(params: ProblemParams, geometry, amplitude: float,
                     width: float, horizon: float, safety: float = 0.5,
                     u_max: float = 1e8, dt_min: float = 1e-10,
                     snapshots: tuple = ()) -> SolveReport:
    """Gaussian-data probe of the range m < p <= m + 2/N where no
    nontrivial global solution exists.

    Any nontrivial nonnegative start should blow up in finite time there.
    The probe can only certify the blow-up half: a run that completes says
    the horizon was too short, nothing more.
    """
    if params.regime() is Regime.SUPERCRITICAL:
        raise SolverError("the probe range is m < p <= m + 2/N")
    if not (math.isfinite(amplitude) and amplitude >= 0):
        raise SolverError(f"amplitude must be nonnegative, got {amplitude}")
    start = gaussian_field(geometry, amplitude, width)
    cfg = SolverConfig(params=params, initial=start, horizon=horizon,
                       safety=safety, u_max=u_max, dt_min=dt_min,
                       snapshots=snapshots)
    return solve(cfg)


def fujita_verdict(report: SolveReport) -> str:
    """"blow_up" when the probe certified non-existence, "trivial" for
    identically zero data, "inconclusive" for a run that reached its
    horizon."""
    if report.status in BLOWUP_STATUSES:
        return "blow_up"
    if report.snapshots and report.snapshots[0][1].linf() == 0.0:
        return "trivial"
    return "inconclusive"


# ---------------------------------------------------------------------------
# sup-norm decay

@dataclass(frozen=True)
class DecayCheck:
    """Tail behaviour of the weighted sup norm t^(1/(p-1)) * max_x u(t)."""

    tail_sup: float
    trend: str                     # "increasing" | "flat" | "decreasing"
    times: np.ndarray = field(repr=False, default=None)
    values: np.ndarray = field(repr=False, default=None)


def run_decay_check(report: SolveReport,
                    params: ProblemParams = None) -> DecayCheck:
    """Supremum of t^(1/(p-1)) * sup_x u(t) over the final decade of the
    run, with a log-log trend flag (slope against a +-0.05 band).

    Boundedness of this quantity is what distinguishes decaying small-data
    solutions above the borderline exponent, so the check demands a
    completed run there; blow-up runs are rejected outright (the weighted
    norm diverges by construction).
    """
    prm = params if params is not None else report.params
    if prm is None:
        raise SolverError("decay check needs problem parameters")
    if not report.completed:
        raise SolverError(f"decay check needs a completed run, got "
                          f"{report.status!r}")
    if prm.regime() is not Regime.SUPERCRITICAL:
        raise SolverError("the decay weight applies above p = m + 2/N")

    t = np.asarray(report.series["t"], dtype=float)
    sup = np.asarray(report.series["linf"], dtype=float)
    w = t ** (1.0 / (prm.p - 1.0)) * sup
    tail = t >= report.t_final / 10.0
    tail_sup = float(np.max(w[tail]))

    good = tail & (t > 0) & (w > 0)
    if np.count_nonzero(good) < 2:
        trend = "flat"                 # a dead tail neither grows nor decays
    else:
        slope = float(np.polyfit(np.log(t[good]), np.log(w[good]), 1)[0])
        if slope > TREND_BAND:
            trend = "increasing"
        elif slope < -TREND_BAND:
            trend = "decreasing"
        else:
            trend = "flat"
    return DecayCheck(tail_sup=tail_sup, trend=trend, times=t[tail],
                      values=w[tail])


# ---------------------------------------------------------------------------
# localized energy audit

@dataclass
class EnergyMonitor:
    """Time series of every term in the localized energy estimate (the
    log-refined form at the borderline exponent, the power-weight form
    above it) and the smallest constant chat making the estimate hold at
    every snapshot.

    The series store the raw accumulators; the sigma^-2 and norm^(p-m)
    weights are applied when the two sides are assembled for the fit.
    """

    regime: str                    # "critical" | "supercritical"
    weight: float                  # log exponent alpha, or power beta
    sigma: float
    times: np.ndarray
    terms: dict                    # name -> series over the snapshot times
    chat: float
    params: ProblemParams = None

    def __post_init__(self):
        for name, series in self.terms.items():
            arr = np.asarray(series, dtype=float)
            if arr.shape != np.shape(self.times):
                raise SolverError(f"term {name!r} is not a snapshot series")
            if not np.all(np.isfinite(arr)) or np.any(arr < 0):
                raise SolverError(f"term {name!r} must be finite and >= 0")
            self.terms[name] = arr
        grad = self.terms.get("grad_energy")
        if grad is not None and np.any(np.diff(grad) < 0):
            raise SolverError("gradient energy must be nondecreasing")


def _grad_squared(f: GridField) -> np.ndarray:
    """|grad u|^2 by central differences; edges mirrored (or wrapped) to
    match the solver's flux convention."""
    g = f.geometry
    u = f.values
    mode = "wrap" if getattr(g, "boundary", "neumann") == "periodic" else "edge"
    if isinstance(g, RadialGeometry) or g.N == 1:
        up = np.pad(u, 1, mode="edge" if isinstance(g, RadialGeometry) else mode)
        d = (up[2:] - up[:-2]) / (2.0 * g.h)
        return d * d
    up = np.pad(u, 1, mode=mode)
    dx = (up[2:, 1:-1] - up[:-2, 1:-1]) / (2.0 * g.h)
    dy = (up[1:-1, 2:] - up[1:-1, :-2]) / (2.0 * g.h)
    return dx * dx + dy * dy


def _window_integrals(geometry, values: np.ndarray, sigma: float) -> np.ndarray:
    """Integral of `values` over the radius-sigma ball at every admissible
    center, flattened; radial grids expose the origin ball only."""
    if isinstance(geometry, RadialGeometry):
        sel = geometry.centers() < sigma
        if not np.any(sel):
            raise GridError(f"radius {sigma} under-resolved (h={geometry.h})")
        vols = geometry.shell_volumes()
        return np.array([float(np.sum(values[sel] * vols[sel]))])
    avg, counts, _ = window_averages(GridField(geometry, values), sigma)
    return (avg * counts).ravel() * geometry.cell_volume


def run_energy_monitor(report: SolveReport, sigma: float, alpha: float = None,
                       beta: float = None) -> EnergyMonitor:
    """Audit the localized energy estimate along a finished run.

    At the borderline exponent pass alpha, the log weight of the mass
    density xi log(e+xi)^alpha; above it pass the power weight beta > 1.
    Every term of the matching estimate is accumulated over the snapshot
    times (time integrals by the trapezoid rule, ball suprema over all
    admissible centers, cumulate-then-sup for the time integrals), and
    chat is the largest ratio of the left side to the bracketed right
    side over the snapshots.
    """
    prm = report.params
    if prm is None:
        raise SolverError("energy monitor needs problem parameters")
    if not (math.isfinite(sigma) and sigma > 0):
        raise SolverError(f"window radius must be positive, got {sigma}")
    if len(report.snapshots) < 2:
        raise SolverError("energy monitor needs at least two snapshots")

    regime = prm.regime()
    if regime is Regime.CRITICAL:
        if alpha is None or beta is not None:
            raise SolverError("borderline exponent: pass alpha, not beta")
        spec = PsiSpec(float(alpha))
        weight = float(alpha)
    elif regime is Regime.SUPERCRITICAL:
        if beta is None or alpha is not None:
            raise SolverError("supercritical exponent: pass beta, not alpha")
        if not (math.isfinite(beta) and beta > 1.0):
            raise SolverError(f"power weight must exceed 1, got {beta}")
        spec = None
        weight = float(beta)
    else:
        raise SolverError("no energy estimate below p = m + 2/N")

    m, p = prm.m, prm.p
    pm_gap = p - m
    g = report.snapshots[0][1].geometry
    times = np.array([t for t, _ in report.snapshots])
    critical = regime is Regime.CRITICAL

    def mass_density(u):
        return psi(u, spec) if critical else u ** weight

    def grad_density(u, grad2):
        if critical:
            return u ** (m - 1.0) * psi_second(u, spec) * grad2
        e = m + weight - 3.0
        if e < 0:      # keep 0 * inf off the books where the state vanishes
            safe = np.where(u > 0, u, 1.0) ** e
            return np.where(u > 0, safe, 0.0) * grad2
        return u ** e * grad2

    def load_density(u):
        return u ** (m - 1.0) * psi(u, spec) if critical \
            else u ** (m + weight - 1.0)

    def state_norm(fld):
        if critical:
            return orlicz_eta_norm(fld, spec, 1.0, prm, cap=sigma)
        return morrey_norm(fld, 0.5 * prm.N * pm_gap, alpha=weight, cap=sigma)

    n = times.size
    peak = np.empty(n)
    grad_energy = np.empty(n)
    load = np.empty(n)
    bulk = np.empty(n)
    norm_run = np.empty(n)
    cum_grad = cum_load = cum_bulk = 0.0
    prev = None
    for k, (t, fld) in enumerate(report.snapshots):
        u = fld.values
        w_mass = _window_integrals(g, mass_density(u), sigma)
        if k == 0:
            # the start datum enters the estimate through its mass alone;
            # its raw gradients are never sampled (they diverge under
            # refinement for singular data), so the first interval uses
            # the right-endpoint rule instead of the trapezoid
            cum_grad = cum_load = cum_bulk = 0.0
            peak[0] = float(np.max(w_mass))
            norm_run[0] = state_norm(fld)
            grad_energy[0] = load[0] = bulk[0] = 0.0
            prev = None
            continue
        w_grad = _window_integrals(g, grad_density(u, _grad_squared(fld)), sigma)
        w_load = _window_integrals(g, load_density(u), sigma)
        dt = times[k] - times[k - 1]
        if prev is None:
            cum_grad = cum_grad + w_grad * dt
            cum_load = cum_load + w_load * dt
            cum_bulk = cum_bulk + w_mass * dt
        else:
            cum_grad = cum_grad + 0.5 * (w_grad + prev[0]) * dt
            cum_load = cum_load + 0.5 * (w_load + prev[1]) * dt
            cum_bulk = cum_bulk + 0.5 * (w_mass + prev[2]) * dt
        peak[k] = max(peak[k - 1], float(np.max(w_mass)))
        norm_run[k] = max(norm_run[k - 1], state_norm(fld))
        grad_energy[k] = float(np.max(cum_grad))
        load[k] = float(np.max(cum_load))
        bulk[k] = float(np.max(cum_bulk))
        prev = (w_grad, w_load, w_mass)

    data_mass = peak[0]
    interaction = norm_run ** pm_gap * grad_energy
    lhs = peak + grad_energy
    if critical:
        rhs = data_mass + sigma ** -2.0 * load + bulk + interaction
        terms = {"peak_mass": peak, "grad_energy": grad_energy,
                 "data_mass": np.full(n, data_mass),
                 "diffusion_load": load, "bulk_mass": bulk,
                 "interaction": interaction, "eta_norm": norm_run}
    else:
        rhs = data_mass + (1.0 + norm_run ** pm_gap) * sigma ** -2.0 * load \
            + interaction
        terms = {"peak_mass": peak, "grad_energy": grad_energy,
                 "data_mass": np.full(n, data_mass),
                 "diffusion_load": load, "interaction": interaction,
                 "morrey_norm": norm_run}

    with np.errstate(invalid="ignore"):
        ratios = np.where(rhs > 0, lhs / np.where(rhs > 0, rhs, 1.0),
                          np.where(lhs > 0, np.inf, 0.0))
    return EnergyMonitor(regime="critical" if critical else "supercritical",
                         weight=weight, sigma=float(sigma), times=times,
                         terms=terms, chat=float(np.max(ratios)), params=prm)
