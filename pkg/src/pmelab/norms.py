"""Uniformly local functionals over grid fields.

Everything here is a supremum over ball centers and a geometric ladder of
radii: plain ball averages, ball masses, power-weighted (Morrey-type) norms,
the log-weighted Orlicz functional built on psi/eta, and the mass-doubling
ratio.  Cells enter a ball by the center-in rule (a cell counts iff its
center lies strictly inside), so the effective radius is quantized to
half-integer multiples of h; ratios of such quantities are much more
accurate than the quantities themselves.

Window sums are computed from shifted prefix sums on mean-centered values,
which keeps window averages of a constant field exact instead of accurate
to n*eps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import GridError
from .grids import BoxGeometry, GridField, RadialGeometry, unit_ball_volume
from .params import ProblemParams, Regime
from .special import PsiSpec, eta, psi, psi_inv

LADDER_RATIO = 2.0 ** 0.25


def radius_ladder(h: float, cap: float, ratio: float = LADDER_RATIO,
                  count=None) -> np.ndarray:
    """Geometric radii anchored at the cap (so the cap is always a ladder
    point), descending toward h, returned ascending."""
    if not (math.isfinite(h) and h > 0):
        raise GridError(f"spacing must be positive, got {h}")
    if not (math.isfinite(cap) and cap >= h):
        raise GridError(f"cap must be finite and >= h, got {cap}")
    if not (math.isfinite(ratio) and ratio > 1.0):
        raise GridError(f"ladder ratio must exceed 1, got {ratio}")
    if count is None:
        count = 1 + int(math.floor(math.log(cap / h) / math.log(ratio) + 1e-12))
    count = int(count)
    if count < 1:
        raise GridError("empty radius ladder")
    radii = cap / ratio ** np.arange(count - 1, -1, -1, dtype=float)
    if radii[0] < h * (1.0 - 1e-12):
        raise GridError(
            f"ladder descends below the spacing: {radii[0]} < h={h}")
    return radii


# ---------------------------------------------------------------------------
# windowed averages over all cell centers

def _half_width(sigma: float, h: float) -> int:
    # strict center-in: offsets k with |k| h < sigma
    return int(math.ceil(sigma / h)) - 1


def _window_averages_1d(values: np.ndarray, sigma: float, h: float,
                        boundary: str):
    n = values.size
    K = _half_width(sigma, h)
    vbar = float(np.mean(values))
    w = values - vbar
    idx = np.arange(n)
    if boundary == "periodic":
        if 2 * K + 1 > n:
            raise GridError("periodic window exceeds the period")
        wp = np.concatenate([w[n - K:], w, w[:K]]) if K else w
        cs = np.concatenate([[0.0], np.cumsum(wp)])
        sums = cs[idx + 2 * K + 1] - cs[idx]
        counts = np.full(n, 2 * K + 1, dtype=float)
    else:
        Ke = min(K, n - 1)
        cs = np.concatenate([[0.0], np.cumsum(w)])
        lo = np.maximum(idx - Ke, 0)
        hi = np.minimum(idx + Ke, n - 1)
        sums = cs[hi + 1] - cs[lo]
        counts = (hi - lo + 1).astype(float)
    return vbar + sums / counts, counts, float(2 * K + 1)


def _window_averages_2d(values: np.ndarray, sigma: float, h: float,
                        boundary: str):
    n0, n1 = values.shape
    s = sigma / h
    K = _half_width(sigma, h)
    # per-row half widths of the discrete disk: i^2 + dy^2 < s^2
    kx = [int(math.ceil(math.sqrt(s * s - dy * dy))) - 1 for dy in range(K + 1)]

    vbar = float(np.mean(values))
    w = values - vbar
    if boundary == "periodic":
        if 2 * K + 1 > n0 or 2 * kx[0] + 1 > n1:
            raise GridError("periodic window exceeds the period")
        pad_mode = "wrap"
        K0, Kx = K, kx[0]
    else:
        pad_mode = "constant"
        K0, Kx = min(K, n0 - 1), min(kx[0], n1 - 1)
    wp = np.pad(w, ((K0, K0), (Kx, Kx)), mode=pad_mode)
    ones = np.pad(np.ones_like(values), ((K0, K0), (Kx, Kx)), mode=pad_mode)

    cols = np.arange(n1)
    sums = np.zeros((n0, n1))
    counts = np.zeros((n0, n1))
    for dy in range(-K0, K0 + 1):
        kxd = min(kx[abs(dy)], Kx)
        for acc, src in ((sums, wp), (counts, ones)):
            rows = src[K0 + dy: K0 + dy + n0, :]
            cs = np.concatenate([np.zeros((n0, 1)), np.cumsum(rows, axis=1)],
                                axis=1)
            acc += cs[:, cols + Kx + kxd + 1] - cs[:, cols + Kx - kxd]
    full = float((2 * kx[0] + 1) + 2 * sum(2 * k + 1 for k in kx[1:]))
    return vbar + sums / counts, counts, full


def window_averages(f: GridField, sigma: float):
    """Ball averages centered at every cell: (averages, cell counts, full
    count of an unclipped window).  Centers whose count falls short of the
    full count sit within sigma of a Neumann boundary and average over a
    clipped ball."""
    g = f.geometry
    if not (math.isfinite(sigma) and sigma > 0):
        raise GridError(f"radius must be positive, got {sigma}")
    if isinstance(g, RadialGeometry):
        raise GridError("radial fields support origin-centered averages only")
    if g.N == 1:
        return _window_averages_1d(f.values, sigma, g.h, g.boundary)
    return _window_averages_2d(f.values, sigma, g.h, g.boundary)


# ---------------------------------------------------------------------------
# single-ball averages

def _origin_average_radial(f: GridField, sigma: float) -> float:
    g = f.geometry
    r = g.centers()
    sel = r < sigma
    if not np.any(sel):
        raise GridError(
            f"radius {sigma} under-resolved: no cell center inside (h={g.h})")
    vol = g.shell_volumes()[sel]
    return float(np.sum(f.values[sel] * vol) / np.sum(vol))


def ball_average(f: GridField, z, sigma: float) -> float:
    """Average of f over the cells whose centers lie in B(z, sigma)."""
    if not (math.isfinite(sigma) and sigma > 0):
        raise GridError(f"radius must be positive, got {sigma}")
    g = f.geometry
    if isinstance(g, RadialGeometry):
        z = np.atleast_1d(np.asarray(z, dtype=float))
        if np.any(z != 0.0):
            raise GridError("radial fields support origin-centered averages only")
        return _origin_average_radial(f, sigma)
    z = np.atleast_1d(np.asarray(z, dtype=float))
    if z.size != g.N:
        raise GridError(f"center has {z.size} coordinates, expected {g.N}")
    if not g.contains(z):
        raise GridError(f"center {tuple(z)} outside the domain")
    mesh = g.center_mesh()
    d2 = np.zeros(g.shape)
    for ax in range(g.N):
        d = np.abs(mesh[ax] - z[ax])
        if g.boundary == "periodic":
            period = g.shape[ax] * g.h
            d = np.minimum(d, period - d)
        d2 = d2 + d * d
    sel = d2 < sigma * sigma
    if not np.any(sel):
        raise GridError(
            f"radius {sigma} under-resolved: no cell center inside (h={g.h})")
    return float(np.mean(f.values[sel]))


# ---------------------------------------------------------------------------
# the functionals

def sup_ball_mass(f: GridField, sigma: float) -> float:
    """max over centers of (ball average) x (exact N-ball volume)."""
    g = f.geometry
    if sigma < g.h * (1.0 - 1e-12):
        raise GridError(f"need sigma >= h = {g.h}, got {sigma}")
    if isinstance(g, RadialGeometry):
        top = _origin_average_radial(f, sigma)
    else:
        top = float(np.max(window_averages(f, sigma)[0]))
    return top * unit_ball_volume(g.N) * sigma ** g.N


def doubling_constant(f: GridField, sigmas) -> float:
    """max over the ladder of sup-ball-mass at 2*sigma over sup at sigma;
    identically zero fields double trivially (1 by convention)."""
    sigmas = np.atleast_1d(np.asarray(sigmas, dtype=float))
    if sigmas.size == 0:
        raise GridError("empty radius ladder")
    if f.linf() == 0.0:
        return 1.0
    best = -np.inf
    for s in sigmas:
        best = max(best, sup_ball_mass(f, 2.0 * s) / sup_ball_mass(f, s))
    return float(best)


def _sup_average(f: GridField, sigma: float, centers: str,
                 power: float = 1.0) -> float:
    """Largest ball average of f^power over the chosen center set."""
    g = f.geometry
    probe = f if power == 1.0 else GridField(g, f.values ** power)
    if isinstance(g, RadialGeometry) or centers == "origin":
        origin = 0.0 if isinstance(g, RadialGeometry) else (0.0,) * g.N
        return ball_average(probe, origin, sigma)
    return float(np.max(window_averages(probe, sigma)[0]))


def morrey_norm(f: GridField, q: float, alpha: float = 1.0, cap=None,
                centers: str = "all", ratio: float = LADDER_RATIO,
                count=None, sigmas=None) -> float:
    """sup over centers and ladder radii of sigma^(N/q) (avg f^alpha)^(1/alpha).

    An explicit `sigmas` array overrides the ladder (diagnostics and
    brute-force cross-checks).
    """
    if not (math.isfinite(q) and q > 0):
        raise GridError(f"need q > 0, got {q}")
    if not (math.isfinite(alpha) and alpha >= 1.0):
        raise GridError(f"need alpha >= 1, got {alpha}")
    g = f.geometry
    if sigmas is None:
        sigmas = radius_ladder(g.h, _resolve_cap(g, cap), ratio, count)
    sigmas = np.atleast_1d(np.asarray(sigmas, dtype=float))
    if sigmas.size == 0:
        raise GridError("empty radius ladder")
    best = 0.0
    for s in sigmas:
        top = _sup_average(f, s, centers, power=alpha)
        best = max(best, s ** (g.N / q) * top ** (1.0 / alpha))
    return float(best)


def orlicz_eta_norm(f: GridField, spec: PsiSpec, horizon: float,
                    params: ProblemParams, cap=None, centers: str = "all",
                    ratio: float = LADDER_RATIO, count=None) -> float:
    """sup over centers and radii sigma <= T^theta of
    eta(sigma / T^theta) psi_inv(avg psi(T^(1/(p-1)) f)).

    Only defined on the borderline exponent line (eta carries exactly the
    log weight that makes this functional scale-critical there).
    """
    if params.regime() is not Regime.CRITICAL:
        raise GridError("the log-weighted functional needs p = m + 2/N")
    if not (math.isfinite(horizon) and horizon > 0):
        raise GridError(f"horizon must be positive, got {horizon}")
    g = f.geometry
    if g.N != params.N:
        raise GridError(f"geometry dimension {g.N} != params N={params.N}")
    scale = horizon ** params.theta
    amp = horizon ** (1.0 / (params.p - 1.0))
    cap_eff = min(_resolve_cap(g, cap), scale)
    sigmas = radius_ladder(g.h, cap_eff, ratio, count)
    lifted = GridField(g, psi(amp * f.values, spec))
    best = 0.0
    for s in sigmas:
        top = _sup_average(lifted, s, centers)
        # psi_inv is monotone, so one inversion of the max suffices
        best = max(best, eta(s / scale, params.N) * psi_inv(top, spec))
    return float(best)


# ---------------------------------------------------------------------------
# declarative entry point

def _resolve_cap(geometry, cap) -> float:
    if cap is not None and math.isfinite(cap):
        if cap <= 0:
            raise GridError(f"cap must be positive, got {cap}")
        return float(cap)
    if isinstance(geometry, RadialGeometry):
        return geometry.r_max
    return max(b - a for a, b in zip(geometry.lo, geometry.hi))


@dataclass(frozen=True)
class NormSpec:
    """Which functional to evaluate and over which ladder.

    kind: morrey | orlicz_eta | sup_ball_mass | linfty.  cap=None means the
    full domain extent.  count=None fills the ladder from the cap down to h.
    """

    kind: str
    q: float = None
    alpha: float = 1.0
    psi: PsiSpec = None
    horizon: float = None
    cap: float = None
    centers: str = "all"
    ratio: float = LADDER_RATIO
    count: int = None

    def __post_init__(self):
        if self.kind not in ("morrey", "orlicz_eta", "sup_ball_mass", "linfty"):
            raise GridError(f"unknown norm kind {self.kind!r}")
        if self.centers not in ("all", "origin"):
            raise GridError(f"unknown center set {self.centers!r}")
        if self.kind == "morrey":
            if self.q is None or not (math.isfinite(self.q) and self.q > 0):
                raise GridError(f"morrey norm needs q > 0, got {self.q}")
            if not (math.isfinite(self.alpha) and self.alpha >= 1.0):
                raise GridError(f"morrey norm needs alpha >= 1, got {self.alpha}")
        if self.kind == "orlicz_eta":
            if self.psi is None:
                raise GridError("orlicz_eta needs a PsiSpec")
            if self.horizon is None or not (math.isfinite(self.horizon)
                                            and self.horizon > 0):
                raise GridError(f"orlicz_eta needs horizon > 0, got {self.horizon}")


def evaluate_norm(f: GridField, spec: NormSpec, params: ProblemParams = None) -> float:
    if spec.kind == "linfty":
        return f.linf()
    if spec.kind == "morrey":
        return morrey_norm(f, spec.q, spec.alpha, spec.cap, spec.centers,
                           spec.ratio, spec.count)
    if spec.kind == "orlicz_eta":
        if params is None:
            raise GridError("orlicz_eta needs problem parameters")
        return orlicz_eta_norm(f, spec.psi, spec.horizon, params, spec.cap,
                               spec.centers, spec.ratio, spec.count)
    # sup_ball_mass: the mass is nondecreasing in sigma, but Neumann clipping
    # is not, so take the sup over the ladder like the other kinds
    g = f.geometry
    sigmas = radius_ladder(g.h, _resolve_cap(g, spec.cap), spec.ratio, spec.count)
    return float(max(sup_ball_mass(f, s) for s in sigmas))
