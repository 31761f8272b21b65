"""Scalar weights of the laboratory.

The Orlicz pair:
    psi(xi)  = xi [log(e + xi)]^alpha              (alpha > 0)
    eta(xi)  = xi^N [log(e + 1/xi)]^(N/2)          (eta(0) = 0)
the borderline time-to-length profile gamma on [0, 1], defined through

    int_0^gamma(xi) s eta(s)^(m-1) ds = C_eta xi,
    C_eta = int_0^1 s eta(s)^(m-1) ds,

the optimal singular data profiles mu_c, and the initial-trace envelope
shapes.  gamma exists only at the borderline exponent p = m + 2/N and is
tabulated once, then interpolated monotonically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.optimize import brentq

from .errors import QuadratureError
from .params import ProblemParams, Regime
from .quadrature import adaptive_simpson, gauss_panel_sums

E = math.e
_TINY = 1e-300


# ---------------------------------------------------------------------------
# psi and its inverse

@dataclass(frozen=True)
class PsiSpec:
    """Orlicz weight psi(xi) = xi [log(e + xi)]^alpha, alpha > 0."""

    alpha: float

    def __post_init__(self):
        a = float(self.alpha)
        if not (math.isfinite(a) and a > 0):
            raise ValueError(f"alpha must be positive and finite, got {self.alpha}")
        object.__setattr__(self, "alpha", a)


def psi(xi, spec: PsiSpec):
    xi = np.asarray(xi, dtype=float)
    if np.any(xi < 0):
        raise ValueError("psi is defined on [0, inf)")
    out = xi * np.log(E + xi) ** spec.alpha
    return out if out.ndim else float(out)


def psi_prime(xi, spec: PsiSpec):
    xi = np.asarray(xi, dtype=float)
    a = spec.alpha
    L = np.log(E + xi)
    out = L ** a + a * xi * L ** (a - 1.0) / (E + xi)
    return out if out.ndim else float(out)


def psi_second(xi, spec: PsiSpec):
    xi = np.asarray(xi, dtype=float)
    a = spec.alpha
    L = np.log(E + xi)
    D = E + xi
    out = 2.0 * a * L ** (a - 1.0) / D + a * xi * L ** (a - 2.0) * ((a - 1.0) - L) / D ** 2
    return out if out.ndim else float(out)


def psi_inv(y, spec: PsiSpec):
    """Inverse of psi by bracketed root finding; psi(xi) >= xi puts the root in [0, y]."""
    arr = np.asarray(y, dtype=float)
    if np.any(arr < 0) or not np.all(np.isfinite(arr)):
        raise ValueError("psi_inv needs finite nonnegative input")
    flat = arr.ravel()
    out = np.empty_like(flat)
    for i, yi in enumerate(flat):
        if yi == 0.0:
            out[i] = 0.0
            continue
        # xtol must scale with the root: the scipy default (2e-12 absolute)
        # destroys relative accuracy for small arguments
        out[i] = brentq(lambda s: s * math.log(E + s) ** spec.alpha - yi,
                        0.0, yi, rtol=1e-14, xtol=max(yi, 1e-280) * 1e-16,
                        maxiter=200)
    out = out.reshape(arr.shape)
    return out if out.ndim else float(out)


# ---------------------------------------------------------------------------
# eta and its inverse

def eta(xi, N: int):
    """Ball-weight eta(xi) = xi^N [log(e + 1/xi)]^(N/2), continuous at 0."""
    if N < 1:
        raise ValueError("N must be >= 1")
    xi = np.asarray(xi, dtype=float)
    if np.any(xi < 0):
        raise ValueError("eta is defined on [0, inf)")
    with np.errstate(divide="ignore"):
        out = np.where(xi > 0.0,
                       xi ** N * np.log(E + 1.0 / np.maximum(xi, _TINY)) ** (N / 2.0),
                       0.0)
    return out if out.ndim else float(out)


def eta_inv(y, N: int):
    """Inverse of eta; eta(xi) >= xi^N brackets the root inside [0, y^(1/N)]."""
    arr = np.asarray(y, dtype=float)
    if np.any(arr < 0) or not np.all(np.isfinite(arr)):
        raise ValueError("eta_inv needs finite nonnegative input")
    flat = arr.ravel()
    out = np.empty_like(flat)
    for i, yi in enumerate(flat):
        if yi == 0.0:
            out[i] = 0.0
            continue
        hi = yi ** (1.0 / N)

        def f(s, yi=yi):
            if s <= 0.0:
                return -yi
            return s ** N * math.log(E + 1.0 / s) ** (N / 2.0) - yi

        out[i] = brentq(f, 0.0, hi, rtol=1e-14, xtol=max(hi, 1e-280) * 1e-16,
                        maxiter=200)
    out = out.reshape(arr.shape)
    return out if out.ndim else float(out)


# ---------------------------------------------------------------------------
# gamma table

@dataclass(eq=False)
class GammaTable:
    """Monotone tabulation of gamma on [0, 1] with log-log interpolation.

    Nodes satisfy |int_0^gamma_k s eta(s)^(m-1) ds - C_eta xi_k| <= 1e-9.
    Interpolation runs on (log xi, log gamma): near zero gamma follows the
    power law xi^(1/(N(m-1)+2)) with slow log corrections, and a cubic in
    linear coordinates cannot hold the 1e-8 interpolation budget there.
    """

    params: ProblemParams
    c_eta: float
    xi_nodes: np.ndarray
    gamma_nodes: np.ndarray
    interpolation_order: int = 3

    def __post_init__(self):
        lx = np.log(self.xi_nodes[1:])
        lg = np.log(self.gamma_nodes[1:])
        self._interp = PchipInterpolator(lx, lg, extrapolate=False)
        self._tail_slope = (lg[1] - lg[0]) / (lx[1] - lx[0])
        self._xi_min = float(self.xi_nodes[1])
        self._gamma_min = float(self.gamma_nodes[1])

    def __call__(self, xi):
        arr = np.asarray(xi, dtype=float)
        scalar = arr.ndim == 0
        if np.any(arr < 0) or np.any(arr > 1.0 + 1e-12):
            raise ValueError("gamma is tabulated on [0, 1]")
        clipped = np.minimum(np.atleast_1d(arr), 1.0)
        out = np.zeros_like(clipped)
        big = clipped >= self._xi_min
        if np.any(big):
            out[big] = np.exp(self._interp(np.log(clipped[big])))
        small = (clipped > 0.0) & ~big
        if np.any(small):
            # power-law extension below the smallest tabulated node
            out[small] = self._gamma_min * (clipped[small] / self._xi_min) ** self._tail_slope
        return float(out[0]) if scalar else out


def _gamma_integrand(N: int, m: float):
    def G(s):
        s = np.asarray(s, dtype=float)
        out = s * eta(s, N) ** (m - 1.0)
        return out if out.ndim else float(out)
    return G


def _solve_gamma_node(G, g_edges: np.ndarray, I_cum: np.ndarray,
                      c_eta: float, xk: float) -> float:
    """Root of I(g) = c_eta * xk using the pre-tabulated cumulative I."""
    target = c_eta * xk
    j = int(np.searchsorted(I_cum, target, side="right")) - 1
    j = min(max(j, 0), len(g_edges) - 2)
    g_lo, g_hi = g_edges[j], g_edges[j + 1]
    I_lo = I_cum[j]

    def local(g, g_lo=g_lo, I_lo=I_lo, target=target):
        if g <= g_lo:
            return I_lo - target
        return I_lo + float(np.sum(gauss_panel_sums(G, np.array([g_lo, g])))) - target

    f_lo, f_hi = local(g_lo), local(g_hi)
    if f_hi < 0:
        # root sits at the grid end within quadrature noise (xi = 1 case)
        if abs(f_hi) > 1e-9 * c_eta:
            raise QuadratureError(f"gamma bracket failed at xi={xk!r}")
        return float(g_hi)
    if f_lo > 0:
        if abs(f_lo) > 1e-9 * c_eta:
            raise QuadratureError(f"gamma bracket failed at xi={xk!r}")
        return float(g_lo)
    return float(brentq(local, g_lo, g_hi, rtol=1e-14,
                        xtol=g_hi * 1e-16, maxiter=200))


def _gamma_dense_cumulative(G):
    """Cumulative integral of G on a dense geometric grid of gamma values."""
    g_edges = np.concatenate(([0.0], np.geomspace(1e-8, 1.0, 3073)))
    panels = gauss_panel_sums(G, g_edges)
    I_cum = np.concatenate(([0.0], np.cumsum(panels)))
    return g_edges, I_cum


def build_gamma(params: ProblemParams, *, nodes_per_decade: int = 300,
                xi_min: float = 1e-12, node_tol: float = 1e-9) -> GammaTable:
    """Construct the gamma table for borderline parameters.

    C_eta comes from adaptive Simpson (abs tol 1e-12); the cumulative integral
    is pre-tabulated on a dense geometric gamma grid with composite Gauss
    panels, and each xi node is then polished by bracketed root finding on
    the locally re-quadratured cumulative integral.
    """
    if params.regime() is not Regime.CRITICAL:
        raise ValueError(f"gamma is defined only at p = m + 2/N; got {params}")
    N, m = params.N, params.m
    G = _gamma_integrand(N, m)

    c_eta = adaptive_simpson(G, 0.0, 1.0, tol=1e-12)
    if not (math.isfinite(c_eta) and c_eta > 0):
        raise QuadratureError(f"C_eta evaluation failed: {c_eta}")

    g_edges, I_cum = _gamma_dense_cumulative(G)

    n_decades = -math.log10(xi_min)
    n_nodes = int(round(n_decades * nodes_per_decade)) + 1
    xi_pos = np.geomspace(xi_min, 1.0, n_nodes)
    xi_pos[-1] = 1.0

    gam = np.empty_like(xi_pos)
    for k, xk in enumerate(xi_pos):
        gam[k] = _solve_gamma_node(G, g_edges, I_cum, c_eta, xk)

    if abs(gam[-1] - 1.0) > 1e-8:
        raise QuadratureError(f"gamma(1) = {gam[-1]!r}, table construction drifted")
    gam[-1] = 1.0

    table = GammaTable(
        params=params,
        c_eta=c_eta,
        xi_nodes=np.concatenate(([0.0], xi_pos)),
        gamma_nodes=np.concatenate(([0.0], gam)),
    )
    _audit_gamma_nodes(table, node_tol)
    return table


def _audit_gamma_nodes(table: GammaTable, node_tol: float):
    """Spot-check node residuals with an independent adaptive-Simpson pass."""
    G = _gamma_integrand(table.params.N, table.params.m)
    stride = max(1, (len(table.xi_nodes) - 1) // 48)
    idx = list(range(1, len(table.xi_nodes), stride)) + [len(table.xi_nodes) - 1]
    for k in idx:
        res = abs(adaptive_simpson(G, 0.0, float(table.gamma_nodes[k]), tol=1e-13)
                  - table.c_eta * float(table.xi_nodes[k]))
        if res > node_tol:
            raise QuadratureError(
                f"gamma node residual {res:.3e} exceeds {node_tol} at xi={table.xi_nodes[k]}")


def gamma_identity_check(table: GammaTable) -> float:
    """Max relative residual of gamma(xi)^2 = 2 C_eta int_0^xi eta(gamma(s))^(1-m) ds.

    The identity is exact in the continuum (differentiate and use the defining
    relation), so the returned number measures the table's self-consistency.

    The singular head below the first node is integrated in closed form: the
    defining relation gives C_eta ds = g eta(g)^(m-1) dg along s -> gamma(s),
    so int_0^{xi_0} eta(gamma)^(1-m) ds = gamma_0^2 / (2 C_eta) exactly.  The
    remaining panels integrate the interpolated table, so the residual grows
    with interpolation and node error across the rest of the range.
    """
    N, m = table.params.N, table.params.m
    xi = table.xi_nodes[1:]
    gam = table.gamma_nodes[1:]

    def f(s):
        return eta(table(s), N) ** (-(m - 1.0)) if m != 1.0 else np.ones_like(np.asarray(s, dtype=float))

    J_head = float(gam[0]) ** 2 / (2.0 * table.c_eta)
    panels = gauss_panel_sums(f, xi)
    J = J_head + np.concatenate(([0.0], np.cumsum(panels)))

    resid = np.abs(gam ** 2 - 2.0 * table.c_eta * J) / np.maximum(gam ** 2, _TINY)
    return float(np.max(resid))


# ---------------------------------------------------------------------------
# optimal singular profiles

def mu_c_profile(r, c: float, params: ProblemParams):
    """Radial profile of the borderline singular data, +inf at r = 0.

    Borderline p:   c r^(-N) [log(e + 1/r)]^(-N/2 - 1)
    above it:       c r^(-2/(p-m))
    """
    if not (math.isfinite(c) and c > 0):
        raise ValueError(f"c must be positive, got {c}")
    reg = params.regime()
    if reg is Regime.SUBCRITICAL:
        raise ValueError("singular profile is defined only for p >= m + 2/N")
    arr = np.asarray(r, dtype=float)
    scalar = arr.ndim == 0
    if np.any(arr < 0):
        raise ValueError("radius must be nonnegative")
    r1 = np.atleast_1d(arr)
    out = np.full_like(r1, np.inf)
    pos = r1 > 0
    rp = r1[pos]
    if reg is Regime.CRITICAL:
        N = params.N
        out[pos] = c * rp ** (-N) * np.log(E + 1.0 / rp) ** (-N / 2.0 - 1.0)
    else:
        out[pos] = c * rp ** (-2.0 / (params.p - params.m))
    return float(out[0]) if scalar else out


def mu_c(x, c: float, params: ProblemParams):
    """Point evaluation of the singular data; x is a scalar (N=1) or a vector."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.size != params.N:
        raise ValueError(f"point has {x.size} coordinates, expected N={params.N}")
    return mu_c_profile(float(np.sqrt(np.sum(x * x))), c, params)


# ---------------------------------------------------------------------------
# initial-trace envelope

@dataclass(frozen=True)
class EnvelopeSpec:
    """Envelope mass(B(z, sigma)) <= constant * shape(sigma) on 0 < sigma <= horizon^theta."""

    params: ProblemParams
    horizon: float
    constant: float

    def __post_init__(self):
        if not (math.isfinite(self.horizon) and self.horizon > 0):
            raise ValueError(f"horizon must be positive, got {self.horizon}")
        if not (math.isfinite(self.constant) and self.constant > 0):
            raise ValueError(f"constant must be positive, got {self.constant}")

    @property
    def sigma_cap(self) -> float:
        return self.horizon ** self.params.theta


def envelope_shape(sigma, params: ProblemParams, horizon: float):
    """sigma^(N - 2/(p-m)) off the borderline, [log(e + T^theta/sigma)]^(-N/2) on it."""
    sigma = np.asarray(sigma, dtype=float)
    cap = horizon ** params.theta
    if np.any(sigma <= 0) or np.any(sigma > cap * (1.0 + 1e-12)):
        raise ValueError(f"sigma must lie in (0, horizon^theta = {cap}]")
    if params.regime() is Regime.CRITICAL:
        out = np.log(E + cap / sigma) ** (-params.N / 2.0)
    else:
        out = sigma ** params.mass_exponent
    return out if out.ndim else float(out)


def trace_envelope(sigma, spec: EnvelopeSpec):
    return spec.constant * envelope_shape(sigma, spec.params, spec.horizon)
