"""Problem parameters and exponent algebra for u_t = lap(u^m) + u^p.

Everything downstream hangs off three numbers: the dimension N and the
exponent pair 1 <= m < p.  The split between decaying and persisting
small data sits at p_crit = m + 2/N; the time-space scaling exponents
theta = (p-m)/(2(p-1)) and theta_prime = 1/theta convert between the
intrinsic time and length scales of the problem.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

REGIME_TOL = 1e-12


class Regime(enum.Enum):
    SUBCRITICAL = "subcritical"
    CRITICAL = "critical"
    SUPERCRITICAL = "supercritical"


@dataclass(frozen=True)
class ProblemParams:
    """Dimension and exponents, with derived scaling quantities attached."""

    N: int
    m: float
    p: float

    def __post_init__(self):
        if not isinstance(self.N, int) or isinstance(self.N, bool):
            raise ValueError(f"N must be an integer, got {self.N!r}")
        if self.N < 1:
            raise ValueError(f"N must be >= 1, got {self.N}")
        m, p = float(self.m), float(self.p)
        if not (math.isfinite(m) and math.isfinite(p)):
            raise ValueError(f"exponents must be finite, got m={self.m}, p={self.p}")
        if not 1.0 <= m:
            raise ValueError(f"m must satisfy m >= 1, got m={m}")
        if not m < p:
            raise ValueError(f"exponents must satisfy m < p, got m={m}, p={p}")
        object.__setattr__(self, "m", m)
        object.__setattr__(self, "p", p)

    @property
    def p_crit(self) -> float:
        """Exponent m + 2/N separating the small-data regimes."""
        return self.m + 2.0 / self.N

    @property
    def theta(self) -> float:
        """(p-m)/(2(p-1)), in (0, 1/2]; equals 1/2 exactly when m = 1."""
        return (self.p - self.m) / (2.0 * (self.p - 1.0))

    @property
    def theta_prime(self) -> float:
        """2(p-1)/(p-m) = 1/theta, the time exponent of the scaling group."""
        return 2.0 * (self.p - 1.0) / (self.p - self.m)

    @property
    def mass_exponent(self) -> float:
        """N - 2/(p-m); its sign matches the regime (positive iff supercritical)."""
        return self.N - 2.0 / (self.p - self.m)

    @property
    def scaling_amplitude(self) -> float:
        """2/(p-m): u_lam(x,t) = lam^(2/(p-m)) u(lam x, lam^theta_prime t)."""
        return 2.0 / (self.p - self.m)

    def kappa(self, r: float) -> float:
        """N(m-1) + 2r, the decay denominator for the L^r smoothing estimate."""
        if not r >= 1:
            raise ValueError(f"kappa requires r >= 1, got r={r}")
        return self.N * (self.m - 1.0) + 2.0 * r

    def regime(self, tol: float = REGIME_TOL) -> Regime:
        """Classify p against p_crit with an absolute tolerance band."""
        if not (0 <= tol < 1e-3):
            raise ValueError(f"unreasonable regime tolerance {tol}")
        d = self.p - self.p_crit
        if abs(d) <= tol:
            return Regime.CRITICAL
        return Regime.SUPERCRITICAL if d > 0 else Regime.SUBCRITICAL

    def is_critical(self, tol: float = REGIME_TOL) -> bool:
        return self.regime(tol) is Regime.CRITICAL
