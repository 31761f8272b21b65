"""Built-in oracle suite: fast end-to-end checks against exact answers.

Each check takes at most a few seconds and compares the numerical core
with a closed form (self-similar profile, ODE blow-up time, the heat
case of the time-to-length table, norm algebra) or an exact discrete
identity (scaling lockstep, threshold seed trials).  The `validate` CLI
subcommand prints one CSV row per check and fails the process when any
check fails.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .experiments import (BLOWUP_STATUSES, DichotomyConfig, dichotomy_trial,
                          run_scaling_check)
from .grids import BoxGeometry, GridField, constant_field, gaussian_field, mu_c_field
from .norms import morrey_norm
from .params import ProblemParams
from .solver import SolverConfig, barenblatt_field, solve
from .special import build_gamma, gamma_identity_check
from .traces import envelope_constant

VALIDATE_SCHEMA = "validate-csv/1"


@dataclass(frozen=True)
class OracleCheck:
    name: str
    passed: bool
    detail: str


def _check_gamma_heat() -> OracleCheck:
    table = build_gamma(ProblemParams(1, 1.0, 3.0))
    xs = np.geomspace(1e-12, 1.0, 1000)
    err = float(np.max(np.abs(table(xs) - np.sqrt(xs))))
    return OracleCheck("gamma_heat_sqrt", err <= 1e-8, f"max_err={err:.3e}")


def _check_gamma_identity() -> OracleCheck:
    worst = 0.0
    for prm in (ProblemParams(1, 2.0, 4.0), ProblemParams(2, 2.0, 3.0)):
        worst = max(worst, gamma_identity_check(build_gamma(prm)))
    return OracleCheck("gamma_defining_identity", worst <= 1e-6,
                       f"residual={worst:.3e}")


def _check_morrey_algebra() -> OracleCheck:
    g = BoxGeometry.from_extent(-1.0, 1.0, 1.0 / 64)
    c = constant_field(g, 0.7)
    closed = 0.7 * 0.5 ** (1.0 / 1.5)
    err = abs(morrey_norm(c, q=1.5, cap=0.5) / closed - 1.0)
    f = mu_c_field(g, 1.0, ProblemParams(1, 2.0, 5.0))
    base = morrey_norm(f, q=1.5, cap=0.5)
    seven = morrey_norm(GridField(g, 7.0 * f.values), q=1.5, cap=0.5)
    err = max(err, abs(seven / (7.0 * base) - 1.0))
    return OracleCheck("morrey_algebra", err <= 1e-12, f"rel_err={err:.3e}")


def _check_barenblatt() -> OracleCheck:
    prm = ProblemParams(1, 2.0, 5.0)        # p idle: source off
    g = BoxGeometry.from_extent(-4.0, 4.0, 0.02)
    cfg = SolverConfig(params=prm, initial=barenblatt_field(g, 1.0, 1.0, prm),
                       horizon=0.25, source_on=False)
    rep = solve(cfg)
    exact = barenblatt_field(g, 1.25, 1.0, prm).values
    err = float(np.sum(np.abs(rep.snapshots[-1][1].values - exact))
                / np.sum(exact))
    return OracleCheck("barenblatt_profile", rep.completed and err <= 2e-2,
                       f"rel_l1={err:.3e}")


def _check_ode_blowup() -> OracleCheck:
    g = BoxGeometry.from_extent(0.0, 1.0, 0.125, boundary="periodic")
    cfg = SolverConfig(params=ProblemParams(1, 1.0, 2.0),
                       initial=constant_field(g, 1.0), horizon=2.0,
                       safety=0.02)
    rep = solve(cfg)
    ok = rep.status in BLOWUP_STATUSES and 0.98 <= rep.blow_time <= 1.02
    return OracleCheck("ode_blowup_time", ok,
                       f"t_star={rep.blow_time!r}")


def _check_scaling_lockstep() -> OracleCheck:
    g = BoxGeometry.from_extent(-2.0, 2.0, 1.0 / 32)
    cfg = SolverConfig(params=ProblemParams(1, 2.0, 5.0),
                       initial=gaussian_field(g, 1.0, 0.5), horizon=0.125,
                       snapshots=(0.0625,))
    dev = run_scaling_check(cfg, 2.0)
    return OracleCheck("scaling_lockstep", dev <= 1e-10, f"deviation={dev:.3e}")


def _check_threshold_seeds() -> OracleCheck:
    prm = ProblemParams(1, 2.0, 5.0)
    cfg = DichotomyConfig(geometry=BoxGeometry.from_extent(-2.0, 2.0, 1.0 / 16),
                          horizon=2.0)
    low = dichotomy_trial(prm, 0.0, cfg)
    high = dichotomy_trial(prm, 1000.0, cfg)
    ok = low.completed and high.status in BLOWUP_STATUSES
    return OracleCheck("threshold_seed_trials", ok,
                       f"low={low.status} high={high.status}")


def _check_envelope_constant() -> OracleCheck:
    const = envelope_constant(ProblemParams(1, 2.0, 5.0), 10.0)
    ok = np.isfinite(const.value) and const.value > 0.0
    return OracleCheck("envelope_constant", bool(ok),
                       f"value={const.value:.6e} branch={const.branch}")


_CHECKS = (_check_gamma_heat, _check_gamma_identity, _check_morrey_algebra,
           _check_barenblatt, _check_ode_blowup, _check_scaling_lockstep,
           _check_threshold_seeds, _check_envelope_constant)


def run_suite() -> tuple:
    return tuple(check() for check in _CHECKS)


def format_suite_csv(checks) -> str:
    lines = [f"# {VALIDATE_SCHEMA}", "check,passed,detail"]
    for c in checks:
        lines.append(f"{c.name},{int(c.passed)},{c.detail}")
    return "\n".join(lines) + "\n"
