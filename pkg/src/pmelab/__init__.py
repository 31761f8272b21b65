"""pmelab: a numerical laboratory for u_t = lap(u^m) + u^p.

Tools for the slow-diffusion power-source equation: exponent algebra,
borderline Orlicz weights, localized mass functionals, a positivity
preserving explicit solver, initial-trace measurement, and experiment
drivers for existence/blow-up dichotomy studies.
"""

from .config import ExperimentSpec, parse_config
from .errors import (ConfigError, GridError, NumericalInstability,
                     QuadratureError, SolverError)
from .experiments import (BLOWUP_STATUSES, DecayCheck, DichotomyConfig,
                          DichotomyResult, EnergyMonitor, dichotomy_midpoint,
                          dichotomy_sensitivity, dichotomy_trial,
                          fujita_verdict, run_decay_check, run_dichotomy,
                          run_energy_monitor, run_fujita_probe,
                          run_scaling_check)
from .grids import (BoxGeometry, GridField, RadialGeometry, constant_field,
                    gaussian_field, mu_c_field)
from .io import parse_field_csv, read_field_csv
from .norms import (NormSpec, ball_average, doubling_constant, evaluate_norm,
                    morrey_norm, orlicz_eta_norm, radius_ladder, sup_ball_mass)
from .params import ProblemParams, Regime
from .solver import (BumpTestFunction, ConstantBump, SolveReport,
                     SolverConfig, barenblatt, barenblatt_field,
                     regularize_initial, solve, weak_residual)
from .special import (EnvelopeSpec, GammaTable, PsiSpec, build_gamma,
                      envelope_shape, eta, gamma_identity_check, mu_c, psi,
                      psi_prime, psi_second, trace_envelope)
from .traces import (CutoffSpec, EnvelopeCheck, EnvelopeConstant,
                     TraceEstimate, check_envelope, cutoff_d1, cutoff_d2,
                     cutoff_profile, envelope_constant, envelope_integrand,
                     measure_trace, trace_sensitivity)
from .validate import OracleCheck, run_suite

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "ball_average",
    "barenblatt",
    "barenblatt_field",
    "BLOWUP_STATUSES",
    "BoxGeometry",
    "build_gamma",
    "BumpTestFunction",
    "check_envelope",
    "ConfigError",
    "constant_field",
    "ConstantBump",
    "cutoff_d1",
    "cutoff_d2",
    "cutoff_profile",
    "CutoffSpec",
    "DecayCheck",
    "dichotomy_midpoint",
    "dichotomy_sensitivity",
    "dichotomy_trial",
    "DichotomyConfig",
    "DichotomyResult",
    "doubling_constant",
    "EnergyMonitor",
    "envelope_constant",
    "envelope_integrand",
    "envelope_shape",
    "EnvelopeCheck",
    "EnvelopeConstant",
    "EnvelopeSpec",
    "eta",
    "evaluate_norm",
    "ExperimentSpec",
    "fujita_verdict",
    "gamma_identity_check",
    "GammaTable",
    "gaussian_field",
    "GridError",
    "GridField",
    "measure_trace",
    "morrey_norm",
    "mu_c",
    "mu_c_field",
    "NormSpec",
    "NumericalInstability",
    "OracleCheck",
    "orlicz_eta_norm",
    "parse_config",
    "parse_field_csv",
    "ProblemParams",
    "psi",
    "psi_prime",
    "psi_second",
    "PsiSpec",
    "QuadratureError",
    "RadialGeometry",
    "radius_ladder",
    "read_field_csv",
    "Regime",
    "regularize_initial",
    "run_decay_check",
    "run_dichotomy",
    "run_energy_monitor",
    "run_fujita_probe",
    "run_scaling_check",
    "run_suite",
    "solve",
    "SolverConfig",
    "SolveReport",
    "SolverError",
    "sup_ball_mass",
    "trace_envelope",
    "trace_sensitivity",
    "TraceEstimate",
    "weak_residual",
]
