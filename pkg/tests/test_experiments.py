import math

import numpy as np
import pytest

from pmelab.errors import GridError, SolverError
from pmelab.experiments import (BLOWUP_STATUSES, DecayCheck, DichotomyConfig,
                                DichotomyResult, EnergyMonitor,
                                dichotomy_midpoint, dichotomy_sensitivity,
                                dichotomy_trial, fujita_verdict,
                                run_decay_check, run_dichotomy,
                                run_energy_monitor, run_fujita_probe,
                                run_scaling_check)
from pmelab.grids import (BoxGeometry, RadialGeometry, constant_field,
                          gaussian_field, mu_c_field)
from pmelab.params import ProblemParams
from pmelab.solver import (STATUS_COMPLETED, SolverConfig, SolveReport,
                           barenblatt_field, regularize_initial, solve)

P5 = ProblemParams(1, 2.0, 5.0)
P4 = ProblemParams(1, 2.0, 4.0)     # p = m + 2/N exactly
P3 = ProblemParams(1, 2.0, 3.0)

G16 = BoxGeometry.from_extent(-2.0, 2.0, 1.0 / 16)
DCFG = DichotomyConfig(geometry=G16, horizon=2.0)

PEAK_1D_M2 = 0.36056239257685210


@pytest.fixture(scope="module")
def dicho():
    return run_dichotomy(P5, 0.05, 80.0, 5, DCFG)


@pytest.fixture(scope="module")
def scale_cfg():
    g = BoxGeometry.from_extent(-2.0, 2.0, 1.0 / 32)
    return SolverConfig(params=P5, initial=gaussian_field(g, 1.0, 0.5),
                        horizon=0.125, snapshots=(0.0625,))


def critical_run(hinv):
    g = BoxGeometry.from_extent(-2.0, 2.0, 1.0 / hinv)
    mu = mu_c_field(g, 0.05, P4)
    start = regularize_initial(mu, 10.0 * float(np.max(mu.values)), 100)
    return solve(SolverConfig(params=P4, initial=start, horizon=0.5,
                              snapshots=(0.1, 0.2, 0.35, 0.5)))


@pytest.fixture(scope="module")
def crit16():
    return critical_run(16)


@pytest.fixture(scope="module")
def small_run():
    g = BoxGeometry.from_extent(-20.0, 20.0, 0.25)
    return solve(SolverConfig(params=P5, initial=gaussian_field(g, 1e-3, 1.0),
                              horizon=50.0))


@pytest.fixture(scope="module")
def barenblatt_run():
    g = BoxGeometry.from_extent(-8.0, 8.0, 1.0 / 16)
    cfg = SolverConfig(params=P5, initial=barenblatt_field(g, 1.0, 1.0, P5),
                       horizon=40.0, source_on=False)
    return solve(cfg)


class TestDichotomyTrial:
    def test_zero_amplitude_completes(self):
        rep = dichotomy_trial(P5, 0.0, DCFG)
        assert rep.completed
        start = rep.snapshots[0][1]
        assert np.all(start.values == 0.01)    # bare lift of the zero field

    def test_huge_amplitude_blows(self):
        rep = dichotomy_trial(P5, 80.0, DCFG)
        assert rep.status in BLOWUP_STATUSES

    def test_negative_amplitude_rejected(self):
        with pytest.raises(SolverError):
            dichotomy_trial(P5, -1.0, DCFG)

    def test_config_validation(self):
        with pytest.raises(SolverError):
            DichotomyConfig(geometry=G16, horizon=0.0)
        with pytest.raises(SolverError):
            DichotomyConfig(geometry=G16, cap_factor=0.0)
        with pytest.raises(SolverError):
            DichotomyConfig(geometry=G16, lift_denominator=0)


class TestRunDichotomy:
    def test_bracket_ordering(self, dicho):
        assert 0.05 <= dicho.c_exist < dicho.c_blow <= 80.0

    def test_outcome_partition(self, dicho):
        for c, status in dicho.outcomes:
            if c <= dicho.c_exist:
                assert status == STATUS_COMPLETED
            else:
                assert c >= dicho.c_blow
                assert status in BLOWUP_STATUSES

    def test_log_width_halves_per_step(self, dicho):
        shrink = math.log(dicho.c_blow / dicho.c_exist) / math.log(80.0 / 0.05)
        assert shrink == pytest.approx(2.0 ** -5, rel=1e-9)

    def test_progress_inequality(self, dicho):
        assert dicho.c_blow / dicho.c_exist <= 2.0 ** -5 * (80.0 / 0.05)

    def test_reports_match_outcomes(self, dicho):
        for c, status in dicho.outcomes:
            assert dicho.reports[c].status == status

    def test_metadata(self, dicho):
        assert dicho.meta["h"] == G16.h
        assert dicho.meta["horizon"] == 2.0
        assert dicho.meta["geometry"] == G16
        assert dicho.meta["widened"] == ()
        assert dicho.family == "mu_c"

    def test_deterministic_rerun(self, dicho):
        again = run_dichotomy(P5, 0.05, 80.0, 5, DCFG)
        assert again.outcomes == dicho.outcomes
        assert (again.c_exist, again.c_blow) == (dicho.c_exist, dicho.c_blow)
        c = dicho.c_exist
        assert np.array_equal(again.reports[c].series["linf"],
                              dicho.reports[c].series["linf"])

    def test_wrong_seed_widens_and_reports(self):
        res = run_dichotomy(P5, 20.0, 80.0, 2, DCFG)
        sides = [side for side, _, _ in res.meta["widened"]]
        assert sides == ["lo", "lo"]
        assert res.c_exist >= 0.2
        assert res.c_exist < res.c_blow

    def test_widening_gives_up(self):
        cfg = DichotomyConfig(geometry=G16, horizon=2.0, u_max=1e12)
        with pytest.raises(SolverError) as err:
            run_dichotomy(P5, 1e7, 1e8, 2, cfg)
        outcomes = err.value.outcomes
        assert len(outcomes) == 4                   # seed plus three widenings
        assert all(s in BLOWUP_STATUSES for _, s in outcomes)

    def test_bad_arguments(self):
        with pytest.raises(SolverError):
            run_dichotomy(P5, 0.0, 80.0, 5, DCFG)
        with pytest.raises(SolverError):
            run_dichotomy(P5, 0.05, 80.0, 0, DCFG)
        with pytest.raises(SolverError):
            run_dichotomy(P3, 0.05, 80.0, 5, DCFG)   # below p = m + 2/N

    def test_midpoint(self, dicho):
        mid = dichotomy_midpoint(dicho)
        assert mid == pytest.approx(math.sqrt(dicho.c_exist * dicho.c_blow))


class TestDichotomyResult:
    def test_non_monotone_rejected_with_outcomes(self):
        bad = ((0.1, "completed"), (0.2, "blow_up"), (0.4, "completed"),
               (0.8, "blow_up"))
        with pytest.raises(SolverError) as err:
            DichotomyResult(params=P5, family="mu_c", c_exist=0.4,
                            c_blow=0.8, outcomes=bad)
        assert len(err.value.outcomes) == 4

    def test_inconsistent_ends_rejected(self):
        out = ((0.1, "completed"), (0.8, "blow_up"))
        with pytest.raises(SolverError):
            DichotomyResult(params=P5, family="mu_c", c_exist=0.2,
                            c_blow=0.8, outcomes=out)

    def test_one_sided_rejected(self):
        out = ((0.1, "completed"), (0.2, "completed"))
        with pytest.raises(SolverError):
            DichotomyResult(params=P5, family="mu_c", c_exist=0.2,
                            c_blow=0.2, outcomes=out)


class TestDichotomySensitivity:
    def test_regularization_shifts_small(self):
        sens = dichotomy_sensitivity(P5, 0.05, 80.0, 3, DCFG)
        assert sens["cap_shift"] == 0.0      # cap above the grid max is inert
        assert sens["lift_shift"] < 0.05
        assert sens["base"].c_exist < sens["base"].c_blow


class TestScalingCheck:
    def test_identity_scale_is_exact(self, scale_cfg):
        assert run_scaling_check(scale_cfg, 1.0) == 0.0

    def test_lockstep_covariance(self, scale_cfg):
        assert run_scaling_check(scale_cfg, 2.0) <= 1e-10

    def test_lockstep_covariance_lambda_4(self, scale_cfg):
        assert run_scaling_check(scale_cfg, 4.0) <= 1e-10

    def test_independent_schedule_close(self, scale_cfg):
        dev = run_scaling_check(scale_cfg, 2.0, lockstep=False)
        assert dev <= 2e-2

    def test_misaligned_grid_rejected(self, scale_cfg):
        h = scale_cfg.initial.geometry.h
        lam = next(l for l in np.linspace(1.01, 8.0, 2000)
                   if (h / l) * l != h)
        with pytest.raises(GridError):
            run_scaling_check(scale_cfg, float(lam))

    def test_bad_factor_rejected(self, scale_cfg):
        with pytest.raises(SolverError):
            run_scaling_check(scale_cfg, 0.5)

    def test_forced_base_rejected(self, scale_cfg):
        from dataclasses import replace
        cfg = replace(scale_cfg, forced_dt=np.full(4, 1e-4))
        with pytest.raises(SolverError):
            run_scaling_check(cfg, 2.0)

    def test_blowup_base_rejected(self):
        g = BoxGeometry.from_extent(-2.0, 2.0, 1.0 / 32)
        cfg = SolverConfig(params=P5, initial=gaussian_field(g, 30.0, 0.5),
                           horizon=0.125)
        with pytest.raises(SolverError):
            run_scaling_check(cfg, 2.0)


class TestFujitaProbe:
    def test_blowup_in_forced_range(self):
        g = BoxGeometry.from_extent(-20.0, 20.0, 1.0 / 8)
        rep = run_fujita_probe(P3, g, 1.0, 1.0, 100.0)
        assert rep.status in BLOWUP_STATUSES
        assert rep.blow_time < 100.0
        assert fujita_verdict(rep) == "blow_up"

    def test_zero_amplitude_trivial(self):
        g = BoxGeometry.from_extent(-20.0, 20.0, 1.0 / 8)
        rep = run_fujita_probe(P3, g, 0.0, 1.0, 1.0)
        assert rep.completed
        assert fujita_verdict(rep) == "trivial"

    def test_borderline_exponent_allowed(self):
        g = BoxGeometry.from_extent(-2.0, 2.0, 1.0 / 16)
        rep = run_fujita_probe(P4, g, 0.0, 1.0, 0.5)
        assert rep.completed

    def test_supercritical_rejected(self):
        g = BoxGeometry.from_extent(-2.0, 2.0, 1.0 / 16)
        with pytest.raises(SolverError):
            run_fujita_probe(P5, g, 1.0, 1.0, 1.0)

    def test_negative_amplitude_rejected(self):
        g = BoxGeometry.from_extent(-2.0, 2.0, 1.0 / 16)
        with pytest.raises(SolverError):
            run_fujita_probe(P3, g, -1.0, 1.0, 1.0)

    def test_completed_is_inconclusive(self, small_run):
        assert fujita_verdict(small_run) == "inconclusive"


class TestDecayCheck:
    def test_barenblatt_tail_matches_closed_form(self, barenblatt_run):
        dec = run_decay_check(barenblatt_run, P5)
        # data is the t=1 self-similar profile, so sup_x u = peak/(1+t)^(1/3)
        # and the weighted norm peaks at the tail start t = 4
        expected = PEAK_1D_M2 * 4.0 ** 0.25 / 5.0 ** (1.0 / 3.0)
        assert dec.tail_sup == pytest.approx(expected, rel=0.01)
        assert dec.trend == "decreasing"

    def test_small_data_stays_bounded(self, small_run):
        dec = run_decay_check(small_run)
        assert dec.trend in ("flat", "decreasing")
        assert 0.0 < dec.tail_sup < 0.01

    def test_zero_solution(self):
        g = BoxGeometry.from_extent(-2.0, 2.0, 1.0 / 16)
        rep = solve(SolverConfig(params=P5, initial=constant_field(g, 0.0),
                                 horizon=1.0))
        dec = run_decay_check(rep)
        assert dec.tail_sup == 0.0
        assert dec.trend == "flat"

    def test_blowup_run_rejected(self):
        g = BoxGeometry.from_extent(-2.0, 2.0, 1.0 / 32)
        rep = solve(SolverConfig(params=P5,
                                 initial=gaussian_field(g, 30.0, 0.5),
                                 horizon=0.125))
        assert rep.status in BLOWUP_STATUSES
        with pytest.raises(SolverError):
            run_decay_check(rep)

    def test_wrong_regime_rejected(self, crit16):
        with pytest.raises(SolverError):
            run_decay_check(crit16)

    def test_missing_params_rejected(self):
        rep = SolveReport(status="completed", t_final=1.0,
                          series={"t": np.array([0.0, 1.0]),
                                  "linf": np.array([1.0, 1.0])})
        with pytest.raises(SolverError):
            run_decay_check(rep)


class TestEnergyMonitor:
    def test_zero_solution(self):
        g = BoxGeometry.from_extent(-2.0, 2.0, 1.0 / 16)
        rep = solve(SolverConfig(params=P4, initial=constant_field(g, 0.0),
                                 horizon=0.5, snapshots=(0.25,)))
        mon = run_energy_monitor(rep, 0.5, alpha=1.0)
        assert mon.chat == 0.0
        for series in mon.terms.values():
            assert np.all(series == 0.0)

    def test_constant_run_is_gradient_free(self):
        g = BoxGeometry.from_extent(-1.0, 1.0, 1.0 / 16, boundary="periodic")
        rep = solve(SolverConfig(params=P4, initial=constant_field(g, 0.5),
                                 horizon=0.2, snapshots=(0.05, 0.1, 0.2)))
        mon = run_energy_monitor(rep, 0.25, alpha=1.0)
        assert np.all(mon.terms["grad_energy"] == 0.0)
        assert np.all(mon.terms["interaction"] == 0.0)
        assert mon.chat == 1.0        # pinned by the t -> 0 identity ratio
        assert np.all(np.diff(mon.terms["peak_mass"]) >= 0.0)

    def test_critical_terms(self, crit16):
        mon = run_energy_monitor(crit16, 0.5, alpha=1.0)
        assert mon.regime == "critical"
        assert set(mon.terms) == {"peak_mass", "grad_energy", "data_mass",
                                  "diffusion_load", "bulk_mass",
                                  "interaction", "eta_norm"}
        assert math.isfinite(mon.chat) and mon.chat >= 1.0
        assert mon.terms["grad_energy"][-1] > 0.0

    def test_chat_stable_under_refinement(self, crit16):
        chat16 = run_energy_monitor(crit16, 0.5, alpha=1.0).chat
        chat32 = run_energy_monitor(critical_run(32), 0.5, alpha=1.0).chat
        assert abs(chat32 - chat16) / chat16 <= 0.20

    def test_supercritical_terms(self):
        g = BoxGeometry.from_extent(-2.0, 2.0, 1.0 / 16)
        rep = solve(SolverConfig(params=P5,
                                 initial=gaussian_field(g, 0.5, 0.5),
                                 horizon=0.25, snapshots=(0.05, 0.1, 0.25)))
        mon = run_energy_monitor(rep, 0.5, beta=2.0)
        assert mon.regime == "supercritical"
        assert "morrey_norm" in mon.terms and "bulk_mass" not in mon.terms
        assert math.isfinite(mon.chat) and mon.chat >= 1.0
        assert np.all(np.diff(mon.terms["grad_energy"]) >= 0.0)

    def test_radial_geometry(self):
        g = RadialGeometry.from_extent(2.0, 1.0 / 16, 1)
        rep = solve(SolverConfig(params=P5,
                                 initial=gaussian_field(g, 0.5, 0.5),
                                 horizon=0.25, snapshots=(0.1, 0.25)))
        mon = run_energy_monitor(rep, 0.5, beta=2.0)
        assert math.isfinite(mon.chat) and mon.chat > 0.0

    def test_regime_weight_mismatches(self, crit16):
        with pytest.raises(SolverError):
            run_energy_monitor(crit16, 0.5, beta=2.0)
        with pytest.raises(SolverError):
            run_energy_monitor(crit16, 0.5, alpha=1.0, beta=2.0)
        with pytest.raises(SolverError):
            run_energy_monitor(crit16, 0.5)
        g = BoxGeometry.from_extent(-2.0, 2.0, 1.0 / 16)
        sup = solve(SolverConfig(params=P5,
                                 initial=gaussian_field(g, 0.5, 0.5),
                                 horizon=0.1, snapshots=(0.05,)))
        with pytest.raises(SolverError):
            run_energy_monitor(sup, 0.5, alpha=1.0)
        with pytest.raises(SolverError):
            run_energy_monitor(sup, 0.5, beta=1.0)
        sub = solve(SolverConfig(params=P3,
                                 initial=constant_field(g, 0.01),
                                 horizon=0.1, snapshots=(0.05,)))
        with pytest.raises(SolverError):
            run_energy_monitor(sub, 0.5, beta=2.0)

    def test_bad_sigma_rejected(self, crit16):
        with pytest.raises(SolverError):
            run_energy_monitor(crit16, 0.0, alpha=1.0)

    def test_needs_two_snapshots(self):
        g = BoxGeometry.from_extent(-2.0, 2.0, 1.0 / 16)
        rep = SolveReport(status="completed", t_final=0.0,
                          snapshots=[(0.0, constant_field(g, 1.0))],
                          params=P4)
        with pytest.raises(SolverError):
            run_energy_monitor(rep, 0.5, alpha=1.0)

    def test_monitor_invariants_enforced(self):
        times = np.array([0.0, 1.0])
        good = {"peak_mass": np.array([1.0, 2.0])}
        EnergyMonitor(regime="critical", weight=1.0, sigma=1.0, times=times,
                      terms=dict(good), chat=1.0)
        with pytest.raises(SolverError):
            EnergyMonitor(regime="critical", weight=1.0, sigma=1.0,
                          times=times,
                          terms={"peak_mass": np.array([1.0, -2.0])},
                          chat=1.0)
        with pytest.raises(SolverError):
            EnergyMonitor(regime="critical", weight=1.0, sigma=1.0,
                          times=times,
                          terms={"grad_energy": np.array([2.0, 1.0])},
                          chat=1.0)
        with pytest.raises(SolverError):
            EnergyMonitor(regime="critical", weight=1.0, sigma=1.0,
                          times=times, terms={"peak_mass": np.array([1.0])},
                          chat=1.0)
