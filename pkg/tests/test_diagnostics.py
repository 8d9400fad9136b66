import numpy as np
import pytest

from dhnopt.diagnostics import (DeviationSeries, deviation, exactness_check,
                                largest_tracking_interval,
                                refinement_error_estimate, theta_measure)
from dhnopt.errors import ValidationError
from dhnopt.ocp import solve
from dhnopt.pencil import (TurnpikeTrajectory, bounded_particular_solution,
                           weierstrass_decompose)
from dhnopt.signals import Signal, const

from conftest import two_cycle_scenario
from test_ocp import scenario_from


def stationary_pair_and_turnpike(x_eq=1.0, u_eq=1.0, T=6.0, N=12):
    """A pair that rides a constant trajectory exactly: A=-1, B=1, u=x=1."""
    scn = scenario_from(A=-1.0, B=1.0, Q=1.0, S=0.0, T=T, N=N, x0=[x_eq],
                        box=(u_eq, u_eq))
    pair = solve(scn)
    tp = TurnpikeTrajectory(x=const([x_eq]), lam=Signal.zero(1),
                            u=const([u_eq]),
                            xi=const([x_eq, 0.0, u_eq]))
    return scn, pair, tp


class TestDeviation:
    def test_zero_on_matching_trajectory(self):
        _, pair, tp = stationary_pair_and_turnpike()
        series = deviation(pair, tp)
        np.testing.assert_allclose(series.values, 0, atol=1e-12)

    def test_constant_offset(self):
        _, pair, tp = stationary_pair_and_turnpike()
        shifted = TurnpikeTrajectory(x=const([1.25]), lam=Signal.zero(1),
                                     u=const([1.0]),
                                     xi=const([1.25, 0.0, 1.0]))
        series = deviation(pair, shifted)
        np.testing.assert_allclose(series.values, 0.25, atol=1e-12)

    def test_weighted_norm(self):
        _, pair, tp = stationary_pair_and_turnpike()
        shifted = TurnpikeTrajectory(x=const([2.0]), lam=Signal.zero(1),
                                     u=const([1.0]),
                                     xi=const([2.0, 0.0, 1.0]))
        series = deviation(pair, shifted, weights=[0.5, 1.0])
        np.testing.assert_allclose(series.values, 0.5, atol=1e-12)


class TestThetaMeasure:
    def test_zero_deviation(self):
        s = DeviationSeries(times=np.linspace(0.5, 9.5, 10),
                            values=np.zeros(10), cell=1.0)
        assert theta_measure(s, 0.1).measure == 0.0

    def test_everywhere_outside(self):
        s = DeviationSeries(times=np.linspace(0.5, 9.5, 10),
                            values=np.ones(10), cell=1.0)
        assert theta_measure(s, 0.5).measure == pytest.approx(10.0)

    def test_ramp_indicator(self):
        # e(t) = max(0, 1 - t) on [0, 10]: e > 0.5 exactly on [0, 0.5)
        h = 0.01
        t = np.arange(0, 10, h) + h / 2
        s = DeviationSeries(times=t, values=np.maximum(0, 1 - t), cell=h)
        mu = theta_measure(s, 0.5)
        assert mu.measure == pytest.approx(0.5, abs=2 * h)

    def test_monotone_in_epsilon(self):
        rng = np.random.default_rng(0)
        vals = rng.uniform(0, 2, 100)
        s = DeviationSeries(times=np.arange(100) + 0.5, values=vals, cell=1.0)
        mus = [theta_measure(s, eps).measure for eps in np.linspace(0, 2, 9)]
        assert all(a >= b for a, b in zip(mus, mus[1:]))

    def test_node_grid_half_weights(self):
        s = DeviationSeries(times=np.linspace(0, 10, 11),
                            values=np.ones(11), cell=1.0, node_grid=True)
        assert theta_measure(s, 0.5).measure == pytest.approx(10.0)

    def test_negative_epsilon_rejected(self):
        s = DeviationSeries(times=np.zeros(1), values=np.zeros(1), cell=1.0)
        with pytest.raises(ValidationError):
            theta_measure(s, -1.0)


class TestTrackingInterval:
    def test_full_interval(self):
        s = DeviationSeries(times=np.arange(10) + 0.5, values=np.zeros(10),
                            cell=1.0)
        assert largest_tracking_interval(s, 0.1) == (0, 9)

    def test_middle_window(self):
        vals = np.array([1, 1, 0, 0, 0, 0, 1, 0, 1, 1.0])
        s = DeviationSeries(times=np.arange(10) + 0.5, values=vals, cell=1.0)
        assert largest_tracking_interval(s, 0.5) == (2, 5)

    def test_none_when_always_outside(self):
        s = DeviationSeries(times=np.arange(4) + 0.5, values=np.ones(4),
                            cell=1.0)
        assert largest_tracking_interval(s, 0.5) is None


class TestExactness:
    def _runs(self, offset=0.0):
        runs = {}
        for (T, x_eq) in ((6.0, 1.0), (9.0, 1.0), (6.0, 1.0 + 1e-9)):
            scn = scenario_from(A=-1.0, B=1.0, Q=1.0, S=0.0, T=T,
                                N=int(2 * T), x0=[x_eq], box=(1.0, 1.0))
            runs[(T, x_eq)] = solve(scn)
        tp = TurnpikeTrajectory(x=const([1.0 + offset]), lam=Signal.zero(1),
                                u=const([1.0]),
                                xi=const([1.0 + offset, 0.0, 1.0]))
        return runs, tp

    def test_matching_runs_are_exact(self):
        runs, tp = self._runs()
        report = exactness_check(runs, tp, epsilon_num=1e-6)
        assert all(v.exact for _, v in report.verdicts)
        assert report.horizon_independent
        assert max(report.nu_hat.values()) <= 1e-9

    def test_offset_runs_not_exact(self):
        runs, tp = self._runs(offset=0.5)
        report = exactness_check(runs, tp, epsilon_num=1e-3)
        assert not any(v.exact for _, v in report.verdicts)
        # measure equals the horizon and grows with it: flag must drop
        assert not report.horizon_independent
        for (T, _), ms in report.measures.items():
            assert ms[0].measure == pytest.approx(T, abs=ms[0].resolution)

    def test_requires_run_diversity(self):
        runs, tp = self._runs()
        only_one_T = {k: v for k, v in runs.items() if k[0] == 6.0}
        with pytest.raises(ValidationError, match="horizons"):
            exactness_check(only_one_T, tp, 1e-6)
        only_one_x0 = {k: v for k, v in runs.items() if k[1] == 1.0}
        with pytest.raises(ValidationError, match="initial"):
            exactness_check(only_one_x0, tp, 1e-6)

    def test_cycle_scenario_middle_tracking(self):
        # full pipeline on the small network: both horizons enter the arc
        runs = {}
        for T in (60.0, 80.0):
            for x0 in ((0.0, 0.0), (2.0, 2.5)):
                scn = two_cycle_scenario(T=T, N=int(T * 5), x0=x0)
                runs[(T, x0)] = solve(scn)
        pen = two_cycle_scenario().pencil()
        tp = bounded_particular_solution(weierstrass_decompose(pen), pen)
        eps = refinement_error_estimate(two_cycle_scenario(T=60.0, N=300))
        report = exactness_check(runs, tp, epsilon_num=10 * eps)
        assert all(v.exact for _, v in report.verdicts), report.verdicts
        assert report.horizon_independent


class TestRefinementEstimate:
    def test_positive_and_small(self, cycle_scenario):
        est = refinement_error_estimate(cycle_scenario)
        assert 0 < est < 1.0

    def test_shrinks_with_n(self):
        e1 = refinement_error_estimate(two_cycle_scenario(T=40.0, N=50))
        e2 = refinement_error_estimate(two_cycle_scenario(T=40.0, N=200))
        assert e2 < e1
