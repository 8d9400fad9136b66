"""Turnpike closeness diagnostics.

Quantifies how long optimal trajectories stay away from the turnpike: the
deviation series e(t) = ||z*(t) - zbar(t)||, the occupation measure
mu{t : e(t) > eps} over an eps grid, entry/exit times of the tracking
interval, an EXACT/NOT-EXACT verdict per run, and the horizon-independence
of the measure across runs.

Deviations are evaluated at interval midpoints: a piecewise-constant optimal
input approximates the singular-arc control in the interval average, so the
midpoint comparison is second-order accurate while node-point comparison
would be polluted by a first-order sampling artifact.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError
from .ocp import OcpScenario, TrajectoryPair, solve
from .pencil import TurnpikeTrajectory

__all__ = ["DeviationSeries", "TubeMeasure", "RunVerdict", "TurnpikeReport",
           "deviation", "theta_measure", "largest_tracking_interval",
           "exactness_check", "refinement_error_estimate", "build_report"]


@dataclass(frozen=True)
class DeviationSeries:
    times: np.ndarray
    values: np.ndarray
    cell: float                   # grid resolution behind each sample
    node_grid: bool = False       # True when sampled at nodes t_0..t_N

    def scale(self) -> float:
        return float(self.values.max(initial=0.0))


@dataclass(frozen=True)
class TubeMeasure:
    epsilon: float
    measure: float
    resolution: float             # +- one grid cell


@dataclass(frozen=True)
class RunVerdict:
    exact: bool
    entry_time: float
    exit_time: float
    interval_fraction: float      # tracked length / horizon
    epsilon_used: float
    sup_on_interval: float


@dataclass(frozen=True)
class TurnpikeReport:
    verdicts: list
    measures: dict                # run key -> list of TubeMeasure
    nu_hat: dict                  # epsilon -> max measure over runs
    horizon_independent: bool
    epsilon_grid: np.ndarray
    epsilon_num: float
    deviations: dict = field(repr=False, default=None)


def deviation(pair: TrajectoryPair, turnpike: TurnpikeTrajectory,
              weights=None) -> DeviationSeries:
    """Euclidean norm of the stacked (x, u) deviation from the turnpike at
    interval midpoints. ``weights`` optionally scales components (diagonal,
    length n + m) to reconcile heterogeneous units."""
    tm = pair.midpoint_times()
    xm = pair.midpoint_states()
    um = pair.U
    xb = turnpike.x.eval(tm)
    ub = turnpike.u.eval(tm)
    dz = np.hstack([xm - xb, um - ub])
    if weights is not None:
        dz = dz * np.asarray(weights, dtype=float)[None, :]
    e = np.linalg.norm(dz, axis=1)
    return DeviationSeries(times=tm, values=e, cell=pair.h)


def theta_measure(series: DeviationSeries, epsilon: float) -> TubeMeasure:
    """Occupation measure of {t : e(t) > eps} by the midpoint rule on the
    indicator: every sample counts one grid cell (half a cell for the two
    endpoint samples of a node-sampled series), so the result carries a
    +-cell resolution."""
    if epsilon < 0:
        raise ValidationError("epsilon must be >= 0")
    e = series.values
    h = series.cell
    w = np.full(e.shape, h)
    if series.node_grid and e.size >= 2:
        w[0] = w[-1] = 0.5 * h
    mu = float(np.sum(w * (e > epsilon)))
    return TubeMeasure(epsilon=float(epsilon), measure=mu, resolution=h)


def largest_tracking_interval(series: DeviationSeries, epsilon: float):
    """Longest contiguous index range with e <= eps; returns (i0, i1) or None."""
    inside = series.values <= epsilon
    best = None
    start = None
    for j, flag in enumerate(np.append(inside, False)):
        if flag and start is None:
            start = j
        elif not flag and start is not None:
            if best is None or (j - start) > (best[1] - best[0] + 1):
                best = (start, j - 1)
            start = None
    return best


def refinement_error_estimate(scenario: OcpScenario,
                              middle_fraction: float = 0.9) -> float:
    """Grid-refinement error of one solve: the scenario is solved at N and
    2N and the solutions are compared over the middle of the horizon (the
    2N node grid contains the N midpoints, and paired 2N inputs average to
    the matching N input). The sup of the stacked state/input difference
    estimates the discretization error of the piecewise-constant scheme.

    The outer (1 - middle_fraction)/2 of the horizon on each side is
    excluded: there the two grids place their bang switch cells at
    different times by construction, which measures switch alignment
    rather than on-arc accuracy."""
    N = scenario.grid_size
    pair1 = solve(scenario.with_(N=N))
    pair2 = solve(scenario.with_(N=2 * N))
    tm = pair1.midpoint_times()
    x1 = pair1.midpoint_states()
    x2 = pair2.X[1::2]            # 2N nodes at odd indices = N midpoints
    u1 = pair1.U
    u2 = 0.5 * (pair2.U[0::2] + pair2.U[1::2])
    lo = int((0.5 - middle_fraction / 2) * N)
    hi = int((0.5 + middle_fraction / 2) * N)
    dz = np.hstack([x1 - x2, u1 - u2])[lo:hi]
    return float(np.linalg.norm(dz, axis=1).max())


def exactness_check(runs: dict, turnpike: TurnpikeTrajectory,
                    epsilon_num: float,
                    min_fraction: float = 0.25,
                    epsilon_grid=None,
                    measure_slack: float = 0.0) -> TurnpikeReport:
    """Verdicts and horizon-independence for a batch of runs.

    ``runs`` maps a key (any hashable; keys carrying (x0 tag, T) pairs make
    the report readable) to a TrajectoryPair. Requires at least two distinct
    horizons and two distinct initial states across the batch. A run is
    EXACT when its deviation stays <= epsilon_num on a contiguous interval
    of at least ``min_fraction`` of its horizon. The horizon-independence
    flag demands mu(Theta_T2(eps)) - mu(Theta_T1(eps)) <= 2 cells + slack
    for every tested eps and every pair of runs with T2 > T1 sharing the
    initial state."""
    if len(runs) < 2:
        raise ValidationError("need at least two runs")
    horizons = {}
    x0s = {}
    for key, pair in runs.items():
        horizons[key] = pair.scenario.T
        x0s[key] = tuple(np.round(np.asarray(pair.scenario.x0), 12))
    if len(set(horizons.values())) < 2:
        raise ValidationError("need runs with at least two different horizons")
    if len(set(x0s.values())) < 2:
        raise ValidationError("need runs with at least two different initial states")
    if epsilon_grid is None:
        epsilon_grid = epsilon_num * np.array([1.0, 2.0, 5.0, 10.0, 50.0])
    epsilon_grid = np.asarray(epsilon_grid, dtype=float)

    verdicts = []
    measures = {}
    devs = {}
    for key, pair in runs.items():
        series = deviation(pair, turnpike)
        devs[key] = series
        T = pair.scenario.T
        iv = largest_tracking_interval(series, epsilon_num)
        if iv is None:
            verdicts.append((key, RunVerdict(False, np.nan, np.nan, 0.0,
                                             epsilon_num, np.inf)))
        else:
            i0, i1 = iv
            length = series.times[i1] - series.times[i0] + series.cell
            verdicts.append((key, RunVerdict(
                exact=length >= min_fraction * T,
                entry_time=float(series.times[i0] - 0.5 * series.cell),
                exit_time=float(series.times[i1] + 0.5 * series.cell),
                interval_fraction=float(length / T),
                epsilon_used=float(epsilon_num),
                sup_on_interval=float(series.values[i0:i1 + 1].max()))))
        measures[key] = [theta_measure(series, eps) for eps in epsilon_grid]
    nu_hat = {float(eps): max(measures[key][i].measure for key in runs)
              for i, eps in enumerate(epsilon_grid)}
    flag = True
    keys = list(runs)
    for a in keys:
        for b in keys:
            if horizons[b] <= horizons[a] or x0s[a] != x0s[b]:
                continue
            cell = max(devs[a].cell, devs[b].cell)
            for i in range(epsilon_grid.size):
                gap = measures[b][i].measure - measures[a][i].measure
                if gap > 2 * cell + measure_slack:
                    flag = False
    return TurnpikeReport(verdicts=verdicts, measures=measures, nu_hat=nu_hat,
                          horizon_independent=flag,
                          epsilon_grid=epsilon_grid,
                          epsilon_num=float(epsilon_num), deviations=devs)


def build_report(runs: dict, turnpike: TurnpikeTrajectory,
                 epsilon_num: float, epsilon_grid=None) -> TurnpikeReport:
    """exactness_check under its reporting-oriented name."""
    return exactness_check(runs, turnpike, epsilon_num,
                           epsilon_grid=epsilon_grid)


def pairwise_coincidence(runs: dict, report: TurnpikeReport) -> dict:
    """Max stacked (x, u) gap between each pair of runs on the overlap of
    their tracked intervals, evaluated at shared midpoint times.

    Exact turnpikes make distinct runs coincide there, so the gaps should
    sit at the same numerical-zero level as the per-run deviations. Returns
    {(key_a, key_b): gap}; pairs without shared midpoint times (incompatible
    grids) or without overlap are skipped."""
    verdicts = dict(report.verdicts)
    keys = sorted(runs, key=str)
    gaps = {}
    for i, a in enumerate(keys):
        for b in keys[i + 1:]:
            va, vb = verdicts[a], verdicts[b]
            if not (np.isfinite(va.entry_time) and np.isfinite(vb.entry_time)):
                continue
            lo = max(va.entry_time, vb.entry_time)
            hi = min(va.exit_time, vb.exit_time)
            if hi <= lo:
                continue
            pa, pb = runs[a], runs[b]
            ta = pa.midpoint_times()
            tb = pb.midpoint_times()
            tol = 1e-6 * min(pa.h, pb.h)
            ib = {round(t / tol): j for j, t in enumerate(tb)}
            match = [(ja, ib[round(t / tol)]) for ja, t in enumerate(ta)
                     if lo <= t <= hi and round(t / tol) in ib]
            if not match:
                continue
            ja, jb = (np.array(v) for v in zip(*match))
            za = np.hstack([pa.midpoint_states()[ja], pa.U[ja]])
            zb = np.hstack([pb.midpoint_states()[jb], pb.U[jb]])
            gaps[(a, b)] = float(np.linalg.norm(za - zb, axis=1).max())
    return gaps
