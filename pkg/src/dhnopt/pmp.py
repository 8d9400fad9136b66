"""Costates, switching functions, and bang/singular arc classification.

The costate obeys lam' = -(Q x* + S' u* + r(t)) - A' lam with lam(T) = 0
(no terminal constraint). The switching function of input i is
s_i = (S x* + B' lam + p)_i; its sign pins the input to a bound, and the
set where all s_i vanish is the singular arc.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import ValidationError
from .ocp import OcpScenario, TrajectoryPair

__all__ = ["AdjointTrajectory", "Arc", "ArcPartition", "costate",
           "switching_functions", "cell_switching_averages",
           "classify_arcs", "default_band"]

LOWER, UPPER, SINGULAR = "lower-bound", "upper-bound", "singular"


@dataclass(frozen=True)
class AdjointTrajectory:
    times: np.ndarray
    lam: np.ndarray              # (N+1, n)
    terminal_residual: float
    lam_cell: np.ndarray = None  # (N, n) per-cell averages (RK4 quadrature)


@dataclass(frozen=True)
class Arc:
    start: float
    end: float
    label: str
    first_index: int
    last_index: int

    @property
    def length(self) -> float:
        return self.end - self.start


@dataclass(frozen=True)
class ArcPartition:
    """Per-input ordered arcs covering [0, T]."""

    arcs: tuple                  # tuple of tuples of Arc, one per input
    band: float                  # classification tolerance on |s_i|

    def singular_mask(self, input_index: int, n_points: int) -> np.ndarray:
        mask = np.zeros(n_points, dtype=bool)
        for arc in self.arcs[input_index]:
            if arc.label == SINGULAR:
                mask[arc.first_index:arc.last_index + 1] = True
        return mask

    def all_singular_mask(self, n_points: int) -> np.ndarray:
        """Grid points where every input is simultaneously singular."""
        mask = np.ones(n_points, dtype=bool)
        for i in range(len(self.arcs)):
            mask &= self.singular_mask(i, n_points)
        return mask


def costate(pair: TrajectoryPair, scenario: OcpScenario | None = None,
            substeps: int | None = None,
            interpolation: str = "exact") -> AdjointTrajectory:
    """Backward RK4 integration of the adjoint from lam(T) = 0 on the
    trajectory grid.

    The optimal state between nodes is taken from the exact intra-interval
    zero-order-hold formula by default (``interpolation="exact"``): the
    integrand is then smooth within every interval, so the switching
    functions inherit the cell-average-zero structure of the discrete
    optimality conditions instead of spline artifacts around input kinks.
    ``interpolation="cubic"`` falls back to a global cubic spline of the
    node states.

    ``substeps`` RK4 steps are taken per grid interval; the default keeps
    ||A|| * substep below 0.05 so that halving the step changes the result
    only around round-off (a cheap convergence check).
    """
    scn = scenario or pair.scenario
    A = scn.model.A
    Q = np.asarray(scn.Q, dtype=float)
    S = np.asarray(scn.S, dtype=float)
    times = pair.times
    N = pair.N
    if substeps is None:
        stiffness = np.linalg.norm(A, 2) * pair.h
        substeps = int(min(max(4, np.ceil(stiffness / 0.05)), 512))
    if interpolation == "exact":
        kernel = pair.kernel
        zts = kernel.zeta(times[:N])
        # RK4 samples sit on the half-substep lattice: precompute the exact
        # state maps once per lattice fraction
        maps = [kernel.fraction(i / (2 * substeps))
                for i in range(2 * substeps + 1)]

        def state(j, half_idx):
            Af, Bf, Wf = maps[half_idx]
            return Af @ pair.X[j] + Bf @ pair.U[j] + Wf @ zts[j]
    elif interpolation == "cubic":
        spline = CubicSpline(times, pair.X, axis=0)

        def state(j, half_idx):
            return spline(times[j] + half_idx * pair.h / (2 * substeps))
    else:
        raise ValidationError(f"unknown interpolation {interpolation!r}")

    n = scn.model.n
    lam = np.zeros((N + 1, n))
    lam_cell = np.zeros((N, n))
    step = -(pair.h / substeps)
    for j in range(N - 1, -1, -1):
        uj = pair.U[j]
        su = S.T @ uj
        # integrate (lam, integral of lam) jointly so the cell average of
        # lam comes out at RK4 accuracy as well
        lj = np.concatenate([lam[j + 1], np.zeros(n)])
        for k in range(substeps):
            base = 2 * (substeps - k)        # backward: start of this substep

            def rhs(half_off, vec):
                idx = base + half_off
                tt = times[j] + idx * pair.h / (2 * substeps)
                dlam = -(Q @ state(j, idx) + su + scn.r.eval(tt)) \
                    - A.T @ vec[:n]
                return np.concatenate([dlam, vec[:n]])

            k1 = rhs(0, lj)
            k2 = rhs(-1, lj + step / 2 * k1)
            k3 = rhs(-1, lj + step / 2 * k2)
            k4 = rhs(-2, lj + step * k3)
            lj = lj + step / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        lam[j] = lj[:n]
        lam_cell[j] = -lj[n:] / pair.h   # backward integral flips the sign
    return AdjointTrajectory(times=times, lam=lam,
                             terminal_residual=float(np.linalg.norm(lam[N])),
                             lam_cell=lam_cell)


def switching_functions(pair: TrajectoryPair, adjoint: AdjointTrajectory,
                        scenario: OcpScenario | None = None) -> np.ndarray:
    """s(t_j) = S x*(t_j) + B' lam(t_j) + p(t_j), shape (N+1, m)."""
    scn = scenario or pair.scenario
    if adjoint.lam.shape[0] != pair.X.shape[0]:
        raise ValidationError("adjoint and trajectory grids differ")
    S = np.asarray(scn.S, dtype=float)
    B = scn.model.B
    return pair.X @ S.T + adjoint.lam @ B + scn.p.eval(pair.times)


def cell_switching_averages(pair: TrajectoryPair,
                            adjoint: AdjointTrajectory,
                            scenario: OcpScenario | None = None) -> np.ndarray:
    """Per-cell averages of the switching functions, shape (N, m).

    On cells where an input is free, the first-order conditions of the
    transcription force this average to (numerical) zero, and on clamped
    cells it is the bound multiplier divided by the cell length, so it is
    the natural quantity for bang/singular classification of a discrete
    solution: pointwise samples of s oscillate through zero during the
    landing onto the singular arc, cell averages do not."""
    scn = scenario or pair.scenario
    if adjoint.lam_cell is None:
        raise ValidationError("adjoint carries no cell averages; "
                              "recompute with costate()")
    S = np.asarray(scn.S, dtype=float)
    B = scn.model.B
    N, h = pair.N, pair.h
    wsimp = np.array([1.0, 4.0, 2.0, 4.0, 1.0]) / 12.0
    x_cell = sum(wsimp[q] * pair.substates(q) for q in range(5))
    p_cell = sum(wsimp[q] * scn.p.eval(pair.times[:N] + q * h / 4.0)
                 for q in range(5))
    return x_cell @ S.T + adjoint.lam_cell @ B + p_cell


def default_band(s: np.ndarray, pair: TrajectoryPair,
                 rel: float = 1e-4, floor: float = 1e-8) -> float:
    """Scale-free classification band: rel * median |s| over bang regions,
    where bang regions are grid points with the input at a bound. Accepts
    node-sampled values (N+1 rows) or cell values (N rows)."""
    active = pair.diagnostics.active_lower | pair.diagnostics.active_upper
    at_bound = np.zeros(s.shape, dtype=bool)
    if s.shape[0] == pair.N + 1:
        at_bound[:-1] = active
        at_bound[-1] = at_bound[-2]
    elif s.shape[0] == pair.N:
        at_bound[:] = active
    else:
        raise ValidationError("switching values do not match the grid")
    vals = np.abs(s[at_bound])
    if vals.size == 0:
        vals = np.abs(s).reshape(-1)
    med = float(np.median(vals)) if vals.size else 0.0
    return max(rel * med, floor)


def classify_arcs(s: np.ndarray, times: np.ndarray,
                  band: float) -> ArcPartition:
    """Label each grid point per input by the sign of s_i against the band
    (s_i > band: lower bound active; s_i < -band: upper bound; else
    singular), merge single-point islands into their neighbours, and
    assemble maximal arcs covering [0, T]."""
    if band <= 0:
        raise ValidationError("classification band must be > 0")
    s = np.atleast_2d(s.T).T  # ensure (n_points, m)
    n_points, m = s.shape
    arcs_all = []
    for i in range(m):
        labels = np.where(s[:, i] > band, 0,
                          np.where(s[:, i] < -band, 1, 2))
        # absorb isolated single-point islands (discretization chatter)
        for j in range(1, n_points - 1):
            if labels[j] != labels[j - 1] and labels[j] != labels[j + 1] \
                    and labels[j - 1] == labels[j + 1]:
                labels[j] = labels[j - 1]
        name = {0: LOWER, 1: UPPER, 2: SINGULAR}
        arcs = []
        start = 0
        for j in range(1, n_points + 1):
            if j == n_points or labels[j] != labels[start]:
                arcs.append(Arc(start=float(times[start]),
                                end=float(times[j - 1]),
                                label=name[labels[start]],
                                first_index=start, last_index=j - 1))
                start = j
        arcs_all.append(tuple(arcs))
    return ArcPartition(arcs=tuple(arcs_all), band=float(band))
