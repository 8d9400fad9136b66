"""Direct transcription of the economic control problem.

The control is piecewise constant on a uniform grid. Because the dynamics
are LTI and the forcing signals have exact finite-dimensional LTI
realizations, the state propagation over each interval is computed exactly
with one augmented matrix exponential (zero-order hold including the
disturbance convolution). The running cost is integrated per interval by
composite Simpson on the exact intra-interval state formula, states are
condensed out, and the resulting dense box QP is solved by projected Newton.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import ValidationError
from .network import StateSpaceModel
from .qp import solve_box_qp
from .signals import Signal
from . import pencil as _pencil

__all__ = ["OcpScenario", "DiscretizedOcp", "TrajectoryPair", "SolveDiagnostics",
           "discretize", "solve", "objective", "simulate_zoh",
           "default_grid_size"]

DEFAULT_STEP_S = 360.0
MULTISTART_COUNT = 8


def default_grid_size(T: float) -> int:
    return max(2, math.ceil(T / DEFAULT_STEP_S))


@dataclass(frozen=True)
class OcpScenario:
    """Model + cost data + input box + horizon + initial state."""

    model: StateSpaceModel
    Q: np.ndarray
    S: np.ndarray
    r: Signal
    p: Signal
    d: Signal
    u_min: np.ndarray
    u_max: np.ndarray
    T: float
    x0: np.ndarray
    N: int | None = None
    kkt_tol: float = 1e-9
    seed: int = 0

    def __post_init__(self):
        n, m, w = self.model.n, self.model.m, self.model.w
        Q = np.asarray(self.Q, dtype=float)
        if Q.shape != (n, n) or not np.allclose(Q, Q.T, atol=1e-12 * max(1, np.abs(Q).max())):
            raise ValidationError("Q must be symmetric n x n")
        if np.asarray(self.S).shape != (m, n):
            raise ValidationError("S must be m x n")
        if self.r.dim != n or self.p.dim != m or self.d.dim != w:
            raise ValidationError("signal dimensions do not match the model")
        u_min = np.asarray(self.u_min, dtype=float)
        u_max = np.asarray(self.u_max, dtype=float)
        if u_min.shape != (m,) or u_max.shape != (m,):
            raise ValidationError("bounds must have one entry per producer")
        if np.any(u_min > u_max):
            raise ValidationError("u_min must be <= u_max componentwise")
        if not self.T > 0:
            raise ValidationError("horizon T must be > 0")
        if np.asarray(self.x0).shape != (n,):
            raise ValidationError("x0 must have one entry per vertex")
        if self.N is not None and self.N < 2:
            raise ValidationError("grid size N must be >= 2")

    @property
    def grid_size(self) -> int:
        return self.N if self.N is not None else default_grid_size(self.T)

    def with_(self, **kw) -> "OcpScenario":
        data = {f: getattr(self, f) for f in self.__dataclass_fields__}
        data.update(kw)
        return OcpScenario(**data)

    def pencil(self) -> "_pencil.OptimalityPencil":
        return _pencil.build_pencil(self.model, self.Q, self.S,
                                    self.r, self.p, self.d)

    def stage_cost(self, t, x, u) -> np.ndarray:
        """ell(t, x, u) = 0.5 x'Qx + u'Sx + x'r(t) + u'p(t), vectorized over
        a leading time axis."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        x = np.atleast_2d(x)
        u = u if np.ndim(u) == 2 else np.atleast_2d(u)
        Q = np.asarray(self.Q, dtype=float)
        S = np.asarray(self.S, dtype=float)
        val = 0.5 * np.einsum("ti,ij,tj->t", x, Q, x)
        val += np.einsum("ti,ij,tj->t", u, S, x)
        val += np.sum(x * self.r.eval(t), axis=1)
        val += np.sum(u * self.p.eval(t), axis=1)
        return val


def _realization(sig: Signal):
    """Exact LTI realization (F, G, zeta) with sig(t) = G @ zeta(t) and
    zeta' = F zeta; zeta(t) is evaluated analytically."""
    blocks, cols, evals = [], [], []
    for term in sig.terms:
        if term.kind == "const":
            blocks.append(np.zeros((1, 1)))
            cols.append(term.coeff[:, None])
            evals.append(lambda t, _=None: np.ones_like(t)[..., None])
        elif term.kind == "sin":
            om, ph = term.omega, term.phase
            blocks.append(np.array([[0.0, om], [-om, 0.0]]))
            cols.append(np.column_stack([term.coeff, np.zeros(sig.dim)]))
            evals.append(lambda t, om=om, ph=ph: np.stack(
                [np.sin(om * t + ph), np.cos(om * t + ph)], axis=-1))
        elif term.kind == "exp":
            rate = term.rate
            blocks.append(np.array([[rate]]))
            cols.append(term.coeff[:, None])
            evals.append(lambda t, rate=rate: np.exp(rate * t)[..., None])
        elif term.kind == "poly":
            k = term.power
            F = np.zeros((k + 1, k + 1))
            for i in range(1, k + 1):
                F[i, i - 1] = 1.0
            blocks.append(F)
            C = np.zeros((sig.dim, k + 1))
            C[:, k] = term.coeff * math.factorial(k)
            cols.append(C)
            evals.append(lambda t, k=k: np.stack(
                [t ** i / math.factorial(i) for i in range(k + 1)], axis=-1))
        else:  # pragma: no cover
            raise AssertionError(term.kind)
    if not blocks:
        F = np.zeros((0, 0))
        G = np.zeros((sig.dim, 0))
        return F, G, lambda t: np.zeros(np.shape(t) + (0,))
    F = scipy.linalg.block_diag(*blocks)
    G = np.hstack(cols)

    def zeta(t):
        t = np.asarray(t, dtype=float)
        return np.concatenate([ev(t) for ev in evals], axis=-1)

    return F, G, zeta


@dataclass
class ZohKernel:
    """Exact substep propagation maps for one uniform grid.

    ``x(t_j + q*h/4) = Aq[q] @ x_j + Bq[q] @ u_j + Wq[q] @ zeta(t_j)``,
    q = 0..4; q = 4 is the full-step map. ``fraction(f)`` returns the same
    kind of map for an arbitrary offset f in [0, 1] of the cell (cached).
    """

    h: float
    Aq: list
    Bq: list
    Wq: list
    zeta: callable
    nz: int
    aug: np.ndarray = field(repr=False, default=None)
    _frac_cache: dict = field(repr=False, default_factory=dict)

    @classmethod
    def build(cls, model: StateSpaceModel, d: Signal, h: float) -> "ZohKernel":
        F, G, zeta = _realization(d)
        n, m, nz = model.n, model.m, F.shape[0]
        aug = np.zeros((n + m + nz, n + m + nz))
        aug[:n, :n] = model.A
        aug[:n, n:n + m] = model.B
        aug[:n, n + m:] = model.E @ G
        aug[n + m:, n + m:] = F
        quarter = scipy.linalg.expm(aug * (h / 4.0))
        Aq = [np.eye(n)]
        Bq = [np.zeros((n, m))]
        Wq = [np.zeros((n, nz))]
        P = np.eye(n + m + nz)
        for _ in range(4):
            P = quarter @ P
            Aq.append(P[:n, :n].copy())
            Bq.append(P[:n, n:n + m].copy())
            Wq.append(P[:n, n + m:].copy())
        return cls(h=h, Aq=Aq, Bq=Bq, Wq=Wq, zeta=zeta, nz=nz, aug=aug)

    def step(self, x, u, t):
        """Exact full-step map from node time t."""
        return self.Aq[4] @ x + self.Bq[4] @ u + self.Wq[4] @ self.zeta(t)

    def fraction(self, frac: float):
        """Exact maps (Af, Bf, Wf) with x(t_j + frac*h) = Af x_j + Bf u_j
        + Wf zeta(t_j)."""
        key = round(float(frac), 12)
        if key not in self._frac_cache:
            n = self.Aq[0].shape[0]
            m = self.Bq[0].shape[1]
            P = scipy.linalg.expm(self.aug * (key * self.h))
            self._frac_cache[key] = (P[:n, :n], P[:n, n:n + m], P[:n, n + m:])
        return self._frac_cache[key]


@dataclass
class DiscretizedOcp:
    """Condensed box QP: minimize 0.5 U'HU + g'U + const over lo <= U <= hi,
    with the linear state-reconstruction map X = Lam + Gam @ U."""

    scenario: OcpScenario
    N: int
    h: float
    times: np.ndarray
    kernel: ZohKernel
    H: np.ndarray
    g: np.ndarray
    const: float
    lo: np.ndarray
    hi: np.ndarray
    Lam: np.ndarray = field(repr=False)
    Gam: np.ndarray = field(repr=False)

    def states(self, U: np.ndarray) -> np.ndarray:
        """All node states x(t_0..t_N) for stacked or (N, m) inputs."""
        u = U.reshape(-1)
        return self.Lam + self.Gam @ u

    def qp_objective(self, U: np.ndarray) -> float:
        u = U.reshape(-1)
        return float(0.5 * u @ self.H @ u + self.g @ u + self.const)


def discretize(scenario: OcpScenario) -> DiscretizedOcp:
    """Build the condensed QP for the scenario (exact ZOH + Simpson cost)."""
    model = scenario.model
    n, m = model.n, model.m
    N = scenario.grid_size
    h = scenario.T / N
    kernel = ZohKernel.build(model, scenario.d, h)
    Aq, Bq, Wq = kernel.Aq, kernel.Bq, kernel.Wq
    Q = np.asarray(scenario.Q, dtype=float)
    S = np.asarray(scenario.S, dtype=float)
    times = np.arange(N + 1) * h
    ts = times[:N]
    zts = kernel.zeta(ts)                                   # (N, nz)
    wsimp = h / 12.0 * np.array([1.0, 4.0, 2.0, 4.0, 1.0])
    # constant per-interval quadratic blocks
    Qhat = sum(wsimp[q] * Aq[q].T @ Q @ Aq[q] for q in range(5))
    Shat = sum(wsimp[q] * (S @ Aq[q] + Bq[q].T @ Q @ Aq[q]) for q in range(5))
    Rhat = sum(wsimp[q] * (Bq[q].T @ Q @ Bq[q] + S @ Bq[q] + Bq[q].T @ S.T)
               for q in range(5))
    # time-varying linear terms
    qlin = np.zeros((N, n))
    rlin = np.zeros((N, m))
    cconst = 0.0
    for q in range(5):
        tq = ts + q * h / 4.0
        wsub = zts @ Wq[q].T                                # (N, n)
        rq = scenario.r.eval(tq)
        pq = scenario.p.eval(tq)
        qlin += wsimp[q] * (wsub @ Q + rq) @ Aq[q]
        rlin += wsimp[q] * (wsub @ Q @ Bq[q] + wsub @ S.T + rq @ Bq[q] + pq)
        cconst += wsimp[q] * float(
            np.sum(0.5 * np.einsum("ti,ij,tj->t", wsub, Q, wsub)
                   + np.sum(wsub * rq, axis=1)))
    # state stacking x_j = Lam[j] + Gam[j] @ U
    Ad, Bd, Wd = Aq[4], Bq[4], Wq[4]
    Lam = np.zeros((N + 1, n))
    Gam = np.zeros((N + 1, n, N * m))
    Lam[0] = np.asarray(scenario.x0, dtype=float)
    for j in range(N):
        Lam[j + 1] = Ad @ Lam[j] + Wd @ zts[j]
        Gam[j + 1] = Ad @ Gam[j]
        Gam[j + 1][:, j * m:(j + 1) * m] += Bd
    G0 = Gam[:N].reshape(N * n, N * m)
    # H = G0' Qbar G0 + Sbar G0 + (Sbar G0)' + Rbar, with block-diagonal bars
    QG = np.empty((N * n, N * m))
    qvec = np.empty(N * n)
    for j in range(N):
        QG[j * n:(j + 1) * n] = Qhat @ Gam[j]
        qvec[j * n:(j + 1) * n] = Qhat @ Lam[j] + qlin[j]
    H = G0.T @ QG
    SG = np.empty((N * m, N * m))
    g = np.empty(N * m)
    for j in range(N):
        SG[j * m:(j + 1) * m] = Shat @ Gam[j]
        g[j * m:(j + 1) * m] = Shat @ Lam[j] + rlin[j]
    H += SG + SG.T
    for j in range(N):
        H[j * m:(j + 1) * m, j * m:(j + 1) * m] += Rhat
    H = 0.5 * (H + H.T)
    g += G0.T @ qvec
    cconst += float(sum(0.5 * Lam[j] @ Qhat @ Lam[j] + qlin[j] @ Lam[j]
                        for j in range(N)))
    lo = np.tile(np.asarray(scenario.u_min, dtype=float), N)
    hi = np.tile(np.asarray(scenario.u_max, dtype=float), N)
    return DiscretizedOcp(scenario=scenario, N=N, h=h, times=times,
                          kernel=kernel, H=H, g=g, const=cconst,
                          lo=lo, hi=hi, Lam=Lam, Gam=Gam)


@dataclass
class SolveDiagnostics:
    iterations: int
    kkt_residual: float
    reduced_hessian_min_eig: float
    active_lower: np.ndarray
    active_upper: np.ndarray
    nonconvex: bool
    restarts: int
    cell_multipliers: np.ndarray = None   # (N, m) QP gradient / h: per-cell
                                          # averages of the switching functions


@dataclass
class TrajectoryPair:
    """Optimal grid trajectory: node states X (N+1, n), interval inputs
    U (N, m), the achieved objective, and solver diagnostics."""

    scenario: OcpScenario
    times: np.ndarray
    X: np.ndarray
    U: np.ndarray
    objective: float
    diagnostics: SolveDiagnostics
    kernel: ZohKernel = field(repr=False, default=None)

    @property
    def N(self) -> int:
        return self.U.shape[0]

    @property
    def h(self) -> float:
        return float(self.times[1] - self.times[0])

    def substates(self, q: int) -> np.ndarray:
        """States at t_j + q*h/4 for j = 0..N-1 (exact intra-interval values)."""
        k = self.kernel
        zts = k.zeta(self.times[:self.N])
        return (self.X[:self.N] @ k.Aq[q].T + self.U @ k.Bq[q].T
                + zts @ k.Wq[q].T)

    def midpoint_times(self) -> np.ndarray:
        return self.times[:self.N] + 0.5 * self.h

    def midpoint_states(self) -> np.ndarray:
        return self.substates(2)

    def step_residual(self) -> float:
        """Max relative defect of the exact one-step recursion (should be
        at round-off level by construction)."""
        k = self.kernel
        zts = k.zeta(self.times[:self.N])
        pred = (self.X[:self.N] @ k.Aq[4].T + self.U @ k.Bq[4].T
                + zts @ k.Wq[4].T)
        err = np.linalg.norm(pred - self.X[1:], axis=1)
        scale = 1.0 + np.linalg.norm(self.X[1:], axis=1)
        return float(np.max(err / scale))


def _min_free_eig(H: np.ndarray, free: np.ndarray) -> float:
    """Smallest eigenvalue of the free-block Hessian (exact for small blocks,
    inverse power iteration otherwise)."""
    Hf = H[np.ix_(free, free)]
    k = Hf.shape[0]
    if k == 0:
        return float("inf")
    if k <= 600:
        return float(np.linalg.eigvalsh(Hf)[0])
    try:
        L = np.linalg.cholesky(Hf)
    except np.linalg.LinAlgError:
        return float(np.linalg.eigvalsh(Hf)[0])  # indefinite: fall back
    rng = np.random.default_rng(0)
    v = rng.standard_normal(k)
    v /= np.linalg.norm(v)
    lam = None
    for _ in range(50):
        w = np.linalg.solve(L.T, np.linalg.solve(L, v))
        nw = np.linalg.norm(w)
        v = w / nw
        lam_new = 1.0 / nw
        if lam is not None and abs(lam_new - lam) < 1e-6 * abs(lam_new):
            lam = lam_new
            break
        lam = lam_new
    return float(lam)


def solve(scenario: OcpScenario, disc: DiscretizedOcp | None = None
          ) -> TrajectoryPair:
    """Solve the condensed box QP; if convexity fails (indefinite Hessian,
    possible through the bilinear input-state cost), restart from
    deterministic seeds and keep the best local solution."""
    disc = disc or discretize(scenario)
    m = scenario.model.m
    start = np.tile(np.clip(np.zeros(m), scenario.u_min, scenario.u_max),
                    disc.N)
    res = solve_box_qp(disc.H, disc.g, disc.lo, disc.hi, x0=start,
                       tol=scenario.kkt_tol)
    min_eig = _min_free_eig(disc.H, res.free)
    try:
        np.linalg.cholesky(disc.H + 1e-12 * max(1.0, np.abs(disc.H).max())
                           * np.eye(disc.H.shape[0]))
        hessian_pd = True
    except np.linalg.LinAlgError:
        hessian_pd = False
    nonconvex = (not hessian_pd) or min_eig <= 0.0
    restarts = 0
    if nonconvex:
        rng = np.random.default_rng(scenario.seed)
        best = res
        for _ in range(MULTISTART_COUNT):
            restarts += 1
            frac = rng.random(disc.lo.shape)
            lo_f = np.where(np.isfinite(disc.lo), disc.lo, -1.0)
            hi_f = np.where(np.isfinite(disc.hi), disc.hi, 1.0)
            x0 = lo_f + frac * (hi_f - lo_f)
            cand = solve_box_qp(disc.H, disc.g, disc.lo, disc.hi, x0=x0,
                                tol=scenario.kkt_tol)
            if cand.objective < best.objective:
                best = cand
        res = best
        min_eig = _min_free_eig(disc.H, res.free)
    U = res.x.reshape(disc.N, m)
    X = disc.states(res.x)
    at_lo = U <= np.asarray(scenario.u_min) + 1e-12 * (1 + np.abs(U))
    at_hi = U >= np.asarray(scenario.u_max) - 1e-12 * (1 + np.abs(U))
    h = scenario.T / disc.N
    diag = SolveDiagnostics(iterations=res.iterations,
                            kkt_residual=res.kkt_residual,
                            reduced_hessian_min_eig=min_eig,
                            active_lower=at_lo, active_upper=at_hi,
                            nonconvex=nonconvex, restarts=restarts,
                            cell_multipliers=res.gradient.reshape(disc.N, m) / h)
    return TrajectoryPair(scenario=scenario, times=disc.times, X=X, U=U,
                          objective=disc.qp_objective(res.x) ,
                          diagnostics=diag, kernel=disc.kernel)


def objective(pair: TrajectoryPair, scenario: OcpScenario | None = None) -> float:
    """Recompute the running-cost integral by composite Simpson on the dense
    (exact intra-interval) trajectory; matches the QP objective."""
    scn = scenario or pair.scenario
    N, h = pair.N, pair.h
    wsimp = h / 12.0 * np.array([1.0, 4.0, 2.0, 4.0, 1.0])
    total = 0.0
    for q in range(5):
        tq = pair.times[:N] + q * h / 4.0
        xq = pair.substates(q)
        total += wsimp[q] * float(np.sum(scn.stage_cost(tq, xq, pair.U)))
    return total


def simulate_zoh(model: StateSpaceModel, x0, U, d: Signal, h: float,
                 t0: float = 0.0) -> np.ndarray:
    """Exact node states under piecewise-constant inputs U (N, m) and
    disturbance signal d, starting from x0 at t0."""
    U = np.atleast_2d(np.asarray(U, dtype=float))
    kernel = ZohKernel.build(model, d, h)
    N = U.shape[0]
    X = np.zeros((N + 1, model.n))
    X[0] = np.asarray(x0, dtype=float)
    for j in range(N):
        X[j + 1] = kernel.step(X[j], U[j], t0 + j * h)
    return X
