"""Dense box-constrained quadratic programming by projected Newton.

Minimizes 0.5 x'Hx + g'x subject to lo <= x <= hi. Variables sitting at a
bound with the gradient pushing outward are clamped; a Newton step is taken
on the free block (Cholesky), followed by a projected line search. On a
positive definite free block the Newton step is the exact minimizer over the
current face, so the method terminates after finitely many face changes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError

__all__ = ["BoxQpResult", "solve_box_qp"]


@dataclass
class BoxQpResult:
    x: np.ndarray
    objective: float
    iterations: int
    gradient: np.ndarray
    free: np.ndarray            # bool mask of unclamped variables at solution
    kkt_residual: float
    converged: bool


def _objective(H, g, x):
    return 0.5 * x @ H @ x + g @ x


def solve_box_qp(H, g, lo, hi, x0=None, tol=1e-9, max_iter=10_000,
                 ridge=0.0) -> BoxQpResult:
    """Projected-Newton solve; ``tol`` is scaled by (1 + ||g||_inf).

    ``ridge`` adds a diagonal shift when the free-block Cholesky fails
    (indefinite H); callers handle multistart policy.
    """
    H = np.asarray(H, dtype=float)
    g = np.asarray(g, dtype=float)
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    nv = g.shape[0]
    x = np.clip(np.zeros(nv) if x0 is None else np.asarray(x0, dtype=float),
                lo, hi)
    scale = 1.0 + np.abs(g).max(initial=0.0)
    grad = H @ x + g
    kkt = np.linalg.norm(grad)
    for it in range(1, max_iter + 1):
        at_lo = x <= lo + 1e-14 * (1 + np.abs(lo))
        at_hi = x >= hi - 1e-14 * (1 + np.abs(hi))
        clamped = (at_lo & (grad > 0)) | (at_hi & (grad < 0))
        free = ~clamped
        kkt = np.linalg.norm(grad[free]) if free.any() else 0.0
        if kkt <= tol * scale:
            return BoxQpResult(x=x, objective=_objective(H, g, x),
                               iterations=it - 1, gradient=grad, free=free,
                               kkt_residual=kkt / scale, converged=True)
        Hf = H[np.ix_(free, free)]
        rhs = grad[free]
        try:
            L = np.linalg.cholesky(Hf)
            dxf = -np.linalg.solve(L.T, np.linalg.solve(L, rhs))
        except np.linalg.LinAlgError:
            # indefinite free block: fall back to steepest descent, which
            # combined with the negative-curvature step below walks to a
            # face of the box instead of chasing a nonexistent interior min
            dxf = -rhs
        step = np.zeros(nv)
        step[free] = dxf
        # exact step along the free direction, then projected backtracking
        curvature = step @ H @ step
        slope = grad @ step
        if curvature > 0:
            alpha = min(1.0, -slope / curvature)
        else:
            # descent with nonpositive curvature: step far enough that every
            # moving coordinate reaches its bound, then project
            with np.errstate(divide="ignore", invalid="ignore"):
                to_hi = np.where(step > 0, (hi - x) / step, np.inf)
                to_lo = np.where(step < 0, (lo - x) / step, np.inf)
            reach = np.minimum(to_hi, to_lo)
            finite = np.isfinite(reach) & (np.abs(step) > 0)
            alpha = float(reach[finite].max()) if finite.any() else 1.0
        if alpha <= 0:
            alpha = 1.0
        f0 = _objective(H, g, x)
        x_new = x
        for _ in range(60):
            cand = np.clip(x + alpha * step, lo, hi)
            if _objective(H, g, cand) <= f0 + 1e-4 * alpha * slope or \
               _objective(H, g, cand) < f0:
                x_new = cand
                break
            alpha *= 0.5
        else:
            # no decrease possible along this direction: accept KKT as-is
            return BoxQpResult(x=x, objective=f0, iterations=it, gradient=grad,
                               free=free, kkt_residual=kkt / scale,
                               converged=kkt <= 10 * tol * scale)
        x = x_new
        grad = H @ x + g
    raise ConvergenceError(
        f"box QP did not converge in {max_iter} iterations "
        f"(last scaled KKT residual {kkt / scale:.3e})")
