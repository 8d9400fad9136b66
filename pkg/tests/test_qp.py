import numpy as np
import pytest

from dhnopt.errors import ConvergenceError
from dhnopt.qp import solve_box_qp


def random_psd(rng, n, shift=0.1):
    A = rng.standard_normal((n, n))
    return A @ A.T + shift * np.eye(n)


class TestBoxQp:
    def test_unconstrained_matches_linear_solve(self):
        rng = np.random.default_rng(0)
        H = random_psd(rng, 12)
        g = rng.standard_normal(12)
        res = solve_box_qp(H, g, np.full(12, -1e12), np.full(12, 1e12))
        np.testing.assert_allclose(res.x, np.linalg.solve(H, -g),
                                   rtol=1e-9, atol=1e-9)
        assert res.converged

    def test_clamps_to_active_bounds(self):
        H = np.eye(2)
        g = np.array([-10.0, 10.0])   # unconstrained sol (10, -10)
        res = solve_box_qp(H, g, np.array([0.0, 0.0]), np.array([1.0, 1.0]))
        np.testing.assert_allclose(res.x, [1.0, 0.0])

    def test_kkt_signs(self):
        rng = np.random.default_rng(4)
        H = random_psd(rng, 20)
        g = rng.standard_normal(20) * 5
        lo, hi = np.full(20, -0.3), np.full(20, 0.4)
        res = solve_box_qp(H, g, lo, hi)
        grad = res.gradient
        at_lo = np.isclose(res.x, lo)
        at_hi = np.isclose(res.x, hi)
        assert np.all(grad[at_lo] >= -1e-7)
        assert np.all(grad[at_hi] <= 1e-7)
        inner = ~(at_lo | at_hi)
        assert np.abs(grad[inner]).max(initial=0.0) <= 1e-7 * (1 + np.abs(g).max())

    def test_multiple_starts_agree_when_pd(self):
        rng = np.random.default_rng(9)
        H = random_psd(rng, 30)
        g = rng.standard_normal(30)
        lo, hi = np.full(30, -0.5), np.full(30, 0.5)
        sols = [solve_box_qp(H, g, lo, hi,
                             x0=rng.uniform(-0.5, 0.5, 30)).x
                for _ in range(5)]
        for s in sols[1:]:
            np.testing.assert_allclose(s, sols[0], atol=1e-8)

    def test_iteration_cap(self):
        H = np.eye(2)
        g = np.array([1.0, 1.0])
        with pytest.raises(ConvergenceError):
            solve_box_qp(H, g, np.full(2, -1.0), np.full(2, 1.0), max_iter=0)
