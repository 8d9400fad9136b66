import numpy as np
import pytest

from dhnopt.errors import (RegularityError, ResonanceError, ValidationError)
from dhnopt.pencil import (OptimalityPencil, algebraic_part,
                           bounded_particular_solution, build_pencil,
                           check_regularity, dae_residual, switching_residual,
                           weierstrass_decompose)
from dhnopt.signals import Signal, const, sinusoid

from conftest import scalar_producer_scenario, two_cycle_scenario


def scalar_pencil(q=2.0, sigma=0.5, p_sig=None, r0=-3.0):
    scn = scalar_producer_scenario(q=q, sigma=sigma, r0=r0)
    if p_sig is not None:
        scn = scn.with_(p=p_sig)
    return scn, scn.pencil()


class TestBuildPencil:
    def test_scalar_blocks(self):
        q, sigma = 2.0, 0.5
        _, pen = scalar_pencil(q, sigma)
        np.testing.assert_allclose(pen.M, [[-1.0, 0.0, 1.0],
                                           [-q, 1.0, -sigma],
                                           [sigma, 1.0, 0.0]])
        np.testing.assert_allclose(pen.D, np.diag([1.0, 1.0, 0.0]))

    def test_d_rank(self):
        scn = two_cycle_scenario()
        pen = scn.pencil()
        n = scn.model.n
        assert np.trace(pen.D) == pytest.approx(2 * n)
        assert np.count_nonzero(pen.D) == 2 * n

    def test_forcing_layout(self):
        scn = two_cycle_scenario()
        pen = scn.pencil()
        t = 3.7
        n, m, w = scn.model.n, scn.model.m, scn.model.w
        f = pen.f.eval(t)
        np.testing.assert_allclose(f[:n], scn.model.E @ scn.d.eval(t))
        np.testing.assert_allclose(f[n:2 * n], -scn.r.eval(t))
        np.testing.assert_allclose(f[2 * n:], scn.p.eval(t))

    def test_asymmetric_q_rejected(self):
        scn = two_cycle_scenario()
        Q_bad = scn.Q.copy()
        Q_bad[0, 1] += 1.0
        with pytest.raises(ValidationError, match="symmetric"):
            build_pencil(scn.model, Q_bad, scn.S, scn.r, scn.p, scn.d)


class TestRegularity:
    def test_pure_ode_regular(self):
        pen = OptimalityPencil(D=np.eye(3), M=np.diag([1.0, -2.0, 0.5]),
                               f=Signal.zero(3), n=1, m=1)
        assert check_regularity(pen).regular

    def test_zero_pencil_irregular(self):
        pen = OptimalityPencil(D=np.zeros((1, 1)), M=np.zeros((1, 1)),
                               f=Signal.zero(1), n=0, m=1)
        assert not check_regularity(pen).regular

    def test_scalar_ocp_det_is_2s_plus_q(self):
        # det(sD - M) = 2*sigma + q identically; q = -2 sigma kills it
        _, pen = scalar_pencil(q=-1.0, sigma=0.5)
        assert not check_regularity(pen).regular
        _, pen = scalar_pencil(q=2.0, sigma=0.5)
        assert check_regularity(pen).regular

    def test_witness_deterministic(self):
        _, pen = scalar_pencil()
        c1 = check_regularity(pen, seed=3)
        c2 = check_regularity(pen, seed=3)
        np.testing.assert_array_equal(c1.samples, c2.samples)
        np.testing.assert_array_equal(c1.log_abs_dets, c2.log_abs_dets)


class TestWeierstrass:
    def test_pure_ode(self):
        A = np.array([[-1.0, 2.0], [0.5, -3.0]])
        pen = OptimalityPencil(D=np.eye(2), M=A, f=Signal.zero(2), n=1, m=0)
        dec = weierstrass_decompose(pen)
        assert dec.n_infinite == 0 and dec.nu == 0
        np.testing.assert_allclose(np.sort(np.linalg.eigvals(dec.J)),
                                   np.sort(np.linalg.eigvals(A)), atol=1e-10)

    def test_already_canonical(self):
        pen = OptimalityPencil(D=np.diag([1.0, 0.0]), M=np.eye(2),
                               f=Signal.zero(2), n=1, m=0)
        dec = weierstrass_decompose(pen)
        assert dec.n_finite == 1 and dec.n_infinite == 1 and dec.nu == 1
        np.testing.assert_allclose(dec.J, [[1.0]], atol=1e-12)
        np.testing.assert_allclose(dec.N, [[0.0]], atol=1e-12)

    def test_scalar_ocp_all_infinite(self):
        _, pen = scalar_pencil()
        dec = weierstrass_decompose(pen)
        assert dec.n_finite == 0
        assert dec.n_infinite == 3
        assert dec.nu == 3

    def test_reconstruction_invariant(self):
        rng = np.random.default_rng(0)
        for scn in [two_cycle_scenario(), scalar_producer_scenario()]:
            pen = scn.pencil()
            dec = weierstrass_decompose(pen)
            svals = rng.uniform(-3, 3, size=5)
            assert dec.reconstruction_error(pen, svals) <= 1e-8

    def test_irregular_raises_with_pointer_to_check(self):
        _, pen = scalar_pencil(q=-1.0, sigma=0.5)
        with pytest.raises(RegularityError, match="check_regularity"):
            weierstrass_decompose(pen)

    def test_nilpotency_invariant(self):
        scn = two_cycle_scenario()
        dec = weierstrass_decompose(scn.pencil())
        assert dec.nu >= 1
        Npow = np.linalg.matrix_power(dec.N, dec.nu)
        scale = max(1.0, np.linalg.norm(dec.N))
        assert np.linalg.norm(Npow) <= 1e-10 * scale
        if dec.nu > 1:
            prev = np.linalg.matrix_power(dec.N, dec.nu - 1)
            assert np.linalg.norm(prev) > 1e-10 * scale


class TestAlgebraicPart:
    def test_index_one_constant(self):
        # pencil s*0 - (-I): algebraic rows only, N = 0, xi2 = -f2
        pen = OptimalityPencil(D=np.zeros((2, 2)), M=np.eye(2),
                               f=const([3.0, -1.0]), n=0, m=2)
        dec = weierstrass_decompose(pen)
        assert dec.nu == 1
        xi2 = algebraic_part(dec, pen.f)
        # back in original coordinates the solution must satisfy 0 = M xi + f
        xi = dec.Q @ xi2.eval(0.0)
        np.testing.assert_allclose(pen.M @ xi + pen.f.eval(0.0), 0, atol=1e-12)

    def test_zero_forcing(self):
        _, pen = scalar_pencil()
        dec = weierstrass_decompose(pen)
        xi2 = algebraic_part(dec, Signal.zero(3))
        assert np.allclose(xi2.eval([0.0, 1.0, 2.0]), 0.0)

    def test_nilpotent_index_two_residual(self):
        # s*N0 - I with N0 = [[0, 1], [0, 0]]; solution xi = -(f + N0 f')
        N0 = np.array([[0.0, 1.0], [0.0, 0.0]])
        f = Signal.concat([sinusoid([1.0], 1.0), const([0.5])])
        pen = OptimalityPencil(D=N0, M=np.eye(2), f=f, n=0, m=2)
        dec = weierstrass_decompose(pen)
        assert dec.nu == 2
        xi2 = algebraic_part(dec, f)
        xi = xi2.matmul(dec.Q)
        tt = np.linspace(0, 6, 101)
        res = xi.derivative().eval(tt) @ pen.D.T - xi.eval(tt) @ pen.M.T \
            - f.eval(tt)
        assert np.abs(res).max() <= 1e-10
        # explicit formula
        expected = -(f.eval(tt) + f.derivative().eval(tt) @ N0.T)
        np.testing.assert_allclose(xi.eval(tt), expected, atol=1e-10)


class TestBoundedSolution:
    def test_scalar_antistable_ode(self):
        # dx/dt = x + sin t has exactly one bounded solution on R:
        # x = -(sin t + cos t)/2
        pen = OptimalityPencil(D=np.eye(1), M=np.eye(1),
                               f=sinusoid([1.0], 1.0), n=0, m=1)
        dec = weierstrass_decompose(pen)
        tp = bounded_particular_solution(dec, pen)
        tt = np.linspace(0, 10, 50)
        np.testing.assert_allclose(tp.xi.eval(tt)[:, 0],
                                   -(np.sin(tt) + np.cos(tt)) / 2, atol=1e-12)

    def test_stationary_matches_linear_solve(self):
        # constant forcing: turnpike solves M xi = -f
        scn = two_cycle_scenario()
        scn = scn.with_(p=const([1.0], dim=1), d=const([-0.6], dim=1))
        pen = scn.pencil()
        dec = weierstrass_decompose(pen)
        tp = bounded_particular_solution(dec, pen)
        direct = np.linalg.solve(pen.M, -pen.f.eval(0.0))
        for t in [0.0, 5.0, 11.0]:
            np.testing.assert_allclose(tp.xi.eval(t), direct, rtol=1e-9,
                                       atol=1e-9 * np.abs(direct).max())

    def test_scalar_ocp_matches_hand_elimination(self):
        # eliminating u and lambda from the scalar singular-arc system gives
        #   x = (sigma*g + p' - p - r) / (2 sigma + q),  lambda = -sigma x - p,
        #   u = x' + x - g   (here g = E d = 0)
        q, sigma, p0, p1, om, r0 = 2.0, 0.5, 1.0, 0.4, 0.7, -3.0
        scn = scalar_producer_scenario(q=q, sigma=sigma, p0=p0, p1=p1, om=om,
                                       r0=r0)
        pen = scn.pencil()
        dec = weierstrass_decompose(pen)
        tp = bounded_particular_solution(dec, pen)
        tt = np.linspace(0, 20, 77)
        p = p0 + p1 * np.sin(om * tt)
        dp = p1 * om * np.cos(om * tt)
        ddp = -p1 * om ** 2 * np.sin(om * tt)
        x = (dp - p - r0) / (2 * sigma + q)
        dx = (ddp - dp) / (2 * sigma + q)
        lam = -sigma * x - p
        u = dx + x
        np.testing.assert_allclose(tp.x.eval(tt)[:, 0], x, atol=1e-10)
        np.testing.assert_allclose(tp.lam.eval(tt)[:, 0], lam, atol=1e-10)
        np.testing.assert_allclose(tp.u.eval(tt)[:, 0], u, atol=1e-10)

    def test_residual_invariants(self, cycle_scenario):
        pen = cycle_scenario.pencil()
        dec = weierstrass_decompose(pen)
        tp = bounded_particular_solution(dec, pen)
        tt = np.linspace(0.0, cycle_scenario.T, 1000)
        assert dae_residual(pen, tp, tt) <= 1e-8
        assert switching_residual(pen, tp, tt) <= 1e-8

    def test_ordering_independence(self, cycle_scenario):
        pen = cycle_scenario.pencil()
        tp_a = bounded_particular_solution(weierstrass_decompose(pen), pen)
        tp_b = bounded_particular_solution(
            weierstrass_decompose(pen, ordering_seed=12345), pen)
        tt = np.linspace(0.0, cycle_scenario.T, 400)
        va, vb = tp_a.xi.eval(tt), tp_b.xi.eval(tt)
        scale = np.abs(va).max()
        assert np.abs(va - vb).max() <= 1e-7 * scale

    def test_direct_harmonic_solve_oracle(self, cycle_scenario):
        # every harmonic must satisfy (i k w0 D - M) xi_k = f_k, so the
        # assembled signal can be checked against plain linear solves
        pen = cycle_scenario.pencil()
        dec = weierstrass_decompose(pen)
        tp = bounded_particular_solution(dec, pen)
        om0 = pen.f.base_frequency()
        comps = pen.f.fourier_components(om0)
        xi_direct = {k: np.linalg.solve(1j * k * om0 * pen.D - pen.M, fk)
                     for k, fk in comps.items()}
        direct = Signal.from_fourier_components(pen.size, om0, xi_direct)
        tt = np.linspace(0, 30, 97)
        ref = direct.eval(tt)
        np.testing.assert_allclose(tp.xi.eval(tt), ref,
                                   atol=1e-9 * max(1, np.abs(ref).max()))

    def test_interiority_margin(self, cycle_scenario):
        pen = cycle_scenario.pencil()
        dec = weierstrass_decompose(pen)
        tp = bounded_particular_solution(
            dec, pen, u_box=(cycle_scenario.u_min, cycle_scenario.u_max))
        assert tp.interiority_margin is not None
        assert tp.interiority_margin > 0
        assert not tp.leaves_box
        tight = bounded_particular_solution(dec, pen, u_box=([0.0], [0.1]))
        assert tight.leaves_box

    def test_resonance_detected(self):
        # dx/dt = 0 x + 1: constant harmonic resonates with eigenvalue 0
        pen = OptimalityPencil(D=np.eye(1), M=np.zeros((1, 1)),
                               f=const([1.0]), n=0, m=1)
        dec = weierstrass_decompose(pen)
        with pytest.raises(ResonanceError):
            bounded_particular_solution(dec, pen)
