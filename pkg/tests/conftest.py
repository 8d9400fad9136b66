import math

import numpy as np
import pytest

from dhnopt.network import Edge, NetworkGraph, Vertex, assemble_model
from dhnopt.ocp import OcpScenario
from dhnopt.signals import Signal, const, sinusoid

HOUR = 3600.0
DAY = 24 * HOUR
OM_DAY = 2 * math.pi / DAY


def two_cycle_graph(kappa=(1.0, 2.0)):
    return NetworkGraph(
        vertices=[Vertex("a", loss=kappa[0], role="producer"),
                  Vertex("b", loss=kappa[1], role="consumer")],
        edges=[Edge("a", "b", 1.0), Edge("b", "a", 1.0)])


def two_cycle_scenario(T=40.0, N=50, x0=(0.0, 0.0), q_weight=8.0,
                       u_box=(0.0, 4.0), om=0.5):
    """Small n=2, m=1, w=1 economic scenario on the two-cycle network with
    sinusoidal price and extraction; time constants are O(1) so short
    horizons exercise bang and singular behaviour."""
    model = assemble_model(two_cycle_graph())
    n, m, w = model.n, model.m, model.w
    Q = q_weight * np.eye(n)
    S = model.B.T.copy()
    xn = np.array([1.5, 1.0])
    r = const(-Q @ xn, dim=n)
    p = const([1.0], dim=m) + sinusoid([0.4], om, 0.3, dim=m)
    d = const([-0.6], dim=w) + sinusoid([0.2], om, 1.2, dim=w)
    return OcpScenario(model=model, Q=Q, S=S, r=r, p=p, d=d,
                       u_min=np.full(m, u_box[0]), u_max=np.full(m, u_box[1]),
                       T=T, x0=np.asarray(x0, dtype=float), N=N)


@pytest.fixture
def cycle_scenario():
    return two_cycle_scenario()


def scalar_producer_scenario(q=2.0, sigma=0.5, p0=1.0, p1=0.4, om=0.7,
                             r0=-3.0, T=30.0, N=40, x0=0.5,
                             u_box=(-50.0, 50.0)):
    """n = m = 1 scenario on a single producer vertex (no consumers)."""
    g = NetworkGraph([Vertex("a", loss=1.0, role="producer")], [])
    model = assemble_model(g)
    Q = np.array([[q]])
    S = np.array([[sigma]])
    r = const([r0], dim=1)
    p = const([p0], dim=1) + sinusoid([p1], om, 0.0, dim=1)
    d = Signal.zero(0)
    return OcpScenario(model=model, Q=Q, S=S, r=r, p=p, d=d,
                       u_min=np.array([u_box[0]]), u_max=np.array([u_box[1]]),
                       T=T, x0=np.array([x0], dtype=float), N=N)
