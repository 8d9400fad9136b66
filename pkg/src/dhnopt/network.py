"""District-heating-network graphs and their LTI state-space models.

Vertices carry water mass, a heat-loss coefficient and a role (plain,
producer, consumer); directed edges carry constant mass flows. Enthalpy
balance under mass conservation yields linear advection dynamics

    diag(m) dx/dt = -(A_L + diag(kappa)) x + B u + E d,

where ``A_L`` is the flow-weighted graph Laplacian, ``u`` stacks injected
producer heat flows and ``d`` stacks (negative) consumer extractions.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import ValidationError

__all__ = [
    "Vertex", "Edge", "NetworkGraph", "StateSpaceModel", "HurwitzCertificate",
    "flow_laplacian", "assemble_model", "hurwitz_certificate", "state_bound",
    "random_flow_network",
]

ROLES = ("plain", "producer", "consumer")

# relative slack for the per-vertex flow-balance check
MASS_BALANCE_RTOL = 1e-9


@dataclass(frozen=True)
class Vertex:
    id: str
    mass: float = 1.0            # kg
    loss: float = 1.0            # W/K
    role: str = "plain"


@dataclass(frozen=True)
class Edge:
    tail: str
    head: str
    flow: float                  # kg/s, oriented along the water flow


@dataclass(frozen=True)
class NetworkGraph:
    """Validated pipe graph; raises ValidationError on construction if invalid."""

    vertices: tuple[Vertex, ...]
    edges: tuple[Edge, ...]

    def __init__(self, vertices, edges):
        object.__setattr__(self, "vertices", tuple(vertices))
        object.__setattr__(self, "edges", tuple(edges))
        self._validate()

    def _validate(self):
        ids = [v.id for v in self.vertices]
        if not ids:
            raise ValidationError("graph has no vertices")
        if len(set(ids)) != len(ids):
            raise ValidationError("duplicate vertex ids")
        index = {vid: i for i, vid in enumerate(ids)}
        for v in self.vertices:
            if not v.mass > 0:
                raise ValidationError(f"vertex {v.id}: mass must be > 0")
            if not v.loss > 0:
                raise ValidationError(f"vertex {v.id}: loss must be > 0")
            if v.role not in ROLES:
                raise ValidationError(f"vertex {v.id}: unknown role {v.role!r}")
        for e in self.edges:
            if e.tail not in index or e.head not in index:
                raise ValidationError(f"edge {e.tail}->{e.head}: unknown vertex")
            if e.tail == e.head:
                raise ValidationError(f"edge {e.tail}->{e.head}: self-loop")
            if not e.flow > 0:
                raise ValidationError(f"edge {e.tail}->{e.head}: flow must be > 0")
        # connectivity (undirected) via BFS
        n = len(ids)
        if n > 1:
            adj = [[] for _ in range(n)]
            for e in self.edges:
                i, j = index[e.tail], index[e.head]
                adj[i].append(j)
                adj[j].append(i)
            seen = {0}
            stack = [0]
            while stack:
                u = stack.pop()
                for vtx in adj[u]:
                    if vtx not in seen:
                        seen.add(vtx)
                        stack.append(vtx)
            if len(seen) != n:
                missing = [ids[i] for i in range(n) if i not in seen]
                raise ValidationError(f"graph is disconnected (e.g. {missing[0]})")
        # per-vertex mass conservation
        inflow = np.zeros(n)
        outflow = np.zeros(n)
        for e in self.edges:
            outflow[index[e.tail]] += e.flow
            inflow[index[e.head]] += e.flow
        scale = max(1.0, inflow.max(initial=0.0), outflow.max(initial=0.0))
        bad = np.nonzero(np.abs(inflow - outflow) > MASS_BALANCE_RTOL * scale)[0]
        if bad.size:
            v = ids[bad[0]]
            raise ValidationError(
                f"mass conservation violated at vertex {v}: "
                f"in={inflow[bad[0]]:g} out={outflow[bad[0]]:g}")

    # -- accessors -------------------------------------------------------

    @property
    def n(self) -> int:
        return len(self.vertices)

    def index(self) -> dict[str, int]:
        return {v.id: i for i, v in enumerate(self.vertices)}

    def producers(self) -> list[str]:
        return [v.id for v in self.vertices if v.role == "producer"]

    def consumers(self) -> list[str]:
        return [v.id for v in self.vertices if v.role == "consumer"]

    def masses(self) -> np.ndarray:
        return np.array([v.mass for v in self.vertices])

    def losses(self) -> np.ndarray:
        return np.array([v.loss for v in self.vertices])


@dataclass(frozen=True)
class StateSpaceModel:
    """LTI model dx/dt = A x + B u + E d with selector input/disturbance maps."""

    A: np.ndarray
    B: np.ndarray
    E: np.ndarray
    vertex_ids: tuple[str, ...]
    producer_ids: tuple[str, ...]
    consumer_ids: tuple[str, ...]
    laplacian: np.ndarray = field(repr=False, default=None)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    @property
    def w(self) -> int:
        return self.E.shape[1]


@dataclass(frozen=True)
class HurwitzCertificate:
    """Constructive stability certificate for the model matrix A.

    ``gershgorin_margin > 0`` certifies Hurwitz without any eigenvalue
    computation; ``spectral_abscissa`` is max Re(eig(A)); ``transient_gain``
    is sqrt(cond(P)) for the solution of A'P + PA = -I and bounds the
    transient amplification of ||exp(At)||.
    """

    spectral_abscissa: float
    gershgorin_margin: float
    transient_gain: float


def flow_laplacian(graph: NetworkGraph) -> np.ndarray:
    """Flow-weighted Laplacian: diagonal = total outflow, entry (v,u) = -q for
    each edge u->v (parallel edges summed). Rows sum to zero by mass
    conservation, which graph validation enforces."""
    index = graph.index()
    n = graph.n
    lap = np.zeros((n, n))
    for e in graph.edges:
        t, h = index[e.tail], index[e.head]
        lap[t, t] += e.flow
        lap[h, t] -= e.flow
    return lap


def assemble_model(graph: NetworkGraph) -> StateSpaceModel:
    """Build (A, B, E) from a validated graph.

    A = diag(m)^-1 (-A_L - diag(kappa)); column j of B (E) is the indicator
    of the j-th producer (consumer) in declaration order.
    """
    lap = flow_laplacian(graph)
    masses = graph.masses()
    kappa = graph.losses()
    A = (-lap - np.diag(kappa)) / masses[:, None]
    index = graph.index()
    producers = graph.producers()
    consumers = graph.consumers()
    if len(set(producers)) != len(producers) or len(set(consumers)) != len(consumers):
        raise ValidationError("duplicate producer/consumer assignment")
    B = np.zeros((graph.n, len(producers)))
    for j, vid in enumerate(producers):
        B[index[vid], j] = 1.0
    E = np.zeros((graph.n, len(consumers)))
    for j, vid in enumerate(consumers):
        E[index[vid], j] = 1.0
    return StateSpaceModel(A=A, B=B, E=E,
                           vertex_ids=tuple(v.id for v in graph.vertices),
                           producer_ids=tuple(producers),
                           consumer_ids=tuple(consumers),
                           laplacian=lap)


def hurwitz_certificate(model: StateSpaceModel) -> HurwitzCertificate:
    """Certify that A is Hurwitz; raises NumericalError-grade AssertionError
    only on an internal modeling bug (valid graphs always yield Hurwitz A)."""
    A = model.A
    diag = np.diag(A)
    off = np.sum(np.abs(A), axis=1) - np.abs(diag)
    margin = float(np.min(-diag - off))
    omega = float(np.max(np.linalg.eigvals(A).real))
    if omega >= 0:
        raise ValidationError(
            f"model matrix is not Hurwitz (spectral abscissa {omega:g}); "
            "this indicates an invalid model, not a valid graph")
    P = scipy.linalg.solve_continuous_lyapunov(A.T, -np.eye(model.n))
    k = float(np.sqrt(np.linalg.cond(P)))
    return HurwitzCertificate(spectral_abscissa=omega,
                              gershgorin_margin=margin,
                              transient_gain=k)


def state_bound(model: StateSpaceModel, x0_norm: float, u_hat: float,
                d_hat: float, T: float,
                certificate: HurwitzCertificate | None = None) -> float:
    """Upper bound on ||x(T)|| for any input with ||u|| <= u_hat and
    disturbance with sup ||d|| <= d_hat:

        k e^{-|w|T} ||x0|| + (k/|w|) (||B|| u_hat + ||E|| d_hat),

    with (k, w) from the Hurwitz certificate."""
    cert = certificate or hurwitz_certificate(model)
    k = cert.transient_gain
    rho = abs(cert.spectral_abscissa)

    def nrm(mat):
        return np.linalg.norm(mat, 2) if min(mat.shape) else 0.0

    forced = nrm(model.B) * u_hat + nrm(model.E) * d_hat
    return k * np.exp(-rho * T) * x0_norm + k / rho * forced


def random_flow_network(rng: np.random.Generator, n: int,
                        extra_cycles: int | None = None,
                        flow_range=(0.5, 3.0), loss_range=(0.2, 2.0),
                        unit_mass: bool = True) -> NetworkGraph:
    """Random valid network: a flow-carrying Hamiltonian cycle over a random
    vertex order plus a few random chordal cycles. Mass conservation holds by
    construction because every added edge set is a directed cycle."""
    if n < 1:
        raise ValidationError("need at least one vertex")
    ids = [f"v{i}" for i in range(n)]
    order = rng.permutation(n)
    flows: dict[tuple[int, int], float] = {}

    def add_cycle(nodes, q):
        for a, b in zip(nodes, nodes[1:] + nodes[:1]):
            if a == b:
                continue
            flows[(a, b)] = flows.get((a, b), 0.0) + q

    if n > 1:
        add_cycle(list(order), float(rng.uniform(*flow_range)))
        k_cycles = rng.integers(0, 3) if extra_cycles is None else extra_cycles
        for _ in range(k_cycles):
            length = int(rng.integers(2, min(n, 5) + 1))
            nodes = list(rng.choice(n, size=length, replace=False))
            add_cycle(nodes, float(rng.uniform(*flow_range)))
    roles = ["plain"] * n
    m = int(rng.integers(1, max(2, n // 2) + 1))
    w = int(rng.integers(0, n - m + 1))
    chosen = rng.choice(n, size=m + w, replace=False)
    for v in chosen[:m]:
        roles[v] = "producer"
    for v in chosen[m:]:
        roles[v] = "consumer"
    vertices = [Vertex(ids[i],
                       mass=1.0 if unit_mass else float(rng.uniform(0.5, 2.0)),
                       loss=float(rng.uniform(*loss_range)),
                       role=roles[i])
                for i in range(n)]
    edges = [Edge(ids[a], ids[b], q) for (a, b), q in sorted(flows.items())]
    return NetworkGraph(vertices, edges)
