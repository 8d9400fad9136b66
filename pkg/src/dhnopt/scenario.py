"""Scenario files: JSON schema, loading, and artifact writers.

A scenario file carries the pipe graph, the cost data (with the shorthands
``"S": "B_transpose"`` and ``"r": "minus_Q_xn"``), the input box, the
(x0, horizon) run matrix, numerics, and output settings. Emitted artifacts
are CSV (full double precision, scientific notation, unit-suffixed headers)
and JSON reports.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import jsonschema
import numpy as np

from .errors import ScenarioError, ValidationError
from .network import Edge, NetworkGraph, StateSpaceModel, Vertex, assemble_model
from .ocp import OcpScenario
from .signals import Signal, const, from_json_terms

__all__ = ["ScenarioBundle", "RunSpec", "load_scenario", "SCHEMA",
           "write_csv", "format_float"]

_SIGNAL_TERM = {
    "type": "object",
    "properties": {
        "type": {"enum": ["const", "sin", "poly", "exp"]},
        "value": {},
        "amplitude": {},
        "period_s": {"type": "number"},
        "phase_rad": {"type": "number"},
        "coeffs": {"type": "array"},
        "rate_per_s": {"type": "number"},
    },
    "required": ["type"],
}

SCHEMA = {
    "type": "object",
    "required": ["graph", "cost", "bounds", "runs"],
    "properties": {
        "graph": {
            "type": "object",
            "required": ["vertices", "edges"],
            "properties": {
                "vertices": {
                    "type": "array",
                    "minItems": 1,
                    "items": {
                        "type": "object",
                        "required": ["id"],
                        "properties": {
                            "id": {"type": "string"},
                            "mass_kg": {"type": "number",
                                        "exclusiveMinimum": 0},
                            "loss_W_per_K": {"type": "number",
                                             "exclusiveMinimum": 0},
                            "role": {"enum": ["plain", "producer",
                                              "consumer"]},
                        },
                    },
                },
                "edges": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "required": ["tail", "head", "flow_kg_per_s"],
                        "properties": {
                            "tail": {"type": "string"},
                            "head": {"type": "string"},
                            "flow_kg_per_s": {"type": "number",
                                              "exclusiveMinimum": 0},
                        },
                    },
                },
            },
        },
        "cost": {
            "type": "object",
            "required": ["Q", "S", "r", "p", "d"],
            "properties": {
                "Q": {
                    "type": "object",
                    "properties": {"diagonal": {}, "dense": {"type": "array"}},
                },
                "S": {
                    "anyOf": [{"const": "B_transpose"},
                              {"type": "object",
                               "required": ["dense"],
                               "properties": {"dense": {"type": "array"}}}],
                },
                "r": {
                    "anyOf": [{"const": "minus_Q_xn"},
                              {"type": "array", "items": _SIGNAL_TERM}],
                },
                "xn_K": {"type": "array", "items": {"type": "number"}},
                "p": {"type": "array", "items": _SIGNAL_TERM},
                "d": {"type": "array", "items": _SIGNAL_TERM},
            },
        },
        "bounds": {
            "type": "object",
            "required": ["u_min_W", "u_max_W"],
            "properties": {
                "u_min_W": {"type": "array", "items": {"type": "number"}},
                "u_max_W": {"type": "array", "items": {"type": "number"}},
            },
        },
        "runs": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": ["x0", "horizon_s"],
                "properties": {
                    "x0": {
                        "type": "object",
                        "properties": {
                            "scale_xn": {"type": "number"},
                            "vector_K": {"type": "array",
                                         "items": {"type": "number"}},
                        },
                    },
                    "horizon_s": {"type": "number", "exclusiveMinimum": 0},
                    "N": {"type": ["integer", "null"], "minimum": 2},
                },
            },
        },
        "numerics": {
            "type": "object",
            "properties": {
                "N": {"type": ["integer", "null"], "minimum": 2},
                "kkt_tol": {"type": "number", "exclusiveMinimum": 0},
                "seed": {"type": "integer", "minimum": 0},
            },
        },
        "outputs": {
            "type": "object",
            "properties": {
                "dir": {"type": "string"},
                "epsilon_rel_grid": {"type": "array",
                                     "items": {"type": "number"}},
                "alpha_c": {"type": ["number", "null"]},
                "storage_T_list_s": {"type": "array",
                                     "items": {"type": "number"}},
                "storage_x0_scales": {"type": "array",
                                      "items": {"type": "number"}},
            },
        },
    },
}


@dataclass(frozen=True)
class RunSpec:
    x0: np.ndarray
    T: float
    N: int | None
    label: str


@dataclass(frozen=True)
class ScenarioBundle:
    path: str
    graph: NetworkGraph
    model: StateSpaceModel
    Q: np.ndarray
    S: np.ndarray
    r: Signal
    p: Signal
    d: Signal
    xn: np.ndarray | None
    u_min: np.ndarray
    u_max: np.ndarray
    runs: tuple
    grid_N: int | None
    kkt_tol: float
    seed: int
    out_dir: str
    epsilon_rel_grid: tuple
    alpha_c: float | None
    storage_T_list: tuple
    storage_x0_scales: tuple

    def scenario_for(self, run: RunSpec) -> OcpScenario:
        return OcpScenario(model=self.model, Q=self.Q, S=self.S, r=self.r,
                           p=self.p, d=self.d, u_min=self.u_min,
                           u_max=self.u_max, T=run.T, x0=run.x0,
                           N=run.N if run.N is not None else self.grid_N,
                           kkt_tol=self.kkt_tol, seed=self.seed)

    def base_scenario(self) -> OcpScenario:
        return self.scenario_for(self.runs[0])


def _expand_q(spec, n):
    if "dense" in spec:
        Q = np.asarray(spec["dense"], dtype=float)
        if Q.shape != (n, n):
            raise ScenarioError(f"Q must be {n}x{n}", "/cost/Q/dense")
        return Q
    if "diagonal" in spec:
        diag = spec["diagonal"]
        diag = np.full(n, float(diag)) if np.ndim(diag) == 0 \
            else np.asarray(diag, dtype=float)
        if diag.shape != (n,):
            raise ScenarioError(f"diagonal must have {n} entries",
                                "/cost/Q/diagonal")
        return np.diag(diag)
    raise ScenarioError("Q needs 'diagonal' or 'dense'", "/cost/Q")


def load_scenario(path) -> ScenarioBundle:
    """Parse and validate a scenario file; raises ScenarioError carrying a
    JSON-pointer-style path on any schema or consistency violation."""
    path = str(path)
    try:
        raw = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ScenarioError(f"scenario file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"invalid JSON: {exc}") from None
    try:
        jsonschema.validate(raw, SCHEMA)
    except jsonschema.ValidationError as exc:
        pointer = "/" + "/".join(str(p) for p in exc.absolute_path)
        raise ScenarioError(exc.message, pointer) from None

    gsec = raw["graph"]
    vertices = [Vertex(id=v["id"], mass=float(v.get("mass_kg", 1.0)),
                       loss=float(v.get("loss_W_per_K", 1.0)),
                       role=v.get("role", "plain"))
                for v in gsec["vertices"]]
    edges = [Edge(tail=e["tail"], head=e["head"],
                  flow=float(e["flow_kg_per_s"])) for e in gsec["edges"]]
    try:
        graph = NetworkGraph(vertices, edges)
        model = assemble_model(graph)
    except ValidationError as exc:
        raise ScenarioError(str(exc), "/graph") from None

    n, m, w = model.n, model.m, model.w
    csec = raw["cost"]
    Q = _expand_q(csec["Q"], n)
    if csec["S"] == "B_transpose":
        S = model.B.T.copy()
    else:
        S = np.asarray(csec["S"]["dense"], dtype=float)
        if S.shape != (m, n):
            raise ScenarioError(f"S must be {m}x{n}", "/cost/S/dense")
    xn = None
    if "xn_K" in csec:
        xn = np.asarray(csec["xn_K"], dtype=float)
        if xn.shape != (n,):
            raise ScenarioError(f"xn_K must have {n} entries", "/cost/xn_K")
    if csec["r"] == "minus_Q_xn":
        if xn is None:
            raise ScenarioError("r shorthand 'minus_Q_xn' needs cost/xn_K",
                                "/cost/r")
        r = const(-Q @ xn, dim=n)
    else:
        r = _parse_signal(csec["r"], n, "/cost/r")
    p = _parse_signal(csec["p"], m, "/cost/p")
    d = _parse_signal(csec["d"], w, "/cost/d")

    bsec = raw["bounds"]
    u_min = np.asarray(bsec["u_min_W"], dtype=float)
    u_max = np.asarray(bsec["u_max_W"], dtype=float)
    if u_min.shape != (m,) or u_max.shape != (m,):
        raise ScenarioError(f"bounds must have {m} entries (one per producer)",
                            "/bounds")
    if np.any(u_min > u_max):
        raise ScenarioError("u_min_W exceeds u_max_W", "/bounds")

    runs = []
    for i, rspec in enumerate(raw["runs"]):
        x0spec = rspec["x0"]
        if "vector_K" in x0spec:
            x0 = np.asarray(x0spec["vector_K"], dtype=float)
            if x0.shape != (n,):
                raise ScenarioError(f"x0 vector must have {n} entries",
                                    f"/runs/{i}/x0/vector_K")
            label = f"x0vec{i}"
        elif "scale_xn" in x0spec:
            if xn is None:
                raise ScenarioError("scale_xn needs cost/xn_K",
                                    f"/runs/{i}/x0")
            scale = float(x0spec["scale_xn"])
            x0 = scale * xn
            label = f"{scale:.2f}xn"
        else:
            raise ScenarioError("x0 needs 'scale_xn' or 'vector_K'",
                                f"/runs/{i}/x0")
        T = float(rspec["horizon_s"])
        span = f"T{T / 3600:g}h" if T >= 3600 else f"T{T:g}s"
        runs.append(RunSpec(x0=x0, T=T, N=rspec.get("N"),
                            label=f"{span}_{label}"))

    nsec = raw.get("numerics", {})
    osec = raw.get("outputs", {})
    return ScenarioBundle(
        path=path, graph=graph, model=model, Q=Q, S=S, r=r, p=p, d=d, xn=xn,
        u_min=u_min, u_max=u_max, runs=tuple(runs),
        grid_N=nsec.get("N"), kkt_tol=float(nsec.get("kkt_tol", 1e-9)),
        seed=int(nsec.get("seed", 0)),
        out_dir=osec.get("dir", "out"),
        epsilon_rel_grid=tuple(osec.get("epsilon_rel_grid",
                                        [1.0, 2.0, 5.0, 10.0, 50.0])),
        alpha_c=osec.get("alpha_c"),
        storage_T_list=tuple(osec.get("storage_T_list_s", [])),
        storage_x0_scales=tuple(osec.get("storage_x0_scales", [])),
    )


def _parse_signal(spec, dim, pointer) -> Signal:
    try:
        return from_json_terms(spec, dim)
    except ValidationError as exc:
        raise ScenarioError(str(exc), pointer) from None


def format_float(x: float) -> str:
    return f"{x:.17e}"


def write_csv(path, header, columns) -> None:
    """Write columns (1-d arrays of equal length) in full double precision,
    comma separated, with a single header row."""
    columns = [np.asarray(c, dtype=float) for c in columns]
    length = columns[0].shape[0]
    if any(c.shape != (length,) for c in columns):
        raise ValidationError("csv columns must have equal length")
    lines = [",".join(header)]
    for i in range(length):
        lines.append(",".join(format_float(c[i]) for c in columns))
    Path(path).write_text("\n".join(lines) + "\n")


def read_csv(path):
    """Read one of our CSVs back: returns (header list, dict of columns)."""
    text = Path(path).read_text().strip().split("\n")
    header = text[0].split(",")
    data = np.array([[float(v) for v in line.split(",")]
                     for line in text[1:]])
    return header, {name: data[:, i] for i, name in enumerate(header)}
