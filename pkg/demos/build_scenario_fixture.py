"""Regenerate the bundled 15-vertex network scenario file.

The network is a flow ring with one chord (vertices are junction/storage
volumes, flows in normalized per-unit-mass units so that all vertex masses
are 1), three producers and three consumers. Prices and extractions follow a
24 h sinusoidal pattern. Running this script rewrites scenarios/dhn15.json.
"""

import json
import math
from pathlib import Path

N_VERTS = 15
PRODUCERS = [0, 5, 10]
CONSUMERS = [2, 7, 12]
Q_RING = 2e-3            # per-unit mass flow on the main ring
Q_CHORD = 0.5e-3         # chord v5 -> v10 (0-indexed 4 -> 9)
KAPPA_PLAIN = 3e-5
KAPPA_CONSUMER = 5e-5
DAY_S = 86400.0


def build():
    vertices = []
    for i in range(N_VERTS):
        role = ("producer" if i in PRODUCERS
                else "consumer" if i in CONSUMERS else "plain")
        kappa = KAPPA_CONSUMER if i in CONSUMERS else KAPPA_PLAIN
        vertices.append({"id": f"v{i + 1}", "mass_kg": 1.0,
                         "loss_W_per_K": kappa, "role": role})
    edges = []
    for i in range(N_VERTS):
        flow = Q_RING - (Q_CHORD if 4 <= i <= 8 else 0.0)
        edges.append({"tail": f"v{i + 1}", "head": f"v{(i + 1) % N_VERTS + 1}",
                      "flow_kg_per_s": flow})
    edges.append({"tail": "v5", "head": "v10", "flow_kg_per_s": Q_CHORD})

    xn = [round(60 + 5 * math.sin(2 * math.pi * k / N_VERTS), 6)
          for k in range(N_VERTS)]
    dbar = -0.0051
    d_terms = [{"type": "const", "value": [dbar] * 3}]
    for j, phase in enumerate([0.0, 1.1, 2.3]):
        amp = [0.0] * 3
        amp[j] = round(0.35 * abs(dbar), 8)
        d_terms.append({"type": "sin", "amplitude": amp,
                        "period_s": DAY_S, "phase_rad": phase})
    p_terms = [{"type": "const", "value": 20.0},
               {"type": "sin", "amplitude": 8.0, "period_s": DAY_S,
                "phase_rad": 0.7}]

    return {
        "graph": {"vertices": vertices, "edges": edges},
        "cost": {
            "Q": {"diagonal": 1000.0},
            "S": "B_transpose",
            "r": "minus_Q_xn",
            "xn_K": xn,
            "p": p_terms,
            "d": d_terms,
        },
        "bounds": {"u_min_W": [0.0, 0.0, 0.0],
                   "u_max_W": [0.04, 0.04, 0.04]},
        "runs": [
            {"x0": {"scale_xn": 0.8}, "horizon_s": 24 * 3600.0},
            {"x0": {"scale_xn": 1.1}, "horizon_s": 24 * 3600.0},
            {"x0": {"scale_xn": 0.8}, "horizon_s": 29 * 3600.0},
            {"x0": {"scale_xn": 1.1}, "horizon_s": 29 * 3600.0},
        ],
        "numerics": {"N": None, "kkt_tol": 1e-9, "seed": 20240401},
        "outputs": {
            "dir": "out",
            "epsilon_rel_grid": [1.0, 2.0, 5.0, 10.0, 50.0],
            "alpha_c": None,
            "storage_T_list_s": [6 * 3600.0, 12 * 3600.0, 24 * 3600.0,
                                 29 * 3600.0, 48 * 3600.0],
            "storage_x0_scales": [0.8, 0.9, 1.0, 1.1, 1.2],
        },
    }


if __name__ == "__main__":
    out = Path(__file__).resolve().parents[1] / "scenarios" / "dhn15.json"
    out.write_text(json.dumps(build(), indent=2) + "\n")
    print(f"wrote {out}")
