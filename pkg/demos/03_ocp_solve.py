"""Solve a finite-horizon economic control problem and inspect its arcs.

The dynamics are discretized exactly (zero-order hold through an augmented
matrix exponential, including the closed-form disturbance convolution), the
running cost by composite Simpson on the exact intra-interval states; the
condensed box QP is solved by projected Newton.
"""

import numpy as np

from dhnopt import costate, classify_arcs, objective, solve, switching_functions
from dhnopt.pmp import default_band
from dhnopt.scenario import load_scenario

bundle = load_scenario("scenarios/twocycle.json")
run = bundle.runs[0]
scenario = bundle.scenario_for(run)
print(f"horizon {scenario.T:.0f} s, grid N = {scenario.grid_size}, "
      f"box [{scenario.u_min[0]}, {scenario.u_max[0]}]")

pair = solve(scenario)
diag = pair.diagnostics
print(f"\nobjective          : {pair.objective:.6e}")
print(f"iterations         : {diag.iterations}")
print(f"scaled KKT residual: {diag.kkt_residual:.2e}")
print(f"reduced-Hessian min eigenvalue: {diag.reduced_hessian_min_eig:.3e} "
      f"({'nonconvex, multistarted' if diag.nonconvex else 'convex'})")
print(f"exact one-step defect: {pair.step_residual():.2e}")
print(f"objective recomputed by Simpson on the dense trajectory: "
      f"{objective(pair):.6e}")

adjoint = costate(pair)
print(f"\ntransversality ||lambda(T)|| = {adjoint.terminal_residual:.2e}")

s = switching_functions(pair, adjoint)
mult = diag.cell_multipliers
band = default_band(mult, pair)
part = classify_arcs(mult, pair.midpoint_times(), band)
print(f"classification band {band:.2e}; arcs of the single input:")
for arc in part.arcs[0]:
    cells = arc.last_index - arc.first_index + 1
    print(f"  {arc.label:12s} [{arc.start:6.1f}, {arc.end:6.1f}] s "
          f"({cells} cells)")

print("\nfirst/last rows (t, x1, x2, u, s):")
for j in list(range(3)) + list(range(pair.N - 2, pair.N + 1)):
    uj = pair.U[min(j, pair.N - 1), 0]
    print(f"  {pair.times[j]:6.1f}  {pair.X[j, 0]:7.4f}  {pair.X[j, 1]:7.4f}"
          f"  {uj:7.4f}  {s[j, 0]:+9.4f}")
