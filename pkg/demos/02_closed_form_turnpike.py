"""Compute the exact time-varying turnpike of an economic control problem.

The first-order optimality system on singular arcs is a constant-coefficient
DAE in (x, lambda, u). Its pencil is decomposed into Weierstrass canonical
form; with periodic prices/extractions the unique solution bounded on the
whole real line is assembled harmonic-by-harmonic in closed form. No
optimal control problem is solved anywhere in this script.
"""

import numpy as np

from dhnopt import (bounded_particular_solution, check_regularity,
                    dae_residual, switching_residual, weierstrass_decompose)
from dhnopt.scenario import load_scenario

bundle = load_scenario("scenarios/twocycle.json")
pencil = bundle.base_scenario().pencil()

cert = check_regularity(pencil, seed=bundle.seed)
print(f"pencil size {pencil.size} (n={pencil.n}, m={pencil.m})")
print(f"regular: {cert.regular}  (max equilibrated |det| "
      f"{cert.ratios.max():.3e} vs threshold {cert.threshold:.3e})")

decomp = weierstrass_decompose(pencil)
print(f"\ndynamic block      : {decomp.n_finite}")
print(f"nilpotent block    : {decomp.n_infinite}")
print(f"nilpotency index   : {decomp.nu}  "
      f"(forcing derivatives up to order {decomp.nu - 1} enter)")
print(f"reconstruction err : "
      f"{decomp.reconstruction_error(pencil, np.linspace(-2, 2, 5)):.2e}")

turnpike = bounded_particular_solution(
    decomp, pencil, u_box=(bundle.u_min, bundle.u_max))

tt = np.linspace(0.0, 25.0, 6)
x, lam, u = turnpike.eval(tt)
print("\n   t     xbar(1)   xbar(2)   ubar     lambda(1)")
for k, t in enumerate(tt):
    print(f"{t:6.1f}  {x[k, 0]:8.4f}  {x[k, 1]:8.4f}  {u[k, 0]:7.4f}  "
          f"{lam[k, 0]:+9.4f}")

grid = np.linspace(0.0, 60.0, 1000)
print(f"\nDAE residual on 1000 points      : "
      f"{dae_residual(pencil, turnpike, grid):.2e}")
print(f"switching residual on 1000 points: "
      f"{switching_residual(pencil, turnpike, grid):.2e}")
print(f"input interiority margin         : {turnpike.interiority_margin:.4f}")

# the same object, computed once more through a randomized ordering of the
# canonical form, agrees to round-off: the bounded solution is unique
alt = bounded_particular_solution(
    weierstrass_decompose(pencil, ordering_seed=42), pencil)
gap = np.abs(turnpike.xi.eval(grid) - alt.xi.eval(grid)).max()
print(f"independent recomputation gap    : {gap:.2e}")
