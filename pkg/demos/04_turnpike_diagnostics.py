"""Measure how exactly optimal runs track the turnpike.

Solves the (initial state, horizon) matrix of the bundled small scenario,
computes deviation series against the closed-form turnpike, the occupation
measure mu{t : e(t) > eps} over an epsilon ladder, entry/exit times, and
the horizon-independence of the measure.
"""

import numpy as np

from dhnopt import bounded_particular_solution, solve, weierstrass_decompose
from dhnopt.diagnostics import (exactness_check, pairwise_coincidence,
                                refinement_error_estimate)
from dhnopt.scenario import load_scenario

bundle = load_scenario("scenarios/twocycle.json")
pencil = bundle.base_scenario().pencil()
turnpike = bounded_particular_solution(weierstrass_decompose(pencil), pencil,
                                       u_box=(bundle.u_min, bundle.u_max))

pairs = {run.label: solve(bundle.scenario_for(run)) for run in bundle.runs}
eps_num = 10.0 * refinement_error_estimate(bundle.base_scenario())
print(f"numerical-zero epsilon from the N vs 2N refinement study: "
      f"{eps_num:.3e}")

report = exactness_check(pairs, turnpike, eps_num,
                         epsilon_grid=eps_num * np.array([1.0, 2.0, 5.0, 10.0]))
for label, verdict in report.verdicts:
    print(f"\n{label}: {'EXACT' if verdict.exact else 'NOT EXACT'}")
    print(f"  on-turnpike interval [{verdict.entry_time:7.1f}, "
          f"{verdict.exit_time:7.1f}] s "
          f"({verdict.interval_fraction * 100:.1f}% of horizon)")
    print(f"  sup deviation on it: {verdict.sup_on_interval:.3e}")
    mus = ", ".join(f"mu({m.epsilon:.2e})={m.measure:.1f}s"
                    for m in report.measures[label])
    print(f"  occupation measures: {mus}")

print(f"\nhorizon-independent occupation measure: "
      f"{report.horizon_independent}")
gaps = pairwise_coincidence(pairs, report)
print(f"max pairwise gap on overlapping middles: {max(gaps.values()):.3e} "
      f"(<= eps: {max(gaps.values()) <= eps_num})")
