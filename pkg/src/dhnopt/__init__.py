"""Economic optimal control of district heating networks.

Subpackages:

- :mod:`dhnopt.network` — pipe-graph models, LTI assembly, stability certificates
- :mod:`dhnopt.signals` — closed-form time signals with exact derivatives
- :mod:`dhnopt.pencil` — singular-arc optimality pencil, Weierstrass form,
  closed-form time-varying turnpike
- :mod:`dhnopt.ocp` — exact-discretization transcription and box-QP solves
- :mod:`dhnopt.pmp` — costates, switching functions, arc classification
- :mod:`dhnopt.diagnostics` — turnpike closeness measures and verdicts
- :mod:`dhnopt.dissipativity` — available-storage and dissipation audits
- :mod:`dhnopt.scenario` / :mod:`dhnopt.cli` — scenario files and the
  command-line pipeline
"""

from .network import (Edge, HurwitzCertificate, NetworkGraph, StateSpaceModel,
                      Vertex, assemble_model, flow_laplacian,
                      hurwitz_certificate, random_flow_network, state_bound)
from .signals import Signal, const, exponential, monomial, sinusoid
from .pencil import (OptimalityPencil, TurnpikeTrajectory,
                     WeierstrassDecomposition, algebraic_part,
                     bounded_particular_solution, build_pencil,
                     check_regularity, dae_residual, switching_residual,
                     weierstrass_decompose)
from .ocp import (OcpScenario, TrajectoryPair, discretize, objective,
                  simulate_zoh, solve)
from .pmp import classify_arcs, costate, switching_functions
from .diagnostics import (deviation, exactness_check,
                          refinement_error_estimate, theta_measure)
from .dissipativity import (available_storage_estimate,
                            fit_penalty_coefficient, rotated_cost, sdi_check)

__version__ = "0.1.0"
