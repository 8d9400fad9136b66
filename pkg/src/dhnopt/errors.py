"""Exception types shared across the toolkit."""


class ValidationError(ValueError):
    """Input data violates a structural invariant (bad graph, bad dimensions, ...)."""


class ScenarioError(ValidationError):
    """Scenario file is malformed; carries a JSON-pointer-style path to the offender."""

    def __init__(self, message, pointer=""):
        self.pointer = pointer
        super().__init__(f"{pointer}: {message}" if pointer else message)


class NumericalError(RuntimeError):
    """A numerical procedure failed (singular pencil, resonance, no convergence)."""


class RegularityError(NumericalError):
    """The pencil s*D - M is singular for every s, so the singular-arc system has
    no unique solution (the regularity requirement on the optimality pencil fails)."""


class ResonanceError(NumericalError):
    """A forcing harmonic sits (numerically) on an eigenvalue of the dynamic block;
    no bounded particular solution can be selected."""


class DecompositionError(NumericalError):
    """Canonical-form computation is too ill-conditioned to be trusted."""


class ConvergenceError(NumericalError):
    """Iterative solver exceeded its iteration budget."""
