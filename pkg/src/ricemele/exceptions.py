"""Exception types raised by the simulation modules."""

__all__ = [
    "ExceptionalPoint",
    "QuadratureError",
    "RegimeError",
    "TailWrapError",
    "DelocalizedError",
    "StepSizeError",
    "ConfigError",
]


class ExceptionalPoint(ArithmeticError):
    """Eigenvalues and eigenvectors of a Bloch block coalesce (or nearly so)."""


class QuadratureError(ArithmeticError):
    """Adaptive quadrature hit its subdivision cap or failed to converge."""


class RegimeError(ValueError):
    """Closed-form phase formulas requested outside their parameter regime."""


class TailWrapError(ValueError):
    """Gaussian envelope too wide for the ring: the antipodal tail is not negligible."""


class DelocalizedError(RuntimeError):
    """Wave packet too spread out to define a centre of mass."""


class StepSizeError(RuntimeError):
    """Integrator sub-step fell below the representable resolution."""


class ConfigError(ValueError):
    """Aggregated configuration problems.

    ``errors`` holds ``(line, field, message)`` tuples; ``line`` is ``None``
    when the problem is not tied to a particular line of the config text.
    """

    def __init__(self, errors):
        self.errors = list(errors)
        lines = []
        for line, name, msg in self.errors:
            where = f"line {line}: " if line is not None else ""
            lines.append(f"{where}{name}: {msg}")
        super().__init__("; ".join(lines))

    def as_records(self):
        return [{"line": line, "field": name, "message": msg} for line, name, msg in self.errors]
