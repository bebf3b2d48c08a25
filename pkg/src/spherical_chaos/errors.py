class AdmissibilityError(ValueError):
    """A denominator of the variational functionals is not positive."""

    def __init__(self, message, location=None):
        super().__init__(message)
        self.location = location


class NumericalFailure(RuntimeError):
    """An optimisation, root find or quadrature did not meet its tolerance."""

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class PreconditionError(ValueError):
    pass


class ConfigurationError(ValueError):
    pass
