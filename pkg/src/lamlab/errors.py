"""Exception hierarchy. CLI maps these onto exit codes (2 numerical, 3 validation)."""


class LamlabError(Exception):
    pass


class NumericalError(LamlabError):
    """A numerical procedure failed to converge or lost its certificates."""


class ValidationError(LamlabError):
    """Structural/axiom validation failed (carries diagnostics where useful)."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class ObstructedPullback(ValidationError):
    """No valid preimage pairing exists for the requested class."""


class AmbiguousPullback(ValidationError):
    """Several valid preimage pairings exist; the caller must disambiguate."""

    def __init__(self, message, candidates):
        super().__init__(message)
        self.candidates = candidates
