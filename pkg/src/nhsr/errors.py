class NhsrError(Exception):
    pass


class ConfigError(NhsrError, ValueError):
    """Invalid parameter; ``field`` names the offending input."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


class SolverError(NhsrError, RuntimeError):
    """Numerical failure. Carries enough context to reproduce the case."""

    def __init__(self, message: str, *, lam=None, seed=None, index=None):
        super().__init__(message)
        self.lam = lam
        self.seed = seed
        self.index = index


class EpCountError(NhsrError, RuntimeError):
    def __init__(self, message: str, *, deficit: int, candidates=()):
        super().__init__(message)
        self.deficit = deficit
        self.candidates = list(candidates)
