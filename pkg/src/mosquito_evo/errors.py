"""Exception hierarchy shared by all modules."""


class MosquitoEvoError(Exception):
    pass


# numerics
class NonConvergence(MosquitoEvoError):
    pass


class NoConvergence(NonConvergence):
    pass


class SingularMatrix(MosquitoEvoError):
    pass


class SingularJacobian(SingularMatrix):
    pass


class DefectiveEigenvector(MosquitoEvoError):
    pass


# dynamics
class InvalidParameter(MosquitoEvoError, ValueError):
    pass


class DegenerateParameters(MosquitoEvoError):
    pass


class NotAFixedPoint(MosquitoEvoError):
    pass


class Overflow(MosquitoEvoError):
    """Raised when an orbit leaves the representable range.

    ``trajectory`` holds the states computed before the overflow.
    """

    def __init__(self, message, trajectory=None):
        super().__init__(message)
        self.trajectory = trajectory


# algebra
class DomainViolation(MosquitoEvoError, ValueError):
    pass


class ClosureFailure(MosquitoEvoError):
    pass


# operator
class OneInSpectrum(MosquitoEvoError):
    pass


class LambdaIsOne(MosquitoEvoError, ValueError):
    pass


class SlowConvergence(MosquitoEvoError):
    def __init__(self, message, gap=None, iterations=None):
        super().__init__(message)
        self.gap = gap
        self.iterations = iterations


# cli
class ParseError(MosquitoEvoError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class ValidationError(MosquitoEvoError):
    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))
