"""Exception hierarchy shared by all modules."""


class MinWidthError(Exception):
    """Base class for every error raised by minwidth_lab."""


class DegenerateInput(MinWidthError):
    pass


class DomainError(MinWidthError, ValueError):
    pass


class CapsOverlap(MinWidthError):
    pass


class EmptyBody(MinWidthError):
    pass


class NumericalFailure(MinWidthError):
    pass


class MeshFailure(MinWidthError):
    pass


class SolverDiverged(MinWidthError):
    pass


class NoDirichlet(MinWidthError):
    pass


class DegenerateEndpoint(MinWidthError):
    pass


class QuadratureNotConverged(MinWidthError):
    pass


class UnknownExperiment(MinWidthError):
    pass


class ConfigInvalid(MinWidthError):
    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))
