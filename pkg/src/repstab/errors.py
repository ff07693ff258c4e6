"""Exception hierarchy. Each class carries an exit code used by the CLI."""


class RepstabError(Exception):
    exit_code = 1


class DimensionError(RepstabError, ValueError):
    exit_code = 2


class ContractError(RepstabError, ValueError):
    exit_code = 2


class ValidationError(RepstabError, ValueError):
    exit_code = 2


class ResolutionError(RepstabError, ValueError):
    exit_code = 2


class FitError(RepstabError, ValueError):
    exit_code = 2


class NotNormalError(RepstabError, ValueError):
    exit_code = 2


class SingularityError(RepstabError, ValueError):
    exit_code = 2

    def __init__(self, msg, sigma_min=None):
        super().__init__(msg)
        self.sigma_min = sigma_min


class ClusterEmptyError(RepstabError):
    exit_code = 4

    def __init__(self, msg, distance=None):
        super().__init__(msg)
        self.distance = distance


class InconsistencyError(RepstabError):
    exit_code = 3

    def __init__(self, msg, orphans=()):
        super().__init__(msg)
        self.orphans = list(orphans)


class ChainBreakError(RepstabError):
    exit_code = 4

    def __init__(self, msg, step=None):
        super().__init__(msg)
        self.step = step


class DivergenceError(RepstabError):
    exit_code = 4

    def __init__(self, msg, history=()):
        super().__init__(msg)
        self.history = list(history)


class ReducibilityError(RepstabError):
    exit_code = 3


class NotEquivalentError(RepstabError):
    exit_code = 3


class ModeUnsupportedError(RepstabError):
    exit_code = 5
