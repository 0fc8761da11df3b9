class BranchLabError(Exception):
    """Base class for every error raised by the laboratory."""


class LatticeError(BranchLabError):
    pass


class GateSetError(BranchLabError):
    pass


class DecompositionError(BranchLabError):
    pass


class ObservableError(BranchLabError):
    pass


class OracleError(BranchLabError):
    pass


class SearchLimitExceeded(OracleError):
    """Raised by a search when its stored-state limit is reached.

    `exhausted_cost` is the largest cost whose circuits were all examined.
    """

    def __init__(self, message: str, exhausted_cost: int, explored: int):
        super().__init__(message)
        self.exhausted_cost = exhausted_cost
        self.explored = explored


class ScenarioError(BranchLabError):
    def __init__(self, message: str, diagnostics=None):
        super().__init__(message)
        self.diagnostics = list(diagnostics or [])
