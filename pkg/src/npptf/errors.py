"""Exception hierarchy.

Every error carries a stable ``code`` (used as the CLI's machine-readable
error class) and the ``module`` it originated from.
"""


class NpptfError(Exception):
    code = "error"
    module = "npptf"

    def __init__(self, message, *, module=None):
        super().__init__(message)
        if module is not None:
            self.module = module

    def as_dict(self):
        return {"error": self.code, "module": self.module, "message": str(self)}


class DomainError(NpptfError, ValueError):
    code = "domain_error"


class StructuralError(NpptfError, ValueError):
    code = "structural_error"
    module = "lp"


class LpSolverError(NpptfError, ArithmeticError):
    code = "solver_error"
    module = "lp"


class DataIntegrityError(NpptfError):
    """Observed gains are inconsistent with any physical channel."""

    code = "data_integrity_error"

    def __init__(self, message, *, module=None, pair=None):
        super().__init__(message, module=module)
        self.pair = pair

    def as_dict(self):
        d = super().as_dict()
        if self.pair is not None:
            d["pair"] = [float(v) for v in self.pair]
        return d


class EstimationError(NpptfError):
    code = "estimation_error"
    module = "leakage"


class ConfigError(NpptfError, ValueError):
    code = "config_error"
    module = "cli"
