"""Exception hierarchy shared by all simulation and oracle modules."""


class LabError(Exception):
    """Base class for every error raised by the laboratory."""

    code = "LAB_ERROR"


class ConfigInvalid(LabError):
    code = "CONFIG_INVALID"

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")


class UnreachableLevel(LabError):
    code = "UNREACHABLE_LEVEL"


class BudgetExceeded(LabError):
    code = "BUDGET_EXCEEDED"


class HeightRunaway(LabError):
    code = "HEIGHT_RUNAWAY"


class StepMismatch(LabError):
    code = "STEP_MISMATCH"


class Divergent(LabError):
    code = "DIVERGENT"


class Explosion(LabError):
    code = "EXPLOSION"
