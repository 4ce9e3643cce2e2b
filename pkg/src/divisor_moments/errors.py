"""Exception types shared across the package.

Each carries enough structure for the CLI to emit a machine-readable
error record (code, message, offending parameter).
"""


class DivisorMomentsError(Exception):
    code = "error"

    def __init__(self, message, parameter=None):
        super().__init__(message)
        self.message = message
        self.parameter = parameter

    def record(self):
        return {"code": self.code, "message": self.message, "parameter": self.parameter}


class UsageError(DivisorMomentsError, ValueError):
    code = "usage"


class RangeError(DivisorMomentsError, ValueError):
    code = "range"


class OverflowDetected(DivisorMomentsError, ArithmeticError):
    code = "overflow"


class BudgetExceeded(DivisorMomentsError, RuntimeError):
    code = "budget"


class AllocationError(DivisorMomentsError, MemoryError):
    code = "allocation"

    def __init__(self, message, required_bytes, parameter=None):
        super().__init__(message, parameter)
        self.required_bytes = required_bytes

    def record(self):
        rec = super().record()
        rec["required_bytes"] = self.required_bytes
        return rec


class MissingConstants(DivisorMomentsError, LookupError):
    code = "missing_constants"
