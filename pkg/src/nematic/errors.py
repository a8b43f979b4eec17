"""Exception types raised across the package."""


class NematicError(Exception):
    """Base class for all package errors."""


class NonPhysicalInput(NematicError, ValueError):
    """A Q-tensor lies outside (or too close to the edge of) the physical triangle."""


class NoConvergence(NematicError, RuntimeError):
    pass


class QuadratureUnderResolved(NematicError, ValueError):
    pass


class BlowUp(NematicError, FloatingPointError):
    pass


class ConfigMismatch(NematicError, ValueError):
    pass


class NonZeroMean(NematicError, ValueError):
    pass


class InsufficientRecords(NematicError, ValueError):
    pass


class PhysicalityViolated(NematicError):
    def __init__(self, message, t=None, index=None):
        super().__init__(message)
        self.t = t
        self.index = index


class ParseError(NematicError, ValueError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class ValidationError(NematicError, ValueError):
    def __init__(self, field, message=""):
        super().__init__(f"{field}: {message}" if message else field)
        self.field = field


class CorruptFile(NematicError, IOError):
    pass


class GridMismatch(NematicError, ValueError):
    pass
