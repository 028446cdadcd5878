"""
Exception hierarchy for semispec
"""


class SemispecError(Exception):
    """Base class for every error raised by semispec"""


class MatrixError(SemispecError):
    """Non-square, non-finite or dimension-mismatched input"""


class EigenDecompositionError(SemispecError):
    """Eigen-iteration or Schur reordering failed"""


class ExpmOverflowError(SemispecError):
    """Matrix exponential overflowed"""


class NearSingularError(SemispecError):
    """Resolvent form requested too close to the spectrum"""


class PreconditionError(SemispecError):
    """Construction hypothesis does not hold for the given input"""

    def __init__(self, message: str, defect: float = float("nan")):
        super().__init__(message)
        self.defect = defect


class GeneratorFormatError(SemispecError):
    """Malformed generator file"""


class SchemaError(GeneratorFormatError):
    """Generator file parses but violates the schema"""


class ConfigError(SemispecError):
    """Invalid run configuration"""
