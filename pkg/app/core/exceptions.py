"""
Error types shared by the numerical core, the services and the CLI.

Every error carries a stable ``code`` that the CLI prints as a prefix on stderr.
"""

from typing import List, Optional


class SglvError(Exception):
    """Base class for all errors raised by the package"""
    code = "E000"

    def __init__(self, message: str):
        super().__init__(message)
        self.message = message

    def __str__(self) -> str:
        return f"[{self.code}] {self.message}"


class DimensionError(SglvError):
    """Array shapes do not agree with the number of species"""
    code = "E100"


class SingularMatrixError(SglvError):
    """A linear system is singular to working tolerance"""
    code = "E101"

    def __init__(self, message: str, pivot: int):
        super().__init__(f"{message} (pivot {pivot})")
        self.pivot = pivot


class ExplosionError(SglvError):
    """A simulated path overflowed; the replicate must be discarded"""
    code = "E110"

    def __init__(self, message: str, step: int):
        super().__init__(f"{message} (step {step})")
        self.step = step


class PositivityError(SglvError):
    """A deterministic path left the positive orthant"""
    code = "E111"


class CollinearityError(SglvError):
    """The regression design is rank deficient"""
    code = "E120"

    def __init__(self, message: str, columns: Optional[List[str]] = None):
        self.columns = list(columns or [])
        if self.columns:
            message = f"{message}: {', '.join(self.columns)}"
        super().__init__(message)


class IngestError(SglvError):
    """A count or taxonomy file does not match its schema"""
    code = "E130"

    def __init__(self, message: str, line: Optional[int] = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class ConfigurationError(SglvError):
    """A run configuration or parameter document is invalid"""
    code = "E140"
