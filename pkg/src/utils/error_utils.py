from typing import Iterable, List, Optional


class WavelabError(Exception):
    """
    Base class of every error raised by the package.

    `code` is the machine-readable identifier written to JSON reports,
    `exit_code` is what the CLI returns when the error ends a command.
    """

    code: str = "error"
    exit_code: int = 1

    def to_dict(self) -> dict:
        return {"code": self.code, "message": str(self)}


class InvalidArgumentError(WavelabError, ValueError):
    code = "invalid-argument"
    exit_code = 2


class UnsupportedSpaceError(WavelabError):
    code = "unsupported-space"
    exit_code = 2


class CompatibilityViolationError(WavelabError):
    code = "compatibility-violation"
    exit_code = 2


class InvalidStateError(WavelabError):
    code = "invalid-state"
    exit_code = 2


class InvalidPairError(WavelabError):
    code = "invalid-pair"
    exit_code = 2


class ConfigError(WavelabError):
    """
    Validation failure of a run configuration.

    Carries every issue found, not only the first one.
    """

    code = "config-invalid"
    exit_code = 2

    def __init__(self, issues: Iterable["ConfigIssue"]) -> None:
        self.issues: List[ConfigIssue] = list(issues)
        super().__init__("; ".join(str(i) for i in self.issues) or "invalid configuration")

    def to_dict(self) -> dict:
        data = super().to_dict()
        data["issues"] = [i.to_dict() for i in self.issues]
        return data


class ConfigIssue:
    """One configuration problem, located by line number (1-based, 0 if unknown)."""

    def __init__(self, key: str, message: str, line: int = 0, code: str = "config-invalid") -> None:
        self.key = key
        self.message = message
        self.line = line
        self.code = code

    def __str__(self) -> str:
        where = f"line {self.line}" if self.line else "document"
        return f"{where}: '{self.key}': {self.message}"

    def to_dict(self) -> dict:
        return {"key": self.key, "message": self.message, "line": self.line, "code": self.code}


class AssertionFailure(WavelabError):
    code = "assertion-failed"
    exit_code = 3


class InstabilityError(WavelabError):
    code = "instability"
    exit_code = 3


class SolverFailureError(WavelabError):
    """Iterative or direct solve that did not meet its residual contract."""

    code = "solver-failure"
    exit_code = 4

    def __init__(self, message: str, iterations: int = 0, residual: Optional[float] = None) -> None:
        super().__init__(message)
        self.iterations = iterations
        self.residual = residual

    def to_dict(self) -> dict:
        data = super().to_dict()
        data["iterations"] = self.iterations
        data["residual"] = self.residual
        return data


class OutputError(WavelabError):
    code = "io-failure"
    exit_code = 1

    def __init__(self, message: str, path: str = "") -> None:
        super().__init__(f"{message} ({path})" if path else message)
        self.path = path

    def to_dict(self) -> dict:
        data = super().to_dict()
        data["path"] = self.path
        return data
