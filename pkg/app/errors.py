"""
Jerarquía de errores del runtime TSIA.

Cada error lleva un ``code`` estable (el nombre que aparece en los
diagnósticos y en los tests) y, cuando se conoce, la posición en el
fuente. El CLI decide el código de salida según la clase:

- ``UsageError`` y sus subclases → salida 2 (uso / archivos)
- cualquier otro ``TSIAError`` → salida 1 (error del programa)
"""

from dataclasses import dataclass
from typing import List, Optional


# ============================================================================
# DIAGNÓSTICOS
# ============================================================================

@dataclass(frozen=True)
class Diagnostic:
    """Un diagnóstico del frontend: error o advertencia con posición"""
    code: str
    message: str
    line: int = 0
    col: int = 0
    severity: str = "error"

    def format(self, filename: str = "<input>") -> str:
        """Formato ``file:line:col: code: message``"""
        return f"{filename}:{self.line}:{self.col}: {self.code}: {self.message}"


# ============================================================================
# BASE
# ============================================================================

class TSIAError(Exception):
    """Error base del runtime. ``code`` identifica el tipo de falla."""

    code = "TSIAError"

    def __init__(self, message: str = "", line: Optional[int] = None, col: Optional[int] = None):
        super().__init__(message)
        self.message = message
        self.line = line
        self.col = col

    def diagnostic(self) -> Diagnostic:
        return Diagnostic(self.code, self.message, self.line or 0, self.col or 0)

    def __str__(self) -> str:
        if self.line is not None:
            return f"{self.line}:{self.col}: {self.code}: {self.message}"
        return f"{self.code}: {self.message}"


class UsageError(TSIAError):
    """Errores de uso o de archivos (salida 2)"""
    code = "UsageError"


# ============================================================================
# FRONTEND
# ============================================================================

class IllegalCharacter(TSIAError):
    code = "IllegalCharacter"


class TSIASyntaxError(TSIAError):
    """Error de sintaxis con el conjunto de tokens esperados"""

    code = "SyntaxError"

    def __init__(self, message: str, line: int, col: int, expected: Optional[List[str]] = None):
        self.expected = sorted(set(expected or []))
        if self.expected:
            message = f"{message} (se esperaba: {', '.join(self.expected)})"
        super().__init__(message, line, col)


class MissingGroupSeparator(TSIAError):
    code = "MissingGroupSeparator"


class UndefinedName(TSIAError):
    code = "UndefinedName"


class ArityMismatch(TSIAError):
    code = "ArityMismatch"


class OutNeverProduced(TSIAError):
    code = "OutNeverProduced"


class DelItemAccessed(TSIAError):
    code = "DelItemAccessed"


class DuplicateDefinition(TSIAError):
    code = "DuplicateDefinition"


class InvalidArgument(TSIAError):
    code = "InvalidArgument"


class InAssigned(TSIAError):
    code = "InAssigned"


class CallResultAccessed(TSIAError):
    code = "CallResultAccessed"


class CheckFailed(TSIAError):
    """El chequeo semántico encontró uno o más errores"""

    code = "CheckFailed"

    def __init__(self, diagnostics: List[Diagnostic]):
        self.diagnostics = list(diagnostics)
        first = self.diagnostics[0] if self.diagnostics else None
        message = f"{len(self.diagnostics)} error(es) de chequeo"
        if first is not None:
            message += f"; primero: {first.code}: {first.message}"
        super().__init__(message)

    @property
    def codes(self) -> List[str]:
        return [d.code for d in self.diagnostics]


# ============================================================================
# ITEM STORE
# ============================================================================

class NotResolved(TSIAError):
    code = "NotResolved"


class NonPositiveLength(TSIAError):
    code = "NonPositiveLength"


class ConflictingRecommit(TSIAError):
    code = "ConflictingRecommit"


class OutOfOrderCommit(TSIAError):
    code = "OutOfOrderCommit"


class AccessViolation(TSIAError):
    code = "AccessViolation"


# ============================================================================
# TASK POOL
# ============================================================================

class ResponsibilityGap(TSIAError):
    code = "ResponsibilityGap"


class PoolCapacityExceeded(TSIAError):
    code = "PoolCapacityExceeded"


class PoolStalled(TSIAError):
    code = "PoolStalled"


# ============================================================================
# EVALUADOR
# ============================================================================

class ReadOfUnresolved(TSIAError):
    code = "ReadOfUnresolved"


class MissingOut(TSIAError):
    code = "MissingOut"


class DivisionByZero(TSIAError):
    code = "DivisionByZero"


class IndexOutOfBounds(TSIAError):
    code = "IndexOutOfBounds"


class TypeMismatch(TSIAError):
    code = "TypeMismatch"


class StackBudgetExceeded(TSIAError):
    code = "StackBudgetExceeded"


# ============================================================================
# EJECUTORES Y E/S
# ============================================================================

class StalledForever(TSIAError):
    code = "StalledForever"


class InvalidPlan(UsageError):
    code = "InvalidPlan"


class MalformedRecord(UsageError):
    code = "MalformedRecord"

    def __init__(self, message: str, line: int):
        super().__init__(message, line, 1)


class MissingFile(UsageError):
    code = "MissingFile"


class IoFailure(UsageError):
    code = "IoFailure"
