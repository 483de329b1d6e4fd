"""
Analizador léxico del lenguaje de tareas TSIA.

Convierte el texto fuente en una secuencia de tokens con línea y columna.
Los comentarios ``//`` se descartan hasta el fin de línea.
"""

import string
from dataclasses import dataclass, field
from typing import Iterator, List

from app.errors import IllegalCharacter


KEYWORDS = {"int", "real", "del", "record", "if", "else", "return"}

# Sólo ASCII
DIGITS = frozenset(string.digits)
IDENT_START = frozenset(string.ascii_letters + "_")
IDENT_CHARS = IDENT_START | DIGITS

# Operadores de dos caracteres primero
OPERATORS = [
    ("++", "incr"),
    ("--", "decr"),
    ("<=", "le"),
    (">=", "ge"),
    ("==", "eqeq"),
    ("!=", "ne"),
    ("(", "lparen"),
    (")", "rparen"),
    ("[", "lbracket"),
    ("]", "rbracket"),
    ("{", "lbrace"),
    ("}", "rbrace"),
    (",", "comma"),
    (";", "semi"),
    (":", "colon"),
    (".", "dot"),
    ("=", "eq"),
    ("+", "plus"),
    ("-", "minus"),
    ("*", "star"),
    ("/", "slash"),
    ("<", "lt"),
    (">", "gt"),
]


@dataclass(frozen=True)
class Token:
    """Token con su posición (la posición no participa de la igualdad)"""
    kind: str
    text: str
    line: int = field(default=0, compare=False)
    col: int = field(default=0, compare=False)

    def __repr__(self) -> str:
        if self.kind in ("ident", "int", "real", "kw"):
            return f"{self.kind} {self.text}"
        return self.kind


def _scan_number(source: str, i: int) -> int:
    """Devuelve el índice final de un literal numérico que empieza en ``i``"""
    n = len(source)
    j = i
    while j < n and source[j] in DIGITS:
        j += 1
    if j < n and source[j] == "." and not source.startswith("..", j):
        j += 1
        while j < n and source[j] in DIGITS:
            j += 1
    if j < n and source[j] in "eE":
        k = j + 1
        if k < n and source[k] in "+-":
            k += 1
        if k < n and source[k] in DIGITS:
            while k < n and source[k] in DIGITS:
                k += 1
            j = k
    return j


def iter_tokens(source: str) -> Iterator[Token]:
    """
    Genera los tokens de ``source`` uno a uno.

    Raises:
        IllegalCharacter: si aparece un carácter fuera del lenguaje
    """
    i = 0
    line, line_start = 1, 0
    n = len(source)

    while i < n:
        ch = source[i]
        col = i - line_start + 1

        if ch == "\n":
            line += 1
            line_start = i + 1
            i += 1
            continue
        if ch in " \t\r\f":
            i += 1
            continue
        if source.startswith("//", i):
            while i < n and source[i] != "\n":
                i += 1
            continue

        if ch in IDENT_START:
            j = i + 1
            while j < n and source[j] in IDENT_CHARS:
                j += 1
            word = source[i:j]
            yield Token("kw" if word in KEYWORDS else "ident", word, line, col)
            i = j
            continue

        if ch in DIGITS:
            j = _scan_number(source, i)
            text = source[i:j]
            kind = "real" if any(c in text for c in ".eE") else "int"
            yield Token(kind, text, line, col)
            i = j
            continue

        for op, kind in OPERATORS:
            if source.startswith(op, i):
                yield Token(kind, op, line, col)
                i += len(op)
                break
        else:
            raise IllegalCharacter(f"carácter no permitido {ch!r}", line, col)


def tokenize(source: str) -> List[Token]:
    """Tokeniza el fuente completo. Un texto vacío produce una lista vacía."""
    return list(iter_tokens(source))
