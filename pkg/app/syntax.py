"""
Árbol sintáctico del lenguaje TSIA y su impresión como texto fuente.

Los nodos son dataclasses; la posición (``line``/``col``) y las anotaciones
que agrega el chequeo semántico quedan fuera de la comparación, de modo que
dos programas son iguales si y sólo si su estructura lo es.
"""

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple, Union


IN, INOUT, OUT = 0, 1, 2
GROUP_NAMES = ("in", "inout", "out")
SCALAR_TYPES = ("int", "real")
BUILTINS = {"abs": 1}


def _pos():
    return field(default=0, compare=False, repr=False)


# ============================================================================
# EXPRESIONES
# ============================================================================

@dataclass
class IntLit:
    value: int
    line: int = _pos()
    col: int = _pos()


@dataclass
class RealLit:
    value: float
    line: int = _pos()
    col: int = _pos()


@dataclass
class Name:
    name: str
    line: int = _pos()
    col: int = _pos()


@dataclass
class Index:
    """Acceso a elemento; ``a(i)`` y ``a[i]`` se normalizan a este nodo"""
    base: str
    index: "Expr"
    line: int = _pos()
    col: int = _pos()


@dataclass
class Range:
    """Rango inclusivo ``a[lo:hi]``; sólo válido como argumento de llamada"""
    base: str
    lo: "Expr"
    hi: "Expr"
    line: int = _pos()
    col: int = _pos()


@dataclass
class Unary:
    op: str
    operand: "Expr"
    line: int = _pos()
    col: int = _pos()


@dataclass
class Binary:
    op: str
    left: "Expr"
    right: "Expr"
    line: int = _pos()
    col: int = _pos()


@dataclass
class IncDec:
    """``++x``, ``--x``, ``x++`` o ``x--`` sobre un escalar entero"""
    op: str
    prefix: bool
    target: str
    line: int = _pos()
    col: int = _pos()


@dataclass
class Apply:
    """Aplicación de una función builtin (``abs``)"""
    func: str
    args: List["Expr"]
    line: int = _pos()
    col: int = _pos()


Expr = Union[IntLit, RealLit, Name, Index, Range, Unary, Binary, IncDec, Apply]
LOCATIONS = (Name, Index, Range)
COMPARISONS = ("<", "<=", ">", ">=", "==", "!=")


# ============================================================================
# SENTENCIAS
# ============================================================================

@dataclass
class Declarator:
    """Un nombre declarado: ``x``, ``x = e``, ``a[n]`` o ``a[lo:hi]``"""
    name: str
    lo: Optional[Expr] = None
    hi: Optional[Expr] = None
    init: Optional[Expr] = None
    line: int = _pos()
    col: int = _pos()

    @property
    def is_array(self) -> bool:
        return self.hi is not None


@dataclass
class LocalDecl:
    type: str
    declarators: List[Declarator]
    line: int = _pos()
    col: int = _pos()


@dataclass
class Assign:
    target: Union[Name, Index]
    value: Expr
    line: int = _pos()
    col: int = _pos()


@dataclass
class Call:
    routine: str
    groups: Tuple[List[Expr], List[Expr], List[Expr]]
    receiver: Optional[str] = None
    line: int = _pos()
    col: int = _pos()

    @property
    def args(self) -> List[Expr]:
        return [*self.groups[IN], *self.groups[INOUT], *self.groups[OUT]]


@dataclass
class If:
    cond: Expr
    then: "Stmt"
    orelse: Optional["Stmt"] = None
    line: int = _pos()
    col: int = _pos()


@dataclass
class Return:
    line: int = _pos()
    col: int = _pos()


@dataclass
class Block:
    stmts: List["Stmt"]
    line: int = _pos()
    col: int = _pos()


@dataclass
class MethodImpl:
    """Implementación ``s.push(u;;e) { ... }`` dentro de un constructor"""
    receiver: str
    method: str
    groups: Tuple[List[str], List[str], List[str]]
    body: Block
    line: int = _pos()
    col: int = _pos()


Stmt = Union[LocalDecl, Assign, Call, If, Return, Block, MethodImpl]


# ============================================================================
# DEFINICIONES
# ============================================================================

@dataclass
class Param:
    name: str
    type: str
    length: Optional[Expr] = None
    delegated: bool = False
    group: int = IN
    line: int = _pos()
    col: int = _pos()

    @property
    def is_array(self) -> bool:
        return self.length is not None


@dataclass
class Signature:
    groups: Tuple[List[Param], List[Param], List[Param]]

    @property
    def params(self) -> List[Param]:
        return [*self.groups[IN], *self.groups[INOUT], *self.groups[OUT]]

    @property
    def arity(self) -> Tuple[int, int, int]:
        return tuple(len(g) for g in self.groups)


@dataclass
class RoutineDef:
    name: str
    signature: Signature
    body: Optional[Block] = None
    line: int = _pos()
    col: int = _pos()

    @property
    def params(self) -> List[Param]:
        return self.signature.params

    @property
    def is_prototype(self) -> bool:
        return self.body is None


@dataclass
class MethodSig:
    name: str
    signature: Signature
    line: int = _pos()
    col: int = _pos()


@dataclass
class RecordDef:
    name: str
    methods: List[MethodSig]
    line: int = _pos()
    col: int = _pos()
    # Completados por el chequeo
    constructor: Optional[str] = field(default=None, compare=False, repr=False)
    impls: Dict[str, MethodImpl] = field(default_factory=dict, compare=False, repr=False)

    def method(self, name: str) -> Optional[MethodSig]:
        for m in self.methods:
            if m.name == name:
                return m
        return None


@dataclass
class Program:
    """Programa completo: rutinas, prototipos y records en orden de definición"""
    routines: Dict[str, RoutineDef] = field(default_factory=dict)
    records: Dict[str, RecordDef] = field(default_factory=dict)
    prototypes: List[RoutineDef] = field(default_factory=list)
    entry: Optional[str] = field(default=None, compare=False)
    # Definiciones repetidas que el parser conserva para el chequeo
    duplicates: List[Union[RoutineDef, RecordDef]] = field(default_factory=list, compare=False, repr=False)
    checked: bool = field(default=False, compare=False, repr=False)
    warnings: list = field(default_factory=list, compare=False, repr=False)

    def routine(self, name: str) -> Optional[RoutineDef]:
        return self.routines.get(name)

    def constructor_of(self, record: str) -> Optional[RoutineDef]:
        rec = self.records.get(record)
        if rec is None or rec.constructor is None:
            return None
        return self.routines[rec.constructor]


# ============================================================================
# IMPRESIÓN
# ============================================================================

_PRECEDENCE = {"<": 1, "<=": 1, ">": 1, ">=": 1, "==": 1, "!=": 1,
               "+": 2, "-": 2, "*": 3, "/": 3}


def _format_real(value: float) -> str:
    text = repr(float(value))
    if "." not in text and "e" not in text and "n" not in text:
        text += ".0"
    return text


def format_expr(expr: Expr, parent: int = 0) -> str:
    """Imprime una expresión con los paréntesis mínimos"""
    if isinstance(expr, IntLit):
        return str(expr.value)
    if isinstance(expr, RealLit):
        return _format_real(expr.value)
    if isinstance(expr, Name):
        return expr.name
    if isinstance(expr, Index):
        return f"{expr.base}[{format_expr(expr.index)}]"
    if isinstance(expr, Range):
        return f"{expr.base}[{format_expr(expr.lo)}:{format_expr(expr.hi)}]"
    if isinstance(expr, IncDec):
        return f"{expr.op}{expr.target}" if expr.prefix else f"{expr.target}{expr.op}"
    if isinstance(expr, Apply):
        return f"{expr.func}({', '.join(format_expr(a) for a in expr.args)})"
    if isinstance(expr, Unary):
        inner = format_expr(expr.operand, 4)
        # "- -x" no debe imprimirse como "--x"
        sep = " " if inner.startswith(("-", "+")) else ""
        return f"{expr.op}{sep}{inner}"
    if isinstance(expr, Binary):
        prec = _PRECEDENCE[expr.op]
        left = format_expr(expr.left, prec)
        right = format_expr(expr.right, prec + 1)
        text = f"{left} {expr.op} {right}"
        return f"({text})" if prec < parent else text
    raise TypeError(f"expresión desconocida: {expr!r}")


def _format_groups(groups) -> str:
    return ";".join(", ".join(g) for g in groups)


def format_call(call: Call) -> str:
    groups = [[format_expr(a) for a in g] for g in call.groups]
    head = f"{call.receiver}.{call.routine}" if call.receiver else call.routine
    return f"{head}({_format_groups(groups)})"


def format_param(param: Param, named: bool = True) -> str:
    text = ("del " if param.delegated else "") + param.type
    if named and param.name:
        text += f" {param.name}"
    if param.length is not None:
        text += f"[{format_expr(param.length)}]"
    return text


def format_signature(name: str, sig: Signature, named: bool = True) -> str:
    groups = [[format_param(p, named) for p in g] for g in sig.groups]
    return f"{name}({_format_groups(groups)})"


def _format_declarator(d: Declarator) -> str:
    text = d.name
    if d.hi is not None:
        bounds = format_expr(d.hi) if d.lo is None else f"{format_expr(d.lo)}:{format_expr(d.hi)}"
        text += f"[{bounds}]"
    if d.init is not None:
        text += f" = {format_expr(d.init)}"
    return text


def format_stmt(stmt: Stmt, indent: int = 1) -> List[str]:
    pad = "    " * indent
    if isinstance(stmt, LocalDecl):
        decls = ", ".join(_format_declarator(d) for d in stmt.declarators)
        return [f"{pad}{stmt.type} {decls};"]
    if isinstance(stmt, Assign):
        return [f"{pad}{format_expr(stmt.target)} = {format_expr(stmt.value)};"]
    if isinstance(stmt, Call):
        return [f"{pad}{format_call(stmt)};"]
    if isinstance(stmt, Return):
        return [f"{pad}return;"]
    if isinstance(stmt, Block):
        lines = [f"{pad}{{"]
        for s in stmt.stmts:
            lines.extend(format_stmt(s, indent + 1))
        lines.append(f"{pad}}}")
        return lines
    if isinstance(stmt, If):
        lines = [f"{pad}if ({format_expr(stmt.cond)})"]
        lines.extend(format_stmt(stmt.then, indent + 1))
        if stmt.orelse is not None:
            lines.append(f"{pad}else")
            lines.extend(format_stmt(stmt.orelse, indent + 1))
        return lines
    if isinstance(stmt, MethodImpl):
        lines = [f"{pad}{stmt.receiver}.{stmt.method}({_format_groups(stmt.groups)}) {{"]
        for s in stmt.body.stmts:
            lines.extend(format_stmt(s, indent + 1))
        lines.append(f"{pad}}}")
        return lines
    raise TypeError(f"sentencia desconocida: {stmt!r}")


def format_routine(routine: RoutineDef) -> str:
    head = format_signature(routine.name, routine.signature)
    if routine.body is None:
        return head + ";"
    lines = [head + " {"]
    for s in routine.body.stmts:
        lines.extend(format_stmt(s, 1))
    lines.append("}")
    return "\n".join(lines)


def format_record(record: RecordDef) -> str:
    methods = ", ".join(
        format_signature(m.name, m.signature, named=any(p.name for p in m.signature.params))
        for m in record.methods
    )
    return f"record {record.name} {{ {methods} }};"


def format_program(program: Program) -> str:
    """Imprime el programa como fuente TSIA que vuelve a parsear igual"""
    parts = [format_record(r) for r in program.records.values()]
    parts += [format_routine(p) for p in program.prototypes]
    parts += [format_routine(r) for r in program.routines.values()]
    return "\n\n".join(parts) + "\n"
