"""
Chequeo semántico de programas TSIA.

Recorre cada cuerpo de arriba hacia abajo, como lo lee la ejecución
secuencial, y verifica:

- nombres definidos antes de usarse (con los locales implícitos que
  introduce un argumento out nunca declarado)
- aridad de grupos en cada llamada
- que cada out se produzca en todo camino (asignado o pasado a una llamada)
- la regla de delegación: un parámetro ``del`` sólo se reenvía como
  argumento de llamada, nunca se lee ni se asigna
- que el cuerpo no lea ni escriba lo que ya entregó a una llamada
  (una tarea no se comunica con sus hijas)
- records: un único constructor que implementa todos los métodos

Los errores se acumulan; si hay alguno se lanza ``CheckFailed``.
"""

import copy
from dataclasses import dataclass
from typing import Dict, List, Optional, Set

from loguru import logger

from app.errors import CheckFailed, Diagnostic
from app.syntax import (
    BUILTINS, COMPARISONS, GROUP_NAMES, IN, INOUT, OUT, SCALAR_TYPES,
    Apply, Assign, Binary, Block, Call, Expr, If, IncDec, Index, IntLit,
    LocalDecl, MethodImpl, Name, Param, Program, Range, RealLit, RecordDef,
    Return, RoutineDef, Signature, Unary,
)


@dataclass
class Symbol:
    name: str
    type: str
    is_array: bool = False
    kind: str = "local"            # param | local | state
    group: Optional[int] = None    # grupo del parámetro
    delegated: bool = False


@dataclass
class FlowState:
    """Estado del recorrido en un punto del cuerpo"""
    produced: Set[str]
    handed: Dict[str, str]
    terminated: bool = False

    def copy(self) -> "FlowState":
        return FlowState(set(self.produced), dict(self.handed), self.terminated)


class _BodyContext:
    """Contexto de un cuerpo: rutina o implementación de método"""

    def __init__(self, title: str, outs: List[str], in_method: bool):
        self.title = title
        self.outs = outs
        self.in_method = in_method
        self.scopes: List[Dict[str, Symbol]] = [{}]

    def lookup(self, name: str) -> Optional[Symbol]:
        for scope in reversed(self.scopes):
            if name in scope:
                return scope[name]
        return None

    def declare(self, symbol: Symbol):
        self.scopes[-1][symbol.name] = symbol


class Checker:
    """Chequeador de un programa parseado"""

    def __init__(self, program: Program):
        self.program = program
        self.errors: List[Diagnostic] = []
        self.warnings: List[Diagnostic] = []

    # ------------------------------------------------------------------
    # Reporte
    # ------------------------------------------------------------------

    def error(self, code: str, message: str, node=None):
        line = getattr(node, "line", 0) or 0
        col = getattr(node, "col", 0) or 0
        self.errors.append(Diagnostic(code, message, line, col))

    def warning(self, code: str, message: str, node=None):
        line = getattr(node, "line", 0) or 0
        col = getattr(node, "col", 0) or 0
        self.warnings.append(Diagnostic(code, message, line, col, severity="warning"))

    # ------------------------------------------------------------------
    # Nivel programa
    # ------------------------------------------------------------------

    def run(self) -> Program:
        program = self.program

        for dup in program.duplicates:
            kind = "record" if isinstance(dup, RecordDef) else "rutina"
            self.error("DuplicateDefinition", f"{kind} '{dup.name}' definida más de una vez", dup)
        for name, record in program.records.items():
            if name in program.routines:
                self.error("DuplicateDefinition",
                           f"'{name}' es a la vez record y rutina", record)

        for routine in program.routines.values():
            self.check_signature(routine.name, routine.signature, routine)
        for record in program.records.values():
            seen: Set[str] = set()
            for method in record.methods:
                if method.name in seen:
                    self.error("DuplicateDefinition",
                               f"método '{method.name}' repetido en record {record.name}", method)
                seen.add(method.name)
                self.check_signature(f"{record.name}.{method.name}", method.signature, method)
        for proto in program.prototypes:
            self.check_prototype(proto)

        self.bind_records()

        for routine in program.routines.values():
            self.check_routine(routine)

        defined = [r.name for r in program.routines.values()]
        program.entry = defined[-1] if defined else None
        program.warnings = list(self.warnings)
        for w in self.warnings:
            logger.warning(f"⚠️ {w.code}: {w.message} (línea {w.line})")

        if self.errors:
            raise CheckFailed(self.errors)
        program.checked = True
        return program

    def known_type(self, type_name: str) -> bool:
        return type_name in SCALAR_TYPES or type_name in self.program.records

    def check_signature(self, title: str, sig: Signature, node):
        names: Set[str] = set()
        ins = {p.name: p for p in sig.groups[IN]}
        for param in sig.params:
            if param.name:
                if param.name in names:
                    self.error("DuplicateDefinition",
                               f"parámetro '{param.name}' repetido en {title}", param)
                names.add(param.name)
            if not self.known_type(param.type):
                self.error("UndefinedName", f"tipo desconocido '{param.type}' en {title}", param)
            if param.length is not None:
                for used in _names_in(param.length):
                    p = ins.get(used)
                    if p is None or p.is_array or p.type != "int":
                        self.error("UndefinedName",
                                   f"la longitud de '{param.name}' usa '{used}', que no es un in entero",
                                   param)

    def check_prototype(self, proto: RoutineDef):
        routine = self.program.routines.get(proto.name)
        if routine is None:
            return
        if proto.signature.arity != routine.signature.arity:
            self.error("ArityMismatch",
                       f"el prototipo de '{proto.name}' tiene grupos {proto.signature.arity}, "
                       f"la definición {routine.signature.arity}", proto)
            return
        for p, q in zip(proto.params, routine.params):
            if (p.type, p.delegated, p.is_array) != (q.type, q.delegated, q.is_array):
                self.error("DuplicateDefinition",
                           f"el prototipo de '{proto.name}' no coincide en el parámetro '{q.name}'", proto)

    def bind_records(self):
        """Asocia cada record con su constructor y sus implementaciones"""
        program = self.program
        for record in program.records.values():
            record.constructor = None
            record.impls = {}

        for routine in program.routines.values():
            if routine.body is None:
                continue
            record_outs = {p.name: p.type for p in routine.signature.groups[OUT]
                           if p.type in program.records and not p.is_array}
            for stmt in routine.body.stmts:
                if not isinstance(stmt, MethodImpl):
                    continue
                rtype = record_outs.get(stmt.receiver)
                if rtype is None:
                    self.error("UndefinedName",
                               f"'{stmt.receiver}' no es un out de tipo record de '{routine.name}'", stmt)
                    continue
                record = program.records[rtype]
                if record.constructor not in (None, routine.name):
                    self.error("DuplicateDefinition",
                               f"record {rtype} tiene dos constructores: "
                               f"'{record.constructor}' y '{routine.name}'", stmt)
                    continue
                record.constructor = routine.name
                sig = record.method(stmt.method)
                if sig is None:
                    self.error("UndefinedName",
                               f"record {rtype} no declara el método '{stmt.method}'", stmt)
                    continue
                impl_arity = tuple(len(g) for g in stmt.groups)
                if impl_arity != sig.signature.arity:
                    self.error("ArityMismatch",
                               f"{rtype}.{stmt.method} declara grupos {sig.signature.arity}, "
                               f"la implementación {impl_arity}", stmt)
                    continue
                if stmt.method in record.impls:
                    self.error("DuplicateDefinition",
                               f"{rtype}.{stmt.method} implementado más de una vez", stmt)
                    continue
                record.impls[stmt.method] = stmt

        for record in program.records.values():
            if record.constructor is None:
                self.error("UndefinedName", f"record {record.name} no tiene constructor", record)
                continue
            for method in record.methods:
                if method.name not in record.impls:
                    self.error("UndefinedName",
                               f"{record.name}.{method.name} no está implementado en "
                               f"'{record.constructor}'", method)

    # ------------------------------------------------------------------
    # Cuerpos
    # ------------------------------------------------------------------

    def check_routine(self, routine: RoutineDef):
        if routine.body is None:
            return
        records = self.program.records
        is_constructor = any(r.constructor == routine.name for r in records.values())
        outs = [p.name for p in routine.signature.groups[OUT]
                if not (is_constructor and p.type in records and not p.is_array)]
        ctx = _BodyContext(f"'{routine.name}'", outs, in_method=False)
        for param in routine.params:
            ctx.declare(Symbol(param.name, param.type, param.is_array, "param",
                               param.group, param.delegated))
        state = FlowState(set(), {})
        state = self.walk_block(routine.body.stmts, ctx, state, top_level=True,
                                constructor=routine if is_constructor else None)
        if not state.terminated:
            self.check_outs(ctx, state, routine.body)

    def check_outs(self, ctx: _BodyContext, state: FlowState, node):
        for out in ctx.outs:
            if out not in state.produced:
                message = f"el out '{out}' de {ctx.title} no se produce en algún camino"
                if ctx.in_method:
                    self.warning("OutNeverProduced", message, node)
                else:
                    self.error("OutNeverProduced", message, node)

    def walk_block(self, stmts, ctx: _BodyContext, state: FlowState,
                   top_level: bool = False, constructor: Optional[RoutineDef] = None) -> FlowState:
        for stmt in stmts:
            if isinstance(stmt, MethodImpl):
                if top_level and constructor is not None:
                    self.check_method_impl(stmt, ctx, constructor)
                else:
                    self.error("InvalidArgument",
                               f"implementación de método fuera de un constructor", stmt)
                continue
            state = self.walk_stmt(stmt, ctx, state)
        return state

    def walk_stmt(self, stmt, ctx: _BodyContext, state: FlowState) -> FlowState:
        if isinstance(stmt, LocalDecl):
            self.check_decl(stmt, ctx, state)
        elif isinstance(stmt, Assign):
            self.check_assign(stmt, ctx, state)
        elif isinstance(stmt, Call):
            self.check_call(stmt, ctx, state)
        elif isinstance(stmt, Return):
            if not state.terminated:
                self.check_outs(ctx, state, stmt)
            state.terminated = True
        elif isinstance(stmt, Block):
            ctx.scopes.append({})
            state = self.walk_block(stmt.stmts, ctx, state)
            ctx.scopes.pop()
        elif isinstance(stmt, If):
            self.check_expr(stmt.cond, ctx, state, condition=True)
            state = self.walk_if(stmt, ctx, state)
        return state

    def walk_if(self, stmt: If, ctx: _BodyContext, state: FlowState) -> FlowState:
        branches = []
        for branch in (stmt.then, stmt.orelse):
            sub = state.copy()
            if branch is not None:
                ctx.scopes.append({})
                sub = self.walk_stmt(branch, ctx, sub)
                ctx.scopes.pop()
            branches.append(sub)
        live = [b for b in branches if not b.terminated]
        handed = {}
        for b in branches:
            handed.update(b.handed)
        if not live:
            return FlowState(set(state.produced), handed, True)
        produced = set.intersection(*(b.produced for b in live))
        return FlowState(produced, handed, state.terminated)

    def check_method_impl(self, impl: MethodImpl, outer: _BodyContext, constructor: RoutineDef):
        record_name = next(p.type for p in constructor.signature.groups[OUT] if p.name == impl.receiver)
        record = self.program.records[record_name]
        sig = record.method(impl.method)
        if sig is None or record.impls.get(impl.method) is not impl:
            return
        ctx = _BodyContext(f"{record_name}.{impl.method}", list(impl.groups[OUT]), in_method=True)
        # Estado del constructor visible hasta este punto
        for scope in outer.scopes:
            for symbol in scope.values():
                if symbol.kind == "param" and symbol.group == OUT:
                    continue
                ctx.declare(Symbol(symbol.name, symbol.type, symbol.is_array, "state",
                                   IN if symbol.kind == "param" else None, symbol.delegated))
        ctx.scopes.append({})
        for group, names in enumerate(impl.groups):
            for name, param in zip(names, sig.signature.groups[group]):
                if ctx.lookup(name) is not None and name in ctx.scopes[-1]:
                    self.error("DuplicateDefinition", f"parámetro '{name}' repetido", impl)
                ctx.declare(Symbol(name, param.type, param.is_array, "param", group, param.delegated))
        state = self.walk_block(impl.body.stmts, ctx, FlowState(set(), {}))
        if not state.terminated:
            self.check_outs(ctx, state, impl)

    # ------------------------------------------------------------------
    # Sentencias
    # ------------------------------------------------------------------

    def check_decl(self, decl: LocalDecl, ctx: _BodyContext, state: FlowState):
        if not self.known_type(decl.type):
            self.error("UndefinedName", f"tipo desconocido '{decl.type}'", decl)
        for d in decl.declarators:
            for bound in (d.lo, d.hi):
                if bound is not None:
                    self.check_expr(bound, ctx, state)
            if d.init is not None:
                if d.is_array:
                    self.error("InvalidArgument", f"el arreglo '{d.name}' no admite inicializador", d)
                self.check_expr(d.init, ctx, state)
            if ctx.lookup(d.name) is not None:
                self.error("DuplicateDefinition", f"'{d.name}' ya está declarado", d)
            ctx.declare(Symbol(d.name, decl.type, d.is_array))

    def _target_symbol(self, name: str, node, ctx: _BodyContext, state: FlowState,
                       verb: str) -> Optional[Symbol]:
        symbol = ctx.lookup(name)
        if symbol is None:
            self.error("UndefinedName", f"'{name}' no está definido", node)
            return None
        if symbol.delegated:
            self.error("DelItemAccessed", f"'{name}' es del y no puede {verb}", node)
        elif symbol.group == IN:
            self.error("InAssigned", f"'{name}' es un in y no puede {verb}", node)
        return symbol

    def check_assign(self, stmt: Assign, ctx: _BodyContext, state: FlowState):
        self.check_expr(stmt.value, ctx, state)
        target = stmt.target
        if isinstance(target, Index):
            self.check_expr(target.index, ctx, state)
        name = target.base if isinstance(target, Index) else target.name
        symbol = self._target_symbol(name, target, ctx, state, "asignarse")
        if symbol is None:
            return
        if name in state.handed and not symbol.delegated:
            self.error("CallResultAccessed",
                       f"'{name}' fue entregado a una llamada y ya no puede asignarse", target)
        if isinstance(target, Index) and not symbol.is_array:
            self.error("InvalidArgument", f"'{name}' no es un arreglo", target)
        if isinstance(target, Name) and (symbol.is_array or symbol.type not in SCALAR_TYPES):
            self.error("InvalidArgument", f"'{name}' no se puede asignar completo", target)
        if symbol.kind == "param" and symbol.group == OUT:
            state.produced.add(name)

    def check_call(self, call: Call, ctx: _BodyContext, state: FlowState):
        program = self.program
        signature: Optional[Signature] = None
        title = call.routine

        if call.receiver is not None:
            recv = ctx.lookup(call.receiver)
            if recv is None:
                self.error("UndefinedName", f"'{call.receiver}' no está definido", call)
            elif recv.type not in program.records or recv.is_array:
                self.error("InvalidArgument", f"'{call.receiver}' no es una instancia de record", call)
            else:
                if recv.delegated:
                    self.error("DelItemAccessed",
                               f"'{call.receiver}' es del y no puede recibir métodos", call)
                elif recv.group == IN:
                    self.error("InAssigned",
                               f"'{call.receiver}' es un in y no puede recibir métodos", call)
                method = program.records[recv.type].method(call.routine)
                title = f"{recv.type}.{call.routine}"
                if method is None:
                    self.error("UndefinedName", f"{title} no existe", call)
                else:
                    signature = method.signature
                state.handed[call.receiver] = "receptor"
        else:
            routine = program.routines.get(call.routine)
            if routine is None:
                self.error("UndefinedName", f"rutina '{call.routine}' no definida", call)
            else:
                signature = routine.signature

        if signature is None:
            for arg in call.args:
                if not isinstance(arg, Name):
                    self.check_expr(arg, ctx, state, as_argument=True)
            return

        arity = tuple(len(g) for g in call.groups)
        if arity != signature.arity:
            self.error("ArityMismatch",
                       f"{title} espera grupos {signature.arity}, la llamada pasa {arity}", call)
            return

        for group in (IN, INOUT, OUT):
            for arg, param in zip(call.groups[group], signature.groups[group]):
                self.check_argument(arg, param, group, ctx, state)

    def check_argument(self, arg: Expr, param: Param, group: int,
                       ctx: _BodyContext, state: FlowState):
        if not isinstance(arg, (Name, Index, Range)):
            if group != IN:
                self.error("InvalidArgument",
                           f"el argumento {GROUP_NAMES[group]} para '{param.name or param.type}' "
                           f"debe ser una ubicación", arg)
            self.check_expr(arg, ctx, state)
            return

        base = arg.name if isinstance(arg, Name) else arg.base
        if isinstance(arg, Index):
            self.check_expr(arg.index, ctx, state)
        elif isinstance(arg, Range):
            self.check_expr(arg.lo, ctx, state)
            self.check_expr(arg.hi, ctx, state)

        symbol = ctx.lookup(base)
        if symbol is None:
            if group == OUT and isinstance(arg, Name):
                if param.is_array:
                    self.error("UndefinedName",
                               f"'{base}' debe declararse: el out '{param.name}' es un arreglo", arg)
                    return
                ctx.declare(Symbol(base, param.type, False))
                symbol = ctx.lookup(base)
            else:
                self.error("UndefinedName", f"'{base}' no está definido", arg)
                return

        if isinstance(arg, (Index, Range)) and not symbol.is_array:
            self.error("InvalidArgument", f"'{base}' no es un arreglo", arg)

        if group == IN:
            if symbol.is_array or symbol.type not in SCALAR_TYPES:
                state.handed.setdefault(base, "in")
            return

        if symbol.group == IN and not symbol.delegated:
            self.error("InAssigned",
                       f"'{base}' es un in y no puede pasarse como {GROUP_NAMES[group]}", arg)
        state.handed[base] = GROUP_NAMES[group]
        if symbol.kind == "param" and symbol.group == OUT:
            state.produced.add(base)

    # ------------------------------------------------------------------
    # Expresiones
    # ------------------------------------------------------------------

    def _read(self, name: str, node, ctx: _BodyContext, state: FlowState) -> Optional[Symbol]:
        symbol = ctx.lookup(name)
        if symbol is None:
            self.error("UndefinedName", f"'{name}' no está definido", node)
            return None
        if symbol.delegated:
            self.error("DelItemAccessed",
                       f"'{name}' es del: sólo puede reenviarse como argumento", node)
        elif name in state.handed and state.handed[name] != "in":
            self.error("CallResultAccessed",
                       f"'{name}' fue entregado como {state.handed[name]} a una llamada "
                       f"y el cuerpo ya no puede leerlo", node)
        return symbol

    def check_expr(self, expr: Expr, ctx: _BodyContext, state: FlowState,
                   condition: bool = False, as_argument: bool = False):
        if condition and not (isinstance(expr, Binary) and expr.op in COMPARISONS):
            self.error("InvalidArgument", "la condición de un if debe ser una comparación", expr)

        if isinstance(expr, (IntLit, RealLit)):
            return
        if isinstance(expr, Name):
            symbol = self._read(expr.name, expr, ctx, state)
            if symbol is not None and not symbol.delegated and (
                    symbol.is_array or symbol.type not in SCALAR_TYPES):
                self.error("InvalidArgument",
                           f"'{expr.name}' no es un escalar y no puede usarse en una expresión", expr)
            return
        if isinstance(expr, Index):
            self.check_expr(expr.index, ctx, state)
            symbol = self._read(expr.base, expr, ctx, state)
            if symbol is not None and not symbol.is_array:
                self.error("InvalidArgument", f"'{expr.base}' no es un arreglo", expr)
            return
        if isinstance(expr, Range):
            self.error("InvalidArgument", "un rango sólo puede usarse como argumento de llamada", expr)
            return
        if isinstance(expr, Unary):
            self.check_expr(expr.operand, ctx, state)
            return
        if isinstance(expr, Binary):
            if expr.op in COMPARISONS and not condition:
                self.error("InvalidArgument", "las comparaciones sólo se usan en condiciones de if", expr)
            self.check_expr(expr.left, ctx, state)
            self.check_expr(expr.right, ctx, state)
            return
        if isinstance(expr, Apply):
            expected = BUILTINS.get(expr.func)
            if expected is None:
                self.error("UndefinedName", f"función '{expr.func}' no definida", expr)
            elif expected != len(expr.args):
                self.error("ArityMismatch",
                           f"{expr.func} espera {expected} argumento(s), recibe {len(expr.args)}", expr)
            for a in expr.args:
                self.check_expr(a, ctx, state)
            return
        if isinstance(expr, IncDec):
            symbol = self._target_symbol(expr.target, expr, ctx, state, "modificarse")
            if symbol is None:
                return
            if expr.target in state.handed:
                self.error("CallResultAccessed",
                           f"'{expr.target}' fue entregado a una llamada", expr)
            if symbol.is_array or symbol.type != "int":
                self.error("InvalidArgument", f"{expr.op} requiere un escalar int", expr)
            if symbol.kind == "param" and symbol.group == OUT:
                state.produced.add(expr.target)
            return


def _names_in(expr: Expr) -> List[str]:
    """Nombres leídos por una expresión (para longitudes de parámetros)"""
    if isinstance(expr, Name):
        return [expr.name]
    if isinstance(expr, Index):
        return [expr.base, *_names_in(expr.index)]
    if isinstance(expr, Range):
        return [expr.base, *_names_in(expr.lo), *_names_in(expr.hi)]
    if isinstance(expr, Unary):
        return _names_in(expr.operand)
    if isinstance(expr, Binary):
        return _names_in(expr.left) + _names_in(expr.right)
    if isinstance(expr, Apply):
        return [n for a in expr.args for n in _names_in(a)]
    if isinstance(expr, IncDec):
        return [expr.target]
    return []


def check(program: Program) -> Program:
    """
    Chequea un programa parseado y devuelve una copia validada.

    Raises:
        CheckFailed: con la lista de diagnósticos si hay errores
    """
    checked = copy.deepcopy(program)
    return Checker(checked).run()
