"""
Evaluador de cuerpos de rutina.

Ejecuta el cuerpo de una tarea de arriba hacia abajo. Cada llamada se
evalúa en el lugar (inline) o se emite como tarea hija, según la política
y según que sus argumentos estén disponibles para esta tarea:

- un argumento ``del``, una región todavía no resuelta o una región ya
  entregada a otra hija obligan a delegar
- constructores de record y métodos evalúan sus llamadas siempre inline

Las escrituras sobre items se acumulan en un buffer (``TaskView``) y sólo
llegan al almacén cuando el pool compromete el resultado; una tarea
abortada no deja rastro.
"""

from dataclasses import dataclass, field
from typing import Any, Dict, List, NamedTuple, Optional, Set, Tuple, Union

from loguru import logger

from app.errors import (
    AccessViolation, DivisionByZero, IndexOutOfBounds, InvalidArgument,
    MissingOut, NonPositiveLength, NotResolved, ReadOfUnresolved,
    StackBudgetExceeded, TypeMismatch,
)
from app.items import (
    ItemId, ItemKind, ItemSpec, ItemStore, Mode, RecordState, RegionRef, StateVar,
)
from app.syntax import (
    IN, INOUT, LOCATIONS, OUT, SCALAR_TYPES,
    Apply, Assign, Binary, Block, Call, Expr, If, IncDec, Index, IntLit,
    LocalDecl, MethodImpl, Name, Param, Program, Range, RealLit, Return,
    Unary, format_expr,
)
from app.tasks import ItemRef, Literal, Outcome, Policy, Task, TaskSpec


DEFAULT_STACK_BUDGET = 100_000


# ============================================================================
# VALORES Y ARITMÉTICA
# ============================================================================

def coerce(type_: str, value: Any) -> Any:
    """Ajusta un valor al tipo destino: int → real se ensancha, real → int falla"""
    if type_ == "real":
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise TypeMismatch(f"se esperaba real, se obtuvo {value!r}")
        return float(value)
    if type_ == "int":
        if isinstance(value, bool) or not isinstance(value, int):
            raise TypeMismatch(f"se esperaba int, se obtuvo {value!r}")
        return value
    if not isinstance(value, RecordState) or value.record != type_:
        raise TypeMismatch(f"se esperaba una instancia de {type_}, se obtuvo {value!r}")
    return value


def _number(value: Any) -> Union[int, float]:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise TypeMismatch(f"operando no numérico {value!r}")
    return value


def arith(op: str, a: Any, b: Any) -> Any:
    """Operación binaria; la división entera trunca hacia cero"""
    a, b = _number(a), _number(b)
    if op == "+":
        return a + b
    if op == "-":
        return a - b
    if op == "*":
        return a * b
    if op == "/":
        if b == 0:
            raise DivisionByZero("división por cero")
        if isinstance(a, int) and isinstance(b, int):
            q = abs(a) // abs(b)
            return -q if (a < 0) != (b < 0) else q
        return a / b
    if op == "<":
        return a < b
    if op == "<=":
        return a <= b
    if op == ">":
        return a > b
    if op == ">=":
        return a >= b
    if op == "==":
        return a == b
    if op == "!=":
        return a != b
    raise InvalidArgument(f"operador desconocido {op!r}")


# ============================================================================
# ALMACENAMIENTO LOCAL Y LUGARES
# ============================================================================

class Cell:
    """Almacenamiento local de un frame; se promueve a item al entregarse"""

    __slots__ = ("kind", "type", "values", "resolved", "item")

    def __init__(self, kind: ItemKind, type_: str, length: int = 1):
        if length < 1:
            raise NonPositiveLength(f"arreglo local de longitud {length}")
        self.kind = kind
        self.type = type_
        self.values: List[Any] = [None] * length
        self.resolved: List[bool] = [False] * length
        self.item: Optional[ItemId] = None


@dataclass(frozen=True)
class Place:
    """
    Ventana sobre un almacenamiento (celda local o item).

    El índice lógico ``j`` en ``[base, base + length - 1]`` corresponde a la
    posición ``first + (j - base)`` del almacenamiento (1-based).
    """
    storage: Union[Cell, int]
    first: int
    length: int
    type: str
    base: int = 1
    array: bool = False
    delegated: bool = False

    def position(self, index: int) -> int:
        if not self.base <= index < self.base + self.length:
            raise IndexOutOfBounds(
                f"índice {index} fuera de [{self.base}:{self.base + self.length - 1}]")
        return self.first + (index - self.base)

    def element(self, index: int) -> "Place":
        """Ventana desde ``index`` hasta el final (asociación de secuencia)"""
        pos = self.position(index)
        return Place(self.storage, pos, self.length - (pos - self.first), self.type,
                     1, self.array, self.delegated)

    def slice(self, lo: int, hi: int) -> "Place":
        if hi < lo:
            raise IndexOutOfBounds(f"rango vacío [{lo}:{hi}]")
        first = self.position(lo)
        self.position(hi)
        return Place(self.storage, first, hi - lo + 1, self.type, 1, self.array, self.delegated)

    def fit(self, length: int, type_: str, array: bool, delegated: bool) -> "Place":
        if length > self.length:
            raise IndexOutOfBounds(
                f"el parámetro necesita {length} elemento(s) y el argumento tiene {self.length}")
        return Place(self.storage, self.first, length, type_, 1, array, delegated)


class Val(NamedTuple):
    """Argumento in ya evaluado"""
    value: Any


class _Return(Exception):
    pass


@dataclass
class Frame:
    """Entorno de una invocación (de tarea o inline)"""
    title: str
    env: Dict[str, Place]
    depth: int
    outs: Set[str]
    inline_only: bool = False
    produced: Set[str] = field(default_factory=set)


@dataclass
class Callee:
    """Rutina o método resuelto, con los nombres y tipos de sus parámetros"""
    name: str
    params: List[Param]
    body: Block
    arity: Tuple[int, int, int]
    record: Optional[str] = None          # método de este record
    constructs: Optional[str] = None      # constructor de este record


# ============================================================================
# VISTA DE UNA TAREA SOBRE EL ALMACÉN
# ============================================================================

class TaskView:
    """
    Lo que una tarea en ejecución puede ver y modificar.

    Las lecturas sólo alcanzan regiones registradas para la tarea; las
    escrituras quedan en ``writes`` hasta el commit. ``handed`` registra las
    regiones ya entregadas a hijas: leer lo entregado como out/inout o
    escribir cualquier región entregada es un error.
    """

    def __init__(self, store: ItemStore, task: Task):
        self.store = store
        self.task = task
        self.access: Dict[ItemId, List[Tuple[int, int, Mode, bool]]] = {}
        for ref in task.spec.refs:
            r = ref.region
            self.access.setdefault(r.item, []).append((r.lo, r.hi, ref.mode, ref.delegated))
        self.writes: Dict[ItemId, Dict[int, Any]] = {}
        self.created: Dict[ItemId, ItemSpec] = {}
        self.handed: Dict[ItemId, List[Tuple[int, int, Mode]]] = {}
        self.children: List[TaskSpec] = []

    # ------------------------------------------------------------------

    def _handed(self, item: ItemId, index: int, writes_only: bool) -> bool:
        for lo, hi, mode in self.handed.get(item, ()):
            if lo <= index <= hi and (mode.writes or not writes_only):
                return True
        return False

    def _access(self, item: ItemId, index: int, need_read: bool, need_write: bool):
        """Devuelve (hay acceso directo, hay acceso del) para la celda"""
        direct = delegated = False
        for lo, hi, mode, is_del in self.access.get(item, ()):
            if lo <= index <= hi and (not need_read or mode.reads) and (not need_write or mode.writes):
                if is_del:
                    delegated = True
                else:
                    direct = True
        return direct, delegated

    def read_item(self, item: ItemId, index: int) -> Any:
        if self._handed(item, index, writes_only=True):
            raise ReadOfUnresolved(f"item #{item}[{index}] fue entregado a una tarea hija")
        buffered = self.writes.get(item)
        if buffered is not None and index in buffered:
            return buffered[index]
        if item in self.created:
            raise ReadOfUnresolved(f"item #{item}[{index}] sin asignar")
        direct, delegated = self._access(item, index, need_read=True, need_write=False)
        if not direct:
            if delegated:
                raise AccessViolation(f"item #{item}[{index}] es del y no puede leerse")
            if self._access(item, index, False, True)[0]:
                raise ReadOfUnresolved(f"el out #{item}[{index}] se lee antes de producirse")
            raise AccessViolation(f"la tarea no tiene acceso a item #{item}[{index}]")
        try:
            return self.store.read(item, index)
        except NotResolved as e:
            raise ReadOfUnresolved(str(e)) from None

    def write_item(self, item: ItemId, index: int, value: Any):
        if self._handed(item, index, writes_only=False):
            raise AccessViolation(f"item #{item}[{index}] ya fue entregado a una tarea hija")
        if item not in self.created:
            direct, delegated = self._access(item, index, need_read=False, need_write=True)
            if not direct:
                raise AccessViolation(
                    f"la tarea no tiene acceso de escritura a item #{item}[{index}]"
                    + (" (del)" if delegated else ""))
        self.writes.setdefault(item, {})[index] = value

    def readable(self, item: ItemId, lo: int, hi: int) -> bool:
        buffered = self.writes.get(item, {})
        for i in range(lo, hi + 1):
            if self._handed(item, i, writes_only=True):
                return False
            if i in buffered:
                continue
            if item in self.created or not self._access(item, i, True, False)[0]:
                return False
            if not self.store.item(item).resolved[i - 1]:
                return False
        return True

    def writable(self, item: ItemId, lo: int, hi: int) -> bool:
        for i in range(lo, hi + 1):
            if self._handed(item, i, writes_only=False):
                return False
            if item not in self.created and not self._access(item, i, False, True)[0]:
                return False
        return True

    def can_forward(self, item: ItemId, lo: int, hi: int, mode: Mode) -> bool:
        """La tarea puede pasar la región a una hija con ese modo (del incluido)"""
        if item in self.created:
            return True
        for i in range(lo, hi + 1):
            if not any(a_lo <= i <= a_hi and (not mode.writes or a_mode.writes)
                       for a_lo, a_hi, a_mode, _ in self.access.get(item, ())):
                return False
        return True

    def hand(self, item: ItemId, lo: int, hi: int, mode: Mode):
        self.handed.setdefault(item, []).append((lo, hi, mode))

    def promote(self, cell: Cell) -> ItemId:
        """Convierte una celda local en un item nuevo con su contenido actual"""
        if cell.item is None:
            item = self.store.allocate_id()
            self.created[item] = ItemSpec(item, cell.kind, cell.type, len(cell.values))
            initial = {i + 1: v for i, (v, ok) in enumerate(zip(cell.values, cell.resolved)) if ok}
            if initial:
                self.writes[item] = initial
            cell.item = item
        return cell.item

    def outcome(self) -> Outcome:
        return Outcome(self.writes, list(self.created.values()), self.children)


class _Run:
    """Estado de una evaluación de cuerpo (una por tarea; no se comparte)"""

    def __init__(self, view: TaskView):
        self.view = view
        self.nesting = 0


# ============================================================================
# EVALUADOR
# ============================================================================

class BodyEvaluator:
    """
    Evalúa cuerpos de tareas bajo una política inline/delegación.

    Es seguro usar una misma instancia desde varios workers: el estado de
    cada evaluación vive en ``_Run`` y en los frames.
    """

    def __init__(self, program: Program, policy: Union[str, Policy] = "inline-always",
                 stack_budget: int = DEFAULT_STACK_BUDGET):
        self.program = program
        self.policy = Policy.parse(policy)
        self.stack_budget = stack_budget
        self.callees: Dict[str, Callee] = {}
        self.methods: Dict[Tuple[str, str], Callee] = {}
        self._prepare()

        logger.debug(f"BodyEvaluator inicializado (política={self.policy})")

    def _prepare(self):
        constructs = {rec.constructor: rec.name for rec in self.program.records.values()
                      if rec.constructor}
        for routine in self.program.routines.values():
            self.callees[routine.name] = Callee(
                routine.name, routine.params, routine.body, routine.signature.arity,
                constructs=constructs.get(routine.name))
        for record in self.program.records.values():
            for sig in record.methods:
                impl = record.impls.get(sig.name)
                if impl is None:
                    continue
                params = []
                for group, names in enumerate(impl.groups):
                    for name, p in zip(names, sig.signature.groups[group]):
                        params.append(Param(name, p.type, p.length, p.delegated, group))
                self.methods[(record.name, sig.name)] = Callee(
                    f"{record.name}.{sig.name}", params, impl.body, sig.signature.arity,
                    record=record.name)

    # ------------------------------------------------------------------
    # Entrada: cuerpo de una tarea
    # ------------------------------------------------------------------

    def eval_body(self, task: Task, store: ItemStore) -> Outcome:
        """
        Ejecuta el cuerpo de ``task`` y devuelve su resultado sin tocar el almacén.

        Raises:
            ReadOfUnresolved, MissingOut, DivisionByZero, IndexOutOfBounds,
            TypeMismatch, StackBudgetExceeded: errores del programa
        """
        spec = task.spec
        run = _Run(TaskView(store, task))
        if spec.record is not None:
            callee = self.methods[(spec.record, spec.routine)]
        else:
            callee = self.callees[spec.routine]

        actuals: List[Union[Val, Place]] = []
        for binding in spec.args:
            if isinstance(binding, Literal):
                actuals.append(Val(binding.value))
            else:
                actuals.append(self._ref_place(store, binding))
        receiver = self._ref_place(store, spec.receiver) if spec.receiver is not None else None

        try:
            self._invoke(run, callee, actuals, task.depth, receiver, inline_only=False)
        except RecursionError:
            raise StackBudgetExceeded(
                f"recursión inline demasiado profunda en {callee.name}") from None
        return run.view.outcome()

    def constant(self, expr: Expr) -> Any:
        """Valor de una expresión sin nombres (argumentos de la llamada de entrada)"""
        try:
            return self.eval_expr(None, Frame("entry", {}, 0, set()), expr)
        except KeyError as e:
            raise InvalidArgument(
                f"'{e.args[0]}' no es una constante", expr.line, expr.col) from None

    def entry_lengths(self, routine: str, ins: Dict[str, Any]) -> Dict[str, Optional[int]]:
        """Longitudes de los arreglos de ``routine`` dados los valores de sus ins"""
        callee = self.callees[routine]
        actuals = [Val(ins[p.name]) if p.name in ins else None for p in callee.params]
        return self._lengths(None, callee, actuals)

    @staticmethod
    def _ref_place(store: ItemStore, ref: ItemRef) -> Place:
        item = store.item(ref.region.item)
        return Place(ref.region.item, ref.region.lo, ref.region.length, item.type,
                     1, item.kind is ItemKind.ARRAY, ref.delegated)

    # ------------------------------------------------------------------
    # Lectura / escritura de lugares
    # ------------------------------------------------------------------

    def _load(self, run: _Run, place: Place, index: int) -> Any:
        if place.delegated:
            raise AccessViolation("un parámetro del no puede leerse")
        pos = place.position(index)
        storage = place.storage
        if isinstance(storage, Cell):
            if storage.item is None:
                if not storage.resolved[pos - 1]:
                    raise ReadOfUnresolved("variable leída antes de asignarse")
                value = storage.values[pos - 1]
            else:
                value = run.view.read_item(storage.item, pos)
        else:
            value = run.view.read_item(storage, pos)
        if place.type == "real" and isinstance(value, int) and not isinstance(value, bool):
            value = float(value)
        return value

    def _store(self, run: _Run, place: Place, index: int, value: Any):
        if place.delegated:
            raise AccessViolation("un parámetro del no puede asignarse")
        pos = place.position(index)
        value = coerce(place.type, value)
        storage = place.storage
        if isinstance(storage, Cell):
            if storage.item is None:
                storage.values[pos - 1] = value
                storage.resolved[pos - 1] = True
            else:
                run.view.write_item(storage.item, pos, value)
        else:
            run.view.write_item(storage, pos, value)

    def _readable(self, run: _Run, place: Place) -> bool:
        if place.delegated:
            return False
        storage = place.storage
        lo, hi = place.first, place.first + place.length - 1
        if isinstance(storage, Cell):
            if storage.item is None:
                return all(storage.resolved[lo - 1:hi])
            storage = storage.item
        return run.view.readable(storage, lo, hi)

    def _writable(self, run: _Run, place: Place) -> bool:
        if place.delegated:
            return False
        storage = place.storage
        if isinstance(storage, Cell):
            if storage.item is None:
                return True
            storage = storage.item
        return run.view.writable(storage, place.first, place.first + place.length - 1)

    def _snapshot(self, run: _Run, place: Place) -> Tuple[Any, ...]:
        values = []
        for j in range(place.base, place.base + place.length):
            try:
                values.append(self._load(run, place, j))
            except ReadOfUnresolved:
                values.append(None)
        return tuple(values)

    @staticmethod
    def _cell_place(type_: str, value: Any = None, kind: ItemKind = ItemKind.SCALAR) -> Place:
        cell = Cell(kind, type_)
        if value is not None:
            cell.values[0] = coerce(type_, value)
            cell.resolved[0] = True
        return Place(cell, 1, 1, type_)

    # ------------------------------------------------------------------
    # Invocación
    # ------------------------------------------------------------------

    def _invoke(self, run: _Run, callee: Callee, actuals, depth: int,
                receiver: Optional[Place], inline_only: bool):
        """Liga parámetros y ejecuta el cuerpo en un frame nuevo"""
        run.nesting += 1
        if run.nesting > self.stack_budget:
            raise StackBudgetExceeded(
                f"más de {self.stack_budget} llamadas inline anidadas ({callee.name})")
        try:
            env: Dict[str, Place] = {}
            state_names: List[str] = []
            if callee.record is not None:
                state = self._load(run, receiver, 1)
                if not isinstance(state, RecordState) or state.record != callee.record:
                    raise TypeMismatch(f"{callee.name} sobre un receptor que no es {callee.record}")
                for var in state.env:
                    env[var.name] = self._restore(var)
                    state_names.append(var.name)
            env.update(self.bind_params(run, callee, actuals))

            outs = {p.name for p in callee.params
                    if p.group == OUT and not (callee.constructs and p.type == callee.constructs)}
            frame = Frame(callee.name, env, depth, outs,
                          inline_only or callee.record is not None or callee.constructs is not None)
            try:
                self.exec_block(run, frame, callee.body.stmts)
            except _Return:
                pass

            missing = sorted(outs - frame.produced)
            if missing:
                raise MissingOut(f"{callee.name} terminó sin producir {', '.join(missing)}")

            if callee.record is not None:
                new_state = RecordState(callee.record, tuple(
                    self._state_var(run, name, env[name]) for name in state_names))
                self._store(run, receiver, 1, new_state)
            if callee.constructs is not None:
                self._construct(run, callee, frame)
        finally:
            run.nesting -= 1

    def _state_var(self, run: _Run, name: str, place: Place) -> StateVar:
        return StateVar(name, place.type, self._snapshot(run, place), place.base, place.array)

    @staticmethod
    def _restore(var: StateVar) -> Place:
        kind = ItemKind.ARRAY if var.array else (
            ItemKind.SCALAR if var.type in SCALAR_TYPES else ItemKind.RECORD)
        cell = Cell(kind, var.type, len(var.values))
        for i, v in enumerate(var.values):
            if v is not None:
                cell.values[i] = v
                cell.resolved[i] = True
        return Place(cell, 1, len(var.values), var.type, var.base, var.array)

    def _construct(self, run: _Run, callee: Callee, frame: Frame):
        """Al terminar un constructor, su entorno se vuelve el estado de la instancia"""
        out = next(p for p in callee.params if p.group == OUT and p.type == callee.constructs)
        skip = {p.name for p in callee.params if p.group == OUT}
        state = RecordState(callee.constructs, tuple(
            self._state_var(run, name, place)
            for name, place in frame.env.items() if name not in skip))
        self._store(run, frame.env[out.name], 1, state)

    def _lengths(self, run: _Run, callee: Callee, actuals) -> Dict[str, Optional[int]]:
        """Longitudes de los parámetros arreglo; None si dependen de algo no disponible"""
        array_params = [p for p in callee.params if p.is_array]
        if not array_params:
            return {}
        env: Dict[str, Place] = {}
        for p, a in zip(callee.params, actuals):
            if p.group != IN or p.is_array or p.type not in SCALAR_TYPES:
                continue
            if isinstance(a, Val):
                env[p.name] = self._cell_place(p.type, a.value)
            elif self._readable(run, a):
                env[p.name] = self._cell_place(p.type, self._load(run, a, a.base))
        probe = Frame(callee.name, env, 0, set())
        lengths: Dict[str, Optional[int]] = {}
        for p in array_params:
            try:
                n = self.eval_expr(run, probe, p.length)
            except KeyError:
                lengths[p.name] = None
                continue
            if isinstance(n, bool) or not isinstance(n, int):
                raise TypeMismatch(f"la longitud de '{p.name}' no es entera")
            if n < 1:
                raise NonPositiveLength(f"'{p.name}' de {callee.name} con longitud {n}")
            lengths[p.name] = n
        return lengths

    def bind_params(self, run: _Run, callee: Callee, actuals) -> Dict[str, Place]:
        env: Dict[str, Place] = {}
        lengths = self._lengths(run, callee, actuals)
        for p, a in zip(callee.params, actuals):
            if isinstance(a, Val):
                if p.group != IN or p.is_array:
                    raise TypeMismatch(f"'{p.name}' de {callee.name} necesita una ubicación")
                env[p.name] = self._cell_place(p.type, a.value)
                continue
            if p.is_array:
                n = lengths.get(p.name)
                if n is None:
                    raise ReadOfUnresolved(f"longitud de '{p.name}' en {callee.name} no resuelta")
            else:
                n = 1
            if p.group == IN:
                if not (a.type == p.type or (a.type == "int" and p.type == "real")):
                    raise TypeMismatch(f"'{p.name}' de {callee.name} es {p.type}, el argumento {a.type}")
            elif a.type != p.type:
                raise TypeMismatch(f"'{p.name}' de {callee.name} es {p.type}, el argumento {a.type}")
            env[p.name] = a.fit(n, p.type, p.is_array, p.delegated)
        return env

    # ------------------------------------------------------------------
    # Sentencias
    # ------------------------------------------------------------------

    def exec_block(self, run: _Run, frame: Frame, stmts):
        for stmt in stmts:
            self.exec_stmt(run, frame, stmt)

    def exec_stmt(self, run: _Run, frame: Frame, stmt):
        if isinstance(stmt, Call):
            self.bind_call(run, frame, stmt)
        elif isinstance(stmt, Assign):
            self._assign(run, frame, stmt)
        elif isinstance(stmt, LocalDecl):
            self._declare(run, frame, stmt)
        elif isinstance(stmt, If):
            if self._truth(self.eval_expr(run, frame, stmt.cond)):
                self.exec_stmt(run, frame, stmt.then)
            elif stmt.orelse is not None:
                self.exec_stmt(run, frame, stmt.orelse)
        elif isinstance(stmt, Block):
            self.exec_block(run, frame, stmt.stmts)
        elif isinstance(stmt, Return):
            raise _Return()
        elif isinstance(stmt, MethodImpl):
            pass
        else:
            raise InvalidArgument(f"sentencia desconocida {stmt!r}")

    @staticmethod
    def _truth(value: Any) -> bool:
        if not isinstance(value, bool):
            raise TypeMismatch(f"la condición no es una comparación: {value!r}")
        return value

    def _declare(self, run: _Run, frame: Frame, decl: LocalDecl):
        record = decl.type not in SCALAR_TYPES
        for d in decl.declarators:
            if d.is_array:
                lo = self.eval_expr(run, frame, d.lo) if d.lo is not None else 1
                hi = self.eval_expr(run, frame, d.hi)
                if not all(isinstance(v, int) and not isinstance(v, bool) for v in (lo, hi)):
                    raise TypeMismatch(f"límites no enteros para '{d.name}'")
                n = hi - lo + 1
                if n < 1:
                    raise NonPositiveLength(f"arreglo local '{d.name}' de longitud {n}")
                frame.env[d.name] = Place(Cell(ItemKind.ARRAY, decl.type, n), 1, n,
                                          decl.type, lo, True)
                continue
            kind = ItemKind.RECORD if record else ItemKind.SCALAR
            place = Place(Cell(kind, decl.type), 1, 1, decl.type)
            frame.env[d.name] = place
            if d.init is not None:
                self._store(run, place, 1, self.eval_expr(run, frame, d.init))

    def _assign(self, run: _Run, frame: Frame, stmt: Assign):
        target = stmt.target
        if isinstance(target, Index):
            place = frame.env[target.base]
            index = self.eval_expr(run, frame, target.index)
            value = self.eval_expr(run, frame, stmt.value)
            self._store(run, place, self._index(index), value)
            name = target.base
        else:
            place = frame.env[target.name]
            self._store(run, place, place.base, self.eval_expr(run, frame, stmt.value))
            name = target.name
        if name in frame.outs:
            frame.produced.add(name)

    @staticmethod
    def _index(value: Any) -> int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise TypeMismatch(f"índice no entero {value!r}")
        return value

    # ------------------------------------------------------------------
    # Expresiones
    # ------------------------------------------------------------------

    def eval_expr(self, run: _Run, frame: Frame, expr: Expr) -> Any:
        """Evalúa una expresión; KeyError si usa un nombre que el frame no tiene"""
        if isinstance(expr, IntLit):
            return expr.value
        if isinstance(expr, RealLit):
            return expr.value
        if isinstance(expr, Name):
            place = frame.env[expr.name]
            return self._load(run, place, place.base)
        if isinstance(expr, Index):
            place = frame.env[expr.base]
            return self._load(run, place, self._index(self.eval_expr(run, frame, expr.index)))
        if isinstance(expr, Binary):
            left = self.eval_expr(run, frame, expr.left)
            right = self.eval_expr(run, frame, expr.right)
            return arith(expr.op, left, right)
        if isinstance(expr, Unary):
            value = _number(self.eval_expr(run, frame, expr.operand))
            return -value if expr.op == "-" else value
        if isinstance(expr, Apply):
            if expr.func == "abs":
                return abs(_number(self.eval_expr(run, frame, expr.args[0])))
            raise InvalidArgument(f"función desconocida '{expr.func}'")
        if isinstance(expr, IncDec):
            place = frame.env[expr.target]
            old = self._load(run, place, place.base)
            if isinstance(old, bool) or not isinstance(old, int):
                raise TypeMismatch(f"{expr.op} sobre un valor no entero")
            new = old + 1 if expr.op == "++" else old - 1
            self._store(run, place, place.base, new)
            if expr.target in frame.outs:
                frame.produced.add(expr.target)
            return new if expr.prefix else old
        if isinstance(expr, Range):
            raise InvalidArgument("un rango sólo puede usarse como argumento de llamada")
        raise InvalidArgument(f"expresión desconocida {expr!r}")

    # ------------------------------------------------------------------
    # Llamadas
    # ------------------------------------------------------------------

    def _locate(self, run: _Run, frame: Frame, expr: Expr, param: Param) -> Place:
        if isinstance(expr, Name):
            place = frame.env.get(expr.name)
            if place is None:
                # Local implícito: primer uso como argumento out
                kind = ItemKind.SCALAR if param.type in SCALAR_TYPES else ItemKind.RECORD
                place = Place(Cell(kind, param.type), 1, 1, param.type)
                frame.env[expr.name] = place
            return place
        place = frame.env[expr.base]
        if isinstance(expr, Index):
            return place.element(self._index(self.eval_expr(run, frame, expr.index)))
        lo = self._index(self.eval_expr(run, frame, expr.lo))
        hi = self._index(self.eval_expr(run, frame, expr.hi))
        return place.slice(lo, hi)

    def _resolve_callee(self, run: _Run, frame: Frame, call: Call):
        if call.receiver is None:
            return self.callees[call.routine], None
        receiver = frame.env[call.receiver]
        return self.methods[(receiver.type, call.routine)], receiver

    def bind_call(self, run: _Run, frame: Frame, call: Call):
        """Evalúa los argumentos de una llamada y la ejecuta inline o la delega"""
        callee, receiver = self._resolve_callee(run, frame, call)
        actuals: List[Union[Val, Place]] = []
        for param, expr in zip(callee.params, call.args):
            if isinstance(expr, LOCATIONS):
                actuals.append(self._locate(run, frame, expr, param))
            else:
                actuals.append(Val(self.eval_expr(run, frame, expr)))

        lengths = self._lengths(run, callee, actuals)
        depth = frame.depth + 1
        available = self._available(run, callee, actuals, lengths, receiver)
        if frame.inline_only:
            if not available:
                raise AccessViolation(
                    f"{callee.name} necesita valores que {frame.title} no puede entregar inline")
            inline = True
        else:
            inline = available and self.policy.inline(depth, self._size_hint(run, callee, actuals))

        if inline:
            self._invoke(run, callee, actuals, depth, receiver, frame.inline_only)
        else:
            self._delegate(run, frame, call, callee, actuals, lengths, receiver, depth)

        for param, expr in zip(callee.params, call.args):
            if param.group != IN and isinstance(expr, LOCATIONS):
                base = expr.name if isinstance(expr, Name) else expr.base
                if base in frame.outs:
                    frame.produced.add(base)

    def _size_hint(self, run: _Run, callee: Callee, actuals) -> Optional[int]:
        for p, a in zip(callee.params, actuals):
            if p.group == IN and p.type == "int" and not p.is_array:
                if isinstance(a, Val):
                    return a.value
                if self._readable(run, a):
                    return self._load(run, a, a.base)
                return None
        return None

    def _available(self, run: _Run, callee: Callee, actuals, lengths, receiver) -> bool:
        if receiver is not None and not (self._readable(run, receiver) and self._writable(run, receiver)):
            return False
        for p, a in zip(callee.params, actuals):
            if isinstance(a, Val):
                continue
            n = lengths.get(p.name) if p.is_array else 1
            if n is None or n > a.length:
                return False
            window = Place(a.storage, a.first, n, a.type, 1, a.array, a.delegated)
            if p.group in (IN, INOUT) and not self._readable(run, window):
                return False
            if p.group in (INOUT, OUT) and not self._writable(run, window):
                return False
        return True

    def _item_of(self, run: _Run, place: Place) -> ItemId:
        storage = place.storage
        if isinstance(storage, Cell):
            return run.view.promote(storage)
        return storage

    def _delegate(self, run: _Run, frame: Frame, call: Call, callee: Callee, actuals,
                  lengths, receiver: Optional[Place], depth: int):
        view = run.view
        bindings = []
        for p, a, expr in zip(callee.params, actuals, call.args):
            label = format_expr(expr)
            if p.group == IN and not p.is_array and p.type in SCALAR_TYPES:
                if isinstance(a, Val):
                    value = coerce(p.type, a.value)
                    bindings.append(Literal(value, repr(value)))
                    continue
                if self._readable(run, a):
                    value = coerce(p.type, self._load(run, a, a.base))
                    bindings.append(Literal(value, repr(value)))
                    continue
            if isinstance(a, Val):
                raise TypeMismatch(f"'{p.name}' de {callee.name} necesita una ubicación")
            n = lengths.get(p.name) if p.is_array else 1
            if n is None:
                n = a.length
            if n > a.length:
                raise IndexOutOfBounds(
                    f"'{p.name}' de {callee.name} necesita {n} elemento(s) y el argumento tiene {a.length}")
            mode = (Mode.READ, Mode.READWRITE, Mode.WRITE)[p.group]
            bindings.append(self._hand(run, frame, a, n, mode, p.delegated, label, callee))

        receiver_ref = None
        if receiver is not None:
            receiver_ref = self._hand(run, frame, receiver, 1, Mode.READWRITE, False,
                                      call.receiver, callee)

        spec = TaskSpec(call.routine, tuple(bindings), callee.record, receiver_ref,
                        depth, callee.arity)
        view.children.append(spec)

    def _hand(self, run: _Run, frame: Frame, place: Place, n: int, mode: Mode,
              delegated: bool, label: str, callee: Callee) -> ItemRef:
        item = self._item_of(run, place)
        lo, hi = place.first, place.first + n - 1
        if not run.view.can_forward(item, lo, hi, mode):
            raise AccessViolation(
                f"{frame.title} no puede entregar '{label}' como {mode.value} a {callee.name}")
        run.view.hand(item, lo, hi, mode)
        return ItemRef(RegionRef(item, lo, hi), mode, delegated, label)
