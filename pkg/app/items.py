"""
Item Architecture: almacén de items con libro de accesos.

Un item es un escalar, un arreglo (índices 1..n) o una instancia de record.
Todos se guardan como una secuencia de celdas; un escalar o un record es
el caso de una sola celda. Cada item lleva un libro (ledger) de accesos
ordenados por número de secuencia de programa; dos accesos están en
conflicto si sus regiones se solapan y no son ambos lecturas, y los
accesos en conflicto se completan en orden de secuencia.

Asignación única: cada acceso de escritura compromete a lo sumo un valor
por celda. Repetir el commit con los mismos bits no hace nada (replay tras
una falla); con otros bits es ``ConflictingRecommit``.
"""

import math
import threading
from dataclasses import dataclass, field
from enum import Enum
from itertools import count
from typing import Any, Dict, Iterable, List, Optional, Tuple

from loguru import logger

from app.errors import (
    AccessViolation, ConflictingRecommit, NonPositiveLength, NotResolved,
    OutOfOrderCommit,
)


ItemId = int
SeqKey = Tuple[int, ...]


class ItemKind(str, Enum):
    SCALAR = "scalar"
    ARRAY = "array"
    RECORD = "record"


class Mode(str, Enum):
    READ = "read"
    WRITE = "write"
    READWRITE = "readwrite"

    @property
    def reads(self) -> bool:
        return self is not Mode.WRITE

    @property
    def writes(self) -> bool:
        return self is not Mode.READ


@dataclass(frozen=True)
class StateVar:
    """Variable privada de un record; 'None' marca celdas sin asignar"""
    name: str
    type: str
    values: Tuple[Any, ...]
    base: int = 1
    array: bool = False


@dataclass(frozen=True)
class RecordState:
    """Valor inmutable de una instancia de record: su entorno privado"""
    record: str
    env: Tuple[StateVar, ...]

    def lookup(self, name: str) -> StateVar:
        for var in self.env:
            if var.name == name:
                return var
        raise KeyError(name)


def same_bits(a: Any, b: Any) -> bool:
    """Igualdad exacta: enteros por valor, reales bit a bit"""
    if isinstance(a, float) or isinstance(b, float):
        if not (isinstance(a, float) and isinstance(b, float)):
            return False
        if math.isnan(a) and math.isnan(b):
            return True
        return a.hex() == b.hex()
    if isinstance(a, RecordState) and isinstance(b, RecordState):
        if a.record != b.record or len(a.env) != len(b.env):
            return False
        for v1, v2 in zip(a.env, b.env):
            if (v1.name, v1.type, v1.base, v1.array) != (v2.name, v2.type, v2.base, v2.array):
                return False
            if len(v1.values) != len(v2.values):
                return False
            if not all(same_bits(x, y) for x, y in zip(v1.values, v2.values)):
                return False
        return True
    return type(a) is type(b) and a == b


# ============================================================================
# REGIONES
# ============================================================================

@dataclass(frozen=True)
class RegionRef:
    """Región inclusiva ``[lo, hi]`` de un item (un elemento si lo == hi)"""
    item: ItemId
    lo: int
    hi: int

    def __post_init__(self):
        if not 1 <= self.lo <= self.hi:
            raise ValueError(f"región inválida [{self.lo}:{self.hi}]")

    @property
    def length(self) -> int:
        return self.hi - self.lo + 1

    def contains(self, index: int) -> bool:
        return self.lo <= index <= self.hi


def regions_overlap(r1: RegionRef, r2: RegionRef) -> bool:
    """Dos regiones se solapan si son del mismo item y sus rangos se cortan"""
    return r1.item == r2.item and r1.lo <= r2.hi and r2.lo <= r1.hi


# ============================================================================
# ITEMS Y ACCESOS
# ============================================================================

@dataclass
class Item:
    id: ItemId
    kind: ItemKind
    type: str
    length: int
    values: List[Any]
    resolved: List[bool]

    def is_resolved(self, lo: int = 1, hi: Optional[int] = None) -> bool:
        hi = self.length if hi is None else hi
        return all(self.resolved[lo - 1:hi])


@dataclass(frozen=True)
class ItemSpec:
    """Descripción de un item creado por una tarea durante su ejecución"""
    id: ItemId
    kind: ItemKind
    type: str
    length: int = 1


@dataclass
class Access:
    """Entrada del libro de un item"""
    task: int
    region: RegionRef
    mode: Mode
    seq: SeqKey
    delegated: bool = False
    done: bool = False
    committed: Dict[int, Any] = field(default_factory=dict)

    def conflicts(self, other: "Access") -> bool:
        if self.mode is Mode.READ and other.mode is Mode.READ:
            return False
        return regions_overlap(self.region, other.region)


class ItemStore:
    """
    Almacén de items con su libro de dependencias.

    Todas las mutaciones del libro se serializan con un lock interno.
    Las lecturas de valores ya resueltos no compiten con commits de otros
    items porque cada tarea sólo lee regiones cuyo orden ya está asegurado.
    """

    def __init__(self):
        self._lock = threading.RLock()
        self._ids = count(1)
        self.items: Dict[ItemId, Item] = {}
        # Accesos pendientes por item, en orden de seq
        self.pending: Dict[ItemId, List[Access]] = {}
        # Accesos completados por tarea (para replay idempotente)
        self.archive: Dict[int, List[Access]] = {}
        self.by_task: Dict[int, List[Access]] = {}

        logger.debug("ItemStore inicializado")

    # ------------------------------------------------------------------
    # Creación
    # ------------------------------------------------------------------

    def allocate_id(self) -> ItemId:
        with self._lock:
            return next(self._ids)

    def _create(self, kind: ItemKind, type_: str, length: int, item_id: Optional[ItemId] = None) -> ItemId:
        if length < 1:
            raise NonPositiveLength(f"longitud {length} para un item {kind.value}")
        with self._lock:
            if item_id is None:
                item_id = next(self._ids)
            self.items[item_id] = Item(item_id, kind, type_, length, [None] * length, [False] * length)
            self.pending[item_id] = []
            return item_id

    def new_scalar(self, type_: str) -> ItemId:
        return self._create(ItemKind.SCALAR, type_, 1)

    def new_array(self, type_: str, n: int) -> ItemId:
        return self._create(ItemKind.ARRAY, type_, n)

    def new_record(self, record: str) -> ItemId:
        return self._create(ItemKind.RECORD, record, 1)

    def create(self, spec: ItemSpec) -> ItemId:
        """Registra un item ya numerado por ``allocate_id``"""
        return self._create(spec.kind, spec.type, spec.length, spec.id)

    def item(self, item_id: ItemId) -> Item:
        try:
            return self.items[item_id]
        except KeyError:
            raise AccessViolation(f"item {item_id} inexistente") from None

    # ------------------------------------------------------------------
    # Lectura y escritura directa
    # ------------------------------------------------------------------

    def read(self, item_id: ItemId, index: int = 1) -> Any:
        item = self.item(item_id)
        if not 1 <= index <= item.length:
            raise AccessViolation(f"índice {index} fuera del item {item_id} (1..{item.length})")
        if not item.resolved[index - 1]:
            raise NotResolved(f"item {item_id}[{index}] pendiente")
        return item.values[index - 1]

    def read_all(self, item_id: ItemId) -> List[Any]:
        item = self.item(item_id)
        if not item.is_resolved():
            missing = [i + 1 for i, ok in enumerate(item.resolved) if not ok]
            raise NotResolved(f"item {item_id} con elementos pendientes {missing[:5]}")
        return list(item.values)

    def initialize(self, item_id: ItemId, values: Dict[int, Any]):
        """Carga inicial de un item recién creado (sin acceso asociado)"""
        with self._lock:
            item = self.item(item_id)
            for index, value in values.items():
                item.values[index - 1] = value
                item.resolved[index - 1] = True

    # ------------------------------------------------------------------
    # Libro de accesos
    # ------------------------------------------------------------------

    def register_accesses(self, task: int, accesses: Iterable[Tuple[RegionRef, Mode, SeqKey, bool]]):
        """Agrega los accesos de una tarea al libro de cada item, en orden de seq"""
        accesses = list(accesses)
        with self._lock:
            for region, _, _, _ in accesses:
                self.check_region(region)
            own = self.by_task.setdefault(task, [])
            for region, mode, seq, delegated in accesses:
                access = Access(task, region, Mode(mode), tuple(seq), delegated)
                ledger = self.pending[region.item]
                pos = len(ledger)
                while pos > 0 and ledger[pos - 1].seq > access.seq:
                    pos -= 1
                ledger.insert(pos, access)
                own.append(access)

    def check_region(self, region: RegionRef, length: Optional[int] = None):
        """La región debe caber en el item (``length`` para items aún no creados)"""
        if length is None:
            length = self.item(region.item).length
        if region.hi > length:
            raise AccessViolation(
                f"región [{region.lo}:{region.hi}] fuera del item {region.item} (1..{length})")

    def _blocked(self, access: Access) -> bool:
        for other in self.pending[access.region.item]:
            if other.seq >= access.seq:
                break
            if other.task != access.task and other.conflicts(access):
                return True
        return False

    def is_ready(self, task: int) -> bool:
        """
        Una tarea está lista si ningún acceso en conflicto con menor seq
        sigue pendiente y todo lo que lee (sin ``del``) ya está resuelto.
        Una tarea sin accesos está lista.
        """
        with self._lock:
            for access in self.by_task.get(task, []):
                if self._blocked(access):
                    return False
                if access.mode.reads and not access.delegated:
                    item = self.items[access.region.item]
                    if not item.is_resolved(access.region.lo, access.region.hi):
                        return False
            return True

    def _find_access(self, task: int, item_id: ItemId, index: int, writing: bool) -> Optional[Access]:
        for access in self.by_task.get(task, []) + self.archive.get(task, []):
            if access.region.item == item_id and access.region.contains(index):
                if not writing or access.mode.writes:
                    return access
        return None

    def _pending_writes(self, task: int, item_id: ItemId, values: Dict[int, Any]) -> List[Tuple[Access, int, Any]]:
        """Valida un commit sin mutar nada; devuelve las celdas que faltan escribir"""
        self.item(item_id)
        todo = []
        for index, value in sorted(values.items()):
            access = self._find_access(task, item_id, index, writing=True)
            if access is None:
                raise AccessViolation(
                    f"la tarea {task} no tiene acceso de escritura a item {item_id}[{index}]")
            if index in access.committed:
                if same_bits(access.committed[index], value):
                    continue
                raise ConflictingRecommit(
                    f"item {item_id}[{index}]: ya comprometido {access.committed[index]!r}, "
                    f"nuevo valor {value!r}")
            if not access.done and self._blocked(access):
                raise OutOfOrderCommit(
                    f"item {item_id}[{index}]: hay un acceso anterior en conflicto pendiente")
            todo.append((access, index, value))
        return todo

    def check_writes(self, task: int, writes: Dict[ItemId, Dict[int, Any]]):
        """Valida todas las escrituras de una tarea antes de aplicar alguna"""
        with self._lock:
            for item_id, values in writes.items():
                self._pending_writes(task, item_id, values)

    def resolve(self, task: int, item_id: ItemId, values: Dict[int, Any]):
        """
        Compromete valores de celdas a través del acceso de escritura de ``task``.
        Si alguna celda falla no se escribe ninguna.

        Raises:
            AccessViolation: la tarea no tiene acceso de escritura a esas celdas
            OutOfOrderCommit: un acceso anterior en conflicto sigue pendiente
            ConflictingRecommit: el acceso ya comprometió otro valor
        """
        with self._lock:
            item = self.item(item_id)
            for access, index, value in self._pending_writes(task, item_id, values):
                access.committed[index] = value
                item.values[index - 1] = value
                item.resolved[index - 1] = True

    def complete(self, task: int) -> List[ItemId]:
        """Marca como hechos todos los accesos de la tarea; devuelve los items tocados"""
        with self._lock:
            touched = []
            for access in self.by_task.pop(task, []):
                ledger = self.pending[access.region.item]
                ledger.remove(access)
                access.done = True
                self.archive.setdefault(task, []).append(access)
                touched.append(access.region.item)
            return touched

    def waiting_on(self, item_ids: Iterable[ItemId]) -> List[int]:
        """Tareas con accesos pendientes sobre alguno de los items"""
        with self._lock:
            tasks = set()
            for item_id in item_ids:
                for access in self.pending.get(item_id, []):
                    tasks.add(access.task)
            return sorted(tasks)
