"""
Task System: pool de tareas, delegación y responsabilidad.

Una tarea es una rutina ligada a sus items más un número de secuencia de
programa. El pool guarda las tareas que todavía no terminaron; una tarea
lista se toma, se ejecuta su cuerpo y su resultado (``Outcome``) se
compromete de forma atómica:

- Resoluciones: la tarea escribe sus outs/inouts y desaparece del pool.
- Delegación: además de lo que escribió, la tarea se reemplaza por hijas
  que heredan su posición en el orden de programa (seq del padre + i) y
  la responsabilidad por los outs que no resolvió.
"""

import threading
from collections import Counter, deque
from dataclasses import dataclass, field
from enum import Enum
from itertools import count
from typing import Any, Callable, Dict, Iterable, List, Optional, Tuple, Union

from loguru import logger

from app.errors import (
    AccessViolation, NonPositiveLength, PoolCapacityExceeded, PoolStalled, ResponsibilityGap,
    UsageError,
)
from app.items import ItemId, ItemSpec, ItemStore, Mode, RegionRef, SeqKey
from app.trace import TraceSink


DEFAULT_POOL_CAPACITY = 1_000_000


# ============================================================================
# LIGADURAS Y TAREAS
# ============================================================================

@dataclass(frozen=True)
class Literal:
    """Un in ya evaluado (instantánea del valor)"""
    value: Any
    label: str = field(default="", compare=False)


@dataclass(frozen=True)
class ItemRef:
    """Un parámetro ligado a una región de un item"""
    region: RegionRef
    mode: Mode
    delegated: bool = False
    label: str = field(default="", compare=False)


Binding = Union[Literal, ItemRef]


@dataclass(frozen=True)
class TaskSpec:
    """Descripción de una tarea a crear: rutina (o método) y sus ligaduras"""
    routine: str
    args: Tuple[Binding, ...]
    record: Optional[str] = None
    receiver: Optional[ItemRef] = None
    depth: int = 0
    groups: Tuple[int, int, int] = field(default=(0, 0, 0), compare=False)

    @property
    def name(self) -> str:
        return f"{self.record}.{self.routine}" if self.record else self.routine

    @property
    def refs(self) -> List[ItemRef]:
        refs = [b for b in self.args if isinstance(b, ItemRef)]
        if self.receiver is not None:
            refs.insert(0, self.receiver)
        return refs

    @property
    def outs(self) -> List[RegionRef]:
        """Regiones de las que esta tarea es responsable (sus outs)"""
        return [b.region for b in self.args if isinstance(b, ItemRef) and b.mode is Mode.WRITE]

    def label(self) -> str:
        """Forma legible ``fib(9;;x)``"""
        parts = [b.label or (repr(b.value) if isinstance(b, Literal) else f"#{b.region.item}")
                 for b in self.args]
        n_in, n_inout, _ = self.groups if sum(self.groups) == len(parts) else (len(parts), 0, 0)
        text = ";".join([", ".join(parts[:n_in]),
                         ", ".join(parts[n_in:n_in + n_inout]),
                         ", ".join(parts[n_in + n_inout:])])
        head = f"{self.receiver.label}.{self.routine}" if self.receiver is not None else self.routine
        return f"{head}({text})"


class TaskState(str, Enum):
    PENDING = "pending"
    READY = "ready"
    RUNNING = "running"


@dataclass
class Task:
    id: int
    spec: TaskSpec
    seq: SeqKey
    parent: Optional[int] = None
    state: TaskState = TaskState.PENDING
    attempts: int = 0

    @property
    def depth(self) -> int:
        return self.spec.depth

    @property
    def routine(self) -> str:
        return self.spec.name

    def __repr__(self) -> str:
        return f"Task({self.id}, {self.spec.label()}, seq={self.seq}, {self.state.value})"


@dataclass
class Outcome:
    """Resultado de ejecutar un cuerpo: escrituras, items nuevos e hijas"""
    writes: Dict[ItemId, Dict[int, Any]] = field(default_factory=dict)
    created: List[ItemSpec] = field(default_factory=list)
    children: List[TaskSpec] = field(default_factory=list)

    @property
    def is_delegation(self) -> bool:
        return bool(self.children)

    @property
    def kind(self) -> str:
        return "delegation" if self.children else "resolutions"


# ============================================================================
# POLÍTICA INLINE / DELEGACIÓN
# ============================================================================

class PolicyMode(str, Enum):
    DELEGATE_ALWAYS = "delegate-always"
    INLINE_ALWAYS = "inline-always"
    INLINE_BELOW_DEPTH = "inline-below-depth"
    INLINE_BELOW_SIZE = "inline-below-size"


@dataclass(frozen=True)
class Policy:
    """
    Decide, por sitio de llamada, si se evalúa en el lugar o se delega.

    - ``inline-below-depth:d``: inline cuando la profundidad de llamada es >= d
    - ``inline-below-size:n``: inline cuando el primer in entero es < n
    """
    mode: PolicyMode = PolicyMode.DELEGATE_ALWAYS
    limit: int = 0

    @classmethod
    def parse(cls, text: Union[str, "Policy"]) -> "Policy":
        if isinstance(text, Policy):
            return text
        name, _, arg = str(text).strip().partition(":")
        try:
            mode = PolicyMode(name)
        except ValueError:
            raise UsageError(f"política desconocida '{text}'") from None
        needs_arg = mode in (PolicyMode.INLINE_BELOW_DEPTH, PolicyMode.INLINE_BELOW_SIZE)
        if needs_arg != bool(arg):
            raise UsageError(f"la política '{name}' {'requiere' if needs_arg else 'no admite'} ':N'")
        limit = 0
        if arg:
            try:
                limit = int(arg)
            except ValueError:
                raise UsageError(f"límite inválido en la política '{text}'") from None
            if limit < 0:
                raise UsageError(f"límite negativo en la política '{text}'")
        return cls(mode, limit)

    def inline(self, depth: int, size: Optional[int] = None) -> bool:
        if self.mode is PolicyMode.INLINE_ALWAYS:
            return True
        if self.mode is PolicyMode.DELEGATE_ALWAYS:
            return False
        if self.mode is PolicyMode.INLINE_BELOW_DEPTH:
            return depth >= self.limit
        return size is not None and size < self.limit

    def __str__(self) -> str:
        if self.mode in (PolicyMode.INLINE_BELOW_DEPTH, PolicyMode.INLINE_BELOW_SIZE):
            return f"{self.mode.value}:{self.limit}"
        return self.mode.value


# ============================================================================
# POOL
# ============================================================================

class TaskPool:
    """
    Pool de tareas pendientes, listas y en ejecución.

    Las transiciones pending → ready → running → (fuera del pool) son
    atómicas bajo ``self.lock``. ``cond`` permite que los workers de un
    ejecutor paralelo esperen nuevas tareas listas.
    """

    def __init__(
        self,
        store: Optional[ItemStore] = None,
        scheduling: str = "lifo",
        capacity: int = DEFAULT_POOL_CAPACITY,
        trace: Optional[TraceSink] = None,
        clock: Optional[Callable[[], float]] = None,
    ):
        if scheduling not in ("lifo", "fifo"):
            raise UsageError(f"orden de planificación desconocido '{scheduling}'")
        self.store = store or ItemStore()
        self.scheduling = scheduling
        self.capacity = capacity
        self.trace = trace
        self.clock = clock or (lambda: 0.0)

        self.lock = threading.RLock()
        self.cond = threading.Condition(self.lock)
        self.tasks: Dict[int, Task] = {}
        # Todas las tareas creadas, para analizar la traza
        self.history: List[Task] = []
        self._ready: deque = deque()
        self._ids = count(1)
        self._roots = 0

        # Estadísticas
        self.peak = 0
        self.commits = 0
        self.requeues = 0
        self.spawned = 0

        logger.debug(f"TaskPool inicializado (orden={scheduling}, capacidad={capacity})")

    # ------------------------------------------------------------------
    # Consultas
    # ------------------------------------------------------------------

    def __len__(self) -> int:
        return len(self.tasks)

    @property
    def drained(self) -> bool:
        return not self.tasks

    @property
    def running(self) -> List[Task]:
        with self.lock:
            return [t for t in self.tasks.values() if t.state is TaskState.RUNNING]

    @property
    def stalled(self) -> bool:
        """Hay tareas pero ninguna lista ni en ejecución"""
        with self.lock:
            return bool(self.tasks) and not self._ready and not self.running

    def ready_tasks(self) -> List[Task]:
        """Instantánea de las tareas listas, en orden de seq"""
        with self.lock:
            return sorted(self._ready, key=lambda t: t.seq)

    def responsibility(self) -> Counter:
        """Multiconjunto de items out pendientes (uno por tarea responsable)"""
        with self.lock:
            return Counter(region.item for task in self.tasks.values() for region in task.spec.outs)

    def _emit(self, kind: str, task: Optional[Task], worker: Optional[int] = None):
        if self.trace is not None:
            self.trace.emit(self.clock(), kind, task.id if task else None, worker)

    # ------------------------------------------------------------------
    # Inserción
    # ------------------------------------------------------------------

    def _check_capacity(self, extra: int):
        if len(self.tasks) + extra > self.capacity:
            raise PoolCapacityExceeded(
                f"el pool superó la capacidad de {self.capacity} tareas")

    def _insert(self, spec: TaskSpec, seq: SeqKey, parent: Optional[int]) -> Task:
        task = Task(next(self._ids), spec, seq, parent)
        self.store.register_accesses(
            task.id,
            [(ref.region, ref.mode, seq, ref.delegated) for ref in spec.refs],
        )
        self.tasks[task.id] = task
        self.history.append(task)
        self.spawned += 1
        self._emit("spawned", task)
        self.peak = max(self.peak, len(self.tasks))
        return task

    def spawn_root(self, spec: TaskSpec) -> Task:
        """Agrega una tarea raíz; las raíces se ordenan por orden de llegada"""
        with self.lock:
            self._check_capacity(1)
            self._roots += 1
            task = self._insert(spec, (self._roots,), None)
            self._refresh([task.id])
            return task

    def _refresh(self, task_ids: Iterable[int]):
        candidates = [self.tasks[t] for t in task_ids if t in self.tasks]
        for task in sorted(candidates, key=lambda t: t.seq):
            if task.state is TaskState.PENDING and self.store.is_ready(task.id):
                task.state = TaskState.READY
                self._ready.append(task)

    # ------------------------------------------------------------------
    # Ejecución
    # ------------------------------------------------------------------

    def take_ready(self, worker: Optional[int] = None) -> Optional[Task]:
        """Pasa una tarea lista a ejecución (LIFO o FIFO); None si no hay"""
        with self.lock:
            if not self._ready:
                return None
            task = self._ready.pop() if self.scheduling == "lifo" else self._ready.popleft()
            task.state = TaskState.RUNNING
            task.attempts += 1
            self._emit("started", task, worker)
            return task

    def check_responsibility(self, task: Task, outcome: Outcome):
        """Cada out del padre debe quedar escrito por él o ligado a una hija"""
        for region in task.spec.outs:
            covered = set(outcome.writes.get(region.item, {}))
            for child in outcome.children:
                for ref in child.refs:
                    if ref.region.item == region.item and ref.mode.writes:
                        covered.update(range(ref.region.lo, ref.region.hi + 1))
            missing = [i for i in range(region.lo, region.hi + 1) if i not in covered]
            if missing:
                raise ResponsibilityGap(
                    f"{task.spec.label()} no resuelve ni delega el out "
                    f"#{region.item}[{missing[0]}]")

    def _validate(self, task: Task, outcome: Outcome):
        """Todo lo que puede fallar en un commit, antes de tocar el pool o el almacén"""
        self.check_responsibility(task, outcome)
        self._check_capacity(len(outcome.children) - 1)
        lengths = {}
        for spec in outcome.created:
            if spec.length < 1:
                raise NonPositiveLength(f"longitud {spec.length} para un item {spec.kind.value}")
            lengths[spec.id] = spec.length
        for child in outcome.children:
            for ref in child.refs:
                self.store.check_region(ref.region, lengths.get(ref.region.item))
        self.store.check_writes(task.id, {item_id: values for item_id, values in outcome.writes.items()
                                          if item_id not in lengths})

    def commit_outcome(self, task: Task, outcome: Outcome, worker: Optional[int] = None):
        """
        Compromete el resultado de una tarea en ejecución.

        Orden atómico: crear items nuevos, aplicar escrituras del padre,
        liberar sus accesos, insertar hijas y recalcular quién está listo.
        Si el resultado no es válido no se aplica nada y la tarea sigue
        en ejecución.

        Raises:
            ResponsibilityGap: una delegación deja un out sin responsable
            PoolCapacityExceeded: las hijas no entran en el pool
        """
        with self.lock:
            if self.tasks.get(task.id) is not task or task.state is not TaskState.RUNNING:
                raise AccessViolation(f"{task!r} no está en ejecución en este pool")
            self._validate(task, outcome)

            created = set()
            for spec in outcome.created:
                self.store.create(spec)
                created.add(spec.id)
            for item_id, values in outcome.writes.items():
                if item_id in created:
                    self.store.initialize(item_id, values)
                else:
                    self.store.resolve(task.id, item_id, values)
            touched = set(self.store.complete(task.id))

            del self.tasks[task.id]
            children = []
            for i, spec in enumerate(outcome.children, start=1):
                children.append(self._insert(spec, task.seq + (i,), task.id))
                touched.update(ref.region.item for ref in spec.refs)

            self.commits += 1
            self._emit("delegated" if children else "resolved", task, worker)
            self._refresh(set(self.store.waiting_on(touched)) | {c.id for c in children})
            self.cond.notify_all()

    def requeue(self, task: Task, worker: Optional[int] = None):
        """Devuelve al pool una tarea cuyo worker falló; sus accesos siguen vigentes"""
        with self.lock:
            if self.tasks.get(task.id) is not task or task.state is not TaskState.RUNNING:
                raise AccessViolation(f"{task!r} no está en ejecución en este pool")
            task.state = TaskState.READY
            self._ready.append(task)
            self.requeues += 1
            self._emit("requeued", task, worker)
            self.cond.notify_all()

    def raise_if_stalled(self):
        if self.stalled:
            blocked = sorted(self.tasks.values(), key=lambda t: t.seq)[:3]
            raise PoolStalled(
                f"{len(self.tasks)} tarea(s) sin poder ejecutarse; primeras: "
                + ", ".join(t.spec.label() for t in blocked))

