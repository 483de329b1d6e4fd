"""
Ejecutores del pool de tareas.

- ``run_sequential``: un solo worker con política inline-always; es el
  oráculo con el que se comparan los demás.
- ``run_parallel``: n workers reales (``ThreadPoolExecutor``) tomando
  tareas listas del mismo pool.
- ``run_simcluster`` (en ``app.simcluster``): cluster simulado determinista.

Todos arrancan de un ``RootSet``: las tareas raíz y los items cuyos
valores se informan al final.
"""

import sys
import time
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from loguru import logger

from app.errors import (
    ArityMismatch, InvalidArgument, PoolStalled, UndefinedName, UsageError,
)
from app.evaluator import BodyEvaluator, coerce
from app.items import ItemId, ItemKind, ItemStore, Mode, RegionRef, same_bits
from app.models import CompareReport, RunStats, SystemConfig
from app.settings import get_settings
from app.syntax import IN, INOUT, OUT, SCALAR_TYPES, Call, Name, Program, format_call
from app.tasks import ItemRef, Literal, Task, TaskPool, TaskSpec
from app.trace import TraceSink
from app.workload import EventRecord, format_value


# ============================================================================
# RAÍCES
# ============================================================================

@dataclass
class RootSet:
    """Tareas raíz de una corrida y los items que se informan al terminar"""
    specs: List[TaskSpec]
    # nombre → (item, es arreglo), en orden de impresión
    bindings: Dict[str, Tuple[ItemId, bool]]
    store: ItemStore
    # Para workloads: nombres de las salidas de cada evento, en orden de índice
    records: Optional[List[List[str]]] = None


def _check_entry(program: Program):
    if not program.checked:
        raise UsageError("el programa debe chequearse antes de ejecutarse")


def _out_item(store: ItemStore, program: Program, param, length: Optional[int]) -> ItemId:
    if param.is_array:
        return store.new_array(param.type, length)
    if param.type in SCALAR_TYPES:
        return store.new_scalar(param.type)
    return store.new_record(param.type)


def default_call(program: Program) -> Call:
    """Llamada a la rutina de entrada cuando no se da ``--entry``: sin ins ni inouts"""
    routine = program.routine(program.entry) if program.entry else None
    if routine is None:
        raise UsageError("el programa no define rutinas")
    groups = routine.signature.groups
    if groups[IN] or groups[INOUT]:
        raise UsageError(
            f"la rutina de entrada '{routine.name}' tiene ins o inouts; indicar --entry")
    return Call(routine.name, ([], [], [Name(p.name) for p in groups[OUT]]))


def prepare_entry(program: Program, call: Optional[Call] = None,
                  store: Optional[ItemStore] = None) -> RootSet:
    """
    Arma la tarea raíz de una llamada de entrada como ``fib(10;;a)``.

    Los ins son constantes; un inout escalar es un literal que se carga en
    un item nuevo; cada out es un nombre nuevo que se vuelve un item vacío.
    """
    _check_entry(program)
    call = call or default_call(program)
    routine = program.routine(call.routine)
    if routine is None or routine.is_prototype or call.receiver is not None:
        raise UndefinedName(f"rutina de entrada inexistente: '{format_call(call)}'",
                            call.line, call.col)
    arity = routine.signature.arity
    if tuple(len(g) for g in call.groups) != arity:
        raise ArityMismatch(
            f"'{routine.name}' espera {arity} argumentos por grupo", call.line, call.col)

    store = store or ItemStore()
    evaluator = BodyEvaluator(program)
    ins: Dict[str, Any] = {}
    for p, expr in zip(routine.signature.groups[IN], call.groups[IN]):
        if p.is_array or p.type not in SCALAR_TYPES:
            raise InvalidArgument(f"el in '{p.name}' no puede darse como literal", call.line, call.col)
        ins[p.name] = coerce(p.type, evaluator.constant(expr))
    lengths = evaluator.entry_lengths(routine.name, ins)

    args = [Literal(ins[p.name], format_value(ins[p.name])) for p in routine.signature.groups[IN]]
    bindings: Dict[str, Tuple[ItemId, bool]] = {}
    for p, expr in zip(routine.signature.groups[INOUT], call.groups[INOUT]):
        if p.is_array or p.type not in SCALAR_TYPES:
            raise InvalidArgument(f"el inout '{p.name}' no puede darse como literal", call.line, call.col)
        item = store.new_scalar(p.type)
        store.initialize(item, {1: coerce(p.type, evaluator.constant(expr))})
        args.append(ItemRef(RegionRef(item, 1, 1), Mode.READWRITE, p.delegated, p.name))
        bindings[p.name] = (item, False)
    for p, expr in zip(routine.signature.groups[OUT], call.groups[OUT]):
        if not isinstance(expr, Name):
            raise InvalidArgument("cada out de la entrada debe ser un nombre nuevo", call.line, call.col)
        if expr.name in bindings:
            raise InvalidArgument(f"out repetido '{expr.name}'", expr.line, expr.col)
        item = _out_item(store, program, p, lengths.get(p.name))
        length = store.item(item).length
        args.append(ItemRef(RegionRef(item, 1, length), Mode.WRITE, p.delegated, expr.name))
        bindings[expr.name] = (item, p.is_array)

    spec = TaskSpec(routine.name, tuple(args), groups=arity)
    logger.info(f"🚀 Entrada {spec.label()}")
    return RootSet([spec], bindings, store)


def prepare_workload(program: Program, routine_name: str, events: Sequence[EventRecord],
                     store: Optional[ItemStore] = None) -> RootSet:
    """Una tarea raíz por evento, con items out nuevos nombrados ``<índice>.<out>``"""
    _check_entry(program)
    routine = program.routine(routine_name)
    if routine is None:
        raise UndefinedName(f"rutina de workload inexistente: '{routine_name}'")
    store = store or ItemStore()
    specs, bindings, records = [], {}, []
    for event in events:
        args: List = [Literal(coerce(p.type, v), format_value(v))
                      for p, v in zip(routine.signature.groups[IN], event.payload)]
        names = []
        for p in routine.signature.groups[OUT]:
            item = store.new_scalar(p.type)
            name = f"{event.index}.{p.name}"
            args.append(ItemRef(RegionRef(item, 1, 1), Mode.WRITE, False, name))
            bindings[name] = (item, False)
            names.append(name)
        specs.append(TaskSpec(routine.name, tuple(args), groups=routine.signature.arity))
        records.append(names)
    return RootSet(specs, bindings, store, records)


# ============================================================================
# RESULTADOS
# ============================================================================

@dataclass
class RunResult:
    """Valores finales, salidas de workload, traza y estadísticas de una corrida"""
    values: Dict[str, Any]
    outputs: Optional[List[List[Any]]] = None
    trace: Optional[TraceSink] = None
    stats: RunStats = field(default_factory=RunStats)
    tasks: List[Task] = field(default_factory=list)

    def lines(self) -> List[str]:
        """Líneas ``nombre = valor`` (reales con 17 dígitos)"""
        return [f"{name} = {format_value(value)}" for name, value in self.values.items()]


def collect(roots: RootSet, pool: TaskPool, trace: Optional[TraceSink], stats: RunStats) -> RunResult:
    store = roots.store
    values: Dict[str, Any] = {}
    for name, (item, is_array) in roots.bindings.items():
        values[name] = store.read_all(item) if is_array else store.read(item)
    outputs = None
    if roots.records is not None:
        outputs = [[values[name] for name in names] for names in roots.records]
    if trace is not None:
        trace.close()
    return RunResult(values, outputs, trace, stats, list(pool.history))


def busy_fractions(busy: Dict[int, float], span: float) -> Dict[int, float]:
    """Fracción del intervalo ``[0, span]`` que cada worker estuvo ocupado"""
    if not busy:
        return {}
    ids = sorted(busy)
    totals = np.array([busy[w] for w in ids], dtype=float)
    fractions = totals / span if span > 0 else np.zeros_like(totals)
    return {w: float(f) for w, f in zip(ids, np.clip(fractions, 0.0, 1.0))}


@contextmanager
def recursion_limit(limit: int):
    """Sube el límite de recursión del intérprete mientras dura la corrida"""
    previous = sys.getrecursionlimit()
    sys.setrecursionlimit(max(previous, limit))
    try:
        yield
    finally:
        sys.setrecursionlimit(previous)


def _make_pool(roots: RootSet, settings: SystemConfig, trace: Optional[TraceSink], clock) -> TaskPool:
    pool = TaskPool(roots.store, settings.runtime.scheduling.value,
                    settings.runtime.pool_capacity, trace, clock)
    for spec in roots.specs:
        pool.spawn_root(spec)
    return pool


# ============================================================================
# SECUENCIAL
# ============================================================================

def run_sequential(program: Program, roots: RootSet, policy: Optional[str] = None,
                   trace: Optional[TraceSink] = None,
                   settings: Optional[SystemConfig] = None) -> RunResult:
    """
    Oráculo: un worker toma tareas listas de a una y las ejecuta.

    El reloj de la traza cuenta tareas ejecutadas.
    """
    settings = settings or get_settings()
    evaluator = BodyEvaluator(program, policy or settings.executors.sequential_policy,
                              settings.runtime.stack_budget)
    steps = [0]
    pool = _make_pool(roots, settings, trace, lambda: float(steps[0]))

    with recursion_limit(settings.runtime.recursion_limit):
        while not pool.drained:
            task = pool.take_ready(0)
            if task is None:
                pool.raise_if_stalled()
                continue
            outcome = evaluator.eval_body(task, roots.store)
            pool.commit_outcome(task, outcome, 0)
            steps[0] += 1

    stats = RunStats(makespan=float(steps[0]), tasks_executed=pool.commits,
                     re_executions=0, peak_pool=pool.peak,
                     busy={0: 1.0} if steps[0] else {})
    logger.info(f"✅ Corrida secuencial: {pool.commits} tarea(s), pico del pool {pool.peak}")
    return collect(roots, pool, trace, stats)


# ============================================================================
# PARALELO
# ============================================================================

def run_parallel(program: Program, roots: RootSet, workers: int = 4,
                 policy: Optional[str] = None, trace: Optional[TraceSink] = None,
                 settings: Optional[SystemConfig] = None) -> RunResult:
    """
    n workers concurrentes sobre el mismo pool.

    Un worker sin tareas listas espera en la condición del pool; el primer
    error de cualquier worker aborta la corrida y se relanza.
    """
    if workers < 1:
        raise UsageError(f"se necesita al menos un worker (hay {workers})")
    settings = settings or get_settings()
    evaluator = BodyEvaluator(program, policy or settings.executors.parallel_policy,
                              settings.runtime.stack_budget)
    start = time.perf_counter()
    pool = _make_pool(roots, settings, trace, lambda: time.perf_counter() - start)

    errors: List[BaseException] = []
    busy: Dict[int, float] = {w: 0.0 for w in range(1, workers + 1)}

    def worker(wid: int):
        while True:
            with pool.cond:
                while True:
                    if errors or pool.drained:
                        return
                    task = pool.take_ready(wid)
                    if task is not None:
                        break
                    if pool.stalled:
                        try:
                            pool.raise_if_stalled()
                        except PoolStalled as e:
                            errors.append(e)
                        pool.cond.notify_all()
                        return
                    pool.cond.wait()
            began = time.perf_counter()
            try:
                outcome = evaluator.eval_body(task, roots.store)
                pool.commit_outcome(task, outcome, wid)
            except BaseException as e:
                with pool.cond:
                    errors.append(e)
                    pool.cond.notify_all()
                return
            finally:
                busy[wid] += time.perf_counter() - began

    logger.info(f"🚀 Corrida paralela con {workers} worker(s)")
    with recursion_limit(settings.runtime.recursion_limit):
        with ThreadPoolExecutor(max_workers=workers, thread_name_prefix="tsia-worker") as executor:
            futures = [executor.submit(worker, wid) for wid in range(1, workers + 1)]
            for future in futures:
                future.result()
    if errors:
        logger.error(f"❌ Corrida paralela abortada: {errors[0]}")
        raise errors[0]

    elapsed = time.perf_counter() - start
    stats = RunStats(makespan=elapsed, tasks_executed=pool.commits, re_executions=0,
                     peak_pool=pool.peak, busy=busy_fractions(busy, elapsed))
    logger.info(f"✅ Corrida paralela: {pool.commits} tarea(s) en {elapsed:.3f}s")
    return collect(roots, pool, trace, stats)


# ============================================================================
# COMPARACIÓN
# ============================================================================

def _same(a: Any, b: Any) -> bool:
    if isinstance(a, list) or isinstance(b, list):
        return (isinstance(a, list) and isinstance(b, list) and len(a) == len(b)
                and all(same_bits(x, y) for x, y in zip(a, b)))
    return same_bits(a, b)


def compare_runs(values1: Dict[str, Any], values2: Dict[str, Any]) -> CompareReport:
    """Compara dos conjuntos de valores bit a bit; informa el primer nombre distinto"""
    names = list(values1) + [n for n in values2 if n not in values1]
    for name in names:
        if name not in values1 or name not in values2:
            return CompareReport(identical=False, compared=len(names), first_divergence=name,
                                 detail=f"'{name}' está en una sola corrida")
        if not _same(values1[name], values2[name]):
            return CompareReport(
                identical=False, compared=len(names), first_divergence=name,
                detail=f"{name}: {format_value(values1[name])} != {format_value(values2[name])}")
    return CompareReport(identical=True, compared=len(names))
