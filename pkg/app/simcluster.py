"""
Cluster simulado: simulación de eventos discretos sobre el pool de tareas.

Los workers tienen velocidad propia, se dan de alta y de baja y pueden
caerse. Una caída aborta la tarea en vuelo (sus escrituras nunca llegan al
almacén porque el commit es atómico) y la devuelve al pool; el worker se
reinicia después de ``restart_delay``. Una baja es ordenada: el worker
termina su tarea y recién entonces se va.

Todo es determinista: a igual plan y semilla, igual traza byte a byte.
Los eventos de igual instante se procesan en el orden
fin < baja < caída < alta, y luego por orden de inserción.
"""

import heapq
import random
from dataclasses import dataclass
from itertools import count
from typing import Dict, List, Optional, Tuple

from loguru import logger

from app.errors import StalledForever
from app.evaluator import BodyEvaluator
from app.executors import RootSet, RunResult, _make_pool, busy_fractions, collect, recursion_limit
from app.models import RunStats, SimPlan, SystemConfig
from app.settings import get_settings
from app.syntax import Program
from app.tasks import Outcome, Task
from app.trace import TraceSink


FINISH, LEAVE, CRASH, JOIN = 0, 1, 2, 3


@dataclass
class SimWorker:
    id: int
    speed: float
    alive: bool = False
    gone: bool = False
    leaving: bool = False
    epoch: int = 0
    task: Optional[Task] = None
    outcome: Optional[Outcome] = None
    started: float = 0.0
    idle_since: float = 0.0
    busy: float = 0.0


class SimCluster:
    """Una corrida simulada; se usa una vez"""

    def __init__(self, program: Program, roots: RootSet, plan: SimPlan,
                 policy: Optional[str] = None, seed: Optional[int] = None,
                 trace: Optional[TraceSink] = None, settings: Optional[SystemConfig] = None):
        self.settings = settings or get_settings()
        self.plan = plan
        self.roots = roots
        self.seed = plan.seed if seed is None else seed
        self.trace = trace
        self.now = 0.0
        self.evaluator = BodyEvaluator(program, policy or self.settings.executors.sim_policy,
                                       self.settings.runtime.stack_budget)
        self.pool = _make_pool(roots, self.settings, trace, lambda: self.now)
        self.workers: Dict[int, SimWorker] = {w.id: SimWorker(w.id, w.speed) for w in plan.workers}
        self._events: List[Tuple[float, int, int, int, int]] = []
        self._order = count()
        self.last_commit = 0.0
        self.aborted = 0

        for w in plan.workers:
            self._push(w.join, JOIN, w.id)
            if w.leave is not None:
                self._push(w.leave, LEAVE, w.id)
            for t in w.crashes:
                self._push(t, CRASH, w.id)
        rng = random.Random(self.seed)
        ids = sorted(self.workers)
        for _ in range(plan.random_crashes):
            t = rng.uniform(0, plan.crash_horizon)
            self._push(t, CRASH, rng.choice(ids))

        logger.info(f"🖥️ SimCluster: {len(self.workers)} worker(s), semilla {self.seed}")

    # ------------------------------------------------------------------

    def _push(self, time: float, kind: int, worker: int, epoch: int = 0):
        heapq.heappush(self._events, (float(time), kind, next(self._order), worker, epoch))

    def _emit(self, kind: str, worker: int):
        if self.trace is not None:
            self.trace.emit(self.now, kind, None, worker)

    def _duration(self, worker: SimWorker, task: Task) -> float:
        return self.plan.cost(task.spec.name) / worker.speed + self.plan.dispatch_overhead

    def _dispatch(self):
        """Asigna tareas listas a workers libres: primero el que está libre hace más tiempo"""
        idle = sorted((w for w in self.workers.values() if w.alive and w.task is None and not w.leaving),
                      key=lambda w: (w.idle_since, w.id))
        for worker in idle:
            task = self.pool.take_ready(worker.id)
            if task is None:
                break
            worker.task = task
            worker.outcome = self.evaluator.eval_body(task, self.roots.store)
            worker.started = self.now
            self._push(self.now + self._duration(worker, task), FINISH, worker.id, worker.epoch)

    def _depart(self, worker: SimWorker):
        worker.alive = False
        worker.gone = True
        self._emit("worker-left", worker.id)

    # ------------------------------------------------------------------

    def _on_finish(self, worker: SimWorker, epoch: int):
        if epoch != worker.epoch or worker.task is None:
            return  # fin de una ejecución abortada
        task, outcome = worker.task, worker.outcome
        worker.task = worker.outcome = None
        worker.busy += self.now - worker.started
        worker.idle_since = self.now
        self.pool.commit_outcome(task, outcome, worker.id)
        self.last_commit = self.now
        if worker.leaving:
            self._depart(worker)

    def _on_leave(self, worker: SimWorker):
        if worker.gone:
            return
        if worker.task is not None:
            worker.leaving = True
        elif worker.alive:
            self._depart(worker)
        else:
            worker.gone = True

    def _on_crash(self, worker: SimWorker):
        if not worker.alive:
            return
        if worker.task is not None:
            worker.busy += self.now - worker.started
            self.pool.requeue(worker.task, worker.id)
            logger.warning(f"⚠️ Worker {worker.id} caído en t={self.now}; "
                           f"tarea {worker.task.id} devuelta al pool")
            worker.task = worker.outcome = None
            self.aborted += 1
        worker.epoch += 1
        worker.alive = False
        self._emit("worker-crashed", worker.id)
        if worker.leaving:
            worker.gone = True
        else:
            self._push(self.now + self.plan.restart_delay, JOIN, worker.id)

    def _on_join(self, worker: SimWorker):
        if worker.alive or worker.gone:
            return
        worker.alive = True
        worker.idle_since = self.now
        self._emit("worker-joined", worker.id)

    # ------------------------------------------------------------------

    def run(self) -> RunResult:
        """
        Procesa eventos hasta vaciar el pool.

        Raises:
            StalledForever: quedan tareas y ningún worker volverá a estar disponible
            PoolStalled: quedan tareas, ninguna lista y ninguna en ejecución
        """
        handlers = {LEAVE: self._on_leave, CRASH: self._on_crash, JOIN: self._on_join}
        with recursion_limit(self.settings.runtime.recursion_limit):
            while not self.pool.drained:
                if not self._events:
                    raise StalledForever(
                        f"quedan {len(self.pool)} tarea(s) y ningún worker volverá a estar disponible")
                time, kind, _, wid, epoch = heapq.heappop(self._events)
                self.now = time
                worker = self.workers[wid]
                if kind == FINISH:
                    self._on_finish(worker, epoch)
                else:
                    handlers[kind](worker)
                self._dispatch()
                # Nada listo ni en ejecución: ningún evento futuro lo destraba
                self.pool.raise_if_stalled()

        makespan = self.last_commit
        stats = RunStats(
            makespan=makespan,
            tasks_executed=self.pool.commits,
            re_executions=self.aborted,
            peak_pool=self.pool.peak,
            busy=busy_fractions({w.id: w.busy for w in self.workers.values()}, makespan),
        )
        logger.info(f"✅ Simulación terminada: makespan={makespan}, "
                    f"{self.pool.commits} tarea(s), {self.aborted} re-ejecución(es)")
        return collect(self.roots, self.pool, self.trace, stats)


def run_simcluster(program: Program, roots: RootSet, plan: SimPlan,
                   policy: Optional[str] = None, seed: Optional[int] = None,
                   trace: Optional[TraceSink] = None,
                   settings: Optional[SystemConfig] = None) -> RunResult:
    """Corre las raíces en el cluster simulado descrito por ``plan``"""
    return SimCluster(program, roots, plan, policy, seed, trace, settings).run()
