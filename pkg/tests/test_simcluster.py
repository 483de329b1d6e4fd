"""
Tests del cluster simulado: makespan, velocidades, caídas, altas/bajas
y determinismo.
"""

import math
from collections import defaultdict

import pytest

from app.checker import check
from app.errors import InvalidPlan, MissingFile, StalledForever
from app.executors import prepare_entry, prepare_workload
from app.items import Mode, regions_overlap
from app.models import SimPlan, SystemConfig, WorkerSpec
from app.parser import parse_call, parse_source
from app.simcluster import run_simcluster
from app.trace import TraceSink
from app.workload import EventRecord

from conftest import CORPUS


WORK = "work(int i;; int o) { o = i * 2; }"


def sim_fib(program, n, plan, **options):
    roots = prepare_entry(program, parse_call(f"fib({n};;a)"))
    return run_simcluster(program, roots, plan, settings=SystemConfig(), **options)


def bag(n):
    program = check(parse_source(WORK))
    roots = prepare_workload(program, "work", [EventRecord(i, (i,)) for i in range(1, n + 1)])
    return program, roots


def intervals(result):
    """(inicio, fin, tarea) de cada ejecución que terminó en commit"""
    started, spans = {}, []
    for event in result.trace.events:
        if event.kind == "started":
            started[event.task] = event.time
        elif event.kind in ("resolved", "delegated"):
            spans.append((started.pop(event.task), event.time, event.task))
        elif event.kind == "requeued":
            started.pop(event.task, None)
    return spans


def conflicting(t1, t2) -> bool:
    for r1 in t1.spec.refs:
        for r2 in t2.spec.refs:
            if regions_overlap(r1.region, r2.region) and not (r1.mode is Mode.READ and r2.mode is Mode.READ):
                return True
    return False


class TestPlans:
    """Tests de validación de planes"""

    def test_load_corpus_plans(self):
        plan = SimPlan.from_yaml(CORPUS / "plans" / "crash3.plan")
        assert [w.crashes for w in plan.workers] == [[20.0, 50.0], [80.0], []]
        assert plan.cost("sum") == 0.5
        assert plan.cost("fib") == 1.0

    def test_missing_plan(self, tmp_path):
        with pytest.raises(MissingFile):
            SimPlan.from_yaml(tmp_path / "nada.plan")

    @pytest.mark.parametrize("text", [
        "workers: []",
        "workers: [{id: 1}, {id: 1}]",
        "workers: [{id: 1, join: 5, leave: 3}]",
        "workers: [{id: 1, leave: 10, crashes: [12]}]",
        "workers: [{id: 1}]\ncosts: {fib: 0}",
        "- no es un mapeo",
        "workers: [{id: 1, speed: -1}]",
    ])
    def test_invalid_plans(self, tmp_path, text):
        path = tmp_path / "malo.plan"
        path.write_text(text, encoding="utf-8")
        with pytest.raises(InvalidPlan):
            SimPlan.from_yaml(path)

    def test_random_plan_reproducible(self):
        assert SimPlan.random(11) == SimPlan.random(11)
        plan = SimPlan.random(11)
        first = plan.workers[0]
        assert (first.id, first.join, first.leave) == (1, 0.0, None)


class TestMakespan:
    """Tests del modelo de tiempo"""

    def test_independent_tasks(self):
        """Test 100 tareas, 4 workers, costo 2 y overhead 0.5"""
        program, roots = bag(100)
        plan = SimPlan.uniform(4, default_cost=2.0, dispatch_overhead=0.5)
        result = run_simcluster(program, roots, plan, settings=SystemConfig())
        assert result.stats.makespan == 25 * (2.0 + 0.5)
        assert result.stats.tasks_executed == 100
        assert result.outputs == [[2 * i] for i in range(1, 101)]

    def test_single_worker(self, fib_program):
        result = sim_fib(fib_program, 6, SimPlan.uniform(1))
        assert result.values == {"a": 8}
        assert result.stats.makespan == result.stats.tasks_executed * 1.0
        assert result.stats.busy == {1: 1.0}

    def test_speed_halves_makespan(self, fib_program):
        """Test duplicar velocidades divide el makespan por dos"""
        plan = SimPlan.uniform(3)
        base = sim_fib(fib_program, 10, plan)
        fast = sim_fib(fib_program, 10, plan.scaled(2.0))
        assert fast.stats.makespan == base.stats.makespan / 2
        assert fast.values == base.values == {"a": 55}

    def test_more_workers_not_slower(self, fib_program):
        one = sim_fib(fib_program, 10, SimPlan.uniform(1))
        four = sim_fib(fib_program, 10, SimPlan.uniform(4))
        assert four.stats.makespan < one.stats.makespan

    @pytest.mark.parametrize("k", [1, 2, 4, 10])
    def test_bag_scales_with_workers(self, k):
        """Test 1000 tareas independientes en k workers: ceil(1000/k) rondas"""
        program, roots = bag(1000)
        result = run_simcluster(program, roots, SimPlan.uniform(k, default_cost=3.0),
                                settings=SystemConfig())
        assert result.stats.makespan == math.ceil(1000 / k) * 3.0
        assert result.stats.tasks_executed == 1000


class TestFailures:
    """Tests de caídas y adaptividad"""

    def test_crash_reexecutes(self, fib_program):
        plan = SimPlan(workers=[WorkerSpec(id=1, crashes=[50.0]), WorkerSpec(id=2), WorkerSpec(id=3)])
        result = sim_fib(fib_program, 15, plan)
        assert result.values == {"a": 610}
        assert result.stats.re_executions >= 1

    def test_crash_plan_from_corpus(self, fib_program):
        trace = TraceSink()
        plan = SimPlan.from_yaml(CORPUS / "plans" / "crash3.plan")
        result = sim_fib(fib_program, 12, plan, trace=trace)
        assert result.values == {"a": 144}
        assert len(trace.of_kind("worker-crashed")) == 3
        assert len(trace.of_kind("requeued")) == result.stats.re_executions

    def test_adaptive_plan(self, fib_program):
        """Test altas y bajas ordenadas: nada se re-ejecuta"""
        trace = TraceSink()
        plan = SimPlan.from_yaml(CORPUS / "plans" / "adaptive.plan")
        result = sim_fib(fib_program, 12, plan, trace=trace)
        assert result.values == {"a": 144}
        assert result.stats.re_executions == 0
        assert sorted(e.worker for e in trace.of_kind("worker-left")) == [3, 4]

    def test_adaptive_beats_single_worker(self, fib_program):
        plan = SimPlan.from_yaml(CORPUS / "plans" / "adaptive.plan")
        adaptive = sim_fib(fib_program, 15, plan)
        single = sim_fib(fib_program, 15, SimPlan(workers=[plan.workers[0]],
                                                  default_cost=plan.default_cost))
        assert adaptive.values == single.values == {"a": 610}
        assert adaptive.stats.makespan < single.stats.makespan

    def test_stalled_forever(self, fib_program):
        plan = SimPlan(workers=[WorkerSpec(id=1, leave=1.0)])
        with pytest.raises(StalledForever):
            sim_fib(fib_program, 10, plan)

    def test_late_join(self, fib_program):
        plan = SimPlan(workers=[WorkerSpec(id=1, join=5.0)])
        result = sim_fib(fib_program, 3, plan)
        assert result.values == {"a": 2}
        assert result.stats.makespan == 5.0 + result.stats.tasks_executed


class TestDeterminism:
    """Tests de determinismo y orden"""

    def test_same_trace(self, fib_program):
        plan = SimPlan.from_yaml(CORPUS / "plans" / "crash3.plan")
        t1, t2 = TraceSink(), TraceSink()
        sim_fib(fib_program, 10, plan, trace=t1)
        sim_fib(fib_program, 10, plan, trace=t2)
        assert t1.lines() == t2.lines()

    def test_random_crashes_seeded(self, fib_program):
        plan = SimPlan.uniform(3, random_crashes=4, crash_horizon=50.0)
        t1, t2 = TraceSink(), TraceSink()
        r1 = sim_fib(fib_program, 10, plan, seed=3, trace=t1)
        sim_fib(fib_program, 10, plan, seed=3, trace=t2)
        assert t1.lines() == t2.lines()
        assert r1.values == {"a": 55}

    def test_overlapping_tasks_never_conflict(self, jacobi_program):
        """Test tareas simultáneas con accesos compatibles"""
        roots = prepare_entry(jacobi_program)
        result = run_simcluster(jacobi_program, roots, SimPlan.uniform(2),
                                trace=TraceSink(), settings=SystemConfig())
        tasks = {t.id: t for t in result.tasks}
        spans = intervals(result)
        overlapping = 0
        for i, (s1, f1, id1) in enumerate(spans):
            for s2, f2, id2 in spans[i + 1:]:
                if s1 < f2 and s2 < f1:
                    overlapping += 1
                    assert not conflicting(tasks[id1], tasks[id2])
        assert overlapping > 0

    def test_relax_halves_run_together(self, jacobi_program):
        """Test en cada iteración las dos mitades del relax de jacobi corren a la vez"""
        roots = prepare_entry(jacobi_program)
        result = run_simcluster(jacobi_program, roots, SimPlan.uniform(2),
                                trace=TraceSink(), settings=SystemConfig())
        spans = {task: (start, end) for start, end, task in intervals(result)}
        children = defaultdict(list)
        for task in result.tasks:
            children[task.parent].append(task)

        iterations = 0
        for jacobi in (t for t in result.tasks if t.routine == "jacobi"):
            for top in (c for c in children[jacobi.id] if c.routine == "relax"):
                halves = [spans[c.id] for c in children[top.id] if c.routine == "relax"]
                assert len(halves) == 2
                (s1, f1), (s2, f2) = halves
                assert s1 < f2 and s2 < f1
                iterations += 1
        assert iterations == 1000 - result.values["iters"] > 0


if __name__ == "__main__":
    pytest.main([__file__, "-v", "--tb=short"])
