"""
Tests de los ejecutores contra oráculos directos. fib se corre además en el
cluster simulado, con cada política.
"""

from functools import partial

import numpy as np
import pytest

from app.errors import ArityMismatch, InvalidArgument, UndefinedName, UsageError
from app.executors import (
    busy_fractions, compare_runs, default_call, prepare_entry, prepare_workload,
    run_parallel, run_sequential,
)
from app.models import SimPlan, SystemConfig
from app.parser import parse_call
from app.simcluster import run_simcluster
from app.trace import TraceSink
from app.workload import EventRecord

from conftest import run_entry


def jacobi_oracle(emax=0.0001, iters=1000):
    """Iteración de Jacobi directa sobre el arreglo de laplace"""
    a = np.array([1.0, 0, 0, 0, 0, 0, 0, 8.0])
    e = 2 * emax
    imax = iters
    while True:
        if e < emax:
            break
        imax -= 1
        if imax < 0:
            break
        new = (a[:-2] + a[2:]) / 2
        e = float(np.max(np.abs(new - a[1:-1])))
        a[1:-1] = new
    return [float(x) for x in a], imax


def simulate_oracle(i, energy, angle):
    if angle < 0.0:
        dose = energy * (0.5 - angle / 4)
    else:
        dose = energy * (0.5 + angle / 4)
    hits = i // 10 + 1 if energy > 5.0 else 0
    return dose, hits


def fib(n):
    a, b = 0, 1
    for _ in range(n):
        a, b = b, a + b
    return a


FIB_SIZES = [0, 1, 2, 10, 15, 20, 25]

POLICIES = ["delegate-always", "inline-always", "inline-below-depth:4", "inline-below-size:12"]

RUNNERS = {
    "sequential": run_sequential,
    "parallel": partial(run_parallel, workers=4),
    "sim": lambda program, roots, **options: run_simcluster(program, roots, SimPlan.uniform(4), **options),
}


class TestEntry:
    """Tests del armado de la tarea raíz"""

    def test_default_call(self, jacobi_program):
        assert default_call(jacobi_program).routine == "laplace"

    def test_default_call_needs_entry(self, fib_program):
        with pytest.raises(UsageError):
            default_call(fib_program)

    def test_entry_outs_become_items(self, jacobi_program):
        roots = prepare_entry(jacobi_program)
        item, is_array = roots.bindings["a"]
        assert is_array
        assert roots.store.item(item).length == 8
        assert list(roots.bindings) == ["a", "iters"]

    def test_entry_errors(self, fib_program):
        with pytest.raises(UndefinedName):
            prepare_entry(fib_program, parse_call("fob(3;;a)"))
        with pytest.raises(ArityMismatch):
            prepare_entry(fib_program, parse_call("fib(3, 4;;a)"))
        with pytest.raises(InvalidArgument):
            prepare_entry(fib_program, parse_call("fib(3;;a[1])"))
        with pytest.raises(InvalidArgument):
            prepare_entry(fib_program, parse_call("fib(n;;a)"))

    def test_workload_roots(self, simulate_program):
        events = [EventRecord(1, (3, 7.5, 0.25)), EventRecord(2, (4, 1.0, -0.5))]
        roots = prepare_workload(simulate_program, "simulate", events)
        assert len(roots.specs) == 2
        assert roots.records == [["1.dose", "1.hits"], ["2.dose", "2.hits"]]


class TestSequential:
    """Tests del ejecutor secuencial (oráculo)"""

    @pytest.mark.parametrize("n", FIB_SIZES)
    def test_fib(self, fib_program, n):
        result = run_entry(fib_program, f"fib({n};;a)", settings=SystemConfig())
        assert result.values["a"] == fib(n)

    def test_fib_output_line(self, fib_program):
        result = run_entry(fib_program, "fib(10;;a)", settings=SystemConfig())
        assert result.lines() == ["a = 55"]

    def test_jacobi_matches_numpy(self, jacobi_program):
        """Test laplace igual bit a bit a la iteración directa"""
        expected, imax = jacobi_oracle()
        result = run_entry(jacobi_program, settings=SystemConfig())
        assert [x.hex() for x in result.values["a"]] == [x.hex() for x in expected]
        assert result.values["iters"] == imax
        assert 0 < imax < 1000

    def test_jacobi_converges(self, jacobi_program):
        """Test laplace converge al perfil lineal antes de agotar las iteraciones"""
        result = run_entry(jacobi_program, settings=SystemConfig())
        a = np.array(result.values["a"])
        residual = np.max(np.abs((a[:-2] + a[2:]) / 2 - a[1:-1]))
        assert residual <= 1e-4
        assert np.max(np.abs(a - np.arange(1, 9))) <= 5e-3
        assert 0 < result.values["iters"] < 1000

    def test_workload(self, simulate_program):
        events = [EventRecord(k, (k, 2.5 * k, (-1) ** k * 0.1 * k)) for k in range(1, 6)]
        roots = prepare_workload(simulate_program, "simulate", events)
        result = run_sequential(simulate_program, roots, settings=SystemConfig())
        assert result.outputs == [list(simulate_oracle(*e.payload)) for e in events]

    def test_trace_clock_counts_steps(self, fib_program):
        trace = TraceSink()
        roots = prepare_entry(fib_program, parse_call("fib(4;;a)"))
        result = run_sequential(fib_program, roots, "delegate-always", trace, SystemConfig())
        assert result.stats.makespan == float(result.stats.tasks_executed)
        assert trace.events[-1].kind == "resolved"
        assert len(trace.of_kind("started")) == result.stats.tasks_executed


class TestFibEverywhere:
    """Tests de fib con cada ejecutor y cada política"""

    @pytest.mark.parametrize("policy", POLICIES)
    @pytest.mark.parametrize("runner", ["sequential", "parallel", "sim"])
    @pytest.mark.parametrize("n", FIB_SIZES)
    def test_fib(self, fib_program, n, runner, policy):
        result = run_entry(fib_program, f"fib({n};;a)", RUNNERS[runner], policy=policy,
                           settings=SystemConfig())
        assert result.values == {"a": fib(n)}


class TestParallel:
    """Tests del ejecutor paralelo"""

    @pytest.mark.parametrize("workers", [1, 2, 4, 8])
    def test_fib(self, fib_program, workers):
        result = run_entry(fib_program, "fib(12;;a)", run_parallel, workers=workers,
                           settings=SystemConfig())
        assert result.values == {"a": 144}

    @pytest.mark.parametrize("workers", [1, 2, 4])
    def test_jacobi_same_bits_as_sequential(self, jacobi_program, workers):
        oracle = run_entry(jacobi_program, settings=SystemConfig())
        result = run_entry(jacobi_program, runner=run_parallel, workers=workers,
                           settings=SystemConfig())
        assert compare_runs(oracle.values, result.values).identical

    def test_stack(self, stack_program):
        result = run_entry(stack_program, runner=run_parallel, workers=3, settings=SystemConfig())
        assert result.values == {"a1": 7, "b1": 8, "a2": 6}

    def test_no_workers(self, fib_program):
        with pytest.raises(UsageError):
            run_entry(fib_program, "fib(3;;a)", run_parallel, workers=0, settings=SystemConfig())

    def test_busy_fractions_bounded(self, fib_program):
        result = run_entry(fib_program, "fib(10;;a)", run_parallel, workers=2,
                           settings=SystemConfig())
        assert set(result.stats.busy) == {1, 2}
        assert all(0.0 <= f <= 1.0 for f in result.stats.busy.values())


class TestCompare:
    """Tests de comparación de corridas"""

    def test_identical(self):
        report = compare_runs({"a": 55, "e": [0.5, 1.0]}, {"a": 55, "e": [0.5, 1.0]})
        assert report.identical
        assert report.compared == 2

    def test_first_divergence(self):
        report = compare_runs({"a": 1, "b": 0.1 + 0.2}, {"a": 1, "b": 0.3})
        assert not report.identical
        assert report.first_divergence == "b"

    def test_missing_name(self):
        report = compare_runs({"a": 1}, {"a": 1, "z": 2})
        assert report.first_divergence == "z"

    def test_busy_fractions(self):
        assert busy_fractions({1: 5.0, 2: 20.0}, 10.0) == {1: 0.5, 2: 1.0}
        assert busy_fractions({1: 0.0}, 0.0) == {1: 0.0}
        assert busy_fractions({}, 1.0) == {}


if __name__ == "__main__":
    pytest.main([__file__, "-v", "--tb=short"])
