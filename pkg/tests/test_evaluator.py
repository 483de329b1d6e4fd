"""
Tests del evaluador de cuerpos: aritmética, tipos, errores de ejecución
y equivalencia entre políticas inline/delegación.
"""

import pytest

from app.checker import check
from app.errors import (
    DivisionByZero, IndexOutOfBounds, MissingOut, StackBudgetExceeded, TypeMismatch,
)
from app.evaluator import arith, coerce
from app.models import SystemConfig
from app.parser import parse_source

from conftest import CORPUS, run_entry


STACK = (CORPUS / "stack.tsia").read_text(encoding="utf-8")


def program_of(source: str):
    return check(parse_source(source))


def value_of(source: str, entry: str, name: str, **options):
    result = run_entry(program_of(source), entry, settings=SystemConfig(), **options)
    return result.values[name]


class TestArith:
    """Tests de aritmética"""

    @pytest.mark.parametrize("a,b,expected", [(7, 2, 3), (-7, 2, -3), (7, -2, -3), (-7, -2, 3)])
    def test_integer_division_truncates(self, a, b, expected):
        """Test división entera trunca hacia cero"""
        assert arith("/", a, b) == expected

    def test_real_division(self):
        assert arith("/", 7.0, 2) == 3.5
        assert arith("/", 1, 2.0) == 0.5

    def test_division_by_zero(self):
        with pytest.raises(DivisionByZero):
            arith("/", 1, 0)
        with pytest.raises(DivisionByZero):
            arith("/", 1.0, 0.0)

    def test_comparisons(self):
        assert arith("<", 1, 2.5)
        assert not arith("==", 1, 2)

    def test_coerce(self):
        """Test int → real se ensancha, real → int falla"""
        assert coerce("real", 3) == 3.0
        assert isinstance(coerce("real", 3), float)
        with pytest.raises(TypeMismatch):
            coerce("int", 1.5)
        with pytest.raises(TypeMismatch):
            coerce("Stack", 1)


class TestBodies:
    """Tests de cuerpos simples"""

    def test_sum(self, fib_program):
        result = run_entry(fib_program, "sum(2, 3;;k)", settings=SystemConfig())
        assert result.values == {"k": 5}

    def test_half_negative(self):
        assert value_of("half(int n;; int k) { k = n/2; }", "half(-7;;k)", "k") == -3

    def test_abs(self):
        assert value_of("f(real x;; real y) { y = abs(x); }", "f(-2.5;;y)", "y") == 2.5

    def test_int_widened_to_real(self):
        """Test un out real asignado desde un int"""
        y = value_of("f(int n;; real y) { y = n; }", "f(3;;y)", "y")
        assert y == 3.0
        assert isinstance(y, float)

    def test_local_array(self):
        source = "f(int n;; int k) { int a[1:3]; a[1] = n; a[2] = a[1] * 2; a[3] = a[2] + 1; k = a[3]; }"
        assert value_of(source, "f(4;;k)", "k") == 9

    def test_early_return(self):
        source = "f(int n;; int k) { k = 1; if (n > 0) return; k = 2; }"
        assert value_of(source, "f(1;;k)", "k") == 1

    def test_inout_scalar(self):
        """Test inout escalar dado como literal en la entrada"""
        source = "bump(; int c;) { c = c + 1; }"
        assert value_of(source, "bump(;41;)", "c") == 42

    def test_stack_methods(self, stack_program):
        """Test constructor y métodos de un record"""
        result = run_entry(stack_program, settings=SystemConfig())
        assert result.values == {"a1": 7, "b1": 8, "a2": 6}


class TestRuntimeErrors:
    """Tests de errores de ejecución"""

    def test_division_by_zero(self):
        with pytest.raises(DivisionByZero):
            value_of("f(int n;; int k) { k = 10 / n; }", "f(0;;k)", "k")

    def test_real_into_int(self):
        with pytest.raises(TypeMismatch):
            value_of("f(real x;; int k) { k = x; }", "f(1.5;;k)", "k")

    def test_index_out_of_bounds(self):
        with pytest.raises(IndexOutOfBounds):
            value_of("f(;; int k) { int a[3]; a[4] = 1; k = 0; }", None, "k")

    def test_pop_empty_stack(self):
        """Test pop sobre una pila vacía no produce o"""
        source = STACK + "\nempty(;; int o, int e) { stack(2;;s); s.pop(;;o,e); }"
        with pytest.raises(MissingOut):
            run_entry(program_of(source), settings=SystemConfig())

    def test_stack_budget(self, fib_program):
        settings = SystemConfig(runtime={"stack_budget": 3})
        with pytest.raises(StackBudgetExceeded):
            run_entry(fib_program, "fib(15;;a)", settings=settings)


class TestPolicies:
    """Tests de equivalencia entre políticas"""

    @pytest.mark.parametrize("policy", [
        "delegate-always", "inline-always", "inline-below-depth:3", "inline-below-size:5",
    ])
    def test_fib(self, fib_program, policy):
        result = run_entry(fib_program, "fib(12;;a)", policy=policy, settings=SystemConfig())
        assert result.values == {"a": 144}

    @pytest.mark.parametrize("policy", ["delegate-always", "inline-always", "inline-below-depth:2"])
    def test_jacobi_same_bits(self, jacobi_program, policy):
        """Test mismos bits con cualquier política"""
        oracle = run_entry(jacobi_program, settings=SystemConfig())
        result = run_entry(jacobi_program, policy=policy, settings=SystemConfig())
        assert [x.hex() for x in result.values["a"]] == [x.hex() for x in oracle.values["a"]]
        assert result.values["iters"] == oracle.values["iters"]

    def test_delegation_counts_tasks(self, fib_program):
        """Test delegate-always crea un árbol; inline-always una sola tarea"""
        inline = run_entry(fib_program, "fib(10;;a)", policy="inline-always", settings=SystemConfig())
        delegated = run_entry(fib_program, "fib(10;;a)", policy="delegate-always", settings=SystemConfig())
        assert inline.stats.tasks_executed == 1
        # fib(n) con n >= 2 delega fib, fib y sum
        assert delegated.stats.tasks_executed == 265


if __name__ == "__main__":
    pytest.main([__file__, "-v", "--tb=short"])
