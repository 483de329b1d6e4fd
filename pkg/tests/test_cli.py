"""
Tests del CLI: comandos check, run y diff con sus códigos de salida.
"""

import json

import pytest

from app.main import main, read_dump

from conftest import CORPUS


FIB = str(CORPUS / "fib.tsia")
SIMULATE = str(CORPUS / "simulate.tsia")


class TestCheck:
    """Tests del comando check"""

    def test_ok(self, capsys):
        assert main(["check", FIB]) == 0
        assert capsys.readouterr().out.strip().endswith(": ok")

    def test_warning_still_ok(self, capsys):
        assert main(["check", str(CORPUS / "stack.tsia")]) == 0
        assert "OutNeverProduced" in capsys.readouterr().err

    def test_errors(self, tmp_path, capsys):
        path = tmp_path / "malo.tsia"
        path.write_text("f(;; int k) {\n  k = z;\n}\n", encoding="utf-8")
        assert main(["check", str(path)]) == 1
        err = capsys.readouterr().err
        assert f"{path}:2:" in err
        assert "UndefinedName" in err

    def test_syntax_error(self, tmp_path, capsys):
        path = tmp_path / "malo.tsia"
        path.write_text("f(int n) { }", encoding="utf-8")
        assert main(["check", str(path)]) == 1
        assert "MissingGroupSeparator" in capsys.readouterr().err

    def test_missing_file(self, tmp_path):
        assert main(["check", str(tmp_path / "nada.tsia")]) == 2

    def test_non_ascii_digit(self, tmp_path, capsys):
        """Test un dígito Unicode es un diagnóstico, no una excepción"""
        path = tmp_path / "malo.tsia"
        path.write_text("f(;;int k) { k = ²; }\n", encoding="utf-8")
        assert main(["check", str(path)]) == 1
        assert "IllegalCharacter" in capsys.readouterr().err

    def test_invalid_utf8(self, tmp_path):
        path = tmp_path / "malo.tsia"
        path.write_bytes(b"f(;;int k) { k = 1; }\n\xff\xfe")
        assert main(["check", str(path)]) == 2


class TestRun:
    """Tests del comando run"""

    def test_fib(self, capsys):
        assert main(["run", FIB, "--entry", "fib(10;;a)"]) == 0
        assert capsys.readouterr().out == "a = 55\n"

    @pytest.mark.parametrize("executor", [["--executor", "parallel", "--workers", "3"],
                                          ["--executor", "sim", "--seed", "4"]])
    def test_other_executors(self, capsys, executor):
        assert main(["run", FIB, "--entry", "fib(10;;a)", *executor]) == 0
        assert capsys.readouterr().out == "a = 55\n"

    def test_laplace_default_entry(self, capsys):
        assert main(["run", str(CORPUS / "jacobi.tsia")]) == 0
        out = capsys.readouterr().out.splitlines()
        assert out[0].startswith("a = 1 ")
        assert out[1].startswith("iters = ")

    def test_sim_plan_stats_trace(self, tmp_path, capsys):
        trace = tmp_path / "trace.jsonl"
        code = main(["run", FIB, "--entry", "fib(12;;a)", "--executor", "sim",
                     "--plan", str(CORPUS / "plans" / "crash3.plan"),
                     "--stats", "--trace", str(trace)])
        assert code == 0
        out = capsys.readouterr().out.splitlines()
        assert out[0] == "a = 144"
        assert any(line.startswith("re_executions = ") for line in out)
        events = [json.loads(line) for line in trace.read_text(encoding="utf-8").splitlines()]
        assert {"time", "kind", "task", "worker"} <= set(events[0])
        assert any(e["kind"] == "worker-crashed" for e in events)

    def test_workload(self, tmp_path):
        output = tmp_path / "out.txt"
        code = main(["run", SIMULATE, "--workload", "simulate",
                     "--input", str(CORPUS / "events_1000.txt"), "--output", str(output)])
        assert code == 0
        lines = output.read_text(encoding="utf-8").splitlines()
        assert len(lines) == 1000
        assert all(len(line.split()) == 2 for line in lines)

    @pytest.mark.parametrize("args", [
        ["--entry", "fib(3;;a)", "--workers", "2"],
        ["--entry", "fib(3;;a)", "--plan", "x.plan"],
        ["--entry", "fib(3;;a)", "--policy", "sometimes"],
        ["--entry", "fib(3;;a"],
        ["--workload", "fib"],
        [],
    ])
    def test_usage_errors(self, args):
        assert main(["run", FIB, *args]) == 2

    def test_runtime_error(self, tmp_path, capsys):
        path = tmp_path / "div.tsia"
        path.write_text("f(int n;; int k) { k = 10 / n; }", encoding="utf-8")
        assert main(["run", str(path), "--entry", "f(0;;k)"]) == 1
        assert "DivisionByZero" in capsys.readouterr().err


class TestDiff:
    """Tests del comando diff"""

    def test_identical_runs(self, tmp_path, capsys):
        for name, executor in [("a.txt", "seq"), ("b.txt", "parallel")]:
            assert main(["run", str(CORPUS / "jacobi.tsia"), "--executor", executor]) == 0
            (tmp_path / name).write_text(capsys.readouterr().out, encoding="utf-8")
        assert main(["diff", str(tmp_path / "a.txt"), str(tmp_path / "b.txt")]) == 0

    def test_divergence(self, tmp_path, capsys):
        (tmp_path / "a.txt").write_text("a = 55\ne = 0.5\n", encoding="utf-8")
        (tmp_path / "b.txt").write_text("a = 55\ne = 0.25\n", encoding="utf-8")
        assert main(["diff", str(tmp_path / "a.txt"), str(tmp_path / "b.txt")]) == 1
        assert "e" in capsys.readouterr().out

    def test_read_dump_workload(self, tmp_path):
        path = tmp_path / "out.txt"
        path.write_text("0.5 1\n2  0\n", encoding="utf-8")
        assert read_dump(path) == {"1": "0.5 1", "2": "2 0"}


if __name__ == "__main__":
    pytest.main([__file__, "-v", "--tb=short"])
