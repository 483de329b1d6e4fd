"""
Tests de configuración, modelos y logging.
"""

import pytest
from loguru import logger
from pydantic import ValidationError

from app.errors import UsageError
from app.models import ExecutorKind, RunConfig, RunStats, Scheduling, SimPlan, SystemConfig, WorkerSpec
from app.settings import DEFAULT_SETTINGS_PATH, configure_logging, load_settings


class TestSettings:
    """Tests de carga de config/settings.yaml"""

    def test_repo_settings(self):
        settings = load_settings(DEFAULT_SETTINGS_PATH)
        assert settings.runtime.scheduling is Scheduling.LIFO
        assert settings.executors.sequential_policy == "inline-always"
        assert settings.executors.sim_policy == "delegate-always"

    def test_missing_file_gives_defaults(self, tmp_path):
        assert load_settings(tmp_path / "nada.yaml") == SystemConfig()

    def test_partial_file(self, tmp_path):
        path = tmp_path / "s.yaml"
        path.write_text("runtime:\n  scheduling: fifo\n", encoding="utf-8")
        settings = load_settings(path)
        assert settings.runtime.scheduling is Scheduling.FIFO
        assert settings.executors.parallel_workers == 4

    @pytest.mark.parametrize("text", [
        "runtime:\n  pool_capacity: 0\n",
        "logging:\n  level: chatty\n",
        "runtime: [1, 2",
    ])
    def test_invalid_file(self, tmp_path, text):
        path = tmp_path / "s.yaml"
        path.write_text(text, encoding="utf-8")
        with pytest.raises(UsageError):
            load_settings(path)

    def test_log_file_sink(self, tmp_path):
        log = tmp_path / "tsia.log"
        settings = SystemConfig(logging={"file": str(log)})
        configure_logging("WARNING", settings)
        logger.debug("mensaje de prueba")
        logger.remove()
        assert "mensaje de prueba" in log.read_text(encoding="utf-8")


class TestModels:
    """Tests de los modelos Pydantic"""

    def test_worker_crashes_sorted(self):
        worker = WorkerSpec(id=1, crashes=[30.0, 10.0])
        assert worker.crashes == [10.0, 30.0]

    def test_worker_join_after_leave(self):
        with pytest.raises(ValidationError):
            WorkerSpec(id=1, join=10, leave=10)

    def test_uniform_plan(self):
        plan = SimPlan.uniform(3, speed=2.0, default_cost=0.5)
        assert [w.id for w in plan.workers] == [1, 2, 3]
        assert all(w.speed == 2.0 for w in plan.workers)
        assert plan.cost("fib") == 0.5

    def test_scaled_keeps_original(self):
        plan = SimPlan.uniform(2)
        fast = plan.scaled(4.0)
        assert [w.speed for w in fast.workers] == [4.0, 4.0]
        assert [w.speed for w in plan.workers] == [1.0, 1.0]

    @pytest.mark.parametrize("options", [
        {"entry": "fib(1;;a)", "workload": "fib", "input": "i", "output": "o"},
        {"workload": "fib", "input": "i"},
        {"input": "i"},
        {"executor": "seq", "seed": 3},
        {"executor": "sim", "workers": 3},
    ])
    def test_run_config_combinations(self, options):
        with pytest.raises(ValidationError):
            RunConfig(program="p.tsia", **options)

    def test_run_config_ok(self):
        config = RunConfig(program="p.tsia", executor="sim", seed=3)
        assert config.executor is ExecutorKind.SIM

    def test_stats_lines(self):
        stats = RunStats(makespan=12.5, tasks_executed=7, re_executions=1, peak_pool=3,
                         busy={2: 0.5, 1: 1.0})
        assert stats.lines() == [
            "makespan = 12.5", "tasks = 7", "re_executions = 1", "peak_pool = 3",
            "busy[1] = 1.000000", "busy[2] = 0.500000",
        ]


if __name__ == "__main__":
    pytest.main([__file__, "-v", "--tb=short"])
