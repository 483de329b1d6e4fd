"""
Runtime TSIA

Tareas con items de asignación única: frontend, almacén de items, pool
de tareas, evaluador de cuerpos y ejecutores (secuencial, paralelo y
cluster simulado).
"""

__version__ = "1.0.0"
__author__ = "Runtime TSIA"

from app.checker import check
from app.evaluator import BodyEvaluator
from app.executors import (
    RunResult, compare_runs, prepare_entry, prepare_workload, run_parallel, run_sequential,
)
from app.items import ItemStore
from app.models import SimPlan, SystemConfig, WorkerSpec
from app.parser import parse_call, parse_source
from app.simcluster import run_simcluster
from app.tasks import Policy, TaskPool

__all__ = [
    # Frontend
    "parse_source",
    "parse_call",
    "check",

    # Runtime
    "ItemStore",
    "TaskPool",
    "Policy",
    "BodyEvaluator",

    # Ejecutores
    "RunResult",
    "prepare_entry",
    "prepare_workload",
    "run_sequential",
    "run_parallel",
    "run_simcluster",
    "compare_runs",

    # Modelos
    "SimPlan",
    "WorkerSpec",
    "SystemConfig",
]
