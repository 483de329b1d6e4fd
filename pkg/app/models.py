"""
Modelos de datos del runtime TSIA.

Define con Pydantic las estructuras que cruzan el borde del runtime:
- Configuración del sistema (config/settings.yaml)
- Planes del cluster simulado (workers, costos, fallas)
- Configuración de una corrida del CLI
- Estadísticas y comparación de corridas

Las estructuras del camino caliente (tokens, AST, items, tareas) son
dataclasses y viven en sus propios módulos.
"""

import random
from enum import Enum
from pathlib import Path
from typing import Dict, List, Optional, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from app.errors import InvalidPlan, MissingFile


# ============================================================================
# ENUMERACIONES
# ============================================================================

class ExecutorKind(str, Enum):
    """Ejecutores disponibles"""
    SEQ = "seq"
    PARALLEL = "parallel"
    SIM = "sim"


class Scheduling(str, Enum):
    """Orden en que se toman las tareas listas"""
    LIFO = "lifo"
    FIFO = "fifo"


# ============================================================================
# CONFIGURACIÓN DEL SISTEMA
# ============================================================================

class RuntimeSettings(BaseModel):
    scheduling: Scheduling = Field(default=Scheduling.LIFO, description="Orden de toma de tareas listas")
    pool_capacity: int = Field(default=1_000_000, ge=1, description="Máximo de tareas simultáneas en el pool")
    stack_budget: int = Field(default=100_000, ge=1, description="Máximo de llamadas inline anidadas")
    recursion_limit: int = Field(default=20_000, ge=1000, description="Límite de recursión del intérprete")


class ExecutorSettings(BaseModel):
    sequential_policy: str = Field(default="inline-always", description="Política del ejecutor secuencial")
    parallel_policy: str = Field(default="delegate-always", description="Política del ejecutor paralelo")
    sim_policy: str = Field(default="delegate-always", description="Política del cluster simulado")
    parallel_workers: int = Field(default=4, ge=1, description="Workers por defecto del ejecutor paralelo")


class SimulationSettings(BaseModel):
    default_cost: float = Field(default=1.0, gt=0, description="Duración base de una tarea")
    dispatch_overhead: float = Field(default=0.0, ge=0, description="Costo fijo por despacho")
    restart_delay: float = Field(default=0.0, ge=0, description="Demora de reinicio tras una caída")


class LoggingSettings(BaseModel):
    level: str = Field(default="WARNING", description="Nivel mínimo en stderr")
    format: str = Field(
        default="<green>{time:YYYY-MM-DD HH:mm:ss}</green> | <level>{level: <8}</level> | "
                "<cyan>{name}</cyan>:<cyan>{function}</cyan> - <level>{message}</level>",
        description="Formato loguru de la salida en consola",
    )
    file: Optional[str] = Field(default=None, description="Archivo de log (opcional)")
    rotation: str = Field(default="10 MB", description="Rotación del archivo de log")
    retention: str = Field(default="7 days", description="Retención de archivos rotados")

    @field_validator("level")
    @classmethod
    def level_must_exist(cls, v: str) -> str:
        v = v.upper()
        if v not in ("TRACE", "DEBUG", "INFO", "SUCCESS", "WARNING", "ERROR", "CRITICAL"):
            raise ValueError(f"nivel de log desconocido: {v}")
        return v


class SystemConfig(BaseModel):
    """
    Configuración del runtime.

    Se carga de config/settings.yaml; cada sección es opcional y un archivo
    ausente equivale a los valores por defecto.
    """
    runtime: RuntimeSettings = Field(default_factory=RuntimeSettings)
    executors: ExecutorSettings = Field(default_factory=ExecutorSettings)
    simulation: SimulationSettings = Field(default_factory=SimulationSettings)
    logging: LoggingSettings = Field(default_factory=LoggingSettings)


# ============================================================================
# CLUSTER SIMULADO
# ============================================================================

class WorkerSpec(BaseModel):
    """Un worker del cluster simulado"""
    id: int = Field(..., ge=0, description="Identificador del worker")
    speed: float = Field(default=1.0, gt=0, description="Factor de velocidad (divide la duración)")
    join: float = Field(default=0.0, ge=0, description="Instante de alta")
    leave: Optional[float] = Field(default=None, description="Instante de baja (opcional)")
    crashes: List[float] = Field(default_factory=list, description="Instantes de caída")

    @model_validator(mode="after")
    def validate_lifetime(self):
        """join < leave y caídas dentro de [join, leave)"""
        if self.leave is not None and not self.join < self.leave:
            raise ValueError(f"worker {self.id}: join ({self.join}) debe ser menor que leave ({self.leave})")
        for t in self.crashes:
            if t < self.join or (self.leave is not None and t >= self.leave):
                raise ValueError(f"worker {self.id}: caída en {t} fuera de su vida útil")
        self.crashes = sorted(self.crashes)
        return self


class SimPlan(BaseModel):
    """
    Plan de una corrida simulada: workers, modelo de costos y fallas.

    Ejemplo (YAML)::

        seed: 7
        default_cost: 1.0
        dispatch_overhead: 0.0
        costs: {fib: 1.0, sum: 0.5}
        workers:
          - {id: 1, speed: 1.0, crashes: [50]}
          - {id: 2, speed: 2.0, join: 10, leave: 200}
    """
    seed: int = Field(default=0, description="Semilla del generador de fallas aleatorias")
    workers: List[WorkerSpec] = Field(..., min_length=1, description="Workers del cluster")
    costs: Dict[str, float] = Field(default_factory=dict, description="Duración base por rutina")
    default_cost: float = Field(default=1.0, gt=0, description="Duración base de rutinas sin costo propio")
    dispatch_overhead: float = Field(default=0.0, ge=0, description="Costo fijo por tarea despachada")
    restart_delay: float = Field(default=0.0, ge=0, description="Demora de reinicio tras una caída")
    random_crashes: int = Field(default=0, ge=0, description="Caídas extra sorteadas con la semilla")
    crash_horizon: float = Field(default=100.0, gt=0, description="Las caídas sorteadas caen en [0, horizonte)")

    model_config = ConfigDict(json_schema_extra={
        "example": {
            "seed": 7,
            "workers": [{"id": 1, "speed": 1.0, "crashes": [20]},
                        {"id": 2, "speed": 1.0},
                        {"id": 3, "speed": 0.5, "join": 5}],
            "default_cost": 1.0,
        }
    })

    @field_validator("workers")
    @classmethod
    def ids_must_be_unique(cls, v: List[WorkerSpec]) -> List[WorkerSpec]:
        ids = [w.id for w in v]
        if len(set(ids)) != len(ids):
            raise ValueError(f"ids de worker repetidos: {ids}")
        return v

    @field_validator("costs")
    @classmethod
    def costs_must_be_positive(cls, v: Dict[str, float]) -> Dict[str, float]:
        for name, cost in v.items():
            if cost <= 0:
                raise ValueError(f"costo no positivo para '{name}': {cost}")
        return v

    def cost(self, routine: str) -> float:
        return self.costs.get(routine, self.default_cost)

    def scaled(self, factor: float) -> "SimPlan":
        """El mismo plan con todas las velocidades multiplicadas por ``factor``"""
        workers = [w.model_copy(update={"speed": w.speed * factor}) for w in self.workers]
        return self.model_copy(update={"workers": workers})

    @classmethod
    def from_yaml(cls, path: Union[str, Path]) -> "SimPlan":
        """
        Carga y valida un plan desde YAML.

        Raises:
            MissingFile: el archivo no existe
            InvalidPlan: el contenido no es un plan válido
        """
        path = Path(path)
        if not path.exists():
            raise MissingFile(f"plan no encontrado: {path}")
        try:
            data = yaml.safe_load(path.read_text(encoding="utf-8"))
        except (yaml.YAMLError, UnicodeDecodeError) as e:
            raise InvalidPlan(f"{path}: YAML inválido: {e}") from e
        if not isinstance(data, dict):
            raise InvalidPlan(f"{path}: se esperaba un mapeo de claves")
        try:
            return cls.model_validate(data)
        except ValidationError as e:
            raise InvalidPlan(f"{path}: {e.errors()[0]['msg']}") from e

    @classmethod
    def uniform(cls, n: int, speed: float = 1.0, **options) -> "SimPlan":
        """n workers idénticos presentes desde el inicio y sin fallas"""
        return cls(workers=[WorkerSpec(id=i, speed=speed) for i in range(1, n + 1)], **options)

    @classmethod
    def random(cls, seed: int, max_workers: int = 6, horizon: float = 100.0,
               max_crashes: int = 3, **options) -> "SimPlan":
        """
        Plan aleatorio reproducible: velocidades, altas, bajas y caídas
        sorteadas con ``random.Random(seed)``. El worker 1 está desde el
        inicio y nunca se va, así que toda corrida termina.
        """
        rng = random.Random(seed)
        workers = []
        for i in range(1, rng.randint(1, max_workers) + 1):
            speed = rng.choice([0.5, 1.0, 1.0, 2.0, 4.0])
            join = 0.0 if i == 1 else round(rng.uniform(0, horizon / 2), 3)
            leave = None
            if i > 1 and rng.random() < 0.3:
                leave = round(join + rng.uniform(1, horizon), 3)
            end = leave if leave is not None else horizon
            crashes = sorted(round(rng.uniform(join, end), 3) for _ in range(rng.randint(0, max_crashes)))
            crashes = [t for t in crashes if t >= join and (leave is None or t < leave)]
            workers.append(WorkerSpec(id=i, speed=speed, join=join, leave=leave, crashes=crashes))
        options.setdefault("restart_delay", round(rng.uniform(0, 5), 3))
        return cls(seed=seed, workers=workers, crash_horizon=horizon, **options)


# ============================================================================
# CORRIDAS
# ============================================================================

class RunStats(BaseModel):
    """Estadísticas de una corrida"""
    makespan: float = Field(default=0.0, ge=0, description="Tiempo (simulado o de pasos) de la última resolución")
    tasks_executed: int = Field(default=0, ge=0, description="Tareas comprometidas")
    re_executions: int = Field(default=0, ge=0, description="Ejecuciones perdidas por caídas")
    peak_pool: int = Field(default=0, ge=0, description="Máximo tamaño del pool")
    busy: Dict[int, float] = Field(default_factory=dict, description="Fracción ocupada por worker")

    def lines(self) -> List[str]:
        out = [
            f"makespan = {self.makespan!r}",
            f"tasks = {self.tasks_executed}",
            f"re_executions = {self.re_executions}",
            f"peak_pool = {self.peak_pool}",
        ]
        out += [f"busy[{w}] = {f:.6f}" for w, f in sorted(self.busy.items())]
        return out


class RunConfig(BaseModel):
    """Configuración de una corrida armada por el CLI"""
    program: Path = Field(..., description="Archivo TSIA")
    entry: Optional[str] = Field(default=None, description="Llamada de entrada, p.ej. 'fib(10;;a)'")
    workload: Optional[str] = Field(default=None, description="Rutina aplicada a cada evento")
    input: Optional[Path] = Field(default=None, description="Archivo de eventos")
    output: Optional[Path] = Field(default=None, description="Archivo de salidas")
    executor: ExecutorKind = Field(default=ExecutorKind.SEQ)
    workers: Optional[int] = Field(default=None, ge=1, description="Workers del ejecutor paralelo")
    policy: Optional[str] = Field(default=None, description="Política inline/delegación")
    seed: Optional[int] = Field(default=None, description="Semilla (reemplaza la del plan)")
    plan: Optional[Path] = Field(default=None, description="Plan del cluster simulado")
    trace: Optional[Path] = Field(default=None, description="Archivo de traza")
    stats: bool = Field(default=False, description="Imprimir estadísticas")

    @model_validator(mode="after")
    def validate_combination(self):
        if self.entry and self.workload:
            raise ValueError("--entry y --workload son excluyentes")
        if self.workload and (self.input is None or self.output is None):
            raise ValueError("--workload requiere --input y --output")
        if not self.workload and (self.input is not None or self.output is not None):
            raise ValueError("--input/--output sólo tienen sentido con --workload")
        if self.executor is not ExecutorKind.SIM and (self.plan is not None or self.seed is not None):
            raise ValueError("--plan/--seed sólo aplican al ejecutor sim")
        if self.executor is not ExecutorKind.PARALLEL and self.workers is not None:
            raise ValueError("--workers sólo aplica al ejecutor parallel")
        return self


class CompareReport(BaseModel):
    """Resultado de comparar dos corridas"""
    identical: bool = Field(..., description="Todos los valores coinciden bit a bit")
    compared: int = Field(default=0, ge=0, description="Nombres comparados")
    first_divergence: Optional[str] = Field(default=None, description="Primer nombre distinto")
    detail: Optional[str] = Field(default=None, description="Descripción de la divergencia")
