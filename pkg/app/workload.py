"""
Workload: bolsa de tareas independientes.

Cada línea no vacía del archivo de entrada es un evento: valores separados
por espacios que se ligan, en orden, a los ins de la rutina del workload.
Cada evento se vuelve una tarea raíz; las salidas se escriben en el orden
de los índices de entrada, sin importar en qué orden terminaron.
"""

from dataclasses import dataclass
from pathlib import Path
from typing import Any, List, Sequence, Union

from loguru import logger

from app.errors import IoFailure, MalformedRecord, MissingFile, UsageError
from app.items import RecordState
from app.syntax import IN, INOUT, OUT, SCALAR_TYPES, Program, RoutineDef


@dataclass(frozen=True)
class EventRecord:
    index: int
    payload: tuple


@dataclass(frozen=True)
class WorkloadDecl:
    """Rutina aplicada a cada evento, con sus archivos de entrada y salida"""
    routine: str
    input: Path
    output: Path

    def validate(self, program: Program) -> RoutineDef:
        """
        La rutina debe existir, tener ins y outs escalares y ningún inout.

        Raises:
            UsageError: la rutina no sirve como workload
        """
        routine = program.routine(self.routine)
        if routine is None or routine.is_prototype:
            raise UsageError(f"rutina de workload inexistente: '{self.routine}'")
        groups = routine.signature.groups
        if not groups[IN] or not groups[OUT]:
            raise UsageError(f"'{self.routine}' necesita al menos un in y un out para un workload")
        if groups[INOUT]:
            raise UsageError(f"'{self.routine}' tiene inouts; los eventos deben ser independientes")
        for p in routine.params:
            if p.is_array or p.type not in SCALAR_TYPES or p.delegated:
                raise UsageError(f"el parámetro '{p.name}' de '{self.routine}' no es un escalar")
        return routine


def _parse_value(text: str, type_: str, line: int) -> Any:
    try:
        if type_ == "int":
            return int(text)
        return float(text)
    except ValueError:
        raise MalformedRecord(f"'{text}' no es un valor {type_}", line) from None


def load_events(path: Union[str, Path], routine: RoutineDef) -> List[EventRecord]:
    """
    Lee un evento por línea no vacía, en orden de archivo.

    Raises:
        MissingFile: el archivo no existe
        MalformedRecord: una línea no coincide con los ins de la rutina
    """
    path = Path(path)
    if not path.exists():
        raise MissingFile(f"archivo de eventos no encontrado: {path}")
    try:
        text = path.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as e:
        raise IoFailure(f"no se pudo leer {path}: {e}") from e

    ins = routine.signature.groups[IN]
    records: List[EventRecord] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        fields = raw.split()
        if not fields:
            continue
        if len(fields) != len(ins):
            raise MalformedRecord(
                f"se esperaban {len(ins)} valor(es) para {routine.name}, hay {len(fields)}", lineno)
        payload = tuple(_parse_value(f, p.type, lineno) for f, p in zip(fields, ins))
        records.append(EventRecord(len(records) + 1, payload))

    logger.info(f"📥 {len(records)} evento(s) leídos de {path}")
    return records


def format_value(value: Any) -> str:
    """Enteros tal cual, reales con 17 dígitos significativos"""
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return format(value, ".17g")
    if isinstance(value, RecordState):
        return f"<{value.record}>"
    if isinstance(value, (list, tuple)):
        return " ".join(format_value(v) for v in value)
    return str(value)


def write_outputs(records: Sequence[Sequence[Any]], path: Union[str, Path]):
    """
    Escribe una línea por registro en el orden dado (el de los índices de entrada).

    Raises:
        IoFailure: no se pudo escribir el archivo
    """
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8") as f:
            for values in records:
                f.write(" ".join(format_value(v) for v in values) + "\n")
    except OSError as e:
        raise IoFailure(f"no se pudo escribir {path}: {e}") from e
    logger.info(f"📤 {len(records)} salida(s) escritas en {path}")
