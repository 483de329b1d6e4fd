"""
Traza de ejecución: un registro JSON por línea.

Cada evento tiene ``time``, ``kind``, ``task`` y ``worker``. La traza se
guarda en memoria y, si se indica un archivo, también se escribe en él.
Los workers de un ejecutor paralelo emiten eventos concurrentemente; la
escritura se serializa con un lock.
"""

import json
import threading
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import IO, List, Optional, Union

from loguru import logger

from app.errors import IoFailure


EVENT_KINDS = (
    "spawned", "started", "delegated", "resolved", "requeued",
    "worker-joined", "worker-left", "worker-crashed",
)


@dataclass(frozen=True)
class TraceEvent:
    time: float
    kind: str
    task: Optional[int] = None
    worker: Optional[int] = None

    def to_json(self) -> str:
        return json.dumps(asdict(self), ensure_ascii=False)


class TraceSink:
    """Colector de eventos de traza (memoria + archivo opcional)"""

    def __init__(self, path: Optional[Union[str, Path]] = None):
        self.events: List[TraceEvent] = []
        self._lock = threading.Lock()
        self._file: Optional[IO[str]] = None
        self.path = Path(path) if path else None
        if self.path is not None:
            try:
                self.path.parent.mkdir(parents=True, exist_ok=True)
                self._file = open(self.path, "w", encoding="utf-8")
            except OSError as e:
                raise IoFailure(f"no se pudo abrir la traza {self.path}: {e}") from e
            logger.debug(f"Traza en {self.path}")

    def emit(self, time: float, kind: str, task: Optional[int] = None, worker: Optional[int] = None):
        event = TraceEvent(float(time), kind, task, worker)
        with self._lock:
            self.events.append(event)
            if self._file is not None:
                try:
                    self._file.write(event.to_json() + "\n")
                except OSError as e:
                    raise IoFailure(f"no se pudo escribir la traza: {e}") from e

    def close(self):
        with self._lock:
            if self._file is not None:
                self._file.flush()
                self._file.close()
                self._file = None

    def lines(self) -> List[str]:
        """Las líneas JSON de la traza, tal como se escriben al archivo"""
        with self._lock:
            return [e.to_json() for e in self.events]

    def of_kind(self, kind: str) -> List[TraceEvent]:
        return [e for e in self.events if e.kind == kind]

    def __len__(self) -> int:
        return len(self.events)
