"""
Configuración y logging del runtime.

La configuración se lee de ``config/settings.yaml`` (o de la ruta que se
indique) y se valida con ``SystemConfig``. El logging usa loguru con una
salida coloreada en stderr y, si se configura, un archivo rotado.
"""

import sys
from functools import lru_cache
from pathlib import Path
from typing import Optional, Union

import yaml
from loguru import logger
from pydantic import ValidationError

from app.errors import UsageError
from app.models import SystemConfig


DEFAULT_SETTINGS_PATH = Path(__file__).resolve().parent.parent / "config" / "settings.yaml"


def load_settings(path: Optional[Union[str, Path]] = None) -> SystemConfig:
    """
    Carga la configuración desde YAML. Un archivo ausente da los valores
    por defecto; un archivo inválido es un error de uso.
    """
    path = Path(path) if path else DEFAULT_SETTINGS_PATH
    if not path.exists():
        logger.debug(f"Sin archivo de configuración en {path}, usando valores por defecto")
        return SystemConfig()
    try:
        data = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
        return SystemConfig.model_validate(data)
    except (yaml.YAMLError, UnicodeDecodeError, ValidationError) as e:
        raise UsageError(f"configuración inválida en {path}: {e}") from e


@lru_cache(maxsize=1)
def get_settings() -> SystemConfig:
    """
    Singleton de la configuración.

    Usa LRU cache para leer config/settings.yaml una sola vez por proceso.
    """
    return load_settings()


def configure_logging(level: Optional[str] = None, settings: Optional[SystemConfig] = None):
    """Reemplaza el handler por defecto de loguru por el del runtime"""
    config = (settings or get_settings()).logging
    logger.remove()  # Remover handler por defecto
    logger.add(sys.stderr, format=config.format, level=(level or config.level).upper())
    if config.file:
        logger.add(
            config.file,
            rotation=config.rotation,
            retention=config.retention,
            level="DEBUG",
        )
