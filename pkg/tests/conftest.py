"""
Fixtures compartidas: corpus, programas chequeados y configuración.
"""

from pathlib import Path

import pytest

from app.checker import check
from app.executors import prepare_entry, run_sequential
from app.models import SystemConfig
from app.parser import parse_call, parse_source


CORPUS = Path(__file__).resolve().parent.parent / "corpus"


def load(name: str):
    """Parsea y chequea un archivo del corpus"""
    return check(parse_source((CORPUS / name).read_text(encoding="utf-8")))


def run_entry(program, entry=None, runner=run_sequential, **options):
    """Corre una llamada de entrada con el ejecutor indicado"""
    call = parse_call(entry) if entry else None
    return runner(program, prepare_entry(program, call), **options)


@pytest.fixture
def corpus_dir() -> Path:
    return CORPUS


@pytest.fixture(scope="session")
def fib_program():
    return load("fib.tsia")


@pytest.fixture(scope="session")
def jacobi_program():
    return load("jacobi.tsia")


@pytest.fixture(scope="session")
def stack_program():
    return load("stack.tsia")


@pytest.fixture(scope="session")
def simulate_program():
    return load("simulate.tsia")


@pytest.fixture
def settings() -> SystemConfig:
    """Configuración por defecto (sin archivo de log)"""
    return SystemConfig()
