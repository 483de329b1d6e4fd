"""
CLI del runtime TSIA.

Une el frontend, los ejecutores y el workload:

COMANDOS:
- check FILE: parsea y chequea un programa; imprime los diagnósticos
- run FILE [flags]: ejecuta la entrada (o un workload) e imprime los valores
- diff A B: compara dos volcados ``nombre = valor`` o dos archivos de salidas

CÓDIGOS DE SALIDA:
- 0: éxito (diff: idénticos)
- 1: error del programa o diferencias
- 2: error de uso o de archivos

Uso:
    python -m app run corpus/fib.tsia --entry "fib(10;;a)" --executor seq
"""

import argparse
import sys
from pathlib import Path
from typing import Dict, Optional, Sequence

from loguru import logger
from pydantic import ValidationError

from app.checker import check
from app.errors import CheckFailed, IoFailure, MissingFile, TSIAError, UsageError
from app.executors import (
    RunResult, compare_runs, prepare_entry, prepare_workload, run_parallel, run_sequential,
)
from app.models import ExecutorKind, RunConfig, SimPlan
from app.parser import parse_call, parse_source
from app.settings import configure_logging, get_settings
from app.simcluster import run_simcluster
from app.syntax import Program
from app.trace import TraceSink
from app.workload import WorkloadDecl, load_events, write_outputs


# ============================================================================
# PROGRAMAS
# ============================================================================

def read_source(path: Path) -> str:
    if not path.exists():
        raise MissingFile(f"archivo no encontrado: {path}")
    try:
        return path.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as e:
        raise IoFailure(f"no se pudo leer {path}: {e}") from e


def load_program(path: Path) -> Program:
    """Lee, parsea y chequea un programa; los errores de frontend salen como CheckFailed"""
    source = read_source(path)
    try:
        program = check(parse_source(source))
    except CheckFailed:
        raise
    except TSIAError as e:
        raise CheckFailed([e.diagnostic()]) from e
    for w in program.warnings:
        print(w.format(str(path)), file=sys.stderr)
    return program


def _print_diagnostics(path: Path, error: CheckFailed):
    for d in error.diagnostics:
        print(d.format(str(path)), file=sys.stderr)


# ============================================================================
# COMANDOS
# ============================================================================

def cmd_check(path: Path) -> int:
    """0 si el programa chequea limpio; 1 con diagnósticos"""
    try:
        load_program(path)
    except CheckFailed as e:
        _print_diagnostics(path, e)
        return 1
    print(f"{path}: ok")
    return 0


def execute(config: RunConfig, program: Program) -> RunResult:
    """Arma las raíces y corre el ejecutor pedido"""
    settings = get_settings()
    if config.workload:
        decl = WorkloadDecl(config.workload, config.input, config.output)
        routine = decl.validate(program)
        roots = prepare_workload(program, routine.name, load_events(decl.input, routine))
    else:
        call = None
        if config.entry:
            try:
                call = parse_call(config.entry)
            except TSIAError as e:
                raise UsageError(f"--entry inválido: {e}") from e
        roots = prepare_entry(program, call)

    trace = TraceSink(config.trace) if config.trace else None
    try:
        if config.executor is ExecutorKind.SEQ:
            return run_sequential(program, roots, config.policy, trace)
        if config.executor is ExecutorKind.PARALLEL:
            workers = config.workers or settings.executors.parallel_workers
            return run_parallel(program, roots, workers, config.policy, trace)
        if config.plan is not None:
            plan = SimPlan.from_yaml(config.plan)
        else:
            sim = settings.simulation
            plan = SimPlan.uniform(settings.executors.parallel_workers,
                                   default_cost=sim.default_cost,
                                   dispatch_overhead=sim.dispatch_overhead,
                                   restart_delay=sim.restart_delay)
        return run_simcluster(program, roots, plan, config.policy, config.seed, trace)
    finally:
        if trace is not None:
            trace.close()


def cmd_run(config: RunConfig) -> int:
    """Ejecuta e imprime los valores finales (o escribe las salidas del workload)"""
    try:
        program = load_program(config.program)
    except CheckFailed as e:
        _print_diagnostics(config.program, e)
        return 1
    result = execute(config, program)
    if config.workload:
        write_outputs(result.outputs, config.output)
    else:
        for line in result.lines():
            print(line)
    if config.stats:
        for line in result.stats.lines():
            print(line)
    return 0


def read_dump(path: Path) -> Dict[str, str]:
    """
    Lee un volcado ``nombre = valor`` (salida de run) o un archivo de
    salidas de workload (la clave es el número de línea).
    """
    values: Dict[str, str] = {}
    for n, line in enumerate(read_source(path).splitlines(), start=1):
        name, sep, value = line.partition(" = ")
        if sep:
            values[name.strip()] = value.strip()
        elif line.strip():
            values[str(n)] = " ".join(line.split())
    return values


def cmd_diff(a: Path, b: Path) -> int:
    """0 si los volcados son idénticos; 1 e imprime la primera divergencia si no"""
    report = compare_runs(read_dump(a), read_dump(b))
    if report.identical:
        print(f"idénticos ({report.compared} valores)")
        return 0
    print(f"difieren en {report.first_divergence}: {report.detail}")
    return 1


# ============================================================================
# ARGUMENTOS
# ============================================================================

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="python -m app",
        description="Runtime TSIA: tareas con items de asignación única",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_check = sub.add_parser("check", help="Parsear y chequear un programa")
    p_check.add_argument("file", type=Path)

    p_run = sub.add_parser("run", help="Ejecutar un programa")
    p_run.add_argument("file", type=Path)
    p_run.add_argument("--entry", help="Llamada de entrada, p.ej. 'fib(10;;a)'")
    p_run.add_argument("--executor", choices=[e.value for e in ExecutorKind], default="seq")
    p_run.add_argument("--workers", type=int, help="Workers del ejecutor paralelo")
    p_run.add_argument("--policy", help="delegate-always | inline-always | "
                                        "inline-below-depth:D | inline-below-size:N")
    p_run.add_argument("--seed", type=int, help="Semilla del cluster simulado")
    p_run.add_argument("--plan", type=Path, help="Plan YAML del cluster simulado")
    p_run.add_argument("--trace", type=Path, help="Archivo de traza (JSON por línea)")
    p_run.add_argument("--stats", action="store_true", help="Imprimir estadísticas")
    p_run.add_argument("--workload", help="Rutina aplicada a cada evento")
    p_run.add_argument("--input", type=Path, help="Archivo de eventos")
    p_run.add_argument("--output", type=Path, help="Archivo de salidas")

    p_diff = sub.add_parser("diff", help="Comparar dos volcados de valores")
    p_diff.add_argument("a", type=Path)
    p_diff.add_argument("b", type=Path)
    return parser


def run_config(args: argparse.Namespace) -> RunConfig:
    try:
        return RunConfig(
            program=args.file, entry=args.entry, workload=args.workload,
            input=args.input, output=args.output, executor=args.executor,
            workers=args.workers, policy=args.policy, seed=args.seed,
            plan=args.plan, trace=args.trace, stats=args.stats,
        )
    except ValidationError as e:
        raise UsageError(e.errors()[0]["msg"]) from e


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        configure_logging()
        if args.command == "check":
            return cmd_check(args.file)
        if args.command == "diff":
            return cmd_diff(args.a, args.b)
        return cmd_run(run_config(args))
    except UsageError as e:
        logger.error(f"❌ {e}")
        print(f"error: {e}", file=sys.stderr)
        return 2
    except TSIAError as e:
        logger.error(f"❌ {e}")
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
