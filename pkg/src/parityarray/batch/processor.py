"""
Batch processing functionality for parityarray

Expands a run configuration into sweep points, evaluates them (inline or on a
process pool) and writes the CSV table, gnuplot script and meta sidecar.
"""
import asyncio
import copy
import itertools
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from functools import partial
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np
from rich.console import Console
from rich.progress import BarColumn, Progress, SpinnerColumn, TextColumn

from .. import __version__
from ..core.charge_basis import (
    Truncation,
    build_hamiltonian,
    converged_spectrum,
    lowest_eigenvalues,
    result_parities,
)
from ..core.circuit import CircuitSpec, charging_energies, closed_form_inverse
from ..core.effective_spin import band_structure, extract_single_loop, extract_two_loop
from ..core.errors import ConvergenceError, DimensionOverflowError, ParityArrayError
from ..core.giant_spin import transition_scan
from ..core.output import output_paths, write_csv, write_gnuplot, write_meta
from ..utils.params import set_path
from .config import RunConfig, build_circuit

console = Console()
logger = logging.getLogger("parityarray")

FIT_COLUMNS = ["t", "t_plus", "t_minus", "j", "residual_rms", "bandwidth", "converged"]
LMG_COLUMNS = ["eps_over_2j", "E10", "gap_over_4j", "sz_over_s", "transition", "converged"]
CAPMAT_COLUMNS = ["i", "j", "numeric", "closed_form", "deviation"]

# Errors that fail one sweep point and leave the rest of the run intact
POINT_ERRORS = (ParityArrayError, np.linalg.LinAlgError, ArithmeticError, ValueError)


def sweep_points(config: RunConfig) -> List[Tuple[Dict[str, float], Dict[str, Any]]]:
    """
    Cartesian product of the sweep axes, first axis slowest

    Returns:
        List of (axis values, resolved document with the values applied)
    """
    base = config.to_dict()
    points = []
    for combo in itertools.product(*[axis.values() for axis in config.axes]):
        document = copy.deepcopy(base)
        values = {}
        for axis, value in zip(config.axes, combo):
            values[axis.name] = value
            for path in axis.paths:
                set_path(document, path, value)
        points.append((values, document))
    return points


def spectrum_columns(config: RunConfig) -> List[str]:
    k = config.levels
    columns = [axis.name for axis in config.axes]
    columns += [f"E{i}" for i in range(k)] + ["E01"]
    if k >= 3:
        columns.append("E02")
    if config.flags.keep_eigenvectors:
        columns += ["parity0", "parity1"]
    return columns + ["n_max_used", "converged"]


def spectrum_task(document: Dict[str, Any], trunc: Truncation, levels: int,
                  keep_vectors: bool, converge: bool) -> Dict[str, Any]:
    """Spectrum columns of one sweep point"""
    spec = build_circuit(document)
    if converge:
        result = converged_spectrum(spec, trunc, levels, keep_vectors=keep_vectors)
    else:
        result = lowest_eigenvalues(build_hamiltonian(spec, trunc), levels, keep_vectors=keep_vectors)

    row: Dict[str, Any] = {f"E{i}": float(e) for i, e in enumerate(result.energies)}
    row["E01"] = result.e01
    row["E02"] = result.e02
    if keep_vectors:
        parities = result_parities(result, spec.n)
        row["parity0"], row["parity1"] = float(parities[0]), float(parities[1])
    row["n_max_used"] = result.n_max_used
    row["converged"] = result.converged
    return row


def fit_task(document: Dict[str, Any], trunc: Truncation, grid_points: int,
             span: float, bands: int) -> Dict[str, Any]:
    """Spin-model fit of one circuit"""
    spec = build_circuit(document)
    grid = band_structure(spec, grid_points=grid_points, bands=bands, trunc=trunc, span=span)
    fit = extract_single_loop(grid) if spec.n == 1 else extract_two_loop(grid)
    return {
        "t": fit.t,
        "t_plus": fit.t_plus,
        "t_minus": fit.t_minus,
        "j": fit.j,
        "residual_rms": fit.residual_rms,
        "bandwidth": fit.bandwidth,
        "converged": True,
    }


def lmg_task(n: int, t: float, j: float, eps_grid: List[float], fraction: float):
    return transition_scan(n, j, eps_grid, t=t, fraction=fraction)


async def _indexed(index: int, future) -> Tuple[int, Any, Optional[Exception]]:
    try:
        return index, await future, None
    except POINT_ERRORS as e:
        return index, None, e


async def run_points(tasks: List[Callable[[], Any]], workers: int = 1,
                     description: str = "Evaluating sweep points...") -> Tuple[List[Any], Dict[str, Any]]:
    """
    Evaluate independent tasks and return their outputs in input order

    Args:
        tasks: Zero-argument picklable callables
        workers: Worker processes; 1 runs inline
        description: Progress bar label

    Returns:
        Tuple of (outputs with None for failed tasks, results summary)
    """
    results = {"success": 0, "failed": 0, "errors": []}
    outputs: List[Any] = [None] * len(tasks)

    def record(index: int, value: Any, error: Optional[Exception]) -> None:
        if error is None:
            outputs[index] = value
            results["success"] += 1
        else:
            results["failed"] += 1
            results["errors"].append((index, error))
            logger.warning(f"Point {index} failed: {error}")

    with Progress(
        SpinnerColumn(),
        TextColumn("[progress.description]{task.description}"),
        BarColumn(),
        TextColumn("{task.completed}/{task.total}"),
        console=console,
        transient=True,
    ) as progress:
        task = progress.add_task(f"[#89b4fa]{description}[/#89b4fa]", total=len(tasks))

        if workers <= 1 or len(tasks) <= 1:
            for index, fn in enumerate(tasks):
                try:
                    record(index, fn(), None)
                except POINT_ERRORS as e:
                    record(index, None, e)
                progress.advance(task)
        else:
            loop = asyncio.get_running_loop()
            with ProcessPoolExecutor(max_workers=workers) as pool:
                pending = [_indexed(i, loop.run_in_executor(pool, fn)) for i, fn in enumerate(tasks)]
                for finished in asyncio.as_completed(pending):
                    record(*(await finished))
                    progress.advance(task)

    results["errors"].sort(key=lambda item: item[0])
    return outputs, results


def _failed_row(columns: List[str]) -> Dict[str, Any]:
    return {column: float("nan") for column in columns}


def _gnuplot_for(config: RunConfig, columns: List[str], csv_path: str, gp_path: str, y_column: str) -> str:
    axes = [axis.name for axis in config.axes]
    if len(axes) >= 2:
        return write_gnuplot(csv_path, gp_path, axes[0], axes[1], y_column_2d=y_column)
    x_column = axes[0] if axes else ("n_max_used" if "n_max_used" in columns else columns[0])
    return write_gnuplot(csv_path, gp_path, x_column, y_column)


async def _run_spectrum(config: RunConfig, workers: int) -> Tuple[List[str], List[Dict[str, Any]], Dict[str, Any]]:
    columns = spectrum_columns(config)
    points = sweep_points(config)
    tasks = [
        partial(spectrum_task, document, config.truncation, config.levels,
                config.flags.keep_eigenvectors, config.flags.converge)
        for _, document in points
    ]
    outputs, results = await run_points(tasks, workers, f"Computing {len(tasks)} spectra...")
    results["unconverged"] = sum(1 for output in outputs if output and not output["converged"])
    rows = []
    for (values, _), output in zip(points, outputs):
        row = _failed_row(columns)
        row["converged"] = False
        row.update(output or {})
        row.update(values)
        rows.append(row)
    return columns, rows, results


async def _run_fit(config: RunConfig, workers: int) -> Tuple[List[str], List[Dict[str, Any]], Dict[str, Any]]:
    columns = [axis.name for axis in config.axes] + FIT_COLUMNS
    points = sweep_points(config)
    tasks = [
        partial(fit_task, document, config.truncation, config.fit.grid_points,
                config.fit.span, config.fit.bands)
        for _, document in points
    ]
    outputs, results = await run_points(tasks, workers, f"Fitting {len(tasks)} spin models...")
    rows = []
    for (values, _), output in zip(points, outputs):
        row = _failed_row(columns)
        row["converged"] = False
        row.update(output or {})
        row.update(values)
        rows.append(row)
    return columns, rows, results


async def _run_lmg(config: RunConfig, workers: int) -> Tuple[List[str], List[Dict[str, Any]], Dict[str, Any]]:
    axis = config.axes[0]
    eps_grid = axis.values()
    columns = ["n", axis.name] + LMG_COLUMNS
    tasks = [
        partial(lmg_task, n, config.lmg.t, config.lmg.j, eps_grid, config.flags.gap_fraction)
        for n in config.lmg.n
    ]
    outputs, results = await run_points(tasks, workers, f"Scanning {len(tasks)} array lengths...")
    rows = []
    transitions = {}
    for n, scan in zip(config.lmg.n, outputs):
        if scan is None:
            transitions[str(n)] = None
            for eps in eps_grid:
                row = _failed_row(columns)
                row.update({"n": n, axis.name: eps, "converged": False})
                rows.append(row)
            continue
        transition = scan.transition
        transitions[str(n)] = None if math.isnan(transition) else transition
        for i, eps in enumerate(eps_grid):
            rows.append({
                "n": n,
                axis.name: eps,
                "eps_over_2j": scan.eps_over_2j[i],
                "E10": scan.gap[i],
                "gap_over_4j": scan.gap_over_4j[i],
                "sz_over_s": scan.sz_mean[i],
                "transition": transition,
                "converged": True,
            })
    results["transitions"] = transitions
    return columns, rows, results


def capmat_rows(n: int, c_big: float, c_small: float) -> Tuple[np.ndarray, np.ndarray, List[Dict[str, Any]]]:
    """Numerical and closed-form inverse branch capacitance, element by element"""
    spec = CircuitSpec.uniform(n, c_big, c_small, ej2=0.0)
    numeric = charging_energies(spec).inv_cap
    closed = closed_form_inverse(n, c_big, c_small)
    rows = []
    for i in range(n):
        for j in range(n):
            rows.append({
                "i": i,
                "j": j,
                "numeric": numeric[i, j],
                "closed_form": closed[i, j],
                "deviation": abs(numeric[i, j] - closed[i, j]),
            })
    return numeric, closed, rows


async def execute_run(config: RunConfig, workers: int = 1, prefix: Optional[str] = None) -> Dict[str, Any]:
    """
    Execute a validated run and write its output files

    Returns:
        Summary dict with output paths, row count, the results dict of the
        point evaluation, an ``all_converged`` flag and ``non_convergence``
        (a solver or truncation failure, or an unconverged point)
    """
    prefix = prefix or config.output
    config.output = prefix
    paths = output_paths(prefix)
    logger.info(f"Starting {config.mode} run, output prefix {prefix}")

    if config.mode in ("spectrum", "sweep-charge", "sweep-flux"):
        columns, rows, results = await _run_spectrum(config, workers)
        y_column = "E01"
    elif config.mode == "fit-tb":
        columns, rows, results = await _run_fit(config, workers)
        y_column = "t"
    elif config.mode == "lmg-scan":
        columns, rows, results = await _run_lmg(config, workers)
        y_column = "gap_over_4j"
    else:
        spec = config.circuit_spec()
        _, _, rows = capmat_rows(spec.n, spec.c_big, spec.c_small)
        columns = CAPMAT_COLUMNS
        results = {"success": len(rows), "failed": 0, "errors": []}
        y_column = "deviation"

    write_csv(rows, columns, paths["csv"])
    if config.mode == "lmg-scan":
        write_gnuplot(paths["csv"], paths["gp"], "eps_over_2j", y_column, ylabel="gap / 4J")
    elif config.mode == "capmat":
        write_gnuplot(paths["csv"], paths["gp"], "i", "j", y_column_2d=y_column)
    else:
        _gnuplot_for(config, columns, paths["csv"], paths["gp"], y_column)

    converged = [bool(row.get("converged", True)) for row in rows]
    all_converged = all(converged)
    non_convergence = results.get("unconverged", 0) > 0 or any(
        isinstance(e, (ConvergenceError, DimensionOverflowError)) for _, e in results["errors"])
    extra = {
        "all_converged": all_converged,
        "converged": converged,
        "failed_points": [index for index, _ in results["errors"]],
    }
    if "transitions" in results:
        extra["transitions"] = results["transitions"]
    write_meta(config.to_dict(), __version__, extra, paths["meta"])

    logger.info(f"Finished {config.mode} run: {len(rows)} rows, {results['failed']} failed points")
    return {
        "paths": paths,
        "rows": len(rows),
        "results": results,
        "all_converged": all_converged,
        "non_convergence": non_convergence,
    }
