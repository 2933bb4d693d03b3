"""
Console reports for parityarray
"""
from typing import Any, Dict, List, Tuple

import numpy as np
from rich.console import Console
from rich.table import Table

console = Console()


def show_capmat(numeric: np.ndarray, closed: np.ndarray, c_big: float, c_small: float) -> float:
    """
    Print the numerical and closed-form inverse capacitance side by side

    Returns:
        Maximum absolute deviation between the two (fF^-1)
    """
    n = numeric.shape[0]
    console.print(f"\n[bold #f5e0dc]Inverse branch capacitance, N={n}, "
                  f"C_B={c_big} fF, C_S={c_small} fF (fF^-1)[/bold #f5e0dc]")

    for title, matrix in (("Numerical (node -> branch reduction)", numeric),
                          ("Closed form (kappa Q + I/C_S)", closed)):
        table = Table(title=title, show_header=True, header_style="bold #cba6f7")
        table.add_column("", style="#89b4fa")
        for j in range(n):
            table.add_column(str(j), style="#89dceb", justify="right")
        for i in range(n):
            table.add_row(str(i), *[f"{matrix[i, j]:.12g}" for j in range(n)])
        console.print(table)

    deviation = float(np.max(np.abs(numeric - closed)))
    scale = float(np.max(np.abs(closed)))
    colour = "#a6e3a1" if deviation <= 1e-10 * scale else "#f38ba8"
    console.print(f"[bold {colour}]Max deviation: {deviation:.3e} fF^-1 "
                  f"(relative {deviation / scale:.3e})[/bold {colour}]")
    return deviation


def show_validation(issues: List[Tuple[str, str]], path: str) -> None:
    """Print the result of a configuration check"""
    if not issues:
        console.print(f"[bold #a6e3a1]✅ {path}: ok[/bold #a6e3a1]")
        return

    console.print(f"[bold #f38ba8]❌ {path}: {len(issues)} problem(s) found[/bold #f38ba8]")
    table = Table(title="Configuration Problems", show_header=True, header_style="bold #cba6f7")
    table.add_column("Key", style="#89b4fa")
    table.add_column("Problem", style="#f38ba8")
    for key, message in issues:
        table.add_row(key or "(document)", message)
    console.print(table)


def show_run_summary(mode: str, summary: Dict[str, Any]) -> None:
    """Print the outcome of a run: files written, failed points and transitions"""
    results = summary["results"]
    if summary["all_converged"] and not results["failed"]:
        console.print(f"\n[bold #a6e3a1]✅ {mode} run finished: {summary['rows']} rows[/bold #a6e3a1]")
    else:
        console.print(f"\n[bold #fab387]⚠ {mode} run finished with {results['failed']} failed point(s); "
                      f"not every point converged[/bold #fab387]")

    table = Table(title="Output Files", show_header=True, header_style="bold #cba6f7")
    table.add_column("Kind", style="#89b4fa")
    table.add_column("Path", style="#89dceb")
    for kind, path in summary["paths"].items():
        table.add_row(kind, path)
    console.print(table)

    if results.get("transitions"):
        table = Table(title="Transition Estimates", show_header=True, header_style="bold #cba6f7")
        table.add_column("N", style="#89b4fa", justify="right")
        table.add_column("eps*/2J", style="#a6e3a1", justify="right")
        for n, value in results["transitions"].items():
            table.add_row(n, "-" if value is None else f"{value:.4f}")
        console.print(table)

    if results["errors"]:
        console.print("\n[bold #f38ba8]The following points failed:[/bold #f38ba8]")
        for index, error in results["errors"]:
            console.print(f"[#f38ba8]- point {index}: {error}[/#f38ba8]")
