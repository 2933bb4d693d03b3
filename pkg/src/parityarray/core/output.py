"""
Output file module for parityarray
Writes sweep tables (.csv), gnuplot scripts (.gp) and run sidecars (.meta.json)
"""
import csv
import json
import logging
import math
import os
from typing import Any, Dict, Optional, Sequence

logger = logging.getLogger("parityarray")


def format_value(value: Any) -> str:
    """Render one CSV cell; floats use the shortest decimal that round-trips"""
    if isinstance(value, bool):
        return "true" if value else "false"
    if value is None:
        return ""
    if isinstance(value, int):
        return str(value)
    try:
        number = float(value)
    except (TypeError, ValueError):
        return str(value)
    if math.isnan(number):
        return "nan"
    return repr(number)


def _ensure_parent(path: str) -> None:
    parent = os.path.dirname(path)
    if parent:
        os.makedirs(parent, exist_ok=True)


def write_csv(rows: Sequence[Dict[str, Any]], columns: Sequence[str], output_path: str) -> str:
    """
    Write sweep rows as an RFC 4180 table

    Args:
        rows: One dict per grid point, in output order
        columns: Header names; every row must carry each of them
        output_path: Path of the .csv file

    Returns:
        Path to the created file
    """
    _ensure_parent(output_path)
    with open(output_path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\r\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([format_value(row.get(column)) for column in columns])
    logger.info(f"Wrote {len(rows)} rows to {output_path}")
    return output_path


def write_gnuplot(csv_path: str, output_path: str, x_column: str, y_column: str,
                  y_column_2d: Optional[str] = None,
                  title: Optional[str] = None, ylabel: str = "Energy (GHz)") -> str:
    """
    Write a gnuplot script that plots a CSV produced by write_csv

    With ``y_column_2d`` the script draws a surface (splot) of that column over
    (x_column, y_column).

    Returns:
        Path to the created script
    """
    csv_name = os.path.basename(csv_path)
    lines = [
        "# gnuplot script generated by parityarray",
        'set datafile separator ","',
        "set key autotitle columnhead",
        f'set title "{title or csv_name}"',
    ]
    if y_column_2d:
        lines += [
            f'set xlabel "{x_column}"',
            f'set ylabel "{y_column}"',
            f'set zlabel "{y_column_2d}"',
            "set pm3d",
            f"splot '{csv_name}' using (column(\"{x_column}\")):(column(\"{y_column}\"))"
            f":(column(\"{y_column_2d}\")) with pm3d notitle",
        ]
    else:
        lines += [
            f'set xlabel "{x_column}"',
            f'set ylabel "{ylabel}"',
            f"plot '{csv_name}' using (column(\"{x_column}\")):(column(\"{y_column}\")) "
            f"with linespoints title \"{y_column}\"",
        ]
    lines.append("pause -1")

    _ensure_parent(output_path)
    with open(output_path, "w", encoding="utf-8") as f:
        f.write("\n".join(lines) + "\n")
    return output_path


def write_meta(config: Dict[str, Any], version: str, extra: Dict[str, Any], output_path: str) -> str:
    """
    Write the run sidecar: resolved config, library version and convergence flags

    Returns:
        Path to the created file
    """
    document = {"version": version, "config": config}
    document.update(extra)
    _ensure_parent(output_path)
    with open(output_path, "w", encoding="utf-8") as f:
        json.dump(document, f, indent=2, sort_keys=True, default=_json_default)
        f.write("\n")
    return output_path


def _json_default(value: Any) -> Any:
    # numpy scalars
    if hasattr(value, "item"):
        return value.item()
    raise TypeError(f"cannot serialize {type(value).__name__}")


def output_paths(prefix: str) -> Dict[str, str]:
    return {"csv": f"{prefix}.csv", "gp": f"{prefix}.gp", "meta": f"{prefix}.meta.json"}
