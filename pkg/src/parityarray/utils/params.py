"""
Parameter path utilities for parityarray

Sweep axes address circuit fields with paths such as ``loops[0].flux``,
``loops[*].offset_charge``, ``loops[1].arm2.ej1``, ``c_big`` or ``lmg.epsilon``.
"""
import logging
import re
from typing import Any, Dict, List, Optional

logger = logging.getLogger("parityarray")

LOOP_PATH = re.compile(r"^loops\[(\d+|\*)\]\.(flux|offset_charge|arm[12]\.ej[12])$")
CIRCUIT_FIELDS = ("c_big", "c_small", "flux_slope")
LMG_FIELDS = ("lmg.epsilon", "lmg.t", "lmg.j")


def path_kind(path: str) -> Optional[str]:
    """
    Classify a parameter path

    Returns:
        "flux", "offset_charge", "junction", "capacitance", "flux_slope", "lmg",
        or None for an unknown path
    """
    if path in LMG_FIELDS:
        return "lmg"
    if path in ("c_big", "c_small"):
        return "capacitance"
    if path == "flux_slope":
        return "flux_slope"
    match = LOOP_PATH.match(path)
    if not match:
        return None
    leaf = match.group(2)
    if leaf in ("flux", "offset_charge"):
        return leaf
    return "junction"


def validate_path(path: str, n_loops: Optional[int]) -> Optional[str]:
    """Return an error message for an unusable path, or None if it is fine

    With ``n_loops`` None the loop count is unknown and indices are not range-checked.
    """
    kind = path_kind(path)
    if kind is None:
        return f"unknown parameter path {path!r}"
    match = LOOP_PATH.match(path)
    if match and n_loops is not None and match.group(1) != "*" and int(match.group(1)) >= n_loops:
        return f"loop index in {path!r} out of range for {n_loops} loops"
    return None


def _loop_indices(selector: str, n_loops: int) -> List[int]:
    return list(range(n_loops)) if selector == "*" else [int(selector)]


def set_path(document: Dict[str, Any], path: str, value: float) -> None:
    """
    Set one parameter in a run configuration document, in place

    Circuit paths are relative to ``document["circuit"]``; ``lmg.*`` paths to
    ``document["lmg"]``.
    """
    if path in LMG_FIELDS:
        document.setdefault("lmg", {})[path.split(".", 1)[1]] = value
        return
    circuit = document["circuit"]
    if path in CIRCUIT_FIELDS:
        if path == "flux_slope":
            document.setdefault("flags", {})["flux_slope"] = value
        else:
            circuit[path] = value
        return

    match = LOOP_PATH.match(path)
    if not match:
        raise KeyError(f"unknown parameter path {path!r}")
    loops = circuit["loops"]
    leaf = match.group(2).split(".")
    for index in _loop_indices(match.group(1), len(loops)):
        target = loops[index]
        for key in leaf[:-1]:
            target = target.setdefault(key, {})
        target[leaf[-1]] = value
