"""
Run configuration loading and validation for parityarray

A run is described by one JSON document. Validation collects every problem
with the key path it belongs to, so a single pass reports all of them.
"""
import copy
import json
import logging
import math
import os
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

from jsonschema import Draft7Validator, validators

from ..core.charge_basis import DEFAULT_NUM_LEVELS, Truncation
from ..core.circuit import CircuitSpec
from ..core.effective_spin import DEFAULT_GRID_POINTS, DEFAULT_SPAN
from ..core.errors import ConfigError, InvalidSpecError
from ..core.giant_spin import DEFAULT_GAP_FRACTION
from ..utils.params import path_kind, validate_path

logger = logging.getLogger("parityarray")

MODES = ("spectrum", "sweep-charge", "sweep-flux", "fit-tb", "lmg-scan", "capmat")
DEFAULT_FLUX_SLOPE = 250.0  # GHz per flux quantum

AXIS_KINDS = {
    "sweep-charge": {"offset_charge"},
    "sweep-flux": {"flux"},
    "lmg-scan": {"lmg"},
}


@dataclass
class SweepAxis:
    """One sweep axis bound to one or more parameter paths"""
    name: str
    paths: List[str]
    start: float
    stop: float
    points: int

    def values(self) -> List[float]:
        if self.points == 1:
            return [float(self.start)]
        step = (self.stop - self.start) / (self.points - 1)
        return [float(self.start + i * step) for i in range(self.points - 1)] + [float(self.stop)]


@dataclass
class LMGSettings:
    n: List[int]
    t: float = 0.0
    j: float = 1.0
    epsilon: float = 0.0


@dataclass
class FitSettings:
    grid_points: int = DEFAULT_GRID_POINTS
    span: float = DEFAULT_SPAN
    bands: int = 4


@dataclass
class RunFlags:
    linearized_flux: bool = False
    keep_eigenvectors: bool = False
    gap_fraction: float = DEFAULT_GAP_FRACTION
    flux_slope: float = DEFAULT_FLUX_SLOPE
    converge: bool = True


@dataclass
class RunConfig:
    """
    Validated run configuration

    ``circuit`` keeps the JSON form of the circuit so sweep paths can be applied
    to it before a CircuitSpec is built for each point.
    """
    mode: str
    circuit: Optional[Dict[str, Any]] = None
    truncation: Truncation = field(default_factory=Truncation)
    levels: int = DEFAULT_NUM_LEVELS
    axes: List[SweepAxis] = field(default_factory=list)
    lmg: Optional[LMGSettings] = None
    fit: FitSettings = field(default_factory=FitSettings)
    output: str = "parityarray_run"
    flags: RunFlags = field(default_factory=RunFlags)

    def circuit_spec(self) -> CircuitSpec:
        return build_circuit(self.to_dict())

    def to_dict(self) -> Dict[str, Any]:
        """Fully resolved document, defaults included; loading it gives the same run"""
        document: Dict[str, Any] = {
            "mode": self.mode,
            "truncation": {
                "n_max": self.truncation.n_max,
                "convergence_tol": self.truncation.convergence_tol,
                "max_dim": self.truncation.max_dim,
            },
            "levels": self.levels,
            "axes": [
                {"name": a.name, "paths": list(a.paths), "start": a.start, "stop": a.stop, "points": a.points}
                for a in self.axes
            ],
            "fit": {"grid_points": self.fit.grid_points, "span": self.fit.span, "bands": self.fit.bands},
            "output": self.output,
            "flags": {
                "linearized_flux": self.flags.linearized_flux,
                "keep_eigenvectors": self.flags.keep_eigenvectors,
                "gap_fraction": self.flags.gap_fraction,
                "flux_slope": self.flags.flux_slope,
                "converge": self.flags.converge,
            },
        }
        if self.circuit is not None:
            document["circuit"] = copy.deepcopy(self.circuit)
        if self.lmg is not None:
            document["lmg"] = {"n": list(self.lmg.n), "t": self.lmg.t, "j": self.lmg.j,
                               "epsilon": self.lmg.epsilon}
        return document


def build_circuit(document: Dict[str, Any]) -> CircuitSpec:
    """
    CircuitSpec for a resolved document (or one sweep point of it)

    The linearized flux-error switch and slope live under ``flags`` in the
    document and are copied onto the circuit.
    """
    flags = document.get("flags", {})
    data = dict(document["circuit"])
    data["linearized_flux"] = flags.get("linearized_flux", False)
    data["flux_slope"] = flags.get("flux_slope", DEFAULT_FLUX_SLOPE) if data["linearized_flux"] else None
    return CircuitSpec.from_dict(data)


def _finite_number(checker, instance: Any) -> bool:
    return isinstance(instance, (int, float)) and not isinstance(instance, bool) and math.isfinite(instance)


RunValidator = validators.extend(
    Draft7Validator,
    type_checker=Draft7Validator.TYPE_CHECKER.redefine("number", _finite_number),
)

_NUMBER = {"type": "number"}
_NON_NEGATIVE = {"type": "number", "minimum": 0}
_POSITIVE = {"type": "number", "exclusiveMinimum": 0}

_ARM_SCHEMA = {
    "type": "object",
    "properties": {"ej1": _NON_NEGATIVE, "ej2": _NON_NEGATIVE},
    "additionalProperties": False,
}

_AXIS_SCHEMA = {
    "type": "object",
    "properties": {
        "name": {"type": "string", "minLength": 1},
        "paths": {"type": "array", "minItems": 1, "items": {"type": "string"}},
        "start": _NUMBER,
        "stop": _NUMBER,
        "points": {"type": "integer", "minimum": 2},
    },
    "required": ["name", "paths", "start", "stop", "points"],
    "additionalProperties": False,
}

RUN_SCHEMA = {
    "$schema": "http://json-schema.org/draft-07/schema#",
    "type": "object",
    "properties": {
        "mode": {"enum": list(MODES)},
        "circuit": {
            "type": "object",
            "properties": {
                "c_big": _NON_NEGATIVE,
                "c_small": _POSITIVE,
                "loops": {
                    "type": "array",
                    "minItems": 1,
                    "items": {
                        "type": "object",
                        "properties": {
                            "flux": _NUMBER,
                            "offset_charge": _NUMBER,
                            "arm1": _ARM_SCHEMA,
                            "arm2": _ARM_SCHEMA,
                        },
                        "additionalProperties": False,
                    },
                },
            },
            "required": ["c_big", "c_small", "loops"],
            "additionalProperties": False,
        },
        "truncation": {
            "type": "object",
            "properties": {
                "n_max": {"type": "integer", "minimum": 2},
                "convergence_tol": _POSITIVE,
                "max_dim": {"type": "integer", "minimum": 1},
            },
            "additionalProperties": False,
        },
        "levels": {"type": "integer", "minimum": 2},
        "axes": {"type": "array", "items": _AXIS_SCHEMA},
        "lmg": {
            "type": "object",
            "properties": {
                "n": {
                    "description": "a positive integer or a list of them",
                    "oneOf": [
                        {"type": "integer", "minimum": 1},
                        {"type": "array", "minItems": 1, "items": {"type": "integer", "minimum": 1}},
                    ],
                },
                "t": _NUMBER,
                "j": _NON_NEGATIVE,
                "epsilon": _NUMBER,
            },
            "required": ["n"],
            "additionalProperties": False,
        },
        "fit": {
            "type": "object",
            "properties": {
                "grid_points": {"description": "an odd integer >= 5", "type": "integer", "minimum": 5,
                                "not": {"multipleOf": 2}},
                "span": {"enum": [0.5, 1.0]},
                "bands": {"type": "integer", "minimum": 2},
            },
            "additionalProperties": False,
        },
        "output": {"type": "string", "minLength": 1},
        "flags": {
            "type": "object",
            "properties": {
                "linearized_flux": {"type": "boolean"},
                "keep_eigenvectors": {"type": "boolean"},
                "gap_fraction": _POSITIVE,
                "flux_slope": _NUMBER,
                "converge": {"type": "boolean"},
            },
            "additionalProperties": False,
        },
    },
    "required": ["mode"],
    "additionalProperties": False,
    "allOf": [
        {
            "if": {"properties": {"mode": {"enum": [m for m in MODES if m != "lmg-scan"]}}, "required": ["mode"]},
            "then": {"required": ["circuit"]},
        },
        {
            "if": {"properties": {"mode": {"const": "lmg-scan"}}, "required": ["mode"]},
            "then": {"required": ["lmg"]},
        },
    ],
}

_TYPE_WORDS = {
    "number": "a finite number",
    "integer": "an integer",
    "boolean": "true or false",
    "object": "an object",
    "array": "a list",
    "string": "a string",
}


def _issue_key(document: Any, path: Sequence[Any]) -> str:
    """Dotted key for a schema path; sweep axes are labelled by name"""
    key = ""
    node = document
    parent = None
    for item in path:
        if isinstance(item, int):
            name = node[item].get("name") if isinstance(node[item], dict) else None
            label = name if parent == "axes" and isinstance(name, str) and name else item
            key += f"[{label}]"
        else:
            key = f"{key}.{item}" if key else item
        parent = item
        node = node[item]
    return key


def _child(key: str, name: str) -> str:
    return f"{key}.{name}" if key else name


def _schema_issues(document: Any) -> List[Tuple[str, str]]:
    issues: List[Tuple[str, str]] = []
    errors = sorted(RunValidator(RUN_SCHEMA).iter_errors(document),
                    key=lambda e: [str(p) for p in e.absolute_path])
    for error in errors:
        key = _issue_key(document, error.absolute_path)
        value, got = error.validator_value, error.instance
        if error.validator == "additionalProperties":
            known = set(error.schema.get("properties", {}))
            issues += [(_child(key, name), "unknown key") for name in sorted(set(got) - known)]
        elif error.validator == "required":
            issues += [(_child(key, name), "is required") for name in value if name not in got]
        elif error.validator == "type":
            issues.append((key, f"must be {_TYPE_WORDS.get(value, value)}"))
        elif error.validator == "minimum":
            issues.append((key, f"must be >= {value}, got {got}"))
        elif error.validator == "exclusiveMinimum":
            issues.append((key, f"must be > {value}, got {got}"))
        elif error.validator == "enum":
            issues.append((key, f"must be one of {', '.join(map(str, value))}, got {got!r}"))
        elif error.validator in ("minItems", "minLength"):
            issues.append((key, "must not be empty"))
        elif "description" in error.schema:
            issues.append((key, f"must be {error.schema['description']}, got {got!r}"))
        else:
            issues.append((key, error.message))
    return list(dict.fromkeys(issues))


def _cross_field_issues(document: Dict[str, Any], mode: Optional[str]) -> List[Tuple[str, str]]:
    """Rules that tie the axes and loops to the mode"""
    issues: List[Tuple[str, str]] = []
    circuit = document.get("circuit")
    loops = circuit.get("loops") if isinstance(circuit, dict) else None
    n_loops = len(loops) if isinstance(loops, list) else None

    raw_axes = document.get("axes", [])
    axes = [axis for axis in raw_axes if isinstance(axis, dict)] if isinstance(raw_axes, list) else []
    names = set()
    for i, axis in enumerate(axes):
        name = axis.get("name")
        if not isinstance(name, str) or not name:
            continue
        if name in names:
            issues.append((f"axes[{i}].name", f"duplicate axis name {name!r}"))
        names.add(name)
        paths = axis.get("paths")
        for path in paths if isinstance(paths, list) else []:
            if not isinstance(path, str):
                continue
            problem = validate_path(path, n_loops)
            if problem:
                issues.append((f"axes[{name}].paths", problem))
            elif mode in AXIS_KINDS and path_kind(path) not in AXIS_KINDS[mode]:
                issues.append((f"axes[{name}].paths", f"{path!r} cannot be swept in {mode} mode"))
            elif mode is not None and mode not in AXIS_KINDS and path_kind(path) == "lmg":
                issues.append((f"axes[{name}].paths", f"{path!r} only applies to lmg-scan mode"))

    if mode in ("sweep-charge", "sweep-flux") and not raw_axes:
        issues.append(("axes", f"{mode} mode needs at least one axis"))
    if mode == "lmg-scan" and (len(axes) != 1 or axes[0].get("paths") != ["lmg.epsilon"]):
        issues.append(("axes", "lmg-scan mode needs exactly one axis over lmg.epsilon"))
    if mode == "fit-tb" and n_loops is not None and n_loops not in (1, 2):
        issues.append(("circuit.loops", f"fit-tb mode supports 1 or 2 loops, got {n_loops}"))
    return issues


def _resolve_circuit(data: Dict[str, Any]) -> Dict[str, Any]:
    loops = []
    for loop in data["loops"]:
        entry = {"flux": loop.get("flux", 0.5), "offset_charge": loop.get("offset_charge", 0.0)}
        for arm in ("arm1", "arm2"):
            raw = loop.get(arm, {})
            entry[arm] = {"ej1": raw.get("ej1", 0.0), "ej2": raw.get("ej2", 0.0)}
        loops.append(entry)
    return {"c_big": data["c_big"], "c_small": data["c_small"], "loops": loops}


def validate_document(document: Any) -> Tuple[Optional[RunConfig], List[Tuple[str, str]]]:
    """
    Check a configuration document against RUN_SCHEMA and the cross-field rules

    Returns:
        Tuple of (RunConfig or None, list of (key, message) issues)
    """
    if not isinstance(document, dict):
        return None, [("", "configuration must be a JSON object")]

    issues = _schema_issues(document)
    mode = document.get("mode") if document.get("mode") in MODES else None
    issues += _cross_field_issues(document, mode)

    circuit = _resolve_circuit(document["circuit"]) if "circuit" in document and not issues else None
    if circuit is not None:
        try:
            CircuitSpec.from_dict(circuit)
        except InvalidSpecError as e:
            issues.append(("circuit", str(e)))
    if issues:
        return None, issues

    raw = document.get("truncation", {})
    defaults = Truncation()
    truncation = Truncation(
        n_max=int(raw.get("n_max", defaults.n_max)),
        convergence_tol=raw.get("convergence_tol", defaults.convergence_tol),
        max_dim=int(raw.get("max_dim", defaults.max_dim)),
    )
    axes = [SweepAxis(name=a["name"], paths=list(a["paths"]), start=a["start"], stop=a["stop"],
                      points=int(a["points"]))
            for a in document.get("axes", [])]

    lmg = None
    if "lmg" in document:
        raw = document["lmg"]
        sizes = raw["n"] if isinstance(raw["n"], list) else [raw["n"]]
        lmg = LMGSettings(n=[int(n) for n in sizes], t=raw.get("t", 0.0), j=raw.get("j", 1.0),
                          epsilon=raw.get("epsilon", 0.0))

    raw = document.get("fit", {})
    fit = FitSettings(grid_points=int(raw.get("grid_points", DEFAULT_GRID_POINTS)),
                      span=raw.get("span", DEFAULT_SPAN), bands=int(raw.get("bands", 4)))

    raw = document.get("flags", {})
    defaults = RunFlags()
    flags = RunFlags(
        linearized_flux=raw.get("linearized_flux", defaults.linearized_flux),
        keep_eigenvectors=raw.get("keep_eigenvectors", defaults.keep_eigenvectors),
        gap_fraction=raw.get("gap_fraction", defaults.gap_fraction),
        flux_slope=raw.get("flux_slope", defaults.flux_slope),
        converge=raw.get("converge", defaults.converge),
    )

    config = RunConfig(mode=mode, circuit=circuit, truncation=truncation,
                       levels=int(document.get("levels", DEFAULT_NUM_LEVELS)), axes=axes, lmg=lmg,
                       fit=fit, output=document.get("output", "parityarray_run"), flags=flags)
    return config, []


def read_document(path: str) -> Any:
    """
    Read a configuration document (or the ``config`` of a run's meta sidecar)

    Raises:
        ConfigError: If the file is missing or is not valid JSON
    """
    if not os.path.isfile(path):
        raise ConfigError([(path, "configuration file not found")])
    try:
        with open(path, "r", encoding="utf-8") as f:
            document = json.load(f)
    except json.JSONDecodeError as e:
        raise ConfigError([(f"line {e.lineno}, column {e.colno}", e.msg)]) from e
    if isinstance(document, dict) and "config" in document and "version" in document:
        logger.info(f"Using the resolved configuration stored in {path}")
        document = document["config"]
    return document


def load_config(path: str) -> RunConfig:
    """
    Load and validate a run configuration

    Raises:
        ConfigError: Listing every invalid or unknown key
    """
    config, issues = validate_document(read_document(path))
    if issues:
        raise ConfigError(issues)
    return config
