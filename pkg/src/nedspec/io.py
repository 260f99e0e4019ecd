"""Run configuration, certificate files and report emission.

Configuration and certificate files are JSON documents.  A run config::

    {
      "system": {"kind": "builtin", "name": "paper_2d", "params": [1.0, 0.1]},
      "window": [-30, 30],
      "gamma_bracket": [0.1, 10.0],          optional
      "bisect_tol": 1e-3,                     optional
      "alpha_grid": [...], "eps_grid": [...], optional
      "horizon": 30,                          optional
      "nonuniform_exponent": "absolute",      optional
      "cap": 1e12,                            optional
      "output_dir": "out",                    optional
      "report_format": "json",                optional, "json" or "csv"
      "certificate": "cert.json" or {...},    optional, used by verify
      "gamma": 1.0, "fiber": 0                optional, used by bundles
    }

A table system is ``{"kind": "table", "dimension": N, "k_min": k0,
"matrices": [...]}`` where each matrix is either nested rows or a flat
row-major list of ``N*N`` numbers.  A certificate file is::

    {
      "projector": {"matrix": [[1, 0], [0, 0]], "reference_index": 0}
                   or {"spectral_rank": 1},
      "K": 2.46, "alpha": 0.41, "epsilon": 1.22,
      "flavor": "NED", "nonuniform_exponent": "absolute"
    }

where ``log_K``, ``log_alpha`` and ``log_epsilon`` may replace the plain
constants.
"""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Any

import numpy as np

from .dichotomy import DichotomyCertificate, FitConfig, propagate_projector, spectral_projector
from .errors import NedError, ParseError
from .system import BUILTIN_NAMES, MatrixSequence, Window, builtin_example

__all__ = [
    "RunConfig",
    "load_config",
    "parse_config",
    "parse_system",
    "load_certificate",
    "parse_certificate",
    "write_json",
    "write_csv",
    "to_jsonable",
]

REPORT_FORMATS = ("json", "csv")


@dataclass
class RunConfig:
    """Validated run configuration."""

    system: MatrixSequence
    system_spec: dict
    window: Window
    fit: FitConfig
    gamma_bracket: tuple[float, float] | None = None
    bisect_tol: float = 1e-3
    output_dir: str = "."
    report_format: str = "json"
    certificate: Any = None
    gamma: float | None = None
    fiber: int | None = None
    raw: dict = field(default_factory=dict, repr=False)

    def echo(self) -> dict:
        """Configuration as it was read, for report provenance."""
        return self.raw


def _read_json(path: str) -> Any:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path} is not valid JSON: {exc}") from exc


def _require(d: dict, key: str, where: str):
    if key not in d:
        raise ParseError(f"{where}: missing field {key!r}")
    return d[key]


def _number(x, what: str) -> float:
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise ParseError(f"{what} must be a number, got {x!r}")
    x = float(x)
    if not math.isfinite(x):
        raise ParseError(f"{what} must be finite")
    return x


def _integer(x, what: str) -> int:
    if isinstance(x, bool) or not isinstance(x, int):
        raise ParseError(f"{what} must be an integer, got {x!r}")
    return int(x)


def _numbers(xs, what: str) -> list[float]:
    if not isinstance(xs, list):
        raise ParseError(f"{what} must be a list")
    return [_number(x, f"{what} entry") for x in xs]


def parse_system(spec: dict) -> MatrixSequence:
    """Build a system from its description.

    Raises
    ------
    ParseError
    """
    if not isinstance(spec, dict):
        raise ParseError("system must be an object")
    kind = _require(spec, "kind", "system")
    try:
        if kind == "builtin":
            name = _require(spec, "name", "system")
            if name not in BUILTIN_NAMES:
                raise ParseError(f"unknown builtin {name!r}; choose from {list(BUILTIN_NAMES)}")
            params = _numbers(spec.get("params", []), "system.params")
            sys = builtin_example(name, params)
        elif kind == "table":
            N = _integer(_require(spec, "dimension", "system"), "system.dimension")
            if N < 1:
                raise ParseError("system.dimension must be positive")
            k_min = _integer(spec.get("k_min", 0), "system.k_min")
            mats = _require(spec, "matrices", "system")
            if not isinstance(mats, list) or not mats:
                raise ParseError("system.matrices must be a nonempty list")
            try:
                arr = np.asarray(mats, dtype=float)
            except (TypeError, ValueError) as exc:
                raise ParseError(f"system.matrices is not numeric: {exc}") from exc
            if arr.ndim == 2 and arr.shape[1] == N * N:
                arr = arr.reshape(-1, N, N)
            if arr.ndim != 3 or arr.shape[1:] != (N, N):
                raise ParseError(f"system.matrices must hold {N}x{N} matrices")
            if not np.all(np.isfinite(arr)):
                raise ParseError("system.matrices has non-finite entries")
            sys = MatrixSequence.from_table(arr, k_min=k_min)
        else:
            raise ParseError(f"system.kind must be 'builtin' or 'table', got {kind!r}")
    except ParseError:
        raise
    except (NedError, ValueError) as exc:
        raise ParseError(f"invalid system: {exc}") from exc
    if "dimension" in spec and spec["dimension"] != sys.dimension:
        raise ParseError(f"system.dimension {spec['dimension']} does not match N={sys.dimension}")
    return sys


def parse_config(raw: dict, base_dir: str = ".") -> RunConfig:
    """Validate a decoded configuration document.

    Raises
    ------
    ParseError
    """
    if not isinstance(raw, dict):
        raise ParseError("configuration must be a JSON object")
    sys = parse_system(_require(raw, "system", "config"))
    win = _require(raw, "window", "config")
    if not (isinstance(win, list) and len(win) == 2):
        raise ParseError("window must be a pair [k_min, k_max]")
    lo, hi = (_integer(x, "window bound") for x in win)
    if lo > hi:
        raise ParseError(f"window [{lo}, {hi}] is empty")
    window = Window(lo, hi)
    bracket = raw.get("gamma_bracket")
    if bracket is not None:
        b = _numbers(bracket, "gamma_bracket")
        if len(b) != 2 or not 0 < b[0] < b[1]:
            raise ParseError("gamma_bracket must be [lo, hi] with 0 < lo < hi")
        bracket = (b[0], b[1])
    bisect_tol = _number(raw.get("bisect_tol", 1e-3), "bisect_tol")
    if bisect_tol <= 0:
        raise ParseError("bisect_tol must be positive")
    grids = {}
    for key in ("alpha_grid", "eps_grid"):
        if raw.get(key) is not None:
            g = _numbers(raw[key], key)
            if not g:
                raise ParseError(f"{key} is empty")
            grids[key] = g
    if any(not 0 < a < 1 for a in grids.get("alpha_grid", [])):
        raise ParseError("alpha_grid values must lie in (0, 1)")
    if any(e < 1 for e in grids.get("eps_grid", [])):
        raise ParseError("eps_grid values must be >= 1")
    horizon = raw.get("horizon")
    if horizon is not None:
        horizon = _integer(horizon, "horizon")
    try:
        fit = FitConfig(
            alpha_grid=grids.get("alpha_grid"),
            eps_grid=grids.get("eps_grid"),
            cap=_number(raw.get("cap", 1e12), "cap"),
            saturation_tol=_number(raw.get("saturation_tol", 1e-9), "saturation_tol"),
            exponent=raw.get("nonuniform_exponent", "absolute"),
            horizon=horizon,
        )
    except ValueError as exc:
        raise ParseError(str(exc)) from exc
    fmt = raw.get("report_format", "json")
    if fmt not in REPORT_FORMATS:
        raise ParseError(f"report_format must be one of {REPORT_FORMATS}")
    out = raw.get("output_dir", ".")
    if not isinstance(out, str):
        raise ParseError("output_dir must be a string")
    cert = raw.get("certificate")
    if isinstance(cert, str) and not os.path.isabs(cert):
        cert = os.path.join(base_dir, cert)
    gamma = raw.get("gamma")
    if gamma is not None:
        gamma = _number(gamma, "gamma")
    fiber = raw.get("fiber")
    if fiber is not None:
        fiber = _integer(fiber, "fiber")
    return RunConfig(sys, raw["system"], window, fit, bracket, bisect_tol, out, fmt, cert, gamma, fiber, raw)


def load_config(path: str) -> RunConfig:
    """Read and validate a JSON run configuration."""
    return parse_config(_read_json(path), os.path.dirname(os.path.abspath(path)))


def parse_certificate(doc: dict, sys: MatrixSequence, window: Window, fit: FitConfig | None = None) -> DichotomyCertificate:
    """Build a certificate, with its projector sequence over ``window``.

    Raises
    ------
    ParseError
    """
    if not isinstance(doc, dict):
        raise ParseError("certificate must be an object")
    fit = fit or FitConfig()
    pj = _require(doc, "projector", "certificate")
    if not isinstance(pj, dict):
        raise ParseError("certificate.projector must be an object")

    def const(name: str) -> float:
        if f"log_{name}" in doc:
            return math.exp(_number(doc[f"log_{name}"], f"log_{name}"))
        return _number(_require(doc, name, "certificate"), name)

    try:
        if "spectral_rank" in pj:
            proj = spectral_projector(sys, _integer(pj["spectral_rank"], "spectral_rank"), window,
                                      fit.horizon_for(window))
        else:
            P = _require(pj, "matrix", "certificate.projector")
            l_ref = _integer(pj.get("reference_index", window.midpoint), "reference_index")
            proj = propagate_projector(sys, np.asarray(P, dtype=float), l_ref, window)
        return DichotomyCertificate(
            proj,
            K=const("K"),
            alpha=const("alpha"),
            epsilon=const("epsilon"),
            flavor=doc.get("flavor", "NED"),
            exponent=doc.get("nonuniform_exponent", fit.exponent),
        )
    except ParseError:
        raise
    except (NedError, ValueError, TypeError) as exc:
        raise ParseError(f"invalid certificate: {exc}") from exc


def load_certificate(source, sys: MatrixSequence, window: Window, fit: FitConfig | None = None) -> DichotomyCertificate:
    """Certificate from a path or an already decoded object."""
    doc = _read_json(source) if isinstance(source, str) else source
    return parse_certificate(doc, sys, window, fit)


def to_jsonable(obj):
    """Recursively convert numpy values and non-finite floats for JSON."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else None
    return obj


def write_json(path: str, payload: dict, timestamp: bool = True) -> str:
    """Write a report with sorted keys; ``generated_at`` is the only varying field."""
    body = to_jsonable(payload)
    if timestamp:
        body["generated_at"] = datetime.now(timezone.utc).isoformat(timespec="seconds")
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(body, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def write_csv(path: str, header: list[str], rows) -> str:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(header)
        for row in rows:
            wr.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in row])
    return path
