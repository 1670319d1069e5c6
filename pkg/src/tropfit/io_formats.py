"""Parsers and serializers for the on-disk formats.

Matrix/vector CSV dialect: one row per line, comma-separated cells,
literal tokens ``-inf`` / ``inf`` (any casing on read, lowercase on
write) for the extended values, optional first-line header ``# m n``.
Finite cells are written with shortest round-trip precision, so
serialize(parse(text)) is value-identical.  Dataset CSV holds n feature
columns plus one target column.  Models and solve reports are JSON with
infinities encoded as the same tokens.

Malformed input raises ParseError with the offending position; no other
exception type escapes a parser.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np

from .regression import Dataset, PwlModel
from .solver import SparseSolution

__all__ = [
    "ParseError",
    "ParsedDocument",
    "parse_matrix",
    "parse_vector",
    "parse_dataset",
    "parse_model",
    "parse_report",
    "parse_document",
    "write_matrix",
    "write_vector",
    "write_dataset",
    "write_model",
    "write_report",
    "write_plot_data",
    "load_matrix",
    "load_vector",
    "load_dataset",
    "load_model",
    "save_text",
]


class ParseError(ValueError):
    """Malformed document; carries the 1-based row/column when known."""

    def __init__(self, message: str, row: int | None = None, col: int | None = None):
        self.row = row
        self.col = col
        if row is not None:
            where = f" at row {row}" + (f" col {col}" if col is not None else "")
            message = message + where
        super().__init__(message)


@dataclass(frozen=True)
class ParsedDocument:
    kind: str
    payload: Any


_NEG_TOKENS = {"-inf"}
_POS_TOKENS = {"inf", "+inf"}


def _parse_cell(token: str, row: int, col: int) -> float:
    t = token.strip()
    low = t.lower()
    if low in _NEG_TOKENS:
        return -math.inf
    if low in _POS_TOKENS:
        return math.inf
    try:
        v = float(t)
    except ValueError:
        raise ParseError(f"cannot parse cell {t!r}", row, col) from None
    if math.isnan(v) or math.isinf(v):
        # rejects 'nan', alternate infinity spellings, and overflowing literals
        raise ParseError(f"cell {t!r} is not a finite number or inf token", row, col)
    return v


def _split_rows(text: str) -> tuple[list[tuple[int, str]], tuple[int, int] | None]:
    """Non-empty (lineno, line) pairs plus the `# m n` header shape, if any."""
    lines = [(i + 1, ln) for i, ln in enumerate(text.splitlines()) if ln.strip()]
    if not lines:
        raise ParseError("empty document")
    declared = None
    if lines[0][1].lstrip().startswith("#"):
        lineno, header = lines[0]
        parts = header.lstrip()[1:].split()
        try:
            declared = (int(parts[0]), int(parts[1]))
            if len(parts) != 2:
                raise ValueError
        except (ValueError, IndexError):
            raise ParseError("header must be '# m n'", lineno) from None
        lines = lines[1:]
        if not lines:
            raise ParseError("document has a header but no rows")
    return lines, declared


def parse_matrix(text: str) -> np.ndarray:
    """Matrix from the CSV dialect; rows must be rectangular."""
    lines, declared = _split_rows(text)
    rows = []
    width = None
    for lineno, line in lines:
        cells = line.split(",")
        if width is None:
            width = len(cells)
        elif len(cells) != width:
            raise ParseError(f"expected {width} cells, found {len(cells)}", lineno)
        rows.append([_parse_cell(c, lineno, j + 1) for j, c in enumerate(cells)])
    mat = np.array(rows, dtype=np.float64)
    if declared is not None and declared != mat.shape:
        raise ParseError(f"header declares {declared[0]}x{declared[1]} but data is {mat.shape[0]}x{mat.shape[1]}")
    return mat


def parse_vector(text: str) -> np.ndarray:
    """Vector: one value per line, or a single comma-separated line."""
    mat = parse_matrix(text)
    if mat.shape[1] == 1:
        return mat[:, 0].copy()
    if mat.shape[0] == 1:
        return mat[0].copy()
    raise ParseError(f"expected a vector, got a {mat.shape[0]}x{mat.shape[1]} matrix")


def parse_dataset(text: str) -> Dataset:
    """Dataset CSV: n feature columns then one target column, all finite.

    Leading '#' lines are comments.  A first data line that does not parse
    as numbers is taken as a column header and skipped.
    """
    lines = [(i + 1, ln) for i, ln in enumerate(text.splitlines()) if ln.strip()]
    while lines and lines[0][1].lstrip().startswith("#"):
        lines = lines[1:]
    if not lines:
        raise ParseError("empty document")
    first_cells = lines[0][1].split(",")
    try:
        [_parse_cell(c, lines[0][0], j + 1) for j, c in enumerate(first_cells)]
    except ParseError:
        lines = lines[1:]
        if not lines:
            raise ParseError("dataset has a header but no rows") from None
    rows = []
    width = None
    for lineno, line in lines:
        cells = line.split(",")
        if width is None:
            width = len(cells)
            if width < 2:
                raise ParseError("dataset needs at least one feature column and a target", lineno)
        elif len(cells) != width:
            raise ParseError(f"expected {width} cells, found {len(cells)}", lineno)
        vals = [_parse_cell(c, lineno, j + 1) for j, c in enumerate(cells)]
        for j, v in enumerate(vals):
            if math.isinf(v):
                raise ParseError("dataset values must be finite", lineno, j + 1)
        rows.append(vals)
    arr = np.array(rows, dtype=np.float64)
    return Dataset(arr[:, :-1], arr[:, -1])


def _fmt(v: float) -> str:
    v = float(v)
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return repr(v)


def write_matrix(mat, header: bool = False) -> str:
    mat = np.asarray(mat, dtype=np.float64)
    out = []
    if header:
        out.append(f"# {mat.shape[0]} {mat.shape[1]}")
    out.extend(",".join(_fmt(v) for v in row) for row in mat)
    return "\n".join(out) + "\n"


def write_vector(vec) -> str:
    vec = np.asarray(vec, dtype=np.float64)
    return "\n".join(_fmt(v) for v in vec) + "\n"


def write_dataset(data: Dataset, comment: str | None = None) -> str:
    rows = np.column_stack([data.x, data.f])
    head = f"# {comment}\n" if comment else ""
    return head + "\n".join(",".join(_fmt(v) for v in row) for row in rows) + "\n"


def _num_out(v) -> Any:
    if v is None:
        return None
    v = float(v)
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return v


def _num_in(v, key: str, allow_none: bool = False) -> float | None:
    if v is None and allow_none:
        return None
    if isinstance(v, str):
        low = v.strip().lower()
        if low in _NEG_TOKENS:
            return -math.inf
        if low in _POS_TOKENS:
            return math.inf
        raise ParseError(f"key {key!r}: bad numeric token {v!r}")
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ParseError(f"key {key!r}: expected a number, got {type(v).__name__}")
    return float(v)


def write_model(model: PwlModel) -> str:
    doc = {
        "dim": model.dim,
        "slopes": [[float(v) for v in row] for row in model.slopes],
        "intercepts": [_num_out(v) for v in model.intercepts],
        "p": _num_out(model.p),
        "theta": _num_out(model.theta),
        "estimator": model.estimator,
        "seed": model.seed,
        "errors": {"rms": _num_out(model.rms), "max_abs": _num_out(model.max_abs)},
        "support": model.support_size,
    }
    return json.dumps(doc, indent=2, allow_nan=False) + "\n"


_MODEL_KEYS = ("dim", "slopes", "intercepts", "p", "theta", "estimator", "seed", "errors", "support")


def parse_model(text: str) -> PwlModel:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ParseError("model document must be a JSON object")
    for key in _MODEL_KEYS:
        if key not in doc:
            raise ParseError(f"model document missing required key {key!r}")
    try:
        slopes = np.array(doc["slopes"], dtype=np.float64)
        intercepts = np.array([_num_in(v, "intercepts") for v in doc["intercepts"]])
    except (TypeError, ValueError) as exc:
        raise ParseError(f"bad slopes/intercepts: {exc}") from None
    errors = doc["errors"]
    if not isinstance(errors, dict) or "rms" not in errors or "max_abs" not in errors:
        raise ParseError("model 'errors' must hold rms and max_abs")
    estimator = doc["estimator"]
    if estimator not in ("sgle", "smmae"):
        raise ParseError(f"unknown estimator {estimator!r}")
    seed = doc["seed"]
    if seed is not None and (isinstance(seed, bool) or not isinstance(seed, int)):
        raise ParseError("seed must be an integer or null")
    declared_support = doc["support"]
    if isinstance(declared_support, bool) or not isinstance(declared_support, int):
        raise ParseError("support must be an integer")
    try:
        model = PwlModel(
            slopes=slopes,
            intercepts=intercepts,
            p=_num_in(doc["p"], "p"),
            theta=_num_in(doc["theta"], "theta"),
            estimator=estimator,
            seed=seed,
            rms=_num_in(errors["rms"], "rms", allow_none=True),
            max_abs=_num_in(errors["max_abs"], "max_abs", allow_none=True),
        )
    except ValueError as exc:
        raise ParseError(str(exc)) from None
    if declared_support != model.support_size:
        raise ParseError(
            f"declared support {declared_support} != {model.support_size} finite intercepts"
        )
    return model


def write_report(
    solution: SparseSolution | None,
    config: dict | None = None,
    infeasible: bool = False,
) -> str:
    """Solve report JSON: support, errors, certificate, iteration count."""
    if solution is None:
        doc = {
            "support": [],
            "error_p": None,
            "error_inf": None,
            "ratio_bound": None,
            "iterations": 0,
            "infeasible": True,
        }
    else:
        doc = {
            "support": [int(j) for j in solution.support],
            "error_p": _num_out(solution.error_p),
            "error_inf": _num_out(solution.error_inf),
            "ratio_bound": _num_out(solution.ratio_bound),
            "iterations": solution.iterations,
            "infeasible": bool(infeasible),
        }
    if config is not None:
        doc["config"] = config
    return json.dumps(doc, indent=2, allow_nan=False) + "\n"


def parse_report(text: str) -> dict:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ParseError("report must be a JSON object")
    for key in ("support", "error_p", "error_inf", "ratio_bound", "iterations", "infeasible"):
        if key not in doc:
            raise ParseError(f"report missing required key {key!r}")
    doc = dict(doc)
    for key in ("error_p", "error_inf", "ratio_bound"):
        doc[key] = _num_in(doc[key], key, allow_none=True)
    return doc


def write_plot_data(data: Dataset, predicted, comment: str | None = None) -> str:
    """Per-point CSV (x columns, target, model value) for external plotting."""
    predicted = np.asarray(predicted, dtype=np.float64)
    rows = np.column_stack([data.x, data.f, predicted])
    head = f"# {comment}\n" if comment else ""
    return head + "\n".join(",".join(_fmt(v) for v in row) for row in rows) + "\n"


_PARSERS = {
    "matrix": parse_matrix,
    "vector": parse_vector,
    "dataset": parse_dataset,
    "model": parse_model,
    "report": parse_report,
}


def parse_document(text: str, kind: str) -> ParsedDocument:
    if kind not in _PARSERS:
        raise ValueError(f"unknown document kind {kind!r}")
    return ParsedDocument(kind, _PARSERS[kind](text))


def load_matrix(path) -> np.ndarray:
    return parse_matrix(Path(path).read_text())


def load_vector(path) -> np.ndarray:
    return parse_vector(Path(path).read_text())


def load_dataset(path) -> Dataset:
    return parse_dataset(Path(path).read_text())


def load_model(path) -> PwlModel:
    return parse_model(Path(path).read_text())


def save_text(path, text: str) -> None:
    Path(path).write_text(text)
