"""CSV ingestion, model persistence and density export."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .core import ArmModel, Dataset, DDRError, DdrModel, EvaluationGrid, Hyperparameters

SCHEMA = "ddr_model_v1"


def _parse(cell: str, row: int, col: str) -> float:
    try:
        value = float(cell)
    except ValueError:
        raise DDRError("parse error", f"row {row}, column {col!r}: not a number: {cell!r}") from None
    if not math.isfinite(value):
        raise DDRError("parse error", f"row {row}, column {col!r}: non-finite value {cell!r}")
    return value


def read_table(path):
    """Header and rows of a UTF-8 comma-separated file."""
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise DDRError("io error", f"cannot read {path}: {exc.strerror}") from None
    if not rows:
        raise DDRError("parse error", f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    body = [r for r in rows[1:] if r and any(c.strip() for c in r)]
    for i, r in enumerate(body, start=2):
        if len(r) != len(header):
            raise DDRError("parse error", f"row {i}: expected {len(header)} fields, found {len(r)}")
    return header, body


def _columns(header, names, path):
    missing = [n for n in names if n not in header]
    if missing:
        raise DDRError("missing column", f"{path}: missing column(s) {', '.join(missing)}")
    return [header.index(n) for n in names]


def load_csv(path, outcome: str, treatment: str | None = None, covariates=None) -> Dataset:
    """Read a dataset; covariates default to every column not otherwise selected.

    Rows are numbered as in the file, the header being row 1.
    """
    header, body = read_table(path)
    if covariates is None:
        covariates = [h for h in header if h not in (outcome, treatment)]
    covariates = list(covariates)
    if not covariates:
        raise DDRError("missing column", "no covariate columns selected")
    (iy,) = _columns(header, [outcome], path)
    ix = _columns(header, covariates, path)
    it = _columns(header, [treatment], path)[0] if treatment is not None else None
    if len(body) < 2:
        raise DDRError("too few rows", f"{path}: need at least 2 data rows")
    X = np.empty((len(body), len(ix)))
    y = np.empty(len(body))
    for r, row in enumerate(body):
        for c, j in enumerate(ix):
            X[r, c] = _parse(row[j], r + 2, header[j])
        y[r] = _parse(row[iy], r + 2, outcome)
    t = np.array([row[it].strip() for row in body]) if it is not None else None
    return Dataset(X, y, t, tuple(covariates))


def load_outcome(path, outcome: str, treatment: str | None = None):
    """Outcome vector and optional label array, ignoring all other columns."""
    header, body = read_table(path)
    (iy,) = _columns(header, [outcome], path)
    it = _columns(header, [treatment], path)[0] if treatment is not None else None
    if len(body) < 2:
        raise DDRError("too few rows", f"{path}: need at least 2 data rows")
    y = np.array([_parse(row[iy], r + 2, outcome) for r, row in enumerate(body)])
    t = np.array([row[it].strip() for row in body]) if it is not None else None
    return y, t


def load_queries(path, covariate_names=None) -> np.ndarray:
    """Query covariates; columns are matched by name when names are known."""
    header, body = read_table(path)
    names = list(covariate_names) if covariate_names else header
    idx = _columns(header, names, path)
    return np.array([[_parse(row[j], r + 2, header[j]) for j in idx] for r, row in enumerate(body)])


def write_csv(dataset: Dataset, path, outcome: str = "y", treatment: str = "t"):
    names = dataset.covariate_names or tuple(f"x{j + 1}" for j in range(dataset.p))
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([*names, *([treatment] if dataset.treatment is not None else []), outcome])
        for i in range(dataset.n):
            cells = [repr(float(v)) for v in dataset.X[i]]
            if dataset.treatment is not None:
                cells.append(str(dataset.treatment[i]))
            w.writerow([*cells, repr(float(dataset.y[i]))])


# ---------------------------------------------------------------------------
# models


def model_to_dict(model: DdrModel) -> dict:
    arms = {}
    for label, a in model.arms.items():
        arms[label] = {
            "hyperparameters": {
                "h": a.hyper.h,
                "ridge": a.hyper.ridge,
                "sigma_multiplier": a.hyper.sigma_multiplier,
                "eta": a.hyper.eta,
            },
            "bandwidth": a.bandwidth,
            "location": a.location,
            "scale": a.scale,
            "grid": a.grid.points.tolist(),
            "X": a.X.tolist(),
            "coef": a.coef.tolist(),
        }
    return {
        "schema": SCHEMA,
        "covariate_names": list(model.covariate_names) if model.covariate_names else None,
        "arms": arms,
    }


def model_from_dict(obj) -> DdrModel:
    if not isinstance(obj, dict) or obj.get("schema") != SCHEMA:
        found = obj.get("schema") if isinstance(obj, dict) else None
        raise DDRError("schema error", f"expected schema {SCHEMA!r}, found {found!r}")
    try:
        arms = {}
        for label, a in obj["arms"].items():
            hp = a["hyperparameters"]
            arms[str(label)] = ArmModel(
                X=np.asarray(a["X"], dtype=float).reshape(len(a["X"]), -1),
                coef=np.asarray(a["coef"], dtype=float),
                hyper=Hyperparameters(hp["h"], hp["ridge"], hp["sigma_multiplier"], hp["eta"]),
                bandwidth=float(a["bandwidth"]),
                location=float(a["location"]),
                scale=float(a["scale"]),
                grid=EvaluationGrid(np.asarray(a["grid"], dtype=float)),
            )
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, DDRError):
            raise
        raise DDRError("integrity", f"malformed model file: {exc}") from None
    names = obj.get("covariate_names")
    return DdrModel(arms=arms, covariate_names=tuple(names) if names else None)


def save_model(model: DdrModel, path):
    # json writes floats with repr, which round-trips doubles exactly
    Path(path).write_text(json.dumps(model_to_dict(model)) + "\n", encoding="utf-8")


def load_model(path) -> DdrModel:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise DDRError("io error", f"cannot read {path}: {exc.strerror}") from None
    try:
        obj = json.loads(text)
    except json.JSONDecodeError:
        raise DDRError("schema error", f"{path}: not a {SCHEMA} file (invalid or truncated JSON)") from None
    return model_from_dict(obj)


# ---------------------------------------------------------------------------
# densities


def emit_densities(estimates, path, fmt: str = "json", queries=None):
    """Write densities sharing one grid as JSON or long-format CSV."""
    if not estimates:
        raise DDRError("nothing to write", "no density estimates")
    grid = estimates[0].grid.points
    if queries is None:
        queries = [[] for _ in estimates]
    try:
        if fmt == "json":
            doc = {
                "grid": grid.tolist(),
                "queries": [
                    {"x": np.asarray(x, dtype=float).tolist(), "density": e.values.tolist()}
                    for x, e in zip(queries, estimates)
                ],
            }
            Path(path).write_text(json.dumps(doc) + "\n", encoding="utf-8")
        elif fmt == "csv":
            with open(path, "w", newline="", encoding="utf-8") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(["query_index", "z", "density"])
                for q, e in enumerate(estimates):
                    for z, v in zip(e.grid.points, e.values):
                        w.writerow([q, format(z, ".17g"), format(v, ".17g")])
        else:
            raise DDRError("invalid format", f"unknown format {fmt!r}")
    except OSError as exc:
        raise DDRError("io error", f"cannot write {path}: {exc.strerror}") from None
