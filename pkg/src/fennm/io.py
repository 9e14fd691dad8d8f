"""CSV/JSON writers shared by the harness and the baselines."""
from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

SOLUTION_COLUMNS = ("x", "u_nn", "oracle", "pwe")
HISTORY_COLUMNS = ("iter", "loss_r", "loss_b", "tau_r", "tau_b", "total")


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def write_table(path, columns, rows) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def read_table(path) -> dict[str, np.ndarray]:
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    head, body = rows[0], rows[1:]
    data = np.array(body, dtype=float).reshape(len(body), len(head))
    return {h: data[:, i] for i, h in enumerate(head)}


def write_solution_csv(path, x, u, oracle) -> None:
    """Columns x, u_nn, oracle, pwe with pwe = |u - oracle|."""
    x, u, oracle = (np.asarray(a, dtype=float) for a in (x, u, oracle))
    if not x.shape == u.shape == oracle.shape:
        raise ValueError("solution columns must have equal length")
    write_table(path, SOLUTION_COLUMNS, zip(x, u, oracle, np.abs(u - oracle)))


def write_history_csv(path, history) -> None:
    write_table(path, HISTORY_COLUMNS,
                ([r[c] for c in HISTORY_COLUMNS] for r in history))


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return _jsonable(v.tolist())
    if isinstance(v, np.generic):
        return v.item()
    if isinstance(v, float) and not np.isfinite(v):
        return str(v)
    return v


def write_json(path, obj) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_jsonable(obj), indent=2) + "\n")
