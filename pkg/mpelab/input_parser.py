import csv, json, logging
from pathlib import Path
from typing import List, Optional

import numpy as np

from .errors import InvalidInput
from .kernel import build_kernel
from .models import FiniteKernel, RewardFunction, StateSpace
from .utils import get_logger, jsonable, parse_number


def _label(tok: str):
    """Integer labels stay integers; anything else is kept as text."""
    s = tok.strip()
    try:
        return int(s)
    except ValueError:
        return s


def parse_labels_file(path: str, logger: Optional[logging.Logger] = None) -> List:
    """
    One state label per line, in matrix order.
    Ignores blank lines and lines starting with '#'. Duplicates are an error.
    """
    logger = get_logger(logger)
    out = []
    seen = set()
    for i, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        lab = _label(line)
        if lab in seen:
            raise InvalidInput(f"{path}: line {i} repeats state {lab!r}")
        seen.add(lab)
        out.append(lab)
    logger.debug(f"Read {len(out)} label(s) from {path}")
    return out


def _read_csv_matrix(path: str, logger) -> np.ndarray:
    rows = []
    with Path(path).open(newline="", encoding="utf-8") as f:
        for i, raw in enumerate(csv.reader(f), 1):
            cells = [c for c in raw if c.strip()]
            if not cells or cells[0].lstrip().startswith("#"):
                continue
            try:
                rows.append([parse_number(c) for c in cells])
            except InvalidInput:
                logger.warning(f"Line {i} is not numeric — skipping: {','.join(raw)!r}")
    widths = {len(r) for r in rows}
    if len(widths) != 1:
        raise InvalidInput(f"{path}: rows have differing lengths {sorted(widths)}")
    return np.array(rows, dtype=float)


def _space_from_json(doc: dict, n: int, path: str) -> StateSpace:
    labels = doc.get("states") or list(range(1, n + 1))
    if not isinstance(labels, list):
        raise InvalidInput(f"{path}: 'states' must be a list, got {type(labels).__name__}")
    if len(labels) != n:
        raise InvalidInput(f"{path}: {len(labels)} state label(s) for a {n}-row matrix")
    metric = doc.get("metric", "abs-diff")
    if metric == "explicit":
        mm = doc.get("metric_matrix")
        if mm is None:
            raise InvalidInput(f"{path}: metric 'explicit' needs 'metric_matrix'")
        return StateSpace(tuple(labels), np.array([[parse_number(v) for v in r] for r in mm], dtype=float))
    if metric != "abs-diff":
        raise InvalidInput(f"{path}: unknown metric {metric!r} (abs-diff | explicit)")
    return StateSpace(tuple(labels))


def parse_kernel_file(path: str, labels_path: Optional[str] = None,
                      logger: Optional[logging.Logger] = None) -> FiniteKernel:
    """
    JSON: {"states": [...], "matrix": [[...]], "metric": "abs-diff"|"explicit", "metric_matrix": [[...]]}
    CSV:  one matrix row per line, labels from an optional sidecar file (default 1..N).
    Entries may be written as 'ln(x)'.
    """
    logger = get_logger(logger)
    p = Path(path)
    if p.suffix.lower() == ".csv":
        mat = _read_csv_matrix(path, logger)
        labels = parse_labels_file(labels_path, logger) if labels_path else list(range(1, mat.shape[0] + 1))
        if len(labels) != mat.shape[0]:
            raise InvalidInput(f"{labels_path}: {len(labels)} label(s) for a {mat.shape[0]}-row matrix")
        space = StateSpace(tuple(labels))
    else:
        try:
            doc = json.loads(p.read_text(encoding="utf-8"))
        except json.JSONDecodeError as e:
            raise InvalidInput(f"{path}: not valid JSON ({e})") from None
        if not isinstance(doc, dict) or "matrix" not in doc:
            raise InvalidInput(f"{path}: expected an object with a 'matrix' field")
        try:
            mat = np.array([[parse_number(v) for v in r] for r in doc["matrix"]], dtype=float)
        except (TypeError, ValueError):
            raise InvalidInput(f"{path}: matrix rows must be lists of numbers") from None
        space = _space_from_json(doc, mat.shape[0], path)
    logger.info(f"Loaded {len(space)}-state kernel from {path}")
    return build_kernel(space, mat, logger)


def parse_reward_file(path: str, space: StateSpace, logger: Optional[logging.Logger] = None) -> RewardFunction:
    """{"values": [...]} in state order, or {"values": {label: value, ...}}."""
    logger = get_logger(logger)
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise InvalidInput(f"{path}: not valid JSON ({e})") from None
    vals = doc.get("values") if isinstance(doc, dict) else doc
    if isinstance(vals, dict):
        out = np.zeros(len(space))
        for lab, v in vals.items():
            out[space.index(_label(str(lab)))] = parse_number(v)
        missing = len(space) - len(vals)
        if missing > 0:
            logger.warning(f"{path}: {missing} state(s) without a value — set to 0")
        return RewardFunction(out)
    if not isinstance(vals, list) or len(vals) != len(space):
        raise InvalidInput(f"{path}: expected {len(space)} reward values")
    return RewardFunction([parse_number(v) for v in vals])


def dump_kernel(K: FiniteKernel, path: Path) -> Path:
    doc = {"states": jsonable(list(K.space.labels)), "matrix": jsonable(K.matrix)}
    if K.space.metric is not None:
        doc["metric"] = "explicit"
        doc["metric_matrix"] = jsonable(K.space.metric)
    else:
        doc["metric"] = "abs-diff"
    path.write_text(json.dumps(doc, indent=2), encoding="utf-8")
    return path


def dump_reward(g: RewardFunction, path: Path) -> Path:
    path.write_text(json.dumps({"values": jsonable(g.values)}, indent=2), encoding="utf-8")
    return path
