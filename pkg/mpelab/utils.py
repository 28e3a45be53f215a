import hashlib, json, logging, math, os, re
from dataclasses import fields, is_dataclass
from enum import Enum
from typing import Optional

import numpy as np

from .errors import InvalidInput

LOGGER_NAME = "mpelab"
THREADS_ENV = "MPELAB_THREADS"

def setup_logger(verbose: bool=False, debug: bool=False) -> logging.Logger:
    level = logging.WARNING
    if verbose: level = logging.INFO
    if debug:   level = logging.DEBUG
    logging.basicConfig(
        level=level,
        format="%(asctime)s | %(levelname)-7s | %(message)s",
        datefmt="%H:%M:%S"
    )
    logger = logging.getLogger(LOGGER_NAME)
    logger.setLevel(level)
    return logger

def get_logger(logger: Optional[logging.Logger] = None) -> logging.Logger:
    return logger if logger is not None else logging.getLogger(LOGGER_NAME)

# ---------- Parallelism cap ----------
def thread_count(default: Optional[int] = None) -> int:
    fallback = default or min(8, os.cpu_count() or 1)
    raw = os.environ.get(THREADS_ENV, "").strip()
    if not raw:
        return fallback
    try:
        n = int(raw)
    except ValueError:
        logging.getLogger(LOGGER_NAME).warning(f"{THREADS_ENV}={raw!r} is not an integer — using {fallback}")
        return fallback
    return max(1, n)

# ---------- Number parsing ----------
_LN = re.compile(r"^ln\s*\(?\s*([^()\s]+)\s*\)?$", re.IGNORECASE)

def parse_number(val) -> float:
    """Float from a CLI/file token; accepts 'ln(1.9)', 'ln 2', 'inf' and plain decimals."""
    if isinstance(val, (int, float)) and not isinstance(val, bool):
        return float(val)
    s = str(val).strip().replace("_", "")
    m = _LN.match(s)
    try:
        if m:
            return math.log(float(m.group(1)))
        return float(s)
    except ValueError:
        raise InvalidInput(f"Not a number: {val!r}") from None

def parse_number_list(val: str) -> list:
    s = str(val).strip().strip("()[]")
    return [parse_number(tok) for tok in s.split(",") if tok.strip()]

# ---------- JSON helpers ----------
def json_float(x):
    x = float(x)
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    if math.isnan(x):
        return "nan"
    return x

def jsonable(obj):
    """Recursive conversion of dataclasses / numpy / enums into JSON-ready values."""
    if isinstance(obj, Enum):
        return obj.value
    if is_dataclass(obj) and not isinstance(obj, type):
        if hasattr(obj, "to_dict"):
            return obj.to_dict()
        return {f.name: jsonable(getattr(obj, f.name)) for f in fields(obj)}
    if isinstance(obj, np.ndarray):
        return [jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return json_float(obj)
    if isinstance(obj, dict):
        return {str(jsonable(k)) if not isinstance(k, str) else k: jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (frozenset, set)):
        return sorted(jsonable(v) for v in obj)
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    return obj

def inputs_digest(*parts) -> str:
    payload = json.dumps([jsonable(p) for p in parts], sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()
