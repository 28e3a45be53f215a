from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from pathlib import Path
from typing import Dict, FrozenSet, List, Optional, Tuple

import numpy as np

from .errors import InvalidInput

ROW_TOL = 1e-12
METRIC_TOL = 1e-12


def frozen_array(values, dtype=float) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    arr.flags.writeable = False
    return arr


def _check_metric(m: np.ndarray, n: int):
    if m.shape != (n, n):
        raise InvalidInput(f"Metric must be {n}x{n}, got {m.shape}")
    if not np.all(np.isfinite(m)) or np.any(m < 0):
        raise InvalidInput("Metric entries must be finite and nonnegative")
    if np.any(np.diag(m) != 0):
        raise InvalidInput("Metric must vanish on the diagonal")
    if not np.allclose(m, m.T, rtol=0, atol=METRIC_TOL):
        raise InvalidInput("Metric must be symmetric")
    # rho(i,j) <= rho(i,k) + rho(k,j), one pivot k at a time
    for k in range(n):
        if np.any(m > m[:, k][:, None] + m[k, :][None, :] + METRIC_TOL):
            raise InvalidInput(f"Metric violates the triangle inequality through state index {k}")


# ---------- State space, kernels, measures ----------

@dataclass(frozen=True, eq=False)
class StateSpace:
    labels: Tuple
    metric: Optional[np.ndarray] = None   # explicit distances; None -> |i-j| on integer labels

    def __post_init__(self):
        labels = tuple(self.labels)
        if not labels:
            raise InvalidInput("State space needs at least one state")
        bad = [lab for lab in labels
               if isinstance(lab, bool) or not isinstance(lab, (str, int, float, np.integer, np.floating))]
        if bad:
            raise InvalidInput(f"State labels must be numbers or strings, got {bad[0]!r}")
        if len(set(labels)) != len(labels):
            raise InvalidInput("State labels must be distinct")
        object.__setattr__(self, "labels", labels)
        if self.metric is not None:
            m = frozen_array(self.metric)
            _check_metric(m, len(labels))
            object.__setattr__(self, "metric", m)

    @classmethod
    def integer(cls, n: int) -> "StateSpace":
        return cls(tuple(range(1, n + 1)))

    def __len__(self) -> int:
        return len(self.labels)

    @cached_property
    def _positions(self) -> Dict:
        return {lab: i for i, lab in enumerate(self.labels)}

    def index(self, label) -> int:
        try:
            return self._positions[label]
        except KeyError:
            raise InvalidInput(f"Unknown state {label!r}") from None

    def indices(self, labels) -> List[int]:
        return [self.index(lab) for lab in labels]

    @property
    def integer_labels(self) -> bool:
        return all(isinstance(lab, (int, np.integer)) and not isinstance(lab, bool) for lab in self.labels)

    def distances(self) -> np.ndarray:
        if self.metric is not None:
            return self.metric
        if not self.integer_labels:
            raise InvalidInput("No explicit metric and labels are not integers")
        lab = np.array(self.labels, dtype=float)
        return np.abs(lab[:, None] - lab[None, :])


@dataclass(frozen=True, eq=False)
class FiniteKernel:
    """Row-stochastic matrix over a StateSpace. Build through kernel.build_kernel."""
    space: StateSpace
    matrix: np.ndarray

    def __post_init__(self):
        mat = frozen_array(self.matrix)
        n = len(self.space)
        if mat.shape != (n, n):
            raise InvalidInput(f"Matrix shape {mat.shape} does not match {n} states")
        object.__setattr__(self, "matrix", mat)

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    def row(self, x: int) -> np.ndarray:
        return self.matrix[x]


@dataclass(frozen=True, eq=False)
class Distribution:
    weights: np.ndarray

    def __post_init__(self):
        w = np.array(self.weights, dtype=float)
        if w.ndim != 1 or not np.all(np.isfinite(w)) or np.any(w < 0):
            raise InvalidInput("Distribution weights must be a finite nonnegative vector")
        total = w.sum()
        if abs(total - 1.0) >= ROW_TOL:
            raise InvalidInput(f"Distribution sums to {total!r}")
        w.flags.writeable = False
        object.__setattr__(self, "weights", w)

    def __len__(self) -> int:
        return len(self.weights)

    @property
    def support(self) -> FrozenSet[int]:
        return frozenset(np.flatnonzero(self.weights > 0).tolist())


@dataclass(frozen=True)
class SignedMeasureDecomposition:
    positive_set: FrozenSet[int]   # state indices with mu1 > mu2
    tv_norm: float


@dataclass(frozen=True)
class CommClass:
    states: Tuple[int, ...]
    recurrent: bool


@dataclass(frozen=True, eq=False)
class RewardFunction:
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim != 1 or not np.all(np.isfinite(v)):
            raise InvalidInput("Reward values must be a finite vector")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    def __len__(self) -> int:
        return len(self.values)


# ---------- Mixing ----------

@dataclass(frozen=True)
class Minorization:
    d: float
    eta: Optional[Distribution]   # absent when d == 0


@dataclass
class MixingReport:
    lambda_n: Dict[int, float] = field(default_factory=dict)
    minorization_n: Dict[int, Minorization] = field(default_factory=dict)
    strong_ratio_n: Dict[int, float] = field(default_factory=dict)

    def to_dict(self) -> Dict:
        from .utils import json_float
        return {
            "lambda": {str(n): json_float(v) for n, v in self.lambda_n.items()},
            "minorization": {
                str(n): {"d": json_float(m.d),
                         "eta": None if m.eta is None else [json_float(x) for x in m.eta.weights]}
                for n, m in self.minorization_n.items()
            },
            "strong_ratio": {str(n): json_float(v) for n, v in self.strong_ratio_n.items()},
        }


@dataclass(frozen=True)
class RelationReport:
    max_violation: float
    n_max: int
    checks: int


# ---------- MPE ----------

class SolveStatus(Enum):
    SOLVED = "Solved"
    DIVERGED = "Diverged"
    INCONCLUSIVE = "Inconclusive"

    @property
    def exit_code(self) -> int:
        return {"Solved": 0, "Diverged": 2, "Inconclusive": 3}[self.value]


@dataclass(frozen=True, eq=False)
class MpeSolution:
    w: np.ndarray
    lam: float
    residual: float
    status: SolveStatus
    trace: Tuple[float, ...]         # span of the iterate after each step
    iterations: int = 0
    method: str = "value_iteration"  # or "newton"
    reason: str = ""

    @property
    def solved(self) -> bool:
        return self.status is SolveStatus.SOLVED


@dataclass(frozen=True, eq=False)
class ApeSolution:
    w0: np.ndarray
    lam0: float
    residual: float


@dataclass(frozen=True)
class ClassRate:
    states: Tuple[int, ...]
    closed: bool
    rate: float   # log spectral radius of diag(e^g)P on the class; -inf for a loopless singleton


@dataclass(frozen=True)
class ExistenceCertificate:
    exists: bool
    lambda_star: float
    class_rates: Tuple[ClassRate, ...]
    reason: str = ""


@dataclass(frozen=True)
class ExistenceVerdict:
    guaranteed: bool
    n: Optional[int] = None

    @property
    def kind(self) -> str:
        return "GuaranteedByBound" if self.guaranteed else "NoGuarantee"


@dataclass(frozen=True)
class ContractionEstimate:
    alpha_hat: float
    pairs_used: int
    pairs_skipped: int
    M: float


class ClassifierKind(Enum):
    ALL_G = "AllG"
    NOT_ALL_G = "NotAllG"
    UNKNOWN = "Unknown"


@dataclass(frozen=True, eq=False)
class ClassifierVerdict:
    kind: ClassifierKind
    witness: Optional[RewardFunction] = None
    detail: str = ""
    power: Optional[int] = None   # power at which the recurrent class shows a uniform support


@dataclass(frozen=True)
class CaseRecord:
    n: int
    case: int          # 1, 2 or 3
    span: float        # ||g_n||_sp
    span_next: float   # ||g_{n+1}||_sp
    bound: float
    holds: bool


# ---------- Ergodic ----------

@dataclass(frozen=True, eq=False)
class AverageTrace:
    n_values: np.ndarray          # 1..n_max
    averages: np.ndarray          # shape (n_max, N): T^n 0 (x) / n
    lam: Optional[float] = None
    bounds: Optional[np.ndarray] = None   # 2||w||/n when a solution is attached


@dataclass(frozen=True)
class EscapeReport:
    first_n: Dict[float, Optional[int]]   # alpha -> smallest n, None = Fail
    n_max: int
    vacuous: bool = False

    @property
    def passed(self) -> bool:
        return all(n is not None for n in self.first_n.values())


# ---------- Simulation ----------

@dataclass(frozen=True, eq=False)
class PathBatch:
    seed: int
    horizon: int
    n_paths: int
    start: int
    states: np.ndarray   # (n_paths, horizon + 1) state indices
    rng_algorithm: str = "Philox"


@dataclass(frozen=True)
class EntropicEstimate:
    estimate: float
    ci_low: float
    ci_high: float
    std_err: float    # bootstrap standard deviation
    n_paths: int
    n_boot: int


@dataclass(frozen=True, eq=False)
class LatticeDistribution:
    step: float
    offset: float
    probs: np.ndarray   # probability of offset + step*k, k = 0..len-1

    def __post_init__(self):
        p = np.array(self.probs, dtype=float)
        if abs(p.sum() - 1.0) >= ROW_TOL:
            raise InvalidInput(f"Lattice probabilities sum to {p.sum()!r}")
        p.flags.writeable = False
        object.__setattr__(self, "probs", p)

    def support(self) -> np.ndarray:
        return self.offset + self.step * np.arange(len(self.probs))

    def prob_at(self, value: float, atol: float = 1e-9) -> float:
        hit = np.abs(self.support() - value) <= atol
        return float(self.probs[hit].sum())

    def cdf(self, t: float, atol: float = 1e-9) -> float:
        return float(self.probs[self.support() <= t + atol].sum())


class Dominance(Enum):
    DOMINATES = "Dominates"
    DOMINATED_BY = "DominatedBy"
    INCOMPARABLE = "Incomparable"
    EQUAL = "Equal"


# ---------- Corpus ----------

@dataclass(frozen=True)
class TruncationPolicy:
    N: int
    redirect_state: int                 # label receiving out-of-range mass
    redirected_mass: Dict[int, float]   # row label -> mass moved
    error_bound: float = 0.0


@dataclass(frozen=True, eq=False)
class CorpusChain:
    name: str
    kernel: FiniteKernel
    rewards: Dict[str, RewardFunction] = field(default_factory=dict)
    truncation: Optional[TruncationPolicy] = None
    meta: Dict = field(default_factory=dict)


# ---------- Run configuration and results ----------

@dataclass
class RunConfig:
    subcommand: str
    verbose: bool = False
    debug: bool = False

    kernel_path: Optional[Path] = None
    labels_path: Optional[Path] = None     # sidecar for CSV kernels
    reward_path: Optional[Path] = None
    corpus: Optional[str] = None           # build the kernel from a corpus constructor instead
    params: Dict[str, str] = field(default_factory=dict)
    reward_name: Optional[str] = None
    inline_g: Optional[List[float]] = None

    out_path: Optional[Path] = None
    out_format: str = "json"                # json | csv

    tol: float = 1e-10
    max_iter: int = 100_000
    span_cap: float = 1e4
    anchor: Optional[str] = None
    n_max: int = 4

    seed: int = 0
    paths: int = 10_000
    horizon: int = 20
    start: Optional[str] = None
    alphas: List[float] = field(default_factory=lambda: [0.9, 0.5, 0.1])
    support: List[str] = field(default_factory=list)
    compare_reward: Optional[str] = None   # second reward for `dominance`
    filter: Optional[str] = None           # verify-paper group
    workers: int = 1

    def validate(self):
        if self.out_format not in ("json", "csv"):
            raise InvalidInput(f"Unknown output format {self.out_format!r}")
        if self.tol <= 0:
            raise InvalidInput("--tol must be positive")
        if self.span_cap <= 1:
            raise InvalidInput("--span-cap must exceed 1")
        if self.max_iter < 1 or self.paths < 1 or self.horizon < 1 or self.n_max < 1:
            raise InvalidInput("--max-iter, --paths, --horizon and --n-max must be positive")
        if not 0 <= self.seed < 2**64:
            raise InvalidInput("--seed must fit in 64 bits")
        if self.workers < 1:
            raise InvalidInput("worker count must be positive")
        if self.kernel_path is not None and self.corpus is not None:
            raise InvalidInput("Use either --kernel or --corpus, not both")

    def public_dict(self) -> Dict:
        """Numeric options recorded in report metadata (paths left out)."""
        return {
            "tol": self.tol, "max_iter": self.max_iter, "span_cap": self.span_cap,
            "anchor": self.anchor, "n_max": self.n_max, "seed": self.seed,
            "paths": self.paths, "horizon": self.horizon, "start": self.start,
            "alphas": list(self.alphas), "corpus": self.corpus, "params": dict(self.params),
            "reward_name": self.reward_name, "format": self.out_format,
        }


@dataclass(frozen=True)
class CheckResult:
    criterion: int
    group: str
    name: str
    expected: str
    actual: str
    tolerance: str
    passed: bool


@dataclass
class Timings:
    per_criterion: Dict[int, float] = field(default_factory=dict)
    total: float = 0.0


@dataclass
class Results:
    checks: List[CheckResult]
    timings: Timings
    errors: Dict[int, str] = field(default_factory=dict)   # criterion -> exception text

    @property
    def passed(self) -> bool:
        return not self.errors and all(c.passed for c in self.checks)

    def to_dict(self) -> Dict:
        """Wall-clock timings are left out; they only go to the printed report."""
        from .utils import jsonable
        return {
            "passed": self.passed,
            "checks": [jsonable(c) for c in self.checks],
            "errors": {str(cid): err for cid, err in sorted(self.errors.items())},
        }
