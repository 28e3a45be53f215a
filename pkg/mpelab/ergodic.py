"""Long-run averages, escape rates and visit counts."""
import logging, math
from typing import Iterable, Optional, Sequence

import numpy as np

from .entropy import as_values
from .errors import DomainError, InvalidInput
from .kernel import taboo_tails
from .models import AverageTrace, EscapeReport, FiniteKernel, MpeSolution
from .mpe import apply_T
from .utils import get_logger

MAX_VISIT_HORIZON = 1000


def risk_sensitive_averages(K: FiniteKernel, g, n_max: int,
                            solution: Optional[MpeSolution] = None) -> AverageTrace:
    """T^n 0 (x) / n for every state and 1 <= n <= n_max (backward recursion, no re-centring)."""
    if n_max < 1:
        raise DomainError("n_max must be >= 1")
    g = as_values(g, K.n)
    f = np.zeros(K.n)
    avgs = np.empty((n_max, K.n))
    for n in range(1, n_max + 1):
        f = apply_T(K, g, f)
        avgs[n - 1] = f / n
    ns = np.arange(1, n_max + 1)
    if solution is None:
        return AverageTrace(ns, avgs)
    wn = float(np.max(np.abs(solution.w)))
    return AverageTrace(ns, avgs, lam=solution.lam, bounds=2.0 * wn / ns)


def risk_sensitive_average(K: FiniteKernel, g, x: int, n: int) -> float:
    return float(risk_sensitive_averages(K, g, n).averages[n - 1, x])


def lambda_convergence_check(K: FiniteKernel, g, solution: MpeSolution, n_max: int) -> float:
    """max over x and n <= n_max of |lambda - T^n 0(x)/n| - 2||w||/n."""
    trace = risk_sensitive_averages(K, g, n_max, solution)
    gap = np.abs(trace.lam - trace.averages) - trace.bounds[:, None]
    return float(gap.max())


def escape_geometric_test(K: FiniteKernel, support: Iterable[int], alphas: Sequence[float], n_max: int,
                          logger: Optional[logging.Logger] = None) -> EscapeReport:
    """
    For each alpha: smallest n <= n_max with sup_{x outside support} P_x[tau_support > n] <= alpha^n,
    or None when no such n exists (a transient cycle outside the support).
    """
    logger = get_logger(logger)
    inside = {int(s) for s in support}
    outside = np.array([x not in inside for x in range(K.n)])
    if not outside.any():
        logger.info("escape test: support covers every state — vacuous pass")
        return EscapeReport({float(a): 1 for a in alphas}, n_max, vacuous=True)
    tails = taboo_tails(K, inside, n_max)[outside].max(axis=0)
    ns = np.arange(1, n_max + 1)
    with np.errstate(divide="ignore"):
        log_tail = np.log(tails[1:])
    first = {}
    for a in alphas:
        if not 0.0 < a < 1.0:
            raise DomainError(f"alpha must lie in (0,1), got {a!r}")
        ok = np.flatnonzero(log_tail <= ns * math.log(a))
        first[float(a)] = int(ns[ok[0]]) if len(ok) else None
    return EscapeReport(first, n_max)


def visit_count_tail(K: FiniteKernel, A: Iterable[int], x: int, n: int) -> np.ndarray:
    """Law of N(A,n) = #{1 <= t <= n : x_t in A} from x_0 = x; entry k is P[N = k]."""
    if not 0 <= n <= MAX_VISIT_HORIZON:
        raise DomainError(f"horizon must be in 0..{MAX_VISIT_HORIZON}")
    in_a = np.zeros(K.n, dtype=bool)
    in_a[[int(a) for a in A]] = True
    dist = np.zeros((K.n, n + 1))
    dist[x, 0] = 1.0
    PT = K.matrix.T
    for _ in range(n):
        moved = PT @ dist
        moved[in_a, 1:] = moved[in_a, :-1].copy()
        moved[in_a, 0] = 0.0
        dist = moved
    return dist.sum(axis=0)


def stay_lower_bound(K: FiniteKernel, g, kset: Iterable[int], alpha: float, n_max: int) -> Optional[float]:
    """
    k + ln(alpha), k = min of g on kset, when g >= 0 and some x in kset stays in kset
    for n steps with probability above alpha^n for every n <= n_max; None otherwise.
    """
    g = as_values(g, K.n)
    ks = sorted({int(s) for s in kset})
    if not ks:
        raise InvalidInput("kset must be nonempty")
    if np.any(g < 0) or not 0.0 < alpha < 1.0:
        return None
    k = float(g[ks].min())
    rest = [x for x in range(K.n) if x not in set(ks)]
    if not rest:
        return k + math.log(alpha)
    tails = taboo_tails(K, rest, n_max)[ks, 1:]
    ok = np.all(tails > alpha ** np.arange(1, n_max + 1), axis=1)
    return k + math.log(alpha) if ok.any() else None


def bump_tail_check(K: FiniteKernel, solution: MpeSolution, ball: Iterable[int], n_max: int) -> float:
    """max over x and n <= n_max of P_x[tau_ball > n] - e^{2||w||+1} e^{-(1-lambda) n}."""
    tails = taboo_tails(K, ball, n_max)
    wn = float(np.max(np.abs(solution.w)))
    ns = np.arange(n_max + 1)
    with np.errstate(over="ignore"):
        bound = np.exp(2.0 * wn + 1.0 - (1.0 - solution.lam) * ns)
    return float((tails - bound[None, :]).max())
