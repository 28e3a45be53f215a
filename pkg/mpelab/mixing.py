import math
from typing import Iterator, Tuple

import numpy as np

from .errors import DomainError, RelationViolated
from .kernel import _log_matmul, iterate_kernel, iterate_kernel_log
from .models import Distribution, FiniteKernel, Minorization, MixingReport, RelationReport

RELATION_TOL = 1e-12


def _dobrushin(Pn: np.ndarray) -> float:
    best = 0.0
    for x in range(Pn.shape[0] - 1):
        tv = 0.5 * np.abs(Pn[x + 1:] - Pn[x]).sum(axis=1)
        best = max(best, float(tv.max()))
    return min(best, 1.0)


def _minorization(Pn: np.ndarray) -> Minorization:
    colmin = Pn.min(axis=0)
    d = float(colmin.sum())
    if d <= 0.0:
        return Minorization(0.0, None)
    return Minorization(min(d, 1.0), Distribution(colmin / d))


def _strong_ratio(logPn: np.ndarray) -> float:
    # 0/0 = 0 (column unreachable from everywhere), 1/0 = inf
    hi = logPn.max(axis=0)
    lo = logPn.min(axis=0)
    reached = np.isfinite(hi)
    if np.any(reached & ~np.isfinite(lo)):
        return math.inf
    if not reached.any():
        return 1.0
    with np.errstate(over="ignore"):
        return max(1.0, float(np.exp((hi - lo)[reached]).max()))


def dobrushin_coefficient(K: FiniteKernel, n: int = 1) -> float:
    """Largest total-variation distance between two rows of P^n."""
    return _dobrushin(iterate_kernel(K, n).matrix)


def minorization(K: FiniteKernel, n: int = 1) -> Minorization:
    """Maximal d with P^n(x,.) >= d*eta for all x; eta is the normalised column minimum."""
    return _minorization(iterate_kernel(K, n).matrix)


def strong_mixing_ratio(K: FiniteKernel, n: int = 1) -> float:
    return _strong_ratio(iterate_kernel_log(K, n))


def supports_equivalent(K: FiniteKernel, n: int = 1) -> bool:
    """True when every row of P^n charges exactly the same states."""
    support = np.isfinite(iterate_kernel_log(K, n))
    return bool(np.all(support == support[0]))


def _powers(K: FiniteKernel, n_max: int, log_domain: bool = False) -> Iterator[Tuple[int, np.ndarray, np.ndarray]]:
    P = K.matrix
    Pn = P.copy()
    logP = logPn = None
    if log_domain:
        with np.errstate(divide="ignore"):
            logP = np.log(P)
        logPn = logP.copy()
    for n in range(1, n_max + 1):
        yield n, Pn, logPn
        if n < n_max:
            Pn = np.clip(Pn @ P, 0.0, None)
            Pn /= Pn.sum(axis=1, keepdims=True)
            if log_domain:
                logPn = _log_matmul(logPn, logP)


def mixing_report(K: FiniteKernel, n_max: int) -> MixingReport:
    if n_max < 1:
        raise DomainError("n_max must be >= 1")
    report = MixingReport()
    for n, Pn, logPn in _powers(K, n_max, log_domain=True):
        report.lambda_n[n] = _dobrushin(Pn)
        report.minorization_n[n] = _minorization(Pn)
        report.strong_ratio_n[n] = _strong_ratio(logPn)
    return report


def check_relations(K: FiniteKernel, n_max: int) -> RelationReport:
    """
    Checks, for all n, m <= n_max:
      Lambda_n <= 1 - d_n,  Lambda_{n+m} <= Lambda_n * Lambda_m,  Lambda_n <= Lambda_1 ** n.
    A violation above 1e-12 raises RelationViolated; it points at a bug, not at the data.
    """
    if n_max < 1:
        raise DomainError("n_max must be >= 1")
    lam, dn = {}, {}
    for n, Pn, _ in _powers(K, 2 * n_max):
        lam[n] = _dobrushin(Pn)
        if n <= n_max:
            dn[n] = _minorization(Pn).d

    worst, where, checks = 0.0, ("none", {}), 0
    def note(rel: str, gap: float, witness: dict):
        nonlocal worst, where, checks
        checks += 1
        if gap > worst:
            worst, where = gap, (rel, witness)

    for n in range(1, n_max + 1):
        note("Lambda_n <= 1 - d_n", lam[n] - (1.0 - dn[n]), {"n": n, "Lambda": lam[n], "d": dn[n]})
        note("Lambda_n <= Lambda_1^n", lam[n] - lam[1] ** n, {"n": n, "Lambda": lam[n], "Lambda_1": lam[1]})
        for m in range(1, n_max + 1):
            note("Lambda_{n+m} <= Lambda_n Lambda_m", lam[n + m] - lam[n] * lam[m],
                 {"n": n, "m": m, "Lambda_n+m": lam[n + m]})
    if worst > RELATION_TOL:
        raise RelationViolated(where[0], worst, where[1])
    return RelationReport(max_violation=worst, n_max=n_max, checks=checks)
