"""
State spaces, stochastic matrices, signed measures and hitting-time tails.

States are addressed by their integer index in ``StateSpace.labels`` throughout
the library; labels only matter at the file / CLI boundary.

Hitting times follow tau_B = inf{n >= 1 : x_n in B}: the first step counts,
the starting state does not.
"""
import logging
from collections import deque
from math import gcd
from typing import Iterable, List, Optional, Sequence

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph
from scipy.sparse.linalg import spsolve
from scipy.special import logsumexp

from .errors import (DomainError, EmptyTaboo, InvalidInput, NegativeEntry,
                     NonStochasticRow, NonUniqueInvariant)
from .models import (ROW_TOL, CommClass, Distribution, FiniteKernel,
                     SignedMeasureDecomposition, StateSpace)
from .utils import get_logger

MAX_POWER = 10**6
ITERATE_TOL = 1e-10          # rows of P^n after up to ~40 products
DIRECT_SOLVE_MAX = 2000
POWER_TOL = 1e-14
POWER_MAX_ITER = 10**6
STATIONARITY_TOL = 1e-12
TAIL_DRIFT_TOL = 1e-12


def _checked_rows(mat: np.ndarray, tol: float) -> np.ndarray:
    if not np.all(np.isfinite(mat)):
        raise InvalidInput("Kernel matrix contains non-finite entries")
    neg = np.argwhere(mat < 0)
    if len(neg):
        r, c = (int(v) for v in neg[0])
        raise NegativeEntry(r, c, float(mat[r, c]))
    sums = mat.sum(axis=1)
    bad = np.flatnonzero(np.abs(sums - 1.0) >= tol)
    if len(bad):
        raise NonStochasticRow(int(bad[0]), float(sums[bad[0]]))
    if np.any(sums != 1.0):
        mat = mat / sums[:, None]
    return mat


def build_kernel(space: StateSpace, rows, logger: Optional[logging.Logger] = None) -> FiniteKernel:
    logger = get_logger(logger)
    mat = np.array(rows, dtype=float)
    n = len(space)
    if mat.ndim != 2 or mat.shape != (n, n):
        raise InvalidInput(f"Expected a {n}x{n} matrix, got shape {mat.shape}")
    checked = _checked_rows(mat, ROW_TOL)
    if checked is not mat:
        logger.debug(f"Renormalised {int(np.sum(mat.sum(axis=1) != 1.0))} row(s) within tolerance")
    return FiniteKernel(space, checked)


def iterate_kernel(K: FiniteKernel, n: int) -> FiniteKernel:
    """n-step kernel P^n."""
    _check_power(n)
    if n == 1:
        return K
    mat = np.linalg.matrix_power(K.matrix, n)
    return FiniteKernel(K.space, _checked_rows(np.clip(mat, 0.0, None), ITERATE_TOL))


def _check_power(n: int):
    if n < 1:
        raise DomainError(f"Power must be >= 1, got {n}")
    if n > MAX_POWER:
        raise DomainError(f"Power {n} exceeds the guard {MAX_POWER}")


def _log_matmul(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    n = A.shape[0]
    chunk = max(1, 2**22 // max(1, A.shape[1] * B.shape[1]))
    out = np.empty((n, B.shape[1]))
    with np.errstate(divide="ignore", invalid="ignore"):
        for s in range(0, n, chunk):
            out[s:s + chunk] = logsumexp(A[s:s + chunk, :, None] + B[None, :, :], axis=1)
    return out


def iterate_kernel_log(K: FiniteKernel, n: int) -> np.ndarray:
    """Entrywise log P^n; zero entries stay exactly -inf however small the positive ones get."""
    _check_power(n)
    with np.errstate(divide="ignore"):
        base = np.log(K.matrix)
    result = None
    while n:
        if n & 1:
            result = base if result is None else _log_matmul(result, base)
        n >>= 1
        if n:
            base = _log_matmul(base, base)
    return result


# ---------- Invariant measure ----------

def _stationarity_defect(P: np.ndarray, nu: np.ndarray) -> float:
    return 0.5 * float(np.abs(nu @ P - nu).sum())


def _stationary_direct(P: np.ndarray) -> Optional[np.ndarray]:
    n = P.shape[0]
    # nu (P - I) = 0 with the last equation swapped for sum(nu) = 1
    A = (sparse.csr_matrix(P).T - sparse.identity(n, format="csr")).tolil()
    A[n - 1, :] = np.ones(n)
    b = np.zeros(n)
    b[-1] = 1.0
    with np.errstate(all="ignore"):
        nu = spsolve(A.tocsc(), b)
    nu = np.atleast_1d(np.asarray(nu, dtype=float))
    if not np.all(np.isfinite(nu)) or np.any(nu < -1e-9):
        return None
    nu = np.clip(nu, 0.0, None)
    return nu / nu.sum()


def _stationary_power(P: np.ndarray, start: Optional[np.ndarray], logger) -> np.ndarray:
    n = P.shape[0]
    lazy = 0.5 * (P + np.eye(n))   # same stationary law, aperiodic
    v = np.full(n, 1.0 / n) if start is None else start.copy()
    for it in range(1, POWER_MAX_ITER + 1):
        nxt = v @ lazy
        nxt /= nxt.sum()
        if 0.5 * np.abs(nxt - v).sum() < POWER_TOL:
            v = nxt
            break
        v = nxt
        if it % 10_000 == 0:
            logger.debug(f"  …power iteration {it}")
    else:
        logger.warning(f"Power iteration hit {POWER_MAX_ITER} iterations without reaching {POWER_TOL}")
    return v


def invariant_measure(K: FiniteKernel, logger: Optional[logging.Logger] = None) -> Distribution:
    logger = get_logger(logger)
    closed = [c for c in communicating_classes(K) if c.recurrent]
    if len(closed) > 1:
        raise NonUniqueInvariant(len(closed))
    P = K.matrix
    nu = _stationary_direct(P) if K.n <= DIRECT_SOLVE_MAX else None
    if nu is None or _stationarity_defect(P, nu) >= STATIONARITY_TOL:
        logger.info(f"Invariant measure: falling back to power iteration on {K.n} states")
        nu = _stationary_power(P, nu, logger)
    defect = _stationarity_defect(P, nu)
    if defect >= STATIONARITY_TOL:
        logger.warning(f"Invariant measure defect {defect:.2e} above {STATIONARITY_TOL}")
    return Distribution(nu / nu.sum())


# ---------- Signed measures ----------

def hahn_decomposition(mu1: Distribution, mu2: Distribution) -> SignedMeasureDecomposition:
    if len(mu1) != len(mu2):
        raise InvalidInput("Distributions live on different state spaces")
    diff = mu1.weights - mu2.weights
    pos = diff > 0   # ties go to the negative set
    return SignedMeasureDecomposition(frozenset(np.flatnonzero(pos).tolist()), float(diff[pos].sum()))


def total_variation(u: np.ndarray, v: np.ndarray) -> float:
    return 0.5 * float(np.abs(np.asarray(u) - np.asarray(v)).sum())


# ---------- Hitting times ----------

def _index_set(K: FiniteKernel, states: Iterable[int]) -> List[int]:
    idx = sorted({int(s) for s in states})
    if idx and (idx[0] < 0 or idx[-1] >= K.n):
        raise InvalidInput(f"State index out of range 0..{K.n - 1}: {idx}")
    return idx


def taboo_tails(K: FiniteKernel, B: Iterable[int], n_max: int,
                logger: Optional[logging.Logger] = None) -> np.ndarray:
    """Array T[x, n] = P_x[tau_B > n] for every start x and 0 <= n <= n_max."""
    idx = _index_set(K, B)
    if not idx:
        raise EmptyTaboo("Taboo set B must be nonempty")
    P = K.matrix
    outside = np.ones(K.n, dtype=bool)
    outside[idx] = False
    tails = np.empty((K.n, n_max + 1))
    tails[:, 0] = 1.0
    if n_max >= 1:
        v = P[:, outside]                      # first step from anywhere into B^c
        R = P[np.ix_(outside, outside)]        # subsequent steps stay in B^c
        tails[:, 1] = v.sum(axis=1)
        for k in range(2, n_max + 1):
            v = v @ R
            tails[:, k] = v.sum(axis=1)
    drift = max(float(np.diff(tails, axis=1).max(initial=0.0)),
                float((tails - 1.0).max()), float(-tails.min()))
    if drift > TAIL_DRIFT_TOL:
        get_logger(logger).warning(f"Taboo tails drift by {drift:.2e} (above {TAIL_DRIFT_TOL}); clipping to [0, 1]")
    return np.clip(tails, 0.0, 1.0)


def taboo_tail(K: FiniteKernel, B: Iterable[int], x: int, n: int) -> float:
    if n < 0:
        raise DomainError("n must be nonnegative")
    return float(taboo_tails(K, B, n)[x, n])


# ---------- Class structure ----------

def communicating_classes(K: FiniteKernel) -> List[CommClass]:
    P = K.matrix
    graph = sparse.csr_matrix(P > 0)
    n_comp, labels = csgraph.connected_components(graph, directed=True, connection="strong")
    rows, cols = np.nonzero(P > 0)
    leaving = labels[rows] != labels[cols]
    open_classes = set(labels[rows[leaving]].tolist())
    out = [CommClass(tuple(np.flatnonzero(labels == c).tolist()), c not in open_classes)
           for c in range(n_comp)]
    out.sort(key=lambda c: c.states[0])
    return out


def class_period(K: FiniteKernel, states: Sequence[int]) -> int:
    """Period of a communicating class (0 for a singleton without self-loop)."""
    members = set(states)
    P = K.matrix
    root = states[0]
    level = {root: 0}
    queue = deque([root])
    period = 0
    while queue:
        u = queue.popleft()
        for v in np.flatnonzero(P[u] > 0).tolist():
            if v not in members:
                continue
            if v not in level:
                level[v] = level[u] + 1
                queue.append(v)
            else:
                period = gcd(period, level[u] + 1 - level[v])
    return abs(period)
