"""
The multiplicative Poisson equation  w = g - lambda + mu(w)  on a finite chain.

solve_mpe runs relative value iteration on T f = g + mu(f).  Slowly diverging
instances never reach any span cap, so the iteration is interleaved with an
exact existence certificate (positive eigenvector of diag(e^g) P) and, once a
solution is known to exist, with Newton steps on the same equation.
"""
import logging, math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg

from .entropy import as_values, entropic_utilities, esscher_kernel
from .errors import DomainError, InvalidInput, NonUniqueInvariant
from .kernel import class_period, communicating_classes, invariant_measure, iterate_kernel_log
from .mixing import _dobrushin, _powers, _strong_ratio, minorization
from .models import (ApeSolution, CaseRecord, ClassifierKind, ClassifierVerdict, ClassRate,
                     ContractionEstimate, ExistenceCertificate, ExistenceVerdict, FiniteKernel,
                     MpeSolution, RewardFunction, SolveStatus)
from .utils import get_logger

RATE_MARGIN = 1e-12   # a non-closed class must sit strictly below the top rate
RATE_MATCH = 1e-9     # closed classes must all attain it
BOUND_SLACK = 1e-10


@dataclass(frozen=True)
class SolveOptions:
    tol: float = 1e-10
    max_iter: int = 100_000
    span_cap: float = 1e4
    anchor: Optional[int] = None   # state index; iterates re-centred there instead of at the minimum
    check_every: int = 1000        # certificate / Newton cadence
    polish: bool = True

    def __post_init__(self):
        if not self.tol > 0:
            raise InvalidInput("tol must be positive")
        if not self.span_cap > 1:
            raise InvalidInput("span_cap must exceed 1")
        if self.max_iter < 1 or self.check_every < 1:
            raise InvalidInput("max_iter and check_every must be positive")


def span_seminorm(f) -> float:
    v = as_values(f)
    return 0.5 * float(v.max() - v.min())


def apply_T(K: FiniteKernel, g, f) -> np.ndarray:
    return as_values(g, K.n) + entropic_utilities(K, f)


def verify_mpe(K: FiniteKernel, g, w, lam: float) -> float:
    g, w = as_values(g, K.n), as_values(w, K.n)
    return float(np.max(np.abs(w - g + lam - entropic_utilities(K, w))))


# ---------- Existence ----------

def _class_rate(P: np.ndarray, g: np.ndarray, states: Sequence[int]) -> float:
    idx = np.asarray(states)
    sub = P[np.ix_(idx, idx)]
    if not np.any(sub > 0):
        return -math.inf
    gs = g[idx]
    shift = float(gs.max())
    rho = float(np.max(np.abs(np.linalg.eigvals(np.exp(gs - shift)[:, None] * sub))))
    return shift + math.log(rho) if rho > 0 else -math.inf


def existence_certificate(K: FiniteKernel, g) -> ExistenceCertificate:
    """
    A bounded solution exists iff diag(e^g) P has a positive eigenvector, i.e. iff the
    classes of maximal growth rate are exactly the closed classes.
    """
    g = as_values(g, K.n)
    rates = tuple(ClassRate(c.states, c.recurrent, _class_rate(K.matrix, g, c.states))
                  for c in communicating_classes(K))
    top = max(r.rate for r in rates)
    for r in rates:
        if not r.closed and r.rate >= top - RATE_MARGIN:
            return ExistenceCertificate(False, top, rates,
                                        f"transient class {list(r.states)} grows at rate {r.rate:.6g} >= {top:.6g}")
    for r in rates:
        if r.closed and r.rate < top - RATE_MATCH:
            return ExistenceCertificate(False, top, rates,
                                        f"closed class {list(r.states)} grows at {r.rate:.6g} < {top:.6g}")
    return ExistenceCertificate(True, top, rates, "")


def sharp_bound(lam: float) -> float:
    if not 0.0 < lam < 1.0:
        raise DomainError(f"sharp_bound needs Lambda in (0,1), got {lam!r}")
    return -0.5 * math.log(lam)


def sharp_bound_minorization(d: float) -> float:
    if not 0.0 < d < 1.0:
        raise DomainError(f"sharp_bound_minorization needs d in (0,1), got {d!r}")
    return -0.5 * math.log(1.0 - d)


def guaranteed_existence(K: FiniteKernel, g, n_max: int) -> ExistenceVerdict:
    """Smallest n <= n_max with n*||g||_sp < k(Lambda_n). Failing that proves nothing."""
    span = span_seminorm(g)
    for n, Pn, _ in _powers(K, n_max):
        lam = _dobrushin(Pn)
        if lam <= 0.0:
            bound = math.inf
        elif lam >= 1.0:
            bound = 0.0
        else:
            bound = sharp_bound(lam)
        if n * span < bound:
            return ExistenceVerdict(True, n)
    return ExistenceVerdict(False, None)


# ---------- Solvers ----------

def _centre(f: np.ndarray, anchor: Optional[int]) -> np.ndarray:
    return f - (f[anchor] if anchor is not None else f.min())


def newton_polish(K: FiniteKernel, g, w0, opts: SolveOptions,
                  max_steps: int = 50) -> Optional[Tuple[np.ndarray, float, float, int]]:
    """
    Newton iteration on w = g - lambda + mu(w), pinned at the anchor (or argmin of w0).

    Each step solves (I - Q) w' + lambda' 1 = g + mu(w) - Q w with Q the Esscher kernel
    of w; this is policy evaluation for the entropy-penalised control problem, so
    the steps improve monotonically. Returns (w, lambda, residual, steps) or None.
    """
    g = as_values(g, K.n)
    w = np.array(as_values(w0, K.n), dtype=float)
    s = opts.anchor if opts.anchor is not None else int(np.argmin(w))
    w = w - w[s]
    eye = np.eye(K.n)
    for step in range(max_steps + 1):
        mu = entropic_utilities(K, w)
        d = g + mu - w
        lam = float(d.mean())
        residual = float(np.max(np.abs(d - lam)))
        if residual < opts.tol:
            return w, lam, residual, step
        Q = esscher_kernel(K, w)
        A = eye - Q
        A[:, s] = 1.0    # column of the pinned coordinate carries lambda'
        try:
            z = linalg.solve(A, g + mu - Q @ w, check_finite=False)
        except (linalg.LinAlgError, ValueError):
            return None
        if not np.all(np.isfinite(z)):
            return None
        w = z.copy()
        w[s] = 0.0
        if span_seminorm(w) > opts.span_cap:
            return None
    return None


def solve_mpe(K: FiniteKernel, g, opts: Optional[SolveOptions] = None,
              logger: Optional[logging.Logger] = None) -> MpeSolution:
    opts = opts or SolveOptions()
    logger = get_logger(logger)
    g = as_values(g, K.n)
    anchor = opts.anchor
    if anchor is not None and not 0 <= anchor < K.n:
        raise InvalidInput(f"Anchor {anchor} outside 0..{K.n - 1}")

    f = np.zeros(K.n)
    trace: List[float] = []
    certificate = None
    lam, residual = 0.0, math.inf
    for it in range(1, opts.max_iter + 1):
        w = f - f.min()
        Tw = apply_T(K, g, w)
        diff = Tw - w
        lam = float(diff.mean())
        residual = float(np.max(np.abs(diff - lam)))
        if residual < opts.tol:
            logger.debug(f"solve_mpe: converged after {it - 1} step(s), lambda={lam:.12g}")
            return MpeSolution(w, lam, residual, SolveStatus.SOLVED, tuple(trace), it - 1)

        f = _centre(Tw, anchor)
        span = span_seminorm(f)
        trace.append(span)
        if not math.isfinite(span) or span > opts.span_cap:
            logger.info(f"solve_mpe: span {span:.4g} passed cap {opts.span_cap:g} at step {it}")
            return MpeSolution(f - f.min(), lam, residual, SolveStatus.DIVERGED, tuple(trace), it,
                               reason=f"span {span:.6g} exceeded cap {opts.span_cap:g}")

        if it % opts.check_every == 0:
            if certificate is None:
                certificate = existence_certificate(K, g)
                logger.debug(f"solve_mpe: certificate exists={certificate.exists} "
                             f"lambda*={certificate.lambda_star:.12g}")
            if not certificate.exists:
                logger.info(f"solve_mpe: no bounded solution ({certificate.reason})")
                return MpeSolution(f - f.min(), lam, residual, SolveStatus.DIVERGED, tuple(trace), it,
                                   reason=certificate.reason)
            if opts.polish:
                polished = newton_polish(K, g, f, opts)
                if polished is not None:
                    pw, plam, _, steps = polished
                    pw = pw - pw.min()
                    pres = verify_mpe(K, g, pw, plam)
                    if pres < opts.tol:
                        logger.debug(f"solve_mpe: Newton finished in {steps} step(s) at iteration {it}")
                        return MpeSolution(pw, plam, pres, SolveStatus.SOLVED, tuple(trace), it,
                                           method="newton")
            logger.debug(f"  …solve_mpe {it}/{opts.max_iter}: residual {residual:.3e}, span {span:.4g}")

    if certificate is None:
        certificate = existence_certificate(K, g)
    w = f - f.min()
    if not certificate.exists:
        return MpeSolution(w, lam, residual, SolveStatus.DIVERGED, tuple(trace), opts.max_iter,
                           reason=certificate.reason)
    logger.info(f"solve_mpe: inconclusive after {opts.max_iter} iterations (residual {residual:.3e})")
    return MpeSolution(w, lam, residual, SolveStatus.INCONCLUSIVE, tuple(trace), opts.max_iter,
                       reason="max_iter reached")


def solve_ape(K: FiniteKernel, g) -> ApeSolution:
    """Additive Poisson equation w0 = g - lambda0 + P w0 with lambda0 = nu(g)."""
    g = as_values(g, K.n)
    nu = invariant_measure(K)
    lam0 = float(nu.weights @ g)
    P = K.matrix
    A = np.eye(K.n) - P
    A[:, 0] = 1.0
    z = linalg.solve(A, g)
    w = z.copy()
    w[0] = 0.0
    w -= w.min()
    residual = float(np.max(np.abs(w - g + lam0 - P @ w)))
    return ApeSolution(w, lam0, residual)


def local_contraction_estimate(K: FiniteKernel, g, M: float, samples: int, seed: int) -> ContractionEstimate:
    """
    Empirical sup of ||Tf1 - Tf2||_sp / ||f1 - f2||_sp over random pairs whose
    oscillation sup f - inf f is at most M. Pairs differing by a constant are skipped.
    """
    if M <= 0 or samples < 1:
        raise DomainError("M must be positive and samples >= 1")
    g = as_values(g, K.n)
    rng = np.random.default_rng(seed)
    best, used, skipped = 0.0, 0, 0
    for _ in range(samples):
        f1 = rng.uniform(0.0, M, K.n)
        f2 = rng.uniform(0.0, M, K.n)
        den = span_seminorm(f1 - f2)
        if den < 1e-12:
            skipped += 1
            continue
        best = max(best, span_seminorm(apply_T(K, g, f1) - apply_T(K, g, f2)) / den)
        used += 1
    return ContractionEstimate(best, used, skipped, M)


# ---------- Finite classification ----------

def _stay_rate(P: np.ndarray, states: Sequence[int]) -> float:
    idx = np.asarray(states)
    return float(np.max(np.abs(np.linalg.eigvals(P[np.ix_(idx, idx)]))))


def _primitive_power(sub: np.ndarray) -> Optional[int]:
    n = sub.shape[0]
    step = (sub > 0).astype(np.int64)
    cur = step.copy()
    for k in range(1, (n - 1) ** 2 + 2):
        if cur.all():
            return k
        cur = ((cur @ step) > 0).astype(np.int64)
    return None


def finite_existence_classifier(K: FiniteKernel) -> ClassifierVerdict:
    classes = communicating_classes(K)
    closed = [c for c in classes if c.recurrent]
    if len(closed) != 1:
        raise NonUniqueInvariant(len(closed))
    P = K.matrix
    transient = [c for c in classes if not c.recurrent]
    sticky = [c for c in transient if len(c.states) > 1 or P[c.states[0], c.states[0]] > 0]
    if sticky:
        target = max(sticky, key=lambda c: _stay_rate(P, c.states))
        h = _stay_rate(P, target.states)
        level = 2.0 * (math.log(2.0) - math.log(h))
        values = np.zeros(K.n)
        values[list(target.states)] = level
        return ClassifierVerdict(ClassifierKind.NOT_ALL_G, RewardFunction(values),
                                 f"transient cycle on {list(target.states)} with stay rate {h:.6g}")

    rec = closed[0].states
    period = class_period(K, rec)
    if period != 1:
        return ClassifierVerdict(ClassifierKind.UNKNOWN, detail=f"recurrent class has period {period}")
    p = _primitive_power(P[np.ix_(rec, rec)])
    if p is None:
        return ClassifierVerdict(ClassifierKind.UNKNOWN, detail="no uniform support power found")
    n = p + sum(len(c.states) for c in transient)   # transient mass is gone after that many steps
    if not math.isfinite(_strong_ratio(iterate_kernel_log(K, n))):
        return ClassifierVerdict(ClassifierKind.UNKNOWN, detail=f"strong mixing ratio infinite at n={n}")
    return ClassifierVerdict(ClassifierKind.ALL_G, detail=f"uniform support from n={n}", power=n)


# ---------- Span bounds and diagnostics ----------

def span_growth_bound(g_span: float, lam: float, n: int, f_span: float = 0.0) -> float:
    """Upper bound on ||T^n f||_sp under a mixing coefficient lam with lam*e^{2||g||_sp} < 1."""
    q = lam * math.exp(2.0 * g_span)
    if lam < 0 or q >= 1.0:
        raise DomainError(f"need Lambda*exp(2||g||_sp) < 1, got {q!r}")
    eps_n = lam ** n * math.exp((n - 1) * 2.0 * g_span + 2.0 * f_span)
    return g_span + 0.5 * math.log(1.0 / (1.0 - q) + eps_n)


def span_trace_bound_check(K: FiniteKernel, g, n_iter: int) -> float:
    """Largest excess of ||T^n 0||_sp over span_growth_bound, n = 1..n_iter."""
    g = as_values(g, K.n)
    lam = _dobrushin(K.matrix)
    gs = span_seminorm(g)
    f = np.zeros(K.n)
    worst = -math.inf
    for n in range(1, n_iter + 1):
        f = apply_T(K, g, f)
        f -= f.min()
        worst = max(worst, span_seminorm(f) - span_growth_bound(gs, lam, n))
    return worst


def strong_mixing_span_bound(g, L: float, n: int) -> float:
    return n * span_seminorm(g) + 0.5 * math.log(L)


def minorization_case_trace(K: FiniteKernel, g, n_iter: int, eps: Optional[float] = None) -> List[CaseRecord]:
    """
    Follows g_n = T^n 0 through the three-case span recursion available under a
    one-step minorization with ||g||_sp < k(1-d).
    """
    g = as_values(g, K.n)
    d = minorization(K, 1).d
    if d <= 0.0:
        raise DomainError("kernel has no one-step minorization (d = 0)")
    gs = span_seminorm(g)
    eps = d / 4.0 if eps is None else eps
    # ||g||_sp < -1/2 ln(1 - d + 2 eps) must hold; shrink eps until it does
    for _ in range(200):
        if 1.0 - d + 2.0 * eps > 0 and gs < -0.5 * math.log(1.0 - d + 2.0 * eps):
            break
        eps /= 2.0
    else:
        raise DomainError(f"||g||_sp = {gs:.6g} is not below k(1-d) = {-0.5 * math.log(1 - d) if d < 1 else math.inf}")
    kconst = math.log(d - eps) - math.log(eps)
    P = K.matrix
    out: List[CaseRecord] = []
    gn = np.zeros(K.n)
    for n in range(n_iter):
        span = span_seminorm(gn)
        c = -0.5 * (gn.max() + gn.min())
        upper = (gn + c) > 0                    # complement of A_n
        nxt = apply_T(K, g, gn)
        nxt -= nxt.min()
        span_next = span_seminorm(nxt)
        if span <= kconst:
            case, bound = 1, kconst + gs
        elif P[:, upper].sum(axis=1).min() >= eps:
            case, bound = 2, 0.5 * span + gs - 0.5 * math.log(eps)
        else:
            case, bound = 3, span
        holds = span_next <= bound + BOUND_SLACK * max(1.0, abs(bound))
        out.append(CaseRecord(n, case, span, span_next, bound, holds))
        gn = nxt
    return out


def risk_aversion_sweep(K: FiniteKernel, g, gammas: Sequence[float],
                        opts: Optional[SolveOptions] = None) -> Tuple[float, List[Tuple[float, Optional[float], SolveStatus]]]:
    """
    lambda(gamma g)/gamma for each gamma > 0, next to the risk-neutral constant nu(g)
    it approaches as gamma -> 0.
    """
    g = as_values(g, K.n)
    neutral = float(invariant_measure(K).weights @ g)
    rows = []
    for gamma in gammas:
        if gamma <= 0:
            raise DomainError("risk aversion must be positive")
        sol = solve_mpe(K, gamma * g, opts)
        rows.append((gamma, sol.lam / gamma if sol.solved else None, sol.status))
    return neutral, rows
