"""
Seeded path sampling, Monte Carlo entropic estimates and exact partial-sum laws.

Path i always draws its uniforms from Philox(key=seed).jumped(i), so a batch is
bit-identical for a given (seed, K, x0, n, m) no matter how many workers built it.
"""
import logging, math
from concurrent.futures import ThreadPoolExecutor, as_completed
from fractions import Fraction
from typing import Optional, Tuple

import numpy as np
from numpy.random import Generator, Philox, SeedSequence

from .entropy import as_values
from .errors import DomainError, NonLatticeReward
from .models import Dominance, EntropicEstimate, FiniteKernel, LatticeDistribution, PathBatch
from .utils import get_logger

RNG_ALGORITHM = "Philox"
DENOMINATOR_CAP = 10**6
LATTICE_CAP = 10**7
RATIONAL_TOL = 1e-9
CDF_TOL = 1e-12
BOOT_CHUNK = 50


def _uniforms(seed: int, start: int, stop: int, n: int) -> np.ndarray:
    base = Philox(key=seed)
    out = np.empty((stop - start, n))
    for i in range(start, stop):
        out[i - start] = Generator(base.jumped(i)).random(n)
    return out


def _inverse_cdf_table(P: np.ndarray) -> np.ndarray:
    cdf = np.cumsum(P, axis=1)
    last = P.shape[1] - 1 - np.argmax(P[:, ::-1] > 0, axis=1)
    # nothing past the last positive entry may ever be drawn
    cdf[np.arange(P.shape[1])[None, :] >= last[:, None]] = 1.0
    return cdf


def sample_paths(K: FiniteKernel, x0: int, n: int, m: int, seed: int, workers: int = 1,
                 logger: Optional[logging.Logger] = None) -> PathBatch:
    if n < 1 or m < 1:
        raise DomainError("horizon and path count must be >= 1")
    logger = get_logger(logger)
    chunk = min(10_000, max(1, math.ceil(m / (4 * workers))))
    spans = [(a, min(a + chunk, m)) for a in range(0, m, chunk)]
    U = np.empty((m, n))
    with ThreadPoolExecutor(max_workers=workers) as ex:
        futs = {ex.submit(_uniforms, seed, a, b, n): (a, b) for a, b in spans}
        done = 0
        for fut in as_completed(futs):
            a, b = futs[fut]
            U[a:b] = fut.result()
            done += 1
            if done % 10 == 0 or done == len(futs):
                logger.debug(f"  …substream progress: {done}/{len(futs)}")

    cdf = _inverse_cdf_table(K.matrix)
    states = np.empty((m, n + 1), dtype=np.int64)
    states[:, 0] = x0
    for t in range(n):
        states[:, t + 1] = (U[:, t][:, None] >= cdf[states[:, t]]).sum(axis=1)
    states.flags.writeable = False
    return PathBatch(seed, n, m, x0, states, RNG_ALGORITHM)


def path_sums(g, batch: PathBatch) -> np.ndarray:
    """S_n = g(x_0) + ... + g(x_{n-1}) per path."""
    g = as_values(g)
    return g[batch.states[:, :batch.horizon]].sum(axis=1)


def _weighted_log_mean_exp(values: np.ndarray, counts: np.ndarray) -> np.ndarray:
    """Row-wise ln(sum_j c_j e^{v_j} / sum_j c_j), shifting by the largest value actually present."""
    present = counts > 0
    top = np.where(present, values[None, :], -np.inf).max(axis=1)
    expo = np.where(present, np.exp(np.where(present, values[None, :] - top[:, None], 0.0)), 0.0)
    return top + np.log((counts * expo).sum(axis=1) / counts.sum(axis=1))


def mc_entropic_estimate(K: FiniteKernel, g, x0: int, n: int, m: int, seed: int,
                         n_boot: int = 1000, workers: int = 1,
                         logger: Optional[logging.Logger] = None) -> EntropicEstimate:
    """
    Plug-in estimate ln(mean_j e^{S_n^(j)}) / n of mu_{x0}(S_n)/n with a percentile
    bootstrap interval. The estimator is biased low for finite m.
    """
    batch = sample_paths(K, x0, n, m, seed, workers, logger)
    S = path_sums(g, batch)
    values, counts = np.unique(S, return_counts=True)
    est = float(_weighted_log_mean_exp(values, counts[None, :].astype(float))[0] / n)
    if m == 1 or len(values) == 1:
        return EntropicEstimate(est, est, est, 0.0, m, n_boot)

    rng = np.random.default_rng(SeedSequence([seed, 0xB0]))
    boots = np.empty(n_boot)
    pvals = counts / counts.sum()
    for s in range(0, n_boot, BOOT_CHUNK):
        b = min(BOOT_CHUNK, n_boot - s)
        # resampling m paths with replacement == multinomial counts over distinct sums
        draws = rng.multinomial(m, pvals, size=b).astype(float)
        boots[s:s + b] = _weighted_log_mean_exp(values, draws) / n
    lo, hi = np.percentile(boots, [2.5, 97.5])
    return EntropicEstimate(est, float(lo), float(hi), float(boots.std(ddof=1)), m, n_boot)


# ---------- Exact partial-sum laws ----------

def _lattice(values: np.ndarray) -> Tuple[float, float, np.ndarray]:
    """(offset, step, k) with values = offset + step * k, k nonnegative integers."""
    low = float(values.min())
    gaps = values - low
    nz = gaps[gaps > 0]
    if not len(nz):
        return low, 1.0, np.zeros(len(values), dtype=np.int64)
    base = float(nz.min())
    denom = 1
    for r in nz / base:
        fr = Fraction(float(r)).limit_denominator(DENOMINATOR_CAP)
        if abs(float(r) - float(fr)) > RATIONAL_TOL * max(1.0, float(r)):
            raise NonLatticeReward(f"reward gap ratio {r!r} is not rational within {RATIONAL_TOL}")
        denom = denom * fr.denominator // math.gcd(denom, fr.denominator)
        if denom > DENOMINATOR_CAP:
            raise NonLatticeReward("reward lattice needs a denominator above 10^6")
    step = base / denom
    ks = np.rint(gaps / step).astype(np.int64)
    if np.any(np.abs(ks * step - gaps) > RATIONAL_TOL * np.maximum(1.0, np.abs(gaps))):
        raise NonLatticeReward("reward values do not sit on a common lattice")
    return low, step, ks


def partial_sum_distribution(K: FiniteKernel, g, x0: int, n: int) -> LatticeDistribution:
    """Exact law of S_n = g(x_0) + ... + g(x_{n-1}) by dynamic programming on (state, lattice point)."""
    if n < 1:
        raise DomainError("n must be >= 1")
    g = as_values(g, K.n)
    low, step, ks = _lattice(g)
    width = n * int(ks.max()) + 1
    if n * width > LATTICE_CAP:
        raise NonLatticeReward(f"lattice too fine: {width} points over {n} steps")
    dist = np.zeros((K.n, width))
    dist[x0, ks[x0]] = 1.0
    PT = K.matrix.T
    for _ in range(1, n):
        moved = PT @ dist
        nxt = np.zeros_like(moved)
        for kv in np.unique(ks):
            rows = ks == kv
            nxt[rows, kv:] = moved[rows, :width - kv]
        dist = nxt
    probs = dist.sum(axis=0)
    reach = np.flatnonzero(probs > 0)
    probs = probs[:reach[-1] + 1]
    return LatticeDistribution(step, n * low, probs / probs.sum())


def _cdf_on(F: LatticeDistribution, pts: np.ndarray) -> np.ndarray:
    cum = np.cumsum(F.probs)
    idx = np.searchsorted(F.support(), pts + 1e-9, side="right") - 1
    return np.where(idx >= 0, cum[np.clip(idx, 0, None)], 0.0)


def stochastic_dominance(F1: LatticeDistribution, F2: LatticeDistribution) -> Dominance:
    """First-order dominance: F1 dominates when its CDF lies below F2's everywhere, strictly somewhere."""
    pts = np.union1d(F1.support()[F1.probs > 0], F2.support()[F2.probs > 0])
    diff = _cdf_on(F1, pts) - _cdf_on(F2, pts)
    if np.all(np.abs(diff) <= CDF_TOL):
        return Dominance.EQUAL
    if np.all(diff <= CDF_TOL):
        return Dominance.DOMINATES
    if np.all(diff >= -CDF_TOL):
        return Dominance.DOMINATED_BY
    return Dominance.INCOMPARABLE
