"""
Entropic utility mu_x(f) = ln sum_y e^{f(y)} P(x,y) and its companions.

Every log-sum-exp shifts by the maximum of f over the support of P(x,.) only;
states outside the support never enter an exponential.
"""
from typing import Union

import numpy as np
from scipy.special import logsumexp

from .errors import InvalidInput, ZeroGamma
from .models import Distribution, FiniteKernel, RewardFunction

Vector = Union[RewardFunction, np.ndarray, list, tuple]


def as_values(f: Vector, n: int = None) -> np.ndarray:
    v = f.values if isinstance(f, RewardFunction) else np.asarray(f, dtype=float)
    if n is not None and v.shape != (n,):
        raise InvalidInput(f"Expected a vector of length {n}, got shape {v.shape}")
    return v


def _weights(d) -> np.ndarray:
    return d.weights if isinstance(d, Distribution) else np.asarray(d, dtype=float)


def _masked(P: np.ndarray, f: np.ndarray) -> np.ndarray:
    # off-support entries are -inf so they never set the shift
    return np.where(P > 0, f[None, :], -np.inf)


def entropic_utility(K: FiniteKernel, x: int, f: Vector) -> float:
    f = as_values(f, K.n)
    row = K.matrix[x]
    s = row > 0
    return float(logsumexp(f[s], b=row[s]))


def entropic_utilities(K: FiniteKernel, f: Vector) -> np.ndarray:
    """mu_x(f) for every state x at once."""
    f = as_values(f, K.n)
    P = K.matrix
    return logsumexp(_masked(P, f), b=P, axis=1)


def esscher_kernel(K: FiniteKernel, f: Vector) -> np.ndarray:
    """Rows proportional to e^{f(y)} P(x,y)."""
    f = as_values(f, K.n)
    P = K.matrix
    F = _masked(P, f)
    E = P * np.exp(F - logsumexp(F, b=P, axis=1, keepdims=True))
    return E / E.sum(axis=1, keepdims=True)


def esscher_measure(K: FiniteKernel, x: int, f: Vector) -> Distribution:
    f = as_values(f, K.n)
    row = K.matrix[x]
    s = row > 0
    w = np.zeros(K.n)
    w[s] = row[s] * np.exp(f[s] - f[s].max())
    return Distribution(w / w.sum())


def relative_entropy(nu, mu) -> float:
    """H[nu | mu] = sum nu ln(nu/mu); +inf when nu charges a state mu does not."""
    nu, mu = _weights(nu), _weights(mu)
    if nu.shape != mu.shape:
        raise InvalidInput("Distributions live on different state spaces")
    pos = nu > 0
    if np.any(mu[pos] <= 0):
        return float("inf")
    return float(np.sum(nu[pos] * np.log(nu[pos] / mu[pos])))


def dual_gap(K: FiniteKernel, x: int, f: Vector, mu) -> float:
    """mu_x(f) - (int f dmu - H[mu | P(x,.)]); nonnegative, zero at the Esscher measure."""
    f = as_values(f, K.n)
    w = _weights(mu)
    h = relative_entropy(w, K.matrix[x])
    if np.isinf(h):
        return float("inf")
    return entropic_utility(K, x, f) - (float(np.dot(f, w)) - h)


def rescale_risk(f: Vector, gamma: float) -> RewardFunction:
    if gamma == 0:
        raise ZeroGamma("Risk aversion gamma must be nonzero")
    return RewardFunction(gamma * as_values(f))


def risk_scaled_utility(K: FiniteKernel, x: int, f: Vector, gamma: float) -> float:
    """Certainty equivalent (1/gamma) ln E_x[e^{gamma f}]."""
    if gamma == 0:
        raise ZeroGamma("Risk aversion gamma must be nonzero")
    f = as_values(f, K.n)
    row = K.matrix[x]
    s = row > 0
    vals = f[s]
    pivot = vals.max() if gamma > 0 else vals.min()
    return float(pivot + np.log(np.dot(row[s], np.exp(gamma * (vals - pivot)))) / gamma)


def check_rescale_identity(K: FiniteKernel, f: Vector, gamma: float) -> float:
    """Largest deviation, over states, between mu^gamma_x(f) and mu_x(gamma f)/gamma."""
    scaled = rescale_risk(f, gamma)
    return max(abs(risk_scaled_utility(K, x, f, gamma) - entropic_utility(K, x, scaled) / gamma)
               for x in range(K.n))
